//! Binary classification metrics and the k-fold evaluation harness.

use alloc::string::String;
use alloc::vec::Vec;

use crate::dataset::{Dataset, FoldPlan, Label};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("label vectors differ in length: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("entry {index} is {got}, labels must be 0 or 1")]
    NonBinaryEntry { index: usize, got: u8 },
    #[error("confusion counts are all zero")]
    EmptyCounts,
    #[error("sample count must be at least 1")]
    ZeroSamples,
    #[error("total time must be non-negative")]
    NegativeTime,
    #[error("fold {fold}: trainer returned {got} predictions for {expected} held-out samples")]
    PredictionCountMismatch {
        fold: usize,
        expected: usize,
        got: usize,
    },
}

/// TP/TN/FP/FN tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ConfusionCounts {
    #[serde(rename = "tp")]
    pub true_pos: u64,
    #[serde(rename = "tn")]
    pub true_neg: u64,
    #[serde(rename = "fp")]
    pub false_pos: u64,
    #[serde(rename = "fn")]
    pub false_neg: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.true_pos + self.true_neg + self.false_pos + self.false_neg
    }

    pub fn add(&mut self, other: &ConfusionCounts) {
        self.true_pos += other.true_pos;
        self.true_neg += other.true_neg;
        self.false_pos += other.false_pos;
        self.false_neg += other.false_neg;
    }
}

/// Which metric denominators were 0/0 (reported as 0 by convention).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DegenerateFlags {
    pub precision: bool,
    pub recall: bool,
    pub f1: bool,
    pub fpr: bool,
}

impl DegenerateFlags {
    pub fn any(&self) -> bool {
        self.precision || self.recall || self.f1 || self.fpr
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fpr: f64,
    /// Mean per-sample scoring latency; 0 until a timing harness fills it.
    pub latency_ms: f64,
    #[serde(flatten)]
    pub counts: ConfusionCounts,
    pub n_samples: u64,
    pub degenerate: DegenerateFlags,
}

/// Tally a confusion matrix from matched label vectors.
pub fn confusion(y_true: &[Label], y_pred: &[Label]) -> Result<ConfusionCounts, MetricsError> {
    if y_true.len() != y_pred.len() {
        return Err(MetricsError::LengthMismatch {
            a: y_true.len(),
            b: y_pred.len(),
        });
    }
    let mut c = ConfusionCounts::default();
    for (t, p) in y_true.iter().zip(y_pred) {
        match (t.is_malicious(), p.is_malicious()) {
            (true, true) => c.true_pos += 1,
            (false, false) => c.true_neg += 1,
            (false, true) => c.false_pos += 1,
            (true, false) => c.false_neg += 1,
        }
    }
    Ok(c)
}

/// Like [`confusion`] but over raw 0/1 integers, rejecting anything else.
pub fn confusion_bits(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionCounts, MetricsError> {
    let parse = |bits: &[u8]| -> Result<Vec<Label>, MetricsError> {
        bits.iter()
            .enumerate()
            .map(|(index, &b)| {
                Label::try_from(b).map_err(|_| MetricsError::NonBinaryEntry { index, got: b })
            })
            .collect()
    };
    confusion(&parse(y_true)?, &parse(y_pred)?)
}

fn ratio(num: u64, den: u64, degenerate: &mut bool) -> f64 {
    if den == 0 {
        *degenerate = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Compute accuracy, precision, recall, F1, and FPR from counts.
/// Any 0/0 denominator yields 0 and sets the matching degenerate flag.
pub fn compute_metrics(c: &ConfusionCounts) -> Result<MetricsReport, MetricsError> {
    let total = c.total();
    if total == 0 {
        return Err(MetricsError::EmptyCounts);
    }
    let mut degenerate = DegenerateFlags::default();
    let accuracy = (c.true_pos + c.true_neg) as f64 / total as f64;
    let precision = ratio(c.true_pos, c.true_pos + c.false_pos, &mut degenerate.precision);
    let recall = ratio(c.true_pos, c.true_pos + c.false_neg, &mut degenerate.recall);
    let fpr = ratio(c.false_pos, c.false_pos + c.true_neg, &mut degenerate.fpr);
    let f1 = if precision + recall == 0.0 {
        degenerate.f1 = true;
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };

    Ok(MetricsReport {
        accuracy,
        precision,
        recall,
        f1,
        fpr,
        latency_ms: 0.0,
        counts: *c,
        n_samples: total,
        degenerate,
    })
}

/// Mean per-sample detection latency: total time divided by sample count.
pub fn detection_latency(total_time_ms: f64, n_samples: u64) -> Result<f64, MetricsError> {
    if n_samples == 0 {
        return Err(MetricsError::ZeroSamples);
    }
    if !(total_time_ms >= 0.0) {
        return Err(MetricsError::NegativeTime);
    }
    Ok(total_time_ms / n_samples as f64)
}

/// Unweighted across-fold means of the five metric fields.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MeanMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fpr: f64,
}

/// One held-out fold's stored predictions and report.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    pub fold: usize,
    /// (sample id, truth, prediction) for every held-out sample.
    pub predictions: Vec<(String, Label, Label)>,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldEvaluation {
    pub per_fold: Vec<FoldOutcome>,
    /// Unweighted mean of per-fold metrics.
    pub mean: MeanMetrics,
    /// Metrics over the pooled confusion counts of all folds.
    pub pooled: MetricsReport,
}

#[derive(Debug, PartialEq, thiserror::Error)]
pub enum EvalError<E> {
    #[error("fold training failed: {0}")]
    Train(E),
    #[error(transparent)]
    Metrics(MetricsError),
}

/// Run the k-fold protocol: for every fold, `train_and_predict(dataset,
/// train_indices, held_out_indices)` returns predicted labels for the
/// held-out samples (training-side rebalancing such as SMOTE is the
/// trainer's business and must stay inside the training indices).
/// Reports are aggregated both as unweighted means and over pooled counts.
pub fn evaluate_folds<F, E>(
    ds: &Dataset,
    plan: &FoldPlan,
    mut train_and_predict: F,
) -> Result<FoldEvaluation, EvalError<E>>
where
    F: FnMut(&Dataset, &[usize], &[usize]) -> Result<Vec<Label>, E>,
{
    let mut per_fold = Vec::with_capacity(plan.k);
    let mut pooled_counts = ConfusionCounts::default();

    for fold in 0..plan.k {
        let (train_idx, held_idx) = plan.split(ds, fold);
        let preds = train_and_predict(ds, &train_idx, &held_idx).map_err(EvalError::Train)?;
        if preds.len() != held_idx.len() {
            return Err(EvalError::Metrics(MetricsError::PredictionCountMismatch {
                fold,
                expected: held_idx.len(),
                got: preds.len(),
            }));
        }

        let truth: Vec<Label> = held_idx.iter().map(|&i| ds.samples[i].label).collect();
        let counts = confusion(&truth, &preds).map_err(EvalError::Metrics)?;
        pooled_counts.add(&counts);
        let report = compute_metrics(&counts).map_err(EvalError::Metrics)?;

        let predictions = held_idx
            .iter()
            .zip(&preds)
            .map(|(&i, &p)| (ds.samples[i].id.clone(), ds.samples[i].label, p))
            .collect();
        per_fold.push(FoldOutcome {
            fold,
            predictions,
            report,
        });
    }

    let k = per_fold.len() as f64;
    let mean = MeanMetrics {
        accuracy: per_fold.iter().map(|f| f.report.accuracy).sum::<f64>() / k,
        precision: per_fold.iter().map(|f| f.report.precision).sum::<f64>() / k,
        recall: per_fold.iter().map(|f| f.report.recall).sum::<f64>() / k,
        f1: per_fold.iter().map(|f| f.report.f1).sum::<f64>() / k,
        fpr: per_fold.iter().map(|f| f.report.fpr).sum::<f64>() / k,
    };
    let pooled = compute_metrics(&pooled_counts).map_err(EvalError::Metrics)?;

    Ok(FoldEvaluation {
        per_fold,
        mean,
        pooled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, stratified_kfold, SynthConfig};
    use core::convert::Infallible;

    fn labels(bits: &[u8]) -> Vec<Label> {
        bits.iter().map(|&b| Label::try_from(b).unwrap()).collect()
    }

    #[test]
    fn confusion_identity() {
        let y = labels(&[1, 0, 1]);
        let c = confusion(&y, &y).unwrap();
        assert_eq!(c, ConfusionCounts { true_pos: 2, true_neg: 1, false_pos: 0, false_neg: 0 });
    }

    #[test]
    fn confusion_complement_of_all_positive() {
        let c = confusion(&labels(&[1, 1]), &labels(&[0, 0])).unwrap();
        assert_eq!(c.true_pos, 0);
        assert_eq!(c.false_neg, 2);
    }

    #[test]
    fn confusion_mixed() {
        let c = confusion(&labels(&[1, 1, 0, 0]), &labels(&[1, 0, 1, 0])).unwrap();
        assert_eq!(c, ConfusionCounts { true_pos: 1, true_neg: 1, false_pos: 1, false_neg: 1 });
    }

    #[test]
    fn confusion_input_validation() {
        assert_eq!(
            confusion(&labels(&[1]), &labels(&[1, 0])).unwrap_err(),
            MetricsError::LengthMismatch { a: 1, b: 2 }
        );
        assert_eq!(
            confusion_bits(&[1, 2], &[0, 0]).unwrap_err(),
            MetricsError::NonBinaryEntry { index: 1, got: 2 }
        );
    }

    #[test]
    fn perfect_classifier_metrics() {
        let c = ConfusionCounts { true_pos: 50, true_neg: 50, false_pos: 0, false_neg: 0 };
        let r = compute_metrics(&c).unwrap();
        assert_eq!((r.accuracy, r.precision, r.recall, r.f1), (1.0, 1.0, 1.0, 1.0));
        assert_eq!(r.fpr, 0.0);
        assert!(!r.degenerate.any());
    }

    #[test]
    fn exact_rational_reference_counts() {
        let c = ConfusionCounts { true_pos: 90, true_neg: 95, false_pos: 5, false_neg: 10 };
        let r = compute_metrics(&c).unwrap();
        assert!((r.precision - 18.0 / 19.0).abs() < 1e-15);
        assert!((r.recall - 0.9).abs() < 1e-15);
        assert!((r.f1 - 324.0 / 351.0).abs() < 1e-15);
        assert!((r.accuracy - 0.925).abs() < 1e-15);
        assert!((r.fpr - 0.05).abs() < 1e-15);
    }

    #[test]
    fn no_positive_predictions_flags_degenerate_precision() {
        let c = ConfusionCounts { true_pos: 0, true_neg: 5, false_pos: 0, false_neg: 3 };
        let r = compute_metrics(&c).unwrap();
        assert_eq!(r.precision, 0.0);
        assert!(r.degenerate.precision);
        assert!(r.degenerate.f1); // P + R = 0 here too
        assert!(!r.degenerate.fpr);
    }

    #[test]
    fn latency_is_a_plain_mean() {
        assert_eq!(detection_latency(250.0, 10).unwrap(), 25.0);
        assert_eq!(detection_latency(0.0, 7).unwrap(), 0.0);
        assert!((detection_latency(100.0, 3).unwrap() - 33.333333333333336).abs() < 1e-12);
        assert_eq!(detection_latency(1.0, 0).unwrap_err(), MetricsError::ZeroSamples);
        assert_eq!(detection_latency(-1.0, 2).unwrap_err(), MetricsError::NegativeTime);
    }

    #[test]
    fn rate_complements_are_exact() {
        let c = ConfusionCounts { true_pos: 13, true_neg: 29, false_pos: 7, false_neg: 11 };
        let r = compute_metrics(&c).unwrap();
        let fnr = c.false_neg as f64 / (c.true_pos + c.false_neg) as f64;
        assert_eq!(r.recall + fnr, 1.0);
        let tnr = c.true_neg as f64 / (c.false_pos + c.true_neg) as f64;
        assert_eq!(r.fpr + tnr, 1.0);
    }

    fn small_ds() -> Dataset {
        generate_synthetic(
            &SynthConfig {
                benign: 14,
                malicious: 6,
                ..SynthConfig::default()
            },
            5,
        )
        .unwrap()
    }

    #[test]
    fn constant_positive_classifier_pools_to_known_rates() {
        let ds = small_ds();
        let plan = stratified_kfold(&ds, 2, 0).unwrap();
        let eval = evaluate_folds(&ds, &plan, |_, _, held| {
            Ok::<_, Infallible>(alloc::vec![Label::Malicious; held.len()])
        })
        .unwrap();
        assert_eq!(eval.pooled.recall, 1.0);
        assert_eq!(eval.pooled.fpr, 1.0);
        assert_eq!(eval.pooled.counts.true_pos, 6);
        assert_eq!(eval.pooled.counts.false_pos, 14);
    }

    #[test]
    fn per_fold_reports_replay_from_stored_predictions() {
        let ds = small_ds();
        let plan = stratified_kfold(&ds, 4, 1).unwrap();
        // Arbitrary but deterministic per-sample rule.
        let eval = evaluate_folds(&ds, &plan, |ds, _, held| {
            Ok::<_, Infallible>(
                held.iter()
                    .map(|&i| {
                        if ds.samples[i].id.ends_with(|c: char| "02468".contains(c)) {
                            Label::Malicious
                        } else {
                            Label::Benign
                        }
                    })
                    .collect(),
            )
        })
        .unwrap();
        for fold in &eval.per_fold {
            let truth: Vec<Label> = fold.predictions.iter().map(|(_, t, _)| *t).collect();
            let preds: Vec<Label> = fold.predictions.iter().map(|(_, _, p)| *p).collect();
            let replayed = compute_metrics(&confusion(&truth, &preds).unwrap()).unwrap();
            assert!((replayed.accuracy - fold.report.accuracy).abs() < 1e-12);
            assert!((replayed.precision - fold.report.precision).abs() < 1e-12);
            assert!((replayed.recall - fold.report.recall).abs() < 1e-12);
            assert!((replayed.f1 - fold.report.f1).abs() < 1e-12);
            assert!((replayed.fpr - fold.report.fpr).abs() < 1e-12);
        }
    }

    #[test]
    fn pooled_counts_ignore_sample_order() {
        let ds = small_ds();
        let plan = stratified_kfold(&ds, 2, 3).unwrap();
        let rule = |id: &str| {
            if id.len() % 2 == 0 {
                Label::Malicious
            } else {
                Label::Benign
            }
        };
        let run = |ds: &Dataset| {
            evaluate_folds(ds, &plan, |ds, _, held| {
                Ok::<_, Infallible>(held.iter().map(|&i| rule(&ds.samples[i].id)).collect())
            })
            .unwrap()
            .pooled
            .counts
        };
        let a = run(&ds);
        let mut shuffled = ds.clone();
        shuffled.samples.reverse();
        assert_eq!(a, run(&shuffled));
    }

    #[test]
    fn trainer_errors_propagate() {
        let ds = small_ds();
        let plan = stratified_kfold(&ds, 2, 0).unwrap();
        let out = evaluate_folds(&ds, &plan, |_, _, _| Err::<Vec<Label>, _>("boom"));
        assert_eq!(out.unwrap_err(), EvalError::Train("boom"));
    }
}
