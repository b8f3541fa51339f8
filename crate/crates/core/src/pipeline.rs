//! The assembled three-stage pipeline: bundle of trained models,
//! end-to-end scoring, and the k-fold stacking trainer.
//!
//! Training follows standard stacking hygiene: stage-1 and stage-2 models
//! are trained per fold and produce *out-of-fold* predictions for every
//! sample; the stage-3 meta-learner trains on those, never on in-sample
//! predictions. SMOTE rebalancing happens strictly inside each fold's
//! training split so synthetic points can never leak into a held-out fold.

use alloc::vec::Vec;

use crate::dataset::{
    smote, stratified_kfold, Dataset, DatasetError, DatasetSchema, Label, LabeledSample,
};
use crate::features::{encode_trace, ContextVector, StaticFeatureVector, TraceEvent};
use crate::forest::{predict_stage1, train_forest, ForestError, ForestHyperParams, ForestModel, Stage1Output};
use crate::fusion::{
    fuse, score, train_meta, FusionError, MetaHyperParams, MetaModel, RiskVerdict, StageHandoff,
};
use crate::lstm::{lstm_forward, lstm_train, LstmError, LstmParams, SeqTrainConfig, Stage2Output};
use crate::metrics::{evaluate_folds, EvalError, FoldEvaluation, MetricsError};
use crate::rng;

#[derive(Debug, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Lstm(#[from] LstmError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("sample does not match bundle schema: {0}")]
    Schema(&'static str),
}

/// Confident-benign gate: samples whose stage-1 score is at or below
/// `g_low` skip stage 2 entirely.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GateConfig {
    pub g_low: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self { g_low: 0.1 }
    }
}

/// SMOTE settings for the training harness.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SmoteSettings {
    pub enabled: bool,
    pub k_neighbors: usize,
}

impl Default for SmoteSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            k_neighbors: 5,
        }
    }
}

/// Everything inference needs: the three trained stages plus the schema
/// the models were trained against.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelBundle {
    pub schema: DatasetSchema,
    pub forest: ForestModel,
    /// Absent when the training data carried no usable traces; scoring
    /// then always takes the neutral stage-2 path.
    pub lstm: Option<LstmParams>,
    pub meta: MetaModel,
    pub handoff: StageHandoff,
    pub gate: Option<GateConfig>,
}

/// Borrowed view of a sample to score; the label, if any, stays outside.
#[derive(Debug, Clone, Copy)]
pub struct SampleView<'a> {
    pub stat: &'a StaticFeatureVector,
    pub trace: Option<&'a [TraceEvent]>,
    pub context: &'a ContextVector,
}

impl<'a> SampleView<'a> {
    pub fn of(sample: &'a LabeledSample) -> Self {
        Self {
            stat: &sample.stat,
            trace: sample.trace.as_deref(),
            context: &sample.context,
        }
    }
}

/// ŷ₂ fixed here whenever stage 2 does not run.
pub const NEUTRAL_STAGE2: f64 = 0.5;

fn stage_two(
    lstm: Option<&LstmParams>,
    schema: &DatasetSchema,
    trace: Option<&[TraceEvent]>,
    y1: &Stage1Output,
    gate: Option<&GateConfig>,
) -> Result<(Stage2Output, bool, bool), LstmError> {
    if let Some(g) = gate {
        if y1.score <= g.g_low {
            return Ok((Stage2Output { score: NEUTRAL_STAGE2 }, false, true));
        }
    }
    match (lstm, trace) {
        (Some(params), Some(events)) => {
            let encoded = encode_trace(events, &schema.trace);
            let y2 = lstm_forward(params, &encoded.encoded)?;
            Ok((y2, false, false))
        }
        _ => Ok((Stage2Output { score: NEUTRAL_STAGE2 }, true, false)),
    }
}

/// Score one sample through all three stages.
pub fn run_pipeline(bundle: &ModelBundle, sample: SampleView<'_>) -> Result<RiskVerdict, PipelineError> {
    if sample.stat.dim() != bundle.schema.static_dim {
        return Err(PipelineError::Schema("static vector length"));
    }
    if sample.context.dim() != bundle.schema.context_dim {
        return Err(PipelineError::Schema("context vector length"));
    }

    let y1 = predict_stage1(&bundle.forest, &sample.stat.values)?;
    let (y2, trace_missing, stage2_gated) = stage_two(
        bundle.lstm.as_ref(),
        &bundle.schema,
        sample.trace,
        &y1,
        bundle.gate.as_ref(),
    )?;
    let xf = fuse(&y1, &y2, sample.context, bundle.handoff);
    let risk = score(&bundle.meta, &xf)?;

    Ok(RiskVerdict {
        risk,
        decision: RiskVerdict::decide(risk, bundle.meta.theta_f),
        stage1: y1,
        stage2: y2,
        context: sample.context.clone(),
        trace_missing,
        stage2_gated,
    })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainSettings {
    pub folds: usize,
    pub forest: ForestHyperParams,
    pub lstm: SeqTrainConfig,
    pub meta: MetaHyperParams,
    pub smote: SmoteSettings,
    pub handoff: StageHandoff,
    pub gate: Option<GateConfig>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            folds: 5,
            forest: ForestHyperParams::default(),
            lstm: SeqTrainConfig::default(),
            meta: MetaHyperParams::default(),
            smote: SmoteSettings::default(),
            handoff: StageHandoff::Binary,
            gate: None,
        }
    }
}

/// Result of the full training protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub bundle: ModelBundle,
    /// Per-fold and aggregate metrics of the stacked pipeline, each fold
    /// evaluated by models that never saw it.
    pub evaluation: FoldEvaluation,
    /// The training data carried no usable (two-class) traces; the
    /// behavioral stage fell back to the neutral path.
    pub no_traces: bool,
    /// Folds where SMOTE was requested but the minority class was too
    /// small to interpolate.
    pub smote_skipped_folds: usize,
}

/// Stage-1 training table for one index set, with SMOTE applied to the
/// minority class when enabled and feasible.
fn stage1_table(
    ds: &Dataset,
    idxs: &[usize],
    settings: &TrainSettings,
    seed: u64,
    skipped: &mut usize,
) -> Result<(Vec<Vec<f64>>, Vec<Label>), DatasetError> {
    let mut x: Vec<Vec<f64>> = idxs.iter().map(|&i| ds.samples[i].stat.values.clone()).collect();
    let mut y: Vec<Label> = idxs.iter().map(|&i| ds.samples[i].label).collect();

    if settings.smote.enabled {
        let pos = y.iter().filter(|l| l.is_malicious()).count();
        let neg = y.len() - pos;
        let (minority_label, minority_n, majority_n) = if pos <= neg {
            (Label::Malicious, pos, neg)
        } else {
            (Label::Benign, neg, pos)
        };
        if minority_n < majority_n {
            if minority_n >= settings.smote.k_neighbors + 1 {
                let minority: Vec<StaticFeatureVector> = idxs
                    .iter()
                    .filter(|&&i| ds.samples[i].label == minority_label)
                    .map(|&i| ds.samples[i].stat.clone())
                    .collect();
                let synth = smote(&minority, settings.smote.k_neighbors, majority_n, seed)?;
                for s in synth {
                    x.push(s.values);
                    y.push(minority_label);
                }
            } else {
                *skipped += 1;
            }
        }
    }
    Ok((x, y))
}

/// LSTM training table: encoded traces of the samples that have one.
/// Returns `None` when the table is empty or single-class.
fn try_train_lstm(
    encoded: &[Option<Vec<Vec<f64>>>],
    ds: &Dataset,
    idxs: &[usize],
    cfg: &SeqTrainConfig,
    seed: u64,
) -> Result<Option<LstmParams>, LstmError> {
    let data: Vec<(Vec<Vec<f64>>, Label)> = idxs
        .iter()
        .filter_map(|&i| encoded[i].as_ref().map(|e| (e.clone(), ds.samples[i].label)))
        .collect();
    let has_pos = data.iter().any(|(_, y)| y.is_malicious());
    let has_neg = data.iter().any(|(_, y)| !y.is_malicious());
    if data.is_empty() || !has_pos || !has_neg {
        return Ok(None);
    }
    let m = ds.schema.trace.event_dim();
    match lstm_train(&data, m, cfg, seed) {
        Ok(outcome) => Ok(Some(outcome.params)),
        Err(LstmError::SingleClass) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Train all three stages with out-of-fold stacking and evaluate the
/// pipeline across the folds. Fully determined by `(dataset, settings,
/// seed)`.
pub fn train_pipeline(
    ds: &Dataset,
    settings: &TrainSettings,
    seed: u64,
) -> Result<TrainOutcome, PipelineError> {
    ds.validate()?;
    let plan = stratified_kfold(ds, settings.folds, seed)?;

    // Encode every trace once up front.
    let encoded: Vec<Option<Vec<Vec<f64>>>> = ds
        .samples
        .iter()
        .map(|s| {
            s.trace
                .as_ref()
                .map(|events| encode_trace(events, &ds.schema.trace).encoded)
        })
        .collect();

    let mut smote_skipped = 0usize;
    let mut oof: Vec<Option<(Stage1Output, Stage2Output)>> = alloc::vec![None; ds.len()];
    let mut any_fold_lstm = false;

    for fold in 0..plan.k {
        let (train_idx, held_idx) = plan.split(ds, fold);
        let fold_seed = rng::derive(seed, fold as u64 + 1);

        let (x1, y1) = stage1_table(ds, &train_idx, settings, fold_seed, &mut smote_skipped)?;
        let forest = train_forest(&x1, &y1, &settings.forest, fold_seed)?;
        let lstm = try_train_lstm(&encoded, ds, &train_idx, &settings.lstm, fold_seed)?;
        any_fold_lstm |= lstm.is_some();

        for &i in &held_idx {
            let s1 = predict_stage1(&forest, &ds.samples[i].stat.values)?;
            let (s2, _, _) = stage_two(
                lstm.as_ref(),
                &ds.schema,
                ds.samples[i].trace.as_deref(),
                &s1,
                settings.gate.as_ref(),
            )?;
            oof[i] = Some((s1, s2));
        }
    }

    let fused_row = |i: usize| -> Vec<f64> {
        let (s1, s2) = oof[i].as_ref().expect("out-of-fold prediction exists");
        fuse(s1, s2, &ds.samples[i].context, settings.handoff).values
    };

    // Per-fold evaluation: a meta-learner trained only on the out-of-fold
    // rows of the other folds scores the held-out fold.
    let evaluation = evaluate_folds(ds, &plan, |ds, train_idx, held_idx| {
        let x: Vec<Vec<f64>> = train_idx.iter().map(|&i| fused_row(i)).collect();
        let y: Vec<Label> = train_idx.iter().map(|&i| ds.samples[i].label).collect();
        let meta = train_meta(&x, &y, &settings.meta, rng::derive(seed, 1_000))?;
        held_idx
            .iter()
            .map(|&i| {
                let risk = score(&meta, &crate::fusion::FusedVector { values: fused_row(i) })?;
                Ok(RiskVerdict::decide(risk, meta.theta_f))
            })
            .collect::<Result<Vec<Label>, FusionError>>()
    })
    .map_err(|e| match e {
        EvalError::Train(e) => PipelineError::Fusion(e),
        EvalError::Metrics(e) => PipelineError::Metrics(e),
    })?;

    // Final models: stages retrained on everything, meta on all
    // out-of-fold rows.
    let final_seed = rng::derive(seed, 0);
    let all: Vec<usize> = (0..ds.len()).collect();
    let (x1, y1) = stage1_table(ds, &all, settings, final_seed, &mut smote_skipped)?;
    let forest = train_forest(&x1, &y1, &settings.forest, final_seed)?;
    let lstm = try_train_lstm(&encoded, ds, &all, &settings.lstm, final_seed)?;

    let x_meta: Vec<Vec<f64>> = all.iter().map(|&i| fused_row(i)).collect();
    let y_meta: Vec<Label> = ds.samples.iter().map(|s| s.label).collect();
    let meta = train_meta(&x_meta, &y_meta, &settings.meta, final_seed)?;

    let no_traces = !any_fold_lstm && lstm.is_none();
    Ok(TrainOutcome {
        bundle: ModelBundle {
            schema: ds.schema.clone(),
            forest,
            lstm,
            meta,
            handoff: settings.handoff,
            gate: settings.gate,
        },
        evaluation,
        no_traces,
        smote_skipped_folds: smote_skipped,
    })
}
