//! Stage 3: context-aware fusion.
//!
//! The two stage outputs and the context vector concatenate into the
//! fused vector `[ŷ₁, ŷ₂, x_c…]` of length k+2; a from-scratch
//! gradient-boosted ensemble of depth-limited regression trees maps it to
//! the final risk score. Boosting uses logistic loss: each round fits a
//! tree to the negative gradients with Newton leaf values and adds it
//! with shrinkage.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::dataset::Label;
use crate::features::ContextVector;
use crate::forest::Stage1Output;
use crate::lstm::Stage2Output;
use crate::math;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FusionError {
    #[error("training set must contain both classes")]
    SingleClass,
    #[error("fused vector has length {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid hyperparameter: {0}")]
    BadHyperParams(&'static str),
}

/// Which form of the stage-1 output enters the fused vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageHandoff {
    /// The binarized label (0 or 1) — the default contract.
    Binary,
    /// The raw vote fraction.
    Soft,
}

/// Fused meta-learner input `[ŷ₁, ŷ₂, x_c…]`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FusedVector {
    pub values: Vec<f64>,
}

impl FusedVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Order-preserving concatenation: stage-1 value, stage-2 score, then the
/// context vector. Output length is always `context dim + 2`.
pub fn fuse(
    y1: &Stage1Output,
    y2: &Stage2Output,
    xc: &ContextVector,
    handoff: StageHandoff,
) -> FusedVector {
    let first = match handoff {
        StageHandoff::Binary => y1.label.bit() as f64,
        StageHandoff::Soft => y1.score,
    };
    let mut values = Vec::with_capacity(xc.dim() + 2);
    values.push(first);
    values.push(y2.score);
    values.extend_from_slice(&xc.values);
    FusedVector { values }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum RegNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<RegNode>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                RegNode::Leaf { value } => return *value,
                RegNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetaHyperParams {
    pub rounds: usize,
    pub max_depth: usize,
    /// Shrinkage η applied to every tree's contribution.
    pub shrinkage: f64,
    /// Fraction of features each tree may split on (1.0 = all).
    pub colsample: f64,
    /// Decision threshold θ_f on the final risk score.
    pub theta_f: f64,
}

impl Default for MetaHyperParams {
    fn default() -> Self {
        Self {
            rounds: 100,
            max_depth: 3,
            shrinkage: 0.1,
            colsample: 1.0,
            theta_f: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetaModel {
    pub trees: Vec<RegressionTree>,
    pub base_log_odds: f64,
    pub shrinkage: f64,
    pub n_features: usize,
    pub theta_f: f64,
}

/// Final pipeline verdict with full stage provenance.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RiskVerdict {
    pub risk: f64,
    pub decision: Label,
    pub stage1: Stage1Output,
    pub stage2: Stage2Output,
    pub context: ContextVector,
    /// The sample carried no behavior trace; ŷ₂ was fixed at 0.5.
    pub trace_missing: bool,
    /// Stage 2 was skipped by the confident-benign gate; ŷ₂ fixed at 0.5.
    pub stage2_gated: bool,
}

impl RiskVerdict {
    pub fn decide(risk: f64, theta_f: f64) -> Label {
        if risk >= theta_f {
            Label::Malicious
        } else {
            Label::Benign
        }
    }
}

const NEWTON_LAMBDA: f64 = 1e-6;
const MIN_GAIN: f64 = 1e-12;

struct BoostBuilder<'a> {
    x: &'a [Vec<f64>],
    grad: &'a [f64],
    hess: &'a [f64],
    features: &'a [usize],
    max_depth: usize,
    nodes: Vec<RegNode>,
}

impl<'a> BoostBuilder<'a> {
    fn leaf_value(&self, idxs: &[usize]) -> f64 {
        let g: f64 = idxs.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = idxs.iter().map(|&i| self.hess[i]).sum();
        -g / (h + NEWTON_LAMBDA)
    }

    fn build(&mut self, idxs: &[usize], depth: usize) -> u32 {
        if depth >= self.max_depth || idxs.len() < 2 {
            let value = self.leaf_value(idxs);
            return self.push(RegNode::Leaf { value });
        }
        let Some((feature, threshold)) = self.best_split(idxs) else {
            let value = self.leaf_value(idxs);
            return self.push(RegNode::Leaf { value });
        };

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            idxs.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let at = self.push(RegNode::Leaf { value: 0.0 });
        let left = self.build(&left_idx, depth + 1);
        let right = self.build(&right_idx, depth + 1);
        self.nodes[at as usize] = RegNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        at
    }

    fn push(&mut self, node: RegNode) -> u32 {
        let at = self.nodes.len() as u32;
        self.nodes.push(node);
        at
    }

    /// Best split by Newton gain
    /// `½·(G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ))`, requiring a strictly
    /// positive gain; ties keep the first candidate (lower feature index,
    /// then lower threshold).
    fn best_split(&self, idxs: &[usize]) -> Option<(usize, f64)> {
        let g_total: f64 = idxs.iter().map(|&i| self.grad[i]).sum();
        let h_total: f64 = idxs.iter().map(|&i| self.hess[i]).sum();
        let parent = g_total * g_total / (h_total + NEWTON_LAMBDA);

        let mut best: Option<(f64, usize, f64)> = None;
        let mut pairs: Vec<(f64, f64, f64)> = Vec::with_capacity(idxs.len());
        for &feature in self.features {
            pairs.clear();
            pairs.extend(
                idxs.iter()
                    .map(|&i| (self.x[i][feature], self.grad[i], self.hess[i])),
            );
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

            let mut gl = 0.0;
            let mut hl = 0.0;
            for w in 0..pairs.len() - 1 {
                gl += pairs[w].1;
                hl += pairs[w].2;
                if pairs[w].0 == pairs[w + 1].0 {
                    continue;
                }
                let gr = g_total - gl;
                let hr = h_total - hl;
                let gain = 0.5
                    * (gl * gl / (hl + NEWTON_LAMBDA) + gr * gr / (hr + NEWTON_LAMBDA) - parent);
                if gain <= MIN_GAIN {
                    continue;
                }
                if best.map_or(true, |(g, _, _)| gain > g) {
                    let threshold = (pairs[w].0 + pairs[w + 1].0) / 2.0;
                    best = Some((gain, feature, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

/// Boost `rounds` regression trees on logistic loss over fused rows,
/// starting from the base-rate log-odds.
pub fn train_meta(
    x: &[Vec<f64>],
    y: &[Label],
    hparams: &MetaHyperParams,
    seed: u64,
) -> Result<MetaModel, FusionError> {
    if x.len() != y.len() || x.is_empty() {
        return Err(FusionError::BadHyperParams("x and y must be equal-length and non-empty"));
    }
    let n_features = x[0].len();
    if x.iter().any(|r| r.len() != n_features) {
        return Err(FusionError::BadHyperParams("rows differ in length"));
    }
    if hparams.max_depth == 0 {
        return Err(FusionError::BadHyperParams("max_depth must be at least 1"));
    }
    if !(hparams.shrinkage > 0.0) {
        return Err(FusionError::BadHyperParams("shrinkage must be positive"));
    }
    if !(hparams.colsample > 0.0 && hparams.colsample <= 1.0) {
        return Err(FusionError::BadHyperParams("colsample must lie in (0, 1]"));
    }
    if !(hparams.theta_f > 0.0 && hparams.theta_f < 1.0) {
        return Err(FusionError::BadHyperParams("theta_f must lie in (0, 1)"));
    }
    let pos = y.iter().filter(|l| l.is_malicious()).count();
    if pos == 0 || pos == y.len() {
        return Err(FusionError::SingleClass);
    }

    let p0 = pos as f64 / y.len() as f64;
    let base_log_odds = math::ln(p0 / (1.0 - p0));

    let mut rng = rng::for_stream(seed, rng::stream::META);
    let col_count = ((n_features as f64 * hparams.colsample).ceil() as usize).clamp(1, n_features);

    let mut score = alloc::vec![base_log_odds; x.len()];
    let all: Vec<usize> = (0..x.len()).collect();
    let mut trees = Vec::with_capacity(hparams.rounds);
    for _ in 0..hparams.rounds {
        let features: Vec<usize> = if col_count == n_features {
            (0..n_features).collect()
        } else {
            let mut cols: Vec<usize> = (0..n_features).collect();
            cols.shuffle(&mut rng);
            let mut picked = cols[..col_count].to_vec();
            picked.sort_unstable();
            picked
        };

        let mut grad = Vec::with_capacity(x.len());
        let mut hess = Vec::with_capacity(x.len());
        for (s, yi) in score.iter().zip(y) {
            let p = math::sigmoid(*s);
            grad.push(p - yi.bit() as f64);
            hess.push(p * (1.0 - p));
        }

        let mut builder = BoostBuilder {
            x,
            grad: &grad,
            hess: &hess,
            features: &features,
            max_depth: hparams.max_depth,
            nodes: Vec::new(),
        };
        builder.build(&all, 0);
        let tree = RegressionTree {
            nodes: builder.nodes,
        };
        for (s, row) in score.iter_mut().zip(x) {
            *s += hparams.shrinkage * tree.predict(row);
        }
        trees.push(tree);
    }

    Ok(MetaModel {
        trees,
        base_log_odds,
        shrinkage: hparams.shrinkage,
        n_features,
        theta_f: hparams.theta_f,
    })
}

/// Final risk score `sigmoid(base + η·Σ tree(x_f))`, strictly inside (0, 1).
pub fn score(model: &MetaModel, xf: &FusedVector) -> Result<f64, FusionError> {
    if xf.dim() != model.n_features {
        return Err(FusionError::DimensionMismatch {
            expected: model.n_features,
            got: xf.dim(),
        });
    }
    let mut z = model.base_log_odds;
    for tree in &model.trees {
        z += model.shrinkage * tree.predict(&xf.values);
    }
    Ok(math::sigmoid(z)
        .max(f64::MIN_POSITIVE)
        .min(1.0 - f64::EPSILON / 2.0))
}
