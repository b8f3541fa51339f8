//! Stage 1: random forest over static feature vectors.
//!
//! Trees are grown on bootstrap resamples with per-node feature
//! subsampling; splits maximize Gini impurity decrease. Split comparison
//! uses exact integer arithmetic (the Gini objective over counts is a
//! rational number), so "maximum decrease" and its tie-breaking — lower
//! feature index, then lower threshold — are well-defined regardless of
//! float rounding.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dataset::Label;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ForestError {
    #[error("training set must contain both classes")]
    SingleClass,
    #[error("need at least 2 training samples, got {got}")]
    TooFewSamples { got: usize },
    #[error("feature vector has length {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid hyperparameter: {0}")]
    BadHyperParams(&'static str),
    #[error("training rows differ in length")]
    RaggedRows,
}

/// How many features each split considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubsample {
    /// ⌈√n⌉ features per node (the usual forest default).
    Sqrt,
    /// Every feature at every node.
    All,
    /// A fixed count (clamped to the feature dimension).
    Fixed(usize),
}

impl FeatureSubsample {
    fn count(self, n_features: usize) -> usize {
        match self {
            FeatureSubsample::Sqrt => {
                let mut c = 1;
                while c * c < n_features {
                    c += 1;
                }
                c
            }
            FeatureSubsample::All => n_features,
            FeatureSubsample::Fixed(c) => c.clamp(1, n_features),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ForestHyperParams {
    pub tree_count: usize,
    pub max_depth: usize,
    pub feature_subsample: FeatureSubsample,
    /// Train each tree on a bootstrap resample (disable for exact,
    /// whole-dataset trees in verification settings).
    pub bootstrap: bool,
    /// Vote-fraction threshold θ₁ for the binary stage output.
    pub theta1: f64,
}

impl Default for ForestHyperParams {
    fn default() -> Self {
        Self {
            tree_count: 100,
            max_depth: 12,
            feature_subsample: FeatureSubsample::Sqrt,
            bootstrap: true,
            theta1: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Node {
    Leaf {
        positive_fraction: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

/// One CART-style tree stored as a node arena; index 0 is the root.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    /// Positive fraction at the leaf reached by `x` (values ≤ threshold go left).
    pub fn leaf_fraction(&self, x: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { positive_fraction } => return *positive_fraction,
                Node::Split {
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

    pub fn votes_positive(&self, x: &[f64]) -> bool {
        self.leaf_fraction(x) >= 0.5
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub n_features: usize,
    pub theta1: f64,
    pub seed: u64,
    pub hparams: ForestHyperParams,
}

/// Stage-1 result: vote fraction and its binarization against θ₁.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Stage1Output {
    pub score: f64,
    pub label: Label,
}

/// Exact comparison of candidate splits.
///
/// For child purity sums `A = pos² + neg²` the split objective is
/// `A_l/n_l + A_r/n_r` (maximizing it minimizes weighted Gini impurity).
/// Candidates are compared by cross-multiplying the exact fractions.
#[derive(Debug, Clone, Copy)]
struct SplitScore {
    al: u128,
    ar: u128,
    nl: u128,
    nr: u128,
}

impl SplitScore {
    fn new(l_pos: u64, l_neg: u64, r_pos: u64, r_neg: u64) -> Self {
        let (lp, ln, rp, rn) = (l_pos as u128, l_neg as u128, r_pos as u128, r_neg as u128);
        Self {
            al: lp * lp + ln * ln,
            ar: rp * rp + rn * rn,
            nl: lp + ln,
            nr: rp + rn,
        }
    }

    fn beats(&self, other: &SplitScore) -> bool {
        let lhs = (self.al * self.nr + self.ar * self.nl) * (other.nl * other.nr);
        let rhs = (other.al * other.nr + other.ar * other.nl) * (self.nl * self.nr);
        lhs > rhs
    }

    /// Whether this split strictly improves on the unsplit parent
    /// (`A_p/n` with `A_p = pos² + neg²` over the whole node).
    fn improves_parent(&self, pos: u64, neg: u64) -> bool {
        let (p, q) = (pos as u128, neg as u128);
        let ap = p * p + q * q;
        let n = p + q;
        (self.al * self.nr + self.ar * self.nl) * n > ap * (self.nl * self.nr)
    }
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [Label],
    hparams: &'a ForestHyperParams,
    n_features: usize,
    nodes: Vec<Node>,
}

impl<'a> TreeBuilder<'a> {
    fn build(&mut self, idxs: &[usize], depth: usize, rng: &mut rand_chacha::ChaCha8Rng) -> u32 {
        let pos = idxs.iter().filter(|&&i| self.y[i].is_malicious()).count() as u64;
        let total = idxs.len() as u64;
        let fraction = pos as f64 / total as f64;

        if depth >= self.hparams.max_depth || pos == 0 || pos == total {
            return self.push_leaf(fraction);
        }

        let best = self.best_split(idxs, rng);
        let Some((feature, threshold)) = best else {
            return self.push_leaf(fraction);
        };

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idxs
            .iter()
            .partition(|&&i| self.x[i][feature] <= threshold);

        let at = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf {
            positive_fraction: fraction, // placeholder, patched below
        });
        let left = self.build(&left_idx, depth + 1, rng);
        let right = self.build(&right_idx, depth + 1, rng);
        self.nodes[at as usize] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        at
    }

    fn push_leaf(&mut self, positive_fraction: f64) -> u32 {
        let at = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf { positive_fraction });
        at
    }

    fn best_split(
        &self,
        idxs: &[usize],
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Option<(usize, f64)> {
        let want = self.hparams.feature_subsample.count(self.n_features);
        let mut candidates: Vec<usize>;
        if want >= self.n_features {
            candidates = (0..self.n_features).collect();
        } else {
            let mut all: Vec<usize> = (0..self.n_features).collect();
            all.shuffle(rng);
            candidates = all[..want].to_vec();
            // Ascending order makes the lower-feature-index tie-break hold
            // regardless of the shuffle.
            candidates.sort_unstable();
        }

        let node_pos = idxs.iter().filter(|&&i| self.y[i].is_malicious()).count() as u64;
        let node_neg = idxs.len() as u64 - node_pos;

        let mut best: Option<(SplitScore, usize, f64)> = None;
        let mut pairs: Vec<(f64, bool)> = Vec::with_capacity(idxs.len());
        for &feature in &candidates {
            pairs.clear();
            pairs.extend(
                idxs.iter()
                    .map(|&i| (self.x[i][feature], self.y[i].is_malicious())),
            );
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

            let mut l_pos = 0u64;
            let mut l_neg = 0u64;
            for w in 0..pairs.len() - 1 {
                if pairs[w].1 {
                    l_pos += 1;
                } else {
                    l_neg += 1;
                }
                if pairs[w].0 == pairs[w + 1].0 {
                    continue;
                }
                let score =
                    SplitScore::new(l_pos, l_neg, node_pos - l_pos, node_neg - l_neg);
                if !score.improves_parent(node_pos, node_neg) {
                    continue;
                }
                let replace = match &best {
                    None => true,
                    Some((incumbent, _, _)) => score.beats(incumbent),
                };
                if replace {
                    let threshold = (pairs[w].0 + pairs[w + 1].0) / 2.0;
                    best = Some((score, feature, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

/// Train a forest. Each tree draws its own RNG stream from
/// `(seed, tree index)`, so results do not depend on training order.
pub fn train_forest(
    x: &[Vec<f64>],
    y: &[Label],
    hparams: &ForestHyperParams,
    seed: u64,
) -> Result<ForestModel, ForestError> {
    if x.len() < 2 {
        return Err(ForestError::TooFewSamples { got: x.len() });
    }
    if x.len() != y.len() {
        return Err(ForestError::BadHyperParams("x and y lengths differ"));
    }
    let n_features = x[0].len();
    if n_features == 0 {
        return Err(ForestError::BadHyperParams("feature dimension is zero"));
    }
    if x.iter().any(|row| row.len() != n_features) {
        return Err(ForestError::RaggedRows);
    }
    if hparams.tree_count == 0 {
        return Err(ForestError::BadHyperParams("tree_count must be at least 1"));
    }
    if hparams.max_depth == 0 {
        return Err(ForestError::BadHyperParams("max_depth must be at least 1"));
    }
    if !(hparams.theta1 > 0.0 && hparams.theta1 < 1.0) {
        return Err(ForestError::BadHyperParams("theta1 must lie in (0, 1)"));
    }
    let has_pos = y.iter().any(|l| l.is_malicious());
    let has_neg = y.iter().any(|l| !l.is_malicious());
    if !(has_pos && has_neg) {
        return Err(ForestError::SingleClass);
    }

    let mut trees = Vec::with_capacity(hparams.tree_count);
    for tree_index in 0..hparams.tree_count {
        let mut tree_rng = rng::for_substream(seed, rng::stream::FOREST, tree_index as u64);
        let idxs: Vec<usize> = if hparams.bootstrap {
            (0..x.len())
                .map(|_| tree_rng.random_range(0..x.len()))
                .collect()
        } else {
            (0..x.len()).collect()
        };
        let mut builder = TreeBuilder {
            x,
            y,
            hparams,
            n_features,
            nodes: Vec::new(),
        };
        builder.build(&idxs, 0, &mut tree_rng);
        trees.push(DecisionTree {
            nodes: builder.nodes,
        });
    }

    Ok(ForestModel {
        trees,
        n_features,
        theta1: hparams.theta1,
        seed,
        hparams: hparams.clone(),
    })
}

/// Score one static feature vector: the fraction of trees voting
/// positive, binarized against θ₁ (score == θ₁ counts as malicious).
pub fn predict_stage1(model: &ForestModel, x: &[f64]) -> Result<Stage1Output, ForestError> {
    if x.len() != model.n_features {
        return Err(ForestError::DimensionMismatch {
            expected: model.n_features,
            got: x.len(),
        });
    }
    let votes = model.trees.iter().filter(|t| t.votes_positive(x)).count();
    let score = votes as f64 / model.trees.len() as f64;
    let label = if score >= model.theta1 {
        Label::Malicious
    } else {
        Label::Benign
    };
    Ok(Stage1Output { score, label })
}
