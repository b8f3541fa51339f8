//! Labeled sample collections: schema, stratified k-fold splitting, SMOTE
//! rebalancing, and a deterministic synthetic generator.

mod smote;
pub(crate) mod synth;

pub use smote::{interpolate, smote};
pub use synth::{generate_synthetic, SynthConfig, MARKER_TOKEN, SYNTH_ATTR_KEYS, SYNTH_TOKENS};

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::features::{ContextVector, StaticFeatureVector, TraceEvent, TraceSchema};
use crate::rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DatasetError {
    #[error("label must be 0 or 1, got {got}")]
    BadLabel { got: u8 },
    #[error("sample {id}: {field} has length {got}, schema says {expected}")]
    SchemaMismatch {
        id: String,
        field: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("duplicate sample id {id}")]
    DuplicateId { id: String },
    #[error("fold count must be at least 2, got {k}")]
    FoldCountTooSmall { k: usize },
    #[error("class {label:?} has {count} samples, need at least {k} for {k}-fold")]
    ClassTooSmall {
        label: Label,
        count: usize,
        k: usize,
    },
    #[error("SMOTE needs at least k_neighbors + 1 = {need} minority samples, got {have}")]
    TooFewMinority { have: usize, need: usize },
    #[error("invalid parameter: {0}")]
    BadParam(&'static str),
}

/// Binary class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Label {
    Benign,
    Malicious,
}

impl Label {
    pub fn bit(self) -> u8 {
        match self {
            Label::Benign => 0,
            Label::Malicious => 1,
        }
    }

    pub fn is_malicious(self) -> bool {
        matches!(self, Label::Malicious)
    }
}

impl TryFrom<u8> for Label {
    type Error = DatasetError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(Label::Benign),
            1 => Ok(Label::Malicious),
            got => Err(DatasetError::BadLabel { got }),
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l.bit()
    }
}

/// One labeled sample: static features, optional behavior trace, encoded
/// context, and the class label.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LabeledSample {
    pub id: String,
    pub stat: StaticFeatureVector,
    pub trace: Option<Vec<TraceEvent>>,
    pub context: ContextVector,
    pub label: Label,
}

/// Declared dimensions every sample in a dataset must conform to.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DatasetSchema {
    pub static_dim: usize,
    pub context_dim: usize,
    pub trace: TraceSchema,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Jsonl,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
    pub schema: DatasetSchema,
    pub provenance: Provenance,
}

impl Dataset {
    /// Check every sample against the schema and id uniqueness.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut seen = BTreeSet::new();
        for s in &self.samples {
            if !seen.insert(s.id.as_str()) {
                return Err(DatasetError::DuplicateId { id: s.id.clone() });
            }
            if s.stat.dim() != self.schema.static_dim {
                return Err(DatasetError::SchemaMismatch {
                    id: s.id.clone(),
                    field: "static",
                    expected: self.schema.static_dim,
                    got: s.stat.dim(),
                });
            }
            if s.context.dim() != self.schema.context_dim {
                return Err(DatasetError::SchemaMismatch {
                    id: s.id.clone(),
                    field: "context",
                    expected: self.schema.context_dim,
                    got: s.context.dim(),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// (benign, malicious) counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let malicious = self
            .samples
            .iter()
            .filter(|s| s.label.is_malicious())
            .count();
        (self.samples.len() - malicious, malicious)
    }
}

/// A stratified fold assignment over a dataset.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// Sample id → fold index in `0..k`.
    pub assignments: BTreeMap<String, usize>,
}

impl FoldPlan {
    /// Sample indices per fold, in dataset order.
    pub fn fold_indices(&self, ds: &Dataset) -> Vec<Vec<usize>> {
        let mut folds = alloc::vec![Vec::new(); self.k];
        for (i, s) in ds.samples.iter().enumerate() {
            if let Some(&f) = self.assignments.get(&s.id) {
                folds[f].push(i);
            }
        }
        folds
    }

    /// (train indices, held-out indices) for one fold.
    pub fn split(&self, ds: &Dataset, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut held = Vec::new();
        for (i, s) in ds.samples.iter().enumerate() {
            match self.assignments.get(&s.id) {
                Some(&f) if f == fold => held.push(i),
                Some(_) => train.push(i),
                None => {}
            }
        }
        (train, held)
    }
}

/// Stratified k-fold assignment: each class is shuffled by the seed and
/// dealt round-robin into folds, so per-fold class ratios match the
/// global ratio to within one sample.
pub fn stratified_kfold(ds: &Dataset, k: usize, seed: u64) -> Result<FoldPlan, DatasetError> {
    if k < 2 {
        return Err(DatasetError::FoldCountTooSmall { k });
    }
    let mut rng = rng::for_stream(seed, rng::stream::KFOLD);

    let mut assignments = BTreeMap::new();
    for label in [Label::Benign, Label::Malicious] {
        let mut members: Vec<usize> = ds
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == label)
            .map(|(i, _)| i)
            .collect();
        if members.len() < k {
            return Err(DatasetError::ClassTooSmall {
                label,
                count: members.len(),
                k,
            });
        }
        members.shuffle(&mut rng);
        for (pos, idx) in members.into_iter().enumerate() {
            assignments.insert(ds.samples[idx].id.clone(), pos % k);
        }
    }

    Ok(FoldPlan {
        k,
        seed,
        assignments,
    })
}
