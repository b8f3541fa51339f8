//! Behavioral event traces and their numeric encoding.
//!
//! A raw trace is an ordered list of runtime events (API calls, registry
//! writes, file operations, ...). Encoding turns it into a `T × m` matrix
//! where each row is a one-hot token vector for the event name followed by
//! squashed numeric attributes. Traces longer than `t_max` keep the *last*
//! `t_max` events — late behavior is what carries the payload.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

/// Reserved token id for names missing from the vocabulary.
pub const OOV_TOKEN: u32 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ApiCall,
    RegistryWrite,
    FileOp,
    NetSession,
    ProcessCreate,
}

/// One runtime event as recorded by a sandbox or endpoint monitor.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TraceEvent {
    /// Epoch milliseconds.
    pub t: i64,
    #[serde(rename = "type")]
    pub kind: EventKind,
    pub name: String,
    #[serde(default)]
    pub attrs: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceSchemaError {
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("vocabulary assigns reserved OOV id 0 to \"{name}\"")]
    ReservedIdAssigned { name: String },
    #[error("t_max must be at least 1")]
    ZeroWindow,
}

/// Token vocabulary plus the attribute columns and window length that fix
/// the encoded event dimension `m`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TraceSchema {
    /// Event name → token id. Id 0 is reserved for out-of-vocabulary names.
    pub vocab: BTreeMap<String, u32>,
    /// Attribute keys encoded after the one-hot segment, in this order.
    pub attr_keys: Vec<String>,
    /// Maximum encoded sequence length.
    pub t_max: usize,
}

impl TraceSchema {
    pub fn new(
        vocab: BTreeMap<String, u32>,
        attr_keys: Vec<String>,
        t_max: usize,
    ) -> Result<Self, TraceSchemaError> {
        if vocab.is_empty() {
            return Err(TraceSchemaError::EmptyVocabulary);
        }
        if let Some((name, _)) = vocab.iter().find(|(_, &id)| id == OOV_TOKEN) {
            return Err(TraceSchemaError::ReservedIdAssigned { name: name.clone() });
        }
        if t_max == 0 {
            return Err(TraceSchemaError::ZeroWindow);
        }
        Ok(Self {
            vocab,
            attr_keys,
            t_max,
        })
    }

    /// Width of the one-hot segment (largest id + 1, so id 0 = OOV has a column).
    pub fn vocab_width(&self) -> usize {
        let max_id = self.vocab.values().copied().max().unwrap_or(0);
        max_id as usize + 1
    }

    /// Encoded row dimension `m`.
    pub fn event_dim(&self) -> usize {
        self.vocab_width() + self.attr_keys.len()
    }

    pub fn token_id(&self, name: &str) -> u32 {
        self.vocab.get(name).copied().unwrap_or(OOV_TOKEN)
    }
}

/// An encoded trace: token ids plus the `T × m` matrix fed to the
/// sequence model. `T` is already capped at the schema's `t_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorTrace {
    pub token_ids: Vec<u32>,
    pub encoded: Vec<Vec<f64>>,
}

impl BehaviorTrace {
    pub fn len(&self) -> usize {
        self.encoded.len()
    }

    pub fn is_empty(&self) -> bool {
        self.encoded.is_empty()
    }
}

/// Squash an unbounded attribute value into (-1, 1).
fn squash(v: f64) -> f64 {
    v / (1.0 + v.abs())
}

/// Encode events against a schema. Keeps the last `t_max` events; unknown
/// names land on the reserved OOV column; missing attributes encode as 0.
pub fn encode_trace(events: &[TraceEvent], schema: &TraceSchema) -> BehaviorTrace {
    let skip = events.len().saturating_sub(schema.t_max);
    let window = &events[skip..];

    let width = schema.vocab_width();
    let m = schema.event_dim();

    let mut token_ids = Vec::with_capacity(window.len());
    let mut encoded = Vec::with_capacity(window.len());
    for event in window {
        let id = schema.token_id(&event.name);
        token_ids.push(id);

        let mut row = alloc::vec![0.0; m];
        row[id as usize] = 1.0;
        for (j, key) in schema.attr_keys.iter().enumerate() {
            if let Some(&v) = event.attrs.get(key) {
                row[width + j] = squash(v);
            }
        }
        encoded.push(row);
    }

    BehaviorTrace { token_ids, encoded }
}
