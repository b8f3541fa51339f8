//! Feature extraction: static (file at rest), behavioral (event traces),
//! and contextual (execution environment).

pub mod context;
pub mod pe;
pub mod trace;

pub use context::{encode_context, ContextError, ContextMetadata, ContextVector, CONTEXT_DIM};
pub use pe::{parse_pe_header, PeHeaderSummary, PeParseError, SectionSummary};
pub use trace::{encode_trace, BehaviorTrace, EventKind, TraceEvent, TraceSchema, OOV_TOKEN};

use alloc::vec::Vec;

use crate::math;

/// Normalized byte-value histogram: bin `b` holds `count(b) / len`.
/// Empty input yields the all-zero vector.
pub fn byte_histogram(bytes: &[u8]) -> Vec<f64> {
    let mut counts = [0u64; 256];
    for &b in bytes {
        counts[b as usize] += 1;
    }
    if bytes.is_empty() {
        return alloc::vec![0.0; 256];
    }
    let len = bytes.len() as f64;
    counts.iter().map(|&c| c as f64 / len).collect()
}

/// Shannon entropy of the byte distribution, in bits (0 for empty input,
/// at most 8 for uniform bytes).
pub fn shannon_entropy(bytes: &[u8]) -> f64 {
    let mut counts = [0u64; 256];
    for &b in bytes {
        counts[b as usize] += 1;
    }
    let len = bytes.len() as f64;
    let mut h = 0.0;
    for &c in counts.iter().filter(|&&c| c > 0) {
        let p = c as f64 / len;
        h -= p * math::log2(p);
    }
    h
}

/// Segment widths of the static feature vector. The full layout, in order:
///
/// ```text
/// byte_histogram[256] | entropy[1] | log_size[1]
///   | header_fields[H] | section_entropies[S] | parse_failed[1]
/// ```
///
/// Header fields are `[machine, section_count, ln(1+timestamp),
/// executable_section_count]`, truncated or zero-padded to `H` slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct StaticLayout {
    pub header_fields: usize,
    pub section_slots: usize,
}

impl Default for StaticLayout {
    fn default() -> Self {
        Self {
            header_fields: 4,
            section_slots: 8,
        }
    }
}

impl StaticLayout {
    pub const BYTE_BINS: usize = 256;

    /// Total vector length `n` under this layout.
    pub fn dim(&self) -> usize {
        Self::BYTE_BINS + 1 + 1 + self.header_fields + self.section_slots + 1
    }

    pub fn entropy_index(&self) -> usize {
        Self::BYTE_BINS
    }

    pub fn log_size_index(&self) -> usize {
        Self::BYTE_BINS + 1
    }

    pub fn header_start(&self) -> usize {
        Self::BYTE_BINS + 2
    }

    pub fn section_start(&self) -> usize {
        self.header_start() + self.header_fields
    }

    pub fn parse_failed_index(&self) -> usize {
        self.section_start() + self.section_slots
    }
}

/// A file's static feature vector. For extracted vectors the meaning of
/// each element comes from a [`StaticLayout`]; synthetic datasets use the
/// same type as a plain numeric vector.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StaticFeatureVector {
    pub values: Vec<f64>,
}

impl StaticFeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Extract the static feature vector of a raw file.
///
/// Header parse failures are not errors: malformed headers are common in
/// the wild and carry signal. On failure the header and section segments
/// stay zero and the trailing parse-failed indicator is set to 1.
pub fn extract_static(bytes: &[u8], layout: &StaticLayout) -> StaticFeatureVector {
    let mut values = alloc::vec![0.0; layout.dim()];

    values[..StaticLayout::BYTE_BINS].copy_from_slice(&byte_histogram(bytes));
    values[layout.entropy_index()] = shannon_entropy(bytes);
    values[layout.log_size_index()] = math::ln_1p(bytes.len() as f64);

    match pe::parse_pe_header(bytes) {
        Ok(summary) => {
            let header = [
                summary.machine as f64,
                summary.section_count as f64,
                math::ln_1p(summary.timestamp as f64),
                summary.sections.iter().filter(|s| s.executable).count() as f64,
            ];
            let start = layout.header_start();
            for (i, v) in header.iter().take(layout.header_fields).enumerate() {
                values[start + i] = *v;
            }
            let start = layout.section_start();
            for (i, section) in summary.sections.iter().take(layout.section_slots).enumerate() {
                values[start + i] = section.entropy;
            }
        }
        Err(_) => {
            values[layout.parse_failed_index()] = 1.0;
        }
    }

    StaticFeatureVector::new(values)
}
