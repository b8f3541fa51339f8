//! Execution-context features.
//!
//! Context captures *where and how* a file ran rather than what it
//! contains: file origin, wall-clock execution hour (as a point on the
//! circle, so 23:00 and 01:00 are near each other), user privilege, and
//! device class.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use crate::math;

pub const ORIGIN_CATEGORIES: [&str; 4] = ["download", "removable_media", "local", "network_share"];
pub const DEVICE_CATEGORIES: [&str; 3] = ["workstation", "server", "test"];

/// Encoded context dimension `k`: origin one-hot (4) + hour sin/cos (2)
/// + privileged flag (1) + device one-hot (3).
pub const CONTEXT_DIM: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ContextError {
    #[error("unrecognized origin \"{got}\"; valid: download, removable_media, local, network_share")]
    UnknownOrigin { got: String },
    #[error("unrecognized device class \"{got}\"; valid: workstation, server, test")]
    UnknownDevice { got: String },
}

/// Raw context metadata as it appears on the wire.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ContextMetadata {
    pub origin: String,
    /// Execution hour of day in [0, 24); fractional hours are fine.
    pub hour: f64,
    pub privileged: bool,
    pub device_class: String,
}

impl Default for ContextMetadata {
    fn default() -> Self {
        Self {
            origin: String::from("local"),
            hour: 12.0,
            privileged: false,
            device_class: String::from("workstation"),
        }
    }
}

/// The encoded context feature vector.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ContextVector {
    pub values: Vec<f64>,
}

impl ContextVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// All-zero vector of the standard layout width. Used where context is
    /// genuinely unknown; note a zero vector violates the one-hot layout
    /// on purpose so the meta-learner can tell "unknown" from any category.
    pub fn zeros() -> Self {
        Self {
            values: alloc::vec![0.0; CONTEXT_DIM],
        }
    }
}

fn one_hot_index(categories: &[&str], value: &str) -> Option<usize> {
    categories.iter().position(|c| *c == value)
}

/// Encode raw metadata into the fixed layout:
/// `[origin one-hot(4), sin(2πh/24), cos(2πh/24), privileged, device one-hot(3)]`.
pub fn encode_context(meta: &ContextMetadata) -> Result<ContextVector, ContextError> {
    let origin = one_hot_index(&ORIGIN_CATEGORIES, &meta.origin).ok_or_else(|| {
        ContextError::UnknownOrigin {
            got: meta.origin.clone(),
        }
    })?;
    let device = one_hot_index(&DEVICE_CATEGORIES, &meta.device_class).ok_or_else(|| {
        ContextError::UnknownDevice {
            got: meta.device_class.clone(),
        }
    })?;

    let hour = meta.hour.rem_euclid(24.0);
    let angle = TAU * hour / 24.0;

    let mut values = alloc::vec![0.0; CONTEXT_DIM];
    values[origin] = 1.0;
    values[4] = math::sin(angle);
    values[5] = math::cos(angle);
    values[6] = if meta.privileged { 1.0 } else { 0.0 };
    values[7 + device] = 1.0;
    Ok(ContextVector { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn layout_matches_definition() {
        let meta = ContextMetadata {
            origin: String::from("download"),
            hour: 0.0,
            privileged: true,
            device_class: String::from("server"),
        };
        let v = encode_context(&meta).unwrap().values;
        assert_eq!(v, alloc::vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn hour_six_lands_on_the_unit_circle_east() {
        let meta = ContextMetadata {
            hour: 6.0,
            ..ContextMetadata::default()
        };
        let v = encode_context(&meta).unwrap().values;
        assert_abs_diff_eq!(v[4], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[5], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn cyclic_pair_has_unit_norm_for_any_hour() {
        for h in [0.0, 3.7, 11.99, 23.5, -2.0, 27.25] {
            let meta = ContextMetadata {
                hour: h,
                ..ContextMetadata::default()
            };
            let v = encode_context(&meta).unwrap().values;
            let norm = (v[4] * v[4] + v[5] * v[5]).sqrt();
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn invalid_categories_list_the_valid_ones() {
        let meta = ContextMetadata {
            origin: String::from("usb"),
            ..ContextMetadata::default()
        };
        let err = encode_context(&meta).unwrap_err();
        let text = alloc::format!("{err}");
        assert!(text.contains("usb"));
        assert!(text.contains("removable_media"));

        let meta = ContextMetadata {
            device_class: String::from("toaster"),
            ..ContextMetadata::default()
        };
        assert!(matches!(
            encode_context(&meta),
            Err(ContextError::UnknownDevice { .. })
        ));
    }
}
