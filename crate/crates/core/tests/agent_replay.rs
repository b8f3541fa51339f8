//! End-to-end agent behavior against a genuinely trained bundle: benign
//! streams stay quiet, the malicious fixture is caught before its payload
//! fires, and containment plus rollback behave exactly.

use std::sync::OnceLock;

use triscan_core::agent::{
    replay, synthetic_stream, ProcessStatus, ReplayPolicy, StreamFixtureConfig, MALICIOUS_PID,
    SENTINEL_EVENT,
};
use triscan_core::dataset::{generate_synthetic, SynthConfig};
use triscan_core::forest::ForestHyperParams;
use triscan_core::fusion::MetaHyperParams;
use triscan_core::lstm::SeqTrainConfig;
use triscan_core::pipeline::{train_pipeline, ModelBundle, TrainSettings};

fn fixture_config(with_malicious: bool) -> StreamFixtureConfig {
    StreamFixtureConfig {
        with_malicious,
        ..StreamFixtureConfig::default()
    }
}

fn bundle() -> &'static ModelBundle {
    static BUNDLE: OnceLock<ModelBundle> = OnceLock::new();
    BUNDLE.get_or_init(|| {
        let ds = generate_synthetic(
            &SynthConfig {
                benign: 220,
                malicious: 120,
                ..SynthConfig::default()
            },
            404,
        )
        .unwrap();
        let settings = TrainSettings {
            folds: 3,
            forest: ForestHyperParams {
                tree_count: 40,
                max_depth: 8,
                ..ForestHyperParams::default()
            },
            lstm: SeqTrainConfig {
                hidden_dim: 8,
                learning_rate: 0.05,
                epochs: 8,
                ..SeqTrainConfig::default()
            },
            meta: MetaHyperParams {
                rounds: 40,
                ..MetaHyperParams::default()
            },
            ..TrainSettings::default()
        };
        train_pipeline(&ds, &settings, 404).unwrap().bundle
    })
}

#[test]
fn benign_stream_raises_no_alerts() {
    let stream = synthetic_stream(&fixture_config(false), 21);
    let out = replay(&stream, bundle(), &ReplayPolicy::default()).unwrap();
    assert!(out.alerts.is_empty(), "alerts: {:?}", out.alerts.len());
    assert!(out
        .processes
        .values()
        .all(|p| p.status == ProcessStatus::Active));
}

#[test]
fn malicious_stream_quarantines_before_the_payload_sentinel() {
    let stream = synthetic_stream(&fixture_config(true), 22);
    let sentinel_index = stream
        .iter()
        .position(|e| e.name == SENTINEL_EVENT)
        .expect("fixture has a sentinel") as u64;

    let out = replay(&stream, bundle(), &ReplayPolicy::default()).unwrap();
    assert_eq!(out.alerts.len(), 1, "exactly one alert");
    let alert = &out.alerts[0];
    assert_eq!(alert.pid, MALICIOUS_PID);
    assert!(
        alert.window.trigger_index < sentinel_index,
        "quarantine at {} must precede sentinel at {sentinel_index}",
        alert.window.trigger_index
    );
    assert_eq!(out.processes[&MALICIOUS_PID].status, ProcessStatus::Quarantined);

    // The sentinel and everything after it were dropped: no key the
    // malicious process would have written past the sentinel exists.
    assert!(out
        .system_map
        .keys()
        .all(|k| !k.starts_with(&format!("reg/{MALICIOUS_PID}/3"))));
}

#[test]
fn post_quarantine_suffix_leaves_state_invariant() {
    let stream = synthetic_stream(&fixture_config(true), 23);
    let out_full = replay(&stream, bundle(), &ReplayPolicy::default()).unwrap();

    // Truncate right after the quarantine trigger instead of the full run.
    let trigger = out_full.alerts[0].window.trigger_index as usize;
    let out_cut = replay(&stream[..=trigger], bundle(), &ReplayPolicy::default()).unwrap();

    let malicious_keys = |m: &triscan_core::agent::SystemMap| -> Vec<String> {
        m.keys()
            .filter(|k| k.contains(&MALICIOUS_PID.to_string()))
            .cloned()
            .collect()
    };
    assert_eq!(malicious_keys(&out_full.system_map), malicious_keys(&out_cut.system_map));
    let mal_entries = |j: &triscan_core::agent::RollbackJournal| {
        j.entries.iter().filter(|e| e.pid == MALICIOUS_PID).count()
    };
    assert_eq!(mal_entries(&out_full.journal), mal_entries(&out_cut.journal));
}

#[test]
fn rollback_erases_the_malicious_footprint_exactly() {
    let stream = synthetic_stream(&fixture_config(true), 24);
    let mut out = replay(&stream, bundle(), &ReplayPolicy::default()).unwrap();

    let benign_view: Vec<(String, String)> = out
        .system_map
        .iter()
        .filter(|(k, _)| !k.contains(&MALICIOUS_PID.to_string()))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();

    out.rollback(MALICIOUS_PID).unwrap();
    assert_eq!(out.processes[&MALICIOUS_PID].status, ProcessStatus::Restored);
    // Every malicious key is gone (they were all fresh writes) …
    assert!(out
        .system_map
        .keys()
        .all(|k| !k.contains(&MALICIOUS_PID.to_string())));
    // … and the benign keys are untouched.
    let after: Vec<(String, String)> = out
        .system_map
        .iter()
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    assert_eq!(benign_view, after);
}

#[test]
fn replay_outputs_are_bitwise_deterministic() {
    let stream = synthetic_stream(&fixture_config(true), 25);
    let a = replay(&stream, bundle(), &ReplayPolicy::default()).unwrap();
    let b = replay(&stream, bundle(), &ReplayPolicy::default()).unwrap();
    assert_eq!(a, b);
}
