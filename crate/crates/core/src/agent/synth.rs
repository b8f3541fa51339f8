//! Deterministic endpoint-stream fixtures for replay tests and demos.
//!
//! Streams reuse the synthetic dataset's token model so a bundle trained
//! on generated data recognizes them: benign processes emit only common
//! tokens; the malicious process front-loads marker tokens inside its
//! first scoring window and fires a `payload_detonate` sentinel much
//! later. A correctly behaving agent therefore quarantines strictly
//! before the sentinel.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Effect, EndpointEvent};
use crate::dataset::synth::{synth_context, synth_event};
use crate::dataset::{Label, MARKER_TOKEN, SYNTH_TOKENS};
use crate::features::EventKind;
use crate::rng;

/// Name of the malicious payload event; appears only after the marker
/// burst, so detection must precede it.
pub const SENTINEL_EVENT: &str = "payload_detonate";

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StreamFixtureConfig {
    pub benign_processes: usize,
    pub events_per_process: usize,
    /// Append one malicious process (pid 666) to the stream.
    pub with_malicious: bool,
    /// Marker tokens forced at per-process indices 2, 5, 8, … (this many).
    pub marker_burst: usize,
    /// Per-process event index of the sentinel in the malicious process.
    pub sentinel_at: usize,
    /// Must match the bundle's static dimension and separation.
    pub static_dim: usize,
    pub separation: f64,
}

impl Default for StreamFixtureConfig {
    fn default() -> Self {
        Self {
            benign_processes: 3,
            events_per_process: 48,
            with_malicious: false,
            marker_burst: 4,
            sentinel_at: 33,
            static_dim: 16,
            separation: 6.0,
        }
    }
}

pub const MALICIOUS_PID: u64 = 666;

fn static_features(rng: &mut ChaCha8Rng, cfg: &StreamFixtureConfig, label: Label) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mean0 = match label {
        Label::Benign => -cfg.separation / 2.0,
        Label::Malicious => cfg.separation / 2.0,
    };
    let mut v: Vec<f64> = (0..cfg.static_dim).map(|_| normal.sample(rng)).collect();
    v[0] += mean0;
    v
}

fn process_events(
    rng: &mut ChaCha8Rng,
    cfg: &StreamFixtureConfig,
    pid: u64,
    label: Label,
) -> Vec<EndpointEvent> {
    let mut t = 1_700_000_000_000 + pid as i64;
    let mut out = Vec::with_capacity(cfg.events_per_process);
    let marker_slots: Vec<usize> = (0..cfg.marker_burst).map(|j| 2 + 3 * j).collect();

    for i in 0..cfg.events_per_process {
        t += rng.random_range(10..200);
        let name: String = if label.is_malicious() && i == cfg.sentinel_at {
            String::from(SENTINEL_EVENT)
        } else if label.is_malicious() && marker_slots.contains(&i) {
            String::from(MARKER_TOKEN)
        } else {
            String::from(SYNTH_TOKENS[rng.random_range(0..SYNTH_TOKENS.len())])
        };

        let base = synth_event(rng, t, &name);
        let mut event = EndpointEvent {
            t,
            pid,
            kind: if name == SENTINEL_EVENT {
                EventKind::ApiCall
            } else {
                base.kind
            },
            name: base.name,
            attrs: base.attrs,
            effect: None,
            context: None,
            static_features: None,
        };

        if i == 0 {
            event.kind = EventKind::ProcessCreate;
            event.name = String::from("proc_spawn");
            event.context = Some(synth_context(rng, label));
            event.static_features = Some(static_features(rng, cfg, label));
        } else if event.kind == EventKind::RegistryWrite
            || (label.is_malicious() && i >= cfg.sentinel_at)
        {
            // Mutating events journal an effect; everything the malicious
            // process does after the sentinel mutates state, so a working
            // quarantine visibly suppresses it.
            event.kind = EventKind::RegistryWrite;
            event.effect = Some(Effect {
                key: alloc::format!("reg/{pid}/{i}"),
                old_value: None,
                new_value: Some(alloc::format!("value-{i}")),
            });
        }
        out.push(event);
    }
    out
}

/// Build a replayable stream: benign processes interleaved round-robin,
/// then the optional malicious process merged in by timestamp order being
/// preserved per process. Fully determined by the seed.
pub fn synthetic_stream(cfg: &StreamFixtureConfig, seed: u64) -> Vec<EndpointEvent> {
    let mut rng = rng::for_stream(seed, rng::stream::STREAM_FIXTURE);

    let mut per_process: Vec<Vec<EndpointEvent>> = Vec::new();
    for p in 0..cfg.benign_processes {
        per_process.push(process_events(&mut rng, cfg, 100 + p as u64, Label::Benign));
    }
    if cfg.with_malicious {
        per_process.push(process_events(&mut rng, cfg, MALICIOUS_PID, Label::Malicious));
    }

    // Round-robin interleave; per-process order (and thus per-process
    // timestamp monotonicity) is preserved.
    let mut stream = Vec::with_capacity(per_process.iter().map(Vec::len).sum());
    let mut cursors = alloc::vec![0usize; per_process.len()];
    loop {
        let mut emitted = false;
        for (p, events) in per_process.iter().enumerate() {
            if cursors[p] < events.len() {
                stream.push(events[cursors[p]].clone());
                cursors[p] += 1;
                emitted = true;
            }
        }
        if !emitted {
            break;
        }
    }
    stream
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_is_deterministic_and_marker_placement_holds() {
        let cfg = StreamFixtureConfig {
            with_malicious: true,
            ..StreamFixtureConfig::default()
        };
        let a = synthetic_stream(&cfg, 4);
        let b = synthetic_stream(&cfg, 4);
        assert_eq!(a, b);

        let malicious: Vec<&EndpointEvent> =
            a.iter().filter(|e| e.pid == MALICIOUS_PID).collect();
        assert_eq!(malicious.len(), cfg.events_per_process);
        assert_eq!(malicious[2].name, MARKER_TOKEN);
        assert_eq!(malicious[5].name, MARKER_TOKEN);
        assert_eq!(malicious[cfg.sentinel_at].name, SENTINEL_EVENT);
        assert!(malicious[0].static_features.is_some());
        assert!(malicious[0].context.is_some());

        for e in &a {
            if e.pid != MALICIOUS_PID {
                assert_ne!(e.name, MARKER_TOKEN);
                assert_ne!(e.name, SENTINEL_EVENT);
            }
        }
    }

    #[test]
    fn per_process_timestamps_never_regress() {
        let cfg = StreamFixtureConfig {
            with_malicious: true,
            ..StreamFixtureConfig::default()
        };
        let stream = synthetic_stream(&cfg, 9);
        let mut last: alloc::collections::BTreeMap<u64, i64> = alloc::collections::BTreeMap::new();
        for e in &stream {
            if let Some(&prev) = last.get(&e.pid) {
                assert!(e.t >= prev);
            }
            last.insert(e.pid, e.t);
        }
    }
}
