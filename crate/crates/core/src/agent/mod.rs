//! Simulated endpoint monitoring agent.
//!
//! Replays a recorded event stream against a trained model bundle: every
//! process keeps a rolling window of its recent events, scored through the
//! pipeline every `window_stride` events with that process's execution
//! context. Scores drive a small containment state machine
//! (`Active → Suspicious → {Active, Quarantined}`, `Quarantined →
//! Restored`); quarantining a process drops all of its subsequent effects
//! on the simulated system map, emits exactly one alert, and the rollback
//! journal can restore every key the process touched to its pre-process
//! value.

mod synth;

pub use synth::{synthetic_stream, StreamFixtureConfig, MALICIOUS_PID, SENTINEL_EVENT};

use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;

use crate::features::{
    encode_context, ContextError, ContextMetadata, ContextVector, EventKind,
    StaticFeatureVector, TraceEvent,
};
use crate::fusion::RiskVerdict;
use crate::pipeline::{run_pipeline, ModelBundle, PipelineError, SampleView};

#[derive(Debug, PartialEq, thiserror::Error)]
pub enum AgentError {
    #[error("event {index}: timestamp {got} precedes {prev} for pid {pid}")]
    TimestampRegression {
        index: usize,
        pid: u64,
        prev: i64,
        got: i64,
    },
    #[error("process {pid} is not quarantined")]
    NotQuarantined { pid: u64 },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Context(#[from] ContextError),
}

/// A mutation of the simulated registry/file map. `new_value: None`
/// deletes the key.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Effect {
    pub key: String,
    #[serde(default)]
    pub old_value: Option<String>,
    #[serde(default)]
    pub new_value: Option<String>,
}

/// One event of an endpoint stream.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EndpointEvent {
    /// Epoch milliseconds; non-decreasing per pid.
    pub t: i64,
    pub pid: u64,
    #[serde(rename = "type")]
    pub kind: EventKind,
    pub name: String,
    #[serde(default)]
    pub attrs: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effect: Option<Effect>,
    /// Execution context, normally carried by the process-create event.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<ContextMetadata>,
    /// Static features of the backing file, normally on process-create.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub static_features: Option<Vec<f64>>,
}

impl EndpointEvent {
    fn trace_event(&self) -> TraceEvent {
        TraceEvent {
            t: self.t,
            kind: self.kind,
            name: self.name.clone(),
            attrs: self.attrs.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessStatus {
    Active,
    Suspicious,
    Quarantined,
    Restored,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessState {
    pub pid: u64,
    pub status: ProcessStatus,
    /// Rolling window of the last `t_max` events.
    pub window: VecDeque<TraceEvent>,
    pub events_seen: u64,
    pub last_verdict: Option<RiskVerdict>,
    pub stat: StaticFeatureVector,
    pub context: ContextVector,
    stat_declared: bool,
    context_declared: bool,
    last_t: i64,
}

/// Journal entry: the map value `key` held *before* this effect applied.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct JournalEntry {
    pub pid: u64,
    pub key: String,
    pub prior: Option<String>,
    pub event_index: u64,
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RollbackJournal {
    pub entries: Vec<JournalEntry>,
}

/// The simulated registry/file state. A sorted map so snapshots serialize
/// reproducibly.
pub type SystemMap = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecommendedAction {
    Quarantine,
    QuarantineAndRollback,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WindowSummary {
    /// Global stream index of the event that triggered scoring.
    pub trigger_index: u64,
    pub window_len: usize,
    pub event_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AlertReport {
    pub pid: u64,
    pub verdict: RiskVerdict,
    pub window: WindowSummary,
    pub recommended_action: RecommendedAction,
    /// Timestamp of the triggering event.
    pub emitted_at: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ReplayPolicy {
    /// Score each process every this many of its events.
    pub window_stride: usize,
    pub theta_susp: f64,
    pub theta_quar: f64,
}

impl Default for ReplayPolicy {
    fn default() -> Self {
        Self {
            window_stride: 16,
            theta_susp: 0.6,
            theta_quar: 0.85,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReplayOutcome {
    pub processes: BTreeMap<u64, ProcessState>,
    pub alerts: Vec<AlertReport>,
    pub journal: RollbackJournal,
    pub system_map: SystemMap,
}

impl ReplayOutcome {
    /// Roll a quarantined process back: every key it touched returns to
    /// its pre-process value and the process moves to `Restored`.
    pub fn rollback(&mut self, pid: u64) -> Result<(), AgentError> {
        let state = self
            .processes
            .get_mut(&pid)
            .ok_or(AgentError::NotQuarantined { pid })?;
        if state.status != ProcessStatus::Quarantined {
            return Err(AgentError::NotQuarantined { pid });
        }
        rollback_effects(&self.journal, pid, &mut self.system_map);
        state.status = ProcessStatus::Restored;
        Ok(())
    }
}

/// Undo one process's journaled effects, newest first, restoring each
/// key's recorded prior value (or absence). Keys untouched by `pid` are
/// left alone.
pub fn rollback_effects(journal: &RollbackJournal, pid: u64, map: &mut SystemMap) {
    for entry in journal.entries.iter().rev().filter(|e| e.pid == pid) {
        match &entry.prior {
            Some(v) => {
                map.insert(entry.key.clone(), v.clone());
            }
            None => {
                map.remove(&entry.key);
            }
        }
    }
}

fn fresh_process(pid: u64, bundle: &ModelBundle) -> ProcessState {
    ProcessState {
        pid,
        status: ProcessStatus::Active,
        window: VecDeque::with_capacity(bundle.schema.trace.t_max + 1),
        events_seen: 0,
        last_verdict: None,
        stat: StaticFeatureVector::new(alloc::vec![0.0; bundle.schema.static_dim]),
        context: ContextVector::zeros(),
        stat_declared: false,
        context_declared: false,
        last_t: i64::MIN,
    }
}

/// Replay a stream through the containment state machine. Deterministic:
/// the same stream, bundle, and policy always produce identical outputs.
pub fn replay(
    stream: &[EndpointEvent],
    bundle: &ModelBundle,
    policy: &ReplayPolicy,
) -> Result<ReplayOutcome, AgentError> {
    let mut out = ReplayOutcome::default();
    let t_max = bundle.schema.trace.t_max;

    for (index, event) in stream.iter().enumerate() {
        let state = out
            .processes
            .entry(event.pid)
            .or_insert_with(|| fresh_process(event.pid, bundle));

        if event.t < state.last_t {
            return Err(AgentError::TimestampRegression {
                index,
                pid: event.pid,
                prev: state.last_t,
                got: event.t,
            });
        }
        state.last_t = event.t;

        // Containment: a quarantined (or restored) process no longer
        // touches the system map or its scoring window.
        if matches!(
            state.status,
            ProcessStatus::Quarantined | ProcessStatus::Restored
        ) {
            continue;
        }

        if !state.stat_declared {
            if let Some(stat) = &event.static_features {
                state.stat = StaticFeatureVector::new(stat.clone());
                state.stat_declared = true;
            }
        }
        if !state.context_declared {
            if let Some(meta) = &event.context {
                state.context = encode_context(meta)?;
                state.context_declared = true;
            }
        }

        if let Some(effect) = &event.effect {
            out.journal.entries.push(JournalEntry {
                pid: event.pid,
                key: effect.key.clone(),
                prior: out.system_map.get(&effect.key).cloned(),
                event_index: index as u64,
            });
            match &effect.new_value {
                Some(v) => {
                    out.system_map.insert(effect.key.clone(), v.clone());
                }
                None => {
                    out.system_map.remove(&effect.key);
                }
            }
        }

        state.window.push_back(event.trace_event());
        if state.window.len() > t_max {
            state.window.pop_front();
        }
        state.events_seen += 1;

        if state.events_seen % policy.window_stride as u64 != 0 {
            continue;
        }

        let window_events: &[TraceEvent] = state.window.make_contiguous();
        let verdict = run_pipeline(
            bundle,
            SampleView {
                stat: &state.stat,
                trace: Some(window_events),
                context: &state.context,
            },
        )?;

        let risk = verdict.risk;
        state.last_verdict = Some(verdict.clone());
        if risk >= policy.theta_quar {
            // Active windows pass through Suspicious on the way in; the
            // observable state is Quarantined either way.
            state.status = ProcessStatus::Quarantined;
            let touched = out.journal.entries.iter().any(|e| e.pid == event.pid);
            out.alerts.push(AlertReport {
                pid: event.pid,
                verdict,
                window: WindowSummary {
                    trigger_index: index as u64,
                    window_len: state.window.len(),
                    event_names: state.window.iter().map(|e| e.name.clone()).collect(),
                },
                recommended_action: if touched {
                    RecommendedAction::QuarantineAndRollback
                } else {
                    RecommendedAction::Quarantine
                },
                emitted_at: event.t,
            });
        } else if risk >= policy.theta_susp {
            state.status = ProcessStatus::Suspicious;
        } else if state.status == ProcessStatus::Suspicious {
            state.status = ProcessStatus::Active;
        }
    }

    Ok(out)
}
