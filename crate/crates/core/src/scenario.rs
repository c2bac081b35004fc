//! Scenario documents: one JSON file describing an episode, loaded with
//! field-precise errors and executed for a given seed.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::composite::CompositeBody;
use crate::docking::{DockingParams, FailureReason, Phase, PhaseTransition};
use crate::error::{Error, Result};
use crate::kinematics::RobotGeometry;
use crate::metrics::StabilityReport;
use crate::perception::{Lighting, PerceptionConfig};
use crate::sim::{
    run_cooperating, run_docked, run_docking, track_single, ApproachSetup, RunTrace, SimSettings,
    TransportResult, TransportSetup,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    DockOnly,
    DockedTransport,
    CooperatingTransport,
    TrackSingle,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::DockOnly => "dock_only",
            Mode::DockedTransport => "docked_transport",
            Mode::CooperatingTransport => "cooperating_transport",
            Mode::TrackSingle => "track_single",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub mode: Mode,
    /// Module 1 waits (female hub), module 2 approaches (male hub).
    pub robots: [RobotGeometry; 2],
    #[serde(default = "default_lighting")]
    pub lighting: Lighting,
    #[serde(default)]
    pub seed: u64,
    /// Explicit seed list for batch and compare runs.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub approach: ApproachSetup,
    #[serde(default)]
    pub docking: DockingParams,
    #[serde(default)]
    pub perception: PerceptionConfig,
    #[serde(default)]
    pub transport: TransportSetup,
    #[serde(default)]
    pub sim: SimSettings,
}

fn default_lighting() -> Lighting {
    Lighting::Bright
}

impl Scenario {
    pub fn from_value(value: Value) -> Result<Self> {
        let s: Scenario = serde_path_to_error::deserialize(value)
            .map_err(|e| Error::Config(format!("at `{}`: {}", e.path(), e.inner())))?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let s: Scenario = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::Config(format!("at `{}`: {}", e.path(), e.inner())))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let ctx = |what: &str, e: Error| Error::Config(format!("{what}: {e}"));
        for (i, g) in self.robots.iter().enumerate() {
            g.validate().map_err(|e| ctx(&format!("robots[{i}]"), e))?;
        }
        self.approach.validate().map_err(|e| ctx("approach", e))?;
        self.docking.validate().map_err(|e| ctx("docking", e))?;
        self.perception.validate().map_err(|e| ctx("perception", e))?;
        self.transport.validate().map_err(|e| ctx("transport", e))?;
        self.sim.validate().map_err(|e| ctx("sim", e))?;
        if matches!(&self.seeds, Some(s) if s.is_empty()) {
            return Err(Error::Config("seeds: list must not be empty".into()));
        }
        Ok(())
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        Self {
            mode,
            ..self.clone()
        }
    }

    /// Runs the episode selected by `mode`.
    pub fn run(&self, seed: u64) -> Result<RunOutput> {
        match self.mode {
            Mode::DockOnly => {
                let r = run_docking(
                    &self.robots,
                    &self.approach,
                    &self.docking,
                    &self.perception,
                    self.lighting,
                    &self.sim,
                    seed,
                )?;
                let status = if r.docked() {
                    Status::Completed
                } else {
                    Status::DockingFailed
                };
                let composite = r.composite.as_ref().map(CompositeSummary::from);
                let summary = RunSummary {
                    mode: self.mode,
                    seed,
                    status,
                    failure_reason: r.state.failure,
                    phase_sequence: r.state.phase_sequence(),
                    phase_transitions: r.state.transitions.clone(),
                    dock_time: r.dock_time,
                    sim_time: r.final_time,
                    steps: r.trace.len().saturating_sub(1),
                    metrics: None,
                    final_position_errors: Vec::new(),
                    composite,
                    inter_module_drift: None,
                    max_pin_residual: None,
                    max_guide_blocked_yaw_rate: Some(r.max_blocked_yaw_rate),
                    trace_sha256: r.trace.sha256(),
                };
                Ok(RunOutput {
                    trace: r.trace,
                    summary,
                })
            }
            Mode::DockedTransport => {
                let r = run_docked(&self.robots, &self.transport, &self.sim, seed)?;
                self.transport_output(r, seed)
            }
            Mode::CooperatingTransport => {
                let r = run_cooperating(&self.robots, &self.transport, &self.sim, seed)?;
                self.transport_output(r, seed)
            }
            Mode::TrackSingle => {
                let r = track_single(&self.robots[0], &self.transport, &self.sim, seed)?;
                self.transport_output(r, seed)
            }
        }
    }

    fn transport_output(&self, r: TransportResult, seed: u64) -> Result<RunOutput> {
        let metrics = if r.series.ax.len() >= 2 {
            Some(StabilityReport::from_series(&r.series)?)
        } else {
            None
        };
        let composite = r.composite.as_ref().map(CompositeSummary::from);
        let summary = RunSummary {
            mode: self.mode,
            seed,
            status: if r.completed {
                Status::Completed
            } else {
                Status::TaskIncomplete
            },
            failure_reason: None,
            phase_sequence: Vec::new(),
            phase_transitions: Vec::new(),
            dock_time: None,
            sim_time: r.transport_time,
            steps: r.trace.len().saturating_sub(1),
            metrics,
            final_position_errors: r.final_errors.clone(),
            composite,
            inter_module_drift: r.inter_module_drift,
            max_pin_residual: (self.mode == Mode::DockedTransport).then_some(r.max_pin_residual),
            max_guide_blocked_yaw_rate: None,
            trace_sha256: r.trace.sha256(),
        };
        Ok(RunOutput {
            trace: r.trace,
            summary,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Completed,
    DockingFailed,
    TaskIncomplete,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Completed => "completed",
            Status::DockingFailed => "docking_failed",
            Status::TaskIncomplete => "task_incomplete",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeSummary {
    pub total_mass: f64,
    pub center_of_mass: [f64; 2],
    pub total_inertia: f64,
    pub inter_module_distance: f64,
    pub docking_axis: [f64; 2],
}

impl From<&CompositeBody> for CompositeSummary {
    fn from(b: &CompositeBody) -> Self {
        Self {
            total_mass: b.total_mass,
            center_of_mass: b.center_of_mass(),
            total_inertia: b.total_inertia,
            inter_module_distance: b.inter_module_distance(),
            docking_axis: b.docking_axis,
        }
    }
}

/// Summary record written next to each trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub seed: u64,
    pub status: Status,
    pub failure_reason: Option<FailureReason>,
    pub phase_sequence: Vec<Phase>,
    pub phase_transitions: Vec<PhaseTransition>,
    pub dock_time: Option<f64>,
    pub sim_time: f64,
    pub steps: usize,
    pub metrics: Option<StabilityReport>,
    pub final_position_errors: Vec<f64>,
    pub composite: Option<CompositeSummary>,
    pub inter_module_drift: Option<f64>,
    pub max_pin_residual: Option<f64>,
    pub max_guide_blocked_yaw_rate: Option<f64>,
    pub trace_sha256: String,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: RunTrace,
    pub summary: RunSummary,
}

/// Sets a dotted path (`docking.lock_hub_spin`, `robots.0.mass`) in a JSON
/// document, creating intermediate objects as needed.
pub fn set_json_path(doc: &mut Value, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed sweep key `{key}`")));
    }
    let mut cur = doc;
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert((*part).to_string(), value);
                    return Ok(());
                }
                map.entry(*part)
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = part.parse().map_err(|_| {
                    Error::Config(format!("`{part}` in `{key}` must be an array index"))
                })?;
                let len = items.len();
                let slot = items.get_mut(idx).ok_or_else(|| {
                    Error::Config(format!("index {idx} in `{key}` out of range (len {len})"))
                })?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => {
                return Err(Error::Config(format!(
                    "`{key}`: `{part}` is not inside an object or array"
                )))
            }
        };
    }
    unreachable!("loop returns on the last key component")
}
