//! Deterministic fixed-step simulation of docking and transport episodes.

pub mod coupling;
pub mod path;
pub mod runs;
pub mod trace;
pub mod world;

pub use coupling::{ObjectCoupling, ObjectState};
pub use path::{FollowerGains, PathFollower, PathSpec};
pub use runs::{
    run_cooperating, run_docked, run_docking, track_single, ApproachSetup, DockingResult,
    SimSettings, TransportResult, TransportSetup,
};
pub use trace::{trace_columns, RobotSample, RunTrace, TraceRow};
pub use world::{stream_rng, HubGuide, NoiseConfig, RobotState, Stream, WorldState};
