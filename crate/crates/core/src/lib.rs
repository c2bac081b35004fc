//! Planar simulation and control of omnidirectional robot modules that dock
//! hub to hub into a single rigid platform.

pub mod batch;
pub mod composite;
pub mod docking;
pub mod error;
pub mod kinematics;
pub mod metrics;
pub mod perception;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
