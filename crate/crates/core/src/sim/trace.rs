//! Per-step run records and their CSV form.

use std::fmt::Write as _;
use std::io::Write;

use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::kinematics::{Pose, Twist};

/// Per-robot quantities sampled each step. Twists are in the robot's body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotSample {
    pub pose: Pose,
    pub commanded: Twist,
    pub actual: Twist,
    pub heading_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    /// `None` for an absent robot (single-robot runs).
    pub robots: [Option<RobotSample>; 2],
    pub object_accel: [f64; 2],
    pub phase: &'static str,
}

const ROBOT_FIELDS: [&str; 10] = [
    "x",
    "y",
    "theta",
    "cmd_vx",
    "cmd_vy",
    "cmd_omega",
    "act_vx",
    "act_vy",
    "act_omega",
    "heading_err",
];

/// Fixed trace column order.
pub fn trace_columns() -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    for r in ["r1", "r2"] {
        cols.extend(ROBOT_FIELDS.iter().map(|f| format!("{r}_{f}")));
    }
    cols.extend(["obj_ax", "obj_ay", "phase"].map(String::from));
    cols
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
}

impl RunTrace {
    pub fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// CSV with a header line. Floats use Rust's shortest round-trip
    /// formatting, so the text is a pure function of the sampled values.
    pub fn to_csv(&self) -> String {
        let mut out = trace_columns().join(",");
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{}", row.t);
            for r in &row.robots {
                match r {
                    Some(s) => {
                        let _ = write!(
                            out,
                            ",{},{},{},{},{},{},{},{},{},{}",
                            s.pose.x,
                            s.pose.y,
                            s.pose.theta,
                            s.commanded.vx,
                            s.commanded.vy,
                            s.commanded.omega,
                            s.actual.vx,
                            s.actual.vy,
                            s.actual.omega,
                            s.heading_error
                        );
                    }
                    None => out.push_str(",,,,,,,,,,"),
                }
            }
            let _ = writeln!(
                out,
                ",{},{},{}",
                row.object_accel[0], row.object_accel[1], row.phase
            );
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    /// SHA-256 of the CSV text, hex encoded.
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.to_csv().as_bytes()))
    }
}
