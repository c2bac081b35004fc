//! Waypoint path and the proportional path-following controller.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{wrap_angle, Pose, Twist};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    /// World-frame waypoints, meters. The first one is the start point.
    pub waypoints: Vec<[f64; 2]>,
    #[serde(default = "default_true")]
    pub hold_heading: bool,
    /// Speed on segments parallel to the first segment, m/s.
    #[serde(default = "default_forward_speed")]
    pub forward_speed: f64,
    /// Speed on all other segments, m/s.
    #[serde(default = "default_lateral_speed")]
    pub lateral_speed: f64,
}

fn default_true() -> bool {
    true
}
fn default_forward_speed() -> f64 {
    0.1
}
fn default_lateral_speed() -> f64 {
    0.05
}

impl Default for PathSpec {
    /// 2.0 m straight leg, a right-angle turn, then a 1.2 m sideways leg.
    fn default() -> Self {
        Self {
            waypoints: vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.2]],
            hold_heading: true,
            forward_speed: default_forward_speed(),
            lateral_speed: default_lateral_speed(),
        }
    }
}

impl PathSpec {
    pub fn validate(&self) -> Result<()> {
        if self.waypoints.len() < 2 {
            return Err(Error::InvalidParameter("path needs at least 2 waypoints".into()));
        }
        if self.waypoints.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite waypoint".into()));
        }
        for (i, w) in self.waypoints.windows(2).enumerate() {
            if (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]) < 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "waypoints {i} and {} coincide",
                    i + 1
                )));
            }
        }
        if !(self.forward_speed > 0.0 && self.lateral_speed > 0.0) {
            return Err(Error::InvalidParameter("path speeds must be > 0".into()));
        }
        Ok(())
    }

    /// The same path shifted by `offset`.
    pub fn translated(&self, offset: [f64; 2]) -> PathSpec {
        PathSpec {
            waypoints: self
                .waypoints
                .iter()
                .map(|w| [w[0] + offset[0], w[1] + offset[1]])
                .collect(),
            ..self.clone()
        }
    }

    fn direction(&self, seg: usize) -> [f64; 2] {
        let a = self.waypoints[seg];
        let b = self.waypoints[seg + 1];
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        [(b[0] - a[0]) / len, (b[1] - a[1]) / len]
    }

    pub fn segment_speed(&self, seg: usize) -> f64 {
        let d0 = self.direction(0);
        let d = self.direction(seg);
        let cross = d0[0] * d[1] - d0[1] * d[0];
        if cross.abs() < 1e-6 {
            self.forward_speed
        } else {
            self.lateral_speed
        }
    }

    pub fn final_waypoint(&self) -> [f64; 2] {
        *self.waypoints.last().expect("validated path is non-empty")
    }

    pub fn length(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FollowerGains {
    pub along_track: f64,
    pub cross_track: f64,
    pub heading: f64,
    pub max_yaw_rate: f64,
    /// Limit on the change rate of the commanded world velocity, m/s².
    pub max_accel: f64,
    /// Distance at which an intermediate waypoint counts as reached, m.
    pub waypoint_radius: f64,
    /// Distance to the final waypoint at which the path is complete, m.
    pub goal_tolerance: f64,
}

impl Default for FollowerGains {
    fn default() -> Self {
        Self {
            along_track: 1.0,
            cross_track: 2.0,
            heading: 2.0,
            max_yaw_rate: 0.5,
            max_accel: 0.5,
            waypoint_radius: 0.02,
            goal_tolerance: 0.005,
        }
    }
}

impl FollowerGains {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.along_track,
            self.cross_track,
            self.heading,
            self.max_yaw_rate,
            self.max_accel,
            self.waypoint_radius,
            self.goal_tolerance,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParameter("follower gains must be > 0".into()));
        }
        Ok(())
    }
}

/// Controller state for one tracked body.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFollower {
    pub path: PathSpec,
    pub gains: FollowerGains,
    /// Heading held throughout the run.
    pub reference_heading: f64,
    segment: usize,
    last_velocity: [f64; 2],
    done: bool,
}

impl PathFollower {
    pub fn new(path: PathSpec, gains: FollowerGains, reference_heading: f64) -> Result<Self> {
        path.validate()?;
        gains.validate()?;
        Ok(Self {
            path,
            gains,
            reference_heading,
            segment: 0,
            last_velocity: [0.0; 2],
            done: false,
        })
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn segment(&self) -> usize {
        self.segment
    }

    pub fn heading_error(&self, pose: &Pose) -> f64 {
        wrap_angle(pose.theta - self.reference_heading)
    }

    /// World-frame twist command for the current pose. Once the final
    /// waypoint is reached the command is zero and stays zero.
    pub fn command(&mut self, pose: &Pose, dt: f64) -> Twist {
        if self.done {
            return Twist::world(0.0, 0.0, 0.0);
        }
        let last = self.path.waypoints.len() - 2;
        let p = pose.position();
        let goal = self.path.final_waypoint();
        if (p[0] - goal[0]).hypot(p[1] - goal[1]) < self.gains.goal_tolerance {
            self.done = true;
            self.last_velocity = [0.0; 2];
            return Twist::world(0.0, 0.0, 0.0);
        }
        while self.segment < last {
            let end = self.path.waypoints[self.segment + 1];
            let t = self.path.direction(self.segment);
            let remaining = (end[0] - p[0]) * t[0] + (end[1] - p[1]) * t[1];
            if (p[0] - end[0]).hypot(p[1] - end[1]) < self.gains.waypoint_radius || remaining < 0.0 {
                self.segment += 1;
            } else {
                break;
            }
        }
        let start = self.path.waypoints[self.segment];
        let end = self.path.waypoints[self.segment + 1];
        let t = self.path.direction(self.segment);
        let n = [-t[1], t[0]];
        let speed = self.path.segment_speed(self.segment);
        let remaining = (end[0] - p[0]) * t[0] + (end[1] - p[1]) * t[1];
        let cross = (p[0] - start[0]) * n[0] + (p[1] - start[1]) * n[1];

        let along = if self.segment == last {
            (self.gains.along_track * remaining).clamp(-speed, speed)
        } else {
            speed
        };
        let lateral = (-self.gains.cross_track * cross).clamp(-speed, speed);
        let mut v = [along * t[0] + lateral * n[0], along * t[1] + lateral * n[1]];

        let dv_max = self.gains.max_accel * dt;
        let dv = [v[0] - self.last_velocity[0], v[1] - self.last_velocity[1]];
        let dv_norm = dv[0].hypot(dv[1]);
        if dv_norm > dv_max {
            let k = dv_max / dv_norm;
            v = [
                self.last_velocity[0] + k * dv[0],
                self.last_velocity[1] + k * dv[1],
            ];
        }
        self.last_velocity = v;

        let omega = if self.path.hold_heading {
            (-self.gains.heading * self.heading_error(pose))
                .clamp(-self.gains.max_yaw_rate, self.gains.max_yaw_rate)
        } else {
            0.0
        };
        Twist::world(v[0], v[1], omega)
    }
}
