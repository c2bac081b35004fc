//! Three-wheel omnidirectional base kinematics and planar frame transforms.
//!
//! Wheel `i` sits at mount angle `alpha_i` around the body center, at distance
//! `L`, and drives along the tangent `(-sin alpha_i, cos alpha_i)`:
//!
//! ```text
//! phi_dot_i = (1/r) * (-sin(alpha_i) * vx + cos(alpha_i) * vy + L * omega)
//! ```
//!
//! Body +x is "forward".

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest |det| of the wheel matrix accepted as invertible.
pub const MIN_DETERMINANT: f64 = 1e-9;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Planar configuration `[x, y, theta]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    /// Maps a point given in this pose's frame into the parent frame.
    pub fn transform_point(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        [self.x + c * p[0] - s * p[1], self.y + s * p[0] + c * p[1]]
    }

    /// Maps a parent-frame point into this pose's frame.
    pub fn inverse_transform_point(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        let dx = p[0] - self.x;
        let dy = p[1] - self.y;
        [c * dx + s * dy, -s * dx + c * dy]
    }

    /// Composition `self * other`: `other` is expressed in this pose's frame.
    pub fn compose(&self, other: &Pose) -> Pose {
        let [x, y] = self.transform_point(other.position());
        Pose::new(x, y, self.theta + other.theta)
    }

    pub fn inverse(&self) -> Pose {
        let (s, c) = self.theta.sin_cos();
        Pose::new(
            -(c * self.x + s * self.y),
            s * self.x - c * self.y,
            -self.theta,
        )
    }

    /// Expresses `other` (parent frame) relative to this pose.
    pub fn relative(&self, other: &Pose) -> Pose {
        let [x, y] = self.inverse_transform_point(other.position());
        Pose::new(x, y, other.theta - self.theta)
    }

    /// Semi-implicit Euler update with a world-frame twist.
    pub fn integrate(&self, twist: &Twist, dt: f64) -> Result<Pose> {
        twist.expect_frame(Frame::World)?;
        Ok(Pose::new(
            self.x + twist.vx * dt,
            self.y + twist.vy * dt,
            self.theta + twist.omega * dt,
        ))
    }
}

/// Frame a twist is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    World,
    Body,
}

/// Planar velocity `[vx, vy, omega]` tagged with its frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Twist {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
    pub frame: Frame,
}

impl Twist {
    pub fn body(vx: f64, vy: f64, omega: f64) -> Self {
        Self {
            vx,
            vy,
            omega,
            frame: Frame::Body,
        }
    }

    pub fn world(vx: f64, vy: f64, omega: f64) -> Self {
        Self {
            vx,
            vy,
            omega,
            frame: Frame::World,
        }
    }

    pub fn zero(frame: Frame) -> Self {
        Self {
            vx: 0.0,
            vy: 0.0,
            omega: 0.0,
            frame,
        }
    }

    pub fn expect_frame(&self, frame: Frame) -> Result<()> {
        if self.frame == frame {
            Ok(())
        } else {
            Err(Error::FrameMismatch {
                expected: frame,
                found: self.frame,
            })
        }
    }

    pub fn is_finite(&self) -> bool {
        self.vx.is_finite() && self.vy.is_finite() && self.omega.is_finite()
    }

    pub fn scaled(&self, k: f64) -> Twist {
        Twist {
            vx: self.vx * k,
            vy: self.vy * k,
            omega: self.omega * k,
            frame: self.frame,
        }
    }

    pub fn linear_speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }
}

/// Rotational speeds of the three omniwheels, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WheelSpeeds(pub [f64; 3]);

impl WheelSpeeds {
    pub fn zero() -> Self {
        Self([0.0; 3])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|w| w.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, w| m.max(w.abs()))
    }

    /// Uniformly scales all three speeds down so none exceeds `limit`.
    /// Scaling (rather than clipping each wheel) keeps the twist direction.
    pub fn saturate(&self, limit: f64) -> WheelSpeeds {
        let peak = self.max_abs();
        if peak <= limit || peak == 0.0 {
            *self
        } else {
            let k = limit / peak;
            WheelSpeeds(self.0.map(|w| w * k))
        }
    }
}

/// Wheel and mass parameters for one module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotGeometry {
    /// Wheel radius `r`, meters.
    pub wheel_radius: f64,
    /// Body center to wheel center distance `L`, meters.
    pub center_offset: f64,
    /// Wheel mount angles, radians.
    #[serde(default = "default_mount_angles")]
    pub mount_angles: [f64; 3],
    pub mass: f64,
    /// Planar moment of inertia about the module's own center of mass.
    pub body_inertia: f64,
    /// 1-based index of the wheel carrying the docking hub.
    #[serde(default = "default_dock_wheel")]
    pub dock_wheel_index: usize,
    #[serde(default = "default_max_wheel_speed")]
    pub max_wheel_speed: f64,
    /// Distance from body center to the hub face along the dock wheel axle.
    #[serde(default = "default_hub_offset")]
    pub hub_offset: f64,
}

fn default_mount_angles() -> [f64; 3] {
    [150f64.to_radians(), 270f64.to_radians(), 30f64.to_radians()]
}

fn default_dock_wheel() -> usize {
    3
}

fn default_max_wheel_speed() -> f64 {
    12.0
}

fn default_hub_offset() -> f64 {
    0.15
}

impl Default for RobotGeometry {
    fn default() -> Self {
        Self {
            wheel_radius: 0.05,
            center_offset: 0.12,
            mount_angles: default_mount_angles(),
            mass: 4.0,
            body_inertia: 0.06,
            dock_wheel_index: default_dock_wheel(),
            max_wheel_speed: default_max_wheel_speed(),
            hub_offset: default_hub_offset(),
        }
    }
}

impl RobotGeometry {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("wheel_radius", self.wheel_radius),
            ("center_offset", self.center_offset),
            ("mass", self.mass),
            ("body_inertia", self.body_inertia),
            ("max_wheel_speed", self.max_wheel_speed),
            ("hub_offset", self.hub_offset),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidGeometry(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.mount_angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidGeometry("mount angles must be finite".into()));
        }
        if !(1..=3).contains(&self.dock_wheel_index) {
            return Err(Error::InvalidGeometry(format!(
                "dock_wheel_index must be 1, 2 or 3, got {}",
                self.dock_wheel_index
            )));
        }
        let det = self.wheel_matrix().determinant();
        if det.abs() < MIN_DETERMINANT {
            return Err(Error::InvalidGeometry(format!(
                "wheel matrix is singular (det = {det:e})"
            )));
        }
        Ok(())
    }

    /// Mount angle of the hub-carrying wheel, which is also the hub axis
    /// direction in the body frame.
    pub fn dock_axis_angle(&self) -> f64 {
        self.mount_angles[self.dock_wheel_index - 1]
    }

    /// Hub face center in the body frame.
    pub fn hub_position(&self) -> [f64; 2] {
        let a = self.dock_axis_angle();
        [self.hub_offset * a.cos(), self.hub_offset * a.sin()]
    }

    /// The 3x3 matrix mapping body twist to wheel speeds.
    pub fn wheel_matrix(&self) -> Matrix3<f64> {
        let r = self.wheel_radius;
        let l = self.center_offset;
        let row = |a: f64| [-a.sin() / r, a.cos() / r, l / r];
        let [r1, r2, r3] = self.mount_angles.map(row);
        Matrix3::new(
            r1[0], r1[1], r1[2], //
            r2[0], r2[1], r2[2], //
            r3[0], r3[1], r3[2],
        )
    }
}

/// Body twist to wheel speeds.
pub fn inverse_kinematics(twist: &Twist, geom: &RobotGeometry) -> Result<WheelSpeeds> {
    twist.expect_frame(Frame::Body)?;
    if !twist.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite twist {twist:?}")));
    }
    let r = geom.wheel_radius;
    let l = geom.center_offset;
    Ok(WheelSpeeds(geom.mount_angles.map(|a| {
        (-a.sin() * twist.vx + a.cos() * twist.vy + l * twist.omega) / r
    })))
}

/// Wheel speeds to body twist using the exact inverse of the wheel matrix.
pub fn forward_kinematics(wheels: &WheelSpeeds, geom: &RobotGeometry) -> Result<Twist> {
    if !wheels.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite wheel speeds {wheels:?}")));
    }
    let m = geom.wheel_matrix();
    if m.determinant().abs() < MIN_DETERMINANT {
        return Err(Error::InvalidGeometry("wheel matrix is singular".into()));
    }
    let inv = m
        .try_inverse()
        .ok_or_else(|| Error::InvalidGeometry("wheel matrix is singular".into()))?;
    let v = inv * Vector3::from(wheels.0);
    Ok(Twist::body(v[0], v[1], v[2]))
}

pub fn body_to_world(twist: &Twist, pose: &Pose) -> Result<Twist> {
    twist.expect_frame(Frame::Body)?;
    let (s, c) = pose.theta.sin_cos();
    Ok(Twist::world(
        c * twist.vx - s * twist.vy,
        s * twist.vx + c * twist.vy,
        twist.omega,
    ))
}

pub fn world_to_body(twist: &Twist, pose: &Pose) -> Result<Twist> {
    twist.expect_frame(Frame::World)?;
    let (s, c) = pose.theta.sin_cos();
    Ok(Twist::body(
        c * twist.vx + s * twist.vy,
        -s * twist.vx + c * twist.vy,
        twist.omega,
    ))
}

/// Velocity of a body-fixed point `p` (body frame) for a body twist.
pub fn point_velocity(twist: &Twist, p: [f64; 2]) -> [f64; 2] {
    [twist.vx - twist.omega * p[1], twist.vy + twist.omega * p[0]]
}
