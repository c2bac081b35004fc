//! Three-phase autonomous docking: rotational search, visual alignment and
//! the screw-lock maneuver.
//!
//! The searching (male) module drives; the tag-bearing (female) module holds
//! still. [`DockingState`] is an explicit state machine whose step functions
//! return the next command and advance the phase.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{wrap_angle, Pose, RobotGeometry, Twist, WheelSpeeds};
use crate::perception::TagObservation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Search,
    Align,
    Lock,
    Docked,
    Failed,
}

impl Phase {
    pub fn is_terminal(&self) -> bool {
        matches!(self, Phase::Docked | Phase::Failed)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Search => "search",
            Phase::Align => "align",
            Phase::Lock => "lock",
            Phase::Docked => "docked",
            Phase::Failed => "failed",
        }
    }

    /// Whether `self -> to` is an allowed edge.
    pub fn can_transition_to(&self, to: Phase) -> bool {
        use Phase::*;
        match (self, to) {
            (Docked | Failed, _) => false,
            (_, Failed) => true,
            (Search, Align) | (Align, Lock) | (Align, Search) | (Lock, Docked) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    Timeout,
    TagLost,
    Misalignment,
}

impl FailureReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            FailureReason::Timeout => "timeout",
            FailureReason::TagLost => "tag_lost",
            FailureReason::Misalignment => "misalignment",
        }
    }
}

/// Which wheel-speed law drives the lock maneuver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LockLaw {
    /// Pairs `cos(alpha_i)` with the forward speed, as in the published
    /// two-wheel law.
    PrintedCosine,
    /// Rows of the full wheel matrix with zero lateral speed.
    KinematicRows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DockingParams {
    /// Search spin rate, rad/s (sign sets the direction).
    pub search_spin_rate: f64,
    /// Alignment completes when lateral and depth errors are both within this, m.
    pub align_lateral_tolerance: f64,
    /// Hub-face gap at which alignment hands over to locking, m.
    pub standoff_distance: f64,
    /// Lock forward speed `A`, m/s.
    pub lock_forward_speed: f64,
    /// Constant dock-wheel speed during locking, rad/s.
    pub lock_hub_spin: f64,
    pub required_turns: u32,
    pub capture_lateral: f64,
    pub capture_angular: f64,
    pub phase_timeout: f64,
    pub lock_law: LockLaw,
    pub align_gain_lateral: f64,
    pub align_gain_depth: f64,
    pub align_gain_yaw: f64,
    /// Smoothing factor of the offset filter used during alignment, in (0, 1].
    pub align_filter_alpha: f64,
    /// Consecutive missed detections before falling back to search.
    pub lost_tag_limit: u32,
}

impl Default for DockingParams {
    fn default() -> Self {
        Self {
            search_spin_rate: 0.5,
            align_lateral_tolerance: 0.004,
            standoff_distance: 0.03,
            lock_forward_speed: 0.05,
            lock_hub_spin: 2.0,
            required_turns: 3,
            capture_lateral: 0.008,
            capture_angular: 5f64.to_radians(),
            phase_timeout: 60.0,
            lock_law: LockLaw::PrintedCosine,
            align_gain_lateral: 1.5,
            align_gain_depth: 1.0,
            align_gain_yaw: 1.0,
            align_filter_alpha: 0.2,
            lost_tag_limit: 15,
        }
    }
}

impl DockingParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("search_spin_rate", self.search_spin_rate.abs()),
            ("align_lateral_tolerance", self.align_lateral_tolerance),
            ("standoff_distance", self.standoff_distance),
            ("lock_forward_speed", self.lock_forward_speed),
            ("lock_hub_spin", self.lock_hub_spin.abs()),
            ("capture_lateral", self.capture_lateral),
            ("capture_angular", self.capture_angular),
            ("phase_timeout", self.phase_timeout),
            ("align_gain_lateral", self.align_gain_lateral),
            ("align_gain_depth", self.align_gain_depth),
            ("align_gain_yaw", self.align_gain_yaw),
            ("align_filter_alpha", self.align_filter_alpha),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.align_filter_alpha > 1.0 {
            return Err(Error::InvalidParameter("align_filter_alpha must be <= 1".into()));
        }
        if self.required_turns < 1 {
            return Err(Error::InvalidParameter("required_turns must be >= 1".into()));
        }
        if self.lost_tag_limit < 1 {
            return Err(Error::InvalidParameter("lost_tag_limit must be >= 1".into()));
        }
        Ok(())
    }

    pub fn required_rotation(&self) -> f64 {
        self.required_turns as f64 * TAU
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HubGender {
    Male,
    Female,
}

/// Thread metadata of the screw-lock hub. Lengths in millimeters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DockHubSpec {
    pub designation: String,
    pub nominal_diameter: f64,
    pub pitch: f64,
    pub major_diameter: f64,
    pub pitch_diameter: f64,
    pub minor_diameter: f64,
    pub theoretical_thread_height: f64,
    pub effective_thread_height: f64,
    pub flank_angle_deg: f64,
    pub tolerance_class: String,
    pub gender: HubGender,
}

impl DockHubSpec {
    /// ISO metric M56 x 5.5 coarse hub.
    pub fn m56(gender: HubGender) -> Self {
        Self {
            designation: "M56x5.5".into(),
            nominal_diameter: 56.0,
            pitch: 5.5,
            major_diameter: 56.000,
            pitch_diameter: 53.917,
            minor_diameter: 51.835,
            theoretical_thread_height: 4.763,
            effective_thread_height: 3.372,
            flank_angle_deg: 60.0,
            tolerance_class: "6g/6H".into(),
            gender,
        }
    }

    /// Axial thread engagement after `turns` full turns, mm.
    pub fn engagement_length(&self, turns: u32) -> f64 {
        turns as f64 * self.pitch
    }
}

/// Pose of the male hub relative to the female hub.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HubAlignment {
    /// Distance between hub faces along the female hub axis; <= 0 is contact.
    pub axial_gap: f64,
    /// Offset of the male hub center perpendicular to the female axis.
    pub lateral: f64,
    /// Angle between the male axis and the reversed female axis.
    pub angular: f64,
}

impl HubAlignment {
    pub fn between(
        male_pose: &Pose,
        male: &RobotGeometry,
        female_pose: &Pose,
        female: &RobotGeometry,
    ) -> Self {
        let pm = male_pose.transform_point(male.hub_position());
        let pf = female_pose.transform_point(female.hub_position());
        let nf = female_pose.theta + female.dock_axis_angle();
        let nm = male_pose.theta + male.dock_axis_angle();
        let (s, c) = nf.sin_cos();
        let d = [pm[0] - pf[0], pm[1] - pf[1]];
        Self {
            axial_gap: c * d[0] + s * d[1],
            lateral: -s * d[0] + c * d[1],
            angular: wrap_angle(nm - nf - PI),
        }
    }
}

/// Wheel speeds for the lock maneuver: the dock wheel spins at `hub_spin`
/// and the other two wheels follow the selected law with forward speed
/// `forward`, zero lateral speed and yaw rate equal to `hub_spin`.
pub fn lock_wheel_speeds(
    forward: f64,
    hub_spin: f64,
    geom: &RobotGeometry,
    law: LockLaw,
) -> Result<WheelSpeeds> {
    geom.validate()?;
    if !(forward.is_finite() && hub_spin.is_finite()) {
        return Err(Error::InvalidInput("non-finite lock speeds".into()));
    }
    let r = geom.wheel_radius;
    let l = geom.center_offset;
    let dock = geom.dock_wheel_index - 1;
    let mut out = [0.0; 3];
    for (i, (slot, alpha)) in out.iter_mut().zip(geom.mount_angles).enumerate() {
        *slot = if i == dock {
            hub_spin
        } else {
            let forward_coeff = match law {
                LockLaw::PrintedCosine => alpha.cos(),
                LockLaw::KinematicRows => -alpha.sin(),
            };
            (forward_coeff * forward + l * hub_spin) / r
        };
    }
    Ok(WheelSpeeds(out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTransition {
    pub time: f64,
    pub from: Phase,
    pub to: Phase,
    pub reason: Option<FailureReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DockingState {
    pub phase: Phase,
    pub phase_entry_time: f64,
    /// Relative hub rotation accumulated while engaged, rad.
    pub hub_rotation: f64,
    pub failure: Option<FailureReason>,
    pub transitions: Vec<PhaseTransition>,
    consecutive_misses: u32,
    /// Low-passed (x_offset, z_offset, bearing) during alignment.
    filtered: Option<[f64; 3]>,
    tag_seen: bool,
}

impl Default for DockingState {
    fn default() -> Self {
        Self::new(0.0)
    }
}

impl DockingState {
    pub fn new(start_time: f64) -> Self {
        Self {
            phase: Phase::Search,
            phase_entry_time: start_time,
            hub_rotation: 0.0,
            failure: None,
            transitions: Vec::new(),
            consecutive_misses: 0,
            filtered: None,
            tag_seen: false,
        }
    }

    /// Starts directly in alignment; used when the tag is already in view.
    pub fn aligning(start_time: f64) -> Self {
        let mut s = Self::new(start_time);
        s.phase = Phase::Align;
        s.tag_seen = true;
        s
    }

    /// Starts directly in the lock phase.
    pub fn locking(start_time: f64) -> Self {
        let mut s = Self::new(start_time);
        s.phase = Phase::Lock;
        s.tag_seen = true;
        s
    }

    pub fn phase_sequence(&self) -> Vec<Phase> {
        let mut seq = vec![self.transitions.first().map_or(self.phase, |t| t.from)];
        seq.extend(self.transitions.iter().map(|t| t.to));
        seq
    }

    fn transition(&mut self, to: Phase, time: f64, reason: Option<FailureReason>) -> Result<()> {
        if !self.phase.can_transition_to(to) {
            return Err(Error::IllegalTransition {
                from: self.phase,
                to,
            });
        }
        self.transitions.push(PhaseTransition {
            time,
            from: self.phase,
            to,
            reason,
        });
        self.phase = to;
        self.phase_entry_time = time;
        self.consecutive_misses = 0;
        if to == Phase::Failed {
            self.failure = reason;
        }
        if to != Phase::Align {
            self.filtered = None;
        }
        Ok(())
    }

    fn expect(&self, phase: Phase) -> Result<()> {
        if self.phase == phase {
            Ok(())
        } else {
            Err(Error::WrongPhase {
                expected: phase,
                found: self.phase,
            })
        }
    }

    fn timed_out(&self, time: f64, params: &DockingParams) -> bool {
        time - self.phase_entry_time >= params.phase_timeout
    }

    /// Fails the session from any non-terminal phase.
    pub fn abort(&mut self, time: f64, reason: FailureReason) -> Result<()> {
        self.transition(Phase::Failed, time, Some(reason))
    }

    /// Spin in place until the tag shows up.
    pub fn search_step(
        &mut self,
        time: f64,
        obs: &TagObservation,
        params: &DockingParams,
    ) -> Result<Twist> {
        self.expect(Phase::Search)?;
        if self.timed_out(time, params) {
            let reason = if self.tag_seen {
                FailureReason::TagLost
            } else {
                FailureReason::Timeout
            };
            self.transition(Phase::Failed, time, Some(reason))?;
            return Ok(Twist::body(0.0, 0.0, 0.0));
        }
        if let TagObservation::Detected {
            x_offset,
            z_offset,
            bearing,
        } = *obs
        {
            self.tag_seen = true;
            self.transition(Phase::Align, time, None)?;
            self.filtered = Some([x_offset, z_offset, bearing]);
        }
        Ok(Twist::body(0.0, 0.0, params.search_spin_rate))
    }

    /// Visual servo: center the tag, square up to it and close to the
    /// standoff distance. `camera_mount` is the camera pose in the body frame.
    pub fn align_step(
        &mut self,
        time: f64,
        obs: &TagObservation,
        params: &DockingParams,
        camera_mount: &Pose,
    ) -> Result<Twist> {
        self.expect(Phase::Align)?;
        let stop = Twist::body(0.0, 0.0, 0.0);
        if self.timed_out(time, params) {
            self.transition(Phase::Failed, time, Some(FailureReason::Timeout))?;
            return Ok(stop);
        }
        match *obs {
            TagObservation::Detected {
                x_offset,
                z_offset,
                bearing,
            } => {
                self.consecutive_misses = 0;
                let a = params.align_filter_alpha;
                self.filtered = Some(match self.filtered {
                    None => [x_offset, z_offset, bearing],
                    Some([fx, fz, fb]) => [
                        fx + a * (x_offset - fx),
                        fz + a * (z_offset - fz),
                        wrap_angle(fb + a * wrap_angle(bearing - fb)),
                    ],
                });
            }
            TagObservation::NotDetected => {
                self.consecutive_misses += 1;
                if self.consecutive_misses >= params.lost_tag_limit {
                    self.transition(Phase::Search, time, None)?;
                    return Ok(stop);
                }
            }
        }
        let Some([x, z, bearing]) = self.filtered else {
            return Ok(stop);
        };

        let depth_err = z - params.standoff_distance;
        if x.abs() <= params.align_lateral_tolerance
            && depth_err.abs() <= params.align_lateral_tolerance
            && bearing.abs() <= params.capture_angular
        {
            self.transition(Phase::Lock, time, None)?;
            return Ok(stop);
        }

        // camera-frame command
        let v_fwd = params.align_gain_depth * depth_err;
        let v_right = params.align_gain_lateral * x;
        let omega = params.align_gain_yaw * bearing;

        let (s, c) = camera_mount.theta.sin_cos();
        let v_cam = [v_fwd * c + v_right * s, v_fwd * s - v_right * c];
        // body origin velocity from the camera point velocity
        Ok(Twist::body(
            v_cam[0] + omega * camera_mount.y,
            v_cam[1] - omega * camera_mount.x,
            omega,
        ))
    }

    /// Screw-lock step. Rotation is credited only while the hubs touch and
    /// stay inside the capture tolerance.
    pub fn lock_step(
        &mut self,
        time: f64,
        dt: f64,
        hub: &HubAlignment,
        params: &DockingParams,
        geom: &RobotGeometry,
    ) -> Result<WheelSpeeds> {
        self.expect(Phase::Lock)?;
        if self.timed_out(time, params) {
            self.transition(Phase::Failed, time, Some(FailureReason::Timeout))?;
            return Ok(WheelSpeeds::zero());
        }
        if hub.lateral.abs() > params.capture_lateral || hub.angular.abs() > params.capture_angular
        {
            self.transition(Phase::Failed, time, Some(FailureReason::Misalignment))?;
            return Ok(WheelSpeeds::zero());
        }
        let engaged = hub.axial_gap <= 0.0;
        if engaged {
            self.hub_rotation += params.lock_hub_spin.abs() * dt;
        }
        if engaged && self.hub_rotation >= params.required_rotation() {
            self.transition(Phase::Docked, time, None)?;
            return Ok(WheelSpeeds::zero());
        }
        lock_wheel_speeds(
            params.lock_forward_speed,
            params.lock_hub_spin,
            geom,
            params.lock_law,
        )
    }
}
