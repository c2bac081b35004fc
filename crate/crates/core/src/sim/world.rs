//! Fixed-step kinematic world.
//!
//! Each step takes per-robot wheel-speed commands, saturates them, adds
//! actuation noise, maps the noisy wheels to body twists and integrates the
//! poses. A docked pair moves as one body whose twist is the least-squares
//! fit to all six wheels. A carried object, if present, is advanced through
//! its grasp springs afterwards.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::composite::{composite_forward_kinematics, module_twists, CompositeBody};
use crate::docking::{DockingState, HubAlignment};
use crate::error::{Error, Result};
use crate::kinematics::{
    body_to_world, forward_kinematics, point_velocity, Pose, RobotGeometry, Twist, WheelSpeeds,
};
use crate::sim::coupling::{ObjectCoupling, ObjectState};

/// Gaussian wheel-speed noise: sigma = relative * |command| + floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub actuation_relative: f64,
    /// rad/s
    pub actuation_floor: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            actuation_relative: 0.02,
            actuation_floor: 0.01,
        }
    }
}

impl NoiseConfig {
    pub fn none() -> Self {
        Self {
            actuation_relative: 0.0,
            actuation_floor: 0.0,
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            actuation_relative: k * self.actuation_relative,
            actuation_floor: k * self.actuation_floor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.actuation_relative >= 0.0 && self.actuation_floor >= 0.0)
            || !self.actuation_relative.is_finite()
            || !self.actuation_floor.is_finite()
        {
            return Err(Error::InvalidParameter("noise sigmas must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Named random streams, all derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Placement,
    Perception,
    Actuation(usize),
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(match stream {
        Stream::Placement => 1,
        Stream::Perception => 2,
        Stream::Actuation(i) => 16 + i as u64,
    });
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub geometry: RobotGeometry,
    pub pose: Pose,
    /// Held in place; receives no commands and draws no noise.
    pub parked: bool,
    pub docking: Option<DockingState>,
    /// Body-frame twist of the last commanded wheel speeds.
    pub commanded: Twist,
    /// Body-frame twist actually executed in the last step.
    pub actual: Twist,
}

impl RobotState {
    pub fn new(geometry: RobotGeometry, pose: Pose) -> Self {
        Self {
            geometry,
            pose,
            parked: false,
            docking: None,
            commanded: Twist::body(0.0, 0.0, 0.0),
            actual: Twist::body(0.0, 0.0, 0.0),
        }
    }
}

/// Mechanical guide acting while the male hub closes on the female hub: only
/// motion of the male hub point along the female hub axis passes, and the
/// hubs cannot interpenetrate. Contact latches once reached.
#[derive(Debug, Clone, PartialEq)]
pub struct HubGuide {
    pub male: usize,
    pub female: usize,
    pub in_contact: bool,
    /// Largest yaw rate removed by the guide, rad/s.
    pub max_blocked_yaw_rate: f64,
}

impl HubGuide {
    pub fn new(male: usize, female: usize) -> Self {
        Self {
            male,
            female,
            in_contact: false,
            max_blocked_yaw_rate: 0.0,
        }
    }

    /// Alignment as sensed by the lock controller; the gap reads exactly
    /// zero once contact has latched.
    pub fn alignment(&self, robots: &[RobotState]) -> HubAlignment {
        let m = &robots[self.male];
        let f = &robots[self.female];
        let mut a = HubAlignment::between(&m.pose, &m.geometry, &f.pose, &f.geometry);
        if self.in_contact {
            a.axial_gap = 0.0;
        }
        a
    }

    /// Constrained world twist of the male for a free world twist.
    fn constrain(&mut self, free: &Twist, robots: &[RobotState], dt: f64) -> Twist {
        self.max_blocked_yaw_rate = self.max_blocked_yaw_rate.max(free.omega.abs());
        if self.in_contact {
            return Twist::world(0.0, 0.0, 0.0);
        }
        let m = &robots[self.male];
        let f = &robots[self.female];
        let hub = m.geometry.hub_position();
        let (s, c) = m.pose.theta.sin_cos();
        let arm = [c * hub[0] - s * hub[1], s * hub[0] + c * hub[1]];
        let v = point_velocity(free, arm);
        let axis = f.pose.theta + f.geometry.dock_axis_angle();
        let n = [axis.cos(), axis.sin()];
        let gap = HubAlignment::between(&m.pose, &m.geometry, &f.pose, &f.geometry).axial_gap;
        let mut v_ax = v[0] * n[0] + v[1] * n[1];
        if gap + v_ax * dt <= 1e-9 {
            v_ax = -gap / dt;
            self.in_contact = true;
        }
        Twist::world(v_ax * n[0], v_ax * n[1], 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeState {
    pub body: CompositeBody,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarriedObject {
    pub coupling: ObjectCoupling,
    pub state: ObjectState,
}

#[derive(Debug, Clone)]
pub struct WorldState {
    pub time: f64,
    pub steps: u64,
    pub dt: f64,
    pub robots: Vec<RobotState>,
    pub composite: Option<CompositeState>,
    pub object: Option<CarriedObject>,
    pub guide: Option<HubGuide>,
    pub noise: NoiseConfig,
    actuation: Vec<ChaCha8Rng>,
}

impl WorldState {
    pub fn new(robots: Vec<RobotState>, dt: f64, noise: NoiseConfig, seed: u64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
        }
        noise.validate()?;
        for r in &robots {
            r.geometry.validate()?;
        }
        let actuation = (0..robots.len())
            .map(|i| stream_rng(seed, Stream::Actuation(i)))
            .collect();
        Ok(Self {
            time: 0.0,
            steps: 0,
            dt,
            robots,
            composite: None,
            object: None,
            guide: None,
            noise,
            actuation,
        })
    }

    /// Merges the first two robots into one rigid body at their current poses.
    pub fn attach_composite(&mut self, body: CompositeBody) {
        let pose = body.frame_at_dock;
        self.composite = Some(CompositeState { body, pose });
        self.guide = None;
    }

    pub fn module_poses(&self) -> [Pose; 2] {
        [self.robots[0].pose, self.robots[1].pose]
    }

    fn noisy(&mut self, i: usize, cmd: &WheelSpeeds) -> WheelSpeeds {
        let rng = &mut self.actuation[i];
        let mut out = *cmd;
        for w in out.0.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *w += (self.noise.actuation_relative * w.abs() + self.noise.actuation_floor) * z;
        }
        out
    }

    /// Advances one step with per-robot wheel commands.
    pub fn step(&mut self, commands: &[WheelSpeeds]) -> Result<()> {
        if commands.len() != self.robots.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} wheel commands, got {}",
                self.robots.len(),
                commands.len()
            )));
        }
        let dt = self.dt;
        let n = self.robots.len();
        let mut world_twists = vec![Twist::world(0.0, 0.0, 0.0); n];

        if let Some(comp) = self.composite.clone() {
            let sat: [WheelSpeeds; 2] = [0, 1].map(|i| {
                commands[i].saturate(self.robots[i].geometry.max_wheel_speed)
            });
            let noisy = [self.noisy(0, &sat[0]), self.noisy(1, &sat[1])];
            let cmd = composite_forward_kinematics(&sat, &comp.body)?;
            let act = composite_forward_kinematics(&noisy, &comp.body)?;
            let cmd_mod = module_twists(&cmd, &comp.body)?;
            let act_mod = module_twists(&act, &comp.body)?;
            let world = body_to_world(&act, &comp.pose)?;
            let pose = comp.pose.integrate(&world, dt)?;
            let poses = comp.body.module_poses(&pose);
            for i in 0..2 {
                let r = &mut self.robots[i];
                r.commanded = cmd_mod[i];
                r.actual = act_mod[i];
                r.pose = poses[i];
                world_twists[i] = body_to_world(&act_mod[i], &poses[i])?;
            }
            if let Some(c) = self.composite.as_mut() {
                c.pose = pose;
            }
        } else {
            for i in 0..n {
                if self.robots[i].parked {
                    self.robots[i].commanded = Twist::body(0.0, 0.0, 0.0);
                    self.robots[i].actual = Twist::body(0.0, 0.0, 0.0);
                    continue;
                }
                let geom = self.robots[i].geometry.clone();
                let sat = commands[i].saturate(geom.max_wheel_speed);
                let noisy = self.noisy(i, &sat);
                let cmd = forward_kinematics(&sat, &geom)?;
                let act = forward_kinematics(&noisy, &geom)?;
                let mut world = body_to_world(&act, &self.robots[i].pose)?;
                if let Some(mut g) = self.guide.clone() {
                    if g.male == i {
                        world = g.constrain(&world, &self.robots, dt);
                        self.guide = Some(g);
                    }
                }
                let r = &mut self.robots[i];
                r.commanded = cmd;
                // executed twist back in the body frame (before the pose update)
                r.actual = crate::kinematics::world_to_body(&world, &r.pose)?;
                r.pose = r.pose.integrate(&world, dt)?;
                world_twists[i] = world;
            }
        }

        if let Some(obj) = self.object.as_mut() {
            let poses = [self.robots[0].pose, self.robots[1].pose];
            let tw = [world_twists[0], world_twists[1]];
            obj.state.advance(&obj.coupling, &poses, &tw, dt);
        }

        self.steps += 1;
        self.time = self.steps as f64 * dt;
        self.check_finite()
    }

    fn check_finite(&self) -> Result<()> {
        let bad_pose = |p: &Pose| !(p.x.is_finite() && p.y.is_finite() && p.theta.is_finite());
        for (i, r) in self.robots.iter().enumerate() {
            if bad_pose(&r.pose) || !r.actual.is_finite() {
                return Err(Error::Diverged {
                    time: self.time,
                    what: format!("robot {} state is not finite", i + 1),
                });
            }
        }
        if let Some(o) = &self.object {
            let s = &o.state;
            if s.position
                .iter()
                .chain(&s.velocity)
                .chain(&s.acceleration)
                .any(|v| !v.is_finite())
            {
                return Err(Error::Diverged {
                    time: self.time,
                    what: "carried object state is not finite".into(),
                });
            }
        }
        Ok(())
    }

    pub fn object_acceleration(&self) -> [f64; 2] {
        self.object.as_ref().map_or([0.0; 2], |o| o.state.acceleration)
    }
}
