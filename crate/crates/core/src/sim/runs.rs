//! Complete episodes: autonomous docking, docked transport, cooperating
//! transport and single-robot path tracking.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::composite::{
    compose, composite_twist_to_wheels, docked_pair_poses, CompositeBody, CompositeMode,
    ContactTolerance,
};
use crate::docking::{DockingParams, DockingState, FailureReason, Phase};
use crate::error::{Error, Result};
use crate::kinematics::{inverse_kinematics, world_to_body, Pose, RobotGeometry, Twist, WheelSpeeds};
use crate::metrics::MetricSeries;
use crate::perception::{Lighting, PerceptionConfig, TagObservation, TagPose};
use crate::sim::coupling::{ObjectCoupling, ObjectState};
use crate::sim::path::{FollowerGains, PathFollower, PathSpec};
use crate::sim::trace::{RobotSample, RunTrace, TraceRow};
use crate::sim::world::{
    stream_rng, CarriedObject, HubGuide, NoiseConfig, RobotState, Stream, WorldState,
};

/// Integration and noise settings shared by all episodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSettings {
    pub dt: f64,
    pub max_time: f64,
    pub noise: NoiseConfig,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt: 0.005,
            max_time: 200.0,
            noise: NoiseConfig::default(),
        }
    }
}

impl SimSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.max_time > self.dt && self.max_time.is_finite()) {
            return Err(Error::InvalidParameter("max_time must exceed dt".into()));
        }
        self.noise.validate()
    }
}

/// Where the approaching module starts relative to the waiting one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApproachSetup {
    /// Pose of the waiting (female) module.
    pub female_pose: Pose,
    /// Angle between the tag normal and the tag-to-approacher line, degrees.
    pub deviation_deg: f64,
    /// Distance from the tag to the approacher's center, meters.
    pub distance: f64,
    /// Half-width of the uniform jitter added to `distance`, meters.
    pub distance_jitter: f64,
    /// Draw the approacher's initial heading uniformly; otherwise face the tag.
    pub random_heading: bool,
}

impl Default for ApproachSetup {
    fn default() -> Self {
        Self {
            // hub axis along +x
            female_pose: Pose::new(0.0, 0.0, -30f64.to_radians()),
            deviation_deg: 30.0,
            distance: 0.8,
            distance_jitter: 0.05,
            random_heading: true,
        }
    }
}

impl ApproachSetup {
    pub fn validate(&self) -> Result<()> {
        if !(self.deviation_deg.is_finite() && self.deviation_deg.abs() < 90.0) {
            return Err(Error::InvalidParameter("deviation_deg must lie in (-90, 90)".into()));
        }
        if !(self.distance > 0.0 && self.distance_jitter >= 0.0 && self.distance_jitter < self.distance)
        {
            return Err(Error::InvalidParameter(
                "distance must be > 0 and exceed distance_jitter >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Approacher start pose for a seed.
    pub fn approacher_pose(&self, female: &RobotGeometry, seed: u64) -> Pose {
        let mut rng = stream_rng(seed, Stream::Placement);
        let tag = TagPose::on_hub(&self.female_pose, female, 0);
        let d = self.distance + self.distance_jitter * rng.random_range(-1.0..=1.0);
        let dir = tag.normal + self.deviation_deg.to_radians();
        let x = tag.position[0] + d * dir.cos();
        let y = tag.position[1] + d * dir.sin();
        let heading = if self.random_heading {
            rng.random_range(-PI..PI)
        } else {
            // hub axis pointing back at the tag
            dir + PI
        };
        Pose::new(x, y, heading)
    }
}

#[derive(Debug, Clone)]
pub struct DockingResult {
    pub state: DockingState,
    pub trace: RunTrace,
    pub composite: Option<CompositeBody>,
    pub dock_time: Option<f64>,
    pub approacher_start: Pose,
    /// Largest yaw rate the hub guide had to block during locking, rad/s.
    pub max_blocked_yaw_rate: f64,
    pub final_time: f64,
}

impl DockingResult {
    pub fn docked(&self) -> bool {
        self.state.phase == Phase::Docked
    }
}

fn sample(r: &RobotState, heading_error: f64) -> RobotSample {
    RobotSample {
        pose: r.pose,
        commanded: r.commanded,
        actual: r.actual,
        heading_error,
    }
}

/// Autonomous docking: module 1 waits with its tag exposed, module 2 searches,
/// aligns and screws its hub in.
pub fn run_docking(
    geometries: &[RobotGeometry; 2],
    setup: &ApproachSetup,
    params: &DockingParams,
    perception: &PerceptionConfig,
    lighting: Lighting,
    sim: &SimSettings,
    seed: u64,
) -> Result<DockingResult> {
    setup.validate()?;
    params.validate()?;
    perception.validate()?;
    sim.validate()?;
    let [gf, gm] = geometries;
    let start = setup.approacher_pose(gf, seed);
    let mut female = RobotState::new(gf.clone(), setup.female_pose);
    female.parked = true;
    let male = RobotState::new(gm.clone(), start);
    let mut world = WorldState::new(vec![female, male], sim.dt, sim.noise, seed)?;
    let mut perception_rng = stream_rng(seed, Stream::Perception);
    let tag = TagPose::on_hub(&setup.female_pose, gf, 0);
    let mount = perception.camera.mount_pose(gm);

    let mut state = DockingState::new(0.0);
    let mut trace = RunTrace::default();
    let record = |world: &WorldState, phase: Phase, trace: &mut RunTrace| {
        trace.push(TraceRow {
            t: world.time,
            robots: [
                Some(sample(&world.robots[0], 0.0)),
                Some(sample(&world.robots[1], 0.0)),
            ],
            object_accel: [0.0; 2],
            phase: phase.as_str(),
        });
    };
    record(&world, state.phase, &mut trace);

    loop {
        let t = world.time;
        if !state.phase.is_terminal() && t >= sim.max_time {
            state.abort(t, FailureReason::Timeout)?;
        }
        let wheels = match state.phase {
            Phase::Search | Phase::Align => {
                let camera = world.robots[1].pose.compose(&mount);
                let obs: TagObservation =
                    perception.observe(&camera, &tag, lighting, &mut perception_rng);
                let twist = if state.phase == Phase::Search {
                    state.search_step(t, &obs, params)?
                } else {
                    state.align_step(t, &obs, params, &mount)?
                };
                if state.phase == Phase::Lock && world.guide.is_none() {
                    world.guide = Some(HubGuide::new(1, 0));
                }
                inverse_kinematics(&twist, gm)?
            }
            Phase::Lock => {
                let guide = world.guide.get_or_insert_with(|| HubGuide::new(1, 0));
                let hub = guide.alignment(&world.robots);
                state.lock_step(t, sim.dt, &hub, params, gm)?
            }
            Phase::Docked | Phase::Failed => break,
        };
        if state.phase.is_terminal() {
            break;
        }
        world.step(&[WheelSpeeds::zero(), wheels])?;
        record(&world, state.phase, &mut trace);
    }

    let max_blocked_yaw_rate = world.guide.as_ref().map_or(0.0, |g| g.max_blocked_yaw_rate);
    let (composite, dock_time) = if state.phase == Phase::Docked {
        let tol = ContactTolerance {
            lateral: params.capture_lateral,
            angular: params.capture_angular,
        };
        let body = compose(
            (gf, &world.robots[0].pose),
            (gm, &world.robots[1].pose),
            tol,
        )?;
        (Some(body), Some(world.time))
    } else {
        (None, None)
    };
    if let Some(last) = trace.rows.last_mut() {
        last.phase = state.phase.as_str();
    }
    Ok(DockingResult {
        state,
        trace,
        composite,
        dock_time,
        approacher_start: start,
        max_blocked_yaw_rate,
        final_time: world.time,
    })
}

/// Path, controller and payload for the transport episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransportSetup {
    pub path: PathSpec,
    pub gains: FollowerGains,
    pub coupling: ObjectCoupling,
    /// Heading of the composite frame (docking axis) at the start, radians.
    pub start_heading: f64,
}

impl Default for TransportSetup {
    fn default() -> Self {
        Self {
            path: PathSpec::default(),
            gains: FollowerGains::default(),
            coupling: ObjectCoupling::default(),
            start_heading: 0.0,
        }
    }
}

impl TransportSetup {
    pub fn validate(&self) -> Result<()> {
        self.path.validate()?;
        self.gains.validate()?;
        self.coupling.validate()?;
        if !self.start_heading.is_finite() {
            return Err(Error::InvalidParameter("start_heading must be finite".into()));
        }
        Ok(())
    }

    fn start_frame(&self) -> Pose {
        let w0 = self.path.waypoints[0];
        Pose::new(w0[0], w0[1], self.start_heading)
    }
}

#[derive(Debug, Clone)]
pub struct TransportResult {
    pub trace: RunTrace,
    pub series: MetricSeries,
    pub completed: bool,
    /// Time at which the last tracked body reached the final waypoint.
    pub transport_time: f64,
    /// Distance of each tracked body from its final waypoint at the end.
    pub final_errors: Vec<f64>,
    pub composite: Option<CompositeBody>,
    /// Largest change of the module center distance over the run (docked).
    pub inter_module_drift: Option<f64>,
    /// Largest docking-wheel correction made by rotate-mode pinning, rad/s.
    pub max_pin_residual: f64,
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn transport_world(
    geometries: &[RobotGeometry; 2],
    setup: &TransportSetup,
    sim: &SimSettings,
    seed: u64,
) -> Result<(WorldState, CompositeBody)> {
    setup.validate()?;
    sim.validate()?;
    let frame = setup.start_frame();
    let poses = docked_pair_poses(&geometries[0], &geometries[1], &frame);
    let body = compose(
        (&geometries[0], &poses[0]),
        (&geometries[1], &poses[1]),
        ContactTolerance {
            lateral: 1e-6,
            angular: 1e-6,
        },
    )?;
    let robots = vec![
        RobotState::new(geometries[0].clone(), poses[0]),
        RobotState::new(geometries[1].clone(), poses[1]),
    ];
    let mut world = WorldState::new(robots, sim.dt, sim.noise, seed)?;
    world.object = Some(CarriedObject {
        coupling: setup.coupling.clone(),
        state: ObjectState::grasped(&setup.coupling, &frame, &poses),
    });
    Ok((world, body))
}

fn transport_row(world: &WorldState, errors: [f64; 2], phase: &'static str) -> TraceRow {
    TraceRow {
        t: world.time,
        robots: [
            Some(sample(&world.robots[0], errors[0])),
            Some(sample(&world.robots[1], errors[1])),
        ],
        object_accel: world.object_acceleration(),
        phase,
    }
}

/// The docked pair carries the object along the path as one rigid body.
pub fn run_docked(
    geometries: &[RobotGeometry; 2],
    setup: &TransportSetup,
    sim: &SimSettings,
    seed: u64,
) -> Result<TransportResult> {
    let (mut world, body) = transport_world(geometries, setup, sim, seed)?;
    world.attach_composite(body.clone());
    let frame = setup.start_frame();
    let mut follower = PathFollower::new(setup.path.clone(), setup.gains.clone(), frame.theta)?;
    let d0 = distance(world.robots[0].pose.position(), world.robots[1].pose.position());
    let mut drift = 0.0f64;
    let mut pin = 0.0f64;
    let mut trace = RunTrace::default();
    let mut series = MetricSeries {
        dt: sim.dt,
        ..MetricSeries::default()
    };
    let composite_pose = |w: &WorldState| w.composite.as_ref().expect("attached").pose;

    let mut err = follower.heading_error(&composite_pose(&world));
    trace.push(transport_row(&world, [err, err], "transport"));

    while world.time < sim.max_time {
        let pose = composite_pose(&world);
        let cmd = follower.command(&pose, sim.dt);
        if follower.is_done() {
            break;
        }
        let local = world_to_body(&cmd, &pose)?;
        let mut wheels = composite_twist_to_wheels(
            &Twist::body(local.vx, local.vy, 0.0),
            &body,
            CompositeMode::Translate,
        )?
        .wheels;
        if local.omega != 0.0 {
            let rot = composite_twist_to_wheels(
                &Twist::body(0.0, 0.0, local.omega),
                &body,
                CompositeMode::Rotate,
            )?;
            pin = pin.max(rot.pin_residual);
            for (w, r) in wheels.iter_mut().zip(rot.wheels) {
                for k in 0..3 {
                    w.0[k] += r.0[k];
                }
            }
        }
        world.step(&wheels)?;
        let d = distance(world.robots[0].pose.position(), world.robots[1].pose.position());
        drift = drift.max((d - d0).abs());
        err = follower.heading_error(&composite_pose(&world));
        let acc = world.object_acceleration();
        series.ax.push(acc[0]);
        series.ay.push(acc[1]);
        series.heading_error.push(err);
        trace.push(transport_row(&world, [err, err], "transport"));
    }
    let completed = follower.is_done();
    let goal = setup.path.final_waypoint();
    series.transport_time = world.time;
    Ok(TransportResult {
        trace,
        series,
        completed,
        transport_time: world.time,
        final_errors: vec![distance(composite_pose(&world).position(), goal)],
        composite: Some(body),
        inter_module_drift: Some(drift),
        max_pin_residual: pin,
    })
}

/// Two separate modules carry the object, each tracking its own copy of the
/// path (offset by its start position) with no communication.
pub fn run_cooperating(
    geometries: &[RobotGeometry; 2],
    setup: &TransportSetup,
    sim: &SimSettings,
    seed: u64,
) -> Result<TransportResult> {
    let (mut world, _) = transport_world(geometries, setup, sim, seed)?;
    let w0 = setup.path.waypoints[0];
    let mut followers = [0, 1]
        .map(|i| {
            let p = world.robots[i].pose;
            PathFollower::new(
                setup.path.translated([p.x - w0[0], p.y - w0[1]]),
                setup.gains.clone(),
                p.theta,
            )
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut done_at = [None::<f64>; 2];
    let mut trace = RunTrace::default();
    let mut series = MetricSeries {
        dt: sim.dt,
        ..MetricSeries::default()
    };
    let errors = |w: &WorldState, f: &[PathFollower]| {
        [
            f[0].heading_error(&w.robots[0].pose),
            f[1].heading_error(&w.robots[1].pose),
        ]
    };
    trace.push(transport_row(&world, errors(&world, &followers), "transport"));

    while world.time < sim.max_time {
        let mut wheels = [WheelSpeeds::zero(); 2];
        for i in 0..2 {
            let pose = world.robots[i].pose;
            let cmd = followers[i].command(&pose, sim.dt);
            if followers[i].is_done() {
                done_at[i].get_or_insert(world.time);
                continue;
            }
            wheels[i] = inverse_kinematics(&world_to_body(&cmd, &pose)?, &world.robots[i].geometry)?;
        }
        if done_at.iter().all(Option::is_some) {
            break;
        }
        world.step(&wheels)?;
        let e = errors(&world, &followers);
        let acc = world.object_acceleration();
        series.ax.push(acc[0]);
        series.ay.push(acc[1]);
        for (i, ei) in e.iter().enumerate() {
            if done_at[i].is_none() {
                series.heading_error.push(*ei);
            }
        }
        trace.push(transport_row(&world, e, "transport"));
    }
    let completed = done_at.iter().all(Option::is_some);
    series.transport_time = world.time;
    let final_errors = (0..2)
        .map(|i| distance(world.robots[i].pose.position(), followers[i].path.final_waypoint()))
        .collect();
    Ok(TransportResult {
        trace,
        series,
        completed,
        transport_time: world.time,
        final_errors,
        composite: None,
        inter_module_drift: None,
        max_pin_residual: 0.0,
    })
}

/// One module tracks the path alone, without payload.
pub fn track_single(
    geometry: &RobotGeometry,
    setup: &TransportSetup,
    sim: &SimSettings,
    seed: u64,
) -> Result<TransportResult> {
    setup.validate()?;
    sim.validate()?;
    let start = setup.start_frame();
    let mut world = WorldState::new(
        vec![RobotState::new(geometry.clone(), start)],
        sim.dt,
        sim.noise,
        seed,
    )?;
    let mut follower = PathFollower::new(setup.path.clone(), setup.gains.clone(), start.theta)?;
    let mut trace = RunTrace::default();
    let mut series = MetricSeries {
        dt: sim.dt,
        ..MetricSeries::default()
    };
    let row = |w: &WorldState, e: f64| TraceRow {
        t: w.time,
        robots: [Some(sample(&w.robots[0], e)), None],
        object_accel: [0.0; 2],
        phase: "transport",
    };
    trace.push(row(&world, follower.heading_error(&start)));
    while world.time < sim.max_time {
        let pose = world.robots[0].pose;
        let cmd = follower.command(&pose, sim.dt);
        if follower.is_done() {
            break;
        }
        let wheels = inverse_kinematics(&world_to_body(&cmd, &pose)?, geometry)?;
        world.step(&[wheels])?;
        let e = follower.heading_error(&world.robots[0].pose);
        series.ax.push(0.0);
        series.ay.push(0.0);
        series.heading_error.push(e);
        trace.push(row(&world, e));
    }
    series.transport_time = world.time;
    Ok(TransportResult {
        completed: follower.is_done(),
        transport_time: world.time,
        final_errors: vec![distance(world.robots[0].pose.position(), setup.path.final_waypoint())],
        trace,
        series,
        composite: None,
        inter_module_drift: None,
        max_pin_residual: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geoms() -> [RobotGeometry; 2] {
        [RobotGeometry::default(), RobotGeometry::default()]
    }

    #[test]
    fn approacher_sits_on_the_deviation_line() {
        let g = RobotGeometry::default();
        let setup = ApproachSetup {
            deviation_deg: 40.0,
            ..ApproachSetup::default()
        };
        let tag = TagPose::on_hub(&setup.female_pose, &g, 0);
        for seed in 0..20 {
            let p = setup.approacher_pose(&g, seed);
            let angle = tag.viewing_angle(p.position());
            assert!((angle - 40f64.to_radians()).abs() < 1e-9);
            let d = distance(p.position(), tag.position);
            assert!((d - 0.8).abs() <= 0.05 + 1e-12);
        }
    }

    #[test]
    fn bright_docking_succeeds() {
        let r = run_docking(
            &geoms(),
            &ApproachSetup::default(),
            &DockingParams::default(),
            &PerceptionConfig::default(),
            Lighting::Bright,
            &SimSettings::default(),
            3,
        )
        .unwrap();
        assert!(r.docked(), "{:?} {:?}", r.state.phase, r.state.failure);
        assert_eq!(
            r.state.phase_sequence(),
            vec![Phase::Search, Phase::Align, Phase::Lock, Phase::Docked]
        );
        assert!(r.composite.is_some());
    }

    #[test]
    fn dark_docking_times_out() {
        let r = run_docking(
            &geoms(),
            &ApproachSetup::default(),
            &DockingParams::default(),
            &PerceptionConfig::default(),
            Lighting::Dark,
            &SimSettings::default(),
            3,
        )
        .unwrap();
        assert_eq!(r.state.phase, Phase::Failed);
        assert_eq!(r.state.failure, Some(FailureReason::Timeout));
    }

    #[test]
    fn noiseless_single_track_reaches_goal() {
        let sim = SimSettings {
            noise: NoiseConfig::none(),
            ..SimSettings::default()
        };
        let r = track_single(&RobotGeometry::default(), &TransportSetup::default(), &sim, 0).unwrap();
        assert!(r.completed);
        assert!(r.final_errors[0] < 0.02);
    }

    #[test]
    fn docked_distance_is_constant() {
        let r = run_docked(&geoms(), &TransportSetup::default(), &SimSettings::default(), 5).unwrap();
        assert!(r.completed);
        assert!(r.inter_module_drift.unwrap() < 1e-9);
    }

    #[test]
    fn noiseless_modes_end_at_goal() {
        let sim = SimSettings {
            noise: NoiseConfig::none(),
            ..SimSettings::default()
        };
        let d = run_docked(&geoms(), &TransportSetup::default(), &sim, 0).unwrap();
        let c = run_cooperating(&geoms(), &TransportSetup::default(), &sim, 0).unwrap();
        assert!(d.completed && c.completed);
        assert!(d.final_errors.iter().chain(&c.final_errors).all(|e| *e < 0.02));
    }
}
