//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs without the test harness so the lines always print.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use omnidock::batch::{compare, run_batch};
use omnidock::composite::{compose, docked_pair_poses, ContactTolerance};
use omnidock::docking::{lock_wheel_speeds, DockingParams, LockLaw};
use omnidock::kinematics::{forward_kinematics, inverse_kinematics, Pose, RobotGeometry, Twist};
use omnidock::metrics::{mean_jerk, rmsa, sigma_omega, within_relative};
use omnidock::perception::{Lighting, PerceptionConfig};
use omnidock::scenario::{Mode, Scenario};
use omnidock::sim::{
    run_docked, run_docking, track_single, ApproachSetup, NoiseConfig, SimSettings, TransportSetup,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(name: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    if let Some(limit) = limit {
        if took > limit {
            o.pass = false;
            o.detail += &format!("; runtime {took:.2?} exceeds {limit:.0?}");
        }
    }
    println!(
        "{} {name}: {} [{took:.2?}]",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail
    );
    o.pass
}

fn kinematics_identities() -> Outcome {
    let g = RobotGeometry::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_round_trip = 0.0f64;
    let mut worst_linearity = 0.0f64;
    for _ in 0..1000 {
        let t = Twist::body(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-3.0..3.0),
        );
        let back = forward_kinematics(&inverse_kinematics(&t, &g).unwrap(), &g).unwrap();
        worst_round_trip = worst_round_trip
            .max((back.vx - t.vx).abs())
            .max((back.vy - t.vy).abs())
            .max((back.omega - t.omega).abs());

        let u = Twist::body(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-3.0..3.0),
        );
        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let combo = Twist::body(a * t.vx + b * u.vx, a * t.vy + b * u.vy, a * t.omega + b * u.omega);
        let lhs = inverse_kinematics(&combo, &g).unwrap();
        let wt = inverse_kinematics(&t, &g).unwrap();
        let wu = inverse_kinematics(&u, &g).unwrap();
        for k in 0..3 {
            worst_linearity = worst_linearity.max((lhs.0[k] - (a * wt.0[k] + b * wu.0[k])).abs());
        }
    }
    let mut rotation_equal = true;
    for w in [-2.0, -0.3, 0.7, 5.0] {
        let s = inverse_kinematics(&Twist::body(0.0, 0.0, w), &g).unwrap().0;
        rotation_equal &= s[0] == s[1] && s[1] == s[2];
    }
    Outcome {
        pass: worst_round_trip < 1e-9 && worst_linearity <= 1e-12 && rotation_equal,
        detail: format!(
            "round-trip max err {worst_round_trip:.2e} (< 1e-9), linearity max err {worst_linearity:.2e} (<= 1e-12), pure rotation equal wheels: {rotation_equal}"
        ),
    }
}

fn lock_law() -> Outcome {
    let g = RobotGeometry::default();
    let (a, h) = (0.1, 2.0);
    let printed = lock_wheel_speeds(a, h, &g, LockLaw::PrintedCosine).unwrap().0;
    // hand evaluation: (cos(150°)·0.1 + 0.12·2)/0.05 and (cos(270°)·0.1 + 0.12·2)/0.05
    let expected = [4.8 - 3f64.sqrt(), 4.8, 2.0];
    let e_printed = (0..3)
        .map(|k| (printed[k] - expected[k]).abs())
        .fold(0.0, f64::max);
    let rows = lock_wheel_speeds(a, h, &g, LockLaw::KinematicRows).unwrap().0;
    let m = g.wheel_matrix();
    let mut e_rows = 0.0f64;
    for k in 0..2 {
        // wheel-matrix row k applied to (A, 0, h)
        let v = m[(k, 0)] * a + m[(k, 1)] * 0.0 + m[(k, 2)] * h;
        e_rows = e_rows.max((rows[k] - v).abs());
    }
    Outcome {
        pass: e_printed < 1e-9 && e_rows <= 1e-12 && rows[2] == h,
        detail: format!(
            "printed-cosine law {:.6?} vs hand values {:.6?}: max err {e_printed:.2e} (< 1e-9); kinematic-rows law max row err {e_rows:.2e} (<= 1e-12)",
            printed, expected
        ),
    }
}

/// Uniform disk of `mass` and `radius` at `center`, sampled on a polar
/// midpoint grid; returns (mass, x, y) points.
fn disk_points(mass: f64, radius: f64, center: [f64; 2], rings: usize, spokes: usize) -> Vec<(f64, f64, f64)> {
    let mut pts = Vec::with_capacity(rings * spokes);
    let total: f64 = (0..rings).map(|j| j as f64 + 0.5).sum::<f64>() * spokes as f64;
    for j in 0..rings {
        let r = (j as f64 + 0.5) / rings as f64 * radius;
        let w = mass * (j as f64 + 0.5) / total;
        for k in 0..spokes {
            let a = 2.0 * PI * (k as f64 + 0.5) / spokes as f64;
            pts.push((w, center[0] + r * a.cos(), center[1] + r * a.sin()));
        }
    }
    pts
}

fn composite_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_com, mut worst_inertia) = (0.0f64, 0.0f64);
    let mut parallel_axis_ok = true;
    let samples = 100 * 100;
    for _ in 0..50 {
        let mut geoms = [RobotGeometry::default(), RobotGeometry::default()];
        let mut radii = [0.0; 2];
        for (g, rad) in geoms.iter_mut().zip(radii.iter_mut()) {
            g.mass = rng.random_range(1.0..10.0);
            *rad = rng.random_range(0.1..0.3);
            g.body_inertia = 0.5 * g.mass * *rad * *rad;
            g.hub_offset = rng.random_range(0.1..0.25);
        }
        let frame = Pose::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-PI..PI),
        );
        let poses = docked_pair_poses(&geoms[0], &geoms[1], &frame);
        let tol = ContactTolerance {
            lateral: 1e-6,
            angular: 1e-6,
        };
        let body = compose((&geoms[0], &poses[0]), (&geoms[1], &poses[1]), tol).unwrap();

        let mut pts = disk_points(geoms[0].mass, radii[0], poses[0].position(), 100, 100);
        pts.extend(disk_points(geoms[1].mass, radii[1], poses[1].position(), 100, 100));
        let m: f64 = pts.iter().map(|p| p.0).sum();
        let cx = pts.iter().map(|p| p.0 * p.1).sum::<f64>() / m;
        let cy = pts.iter().map(|p| p.0 * p.2).sum::<f64>() / m;
        let inertia: f64 = pts
            .iter()
            .map(|p| p.0 * ((p.1 - cx).powi(2) + (p.2 - cy).powi(2)))
            .sum();
        let com = body.center_of_mass();
        worst_com = worst_com.max((com[0] - cx).hypot(com[1] - cy));
        worst_inertia = worst_inertia.max((body.total_inertia - inertia).abs() / inertia);
        parallel_axis_ok &= body.total_inertia >= geoms[0].body_inertia + geoms[1].body_inertia;
    }
    Outcome {
        pass: worst_com < 1e-3 && worst_inertia < 0.01 && parallel_axis_ok,
        detail: format!(
            "50 configs, {samples} samples/module: max CoM err {:.3e} m (< 1e-3), max inertia rel err {:.3e} (< 1e-2), I_total >= I1 + I2: {parallel_axis_ok}",
            worst_com, worst_inertia
        ),
    }
}

fn success_rate(light: Lighting, deviation: f64, seeds: u64) -> f64 {
    let geoms = [RobotGeometry::default(), RobotGeometry::default()];
    let setup = ApproachSetup {
        deviation_deg: deviation,
        ..ApproachSetup::default()
    };
    let params = DockingParams::default();
    let perception = PerceptionConfig::default();
    let sim = SimSettings::default();
    let ok = (0..seeds)
        .into_par_iter()
        .filter(|&s| {
            run_docking(&geoms, &setup, &params, &perception, light, &sim, s)
                .map(|r| r.docked())
                .unwrap_or(false)
        })
        .count();
    ok as f64 / seeds as f64
}

fn docking_envelope() -> Outcome {
    let n = 100;
    let deviations = [0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0];
    let mut pass = true;
    let mut parts = Vec::new();
    for light in [Lighting::Bright, Lighting::Moderate, Lighting::Low] {
        let rates: Vec<f64> = deviations.iter().map(|&d| success_rate(light, d, n)).collect();
        let min = rates.iter().cloned().fold(1.0, f64::min);
        let at70 = success_rate(light, 70.0, n);
        let at60 = rates[rates.len() - 1];
        pass &= min >= 0.90 && at70 < at60;
        parts.push(format!(
            "{} min over 0-60° {min:.2} (>= 0.90), 60° {at60:.2} > 70° {at70:.2}",
            light.as_str()
        ));
    }
    let dark_max = [0.0, 30.0, 60.0]
        .iter()
        .map(|&d| success_rate(Lighting::Dark, d, n))
        .fold(0.0, f64::max);
    pass &= dark_max == 0.0;
    parts.push(format!("dark max {dark_max:.2} (== 0)"));
    Outcome {
        pass,
        detail: format!("{n} seeds/cell; {}", parts.join("; ")),
    }
}

fn transport_scenario(noise: NoiseConfig) -> Scenario {
    let mut s = Scenario::from_json_str(
        r#"{"mode": "docked_transport", "robots": [
            {"wheel_radius": 0.05, "center_offset": 0.12, "mass": 4.0, "body_inertia": 0.06},
            {"wheel_radius": 0.05, "center_offset": 0.12, "mass": 4.0, "body_inertia": 0.06}]}"#,
    )
    .unwrap();
    s.sim.noise = noise;
    s
}

fn comparative_stability() -> Outcome {
    let seeds: Vec<u64> = (0..10).collect();
    let noisy = compare(&transport_scenario(NoiseConfig::default()), &seeds).unwrap();
    let (d, c) = (&noisy.table[0], &noisy.table[1]);
    let wins = noisy.docked_wins;
    let quiet = compare(&transport_scenario(NoiseConfig::none()), &[0]).unwrap();
    let (qd, qc) = (&quiet.table[0], &quiet.table[1]);
    let close = within_relative(qd.rmsa, qc.rmsa, 0.05)
        && within_relative(qd.mean_jerk, qc.mean_jerk, 0.05)
        && within_relative(qd.sigma_omega, qc.sigma_omega, 0.05)
        && within_relative(qd.transport_time, qc.transport_time, 0.05);
    let pass = wins.rmsa >= 0.9
        && wins.sigma_omega >= 0.9
        && d.transport_time < c.transport_time
        && close;
    Outcome {
        pass,
        detail: format!(
            "10 pairs: docked wins RMSA {:.0}/10 and sigma_w {:.0}/10 (>= 9); RMSA {:.4} vs {:.4} m/s^2, sigma_w {:.4} vs {:.4} deg, mean time {:.3} vs {:.3} s (docked < cooperating); zero noise within 5% on all metrics: {close} (RMSA {:.5} vs {:.5}, jerk {:.5} vs {:.5}, time {:.3} vs {:.3})",
            wins.rmsa * 10.0,
            wins.sigma_omega * 10.0,
            d.rmsa,
            c.rmsa,
            d.sigma_omega,
            c.sigma_omega,
            d.transport_time,
            c.transport_time,
            qd.rmsa,
            qc.rmsa,
            qd.mean_jerk,
            qc.mean_jerk,
            qd.transport_time,
            qc.transport_time
        ),
    }
}

fn metric_units() -> Outcome {
    let r = rmsa(&[0.3; 25], &[0.4; 25]).unwrap();
    let j = mean_jerk(&[0.8; 25], &[-0.1; 25], 0.005).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let series: Vec<f64> = (0..500).map(|_| rng.random_range(-0.05..0.05)).collect();
    let shifted: Vec<f64> = series.iter().map(|w| w + 0.37).collect();
    let (s0, s1) = (sigma_omega(&series).unwrap(), sigma_omega(&shifted).unwrap());
    Outcome {
        pass: r == 0.5 && j == 0.0 && (s0 - s1).abs() < 1e-9,
        detail: format!(
            "rmsa(0.3, 0.4) = {r} (== 0.5), jerk of constant = {j} (== 0), sigma_w shift change {:.2e} (< 1e-9)",
            (s0 - s1).abs()
        ),
    }
}

fn determinism() -> Outcome {
    let seeds: Vec<u64> = (0..6).collect();
    let mut dock = transport_scenario(NoiseConfig::default()).with_mode(Mode::DockOnly);
    dock.lighting = Lighting::Low;
    let transport = transport_scenario(NoiseConfig::default());
    let mut all_equal = true;
    let mut checked = 0;
    for scenario in [&dock, &transport] {
        let serial: Vec<String> = seeds
            .iter()
            .map(|&s| scenario.run(s).unwrap().summary.trace_sha256)
            .collect();
        let again: Vec<String> = seeds
            .iter()
            .map(|&s| scenario.run(s).unwrap().summary.trace_sha256)
            .collect();
        let value = serde_json::to_value(scenario).unwrap();
        let parallel = run_batch(&value, &seeds, &[]).unwrap();
        let batch_hashes: Vec<String> = parallel
            .trials
            .iter()
            .map(|t| t.trace_sha256.clone().unwrap_or_default())
            .collect();
        all_equal &= serial == again && serial == batch_hashes;
        checked += serial.len();
    }
    let distinct = {
        let a = transport.run(0).unwrap().summary.trace_sha256;
        let b = transport.run(1).unwrap().summary.trace_sha256;
        a != b
    };
    Outcome {
        pass: all_equal && distinct,
        detail: format!(
            "{checked} (scenario, seed) traces: serial, repeated and parallel-batch SHA-256 identical: {all_equal}; different seeds differ: {distinct}"
        ),
    }
}

fn docked_rigidity() -> Outcome {
    let geoms = [RobotGeometry::default(), RobotGeometry::default()];
    let setup = TransportSetup::default();
    let noisy = run_docked(&geoms, &setup, &SimSettings::default(), 4).unwrap();
    let drift = noisy.inter_module_drift.unwrap();
    let quiet = SimSettings {
        noise: NoiseConfig::none(),
        ..SimSettings::default()
    };
    let single = track_single(&geoms[0], &setup, &quiet, 0).unwrap();
    let docked = run_docked(&geoms, &setup, &quiet, 0).unwrap();
    let e_single = single.final_errors[0];
    let e_docked = docked.final_errors[0];
    Outcome {
        pass: noisy.completed && drift < 1e-9 && single.completed && e_single < 0.02 && e_docked < 0.02,
        detail: format!(
            "inter-module distance drift {drift:.2e} m (< 1e-9) over {} steps; noiseless L-path final error single {:.4} m, docked {:.4} m (< 0.02)",
            noisy.trace.len() - 1,
            e_single,
            e_docked
        ),
    }
}

fn main() {
    let mut ok = true;
    ok &= check("kinematics identities", Some(Duration::from_secs(1)), kinematics_identities);
    ok &= check("lock-law wheel speeds", None, lock_law);
    ok &= check("composite-body oracle", Some(Duration::from_secs(10)), composite_oracle);
    ok &= check("docking envelope", Some(Duration::from_secs(60)), docking_envelope);
    ok &= check("comparative stability", Some(Duration::from_secs(60)), comparative_stability);
    ok &= check("metric unit checks", None, metric_units);
    ok &= check("determinism", None, determinism);
    ok &= check("docked rigidity and heading-hold tracking", None, docked_rigidity);
    if !ok {
        std::process::exit(1);
    }
}
