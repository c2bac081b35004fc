//! The rigid two-module body formed after docking.
//!
//! Mass properties pool the modules (weighted center of mass, parallel-axis
//! inertia). The composite frame has its origin at the pooled center of mass
//! and its x-axis along the docking axis, pointing from module A to module B.
//! Motion commands are split into the two per-module body twists of a rigid
//! body and then mapped through each module's wheel kinematics.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::docking::HubAlignment;
use crate::error::{Error, Result};
use crate::kinematics::{
    inverse_kinematics, wrap_angle, Pose, RobotGeometry, Twist, WheelSpeeds,
};

/// Point-like summary of a module for mass pooling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuleMass {
    pub mass: f64,
    /// Inertia about the module's own center of mass.
    pub inertia: f64,
    pub center: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassProperties {
    pub total_mass: f64,
    pub center_of_mass: [f64; 2],
    pub inertia: f64,
}

/// Pooled mass, center of mass, and parallel-axis inertia about that center.
pub fn mass_properties(modules: &[ModuleMass]) -> Result<MassProperties> {
    if modules.is_empty() {
        return Err(Error::Composition("no modules".into()));
    }
    if modules.iter().any(|m| !(m.mass > 0.0) || m.inertia < 0.0) {
        return Err(Error::Composition("masses must be > 0, inertias >= 0".into()));
    }
    let total_mass: f64 = modules.iter().map(|m| m.mass).sum();
    let mut com = [0.0; 2];
    for m in modules {
        com[0] += m.mass * m.center[0];
        com[1] += m.mass * m.center[1];
    }
    com = [com[0] / total_mass, com[1] / total_mass];
    let inertia = modules
        .iter()
        .map(|m| {
            let d2 = (m.center[0] - com[0]).powi(2) + (m.center[1] - com[1]).powi(2);
            m.inertia + m.mass * d2
        })
        .sum();
    Ok(MassProperties {
        total_mass,
        center_of_mass: com,
        inertia,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeBody {
    pub total_mass: f64,
    pub total_inertia: f64,
    /// World pose of the composite frame at the docking instant.
    pub frame_at_dock: Pose,
    /// Fixed pose of each module's body frame in the composite frame.
    pub module_transforms: [Pose; 2],
    /// World unit vector from module A's center toward module B's, at docking.
    pub docking_axis: [f64; 2],
    pub geometries: [RobotGeometry; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactTolerance {
    pub lateral: f64,
    pub angular: f64,
}

impl CompositeBody {
    /// Center of mass in world coordinates at the docking instant.
    pub fn center_of_mass(&self) -> [f64; 2] {
        self.frame_at_dock.position()
    }

    /// World poses of both modules for a given composite pose.
    pub fn module_poses(&self, composite: &Pose) -> [Pose; 2] {
        self.module_transforms.map(|t| composite.compose(&t))
    }

    pub fn inter_module_distance(&self) -> f64 {
        let [a, b] = self.module_transforms;
        (a.x - b.x).hypot(a.y - b.y)
    }
}

/// Builds the composite from two modules in hub contact. The modules are
/// interchangeable for mass properties; `a` defines the docking-axis origin.
pub fn compose(
    a: (&RobotGeometry, &Pose),
    b: (&RobotGeometry, &Pose),
    tol: ContactTolerance,
) -> Result<CompositeBody> {
    let (ga, pa) = a;
    let (gb, pb) = b;
    ga.validate()?;
    gb.validate()?;
    let hub = HubAlignment::between(pa, ga, pb, gb);
    if hub.axial_gap.abs() > tol.lateral
        || hub.lateral.abs() > tol.lateral
        || hub.angular.abs() > tol.angular
    {
        return Err(Error::Composition(format!(
            "modules are not in docked contact (gap {:.4} m, lateral {:.4} m, angle {:.4} rad)",
            hub.axial_gap, hub.lateral, hub.angular
        )));
    }
    let props = mass_properties(&[
        ModuleMass {
            mass: ga.mass,
            inertia: ga.body_inertia,
            center: pa.position(),
        },
        ModuleMass {
            mass: gb.mass,
            inertia: gb.body_inertia,
            center: pb.position(),
        },
    ])?;
    let dx = pb.x - pa.x;
    let dy = pb.y - pa.y;
    let len = dx.hypot(dy);
    if len == 0.0 {
        return Err(Error::Composition("coincident module centers".into()));
    }
    let axis = [dx / len, dy / len];
    let frame = Pose::new(
        props.center_of_mass[0],
        props.center_of_mass[1],
        axis[1].atan2(axis[0]),
    );
    Ok(CompositeBody {
        total_mass: props.total_mass,
        total_inertia: props.inertia,
        frame_at_dock: frame,
        module_transforms: [frame.relative(pa), frame.relative(pb)],
        docking_axis: axis,
        geometries: [ga.clone(), gb.clone()],
    })
}

/// World poses of two modules mated hub to hub, for a composite frame placed
/// at `frame` (center of mass, x along the docking axis).
pub fn docked_pair_poses(ga: &RobotGeometry, gb: &RobotGeometry, frame: &Pose) -> [Pose; 2] {
    let sep = ga.hub_offset + gb.hub_offset;
    let xa = -gb.mass * sep / (ga.mass + gb.mass);
    let xb = xa + sep;
    // each hub axis points at the other module
    let local_a = Pose::new(xa, 0.0, -ga.dock_axis_angle());
    let local_b = Pose::new(xb, 0.0, std::f64::consts::PI - gb.dock_axis_angle());
    [frame.compose(&local_a), frame.compose(&local_b)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompositeMode {
    Translate,
    Rotate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeWheelCommand {
    pub wheels: [WheelSpeeds; 2],
    /// Rigid-body twist of each module in its own body frame.
    pub module_twists: [Twist; 2],
    /// Largest wheel-speed change made by pinning the docking wheels, rad/s.
    pub pin_residual: f64,
}

/// Body twists of both modules for a composite-frame twist.
pub fn module_twists(twist: &Twist, body: &CompositeBody) -> Result<[Twist; 2]> {
    twist.expect_frame(crate::kinematics::Frame::Body)?;
    if !twist.is_finite() {
        return Err(Error::InvalidInput("non-finite composite twist".into()));
    }
    Ok(body.module_transforms.map(|t| {
        // velocity of the module origin in the composite frame
        let vx = twist.vx - twist.omega * t.y;
        let vy = twist.vy + twist.omega * t.x;
        let (s, c) = t.theta.sin_cos();
        Twist::body(c * vx + s * vy, -s * vx + c * vy, twist.omega)
    }))
}

/// Per-module wheel speeds for a pure translation or a pure rotation of the
/// composite. In rotate mode the two docking wheels, which are screwed
/// together face to face, are held to one shared physical rotation; because
/// their axles point at each other, that means equal magnitude and opposite
/// sign in the modules' own wheel conventions.
pub fn composite_twist_to_wheels(
    twist: &Twist,
    body: &CompositeBody,
    mode: CompositeMode,
) -> Result<CompositeWheelCommand> {
    match mode {
        CompositeMode::Translate if twist.omega != 0.0 => {
            return Err(Error::Mode(format!(
                "translate mode requires omega = 0, got {}",
                twist.omega
            )))
        }
        CompositeMode::Rotate if twist.vx != 0.0 || twist.vy != 0.0 => {
            return Err(Error::Mode(format!(
                "rotate mode requires vx = vy = 0, got ({}, {})",
                twist.vx, twist.vy
            )))
        }
        _ => {}
    }
    let module_twists = module_twists(twist, body)?;
    let mut wheels = [
        inverse_kinematics(&module_twists[0], &body.geometries[0])?,
        inverse_kinematics(&module_twists[1], &body.geometries[1])?,
    ];
    let mut pin_residual = 0.0;
    if mode == CompositeMode::Rotate {
        let ia = body.geometries[0].dock_wheel_index - 1;
        let ib = body.geometries[1].dock_wheel_index - 1;
        let (wa, wb) = (wheels[0].0[ia], wheels[1].0[ib]);
        let shared = 0.5 * (wa - wb);
        pin_residual = 0.5 * (wa + wb).abs();
        wheels[0].0[ia] = shared;
        wheels[1].0[ib] = -shared;
    }
    Ok(CompositeWheelCommand {
        wheels,
        module_twists,
        pin_residual,
    })
}

/// Least-squares composite twist (composite frame) from all six wheel speeds.
pub fn composite_forward_kinematics(
    wheels: &[WheelSpeeds; 2],
    body: &CompositeBody,
) -> Result<Twist> {
    let mut normal = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    for ((t, g), w) in body.module_transforms.iter().zip(&body.geometries).zip(wheels) {
        if !w.is_finite() {
            return Err(Error::InvalidInput("non-finite wheel speeds".into()));
        }
        let (s, c) = t.theta.sin_cos();
        for (alpha, phi) in g.mount_angles.iter().zip(w.0) {
            // drive direction in the module frame, then in the composite frame
            let (dx, dy) = (-alpha.sin(), alpha.cos());
            let ex = c * dx - s * dy;
            let ey = s * dx + c * dy;
            let row = Vector3::new(
                ex / g.wheel_radius,
                ey / g.wheel_radius,
                (ex * -t.y + ey * t.x + g.center_offset) / g.wheel_radius,
            );
            normal += row * row.transpose();
            rhs += row * phi;
        }
    }
    let inv = normal
        .try_inverse()
        .ok_or_else(|| Error::InvalidGeometry("composite wheel matrix is singular".into()))?;
    let v = inv * rhs;
    Ok(Twist::body(v[0], v[1], v[2]))
}

/// Angle from a module's heading to the composite heading, for reporting.
pub fn heading_offset(body: &CompositeBody, module: usize) -> f64 {
    wrap_angle(-body.module_transforms[module].theta)
}
