//! Carried object held by the modules' arms through spring-damper grasps.
//!
//! The object is a translating point mass; each grasp is a linear spring and
//! damper between an arm anchor fixed in a module's body frame and a grasp
//! point fixed on the object.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{point_velocity, Pose, Twist};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectCoupling {
    /// Grasp points in the object frame, meters.
    pub grasp_points: [[f64; 2]; 2],
    /// N/m
    pub stiffness: f64,
    /// N·s/m
    pub damping: f64,
    /// kg
    pub object_mass: f64,
    /// Initial object position in the composite frame, meters.
    pub carry_offset: [f64; 2],
}

impl Default for ObjectCoupling {
    fn default() -> Self {
        Self {
            grasp_points: [[-0.15, 0.0], [0.15, 0.0]],
            stiffness: 800.0,
            damping: 40.0,
            object_mass: 0.5,
            carry_offset: [0.0, 0.35],
        }
    }
}

impl ObjectCoupling {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("stiffness", self.stiffness),
            ("damping", self.damping),
            ("object_mass", self.object_mass),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if self
            .grasp_points
            .iter()
            .chain(std::iter::once(&self.carry_offset))
            .flatten()
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidParameter("non-finite grasp geometry".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectState {
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    pub acceleration: [f64; 2],
    /// Arm anchors in each module's body frame.
    pub anchors: [[f64; 2]; 2],
    /// Grasp points relative to the object position (world-aligned; the
    /// object does not rotate).
    pub grasp_offsets: [[f64; 2]; 2],
}

impl ObjectState {
    /// Object at rest at `carry_offset` in `frame`, springs unstretched for
    /// modules at `modules`.
    pub fn grasped(coupling: &ObjectCoupling, frame: &Pose, modules: &[Pose; 2]) -> Self {
        let position = frame.transform_point(coupling.carry_offset);
        let (s, c) = frame.theta.sin_cos();
        let grasp_offsets = coupling
            .grasp_points
            .map(|g| [c * g[0] - s * g[1], s * g[0] + c * g[1]]);
        let anchors = [0, 1].map(|i| {
            let w = [
                position[0] + grasp_offsets[i][0],
                position[1] + grasp_offsets[i][1],
            ];
            modules[i].inverse_transform_point(w)
        });
        Self {
            position,
            velocity: [0.0; 2],
            acceleration: [0.0; 2],
            anchors,
            grasp_offsets,
        }
    }

    /// Net coupling acceleration for module poses and world twists.
    pub fn coupling_acceleration(
        &self,
        coupling: &ObjectCoupling,
        modules: &[Pose; 2],
        twists: &[Twist; 2],
    ) -> [f64; 2] {
        let mut f = [0.0; 2];
        for i in 0..2 {
            let anchor = modules[i].transform_point(self.anchors[i]);
            let anchor_vel = point_velocity(&twists[i], [anchor[0] - modules[i].x, anchor[1] - modules[i].y]);
            for k in 0..2 {
                let grasp = self.position[k] + self.grasp_offsets[i][k];
                f[k] += coupling.stiffness * (anchor[k] - grasp)
                    + coupling.damping * (anchor_vel[k] - self.velocity[k]);
            }
        }
        [f[0] / coupling.object_mass, f[1] / coupling.object_mass]
    }

    /// Semi-implicit Euler: velocity first, then position with the new velocity.
    pub fn advance(
        &mut self,
        coupling: &ObjectCoupling,
        modules: &[Pose; 2],
        twists: &[Twist; 2],
        dt: f64,
    ) {
        let a = self.coupling_acceleration(coupling, modules, twists);
        self.acceleration = a;
        for k in 0..2 {
            self.velocity[k] += a[k] * dt;
            self.position[k] += self.velocity[k] * dt;
        }
    }

    /// Largest spring stretch over both grasps, meters.
    pub fn max_stretch(&self, modules: &[Pose; 2]) -> f64 {
        (0..2)
            .map(|i| {
                let anchor = modules[i].transform_point(self.anchors[i]);
                (anchor[0] - self.position[0] - self.grasp_offsets[i][0])
                    .hypot(anchor[1] - self.position[1] - self.grasp_offsets[i][1])
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn setup() -> (ObjectCoupling, [Pose; 2], ObjectState) {
        let c = ObjectCoupling::default();
        let modules = [Pose::new(-0.15, 0.0, -0.5), Pose::new(0.15, 0.0, 2.6)];
        let s = ObjectState::grasped(&c, &Pose::default(), &modules);
        (c, modules, s)
    }

    #[test]
    fn grasp_starts_relaxed() {
        let (c, m, s) = setup();
        let still = [Twist::world(0.0, 0.0, 0.0); 2];
        let a = s.coupling_acceleration(&c, &m, &still);
        assert_abs_diff_eq!(a[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.position[1], 0.35, epsilon = 1e-15);
    }

    #[test]
    fn displaced_object_is_pulled_back() {
        let (c, m, mut s) = setup();
        s.position[0] += 0.01;
        let a = s.coupling_acceleration(&c, &m, &[Twist::world(0.0, 0.0, 0.0); 2]);
        assert_abs_diff_eq!(a[0], -2.0 * 800.0 * 0.01 / 0.5, epsilon = 1e-9);
    }

    #[test]
    fn damped_oscillation_amplitude_never_grows() {
        for damping in [40.0, 2.0] {
            let (mut c, m, mut s) = setup();
            c.damping = damping;
            let rest = s.position;
            s.position[0] += 0.02;
            s.position[1] -= 0.01;
            let still = [Twist::world(0.0, 0.0, 0.0); 2];
            let mut prev = f64::INFINITY;
            for _ in 0..100 {
                let mut window = 0.0f64;
                for _ in 0..20 {
                    s.advance(&c, &m, &still, 0.005);
                    window = window.max((s.position[0] - rest[0]).hypot(s.position[1] - rest[1]));
                }
                assert!(window <= prev + 1e-15, "amplitude grew: {window} > {prev}");
                prev = window;
            }
            assert!(prev < 1e-3);
        }
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        let mut c = ObjectCoupling::default();
        c.damping = 0.0;
        assert!(c.validate().is_err());
    }
}
