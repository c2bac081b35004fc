//! Parametric fiducial-tag observation model.
//!
//! No image formation: the camera is an ideal bearing/range sensor whose
//! detections are gated by field of view, range, the tag's viewing angle and
//! a per-lighting detection probability. Accepted detections carry Gaussian
//! noise on the offsets.
//!
//! Camera frame convention: `z` looks out of the lens, `x` points to the
//! camera's right. `bearing` is the tag's yaw relative to a square-on view;
//! it is zero when the tag normal points straight back at the camera and
//! positive when the camera must turn counter-clockwise to face it squarely.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{wrap_angle, Pose, RobotGeometry};

/// Slack on the viewing-angle gate so that a configured limit is inclusive
/// despite rounding in the geometry.
const GATE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lighting {
    Bright,
    Moderate,
    Low,
    Dark,
}

impl Lighting {
    pub const ALL: [Lighting; 4] = [
        Lighting::Bright,
        Lighting::Moderate,
        Lighting::Low,
        Lighting::Dark,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Lighting::Bright => "bright",
            Lighting::Moderate => "moderate",
            Lighting::Low => "low",
            Lighting::Dark => "dark",
        }
    }
}

/// Detection probability and noise for one lighting level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightingLevel {
    pub detection_probability: f64,
    /// Standard deviation of the x/z offset noise, meters.
    pub offset_sigma: f64,
    /// Standard deviation of the bearing noise, radians.
    pub bearing_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightingTable {
    pub bright: LightingLevel,
    pub moderate: LightingLevel,
    pub low: LightingLevel,
    pub dark: LightingLevel,
}

impl Default for LightingTable {
    fn default() -> Self {
        let level = |p: f64, sigma_mm: f64, bearing_deg: f64| LightingLevel {
            detection_probability: p,
            offset_sigma: sigma_mm * 1e-3,
            bearing_sigma: bearing_deg.to_radians(),
        };
        Self {
            bright: level(0.99, 2.0, 0.5),
            moderate: level(0.97, 4.0, 1.0),
            low: level(0.90, 8.0, 2.0),
            dark: level(0.0, 0.0, 0.0),
        }
    }
}

impl LightingTable {
    pub fn level(&self, light: Lighting) -> &LightingLevel {
        match light {
            Lighting::Bright => &self.bright,
            Lighting::Moderate => &self.moderate,
            Lighting::Low => &self.low,
            Lighting::Dark => &self.dark,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for light in Lighting::ALL {
            let l = self.level(light);
            if !(0.0..=1.0).contains(&l.detection_probability)
                || l.offset_sigma < 0.0
                || l.bearing_sigma < 0.0
            {
                return Err(Error::InvalidParameter(format!(
                    "lighting level {} out of range: {l:?}",
                    light.as_str()
                )));
            }
        }
        let p = |l| self.level(l).detection_probability;
        if p(Lighting::Dark) != 0.0 {
            return Err(Error::InvalidParameter(
                "dark detection probability must be 0".into(),
            ));
        }
        if !(p(Lighting::Bright) >= p(Lighting::Moderate)
            && p(Lighting::Moderate) >= p(Lighting::Low)
            && p(Lighting::Low) > 0.0)
        {
            return Err(Error::InvalidParameter(
                "detection probabilities must satisfy bright >= moderate >= low > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CameraPitch {
    Forward,
    Down,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraModel {
    /// Camera pose in the owner's body frame. `None` places it on the hub
    /// face looking along the hub axis.
    #[serde(default)]
    pub mount: Option<Pose>,
    pub horizontal_fov: f64,
    pub max_range: f64,
    pub pitch: CameraPitch,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            mount: None,
            horizontal_fov: 60f64.to_radians(),
            max_range: 1.5,
            pitch: CameraPitch::Down,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizontal_fov > 0.0 && self.horizontal_fov < PI) {
            return Err(Error::InvalidParameter(format!(
                "horizontal_fov must lie in (0, pi), got {}",
                self.horizontal_fov
            )));
        }
        if !(self.max_range > 0.0) {
            return Err(Error::InvalidParameter("max_range must be > 0".into()));
        }
        Ok(())
    }

    pub fn mount_pose(&self, geom: &RobotGeometry) -> Pose {
        self.mount.unwrap_or_else(|| {
            let [x, y] = geom.hub_position();
            Pose::new(x, y, geom.dock_axis_angle())
        })
    }

    /// World pose of the camera for an owner at `owner`.
    pub fn world_pose(&self, owner: &Pose, geom: &RobotGeometry) -> Pose {
        owner.compose(&self.mount_pose(geom))
    }
}

/// A tag on a hub face.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TagPose {
    pub position: [f64; 2],
    /// Direction of the outward surface normal, radians.
    pub normal: f64,
    pub owner: usize,
}

impl TagPose {
    /// Tag rigidly attached to the hub face of a module at `owner_pose`.
    pub fn on_hub(owner_pose: &Pose, geom: &RobotGeometry, owner: usize) -> Self {
        Self {
            position: owner_pose.transform_point(geom.hub_position()),
            normal: wrap_angle(owner_pose.theta + geom.dock_axis_angle()),
            owner,
        }
    }

    /// Angle between the tag normal and the tag-to-`point` line.
    pub fn viewing_angle(&self, point: [f64; 2]) -> f64 {
        let dx = point[0] - self.position[0];
        let dy = point[1] - self.position[1];
        let (ns, nc) = self.normal.sin_cos();
        let cross = nc * dy - ns * dx;
        let dot = nc * dx + ns * dy;
        cross.abs().atan2(dot)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TagObservation {
    Detected {
        x_offset: f64,
        z_offset: f64,
        bearing: f64,
    },
    NotDetected,
}

impl TagObservation {
    pub fn is_valid(&self) -> bool {
        matches!(self, TagObservation::Detected { .. })
    }
}

/// Noise-free camera-frame offsets `(x_offset, z_offset, bearing)`.
pub fn camera_frame_offsets(camera: &Pose, tag: &TagPose) -> (f64, f64, f64) {
    let dx = tag.position[0] - camera.x;
    let dy = tag.position[1] - camera.y;
    let (s, c) = camera.theta.sin_cos();
    let z = c * dx + s * dy;
    let x = s * dx - c * dy;
    let bearing = wrap_angle(tag.normal + PI - camera.theta);
    (x, z, bearing)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptionConfig {
    #[serde(default)]
    pub camera: CameraModel,
    #[serde(default)]
    pub lighting_table: LightingTable,
    /// Maximum viewing angle at which the tag is still decodable, radians.
    #[serde(default = "default_deviation_limit")]
    pub deviation_limit: f64,
}

fn default_deviation_limit() -> f64 {
    60f64.to_radians()
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            camera: CameraModel::default(),
            lighting_table: LightingTable::default(),
            deviation_limit: default_deviation_limit(),
        }
    }
}

impl PerceptionConfig {
    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        self.lighting_table.validate()?;
        if !(self.deviation_limit > 0.0 && self.deviation_limit < PI / 2.0) {
            return Err(Error::InvalidParameter(
                "deviation_limit must lie in (0, pi/2)".into(),
            ));
        }
        Ok(())
    }

    /// Observes `tag` from a camera at world pose `camera_pose`.
    ///
    /// Every call consumes the same number of draws from `rng` (one uniform
    /// and three normals) whatever the outcome, so two calls that differ only
    /// in geometry see identical noise.
    pub fn observe<R: Rng + ?Sized>(
        &self,
        camera_pose: &Pose,
        tag: &TagPose,
        light: Lighting,
        rng: &mut R,
    ) -> TagObservation {
        let level = self.lighting_table.level(light);
        let u: f64 = rng.random();
        let nx: f64 = rng.sample(StandardNormal);
        let nz: f64 = rng.sample(StandardNormal);
        let nb: f64 = rng.sample(StandardNormal);

        if self.camera.pitch != CameraPitch::Down {
            return TagObservation::NotDetected;
        }
        let (x, z, bearing) = camera_frame_offsets(camera_pose, tag);
        let range = x.hypot(z);
        if z <= 0.0 || range > self.camera.max_range {
            return TagObservation::NotDetected;
        }
        if x.atan2(z).abs() > 0.5 * self.camera.horizontal_fov {
            return TagObservation::NotDetected;
        }
        if tag.viewing_angle(camera_pose.position()) > self.deviation_limit + GATE_EPS {
            return TagObservation::NotDetected;
        }
        if u >= level.detection_probability {
            return TagObservation::NotDetected;
        }
        TagObservation::Detected {
            x_offset: x + level.offset_sigma * nx,
            z_offset: z + level.offset_sigma * nz,
            bearing: wrap_angle(bearing + level.bearing_sigma * nb),
        }
    }
}
