//! Scene description: material-tagged vertical primitives plus the robot's
//! start, goal and per-scene settings.
//!
//! Scenes are JSON documents (schema version 1, see the repository README).
//! World coordinates are meters with the floor at `z = 0`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RobotProfile;
use crate::error::{Error, Result};
use crate::geometry::Pose2;
use crate::inflation::InflationMode;
use crate::sim::lidar::LidarConfig;
use crate::sim::material::Material;

pub const SCENE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    /// Axis-aligned box.
    Box {
        center: [f64; 2],
        size: [f64; 2],
        z: [f64; 2],
    },
    /// Vertical cylinder.
    Cylinder {
        center: [f64; 2],
        radius: f64,
        z: [f64; 2],
    },
    /// Zero-thickness vertical plane segment.
    Plane {
        from: [f64; 2],
        to: [f64; 2],
        z: [f64; 2],
    },
}

impl Shape {
    pub fn z_range(&self) -> [f64; 2] {
        match *self {
            Shape::Box { z, .. } | Shape::Cylinder { z, .. } | Shape::Plane { z, .. } => z,
        }
    }

    /// Center and radius of a circle enclosing the footprint.
    pub fn bounding_circle(&self) -> ([f64; 2], f64) {
        match *self {
            Shape::Box { center, size, .. } => (center, 0.5 * size[0].hypot(size[1])),
            Shape::Cylinder { center, radius, .. } => (center, radius),
            Shape::Plane { from, to, .. } => (
                [0.5 * (from[0] + to[0]), 0.5 * (from[1] + to[1])],
                0.5 * (to[0] - from[0]).hypot(to[1] - from[1]),
            ),
        }
    }

    /// Planar distance from a point to the footprint, 0 inside it.
    pub fn distance_2d(&self, x: f64, y: f64) -> f64 {
        match *self {
            Shape::Box { center, size, .. } => {
                let dx = ((x - center[0]).abs() - 0.5 * size[0]).max(0.0);
                let dy = ((y - center[1]).abs() - 0.5 * size[1]).max(0.0);
                dx.hypot(dy)
            }
            Shape::Cylinder { center, radius, .. } => {
                ((x - center[0]).hypot(y - center[1]) - radius).max(0.0)
            }
            Shape::Plane { from, to, .. } => segment_distance(from, to, x, y),
        }
    }

    /// Horizontal distances `[s_in, s_out]` along the unit direction `(dx, dy)`
    /// from `(ox, oy)` where the line is inside the footprint. `s_in` may be
    /// negative when the origin is inside.
    pub fn horizontal_span(&self, ox: f64, oy: f64, dx: f64, dy: f64) -> Option<(f64, f64)> {
        match *self {
            Shape::Box { center, size, .. } => {
                let mut lo = f64::NEG_INFINITY;
                let mut hi = f64::INFINITY;
                for (o, d, c, half) in [
                    (ox, dx, center[0], 0.5 * size[0]),
                    (oy, dy, center[1], 0.5 * size[1]),
                ] {
                    if d.abs() < 1e-15 {
                        if (o - c).abs() > half {
                            return None;
                        }
                    } else {
                        let a = (c - half - o) / d;
                        let b = (c + half - o) / d;
                        lo = lo.max(a.min(b));
                        hi = hi.min(a.max(b));
                    }
                }
                (lo <= hi).then_some((lo, hi))
            }
            Shape::Cylinder { center, radius, .. } => {
                let (px, py) = (center[0] - ox, center[1] - oy);
                let along = px * dx + py * dy;
                let perp2 = px * px + py * py - along * along;
                let r2 = radius * radius;
                if perp2 > r2 {
                    return None;
                }
                let half = (r2 - perp2).max(0.0).sqrt();
                Some((along - half, along + half))
            }
            Shape::Plane { from, to, .. } => {
                let (ex, ey) = (to[0] - from[0], to[1] - from[1]);
                let denom = dx * ey - dy * ex;
                if denom.abs() < 1e-15 {
                    return None;
                }
                let (wx, wy) = (from[0] - ox, from[1] - oy);
                let s = (wx * ey - wy * ex) / denom;
                let u = (wx * dy - wy * dx) / denom;
                (0.0..=1.0).contains(&u).then_some((s, s))
            }
        }
    }

    fn validate(&self, path: &str) -> std::result::Result<(), String> {
        let z = self.z_range();
        if !(z[0] < z[1]) {
            return Err(format!("{path}.z: lower bound must be below upper bound"));
        }
        match *self {
            Shape::Box { size, .. } if !(size[0] > 0.0 && size[1] > 0.0) => {
                Err(format!("{path}.size: dimensions must be positive"))
            }
            Shape::Cylinder { radius, .. } if !(radius > 0.0) => {
                Err(format!("{path}.radius: must be positive"))
            }
            Shape::Plane { from, to, .. } if (to[0] - from[0]).hypot(to[1] - from[1]) <= 0.0 => {
                Err(format!("{path}: plane segment has zero length"))
            }
            _ => Ok(()),
        }
    }
}

fn segment_distance(a: [f64; 2], b: [f64; 2], x: f64, y: f64) -> f64 {
    let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
    let len2 = ex * ex + ey * ey;
    let t = (((x - a[0]) * ex + (y - a[1]) * ey) / len2).clamp(0.0, 1.0);
    (x - a[0] - t * ex).hypot(y - a[1] - t * ey)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Primitive {
    pub name: String,
    pub shape: Shape,
    pub material: Material,
    /// Ground-truth traversability used for scoring and collisions.
    pub passable: bool,
}

impl Primitive {
    pub fn new(name: impl Into<String>, shape: Shape, material: Material, passable: bool) -> Self {
        Self {
            name: name.into(),
            shape,
            material,
            passable,
        }
    }

    /// Whether a disc robot of `radius` standing on the floor with the given
    /// height overlaps this primitive.
    pub fn collides_with_disc(&self, x: f64, y: f64, radius: f64, height: f64) -> bool {
        let z = self.shape.z_range();
        z[0] < height && z[1] > 0.0 && self.shape.distance_2d(x, y) < radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartJitter {
    /// Uniform offset bound on each of x and y, meters.
    #[serde(default)]
    pub xy: f64,
    /// Uniform yaw offset bound, radians.
    #[serde(default)]
    pub yaw: f64,
}

/// Optional per-scene overrides of the episode configuration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSettings {
    pub inflation: Option<InflationMode>,
    pub kernel_size: Option<usize>,
    pub padding: Option<usize>,
    pub gamma: Option<f64>,
    pub time_limit: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RobotRef {
    Named(String),
    Inline(RobotProfile),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum MaterialRef {
    Named(String),
    Inline(Material),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PrimitiveSpec {
    #[serde(default)]
    name: Option<String>,
    shape: Shape,
    material: MaterialRef,
    passable: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    version: u32,
    name: String,
    #[serde(default)]
    description: String,
    robot: RobotRef,
    start: Pose2<f64>,
    goal: [f64; 2],
    #[serde(default)]
    start_jitter: StartJitter,
    #[serde(default)]
    materials: BTreeMap<String, Material>,
    #[serde(default)]
    lidar: Option<LidarConfig>,
    #[serde(default)]
    settings: SceneSettings,
    primitives: Vec<PrimitiveSpec>,
}

/// Scenes shipped with the crate: `(name, json)`.
pub const BUILTIN_SCENES: &[(&str, &str)] = &[
    ("scenario1", include_str!("../../scenes/scenario1.json")),
    (
        "scenario1_control",
        include_str!("../../scenes/scenario1_control.json"),
    ),
    ("scenario2", include_str!("../../scenes/scenario2.json")),
    ("scenario3", include_str!("../../scenes/scenario3.json")),
    ("scenario4", include_str!("../../scenes/scenario4.json")),
];

#[derive(Debug, Clone)]
pub struct Scene {
    pub name: String,
    pub description: String,
    pub robot: RobotProfile,
    pub start: Pose2<f64>,
    pub goal: [f64; 2],
    pub start_jitter: StartJitter,
    /// Lidar overrides; the mount height is always taken from the robot.
    pub lidar: Option<LidarConfig>,
    pub settings: SceneSettings,
    pub primitives: Vec<Primitive>,
}

impl Scene {
    /// Scene with no primitives and default settings.
    pub fn empty(name: &str, robot: RobotProfile, start: Pose2<f64>, goal: [f64; 2]) -> Self {
        Self {
            name: name.into(),
            description: String::new(),
            robot,
            start,
            goal,
            start_jitter: StartJitter::default(),
            lidar: None,
            settings: SceneSettings::default(),
            primitives: Vec::new(),
        }
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let scene_err = |reason: String| Error::Scene {
            path: origin.to_string(),
            reason,
        };
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: SceneFile = serde_path_to_error::deserialize(de)
            .map_err(|e| scene_err(format!("at `{}`: {}", e.path(), e.inner())))?;
        if file.version != SCENE_SCHEMA_VERSION {
            return Err(scene_err(format!(
                "version: unsupported schema version {} (expected {SCENE_SCHEMA_VERSION})",
                file.version
            )));
        }
        let robot = match file.robot {
            RobotRef::Named(n) => RobotProfile::named(&n)
                .ok_or_else(|| scene_err(format!("robot: unknown profile `{n}`")))?,
            RobotRef::Inline(p) => p,
        };
        robot.validate().map_err(|e| scene_err(e.to_string()))?;
        for (name, m) in &file.materials {
            m.validate()
                .map_err(|e| scene_err(format!("materials.{name}: {e}")))?;
        }
        if let Some(lidar) = &file.lidar {
            lidar
                .validate()
                .map_err(|e| scene_err(format!("lidar: {e}")))?;
        }
        let mut primitives = Vec::with_capacity(file.primitives.len());
        for (i, spec) in file.primitives.into_iter().enumerate() {
            let path = format!("primitives[{i}]");
            spec.shape
                .validate(&format!("{path}.shape"))
                .map_err(scene_err)?;
            let material = match spec.material {
                MaterialRef::Named(n) => file
                    .materials
                    .get(&n)
                    .copied()
                    .or_else(|| Material::named(&n))
                    .ok_or_else(|| scene_err(format!("{path}.material: unknown material `{n}`")))?,
                MaterialRef::Inline(m) => {
                    m.validate()
                        .map_err(|e| scene_err(format!("{path}.material: {e}")))?;
                    m
                }
            };
            primitives.push(Primitive {
                name: spec.name.unwrap_or_else(|| format!("primitive_{i}")),
                shape: spec.shape,
                material,
                passable: spec.passable,
            });
        }
        Ok(Self {
            name: file.name,
            description: file.description,
            robot,
            start: file.start,
            goal: file.goal,
            start_jitter: file.start_jitter,
            lidar: file.lidar,
            settings: file.settings,
            primitives,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text, &path.display().to_string())
    }

    /// Scene shipped with the crate, by name.
    pub fn builtin(name: &str) -> Option<Self> {
        let text = BUILTIN_SCENES.iter().find(|(n, _)| *n == name)?.1;
        Some(Self::from_json(text, name).expect("built-in scenes are valid"))
    }

    /// A built-in name, or else a path to a scene file. A missing
    /// `<builtin>.json` falls back to the built-in scene of that name.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        if let Some(scene) = Self::builtin(name_or_path) {
            return Ok(scene);
        }
        let path = Path::new(name_or_path);
        if !path.exists() {
            if let Some(scene) = name_or_path.strip_suffix(".json").and_then(Self::builtin) {
                return Ok(scene);
            }
        }
        Self::load(path)
    }

    /// Straight-line start-to-goal distance.
    pub fn goal_distance(&self) -> f64 {
        (self.goal[0] - self.start.x).hypot(self.goal[1] - self.start.y)
    }

    /// First non-passable primitive overlapping the robot disc.
    pub fn collision(&self, x: f64, y: f64, radius: f64, height: f64) -> Option<&Primitive> {
        self.primitives
            .iter()
            .find(|p| !p.passable && p.collides_with_disc(x, y, radius, height))
    }
}
