//! Spinning multi-channel lidar model.
//!
//! Rays originate at the mount height above the robot's floor position. The
//! floor occludes but never returns. Along each ray the intersected volumes are
//! visited in range order and the material decides whether the ray stops:
//!
//! * solid opaque — reflects at the surface;
//! * transparent — rays within the grazing elevation window reflect with the
//!   material's grazing reflectance, others pass with `pass_probability`;
//! * sparse pliable — reflects with probability `1 - pass_probability` from a
//!   uniformly random depth inside the volume.
//!
//! Noise is drawn from a generator seeded per azimuth column, so every column
//! is independently reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::positive;
use crate::error::{invalid, Result};
use crate::geometry::{IntensityPoint, Pose2};
use crate::sim::material::MaterialKind;
use crate::sim::scene::Primitive;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LidarConfig {
    /// Channel elevation angles, degrees.
    pub elevations_deg: Vec<f64>,
    pub azimuth_resolution_deg: f64,
    pub min_range: f64,
    pub max_range: f64,
    /// Maximum reported intensity `R`.
    pub max_intensity: f64,
    /// Sensor height above the floor, meters.
    pub mount_height: f64,
    /// Half-width of the elevation window in which glass can reflect, degrees.
    pub grazing_window_deg: f64,
    pub seed: u64,
}

impl Default for LidarConfig {
    /// Sixteen channels from -15 to +15 degrees in 2 degree steps.
    fn default() -> Self {
        Self {
            elevations_deg: (0..16).map(|i| -15.0 + 2.0 * i as f64).collect(),
            azimuth_resolution_deg: 0.2,
            min_range: 0.5,
            max_range: 30.0,
            max_intensity: 255.0,
            mount_height: 0.6,
            grazing_window_deg: 1.0,
            seed: 0,
        }
    }
}

impl LidarConfig {
    pub fn channels(&self) -> usize {
        self.elevations_deg.len()
    }

    pub fn columns(&self) -> usize {
        (360.0 / self.azimuth_resolution_deg).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        positive(&[
            ("lidar.azimuth_resolution_deg", self.azimuth_resolution_deg),
            ("lidar.max_range", self.max_range),
            ("lidar.max_intensity", self.max_intensity),
            ("lidar.mount_height", self.mount_height),
        ])?;
        if !(self.min_range >= 0.0 && self.min_range < self.max_range) {
            return Err(invalid(
                "lidar.min_range",
                "must satisfy 0 <= min_range < max_range",
            ));
        }
        if self.elevations_deg.is_empty() || self.elevations_deg.iter().any(|e| !(e.abs() < 89.0)) {
            return Err(invalid(
                "lidar.elevations_deg",
                "need at least one channel, each within (-89, 89) degrees",
            ));
        }
        if !(self.grazing_window_deg >= 0.0) {
            return Err(invalid("lidar.grazing_window_deg", "must be non-negative"));
        }
        Ok(())
    }
}

/// How primitives interact with rays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    /// Material model with noise.
    Sensor,
    /// Passable primitives absent, all others opaque, no noise.
    Truth,
}

/// Simulated scan from `pose`; points are in the sensor frame with `z`
/// relative to the mount height. `frame` selects the noise stream.
pub fn cast_scan(
    primitives: &[Primitive],
    pose: &Pose2<f64>,
    cfg: &LidarConfig,
    frame: u64,
) -> Vec<IntensityPoint<f64>> {
    cast(primitives, pose, cfg, frame, Mode::Sensor)
}

/// Noise-free scan in which only non-passable primitives exist and all of them
/// are opaque; its returns mark the truly blocking surfaces visible from
/// `pose`. Intensities are `R`.
pub fn truth_scan(
    primitives: &[Primitive],
    pose: &Pose2<f64>,
    cfg: &LidarConfig,
) -> Vec<IntensityPoint<f64>> {
    cast(primitives, pose, cfg, 0, Mode::Truth)
}

fn column_seed(seed: u64, frame: u64, column: u64) -> u64 {
    // splitmix64 finalizer over a combined key
    let mut z = seed
        ^ frame.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ column.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Span {
    index: usize,
    s_in: f64,
    s_out: f64,
}

struct Channel {
    tan: f64,
    cos: f64,
    grazing: bool,
}

fn cast(
    primitives: &[Primitive],
    pose: &Pose2<f64>,
    cfg: &LidarConfig,
    frame: u64,
    mode: Mode,
) -> Vec<IntensityPoint<f64>> {
    let active: Vec<usize> = (0..primitives.len())
        .filter(|&i| mode == Mode::Sensor || !primitives[i].passable)
        .collect();
    if active.is_empty() {
        return Vec::new();
    }
    let channels: Vec<Channel> = cfg
        .elevations_deg
        .iter()
        .map(|e| {
            let rad = e.to_radians();
            Channel {
                tan: rad.tan(),
                cos: rad.cos(),
                grazing: e.abs() <= cfg.grazing_window_deg,
            }
        })
        .collect();
    let circles: Vec<([f64; 2], f64)> = primitives
        .iter()
        .map(|p| p.shape.bounding_circle())
        .collect();
    let height = cfg.mount_height;
    let r_max = cfg.max_intensity;
    let columns = cfg.columns();
    let step = 360.0 / columns as f64;

    let mut points = Vec::new();
    let mut spans: Vec<Span> = Vec::new();
    let mut hits: Vec<(f64, f64, usize)> = Vec::new();
    for col in 0..columns {
        let az_local = (col as f64 * step - 180.0).to_radians();
        let (ls, lc) = az_local.sin_cos();
        let (dy, dx) = (pose.yaw + az_local).sin_cos();

        spans.clear();
        for &i in &active {
            let (center, radius) = circles[i];
            let (px, py) = (center[0] - pose.x, center[1] - pose.y);
            let along = px * dx + py * dy;
            if along + radius < 0.0 || along - radius > cfg.max_range {
                continue;
            }
            if (px * dy - py * dx).abs() > radius {
                continue;
            }
            if let Some((s_in, s_out)) = primitives[i].shape.horizontal_span(pose.x, pose.y, dx, dy)
            {
                if s_out >= 0.0 {
                    spans.push(Span {
                        index: i,
                        s_in: s_in.max(0.0),
                        s_out,
                    });
                }
            }
        }
        if spans.is_empty() {
            continue;
        }

        let mut rng = ChaCha8Rng::seed_from_u64(column_seed(cfg.seed, frame, col as u64));
        for ch in &channels {
            let s_limit = {
                let range_limit = cfg.max_range * ch.cos;
                if ch.tan < 0.0 {
                    range_limit.min(height / -ch.tan)
                } else {
                    range_limit
                }
            };
            // Entry/exit horizontal distances restricted to the volume's heights.
            hits.clear();
            for span in &spans {
                let z = primitives[span.index].shape.z_range();
                let (lo, hi) = if ch.tan == 0.0 {
                    if z[0] <= height && height <= z[1] {
                        (f64::NEG_INFINITY, f64::INFINITY)
                    } else {
                        continue;
                    }
                } else {
                    let a = (z[0] - height) / ch.tan;
                    let b = (z[1] - height) / ch.tan;
                    (a.min(b), a.max(b))
                };
                let entry = span.s_in.max(lo);
                let exit = span.s_out.min(hi);
                if entry <= exit && entry <= s_limit {
                    hits.push((entry, exit.min(s_limit), span.index));
                }
            }
            hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));

            for &(entry, exit, index) in &hits {
                let material = &primitives[index].material;
                let reflect_at = match mode {
                    Mode::Truth => Some(entry),
                    Mode::Sensor => match material.kind {
                        MaterialKind::SolidOpaque => Some(entry),
                        MaterialKind::Transparent => {
                            let p_reflect = if ch.grazing {
                                material.grazing_reflectance
                            } else {
                                1.0 - material.pass_probability
                            };
                            (rng.random::<f64>() < p_reflect).then_some(entry)
                        }
                        MaterialKind::SparsePliable => {
                            // An opaque body inside the volume ends it.
                            let stop = hits
                                .iter()
                                .filter(|h| {
                                    h.0 >= entry
                                        && primitives[h.2].material.kind
                                            == MaterialKind::SolidOpaque
                                })
                                .fold(exit, |s, h| s.min(h.0));
                            let u: f64 = rng.random();
                            (u >= material.pass_probability)
                                .then(|| entry + rng.random::<f64>() * (stop - entry))
                        }
                    },
                };
                let Some(s) = reflect_at else { continue };
                let range = s / ch.cos;
                if range >= cfg.min_range {
                    let intensity = match mode {
                        Mode::Truth => r_max,
                        Mode::Sensor => {
                            let mut v = material.base_intensity * r_max;
                            if material.scatter_sigma > 0.0 {
                                let noise = Normal::new(0.0, material.scatter_sigma * r_max)
                                    .expect("finite sigma");
                                v += noise.sample(&mut rng);
                            }
                            v.clamp(0.0, r_max)
                        }
                    };
                    points.push(IntensityPoint::new(s * lc, s * ls, s * ch.tan, intensity));
                }
                break;
            }
        }
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::material::Material;
    use crate::sim::scene::Shape;

    fn wall(material: Material) -> Vec<Primitive> {
        vec![Primitive::new(
            "wall",
            Shape::Plane {
                from: [2.0, -20.0],
                to: [2.0, 20.0],
                z: [-5.0, 10.0],
            },
            material,
            false,
        )]
    }

    fn cfg() -> LidarConfig {
        LidarConfig {
            azimuth_resolution_deg: 1.0,
            ..LidarConfig::default()
        }
    }

    #[test]
    fn empty_scene_returns_nothing() {
        assert!(cast_scan(&[], &Pose2::default(), &cfg(), 0).is_empty());
    }

    #[test]
    fn opaque_wall_matches_closed_form() {
        let cfg = cfg();
        let pts = cast_scan(
            &wall(Material::concrete().without_noise()),
            &Pose2::default(),
            &cfg,
            0,
        );
        assert!(!pts.is_empty());
        for p in &pts {
            assert!((p.x - 2.0).abs() < 1e-9, "{p:?}");
            assert_eq!(p.intensity, 0.9 * 255.0);
        }
        // Ranges follow 2 / (cos(elev) cos(az)) for the straight-ahead column.
        let ahead: Vec<_> = pts.iter().filter(|p| p.y.abs() < 1e-9).collect();
        assert_eq!(ahead.len(), 16);
        for p in ahead {
            let elev = (p.z / 2.0).atan();
            let range = (p.x * p.x + p.z * p.z).sqrt();
            assert!((range - 2.0 / elev.cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn glass_reflects_only_near_horizontal() {
        let cfg = cfg();
        let glass = Material {
            grazing_reflectance: 1.0,
            ..Material::glass().without_noise()
        };
        let pts = cast_scan(&wall(glass), &Pose2::default(), &cfg, 0);
        assert!(!pts.is_empty());
        for p in &pts {
            let elev = p.z.atan2(p.x.hypot(p.y)).to_degrees();
            assert!(elev.abs() <= 1.0 + 1e-9, "ring at {elev} reflected");
            assert!(p.intensity < 0.5 * 255.0);
        }
    }

    #[test]
    fn deterministic_and_frame_dependent() {
        let cfg = cfg();
        let prims = wall(Material::grass());
        let a = cast_scan(&prims, &Pose2::default(), &cfg, 3);
        let b = cast_scan(&prims, &Pose2::default(), &cfg, 3);
        let c = cast_scan(&prims, &Pose2::default(), &cfg, 4);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn occlusion_hides_farther_surfaces() {
        let mut prims = wall(Material::concrete());
        prims.push(Primitive::new(
            "far",
            Shape::Plane {
                from: [4.0, -20.0],
                to: [4.0, 20.0],
                z: [-5.0, 10.0],
            },
            Material::concrete(),
            false,
        ));
        let pts = cast_scan(&prims, &Pose2::default(), &cfg(), 0);
        assert!(pts.iter().all(|p| p.x < 2.0 + 1e-9));
    }

    #[test]
    fn floor_occludes_and_blind_spot_drops() {
        let cfg = cfg();
        // Wall beyond where the lowest ring meets the floor: 0.6 / tan(15°) ≈ 2.24 m.
        let mut prims = wall(Material::concrete().without_noise());
        prims[0].shape = Shape::Plane {
            from: [5.0, -1.0],
            to: [5.0, 1.0],
            z: [0.0, 3.0],
        };
        let pts = cast_scan(&prims, &Pose2::default(), &cfg, 0);
        let min_z = pts.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
        assert!(min_z >= -0.6 - 1e-9);
        let close = wall(Material::concrete());
        let mut near = close.clone();
        near[0].shape = Shape::Plane {
            from: [0.3, -0.05],
            to: [0.3, 0.05],
            z: [0.0, 3.0],
        };
        assert!(cast_scan(&near, &Pose2::default(), &cfg, 0).is_empty());
    }

    #[test]
    fn truth_scan_ignores_passable_and_sees_glass() {
        let mut prims = wall(Material::glass());
        prims.push(Primitive::new(
            "grass",
            Shape::Box {
                center: [1.0, 0.0],
                size: [0.5, 40.0],
                z: [0.0, 0.4],
            },
            Material::grass(),
            true,
        ));
        let pts = truth_scan(&prims, &Pose2::default(), &cfg());
        assert!(!pts.is_empty());
        assert!(pts.iter().all(|p| (p.x - 2.0).abs() < 1e-9));
    }

    #[test]
    fn pose_transforms_into_sensor_frame() {
        let cfg = cfg();
        let prims = wall(Material::concrete().without_noise());
        // Facing +y, the wall at world x=2 is to the robot's right.
        let pose = Pose2::new(0.0, 0.0, std::f64::consts::FRAC_PI_2);
        let pts = cast_scan(&prims, &pose, &cfg, 0);
        assert!(!pts.is_empty());
        assert!(pts.iter().all(|p| (p.y + 2.0).abs() < 1e-9));
    }
}
