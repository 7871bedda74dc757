//! Robot profiles and the per-episode pipeline configuration.

use serde::{Deserialize, Serialize};

use crate::classifier::ClassifierParams;
use crate::error::{invalid, Result};
use crate::fn_tracker::FnParams;
use crate::geometry::GridGeometry;
use crate::inflation::{InflationMode, InflationSettings};
use crate::map_builder::LayerSpec;
use crate::planner::PlannerParams;
use crate::sim::lidar::LidarConfig;
use crate::sim::scene::Scene;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotProfile {
    pub name: String,
    /// Radius of the circular collision footprint, meters.
    pub radius: f64,
    /// Robot height; also the sensor mount height and the layer half-span.
    pub height: f64,
    pub v_max: f64,
    pub omega_max: f64,
    pub accel_v: f64,
    pub accel_omega: f64,
}

impl RobotProfile {
    pub fn turtlebot() -> Self {
        Self {
            name: "turtlebot".into(),
            radius: 0.2,
            height: 0.6,
            v_max: 0.5,
            omega_max: 1.5,
            accel_v: 1.0,
            accel_omega: 3.0,
        }
    }

    pub fn spot() -> Self {
        Self {
            name: "spot".into(),
            radius: 0.35,
            height: 1.1,
            v_max: 1.0,
            omega_max: 1.2,
            accel_v: 1.5,
            accel_omega: 3.0,
        }
    }

    pub fn named(name: &str) -> Option<Self> {
        match name {
            "turtlebot" => Some(Self::turtlebot()),
            "spot" => Some(Self::spot()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive(&[
            ("robot.radius", self.radius),
            ("robot.height", self.height),
            ("robot.v_max", self.v_max),
            ("robot.omega_max", self.omega_max),
            ("robot.accel_v", self.accel_v),
            ("robot.accel_omega", self.accel_omega),
        ])
    }
}

/// Everything one episode needs besides the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub robot: RobotProfile,
    /// Cells per side.
    pub grid_cells: usize,
    /// Cell edge, meters.
    pub grid_resolution: f64,
    pub layers: LayerSpec<f64>,
    /// Classifier threshold as a fraction of the maximum intensity.
    pub gamma_fraction: f64,
    pub fn_tracker: FnParams<f64>,
    pub inflation: InflationSettings,
    pub planner: PlannerParams<f64>,
    pub lidar: LidarConfig,
    /// Control and sensing period, seconds.
    pub control_dt: f64,
    pub time_limit: f64,
    pub goal_tolerance: f64,
    /// Frozen when the robot moves less than `frozen_distance` over
    /// `frozen_window` seconds.
    pub frozen_distance: f64,
    pub frozen_window: f64,
    /// Compute per-frame F-scores against a ground-truth scan.
    pub evaluate_f_score: bool,
    pub seed: u64,
}

impl EpisodeConfig {
    pub fn for_robot(robot: RobotProfile) -> Self {
        let g = 0.1;
        let inflation = InflationSettings::for_radius(robot.radius, g, InflationMode::Adaptive);
        let lidar = LidarConfig {
            mount_height: robot.height,
            ..LidarConfig::default()
        };
        Self {
            grid_cells: 200,
            grid_resolution: g,
            layers: LayerSpec::for_height(robot.height).expect("default layer spec"),
            gamma_fraction: 0.5,
            fn_tracker: FnParams::default(),
            inflation,
            planner: PlannerParams::for_robot(&robot),
            lidar,
            control_dt: 0.1,
            time_limit: 60.0,
            goal_tolerance: 0.3,
            frozen_distance: 0.05,
            frozen_window: 5.0,
            evaluate_f_score: false,
            seed: 0,
            robot,
        }
    }

    /// Defaults for the scene's robot with the scene's own overrides applied.
    pub fn for_scene(scene: &Scene) -> Self {
        let mut c = Self::for_robot(scene.robot.clone());
        if let Some(lidar) = &scene.lidar {
            c.lidar = LidarConfig {
                mount_height: scene.robot.height,
                ..lidar.clone()
            };
        }
        let s = &scene.settings;
        if let Some(mode) = s.inflation {
            c.inflation.mode = mode;
        }
        if let Some(e) = s.kernel_size {
            c.inflation.kernel_size = e;
        }
        if let Some(p) = s.padding {
            c.inflation.padding = p;
        }
        if let Some(gamma) = s.gamma {
            c.gamma_fraction = gamma;
        }
        if let Some(t) = s.time_limit {
            c.time_limit = t;
        }
        c
    }

    pub fn geometry(&self) -> Result<GridGeometry<f64>> {
        GridGeometry::new(self.grid_cells, self.grid_resolution)
    }

    pub fn classifier(&self) -> Result<ClassifierParams<f64>> {
        ClassifierParams::from_fraction(self.gamma_fraction, self.lidar.max_intensity)
    }

    pub fn validate(&self) -> Result<()> {
        self.robot.validate()?;
        self.geometry()?;
        self.layers.validate()?;
        self.classifier()?;
        self.inflation.validate()?;
        self.planner.validate()?;
        self.lidar.validate()?;
        positive(&[
            ("control_dt", self.control_dt),
            ("time_limit", self.time_limit),
            ("goal_tolerance", self.goal_tolerance),
            ("frozen_window", self.frozen_window),
        ])
    }
}

pub(crate) fn positive(values: &[(&'static str, f64)]) -> Result<()> {
    for &(name, v) in values {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(
                name,
                format!("must be positive and finite, got {v}"),
            ));
        }
    }
    Ok(())
}
