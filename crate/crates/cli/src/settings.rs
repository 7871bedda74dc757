//! Run configuration: a JSON file whose fields mirror the command-line flags.
//! Flags given on the command line override the file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use intensity_map::config::{EpisodeConfig, RobotProfile};
use intensity_map::fn_tracker::FnParams;
use intensity_map::inflation::InflationMode;
use intensity_map::map_builder::LayerSpec;
use intensity_map::planner::PlannerParams;
use intensity_map::sim::scene::Scene;

pub const RUN_CONFIG_VERSION: u32 = 1;

/// A robot by profile name or spelled out in full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RobotChoice {
    Named(String),
    Profile(RobotProfile),
}

impl RobotChoice {
    pub fn profile(&self) -> Result<RobotProfile> {
        match self {
            Self::Named(name) => RobotProfile::named(name)
                .with_context(|| format!("unknown robot `{name}` (expected turtlebot or spot)")),
            Self::Profile(p) => Ok(p.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    /// Built-in scene name or path to a scene file. Relative paths in a
    /// config file are taken relative to that file.
    pub scene: Option<String>,
    /// Overrides the scene's robot.
    pub robot: Option<RobotChoice>,
    pub inflation: Option<InflationMode>,
    pub episodes: usize,
    pub seed: u64,
    /// Write a plan-map PPM every this many frames.
    pub snapshot_every: Option<usize>,
    pub out: PathBuf,
    /// Classifier threshold as a fraction of the maximum intensity.
    pub gamma: Option<f64>,
    pub kernel_size: Option<usize>,
    pub padding: Option<usize>,
    pub f_score: bool,
    pub layers: Option<LayerSpec<f64>>,
    pub planner: Option<PlannerParams<f64>>,
    pub fn_tracker: Option<FnParams<f64>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: RUN_CONFIG_VERSION,
            scene: None,
            robot: None,
            inflation: None,
            episodes: 10,
            seed: 0,
            snapshot_every: None,
            out: PathBuf::from("results"),
            gamma: None,
            kernel_size: None,
            padding: None,
            f_score: false,
            layers: None,
            planner: None,
            fn_tracker: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            anyhow::anyhow!(
                "invalid config `{}` at `{}`: {}",
                origin.display(),
                e.path(),
                e.inner()
            )
        })?;
        if config.version != RUN_CONFIG_VERSION {
            bail!(
                "invalid config `{}`: unsupported version {} (expected {RUN_CONFIG_VERSION})",
                origin.display(),
                config.version
            );
        }
        if let (Some(scene), Some(dir)) = (&config.scene, origin.parent()) {
            let relative = Path::new(scene);
            if Scene::builtin(scene).is_none() && relative.is_relative() {
                let joined = dir.join(relative);
                if joined.exists() {
                    config.scene = Some(joined.display().to_string());
                }
            }
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("failed to read config `{}`", path.display()))?;
        Self::from_json(&text, path)
    }

    pub fn scene(&self) -> Result<Scene> {
        let name = self
            .scene
            .as_deref()
            .context("no scene given (use --scene or `scene` in the config file)")?;
        let mut scene = Scene::resolve(name)?;
        if let Some(robot) = &self.robot {
            scene.robot = robot.profile()?;
        }
        Ok(scene)
    }

    /// Scene defaults with this configuration's overrides applied; validated.
    pub fn episode_config(&self, scene: &Scene) -> Result<EpisodeConfig> {
        let mut c = EpisodeConfig::for_scene(scene);
        if let Some(mode) = self.inflation {
            c.inflation.mode = mode;
        }
        if let Some(gamma) = self.gamma {
            c.gamma_fraction = gamma;
        }
        if let Some(e) = self.kernel_size {
            c.inflation.kernel_size = e;
        }
        if let Some(p) = self.padding {
            c.inflation.padding = p;
        }
        if let Some(layers) = self.layers {
            c.layers = layers;
        }
        if let Some(planner) = self.planner {
            c.planner = planner;
        }
        if let Some(fn_tracker) = self.fn_tracker {
            c.fn_tracker = fn_tracker;
        }
        c.evaluate_f_score = self.f_score;
        c.seed = self.seed;
        c.validate()?;
        Ok(c)
    }
}
