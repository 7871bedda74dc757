use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use intensity_map::episode::{run_episode_observed, EpisodeResult, Frame, Outcome};
use intensity_map::export::{
    goal_cell, grid_csv, labels_ppm, layer_pgm, plan_ppm, points_csv, value_pgm,
};
use intensity_map::geometry::IntensityPoint;
use intensity_map::map_builder::LayerRole;
use intensity_map::metrics::{format_table, norm_traj_length, BatchReport};
use intensity_map::sim::scene::Scene;

use crate::settings::RunConfig;

#[derive(Serialize)]
struct EpisodeSummary {
    seed: u64,
    outcome: Outcome,
    frames: usize,
    path_length: f64,
    /// Only for successful episodes.
    norm_traj_length: Option<f64>,
    mean_f_score: Option<f64>,
    collided_with: Option<String>,
    crossed_passable: Vec<String>,
}

impl EpisodeSummary {
    fn new(e: &EpisodeResult) -> Self {
        Self {
            seed: e.seed,
            outcome: e.outcome,
            frames: e.frames(),
            path_length: e.path_length(),
            norm_traj_length: (e.outcome == Outcome::Success).then(|| norm_traj_length(e)),
            mean_f_score: (!e.f_scores.is_empty())
                .then(|| e.f_scores.iter().sum::<f64>() / e.f_scores.len() as f64),
            collided_with: e.collision.as_ref().map(|c| c.primitive.clone()),
            crossed_passable: e.crossed_passable.clone(),
        }
    }
}

#[derive(Serialize)]
struct RunReport<'a> {
    summary: &'a BatchReport,
    episodes: Vec<EpisodeSummary>,
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("failed to write `{}`", path.display()))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("failed to create `{}`", path.display()))
}

fn plan_image(frame: &Frame<f64>, goal_local: (f64, f64)) -> Vec<u8> {
    let geometry = frame.plan.cost.geometry();
    plan_ppm(
        &frame.plan,
        Some(geometry.center_cell()),
        Some(goal_cell(geometry, goal_local)),
    )
}

/// Runs `config.episodes` episodes with seeds `seed, seed + 1, ...`.
///
/// Layout of the output directory:
/// `config.json` (resolved episode configuration), `trajectories/ep_NNN.csv`,
/// `snapshots/ep_NNN_frame_MMMMM.ppm`, `report.json` and `report.txt`.
pub fn run(config: &RunConfig) -> Result<()> {
    let scene = config.scene()?;
    let base = config.episode_config(&scene)?;
    let out = &config.out;
    create_dir(&out.join("trajectories"))?;
    if config.snapshot_every.is_some() {
        create_dir(&out.join("snapshots"))?;
    }
    write(
        &out.join("config.json"),
        serde_json::to_string_pretty(&base)?,
    )?;

    let mut episodes = Vec::with_capacity(config.episodes);
    for i in 0..config.episodes {
        let mut c = base.clone();
        c.seed = base.seed.wrapping_add(i as u64);
        let mut snapshot_error = None;
        let result = run_episode_observed(&scene, &c, |v| {
            let Some(k) = config.snapshot_every.filter(|&k| k > 0) else {
                return;
            };
            if v.index % k == 0 && snapshot_error.is_none() {
                let path = out
                    .join("snapshots")
                    .join(format!("ep_{i:03}_frame_{:05}.ppm", v.index));
                snapshot_error = write(&path, plan_image(v.frame, v.goal_local)).err();
            }
        })?;
        if let Some(e) = snapshot_error {
            return Err(e);
        }
        write(
            &out.join("trajectories").join(format!("ep_{i:03}.csv")),
            result.trajectory_csv(),
        )?;
        eprintln!(
            "episode {i} (seed {}): {} after {:.1} m",
            c.seed,
            result.outcome,
            result.path_length()
        );
        episodes.push(result);
    }

    let summary =
        BatchReport::from_episodes(&scene.name, &base.inflation.mode.to_string(), &episodes);
    let report = RunReport {
        summary: &summary,
        episodes: episodes.iter().map(EpisodeSummary::new).collect(),
    };
    write(
        &out.join("report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    let table = format_table(std::slice::from_ref(&summary));
    write(&out.join("report.txt"), &table)?;
    print!("{table}");
    Ok(())
}

struct Captured {
    index: usize,
    goal_local: (f64, f64),
    points: Vec<IntensityPoint<f64>>,
    frame: Frame<f64>,
}

/// Runs one episode (seed `config.seed`) and writes the maps of frame
/// `frame`, or of the last frame: `points.csv`, `layer_<role>.pgm`,
/// `labels.ppm`, `plan.ppm`, `plan_cost.pgm` and `plan_cost.csv`.
pub fn export(config: &RunConfig, frame: Option<usize>) -> Result<()> {
    let scene: Scene = config.scene()?;
    let c = config.episode_config(&scene)?;
    let mut captured: Option<Captured> = None;
    run_episode_observed(&scene, &c, |v| {
        if frame.is_none_or(|f| f == v.index) {
            captured = Some(Captured {
                index: v.index,
                goal_local: v.goal_local,
                points: v.points.to_vec(),
                frame: v.frame.clone(),
            });
        }
    })?;
    let Some(cap) = captured else {
        anyhow::bail!("episode ended before frame {}", frame.unwrap_or(0));
    };
    let out = &config.out;
    create_dir(out)?;
    write(&out.join("points.csv"), points_csv(&cap.points))?;
    for role in LayerRole::ALL {
        let Some(layer) = cap.frame.map.layer(role) else {
            continue;
        };
        // Each layer scaled to its own brightest cell.
        let peak = layer.values().into_iter().fold(0.0, f64::max);
        let name = serde_json::to_value(role)?;
        let name = name.as_str().unwrap_or("layer");
        write(
            &out.join(format!("layer_{name}.pgm")),
            layer_pgm(layer, if peak > 0.0 { peak } else { 1.0 }),
        )?;
    }
    write(&out.join("labels.ppm"), labels_ppm(&cap.frame.classified))?;
    write(
        &out.join("plan.ppm"),
        plan_image(&cap.frame, cap.goal_local),
    )?;
    let cost = cap.frame.plan.cost.map(|&v| f64::from(v));
    write(&out.join("plan_cost.pgm"), value_pgm(&cost, 255.0))?;
    write(&out.join("plan_cost.csv"), grid_csv(&cost))?;
    eprintln!("wrote frame {} to {}", cap.index, out.display());
    Ok(())
}
