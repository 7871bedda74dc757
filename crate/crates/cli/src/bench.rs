use std::time::Duration;

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use intensity_map::config::RobotProfile;
use intensity_map::episode::{FrameTiming, Perception};
use intensity_map::fn_tracker::MotionDelta;
use intensity_map::geometry::{IntensityPoint, Pose2};
use intensity_map::metrics::{frame_latency, LatencyStats};
use intensity_map::sim::scene::Scene;

use crate::settings::RunConfig;

#[derive(Debug, Serialize)]
struct StageMeans {
    build_ms: f64,
    classify_ms: f64,
    fn_track_ms: f64,
    inflate_ms: f64,
}

#[derive(Debug, Serialize)]
struct BenchRow {
    points: usize,
    stages: StageMeans,
    total: LatencyStats,
}

fn mean_ms(timings: &[FrameTiming], stage: impl Fn(&FrameTiming) -> Duration) -> f64 {
    let sum: f64 = timings.iter().map(|t| stage(t).as_secs_f64()).sum();
    1e3 * sum / timings.len().max(1) as f64
}

fn random_clouds(
    rng: &mut ChaCha8Rng,
    count: usize,
    points: usize,
    half_extent: f64,
    height: f64,
) -> Vec<Vec<IntensityPoint<f64>>> {
    let r = 0.99 * half_extent;
    (0..count)
        .map(|_| {
            (0..points)
                .map(|_| {
                    IntensityPoint::new(
                        rng.random_range(-r..r),
                        rng.random_range(-r..r),
                        rng.random_range(-height..height),
                        rng.random_range(0.0..255.0),
                    )
                })
                .collect()
        })
        .collect()
}

/// Times build, classify, FN tracking and inflation per frame on uniformly
/// random clouds. The robot moves a little between frames so the FN tracker
/// does its motion compensation.
pub fn bench(config: &RunConfig, sizes: &[usize], frames: usize, warmup: usize) -> Result<()> {
    let episode = match &config.scene {
        Some(_) => config.episode_config(&config.scene()?)?,
        None => {
            let robot = match &config.robot {
                Some(r) => r.profile()?,
                None => RobotProfile::turtlebot(),
            };
            let scene = Scene::empty("bench", robot, Pose2::new(0.0, 0.0, 0.0), [8.0, 0.0]);
            config.episode_config(&scene)?
        }
    };
    let geometry = episode.geometry()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let delta = MotionDelta::between(&Pose2::new(0.0, 0.0, 0.0), &Pose2::new(0.05, 0.0, 0.01));
    let mut rows = Vec::new();
    println!("n={}, {frames} frames after {warmup} warm-up", geometry.n());
    println!(
        "{:>8} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "points", "build", "classify", "fn", "inflate", "mean (ms)", "p95 (ms)"
    );
    for &size in sizes {
        let clouds = random_clouds(
            &mut rng,
            8,
            size,
            geometry.half_extent(),
            episode.layers.height,
        );
        let mut perception = Perception::<f64>::from_config(&episode)?;
        let mut timings = Vec::with_capacity(frames);
        for k in 0..warmup + frames {
            let frame = perception.process(&clouds[k % clouds.len()], &delta, (8.0, 0.0))?;
            if k >= warmup {
                timings.push(frame.timing);
            }
        }
        let row = BenchRow {
            points: size,
            stages: StageMeans {
                build_ms: mean_ms(&timings, |t| t.build),
                classify_ms: mean_ms(&timings, |t| t.classify),
                fn_track_ms: mean_ms(&timings, |t| t.fn_track),
                inflate_ms: mean_ms(&timings, |t| t.inflate),
            },
            total: frame_latency(&timings),
        };
        println!(
            "{:>8} {:>10.3} {:>10.3} {:>10.3} {:>10.3} {:>10.3} {:>10.3}",
            row.points,
            row.stages.build_ms,
            row.stages.classify_ms,
            row.stages.fn_track_ms,
            row.stages.inflate_ms,
            row.total.mean_ms,
            row.total.p95_ms
        );
        rows.push(row);
    }
    std::fs::create_dir_all(&config.out)?;
    let path = config.out.join("bench.json");
    std::fs::write(&path, serde_json::to_string_pretty(&rows)?)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}
