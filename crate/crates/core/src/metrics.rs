//! Batch statistics: success rate, normalized trajectory length, blocking
//! F-score and perception latency.

use std::fmt::Write as _;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::episode::{EpisodeResult, FrameTiming, Outcome};
use crate::error::{Error, Result};
use crate::grid::Mask;
use crate::scalar::Real;
use crate::sim::material::MaterialKind;

pub fn success_rate(episodes: &[EpisodeResult]) -> f64 {
    if episodes.is_empty() {
        return 0.0;
    }
    let ok = episodes
        .iter()
        .filter(|e| e.outcome == Outcome::Success)
        .count();
    ok as f64 / episodes.len() as f64
}

/// Executed path length over the straight start-to-goal distance.
pub fn norm_traj_length(episode: &EpisodeResult) -> f64 {
    episode.path_length() / episode.straight_distance()
}

/// Mean normalized length over the successful episodes, `None` if there are
/// none.
pub fn mean_norm_traj_length(episodes: &[EpisodeResult]) -> Option<f64> {
    let v: Vec<f64> = episodes
        .iter()
        .filter(|e| e.outcome == Outcome::Success)
        .map(norm_traj_length)
        .collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Harmonic mean of precision and recall of `predicted` against `truth`.
/// 1.0 when both are empty.
pub fn f_score<T: Real>(predicted: &Mask<T>, truth: &Mask<T>) -> Result<f64> {
    if !predicted.same_geometry(truth) {
        return Err(Error::GeometryMismatch("F-score masks"));
    }
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&p, &t) in predicted.as_slice().iter().zip(truth.as_slice()) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    Ok(f_score_counts(tp, fp, fneg))
}

/// F-score from confusion counts.
pub fn f_score_counts(tp: usize, fp: usize, fneg: usize) -> f64 {
    if tp + fp + fneg == 0 {
        return 1.0;
    }
    // 2PR / (P + R) simplifies to 2tp / (2tp + fp + fn).
    2.0 * tp as f64 / (2 * tp + fp + fneg) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub frames: usize,
    pub mean_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

/// Mean, 95th percentile (nearest rank) and max of per-frame totals.
pub fn frame_latency(timings: &[FrameTiming]) -> LatencyStats {
    latency_of(timings.iter().map(|t| t.total()))
}

pub fn latency_of(durations: impl IntoIterator<Item = Duration>) -> LatencyStats {
    let mut ms: Vec<f64> = durations
        .into_iter()
        .map(|d| d.as_secs_f64() * 1e3)
        .collect();
    if ms.is_empty() {
        return LatencyStats {
            frames: 0,
            mean_ms: 0.0,
            p95_ms: 0.0,
            max_ms: 0.0,
        };
    }
    ms.sort_by(f64::total_cmp);
    let rank = ((0.95 * ms.len() as f64).ceil() as usize).clamp(1, ms.len());
    LatencyStats {
        frames: ms.len(),
        mean_ms: ms.iter().sum::<f64>() / ms.len() as f64,
        p95_ms: ms[rank - 1],
        max_ms: ms[ms.len() - 1],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub scene: String,
    pub mode: String,
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Mean over successful episodes.
    pub norm_traj_length: Option<f64>,
    /// Mean raw path length of the failed episodes, meters.
    pub failed_path_length: Option<f64>,
    /// Mean of the per-episode mean F-scores, when evaluated.
    pub f_score: Option<f64>,
    pub latency: LatencyStats,
    pub collisions: usize,
    pub transparent_collisions: usize,
    pub frozen: usize,
    pub timeouts: usize,
    pub admissibility_violations: usize,
}

impl BatchReport {
    pub fn from_episodes(scene: &str, mode: &str, episodes: &[EpisodeResult]) -> Self {
        let count = |o| episodes.iter().filter(|e| e.outcome == o).count();
        let failed: Vec<f64> = episodes
            .iter()
            .filter(|e| e.outcome != Outcome::Success)
            .map(|e| e.path_length())
            .collect();
        let f: Vec<f64> = episodes
            .iter()
            .filter(|e| !e.f_scores.is_empty())
            .map(|e| e.f_scores.iter().sum::<f64>() / e.f_scores.len() as f64)
            .collect();
        Self {
            scene: scene.to_string(),
            mode: mode.to_string(),
            episodes: episodes.len(),
            successes: count(Outcome::Success),
            success_rate: success_rate(episodes),
            norm_traj_length: mean_norm_traj_length(episodes),
            failed_path_length: (!failed.is_empty())
                .then(|| failed.iter().sum::<f64>() / failed.len() as f64),
            f_score: (!f.is_empty()).then(|| f.iter().sum::<f64>() / f.len() as f64),
            latency: latency_of(
                episodes
                    .iter()
                    .flat_map(|e| e.timings.iter().map(|t| t.total())),
            ),
            collisions: count(Outcome::Collision),
            transparent_collisions: episodes
                .iter()
                .filter(|e| {
                    e.collision
                        .as_ref()
                        .is_some_and(|c| c.material == MaterialKind::Transparent)
                })
                .count(),
            frozen: count(Outcome::Frozen),
            timeouts: count(Outcome::Timeout),
            admissibility_violations: episodes.iter().map(|e| e.admissibility_violations).sum(),
        }
    }
}

/// Fixed-width table with one row per report.
pub fn format_table(reports: &[BatchReport]) -> String {
    let mut out = String::new();
    let opt =
        |v: Option<f64>, prec: usize| v.map_or_else(|| "-".to_string(), |x| format!("{x:.prec$}"));
    writeln!(
        out,
        "{:<22} {:<9} {:>8} {:>9} {:>10} {:>8} {:>10} {:>9}",
        "Scene", "Mode", "Success", "Rate (%)", "Norm. Len", "F-Score", "Mean (ms)", "p95 (ms)"
    )
    .unwrap();
    writeln!(out, "{}", "-".repeat(92)).unwrap();
    for r in reports {
        writeln!(
            out,
            "{:<22} {:<9} {:>8} {:>9.1} {:>10} {:>8} {:>10.3} {:>9.3}",
            r.scene,
            r.mode,
            format!("{}/{}", r.successes, r.episodes),
            100.0 * r.success_rate,
            opt(r.norm_traj_length, 3),
            opt(r.f_score, 3),
            r.latency.mean_ms,
            r.latency.p95_ms,
        )
        .unwrap();
    }
    out
}
