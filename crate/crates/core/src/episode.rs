//! Closed-loop simulation: sense, map, classify, track glass, inflate, plan,
//! move — until the goal is reached or the run fails.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{classify_map, ClassifiedMaps, ClassifierParams, ObstacleClass};
use crate::config::EpisodeConfig;
use crate::error::Result;
use crate::fn_tracker::{glass_barrier, glass_evidence, FnParams, FnTracker, MotionDelta};
use crate::geometry::{GridGeometry, IntensityPoint, Pose2, RobotState, Twist};
use crate::grid::Mask;
use crate::inflation::{
    assemble_plan, build_kernel_with, inflate, InflationKernel, InflationMode, InflationSettings,
    PlanMap,
};
use crate::map_builder::{build_multilayer, LayerRole, LayerSpec, MultiLayerMap};
use crate::metrics::f_score;
use crate::planner::{clearance_mask, plan_step, route_target, Decision, VelocityWindow};
use crate::scalar::Real;
use crate::sim::lidar::{cast_scan, truth_scan};
use crate::sim::material::MaterialKind;
use crate::sim::scene::Scene;
use crate::sim::step_robot;

/// Wall-clock time of each perception stage for one frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameTiming {
    pub build: Duration,
    pub classify: Duration,
    pub fn_track: Duration,
    pub inflate: Duration,
}

impl FrameTiming {
    pub fn total(&self) -> Duration {
        self.build + self.classify + self.fn_track + self.inflate
    }
}

/// Output of the perception pipeline for one frame.
#[derive(Debug, Clone)]
pub struct Frame<T = f64> {
    pub map: MultiLayerMap<T>,
    pub classified: ClassifiedMaps<T>,
    pub evidence: Mask<T>,
    pub fn_mask: Mask<T>,
    pub plan: PlanMap<T>,
    pub timing: FrameTiming,
}

/// Stateful per-episode perception: layers, classifier, FN tracker and
/// inflation.
#[derive(Debug, Clone)]
pub struct Perception<T = f64> {
    geometry: GridGeometry<T>,
    layers: LayerSpec<T>,
    classifier: ClassifierParams<T>,
    fn_params: FnParams<T>,
    inflation: InflationSettings,
    tracker: FnTracker<T>,
    square: InflationKernel,
    /// Radius around the sensor without returns.
    blind_radius: T,
    /// Recent solid cells near the robot: position and layer value.
    near_solid: Vec<(T, T, T)>,
}

impl<T: Real> Perception<T> {
    pub fn new(
        geometry: GridGeometry<T>,
        layers: LayerSpec<T>,
        classifier: ClassifierParams<T>,
        fn_params: FnParams<T>,
        inflation: InflationSettings,
        blind_radius: T,
    ) -> Result<Self> {
        inflation.validate()?;
        fn_params.validate()?;
        Ok(Self {
            tracker: FnTracker::new(geometry, fn_params),
            square: InflationKernel::square(inflation.kernel_size)?,
            blind_radius,
            near_solid: Vec::new(),
            geometry,
            layers,
            classifier,
            fn_params,
            inflation,
        })
    }

    pub fn from_config(config: &EpisodeConfig) -> Result<Self> {
        let g = config.geometry()?;
        Self::new(
            GridGeometry::new(g.n(), T::of(g.resolution()))?,
            LayerSpec::new(
                T::of(config.layers.height),
                T::of(config.layers.epsilon),
                T::of(config.layers.band_half_width),
            )?,
            ClassifierParams::new(
                T::of(config.classifier()?.gamma),
                T::of(config.lidar.max_intensity),
            )?,
            FnParams {
                ransac_tolerance: T::of(config.fn_tracker.ransac_tolerance),
                max_gap: T::of(config.fn_tracker.max_gap),
                extension: T::of(config.fn_tracker.extension),
                probe_radius: config.fn_tracker.probe_radius,
                check_below: config.fn_tracker.check_below,
                min_cluster: config.fn_tracker.min_cluster,
                ransac_iterations: config.fn_tracker.ransac_iterations,
                min_inliers: config.fn_tracker.min_inliers,
                max_segments: config.fn_tracker.max_segments,
                seed: config.fn_tracker.seed ^ config.seed,
            },
            config.inflation,
            T::of(config.lidar.min_range),
        )
    }

    pub fn geometry(&self) -> &GridGeometry<T> {
        &self.geometry
    }

    pub fn fn_tracker(&self) -> &FnTracker<T> {
        &self.tracker
    }

    /// Kernel for the current goal direction (robot frame).
    pub fn kernel(&self, goal: (T, T)) -> Result<InflationKernel> {
        match self.inflation.mode {
            InflationMode::Uniform => Ok(self.square.clone()),
            InflationMode::Adaptive => {
                let (gx, gy) = if goal.0 == T::zero() && goal.1 == T::zero() {
                    (T::one(), T::zero())
                } else {
                    goal
                };
                build_kernel_with(
                    gx,
                    gy,
                    self.inflation.kernel_size,
                    self.inflation.padding,
                    self.inflation.one_sided,
                )
            }
        }
    }

    /// Solid cells seen recently that have moved into the blind spot are kept
    /// as solid; the sensor cannot confirm or clear them there.
    fn recall_blind_spot(&mut self, classified: &mut ClassifiedMaps<T>, delta: &MotionDelta<T>) {
        let g = self.geometry.resolution();
        let keep = self.blind_radius + T::of(4.0) * g;
        let mut next = Vec::new();
        let mut recalled = std::collections::HashSet::new();
        for &(x, y, value) in &self.near_solid {
            // Positions stay continuous so slow motion is not lost to rounding.
            let (x, y) = delta.apply(x, y);
            if x.hypot(y) >= self.blind_radius {
                continue;
            }
            if let Some(cell) = self.geometry.world_to_cell(x, y) {
                if *classified.tp.get(cell) == T::zero() {
                    classified.fp.set(cell, T::zero());
                    classified.labels.set(cell, ObstacleClass::Tp);
                }
                let v = (*classified.tp.get(cell)).max(value);
                classified.tp.set(cell, v);
                if recalled.insert(cell) {
                    next.push((x, y, value));
                }
            }
        }
        // Observed solid cells near the blind spot are remembered next frame.
        for (cell, &v) in classified.tp.iter_cells() {
            if v > T::zero() {
                let (x, y) = self.geometry.cell_center(cell);
                if x.hypot(y) < keep && !recalled.contains(&cell) {
                    next.push((x, y, v));
                }
            }
        }
        self.near_solid = next;
    }

    /// Runs one frame. `delta` is the robot motion since the previous frame.
    pub fn process(
        &mut self,
        points: &[IntensityPoint<T>],
        delta: &MotionDelta<T>,
        goal: (T, T),
    ) -> Result<Frame<T>> {
        let t0 = Instant::now();
        let map = build_multilayer(points, &self.layers, self.geometry);
        let t1 = Instant::now();
        let mut classified = classify_map(&map, &self.classifier)?;
        self.recall_blind_spot(&mut classified, delta);
        let t2 = Instant::now();
        let evidence = glass_evidence(&map, self.classifier.gamma, &self.fn_params)?;
        let barrier = glass_barrier(&map, Some(&classified.tp), &evidence);
        let fn_mask = self
            .tracker
            .update(&evidence, Some(&barrier), delta)?
            .mask()
            .clone();
        let t3 = Instant::now();
        let kernel = self.kernel(goal)?;
        let inflated = inflate(&classified.tp, &fn_mask, &kernel)?;
        let g = self.geometry.resolution();
        let full_scale =
            T::of(self.inflation.fp_saturation_returns) * self.classifier.gamma / (g * g);
        let plan = assemble_plan(
            &inflated,
            &classified.tp,
            &fn_mask,
            &classified.fp,
            full_scale,
            self.inflation.mode,
        )?;
        let t4 = Instant::now();
        Ok(Frame {
            map,
            classified,
            evidence,
            fn_mask,
            plan,
            timing: FrameTiming {
                build: t1 - t0,
                classify: t2 - t1,
                fn_track: t3 - t2,
                inflate: t4 - t3,
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Collision,
    Frozen,
    Timeout,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Outcome::Success => "success",
            Outcome::Collision => "collision",
            Outcome::Frozen => "frozen",
            Outcome::Timeout => "timeout",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub v: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionInfo {
    pub primitive: String,
    pub material: MaterialKind,
    pub t: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub scene: String,
    pub mode: InflationMode,
    pub seed: u64,
    pub outcome: Outcome,
    pub start: Pose2<f64>,
    pub goal: [f64; 2],
    pub trajectory: Vec<TrajectorySample>,
    pub collision: Option<CollisionInfo>,
    /// Passable primitives whose footprint the robot center entered.
    pub crossed_passable: Vec<String>,
    /// Frames whose selected rollout touched a blocking cell; always 0 for a
    /// sound planner.
    pub admissibility_violations: usize,
    pub recovery_frames: usize,
    #[serde(skip)]
    pub timings: Vec<FrameTiming>,
    /// Per-frame F-scores when enabled in the configuration.
    pub f_scores: Vec<f64>,
}

impl EpisodeResult {
    pub fn path_length(&self) -> f64 {
        self.trajectory
            .windows(2)
            .map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y))
            .sum()
    }

    pub fn straight_distance(&self) -> f64 {
        (self.goal[0] - self.start.x).hypot(self.goal[1] - self.start.y)
    }

    pub fn frames(&self) -> usize {
        self.timings.len()
    }

    /// `t,x,y,yaw,v,omega` with fixed precision, so identical runs produce
    /// identical bytes.
    pub fn trajectory_csv(&self) -> String {
        let mut out = String::from("t,x,y,yaw,v,omega\n");
        for s in &self.trajectory {
            writeln!(
                out,
                "{:.3},{:.6},{:.6},{:.6},{:.6},{:.6}",
                s.t, s.x, s.y, s.yaw, s.v, s.omega
            )
            .expect("writing to a String");
        }
        out
    }
}

/// Read-only view of a frame handed to observers.
pub struct FrameView<'a> {
    pub index: usize,
    pub t: f64,
    pub state: RobotState<f64>,
    /// Goal in the robot frame.
    pub goal_local: (f64, f64),
    /// Heading target the planner scored against, robot frame.
    pub target: (f64, f64),
    pub points: &'a [IntensityPoint<f64>],
    pub frame: &'a Frame<f64>,
    pub decision: &'a Decision<f64>,
    pub scene: &'a Scene,
}

/// Start pose of an episode: the scene start with its configured jitter,
/// drawn from `seed`.
pub fn jittered_start(scene: &Scene, seed: u64) -> Pose2<f64> {
    let j = scene.start_jitter;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_0F57_A127);
    let mut draw = |b: f64| {
        if b > 0.0 {
            rng.random_range(-b..=b)
        } else {
            0.0
        }
    };
    let (dx, dy, dyaw) = (draw(j.xy), draw(j.xy), draw(j.yaw));
    Pose2::new(
        scene.start.x + dx,
        scene.start.y + dy,
        scene.start.yaw + dyaw,
    )
}

pub fn run_episode(scene: &Scene, config: &EpisodeConfig) -> Result<EpisodeResult> {
    run_episode_observed(scene, config, |_| {})
}

/// [`run_episode`] calling `observer` after every planning step.
pub fn run_episode_observed(
    scene: &Scene,
    config: &EpisodeConfig,
    mut observer: impl FnMut(&FrameView<'_>),
) -> Result<EpisodeResult> {
    config.validate()?;
    let mut lidar = config.lidar.clone();
    lidar.mount_height = config.robot.height;
    lidar.seed = config.seed;
    let mut perception = Perception::<f64>::from_config(config)?;
    let geometry = config.geometry()?;
    let planner = config.planner;
    let start = jittered_start(scene, config.seed);
    let mut state = RobotState::at(start);
    let dt = config.control_dt;
    let frozen_frames = (config.frozen_window / dt).round() as usize;
    let max_frames = (config.time_limit / dt).ceil() as usize;
    let truth_height = config.layers.height;

    let sample = |t: f64, s: &RobotState<f64>| TrajectorySample {
        t,
        x: s.pose.x,
        y: s.pose.y,
        yaw: s.pose.yaw,
        v: s.twist.v,
        omega: s.twist.omega,
    };
    let mut result = EpisodeResult {
        scene: scene.name.clone(),
        mode: config.inflation.mode,
        seed: config.seed,
        outcome: Outcome::Timeout,
        start,
        goal: scene.goal,
        trajectory: vec![sample(0.0, &state)],
        collision: None,
        crossed_passable: Vec::new(),
        admissibility_violations: 0,
        recovery_frames: 0,
        timings: Vec::new(),
        f_scores: Vec::new(),
    };
    if let Some(p) = scene.collision(
        state.pose.x,
        state.pose.y,
        config.robot.radius,
        config.robot.height,
    ) {
        result.outcome = Outcome::Collision;
        result.collision = Some(CollisionInfo {
            primitive: p.name.clone(),
            material: p.material.kind,
            t: 0.0,
        });
        return Ok(result);
    }

    let mut prev_pose = state.pose;
    // Previous grid route, world frame.
    let mut route_world: Vec<(f64, f64)> = Vec::new();
    for k in 0..max_frames {
        let t = k as f64 * dt;
        let goal_dist = (scene.goal[0] - state.pose.x).hypot(scene.goal[1] - state.pose.y);
        if goal_dist <= config.goal_tolerance {
            result.outcome = Outcome::Success;
            break;
        }
        if k >= frozen_frames && frozen_frames > 0 {
            let past = &result.trajectory[k - frozen_frames];
            if (state.pose.x - past.x).hypot(state.pose.y - past.y) < config.frozen_distance {
                result.outcome = Outcome::Frozen;
                break;
            }
        }

        let points = cast_scan(&scene.primitives, &state.pose, &lidar, k as u64);
        let delta = MotionDelta::between(&prev_pose, &state.pose);
        let goal_local = state.pose.to_local(scene.goal[0], scene.goal[1]);
        let frame = perception.process(&points, &delta, goal_local)?;
        result.timings.push(frame.timing);

        let clearance = (planner.robot_radius > 0.0)
            .then(|| clearance_mask(&solid_cells(&frame), planner.robot_radius));
        let window = VelocityWindow::around(state.twist, &planner);
        let target = if planner.route_lookahead > 0.0 {
            let prefer: Vec<(f64, f64)> = route_world
                .iter()
                .map(|&(x, y)| state.pose.to_local(x, y))
                .collect();
            match route_target(
                goal_local,
                &frame.plan,
                clearance.as_ref(),
                &prefer,
                &planner,
            ) {
                Some(route) => {
                    route_world = route
                        .path
                        .iter()
                        .map(|&(x, y)| state.pose.to_world(x, y))
                        .collect();
                    route.target
                }
                None => {
                    route_world.clear();
                    goal_local
                }
            }
        } else {
            goal_local
        };
        let decision = plan_step(target, &frame.plan, clearance.as_ref(), &window, &planner);
        match &decision.rollout {
            Some(r) => {
                if r.trace.iter().any(|&c| frame.plan.is_blocking(c)) {
                    result.admissibility_violations += 1;
                }
            }
            None => result.recovery_frames += 1,
        }

        if config.evaluate_f_score {
            let truth_points = truth_scan(&scene.primitives, &state.pose, &lidar);
            let truth = bin_mask(&truth_points, geometry, truth_height);
            // The sensor sees nothing inside its minimum range; score outside it.
            let pred = outside_radius(&frame.plan.solid_mask(), lidar.min_range);
            result
                .f_scores
                .push(f_score(&pred, &outside_radius(&truth, lidar.min_range))?);
        }

        observer(&FrameView {
            index: k,
            t,
            state,
            goal_local,
            target,
            points: &points,
            frame: &frame,
            decision: &decision,
            scene,
        });

        prev_pose = state.pose;
        let Twist { v, omega } = decision.twist;
        state = step_robot(state, v, omega, dt);
        result.trajectory.push(sample(t + dt, &state));

        for p in scene.primitives.iter().filter(|p| p.passable) {
            if p.shape.distance_2d(state.pose.x, state.pose.y) == 0.0
                && !result.crossed_passable.contains(&p.name)
            {
                result.crossed_passable.push(p.name.clone());
            }
        }
        if let Some(p) = scene.collision(
            state.pose.x,
            state.pose.y,
            config.robot.radius,
            config.robot.height,
        ) {
            result.outcome = Outcome::Collision;
            result.collision = Some(CollisionInfo {
                primitive: p.name.clone(),
                material: p.material.kind,
                t: t + dt,
            });
            break;
        }
    }
    if result.outcome == Outcome::Timeout {
        let last = result.trajectory.last().expect("non-empty");
        if (scene.goal[0] - last.x).hypot(scene.goal[1] - last.y) <= config.goal_tolerance {
            result.outcome = Outcome::Success;
        }
    }
    Ok(result)
}

/// Raw solid support of a frame (observed TP plus tracked FN cells).
pub fn solid_cells(frame: &Frame<f64>) -> Mask<f64> {
    let tp = frame.classified.tp.as_slice();
    let data = tp
        .iter()
        .zip(frame.fn_mask.as_slice())
        .map(|(&v, &f)| v > 0.0 || f)
        .collect();
    Mask::from_vec(*frame.plan.geometry(), data).expect("same geometry")
}

/// Cells containing a point with `|z| <= height`.
pub fn bin_mask(
    points: &[IntensityPoint<f64>],
    geometry: GridGeometry<f64>,
    height: f64,
) -> Mask<f64> {
    let mut mask = Mask::filled(geometry, false);
    for p in points.iter().filter(|p| p.z.abs() <= height) {
        if let Some(cell) = geometry.world_to_cell(p.x, p.y) {
            mask.set(cell, true);
        }
    }
    mask
}

/// Clears cells whose centre lies within `radius` of the grid origin.
pub fn outside_radius(mask: &Mask<f64>, radius: f64) -> Mask<f64> {
    let g = *mask.geometry();
    let mut out = mask.clone();
    for (cell, v) in mask.iter_cells() {
        let (x, y) = g.cell_center(cell);
        if *v && x.hypot(y) < radius {
            out.set(cell, false);
        }
    }
    out
}

/// Seeds `seed, seed + 1, ...` for the episodes of a batch.
pub fn run_batch(
    scene: &Scene,
    config: &EpisodeConfig,
    episodes: usize,
) -> Result<Vec<EpisodeResult>> {
    (0..episodes)
        .map(|i| {
            let mut c = config.clone();
            c.seed = config.seed.wrapping_add(i as u64);
            run_episode(scene, &c)
        })
        .collect()
}

/// Layer occupancy summary used by diagnostics.
pub fn occupied_cells(map: &MultiLayerMap<f64>, role: LayerRole) -> usize {
    map.layer(role).map_or(0, |l| l.occupied_count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RobotProfile;
    use crate::sim::material::Material;
    use crate::sim::scene::{Primitive, Shape};

    fn open_scene() -> Scene {
        Scene::empty(
            "open",
            RobotProfile::turtlebot(),
            Pose2::new(0.0, 0.0, 0.0),
            [6.0, 0.0],
        )
    }

    fn quick(robot: RobotProfile) -> EpisodeConfig {
        let mut c = EpisodeConfig::for_robot(robot);
        c.lidar.azimuth_resolution_deg = 1.0;
        c
    }

    #[test]
    fn open_scene_runs_straight() {
        let r = run_episode(&open_scene(), &quick(RobotProfile::turtlebot())).unwrap();
        assert_eq!(r.outcome, Outcome::Success);
        let ratio = r.path_length() / r.straight_distance();
        assert!((0.94..=1.05).contains(&ratio), "{ratio}");
        assert_eq!(r.admissibility_violations, 0);
    }

    #[test]
    fn blocked_goal_ends_in_failure_without_collision() {
        let mut scene = open_scene();
        scene.primitives.push(Primitive::new(
            "box",
            Shape::Box {
                center: [6.0, 0.0],
                size: [3.0, 3.0],
                z: [0.0, 2.0],
            },
            Material::concrete(),
            false,
        ));
        scene.primitives.push(Primitive::new(
            "ring",
            Shape::Cylinder {
                center: [0.0, 0.0],
                radius: 2.0,
                z: [2.5, 3.0],
            },
            Material::concrete(),
            false,
        ));
        let mut c = quick(RobotProfile::turtlebot());
        c.time_limit = 20.0;
        let r = run_episode(&scene, &c).unwrap();
        assert_ne!(r.outcome, Outcome::Success);
        assert_ne!(r.outcome, Outcome::Collision);
    }

    #[test]
    fn trajectories_are_deterministic() {
        let mut scene = open_scene();
        scene.start_jitter.xy = 0.2;
        scene.primitives.push(Primitive::new(
            "grass",
            Shape::Box {
                center: [3.0, 0.0],
                size: [1.0, 1.0],
                z: [0.0, 0.4],
            },
            Material::grass(),
            true,
        ));
        let c = quick(RobotProfile::turtlebot());
        let a = run_episode(&scene, &c).unwrap();
        let b = run_episode(&scene, &c).unwrap();
        assert_eq!(a.trajectory_csv(), b.trajectory_csv());
    }

    #[test]
    fn jitter_is_bounded_and_seeded() {
        let mut scene = open_scene();
        scene.start_jitter.xy = 0.1;
        scene.start_jitter.yaw = 0.05;
        for seed in 0..50 {
            let p = jittered_start(&scene, seed);
            assert!(p.x.abs() <= 0.1 && p.y.abs() <= 0.1 && p.yaw.abs() <= 0.05);
            assert_eq!(p, jittered_start(&scene, seed));
        }
        assert_ne!(jittered_start(&scene, 1), jittered_start(&scene, 2));
    }
}
