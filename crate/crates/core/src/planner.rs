//! Dynamic-window local planner over the robot-centric plan map.
//!
//! Candidates `(v, omega)` from the acceleration-limited window are rolled out
//! from the robot's current pose (the grid center) for a fixed horizon. A
//! rollout's obstacle cost is the sum of plan-map costs over the cells it
//! sweeps; touching a blocking cell, or bringing the robot's footprint onto a
//! solid cell, makes it inadmissible.
//!
//! The score is `w_obs * cost + w_head * heading_error / pi
//! + w_vel * (v_max - v) / v_max`: the heading and speed terms are scaled to
//! `[0, 1]` so the weights compare like quantities across robot profiles.

use serde::{Deserialize, Serialize};

use crate::config::{positive, RobotProfile};
use crate::error::{invalid, Result};
use crate::geometry::{normalize_angle, Cell, GridGeometry, Pose2, Twist};
use crate::grid::Mask;
use crate::inflation::{PlanMap, C_BLOCK, C_FP_MAX};
use crate::kinematics::step_pose;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerParams<T = f64> {
    /// Rollout horizon, seconds.
    pub horizon: T,
    /// Rollout integration step, seconds.
    pub dt_sim: T,
    pub n_v: usize,
    pub n_omega: usize,
    pub w_obs: T,
    pub w_head: T,
    pub w_vel: T,
    pub v_max: T,
    pub omega_max: T,
    pub accel_v: T,
    pub accel_omega: T,
    /// Period over which the acceleration limits bound the window, seconds.
    pub control_dt: T,
    /// Footprint radius for the clearance check, meters; 0 disables it.
    pub robot_radius: T,
    /// Scores within this relative distance of the best count as ties.
    pub tie_tolerance: T,
    /// Turn rate used when nothing is admissible.
    pub recovery_omega: T,
    /// Distance along the grid route to the heading target, meters; 0 aims
    /// straight at the goal.
    pub route_lookahead: T,
    /// Extra route cost per meter through a passable cell of maximum cost.
    pub route_fp_weight: T,
    /// Fractional discount on route cost near the previous frame's route, so
    /// near-equal alternatives do not alternate.
    pub route_hysteresis: T,
}

impl<T: Real> PlannerParams<T> {
    pub fn for_robot(robot: &RobotProfile) -> Self {
        Self {
            horizon: T::of(2.0),
            dt_sim: T::of(0.1),
            n_v: 11,
            n_omega: 21,
            w_obs: T::of(0.002),
            w_head: T::of(3.0),
            w_vel: T::one(),
            v_max: T::of(robot.v_max),
            omega_max: T::of(robot.omega_max),
            accel_v: T::of(robot.accel_v),
            accel_omega: T::of(robot.accel_omega),
            control_dt: T::of(0.1),
            robot_radius: T::of(robot.radius),
            tie_tolerance: T::of(1e-9),
            recovery_omega: T::of(0.5 * robot.omega_max),
            route_lookahead: T::of(1.5),
            route_fp_weight: T::of(2.0),
            route_hysteresis: T::of(0.3),
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive(&[
            ("planner.horizon", self.horizon.as_f64()),
            ("planner.dt_sim", self.dt_sim.as_f64()),
            ("planner.v_max", self.v_max.as_f64()),
            ("planner.omega_max", self.omega_max.as_f64()),
            ("planner.accel_v", self.accel_v.as_f64()),
            ("planner.accel_omega", self.accel_omega.as_f64()),
            ("planner.control_dt", self.control_dt.as_f64()),
            ("planner.recovery_omega", self.recovery_omega.as_f64()),
        ])?;
        if !(self.route_hysteresis >= T::zero() && self.route_hysteresis < T::one()) {
            return Err(invalid("planner.route_hysteresis", "must lie in [0, 1)"));
        }
        if self.n_v < 2 || self.n_omega < 2 {
            return Err(invalid(
                "planner.n_v/n_omega",
                "need at least 2 samples per axis",
            ));
        }
        for (name, w) in [
            ("planner.w_obs", self.w_obs),
            ("planner.w_head", self.w_head),
            ("planner.w_vel", self.w_vel),
            ("planner.tie_tolerance", self.tie_tolerance),
            ("planner.robot_radius", self.robot_radius),
            ("planner.route_lookahead", self.route_lookahead),
            ("planner.route_fp_weight", self.route_fp_weight),
        ] {
            if !(w >= T::zero() && w.is_finite()) {
                return Err(invalid(name, "must be non-negative and finite"));
            }
        }
        Ok(())
    }

    /// Same parameters with all three score weights multiplied by `k`.
    pub fn with_scaled_weights(mut self, k: T) -> Self {
        self.w_obs *= k;
        self.w_head *= k;
        self.w_vel *= k;
        self
    }
}

/// Reachable velocities for the next control period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityWindow<T = f64> {
    pub v: (T, T),
    pub omega: (T, T),
    pub n_v: usize,
    pub n_omega: usize,
}

impl<T: Real> VelocityWindow<T> {
    pub fn around(current: Twist<T>, params: &PlannerParams<T>) -> Self {
        let dv = params.accel_v * params.control_dt;
        let dw = params.accel_omega * params.control_dt;
        let v_lo = (current.v - dv).max(T::zero()).min(params.v_max);
        let v_hi = (current.v + dv).min(params.v_max).max(v_lo);
        let w_lo = (current.omega - dw)
            .max(-params.omega_max)
            .min(params.omega_max);
        let w_hi = (current.omega + dw).min(params.omega_max).max(w_lo);
        Self {
            v: (v_lo, v_hi),
            omega: (w_lo, w_hi),
            n_v: params.n_v,
            n_omega: params.n_omega,
        }
    }

    /// Grid samples including both ends of each range, plus `(0, 0)`.
    pub fn samples(&self) -> Vec<Twist<T>> {
        let lin = |(lo, hi): (T, T), k: usize| -> Vec<T> {
            if k < 2 || hi == lo {
                return vec![lo];
            }
            (0..k)
                .map(|i| {
                    if i + 1 == k {
                        hi
                    } else {
                        lo + (hi - lo) * T::of(i as f64) / T::of((k - 1) as f64)
                    }
                })
                .collect()
        };
        let vs = lin(self.v, self.n_v);
        let ws = lin(self.omega, self.n_omega);
        let mut out = Vec::with_capacity(vs.len() * ws.len() + 1);
        for &v in &vs {
            for &w in &ws {
                out.push(Twist::new(v, w));
            }
        }
        if !out.iter().any(|t| t.v == T::zero() && t.omega == T::zero()) {
            out.push(Twist::new(T::zero(), T::zero()));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout<T = f64> {
    pub twist: Twist<T>,
    /// Poses after each integration step, robot frame.
    pub poses: Vec<Pose2<T>>,
    /// Swept cells in order, without the starting cell and without repeats of
    /// the previous cell.
    pub trace: Vec<Cell>,
}

impl<T: Real> Rollout<T> {
    pub fn simulate(twist: Twist<T>, geometry: &GridGeometry<T>, horizon: T, dt_sim: T) -> Self {
        let steps = (horizon / dt_sim).round().to_usize().unwrap_or(0).max(1);
        let half_cell = geometry.resolution() * T::of(0.5);
        let start = geometry.center_cell();
        let mut poses = Vec::with_capacity(steps);
        let mut trace: Vec<Cell> = Vec::new();
        let mut last = start;
        let mut pose = Pose2::default();
        for _ in 0..steps {
            let next = step_pose(pose, twist.v, twist.omega, dt_sim);
            // Sample the chord densely enough that consecutive cells touch.
            let chord = (next.x - pose.x).hypot(next.y - pose.y);
            let k = (chord / half_cell).ceil().to_usize().unwrap_or(0).max(1);
            for j in 1..=k {
                let t = T::of(j as f64) / T::of(k as f64);
                let x = pose.x + (next.x - pose.x) * t;
                let y = pose.y + (next.y - pose.y) * t;
                if let Some(cell) = geometry.world_to_cell(x, y) {
                    if cell != last && cell != start {
                        trace.push(cell);
                    }
                    last = cell;
                }
            }
            poses.push(next);
            pose = next;
        }
        Self {
            twist,
            poses,
            trace,
        }
    }

    pub fn endpoint(&self) -> Pose2<T> {
        self.poses.last().copied().unwrap_or_default()
    }
}

/// Sum of plan costs along the trace, `None` when a blocking cell is touched.
pub fn obstacle_cost<T: Real>(rollout: &Rollout<T>, plan: &PlanMap<T>) -> Option<T> {
    let mut sum = T::zero();
    for &cell in &rollout.trace {
        let c = *plan.cost.get(cell);
        if c == C_BLOCK {
            return None;
        }
        sum += T::of(f64::from(c));
    }
    Some(sum)
}

/// Cells whose center lies within `radius` of a set cell of `solid`, i.e. the
/// positions where a disc robot would overlap a solid cell.
pub fn clearance_mask<T: Real>(solid: &Mask<T>, radius: T) -> Mask<T> {
    let geometry = *solid.geometry();
    let g = geometry.resolution().as_f64();
    let r = radius.as_f64();
    let reach = (r / g).ceil() as i64;
    // Distance from a point to a cell square is at most r when the offset in
    // cells, shrunk by half a cell per axis, is within r / g.
    let mut offsets = Vec::new();
    for dr in -reach..=reach {
        for dc in -reach..=reach {
            let ex = ((dr.abs() as f64) - 0.5).max(0.0);
            let ey = ((dc.abs() as f64) - 0.5).max(0.0);
            if ex.hypot(ey) * g < r {
                offsets.push((dr, dc));
            }
        }
    }
    let n = geometry.n() as i64;
    let mut out = vec![false; (n * n) as usize];
    for cell in solid.set_cells() {
        for &(dr, dc) in &offsets {
            let (rr, cc) = (cell.row as i64 + dr, cell.col as i64 + dc);
            if rr >= 0 && rr < n && cc >= 0 && cc < n {
                out[(rr * n + cc) as usize] = true;
            }
        }
    }
    Mask::from_vec(geometry, out).expect("same geometry")
}

/// Heading error at the rollout end relative to the bearing to the goal.
pub fn heading_error<T: Real>(end: &Pose2<T>, goal: (T, T)) -> T {
    let bearing = (goal.1 - end.y).atan2(goal.0 - end.x);
    normalize_angle(bearing - end.yaw).abs()
}

/// Grid route towards the goal and the heading target taken from it.
#[derive(Debug, Clone, PartialEq)]
pub struct Route<T = f64> {
    pub target: (T, T),
    /// Cell centres from the robot to the end of the route, robot frame.
    pub path: Vec<(T, T)>,
}

/// Heading target for the rollout scoring: the farthest cell in straight view
/// within `route_lookahead` of route cost along the cheapest 8-connected
/// route through the plan map towards `goal`.
///
/// Blocking cells and `clearance` cells are impassable except within the
/// robot's own footprint, passable cells cost extra, and unobserved cells are
/// free. Cells next to `prefer` (the previous route, robot frame) are
/// discounted by `route_hysteresis`. When the goal is off the map or
/// unreachable the route ends at the reachable cell closest to it. `None`
/// means no progress is possible from here.
pub fn route_target<T: Real>(
    goal: (T, T),
    plan: &PlanMap<T>,
    clearance: Option<&Mask<T>>,
    prefer: &[(T, T)],
    params: &PlannerParams<T>,
) -> Option<Route<T>> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let geometry = plan.geometry();
    let n = geometry.n();
    let g = geometry.resolution().as_f64();
    let (gx, gy) = (goal.0.as_f64(), goal.1.as_f64());
    let fp_weight = params.route_fp_weight.as_f64();
    let footprint = params.robot_radius.as_f64();
    let start = geometry.center_cell();
    let idx = |c: Cell| c.row * n + c.col;
    let center = |c: Cell| {
        let (x, y) = geometry.cell_center(c);
        (x.as_f64(), y.as_f64())
    };
    let mut open = vec![false; n * n];
    for (cell, o) in plan.class.iter_cells().map(|(c, _)| c).zip(open.iter_mut()) {
        let (x, y) = center(cell);
        *o = x.hypot(y) <= footprint
            || (!plan.is_blocking(cell) && !clearance.is_some_and(|m| *m.get(cell)));
    }
    let mut penalty: Vec<f64> = plan
        .cost
        .as_slice()
        .iter()
        .map(|&c| 1.0 + fp_weight * f64::from(c) / f64::from(C_FP_MAX))
        .collect();
    let keep = 1.0 - params.route_hysteresis.as_f64();
    let mut preferred = vec![false; n * n];
    for &(x, y) in prefer {
        let Some(c) = geometry.world_to_cell(x, y) else {
            continue;
        };
        for r in c.row.saturating_sub(1)..=(c.row + 1).min(n - 1) {
            for cc in c.col.saturating_sub(1)..=(c.col + 1).min(n - 1) {
                let i = r * n + cc;
                if !preferred[i] {
                    preferred[i] = true;
                    penalty[i] *= keep;
                }
            }
        }
    }

    // A* towards the goal clamped onto the map; if that cell is unreachable
    // the search exhausts and the closest reachable cell is used instead.
    let lim = geometry.half_extent().as_f64() - 0.5 * g;
    let aim = geometry
        .world_to_cell(T::of(gx.clamp(-lim, lim)), T::of(gy.clamp(-lim, lim)))
        .expect("clamped into the grid");
    let octile = |i: usize| {
        let dr = (i / n).abs_diff(aim.row) as f64;
        let dc = (i % n).abs_diff(aim.col) as f64;
        keep * g * (dr.max(dc) + (std::f64::consts::SQRT_2 - 1.0) * dr.min(dc))
    };
    let mut dist = vec![f64::INFINITY; n * n];
    let mut parent = vec![usize::MAX; n * n];
    let mut heap = BinaryHeap::new();
    dist[idx(start)] = 0.0;
    // Non-negative floats order like their bit patterns.
    heap.push(Reverse((octile(idx(start)).to_bits(), idx(start))));
    // (distance to goal, route length, cell) of the closest reachable cell.
    let mut best = (f64::INFINITY, 0.0, idx(start));
    let mut done = vec![false; n * n];
    while let Some(Reverse((_, i))) = heap.pop() {
        if done[i] {
            continue;
        }
        done[i] = true;
        let d = dist[i];
        let (x, y) = center(Cell::new(i / n, i % n));
        let h = (gx - x).hypot(gy - y);
        if h < best.0 - 1e-9 || (h <= best.0 + 1e-9 && d < best.1) {
            best = (h, d, i);
        }
        if i == idx(aim) {
            best = (h, d, i);
            break;
        }
        let (row, col) = ((i / n) as i64, (i % n) as i64);
        for (dr, dc) in [
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ] {
            let (r, c) = (row + dr, col + dc);
            if r < 0 || c < 0 || r >= n as i64 || c >= n as i64 {
                continue;
            }
            let j = r as usize * n + c as usize;
            if !open[j] || done[j] {
                continue;
            }
            let step = if dr != 0 && dc != 0 {
                std::f64::consts::SQRT_2 * g
            } else {
                g
            };
            let nd = d + step * penalty[j];
            if nd < dist[j] {
                dist[j] = nd;
                parent[j] = i;
                heap.push(Reverse(((nd + octile(j)).to_bits(), j)));
            }
        }
    }

    let end = best.2;
    if end == idx(start) {
        return None;
    }
    let mut path = vec![end];
    while let Some(&last) = path.last() {
        match parent[last] {
            usize::MAX => break,
            p => path.push(p),
        }
    }
    path.reverse();
    // Pursue the farthest route cell within the lookahead that is in straight
    // view, so the heading term never pulls across an obstacle.
    let lookahead = params.route_lookahead.as_f64();
    let visible = |x: f64, y: f64| {
        let k = ((x.hypot(y) / (0.5 * g)).ceil() as usize).max(1);
        (1..=k).all(|j| {
            let t = j as f64 / k as f64;
            geometry
                .world_to_cell(T::of(x * t), T::of(y * t))
                .is_none_or(|c| open[idx(c)])
        })
    };
    let mut target = None;
    for &i in &path[1..] {
        let (x, y) = center(Cell::new(i / n, i % n));
        if target.is_some() && (dist[i] > lookahead || !visible(x, y)) {
            break;
        }
        target = Some((x, y));
    }
    let (mut x, mut y) = target?;
    let path = path
        .iter()
        .map(|&i| {
            let (x, y) = center(Cell::new(i / n, i % n));
            (T::of(x), T::of(y))
        })
        .collect();
    let end_cell = Cell::new(end / n, end % n);
    if geometry.world_to_cell(goal.0, goal.1) == Some(end_cell) && (x, y) == center(end_cell) {
        return Some(Route { target: goal, path });
    }
    // Only the direction matters; a close target would make the heading
    // term favor turning on the spot over moving.
    let r = x.hypot(y);
    if r < lookahead && r > 0.0 {
        (x, y) = (x * lookahead / r, y * lookahead / r);
    }
    Some(Route {
        target: (T::of(x), T::of(y)),
        path,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision<T = f64> {
    pub twist: Twist<T>,
    /// The selected rollout, `None` when recovering.
    pub rollout: Option<Rollout<T>>,
    pub score: Option<T>,
    pub admissible: usize,
}

impl<T: Real> Decision<T> {
    pub fn is_recovery(&self) -> bool {
        self.rollout.is_none()
    }
}

/// Picks the best admissible candidate for a goal given in the robot frame.
///
/// `clearance` marks cells where the robot center must not go; pass `None` to
/// rely on the plan map alone.
pub fn plan_step<T: Real>(
    goal: (T, T),
    plan: &PlanMap<T>,
    clearance: Option<&Mask<T>>,
    window: &VelocityWindow<T>,
    params: &PlannerParams<T>,
) -> Decision<T> {
    let geometry = plan.geometry();
    let mut scored: Vec<(T, Rollout<T>)> = Vec::new();
    for twist in window.samples() {
        let rollout = Rollout::simulate(twist, geometry, params.horizon, params.dt_sim);
        if let Some(mask) = clearance {
            if rollout.trace.iter().any(|&c| *mask.get(c)) {
                continue;
            }
        }
        let Some(obs) = obstacle_cost(&rollout, plan) else {
            continue;
        };
        let score = params.w_obs * obs
            + params.w_head * heading_error(&rollout.endpoint(), goal) / T::PI()
            + params.w_vel * (params.v_max - twist.v) / params.v_max;
        scored.push((score, rollout));
    }
    // Candidates that never leave the current cell (turning on the spot,
    // creeping) only count when some candidate that does is admissible too.
    if scored.iter().all(|(_, r)| r.trace.is_empty()) {
        scored.clear();
    }
    let admissible = scored.len();
    let Some(best) = scored.iter().map(|(s, _)| *s).reduce(T::min) else {
        let bearing = goal.1.atan2(goal.0);
        let omega = if bearing < T::zero() {
            -params.recovery_omega
        } else {
            params.recovery_omega
        };
        return Decision {
            twist: Twist::new(T::zero(), omega),
            rollout: None,
            score: None,
            admissible,
        };
    };
    let cutoff = best + params.tie_tolerance * best.abs();
    let (score, rollout) = scored
        .into_iter()
        .filter(|(s, _)| *s <= cutoff)
        .min_by(|(_, a), (_, b)| {
            let (ta, tb) = (a.twist, b.twist);
            tb.v.partial_cmp(&ta.v)
                .expect("finite")
                .then(ta.omega.abs().partial_cmp(&tb.omega.abs()).expect("finite"))
                .then(ta.omega.partial_cmp(&tb.omega).expect("finite"))
        })
        .expect("non-empty");
    Decision {
        twist: rollout.twist,
        rollout: Some(rollout),
        score: Some(score),
        admissible,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inflation::{InflationMode, PlanClass};

    fn geom() -> GridGeometry<f64> {
        GridGeometry::new(200, 0.1).unwrap()
    }

    fn params() -> PlannerParams<f64> {
        PlannerParams::for_robot(&RobotProfile::turtlebot())
    }

    fn cruising() -> Twist<f64> {
        Twist::new(0.5, 0.0)
    }

    #[test]
    fn window_samples_include_bounds_and_zero() {
        let p = params();
        let w = VelocityWindow::around(Twist::new(0.3, 0.2), &p);
        assert!((w.v.0 - 0.2).abs() < 1e-12 && (w.v.1 - 0.4).abs() < 1e-12);
        assert!((w.omega.0 + 0.1).abs() < 1e-12 && (w.omega.1 - 0.5).abs() < 1e-12);
        let s = w.samples();
        assert_eq!(s.len(), 11 * 21 + 1);
        assert!(s.contains(&Twist::new(0.0, 0.0)));
        assert!(s.contains(&Twist::new(w.v.1, w.omega.0)));
    }

    #[test]
    fn traces_are_connected_and_skip_start() {
        let g = geom();
        for &(v, w) in &[(0.5, 0.0), (0.5, 1.5), (0.3, -0.7), (0.1, 0.05)] {
            let r = Rollout::simulate(Twist::new(v, w), &g, 2.0, 0.1);
            assert!(
                !r.trace.contains(&g.center_cell()) || r.trace.first() != Some(&g.center_cell())
            );
            let mut prev = g.center_cell();
            for &c in &r.trace {
                assert!(prev.chebyshev(c) <= 1, "gap between {prev:?} and {c:?}");
                prev = c;
            }
        }
        assert!(Rollout::simulate(Twist::new(0.0, 1.0), &g, 2.0, 0.1)
            .trace
            .is_empty());
    }

    #[test]
    fn free_trace_costs_nothing() {
        let plan = PlanMap::empty(geom(), InflationMode::Adaptive);
        let r = Rollout::simulate(cruising(), &geom(), 2.0, 0.1);
        assert_eq!(obstacle_cost(&r, &plan), Some(0.0));
    }

    #[test]
    fn fp_cells_sum_and_blocking_rejects() {
        let mut plan = PlanMap::empty(geom(), InflationMode::Adaptive);
        let r = Rollout::simulate(cruising(), &geom(), 2.0, 0.1);
        for &c in r.trace.iter().take(5) {
            plan.cost.set(c, 40);
            plan.class.set(c, PlanClass::Fp);
        }
        assert_eq!(obstacle_cost(&r, &plan), Some(200.0));
        plan.cost.set(r.trace[7], C_BLOCK);
        assert_eq!(obstacle_cost(&r, &plan), None);
    }

    #[test]
    fn open_map_goes_full_speed() {
        let p = params();
        let plan = PlanMap::empty(geom(), InflationMode::Adaptive);
        let w = VelocityWindow::around(cruising(), &p);
        let d = plan_step((5.0, 0.0), &plan, None, &w, &p);
        assert_eq!(d.twist, Twist::new(0.5, 0.0));
    }

    fn wall(cols: std::ops::Range<usize>) -> PlanMap<f64> {
        let mut plan = PlanMap::empty(geom(), InflationMode::Adaptive);
        for c in cols {
            for r in 107..109 {
                plan.cost.set(Cell::new(r, c), C_BLOCK);
                plan.class.set(Cell::new(r, c), PlanClass::Tp);
            }
        }
        plan
    }

    #[test]
    fn wall_ahead_turns_toward_opening() {
        let p = params();
        let w = VelocityWindow::around(Twist::new(0.5, 0.0), &p);
        // Wall 0.7 m ahead reaching from far right to just left of center:
        // the opening is on the +y side.
        let d = plan_step((5.0, 0.0), &wall(40..101), None, &w, &p);
        assert!(!d.is_recovery());
        assert!(d.twist.omega > 0.0, "{:?}", d.twist);
        // Mirrored wall, mirrored choice.
        let d = plan_step((5.0, 0.0), &wall(100..160), None, &w, &p);
        assert!(!d.is_recovery());
        assert!(d.twist.omega < 0.0, "{:?}", d.twist);
    }

    #[test]
    fn boxed_in_recovers_toward_goal() {
        let p = params();
        let mut plan = PlanMap::empty(geom(), InflationMode::Adaptive);
        for c in plan.cost.as_mut_slice() {
            *c = C_BLOCK;
        }
        let mut clear = Mask::filled(geom(), true);
        clear.set(Cell::new(100, 100), false);
        let w = VelocityWindow::around(Twist::default(), &p);
        let d = plan_step((1.0, -2.0), &plan, Some(&clear), &w, &p);
        assert!(d.is_recovery());
        assert_eq!(d.twist, Twist::new(0.0, -p.recovery_omega));
    }

    #[test]
    fn clearance_disc() {
        let mut solid = Mask::filled(geom(), false);
        solid.set(Cell::new(100, 100), true);
        let m = clearance_mask(&solid, 0.2);
        // Face neighbours up to 2 cells, diagonal (1,1) and (2,1) but not (2,2).
        assert!(*m.get(Cell::new(102, 100)));
        assert!(*m.get(Cell::new(101, 101)));
        assert!(*m.get(Cell::new(102, 101)));
        assert!(!*m.get(Cell::new(102, 102)));
        assert!(!*m.get(Cell::new(103, 100)));
    }

    #[test]
    fn route_on_empty_map_points_at_goal() {
        let plan = PlanMap::empty(geom(), InflationMode::Adaptive);
        let t = route_target((5.0, 0.0), &plan, None, &[], &params())
            .unwrap()
            .target;
        assert!((t.0 - 1.55).abs() < 0.11 && t.1.abs() < 0.11, "{t:?}");
    }
}
