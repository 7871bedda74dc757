//! Transparent-obstacle (false negative) tracking.
//!
//! Glass shows up as a thin band of weak returns in the ground layer with
//! nothing directly beneath it, because only near-horizontal rays reflect off
//! it. Those cells are kept as evidence, carried across frames under the
//! robot's motion, and extended into wall segments by a line fit.
//!
//! Entries keep continuous robot-frame positions, so repeated motion
//! compensation does not accumulate re-binning drift.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{Cell, GridGeometry, Pose2};
use crate::grid::{Grid, Mask};
use crate::map_builder::{LayerGrid, LayerRole, MultiLayerMap};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FnParams<T = f64> {
    /// Chebyshev radius, in cells, within which a return in a lower layer
    /// cancels a ground-layer cell.
    pub probe_radius: usize,
    /// Also cancel ground cells that have returns in the below layer nearby.
    pub check_below: bool,
    /// Evidence clusters (8-connected) with fewer cells are dropped as noise.
    pub min_cluster: usize,
    /// Line-fit inlier distance, in cells.
    pub ransac_tolerance: T,
    pub ransac_iterations: usize,
    pub min_inliers: usize,
    /// Inliers farther apart than this along a line start a new segment, meters.
    pub max_gap: T,
    /// Length added to each end of a fitted segment, meters.
    pub extension: T,
    pub max_segments: usize,
    pub seed: u64,
}

impl<T: Real> Default for FnParams<T> {
    fn default() -> Self {
        Self {
            probe_radius: 1,
            check_below: true,
            min_cluster: 3,
            ransac_tolerance: T::one(),
            ransac_iterations: 64,
            min_inliers: 3,
            max_gap: T::of(0.5),
            extension: T::one(),
            max_segments: 8,
            seed: 0,
        }
    }
}

impl<T: Real> FnParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.ransac_tolerance > T::zero()) {
            return Err(invalid("fn_tracker.ransac_tolerance", "must be positive"));
        }
        if self.min_inliers < 2 {
            return Err(invalid("fn_tracker.min_inliers", "must be at least 2"));
        }
        if !(self.max_gap > T::zero()) {
            return Err(invalid("fn_tracker.max_gap", "must be positive"));
        }
        if !(self.extension >= T::zero()) {
            return Err(invalid("fn_tracker.extension", "must be non-negative"));
        }
        Ok(())
    }
}

/// Cells with low-intensity ground returns and no returns in the probe layer
/// within `probe_radius` cells.
pub fn glass_difference<T: Real>(
    ground: &LayerGrid<T>,
    probe: &LayerGrid<T>,
    gamma: T,
    probe_radius: usize,
) -> Result<Mask<T>> {
    glass_difference_with(ground, &[probe], gamma, probe_radius)
}

/// [`glass_difference`] on a multi-layer map, optionally also cancelling
/// against the below layer.
pub fn glass_evidence<T: Real>(
    map: &MultiLayerMap<T>,
    gamma: T,
    params: &FnParams<T>,
) -> Result<Mask<T>> {
    let layer = |role| {
        map.layer(role)
            .ok_or_else(|| Error::InvalidLayerSpec(format!("map has no {role:?} layer")))
    };
    let ground = layer(LayerRole::Ground)?;
    let probe = layer(LayerRole::GlassProbe)?;
    let raw = if params.check_below {
        let below = layer(LayerRole::Below)?;
        glass_difference_with(ground, &[probe, below], gamma, params.probe_radius)?
    } else {
        glass_difference_with(ground, &[probe], gamma, params.probe_radius)?
    };
    Ok(drop_small_clusters(&raw, params.min_cluster))
}

/// Clears 8-connected components of `mask` with fewer than `min_size` cells.
pub fn drop_small_clusters<T: Real>(mask: &Mask<T>, min_size: usize) -> Mask<T> {
    let mut out = mask.clone();
    if min_size <= 1 {
        return out;
    }
    let n = mask.geometry().n();
    let cells = mask.as_slice();
    let mut seen = vec![false; cells.len()];
    let mut component = Vec::new();
    for start in 0..cells.len() {
        if !cells[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        component.clear();
        component.push(start);
        let mut head = 0;
        while head < component.len() {
            let i = component[head];
            head += 1;
            let (r, c) = (i / n, i % n);
            for rr in r.saturating_sub(1)..=(r + 1).min(n - 1) {
                for cc in c.saturating_sub(1)..=(c + 1).min(n - 1) {
                    let j = rr * n + cc;
                    if cells[j] && !seen[j] {
                        seen[j] = true;
                        component.push(j);
                    }
                }
            }
        }
        if component.len() < min_size {
            for &i in &component {
                out.as_mut_slice()[i] = false;
            }
        }
    }
    out
}

/// Cells with returns in the ground or probe layer, or with solid cost in
/// `solid`, that are not glass evidence: something non-transparent is
/// there. Grown by one cell,
/// since returns land on the near face of a body while the fitted glass line
/// may run through its unseen interior.
pub fn glass_barrier<T: Real>(
    map: &MultiLayerMap<T>,
    solid: Option<&Grid<T, T>>,
    evidence: &Mask<T>,
) -> Mask<T> {
    let geometry = *evidence.geometry();
    let n = geometry.n();
    let layers: Vec<_> = [LayerRole::Ground, LayerRole::GlassProbe]
        .into_iter()
        .filter_map(|r| map.layer(r))
        .collect();
    let seen: Vec<bool> = evidence
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            !e && (layers.iter().any(|l| l.is_occupied_at(i))
                || solid.is_some_and(|s| s.as_slice()[i] > T::zero()))
        })
        .collect();
    let mut out = Mask::filled(geometry, false);
    for (i, &s) in seen.iter().enumerate() {
        if !s {
            continue;
        }
        let (r, c) = (i / n, i % n);
        for rr in r.saturating_sub(1)..=(r + 1).min(n - 1) {
            for cc in c.saturating_sub(1)..=(c + 1).min(n - 1) {
                out.set(Cell::new(rr, cc), true);
            }
        }
    }
    out
}

fn glass_difference_with<T: Real>(
    ground: &LayerGrid<T>,
    cancel: &[&LayerGrid<T>],
    gamma: T,
    radius: usize,
) -> Result<Mask<T>> {
    let geometry = *ground.geometry();
    if cancel.iter().any(|l| l.geometry() != &geometry) {
        return Err(Error::GeometryMismatch("glass difference layers"));
    }
    let n = geometry.n();
    // Occupancy of the cancelling layers, dilated by the radius.
    let mut blocked = vec![false; n * n];
    let r = radius as i64;
    for layer in cancel {
        for i in 0..n * n {
            if !layer.is_occupied_at(i) {
                continue;
            }
            let (row, col) = ((i / n) as i64, (i % n) as i64);
            for dr in -r..=r {
                for dc in -r..=r {
                    if geometry.contains(row + dr, col + dc) {
                        blocked[((row + dr) as usize) * n + (col + dc) as usize] = true;
                    }
                }
            }
        }
    }
    let data = (0..n * n)
        .map(|i| ground.is_occupied_at(i) && !blocked[i] && ground.mean_at(i) <= gamma)
        .collect();
    Mask::from_vec(geometry, data)
}

/// Planar rigid motion of the robot frame between two frames, expressed in
/// the earlier frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MotionDelta<T = f64> {
    pub dx: T,
    pub dy: T,
    pub dyaw: T,
}

impl<T: Real> MotionDelta<T> {
    pub fn identity() -> Self {
        Self {
            dx: T::zero(),
            dy: T::zero(),
            dyaw: T::zero(),
        }
    }

    pub fn new(dx: T, dy: T, dyaw: T) -> Self {
        Self { dx, dy, dyaw }
    }

    /// Motion taking the robot frame at `from` to the one at `to`.
    pub fn between(from: &Pose2<T>, to: &Pose2<T>) -> Self {
        let (dx, dy) = from.to_local(to.x, to.y);
        Self {
            dx,
            dy,
            dyaw: crate::geometry::normalize_angle(to.yaw - from.yaw),
        }
    }

    pub fn inverse(&self) -> Self {
        let (s, c) = self.dyaw.sin_cos();
        Self {
            dx: -(c * self.dx + s * self.dy),
            dy: -(-s * self.dx + c * self.dy),
            dyaw: -self.dyaw,
        }
    }

    /// Re-expresses a point of the earlier frame in the later frame.
    pub fn apply(&self, x: T, y: T) -> (T, T) {
        Pose2::new(self.dx, self.dy, self.dyaw).to_local(x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FnSource {
    /// Observed glass returns.
    Evidence,
    /// Filled in by a fitted wall segment.
    Extrapolated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FnEntry<T = f64> {
    /// Robot-frame position, meters.
    pub x: T,
    pub y: T,
    pub source: FnSource,
    /// Frames since last observed or extrapolated.
    pub age: u32,
}

/// Accumulated transparent-obstacle cells in the current robot frame, at most
/// one entry per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct FnMap<T = f64> {
    geometry: GridGeometry<T>,
    entries: Vec<FnEntry<T>>,
    mask: Mask<T>,
    /// Entry index per cell.
    slots: Vec<u32>,
}

impl<T: Real> FnMap<T> {
    pub fn empty(geometry: GridGeometry<T>) -> Self {
        Self {
            geometry,
            entries: Vec::new(),
            mask: Mask::filled(geometry, false),
            slots: vec![u32::MAX; geometry.cell_count()],
        }
    }

    /// Map holding `mask` as fresh evidence at cell centers.
    pub fn from_mask(mask: &Mask<T>) -> Self {
        let mut map = Self::empty(*mask.geometry());
        for cell in mask.set_cells() {
            let (x, y) = map.geometry.cell_center(cell);
            map.insert(x, y, FnSource::Evidence, 0);
        }
        map
    }

    pub fn geometry(&self) -> &GridGeometry<T> {
        &self.geometry
    }

    pub fn entries(&self) -> &[FnEntry<T>] {
        &self.entries
    }

    pub fn mask(&self) -> &Mask<T> {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, cell: Cell) -> bool {
        *self.mask.get(cell)
    }

    /// Adds an entry unless its cell is taken; evidence replaces an
    /// extrapolated entry and refreshes the age of an existing one.
    fn insert(&mut self, x: T, y: T, source: FnSource, age: u32) -> bool {
        let Some(cell) = self.geometry.world_to_cell(x, y) else {
            return false;
        };
        let slot = self.geometry.index(cell);
        if self.slots[slot] != u32::MAX {
            let e = &mut self.entries[self.slots[slot] as usize];
            if source == FnSource::Evidence {
                e.source = FnSource::Evidence;
            }
            e.age = e.age.min(age);
            return false;
        }
        self.mask.set(cell, true);
        self.slots[slot] = self.entries.len() as u32;
        self.entries.push(FnEntry { x, y, source, age });
        true
    }

    /// Motion-compensates the map into the next robot frame. Entries leaving
    /// the grid are dropped; ages advance by one.
    pub fn transform(&self, delta: &MotionDelta<T>) -> Self {
        let mut out = Self::empty(self.geometry);
        for e in &self.entries {
            let (x, y) = delta.apply(e.x, e.y);
            out.insert(x, y, e.source, e.age.saturating_add(1));
        }
        out
    }

    fn evidence_points(&self) -> Vec<(T, T)> {
        self.entries
            .iter()
            .filter(|e| e.source == FnSource::Evidence)
            .map(|e| (e.x, e.y))
            .collect()
    }
}

/// Carries `prev` into the next frame.
pub fn transform_fn<T: Real>(prev: &FnMap<T>, delta: &MotionDelta<T>) -> FnMap<T> {
    prev.transform(delta)
}

/// Fitted wall segment, endpoints in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment<T = f64> {
    pub a: (T, T),
    pub b: (T, T),
    pub inliers: usize,
    /// Length of `a..b` added beyond the outermost inliers at each end.
    pub extension: T,
}

/// Unions the current evidence into the motion-compensated prior map, then
/// fits segments through the evidence and fills them in, extended at both
/// ends. Extensions stop at the first `barrier` cell (something observed
/// there that is not glass), and no barrier cell is ever filled.
pub fn accumulate_fn<T: Real>(
    evidence: &Mask<T>,
    barrier: Option<&Mask<T>>,
    prev: &FnMap<T>,
    params: &FnParams<T>,
    frame: u64,
) -> Result<FnMap<T>> {
    if evidence.geometry() != prev.geometry()
        || barrier.is_some_and(|b| b.geometry() != prev.geometry())
    {
        return Err(Error::GeometryMismatch("evidence and prior FN map"));
    }
    let mut map = prev.clone();
    for cell in evidence.set_cells() {
        let (x, y) = map.geometry.cell_center(cell);
        map.insert(x, y, FnSource::Evidence, 0);
    }
    let mut rng =
        ChaCha8Rng::seed_from_u64(params.seed ^ frame.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let segments = fit_segments(
        &map.evidence_points(),
        map.geometry.resolution(),
        params,
        &mut rng,
    );
    for seg in &segments {
        rasterize_segment(&mut map, seg, barrier);
    }
    Ok(map)
}

fn rasterize_segment<T: Real>(map: &mut FnMap<T>, seg: &Segment<T>, barrier: Option<&Mask<T>>) {
    let g = map.geometry.resolution();
    let (dx, dy) = (seg.b.0 - seg.a.0, seg.b.1 - seg.a.1);
    let len = dx.hypot(dy);
    if !(len > T::zero()) {
        return;
    }
    let (ux, uy) = (dx / len, dy / len);
    let blocked = |cell: Cell| barrier.is_some_and(|b| *b.get(cell));
    // Fine enough to catch every cell a slanted line passes through, so the
    // painted wall has no diagonal leaks.
    let step = g * T::of(0.125);
    let ext = seg.extension.min(len * T::of(0.5));
    // Inlier span first, then each extension walking outward.
    let mut paint = |from: T, to: T, stop_at_barrier: bool| {
        let n = ((to - from).abs() / step).ceil().to_usize().unwrap_or(0);
        for k in 0..=n {
            let t = if n == 0 {
                from
            } else {
                from + (to - from) * T::of(k as f64) / T::of(n as f64)
            };
            let Some(cell) = map
                .geometry
                .world_to_cell(seg.a.0 + t * ux, seg.a.1 + t * uy)
            else {
                break;
            };
            if blocked(cell) {
                if stop_at_barrier {
                    break;
                }
                continue;
            }
            let (cx, cy) = map.geometry.cell_center(cell);
            map.insert(cx, cy, FnSource::Extrapolated, 0);
        }
    };
    paint(ext, len - ext, false);
    paint(len - ext, len, true);
    paint(ext, T::zero(), true);
}

/// Sequential RANSAC: repeatedly takes the line with most inliers, splits its
/// inliers at gaps and keeps every run with enough support.
pub fn fit_segments<T: Real>(
    points: &[(T, T)],
    resolution: T,
    params: &FnParams<T>,
    rng: &mut impl Rng,
) -> Vec<Segment<T>> {
    let tol = params.ransac_tolerance * resolution;
    let mut remaining: Vec<(T, T)> = points.to_vec();
    // Each run keeps its inlier span endpoints and points for the pruning pass.
    let mut runs: Vec<Run<T>> = Vec::new();
    while remaining.len() >= params.min_inliers && runs.len() < params.max_segments {
        let Some(line) = best_line(&remaining, tol, params.ransac_iterations, rng) else {
            break;
        };
        let (inliers, outliers): (Vec<_>, Vec<_>) = remaining
            .iter()
            .partition(|&&(x, y)| line_distance(line, x, y) <= tol);
        if inliers.len() < params.min_inliers {
            break;
        }
        let (origin, dir) = principal_axis(&inliers);
        let at = |t: T| (origin.0 + t * dir.0, origin.1 + t * dir.1);
        let mut along: Vec<(T, (T, T))> = inliers
            .iter()
            .map(|&(x, y)| ((x - origin.0) * dir.0 + (y - origin.1) * dir.1, (x, y)))
            .collect();
        along.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
        let mut start = 0;
        for i in 1..=along.len() {
            if i == along.len() || along[i].0 - along[i - 1].0 > params.max_gap {
                if i - start >= params.min_inliers && runs.len() < params.max_segments {
                    let pts = along[start..i].iter().map(|p| p.1).collect();
                    runs.push((at(along[start].0), at(along[i - 1].0), pts));
                }
                start = i;
            }
        }
        remaining = outliers;
    }
    // A short run lying mostly along a longer one is the cross-section of a
    // thick wall picked up by a line through it, not a wall of its own.
    let length = |r: &Run<T>| (r.1 .0 - r.0 .0).hypot(r.1 .1 - r.0 .1);
    let keep: Vec<bool> = runs
        .iter()
        .map(|run| {
            let len = length(run);
            if len >= params.max_gap {
                return true;
            }
            let explained = run
                .2
                .iter()
                .filter(|&&p| {
                    runs.iter().any(|other| {
                        length(other) > len && segment_distance(other.0, other.1, p) <= tol + tol
                    })
                })
                .count();
            explained * 2 < run.2.len()
        })
        .collect();
    runs.into_iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|((a, b, pts), _)| {
            let len = (b.0 - a.0).hypot(b.1 - a.1);
            let (ux, uy) = if len > T::zero() {
                ((b.0 - a.0) / len, (b.1 - a.1) / len)
            } else {
                (T::one(), T::zero())
            };
            let e = params.extension;
            Segment {
                a: (a.0 - e * ux, a.1 - e * uy),
                b: (b.0 + e * ux, b.1 + e * uy),
                inliers: pts.len(),
                extension: e,
            }
        })
        .collect()
}

/// Inlier span endpoints and the inlier points of one fitted run.
type Run<T> = ((T, T), (T, T), Vec<(T, T)>);

fn segment_distance<T: Real>(a: (T, T), b: (T, T), p: (T, T)) -> T {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > T::zero() {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2)
            .max(T::zero())
            .min(T::one())
    } else {
        T::zero()
    };
    (p.0 - a.0 - t * dx).hypot(p.1 - a.1 - t * dy)
}

/// Line as `(nx, ny, d)` with unit normal: `nx x + ny y = d`.
type Line<T> = (T, T, T);

fn line_distance<T: Real>(line: Line<T>, x: T, y: T) -> T {
    (line.0 * x + line.1 * y - line.2).abs()
}

fn best_line<T: Real>(
    points: &[(T, T)],
    tol: T,
    iterations: usize,
    rng: &mut impl Rng,
) -> Option<Line<T>> {
    let n = points.len();
    let mut best: Option<(usize, Line<T>)> = None;
    for _ in 0..iterations {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let (p, q) = (points[i], points[j]);
        let (dx, dy) = (q.0 - p.0, q.1 - p.1);
        let len = dx.hypot(dy);
        if i == j || !(len > T::zero()) {
            continue;
        }
        let (nx, ny) = (-dy / len, dx / len);
        let line = (nx, ny, nx * p.0 + ny * p.1);
        let count = points
            .iter()
            .filter(|&&(x, y)| line_distance(line, x, y) <= tol)
            .count();
        if best.is_none_or(|(c, _)| count > c) {
            best = Some((count, line));
        }
    }
    best.map(|(_, l)| l)
}

/// Centroid and unit direction of largest spread.
fn principal_axis<T: Real>(points: &[(T, T)]) -> ((T, T), (T, T)) {
    let k = T::of(points.len() as f64);
    let mx = points.iter().map(|p| p.0).sum::<T>() / k;
    let my = points.iter().map(|p| p.1).sum::<T>() / k;
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let angle = T::of(0.5) * (sxy + sxy).atan2(sxx - syy);
    ((mx, my), (angle.cos(), angle.sin()))
}

/// Per-frame owner of the accumulated FN map.
#[derive(Debug, Clone)]
pub struct FnTracker<T = f64> {
    params: FnParams<T>,
    map: FnMap<T>,
    frame: u64,
}

impl<T: Real> FnTracker<T> {
    pub fn new(geometry: GridGeometry<T>, params: FnParams<T>) -> Self {
        Self {
            params,
            map: FnMap::empty(geometry),
            frame: 0,
        }
    }

    pub fn map(&self) -> &FnMap<T> {
        &self.map
    }

    /// Moves the map by `delta` (motion since the previous frame) and folds in
    /// the new evidence; see [`accumulate_fn`] for `barrier`.
    pub fn update(
        &mut self,
        evidence: &Mask<T>,
        barrier: Option<&Mask<T>>,
        delta: &MotionDelta<T>,
    ) -> Result<&FnMap<T>> {
        let carried = if self.frame == 0 {
            self.map.clone()
        } else {
            self.map.transform(delta)
        };
        self.map = accumulate_fn(evidence, barrier, &carried, &self.params, self.frame)?;
        self.frame += 1;
        Ok(&self.map)
    }
}
