//! Obstacle inflation and plan-map assembly.
//!
//! The adaptive kernel is a line through the kernel center along the goal
//! direction, thickened across the line by `padding` cells. Dilating solid and
//! transparent obstacle cells with it stretches them along the goal axis while
//! leaving lateral gaps (doorways) open. The uniform kernel is the full square.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{Cell, GridGeometry};
use crate::grid::{Grid, Mask};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InflationMode {
    Uniform,
    Adaptive,
}

impl std::fmt::Display for InflationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InflationMode::Uniform => "uniform",
            InflationMode::Adaptive => "adaptive",
        })
    }
}

impl std::str::FromStr for InflationMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "adaptive" => Ok(Self::Adaptive),
            _ => Err(format!(
                "unknown inflation mode `{s}` (expected adaptive or uniform)"
            )),
        }
    }
}

pub const C_BLOCK: u8 = 255;
pub const C_FP_MIN: u8 = 1;
pub const C_FP_MAX: u8 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InflationSettings {
    pub mode: InflationMode,
    /// Kernel edge `e`, odd.
    pub kernel_size: usize,
    /// Half-thickness of the adaptive line, cells.
    pub padding: usize,
    /// Keep only the half of the adaptive line pointing away from the goal.
    #[serde(default)]
    pub one_sided: bool,
    /// FP cost saturates at this many returns of threshold intensity per cell.
    #[serde(default = "default_fp_saturation")]
    pub fp_saturation_returns: f64,
}

fn default_fp_saturation() -> f64 {
    20.0
}

impl InflationSettings {
    /// `e = 2 ceil(r / g) + 1`, `padding = ceil(r / 2g)`.
    pub fn for_radius(radius: f64, resolution: f64, mode: InflationMode) -> Self {
        // Guard against 0.3 / 0.1 = 2.9999999999999996 style ratios.
        let cells = (radius / resolution - 1e-9).ceil().max(0.0) as usize;
        let padding = (radius / (2.0 * resolution) - 1e-9).ceil().max(0.0) as usize;
        Self {
            mode,
            kernel_size: 2 * cells + 1,
            padding,
            one_sided: false,
            fp_saturation_returns: default_fp_saturation(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_size.is_multiple_of(2) {
            return Err(invalid("kernel_size", "must be odd"));
        }
        if self.padding > self.kernel_size / 2 {
            return Err(invalid("padding", "must not exceed (kernel_size - 1) / 2"));
        }
        if !(self.fp_saturation_returns > 0.0) {
            return Err(invalid("fp_saturation_returns", "must be positive"));
        }
        Ok(())
    }
}

/// Binary `e x e` structuring element anchored at its center.
#[derive(Debug, Clone, PartialEq)]
pub struct InflationKernel {
    size: usize,
    padding: usize,
    /// Goal direction the mask was built for, radians; `None` for square kernels.
    theta: Option<f64>,
    mask: Vec<bool>,
}

impl InflationKernel {
    /// All-ones `e x e` kernel.
    pub fn square(size: usize) -> Result<Self> {
        if size.is_multiple_of(2) {
            return Err(invalid("kernel_size", "must be odd"));
        }
        Ok(Self {
            size,
            padding: size / 2,
            theta: None,
            mask: vec![true; size * size],
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn padding(&self) -> usize {
        self.padding
    }

    pub fn theta(&self) -> Option<f64> {
        self.theta
    }

    /// Mask value at kernel row/column.
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.size + col]
    }

    pub fn popcount(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Set cells as offsets from the center.
    pub fn offsets(&self) -> Vec<(i64, i64)> {
        let h = (self.size / 2) as i64;
        (0..self.size * self.size)
            .filter(|&i| self.mask[i])
            .map(|i| ((i / self.size) as i64 - h, (i % self.size) as i64 - h))
            .collect()
    }
}

/// Line kernel along `theta = atan2(g_y, g_x)` in `(row, col)` = `(x, y)`
/// coordinates.
pub fn build_kernel<T: Real>(
    goal_x: T,
    goal_y: T,
    size: usize,
    padding: usize,
) -> Result<InflationKernel> {
    build_kernel_with(goal_x, goal_y, size, padding, false)
}

/// [`build_kernel`], optionally keeping only the half-line opposite the goal.
pub fn build_kernel_with<T: Real>(
    goal_x: T,
    goal_y: T,
    size: usize,
    padding: usize,
    one_sided: bool,
) -> Result<InflationKernel> {
    let (gx, gy) = (goal_x.as_f64(), goal_y.as_f64());
    if !(gx.is_finite() && gy.is_finite()) || (gx == 0.0 && gy == 0.0) {
        return Err(Error::ZeroGoalVector);
    }
    if size.is_multiple_of(2) {
        return Err(invalid("kernel_size", "must be odd"));
    }
    if padding > size / 2 {
        return Err(invalid("padding", "must not exceed (kernel_size - 1) / 2"));
    }
    let theta = gy.atan2(gx);
    let (s, c) = theta.sin_cos();
    let h = (size / 2) as i64;
    let mut mask = vec![false; size * size];
    let mut set = |r: i64, col: i64| {
        if (-h..=h).contains(&r) && (-h..=h).contains(&col) {
            mask[((r + h) * size as i64 + col + h) as usize] = true;
        }
    };
    // Step along the dominant axis, thicken along the other one.
    let row_major = c.abs() >= s.abs();
    for k in -h..=h {
        let minor = if row_major {
            (k as f64 * s / c).round() as i64
        } else {
            (k as f64 * c / s).round() as i64
        };
        let (r0, c0) = if row_major { (k, minor) } else { (minor, k) };
        // Offset of this sample along +theta; skip the goal-side half if asked.
        if one_sided && (r0 as f64 * c + c0 as f64 * s) > 1e-9 {
            continue;
        }
        for j in -(padding as i64)..=padding as i64 {
            if row_major {
                set(r0, c0 + j);
            } else {
                set(r0 + j, c0);
            }
        }
    }
    Ok(InflationKernel {
        size,
        padding,
        theta: Some(theta),
        mask,
    })
}

/// Morphological dilation of `input` by `kernel`.
pub fn dilate<T: Real>(input: &Mask<T>, kernel: &InflationKernel) -> Mask<T> {
    let geometry = *input.geometry();
    let n = geometry.n() as i64;
    let offsets = kernel.offsets();
    let mut out = vec![false; (n * n) as usize];
    for cell in input.set_cells() {
        let (r, c) = (cell.row as i64, cell.col as i64);
        for &(dr, dc) in &offsets {
            let (rr, cc) = (r + dr, c + dc);
            if rr >= 0 && rr < n && cc >= 0 && cc < n {
                out[(rr * n + cc) as usize] = true;
            }
        }
    }
    Mask::from_vec(geometry, out).expect("same geometry")
}

/// Union of the nonzero support of `tp` and the set cells of `fn_mask`.
pub fn solid_support<T: Real>(tp: &Grid<T, T>, fn_mask: &Mask<T>) -> Result<Mask<T>> {
    if !tp.same_geometry(fn_mask) {
        return Err(Error::GeometryMismatch("TP and FN grids"));
    }
    let data = tp
        .as_slice()
        .iter()
        .zip(fn_mask.as_slice())
        .map(|(&v, &f)| v > T::zero() || f)
        .collect();
    Mask::from_vec(*tp.geometry(), data)
}

/// Dilates `TP ∪ FN` by `kernel`.
pub fn inflate<T: Real>(
    tp: &Grid<T, T>,
    fn_mask: &Mask<T>,
    kernel: &InflationKernel,
) -> Result<Mask<T>> {
    Ok(dilate(&solid_support(tp, fn_mask)?, kernel))
}

/// Dilates `TP ∪ FN` by the `(2 radius + 1)` square.
pub fn inflate_uniform<T: Real>(
    tp: &Grid<T, T>,
    fn_mask: &Mask<T>,
    radius_cells: usize,
) -> Result<Mask<T>> {
    inflate(tp, fn_mask, &InflationKernel::square(2 * radius_cells + 1)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanClass {
    Free,
    /// Solid obstacle observed this frame.
    Tp,
    /// Passable obstacle.
    Fp,
    /// Transparent obstacle from the FN tracker.
    Fn,
    /// Blocking only because of inflation.
    Inflated,
}

impl PlanClass {
    /// Predicted to physically block the robot.
    pub fn is_solid(self) -> bool {
        matches!(self, PlanClass::Tp | PlanClass::Fn)
    }
}

/// Per-cell FP cost: `1 + round(63 min(1, value / full_scale))`.
pub fn fp_cost<T: Real>(value: T, full_scale: T) -> u8 {
    let frac = (value / full_scale).min(T::one()).max(T::zero()).as_f64();
    C_FP_MIN + (f64::from(C_FP_MAX - C_FP_MIN) * frac).round() as u8
}

/// Fused planning grid: blocking inflated cells, costed passable cells.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanMap<T = f64> {
    pub cost: Grid<u8, T>,
    pub class: Grid<PlanClass, T>,
    pub mode: InflationMode,
}

impl<T: Real> PlanMap<T> {
    pub fn empty(geometry: GridGeometry<T>, mode: InflationMode) -> Self {
        Self {
            cost: Grid::filled(geometry, 0),
            class: Grid::filled(geometry, PlanClass::Free),
            mode,
        }
    }

    pub fn geometry(&self) -> &GridGeometry<T> {
        self.cost.geometry()
    }

    pub fn is_blocking(&self, cell: Cell) -> bool {
        *self.cost.get(cell) == C_BLOCK
    }

    pub fn count(&self, class: PlanClass) -> usize {
        self.class
            .as_slice()
            .iter()
            .filter(|&&c| c == class)
            .count()
    }

    /// Cells predicted to physically block the robot.
    pub fn solid_mask(&self) -> Mask<T> {
        self.class.map(|c| c.is_solid())
    }
}

/// Overlays passable cells onto the inflated grid; inflation wins on overlap.
/// `solid` is the pre-inflation `TP ∪ FN` support used only for labels.
pub fn assemble_plan<T: Real>(
    inflated: &Mask<T>,
    tp: &Grid<T, T>,
    fn_mask: &Mask<T>,
    fp: &Grid<T, T>,
    fp_full_scale: T,
    mode: InflationMode,
) -> Result<PlanMap<T>> {
    let geometry = *inflated.geometry();
    if tp.geometry() != &geometry || fp.geometry() != &geometry || fn_mask.geometry() != &geometry {
        return Err(Error::GeometryMismatch("plan map inputs"));
    }
    let mut plan = PlanMap::empty(geometry, mode);
    let cost = plan.cost.as_mut_slice();
    let class = plan.class.as_mut_slice();
    for i in 0..geometry.cell_count() {
        if inflated.as_slice()[i] {
            cost[i] = C_BLOCK;
            class[i] = if tp.as_slice()[i] > T::zero() {
                PlanClass::Tp
            } else if fn_mask.as_slice()[i] {
                PlanClass::Fn
            } else {
                PlanClass::Inflated
            };
        } else if fp.as_slice()[i] > T::zero() {
            cost[i] = fp_cost(fp.as_slice()[i], fp_full_scale);
            class[i] = PlanClass::Fp;
        }
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> GridGeometry<f64> {
        GridGeometry::new(200, 0.1).unwrap()
    }

    fn cells(k: &InflationKernel) -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        for r in 0..k.size() {
            for c in 0..k.size() {
                if k.get(r, c) {
                    v.push((r, c));
                }
            }
        }
        v
    }

    #[test]
    fn goal_ahead_is_center_column() {
        let k = build_kernel(1.0, 0.0, 7, 0).unwrap();
        let expect: Vec<_> = (0..7).map(|r| (r, 3)).collect();
        assert_eq!(cells(&k), expect);
    }

    #[test]
    fn diagonal_goal_is_main_diagonal() {
        let k = build_kernel(2.0, 2.0, 7, 0).unwrap();
        let expect: Vec<_> = (0..7).map(|r| (r, r)).collect();
        assert_eq!(cells(&k), expect);
    }

    #[test]
    fn lateral_goal_has_no_singularity() {
        let k = build_kernel(0.0, -3.0, 7, 0).unwrap();
        let expect: Vec<_> = (0..7).map(|c| (3, c)).collect();
        assert_eq!(cells(&k), expect);
    }

    #[test]
    fn zero_goal_is_an_error() {
        assert!(matches!(
            build_kernel(0.0, 0.0, 7, 1),
            Err(Error::ZeroGoalVector)
        ));
        assert!(build_kernel(1.0, 0.0, 6, 1).is_err());
    }

    /// Dilation of a padding-0 mask by `p` cells along the minor axis.
    fn thicken(k: &InflationKernel, p: i64, row_major: bool) -> Vec<(usize, usize)> {
        let n = k.size() as i64;
        let mut out = std::collections::BTreeSet::new();
        for (r, c) in cells(k) {
            for j in -p..=p {
                let (rr, cc) = if row_major {
                    (r as i64, c as i64 + j)
                } else {
                    (r as i64 + j, c as i64)
                };
                if (0..n).contains(&rr) && (0..n).contains(&cc) {
                    out.insert((rr as usize, cc as usize));
                }
            }
        }
        out.into_iter().collect()
    }

    #[test]
    fn padding_matches_dilation_oracle() {
        for deg in (0..360).step_by(7) {
            let t = (deg as f64).to_radians();
            let thin = build_kernel(t.cos(), t.sin(), 9, 0).unwrap();
            let thick = build_kernel(t.cos(), t.sin(), 9, 1).unwrap();
            let row_major = t.cos().abs() >= t.sin().abs();
            assert_eq!(cells(&thick), thicken(&thin, 1, row_major), "angle {deg}");
        }
        let thin = build_kernel(1.0, 0.0, 7, 0).unwrap();
        let thick = build_kernel(1.0, 0.0, 7, 1).unwrap();
        assert_eq!(thick.popcount(), 3 * thin.popcount());
    }

    #[test]
    fn kernel_hugs_its_line() {
        for deg in 0..360 {
            let t = (deg as f64).to_radians();
            let k = build_kernel(t.cos(), t.sin(), 11, 2).unwrap();
            assert!(k.get(5, 5));
            for (dr, dc) in k.offsets() {
                // perpendicular distance to the line through the center
                let d = (-(dr as f64) * t.sin() + dc as f64 * t.cos()).abs();
                assert!(d <= 2.0 + 0.5 + 1e-9, "angle {deg}: ({dr},{dc}) at {d}");
            }
        }
    }

    #[test]
    fn adaptive_is_subset_of_square() {
        let sq = InflationKernel::square(7).unwrap();
        for deg in (0..360).step_by(5) {
            let t = (deg as f64).to_radians();
            for p in 0..=3 {
                let k = build_kernel(t.cos(), t.sin(), 7, p).unwrap();
                for (r, c) in cells(&k) {
                    assert!(sq.get(r, c));
                }
            }
        }
    }

    #[test]
    fn one_sided_keeps_the_far_half() {
        let k = build_kernel_with(1.0, 0.0, 7, 0, true).unwrap();
        assert_eq!(k.offsets(), vec![(-3, 0), (-2, 0), (-1, 0), (0, 0)]);
    }

    #[test]
    fn for_radius_defaults() {
        let s = InflationSettings::for_radius(0.3, 0.1, InflationMode::Adaptive);
        assert_eq!((s.kernel_size, s.padding), (7, 2));
        let s = InflationSettings::for_radius(0.2, 0.1, InflationMode::Adaptive);
        assert_eq!((s.kernel_size, s.padding), (5, 1));
        let s = InflationSettings::for_radius(0.35, 0.1, InflationMode::Adaptive);
        assert_eq!((s.kernel_size, s.padding), (9, 2));
    }

    #[test]
    fn empty_inputs_give_empty_inflation() {
        let tp = Grid::filled(geom(), 0.0);
        let fnm = Mask::filled(geom(), false);
        let k = build_kernel(1.0, 0.0, 7, 1).unwrap();
        assert_eq!(inflate(&tp, &fnm, &k).unwrap().count_set(), 0);
    }

    #[test]
    fn single_cell_dilates_to_kernel() {
        let mut tp = Grid::filled(geom(), 0.0);
        tp.set(Cell::new(120, 80), 5.0);
        let fnm = Mask::filled(geom(), false);
        let k = build_kernel(1.0, 0.0, 7, 1).unwrap();
        let out = inflate(&tp, &fnm, &k).unwrap();
        let mut expect: Vec<_> = k
            .offsets()
            .into_iter()
            .map(|(dr, dc)| Cell::new((120 + dr) as usize, (80 + dc) as usize))
            .collect();
        expect.sort();
        assert_eq!(out.set_cells().collect::<Vec<_>>(), expect);
    }

    #[test]
    fn uniform_radius_cases() {
        let mut tp = Grid::filled(geom(), 0.0);
        tp.set(Cell::new(50, 60), 1.0);
        let fnm = Mask::filled(geom(), false);
        assert_eq!(
            inflate_uniform(&tp, &fnm, 0)
                .unwrap()
                .set_cells()
                .collect::<Vec<_>>(),
            vec![Cell::new(50, 60)]
        );
        let out = inflate_uniform(&tp, &fnm, 3).unwrap();
        assert_eq!(out.count_set(), 49);
        assert!(out.set_cells().all(|c| c.chebyshev(Cell::new(50, 60)) <= 3));
    }

    #[test]
    fn fp_cells_are_never_inflated() {
        let tp = Grid::filled(geom(), 0.0);
        let mut fp = Grid::filled(geom(), 0.0);
        fp.set(Cell::new(110, 100), 1e5);
        fp.set(Cell::new(111, 100), 1.0);
        let fnm = Mask::filled(geom(), false);
        let infl = inflate_uniform(&tp, &fnm, 3).unwrap();
        let plan = assemble_plan(&infl, &tp, &fnm, &fp, 1e4, InflationMode::Uniform).unwrap();
        assert_eq!(*plan.cost.get(Cell::new(110, 100)), C_FP_MAX);
        assert_eq!(*plan.cost.get(Cell::new(111, 100)), C_FP_MIN);
        assert_eq!(plan.count(PlanClass::Fp), 2);
        assert!(plan.cost.as_slice().iter().all(|&c| c < C_BLOCK));
    }

    #[test]
    fn inflation_overrides_fp_and_labels_sources() {
        let mut tp = Grid::filled(geom(), 0.0);
        tp.set(Cell::new(120, 100), 9.0);
        let mut fnm = Mask::filled(geom(), false);
        fnm.set(Cell::new(140, 100), true);
        let mut fp = Grid::filled(geom(), 0.0);
        fp.set(Cell::new(121, 100), 3.0);
        let k = build_kernel(1.0, 0.0, 5, 0).unwrap();
        let infl = inflate(&tp, &fnm, &k).unwrap();
        let plan = assemble_plan(&infl, &tp, &fnm, &fp, 10.0, InflationMode::Adaptive).unwrap();
        assert_eq!(*plan.class.get(Cell::new(120, 100)), PlanClass::Tp);
        assert_eq!(*plan.class.get(Cell::new(140, 100)), PlanClass::Fn);
        assert_eq!(*plan.class.get(Cell::new(121, 100)), PlanClass::Inflated);
        assert!(plan.is_blocking(Cell::new(121, 100)));
        assert_eq!(plan.solid_mask().count_set(), 2);
    }

    #[test]
    fn fp_cost_scaling() {
        assert_eq!(fp_cost(0.0, 10.0), 1);
        assert_eq!(fp_cost(5.0, 10.0), 33);
        assert_eq!(fp_cost(50.0, 10.0), 64);
    }
}
