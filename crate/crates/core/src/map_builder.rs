//! Aggregation of intensity-tagged points into height-sliced grid layers and
//! their stacking into a multi-layer map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Cell, GridGeometry, HeightInterval, IntensityPoint};
use crate::scalar::Real;

/// One grid layer: per-cell intensity sum and return count for the points
/// whose height falls in `interval`.
///
/// The layer value of a cell is the intensity sum divided by the cell area
/// `g^2`; the per-cell mean intensity (sum / count) is kept alongside for the
/// range-independent thresholds used by the classifier and the glass detector.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrid<T = f64> {
    geometry: GridGeometry<T>,
    interval: HeightInterval<T>,
    sum: Vec<T>,
    count: Vec<u32>,
}

impl<T: Real> LayerGrid<T> {
    pub fn empty(geometry: GridGeometry<T>, interval: HeightInterval<T>) -> Self {
        Self {
            sum: vec![T::zero(); geometry.cell_count()],
            count: vec![0; geometry.cell_count()],
            geometry,
            interval,
        }
    }

    pub fn geometry(&self) -> &GridGeometry<T> {
        &self.geometry
    }

    pub fn interval(&self) -> &HeightInterval<T> {
        &self.interval
    }

    /// Adds one return to a cell.
    pub fn accumulate(&mut self, cell: Cell, intensity: T) {
        let i = self.geometry.index(cell);
        self.sum[i] += intensity;
        self.count[i] += 1;
    }

    /// Summed intensity over the cell area.
    pub fn value(&self, cell: Cell) -> T {
        self.value_at(self.geometry.index(cell))
    }

    pub fn value_at(&self, index: usize) -> T {
        let g = self.geometry.resolution();
        self.sum[index] / (g * g)
    }

    /// Mean intensity of the returns in a cell, 0 for an empty cell.
    pub fn mean(&self, cell: Cell) -> T {
        self.mean_at(self.geometry.index(cell))
    }

    pub fn mean_at(&self, index: usize) -> T {
        match self.count[index] {
            0 => T::zero(),
            k => self.sum[index] / T::of(k as f64),
        }
    }

    pub fn count(&self, cell: Cell) -> u32 {
        self.count[self.geometry.index(cell)]
    }

    pub fn count_at(&self, index: usize) -> u32 {
        self.count[index]
    }

    pub fn intensity_sum_at(&self, index: usize) -> T {
        self.sum[index]
    }

    /// A cell is occupied when its layer value is nonzero.
    pub fn is_occupied_at(&self, index: usize) -> bool {
        self.sum[index] > T::zero()
    }

    pub fn is_occupied(&self, cell: Cell) -> bool {
        self.is_occupied_at(self.geometry.index(cell))
    }

    pub fn occupied_count(&self) -> usize {
        self.sum.iter().filter(|&&s| s > T::zero()).count()
    }

    /// Layer values as a row-major vector.
    pub fn values(&self) -> Vec<T> {
        (0..self.sum.len()).map(|i| self.value_at(i)).collect()
    }

    /// Elementwise sum with another layer of identical geometry and interval.
    pub fn merged(&self, other: &Self) -> Result<Self> {
        if self.geometry != other.geometry || self.interval != other.interval {
            return Err(Error::GeometryMismatch(
                "layers differ in geometry or interval",
            ));
        }
        let mut out = self.clone();
        for i in 0..out.sum.len() {
            out.sum[i] += other.sum[i];
            out.count[i] += other.count[i];
        }
        Ok(out)
    }
}

/// Builds one layer from the points whose `z` lies in `interval`. Points
/// outside the grid extent or the interval are ignored.
pub fn build_layer<T: Real>(
    points: &[IntensityPoint<T>],
    interval: HeightInterval<T>,
    geometry: GridGeometry<T>,
) -> LayerGrid<T> {
    let mut layer = LayerGrid::empty(geometry, interval);
    for p in points {
        if !interval.contains(p.z) {
            continue;
        }
        if let Some(cell) = geometry.world_to_cell(p.x, p.y) {
            layer.accumulate(cell, p.intensity);
        }
    }
    layer
}

/// Named role of a layer in the standard four-layer stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerRole {
    /// Heights below the glass probe band down to `-h`.
    Below,
    /// Thin band around the sensor plane `z = 0`.
    Ground,
    /// Heights above the ground band up to `h`.
    Above,
    /// Thin band around `z = -epsilon`.
    GlassProbe,
}

impl LayerRole {
    pub const ALL: [LayerRole; 4] = [
        LayerRole::Below,
        LayerRole::Ground,
        LayerRole::Above,
        LayerRole::GlassProbe,
    ];
}

/// Height bands of the standard four-layer map.
///
/// With `b = band_half_width`:
///
/// | role        | interval              |
/// |-------------|-----------------------|
/// | below       | `[-h, -eps - b)`      |
/// | glass probe | `[-eps - b, -eps + b)`|
/// | ground      | `[-b, b]`             |
/// | above       | `(b, h]`              |
///
/// The bands are pairwise disjoint; heights in `[-eps + b, -b)` belong to no
/// layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec<T = f64> {
    /// Robot height; the stack spans `[-h, h]` around the sensor.
    pub height: T,
    /// Depth of the glass probe band below the sensor plane.
    pub epsilon: T,
    /// Half-width of the ground and glass probe bands.
    pub band_half_width: T,
}

impl<T: Real> LayerSpec<T> {
    pub fn new(height: T, epsilon: T, band_half_width: T) -> Result<Self> {
        let spec = Self {
            height,
            epsilon,
            band_half_width,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `epsilon = 0.15 m`, band half-width `0.05 m`.
    pub fn for_height(height: T) -> Result<Self> {
        Self::new(height, T::of(0.15), T::of(0.05))
    }

    pub fn validate(&self) -> Result<()> {
        let (h, eps, b) = (self.height, self.epsilon, self.band_half_width);
        if !(h > T::zero() && eps > T::zero() && b > T::zero()) {
            return Err(Error::InvalidLayerSpec(
                "h, epsilon and band half-width must be positive".into(),
            ));
        }
        if !(eps >= b + b) {
            return Err(Error::InvalidLayerSpec(
                "glass probe band overlaps the ground band (need epsilon >= 2 * band)".into(),
            ));
        }
        if !(eps + b < h) {
            return Err(Error::InvalidLayerSpec(
                "glass probe band reaches below -h".into(),
            ));
        }
        Ok(())
    }

    pub fn interval(&self, role: LayerRole) -> HeightInterval<T> {
        let (h, eps, b) = (self.height, self.epsilon, self.band_half_width);
        // Validated in `new`, so these constructors cannot fail.
        match role {
            LayerRole::Below => HeightInterval::closed_open(-h, -eps - b),
            LayerRole::GlassProbe => HeightInterval::closed_open(-eps - b, -eps + b),
            LayerRole::Ground => HeightInterval::closed(-b, b),
            LayerRole::Above => HeightInterval::open_closed(b, h),
        }
        .expect("validated layer spec")
    }
}

/// Ordered stack of layers sharing one geometry, built from a single cloud.
#[derive(Debug, Clone)]
pub struct MultiLayerMap<T = f64> {
    geometry: GridGeometry<T>,
    layers: Vec<LayerGrid<T>>,
    roles: Vec<Option<LayerRole>>,
    pub timestamp: u64,
}

impl<T: Real> MultiLayerMap<T> {
    pub fn geometry(&self) -> &GridGeometry<T> {
        &self.geometry
    }

    pub fn layers(&self) -> &[LayerGrid<T>] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn layer(&self, role: LayerRole) -> Option<&LayerGrid<T>> {
        self.roles
            .iter()
            .position(|r| *r == Some(role))
            .map(|i| &self.layers[i])
    }

    /// The per-cell column `[I_1(r,c) | ... | I_m(r,c)]` of layer values.
    pub fn column(&self, cell: Cell) -> Vec<T> {
        self.layers.iter().map(|l| l.value(cell)).collect()
    }
}

/// Builds a stack for arbitrary pairwise disjoint intervals (at least one).
/// Each point lands in at most one layer.
pub fn build_stack<T: Real>(
    points: &[IntensityPoint<T>],
    intervals: &[HeightInterval<T>],
    geometry: GridGeometry<T>,
) -> Result<MultiLayerMap<T>> {
    if intervals.is_empty() {
        return Err(Error::InvalidLayerSpec(
            "at least one layer is required".into(),
        ));
    }
    for (i, a) in intervals.iter().enumerate() {
        for b in &intervals[i + 1..] {
            if a.overlaps(b) {
                return Err(Error::InvalidLayerSpec(format!(
                    "intervals [{}, {}] and [{}, {}] overlap",
                    a.low, a.high, b.low, b.high
                )));
            }
        }
    }
    Ok(stack_unchecked(
        points,
        intervals,
        vec![None; intervals.len()],
        geometry,
    ))
}

/// Builds the standard below / ground / above / glass-probe stack.
pub fn build_multilayer<T: Real>(
    points: &[IntensityPoint<T>],
    spec: &LayerSpec<T>,
    geometry: GridGeometry<T>,
) -> MultiLayerMap<T> {
    let intervals: Vec<_> = LayerRole::ALL.iter().map(|&r| spec.interval(r)).collect();
    let roles = LayerRole::ALL.iter().map(|&r| Some(r)).collect();
    stack_unchecked(points, &intervals, roles, geometry)
}

fn stack_unchecked<T: Real>(
    points: &[IntensityPoint<T>],
    intervals: &[HeightInterval<T>],
    roles: Vec<Option<LayerRole>>,
    geometry: GridGeometry<T>,
) -> MultiLayerMap<T> {
    let mut layers: Vec<_> = intervals
        .iter()
        .map(|&iv| LayerGrid::empty(geometry, iv))
        .collect();
    for p in points {
        let Some(layer) = layers.iter_mut().find(|l| l.interval.contains(p.z)) else {
            continue;
        };
        if let Some(cell) = geometry.world_to_cell(p.x, p.y) {
            layer.accumulate(cell, p.intensity);
        }
    }
    MultiLayerMap {
        geometry,
        layers,
        roles,
        timestamp: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geom() -> GridGeometry<f64> {
        GridGeometry::new(200, 0.1).unwrap()
    }

    fn pt(x: f64, y: f64, z: f64, i: f64) -> IntensityPoint<f64> {
        IntensityPoint::new(x, y, z, i)
    }

    /// Per-cell filter-and-sum straight from the cell extents.
    fn oracle(
        points: &[IntensityPoint<f64>],
        iv: HeightInterval<f64>,
        g: GridGeometry<f64>,
    ) -> Vec<f64> {
        let res = g.resolution();
        let half = g.half_extent();
        let mut out = vec![0.0; g.cell_count()];
        for r in 0..g.n() {
            for c in 0..g.n() {
                let (xl, yl) = g.cell_to_world(r, c).unwrap();
                let mut s = 0.0;
                for p in points {
                    if iv.contains(p.z)
                        && p.x.abs() < half
                        && p.y.abs() < half
                        && p.x >= xl
                        && p.x < xl + res
                        && p.y >= yl
                        && p.y < yl + res
                    {
                        s += p.intensity;
                    }
                }
                out[r * g.n() + c] = s / (res * res);
            }
        }
        out
    }

    #[test]
    fn no_points_gives_zero_layer() {
        let iv = HeightInterval::closed(-0.05, 0.05).unwrap();
        let l = build_layer::<f64>(&[], iv, geom());
        assert!(l.values().iter().all(|&v| v == 0.0));
        assert_eq!(l.occupied_count(), 0);
    }

    #[test]
    fn single_point_density() {
        let iv = HeightInterval::closed(-0.05, 0.05).unwrap();
        let pts = [pt(0.05, 0.05, 0.0, 80.0)];
        let l = build_layer(&pts, iv, geom());
        let c = Cell::new(100, 100);
        assert!((l.value(c) - 8000.0).abs() < 1e-9);
        assert_eq!(l.occupied_count(), 1);
        assert_eq!(l.values(), oracle(&pts, iv, geom()));
    }

    #[test]
    fn two_points_share_a_cell() {
        let iv = HeightInterval::closed(-1.0, 1.0).unwrap();
        let pts = [pt(1.23, -0.41, 0.2, 30.0), pt(1.27, -0.48, -0.3, 50.0)];
        let l = build_layer(&pts, iv, geom());
        let cell = geom().world_to_cell(1.25, -0.45).unwrap();
        assert_eq!(l.value(cell), 80.0 / (0.1 * 0.1));
        assert_eq!(l.mean(cell), 40.0);
        assert_eq!(l.count(cell), 2);
        assert_eq!(l.values(), oracle(&pts, iv, geom()));
    }

    #[test]
    fn standard_spec_bands_are_disjoint() {
        let spec = LayerSpec::for_height(0.6).unwrap();
        for (i, a) in LayerRole::ALL.iter().enumerate() {
            for b in &LayerRole::ALL[i + 1..] {
                assert!(
                    !spec.interval(*a).overlaps(&spec.interval(*b)),
                    "{a:?} vs {b:?}"
                );
            }
        }
        assert!(LayerSpec::new(0.6, 0.05, 0.05).is_err());
        assert!(LayerSpec::new(0.15, 0.15, 0.05).is_err());
        assert!(LayerSpec::new(-1.0, 0.15, 0.05).is_err());
    }

    #[test]
    fn empty_cloud_gives_four_zero_layers() {
        let spec = LayerSpec::for_height(0.6).unwrap();
        let m = build_multilayer::<f64>(&[], &spec, geom());
        assert_eq!(m.len(), 4);
        assert!(m.layers().iter().all(|l| l.occupied_count() == 0));
    }

    #[test]
    fn point_above_stack_is_ignored() {
        let spec = LayerSpec::for_height(0.6).unwrap();
        let m = build_multilayer(&[pt(1.0, 1.0, 0.61, 100.0)], &spec, geom());
        assert!(m.layers().iter().all(|l| l.occupied_count() == 0));
        let m = build_multilayer(&[pt(1.0, 1.0, 0.6, 100.0)], &spec, geom());
        assert_eq!(m.layer(LayerRole::Above).unwrap().occupied_count(), 1);
    }

    #[test]
    fn vertical_wall_shows_in_below_ground_above() {
        // Wall face at x = 2.05, y in [-0.5, 0.5], sampled for z in [-1, 2].
        let spec = LayerSpec::for_height(1.1).unwrap();
        let mut pts = Vec::new();
        for iy in 0..=20 {
            for iz in 0..=60 {
                let y = -0.5 + 0.05 * iy as f64 + 0.01;
                let z = -1.0 + 0.05 * iz as f64 + 0.001;
                pts.push(pt(2.05, y, z, 200.0));
            }
        }
        let m = build_multilayer(&pts, &spec, geom());
        let footprint: Vec<Cell> = (95..=105).map(|c| Cell::new(120, c)).collect();
        for role in [
            LayerRole::Below,
            LayerRole::Ground,
            LayerRole::Above,
            LayerRole::GlassProbe,
        ] {
            let l = m.layer(role).unwrap();
            assert_eq!(l.occupied_count(), footprint.len(), "{role:?}");
            assert!(footprint.iter().all(|&c| l.is_occupied(c)), "{role:?}");
        }
    }

    #[test]
    fn overlapping_custom_stack_is_rejected() {
        let a = HeightInterval::closed(0.0, 1.0).unwrap();
        let b = HeightInterval::closed(1.0, 2.0).unwrap();
        assert!(build_stack::<f64>(&[], &[a, b], geom()).is_err());
        let b = HeightInterval::open_closed(1.0, 2.0).unwrap();
        assert_eq!(build_stack::<f64>(&[], &[a, b], geom()).unwrap().len(), 2);
    }

    #[test]
    fn f32_layer_matches_f64() {
        let g32 = GridGeometry::<f32>::new(20, 0.5).unwrap();
        let iv = HeightInterval::<f32>::closed(-1.0, 1.0).unwrap();
        let pts = [IntensityPoint::new(1.2f32, -0.3, 0.0, 10.0)];
        let l = build_layer(&pts, iv, g32);
        let cell = g32.world_to_cell(1.2, -0.3).unwrap();
        assert_eq!(l.value(cell), 40.0);
    }

    fn cloud() -> impl Strategy<Value = Vec<IntensityPoint<f64>>> {
        prop::collection::vec(
            (-3.0f64..3.0, -3.0f64..3.0, -0.8f64..0.8, 0u8..=255)
                .prop_map(|(x, y, z, i)| pt(x, y, z, i as f64)),
            0..120,
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn matches_oracle(points in cloud()) {
            let g = GridGeometry::new(60, 0.1).unwrap();
            let iv = HeightInterval::closed_open(-0.5, 0.5).unwrap();
            prop_assert_eq!(build_layer(&points, iv, g).values(), oracle(&points, iv, g));
        }

        #[test]
        fn disjoint_union_is_additive(a in cloud(), b in cloud()) {
            let iv = HeightInterval::closed(-0.8, 0.8).unwrap();
            let mut ab = a.clone();
            ab.extend_from_slice(&b);
            let whole = build_layer(&ab, iv, geom());
            let parts = build_layer(&a, iv, geom()).merged(&build_layer(&b, iv, geom())).unwrap();
            // Integer intensities: sums are exact in either order.
            prop_assert_eq!(whole.values(), parts.values());
        }

        #[test]
        fn each_point_lands_in_at_most_one_layer(points in cloud()) {
            let spec = LayerSpec::for_height(0.6).unwrap();
            let m = build_multilayer(&points, &spec, geom());
            let total: u32 = m.layers().iter()
                .map(|l| (0..geom().cell_count()).map(|i| l.count_at(i)).sum::<u32>())
                .sum();
            let expected = points.iter()
                .filter(|p| LayerRole::ALL.iter().any(|&r| spec.interval(r).contains(p.z)))
                .count();
            prop_assert_eq!(total as usize, expected);
        }
    }
}
