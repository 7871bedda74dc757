//! Frames, points and grid index math.
//!
//! Robot and sensor frames coincide: `x` forward, `y` left, `z` up. Grids are
//! robot-centric with the robot at cell `(n/2, n/2)`; the row index grows with
//! `+x` and the column index with `+y`. Cell `(r, c)` covers the half-open
//! extent `[(r - n/2) g, (r - n/2 + 1) g) x [(c - n/2) g, (c - n/2 + 1) g)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// One reflected lidar return in the sensor frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityPoint<T = f64> {
    pub x: T,
    pub y: T,
    pub z: T,
    pub intensity: T,
}

impl<T: Real> IntensityPoint<T> {
    pub fn new(x: T, y: T, z: T, intensity: T) -> Self {
        Self { x, y, z, intensity }
    }

    /// `true` when the coordinates are finite and `0 <= intensity <= max_intensity`.
    pub fn is_valid(&self, max_intensity: T) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && self.z.is_finite()
            && self.intensity >= T::zero()
            && self.intensity <= max_intensity
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    /// Chebyshev distance in cells.
    pub fn chebyshev(self, other: Cell) -> usize {
        self.row
            .abs_diff(other.row)
            .max(self.col.abs_diff(other.col))
    }
}

/// Square robot-centric grid layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry<T = f64> {
    n: usize,
    resolution: T,
}

impl<T: Real> GridGeometry<T> {
    /// `n` cells per side (even, at least 2) of edge `resolution` meters.
    pub fn new(n: usize, resolution: T) -> Result<Self> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGeometry(format!(
                "n must be even and >= 2, got {n}"
            )));
        }
        if !(resolution > T::zero() && resolution.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "cell size must be positive and finite, got {resolution}"
            )));
        }
        Ok(Self { n, resolution })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Cell edge length in meters.
    pub fn resolution(&self) -> T {
        self.resolution
    }

    pub fn cell_count(&self) -> usize {
        self.n * self.n
    }

    /// Half the side length of the mapped square, `n g / 2`.
    pub fn half_extent(&self) -> T {
        T::of(self.n as f64 / 2.0) * self.resolution
    }

    pub fn center_cell(&self) -> Cell {
        Cell::new(self.n / 2, self.n / 2)
    }

    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.n + cell.col
    }

    pub fn cell_of_index(&self, index: usize) -> Cell {
        Cell::new(index / self.n, index % self.n)
    }

    pub fn contains(&self, row: i64, col: i64) -> bool {
        let n = self.n as i64;
        (0..n).contains(&row) && (0..n).contains(&col)
    }

    /// Bins a point into its cell, or `None` when `|x|` or `|y|` is at least
    /// `n g / 2`.
    pub fn world_to_cell(&self, x: T, y: T) -> Option<Cell> {
        let half = self.half_extent();
        // Written so that NaN falls through to `None`.
        if !(x.abs() < half && y.abs() < half) {
            return None;
        }
        let offset = (self.n / 2) as i64;
        let row = (x / self.resolution).floor().to_i64()? + offset;
        let col = (y / self.resolution).floor().to_i64()? + offset;
        if self.contains(row, col) {
            Some(Cell::new(row as usize, col as usize))
        } else {
            None
        }
    }

    /// Lower corner `(x_low, y_low)` of a cell's extent.
    pub fn cell_to_world(&self, row: usize, col: usize) -> Result<(T, T)> {
        if row >= self.n || col >= self.n {
            return Err(Error::CellOutOfRange {
                row,
                col,
                n: self.n,
            });
        }
        let half = (self.n / 2) as f64;
        Ok((
            T::of(row as f64 - half) * self.resolution,
            T::of(col as f64 - half) * self.resolution,
        ))
    }

    /// Midpoint of a cell's extent. Panics on an out-of-range cell.
    pub fn cell_center(&self, cell: Cell) -> (T, T) {
        assert!(cell.row < self.n && cell.col < self.n, "cell out of range");
        let half = (self.n / 2) as f64;
        (
            T::of(cell.row as f64 - half + 0.5) * self.resolution,
            T::of(cell.col as f64 - half + 0.5) * self.resolution,
        )
    }
}

/// Which end of a [`HeightInterval`] is included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bound {
    Closed,
    Open,
}

/// Range of sensor-frame heights `z` aggregated into one layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeightInterval<T = f64> {
    pub low: T,
    pub high: T,
    pub low_bound: Bound,
    pub high_bound: Bound,
}

impl<T: Real> HeightInterval<T> {
    pub fn new(low: T, high: T, low_bound: Bound, high_bound: Bound) -> Result<Self> {
        if !(low <= high) || !low.is_finite() || !high.is_finite() {
            return Err(Error::InvalidInterval {
                low: low.as_f64(),
                high: high.as_f64(),
            });
        }
        Ok(Self {
            low,
            high,
            low_bound,
            high_bound,
        })
    }

    /// `[low, high]`
    pub fn closed(low: T, high: T) -> Result<Self> {
        Self::new(low, high, Bound::Closed, Bound::Closed)
    }

    /// `[low, high)`
    pub fn closed_open(low: T, high: T) -> Result<Self> {
        Self::new(low, high, Bound::Closed, Bound::Open)
    }

    /// `(low, high]`
    pub fn open_closed(low: T, high: T) -> Result<Self> {
        Self::new(low, high, Bound::Open, Bound::Closed)
    }

    pub fn contains(&self, z: T) -> bool {
        let above_low = match self.low_bound {
            Bound::Closed => z >= self.low,
            Bound::Open => z > self.low,
        };
        let below_high = match self.high_bound {
            Bound::Closed => z <= self.high,
            Bound::Open => z < self.high,
        };
        above_low && below_high
    }

    pub fn is_empty(&self) -> bool {
        self.low == self.high && (self.low_bound == Bound::Open || self.high_bound == Bound::Open)
    }

    /// `true` when some height lies in both intervals.
    pub fn overlaps(&self, other: &Self) -> bool {
        if self.is_empty() || other.is_empty() {
            return false;
        }
        let (lo, lo_closed) = if self.low > other.low {
            (self.low, self.low_bound == Bound::Closed)
        } else if other.low > self.low {
            (other.low, other.low_bound == Bound::Closed)
        } else {
            (
                self.low,
                self.low_bound == Bound::Closed && other.low_bound == Bound::Closed,
            )
        };
        let (hi, hi_closed) = if self.high < other.high {
            (self.high, self.high_bound == Bound::Closed)
        } else if other.high < self.high {
            (other.high, other.high_bound == Bound::Closed)
        } else {
            (
                self.high,
                self.high_bound == Bound::Closed && other.high_bound == Bound::Closed,
            )
        };
        lo < hi || (lo == hi && lo_closed && hi_closed)
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle<T: Real>(angle: T) -> T {
    let two_pi = T::PI() + T::PI();
    let mut a = angle % two_pi;
    if a > T::PI() {
        a -= two_pi;
    } else if a <= -T::PI() {
        a += two_pi;
    }
    a
}

/// Planar pose in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2<T = f64> {
    pub x: T,
    pub y: T,
    pub yaw: T,
}

impl<T: Real> Pose2<T> {
    pub fn new(x: T, y: T, yaw: T) -> Self {
        Self { x, y, yaw }
    }

    /// Expresses a world point in this pose's frame.
    pub fn to_local(&self, wx: T, wy: T) -> (T, T) {
        let (s, c) = self.yaw.sin_cos();
        let dx = wx - self.x;
        let dy = wy - self.y;
        (c * dx + s * dy, -s * dx + c * dy)
    }

    /// Maps a point in this pose's frame to the world frame.
    pub fn to_world(&self, lx: T, ly: T) -> (T, T) {
        let (s, c) = self.yaw.sin_cos();
        (self.x + c * lx - s * ly, self.y + s * lx + c * ly)
    }

    pub fn distance_to(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Linear and angular velocity command.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist<T = f64> {
    pub v: T,
    pub omega: T,
}

impl<T: Real> Twist<T> {
    pub fn new(v: T, omega: T) -> Self {
        Self { v, omega }
    }
}

/// Robot pose and current velocity; the goal is carried separately in world
/// coordinates and projected into the robot frame with [`Pose2::to_local`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotState<T = f64> {
    pub pose: Pose2<T>,
    pub twist: Twist<T>,
}

impl<T: Real> RobotState<T> {
    pub fn at(pose: Pose2<T>) -> Self {
        Self {
            pose,
            twist: Twist::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geom() -> GridGeometry<f64> {
        GridGeometry::new(200, 0.1).unwrap()
    }

    #[test]
    fn robot_center_maps_to_center_cell() {
        assert_eq!(geom().world_to_cell(0.0, 0.0), Some(Cell::new(100, 100)));
    }

    #[test]
    fn lower_boundary_is_out_of_bounds() {
        assert_eq!(geom().world_to_cell(-10.0, 0.0), None);
        assert_eq!(geom().world_to_cell(10.0, 0.0), None);
        assert_eq!(geom().world_to_cell(0.0, f64::NAN), None);
    }

    #[test]
    fn fractional_point_bins_like_brute_force_scan() {
        let g = geom();
        assert_eq!(g.world_to_cell(0.37, -0.52), Some(Cell::new(103, 94)));
        // Oracle: scan every cell extent.
        let (x, y) = (0.37, -0.52);
        let mut hits = Vec::new();
        for r in 0..200 {
            for c in 0..200 {
                let (xl, yl) = g.cell_to_world(r, c).unwrap();
                if x >= xl && x < xl + 0.1 && y >= yl && y < yl + 0.1 {
                    hits.push(Cell::new(r, c));
                }
            }
        }
        assert_eq!(hits, vec![Cell::new(103, 94)]);
    }

    #[test]
    fn cell_to_world_corners() {
        let g = geom();
        assert_eq!(g.cell_to_world(100, 100).unwrap(), (0.0, 0.0));
        let (x, y) = g.cell_to_world(0, 0).unwrap();
        assert!((x + 10.0).abs() < 1e-12 && (y + 10.0).abs() < 1e-12);
        assert!(matches!(
            g.cell_to_world(200, 0),
            Err(Error::CellOutOfRange { .. })
        ));
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(GridGeometry::<f64>::new(201, 0.1).is_err());
        assert!(GridGeometry::<f64>::new(0, 0.1).is_err());
        assert!(GridGeometry::<f64>::new(10, 0.0).is_err());
        assert!(GridGeometry::<f32>::new(10, -1.0).is_err());
    }

    #[test]
    fn interval_overlap() {
        let below = HeightInterval::closed_open(-0.6, -0.2).unwrap();
        let probe = HeightInterval::closed_open(-0.2, -0.1).unwrap();
        let ground = HeightInterval::closed(-0.05, 0.05).unwrap();
        let above = HeightInterval::open_closed(0.05, 0.6).unwrap();
        assert!(!below.overlaps(&probe));
        assert!(!ground.overlaps(&above));
        assert!(!probe.overlaps(&ground));
        assert!(ground.overlaps(&HeightInterval::closed(0.05, 0.1).unwrap()));
        assert!(HeightInterval::closed(1.0, 0.0).is_err());
    }

    #[test]
    fn angle_wraps_to_half_open_range() {
        let pi = std::f64::consts::PI;
        assert!((normalize_angle(-pi) - pi).abs() < 1e-12);
        assert!((normalize_angle(3.0 * pi) - pi).abs() < 1e-9);
        assert!((normalize_angle(0.5f64) - 0.5).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn cell_midpoint_round_trips(r in 0usize..200, c in 0usize..200) {
            let g = geom();
            let (xl, yl) = g.cell_to_world(r, c).unwrap();
            prop_assert_eq!(g.world_to_cell(xl + 0.05, yl + 0.05), Some(Cell::new(r, c)));
            let (cx, cy) = g.cell_center(Cell::new(r, c));
            prop_assert_eq!(g.world_to_cell(cx, cy), Some(Cell::new(r, c)));
        }

        #[test]
        fn f32_midpoint_round_trips(r in 0usize..64, c in 0usize..64) {
            let g = GridGeometry::<f32>::new(64, 0.25).unwrap();
            let (cx, cy) = g.cell_center(Cell::new(r, c));
            prop_assert_eq!(g.world_to_cell(cx, cy), Some(Cell::new(r, c)));
        }

        #[test]
        fn binned_point_lies_in_its_extent(x in -9.99f64..9.99, y in -9.99f64..9.99) {
            let g = geom();
            let cell = g.world_to_cell(x, y).unwrap();
            let (xl, yl) = g.cell_to_world(cell.row, cell.col).unwrap();
            // Tolerance covers the division in the forward map.
            prop_assert!(x >= xl - 1e-9 && x < xl + 0.1 + 1e-9);
            prop_assert!(y >= yl - 1e-9 && y < yl + 0.1 + 1e-9);
        }

        #[test]
        fn local_world_round_trip(px in -5.0f64..5.0, py in -5.0f64..5.0, yaw in -3.1f64..3.1,
                                  wx in -5.0f64..5.0, wy in -5.0f64..5.0) {
            let pose = Pose2::new(px, py, yaw);
            let (lx, ly) = pose.to_local(wx, wy);
            let (bx, by) = pose.to_world(lx, ly);
            prop_assert!((bx - wx).abs() < 1e-9 && (by - wy).abs() < 1e-9);
        }
    }
}
