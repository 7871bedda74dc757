//! Image and text exports.
//!
//! Images put `+x` (forward) at the top and `+y` (left) on the left: pixel
//! `(i, j)` shows cell `(n - 1 - i, n - 1 - j)`. Grayscale layers scale
//! linearly, `round(255 * clamp(v / full_scale, 0, 1))`, and record
//! `full_scale` in a header comment.
//!
//! Plan-map colors:
//!
//! | class          | RGB             |
//! |----------------|-----------------|
//! | free           | `0, 0, 0`       |
//! | solid (TP)     | `255, 255, 255` |
//! | inflation      | `128, 128, 128` |
//! | passable (FP)  | `0, 255, 0`     |
//! | glass (FN)     | `255, 255, 0`   |
//! | robot          | `255, 105, 180` |
//! | goal           | `0, 0, 255`     |

use std::fmt::Write as _;

use crate::classifier::{ClassifiedMaps, ObstacleClass};
use crate::geometry::{Cell, GridGeometry, IntensityPoint};
use crate::grid::Grid;
use crate::inflation::{PlanClass, PlanMap};
use crate::map_builder::LayerGrid;
use crate::scalar::Real;

pub type Rgb = [u8; 3];

pub const FREE: Rgb = [0, 0, 0];
pub const SOLID: Rgb = [255, 255, 255];
pub const INFLATED: Rgb = [128, 128, 128];
pub const PASSABLE: Rgb = [0, 255, 0];
pub const GLASS: Rgb = [255, 255, 0];
pub const ROBOT: Rgb = [255, 105, 180];
pub const GOAL: Rgb = [0, 0, 255];

pub fn plan_color(class: PlanClass) -> Rgb {
    match class {
        PlanClass::Free => FREE,
        PlanClass::Tp => SOLID,
        PlanClass::Inflated => INFLATED,
        PlanClass::Fp => PASSABLE,
        PlanClass::Fn => GLASS,
    }
}

fn image_cell(n: usize, i: usize, j: usize) -> Cell {
    Cell::new(n - 1 - i, n - 1 - j)
}

/// Binary PGM of any grid through `shade`.
fn pgm<V, T: Real>(grid: &Grid<V, T>, comment: &str, shade: impl Fn(&V) -> u8) -> Vec<u8> {
    let n = grid.geometry().n();
    let mut out = format!("P5\n# {comment}\n{n} {n}\n255\n").into_bytes();
    for i in 0..n {
        for j in 0..n {
            out.push(shade(grid.get(image_cell(n, i, j))));
        }
    }
    out
}

fn gray<T: Real>(v: T, full_scale: T) -> u8 {
    let f = (v / full_scale).max(T::zero()).min(T::one()).as_f64();
    (255.0 * f).round() as u8
}

/// Layer values (`sum / g^2`) as 8-bit grayscale.
pub fn layer_pgm<T: Real>(layer: &LayerGrid<T>, full_scale: T) -> Vec<u8> {
    let grid = Grid::from_vec(*layer.geometry(), layer.values()).expect("layer size");
    value_pgm(&grid, full_scale)
}

pub fn value_pgm<T: Real>(grid: &Grid<T, T>, full_scale: T) -> Vec<u8> {
    pgm(grid, &format!("full_scale={full_scale}"), |&v| {
        gray(v, full_scale)
    })
}

/// Binary PPM of the plan map with optional robot and goal markers.
pub fn plan_ppm<T: Real>(plan: &PlanMap<T>, robot: Option<Cell>, goal: Option<Cell>) -> Vec<u8> {
    let colors = plan.class.map(|&c| plan_color(c));
    rgb_ppm(&colors, robot, goal)
}

/// Classifier labels: solid white, passable green, free black.
pub fn labels_ppm<T: Real>(maps: &ClassifiedMaps<T>) -> Vec<u8> {
    let colors = maps.labels.map(|c| match c {
        ObstacleClass::Free => FREE,
        ObstacleClass::Tp => SOLID,
        ObstacleClass::Fp => PASSABLE,
    });
    rgb_ppm(&colors, None, None)
}

fn rgb_ppm<T: Real>(colors: &Grid<Rgb, T>, robot: Option<Cell>, goal: Option<Cell>) -> Vec<u8> {
    let n = colors.geometry().n();
    let mut out = format!("P6\n{n} {n}\n255\n").into_bytes();
    for i in 0..n {
        for j in 0..n {
            let cell = image_cell(n, i, j);
            let rgb = if Some(cell) == robot {
                ROBOT
            } else if Some(cell) == goal {
                GOAL
            } else {
                *colors.get(cell)
            };
            out.extend_from_slice(&rgb);
        }
    }
    out
}

/// Goal marker cell for a robot-frame goal, clamped to the map border.
pub fn goal_cell<T: Real>(geometry: &GridGeometry<T>, goal: (T, T)) -> Cell {
    let lim = geometry.half_extent() - geometry.resolution() * T::of(0.5);
    let clamp = |v: T| v.max(-lim).min(lim);
    geometry
        .world_to_cell(clamp(goal.0), clamp(goal.1))
        .expect("clamped into the grid")
}

pub fn points_csv<T: Real>(points: &[IntensityPoint<T>]) -> String {
    let mut out = String::from("x,y,z,intensity\n");
    for p in points {
        writeln!(out, "{:.6},{:.6},{:.6},{:.6}", p.x, p.y, p.z, p.intensity).unwrap();
    }
    out
}

/// Nonzero cells as `row,col,value`.
pub fn grid_csv<T: Real>(grid: &Grid<T, T>) -> String {
    let mut out = String::from("row,col,value\n");
    for (cell, &v) in grid.iter_cells() {
        if v != T::zero() {
            writeln!(out, "{},{},{:.6}", cell.row, cell.col, v).unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::HeightInterval;
    use crate::inflation::InflationMode;
    use crate::map_builder::build_layer;

    fn geom() -> GridGeometry<f64> {
        GridGeometry::new(4, 0.5).unwrap()
    }

    #[test]
    fn empty_plan_is_black() {
        let plan = PlanMap::empty(geom(), InflationMode::Adaptive);
        let img = plan_ppm(&plan, None, None);
        let header = b"P6\n4 4\n255\n";
        assert_eq!(&img[..header.len()], header);
        assert!(img[header.len()..].iter().all(|&b| b == 0));
        assert_eq!(img.len(), header.len() + 48);
    }

    #[test]
    fn orientation_and_markers() {
        let mut plan = PlanMap::empty(geom(), InflationMode::Adaptive);
        // Forward-right corner cell: largest row, smallest col.
        plan.class.set(Cell::new(3, 0), PlanClass::Fn);
        let img = plan_ppm(&plan, Some(Cell::new(2, 2)), Some(Cell::new(0, 3)));
        let px = |i: usize, j: usize| {
            let o = 11 + 3 * (4 * i + j);
            [img[o], img[o + 1], img[o + 2]]
        };
        // Top row, rightmost column.
        assert_eq!(px(0, 3), GLASS);
        assert_eq!(px(1, 1), ROBOT);
        assert_eq!(px(3, 0), GOAL);
    }

    #[test]
    fn gray_scaling() {
        let pts = [IntensityPoint::new(0.1, 0.1, 0.0, 0.5)];
        let layer = build_layer(&pts, HeightInterval::closed(-1.0, 1.0).unwrap(), geom());
        // value = 0.5 / 0.25 = 2.0; half of full scale 4.0 -> 128.
        let img = layer_pgm(&layer, 4.0);
        let text = String::from_utf8_lossy(&img[..30]).to_string();
        assert!(text.starts_with("P5\n# full_scale=4\n4 4\n255\n"), "{text}");
        let body = &img[img.len() - 16..];
        assert_eq!(body.iter().filter(|&&b| b != 0).count(), 1);
        assert_eq!(body[4 + 1], 128);
    }

    #[test]
    fn goal_marker_clamps() {
        let g = GridGeometry::new(200, 0.1).unwrap();
        assert_eq!(goal_cell(&g, (50.0, 0.0)), Cell::new(199, 100));
        assert_eq!(goal_cell(&g, (1.0, -1.0)), Cell::new(110, 90));
    }
}
