//! Solid versus passable obstacle classification.
//!
//! A cell occupied in any of the ground, above and below layers is passable
//! (FP) when the mean return intensity of all three layers is at most the
//! threshold, and solid (TP) otherwise. Layers without returns count as 0.
//! The map value written for either class is the largest of the three layer
//! values at that cell.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::GridGeometry;
use crate::grid::Grid;
use crate::map_builder::{LayerGrid, LayerRole, MultiLayerMap};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleClass {
    Free,
    /// Solid obstacle.
    Tp,
    /// Passable obstacle.
    Fp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams<T = f64> {
    /// Mean-intensity threshold, in the same units as the point intensities.
    pub gamma: T,
}

impl<T: Real> ClassifierParams<T> {
    /// Validates `0 < gamma < max_intensity`.
    pub fn new(gamma: T, max_intensity: T) -> Result<Self> {
        if !(gamma > T::zero() && gamma < max_intensity) {
            return Err(invalid(
                "gamma",
                format!("must lie in (0, {max_intensity})"),
            ));
        }
        Ok(Self { gamma })
    }

    pub fn from_fraction(fraction: T, max_intensity: T) -> Result<Self> {
        Self::new(fraction * max_intensity, max_intensity)
    }
}

#[derive(Debug, Clone)]
pub struct ClassifiedMaps<T = f64> {
    pub tp: Grid<T, T>,
    pub fp: Grid<T, T>,
    pub labels: Grid<ObstacleClass, T>,
}

impl<T: Real> ClassifiedMaps<T> {
    pub fn geometry(&self) -> &GridGeometry<T> {
        self.labels.geometry()
    }

    pub fn count(&self, class: ObstacleClass) -> usize {
        self.labels
            .as_slice()
            .iter()
            .filter(|&&c| c == class)
            .count()
    }
}

pub fn classify<T: Real>(
    ground: &LayerGrid<T>,
    above: &LayerGrid<T>,
    below: &LayerGrid<T>,
    params: &ClassifierParams<T>,
) -> Result<ClassifiedMaps<T>> {
    let geometry = *ground.geometry();
    if above.geometry() != &geometry || below.geometry() != &geometry {
        return Err(Error::GeometryMismatch("classifier layers"));
    }
    let mut tp = Grid::filled(geometry, T::zero());
    let mut fp = Grid::filled(geometry, T::zero());
    let mut labels = Grid::filled(geometry, ObstacleClass::Free);
    let layers = [ground, above, below];
    for i in 0..geometry.cell_count() {
        if !layers.iter().any(|l| l.is_occupied_at(i)) {
            continue;
        }
        let passable = layers.iter().all(|l| l.mean_at(i) <= params.gamma);
        let value = layers.iter().map(|l| l.value_at(i)).fold(T::zero(), T::max);
        if passable {
            fp.as_mut_slice()[i] = value;
            labels.as_mut_slice()[i] = ObstacleClass::Fp;
        } else {
            tp.as_mut_slice()[i] = value;
            labels.as_mut_slice()[i] = ObstacleClass::Tp;
        }
    }
    Ok(ClassifiedMaps { tp, fp, labels })
}

/// [`classify`] on the standard layers of a multi-layer map.
pub fn classify_map<T: Real>(
    map: &MultiLayerMap<T>,
    params: &ClassifierParams<T>,
) -> Result<ClassifiedMaps<T>> {
    let layer = |role| {
        map.layer(role)
            .ok_or_else(|| Error::InvalidLayerSpec(format!("map has no {role:?} layer")))
    };
    classify(
        layer(LayerRole::Ground)?,
        layer(LayerRole::Above)?,
        layer(LayerRole::Below)?,
        params,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Cell, HeightInterval};
    use proptest::prelude::*;

    const R: f64 = 255.0;

    fn geom() -> GridGeometry<f64> {
        GridGeometry::new(20, 0.1).unwrap()
    }

    fn layer(vals: &[(Cell, f64)]) -> LayerGrid<f64> {
        let mut l = LayerGrid::empty(geom(), HeightInterval::closed(-1.0, 1.0).unwrap());
        for &(c, v) in vals {
            l.accumulate(c, v);
        }
        l
    }

    fn params() -> ClassifierParams<f64> {
        ClassifierParams::from_fraction(0.5, R).unwrap()
    }

    #[test]
    fn all_zero_layers_are_free() {
        let e = layer(&[]);
        let m = classify(&e, &e, &e, &params()).unwrap();
        assert_eq!(m.count(ObstacleClass::Free), 400);
        assert!(m
            .tp
            .as_slice()
            .iter()
            .chain(m.fp.as_slice())
            .all(|&v| v == 0.0));
    }

    #[test]
    fn bright_cell_is_solid_with_max_value() {
        let c = Cell::new(3, 4);
        let m = classify(
            &layer(&[(c, 0.9 * R)]),
            &layer(&[(c, 0.8 * R)]),
            &layer(&[(c, 0.85 * R)]),
            &params(),
        )
        .unwrap();
        assert_eq!(*m.labels.get(c), ObstacleClass::Tp);
        assert!((m.tp.get(c) - 0.9 * R / 0.01).abs() < 1e-9);
        assert_eq!(*m.fp.get(c), 0.0);
    }

    #[test]
    fn dim_cell_is_passable_with_max_value() {
        let c = Cell::new(10, 10);
        let m = classify(
            &layer(&[(c, 0.3 * R)]),
            &layer(&[(c, 0.2 * R)]),
            &layer(&[(c, 0.25 * R)]),
            &params(),
        )
        .unwrap();
        assert_eq!(*m.labels.get(c), ObstacleClass::Fp);
        assert!((m.fp.get(c) - 0.3 * R / 0.01).abs() < 1e-9);
    }

    #[test]
    fn threshold_is_inclusive() {
        let c = Cell::new(1, 1);
        let g = 0.5 * R;
        let l = layer(&[(c, g)]);
        let m = classify(&l, &l, &l, &params()).unwrap();
        assert_eq!(*m.labels.get(c), ObstacleClass::Fp);
    }

    #[test]
    fn low_solid_box_is_tp_from_below_layer_alone() {
        let c = Cell::new(5, 5);
        let m = classify(&layer(&[]), &layer(&[]), &layer(&[(c, 0.9 * R)]), &params()).unwrap();
        assert_eq!(*m.labels.get(c), ObstacleClass::Tp);
    }

    #[test]
    fn mean_not_density_drives_threshold() {
        // Many dim returns give a large layer value but a low mean.
        let c = Cell::new(7, 2);
        let dim: Vec<_> = (0..50).map(|_| (c, 0.3 * R)).collect();
        let l = layer(&dim);
        let m = classify(&l, &layer(&[]), &layer(&[]), &params()).unwrap();
        assert_eq!(*m.labels.get(c), ObstacleClass::Fp);
        assert!(*m.fp.get(c) > R);
    }

    #[test]
    fn mismatched_geometry_is_rejected() {
        let other = LayerGrid::empty(
            GridGeometry::new(10, 0.1).unwrap(),
            HeightInterval::closed(-1.0, 1.0).unwrap(),
        );
        let e = layer(&[]);
        assert!(matches!(
            classify(&e, &other, &e, &params()),
            Err(Error::GeometryMismatch(_))
        ));
    }

    #[test]
    fn gamma_must_be_inside_range() {
        assert!(ClassifierParams::new(0.0, R).is_err());
        assert!(ClassifierParams::new(R, R).is_err());
        assert!(ClassifierParams::new(1.0, R).is_ok());
    }

    fn random_layer() -> impl Strategy<Value = LayerGrid<f64>> {
        prop::collection::vec((0usize..20, 0usize..20, 0.0f64..R), 0..60).prop_map(|v| {
            layer(
                &v.into_iter()
                    .map(|(r, c, i)| (Cell::new(r, c), i))
                    .collect::<Vec<_>>(),
            )
        })
    }

    proptest! {
        #[test]
        fn partition_and_support(g in random_layer(), a in random_layer(), b in random_layer(),
                                 gamma in 1.0f64..254.0) {
            let p = ClassifierParams::new(gamma, R).unwrap();
            let m = classify(&g, &a, &b, &p).unwrap();
            for (cell, &label) in m.labels.iter_cells() {
                let any = g.is_occupied(cell) || a.is_occupied(cell) || b.is_occupied(cell);
                let tp = *m.tp.get(cell);
                let fp = *m.fp.get(cell);
                prop_assert!(tp == 0.0 || fp == 0.0);
                prop_assert_eq!(label == ObstacleClass::Free, !any);
                let max = g.value(cell).max(a.value(cell)).max(b.value(cell));
                match label {
                    ObstacleClass::Tp => prop_assert_eq!(tp, max),
                    ObstacleClass::Fp => prop_assert_eq!(fp, max),
                    ObstacleClass::Free => prop_assert!(tp == 0.0 && fp == 0.0),
                }
            }
        }

        #[test]
        fn fp_set_grows_with_gamma(g in random_layer(), a in random_layer(), b in random_layer(),
                                   lo in 1.0f64..200.0, step in 0.0f64..50.0) {
            let low = classify(&g, &a, &b, &ClassifierParams::new(lo, R).unwrap()).unwrap();
            let high = classify(&g, &a, &b, &ClassifierParams::new(lo + step, R).unwrap()).unwrap();
            for (cell, &label) in low.labels.iter_cells() {
                if label == ObstacleClass::Fp {
                    prop_assert_eq!(*high.labels.get(cell), ObstacleClass::Fp);
                }
            }
        }
    }
}
