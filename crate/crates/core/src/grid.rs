use crate::error::{Error, Result};
use crate::geometry::{Cell, GridGeometry};
use crate::scalar::Real;

/// Dense row-major `n x n` grid of values sharing a [`GridGeometry`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<V, T = f64> {
    geometry: GridGeometry<T>,
    data: Vec<V>,
}

impl<V: Clone, T: Real> Grid<V, T> {
    pub fn filled(geometry: GridGeometry<T>, value: V) -> Self {
        Self {
            data: vec![value; geometry.cell_count()],
            geometry,
        }
    }
}

impl<V, T: Real> Grid<V, T> {
    pub fn from_vec(geometry: GridGeometry<T>, data: Vec<V>) -> Result<Self> {
        if data.len() != geometry.cell_count() {
            return Err(Error::GeometryMismatch("data length does not match n*n"));
        }
        Ok(Self { geometry, data })
    }

    pub fn geometry(&self) -> &GridGeometry<T> {
        &self.geometry
    }

    pub fn get(&self, cell: Cell) -> &V {
        &self.data[self.geometry.index(cell)]
    }

    pub fn get_mut(&mut self, cell: Cell) -> &mut V {
        let i = self.geometry.index(cell);
        &mut self.data[i]
    }

    pub fn set(&mut self, cell: Cell, value: V) {
        *self.get_mut(cell) = value;
    }

    /// Value at signed coordinates, `None` outside the grid.
    pub fn get_signed(&self, row: i64, col: i64) -> Option<&V> {
        if self.geometry.contains(row, col) {
            Some(&self.data[row as usize * self.geometry.n() + col as usize])
        } else {
            None
        }
    }

    pub fn as_slice(&self) -> &[V] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [V] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<V> {
        self.data
    }

    /// Iterates `(cell, value)` in row-major order.
    pub fn iter_cells(&self) -> impl Iterator<Item = (Cell, &V)> + '_ {
        let n = self.geometry.n();
        self.data
            .iter()
            .enumerate()
            .map(move |(i, v)| (Cell::new(i / n, i % n), v))
    }

    pub fn map<W>(&self, f: impl FnMut(&V) -> W) -> Grid<W, T> {
        Grid {
            geometry: self.geometry,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn same_geometry<W>(&self, other: &Grid<W, T>) -> bool {
        self.geometry == other.geometry
    }
}

/// Binary occupancy grid.
pub type Mask<T = f64> = Grid<bool, T>;

impl<T: Real> Grid<bool, T> {
    pub fn count_set(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn set_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.iter_cells().filter(|(_, &b)| b).map(|(c, _)| c)
    }
}
