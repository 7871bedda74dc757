use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialKind {
    /// Walls, trunks, furniture: every ray reflects at the surface.
    SolidOpaque,
    /// Glass: rays pass except near-horizontal ones, which sometimes reflect.
    Transparent,
    /// Grass, bead curtains: rays scatter back from a random depth inside the
    /// volume with probability `1 - pass_probability`.
    SparsePliable,
}

/// Reflectance model of a primitive. Intensities are fractions of the
/// sensor's maximum intensity `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub kind: MaterialKind,
    pub base_intensity: f64,
    pub pass_probability: f64,
    /// Standard deviation of the Gaussian intensity noise.
    pub scatter_sigma: f64,
    /// Reflection probability of a transparent surface for rays inside the
    /// grazing elevation window.
    #[serde(default = "default_grazing_reflectance")]
    pub grazing_reflectance: f64,
}

fn default_grazing_reflectance() -> f64 {
    0.3
}

impl Material {
    pub const DEFAULT_SIGMA: f64 = 0.03;

    pub fn opaque(base_intensity: f64) -> Self {
        Self {
            kind: MaterialKind::SolidOpaque,
            base_intensity,
            pass_probability: 0.0,
            scatter_sigma: Self::DEFAULT_SIGMA,
            grazing_reflectance: 0.0,
        }
    }

    pub fn concrete() -> Self {
        Self::opaque(0.9)
    }

    pub fn glass() -> Self {
        Self {
            kind: MaterialKind::Transparent,
            base_intensity: 0.2,
            pass_probability: 1.0,
            scatter_sigma: Self::DEFAULT_SIGMA,
            grazing_reflectance: 0.3,
        }
    }

    pub fn grass() -> Self {
        Self {
            kind: MaterialKind::SparsePliable,
            base_intensity: 0.3,
            pass_probability: 0.7,
            scatter_sigma: Self::DEFAULT_SIGMA,
            grazing_reflectance: 0.0,
        }
    }

    /// Built-in materials addressable by name from scene files.
    pub fn named(name: &str) -> Option<Self> {
        Some(match name {
            "concrete" | "wall" => Self::concrete(),
            "bark" | "trunk" => Self::opaque(0.85),
            "foliage" | "bush" => Self::opaque(0.8),
            "glass" => Self::glass(),
            "grass" => Self::grass(),
            "curtain" => Self {
                base_intensity: 0.25,
                ..Self::grass()
            },
            _ => return None,
        })
    }

    pub fn without_noise(mut self) -> Self {
        self.scatter_sigma = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.base_intensity) {
            return Err(invalid("base_intensity", "must lie in [0, 1]"));
        }
        if !unit(self.pass_probability) {
            return Err(invalid("pass_probability", "must lie in [0, 1]"));
        }
        if !unit(self.grazing_reflectance) {
            return Err(invalid("grazing_reflectance", "must lie in [0, 1]"));
        }
        if !(self.scatter_sigma >= 0.0 && self.scatter_sigma.is_finite()) {
            return Err(invalid("scatter_sigma", "must be non-negative"));
        }
        Ok(())
    }
}
