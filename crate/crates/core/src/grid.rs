//! Uniform meshes on a symmetric box `[-L, L]`.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub const MIN_POINTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Closed endpoints `±L` are unknowns; values beyond them vanish.
    Dirichlet,
    /// `x_{n} ≡ x_0`; the mesh excludes `+L`.
    Periodic,
}

/// Uniform 1D mesh.
///
/// Dirichlet: `x_j = (2j - (n-1)) L/(n-1)`, `h = 2L/(n-1)`.
/// Periodic: `x_j = (j - n/2) h`, `h = 2L/n`, with `n` even so that `x_{n/2} = 0`.
///
/// Coordinates are computed from the integer index in a single multiplication,
/// so they are bit-reproducible from `(L, n, boundary)` and the Dirichlet mesh is
/// exactly antisymmetric (`x_{n-1-j} = -x_j`).
#[derive(Debug, Clone)]
pub struct Grid {
    half_width: f64,
    n: usize,
    h: f64,
    boundary: Boundary,
    x: Vec<f64>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.boundary == other.boundary
            && self.half_width.to_bits() == other.half_width.to_bits()
    }
}

impl Grid {
    pub fn new(half_width: f64, n: usize, boundary: Boundary) -> Result<Self> {
        if !half_width.is_finite() || half_width <= 0.0 {
            return Err(LabError::InvalidParameter(format!(
                "half width must be finite and positive, got {half_width}"
            )));
        }
        if n < MIN_POINTS {
            return Err(LabError::InvalidParameter(format!(
                "grid needs at least {MIN_POINTS} points, got {n}"
            )));
        }
        let (h, x) = match boundary {
            Boundary::Dirichlet => {
                let step = half_width / (n - 1) as f64;
                let x = (0..n)
                    .map(|j| (2 * j as i64 - (n as i64 - 1)) as f64 * step)
                    .collect();
                (2.0 * half_width / (n - 1) as f64, x)
            }
            Boundary::Periodic => {
                if n % 2 != 0 {
                    return Err(LabError::InvalidParameter(format!(
                        "periodic grids need an even point count, got {n}"
                    )));
                }
                let h = 2.0 * half_width / n as f64;
                let x = (0..n).map(|j| (j as i64 - (n / 2) as i64) as f64 * h).collect();
                (h, x)
            }
        };
        Ok(Grid {
            half_width,
            n,
            h,
            boundary,
            x,
        })
    }

    pub fn dirichlet(half_width: f64, n: usize) -> Result<Self> {
        Self::new(half_width, n, Boundary::Dirichlet)
    }

    pub fn periodic(half_width: f64, n: usize) -> Result<Self> {
        Self::new(half_width, n, Boundary::Periodic)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn points(&self) -> &[f64] {
        &self.x
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x[j]
    }

    /// Same box, `factor` times as many intervals.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let n = match self.boundary {
            Boundary::Dirichlet => (self.n - 1) * factor + 1,
            Boundary::Periodic => self.n * factor,
        };
        Self::new(self.half_width, n, self.boundary)
    }

    /// Index of the grid point closest to `x`.
    pub fn nearest_index(&self, x: f64) -> usize {
        let j = ((x - self.x[0]) / self.h).round();
        (j.max(0.0) as usize).min(self.n - 1)
    }

    pub(crate) fn require_dirichlet(&self) -> Result<()> {
        match self.boundary {
            Boundary::Dirichlet => Ok(()),
            Boundary::Periodic => Err(LabError::UnsupportedBoundary {
                required: "dirichlet",
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_points_on_unit_box() {
        let g = Grid::dirichlet(1.0, 17).unwrap();
        assert_eq!(g.x(0), -1.0);
        assert_eq!(g.x(8), 0.0);
        assert_eq!(g.x(16), 1.0);
        for j in 0..16 {
            assert_eq!(g.x(j + 1) - g.x(j), 0.125);
        }
    }

    #[test]
    fn spacing_by_boundary_kind() {
        let d = Grid::dirichlet(40.0, 4096).unwrap();
        assert_eq!(d.spacing(), 80.0 / 4095.0);
        let p = Grid::periodic(40.0, 4096).unwrap();
        assert_eq!(p.spacing(), 80.0 / 4096.0);
        assert_eq!(p.x(2048), 0.0);
    }

    #[test]
    fn dirichlet_mesh_is_antisymmetric() {
        let g = Grid::dirichlet(40.0, 1000).unwrap();
        for j in 0..g.len() {
            assert_eq!(g.x(j), -g.x(g.len() - 1 - j));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Grid::dirichlet(1.0, 3).is_err());
        assert!(Grid::dirichlet(f64::NAN, 64).is_err());
        assert!(Grid::dirichlet(-1.0, 64).is_err());
        assert!(Grid::periodic(1.0, 33).is_err());
    }

    #[test]
    fn refinement_halves_spacing() {
        let g = Grid::dirichlet(10.0, 101).unwrap();
        let f = g.refined(2).unwrap();
        assert_eq!(f.len(), 201);
        assert!((g.spacing() / f.spacing() - 2.0).abs() < 1e-14);
    }
}
