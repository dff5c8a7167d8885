//! Real trapping potentials `V(x)`.

use std::hash::{Hash, Hasher};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::Grid;

/// Analytic description of `V`, evaluable at any `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    Zero,
    /// `V(x) = -V₀ sech²(x/σ)`.
    ScaledSech2 { depth: f64, width: f64 },
    /// Linear interpolation of `(x, V)` samples, zero outside the table.
    Tabulated { x: Vec<f64>, v: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    kind: PotentialKind,
}

impl Potential {
    pub fn zero() -> Self {
        Potential {
            kind: PotentialKind::Zero,
        }
    }

    pub fn sech2(depth: f64, width: f64) -> Result<Self> {
        if !(depth.is_finite() && depth > 0.0) {
            return Err(LabError::InvalidParameter(format!(
                "sech² depth must be positive, got {depth}"
            )));
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(LabError::InvalidParameter(format!(
                "sech² width must be positive, got {width}"
            )));
        }
        Ok(Potential {
            kind: PotentialKind::ScaledSech2 { depth, width },
        })
    }

    pub fn tabulated(x: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if x.len() != v.len() || x.len() < 2 {
            return Err(LabError::Parse(
                "a potential table needs at least two (x, V) rows".into(),
            ));
        }
        if x.iter().chain(&v).any(|t| !t.is_finite()) {
            return Err(LabError::Parse("potential table has non-finite entries".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LabError::Parse(
                "potential table abscissae must be strictly increasing".into(),
            ));
        }
        Ok(Potential {
            kind: PotentialKind::Tabulated { x, v },
        })
    }

    /// Reads whitespace- or comma-separated `x V` rows; `#` starts a comment.
    pub fn from_table_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_table(&text)
    }

    pub fn parse_table(text: &str) -> Result<Self> {
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if cols.len() != 2 {
                return Err(LabError::Parse(format!(
                    "line {}: expected two columns, found {}",
                    lineno + 1,
                    cols.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| LabError::Parse(format!("line {}: {e}", lineno + 1)))
            };
            xs.push(parse(cols[0])?);
            vs.push(parse(cols[1])?);
        }
        Self::tabulated(xs, vs)
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::ScaledSech2 { depth, width } => {
                let c = (x / width).cosh();
                -depth / (c * c)
            }
            PotentialKind::Tabulated { x: xs, v } => {
                let n = xs.len();
                if x < xs[0] || x > xs[n - 1] {
                    return 0.0;
                }
                let j = match xs.binary_search_by(|p| p.total_cmp(&x)) {
                    Ok(j) => return v[j],
                    Err(j) => j,
                };
                let (x0, x1) = (xs[j - 1], xs[j]);
                let w = (x - x0) / (x1 - x0);
                v[j - 1] * (1.0 - w) + v[j] * w
            }
        }
    }

    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        grid.points().iter().map(|&x| self.eval(x)).collect()
    }

    /// Radius beyond which `|V| < tol`, searched outward from the origin.
    pub fn support_radius(&self, tol: f64) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::ScaledSech2 { depth, width } => {
                // sech²(y) < 4 e^{-2y}
                let y = 0.5 * (4.0 * depth / tol).ln();
                (y * width).max(0.0)
            }
            PotentialKind::Tabulated { x, v } => x
                .iter()
                .zip(v)
                .filter(|(_, vi)| vi.abs() >= tol)
                .map(|(xi, _)| xi.abs())
                .fold(0.0, f64::max),
        }
    }

    /// Fitted exponential decay rate of `|V|` over the outer quarter of the box,
    /// or `None` when `V` vanishes there identically.
    pub fn tail_decay_rate(&self, grid: &Grid) -> Option<f64> {
        let l = grid.half_width();
        let (x0, x1) = (0.5 * l, 0.75 * l);
        let (v0, v1) = (self.eval(x0).abs(), self.eval(x1).abs());
        let (w0, w1) = (self.eval(-x0).abs(), self.eval(-x1).abs());
        if v0 <= 0.0 || v1 <= 0.0 || w0 <= 0.0 || w1 <= 0.0 {
            return None;
        }
        let right = (v0.ln() - v1.ln()) / (x1 - x0);
        let left = (w0.ln() - w1.ln()) / (x1 - x0);
        Some(right.min(left))
    }

    /// Positivity of the fitted tail decay; vacuous for tables that vanish
    /// identically in the tail and for the zero potential.
    pub fn check_decay(&self, grid: &Grid) -> Result<()> {
        match self.tail_decay_rate(grid) {
            Some(rate) if !(rate > 0.0) => Err(LabError::InvalidParameter(format!(
                "potential does not decay in the tail (fitted rate {rate})"
            ))),
            _ => Ok(()),
        }
    }

    /// Stable fingerprint used as a cache key.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        match &self.kind {
            PotentialKind::Zero => 0u8.hash(&mut h),
            PotentialKind::ScaledSech2 { depth, width } => {
                1u8.hash(&mut h);
                depth.to_bits().hash(&mut h);
                width.to_bits().hash(&mut h);
            }
            PotentialKind::Tabulated { x, v } => {
                2u8.hash(&mut h);
                for t in x.iter().chain(v) {
                    t.to_bits().hash(&mut h);
                }
            }
        }
        h.finish()
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            PotentialKind::Zero => "zero".into(),
            PotentialKind::ScaledSech2 { depth, width } => {
                format!("-{depth} sech^2(x/{width})")
            }
            PotentialKind::Tabulated { x, .. } => format!("tabulated ({} rows)", x.len()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sech2_values() {
        let v = Potential::sech2(2.0, 1.0).unwrap();
        assert_eq!(v.eval(0.0), -2.0);
        let c = 1.0f64.cosh();
        assert!((v.eval(1.0) + 2.0 / (c * c)).abs() < 1e-15);
        assert!(v.eval(30.0).abs() < 1e-24);
    }

    #[test]
    fn table_interpolates_linearly_and_vanishes_outside() {
        let v = Potential::parse_table("# x V\n-1 0\n0, -2\n1 0\n").unwrap();
        assert_eq!(v.eval(-0.5), -1.0);
        assert_eq!(v.eval(0.0), -2.0);
        assert_eq!(v.eval(0.25), -1.5);
        assert_eq!(v.eval(3.0), 0.0);
    }

    #[test]
    fn table_rejects_garbage() {
        assert!(Potential::parse_table("1 2 3\n").is_err());
        assert!(Potential::parse_table("1 a\n2 3\n").is_err());
        assert!(Potential::parse_table("1 0\n0 1\n").is_err());
    }

    #[test]
    fn sech2_decays_at_twice_inverse_width() {
        let g = Grid::dirichlet(40.0, 1001).unwrap();
        let rate = Potential::sech2(1.0, 2.0).unwrap().tail_decay_rate(&g).unwrap();
        assert!((rate - 1.0).abs() < 1e-6, "{rate}");
        assert!(Potential::zero().check_decay(&g).is_ok());
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        assert!(Potential::sech2(0.0, 1.0).is_err());
        assert!(Potential::sech2(1.0, -1.0).is_err());
    }
}
