//! Browser bindings: eigenpair profile, transmission curve and bound-state
//! branch for a `-depth·sech²(x/width)` well.

use std::sync::Arc;

use nlslab::branch::BranchSettings;
use nlslab::scattering::{resonance_indicator, transmission, ResonanceClass};
use nlslab::{BranchSolver, Grid, Hamiltonian, LabError, Nonlinearity, Potential, SpectralData, Stencil};
use wasm_bindgen::prelude::*;

const HALF_WIDTH: f64 = 30.0;

fn err(e: LabError) -> JsError {
    JsError::new(&e.to_string())
}

fn setup(depth: f64, width: f64, n: usize) -> Result<(Potential, Hamiltonian), JsError> {
    let grid = Arc::new(Grid::dirichlet(HALF_WIDTH, n).map_err(err)?);
    let v = Potential::sech2(depth, width).map_err(err)?;
    let h = Hamiltonian::new(&grid, &v, Stencil::Second);
    Ok((v, h))
}

#[wasm_bindgen]
pub struct SpectrumView {
    lambda: f64,
    extrapolated: f64,
    resonant: bool,
    x: Vec<f64>,
    phi: Vec<f64>,
    potential: Vec<f64>,
}

#[wasm_bindgen]
impl SpectrumView {
    #[wasm_bindgen(getter)]
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    #[wasm_bindgen(getter)]
    pub fn extrapolated(&self) -> f64 {
        self.extrapolated
    }

    #[wasm_bindgen(getter)]
    pub fn resonant(&self) -> bool {
        self.resonant
    }

    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn phi(&self) -> Vec<f64> {
        self.phi.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn potential(&self) -> Vec<f64> {
        self.potential.clone()
    }
}

/// Lowest eigenvalue `-λ`, normalized eigenfunction and resonance class.
#[wasm_bindgen]
pub fn spectrum(depth: f64, width: f64, n: usize) -> Result<SpectrumView, JsError> {
    let (v, h) = setup(depth, width, n)?;
    let sp = SpectralData::compute(&h).map_err(err)?;
    let s = sp.summary();
    let res = resonance_indicator(&v, h.grid()).map_err(err)?;
    // fix the sign so the profile is positive at the origin
    let mid = sp.phi[h.grid().len() / 2].re;
    let sign = if mid < 0.0 { -1.0 } else { 1.0 };
    Ok(SpectrumView {
        lambda: s.lambda,
        extrapolated: s.extrapolated_lambda,
        resonant: res.class == ResonanceClass::Resonant,
        x: h.grid().points().to_vec(),
        phi: sp.phi.values().iter().map(|c| sign * c.re).collect(),
        potential: h.potential_samples().to_vec(),
    })
}

/// `|T(k)|` on `count` equally spaced wavenumbers in `[k_min, k_max]`.
#[wasm_bindgen]
pub fn transmission_curve(depth: f64, width: f64, k_min: f64, k_max: f64, count: usize) -> Result<Vec<f64>, JsError> {
    if !(k_min > 0.0 && k_max > k_min && count >= 2) {
        return Err(JsError::new("need 0 < k_min < k_max and count >= 2"));
    }
    let (v, h) = setup(depth, width, 1025)?;
    (0..count)
        .map(|i| {
            let k = k_min + (k_max - k_min) * i as f64 / (count - 1) as f64;
            transmission(&v, h.grid(), k).map(|s| s.transmission_modulus).map_err(err)
        })
        .collect()
}

/// Branch table as interleaved `(|z|, E, ‖Q - zφ‖_{H¹_{a₀}})` triples over
/// `count` log-spaced radii in `[1e-3, r_max]`.
#[wasm_bindgen]
pub fn branch_curve(depth: f64, width: f64, p: f64, sigma: f64, r_max: f64, count: usize) -> Result<Vec<f64>, JsError> {
    if !(r_max > 1e-3 && count >= 2) {
        return Err(JsError::new("need r_max > 1e-3 and count >= 2"));
    }
    let (_, h) = setup(depth, width, 1025)?;
    let sp = SpectralData::cached(&h).map_err(err)?;
    let nl = Nonlinearity::new(p, sigma).map_err(err)?;
    let settings = BranchSettings {
        z_max: r_max.max(BranchSettings::default().z_max),
        ..BranchSettings::default()
    };
    let solver = BranchSolver::new(&h, sp, nl, settings).map_err(err)?;
    let ratio = (r_max / 1e-3).ln();
    let radii: Vec<f64> = (0..count)
        .map(|i| 1e-3 * (ratio * i as f64 / (count - 1) as f64).exp())
        .collect();
    let rows = solver.table(&radii).map_err(err)?;
    Ok(rows.iter().flat_map(|r| [r.r, r.e, r.deviation]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflectionless_well() {
        let s = spectrum(2.0, 1.0, 1025).ok().unwrap();
        assert!((s.extrapolated - 1.0).abs() < 1e-4);
        assert!(s.resonant);
        assert!(s.phi.iter().all(|&v| v >= -1e-12));
        let t = transmission_curve(2.0, 1.0, 0.5, 2.0, 4).ok().unwrap();
        assert!(t.iter().all(|v| (v - 1.0).abs() < 1e-6));
    }

    #[test]
    fn branch_triples() {
        let b = branch_curve(1.0, 1.0, 2.0, -1.0, 0.1, 5).ok().unwrap();
        assert_eq!(b.len(), 15);
        assert!(b[1] < 0.0);
    }
}
