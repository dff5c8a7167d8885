//! Seeded random test fields.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::field::{ComplexField, I};
use crate::grid::Grid;

pub type LabRng = ChaCha8Rng;

pub fn rng(seed: u64) -> LabRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Parameters of one Gaussian packet `c e^{-(x-x₀)²/(2w²)} e^{ikx}`.
#[derive(Debug, Clone, Copy)]
pub struct Packet {
    pub center: f64,
    pub width: f64,
    pub wavenumber: f64,
    pub amplitude: Complex64,
}

impl Packet {
    pub fn eval(&self, x: f64) -> Complex64 {
        let d = (x - self.center) / self.width;
        self.amplitude * (-0.5 * d * d).exp() * (I * self.wavenumber * x).exp()
    }

    pub fn random(rng: &mut LabRng, spread: f64) -> Packet {
        Packet {
            center: rng.gen_range(-spread..spread),
            width: rng.gen_range(0.5..3.0),
            wavenumber: rng.gen_range(-2.0..2.0),
            amplitude: Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
        }
    }
}

/// Sum of `count` random packets centered in `[-spread, spread]`.
pub fn packet_field(grid: &Arc<Grid>, rng: &mut LabRng, count: usize, spread: f64) -> ComplexField {
    let packets: Vec<Packet> = (0..count).map(|_| Packet::random(rng, spread)).collect();
    ComplexField::from_fn(grid, |x| packets.iter().map(|p| p.eval(x)).sum())
}

/// Smooth field supported in `[c - r, c + r]`: a random trigonometric
/// polynomial times the bump `(1 - ((x-c)/r)²)³`.
pub fn compact_field(grid: &Arc<Grid>, rng: &mut LabRng, max_radius: f64) -> ComplexField {
    let c = rng.gen_range(-5.0..5.0);
    let r = rng.gen_range(1.0..max_radius.max(1.5));
    let modes: Vec<(f64, Complex64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(-3.0..3.0),
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            )
        })
        .collect();
    ComplexField::from_fn(grid, |x| {
        let s = (x - c) / r;
        if s.abs() >= 1.0 {
            return Complex64::new(0.0, 0.0);
        }
        let bump = (1.0 - s * s).powi(3);
        let trig: Complex64 = modes.iter().map(|(k, a)| a * (I * k * x).exp()).sum();
        trig * bump
    })
}

pub fn complex_normal(rng: &mut LabRng) -> Complex64 {
    // Box–Muller; rand's distributions crate is not needed for this one use
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    let r = (-2.0 * u1.ln()).sqrt();
    let th = 2.0 * std::f64::consts::PI * u2;
    Complex64::new(r * th.cos(), r * th.sin()) * std::f64::consts::FRAC_1_SQRT_2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fields_are_reproducible() {
        let g = Arc::new(Grid::dirichlet(20.0, 257).unwrap());
        let a = packet_field(&g, &mut rng(5), 3, 5.0);
        let b = packet_field(&g, &mut rng(5), 3, 5.0);
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn compact_field_has_compact_support() {
        let g = Arc::new(Grid::dirichlet(20.0, 1025).unwrap());
        let f = compact_field(&g, &mut rng(1), 3.0);
        let support: Vec<f64> = g
            .points()
            .iter()
            .zip(f.values())
            .filter(|(_, v)| v.norm() > 0.0)
            .map(|(x, _)| *x)
            .collect();
        let width = support.last().unwrap() - support.first().unwrap();
        assert!(width <= 6.0 + 1e-9);
    }
}
