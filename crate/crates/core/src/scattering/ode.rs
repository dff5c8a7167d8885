//! Dormand–Prince 5(4) for small complex systems.

use num_complex::Complex64;

use crate::error::{LabError, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

pub type State = [Complex64; 2];

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rtol: 1e-11,
            atol: 1e-13,
        }
    }
}

fn axpy(y: &State, terms: &[(f64, &State)], h: f64) -> State {
    let mut out = *y;
    for (c, k) in terms {
        out[0] += k[0] * (c * h);
        out[1] += k[1] * (c * h);
    }
    out
}

/// Adaptive integration of `y' = rhs(x, y)` from `x0` to `x1` (either direction).
/// `step` carries the step-size guess between calls.
pub fn integrate(
    rhs: &impl Fn(f64, &State) -> State,
    x0: f64,
    x1: f64,
    y: State,
    step: &mut f64,
    tol: Tolerance,
) -> Result<State> {
    let dir = (x1 - x0).signum();
    let span = (x1 - x0).abs();
    if span == 0.0 {
        return Ok(y);
    }
    let mut x = x0;
    let mut y = y;
    let mut h = step.abs().min(span).max(span * 1e-6) * dir;
    let mut k1 = rhs(x, &y);
    loop {
        let remaining = x1 - x;
        if remaining.abs() <= 1e-14 * (1.0 + x1.abs()) {
            break;
        }
        if h.abs() > remaining.abs() {
            h = remaining;
        }
        let k2 = rhs(x + C2 * h, &axpy(&y, &[(A21, &k1)], h));
        let k3 = rhs(x + C3 * h, &axpy(&y, &[(A31, &k1), (A32, &k2)], h));
        let k4 = rhs(x + C4 * h, &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
        let k5 = rhs(
            x + C5 * h,
            &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h),
        );
        let k6 = rhs(
            x + h,
            &axpy(
                &y,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                h,
            ),
        );
        let ynew = axpy(
            &y,
            &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
            h,
        );
        let k7 = rhs(x + h, &ynew);
        let mut err: f64 = 0.0;
        for c in 0..2 {
            let e = (k1[c] * E1 + k3[c] * E3 + k4[c] * E4 + k5[c] * E5 + k6[c] * E6 + k7[c] * E7)
                * h;
            let sc = tol.atol + tol.rtol * y[c].norm().max(ynew[c].norm());
            err = err.max(e.norm() / sc);
        }
        if !err.is_finite() {
            return Err(LabError::StepSizeUnderflow { x });
        }
        if err <= 1.0 {
            x += h;
            y = ynew;
            k1 = k7;
            let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).min(5.0) };
            *step = h.abs() * grow;
            h *= grow;
        } else {
            h *= (0.9 * err.powf(-0.2)).max(0.2);
        }
        if h.abs() < 1e-13 * (1.0 + x.abs()) {
            return Err(LabError::StepSizeUnderflow { x });
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::I;

    #[test]
    fn harmonic_oscillator() {
        // y'' = -y as (y, y')
        let rhs = |_x: f64, y: &State| [y[1], -y[0]];
        let mut step = 0.1;
        let y = integrate(
            &rhs,
            0.0,
            10.0,
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            &mut step,
            Tolerance::default(),
        )
        .unwrap();
        assert!((y[0].re - 10f64.cos()).abs() < 1e-9);
        assert!((y[1].re + 10f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn backward_complex_exponential() {
        let rhs = |_x: f64, y: &State| [y[0] * (2.0 * I), y[1]];
        let mut step = 0.1;
        let one = Complex64::new(1.0, 0.0);
        let y = integrate(&rhs, 3.0, -2.0, [one, one], &mut step, Tolerance::default()).unwrap();
        assert!((y[0] - (I * 2.0 * -5.0).exp()).norm() < 1e-9);
    }
}
