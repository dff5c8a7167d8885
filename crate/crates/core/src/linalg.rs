//! Banded factorizations: real symmetric `LDLᵀ` (inertia and shifted solves) and
//! complex LU with partial pivoting.

use num_complex::Complex64;

use crate::error::{LabError, Result};

/// Real symmetric band matrix stored by diagonals: `bands[0]` is the main
/// diagonal, `bands[k][i] = A[i][i+k]`.
#[derive(Debug, Clone)]
pub struct SymBand {
    bands: Vec<Vec<f64>>,
}

/// `LDLᵀ` factors of a shifted [`SymBand`]; `l[i*m + (k-1)] = L[i][i-k]`.
#[derive(Debug, Clone)]
pub struct Ldl {
    n: usize,
    m: usize,
    d: Vec<f64>,
    l: Vec<f64>,
}

impl SymBand {
    pub fn new(bands: Vec<Vec<f64>>) -> Self {
        let n = bands[0].len();
        for (k, b) in bands.iter().enumerate() {
            assert_eq!(b.len(), n - k, "band {k} has the wrong length");
        }
        SymBand { bands }
    }

    pub fn dim(&self) -> usize {
        self.bands[0].len()
    }

    pub fn bandwidth(&self) -> usize {
        self.bands.len() - 1
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.bands[0]
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        let k = b - a;
        if k > self.bandwidth() {
            0.0
        } else {
            self.bands[k][a]
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y: Vec<f64> = self.bands[0].iter().zip(x).map(|(a, b)| a * b).collect();
        for (k, band) in self.bands.iter().enumerate().skip(1) {
            for i in 0..n - k {
                y[i] += band[i] * x[i + k];
                y[i + k] += band[i] * x[i];
            }
        }
        y
    }

    /// Gershgorin interval containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            for k in 1..=self.bandwidth() {
                if i + k < n {
                    r += self.bands[k][i].abs();
                }
                if i >= k {
                    r += self.bands[k][i - k].abs();
                }
            }
            lo = lo.min(self.bands[0][i] - r);
            hi = hi.max(self.bands[0][i] + r);
        }
        (lo, hi)
    }

    /// Factor `A - σI = L D Lᵀ` without pivoting. Exact zero pivots are nudged
    /// by a relative epsilon so the inertia count stays defined.
    pub fn ldl(&self, shift: f64) -> Ldl {
        let n = self.dim();
        let m = self.bandwidth();
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n * m.max(1)];
        let scale = self.bands[0].iter().map(|v| v.abs()).fold(1.0, f64::max);
        for i in 0..n {
            // L[i][j] for j = i-m .. i-1
            for k in (1..=m.min(i)).rev() {
                let j = i - k;
                let mut s = self.bands[k][j];
                for kk in (k + 1)..=m.min(i) {
                    // column c = i - kk < j; needs L[i][c] and L[j][c], with j - c = kk - k
                    let c = i - kk;
                    let ljc = l[j * m + (kk - k - 1)];
                    s -= l[i * m + (kk - 1)] * d[c] * ljc;
                }
                l[i * m + (k - 1)] = s / d[j];
            }
            let mut s = self.bands[0][i] - shift;
            for k in 1..=m.min(i) {
                let lik = l[i * m + (k - 1)];
                s -= lik * lik * d[i - k];
            }
            if s == 0.0 {
                s = -f64::EPSILON * scale;
            }
            d[i] = s;
        }
        Ldl { n, m, d, l }
    }

    /// Number of eigenvalues strictly below `shift` (Sylvester inertia).
    pub fn count_below(&self, shift: f64) -> usize {
        self.ldl(shift).d.iter().filter(|&&v| v < 0.0).count()
    }

    /// `k`-th smallest eigenvalue (0-based) by bisection on the inertia count.
    pub fn eigenvalue_by_bisection(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        let width = (hi - lo).max(1.0);
        lo -= 1e-3 * width;
        hi += 1e-3 * width;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

impl Ldl {
    pub fn pivots(&self) -> &[f64] {
        &self.d
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 1..=m.min(i) {
                y[i] -= self.l[i * m + (k - 1)] * y[i - k];
            }
        }
        for i in 0..n {
            y[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            for k in 1..=m {
                if i + k < n {
                    y[i] -= self.l[(i + k) * m + (k - 1)] * y[i + k];
                }
            }
        }
        y
    }
}

/// Complex band LU with partial pivoting (row interchanges), as in `gbtrf`.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    w: usize,
    data: Vec<Complex64>,
    piv: Vec<usize>,
}

impl BandLu {
    /// `entry(i, j)` is queried for `|i - j|` within the band only.
    pub fn factor(
        n: usize,
        kl: usize,
        ku: usize,
        entry: impl Fn(usize, usize) -> Complex64,
    ) -> Result<Self> {
        let w = 2 * kl + ku + 1;
        let zero = Complex64::new(0.0, 0.0);
        let mut data = vec![zero; n * w];
        let idx = |i: usize, j: usize| i * w + (j + kl - i);
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let hi = (i + ku).min(n - 1);
            for j in lo..=hi {
                data[idx(i, j)] = entry(i, j);
            }
        }
        let mut piv = vec![0; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = data[idx(k, k)].norm();
            for i in k + 1..=last_row {
                let v = data[idx(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(LabError::Singular);
            }
            piv[k] = p;
            if p != k {
                for j in k..=last_col {
                    data.swap(idx(k, j), idx(p, j));
                }
            }
            let pivot = data[idx(k, k)];
            for i in k + 1..=last_row {
                let lik = data[idx(i, k)] / pivot;
                data[idx(i, k)] = lik;
                if lik != zero {
                    for j in k + 1..=last_col {
                        let t = data[idx(k, j)];
                        data[idx(i, j)] -= lik * t;
                    }
                }
            }
        }
        Ok(BandLu {
            n,
            kl,
            ku,
            w,
            data,
            piv,
        })
    }

    fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.w + (j + self.kl - i)]
    }

    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.n;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                b[i] -= self.at(i, k) * bk;
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + self.kl + self.ku).min(n - 1) {
                s -= self.at(i, j) * b[j];
            }
            b[i] = s / self.at(i, i);
        }
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Solve a general complex tridiagonal system with partial pivoting.
/// `sub[i] = A[i+1][i]`, `sup[i] = A[i][i+1]`.
pub fn solve_tridiagonal(
    sub: &[Complex64],
    diag: &[Complex64],
    sup: &[Complex64],
    rhs: &[Complex64],
) -> Result<Vec<Complex64>> {
    let n = diag.len();
    let lu = BandLu::factor(n, 1, 1, |i, j| {
        if i == j {
            diag[i]
        } else if i > j {
            sub[j]
        } else {
            sup[i]
        }
    })?;
    Ok(lu.solve(rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_eigs_tridiag(d: &[f64], e: &[f64]) -> Vec<f64> {
        // Jacobi rotation on the dense matrix as an independent oracle.
        let n = d.len();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = d[i];
            if i + 1 < n {
                a[i][i + 1] = e[i];
                a[i + 1][i] = e[i];
            }
        }
        for _ in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += a[p][q] * a[p][q];
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
            if off < 1e-30 {
                break;
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    #[test]
    fn bisection_matches_jacobi() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 12;
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let e: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = SymBand::new(vec![d.clone(), e.clone()]);
        let oracle = dense_eigs_tridiag(&d, &e);
        for (k, want) in oracle.iter().enumerate() {
            let got = a.eigenvalue_by_bisection(k);
            assert!((got - want).abs() < 1e-12, "{k}: {got} vs {want}");
        }
    }

    #[test]
    fn pentadiagonal_ldl_solves() {
        let n = 30;
        let d = vec![6.0; n];
        let e1 = vec![-4.0 / 3.0; n - 1];
        let e2 = vec![1.0 / 12.0; n - 2];
        let a = SymBand::new(vec![d, e1, e2]);
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.matvec(&x);
        let y = a.ldl(0.0).solve(&b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn band_lu_with_pivoting() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 40;
        let c = |r: &mut ChaCha8Rng| Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        let sub: Vec<_> = (0..n - 1).map(|_| c(&mut rng)).collect();
        let sup: Vec<_> = (0..n - 1).map(|_| c(&mut rng)).collect();
        // tiny diagonal forces row interchanges
        let diag: Vec<_> = (0..n).map(|_| c(&mut rng) * 1e-3).collect();
        let x: Vec<_> = (0..n).map(|_| c(&mut rng)).collect();
        let mut b = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            b[i] = diag[i] * x[i];
            if i > 0 {
                b[i] += sub[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                b[i] += sup[i] * x[i + 1];
            }
        }
        let y = solve_tridiagonal(&sub, &diag, &sup, &b).unwrap();
        let err = x.iter().zip(&y).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }
}
