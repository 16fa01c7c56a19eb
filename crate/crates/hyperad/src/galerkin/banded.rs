//! Symmetric banded matrices and the unpivoted LDL^T factorization used for
//! shift-invert solves and spectrum-slicing inertia counts.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BandedError {
    #[error("near-zero pivot |d| = {pivot:.3e} at column {column}; shift coincides with an eigenvalue")]
    NearSingular { column: usize, pivot: f64 },
}

/// Symmetric matrix with lower bandwidth `bw`, stored column-major:
/// entry `(i, j)` with `0 <= i - j <= bw` lives at `data[j * (bw + 1) + (i - j)]`.
#[derive(Debug, Clone)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        assert!(n > 0);
        let bw = bw.min(n - 1);
        Self { n, bw, data: vec![0.0; n * (bw + 1)] }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Entry `(i, j)` of the full symmetric matrix (zero outside the band).
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        if hi - lo > self.bw {
            0.0
        } else {
            self.data[lo * (self.bw + 1) + (hi - lo)]
        }
    }

    /// Add `v` to entry `(i, j)` (and implicitly `(j, i)`); `|i-j|` must be
    /// within the band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(hi - lo <= self.bw, "entry ({i},{j}) outside bandwidth {}", self.bw);
        self.data[lo * (self.bw + 1) + (hi - lo)] += v;
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(hi - lo <= self.bw);
        self.data[lo * (self.bw + 1) + (hi - lo)] = v;
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        let s = self.bw + 1;
        y.fill(0.0);
        for j in 0..self.n {
            let len = s.min(self.n - j);
            let col = &self.data[j * s..j * s + len];
            let xj = x[j];
            // diagonal
            y[j] += col[0] * xj;
            // sub-diagonal part of column j and its mirrored super-diagonal
            let mut dot = 0.0;
            for (r, &a) in col.iter().enumerate().skip(1) {
                y[j + r] += a * xj;
                dot += a * x[j + r];
            }
            y[j] += dot;
        }
    }

    /// `sum x_i A_ij y_j` without forming `A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let s = self.bw + 1;
        let mut acc = 0.0;
        for j in 0..self.n {
            let len = s.min(self.n - j);
            let col = &self.data[j * s..j * s + len];
            acc += col[0] * x[j] * y[j];
            let mut upper = 0.0;
            let mut lower = 0.0;
            for (r, &a) in col.iter().enumerate().skip(1) {
                lower += a * x[j + r];
                upper += a * y[j + r];
            }
            acc += lower * y[j] + upper * x[j];
        }
        acc
    }

    /// Dense copy, for the small-problem reference path.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for j in 0..self.n {
            for i in j..(j + self.bw + 1).min(self.n) {
                let v = self.get(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        (0..self.n).map(|j| self.get(j, j).abs()).fold(0.0, f64::max)
    }
}

/// Inertia of `A - sigma B` together with its factorization.
#[derive(Debug, Clone, Copy)]
pub struct Inertia {
    pub negative: usize,
    pub positive: usize,
    pub zero: usize,
}

/// Unpivoted `L D L^T` factorization of the symmetric banded `A - sigma B`.
///
/// Without pivoting the factorization of an indefinite matrix can break
/// down; callers treat [`BandedError::NearSingular`] as "move the shift".
/// The sign count of `D` gives the number of eigenvalues of `(A, B)` below
/// `sigma` (Sylvester's law, `B` positive definite).
#[derive(Debug)]
pub struct LdltFactor {
    n: usize,
    bw: usize,
    /// columns of unit-lower L (sub-diagonal part); diagonal holds D
    data: Vec<f64>,
    pub inertia: Inertia,
    /// Smallest pivot magnitude, relative to the largest initial diagonal:
    /// a proxy for the distance of the shift to the nearest eigenvalue.
    pub min_pivot_rel: f64,
}

impl LdltFactor {
    /// Factor `A - sigma * B`. The two operands may have different
    /// bandwidths; the factor uses the larger.
    pub fn new(a: &BandedSym, sigma: f64, b: &BandedSym) -> Result<Self, BandedError> {
        let n = a.dim();
        assert_eq!(n, b.dim());
        let bw = a.bandwidth().max(b.bandwidth());
        let s = bw + 1;
        let mut data = vec![0.0; n * s];
        for j in 0..n {
            let len = s.min(n - j);
            for r in 0..len {
                data[j * s + r] = a.get(j + r, j) - sigma * b.get(j + r, j);
            }
        }

        // Breakdown threshold: relative to the largest diagonal magnitude.
        // Kept coarse on purpose: a shift this close to an eigenvalue makes
        // the shift-invert solves lose ~half the mantissa, so the caller
        // should jitter away rather than proceed.
        let scale = (0..n)
            .map(|j| data[j * s].abs())
            .fold(f64::MIN_POSITIVE, f64::max);
        let tiny = scale * 1e-8;

        let mut negative = 0;
        let mut positive = 0;
        let mut min_pivot = f64::INFINITY;
        for j in 0..n {
            let w = (n - 1 - j).min(bw);
            let d = data[j * s];
            if d.abs() < tiny {
                return Err(BandedError::NearSingular { column: j, pivot: d });
            }
            min_pivot = min_pivot.min(d.abs());
            if d < 0.0 {
                negative += 1;
            } else {
                positive += 1;
            }
            let inv = 1.0 / d;
            for r in 1..=w {
                data[j * s + r] *= inv;
            }
            // Trailing update: column j+k receives a rank-one correction.
            for k in 1..=w {
                let ljk = data[j * s + k];
                if ljk == 0.0 {
                    continue;
                }
                let alpha = ljk * d;
                let (head, tail) = data.split_at_mut((j + k) * s);
                let src = &head[j * s + k..j * s + w + 1];
                let dst = &mut tail[..w + 1 - k];
                for (t, &f) in dst.iter_mut().zip(src.iter()) {
                    *t -= alpha * f;
                }
            }
        }

        Ok(Self {
            n,
            bw,
            data,
            inertia: Inertia { negative, positive, zero: 0 },
            min_pivot_rel: min_pivot / scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solve `(A - sigma B) x = rhs` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let s = self.bw + 1;
        // forward: L z = rhs
        for j in 0..self.n {
            let w = (self.n - 1 - j).min(self.bw);
            let xj = x[j];
            if xj != 0.0 {
                let col = &self.data[j * s + 1..j * s + w + 1];
                for (r, &l) in col.iter().enumerate() {
                    x[j + 1 + r] -= l * xj;
                }
            }
        }
        // diagonal: D y = z
        for j in 0..self.n {
            x[j] /= self.data[j * s];
        }
        // backward: L^T out = y
        for j in (0..self.n).rev() {
            let w = (self.n - 1 - j).min(self.bw);
            let col = &self.data[j * s + 1..j * s + w + 1];
            let mut acc = 0.0;
            for (r, &l) in col.iter().enumerate() {
                acc += l * x[j + 1 + r];
            }
            x[j] -= acc;
        }
    }
}

/// Inertia of `A - sigma B`, retrying with slightly jittered shifts when the
/// factorization lands on an eigenvalue. Returns the (possibly moved) shift.
pub fn inertia_at(a: &BandedSym, sigma: f64, b: &BandedSym, scale: f64) -> (f64, LdltFactor) {
    let mut shift = sigma;
    let mut step = scale.max(1e-300) * 4e-8;
    for _ in 0..60 {
        match LdltFactor::new(a, shift, b) {
            Ok(f) => return (shift, f),
            Err(_) => {
                shift += step;
                step *= 2.0;
            }
        }
    }
    panic!("could not find a numerically safe shift near {sigma}");
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, bw: usize, seed: u64) -> BandedSym {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = BandedSym::zeros(n, bw);
        for j in 0..n {
            for i in j..(j + bw + 1).min(n) {
                if i == j {
                    m.set(i, j, 3.0 + rng.gen_range(0.0..1.0) + bw as f64);
                } else {
                    m.set(i, j, rng.gen_range(-0.5..0.5));
                }
            }
        }
        m
    }

    #[test]
    fn matvec_matches_dense() {
        let m = random_spd(40, 6, 1);
        let dense = m.to_dense();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut y = vec![0.0; 40];
        m.matvec(&x, &mut y);
        let xref = nalgebra::DVector::from_column_slice(&x);
        let yref = &dense * &xref;
        for i in 0..40 {
            assert_relative_eq!(y[i], yref[i], epsilon = 1e-12);
        }
        let z: Vec<f64> = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let zref = nalgebra::DVector::from_column_slice(&z);
        assert_relative_eq!(m.bilinear(&x, &z), (xref.transpose() * dense * zref)[(0, 0)], epsilon = 1e-10);
    }

    #[test]
    fn ldlt_solves_linear_systems() {
        let a = random_spd(60, 5, 3);
        let b = {
            let mut b = BandedSym::zeros(60, 0);
            for j in 0..60 {
                b.set(j, j, 1.0);
            }
            b
        };
        let f = LdltFactor::new(&a, 0.0, &b).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x_true: Vec<f64> = (0..60).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut rhs = vec![0.0; 60];
        a.matvec(&x_true, &mut rhs);
        f.solve_in_place(&mut rhs);
        for i in 0..60 {
            assert_relative_eq!(rhs[i], x_true[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn inertia_counts_eigenvalues_below_shift() {
        // 1D Dirichlet Laplacian: eigenvalues 2 - 2 cos(k pi / (n+1)).
        let n = 50;
        let mut a = BandedSym::zeros(n, 1);
        let mut b = BandedSym::zeros(n, 0);
        for j in 0..n {
            a.set(j, j, 2.0);
            if j + 1 < n {
                a.set(j + 1, j, -1.0);
            }
            b.set(j, j, 1.0);
        }
        let exact = |k: usize| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos();
        for sigma in [0.5, 1.0, 2.0, 3.3, 3.99] {
            // Compare against the shift actually used (it moves off exact
            // eigenvalues by a tiny jitter).
            let (shift, f) = inertia_at(&a, sigma, &b, 4.0);
            let count = (1..=n).filter(|&k| exact(k) < shift).count();
            assert_eq!(f.inertia.negative, count, "sigma = {sigma}");
        }
    }

    #[test]
    fn near_singular_shift_is_reported() {
        let mut a = BandedSym::zeros(3, 0);
        let mut b = BandedSym::zeros(3, 0);
        for j in 0..3 {
            a.set(j, j, j as f64 + 1.0);
            b.set(j, j, 1.0);
        }
        assert!(matches!(LdltFactor::new(&a, 2.0, &b), Err(BandedError::NearSingular { .. })));
        let (shift, f) = inertia_at(&a, 2.0, &b, 3.0);
        assert!(shift > 2.0);
        assert_eq!(f.inertia.negative, 2);
    }
}
