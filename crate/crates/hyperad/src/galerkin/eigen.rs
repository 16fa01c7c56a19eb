//! Generalized symmetric eigensolvers for the Galerkin pencils `(A, B)`.
//!
//! The production path is shift-invert Lanczos with spectrum slicing: the
//! requested interval is split until each slice holds at most
//! [`EigenOptions::slice_max`] eigenvalues (counted exactly by LDL^T
//! inertia), then every slice is solved with a single factorization at its
//! midpoint. Slice counts are validated against the inertia numbers, and
//! missing members of degenerate clusters are recovered by deflated
//! restarts, so the returned spectrum is complete below the cutoff.
//!
//! A dense reference solver (Cholesky reduction plus a symmetric
//! eigendecomposition) serves as the mandatory cross-check for dimensions
//! up to a few hundred.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::banded::{inertia_at, BandedSym, LdltFactor};

#[derive(Debug, Error)]
pub enum EigenError {
    #[error("eigensolver converged only {converged} of {requested} pairs in [{lo:.6e}, {hi:.6e}]")]
    NotConverged { converged: usize, requested: usize, lo: f64, hi: f64 },
    #[error("overlap matrix is not positive definite")]
    OverlapNotPositiveDefinite,
}

/// What part of the spectrum to compute.
#[derive(Debug, Clone, Copy)]
pub enum Cutoff {
    /// Every eigenvalue strictly below the given energy.
    Below(f64),
    /// The lowest `n` eigenvalues.
    Count(usize),
}

#[derive(Debug, Clone)]
pub struct EigenOptions {
    /// Relative Ritz-residual tolerance in the shift-invert metric.
    pub residual_tol: f64,
    /// Maximum eigenvalues solved from a single factorization.
    pub slice_max: usize,
    /// Hard cap on the Krylov dimension of one Lanczos run.
    pub krylov_budget: usize,
    /// Deflated restarts per slice (degenerate clusters need one restart
    /// per missing copy).
    pub max_restarts: usize,
    /// Solve independent slices on the rayon pool. Leave off when the
    /// caller already parallelizes over many solves.
    pub parallel_slices: bool,
    /// Seed for the deterministic Lanczos start vectors.
    pub seed: u64,
    /// Known strict lower bound of the spectrum (skips the downward
    /// bound search when it verifies).
    pub lower_bound_hint: Option<f64>,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            residual_tol: 1e-11,
            slice_max: 64,
            krylov_budget: 600,
            max_restarts: 14,
            parallel_slices: false,
            seed: 0x5eed_ad1a,
            lower_bound_hint: None,
        }
    }
}

/// Ascending eigenvalues with B-orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenSolution {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Solve the generalized problem `A x = lambda B x` for the lowest part of
/// the spectrum. `B` must be symmetric positive definite.
pub fn solve_lowest(
    a: &BandedSym,
    b: &BandedSym,
    cutoff: Cutoff,
    opts: &EigenOptions,
) -> Result<EigenSolution, EigenError> {
    let n = a.dim();
    let scale = spectrum_scale(a, b);

    // Strict lower bound with inertia zero.
    let mut lb = match opts.lower_bound_hint {
        Some(hint) => hint,
        None => min_diag_ratio(a, b) - 0.01 * scale.max(1.0),
    };
    let mut n_lb;
    let mut step = 0.5 * scale.max(1.0);
    loop {
        let (shift, f) = inertia_at(a, lb, b, scale);
        lb = shift;
        n_lb = f.inertia.negative;
        if n_lb == 0 {
            break;
        }
        lb -= step;
        step *= 4.0;
    }

    // Upper edge of the requested part of the spectrum.
    let (hi, n_hi, want) = match cutoff {
        Cutoff::Below(ceiling) => {
            let (shift, f) = inertia_at(a, ceiling, b, scale);
            let total = f.inertia.negative;
            (shift, total, total)
        }
        Cutoff::Count(k) => {
            let k = k.min(n);
            if k == 0 {
                return Ok(EigenSolution { values: vec![], vectors: vec![] });
            }
            // Bracket upward until at least k eigenvalues are below.
            let mut hi = min_diag_ratio(a, b).max(max_diag_ratio(a, b));
            let mut step = 0.5 * scale.max(1.0);
            let mut count;
            loop {
                let (shift, f) = inertia_at(a, hi, b, scale);
                hi = shift;
                count = f.inertia.negative;
                if count >= k {
                    break;
                }
                hi += step;
                step *= 4.0;
            }
            // Tighten so we do not drag in a large surplus.
            let mut lo_edge = lb;
            while count > k + opts.slice_max / 2 {
                let mid = 0.5 * (lo_edge + hi);
                let (shift, f) = inertia_at(a, mid, b, scale);
                let c = f.inertia.negative;
                if c >= k {
                    hi = shift;
                    count = c;
                } else {
                    lo_edge = shift;
                }
                if hi - lo_edge < 1e-12 * scale.max(1.0) {
                    break;
                }
            }
            (hi, count, k)
        }
    };

    if n_hi == 0 {
        return Ok(EigenSolution { values: vec![], vectors: vec![] });
    }

    let mut pairs = conquer_interval(a, b, (lb, n_lb), (hi, n_hi), scale, opts)?;
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    pairs.truncate(want);
    let (values, vectors) = pairs.into_iter().unzip();
    Ok(EigenSolution { values, vectors })
}

/// Split `[lo, hi]` until slices are small, then Lanczos-solve each slice.
fn conquer_interval(
    a: &BandedSym,
    b: &BandedSym,
    (lo, n_lo): (f64, usize),
    (hi, n_hi): (f64, usize),
    scale: f64,
    opts: &EigenOptions,
) -> Result<Vec<(f64, Vec<f64>)>, EigenError> {
    let k = n_hi - n_lo;
    if k == 0 {
        return Ok(vec![]);
    }
    let width_floor = 1e-11 * scale.max(1.0);
    if k <= opts.slice_max || hi - lo <= width_floor {
        return solve_slice(a, b, (lo, n_lo), (hi, n_hi), scale, opts);
    }
    let (mid, f) = inertia_at(a, 0.5 * (lo + hi), b, scale);
    let n_mid = f.inertia.negative.clamp(n_lo, n_hi);
    drop(f);
    let left = ((lo, n_lo), (mid, n_mid));
    let right = ((mid, n_mid), (hi, n_hi));
    let (rl, rr) = if opts.parallel_slices {
        rayon::join(
            || conquer_interval(a, b, left.0, left.1, scale, opts),
            || conquer_interval(a, b, right.0, right.1, scale, opts),
        )
    } else {
        (
            conquer_interval(a, b, left.0, left.1, scale, opts),
            conquer_interval(a, b, right.0, right.1, scale, opts),
        )
    };
    let mut out = rl?;
    out.extend(rr?);
    Ok(out)
}

/// Solve one slice from a single shift at its midpoint, restarting with
/// deflation until the inertia count is matched.
fn solve_slice(
    a: &BandedSym,
    b: &BandedSym,
    (lo, n_lo): (f64, usize),
    (hi, n_hi): (f64, usize),
    scale: f64,
    opts: &EigenOptions,
) -> Result<Vec<(f64, Vec<f64>)>, EigenError> {
    let n = a.dim();
    let want = n_hi - n_lo;
    if want == 0 {
        return Ok(vec![]);
    }
    // Place the shift where the factorization is well conditioned; a pivot
    // collapsing means an eigenvalue sits essentially on the shift, which
    // would poison every Ritz value far from it.
    let (sigma, factor) = {
        let mut best: Option<(f64, LdltFactor)> = None;
        for frac in [0.5, 0.381_966, 0.618_034, 0.271, 0.729] {
            let (s, f) = inertia_at(a, lo + frac * (hi - lo), b, scale);
            let healthy = f.min_pivot_rel >= 1e-6;
            let better = best.as_ref().map_or(true, |(_, bf)| f.min_pivot_rel > bf.min_pivot_rel);
            if better {
                best = Some((s, f));
            }
            if healthy {
                break;
            }
        }
        best.unwrap()
    };

    // Converged B-orthonormal vectors (in-window and out-of-window), kept
    // for deflation; in-window pairs are collected as results.
    let mut deflate_v: Vec<Vec<f64>> = Vec::new();
    let mut deflate_bv: Vec<Vec<f64>> = Vec::new();
    let mut results: Vec<(f64, Vec<f64>)> = Vec::new();

    let in_window = |x: f64| x > lo && x <= hi;
    let mut rng = ChaCha8Rng::seed_from_u64(
        opts.seed ^ sigma.to_bits().rotate_left(17) ^ (n as u64).wrapping_mul(0x9e37_79b9),
    );

    for _restart in 0..=opts.max_restarts {
        if results.len() >= want {
            break;
        }
        let budget = opts
            .krylov_budget
            .min(n.saturating_sub(deflate_v.len()))
            .max(8.min(n));
        if budget == 0 {
            break;
        }

        let run = lanczos_run(
            b,
            &factor,
            sigma,
            budget,
            3 * (want - results.len()) + 48,
            opts.residual_tol,
            &deflate_v,
            &deflate_bv,
            |x| in_window(x),
            want - results.len(),
            &mut rng,
        );

        for (value, vector) in run {
            let mut bv = vec![0.0; n];
            b.matvec(&vector, &mut bv);
            if in_window(value) {
                results.push((value, vector.clone()));
            }
            deflate_v.push(vector);
            deflate_bv.push(bv);
        }
    }

    if results.len() != want {
        // Lanczos could not isolate everything from this shift (typical
        // when the slice edge sits next to a dense cluster, e.g. box
        // states at threshold). Narrow the interval toward the cluster
        // and retry from fresh shifts, until the width floor.
        if hi - lo > 1e-10 * scale.max(1.0) {
            let n_sigma = factor.inertia.negative.clamp(n_lo, n_hi);
            drop(factor);
            let mut out = Vec::new();
            if n_sigma > n_lo {
                out.extend(solve_slice(a, b, (lo, n_lo), (sigma, n_sigma), scale, opts)?);
            }
            if n_hi > n_sigma {
                out.extend(solve_slice(a, b, (sigma, n_sigma), (hi, n_hi), scale, opts)?);
            }
            return Ok(out);
        }
        return Err(EigenError::NotConverged { converged: results.len(), requested: want, lo, hi });
    }
    Ok(results)
}

/// One deflated shift-invert Lanczos run in the B inner product.
/// Returns every converged Ritz pair (window membership is the caller's
/// business; out-of-window pairs are still useful for deflation).
#[allow(clippy::too_many_arguments)]
fn lanczos_run(
    b: &BandedSym,
    factor: &LdltFactor,
    sigma: f64,
    max_dim: usize,
    soft_dim: usize,
    tol: f64,
    deflate_v: &[Vec<f64>],
    deflate_bv: &[Vec<f64>],
    in_window: impl Fn(f64) -> bool,
    want: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(f64, Vec<f64>)> {
    let n = b.dim();
    let max_dim = max_dim.min(soft_dim.max(16)).min(n);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_dim);
    let mut b_basis: Vec<Vec<f64>> = Vec::with_capacity(max_dim);
    let mut alphas: Vec<f64> = Vec::with_capacity(max_dim);
    let mut betas: Vec<f64> = Vec::with_capacity(max_dim);

    // Deterministic random start, B-orthogonal to the deflation space.
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut bv = vec![0.0; n];
    for _ in 0..2 {
        project_out(&mut v, deflate_v, deflate_bv);
    }
    b.matvec(&v, &mut bv);
    let norm = dot(&v, &bv).max(0.0).sqrt();
    if norm < 1e-200 {
        return vec![];
    }
    scale_vec(&mut v, 1.0 / norm);
    scale_vec(&mut bv, 1.0 / norm);
    basis.push(v);
    b_basis.push(bv);

    let mut converged: Vec<(f64, Vec<f64>)> = Vec::new();

    loop {
        let j = alphas.len();
        // w = (A - sigma B)^{-1} B v_j
        let mut w = b_basis[j].clone();
        factor.solve_in_place(&mut w);

        let alpha = dot(&w, &b_basis[j]);
        axpy(&mut w, -alpha, &basis[j]);
        if j > 0 {
            axpy(&mut w, -betas[j - 1], &basis[j - 1]);
        }
        alphas.push(alpha);

        // Full B-reorthogonalization (two passes) against the Lanczos basis
        // and the deflation space.
        for _ in 0..2 {
            for (q, bq) in basis.iter().zip(&b_basis) {
                let c = dot(&w, bq);
                axpy(&mut w, -c, q);
            }
            project_out(&mut w, deflate_v, deflate_bv);
        }

        let mut bw = vec![0.0; n];
        b.matvec(&w, &mut bw);
        let beta = dot(&w, &bw).max(0.0).sqrt();

        let dim = alphas.len();
        let exhausted = beta < 1e-14 || dim >= max_dim;
        let check = exhausted || (dim >= want.max(4) && dim % 8 == 0);

        if check {
            let (theta, z) = tridiag_eigen(&alphas, &betas);
            let mut found: Vec<(f64, usize)> = Vec::new();
            let theta_top = theta.iter().fold(0.0f64, |m, t| m.max(t.abs()));
            // Ritz values orders of magnitude below the dominant |theta|
            // carry its rounding noise; leave them to a narrower slice.
            let theta_trust = theta_top * 1e-4;
            for (i, &th) in theta.iter().enumerate() {
                if th.abs() <= theta_trust {
                    continue;
                }
                let resid = beta * z[(dim - 1) * dim + i].abs();
                if resid <= tol * th.abs() {
                    let lambda = sigma + 1.0 / th;
                    found.push((lambda, i));
                }
            }
            let done_window = found.iter().filter(|(l, _)| in_window(*l)).count() >= want;
            if exhausted || done_window {
                for (lambda, i) in found {
                    let mut x = vec![0.0; n];
                    for (k, q) in basis.iter().enumerate() {
                        axpy(&mut x, z[k * dim + i], q);
                    }
                    // Normalize in the B norm.
                    let mut bx = vec![0.0; n];
                    b.matvec(&x, &mut bx);
                    let nrm = dot(&x, &bx).max(1e-300).sqrt();
                    scale_vec(&mut x, 1.0 / nrm);
                    converged.push((lambda, x));
                }
                return converged;
            }
        }

        if beta < 1e-14 {
            return converged;
        }
        scale_vec(&mut w, 1.0 / beta);
        let mut bw_scaled = bw;
        scale_vec(&mut bw_scaled, 1.0 / beta);
        betas.push(beta);
        basis.push(w);
        b_basis.push(bw_scaled);
    }
}

fn project_out(v: &mut [f64], space: &[Vec<f64>], b_space: &[Vec<f64>]) {
    for (q, bq) in space.iter().zip(b_space) {
        let c = dot(v, bq);
        axpy(v, -c, q);
    }
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn scale_vec(x: &mut [f64], s: f64) {
    for xi in x.iter_mut() {
        *xi *= s;
    }
}

fn min_diag_ratio(a: &BandedSym, b: &BandedSym) -> f64 {
    (0..a.dim()).map(|j| a.get(j, j) / b.get(j, j)).fold(f64::INFINITY, f64::min)
}

fn max_diag_ratio(a: &BandedSym, b: &BandedSym) -> f64 {
    (0..a.dim()).map(|j| a.get(j, j) / b.get(j, j)).fold(f64::NEG_INFINITY, f64::max)
}

fn spectrum_scale(a: &BandedSym, b: &BandedSym) -> f64 {
    let bd = (0..b.dim()).map(|j| b.get(j, j)).fold(f64::INFINITY, f64::min);
    (a.max_abs_diagonal() / bd.max(1e-300)).max(1.0)
}

/// Eigenvalues and eigenvectors of a symmetric tridiagonal matrix by the
/// implicit QL method (Bowdler, Martin, Reinsch & Wilkinson; the classic
/// EISPACK `tql2`). `z` is returned row-major `dim x dim`, eigenvalues
/// ascending.
pub fn tridiag_eigen(diag: &[f64], offdiag: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    assert!(offdiag.len() + 1 >= n);
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&offdiag[..n - 1]);
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }

    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                assert!(iter < 80, "tridiagonal QL failed to converge");

                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    for k in 0..n {
                        h = z[k * n + i + 1];
                        z[k * n + i + 1] = s * z[k * n + i] + c * h;
                        z[k * n + i] = c * z[k * n + i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;

                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    // Sort ascending, permuting columns of z along.
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for j in (i + 1)..n {
            if d[j] < p {
                k = j;
                p = d[j];
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            for row in 0..n {
                z.swap(row * n + i, row * n + k);
            }
        }
    }
    (d, z)
}

/// Dense reference solver: Cholesky reduction to a standard symmetric
/// problem. Returns ascending eigenvalues and B-orthonormal eigenvectors
/// (columns). Intended for dimensions up to a few hundred.
pub fn dense_generalized(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<(Vec<f64>, DMatrix<f64>), EigenError> {
    let n = a.nrows();
    let chol = b.clone().cholesky().ok_or(EigenError::OverlapNotPositiveDefinite)?;
    let l = chol.l();
    // C = L^{-1} A L^{-T}
    let x = l.solve_lower_triangular(a).expect("triangular solve");
    let c = l.solve_lower_triangular(&x.transpose()).expect("triangular solve");
    let c = 0.5 * (&c + c.transpose());
    let se = nalgebra::SymmetricEigen::new(c);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let values: Vec<f64> = idx.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in idx.iter().enumerate() {
        vectors.set_column(col, &se.eigenvectors.column(i));
    }
    // x = L^{-T} y
    let lt = l.transpose();
    let vectors = lt.solve_upper_triangular(&vectors).expect("triangular solve");
    Ok((values, vectors))
}

/// Convenience wrapper running the dense reference on banded operands.
pub fn dense_reference(a: &BandedSym, b: &BandedSym) -> Result<(Vec<f64>, DMatrix<f64>), EigenError> {
    dense_generalized(&a.to_dense(), &b.to_dense())
}
