//! Two-atom bound states: numerical spectra on the line, the analytic Morse
//! oracle, the WKB bound-state count, and the dimer-dimer reference energy.

use serde::Serialize;
use thiserror::Error;

use crate::galerkin::{
    assemble_1d, solve_lowest, BSplineBasis, BandedSym, BoundaryCondition, Cutoff, EigenOptions,
    GaussLegendre, OperatorKind,
};
use crate::model::{PairPotential, Parity, PotentialKind, SystemParams};

#[derive(Debug, Error)]
pub enum TwoBodyError {
    #[error("reduced mass must be positive, got {0}")]
    NonPositiveMass(f64),
    #[error("bound-state count did not stabilize under box doubling (last boxes held {a} and {b} states)")]
    BoxNotConverged { a: usize, b: usize },
    #[error("pair ({0}) supports no bound state")]
    UnboundPair(&'static str),
    #[error(transparent)]
    Eigen(#[from] crate::galerkin::eigen::EigenError),
    #[error(transparent)]
    Assemble(#[from] crate::galerkin::assemble::AssembleError),
    #[error(transparent)]
    Basis(#[from] crate::galerkin::bspline::BasisError),
}

/// Bound spectrum of one pair: `-(1/2 mu2) psi'' + U(|x|) psi = E psi` on
/// the full line, solved per parity sector on the half line.
#[derive(Debug, Clone)]
pub struct TwoBodySpectrum {
    pub potential: PairPotential,
    pub reduced_mass: f64,
    /// Ascending bound energies, strictly negative.
    pub energies: Vec<f64>,
    /// Parity of each level under `x -> -x`.
    pub parities: Vec<Parity>,
}

impl TwoBodySpectrum {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn ground_state(&self) -> Option<f64> {
        self.energies.first().copied()
    }

    /// Energies of one parity sector, ascending.
    pub fn sector(&self, parity: Parity) -> Vec<f64> {
        self.energies
            .iter()
            .zip(&self.parities)
            .filter(|(_, &p)| p == parity)
            .map(|(&e, _)| e)
            .collect()
    }
}

/// Average lowest dimer-dimer energy and its components.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DimerReference {
    /// `(|E12 + E34| + |E13 + E24|) / 2`, a positive magnitude.
    pub e_b: f64,
    pub e12: f64,
    pub e34: f64,
    pub e13: f64,
    pub e24: f64,
}

/// Numerical knobs for the two-body solver. The defaults resolve the
/// deepest Morse wells used in the model comfortably.
#[derive(Debug, Clone)]
pub struct TwoBodyOptions {
    /// Quadrature nodes per knot interval.
    pub quad_nodes: usize,
    /// Spline polynomial order.
    pub order: usize,
    /// Absolute energy tolerance (scaled by `max(1, |E|)`) for box-size
    /// convergence.
    pub box_tol: f64,
    /// Maximum number of box doublings.
    pub max_doublings: usize,
    /// Hard cap on the basis size per sector; the knot spacing grows once
    /// the box hits it.
    pub max_basis: usize,
}

impl Default for TwoBodyOptions {
    fn default() -> Self {
        Self { quad_nodes: 10, order: 5, box_tol: 1e-8, max_doublings: 4, max_basis: 4000 }
    }
}

/// Solve one parity sector on `[0, L]`.
fn solve_sector(
    p: &PairPotential,
    mu2: f64,
    half_width: f64,
    parity: Parity,
    opts: &TwoBodyOptions,
) -> Result<Vec<f64>, TwoBodyError> {
    let boundary = match parity {
        Parity::Even => BoundaryCondition::FreeLeftDirichletRight,
        Parity::Odd => BoundaryCondition::DirichletBoth,
    };
    let k_max = (2.0 * mu2 * p.depth).sqrt();
    let h = (0.8 / k_max).min(p.width / 4.0);
    let count = (((half_width / h).ceil() as usize).max(4 * opts.order) + opts.order)
        .min(opts.max_basis);
    let basis = BSplineBasis::with_retained((0.0, half_width), count, opts.order, boundary)?;
    let quad = GaussLegendre::new(opts.quad_nodes);

    let stiff = assemble_1d(&basis, &quad, |_| 1.0, OperatorKind::SecondDerivative)?;
    let pot = assemble_1d(&basis, &quad, |_| 1.0, OperatorKind::MultiplyBy(&|x| p.evaluate(x)))?;
    let overlap = assemble_1d(&basis, &quad, |_| 1.0, OperatorKind::Overlap)?;
    let n = stiff.dim();
    let mut h_mat = BandedSym::zeros(n, stiff.bandwidth());
    for j in 0..n {
        for i in j..(j + stiff.bandwidth() + 1).min(n) {
            h_mat.set(i, j, -stiff.get(i, j) / (2.0 * mu2) + pot.get(i, j));
        }
    }
    let eig_opts = EigenOptions { lower_bound_hint: Some(-1.01 * p.depth), ..Default::default() };
    let sol = solve_lowest(&h_mat, &overlap, Cutoff::Below(0.0), &eig_opts)?;
    Ok(sol.values)
}

/// Full-line bound spectrum of `U(|x|)` with reduced mass `mu2`.
///
/// The half-line box `[0, L]` starts at `12 r0 + 6/kappa` and is doubled
/// until the count is stable and every level moved by less than the box
/// tolerance; marginal levels are kept only if the doubled box keeps them
/// negative.
pub fn solve_two_body(p: &PairPotential, mu2: f64) -> Result<TwoBodySpectrum, TwoBodyError> {
    solve_two_body_with(p, mu2, &TwoBodyOptions::default())
}

pub fn solve_two_body_with(
    p: &PairPotential,
    mu2: f64,
    opts: &TwoBodyOptions,
) -> Result<TwoBodySpectrum, TwoBodyError> {
    if !(mu2 > 0.0) {
        return Err(TwoBodyError::NonPositiveMass(mu2));
    }
    let kappa_shallow = (2.0 * mu2 * 1e-3 * p.depth).sqrt();
    let mut half_width = 12.0 * p.width + 6.0 / kappa_shallow;

    let solve_both = |l: f64| -> Result<(Vec<f64>, Vec<Parity>), TwoBodyError> {
        let even = solve_sector(p, mu2, l, Parity::Even, opts)?;
        let odd = solve_sector(p, mu2, l, Parity::Odd, opts)?;
        let mut merged: Vec<(f64, Parity)> = even
            .into_iter()
            .map(|e| (e, Parity::Even))
            .chain(odd.into_iter().map(|e| (e, Parity::Odd)))
            .collect();
        merged.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(merged.into_iter().unzip())
    };

    let (mut energies, mut parities) = solve_both(half_width)?;
    for _ in 0..opts.max_doublings {
        half_width *= 2.0;
        let (next_e, next_p) = solve_both(half_width)?;
        let converged = next_e.len() == energies.len()
            && energies
                .iter()
                .zip(&next_e)
                .all(|(a, b)| (a - b).abs() <= opts.box_tol * a.abs().max(1.0));
        let marginal = 1e-4 * p.depth;
        let only_marginal_mismatch = {
            let stable_old: Vec<f64> =
                energies.iter().copied().filter(|e| e.abs() >= marginal).collect();
            let stable_new: Vec<f64> =
                next_e.iter().copied().filter(|e| e.abs() >= marginal).collect();
            stable_old.len() == stable_new.len()
                && stable_old
                    .iter()
                    .zip(&stable_new)
                    .all(|(a, b)| (a - b).abs() <= opts.box_tol * a.abs().max(1.0))
        };
        energies = next_e;
        parities = next_p;
        if converged || only_marginal_mismatch {
            return Ok(TwoBodySpectrum {
                potential: *p,
                reduced_mass: mu2,
                energies,
                parities,
            });
        }
    }
    Err(TwoBodyError::BoxNotConverged { a: energies.len(), b: parities.len() })
}

/// Analytic Morse spectrum on the half line:
/// `E_n = -D + w (n + 1/2) - (a^2 / 2 mu2)(n + 1/2)^2` with
/// `w = a sqrt(2 D / mu2)`, for every `n` with `dE/dn > 0` and `E_n < 0`.
pub fn morse_oracle(depth: f64, width: f64, mu2: f64) -> Vec<f64> {
    let a = 1.0 / width;
    let omega = a * (2.0 * depth / mu2).sqrt();
    let anharm = a * a / (2.0 * mu2);
    let mut levels = Vec::new();
    let mut n = 0.0;
    loop {
        let x = n + 0.5;
        if omega - 2.0 * anharm * x <= 0.0 {
            break;
        }
        let e = -depth + omega * x - anharm * x * x;
        if e >= 0.0 {
            break;
        }
        levels.push(e);
        n += 1.0;
    }
    levels
}

/// Analytic estimate of the lowest bound energy of `U(|x|)` with reduced
/// mass `mu2`: the half-line Morse formula, or the exact Poschl-Teller
/// ground state. Used for sizing heuristics, not as a spectrum oracle.
pub fn pair_ground_estimate(p: &PairPotential, mu2: f64) -> f64 {
    match p.kind {
        PotentialKind::Morse => morse_oracle(p.depth, p.width, mu2)
            .first()
            .copied()
            .unwrap_or(-0.5 * p.depth),
        PotentialKind::PoschlTeller => {
            let lam = 0.5 * (-1.0 + (1.0 + 8.0 * mu2 * p.depth * p.width * p.width).sqrt());
            if lam > 0.0 {
                -lam * lam / (2.0 * mu2 * p.width * p.width)
            } else {
                -0.5 * p.depth
            }
        }
    }
}

/// WKB/Levinson bound-state count of one parity,
/// `(1/pi) int_{r_t}^inf sqrt(2 mu2 (-U)) dr` with `mu2 = 1/2`:
/// closed form `sqrt(D) r0` for Morse, quadrature otherwise.
pub fn wkb_count(p: &PairPotential) -> f64 {
    match p.kind {
        PotentialKind::Morse => p.depth.sqrt() * p.width,
        PotentialKind::PoschlTeller => wkb_count_quadrature(p),
    }
}

/// Direct quadrature of the WKB phase integral (used for non-Morse kinds
/// and as a cross-check of the closed forms).
pub fn wkb_count_quadrature(p: &PairPotential) -> f64 {
    // Zero-energy turning point: leftmost r with U(r) <= 0.
    let mut r_t = 0.0;
    if p.evaluate(0.0) > 0.0 {
        let mut lo = 0.0;
        let mut hi = p.width;
        while p.evaluate(hi) > 0.0 {
            hi += p.width;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if p.evaluate(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        r_t = hi;
    }
    let quad = GaussLegendre::new(10);
    let r_far = r_t + 80.0 * p.width;
    // Substitute r = r_t + t^2 to absorb the square-root behavior of the
    // integrand at the turning point.
    let t_far = (r_far - r_t).sqrt();
    let integral = quad.integrate_panels(0.0, t_far, 400, |t| {
        2.0 * t * (-p.evaluate(r_t + t * t)).max(0.0).sqrt()
    });
    integral / std::f64::consts::PI
}

/// Ground-state energies of the two dimer-dimer pairings and their average
/// magnitude `E_b`.
pub fn compute_eb(p: &PairPotential, params: &SystemParams) -> Result<DimerReference, TwoBodyError> {
    let ground = |mu2: f64, label: &'static str| -> Result<f64, TwoBodyError> {
        solve_two_body(p, mu2)?
            .ground_state()
            .ok_or(TwoBodyError::UnboundPair(label))
    };
    let e12 = ground(params.mu12(), "1,2")?;
    let e34 = ground(params.mu34(), "3,4")?;
    let e13 = ground(params.mu13(), "1,3")?;
    let e24 = e13;
    let e_b = 0.5 * ((e12 + e34).abs() + (e13 + e24).abs());
    Ok(DimerReference { e_b, e12, e34, e13, e24 })
}
