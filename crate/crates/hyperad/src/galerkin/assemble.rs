//! Galerkin matrix assembly: 1D operators in a B-spline basis and the 2D
//! tensor-product assembly of the hyperangular Hamiltonian.

use thiserror::Error;

use super::banded::BandedSym;
use super::bspline::BSplineBasis;
use super::quadrature::GaussLegendre;
use crate::model::{total_potential, HyperPoint, PairPotential, SystemParams};

#[derive(Debug, Error)]
pub enum AssembleError {
    #[error("integrand is not finite at quadrature node x = {x}")]
    NonFiniteIntegrand { x: f64 },
}

/// Which bilinear form to assemble in 1D.
pub enum OperatorKind<'f> {
    /// `int w(x) u_i u_j dx`
    Overlap,
    /// `-int w(x) u_i' u_j' dx`: the second-derivative operator in its
    /// integration-by-parts form, negative semidefinite.
    SecondDerivative,
    /// `int w(x) f(x) u_i u_j dx`
    MultiplyBy(&'f dyn Fn(f64) -> f64),
}

/// Form of the hyperangular kinetic operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorForm {
    /// The two-sphere Laplacian: the phi block carries the `1/sin(theta)`
    /// metric weight.
    StandardLaplacian,
    /// The phi block paired with the plain `sin(theta)` overlap instead of
    /// the metric weight, for comparison runs.
    LiteralSeparable,
}

/// Assemble a symmetric 1D operator with weight `w(x)`. Gauss-Legendre
/// quadrature per breakpoint interval.
pub fn assemble_1d(
    basis: &BSplineBasis,
    quad: &GaussLegendre,
    weight: impl Fn(f64) -> f64,
    kind: OperatorKind<'_>,
) -> Result<BandedSym, AssembleError> {
    let n = basis.size();
    let mut m = BandedSym::zeros(n, basis.degree());
    let tables = basis.tables(quad);
    for t in &tables {
        let c = t.count;
        for (qi, (&x, &wq)) in t.nodes.iter().zip(&t.weights).enumerate() {
            let wx = weight(x);
            let factor = match &kind {
                OperatorKind::Overlap => wq * wx,
                OperatorKind::SecondDerivative => -wq * wx,
                OperatorKind::MultiplyBy(f) => wq * wx * f(x),
            };
            if !factor.is_finite() {
                return Err(AssembleError::NonFiniteIntegrand { x });
            }
            let row = match &kind {
                OperatorKind::SecondDerivative => &t.derivs[qi * c..(qi + 1) * c],
                _ => &t.values[qi * c..(qi + 1) * c],
            };
            for a in 0..c {
                let fa = factor * row[a];
                for b in 0..=a {
                    m.add(t.first_retained + a, t.first_retained + b, fa * row[b]);
                }
            }
        }
    }
    Ok(m)
}

/// The assembled pencil of the fixed-R hyperangular problem.
///
/// Index layout is theta-major: global index `m * n_phi + n` for theta
/// function `m` and phi function `n`. `kinetic` already carries the
/// `1/(2 mu R^2)` prefactor; the Hamiltonian is `kinetic + potential` and
/// the metric is `overlap`.
pub struct GalerkinMatrices {
    pub overlap: BandedSym,
    pub kinetic: BandedSym,
    pub potential: BandedSym,
    pub dimension: usize,
    /// Minimum of V over the quadrature grid: a rigorous lower bound of the
    /// spectrum of the assembled pencil (the kinetic form is positive
    /// semidefinite and the quadrature weights are positive).
    pub v_min: f64,
}

impl GalerkinMatrices {
    pub fn hamiltonian(&self) -> BandedSym {
        let mut h = self.kinetic.clone();
        let n = h.dim();
        let bw = h.bandwidth();
        for j in 0..n {
            for i in j..(j + bw + 1).min(n) {
                let v = self.potential.get(i, j);
                if v != 0.0 {
                    h.add(i, j, v);
                }
            }
        }
        h
    }
}

/// Assemble the hyperangular pencil at hyperradius `r_hyper`.
///
/// The kinetic blocks follow the integration-by-parts forms; with
/// [`OperatorForm::StandardLaplacian`] the phi second-derivative block is
/// weighted by `1/sin(theta)`, which is integrable here because the theta
/// bases are Dirichlet at the pole. The potential block is a 2D
/// Gauss-Legendre quadrature of `V(R, theta, phi)` against the product
/// basis with the `sin(theta)` measure.
pub fn assemble_hyperangular(
    basis_theta: &BSplineBasis,
    basis_phi: &BSplineBasis,
    quad: &GaussLegendre,
    r_hyper: f64,
    potential: &PairPotential,
    params: &SystemParams,
    form: OperatorForm,
) -> Result<GalerkinMatrices, AssembleError> {
    let nt = basis_theta.size();
    let np = basis_phi.size();
    let dim = nt * np;
    let p_t = basis_theta.degree();
    let p_p = basis_phi.degree();
    let bw = p_t * np + p_p;

    let s_phi = assemble_1d(basis_phi, quad, |_| 1.0, OperatorKind::Overlap)?;
    let t_phi = assemble_1d(basis_phi, quad, |_| 1.0, OperatorKind::SecondDerivative)?;
    let s_theta = assemble_1d(basis_theta, quad, f64::sin, OperatorKind::Overlap)?;
    let t_theta = assemble_1d(basis_theta, quad, f64::sin, OperatorKind::SecondDerivative)?;
    let phi_weight_theta = match form {
        OperatorForm::StandardLaplacian => {
            assemble_1d(basis_theta, quad, |th| 1.0 / th.sin(), OperatorKind::Overlap)?
        }
        OperatorForm::LiteralSeparable => s_theta.clone(),
    };

    let prefactor = 1.0 / (2.0 * params.mu_hyper() * r_hyper * r_hyper);

    let mut overlap = BandedSym::zeros(dim, bw);
    let mut kinetic = BandedSym::zeros(dim, bw);
    // kinetic = -(1/2 mu R^2) [ t_theta (x) s_phi + c_theta (x) t_phi ]
    for mj in 0..nt {
        for mi in mj..(mj + p_t + 1).min(nt) {
            let st = s_theta.get(mi, mj);
            let tt = t_theta.get(mi, mj);
            let ct = phi_weight_theta.get(mi, mj);
            for nj in 0..np {
                let (n_lo, n_hi) = if mi == mj {
                    (nj, (nj + p_p).min(np - 1))
                } else {
                    (nj.saturating_sub(p_p), (nj + p_p).min(np - 1))
                };
                for ni in n_lo..=n_hi {
                    let gi = mi * np + ni;
                    let gj = mj * np + nj;
                    if gi < gj {
                        continue;
                    }
                    let sp = s_phi.get(ni, nj);
                    let tp = t_phi.get(ni, nj);
                    if st != 0.0 && sp != 0.0 {
                        overlap.add(gi, gj, st * sp);
                    }
                    let k = -prefactor * (tt * sp + ct * tp);
                    if k != 0.0 {
                        kinetic.add(gi, gj, k);
                    }
                }
            }
        }
    }

    // Potential block: quadrature over the octant with measure sin(theta).
    let mut pot = BandedSym::zeros(dim, bw);
    let theta_tables = basis_theta.tables(quad);
    let phi_tables = basis_phi.tables(quad);
    let mut v_min = f64::INFINITY;
    // Scratch banded phi-matrix W(n', n) = sum_phi-nodes w u_{n'} u_n V.
    let wp = p_p + 1;
    let mut w_phi = vec![0.0; np * wp];

    for t_tab in &theta_tables {
        let ct = t_tab.count;
        for (qi, (&theta, &wq_t)) in t_tab.nodes.iter().zip(&t_tab.weights).enumerate() {
            let wt = wq_t * theta.sin();
            w_phi.fill(0.0);
            for p_tab in &phi_tables {
                let cp = p_tab.count;
                for (pj, (&phi, &wq_p)) in p_tab.nodes.iter().zip(&p_tab.weights).enumerate() {
                    let pt = HyperPoint { radius: r_hyper, theta, phi };
                    let v = total_potential(&pt, potential, params);
                    if !v.is_finite() {
                        return Err(AssembleError::NonFiniteIntegrand { x: phi });
                    }
                    v_min = v_min.min(v);
                    let factor = wq_p * v;
                    let row = &p_tab.values[pj * cp..(pj + 1) * cp];
                    for a in 0..cp {
                        let fa = factor * row[a];
                        let ga = p_tab.first_retained + a;
                        for b in 0..=a {
                            let gb = p_tab.first_retained + b;
                            w_phi[gb * wp + (ga - gb)] += fa * row[b];
                        }
                    }
                }
            }
            // Contract with the theta pair values.
            let trow = &t_tab.values[qi * ct..(qi + 1) * ct];
            for a in 0..ct {
                let ma = t_tab.first_retained + a;
                for b in 0..=a {
                    let mb = t_tab.first_retained + b;
                    let f_ab = wt * trow[a] * trow[b];
                    if f_ab == 0.0 {
                        continue;
                    }
                    if ma == mb {
                        for nj in 0..np {
                            for ni in nj..(nj + p_p + 1).min(np) {
                                let w = w_phi[nj * wp + (ni - nj)];
                                if w != 0.0 {
                                    pot.add(ma * np + ni, mb * np + nj, f_ab * w);
                                }
                            }
                        }
                    } else {
                        // ma > mb: all phi pairs within the band, both
                        // orientations of the off-diagonal phi entries.
                        for nj in 0..np {
                            for ni in nj..(nj + p_p + 1).min(np) {
                                let w = w_phi[nj * wp + (ni - nj)];
                                if w == 0.0 {
                                    continue;
                                }
                                pot.add(ma * np + ni, mb * np + nj, f_ab * w);
                                if ni != nj {
                                    pot.add(ma * np + nj, mb * np + ni, f_ab * w);
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    Ok(GalerkinMatrices { overlap, kinetic, potential: pot, dimension: dim, v_min })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::bspline::BoundaryCondition;
    use crate::galerkin::eigen::{dense_reference, solve_lowest, Cutoff, EigenOptions};
    use crate::model::Parity;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn overlap_is_positive_definite() {
        let basis =
            BSplineBasis::with_retained((0.0, 1.0), 14, 5, BoundaryCondition::DirichletBoth).unwrap();
        let quad = GaussLegendre::new(10);
        let s = assemble_1d(&basis, &quad, |_| 1.0, OperatorKind::Overlap).unwrap();
        assert!(s.to_dense().cholesky().is_some());
    }

    #[test]
    fn second_derivative_form_is_negative_semidefinite() {
        let basis = BSplineBasis::with_retained(
            (0.0, FRAC_PI_2),
            12,
            5,
            BoundaryCondition::DirichletLeftFreeRight,
        )
        .unwrap();
        let quad = GaussLegendre::new(10);
        let t = assemble_1d(&basis, &quad, f64::sin, OperatorKind::SecondDerivative).unwrap();
        let (vals, _) = dense_reference(&t, &{
            let mut b = BandedSym::zeros(t.dim(), 0);
            for j in 0..t.dim() {
                b.set(j, j, 1.0);
            }
            b
        })
        .unwrap();
        assert!(vals.iter().all(|&v| v <= 1e-10), "max eigenvalue {:?}", vals.last());
    }

    #[test]
    fn particle_in_a_box_spectrum() {
        // Dirichlet box [0, L], V = 0, mass mu: E_n = n^2 pi^2 / (2 mu L^2).
        let length = 3.0;
        let mu = 0.7;
        let basis = BSplineBasis::with_retained(
            (0.0, length),
            42,
            5,
            BoundaryCondition::DirichletBoth,
        )
        .unwrap();
        let quad = GaussLegendre::new(10);
        let stiff = assemble_1d(&basis, &quad, |_| 1.0, OperatorKind::SecondDerivative).unwrap();
        let overlap = assemble_1d(&basis, &quad, |_| 1.0, OperatorKind::Overlap).unwrap();
        // H = -(1/2mu) d2/dx2 -> -(1/2mu) * t
        let mut h = BandedSym::zeros(stiff.dim(), stiff.bandwidth());
        for j in 0..stiff.dim() {
            for i in j..(j + stiff.bandwidth() + 1).min(stiff.dim()) {
                h.set(i, j, -stiff.get(i, j) / (2.0 * mu));
            }
        }
        let sol = solve_lowest(&h, &overlap, Cutoff::Count(5), &EigenOptions::default()).unwrap();
        for (i, v) in sol.values.iter().enumerate() {
            let n = (i + 1) as f64;
            let exact = n * n * std::f64::consts::PI.powi(2) / (2.0 * mu * length * length);
            assert_relative_eq!(*v, exact, epsilon = 1e-6, max_relative = 1e-6);
        }
    }

    fn small_hyperangular(
        nt: usize,
        np: usize,
        r: f64,
        d: f64,
        form: OperatorForm,
    ) -> GalerkinMatrices {
        let params = SystemParams::from_mass_ratio(1.0, Parity::Even).unwrap();
        let potential = PairPotential::morse(d, 1.0).unwrap();
        let bt = BSplineBasis::with_retained(
            (0.0, FRAC_PI_2),
            nt,
            5,
            BoundaryCondition::DirichletLeftFreeRight,
        )
        .unwrap();
        let bp =
            BSplineBasis::with_retained((0.0, FRAC_PI_2), np, 5, BoundaryCondition::DirichletBoth)
                .unwrap();
        let quad = GaussLegendre::new(10);
        assemble_hyperangular(&bt, &bp, &quad, r, &potential, &params, form).unwrap()
    }

    #[test]
    fn hyperangular_dimension_and_symmetry() {
        let g = small_hyperangular(9, 8, 2.5, 10.0, OperatorForm::StandardLaplacian);
        assert_eq!(g.dimension, 72);
        assert!(g.overlap.to_dense().cholesky().is_some());
        let h = g.hamiltonian().to_dense();
        assert_relative_eq!((h.clone() - h.transpose()).norm(), 0.0, epsilon = 1e-12);
        assert!(g.v_min < 0.0);
    }

    #[test]
    fn constant_potential_shifts_the_spectrum() {
        // Compare the full assembly against kinetic-only, both dense-solved;
        // a constant V shifts every eigenvalue by exactly the constant. A
        // flat potential is faked by a Morse potential of negligible depth
        // plus an explicit diagonal check instead: here we simply verify
        // that H = kinetic + potential with potential assembled from
        // V == const equals kinetic spectrum + const. We emulate V == const
        // by assembling with a potential evaluator that is constant.
        let params = SystemParams::from_mass_ratio(1.0, Parity::Even).unwrap();
        let bt = BSplineBasis::with_retained(
            (0.0, FRAC_PI_2),
            8,
            5,
            BoundaryCondition::DirichletLeftFreeRight,
        )
        .unwrap();
        let bp =
            BSplineBasis::with_retained((0.0, FRAC_PI_2), 7, 5, BoundaryCondition::DirichletBoth)
                .unwrap();
        let quad = GaussLegendre::new(10);
        // Zero-depth limit: evaluate with a very shallow potential at huge R
        // so V ~ 0, then add the constant through the overlap matrix.
        let g = {
            let p = PairPotential::morse(1e-300, 1.0).unwrap();
            assemble_hyperangular(&bt, &bp, &quad, 2.0, &p, &params, OperatorForm::StandardLaplacian)
                .unwrap()
        };
        let (free_vals, _) = dense_reference(&g.kinetic, &g.overlap).unwrap();
        let v0 = -7.5;
        let mut shifted = g.kinetic.clone();
        for j in 0..shifted.dim() {
            for i in j..(j + shifted.bandwidth() + 1).min(shifted.dim()) {
                let s = g.overlap.get(i, j);
                if s != 0.0 {
                    shifted.add(i, j, v0 * s);
                }
            }
        }
        let (shift_vals, _) = dense_reference(&shifted, &g.overlap).unwrap();
        for (a, b) in free_vals.iter().zip(&shift_vals) {
            assert_relative_eq!(a + v0, b, epsilon = 1e-10, max_relative = 1e-10);
        }
    }

    #[test]
    fn potential_block_matches_direct_quadrature_entry() {
        // Spot-check one matrix entry of the potential block against a
        // straightforward 2D quadrature of the same integrand.
        let params = SystemParams::from_mass_ratio(1.3, Parity::Even).unwrap();
        let potential = PairPotential::morse(25.0, 1.0).unwrap();
        let bt = BSplineBasis::with_retained(
            (0.0, FRAC_PI_2),
            8,
            4,
            BoundaryCondition::DirichletLeftFreeRight,
        )
        .unwrap();
        let bp =
            BSplineBasis::with_retained((0.0, FRAC_PI_2), 7, 4, BoundaryCondition::DirichletBoth)
                .unwrap();
        let quad = GaussLegendre::new(10);
        let r = 2.2;
        let g = assemble_hyperangular(
            &bt,
            &bp,
            &quad,
            r,
            &potential,
            &params,
            OperatorForm::StandardLaplacian,
        )
        .unwrap();
        let np = bp.size();
        for &(mi, ni, mj, nj) in &[(0usize, 0usize, 0usize, 0usize), (2, 3, 1, 2), (4, 5, 4, 4)] {
            let gi = mi * np + ni;
            let gj = mj * np + nj;
            let mut direct = 0.0;
            for kt in 0..bt.intervals() {
                let (ta, tb) = (bt.breakpoints()[kt], bt.breakpoints()[kt + 1]);
                for (theta, wt) in quad.mapped(ta, tb) {
                    for kp in 0..bp.intervals() {
                        let (pa, pb) = (bp.breakpoints()[kp], bp.breakpoints()[kp + 1]);
                        for (phi, wp) in quad.mapped(pa, pb) {
                            let pt = HyperPoint { radius: r, theta, phi };
                            let v = total_potential(&pt, &potential, &params);
                            direct += wt
                                * wp
                                * theta.sin()
                                * v
                                * bt.eval_retained(mi, theta, 0)
                                * bt.eval_retained(mj, theta, 0)
                                * bp.eval_retained(ni, phi, 0)
                                * bp.eval_retained(nj, phi, 0);
                        }
                    }
                }
            }
            assert_relative_eq!(g.potential.get(gi, gj), direct, epsilon = 1e-10, max_relative = 1e-8);
        }
    }

    #[test]
    fn non_finite_weight_is_reported() {
        let basis =
            BSplineBasis::with_retained((0.0, 1.0), 8, 3, BoundaryCondition::DirichletBoth).unwrap();
        let quad = GaussLegendre::new(4);
        let err = assemble_1d(&basis, &quad, |x| 1.0 / (x - x), OperatorKind::Overlap).unwrap_err();
        assert!(matches!(err, AssembleError::NonFiniteIntegrand { .. }));
    }
}
