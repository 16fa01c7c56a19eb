//! B-spline bases on uniform breakpoints with boundary conditions applied
//! by removing or combining edge functions.

use thiserror::Error;

use super::quadrature::GaussLegendre;

#[derive(Debug, Error, PartialEq)]
pub enum BasisError {
    #[error("degenerate domain [{0}, {1}]")]
    DegenerateDomain(f64, f64),
    #[error("basis of {requested} functions needs at least {minimum} for degree {degree} with these boundary conditions")]
    TooFewFunctions { requested: usize, minimum: usize, degree: usize },
}

/// Which edge functions are removed (Dirichlet), combined (Neumann), or kept
/// (free, i.e. the natural boundary condition of the weak form).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    DirichletBoth,
    DirichletLeftFreeRight,
    DirichletLeftNeumannRight,
    FreeLeftDirichletRight,
}

impl BoundaryCondition {
    fn removed(self) -> usize {
        match self {
            Self::DirichletBoth | Self::DirichletLeftNeumannRight => 2,
            Self::DirichletLeftFreeRight | Self::FreeLeftDirichletRight => 1,
        }
    }
}

/// Per-interval evaluation table used by the matrix assembly: quadrature
/// nodes plus values and first derivatives of every retained basis function
/// active on the interval, laid out `[node * count + func]`.
#[derive(Debug, Clone)]
pub struct IntervalTable {
    pub first_retained: usize,
    pub count: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
}

/// B-spline basis of polynomial order `degree` on uniform breakpoints over
/// a fixed domain, after boundary-condition reduction.
///
/// Raw basis functions are the clamped B-splines `B_0 .. B_{N-1}`,
/// `N = intervals + degree`. Retained functions are either single raw
/// functions or, for a Neumann edge, a two-function combination whose
/// derivative vanishes at the endpoint.
#[derive(Debug, Clone)]
pub struct BSplineBasis {
    degree: usize,
    breakpoints: Vec<f64>,
    knots: Vec<f64>,
    boundary: BoundaryCondition,
    /// retained index -> list of (raw index, coefficient)
    combos: Vec<Vec<(usize, f64)>>,
    /// retained index -> (first, last) breakpoint interval of its support
    support: Vec<(usize, usize)>,
}

impl BSplineBasis {
    /// Basis with exactly `retained` functions after boundary reduction.
    pub fn with_retained(
        domain: (f64, f64),
        retained: usize,
        degree: usize,
        boundary: BoundaryCondition,
    ) -> Result<Self, BasisError> {
        let (a, b) = domain;
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(BasisError::DegenerateDomain(a, b));
        }
        let minimum = degree + 1;
        if retained < minimum {
            return Err(BasisError::TooFewFunctions { requested: retained, minimum, degree });
        }
        let raw = retained + boundary.removed();
        let intervals = raw - degree; // >= 2 given the checks above

        let breakpoints: Vec<f64> =
            (0..=intervals).map(|i| a + (b - a) * i as f64 / intervals as f64).collect();
        let mut knots = Vec::with_capacity(raw + degree + 1);
        knots.extend(std::iter::repeat(a).take(degree + 1));
        knots.extend_from_slice(&breakpoints[1..intervals]);
        knots.extend(std::iter::repeat(b).take(degree + 1));

        let mut basis = Self {
            degree,
            breakpoints,
            knots,
            boundary,
            combos: Vec::new(),
            support: Vec::new(),
        };

        let mut combos: Vec<Vec<(usize, f64)>> = Vec::with_capacity(retained);
        match boundary {
            BoundaryCondition::DirichletBoth => {
                combos.extend((0..retained).map(|j| vec![(j + 1, 1.0)]));
            }
            BoundaryCondition::DirichletLeftFreeRight => {
                combos.extend((0..retained).map(|j| vec![(j + 1, 1.0)]));
            }
            BoundaryCondition::FreeLeftDirichletRight => {
                combos.extend((0..retained).map(|j| vec![(j, 1.0)]));
            }
            BoundaryCondition::DirichletLeftNeumannRight => {
                combos.extend((0..retained - 1).map(|j| vec![(j + 1, 1.0)]));
                // Combine the last two so the derivative vanishes at b.
                let d_last = basis.raw_deriv_at_end(raw - 1);
                let d_prev = basis.raw_deriv_at_end(raw - 2);
                combos.push(vec![(raw - 2, 1.0), (raw - 1, -d_prev / d_last)]);
            }
        }

        let support = combos
            .iter()
            .map(|combo| {
                let lo = combo
                    .iter()
                    .map(|&(r, _)| r.saturating_sub(degree))
                    .min()
                    .unwrap();
                let hi = combo.iter().map(|&(r, _)| r.min(intervals - 1)).max().unwrap();
                (lo, hi)
            })
            .collect();

        basis.combos = combos;
        basis.support = support;
        Ok(basis)
    }

    pub fn size(&self) -> usize {
        self.combos.len()
    }

    pub fn raw_size(&self) -> usize {
        self.intervals() + self.degree
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn intervals(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn boundary(&self) -> BoundaryCondition {
        self.boundary
    }

    fn find_interval(&self, x: f64) -> usize {
        let (a, b) = self.domain();
        let n = self.intervals();
        if x >= b {
            return n - 1;
        }
        let guess = ((x - a) / (b - a) * n as f64).floor() as usize;
        guess.min(n - 1)
    }

    /// Values and derivatives (orders `0..=nder`) of the `degree + 1` raw
    /// functions active at `x`; returns the first active raw index and a
    /// row-major `[(nder+1) x (degree+1)]` table.
    pub fn eval_raw_all(&self, x: f64, nder: usize) -> (usize, Vec<f64>) {
        let p = self.degree;
        let interval = self.find_interval(x);
        let span = interval + p; // knot span index: knots[span] <= x < knots[span+1]
        let ders = ders_basis_funs(span, x, p, nder, &self.knots);
        (interval, ders)
    }

    fn raw_deriv_at_end(&self, raw_index: usize) -> f64 {
        let (_, b) = self.domain();
        let (first, ders) = self.eval_raw_all(b, 1);
        let p = self.degree;
        let local = raw_index - first;
        debug_assert!(local <= p);
        ders[(p + 1) + local]
    }

    /// Value (deriv = 0) or derivative of retained function `j` at `x`.
    pub fn eval_retained(&self, j: usize, x: f64, deriv: usize) -> f64 {
        let p = self.degree;
        let (first, ders) = self.eval_raw_all(x, deriv);
        let row = &ders[deriv * (p + 1)..(deriv + 1) * (p + 1)];
        self.combos[j]
            .iter()
            .map(|&(r, c)| {
                if r >= first && r <= first + p {
                    c * row[r - first]
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Retained functions active on breakpoint interval `k`, as a
    /// contiguous index range.
    pub fn active_on_interval(&self, k: usize) -> std::ops::Range<usize> {
        let first = self.support.iter().position(|&(lo, hi)| lo <= k && k <= hi);
        match first {
            Some(f) => {
                let mut last = f;
                while last + 1 < self.size() && self.support[last + 1].0 <= k && k <= self.support[last + 1].1 {
                    last += 1;
                }
                f..last + 1
            }
            None => 0..0,
        }
    }

    /// Quadrature tables for every breakpoint interval.
    pub fn tables(&self, quad: &GaussLegendre) -> Vec<IntervalTable> {
        let p = self.degree;
        (0..self.intervals())
            .map(|k| {
                let active = self.active_on_interval(k);
                let count = active.len();
                let nq = quad.nodes.len();
                let mut nodes = Vec::with_capacity(nq);
                let mut weights = Vec::with_capacity(nq);
                let mut values = vec![0.0; nq * count];
                let mut derivs = vec![0.0; nq * count];
                for (qi, (x, w)) in quad.mapped(self.breakpoints[k], self.breakpoints[k + 1]).enumerate() {
                    nodes.push(x);
                    weights.push(w);
                    let (first_raw, ders) = self.eval_raw_all(x, 1);
                    debug_assert_eq!(first_raw, k);
                    let vrow = &ders[0..p + 1];
                    let drow = &ders[p + 1..2 * (p + 1)];
                    for (local, j) in active.clone().enumerate() {
                        let mut v = 0.0;
                        let mut d = 0.0;
                        for &(r, c) in &self.combos[j] {
                            if r >= first_raw && r <= first_raw + p {
                                v += c * vrow[r - first_raw];
                                d += c * drow[r - first_raw];
                            }
                        }
                        values[qi * count + local] = v;
                        derivs[qi * count + local] = d;
                    }
                }
                IntervalTable { first_retained: active.start, count, nodes, weights, values, derivs }
            })
            .collect()
    }
}

/// Derivatives of the nonvanishing B-spline functions at `x` (algorithm
/// A2.3 of Piegl & Tiller). Row `d` holds the order-`d` derivatives of the
/// `p + 1` functions `B_{span-p} .. B_{span}`.
fn ders_basis_funs(span: usize, x: f64, p: usize, nder: usize, knots: &[f64]) -> Vec<f64> {
    let n = nder.min(p);
    let w = p + 1;
    let mut ndu = vec![0.0; w * w];
    let mut left = vec![0.0; w];
    let mut right = vec![0.0; w];
    ndu[0] = 1.0;
    for j in 1..=p {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            // lower triangle: knot differences
            ndu[j * w + r] = right[r + 1] + left[j - r];
            let temp = ndu[r * w + (j - 1)] / ndu[j * w + r];
            // upper triangle: basis values
            ndu[r * w + j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j * w + j] = saved;
    }

    let mut ders = vec![0.0; (nder + 1) * w];
    for j in 0..=p {
        ders[j] = ndu[j * w + p];
    }

    let mut a = vec![0.0; 2 * w];
    for r in 0..=p {
        let mut s1 = 0;
        let mut s2 = 1;
        a[0] = 1.0;
        for k in 1..=n {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = (p - k) as isize;
            if r >= k {
                a[s2 * w] = a[s1 * w] / ndu[((pk + 1) as usize) * w + rk as usize];
                d = a[s2 * w] * ndu[(rk as usize) * w + pk as usize];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if r as isize - 1 <= pk { k - 1 } else { p - r };
            for j in j1..=j2 {
                a[s2 * w + j] = (a[s1 * w + j] - a[s1 * w + j - 1])
                    / ndu[((pk + 1) as usize) * w + (rk + j as isize) as usize];
                d += a[s2 * w + j] * ndu[((rk + j as isize) as usize) * w + pk as usize];
            }
            if r as isize <= pk {
                a[s2 * w + k] = -a[s1 * w + k - 1] / ndu[((pk + 1) as usize) * w + r];
                d += a[s2 * w + k] * ndu[r * w + pk as usize];
            }
            ders[k * w + r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }

    let mut factor = p as f64;
    for k in 1..=n {
        for j in 0..=p {
            ders[k * w + j] *= factor;
        }
        factor *= (p - k) as f64;
    }
    ders
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn partition_of_unity_before_boundary_removal() {
        let basis =
            BSplineBasis::with_retained((0.0, 2.0), 12, 5, BoundaryCondition::DirichletBoth).unwrap();
        for i in 0..=200 {
            let x = 2.0 * i as f64 / 200.0;
            let (_, ders) = basis.eval_raw_all(x, 0);
            let sum: f64 = ders[..6].iter().sum();
            assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn dirichlet_functions_vanish_at_endpoints() {
        let basis =
            BSplineBasis::with_retained((0.0, 1.5), 10, 5, BoundaryCondition::DirichletBoth).unwrap();
        assert_eq!(basis.size(), 10);
        for j in 0..basis.size() {
            assert_abs_diff_eq!(basis.eval_retained(j, 0.0, 0), 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(basis.eval_retained(j, 1.5, 0), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn neumann_combination_kills_the_end_derivative() {
        let basis = BSplineBasis::with_retained(
            (0.0, 1.0),
            9,
            5,
            BoundaryCondition::DirichletLeftNeumannRight,
        )
        .unwrap();
        for j in 0..basis.size() {
            assert_abs_diff_eq!(basis.eval_retained(j, 0.0, 0), 0.0, epsilon = 1e-13);
            assert_abs_diff_eq!(basis.eval_retained(j, 1.0, 1), 0.0, epsilon = 1e-10);
        }
        // The combined function itself is nonzero at the endpoint.
        assert!(basis.eval_retained(basis.size() - 1, 1.0, 0).abs() > 1e-8);
    }

    #[test]
    fn free_right_end_keeps_a_nonzero_function() {
        let basis = BSplineBasis::with_retained(
            (0.0, 1.0),
            9,
            5,
            BoundaryCondition::DirichletLeftFreeRight,
        )
        .unwrap();
        assert_abs_diff_eq!(basis.eval_retained(8, 1.0, 0), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(basis.eval_retained(0, 0.0, 0), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn derivative_integrates_to_endpoint_difference() {
        let basis = BSplineBasis::with_retained(
            (0.0, 3.0),
            11,
            5,
            BoundaryCondition::DirichletLeftFreeRight,
        )
        .unwrap();
        let quad = GaussLegendre::new(10);
        for j in 0..basis.size() {
            let mut integral = 0.0;
            for k in 0..basis.intervals() {
                integral += quad.integrate(basis.breakpoints()[k], basis.breakpoints()[k + 1], |x| {
                    basis.eval_retained(j, x, 1)
                });
            }
            let diff = basis.eval_retained(j, 3.0, 0) - basis.eval_retained(j, 0.0, 0);
            assert_abs_diff_eq!(integral, diff, epsilon = 1e-12);
        }
    }

    #[test]
    fn too_few_functions_rejected() {
        let err = BSplineBasis::with_retained((0.0, 1.0), 4, 5, BoundaryCondition::DirichletBoth)
            .unwrap_err();
        assert!(matches!(err, BasisError::TooFewFunctions { .. }));
    }

    #[test]
    fn tables_match_pointwise_evaluation() {
        let basis =
            BSplineBasis::with_retained((0.2, 2.2), 9, 4, BoundaryCondition::DirichletBoth).unwrap();
        let quad = GaussLegendre::new(6);
        let tables = basis.tables(&quad);
        assert_eq!(tables.len(), basis.intervals());
        for (k, t) in tables.iter().enumerate() {
            let active = basis.active_on_interval(k);
            assert_eq!(t.first_retained, active.start);
            assert_eq!(t.count, active.len());
            for (qi, &x) in t.nodes.iter().enumerate() {
                for (local, j) in active.clone().enumerate() {
                    assert_relative_eq!(
                        t.values[qi * t.count + local],
                        basis.eval_retained(j, x, 0),
                        epsilon = 1e-13
                    );
                    assert_relative_eq!(
                        t.derivs[qi * t.count + local],
                        basis.eval_retained(j, x, 1),
                        epsilon = 1e-11
                    );
                }
            }
        }
    }

    #[test]
    fn second_derivatives_are_available() {
        let basis =
            BSplineBasis::with_retained((0.0, 1.0), 8, 5, BoundaryCondition::DirichletBoth).unwrap();
        // check d2/dx2 against a central difference of d/dx
        let j = 3;
        let x = 0.456;
        let h = 1e-5;
        let fd = (basis.eval_retained(j, x + h, 1) - basis.eval_retained(j, x - h, 1)) / (2.0 * h);
        assert_relative_eq!(basis.eval_retained(j, x, 2), fd, epsilon = 1e-5, max_relative = 1e-5);
    }
}
