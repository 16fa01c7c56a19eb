//! Gauss-Legendre quadrature rules.

/// Gauss-Legendre rule with `n` nodes on the reference interval `[-1, 1]`.
///
/// Nodes are the roots of the Legendre polynomial `P_n`, found by Newton
/// iteration from the Chebyshev initial guess; exact for polynomials of
/// degree `2n - 1`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Chebyshev approximation to the i-th root (descending order).
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    /// Integrate `f` over `[a, b]` with a single panel.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Integrate `f` over `[a, b]` split into `panels` equal panels.
    pub fn integrate_panels<F: FnMut(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        mut f: F,
    ) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|k| self.integrate(a + k as f64 * h, a + (k + 1) as f64 * h, &mut f))
            .sum()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    // Abramowitz & Stegun table 25.4, 10-point rule.
    const NODES_10: [f64; 5] = [
        0.148874338981631211,
        0.433395394129247191,
        0.679409568299024406,
        0.865063366688984511,
        0.973906528517171720,
    ];
    const WEIGHTS_10: [f64; 5] = [
        0.295524224714752870,
        0.269266719309996355,
        0.219086362515982044,
        0.149451349150580593,
        0.066671344308688138,
    ];

    #[test]
    fn ten_node_rule_matches_tabulated_values() {
        let q = GaussLegendre::new(10);
        for i in 0..5 {
            assert_abs_diff_eq!(q.nodes[5 + i], NODES_10[i], epsilon = 1e-15);
            assert_abs_diff_eq!(q.nodes[4 - i], -NODES_10[i], epsilon = 1e-15);
            assert_abs_diff_eq!(q.weights[5 + i], WEIGHTS_10[i], epsilon = 1e-15);
        }
        let wsum: f64 = q.weights.iter().sum();
        assert_relative_eq!(wsum, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn exact_to_degree_nineteen() {
        let q = GaussLegendre::new(10);
        // int_0^1 x^19 dx = 1/20, the highest degree a 10-node rule handles.
        let val = q.integrate(0.0, 1.0, |x| x.powi(19));
        assert_relative_eq!(val, 0.05, epsilon = 1e-13);
        // A degree-9 polynomial integrand per interval is exact to 1e-13.
        let val = q.integrate(-1.0, 3.0, |x| {
            1.0 + x * (0.5 + x * (-2.0 + x * (1.5 + x * (0.25 + x * (1.0 + x * (-0.125 + x * (2.0 + x * (0.75 + x * 0.5))))))))
        });
        // Reference by monomial integration.
        let coef = [1.0, 0.5, -2.0, 1.5, 0.25, 1.0, -0.125, 2.0, 0.75, 0.5];
        let exact: f64 = coef
            .iter()
            .enumerate()
            .map(|(k, c)| c * (3.0_f64.powi(k as i32 + 1) - (-1.0_f64).powi(k as i32 + 1)) / (k as f64 + 1.0))
            .sum();
        assert_relative_eq!(val, exact, epsilon = 1e-13, max_relative = 1e-13);
    }

    #[test]
    fn odd_node_count_and_panels() {
        let q = GaussLegendre::new(7);
        assert_abs_diff_eq!(q.nodes[3], 0.0);
        let val = q.integrate_panels(0.0, std::f64::consts::PI, 8, f64::sin);
        assert_relative_eq!(val, 2.0, epsilon = 1e-13);
    }
}
