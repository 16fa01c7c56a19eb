//! Adiabatic potential curves: the fixed-R hyperangular eigenproblem on the
//! symmetry-reduced octant, R scans, and the channel density `rho_a(R)`.
//!
//! Boundary conditions on `theta, phi in [0, pi/2]`: Dirichlet at
//! `phi = 0, pi/2` (fermionic exchange), Dirichlet at `theta = 0` (exchange
//! plus pole regularity), and at `theta = pi/2` Dirichlet for the odd
//! inversion parity or the natural (free) condition for even parity.

use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::galerkin::{
    assemble_hyperangular, solve_lowest, BSplineBasis, BoundaryCondition, Cutoff, EigenOptions,
    EigenSolution, GaussLegendre, OperatorForm,
};
use crate::model::{PairPotential, Parity, SystemParams};

#[derive(Debug, Error)]
pub enum AdiabaticError {
    #[error("R grid must be ascending and positive")]
    BadGrid,
    #[error("energy window [{lo:.3}, {hi:.3}] exceeds the computed ceiling {ceiling:.3}")]
    WindowAboveCeiling { lo: f64, hi: f64, ceiling: f64 },
    #[error("solve at R = {r} failed: {source}")]
    SolveFailed { r: f64, source: crate::galerkin::eigen::EigenError },
    #[error(transparent)]
    Basis(#[from] crate::galerkin::bspline::BasisError),
    #[error(transparent)]
    Assemble(#[from] crate::galerkin::assemble::AssembleError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("malformed spectrum file: {0}")]
    Format(String),
}

/// Energy window used for every statistics selection, centered by default
/// at `-E_b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyWindow {
    pub center: f64,
    pub half_width: f64,
}

impl EnergyWindow {
    pub fn new(center: f64, half_width: f64) -> Self {
        assert!(half_width > 0.0, "window half-width must be positive");
        Self { center, half_width }
    }

    pub fn bottom(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn top(&self) -> f64 {
        self.center + self.half_width
    }

    pub fn contains(&self, e: f64) -> bool {
        e >= self.bottom() && e <= self.top()
    }

    pub fn width(&self) -> f64 {
        2.0 * self.half_width
    }
}

/// Basis sizes and operator form of a hyperangular discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisMeta {
    pub n_theta: usize,
    pub n_phi: usize,
    pub order: usize,
    pub quad_nodes: usize,
    pub form: OperatorForm,
}

impl BasisMeta {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        Self { n_theta, n_phi, order: 5, quad_nodes: 10, form: OperatorForm::StandardLaplacian }
    }

    /// Default per-direction basis size: enough functions to resolve the
    /// fastest dimer oscillation mapped onto the hyperangles at `r_max`,
    /// clamped to the 100..=160 production range.
    pub fn auto_size(potential: &PairPotential, params: &SystemParams, r_max: f64) -> usize {
        Self::resolution_size(potential, params, r_max, 0.0).clamp(100, 160)
    }

    /// Size from the local-wavenumber rule without the production clamp:
    /// used for reduced-scale runs with a `window_top` well below the
    /// dissociation threshold.
    pub fn resolution_size(
        potential: &PairPotential,
        params: &SystemParams,
        r_max: f64,
        window_top: f64,
    ) -> usize {
        let mu = params.mu_hyper();
        // Highest single-dimer energy reachable inside the window when the
        // partner dimer sits in its ground state.
        let mu2 = params.mu12().max(params.mu34());
        let ground = crate::twobody::pair_ground_estimate(potential, mu2);
        let e_single = (window_top - ground).min(0.0);
        let k_rho = (2.0 * mu * (e_single + potential.depth).max(0.2 * potential.depth)).sqrt();
        let k_angle = r_max * k_rho;
        ((std::f64::consts::FRAC_PI_2 * k_angle).ceil() as usize).max(48)
    }
}

fn theta_boundary(parity: Parity) -> BoundaryCondition {
    match parity {
        Parity::Even => BoundaryCondition::DirichletLeftFreeRight,
        Parity::Odd => BoundaryCondition::DirichletBoth,
    }
}

/// The theta and phi bases of one parity sector.
pub fn sector_bases(meta: &BasisMeta, parity: Parity) -> Result<(BSplineBasis, BSplineBasis), AdiabaticError> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let bt = BSplineBasis::with_retained((0.0, half_pi), meta.n_theta, meta.order, theta_boundary(parity))?;
    let bp = BSplineBasis::with_retained((0.0, half_pi), meta.n_phi, meta.order, BoundaryCondition::DirichletBoth)?;
    Ok((bt, bp))
}

/// All hyperangular eigenvalues below `ceiling` at one hyperradius, with
/// overlap-orthonormal coefficient vectors.
pub fn solve_at_r(
    r: f64,
    potential: &PairPotential,
    params: &SystemParams,
    meta: &BasisMeta,
    ceiling: f64,
    eigen: &EigenOptions,
) -> Result<EigenSolution, AdiabaticError> {
    let (bt, bp) = sector_bases(meta, params.parity)?;
    let quad = GaussLegendre::new(meta.quad_nodes);
    let g = assemble_hyperangular(&bt, &bp, &quad, r, potential, params, meta.form)?;
    let h = g.hamiltonian();
    let opts = EigenOptions { lower_bound_hint: Some(g.v_min - 1e-9 * g.v_min.abs() - 1e-9), ..eigen.clone() };
    solve_lowest(&h, &g.overlap, Cutoff::Below(ceiling), &opts)
        .map_err(|source| AdiabaticError::SolveFailed { r, source })
}

/// Adiabatic curves over a hyperradius grid: per grid point, every
/// eigenvalue below the stated ceiling, ascending. Channel index is
/// ascending-eigenvalue order at each R.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticSpectrum {
    pub r_grid: Vec<f64>,
    pub curves: Vec<Vec<f64>>,
    pub parity: Parity,
    pub ceiling: f64,
    pub basis: BasisMeta,
    pub params: SystemParams,
    pub potential: PairPotential,
}

/// Ascending R grid `[min, min + step, ..., max]`.
pub fn r_grid(min: f64, max: f64, step: f64) -> Vec<f64> {
    assert!(max > min && step > 0.0);
    let n = ((max - min) / step).round() as usize + 1;
    (0..n).map(|i| min + i as f64 * step).collect()
}

/// Scan the grid, solving each hyperradius independently (parallel map).
///
/// The ceiling is `window.top()` plus `spacing_buffer` mean in-window
/// spacings, with the mean spacing measured at the largest grid point.
pub fn scan(
    grid: &[f64],
    potential: &PairPotential,
    params: &SystemParams,
    meta: &BasisMeta,
    window: &EnergyWindow,
    spacing_buffer: f64,
    eigen: &EigenOptions,
) -> Result<AdiabaticSpectrum, AdiabaticError> {
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] <= 0.0 {
        return Err(AdiabaticError::BadGrid);
    }
    // Probe the last grid point to fix the ceiling.
    let probe_ceiling = window.top() + 0.1 * window.width();
    let r_last = *grid.last().unwrap();
    let probe = solve_at_r(r_last, potential, params, meta, probe_ceiling, eigen)?;
    let n_window = probe.values.iter().filter(|&&v| window.contains(v)).count();
    let mean_spacing = if n_window >= 2 { window.width() / n_window as f64 } else { window.width() };
    let buffer = (spacing_buffer * mean_spacing).min(2.0 * window.width());
    let ceiling = window.top() + buffer;

    let mut curves: Vec<Vec<f64>> = vec![Vec::new(); grid.len()];
    if ceiling <= probe_ceiling {
        curves[grid.len() - 1] =
            probe.values.iter().copied().filter(|&v| v < ceiling).collect();
    } else {
        curves[grid.len() - 1] =
            solve_at_r(r_last, potential, params, meta, ceiling, eigen)?.values;
    }

    let rest: Result<Vec<(usize, Vec<f64>)>, AdiabaticError> = grid[..grid.len() - 1]
        .par_iter()
        .enumerate()
        .map(|(i, &r)| {
            solve_at_r(r, potential, params, meta, ceiling, eigen).map(|sol| (i, sol.values))
        })
        .collect();
    for (i, values) in rest? {
        curves[i] = values;
    }

    Ok(AdiabaticSpectrum {
        r_grid: grid.to_vec(),
        curves,
        parity: params.parity,
        ceiling,
        basis: *meta,
        params: *params,
        potential: *potential,
    })
}

impl AdiabaticSpectrum {
    /// Eigenvalues inside the window at grid index `i`.
    pub fn in_window(&self, i: usize, window: &EnergyWindow) -> Vec<f64> {
        self.curves[i].iter().copied().filter(|&v| window.contains(v)).collect()
    }

    /// `rho_a(R)`: in-window curve count per unit energy.
    pub fn channel_density(&self, window: &EnergyWindow) -> Result<Vec<(f64, f64)>, AdiabaticError> {
        if window.top() > self.ceiling {
            return Err(AdiabaticError::WindowAboveCeiling {
                lo: window.bottom(),
                hi: window.top(),
                ceiling: self.ceiling,
            });
        }
        Ok(self
            .r_grid
            .iter()
            .zip(&self.curves)
            .map(|(&r, values)| {
                let count = values.iter().filter(|&&v| window.contains(v)).count();
                (r, count as f64 / window.width())
            })
            .collect())
    }

    /// Values of channel `nu` (sorted order at each R) over the contiguous
    /// run of grid points where it exists, starting at its first
    /// appearance. Returns `(first_index, values)`.
    pub fn channel_values(&self, nu: usize) -> Option<(usize, Vec<f64>)> {
        let first = self.curves.iter().position(|c| c.len() > nu)?;
        let mut values = Vec::new();
        for c in &self.curves[first..] {
            if c.len() > nu {
                values.push(c[nu]);
            } else {
                break;
            }
        }
        Some((first, values))
    }

    pub fn max_channels(&self) -> usize {
        self.curves.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Write the `R,U_1,...` table; floats are shortest-round-trip so a
    /// load reproduces them bit-exactly.
    pub fn save_csv(&self, csv_path: &Path, sidecar_path: &Path) -> Result<(), AdiabaticError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(csv_path)?);
        let width = self.max_channels();
        write!(f, "R")?;
        for i in 1..=width {
            write!(f, ",U_{i}")?;
        }
        writeln!(f)?;
        for (r, values) in self.r_grid.iter().zip(&self.curves) {
            write!(f, "{r:e}")?;
            for v in values {
                write!(f, ",{v:e}")?;
            }
            for _ in values.len()..width {
                write!(f, ",")?;
            }
            writeln!(f)?;
        }
        f.flush()?;

        let sidecar = SpectrumSidecar {
            parity: self.parity,
            ceiling: self.ceiling,
            basis: self.basis,
            params: self.params,
            potential: self.potential,
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: None,
        };
        std::fs::write(sidecar_path, serde_json::to_string_pretty(&sidecar).expect("serialize"))?;
        Ok(())
    }

    pub fn load_csv(csv_path: &Path, sidecar_path: &Path) -> Result<Self, AdiabaticError> {
        let sidecar: SpectrumSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path)?)
            .map_err(|e| AdiabaticError::Format(e.to_string()))?;
        let f = std::io::BufReader::new(std::fs::File::open(csv_path)?);
        let mut lines = f.lines();
        let header = lines.next().ok_or_else(|| AdiabaticError::Format("empty file".into()))??;
        if !header.starts_with("R") {
            return Err(AdiabaticError::Format("missing header".into()));
        }
        let mut r_grid = Vec::new();
        let mut curves = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let r: f64 = fields
                .next()
                .ok_or_else(|| AdiabaticError::Format("missing R".into()))?
                .parse()
                .map_err(|e| AdiabaticError::Format(format!("bad R: {e}")))?;
            let mut row = Vec::new();
            for field in fields {
                if field.is_empty() {
                    continue;
                }
                row.push(field.parse::<f64>().map_err(|e| AdiabaticError::Format(format!("bad value: {e}")))?);
            }
            r_grid.push(r);
            curves.push(row);
        }
        Ok(Self {
            r_grid,
            curves,
            parity: sidecar.parity,
            ceiling: sidecar.ceiling,
            basis: sidecar.basis,
            params: sidecar.params,
            potential: sidecar.potential,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SpectrumSidecar {
    pub parity: Parity,
    pub ceiling: f64,
    pub basis: BasisMeta,
    pub params: SystemParams,
    pub potential: PairPotential,
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config_hash: Option<String>,
}

/// Free-hypersphere levels: with `V = 0` the admissible modes are spherical
/// harmonics `P_l^m(cos theta) sin(m phi)` with `m in {2, 4, ...}`,
/// `m <= l`, and `l + m` even (even parity) or odd (odd parity), giving
/// eigenvalues `l(l+1) / (2 mu R^2)`.
pub fn free_hyperangular_levels(parity: Parity, mu: f64, r: f64, count: usize) -> Vec<(u32, usize, f64)> {
    let mut out = Vec::new();
    let mut l: u32 = match parity {
        Parity::Even => 2,
        Parity::Odd => 3,
    };
    let mut total = 0;
    while total < count {
        let mult = match parity {
            Parity::Even => (l / 2) as usize,
            Parity::Odd => ((l - 1) / 2) as usize,
        };
        let value = (l * (l + 1)) as f64 / (2.0 * mu * r * r);
        out.push((l, mult, value));
        total += mult;
        l += 2;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn free_potential() -> PairPotential {
        // Negligible depth: the assembled V is ~1e-300, numerically zero.
        PairPotential::morse(1e-300, 1.0).unwrap()
    }

    fn eigen_opts() -> EigenOptions {
        EigenOptions { parallel_slices: true, ..Default::default() }
    }

    #[test]
    fn free_hypersphere_even_oracle() {
        let params = SystemParams::from_mass_ratio(1.0, Parity::Even).unwrap();
        let mu = params.mu_hyper();
        let r = 2.0;
        let meta = BasisMeta::new(26, 26);
        let expected = free_hyperangular_levels(Parity::Even, mu, r, 12);
        let ceiling = expected.last().unwrap().2 * 1.001;
        let sol = solve_at_r(r, &free_potential(), &params, &meta, ceiling, &eigen_opts()).unwrap();
        // lowest value is 6 / (2 mu R^2), i.e. l = 2
        assert_relative_eq!(sol.values[0], 6.0 / (2.0 * mu * r * r), epsilon = 1e-7, max_relative = 1e-7);
        let mut idx = 0;
        for (l, mult, value) in expected {
            for _ in 0..mult {
                if idx >= sol.values.len() {
                    return;
                }
                assert_relative_eq!(sol.values[idx], value, max_relative = 1e-6);
                idx += 1;
            }
            let _ = l;
        }
    }

    #[test]
    fn free_hypersphere_odd_oracle() {
        let params = SystemParams::from_mass_ratio(1.0, Parity::Odd).unwrap();
        let mu = params.mu_hyper();
        let r = 1.5;
        let meta = BasisMeta::new(24, 24);
        let expected = free_hyperangular_levels(Parity::Odd, mu, r, 8);
        let ceiling = expected.last().unwrap().2 * 1.001;
        let sol = solve_at_r(r, &free_potential(), &params, &meta, ceiling, &eigen_opts()).unwrap();
        assert_relative_eq!(sol.values[0], 12.0 / (2.0 * mu * r * r), max_relative = 1e-6);
        let mut idx = 0;
        for (_, mult, value) in expected {
            for _ in 0..mult {
                if idx >= sol.values.len() {
                    return;
                }
                assert_relative_eq!(sol.values[idx], value, max_relative = 1e-6);
                idx += 1;
            }
        }
    }

    #[test]
    fn even_sector_reaches_the_theta_edge() {
        // Parity sectors are disjoint: an even eigenvector must not satisfy
        // the odd Dirichlet condition at theta = pi/2.
        let params = SystemParams::from_mass_ratio(1.0, Parity::Even).unwrap();
        let meta = BasisMeta::new(16, 16);
        let potential = PairPotential::morse(10.0, 1.0).unwrap();
        let sol = solve_at_r(2.0, &potential, &params, &meta, 50.0, &eigen_opts()).unwrap();
        let (bt, bp) = sector_bases(&meta, Parity::Even).unwrap();
        let half_pi = std::f64::consts::FRAC_PI_2;
        let mut max_edge: f64 = 0.0;
        for vec in sol.vectors.iter().take(4) {
            let mut phi_val = 0.0;
            for m in 0..bt.size() {
                let vt = bt.eval_retained(m, half_pi, 0);
                if vt == 0.0 {
                    continue;
                }
                for n in 0..bp.size() {
                    phi_val += vec[m * bp.size() + n] * vt * bp.eval_retained(n, 0.7, 0);
                }
            }
            max_edge = max_edge.max(phi_val.abs());
        }
        assert!(max_edge > 1e-3, "even eigenvectors vanish at theta = pi/2");
    }

    #[test]
    fn scaling_covariance_in_the_free_case() {
        // (R, mu) and (alpha R, mu / alpha^2) give identical free spectra;
        // uniform mass scaling by 1/alpha^2 scales mu_hyper by the same
        // factor, so the two discretized kinetic operators coincide.
        let p1 = SystemParams::from_mass_ratio(1.0, Parity::Even).unwrap();
        let mu = p1.mu_hyper();
        let alpha = 1.7;
        let p2 = SystemParams::new(1.0 / (alpha * alpha), 1.0 / (alpha * alpha), Parity::Even).unwrap();
        assert_relative_eq!(p2.mu_hyper(), mu / (alpha * alpha), epsilon = 1e-15);
        let meta = BasisMeta::new(18, 18);
        let ceiling = 40.0 / (2.0 * mu * 4.0);
        let a = solve_at_r(2.0, &free_potential(), &p1, &meta, ceiling, &eigen_opts()).unwrap();
        let b = solve_at_r(2.0 * alpha, &free_potential(), &p2, &meta, ceiling, &eigen_opts()).unwrap();
        assert_eq!(a.values.len(), b.values.len());
        for (x, y) in a.values.iter().zip(&b.values) {
            assert_relative_eq!(x, y, max_relative = 1e-10);
        }
    }

    #[test]
    fn grid_arithmetic() {
        let g = r_grid(1.6, 10.0, 0.2);
        assert_eq!(g.len(), 43);
        assert_abs_diff_eq!(g[0], 1.6);
        assert_abs_diff_eq!(*g.last().unwrap(), 10.0, epsilon = 1e-12);
        assert!(g.iter().any(|&r| (r - 3.8).abs() < 1e-12));
    }

    #[test]
    fn synthetic_channel_density_and_windows() {
        let spec = AdiabaticSpectrum {
            r_grid: vec![1.0, 2.0],
            curves: vec![vec![-5.0, -3.0, -1.0, 2.0], vec![-4.0, -3.5, -3.0, -2.5, 0.0]],
            parity: Parity::Even,
            ceiling: 5.0,
            basis: BasisMeta::new(8, 8),
            params: SystemParams::from_mass_ratio(1.0, Parity::Even).unwrap(),
            potential: PairPotential::morse(1.0, 1.0).unwrap(),
        };
        let w = EnergyWindow::new(-3.0, 1.0);
        let rho = spec.channel_density(&w).unwrap();
        // window [-4, -2]: 1 value at R=1 (-3), 4 at R=2 (-4, -3.5, -3, -2.5)
        assert_abs_diff_eq!(rho[0].1, 1.0 / 2.0);
        assert_abs_diff_eq!(rho[1].1, 4.0 / 2.0);
        let too_high = EnergyWindow::new(4.0, 2.0);
        assert!(spec.channel_density(&too_high).is_err());
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let spec = AdiabaticSpectrum {
            r_grid: vec![1.6, 1.8, 2.0],
            curves: vec![
                vec![-181.234567890123456, -150.0 / 7.0],
                vec![-179.99999999999997, -149.3e-13, 1.0 / 3.0],
                vec![-178.0],
            ],
            parity: Parity::Odd,
            ceiling: 1.25,
            basis: BasisMeta::new(10, 12),
            params: SystemParams::from_mass_ratio(1.3, Parity::Odd).unwrap(),
            potential: PairPotential::morse(100.0, 1.0).unwrap(),
        };
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("spec.csv");
        let sidecar = dir.path().join("spec.json");
        spec.save_csv(&csv, &sidecar).unwrap();
        let loaded = AdiabaticSpectrum::load_csv(&csv, &sidecar).unwrap();
        assert_eq!(spec, loaded);
        // header sanity
        let text = std::fs::read_to_string(&csv).unwrap();
        assert!(text.starts_with("R,U_1,U_2,U_3\n"));
    }

    #[test]
    fn small_scan_has_ordered_complete_rows() {
        let params = SystemParams::from_mass_ratio(1.0, Parity::Even).unwrap();
        let potential = PairPotential::morse(8.0, 1.0).unwrap();
        let meta = BasisMeta::new(14, 14);
        let window = EnergyWindow::new(-6.0, 4.0);
        let grid = r_grid(2.0, 3.0, 0.5);
        let spec = scan(&grid, &potential, &params, &meta, &window, 5.0, &eigen_opts()).unwrap();
        assert_eq!(spec.curves.len(), 3);
        assert!(spec.ceiling > window.top());
        for row in &spec.curves {
            assert!(row.windows(2).all(|w| w[0] <= w[1]));
            assert!(row.iter().all(|&v| v < spec.ceiling));
        }
        let (first, ch0) = spec.channel_values(0).unwrap();
        assert_eq!(first, 0);
        assert_eq!(ch0.len(), 3);
    }
}
