//! Two-atom model potentials, mass bookkeeping, and the coordinate
//! transformations between lab, Jacobi, and hyperspherical frames.
//!
//! Units: `hbar = 1`, masses in units of the light atom, lengths in units of
//! the potential width unless stated otherwise. All functions here are pure
//! and cheap; they sit in the innermost quadrature loops of the Galerkin
//! assembly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("potential parameter {name} must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("mass must be positive, got {0}")]
    NonPositiveMass(f64),
    #[error("hyperspherical angles are undefined at the origin (all Jacobi coordinates zero)")]
    OriginUndefined,
}

/// Shape of the two-atom interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Morse,
    PoschlTeller,
}

/// Parametrized two-atom interaction: depth `D > 0`, width `r0 > 0`, and
/// inverse range fixed to `a = 1/r0` so that `U(0)/D` is independent of `r0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairPotential {
    pub kind: PotentialKind,
    pub depth: f64,
    pub width: f64,
}

impl PairPotential {
    pub fn new(kind: PotentialKind, depth: f64, width: f64) -> Result<Self, ModelError> {
        if !(depth > 0.0) {
            return Err(ModelError::NonPositiveParameter { name: "depth", value: depth });
        }
        if !(width > 0.0) {
            return Err(ModelError::NonPositiveParameter { name: "width", value: width });
        }
        Ok(Self { kind, depth, width })
    }

    pub fn morse(depth: f64, width: f64) -> Result<Self, ModelError> {
        Self::new(PotentialKind::Morse, depth, width)
    }

    pub fn poschl_teller(depth: f64, width: f64) -> Result<Self, ModelError> {
        Self::new(PotentialKind::PoschlTeller, depth, width)
    }

    /// Inverse range `a`, fixed to `1/width` exactly.
    #[inline]
    pub fn inverse_range(&self) -> f64 {
        1.0 / self.width
    }

    /// Pointwise potential value at interatomic distance `r >= 0`.
    ///
    /// The Morse minimum is `-depth` at `r = width`; the Poschl-Teller
    /// minimum is `-depth` at `r = 0`. Both vanish as `r -> inf`.
    #[inline]
    pub fn evaluate(&self, r: f64) -> f64 {
        assert!(r >= 0.0, "pair potential evaluated at negative separation {r}");
        match self.kind {
            PotentialKind::Morse => {
                // D [(1 - e)^2 - 1] = D e (e - 2), in product form so the
                // exponential tail keeps full relative precision.
                let e = ((r - self.width) * -self.inverse_range()).exp();
                self.depth * e * (e - 2.0)
            }
            PotentialKind::PoschlTeller => {
                let c = (r / self.width).cosh();
                -self.depth / (c * c)
            }
        }
    }
}

/// Inversion parity sector of the hyperangular problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

/// Convention fixing the hyperradial reference mass `mu`.
///
/// `mu` is a free normalization of the mass-scaled Jacobi coordinates; any
/// positive deterministic function of the masses gives the same physics,
/// but it sets the scale of the R axis (R maps as `sqrt(mu)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MuConvention {
    /// `mu = m1`: hyperradii measured in light-mass units. Matches the
    /// published channel counts and R-axis features, hence the default.
    #[default]
    LightMass,
    /// `mu = (m1 m2 m3 m4 / M)^(1/3)`, the standard N-body choice.
    GeometricMean,
}

/// Masses of the four atoms (1,2) and (3,4) plus every derived reduced mass.
///
/// Atoms 1 and 2 are one species, 3 and 4 the other, so `m1 = m2` and
/// `m3 = m4` always.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
    pub parity: Parity,
    #[serde(default)]
    pub mu_convention: MuConvention,
}

impl SystemParams {
    /// Two-species system with `m1 = m2` and `m3 = m4 = mass_ratio * m1`.
    pub fn new(m1: f64, m3: f64, parity: Parity) -> Result<Self, ModelError> {
        if !(m1 > 0.0) {
            return Err(ModelError::NonPositiveMass(m1));
        }
        if !(m3 > 0.0) {
            return Err(ModelError::NonPositiveMass(m3));
        }
        Ok(Self { m1, m2: m1, m3, m4: m3, parity, mu_convention: MuConvention::default() })
    }

    /// `m1 = 1` and `m3 = ratio`, the parametrization used throughout.
    pub fn from_mass_ratio(ratio: f64, parity: Parity) -> Result<Self, ModelError> {
        Self::new(1.0, ratio, parity)
    }

    pub fn with_mu_convention(mut self, convention: MuConvention) -> Self {
        self.mu_convention = convention;
        self
    }

    #[inline]
    pub fn total_mass(&self) -> f64 {
        self.m1 + self.m2 + self.m3 + self.m4
    }

    #[inline]
    pub fn mu12(&self) -> f64 {
        self.m1 * self.m2 / (self.m1 + self.m2)
    }

    #[inline]
    pub fn mu34(&self) -> f64 {
        self.m3 * self.m4 / (self.m3 + self.m4)
    }

    /// Reduced mass of the two pair centers of mass.
    #[inline]
    pub fn mu1234(&self) -> f64 {
        (self.m1 + self.m2) * (self.m3 + self.m4) / self.total_mass()
    }

    /// Reduced mass of the cross pairs (1,3), (2,4) used for the second
    /// dimer-dimer threshold configuration.
    #[inline]
    pub fn mu13(&self) -> f64 {
        self.m1 * self.m3 / (self.m1 + self.m3)
    }

    /// Hyperradial reference mass per the configured convention.
    #[inline]
    pub fn mu_hyper(&self) -> f64 {
        match self.mu_convention {
            MuConvention::LightMass => self.m1,
            MuConvention::GeometricMean => {
                (self.m1 * self.m2 * self.m3 * self.m4 / self.total_mass()).cbrt()
            }
        }
    }
}

/// Mass-scaled Jacobi coordinates: `rho1` within pair (1,2), `rho2` within
/// pair (3,4), `rho3` between the pair centers of mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobi {
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
}

/// Point on the hypersphere; `radius > 0`, angles in the symmetry-reduced
/// octant `theta, phi in [0, pi/2]` for physical configurations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperPoint {
    pub radius: f64,
    pub theta: f64,
    pub phi: f64,
}

/// Signed pair separations `r_ij = r_i - r_j` for all six pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSeparations {
    pub r12: f64,
    pub r34: f64,
    pub r13: f64,
    pub r24: f64,
    pub r14: f64,
    pub r23: f64,
}

impl PairSeparations {
    #[inline]
    pub fn as_array(&self) -> [f64; 6] {
        [self.r12, self.r34, self.r13, self.r24, self.r14, self.r23]
    }
}

/// Mass-scaled Jacobi coordinates from lab positions.
pub fn jacobi_from_lab(positions: [f64; 4], params: &SystemParams) -> Jacobi {
    let [r1, r2, r3, r4] = positions;
    let mu = params.mu_hyper();
    let cm12 = (params.m1 * r1 + params.m2 * r2) / (params.m1 + params.m2);
    let cm34 = (params.m3 * r3 + params.m4 * r4) / (params.m3 + params.m4);
    Jacobi {
        rho1: (params.mu12() / mu).sqrt() * (r1 - r2),
        rho2: (params.mu34() / mu).sqrt() * (r3 - r4),
        rho3: (params.mu1234() / mu).sqrt() * (cm12 - cm34),
    }
}

/// Forward map to hyperspherical coordinates. Angles are returned on the
/// full ranges `theta in [0, pi]`, `phi in [-pi, pi)` before any symmetry
/// reduction. The origin has no defined angles and is rejected.
pub fn hyper_from_jacobi(j: &Jacobi) -> Result<HyperPoint, ModelError> {
    let radius = (j.rho1 * j.rho1 + j.rho2 * j.rho2 + j.rho3 * j.rho3).sqrt();
    if radius == 0.0 {
        return Err(ModelError::OriginUndefined);
    }
    let theta = (j.rho3 / radius).clamp(-1.0, 1.0).acos();
    let mut phi = j.rho2.atan2(j.rho1);
    if phi == std::f64::consts::PI {
        phi = -phi;
    }
    Ok(HyperPoint { radius, theta, phi })
}

/// Inverse of [`hyper_from_jacobi`].
pub fn jacobi_from_hyper(pt: &HyperPoint) -> Jacobi {
    let (st, ct) = pt.theta.sin_cos();
    let (sp, cp) = pt.phi.sin_cos();
    Jacobi {
        rho1: pt.radius * cp * st,
        rho2: pt.radius * sp * st,
        rho3: pt.radius * ct,
    }
}

/// Signed separations of all six pairs at a hyperspherical point.
///
/// `r12` and `r34` are the intramolecular separations; the cross pairs
/// combine the center-of-mass offset with the intramolecular ones.
pub fn pair_separations(pt: &HyperPoint, params: &SystemParams) -> PairSeparations {
    let j = jacobi_from_hyper(pt);
    let mu = params.mu_hyper();
    let r12 = (mu / params.mu12()).sqrt() * j.rho1;
    let r34 = (mu / params.mu34()).sqrt() * j.rho2;
    let c = (mu / params.mu1234()).sqrt() * j.rho3;
    let f1 = params.m2 / (params.m1 + params.m2);
    let f2 = params.m1 / (params.m1 + params.m2);
    let f3 = params.m4 / (params.m3 + params.m4);
    let f4 = params.m3 / (params.m3 + params.m4);
    PairSeparations {
        r12,
        r34,
        r13: c + f1 * r12 - f3 * r34,
        r24: c - f2 * r12 + f4 * r34,
        r14: c + f1 * r12 + f4 * r34,
        r23: c - f2 * r12 - f3 * r34,
    }
}

/// Total potential energy `V(R, theta, phi)`: sum of the pair interaction
/// over all six pairs, evaluated at `|r_ij|`.
pub fn total_potential(pt: &HyperPoint, potential: &PairPotential, params: &SystemParams) -> f64 {
    let seps = pair_separations(pt, params);
    seps.as_array().iter().map(|&r| potential.evaluate(r.abs())).sum()
}
