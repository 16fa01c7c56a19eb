//! Spectral-fluctuation analysis: scaled nearest-neighbor spacings, Gaussian
//! kernel density estimates, Poisson / Wigner-Dyson / Brody reference
//! distributions, maximum-likelihood Brody fits, and the Gaussian moving
//! average used for `q(R)` profiles.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::adiabatic::{AdiabaticSpectrum, EnergyWindow};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least 3 levels for spacing statistics, got {0}")]
    TooFewLevels(usize),
    #[error("levels are degenerate: mean spacing is zero")]
    ZeroMeanSpacing,
    #[error("degenerate sample: all spacings equal, Brody q undefined")]
    DegenerateSample,
    #[error("series of length {len} is shorter than the {points}-point smoothing window")]
    SeriesTooShort { len: usize, points: usize },
    #[error("Brody parameter q = {0} outside [0, 1]")]
    BadBrodyParameter(f64),
}

/// Nearest-neighbor spacings scaled to unit mean.
#[derive(Debug, Clone)]
pub struct SpacingSample {
    /// Ascending levels after deduplication of exact numerical duplicates.
    pub levels: Vec<f64>,
    /// Consecutive differences divided by their mean; mean is exactly 1 up
    /// to rounding.
    pub scaled: Vec<f64>,
    /// Fraction of spacings below `1e-10` of the mean (near-degeneracies;
    /// they are kept in the sample).
    pub near_zero_fraction: f64,
}

impl SpacingSample {
    pub fn from_levels(levels: &[f64]) -> Result<Self, StatsError> {
        if levels.len() < 3 {
            return Err(StatsError::TooFewLevels(levels.len()));
        }
        let mut sorted = levels.to_vec();
        sorted.sort_by(f64::total_cmp);
        // Drop only exact numerical duplicates; physical near-degeneracies
        // stay in the sample.
        let scale = sorted.last().unwrap().abs().max(sorted[0].abs()).max(1e-300);
        sorted.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * scale);
        if sorted.len() < 3 {
            return Err(StatsError::TooFewLevels(sorted.len()));
        }
        let mut spacings: Vec<f64> = sorted.windows(2).map(|w| w[1] - w[0]).collect();
        let mean = spacings.iter().sum::<f64>() / spacings.len() as f64;
        if !(mean > 0.0) {
            return Err(StatsError::ZeroMeanSpacing);
        }
        for s in &mut spacings {
            *s /= mean;
        }
        let near_zero =
            spacings.iter().filter(|&&s| s < 1e-10).count() as f64 / spacings.len() as f64;
        Ok(Self { levels: sorted, scaled: spacings, near_zero_fraction: near_zero })
    }

    pub fn len(&self) -> usize {
        self.scaled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scaled.is_empty()
    }
}

/// Gaussian kernel density estimate with fixed bandwidth:
/// `p(s) = 1/(sqrt(2 pi) n h) sum_i exp(-[(s - s_i)/h]^2 / 2)`.
#[derive(Debug, Clone)]
pub struct Kde {
    pub centers: Vec<f64>,
    pub bandwidth: f64,
}

impl Kde {
    pub fn new(sample: &SpacingSample, bandwidth: f64) -> Self {
        assert!(bandwidth > 0.0, "KDE bandwidth must be positive");
        Self { centers: sample.scaled.clone(), bandwidth }
    }

    pub fn evaluate(&self, s: f64) -> f64 {
        let n = self.centers.len() as f64;
        let h = self.bandwidth;
        let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * n * h);
        let sum: f64 = self
            .centers
            .iter()
            .map(|&c| {
                let z = (s - c) / h;
                (-0.5 * z * z).exp()
            })
            .sum();
        norm * sum
    }

    /// Evaluate on the fixed plotting grid `[0, 4]` with step 0.02.
    pub fn on_plot_grid(&self) -> Vec<(f64, f64)> {
        (0..=200)
            .map(|i| {
                let s = i as f64 * 0.02;
                (s, self.evaluate(s))
            })
            .collect()
    }
}

/// Reference spacing distributions, all with unit mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferencePdf {
    Poisson,
    WignerDyson,
    Brody(f64),
}

/// Brody normalization constant `b = Gamma((2+q)/(1+q))^(q+1)`, which makes
/// the density normalized with unit mean.
pub fn brody_b(q: f64) -> f64 {
    ((1.0 + q) * ln_gamma((2.0 + q) / (1.0 + q))).exp()
}

/// Pointwise density of the reference distribution at `s >= 0`.
pub fn reference_pdf(kind: ReferencePdf, s: f64) -> f64 {
    assert!(s >= 0.0, "spacing densities are defined for s >= 0");
    match kind {
        ReferencePdf::Poisson => (-s).exp(),
        ReferencePdf::WignerDyson => {
            let c = std::f64::consts::FRAC_PI_2;
            c * s * (-c * s * s / 2.0).exp()
        }
        ReferencePdf::Brody(q) => {
            assert!((0.0..=1.0).contains(&q), "Brody q must lie in [0, 1]");
            let b = brody_b(q);
            b * (1.0 + q) * s.powf(q) * (-b * s.powf(1.0 + q)).exp()
        }
    }
}

/// Brody cumulative distribution `1 - exp(-b s^(q+1))`.
pub fn brody_cdf(q: f64, s: f64) -> f64 {
    1.0 - (-brody_b(q) * s.powf(1.0 + q)).exp()
}

/// Maximum-likelihood Brody fit with the Kolmogorov-Smirnov distance of the
/// fitted law reported as the goodness-of-fit statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BrodyFit {
    pub q: f64,
    pub b: f64,
    /// KS distance between the empirical CDF and the fitted Brody CDF.
    pub ks: f64,
    pub sample_size: usize,
    /// Set when the sample has fewer than 20 spacings.
    pub low_confidence: bool,
    pub near_zero_fraction: f64,
}

fn brody_log_likelihood(q: f64, sample: &SpacingSample) -> f64 {
    let b = brody_b(q);
    let n = sample.len() as f64;
    let mut sum_log = 0.0;
    let mut sum_pow = 0.0;
    for &s in &sample.scaled {
        let s = s.max(1e-12);
        sum_log += s.ln();
        sum_pow += s.powf(1.0 + q);
    }
    n * (b * (1.0 + q)).ln() + q * sum_log - b * sum_pow
}

fn ks_distance(q: f64, sample: &SpacingSample) -> f64 {
    let mut s = sample.scaled.clone();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = brody_cdf(q, x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max((f - (i as f64 + 1.0) / n).abs());
    }
    d
}

/// Fit the Brody parameter on `[0, 1]`: coarse grid at 0.01 then
/// golden-section refinement of the log likelihood.
pub fn fit_brody(sample: &SpacingSample) -> Result<BrodyFit, StatsError> {
    if sample.is_empty() {
        return Err(StatsError::TooFewLevels(0));
    }
    let first = sample.scaled[0];
    if sample.scaled.iter().all(|&s| (s - first).abs() < 1e-12) {
        return Err(StatsError::DegenerateSample);
    }

    let mut best_q = 0.0;
    let mut best_ll = f64::NEG_INFINITY;
    for i in 0..=100 {
        let q = i as f64 * 0.01;
        let ll = brody_log_likelihood(q, sample);
        if ll > best_ll {
            best_ll = ll;
            best_q = q;
        }
    }
    // Golden-section refinement around the best grid point.
    let mut lo = (best_q - 0.01).max(0.0);
    let mut hi = (best_q + 0.01).min(1.0);
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = brody_log_likelihood(x1, sample);
    let mut f2 = brody_log_likelihood(x2, sample);
    for _ in 0..60 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = brody_log_likelihood(x2, sample);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = brody_log_likelihood(x1, sample);
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    let q = 0.5 * (lo + hi);
    Ok(BrodyFit {
        q,
        b: brody_b(q),
        ks: ks_distance(q, sample),
        sample_size: sample.len(),
        low_confidence: sample.len() < 20,
        near_zero_fraction: sample.near_zero_fraction,
    })
}

/// Gaussian moving average over forward windows: the smoothed point `i` is
/// `sum_{n=i}^{i+points-1} f_n (R_n, q_n)` with `f_n` a normalized Gaussian
/// of the given width (in index units) centered on the window.
pub fn gaussian_smooth(
    series: &[(f64, f64)],
    points: usize,
    width: f64,
) -> Result<Vec<(f64, f64)>, StatsError> {
    if series.len() < points {
        return Err(StatsError::SeriesTooShort { len: series.len(), points });
    }
    let center = (points as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..points)
        .map(|j| {
            let z = (j as f64 - center) / width;
            (-0.5 * z * z).exp()
        })
        .collect();
    let norm: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / norm).collect();
    Ok((0..=series.len() - points)
        .map(|i| {
            let mut r = 0.0;
            let mut q = 0.0;
            for (j, &w) in weights.iter().enumerate() {
                r += w * series[i + j].0;
                q += w * series[i + j].1;
            }
            (r, q)
        })
        .collect())
}

/// Per-R Brody fit of the in-window levels of a spectrum.
#[derive(Debug, Clone, Serialize)]
pub struct BrodyPoint {
    pub r: f64,
    pub q: f64,
    pub ks: f64,
    pub sample_size: usize,
    pub low_confidence: bool,
    pub near_zero_fraction: f64,
}

/// `q(R)`: raw per-R fits plus the Gaussian-smoothed profile.
#[derive(Debug, Clone, Serialize)]
pub struct BrodyProfile {
    pub raw: Vec<BrodyPoint>,
    pub smoothed: Vec<(f64, f64)>,
}

/// Fit the Brody parameter at every grid point of a spectrum (in-window
/// levels only; parallel map), then smooth.
pub fn brody_vs_r(
    spectra: &[&AdiabaticSpectrum],
    window: &EnergyWindow,
    smooth_points: usize,
    smooth_width: f64,
) -> Result<BrodyProfile, StatsError> {
    use rayon::prelude::*;
    assert!(!spectra.is_empty());
    let grid = &spectra[0].r_grid;
    for s in spectra {
        assert_eq!(s.r_grid, *grid, "spectra must share the R grid");
    }
    let raw: Vec<BrodyPoint> = (0..grid.len())
        .into_par_iter()
        .filter_map(|i| {
            let mut levels = Vec::new();
            for s in spectra {
                levels.extend(s.in_window(i, window));
            }
            let sample = SpacingSample::from_levels(&levels).ok()?;
            let fit = fit_brody(&sample).ok()?;
            Some(BrodyPoint {
                r: grid[i],
                q: fit.q,
                ks: fit.ks,
                sample_size: fit.sample_size,
                low_confidence: fit.low_confidence,
                near_zero_fraction: fit.near_zero_fraction,
            })
        })
        .collect();
    let series: Vec<(f64, f64)> = raw.iter().map(|p| (p.r, p.q)).collect();
    let smoothed = gaussian_smooth(&series, smooth_points, smooth_width)?;
    Ok(BrodyProfile { raw, smoothed })
}

/// L1 distance between a KDE and a reference density on `[0, 4]`
/// (trapezoidal rule on the plotting grid).
pub fn l1_distance_to(kde: &Kde, kind: ReferencePdf) -> f64 {
    let grid = kde.on_plot_grid();
    let mut acc = 0.0;
    for pair in grid.windows(2) {
        let (s0, p0) = pair[0];
        let (s1, p1) = pair[1];
        let d0 = (p0 - reference_pdf(kind, s0)).abs();
        let d1 = (p1 - reference_pdf(kind, s1)).abs();
        acc += 0.5 * (d0 + d1) * (s1 - s0);
    }
    acc
}
