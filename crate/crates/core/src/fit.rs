//! Power-law fits `τ = A L^z` in log-log space, growth classification and
//! physical time-scale conversion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::ensemble::{mean_and_stderr, EnsembleSummary};
use crate::rng::{RngStream, StreamId};

/// Default time represented by one MCS, in seconds.
pub const DEFAULT_SECONDS_PER_MCS: f64 = 1e-12;

/// Default total slope rise separating polynomial from super-polynomial growth.
pub const DEFAULT_GROWTH_MARGIN: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub size: usize,
    pub mean_tau: f64,
    pub stderr_tau: f64,
    pub n: usize,
}

/// Which ensemble statistic a scaling point is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Mean,
    /// Median without an error estimate; fits on medians are unweighted.
    Median,
}

impl ScalingPoint {
    pub fn new(size: usize, mean_tau: f64, stderr_tau: f64, n: usize) -> Self {
        ScalingPoint {
            size,
            mean_tau,
            stderr_tau,
            n,
        }
    }

    pub fn from_summary(summary: &EnsembleSummary, statistic: Statistic) -> Result<Self> {
        if !summary.is_reliable() {
            return Err(Error::InvalidPoint(format!(
                "L = {} has {} censored records",
                summary.params.size, summary.n_censored
            )));
        }
        let n = summary.n_realizations;
        let size = summary.params.size;
        Ok(match statistic {
            Statistic::Mean => ScalingPoint::new(
                size,
                summary.mean_tau.unwrap_or(0.0),
                summary.stderr_tau.unwrap_or(0.0),
                n,
            ),
            Statistic::Median => ScalingPoint::new(size, summary.median_tau.unwrap_or(0.0), 0.0, n),
        })
    }

    /// Builds a point from raw memory times.
    pub fn from_taus(size: usize, taus: &[f64]) -> Result<Self> {
        let (mean, stderr) = mean_and_stderr(taus)
            .ok_or_else(|| Error::InvalidPoint(format!("no memory times for L = {size}")))?;
        Ok(ScalingPoint::new(size, mean, stderr, taus.len()))
    }

    fn check(&self) -> Result<()> {
        if self.size == 0 || !self.mean_tau.is_finite() || self.mean_tau <= 0.0 {
            return Err(Error::InvalidPoint(format!(
                "L = {} needs positive size and mean, got mean {}",
                self.size, self.mean_tau
            )));
        }
        if self.stderr_tau.is_nan() || self.stderr_tau < 0.0 {
            return Err(Error::InvalidPoint(format!(
                "L = {} has negative stderr {}",
                self.size, self.stderr_tau
            )));
        }
        Ok(())
    }

    fn log_error(&self) -> f64 {
        self.stderr_tau / self.mean_tau
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    /// Weights `1/(stderr/mean)²` on `ln τ`.
    Weighted,
    /// Used when any point has zero stderr.
    Unweighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub z: f64,
    pub z_err: f64,
    pub log_amplitude: f64,
    pub r_squared: f64,
    /// `Δ ln τ / Δ ln L` between neighbours in increasing `L`.
    pub local_slopes: Vec<f64>,
    pub method: FitMethod,
    /// Weighted χ² per degree of freedom (`NaN` for unweighted fits).
    pub chi2_per_dof: f64,
    pub weights: Vec<f64>,
}

impl FitResult {
    pub fn amplitude(&self) -> f64 {
        self.log_amplitude.exp()
    }
}

fn sorted_points(points: &[ScalingPoint], needed: usize) -> Result<Vec<ScalingPoint>> {
    if points.len() < needed {
        return Err(Error::TooFewPoints {
            needed,
            got: points.len(),
        });
    }
    for p in points {
        p.check()?;
    }
    let mut sorted = points.to_vec();
    sorted.sort_by_key(|p| p.size);
    if sorted.windows(2).any(|w| w[0].size == w[1].size) {
        return Err(Error::InvalidPoint("duplicate lattice size".into()));
    }
    Ok(sorted)
}

fn local_slopes(sorted: &[ScalingPoint]) -> Vec<f64> {
    sorted
        .windows(2)
        .map(|w| {
            (w[1].mean_tau.ln() - w[0].mean_tau.ln())
                / ((w[1].size as f64).ln() - (w[0].size as f64).ln())
        })
        .collect()
}

/// Delta-method standard errors of the local slopes.
fn local_slope_errors(sorted: &[ScalingPoint]) -> Vec<f64> {
    sorted
        .windows(2)
        .map(|w| {
            w[0].log_error().hypot(w[1].log_error())
                / ((w[1].size as f64).ln() - (w[0].size as f64).ln())
        })
        .collect()
}

/// Least-squares fit of `ln τ = ln A + z ln L`.
pub fn fit_power_law(points: &[ScalingPoint]) -> Result<FitResult> {
    let sorted = sorted_points(points, 3)?;
    let xs: Vec<f64> = sorted.iter().map(|p| (p.size as f64).ln()).collect();
    let ys: Vec<f64> = sorted.iter().map(|p| p.mean_tau.ln()).collect();
    let weighted = sorted.iter().all(|p| p.stderr_tau > 0.0);
    let ws: Vec<f64> = if weighted {
        sorted.iter().map(|p| p.log_error().powi(-2)).collect()
    } else {
        vec![1.0; sorted.len()]
    };
    let sw: f64 = ws.iter().sum();
    let mx = ws.iter().zip(&xs).map(|(w, x)| w * x).sum::<f64>() / sw;
    let my = ws.iter().zip(&ys).map(|(w, y)| w * y).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for ((w, x), y) in ws.iter().zip(&xs).zip(&ys) {
        sxx += w * (x - mx) * (x - mx);
        sxy += w * (x - mx) * (y - my);
        syy += w * (y - my) * (y - my);
    }
    let z = sxy / sxx;
    let log_amplitude = my - z * mx;
    let rss: f64 = ws
        .iter()
        .zip(&xs)
        .zip(&ys)
        .map(|((w, x), y)| w * (y - log_amplitude - z * x).powi(2))
        .sum();
    let dof = (sorted.len() - 2) as f64;
    let (z_err, chi2_per_dof) = if weighted {
        ((1.0 / sxx).sqrt(), rss / dof)
    } else {
        ((rss / dof / sxx).sqrt(), f64::NAN)
    };
    let r_squared = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    Ok(FitResult {
        z,
        z_err,
        log_amplitude,
        r_squared,
        local_slopes: local_slopes(&sorted),
        method: if weighted {
            FitMethod::Weighted
        } else {
            FitMethod::Unweighted
        },
        chi2_per_dof,
        weights: ws,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GrowthClass {
    PolynomialConsistent,
    SuperPolynomial,
    Undetermined,
}

impl GrowthClass {
    pub fn as_str(self) -> &'static str {
        match self {
            GrowthClass::PolynomialConsistent => "POLYNOMIAL-CONSISTENT",
            GrowthClass::SuperPolynomial => "SUPER-POLYNOMIAL",
            GrowthClass::Undetermined => "UNDETERMINED",
        }
    }
}

/// Classifies how memory time grows with `L` from its local log-log slopes.
///
/// Each local slope `s_i` carries a delta-method error `σ_i` (zero for
/// error-free points); the noise allowance is `2σ`.
///
/// * SUPER-POLYNOMIAL: no slope step falls by more than its noise allowance,
///   and the last slope exceeds the first by more than `margin` plus the
///   noise allowance of that difference.
/// * POLYNOMIAL-CONSISTENT: some single exponent lies within
///   `margin/2 + 2σ_i` of every slope, i.e. the slopes are flat within
///   `margin` up to noise. Without errors this is `max - min ≤ margin`.
/// * UNDETERMINED otherwise.
pub fn growth_classifier(points: &[ScalingPoint], margin: f64) -> Result<GrowthClass> {
    let sorted = sorted_points(points, 4)?;
    let slopes = local_slopes(&sorted);
    let errs = local_slope_errors(&sorted);
    let n = slopes.len();

    let monotone = slopes
        .windows(2)
        .zip(errs.windows(2))
        .all(|(s, e)| s[1] - s[0] >= -2.0 * e[0].hypot(e[1]));
    let rise = slopes[n - 1] - slopes[0];
    if monotone && rise > margin + 2.0 * errs[0].hypot(errs[n - 1]) {
        return Ok(GrowthClass::SuperPolynomial);
    }

    let lower = slopes
        .iter()
        .zip(&errs)
        .map(|(s, e)| s - margin / 2.0 - 2.0 * e)
        .fold(f64::NEG_INFINITY, f64::max);
    let upper = slopes
        .iter()
        .zip(&errs)
        .map(|(s, e)| s + margin / 2.0 + 2.0 * e)
        .fold(f64::INFINITY, f64::min);
    // small slack so exactly-flat data is not split by rounding
    if lower <= upper + 1e-12 {
        return Ok(GrowthClass::PolynomialConsistent);
    }
    Ok(GrowthClass::Undetermined)
}

/// Physical duration of `steps` MCS at `seconds_per_mcs` each.
pub fn mcs_to_seconds(steps: f64, seconds_per_mcs: f64) -> f64 {
    steps * seconds_per_mcs
}

/// Bootstrap estimate of `z`: resamples each size's memory times with
/// replacement and refits. Returns the mean and standard deviation of the
/// refitted exponents.
pub fn bootstrap_exponent(
    samples: &[(usize, Vec<f64>)],
    n_resamples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_resamples < 2 {
        return Err(Error::InvalidParams("need at least two bootstrap resamples".into()));
    }
    let mut zs = Vec::with_capacity(n_resamples);
    for b in 0..n_resamples {
        let mut rng = RngStream::new(StreamId::new(seed, b as u64));
        let points = samples
            .iter()
            .map(|(size, taus)| {
                if taus.is_empty() {
                    return Err(Error::InvalidPoint(format!("no memory times for L = {size}")));
                }
                let draw: Vec<f64> = (0..taus.len())
                    .map(|_| taus[rng.below(taus.len() as u64) as usize])
                    .collect();
                ScalingPoint::from_taus(*size, &draw)
            })
            .collect::<Result<Vec<_>>>()?;
        zs.push(fit_power_law(&points)?.z);
    }
    let (mean, stderr) = mean_and_stderr(&zs).expect("non-empty");
    Ok((mean, stderr * (zs.len() as f64).sqrt()))
}
