//! Detailed balance and detailed quasi-balance: the symmetry-axis
//! regression (theta, a), modified growth rates, the Gamma relation and a
//! chi-square transpose-symmetry test of the pair histogram.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::ols_line;
use crate::histogram::joint_hist2d;
use crate::panel::PairedPanel;
use crate::stats::chi_square_sf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Large,
    Middle,
}

/// Which coordinates the region window filters on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionFilter {
    /// Both x1 and x2 inside the window (default; mirrors the symmetry
    /// being tested).
    Both,
    /// Only x1 inside the window, for sensitivity analysis.
    X1Only,
}

/// Regression of log10 x2 on log10 x1 over a scale-region window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuasiBalanceFit {
    pub theta: f64,
    pub log10_a: f64,
    pub region: (f64, f64),
    pub region_kind: RegionKind,
    pub n_pairs: usize,
    pub stderr_theta: f64,
    /// Orthogonal (total least squares) slope, reported as a diagnostic.
    pub theta_orthogonal: Option<f64>,
}

/// Estimate (theta, log10 a) on a region window, filtering both coordinates.
pub fn estimate_theta_a(
    panel: &PairedPanel,
    region: (f64, f64),
    region_kind: RegionKind,
) -> Result<QuasiBalanceFit> {
    estimate_theta_a_filtered(panel, region, region_kind, RegionFilter::Both)
}

/// Estimate (theta, log10 a) with an explicit region filter mode.
pub fn estimate_theta_a_filtered(
    panel: &PairedPanel,
    region: (f64, f64),
    region_kind: RegionKind,
    filter: RegionFilter,
) -> Result<QuasiBalanceFit> {
    let (lo, hi) = region;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParams(format!("estimate_theta_a region ({lo}, {hi})")));
    }
    let pts: Vec<(f64, f64)> = panel
        .pairs
        .iter()
        .filter(|&&(x1, x2)| match filter {
            RegionFilter::Both => x1 >= lo && x1 <= hi && x2 >= lo && x2 <= hi,
            RegionFilter::X1Only => x1 >= lo && x1 <= hi,
        })
        .map(|&(x1, x2)| (x1.log10(), x2.log10()))
        .collect();
    if pts.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "estimate_theta_a needs >= 10 in-region pairs, got {}",
            pts.len()
        )));
    }
    let line = ols_line(&pts)?;
    Ok(QuasiBalanceFit {
        theta: line.slope,
        log10_a: line.intercept,
        region,
        region_kind,
        n_pairs: pts.len(),
        stderr_theta: line.stderr_slope,
        theta_orthogonal: orthogonal_slope(&pts),
    })
}

/// Total-least-squares slope (equal error variances in both coordinates).
fn orthogonal_slope(pts: &[(f64, f64)]) -> Option<f64> {
    let n = pts.len() as f64;
    let mu = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mv = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut suu = 0.0;
    let mut svv = 0.0;
    let mut suv = 0.0;
    for &(u, v) in pts {
        suu += (u - mu) * (u - mu);
        svv += (v - mv) * (v - mv);
        suv += (u - mu) * (v - mv);
    }
    if suv == 0.0 {
        return None;
    }
    let d = svv - suu;
    Some((d + (d * d + 4.0 * suv * suv).sqrt()) / (2.0 * suv))
}

/// Modified growth rate R = x2 / (a x1^theta); reduces to x2/x1 at
/// theta = 1, a = 1.
pub fn modified_growth_rate(x1: f64, x2: f64, theta: f64, log10_a: f64) -> f64 {
    debug_assert!(x1 > 0.0 && x2 > 0.0);
    // computed in logs to stay stable at extreme magnitudes
    10f64.powf(x2.log10() - log10_a - theta * x1.log10())
}

/// Outcome of the symmetry-axis relation theta = 1 - (2/Gamma) log10 a.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Gamma {
    Determinate(f64),
    /// theta = 1 and log10 a = 0: the detailed-balance special case leaves
    /// Gamma undetermined.
    Indeterminate,
}

/// Gamma implied by (theta, log10 a). Errors when theta = 1 but
/// log10 a != 0 (no Gamma satisfies the relation).
pub fn gamma_relation(theta: f64, log10_a: f64) -> Result<Gamma> {
    if theta == 1.0 {
        if log10_a == 0.0 {
            return Ok(Gamma::Indeterminate);
        }
        return Err(Error::GammaInconsistent { log10_a });
    }
    Ok(Gamma::Determinate(2.0 * log10_a / (1.0 - theta)))
}

/// Inverse map: theta from Gamma and log10 a.
pub fn theta_from_gamma(gamma: f64, log10_a: f64) -> f64 {
    1.0 - 2.0 * log10_a / gamma
}

/// Bowker-style transpose-symmetry test of the pair histogram in the
/// symmetrized coordinates (u, v) = (log10 x1, (log10 x2 - log10 a)/theta).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub transform_used: (f64, f64),
    pub n_in_grid: u64,
}

/// Chi-square statistic over unordered off-diagonal cell pairs:
/// sum (n_ij - n_ji)^2 / (n_ij + n_ji), skipping empty pairs.
pub fn symmetry_statistic(
    panel: &PairedPanel,
    theta: f64,
    log10_a: f64,
    edges: &[f64],
) -> Result<SymmetryReport> {
    if theta <= 0.0 {
        return Err(Error::InvalidParams(format!("symmetry_statistic theta = {theta}")));
    }
    let hist = joint_hist2d(panel, edges, edges, |x1, x2| {
        (x1.log10(), (x2.log10() - log10_a) / theta)
    })?;
    let n = edges.len() - 1;
    let mut stat = 0.0f64;
    let mut dof = 0usize;
    let mut n_in = 0u64;
    for i in 0..n {
        for j in 0..n {
            n_in += hist.counts[i][j];
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let a = hist.counts[i][j] as f64;
            let b = hist.counts[j][i] as f64;
            if a + b > 0.0 {
                stat += (a - b) * (a - b) / (a + b);
                dof += 1;
            }
        }
    }
    Ok(SymmetryReport {
        statistic: stat,
        dof,
        p_value: chi_square_sf(stat, dof),
        transform_used: (theta, log10_a),
        n_in_grid: n_in,
    })
}
