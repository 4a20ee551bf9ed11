//! Regressions: Pareto index from the CCDF, middle-region log-normal
//! parameters, per-bin tent-shaped growth kernels and the slope law that
//! ties the kernel slopes to ln x1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::{empirical_ccdf, BinnedDensity, GrowthRateDensity};
use crate::numeric::solve3;

/// Default truncation for tent fits: only r-bins with |r| <= r_max enter.
/// The far tails of empirical growth-rate densities bend away from the
/// tent shape, so the fit window is a reported sensitivity.
pub const DEFAULT_R_MAX: f64 = 1.0;

/// Ordinary least squares of v on u.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OlsLine {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub stderr_slope: f64,
    pub n: usize,
}

/// OLS line fit; errors on fewer than 2 distinct u values.
pub fn ols_line(points: &[(f64, f64)]) -> Result<OlsLine> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("ols_line needs >= 2 points, got {n}")));
    }
    let nf = n as f64;
    let mean_u = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_v = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let mut suu = 0.0;
    let mut suv = 0.0;
    let mut svv = 0.0;
    for &(u, v) in points {
        suu += (u - mean_u) * (u - mean_u);
        suv += (u - mean_u) * (v - mean_v);
        svv += (v - mean_v) * (v - mean_v);
    }
    if suu == 0.0 {
        return Err(Error::DegenerateRegression("all u values identical".into()));
    }
    let slope = suv / suu;
    let intercept = mean_v - slope * mean_u;
    let ss_res = (svv - slope * suv).max(0.0);
    let r_squared = if svv == 0.0 { 1.0 } else { 1.0 - ss_res / svv };
    let stderr_slope = if n > 2 { (ss_res / (nf - 2.0) / suu).sqrt() } else { 0.0 };
    Ok(OlsLine { slope, intercept, r_squared, stderr_slope, n })
}

/// Power-law tail fit P(X > x) ~ 10^intercept * x^(-mu).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParetoFit {
    pub mu: f64,
    /// Density prefactor of P(x) = C x^(-mu-1) implied by the CCDF fit,
    /// C = mu * 10^intercept.
    pub c_const: f64,
    pub range: (f64, f64),
    pub n_points: usize,
    pub residual_rms: f64,
    /// Hill maximum-likelihood cross-check (samples above range.0), when
    /// the fit was made from raw samples.
    pub hill_mu: Option<f64>,
    /// mu <= 0 means the data are not power-law decaying.
    pub suspicious: bool,
}

/// Fit the Pareto index from CCDF points by least squares of
/// log10 CCDF on log10 x inside `range`. Points with CCDF = 0 are skipped.
pub fn fit_pareto(ccdf_points: &[(f64, f64)], range: (f64, f64)) -> Result<ParetoFit> {
    let (lo, hi) = range;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParams(format!("fit_pareto range ({lo}, {hi})")));
    }
    let pts: Vec<(f64, f64)> = ccdf_points
        .iter()
        .filter(|p| p.0 >= lo && p.0 <= hi && p.1 > 0.0)
        .map(|p| (p.0.log10(), p.1.log10()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "fit_pareto needs >= 3 populated points in range, got {}",
            pts.len()
        )));
    }
    let line = ols_line(&pts)?;
    let mu = -line.slope;
    let resid_rms = {
        let ss: f64 = pts
            .iter()
            .map(|&(u, v)| {
                let e = v - (line.intercept + line.slope * u);
                e * e
            })
            .sum();
        (ss / pts.len() as f64).sqrt()
    };
    Ok(ParetoFit {
        mu,
        c_const: mu * 10f64.powf(line.intercept),
        range,
        n_points: pts.len(),
        residual_rms: resid_rms,
        hill_mu: None,
        suspicious: mu <= 0.0,
    })
}

/// Hill maximum-likelihood tail index for samples above `x_lo`.
pub fn hill_mu(values: &[f64], x_lo: f64) -> Result<f64> {
    let mut s = 0.0;
    let mut n = 0usize;
    for &v in values {
        if v >= x_lo && v > 0.0 {
            s += (v / x_lo).ln();
            n += 1;
        }
    }
    if n < 3 || s <= 0.0 {
        return Err(Error::InsufficientData(format!("hill_mu: {n} tail samples")));
    }
    Ok(n as f64 / s)
}

/// Build the empirical CCDF from raw samples, fit the Pareto index on
/// `range` and attach the Hill cross-check.
pub fn fit_pareto_samples(values: &[f64], range: (f64, f64)) -> Result<ParetoFit> {
    let ccdf = empirical_ccdf(values)?;
    let mut fit = fit_pareto(&ccdf, range)?;
    fit.hill_mu = hill_mu(values, range.0).ok();
    Ok(fit)
}

/// Log-normal parameters from a windowed quadratic fit in log space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogNormalFit {
    pub sigma: f64,
    pub xbar: f64,
    pub range: (f64, f64),
    pub n_bins: usize,
    pub residual_rms: f64,
}

/// Rejection threshold for the quadratic coefficient: anything above this
/// is treated as non-concave (a power law has coefficient 0 within noise).
const CONCAVITY_THRESHOLD: f64 = -1e-6;

/// Fit sigma and xbar on `range` from a binned density: with y = ln x and
/// p_Y(y) = x P(x), least squares of ln p_Y on (1, y, y^2) gives
/// sigma^2 = -1/(2 a2) and xbar = exp(-a1/(2 a2)).
pub fn fit_lognormal_mid(density: &BinnedDensity, range: (f64, f64)) -> Result<LogNormalFit> {
    let (lo, hi) = range;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParams(format!("fit_lognormal_mid range ({lo}, {hi})")));
    }
    let mut ys = Vec::new();
    let mut zs = Vec::new();
    for i in 0..density.counts.len() {
        // only bins fully inside the window: a straddling bin mixes mass
        // from outside the window (or outside the support) into its density
        if density.edges[i] >= lo && density.edges[i + 1] <= hi && density.counts[i] > 0 {
            let xc = density.center_geometric(i);
            ys.push(xc.ln());
            zs.push((xc * density.density[i]).ln());
        }
    }
    if ys.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "fit_lognormal_mid needs >= 4 populated bins in range, got {}",
            ys.len()
        )));
    }
    // normal equations for z = a0 + a1 y + a2 y^2, centered for conditioning
    let ybar = ys.iter().sum::<f64>() / ys.len() as f64;
    let yc: Vec<f64> = ys.iter().map(|y| y - ybar).collect();
    let mut m = [[0.0f64; 3]; 3];
    let mut b = [0.0f64; 3];
    for (y, z) in yc.iter().zip(zs.iter()) {
        let row = [1.0, *y, y * y];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += row[i] * row[j];
            }
            b[i] += row[i] * z;
        }
    }
    let a = solve3(m, b)?;
    if a[2] >= CONCAVITY_THRESHOLD {
        return Err(Error::NonConcave { coeff: a[2] });
    }
    let sigma2 = -1.0 / (2.0 * a[2]);
    let vertex_centered = -a[1] / (2.0 * a[2]);
    let xbar = (vertex_centered + ybar).exp();
    let ss: f64 = yc
        .iter()
        .zip(zs.iter())
        .map(|(y, z)| {
            let e = z - (a[0] + a[1] * y + a[2] * y * y);
            e * e
        })
        .sum();
    Ok(LogNormalFit {
        sigma: sigma2.sqrt(),
        xbar,
        range,
        n_bins: ys.len(),
        residual_rms: (ss / ys.len() as f64).sqrt(),
    })
}

/// Tent-shaped kernel fit for one condition bin:
/// log10 q = c - t_plus * r (r > 0), log10 q = c + t_minus * r (r < 0),
/// with a shared intercept c.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TentFit {
    pub bin_index: usize,
    pub x1_lower: f64,
    pub c: f64,
    pub t_plus: f64,
    pub t_minus: f64,
    /// Sample counts in the r-bins used on each branch (also the fit
    /// weights carried into the slope-law regression).
    pub n_pos: u64,
    pub n_neg: u64,
    pub residual_rms: f64,
}

/// Fit the tent kernel with the default |r| window.
pub fn fit_tent(grd: &GrowthRateDensity) -> Result<TentFit> {
    fit_tent_rmax(grd, DEFAULT_R_MAX)
}

/// Tent fit restricted to |r| <= r_max. Bins are weighted by their counts;
/// a bin centered exactly at r = 0 contributes to c only.
pub fn fit_tent_rmax(grd: &GrowthRateDensity, r_max: f64) -> Result<TentFit> {
    let mut rows: Vec<([f64; 3], f64, f64)> = Vec::new(); // design, target, weight
    let mut n_pos_bins = 0usize;
    let mut n_neg_bins = 0usize;
    let mut n_pos = 0u64;
    let mut n_neg = 0u64;
    for i in 0..grd.counts.len() {
        let cnt = grd.counts[i];
        if cnt == 0 {
            continue;
        }
        let r = grd.r_center(i);
        if r.abs() > r_max {
            continue;
        }
        let z = grd.density_q[i].log10();
        let w = cnt as f64;
        if r > 0.0 {
            rows.push(([1.0, -r, 0.0], z, w));
            n_pos_bins += 1;
            n_pos += cnt;
        } else if r < 0.0 {
            rows.push(([1.0, 0.0, r], z, w));
            n_neg_bins += 1;
            n_neg += cnt;
        } else {
            rows.push(([1.0, 0.0, 0.0], z, w));
        }
    }
    if n_pos_bins == 0 && n_neg_bins == 0 {
        return Err(Error::DegenerateGrowth);
    }
    if n_pos_bins < 2 || n_neg_bins < 2 {
        return Err(Error::OneSidedGrowth { n_pos: n_pos_bins, n_neg: n_neg_bins });
    }
    let mut m = [[0.0f64; 3]; 3];
    let mut b = [0.0f64; 3];
    for (row, z, w) in &rows {
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += w * row[i] * row[j];
            }
            b[i] += w * row[i] * z;
        }
    }
    let sol = solve3(m, b)?;
    let (c, t_plus, t_minus) = (sol[0], sol[1], sol[2]);
    let wsum: f64 = rows.iter().map(|r| r.2).sum();
    let ss: f64 = rows
        .iter()
        .map(|(row, z, w)| {
            let e = z - (row[0] * c + row[1] * t_plus + row[2] * t_minus);
            w * e * e
        })
        .sum();
    Ok(TentFit {
        bin_index: grd.condition_bin,
        x1_lower: grd.x1_lower,
        c,
        t_plus,
        t_minus,
        n_pos,
        n_neg,
        residual_rms: (ss / wsum).sqrt(),
    })
}

/// The slope law t±(x1) = t±(x0) ± alpha ln(x1/x0) fitted jointly over
/// both branches of a set of tent fits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonGibratFit {
    pub alpha: f64,
    pub t_plus_x0: f64,
    pub t_minus_x0: f64,
    pub x0: f64,
    pub region: (f64, f64),
    /// t_plus(x0) - t_minus(x0), the kernel's implied tail exponent.
    pub mu_from_t: f64,
    pub n_tents: usize,
    pub residual_rms: f64,
}

/// Weighted joint fit of alpha and the two intercepts against
/// u = ln(x1/x0), using the tents whose x1 lower edge lies in `region`.
/// x1 is represented by the lower bound of each bin.
pub fn fit_alpha(tents: &[TentFit], x0: f64, region: (f64, f64)) -> Result<NonGibratFit> {
    let (lo, hi) = region;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParams(format!("fit_alpha region ({lo}, {hi})")));
    }
    let selected: Vec<&TentFit> = tents
        .iter()
        .filter(|t| t.x1_lower >= lo && t.x1_lower < hi)
        .collect();
    if selected.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "fit_alpha needs >= 3 tents in region, got {}",
            selected.len()
        )));
    }
    // parameters: (t_plus_x0, t_minus_x0, alpha)
    let mut m = [[0.0f64; 3]; 3];
    let mut b = [0.0f64; 3];
    let mut rows: Vec<([f64; 3], f64, f64)> = Vec::new();
    for t in &selected {
        let u = (t.x1_lower / x0).ln();
        rows.push(([1.0, 0.0, u], t.t_plus, t.n_pos as f64));
        rows.push(([0.0, 1.0, -u], t.t_minus, t.n_neg as f64));
    }
    for (row, z, w) in &rows {
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += w * row[i] * row[j];
            }
            b[i] += w * row[i] * z;
        }
    }
    let sol = solve3(m, b)?;
    let (tp0, tm0, alpha) = (sol[0], sol[1], sol[2]);
    let wsum: f64 = rows.iter().map(|r| r.2).sum();
    let ss: f64 = rows
        .iter()
        .map(|(row, z, w)| {
            let e = z - (row[0] * tp0 + row[1] * tm0 + row[2] * alpha);
            w * e * e
        })
        .sum();
    Ok(NonGibratFit {
        alpha,
        t_plus_x0: tp0,
        t_minus_x0: tm0,
        x0,
        region,
        mu_from_t: tp0 - tm0,
        n_tents: selected.len(),
        residual_rms: (ss / wsum).sqrt(),
    })
}
