//! Closed-form densities and the analytic relations tying them together:
//! the log-normal form, the power-law/log-normal composite with a Gaussian
//! factor in log space, the quasistatic pair of densities linked by the
//! symmetry-axis parameters, tent-kernel normalization, parameter maps and
//! a finite-difference checker for the reduction differential equation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{ExpTail, NumericCdf};
use crate::stats::normal_cdf;

/// Lower edge of bin 17 of the 4 * 10^(1 + 0.2(n-1)) grid; the default
/// large/middle scale threshold for synthetic data.
pub const DEFAULT_X0: f64 = 63_395.736_772_455_35;

/// Lower edge of bin 9 of the same grid; the default lower bound of the
/// middle scale region.
pub const DEFAULT_X_MIN: f64 = 1_592.430_958_061_052_3;

/// Closed-form parameter set for a quasistatic year pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoryParams {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub theta: f64,
    pub log10_a: f64,
    pub alpha: f64,
    pub x0: f64,
    pub x_min: f64,
    pub xbar1: f64,
}

impl TheoryParams {
    /// Derive the full parameter set from the primitive quasistatic inputs:
    /// mu2 = (mu1+1)/theta - 1, sigma1 = 1/sqrt(2 theta alpha),
    /// sigma2 = sigma1 * theta, xbar1 = x0 exp(-mu1 sigma1^2).
    pub fn from_quasistatic(
        theta: f64,
        log10_a: f64,
        alpha: f64,
        mu1: f64,
        x0: f64,
        x_min: f64,
    ) -> Result<Self> {
        if !(theta > 0.0) || !(alpha > 0.0) || !(x0 > 0.0) || !(x_min > 0.0) || x_min >= x0 {
            return Err(Error::InvalidParams(format!(
                "quasistatic params: theta={theta}, alpha={alpha}, x0={x0}, x_min={x_min}"
            )));
        }
        let (sigma1, sigma2, mu2) = param_map_quasistatic(theta, alpha, mu1)?;
        let xbar1 = x0 * (-mu1 * sigma1 * sigma1).exp();
        Ok(Self { mu1, mu2, sigma1, sigma2, theta, log10_a, alpha, x0, x_min, xbar1 })
    }

    /// Static special case (theta = 1, a = 1).
    pub fn from_static(alpha: f64, mu: f64, x0: f64, x_min: f64) -> Result<Self> {
        Self::from_quasistatic(1.0, 0.0, alpha, mu, x0, x_min)
    }

    /// Default parameter set at the standard profit-scale thresholds.
    pub fn default_quasistatic() -> Self {
        Self::from_quasistatic(0.9, 0.2, 0.14, 1.0, DEFAULT_X0, DEFAULT_X_MIN).unwrap()
    }

    /// Check the two cross-year identities (mu1+1)/(mu2+1) = theta and
    /// sigma2/sigma1 = theta at `tol`.
    pub fn check_consistency(&self, tol: f64) -> bool {
        let mu_ratio = (self.mu1 + 1.0) / (self.mu2 + 1.0);
        let sigma_ratio = self.sigma2 / self.sigma1;
        (mu_ratio - self.theta).abs() <= tol && (sigma_ratio - self.theta).abs() <= tol
    }

    /// a x0^theta, the threshold mapped to year-2 coordinates.
    pub fn x0_mapped(&self) -> f64 {
        10f64.powf(self.log10_a + self.theta * self.x0.log10())
    }

    /// a x_min^theta.
    pub fn x_min_mapped(&self) -> f64 {
        10f64.powf(self.log10_a + self.theta * self.x_min.log10())
    }

    /// Year-1 density. `regional` selects the per-region parameterization
    /// (Gaussian factor only below x0) instead of the single-alpha form.
    pub fn density_1(&self, regional: bool) -> Result<PiecewiseDensity> {
        let kappa = self.theta * self.alpha;
        PiecewiseDensity::new(self.mu1, kappa, if regional { 0.0 } else { kappa }, self.x0, self.x_min)
    }

    /// Year-2 density, normalized over the mapped support (a x_min^theta, inf).
    pub fn density_2(&self, regional: bool) -> Result<PiecewiseDensity> {
        self.density_2_with_mu(self.mu2, regional)
    }

    /// Year-2 density with an explicit power exponent (used to overlay the
    /// fitted exponent while keeping the theoretical curvature).
    pub fn density_2_with_mu(&self, mu2: f64, regional: bool) -> Result<PiecewiseDensity> {
        let kappa = self.alpha / self.theta;
        PiecewiseDensity::new(
            mu2,
            kappa,
            if regional { 0.0 } else { kappa },
            self.x0_mapped(),
            self.x_min_mapped(),
        )
    }
}

/// Log-normal density (1/(x sqrt(2 pi s^2))) exp(-ln^2(x/xbar)/(2 s^2)).
pub fn pdf_lognormal(x: f64, sigma: f64, xbar: f64) -> Result<f64> {
    if !(x > 0.0) || !(sigma > 0.0) || !(xbar > 0.0) {
        return Err(Error::InvalidParams(format!(
            "pdf_lognormal(x={x}, sigma={sigma}, xbar={xbar})"
        )));
    }
    let l = (x / xbar).ln();
    Ok((-(l * l) / (2.0 * sigma * sigma)).exp() / (x * (2.0 * std::f64::consts::PI).sqrt() * sigma))
}

/// Log-normal CDF (analytic, via the normal CDF).
pub fn cdf_lognormal(x: f64, sigma: f64, xbar: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    normal_cdf((x / xbar).ln() / sigma)
}

/// The static composite density C x^(-mu-1) exp(-alpha ln^2(x/x0)),
/// evaluated with a caller-supplied constant.
pub fn pdf_static(x: f64, c: f64, mu: f64, alpha: f64, x0: f64) -> Result<f64> {
    if !(x > 0.0) || !(x0 > 0.0) {
        return Err(Error::InvalidParams(format!("pdf_static(x={x}, x0={x0})")));
    }
    let l = (x / x0).ln();
    Ok(c * x.powf(-mu - 1.0) * (-alpha * l * l).exp())
}

/// Normalization constant of `pdf_static` over [x_min, inf),
/// computed numerically.
pub fn static_norm_const(mu: f64, alpha: f64, x0: f64, x_min: f64) -> Result<f64> {
    let law = PiecewiseDensity::new(mu, alpha, alpha, x0, x_min)?;
    // pdf(x) = shape / (Z x); pdf_static = C x^{-mu-1} e^{-a l^2}
    // shape(y) = e^{-mu (y-y0) - kappa (y-y0)^2} so C = x0^{-mu} / Z... the
    // cleanest route: match pdf at x0, where the Gaussian factor is 1.
    let p = law.pdf(x0)?;
    Ok(p * x0.powf(mu + 1.0))
}

/// Quasistatic year-1 density: the single-alpha closed form C1 x^(-mu1-1) exp(-theta alpha
/// ln^2(x/x0)), normalized over [x_min, inf) with the single-alpha shape.
pub fn pdf_quasistatic_1(x: f64, p: &TheoryParams) -> Result<f64> {
    p.density_1(false)?.pdf(x)
}

/// Quasistatic year-2 density, the same functional form taken at
/// (x2/a)^(1/theta), normalized over the mapped support.
pub fn pdf_quasistatic_2(x2: f64, p: &TheoryParams) -> Result<f64> {
    p.density_2(false)?.pdf(x2)
}

/// Normalized density that is x^(-mu-1) with a Gaussian factor in ln x:
/// exp(-kappa_mid ln^2(x/x0)) below x0 and exp(-kappa_above ln^2(x/x0))
/// above, supported on [x_min, inf). kappa_above = 0 gives a pure power
/// tail (closed analytically); kappa_mid = kappa_above gives the
/// single-alpha form. The two branches agree at x0 where the Gaussian
/// factor is 1, so the density is continuous by construction.
pub struct PiecewiseDensity {
    pub mu: f64,
    pub kappa_mid: f64,
    pub kappa_above: f64,
    pub x0: f64,
    pub x_min: f64,
    y0: f64,
    y_min: f64,
    cdf: NumericCdf,
}

impl PiecewiseDensity {
    pub fn new(mu: f64, kappa_mid: f64, kappa_above: f64, x0: f64, x_min: f64) -> Result<Self> {
        if !(x0 > 0.0) || !(x_min > 0.0) || x_min >= x0 || kappa_mid < 0.0 || kappa_above < 0.0 {
            return Err(Error::InvalidParams(format!(
                "PiecewiseDensity(mu={mu}, kappa_mid={kappa_mid}, kappa_above={kappa_above}, x0={x0}, x_min={x_min})"
            )));
        }
        if mu <= 0.0 && kappa_above == 0.0 {
            return Err(Error::InvalidParams(format!(
                "PiecewiseDensity: pure power tail needs mu > 0, got mu={mu}"
            )));
        }
        let y0 = x0.ln();
        let y_min = x_min.ln();
        let shape = shape_fn(mu, kappa_mid, kappa_above, y0);
        let cdf = if kappa_above == 0.0 {
            let tail = ExpTail { start: y0, rate: mu, coeff: 1.0 };
            NumericCdf::build(|y| shape(y), y_min, y0, 6000, Some(tail))?
        } else {
            // Gaussian factor truncates the tail; find where the shape
            // drops below ~1e-18 relative to x0.
            let t = (-mu + (mu * mu + 4.0 * 42.0 * kappa_above).sqrt()) / (2.0 * kappa_above);
            let y_end = y0 + t.max(1.0);
            NumericCdf::build(|y| shape(y), y_min, y_end, 12_000, None)?
        };
        Ok(Self { mu, kappa_mid, kappa_above, x0, x_min, y0, y_min, cdf })
    }

    fn shape(&self, y: f64) -> f64 {
        shape_fn(self.mu, self.kappa_mid, self.kappa_above, self.y0)(y)
    }

    /// Density at x (zero below x_min).
    pub fn pdf(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::InvalidParams(format!("pdf at x={x}")));
        }
        let y = x.ln();
        if y < self.y_min {
            return Ok(0.0);
        }
        Ok(self.shape(y) / (self.cdf.total_mass() * x))
    }

    /// CDF at x.
    pub fn cdf(&self, x: f64) -> f64 {
        self.cdf.cdf_x(x)
    }

    /// Log of the unnormalized shape as a function of y = ln x
    /// (a quadratic below y0, the tail branch above).
    pub fn log_shape_y(&self, y: f64) -> f64 {
        let d = y - self.y0;
        let kappa = if d < 0.0 { self.kappa_mid } else { self.kappa_above };
        -self.mu * d - kappa * d * d
    }
}

fn shape_fn(mu: f64, kappa_mid: f64, kappa_above: f64, y0: f64) -> impl Fn(f64) -> f64 {
    move |y: f64| {
        let d = y - y0;
        let kappa = if d < 0.0 { kappa_mid } else { kappa_above };
        (-mu * d - kappa * d * d).exp()
    }
}

/// Tent-kernel normalization constant d = t+ t- / (t+ + t-), the unique
/// value making the kernel integrate to 1 over (0, inf).
pub fn tent_normalization(t_plus: f64, t_minus: f64) -> Result<f64> {
    if !(t_plus > 0.0) || !(t_minus > 0.0) {
        return Err(Error::NonNormalizableKernel(format!(
            "slopes t_plus={t_plus}, t_minus={t_minus} must both be positive"
        )));
    }
    Ok(t_plus * t_minus / (t_plus + t_minus))
}

/// Kernel slope parameters: t±(x) = t±(x0) ± alpha ln(x/x0).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TentKernelParams {
    pub t_plus_x0: f64,
    pub t_minus_x0: f64,
    pub alpha: f64,
    pub x0: f64,
}

impl TentKernelParams {
    /// Slopes from the continuous (single-alpha) law.
    pub fn slopes_continuous(&self, x: f64) -> (f64, f64) {
        let u = (x / self.x0).ln();
        (self.t_plus_x0 + self.alpha * u, self.t_minus_x0 - self.alpha * u)
    }

    /// Slopes with the per-region parameterization: the linear variation
    /// applies below x0 only; above x0 the slopes are frozen at their
    /// x0 values.
    pub fn slopes_per_region(&self, x: f64) -> (f64, f64) {
        let u = (x / self.x0).ln().min(0.0);
        (self.t_plus_x0 + self.alpha * u, self.t_minus_x0 - self.alpha * u)
    }
}

/// Static parameter map alpha = 1/(2 sigma^2), mu = ln(x0/xbar)/sigma^2.
pub fn param_map_static(sigma: f64, xbar: f64, x0: f64) -> Result<(f64, f64)> {
    if !(sigma > 0.0) || !(xbar > 0.0) || !(x0 > 0.0) {
        return Err(Error::InvalidParams(format!(
            "param_map_static(sigma={sigma}, xbar={xbar}, x0={x0})"
        )));
    }
    let s2 = sigma * sigma;
    Ok((1.0 / (2.0 * s2), (x0 / xbar).ln() / s2))
}

/// Inverse static map: sigma = 1/sqrt(2 alpha), xbar = x0 exp(-mu/(2 alpha)).
pub fn param_map_static_inv(alpha: f64, mu: f64, x0: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0) || !(x0 > 0.0) {
        return Err(Error::InvalidParams(format!("param_map_static_inv(alpha={alpha}, x0={x0})")));
    }
    let s2 = 1.0 / (2.0 * alpha);
    Ok((s2.sqrt(), x0 * (-mu * s2).exp()))
}

/// Quasistatic map: sigma1 = 1/sqrt(2 theta alpha), sigma2 =
/// 1/sqrt(2 alpha/theta), mu2 = (mu1+1)/theta - 1. The ratio
/// sigma2/sigma1 = theta holds identically.
pub fn param_map_quasistatic(theta: f64, alpha: f64, mu1: f64) -> Result<(f64, f64, f64)> {
    if !(theta > 0.0) || !(alpha > 0.0) {
        return Err(Error::InvalidParams(format!(
            "param_map_quasistatic(theta={theta}, alpha={alpha})"
        )));
    }
    let sigma1 = 1.0 / (2.0 * theta * alpha).sqrt();
    let sigma2 = 1.0 / (2.0 * alpha / theta).sqrt();
    let mu2 = (mu1 + 1.0) / theta - 1.0;
    Ok((sigma1, sigma2, mu2))
}

/// Which mean enters the year-2 exponent identification
/// mu2 = ln(a x0^theta / xbar) / sigma2^2. The source text writes xbar1;
/// the self-consistent alternative uses xbar2. Both are exposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XbarReading {
    XBar1,
    XBar2,
}

/// Evaluate the year-2 exponent identification under either reading.
pub fn mu2_identification(p: &TheoryParams, reading: XbarReading) -> f64 {
    let x0m = p.x0_mapped();
    let s2 = p.sigma2 * p.sigma2;
    let xbar = match reading {
        XbarReading::XBar1 => p.xbar1,
        XbarReading::XBar2 => x0m * (-p.mu2 * s2).exp(),
    };
    (x0m / xbar).ln() / s2
}

/// Finite-difference residual report for the reduction equation
/// theta [t+(x) - t-(x) + 1] P(x) + x P'(x) = 0 against the year-1
/// closed form, normalized by theta (mu1+1) P / x.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeResidualReport {
    /// Max relative residual using the Richardson-extrapolated derivative.
    pub max_rel_residual: f64,
    /// Max relative residual at the raw step h and at h/2; their ratio
    /// confirms the O(h^2) truncation order when the identity holds.
    pub max_rel_residual_h: f64,
    pub max_rel_residual_h2: f64,
    pub order_ratio: f64,
    pub n_points: usize,
    pub n_skipped: usize,
    /// Exact identities from the slope law: t+' + t-' and t+' + x t+''.
    pub tprime_sum_residual: f64,
    pub tcurvature_residual: f64,
}

/// Check the reduction differential equation on a log-spaced grid that
/// avoids the kink at x0. Points whose stencil would cross a region
/// boundary are skipped.
pub fn de_residual(params: &TheoryParams, x_grid: &[f64]) -> Result<DeResidualReport> {
    de_residual_scaled(params, x_grid, 1.0)
}

/// Same check with the closed form's exponent scaled by `exponent_scale`
/// (1.0 = untouched); used to verify that the checker detects violations.
pub fn de_residual_scaled(
    params: &TheoryParams,
    x_grid: &[f64],
    exponent_scale: f64,
) -> Result<DeResidualReport> {
    if x_grid.len() < 8 {
        return Err(Error::GridTooCoarse(format!("{} grid points", x_grid.len())));
    }
    let y0 = params.x0.ln();
    let y_min = params.x_min.ln();
    let theta = params.theta;
    let alpha = params.alpha;
    let mu1 = params.mu1;
    let delta0 = params.mu2; // t+(x0) - t-(x0) consistent with the reduction

    // log P~(y), per-region, exponent optionally tampered
    let log_p = |y: f64| -> f64 {
        let d = y - y0;
        let kappa = if d < 0.0 { theta * alpha } else { 0.0 };
        exponent_scale * (-(mu1 + 1.0) * d - kappa * d * d)
    };

    let mut ys: Vec<f64> = x_grid.iter().map(|x| x.ln()).collect();
    ys.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    // base step from the grid spacing
    let mut gaps: Vec<f64> = ys.windows(2).map(|w| w[1] - w[0]).filter(|g| *g > 0.0).collect();
    gaps.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    if gaps.is_empty() {
        return Err(Error::GridTooCoarse("degenerate grid".into()));
    }
    let h_base = gaps[gaps.len() / 2].max(1e-8);
    if h_base > 0.05 {
        return Err(Error::GridTooCoarse(format!(
            "median log spacing {h_base:.3} exceeds 0.05"
        )));
    }

    let mut max_star = 0.0f64;
    let mut max_h = 0.0f64;
    let mut max_h2 = 0.0f64;
    let mut used = 0usize;
    let mut skipped = 0usize;
    for &y in &ys {
        if y <= y_min {
            skipped += 1;
            continue;
        }
        // stencil at h and h/2 must stay on one side of the kink at y0
        let h = h_base.min(0.45 * (y - y0).abs()).min(0.45 * (y - y_min).max(1e-12));
        if h < 1e-7 {
            skipped += 1;
            continue;
        }
        let lp0 = log_p(y);
        let deriv = |step: f64| -> f64 {
            // d P~/dy via central difference, expressed relative to P~(y)
            ((log_p(y + step) - lp0).exp() - (log_p(y - step) - lp0).exp()) / (2.0 * step)
        };
        let d_h = deriv(h);
        let d_h2 = deriv(0.5 * h);
        let d_star = (4.0 * d_h2 - d_h) / 3.0;
        let d_region = y - y0;
        let a_region = if d_region < 0.0 { alpha } else { 0.0 };
        // the kernel side of the equation is never tampered; only the
        // closed-form density is
        let delta = delta0 + 2.0 * a_region * d_region;
        // residual(y) = |theta (delta + 1) + dlnP/dy| / (theta (mu1 + 1));
        // note x P'(x) = dP/dy and both terms carry the same P~ factor.
        let scale = theta * (mu1 + 1.0);
        let resid = |d_est: f64| (theta * (delta + 1.0) + d_est).abs() / scale;
        max_star = max_star.max(resid(d_star));
        max_h = max_h.max(resid(d_h));
        max_h2 = max_h2.max(resid(d_h2));
        used += 1;
    }
    if used < 8 {
        return Err(Error::GridTooCoarse(format!("only {used} usable grid points")));
    }
    // exact slope-law identities: t+' + t-' = 0 and t+' + x t+'' = 0
    let kernel = TentKernelParams {
        t_plus_x0: 1.0 + delta0,
        t_minus_x0: 1.0,
        alpha,
        x0: params.x0,
    };
    let x_probe = (params.x_min * params.x0).sqrt();
    let tprime_plus = kernel.alpha / x_probe;
    let tprime_minus = -kernel.alpha / x_probe;
    let tsecond_plus = -kernel.alpha / (x_probe * x_probe);
    Ok(DeResidualReport {
        max_rel_residual: max_star,
        max_rel_residual_h: max_h,
        max_rel_residual_h2: max_h2,
        order_ratio: if max_h2 > 0.0 { max_h / max_h2 } else { f64::INFINITY },
        n_points: used,
        n_skipped: skipped,
        tprime_sum_residual: (tprime_plus + tprime_minus).abs(),
        tcurvature_residual: (tprime_plus + x_probe * tsecond_plus).abs(),
    })
}

/// Cross-year relation check report: (mu1+1)/(mu2+1) against theta_H and
/// sigma2/sigma1 against theta_M.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelationReport {
    pub mu_ratio: f64,
    pub sigma_ratio: f64,
    pub theta_h: f64,
    pub theta_m: f64,
    pub dev_mu: f64,
    pub dev_sigma: f64,
    pub tolerance: f64,
    pub pass_mu: bool,
    pub pass_sigma: bool,
}

impl RelationReport {
    pub fn pass(&self) -> bool {
        self.pass_mu && self.pass_sigma
    }
}

/// Evaluate both cross-year ratio relations at `tolerance`.
pub fn relation_checks(
    mu1: f64,
    mu2: f64,
    theta_h: f64,
    sigma1: f64,
    sigma2: f64,
    theta_m: f64,
    tolerance: f64,
) -> Result<RelationReport> {
    if mu2 == -1.0 {
        return Err(Error::InvalidParams("relation_checks: mu2 = -1".into()));
    }
    if !(sigma1 > 0.0) {
        return Err(Error::InvalidParams(format!("relation_checks: sigma1 = {sigma1}")));
    }
    let mu_ratio = (mu1 + 1.0) / (mu2 + 1.0);
    let sigma_ratio = sigma2 / sigma1;
    let dev_mu = (mu_ratio - theta_h).abs();
    let dev_sigma = (sigma_ratio - theta_m).abs();
    Ok(RelationReport {
        mu_ratio,
        sigma_ratio,
        theta_h,
        theta_m,
        dev_mu,
        dev_sigma,
        tolerance,
        pass_mu: dev_mu <= tolerance,
        pass_sigma: dev_sigma <= tolerance,
    })
}
