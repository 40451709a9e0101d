//! Regularity constants `c` with `|∇ log f(x)| ≤ c (|x| + E|X|)`, and the
//! mollification, Ornstein–Uhlenbeck and radius-approximation statements
//! built on them.
//!
//! A grid supremum only certifies the inequality at the grid radii (plus
//! analytic tail limits); it is a lower bound on the true constant.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{BoundCertificate, CertificateName};
use crate::convolve::{mollify, ou_evolve, ConvolutionResult};
use crate::error::{Error, Result};
use crate::quadrature::{required_angular_order, Estimate, GaussRule};
use crate::radial::{RadialProfile, DENSITY_FLOOR};
use crate::special::{log_sum_exp, scaled_chi_cdf};

/// Points on the coarsest log grid; each level doubles it.
const BASE_POINTS: usize = 256;
const DEFAULT_LEVELS: usize = 4;
/// Knots used by the Gaussian tail fit of tabulated data.
const TAIL_FIT_KNOTS: usize = 8;
/// Radii where `log φ` is further than this below its maximum count as
/// vanishing: numerical convolution outputs are only accurate relative to
/// the peak there, so their scores carry no information.
const RESOLVED_LOG_RANGE: f64 = 46.0;

pub const GRID_NOTE: &str = "grid-certified";

/// Log-spaced evaluation radii.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityEstimate {
    /// `max(grid_sup, tail_limit)`
    pub c_hat: f64,
    pub grid_sup: f64,
    /// Radius of the grid supremum; `None` when the tail limit dominates.
    pub attained_radius: Option<f64>,
    /// `lim |ψ(r)| / (r + E|X|)` as `r → ∞`, when known.
    pub tail_limit: Option<f64>,
    /// Constant valid for all `x` (mixtures: `1/σ₁²`).
    pub analytic_bound: Option<f64>,
    pub grid: RadiusGrid,
    /// Radii from here on were skipped because the density vanishes.
    pub excluded_from: Option<f64>,
    pub note: String,
}

impl RegularityEstimate {
    /// The constant to feed into the regularity-based certificates.
    pub fn certified_c(&self) -> f64 {
        self.analytic_bound.unwrap_or(self.c_hat)
    }
}

fn grid_radius(grid: &RadiusGrid, i: usize) -> f64 {
    let t = i as f64 / (grid.points - 1) as f64;
    grid.r_min * (grid.r_max / grid.r_min).powf(t)
}

// Least-squares slope of log φ against r² over the last resolved knots.
fn gaussian_tail_slope(profile: &RadialProfile, r: &[f64], floor: f64) -> Option<f64> {
    let knots: Vec<(f64, f64)> = r
        .iter()
        .rev()
        .map(|&x| (x * x, profile.log_density(x)))
        .filter(|(_, y)| y.is_finite() && *y >= floor)
        .take(TAIL_FIT_KNOTS)
        .collect();
    if knots.len() < 3 {
        return None;
    }
    let n = knots.len() as f64;
    let mx = knots.iter().map(|k| k.0).sum::<f64>() / n;
    let my = knots.iter().map(|k| k.1).sum::<f64>() / n;
    let sxy: f64 = knots.iter().map(|k| (k.0 - mx) * (k.1 - my)).sum();
    let sxx: f64 = knots.iter().map(|k| (k.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

pub fn estimate_c(profile: &RadialProfile) -> Result<RegularityEstimate> {
    estimate_c_with(profile, DEFAULT_LEVELS)
}

/// Grid supremum on `BASE_POINTS · 2^levels` nested log-spaced radii.
pub fn estimate_c_with(profile: &RadialProfile, levels: usize) -> Result<RegularityEstimate> {
    let r_max = profile.r_max();
    let grid = RadiusGrid { r_min: r_max * 1e-6, r_max, points: BASE_POINTS * (1 << levels) + 1 };
    let mut radii: Vec<f64> = (0..grid.points).map(|i| grid_radius(&grid, i)).collect();
    let knots = match profile.kind() {
        crate::radial::ProfileKind::Tabulated { r } => Some(r.to_vec()),
        _ => None,
    };
    if let Some(k) = &knots {
        radii.extend(k.iter().copied().filter(|&x| x > 0.0));
    }
    let mean = profile.mean_norm();
    let floor = profile.log_density_max() - RESOLVED_LOG_RANGE;
    let values: Vec<Result<Option<f64>>> = radii
        .par_iter()
        .map(|&r| match profile.score(r) {
            _ if !(profile.log_density(r) >= floor) => Ok(None),
            Ok(psi) => Ok(Some(psi.abs() / (r + mean))),
            Err(Error::VanishingDensity { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();
    let mut grid_sup = 0.0f64;
    let mut attained = None;
    let mut excluded_from: Option<f64> = None;
    for (&r, v) in radii.iter().zip(values) {
        match v? {
            Some(ratio) if ratio > grid_sup => {
                grid_sup = ratio;
                attained = Some(r);
            }
            Some(_) => {}
            None => excluded_from = Some(excluded_from.map_or(r, |e: f64| e.min(r))),
        }
    }
    let (tail_limit, analytic_bound) = if let Some(spec) = profile.mixture_spec() {
        (Some(1.0 / spec.max_variance()), Some(1.0 / spec.min_variance()))
    } else if profile.has_trailing_zeros() {
        (None, None)
    } else {
        let slope = knots.as_deref().and_then(|k| gaussian_tail_slope(profile, k, floor));
        (slope.map(|b| (-2.0 * b).max(0.0)), None)
    };
    let mut c_hat = grid_sup;
    if let Some(t) = tail_limit {
        if t > c_hat {
            c_hat = t;
            attained = None;
        }
    }
    Ok(RegularityEstimate {
        c_hat,
        grid_sup,
        attained_radius: attained,
        tail_limit,
        analytic_bound,
        grid,
        excluded_from,
        note: GRID_NOTE.to_string(),
    })
}

fn c_hat_of(conv: &ConvolutionResult) -> Result<Estimate> {
    conv.functional(|p| Ok(Estimate::exact(estimate_c(p)?.c_hat)))
}

/// `Y = X + N(0, σ²I)` is `4/σ²`-regular.
pub fn verify_mollification(base: &RadialProfile, sigma2: f64) -> Result<BoundCertificate> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise variance must be positive, got {sigma2}")));
    }
    let y = mollify(base, sigma2)?;
    let c = c_hat_of(&y)?;
    let bound = 4.0 / sigma2;
    Ok(BoundCertificate::new(CertificateName::Mollification, Estimate::exact(bound), c, bound, base.content_hash())
        .with_detail("sigma2", sigma2))
}

/// For `c`-regular `X`, `X_t` is `5c·e^{2t}`-, `(5c + 4)`- and
/// `4/(1 - e^{-2t})`-regular. One certificate per `t`, against the
/// smallest applicable bound.
pub fn verify_ou_regularity(profile: &RadialProfile, c: f64, t_grid: &[f64]) -> Result<Vec<BoundCertificate>> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("regularity constant must be positive, got {c}")));
    }
    t_grid
        .iter()
        .map(|&t| {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::InvalidArgument(format!("t must be nonnegative, got {t}")));
            }
            let xt = ou_evolve(profile, t)?;
            let chat = c_hat_of(&xt)?;
            let exp_form = 5.0 * c * (2.0 * t).exp();
            let affine = 5.0 * c + 4.0;
            let noise = if t > 0.0 { 4.0 / (-(-2.0 * t).exp_m1()) } else { f64::INFINITY };
            let bound = exp_form.min(affine).min(noise);
            let mut cert = BoundCertificate::new(
                CertificateName::OuRegularity,
                Estimate::exact(bound),
                chat,
                bound,
                profile.content_hash(),
            )
            .with_c(c)
            .with_detail("t", t)
            .with_detail("bound_exp", exp_form)
            .with_detail("bound_affine", affine);
            if noise.is_finite() {
                cert = cert.with_detail("bound_noise", noise);
            }
            Ok(cert)
        })
        .collect()
}

/// Law of a nonnegative radius `R₀` with `E R₀² = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RadiusLaw {
    Discrete {
        atoms: Vec<f64>,
        weights: Vec<f64>,
    },
    /// Piecewise-linear distribution function; `F[0] > 0` is an atom at `r[0]`.
    PiecewiseCdf {
        r: Vec<f64>,
        #[serde(rename = "F")]
        f: Vec<f64>,
    },
    /// `|G|/√d` in the ambient dimension.
    ScaledChi,
}

const R0_TOL: f64 = 1e-9;
const CDF_PANEL_ORDER: usize = 16;

impl RadiusLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            RadiusLaw::Discrete { atoms, weights } => {
                if atoms.is_empty() || atoms.len() != weights.len() {
                    return Err(Error::InvalidArgument("atoms and weights must be nonempty and of equal length".into()));
                }
                if atoms.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
                    return Err(Error::InvalidArgument("atoms must be nonnegative".into()));
                }
                if weights.iter().any(|w| !(*w >= 0.0)) {
                    return Err(Error::InvalidArgument("weights must be nonnegative".into()));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidArgument(format!("weights sum to {total}, expected 1")));
                }
            }
            RadiusLaw::PiecewiseCdf { r, f } => {
                if r.len() < 2 || r.len() != f.len() {
                    return Err(Error::InvalidArgument("piecewise cdf needs at least two matching knots".into()));
                }
                if r[0] < 0.0 || r.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidArgument("cdf radii must be nonnegative and increasing".into()));
                }
                if f[0] < 0.0 || f.windows(2).any(|w| w[1] < w[0]) || (f[f.len() - 1] - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidArgument("cdf values must be nondecreasing from ≥0 to 1".into()));
                }
            }
            RadiusLaw::ScaledChi => {}
        }
        let m2 = self.second_moment();
        if (m2 - 1.0).abs() > R0_TOL {
            return Err(Error::InvalidR0 { second_moment: m2 });
        }
        Ok(())
    }

    /// `E R₀²` (exact for all supported laws).
    pub fn second_moment(&self) -> f64 {
        match self {
            RadiusLaw::Discrete { atoms, weights } => atoms.iter().zip(weights).map(|(a, w)| w * a * a).sum(),
            RadiusLaw::PiecewiseCdf { r, f } => {
                let atom = f[0] * r[0] * r[0];
                atom + r
                    .windows(2)
                    .zip(f.windows(2))
                    .map(|(x, p)| (p[1] - p[0]) * (x[0] * x[0] + x[0] * x[1] + x[1] * x[1]) / 3.0)
                    .sum::<f64>()
            }
            RadiusLaw::ScaledChi => 1.0,
        }
    }

    /// Right-continuous distribution function.
    pub fn cdf(&self, x: f64, dim: usize) -> f64 {
        match self {
            RadiusLaw::Discrete { atoms, weights } => {
                atoms.iter().zip(weights).filter(|(a, _)| **a <= x).map(|(_, w)| w).sum()
            }
            RadiusLaw::PiecewiseCdf { r, f } => {
                if x < r[0] {
                    return 0.0;
                }
                let n = r.len();
                if x >= r[n - 1] {
                    return 1.0;
                }
                let i = r.partition_point(|&v| v <= x) - 1;
                f[i] + (f[i + 1] - f[i]) * (x - r[i]) / (r[i + 1] - r[i])
            }
            RadiusLaw::ScaledChi => scaled_chi_cdf(dim, x),
        }
    }

    /// Radii and masses representing the law, exact for atoms and
    /// Gauss–Legendre on each linear piece.
    fn components(&self) -> Vec<(f64, f64)> {
        match self {
            RadiusLaw::Discrete { atoms, weights } => {
                atoms.iter().zip(weights).filter(|(_, w)| **w > 0.0).map(|(a, w)| (*a, *w)).collect()
            }
            RadiusLaw::PiecewiseCdf { r, f } => {
                let gl = GaussRule::legendre(CDF_PANEL_ORDER);
                let mut out = Vec::new();
                if f[0] > 0.0 {
                    out.push((r[0], f[0]));
                }
                for i in 0..r.len() - 1 {
                    let mass = f[i + 1] - f[i];
                    if mass <= 0.0 {
                        continue;
                    }
                    let half = 0.5 * (r[i + 1] - r[i]);
                    let mid = 0.5 * (r[i + 1] + r[i]);
                    for (x, w) in gl.nodes.iter().zip(&gl.weights) {
                        out.push((mid + half * x, 0.5 * mass * w));
                    }
                }
                out
            }
            RadiusLaw::ScaledChi => Vec::new(),
        }
    }

    fn max_radius(&self) -> f64 {
        match self {
            RadiusLaw::Discrete { atoms, .. } => atoms.iter().copied().fold(0.0, f64::max),
            RadiusLaw::PiecewiseCdf { r, .. } => r[r.len() - 1],
            RadiusLaw::ScaledChi => 0.0,
        }
    }
}

/// Output of [`construct_approx_r`].
#[derive(Debug, Clone)]
pub struct ApproxR {
    pub profile: RadialProfile,
    /// CDF sandwich on the evaluation grid, phrased as worst slack ≥ 0.
    pub sandwich: BoundCertificate,
    /// `c_hat ≤ 4/ε`.
    pub regularity: BoundCertificate,
}

pub const SANDWICH_POINTS: usize = 200;

struct SphereKernel {
    dim: usize,
    eps: f64,
    rules: Vec<std::sync::Arc<GaussRule>>,
    exponent: f64,
}

impl SphereKernel {
    fn new(dim: usize, eps: f64) -> Self {
        let exponent = 0.5 * (dim as f64 - 3.0);
        let mut rules = Vec::new();
        let mut n = 16;
        while n <= 2048 {
            rules.push(GaussRule::jacobi(n, exponent, exponent));
            n *= 2;
        }
        SphereKernel { dim, eps, rules, exponent }
    }

    fn rule(&self, kappa: f64) -> Result<(&GaussRule, &GaussRule)> {
        let need = required_angular_order(kappa, self.exponent);
        let idx = self
            .rules
            .iter()
            .position(|r| r.len() as f64 >= need)
            .ok_or(Error::ResolutionFailure { estimate: need, budget: 2048.0 })?;
        let fine = &self.rules[(idx + 1).min(self.rules.len() - 1)];
        Ok((fine, &self.rules[idx]))
    }

    /// `ln E_u[e^{κ(u-1)}]` under the normalized angular weight, fine and coarse.
    fn log_angular(&self, kappa: f64) -> Result<(f64, f64)> {
        if kappa == 0.0 {
            return Ok((0.0, 0.0));
        }
        let (fine, coarse) = self.rule(kappa)?;
        let mean = |g: &GaussRule| {
            let num: f64 = g.nodes.iter().zip(&g.weights).map(|(u, w)| w * (kappa * (u - 1.0)).exp()).sum();
            let den: f64 = g.weights.iter().sum();
            (num / den).ln()
        };
        Ok((mean(fine), mean(coarse)))
    }

    /// Log density at radius `rho` of `sU + √ε G` in `R^d`.
    fn log_value(&self, rho: f64, s: f64) -> Result<(f64, f64)> {
        let eps = self.eps;
        let base = -(rho - s).powi(2) / (2.0 * eps) - 0.5 * self.dim as f64 * (2.0 * std::f64::consts::PI * eps).ln();
        let (a, b) = self.log_angular(rho * s / eps)?;
        Ok((base + a, base + b))
    }
}

fn sandwich_check(
    law: &RadiusLaw,
    dim: usize,
    eps: f64,
    t: f64,
    cdf: impl Fn(f64) -> (f64, f64),
    r_top: f64,
) -> (Estimate, f64, f64) {
    let shift = ((t + 1.0) * eps).sqrt();
    let scale = (1.0 - eps).sqrt();
    let slack = (-(dim as f64) * t * t / 8.0).exp();
    let mut worst = f64::INFINITY;
    let mut worst_r = 0.0;
    let mut err = 0.0f64;
    for i in 0..SANDWICH_POINTS {
        let r = r_top * i as f64 / (SANDWICH_POINTS - 1) as f64;
        let (f, e) = cdf(r);
        let lower = law.cdf((r - shift) / scale, dim) - slack;
        let upper = law.cdf((r + shift) / scale, dim) + slack;
        let gap = (f - lower).min(upper - f);
        err = err.max(e);
        if gap < worst {
            worst = gap;
            worst_r = r;
        }
    }
    (Estimate::new(worst, err), worst_r, slack)
}

fn build_profile(law: &RadiusLaw, dim: usize, eps: f64, spacing: f64) -> Result<(RadialProfile, f64)> {
    let a = ((1.0 - eps) * dim as f64).sqrt();
    let comps = law.components();
    let top = a * law.max_radius() + eps.sqrt() * ((dim as f64).sqrt() + 10.0);
    let n = (top / spacing).ceil() as usize;
    let kernel = SphereKernel::new(dim, eps);
    let rho: Vec<f64> = (0..=n).map(|i| top * i as f64 / n as f64).collect();
    let logs: Vec<Result<(f64, f64)>> = rho
        .par_iter()
        .map(|&x| {
            let mut fine = Vec::with_capacity(comps.len());
            let mut coarse = Vec::with_capacity(comps.len());
            for &(s, w) in &comps {
                let (lf, lc) = kernel.log_value(x, a * s)?;
                fine.push(w.ln() + lf);
                coarse.push(w.ln() + lc);
            }
            Ok((log_sum_exp(fine), log_sum_exp(coarse)))
        })
        .collect();
    let mut phi = Vec::with_capacity(rho.len());
    let mut angular_err = 0.0f64;
    for l in logs {
        let (lf, lc) = l?;
        angular_err = angular_err.max((lf - lc).abs());
        phi.push(if lf.exp() > DENSITY_FLOOR { lf.exp() } else { DENSITY_FLOOR });
    }
    let profile = RadialProfile::tabulated(dim, rho, phi)?.normalize()?;
    Ok((profile, angular_err))
}

/// Builds `X = √(1-ε) √d R₀ U + √ε G` and checks
///
/// `F_{R₀}((r - √((t+1)ε))/√(1-ε)) - e^{-dt²/8} ≤ F_R(r) ≤ F_{R₀}((r + √((t+1)ε))/√(1-ε)) + e^{-dt²/8}`
///
/// for `R = |X|/√d` on a uniform grid, together with `c_hat ≤ 4/ε`.
pub fn construct_approx_r(law: &RadiusLaw, dim: usize, eps: f64, t: f64) -> Result<ApproxR> {
    if dim < 2 {
        return Err(Error::InvalidArgument(format!("dimension must be at least 2, got {dim}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1), got {eps}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    law.validate()?;
    let sd = (dim as f64).sqrt();
    let (profile, coarse, angular_err) = match law {
        RadiusLaw::ScaledChi => {
            let g = RadialProfile::gaussian(dim, 1.0)?;
            (g.clone(), g, 0.0)
        }
        _ => {
            let h = eps.sqrt() / 24.0;
            let (fine, ae) = build_profile(law, dim, eps, h)?;
            let (coarse, _) = build_profile(law, dim, eps, 2.0 * h)?;
            (fine, coarse, ae)
        }
    };
    let hash = profile.content_hash();
    let mass_err = profile.moments().mass.err;
    let cdf = |r: f64| {
        let f = profile.radial_cdf(sd * r);
        let g = coarse.radial_cdf(sd * r);
        (f, (f - g).abs() + mass_err)
    };
    let r_top = profile.r_max() / sd;
    let (worst, worst_r, slack) = sandwich_check(law, dim, eps, t, cdf, r_top);
    let sandwich = BoundCertificate::new(CertificateName::ApproxR, worst, Estimate::exact(0.0), slack, hash.clone())
        .with_epsilon(eps)
        .with_detail("t", t)
        .with_detail("worst_r", worst_r)
        .with_detail("second_moment", profile.second_moment())
        .with_detail("angular_error", angular_err);
    let fine_c = estimate_c(&profile)?.c_hat;
    let coarse_c = estimate_c(&coarse)?.c_hat;
    let bound = 4.0 / eps;
    let regularity = BoundCertificate::new(
        CertificateName::Mollification,
        Estimate::exact(bound),
        Estimate::new(fine_c, (fine_c - coarse_c).abs()),
        bound,
        hash,
    )
    .with_detail("sigma2", eps);
    Ok(ApproxR { profile, sandwich, regularity })
}
