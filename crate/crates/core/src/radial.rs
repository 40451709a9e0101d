//! Radially symmetric densities `f(x) = φ(|x|)` on `R^d`.
//!
//! Two kinds are supported: centered Gaussian mixtures, evaluated in closed
//! form, and tabulated profiles, interpolated by a clamped cubic spline in
//! `log φ`. The interpolant is treated as the density itself; it is zero
//! beyond the last grid radius.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::quadrature::{graded_breaks, Estimate, GaussRule, QuadratureSettings, RadialNodes};
use crate::special::{invert_monotone, invert_tail, log_sphere_area, reg_upper_gamma, sphere_area};

/// Densities below this fraction of the profile maximum are treated as
/// vanishing when forming scores.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Normalization tolerance for tabulated profiles.
pub const NORM_TOL: f64 = 1e-10;

/// Tail mass allowed beyond `r_max` for analytic profiles.
pub const TAIL_TOL: f64 = 1e-12;

/// Relative budget for the extrapolated tail of a tabulated moment.
pub const MOMENT_TAIL_BUDGET: f64 = 1e-2;

/// Weights and variances of a centered isotropic Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureSpec {
    pub weights: Vec<f64>,
    pub variances: Vec<f64>,
}

impl GaussianMixtureSpec {
    /// Validates, sorts by variance and renormalizes the weights.
    pub fn new(weights: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != variances.len() {
            return Err(Error::InvalidProfile("weights and variances must be nonempty and of equal length".into()));
        }
        for (i, &p) in weights.iter().enumerate() {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidProfile(format!("weights[{i}] must be positive and finite, got {p}")));
            }
        }
        for (i, &s) in variances.iter().enumerate() {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidProfile(format!("variances[{i}] must be positive and finite, got {s}")));
            }
        }
        let mut pairs: Vec<(f64, f64)> = weights.into_iter().zip(variances).collect();
        pairs.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let total: f64 = pairs.iter().map(|p| p.0).sum();
        let weights = pairs.iter().map(|p| if total == 1.0 { p.0 } else { p.0 / total }).collect();
        let variances = pairs.iter().map(|p| p.1).collect();
        Ok(GaussianMixtureSpec { weights, variances })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn min_variance(&self) -> f64 {
        self.variances[0]
    }

    pub fn max_variance(&self) -> f64 {
        *self.variances.last().unwrap()
    }

    /// `Σ p_i σ_i²`, the per-coordinate variance.
    pub fn mean_variance(&self) -> f64 {
        self.weights.iter().zip(&self.variances).map(|(p, s)| p * s).sum()
    }

    /// Mixture of all pairwise sums: the law of `(X + X*)/√2`.
    pub fn rescaled_self_sum(&self) -> GaussianMixtureSpec {
        let n = self.len();
        let mut w = Vec::with_capacity(n * (n + 1) / 2);
        let mut v = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                let mult = if i == j { 1.0 } else { 2.0 };
                w.push(mult * self.weights[i] * self.weights[j]);
                v.push(0.5 * (self.variances[i] + self.variances[j]));
            }
        }
        merge_components(w, v)
    }

    /// Law of `e^{-t} X + (1 - e^{-2t})^{1/2} G`.
    pub fn ou_evolute(&self, t: f64) -> GaussianMixtureSpec {
        let a = (-2.0 * t).exp();
        GaussianMixtureSpec {
            weights: self.weights.clone(),
            variances: self.variances.iter().map(|s| a * s + (1.0 - a)).collect(),
        }
    }

    /// Law of `X + N(0, σ² I)`.
    pub fn mollified(&self, sigma2: f64) -> GaussianMixtureSpec {
        GaussianMixtureSpec {
            weights: self.weights.clone(),
            variances: self.variances.iter().map(|s| s + sigma2).collect(),
        }
    }
}

fn merge_components(w: Vec<f64>, v: Vec<f64>) -> GaussianMixtureSpec {
    let mut pairs: Vec<(f64, f64)> = w.into_iter().zip(v).collect();
    pairs.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let mut weights: Vec<f64> = Vec::new();
    let mut variances: Vec<f64> = Vec::new();
    for (p, s) in pairs {
        match variances.last() {
            Some(&last) if (last - s).abs() <= 1e-15 * s => *weights.last_mut().unwrap() += p,
            _ => {
                weights.push(p);
                variances.push(s);
            }
        }
    }
    GaussianMixtureSpec { weights, variances }
}

/// JSON profile literal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProfileLiteral {
    GaussianMixture { d: usize, weights: Vec<f64>, variances: Vec<f64> },
    Tabulated { d: usize, r: Vec<f64>, phi: Vec<f64> },
}

impl ProfileLiteral {
    pub fn dim(&self) -> usize {
        match self {
            ProfileLiteral::GaussianMixture { d, .. } | ProfileLiteral::Tabulated { d, .. } => *d,
        }
    }
}

#[derive(Debug, Clone)]
struct MixtureEval {
    spec: GaussianMixtureSpec,
    log_coef: Vec<f64>,
    inv_var: Vec<f64>,
}

impl MixtureEval {
    fn new(spec: GaussianMixtureSpec, dim: usize) -> Self {
        let half_d = 0.5 * dim as f64;
        let log_coef = spec
            .weights
            .iter()
            .zip(&spec.variances)
            .map(|(p, s)| p.ln() - half_d * (2.0 * std::f64::consts::PI * s).ln())
            .collect();
        let inv_var = spec.variances.iter().map(|s| 1.0 / s).collect();
        MixtureEval { spec, log_coef, inv_var }
    }

    #[inline]
    fn log_density(&self, r: f64) -> f64 {
        self.log_density_sq(r * r)
    }

    #[inline]
    fn log_density_sq(&self, r2: f64) -> f64 {
        if self.log_coef.len() == 1 {
            return self.log_coef[0] - 0.5 * r2 * self.inv_var[0];
        }
        let mut m = f64::NEG_INFINITY;
        for (c, iv) in self.log_coef.iter().zip(&self.inv_var) {
            m = m.max(c - 0.5 * r2 * iv);
        }
        let mut s = 0.0;
        for (c, iv) in self.log_coef.iter().zip(&self.inv_var) {
            s += (c - 0.5 * r2 * iv - m).exp();
        }
        m + s.ln()
    }

    #[inline]
    fn score(&self, r: f64) -> f64 {
        let r2 = r * r;
        if self.log_coef.len() == 1 {
            return -r * self.inv_var[0];
        }
        let mut m = f64::NEG_INFINITY;
        for (c, iv) in self.log_coef.iter().zip(&self.inv_var) {
            m = m.max(c - 0.5 * r2 * iv);
        }
        let (mut num, mut den) = (0.0, 0.0);
        for (c, iv) in self.log_coef.iter().zip(&self.inv_var) {
            let e = (c - 0.5 * r2 * iv - m).exp();
            num += e * iv;
            den += e;
        }
        -r * num / den
    }
}

/// Clamped cubic spline of `log φ` on the positive part of a grid, with
/// linear-in-`φ` interpolation on the intervals that reach trailing zeros.
#[derive(Debug, Clone)]
struct TabulatedEval {
    r: Vec<f64>,
    /// Raw values as supplied (before normalization).
    phi: Vec<f64>,
    /// `log φ` at the positive knots.
    y: Vec<f64>,
    /// Spline second derivatives at the positive knots.
    m: Vec<f64>,
    /// Index of the last positive value.
    last_pos: usize,
    /// Subtracted from the raw log density (normalization).
    log_offset: f64,
    log_max: f64,
}

impl TabulatedEval {
    fn new(r: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        if r.len() < 3 || r.len() != phi.len() {
            return Err(Error::InvalidProfile("tabulated profile needs at least 3 equal-length r/phi points".into()));
        }
        if r[0] != 0.0 {
            return Err(Error::InvalidProfile("tabulated grid must start at r = 0".into()));
        }
        for i in 1..r.len() {
            if !(r[i] > r[i - 1]) || !r[i].is_finite() {
                return Err(Error::InvalidProfile(format!("grid must be strictly increasing at index {i}")));
            }
        }
        for (index, &value) in phi.iter().enumerate() {
            if value < 0.0 {
                return Err(Error::NegativeDensity { index, value });
            }
            if !value.is_finite() {
                return Err(Error::InvalidProfile(format!("phi[{index}] is not finite")));
            }
        }
        let last_pos = match phi.iter().rposition(|&v| v > 0.0) {
            Some(i) => i,
            None => return Err(Error::ZeroMass),
        };
        if phi[..=last_pos].contains(&0.0) {
            return Err(Error::InvalidProfile("zeros are only supported as a trailing block".into()));
        }
        if last_pos < 2 {
            return Err(Error::InvalidProfile("need at least 3 positive values".into()));
        }
        let y: Vec<f64> = phi[..=last_pos].iter().map(|v| v.ln()).collect();
        let knots = &r[..=last_pos];
        let end_slope = {
            let n = knots.len() - 1;
            let (x0, x1, x2) = (knots[n - 2], knots[n - 1], knots[n]);
            let (y0, y1, y2) = (y[n - 2], y[n - 1], y[n]);
            // derivative of the interpolating quadratic at x2
            let h1 = x1 - x0;
            let h2 = x2 - x1;
            y0 * h2 / (h1 * (h1 + h2)) - y1 * (h1 + h2) / (h1 * h2) + y2 * (2.0 * h2 + h1) / (h2 * (h1 + h2))
        };
        let m = clamped_spline(knots, &y, 0.0, end_slope);
        let log_max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(TabulatedEval { r, phi, y, m, last_pos, log_offset: 0.0, log_max })
    }

    /// Support radius: last positive knot, or the first trailing zero.
    fn support(&self) -> f64 {
        if self.last_pos + 1 < self.r.len() {
            self.r[self.last_pos + 1]
        } else {
            self.r[self.last_pos]
        }
    }

    #[inline]
    fn locate(&self, r: f64) -> usize {
        let k = self.r.partition_point(|&x| x <= r);
        k.saturating_sub(1).min(self.r.len() - 2)
    }

    /// Raw (un-offset) log density and its derivative.
    #[inline]
    fn raw_log_and_slope(&self, r: f64) -> (f64, f64) {
        if r < 0.0 || r > self.support() {
            return (f64::NEG_INFINITY, f64::NAN);
        }
        let i = self.locate(r);
        if i < self.last_pos {
            let h = self.r[i + 1] - self.r[i];
            let b = (r - self.r[i]) / h;
            let a = 1.0 - b;
            let (mi, mj) = (self.m[i], self.m[i + 1]);
            let (yi, yj) = (self.y[i], self.y[i + 1]);
            let val = a * yi + b * yj + ((a * a * a - a) * mi + (b * b * b - b) * mj) * h * h / 6.0;
            let slope = (yj - yi) / h - (3.0 * a * a - 1.0) / 6.0 * h * mi + (3.0 * b * b - 1.0) / 6.0 * h * mj;
            (val, slope)
        } else {
            // linear in φ towards the trailing zero
            let h = self.r[i + 1] - self.r[i];
            let (pi, pj) = (self.phi[i], self.phi[i + 1]);
            let b = (r - self.r[i]) / h;
            let v = pi + b * (pj - pi);
            if v <= 0.0 {
                (f64::NEG_INFINITY, f64::NAN)
            } else {
                (v.ln(), (pj - pi) / (h * v))
            }
        }
    }

    fn log_density(&self, r: f64) -> f64 {
        self.raw_log_and_slope(r).0 - self.log_offset
    }

    fn breaks(&self) -> Vec<f64> {
        let end = (self.last_pos + 1).min(self.r.len() - 1);
        self.r[..=end].to_vec()
    }
}

fn clamped_spline(x: &[f64], y: &[f64], s0: f64, sn: f64) -> Vec<f64> {
    let n = x.len();
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let h0 = x[1] - x[0];
    diag[0] = h0 / 3.0;
    sup[0] = h0 / 6.0;
    rhs[0] = (y[1] - y[0]) / h0 - s0;
    for i in 1..n - 1 {
        let hl = x[i] - x[i - 1];
        let hr = x[i + 1] - x[i];
        sub[i] = hl / 6.0;
        diag[i] = (hl + hr) / 3.0;
        sup[i] = hr / 6.0;
        rhs[i] = (y[i + 1] - y[i]) / hr - (y[i] - y[i - 1]) / hl;
    }
    let hn = x[n - 1] - x[n - 2];
    sub[n - 1] = hn / 6.0;
    diag[n - 1] = hn / 3.0;
    rhs[n - 1] = sn - (y[n - 1] - y[n - 2]) / hn;
    // Thomas algorithm
    for i in 1..n {
        let w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    let mut m = vec![0.0; n];
    m[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        m[i] = (rhs[i] - sup[i] * m[i + 1]) / diag[i];
    }
    m
}

#[derive(Debug, Clone)]
enum KindEval {
    Mixture(MixtureEval),
    Tabulated(TabulatedEval),
}

/// Which representation a profile uses.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileKind<'a> {
    Analytic(&'a GaussianMixtureSpec),
    Tabulated { r: &'a [f64] },
}

/// Cached scalar summaries of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileMoments {
    pub mass: Estimate,
    /// `E|X|`
    pub mean_norm: f64,
    /// `E|X|²`
    pub second_moment: Estimate,
    /// Mass beyond `r_max` (closed form for mixtures, zero for tabulated).
    pub tail_mass: f64,
}

#[derive(Debug)]
struct Nodes {
    fine: RadialNodes,
    coarse: RadialNodes,
    breaks: Vec<f64>,
    /// Cumulative fine-rule mass at each breakpoint.
    cumulative: Vec<f64>,
}

/// A radially symmetric density on `R^d`.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    dim: usize,
    eval: KindEval,
    r_max: f64,
    settings: QuadratureSettings,
    nodes: Arc<Nodes>,
    moments: ProfileMoments,
}

impl RadialProfile {
    /// Centered Gaussian `N(0, σ² I)`.
    pub fn gaussian(dim: usize, variance: f64) -> Result<Self> {
        Self::mixture(dim, vec![1.0], vec![variance])
    }

    pub fn mixture(dim: usize, weights: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        Self::from_spec(dim, GaussianMixtureSpec::new(weights, variances)?, QuadratureSettings::default())
    }

    pub fn from_spec(dim: usize, spec: GaussianMixtureSpec, settings: QuadratureSettings) -> Result<Self> {
        check_dim(dim)?;
        let r_max = mixture_r_max(dim, &spec);
        let tail_mass: f64 = spec
            .weights
            .iter()
            .zip(&spec.variances)
            .map(|(p, s)| p * reg_upper_gamma(0.5 * dim as f64, r_max * r_max / (2.0 * s)))
            .sum();
        let h = settings.panel_width * spec.min_variance().sqrt();
        let breaks = graded_breaks(r_max, h);
        let eval = KindEval::Mixture(MixtureEval::new(spec, dim));
        Ok(Self::assemble(dim, eval, r_max, settings, breaks, tail_mass))
    }

    /// Tabulated profile from raw (possibly unnormalized) values.
    pub fn tabulated(dim: usize, r: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        Self::tabulated_with(dim, r, phi, QuadratureSettings::default())
    }

    pub fn tabulated_with(dim: usize, r: Vec<f64>, phi: Vec<f64>, settings: QuadratureSettings) -> Result<Self> {
        check_dim(dim)?;
        let tab = TabulatedEval::new(r, phi)?;
        let breaks = tab.breaks();
        let r_max = tab.support();
        Ok(Self::assemble(dim, KindEval::Tabulated(tab), r_max, settings, breaks, 0.0))
    }

    /// Builds a profile from a literal and normalizes it.
    pub fn from_literal(lit: &ProfileLiteral, settings: QuadratureSettings) -> Result<Self> {
        match lit {
            ProfileLiteral::GaussianMixture { d, weights, variances } => {
                Self::from_spec(*d, GaussianMixtureSpec::new(weights.clone(), variances.clone())?, settings)
            }
            ProfileLiteral::Tabulated { d, r, phi } => {
                Self::tabulated_with(*d, r.clone(), phi.clone(), settings)?.normalize()
            }
        }
    }

    pub fn to_literal(&self) -> ProfileLiteral {
        match &self.eval {
            KindEval::Mixture(m) => ProfileLiteral::GaussianMixture {
                d: self.dim,
                weights: m.spec.weights.clone(),
                variances: m.spec.variances.clone(),
            },
            KindEval::Tabulated(t) => ProfileLiteral::Tabulated {
                d: self.dim,
                r: t.r.clone(),
                phi: t.phi.iter().map(|&v| if v > 0.0 { (v.ln() - t.log_offset).exp() } else { 0.0 }).collect(),
            },
        }
    }

    fn assemble(
        dim: usize,
        eval: KindEval,
        r_max: f64,
        settings: QuadratureSettings,
        breaks: Vec<f64>,
        tail_mass: f64,
    ) -> Self {
        let (fine_order, coarse_order) = match eval {
            KindEval::Mixture(_) => (settings.radial_order, settings.radial_order_coarse),
            KindEval::Tabulated(_) => (settings.tabulated_order, settings.tabulated_order_coarse),
        };
        let fine = RadialNodes::composite(dim, &breaks, fine_order);
        let coarse = RadialNodes::composite(dim, &breaks, coarse_order);
        let placeholder = ProfileMoments {
            mass: Estimate::exact(1.0),
            mean_norm: 0.0,
            second_moment: Estimate::exact(0.0),
            tail_mass,
        };
        let mut profile = RadialProfile {
            dim,
            eval,
            r_max,
            settings,
            nodes: Arc::new(Nodes { fine, coarse, breaks, cumulative: Vec::new() }),
            moments: placeholder,
        };
        profile.refresh_cache();
        profile
    }

    fn refresh_cache(&mut self) {
        let mass = self.expectation_raw(|_| 1.0);
        let mass_corr = if mass.value > 0.0 { mass.value } else { 1.0 };
        let mean = self.expectation_raw(|r| r).value / mass_corr;
        let second = self.expectation_raw(|r| r * r);
        let second = Estimate::new(second.value / mass_corr, second.err / mass_corr);
        // cumulative masses per panel for the distribution function
        let nodes = &self.nodes;
        let per_panel = self.settings_order();
        let mut cumulative = Vec::with_capacity(nodes.breaks.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for chunk in 0..nodes.breaks.len() - 1 {
            for k in chunk * per_panel..(chunk + 1) * per_panel {
                acc += nodes.fine.w[k] * self.density(nodes.fine.r[k]);
            }
            cumulative.push(acc);
        }
        let nodes = Nodes {
            fine: nodes.fine.clone(),
            coarse: nodes.coarse.clone(),
            breaks: nodes.breaks.clone(),
            cumulative,
        };
        self.nodes = Arc::new(nodes);
        self.moments = ProfileMoments { mass, mean_norm: mean, second_moment: second, tail_mass: self.moments.tail_mass };
    }

    fn settings_order(&self) -> usize {
        match self.eval {
            KindEval::Mixture(_) => self.settings.radial_order,
            KindEval::Tabulated(_) => self.settings.tabulated_order,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn settings(&self) -> &QuadratureSettings {
        &self.settings
    }

    pub fn with_settings(&self, settings: QuadratureSettings) -> Result<Self> {
        match &self.eval {
            KindEval::Mixture(m) => Self::from_spec(self.dim, m.spec.clone(), settings),
            KindEval::Tabulated(t) => {
                let mut p = Self::tabulated_with(self.dim, t.r.clone(), t.phi.clone(), settings)?;
                if let KindEval::Tabulated(tt) = &mut p.eval {
                    tt.log_offset = t.log_offset;
                }
                p.refresh_cache();
                Ok(p)
            }
        }
    }

    pub fn kind(&self) -> ProfileKind<'_> {
        match &self.eval {
            KindEval::Mixture(m) => ProfileKind::Analytic(&m.spec),
            KindEval::Tabulated(t) => ProfileKind::Tabulated { r: &t.r },
        }
    }

    pub fn mixture_spec(&self) -> Option<&GaussianMixtureSpec> {
        match &self.eval {
            KindEval::Mixture(m) => Some(&m.spec),
            KindEval::Tabulated(_) => None,
        }
    }

    /// True when the tabulated interpolant drops linearly to zero at the
    /// end of its support (`ψ` is unbounded there).
    pub fn has_trailing_zeros(&self) -> bool {
        match &self.eval {
            KindEval::Mixture(_) => false,
            KindEval::Tabulated(t) => t.last_pos + 1 < t.r.len(),
        }
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self.eval, KindEval::Mixture(_))
    }

    pub fn moments(&self) -> &ProfileMoments {
        &self.moments
    }

    pub fn mass(&self) -> f64 {
        self.moments.mass.value
    }

    /// `E|X|`.
    pub fn mean_norm(&self) -> f64 {
        self.moments.mean_norm
    }

    /// `E|X|²`.
    pub fn second_moment(&self) -> f64 {
        self.moments.second_moment.value
    }

    pub fn fine_nodes(&self) -> &RadialNodes {
        &self.nodes.fine
    }

    pub fn coarse_nodes(&self) -> &RadialNodes {
        &self.nodes.coarse
    }

    pub fn breaks(&self) -> &[f64] {
        &self.nodes.breaks
    }

    #[inline]
    pub fn log_density(&self, r: f64) -> f64 {
        match &self.eval {
            KindEval::Mixture(m) => m.log_density(r),
            KindEval::Tabulated(t) => t.log_density(r),
        }
    }

    #[inline]
    pub fn density(&self, r: f64) -> f64 {
        self.log_density(r).exp()
    }

    /// `log φ(√r2)`, avoiding the square root for mixtures.
    #[inline]
    pub fn log_density_sq(&self, r2: f64) -> f64 {
        match &self.eval {
            KindEval::Mixture(m) => m.log_density_sq(r2),
            KindEval::Tabulated(t) => t.log_density(r2.max(0.0).sqrt()),
        }
    }

    /// Largest value of `log φ` (attained at the origin for mixtures).
    pub fn log_density_max(&self) -> f64 {
        match &self.eval {
            KindEval::Mixture(m) => m.log_density(0.0),
            KindEval::Tabulated(t) => t.log_max - t.log_offset,
        }
    }

    /// Radial score `ψ(r) = φ'(r) / φ(r)`.
    #[inline]
    pub fn score(&self, r: f64) -> Result<f64> {
        match &self.eval {
            KindEval::Mixture(m) => Ok(m.score(r)),
            KindEval::Tabulated(t) => {
                let (lv, slope) = t.raw_log_and_slope(r);
                if lv - t.log_max < DENSITY_FLOOR.ln() || !slope.is_finite() {
                    Err(Error::VanishingDensity { r })
                } else {
                    Ok(slope)
                }
            }
        }
    }

    /// `E g(|X|)` at fine and coarse resolution, without renormalization.
    pub fn expectation_raw<G: Fn(f64) -> f64>(&self, g: G) -> Estimate {
        let p = self.settings.precision;
        let fine = crate::quadrature::sum_with(
            p,
            self.nodes.fine.r.iter().zip(&self.nodes.fine.w).map(|(&r, &w)| w * self.density(r) * g(r)),
        );
        let coarse = crate::quadrature::sum_with(
            p,
            self.nodes.coarse.r.iter().zip(&self.nodes.coarse.w).map(|(&r, &w)| w * self.density(r) * g(r)),
        );
        Estimate::from_pair(fine, coarse)
    }

    /// `E g(|X|)` divided by the quadrature mass.
    pub fn expectation<G: Fn(f64) -> f64>(&self, g: G) -> Estimate {
        let e = self.expectation_raw(g);
        let m = self.mass();
        Estimate::new(e.value / m, e.err / m)
    }

    /// Deterministic content hash (first 16 hex digits of SHA-256).
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_string(&self.to_literal()).expect("literal serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Profile of `t X`.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale factor must be positive, got {t}")));
        }
        match &self.eval {
            KindEval::Mixture(m) => {
                let spec = GaussianMixtureSpec {
                    weights: m.spec.weights.clone(),
                    variances: m.spec.variances.iter().map(|s| s * t * t).collect(),
                };
                Self::from_spec(self.dim, spec, self.settings)
            }
            KindEval::Tabulated(tab) => {
                let shift = self.dim as f64 * t.ln();
                let r: Vec<f64> = tab.r.iter().map(|x| x * t).collect();
                let phi: Vec<f64> = tab
                    .phi
                    .iter()
                    .map(|&v| if v > 0.0 { (v.ln() - tab.log_offset - shift).exp() } else { 0.0 })
                    .collect();
                Self::tabulated_with(self.dim, r, phi, self.settings)
            }
        }
    }

    /// Rescales so that `E|X|² = target`; returns the profile and the factor.
    pub fn with_second_moment(&self, target: f64) -> Result<(Self, f64)> {
        let t = (target / self.second_moment()).sqrt();
        if (t - 1.0).abs() < 1e-15 {
            return Ok((self.clone(), 1.0));
        }
        Ok((self.scaled(t)?, t))
    }

    /// Rescales so that `E|X|² = d`.
    pub fn standardized(&self) -> Result<(Self, f64)> {
        self.with_second_moment(self.dim as f64)
    }

    /// Radial distribution function `P(|X| ≤ r)`, normalized by the
    /// quadrature mass.
    pub fn radial_cdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let breaks = &self.nodes.breaks;
        let total = *self.nodes.cumulative.last().unwrap();
        if r >= *breaks.last().unwrap() {
            return 1.0;
        }
        let k = breaks.partition_point(|&b| b <= r) - 1;
        let partial = self.partial_mass(breaks[k], r);
        ((self.nodes.cumulative[k] + partial) / total).clamp(0.0, 1.0)
    }

    /// `P(|X| > r)`.
    pub fn radial_sf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 1.0;
        }
        let breaks = &self.nodes.breaks;
        let total = *self.nodes.cumulative.last().unwrap();
        if r >= *breaks.last().unwrap() {
            return 0.0;
        }
        let k = breaks.partition_point(|&b| b <= r) - 1;
        let partial = self.partial_mass(r, breaks[k + 1]);
        ((total - self.nodes.cumulative[k + 1] + partial) / total).clamp(0.0, 1.0)
    }

    /// Density of `|X|`.
    pub fn radial_pdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let total = *self.nodes.cumulative.last().unwrap();
        (log_sphere_area(self.dim - 1) + (self.dim as f64 - 1.0) * r.ln() + self.log_density(r)).exp() / total
    }

    fn partial_mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let rule = GaussRule::legendre(self.settings_order());
        let area = sphere_area(self.dim - 1);
        let d1 = self.dim as i32 - 1;
        area * rule.integrate_on(a, b, |s| s.powi(d1) * self.density(s))
    }

    /// Quantile of `|X|`.
    pub fn radial_quantile(&self, q: f64) -> Result<f64> {
        let guess = self.second_moment().sqrt().max(1e-12);
        let r = invert_monotone(q, |r| self.radial_cdf(r), |r| self.radial_sf(r), |r| self.radial_pdf(r), 0.0, guess)?;
        Ok(r.min(self.r_max))
    }

    /// Quantile of `|X|` at lower-tail probability `p`, or at upper-tail
    /// probability `p` when `upper` is set.
    pub fn radial_tail_quantile(&self, p: f64, upper: bool) -> Result<f64> {
        let guess = self.second_moment().sqrt().max(1e-12);
        let r = invert_tail(p, upper, |r| self.radial_cdf(r), |r| self.radial_sf(r), |r| self.radial_pdf(r), 0.0, guess)?;
        Ok(r.min(self.r_max))
    }

    /// Moment `E|X|^{k}` with the tail check for tabulated data.
    pub fn abs_moment(&self, order: f64) -> Result<Estimate> {
        let e = self.expectation(|r| r.powf(order));
        if let KindEval::Tabulated(t) = &self.eval {
            if let Some(tail) = tabulated_tail_estimate(self.dim, t, order) {
                let tail = tail / self.mass();
                if !(tail <= MOMENT_TAIL_BUDGET * e.value) {
                    return Err(Error::DivergentMoment { order, tail });
                }
            }
        }
        Ok(e)
    }
}

// Power-law extrapolation of the tabulated tail beyond the last knot.
// Returns None for compactly supported data.
fn tabulated_tail_estimate(dim: usize, t: &TabulatedEval, order: f64) -> Option<f64> {
    if t.last_pos + 1 < t.r.len() {
        return None;
    }
    let n = t.last_pos;
    let (r1, r2) = (t.r[n - 1], t.r[n]);
    let alpha = -(t.y[n] - t.y[n - 1]) / (r2.ln() - r1.ln());
    let excess = alpha - dim as f64 - order;
    if excess <= 0.0 {
        return Some(f64::INFINITY);
    }
    let phi_end = (t.y[n] - t.log_offset).exp();
    Some(sphere_area(dim - 1) * r2.powf(dim as f64 + order) * phi_end / excess)
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::InvalidProfile(format!("dimension must be at least 2, got {dim}")));
    }
    Ok(())
}

// Smallest radius where the 16th-moment-weighted tail falls below 1e-15,
// which also puts the plain tail mass far below TAIL_TOL.
fn mixture_r_max(dim: usize, spec: &GaussianMixtureSpec) -> f64 {
    let k = 8.0;
    let a = 0.5 * dim as f64 + k;
    let norm: f64 = spec.weights.iter().zip(&spec.variances).map(|(p, s)| p * s.powf(k)).sum();
    let tail = |r: f64| -> f64 {
        spec.weights
            .iter()
            .zip(&spec.variances)
            .map(|(p, s)| p * s.powf(k) * reg_upper_gamma(a, r * r / (2.0 * s)))
            .sum::<f64>()
            / norm
    };
    let mut lo = 0.0;
    let mut hi = spec.max_variance().sqrt() * (2.0 * a).sqrt().max(1.0);
    while tail(hi) > 1e-15 {
        lo = hi;
        hi *= 1.5;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if tail(mid) > 1e-15 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Returns a normalized copy. Mixtures are normalized by construction and
/// are returned unchanged.
pub fn normalize(profile: &RadialProfile) -> Result<RadialProfile> {
    profile.normalize()
}

impl RadialProfile {
    pub fn normalize(&self) -> Result<RadialProfile> {
        match &self.eval {
            KindEval::Mixture(_) => Ok(self.clone()),
            KindEval::Tabulated(t) => {
                let mass = self.mass();
                if !(mass > 1e-300) || !mass.is_finite() {
                    return Err(Error::ZeroMass);
                }
                let mut out = self.clone();
                if let KindEval::Tabulated(tt) = &mut out.eval {
                    tt.log_offset = t.log_offset + mass.ln();
                }
                out.refresh_cache();
                Ok(out)
            }
        }
    }
}

/// `‖|X|²‖_p = (E|X|^{2p})^{1/p}`.
pub fn moment_norm(profile: &RadialProfile, p: f64) -> Result<f64> {
    Ok(moment_norm_estimate(profile, p)?.value)
}

pub fn moment_norm_estimate(profile: &RadialProfile, p: f64) -> Result<Estimate> {
    if !(p >= 0.5) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("moment order p must be at least 1/2, got {p}")));
    }
    let m = profile.abs_moment(2.0 * p)?;
    let value = m.value.powf(1.0 / p);
    Ok(Estimate::new(value, value / p * m.err / m.value))
}

/// Radial score evaluator.
#[derive(Debug, Clone, Copy)]
pub struct RadialScore<'a> {
    profile: &'a RadialProfile,
}

impl RadialScore<'_> {
    /// `ψ(r)`; `VanishingDensity` below the density floor.
    pub fn eval(&self, r: f64) -> Result<f64> {
        self.profile.score(r)
    }
}

pub fn score_radial(profile: &RadialProfile) -> RadialScore<'_> {
    RadialScore { profile }
}

/// Inverse-CDF sampler for `|X|` backed by a quantile table with Hermite
/// interpolation; extreme tails fall back to exact inversion.
#[derive(Debug, Clone)]
pub struct RadiusSampler<'a> {
    profile: &'a RadialProfile,
    q: Vec<f64>,
    r: Vec<f64>,
    slope: Vec<f64>,
}

impl<'a> RadiusSampler<'a> {
    pub fn new(profile: &'a RadialProfile) -> Result<Self> {
        let n = 4096;
        let mut q = Vec::with_capacity(n + 1);
        let mut r = Vec::with_capacity(n + 1);
        let mut slope = Vec::with_capacity(n + 1);
        let lo = 1.0 / n as f64;
        for i in 0..=n {
            let qi = lo + (1.0 - 2.0 * lo) * i as f64 / n as f64;
            let ri = profile.radial_quantile(qi).map_err(|_| Error::SamplerFailure(format!("quantile at {qi}")))?;
            let pdf = profile.radial_pdf(ri);
            if !(pdf > 0.0) {
                return Err(Error::SamplerFailure(format!("zero radial density at quantile {qi}")));
            }
            q.push(qi);
            r.push(ri);
            slope.push(1.0 / pdf);
        }
        Ok(RadiusSampler { profile, q, r, slope })
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        let (q0, qn) = (self.q[0], *self.q.last().unwrap());
        if u < q0 || u > qn {
            return self
                .profile
                .radial_quantile(u)
                .map_err(|_| Error::SamplerFailure(format!("tail quantile at {u}")));
        }
        let step = (qn - q0) / (self.q.len() - 1) as f64;
        let i = (((u - q0) / step) as usize).min(self.q.len() - 2);
        let h = self.q[i + 1] - self.q[i];
        let s = (u - self.q[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Ok(h00 * self.r[i] + h10 * h * self.slope[i] + h01 * self.r[i + 1] + h11 * h * self.slope[i + 1])
    }
}
