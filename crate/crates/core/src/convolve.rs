//! Densities of `(X + X*)/√2`, of Ornstein–Uhlenbeck evolutes and of
//! Gaussian mollifications, computed in the radial representation.
//!
//! For `Y = A + B` with radial `A`, `B` independent,
//!
//! `f_Y(ρ) = S_{d-2} ∫ r^{d-1} φ_A(r) ∫ φ_B(√(ρ² + r² - 2ρru)) (1-u²)^{(d-3)/2} du dr`.
//!
//! The outer integral runs over the radial nodes of `A`, refined to the
//! length scale of `B`, and the inner one over a Gauss–Jacobi rule whose
//! order grows with `ρ r` times the curvature of `log φ_B`. Mixture inputs
//! also have exact closed forms; both are computed and compared.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{entropy, fisher};
use crate::quadrature::{AngularLadder, Estimate, GaussRule, RadialNodes};
use crate::radial::RadialProfile;
use crate::special::log_sphere_area;

/// Contributions this far (in log units) below the largest term at the
/// same output radius are skipped.
const SKIP_LOG: f64 = 46.0;

/// Output marching stops once the radial density drops this far below its
/// maximum.
const STOP_LOG: f64 = 69.0;

const BLOCK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvolveOptions {
    /// Largest acceptable two-resolution discrepancy, relative to the peak
    /// output density.
    pub resolution_budget: f64,
    /// Largest acceptable sup-norm gap to the closed form.
    pub mismatch_budget: f64,
    /// Run the numerical convolution for mixtures as well.
    pub verify_closed_form: bool,
    /// Every `check_stride`-th output point is recomputed at the second
    /// resolution.
    pub check_stride: usize,
}

impl Default for ConvolveOptions {
    fn default() -> Self {
        ConvolveOptions {
            resolution_budget: 1e-8,
            mismatch_budget: 1e-7,
            verify_closed_form: true,
            check_stride: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionMeta {
    pub grid_points: usize,
    pub spacing: f64,
    pub outer_nodes: usize,
    pub max_angular_order: usize,
    pub check_points: usize,
}

/// Output of the numerical route.
#[derive(Debug, Clone)]
pub struct NumericConvolution {
    /// Tabulated, normalized output.
    pub profile: RadialProfile,
    /// The same output interpolated from every other grid point.
    pub half_grid: RadialProfile,
    pub meta: ConvolutionMeta,
    /// Largest pointwise two-resolution discrepancy.
    pub error_estimate: f64,
    /// `error_estimate` divided by the peak density.
    pub relative_error: f64,
    /// `|mass - 1|` before normalization.
    pub mass_defect: f64,
    pub grid: Vec<f64>,
    /// Normalized output values on `grid`.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ConvolutionResult {
    pub input_hash: String,
    pub numeric: Option<NumericConvolution>,
    pub closed_form: Option<RadialProfile>,
    /// Sup-norm gap between the numerical output and the closed form on
    /// the output grid.
    pub closed_form_deviation: Option<f64>,
}

impl ConvolutionResult {
    /// Most accurate available representation of the output.
    pub fn profile(&self) -> &RadialProfile {
        match (&self.closed_form, &self.numeric) {
            (Some(p), _) => p,
            (None, Some(n)) => &n.profile,
            (None, None) => unreachable!("convolution result without output"),
        }
    }

    /// Evaluates a functional on the output with an error that covers the
    /// convolution and re-interpolation errors.
    pub fn functional<F>(&self, f: F) -> Result<Estimate>
    where
        F: Fn(&RadialProfile) -> Result<Estimate>,
    {
        if let Some(p) = &self.closed_form {
            return f(p);
        }
        let n = self.numeric.as_ref().expect("numeric output");
        let fine = f(&n.profile)?;
        let half = f(&n.half_grid)?;
        let scale = 1.0 + fine.value.abs();
        let err = fine.err + (fine.value - half.value).abs() + (n.relative_error + n.mass_defect) * scale;
        Ok(Estimate::new(fine.value, err))
    }
}

/// Conservative length scale of `log φ`: `1/√curvature`.
fn curvature(profile: &RadialProfile) -> f64 {
    if let Some(spec) = profile.mixture_spec() {
        return 1.0 / spec.min_variance();
    }
    let nodes = profile.fine_nodes();
    let mut best = 0.0f64;
    let mut prev: Option<(f64, f64)> = None;
    for &r in &nodes.r {
        if let Ok(psi) = profile.score(r) {
            if r > 0.0 {
                best = best.max(psi.abs() / r);
            }
            if let Some((r0, p0)) = prev {
                if r > r0 {
                    best = best.max((psi - p0).abs() / (r - r0));
                }
            }
            prev = Some((r, psi));
        }
    }
    best.clamp(1e-6, 1e12)
}

/// Non-increasing upper envelope of `log φ` sampled on a grid.
struct Envelope {
    step: f64,
    values: Vec<f64>,
}

impl Envelope {
    fn new(profile: &RadialProfile) -> Self {
        let n = 2048;
        let r_max = profile.r_max();
        let step = r_max / n as f64;
        let mut values: Vec<f64> = (0..=n)
            .map(|i| {
                let a = profile.log_density(i as f64 * step);
                let b = profile.log_density(((i as f64 + 0.5) * step).min(r_max));
                a.max(b)
            })
            .collect();
        for i in (0..n).rev() {
            values[i] = values[i].max(values[i + 1]);
        }
        // allow for spline overshoot between samples
        for v in &mut values {
            *v += 1.0;
        }
        Envelope { step, values }
    }

    #[inline]
    fn at(&self, r: f64) -> f64 {
        let i = (r / self.step) as usize;
        if i >= self.values.len() {
            f64::NEG_INFINITY
        } else {
            self.values[i]
        }
    }
}

/// Refines a panel structure so no panel is wider than `h`.
fn refine_breaks(breaks: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![breaks[0]];
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let n = ((b - a) / h).ceil().max(1.0) as usize;
        for k in 1..=n {
            out.push(if k == n { b } else { a + (b - a) * k as f64 / n as f64 });
        }
    }
    out
}

struct Kernel<'a> {
    inner: &'a RadialProfile,
    envelope: Envelope,
    ladder: AngularLadder,
    top_rule: std::sync::Arc<GaussRule>,
    curv: f64,
    log_prefactor: f64,
    outer_log: Vec<f64>,
    outer_log_coarse: Vec<f64>,
    fine: RadialNodes,
    coarse: RadialNodes,
    precision: crate::quadrature::Precision,
}

#[derive(Clone, Copy)]
enum Resolution {
    Fine,
    CoarseRadial,
    FineAngular,
}

impl Kernel<'_> {
    /// `log f_Y(ρ)`, and the largest angular order used.
    fn log_value(&self, rho: f64, res: Resolution) -> (f64, usize) {
        let (nodes, outer_log) = match res {
            Resolution::CoarseRadial => (&self.coarse, &self.outer_log_coarse),
            _ => (&self.fine, &self.outer_log),
        };
        // bound on each term, for skipping
        let mut lmax = f64::NEG_INFINITY;
        let bounds: Vec<f64> = nodes
            .r
            .iter()
            .zip(outer_log)
            .zip(&nodes.w)
            .map(|((&r, &la), &w)| {
                let b = la + w.ln() + self.envelope.at((rho - r).abs());
                lmax = lmax.max(b);
                b
            })
            .collect();
        if lmax == f64::NEG_INFINITY {
            return (f64::NEG_INFINITY, 0);
        }
        let mut max_order = 0;
        let mut acc = crate::quadrature::Accumulator::new(self.precision);
        let rho2 = rho * rho;
        for (k, (&r, &w)) in nodes.r.iter().zip(&nodes.w).enumerate() {
            if bounds[k] < lmax - SKIP_LOG {
                continue;
            }
            let la = outer_log[k];
            let kappa = rho * r * self.curv;
            let rule = match res {
                Resolution::FineAngular => {
                    let sel = self.ladder.select(kappa);
                    let pos = self.ladder.rules.iter().position(|q| q.len() == sel.len()).unwrap();
                    if pos + 1 < self.ladder.rules.len() {
                        &*self.ladder.rules[pos + 1]
                    } else {
                        &*self.top_rule
                    }
                }
                _ => self.ladder.select(kappa),
            };
            max_order = max_order.max(rule.len());
            let base = rho2 + r * r;
            let cross = 2.0 * rho * r;
            let shift = la + w.ln() - lmax;
            let mut inner = 0.0;
            for (&u, &v) in rule.nodes.iter().zip(&rule.weights) {
                let s2 = (base - cross * u).max(0.0);
                inner += v * (self.inner.log_density_sq(s2) + shift).exp();
            }
            acc.add(inner);
        }
        (self.log_prefactor + lmax + acc.value().ln(), max_order)
    }
}

/// Density of `(A + B) / scale` on a grid of spacing `h`.
fn numeric_sum(
    outer: &RadialProfile,
    inner: &RadialProfile,
    scale: f64,
    h: f64,
    opts: &ConvolveOptions,
) -> Result<NumericConvolution> {
    let dim = outer.dim();
    let settings = *outer.settings();
    let ell_inner = 1.0 / curvature(inner).sqrt();
    let refined = refine_breaks(outer.breaks(), settings.panel_width * ell_inner);
    let (fo, co) = if outer.is_analytic() {
        (settings.radial_order, settings.radial_order_coarse)
    } else {
        (settings.tabulated_order.max(8), settings.tabulated_order_coarse.max(6))
    };
    let fine = RadialNodes::composite(dim, &refined, fo);
    let coarse = RadialNodes::composite(dim, &refined, co);
    let outer_log = fine.r.iter().map(|&r| outer.log_density(r)).collect();
    let outer_log_coarse = coarse.r.iter().map(|&r| outer.log_density(r)).collect();
    let ladder = AngularLadder::new(dim, settings.angular_max_order);
    let top = ladder.rules.last().unwrap().len() * 2;
    let top_rule = GaussRule::jacobi(top, ladder.exponent, ladder.exponent);
    // S_{d-2} / S_{d-1} times the output Jacobian scale^d
    let log_prefactor = log_sphere_area(dim - 2) - log_sphere_area(dim - 1) + dim as f64 * scale.ln()
        - outer.mass().ln()
        - inner.mass().ln();
    let kernel = Kernel {
        inner,
        envelope: Envelope::new(inner),
        ladder,
        top_rule,
        curv: curvature(inner),
        log_prefactor,
        outer_log,
        outer_log_coarse,
        fine,
        coarse,
        precision: settings.precision,
    };

    let w_cap = (outer.r_max() + inner.r_max()) / scale;
    let log_area = log_sphere_area(dim - 1);
    let mut grid: Vec<f64> = Vec::new();
    let mut logs: Vec<f64> = Vec::new();
    let mut max_order = 0;
    let mut peak_radial = f64::NEG_INFINITY;
    let mut max_err = 0.0f64;
    let mut checks = 0;
    let stride = opts.check_stride.max(1);
    let mut start = 0usize;
    loop {
        let idx: Vec<usize> = (start..start + BLOCK).collect();
        let block: Vec<(f64, usize, Option<f64>)> = idx
            .par_iter()
            .map(|&i| {
                let w = i as f64 * h;
                let (lv, order) = kernel.log_value(scale * w, Resolution::Fine);
                let err = if i % stride == 0 && lv.is_finite() {
                    let fv = lv.exp();
                    let (lc, _) = kernel.log_value(scale * w, Resolution::CoarseRadial);
                    let (la, _) = kernel.log_value(scale * w, Resolution::FineAngular);
                    Some((fv - lc.exp()).abs().max((fv - la.exp()).abs()))
                } else {
                    None
                };
                (lv, order, err)
            })
            .collect();
        let mut done = false;
        for (k, (lv, order, err)) in block.into_iter().enumerate() {
            let w = (start + k) as f64 * h;
            max_order = max_order.max(order);
            if let Some(e) = err {
                max_err = max_err.max(e);
                checks += 1;
            }
            let radial = if w > 0.0 { log_area + (dim as f64 - 1.0) * w.ln() + lv } else { f64::NEG_INFINITY };
            peak_radial = peak_radial.max(radial);
            if !lv.is_finite() || lv.exp() < 1e-300 || (w > 0.0 && radial < peak_radial - STOP_LOG) || w > w_cap {
                done = true;
                break;
            }
            grid.push(w);
            logs.push(lv);
        }
        if done {
            break;
        }
        start += BLOCK;
    }
    if grid.len() < 8 {
        return Err(Error::ResolutionFailure { estimate: f64::INFINITY, budget: opts.resolution_budget });
    }
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max).exp();
    let relative_error = max_err / peak;
    if relative_error > opts.resolution_budget {
        return Err(Error::ResolutionFailure { estimate: relative_error, budget: opts.resolution_budget });
    }
    let phi: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
    let raw = RadialProfile::tabulated_with(dim, grid.clone(), phi.clone(), settings)?;
    let mass_defect = (raw.mass() - 1.0).abs();
    let profile = raw.normalize()?;
    let values: Vec<f64> = grid.iter().map(|&w| profile.density(w)).collect();
    let (hg, hp): (Vec<f64>, Vec<f64>) = grid.iter().zip(&phi).step_by(2).map(|(a, b)| (*a, *b)).unzip();
    let half_grid = RadialProfile::tabulated_with(dim, hg, hp, settings)?.normalize()?;
    Ok(NumericConvolution {
        profile,
        half_grid,
        meta: ConvolutionMeta {
            grid_points: grid.len(),
            spacing: h,
            outer_nodes: kernel.fine.len(),
            max_angular_order: max_order,
            check_points: checks,
        },
        error_estimate: max_err,
        relative_error,
        mass_defect,
        grid,
        values,
    })
}

fn finish(
    input: &RadialProfile,
    numeric: impl FnOnce() -> Result<NumericConvolution>,
    closed: Option<RadialProfile>,
    opts: &ConvolveOptions,
) -> Result<ConvolutionResult> {
    let run_numeric = closed.is_none() || opts.verify_closed_form;
    let numeric = if run_numeric { Some(numeric()?) } else { None };
    let closed_form_deviation = match (&numeric, &closed) {
        (Some(n), Some(c)) => {
            let dev = n.grid.iter().zip(&n.values).map(|(&w, &v)| (v - c.density(w)).abs()).fold(0.0, f64::max);
            if dev > opts.mismatch_budget {
                return Err(Error::ConvolutionMismatch { deviation: dev });
            }
            Some(dev)
        }
        _ => None,
    };
    Ok(ConvolutionResult { input_hash: input.content_hash(), numeric, closed_form: closed, closed_form_deviation })
}

fn output_spacing(settings_spacing: f64, ell_a: f64, ell_b: f64, scale: f64) -> f64 {
    settings_spacing * (ell_a * ell_a + ell_b * ell_b).sqrt() / scale
}

/// Law of `(X + X*)/√2` for IID `X, X*`.
pub fn self_convolve_rescaled(profile: &RadialProfile) -> Result<ConvolutionResult> {
    self_convolve_rescaled_with(profile, &ConvolveOptions::default())
}

pub fn self_convolve_rescaled_with(profile: &RadialProfile, opts: &ConvolveOptions) -> Result<ConvolutionResult> {
    let closed = match profile.mixture_spec() {
        Some(spec) => Some(RadialProfile::from_spec(profile.dim(), spec.rescaled_self_sum(), *profile.settings())?),
        None => None,
    };
    let scale = std::f64::consts::SQRT_2;
    let ell = 1.0 / curvature(profile).sqrt();
    let h = output_spacing(profile.settings().output_spacing, ell, ell, scale);
    finish(profile, || numeric_sum(profile, profile, scale, h, opts), closed, opts)
}

/// Ornstein–Uhlenbeck evolute `e^{-t} X + (1 - e^{-2t})^{1/2} G` with a
/// standard Gaussian `G`.
pub fn ou_evolve(profile: &RadialProfile, t: f64) -> Result<ConvolutionResult> {
    ou_evolve_with(profile, t, &ConvolveOptions::default())
}

pub fn ou_evolve_with(profile: &RadialProfile, t: f64, opts: &ConvolveOptions) -> Result<ConvolutionResult> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("evolution time must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(ConvolutionResult {
            input_hash: profile.content_hash(),
            numeric: None,
            closed_form: Some(profile.clone()),
            closed_form_deviation: None,
        });
    }
    let a = (-t).exp();
    let noise = -(-2.0 * t).exp_m1();
    let closed = match profile.mixture_spec() {
        Some(spec) => Some(RadialProfile::from_spec(profile.dim(), spec.ou_evolute(t), *profile.settings())?),
        None => None,
    };
    gaussian_sum(profile, a, noise, closed, opts)
}

/// Law of `X + Z` with `Z ~ N(0, σ² I)`.
pub fn mollify(profile: &RadialProfile, sigma2: f64) -> Result<ConvolutionResult> {
    mollify_with(profile, sigma2, &ConvolveOptions::default())
}

pub fn mollify_with(profile: &RadialProfile, sigma2: f64, opts: &ConvolveOptions) -> Result<ConvolutionResult> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidArgument(format!("noise variance must be positive, got {sigma2}")));
    }
    let closed = match profile.mixture_spec() {
        Some(spec) => Some(RadialProfile::from_spec(profile.dim(), spec.mollified(sigma2), *profile.settings())?),
        None => None,
    };
    gaussian_sum(profile, 1.0, sigma2, closed, opts)
}

fn gaussian_sum(
    profile: &RadialProfile,
    a: f64,
    noise: f64,
    closed: Option<RadialProfile>,
    opts: &ConvolveOptions,
) -> Result<ConvolutionResult> {
    let compute = || {
        let outer = if a == 1.0 { profile.clone() } else { profile.scaled(a)? };
        let gauss = RadialProfile::from_spec(
            profile.dim(),
            crate::radial::GaussianMixtureSpec::new(vec![1.0], vec![noise])?,
            *profile.settings(),
        )?;
        let ell_a = 1.0 / curvature(&outer).sqrt();
        let h = output_spacing(profile.settings().output_spacing, ell_a, noise.sqrt(), 1.0);
        numeric_sum(&outer, &gauss, 1.0, h, opts)
    };
    finish(profile, compute, closed, opts)
}

/// Entropy jump `h((X + X*)/√2) - h(X)`.
pub fn entropy_jump(profile: &RadialProfile) -> Result<Estimate> {
    entropy_jump_from(profile, &self_convolve_rescaled(profile)?)
}

pub fn entropy_jump_from(profile: &RadialProfile, conv: &ConvolutionResult) -> Result<Estimate> {
    let hw = conv.functional(entropy)?;
    let hx = entropy(profile)?;
    Ok(Estimate::new(hw.value - hx.value, hw.err + hx.err))
}

/// Fisher dissipation `J(X) - J((X + X*)/√2)`.
pub fn fisher_dissipation(profile: &RadialProfile) -> Result<Estimate> {
    fisher_dissipation_from(profile, &self_convolve_rescaled(profile)?)
}

pub fn fisher_dissipation_from(profile: &RadialProfile, conv: &ConvolutionResult) -> Result<Estimate> {
    let jw = conv.functional(fisher)?;
    let jx = fisher(profile)?;
    Ok(Estimate::new(jx.value - jw.value, jw.err + jx.err))
}
