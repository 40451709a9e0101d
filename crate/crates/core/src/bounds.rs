//! Explicit constants and inequality certificates.
//!
//! Every certificate first rescales the profile to `E|X|² = d` (and a
//! regularity constant `c` to `c·E|X|²/d`), evaluates both sides with their
//! quadrature error estimates, and passes when `lhs - rhs ≥ -tolerance`.
//! Upper bounds are phrased the same way, with the bound on the left.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::convolve::{entropy_jump_from, fisher_dissipation_from, ou_evolve, self_convolve_rescaled, ConvolutionResult};
use crate::error::{Error, Result};
use crate::functionals::{w2_radial_to_chi, FunctionalReport};
use crate::landau::{landau_production, LandauEstimate};
use crate::quadrature::{sum_with, Estimate, Precision};
use crate::radial::{moment_norm_estimate, GaussianMixtureSpec, RadialProfile};
use crate::special::chi_square_moment;

/// Smallest tolerance any certificate uses.
pub const TOLERANCE_FLOOR: f64 = 1e-9;

/// Default grid standing in for the supremum over ε.
pub const DEFAULT_EPS_GRID: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

/// Below this relative Fisher information the regularity-free bounds are
/// treated as the trivial `0 ≥ 0` case.
const TRIVIAL_FISHER: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CertificateName {
    FisherJump,
    EntropyJump,
    EntropyJumpNoReg,
    LsiNoReg,
    LsiReg,
    ImprovedStam,
    ImprovedLsi,
    MixtureExample,
    DvLemma,
    ChiMoment,
    #[serde(rename = "D_vs_deficit")]
    DVsDeficit,
    Mollification,
    OuRegularity,
    ApproxR,
}

impl CertificateName {
    pub const ALL: [CertificateName; 14] = [
        CertificateName::FisherJump,
        CertificateName::EntropyJump,
        CertificateName::EntropyJumpNoReg,
        CertificateName::LsiNoReg,
        CertificateName::LsiReg,
        CertificateName::ImprovedStam,
        CertificateName::ImprovedLsi,
        CertificateName::MixtureExample,
        CertificateName::DvLemma,
        CertificateName::ChiMoment,
        CertificateName::DVsDeficit,
        CertificateName::Mollification,
        CertificateName::OuRegularity,
        CertificateName::ApproxR,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CertificateName::FisherJump => "FisherJump",
            CertificateName::EntropyJump => "EntropyJump",
            CertificateName::EntropyJumpNoReg => "EntropyJumpNoReg",
            CertificateName::LsiNoReg => "LsiNoReg",
            CertificateName::LsiReg => "LsiReg",
            CertificateName::ImprovedStam => "ImprovedStam",
            CertificateName::ImprovedLsi => "ImprovedLsi",
            CertificateName::MixtureExample => "MixtureExample",
            CertificateName::DvLemma => "DvLemma",
            CertificateName::ChiMoment => "ChiMoment",
            CertificateName::DVsDeficit => "D_vs_deficit",
            CertificateName::Mollification => "Mollification",
            CertificateName::OuRegularity => "OuRegularity",
            CertificateName::ApproxR => "ApproxR",
        }
    }
}

impl fmt::Display for CertificateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CertificateName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CertificateName::ALL
            .iter()
            .copied()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown certificate name {s:?}")))
    }
}

/// Outcome of one inequality check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub name: CertificateName,
    pub epsilon: Option<f64>,
    pub c_used: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_err: f64,
    pub rhs_err: f64,
    pub constant_value: f64,
    pub margin: f64,
    pub pass: bool,
    pub tolerance: f64,
    pub inputs_hash: String,
    /// Grid point attaining the maximum, for checks that maximize over ε.
    pub argmax_eps: Option<f64>,
    /// Auxiliary reported quantities.
    pub details: BTreeMap<String, f64>,
}

impl BoundCertificate {
    pub fn new(name: CertificateName, lhs: Estimate, rhs: Estimate, constant_value: f64, inputs_hash: String) -> Self {
        let tolerance = (lhs.err + rhs.err).max(TOLERANCE_FLOOR);
        let margin = lhs.value - rhs.value;
        BoundCertificate {
            name,
            epsilon: None,
            c_used: None,
            lhs: lhs.value,
            rhs: rhs.value,
            lhs_err: lhs.err,
            rhs_err: rhs.err,
            constant_value,
            margin,
            pass: margin >= -tolerance,
            tolerance,
            inputs_hash,
            argmax_eps: None,
            details: BTreeMap::new(),
        }
    }

    pub fn with_epsilon(mut self, eps: f64) -> Self {
        self.epsilon = Some(eps);
        self
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c_used = Some(c);
        self
    }

    pub fn with_detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }
}

/// Value and error of `f` at the given inputs; the error adds the largest
/// one-sided change of `f` when each input moves by its own error.
pub fn propagate<F: Fn(&[f64]) -> f64>(f: F, inputs: &[Estimate]) -> Estimate {
    let x: Vec<f64> = inputs.iter().map(|e| e.value).collect();
    let v = f(&x);
    let mut err = 0.0;
    let mut y = x.clone();
    for i in 0..x.len() {
        let mut worst = 0.0f64;
        for s in [1.0, -1.0] {
            y[i] = x[i] + s * inputs[i].err;
            let w = f(&y);
            if w.is_finite() {
                worst = worst.max((w - v).abs());
            }
        }
        y[i] = x[i];
        err += worst;
    }
    Estimate::new(v, err)
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {eps}")));
    }
    Ok(())
}

fn check_c(c: f64) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("regularity constant must be positive, got {c}")));
    }
    Ok(())
}

fn log_sum(precision: Precision, terms: &[f64]) -> f64 {
    sum_with(precision, terms.iter().copied())
}

/// `ln(dε / (1 + (d+2)ε))`
fn ln_dim_ratio(d: f64, eps: f64) -> f64 {
    (d * eps).ln() - (1.0 + (d + 2.0) * eps).ln()
}

/// `ln K_ε` from `m1 = ‖|X|²‖₁` and `m = ‖|X|²‖_{2+1/ε}`.
fn ln_k(precision: Precision, eps: f64, c: f64, m1: f64, m: f64) -> f64 {
    log_sum(
        precision,
        &[
            eps * (eps / 8.0).ln(),
            -(1.0 + eps) * (8.0 * (1.0 + eps)).ln(),
            (1.0 + eps) * m1.ln(),
            -2.0 * eps * c.ln(),
            -(1.0 + 2.0 * eps) * m.ln(),
        ],
    )
}

fn ln_c(precision: Precision, d: f64, eps: f64, c: f64, m1: f64, m: f64) -> f64 {
    log_sum(
        precision,
        &[
            (1.0 + 2.0 * eps) * ln_dim_ratio(d, eps),
            4.0 * LN_2,
            eps * (d / 100.0).ln(),
            -(1.0 + eps) * (8.0 * LN_2 + (1.0 + eps).ln() + (1.0 + 2.0 * eps).ln()),
            m1.ln(),
            -2.0 * eps * c.ln(),
            -(1.0 + 2.0 * eps) * m.ln(),
        ],
    )
}

fn ln_c_tilde(precision: Precision, d: f64, eps: f64, m1: f64, m: f64) -> f64 {
    log_sum(
        precision,
        &[
            (2.0 + 4.0 * eps) * ln_dim_ratio(d, eps),
            12.0 * LN_2,
            eps * (d / 100.0).ln(),
            -(1.0 + eps) * (17.0 * LN_2 + (1.0 + eps).ln() + (1.0 + 2.0 * eps).ln()),
            m1.ln(),
            -(1.0 + 2.0 * eps) * m.ln(),
        ],
    )
}

fn moment_inputs(profile: &RadialProfile, eps: f64) -> Result<(Estimate, Estimate)> {
    let m1 = profile.moments().second_moment;
    let m = moment_norm_estimate(profile, 2.0 + 1.0 / eps)?;
    Ok((m1, m))
}

/// `ln K_ε(X)`; stays finite where `K_ε` itself underflows.
pub fn ln_k_eps(profile: &RadialProfile, c: f64, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    check_c(c)?;
    let (m1, m) = moment_inputs(profile, eps)?;
    Ok(ln_k(profile.settings().precision, eps, c, m1.value, m.value))
}

pub fn ln_c_eps(profile: &RadialProfile, c: f64, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    check_c(c)?;
    let (m1, m) = moment_inputs(profile, eps)?;
    Ok(ln_c(profile.settings().precision, profile.dim() as f64, eps, c, m1.value, m.value))
}

pub fn ln_c_tilde_eps(profile: &RadialProfile, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let (m1, m) = moment_inputs(profile, eps)?;
    Ok(ln_c_tilde(profile.settings().precision, profile.dim() as f64, eps, m1.value, m.value))
}

/// `K_ε(X)` of the Fisher-dissipation bound, for a `c`-regular profile.
pub fn k_eps(profile: &RadialProfile, c: f64, eps: f64) -> Result<f64> {
    Ok(k_eps_estimate(profile, c, eps)?.value)
}

pub fn k_eps_estimate(profile: &RadialProfile, c: f64, eps: f64) -> Result<Estimate> {
    check_eps(eps)?;
    check_c(c)?;
    let (m1, m) = moment_inputs(profile, eps)?;
    let p = profile.settings().precision;
    Ok(propagate(|x| ln_k(p, eps, c, x[0], x[1]).exp(), &[m1, m]))
}

/// `C_ε(X)` of the entropy-jump bound, for a `c`-regular profile.
pub fn c_eps(profile: &RadialProfile, c: f64, eps: f64) -> Result<f64> {
    Ok(c_eps_estimate(profile, c, eps)?.value)
}

pub fn c_eps_estimate(profile: &RadialProfile, c: f64, eps: f64) -> Result<Estimate> {
    check_eps(eps)?;
    check_c(c)?;
    let (m1, m) = moment_inputs(profile, eps)?;
    let p = profile.settings().precision;
    let d = profile.dim() as f64;
    Ok(propagate(|x| ln_c(p, d, eps, c, x[0], x[1]).exp(), &[m1, m]))
}

/// `C̃_ε(X)` of the regularity-free entropy-jump bound.
pub fn c_tilde_eps(profile: &RadialProfile, eps: f64) -> Result<f64> {
    Ok(c_tilde_eps_estimate(profile, eps)?.value)
}

pub fn c_tilde_eps_estimate(profile: &RadialProfile, eps: f64) -> Result<Estimate> {
    check_eps(eps)?;
    let (m1, m) = moment_inputs(profile, eps)?;
    let p = profile.settings().precision;
    let d = profile.dim() as f64;
    Ok(propagate(|x| ln_c_tilde(p, d, eps, x[0], x[1]).exp(), &[m1, m]))
}

/// `E X₁⁸` of one coordinate of a radial vector, from `E|X|⁸`.
pub fn marginal_eighth_moment(profile: &RadialProfile) -> Result<Estimate> {
    let d = profile.dim() as f64;
    let m8 = profile.abs_moment(8.0)?;
    let k = 105.0 / (d * (d + 2.0) * (d + 4.0) * (d + 6.0));
    Ok(Estimate::new(k * m8.value, k * m8.err))
}

/// Shared inputs for all certificates of one profile: the standardized
/// profile, its functionals, and lazily computed convolutions.
pub struct Certifier {
    hash: String,
    /// Factor `s` with standardized `= s · original`.
    scale: f64,
    x: RadialProfile,
    report: FunctionalReport,
    conv: OnceLock<Result<ConvolutionResult>>,
    landau: OnceLock<Result<LandauEstimate>>,
    ou: Mutex<BTreeMap<u64, ConvolutionResult>>,
}

impl Certifier {
    pub fn new(profile: &RadialProfile) -> Result<Self> {
        let (x, scale) = profile.standardized()?;
        let report = FunctionalReport::compute(&x)?;
        Ok(Certifier {
            hash: profile.content_hash(),
            scale,
            x,
            report,
            conv: OnceLock::new(),
            landau: OnceLock::new(),
            ou: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn standardized(&self) -> &RadialProfile {
        &self.x
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn report(&self) -> &FunctionalReport {
        &self.report
    }

    pub fn inputs_hash(&self) -> &str {
        &self.hash
    }

    /// Density of `(X + X*)/√2` for the standardized profile.
    pub fn convolution(&self) -> Result<&ConvolutionResult> {
        self.conv.get_or_init(|| self_convolve_rescaled(&self.x)).as_ref().map_err(Clone::clone)
    }

    pub fn entropy_jump(&self) -> Result<Estimate> {
        entropy_jump_from(&self.x, self.convolution()?)
    }

    pub fn fisher_dissipation(&self) -> Result<Estimate> {
        fisher_dissipation_from(&self.x, self.convolution()?)
    }

    pub fn landau(&self) -> Result<LandauEstimate> {
        self.landau.get_or_init(|| landau_production(&self.x)).clone()
    }

    fn ou_evolute(&self, t: f64) -> Result<ConvolutionResult> {
        let key = t.to_bits();
        if let Some(c) = self.ou.lock().unwrap().get(&key) {
            return Ok(c.clone());
        }
        let c = ou_evolve(&self.x, t)?;
        self.ou.lock().unwrap().insert(key, c.clone());
        Ok(c)
    }

    fn d_est(&self) -> Estimate {
        Estimate::new(self.report.d.max(0.0), self.report.d_err)
    }

    fn i_est(&self) -> Estimate {
        Estimate::new(self.report.i.max(0.0), self.report.i_err)
    }

    fn deficit(&self) -> Estimate {
        self.report.lsi_deficit()
    }

    /// `c` of the original profile expressed for the standardized one.
    fn standardized_c(&self, c: f64) -> f64 {
        c / (self.scale * self.scale)
    }

    fn cert(&self, name: CertificateName, lhs: Estimate, rhs: Estimate, constant: f64) -> BoundCertificate {
        BoundCertificate::new(name, lhs, rhs, constant, self.hash.clone())
    }

    /// `J(X) - J((X+X*)/√2) ≥ K_ε I^{1+ε}`, reported in the units of the
    /// original profile.
    pub fn fisher_jump(&self, c: f64, eps: f64) -> Result<BoundCertificate> {
        check_eps(eps)?;
        check_c(c)?;
        let cs = self.standardized_c(c);
        let (m1, m, p) = self.moment_inputs(eps)?;
        let s2 = self.scale * self.scale;
        let lhs = self.fisher_dissipation()?;
        let rhs = propagate(
            |v| (ln_k(p, eps, cs, v[0], v[1]) + (1.0 + eps) * v[2].max(0.0).ln()).exp(),
            &[m1, m, self.i_est()],
        );
        let unit = |e: Estimate| Estimate::new(s2 * e.value, s2 * e.err);
        let ln_constant = ln_k(p, eps, cs, m1.value, m.value) - 2.0 * eps * self.scale.ln();
        Ok(self
            .cert(CertificateName::FisherJump, unit(lhs), unit(rhs), ln_constant.exp())
            .with_epsilon(eps)
            .with_c(c)
            .with_detail("ln_constant", ln_constant))
    }

    /// `h((X+X*)/√2) - h(X) ≥ C_ε D^{1+ε}`.
    pub fn entropy_jump_cert(&self, c: f64, eps: f64) -> Result<BoundCertificate> {
        check_eps(eps)?;
        check_c(c)?;
        let cs = self.standardized_c(c);
        let (m1, m, p) = self.moment_inputs(eps)?;
        let d = self.x.dim() as f64;
        let lhs = self.entropy_jump()?;
        let rhs = propagate(
            |v| (ln_c(p, d, eps, cs, v[0], v[1]) + (1.0 + eps) * v[2].max(0.0).ln()).exp(),
            &[m1, m, self.d_est()],
        );
        let ln_constant = ln_c(p, d, eps, cs, m1.value, m.value);
        Ok(self
            .cert(CertificateName::EntropyJump, lhs, rhs, ln_constant.exp())
            .with_epsilon(eps)
            .with_c(c)
            .with_detail("ln_constant", ln_constant))
    }

    fn moment_inputs(&self, eps: f64) -> Result<(Estimate, Estimate, Precision)> {
        let (m1, m) = moment_inputs(&self.x, eps)?;
        Ok((m1, m, self.x.settings().precision))
    }

    /// `ln C̃_ε` and `C̃_ε D^{1+3ε} / I^{2ε}`.
    fn no_reg_rhs(&self, eps: f64) -> Result<(f64, Estimate)> {
        let (m1, m, p) = self.moment_inputs(eps)?;
        let d = self.x.dim() as f64;
        let ln_constant = ln_c_tilde(p, d, eps, m1.value, m.value);
        if self.report.i <= TRIVIAL_FISHER {
            return Ok((ln_constant, Estimate::exact(0.0)));
        }
        let rhs = propagate(
            |v| {
                (ln_c_tilde(p, d, eps, v[0], v[1]) + (1.0 + 3.0 * eps) * v[2].max(0.0).ln()
                    - 2.0 * eps * v[3].max(TRIVIAL_FISHER).ln())
                .exp()
            },
            &[m1, m, self.d_est(), self.i_est()],
        );
        Ok((ln_constant, rhs))
    }

    /// `h((X+X*)/√2) - h(X) ≥ C̃_ε D^{1+3ε} / I^{2ε}`.
    pub fn entropy_jump_noreg(&self, eps: f64) -> Result<BoundCertificate> {
        check_eps(eps)?;
        let (ln_constant, rhs) = self.no_reg_rhs(eps)?;
        let lhs = self.entropy_jump()?;
        Ok(self
            .cert(CertificateName::EntropyJumpNoReg, lhs, rhs, ln_constant.exp())
            .with_epsilon(eps)
            .with_detail("ln_constant", ln_constant))
    }

    /// `δ_LSI ≥ max over the grid of C̃_ε D^{1+3ε} / I^{2ε}`, one row
    /// reported at the maximizing ε.
    pub fn lsi_noreg(&self, eps_grid: &[f64]) -> Result<BoundCertificate> {
        if eps_grid.is_empty() {
            return Err(Error::InvalidArgument("empty epsilon grid".into()));
        }
        let mut best: Option<(f64, f64, Estimate)> = None;
        for &eps in eps_grid {
            check_eps(eps)?;
            let (ln_constant, rhs) = self.no_reg_rhs(eps)?;
            if best.as_ref().is_none_or(|b| rhs.value > b.2.value) {
                best = Some((eps, ln_constant, rhs));
            }
        }
        let (eps, ln_constant, rhs) = best.unwrap();
        let mut cert = self
            .cert(CertificateName::LsiNoReg, self.deficit(), rhs, ln_constant.exp())
            .with_epsilon(eps)
            .with_detail("ln_constant", ln_constant);
        cert.argmax_eps = Some(eps);
        Ok(cert)
    }

    /// `δ_LSI ≥ ¼ K_ε I^{1+ε}`.
    pub fn lsi_reg(&self, c: f64, eps: f64) -> Result<BoundCertificate> {
        check_eps(eps)?;
        check_c(c)?;
        let cs = self.standardized_c(c);
        let (m1, m, p) = self.moment_inputs(eps)?;
        let rhs = propagate(
            |v| (ln_k(p, eps, cs, v[0], v[1]) + (1.0 + eps) * v[2].max(0.0).ln()).exp() / 4.0,
            &[m1, m, self.i_est()],
        );
        let ln_constant = ln_k(p, eps, cs, m1.value, m.value) - 2.0 * LN_2;
        Ok(self
            .cert(CertificateName::LsiReg, self.deficit(), rhs, ln_constant.exp())
            .with_epsilon(eps)
            .with_c(c)
            .with_detail("ln_constant", ln_constant))
    }

    /// `N(X) J(X) / d ≥ exp{(2/d)(h((X+X*)/√2) - h(X))}`.
    pub fn improved_stam(&self) -> Result<BoundCertificate> {
        let d = self.x.dim() as f64;
        let n = Estimate::new(self.report.n, self.report.n_err);
        let j = Estimate::new(self.report.j, self.report.j_err);
        let lhs = propagate(|v| v[0] * v[1] / d, &[n, j]);
        let rhs = propagate(|v| (2.0 * v[0] / d).exp(), &[self.entropy_jump()?]);
        Ok(self.cert(CertificateName::ImprovedStam, lhs, rhs, 1.0 / d))
    }

    /// `δ_LSI ≥ h((X+X*)/√2) - h(X)`.
    pub fn improved_lsi(&self) -> Result<BoundCertificate> {
        Ok(self.cert(CertificateName::ImprovedLsi, self.deficit(), self.entropy_jump()?, 1.0))
    }

    /// Landau production `≥ λ (d-1) I(X|G)`.
    pub fn dv_lemma(&self) -> Result<BoundCertificate> {
        let d = self.x.dim() as f64;
        let lambda = self.report.lambda;
        let k = lambda * (d - 1.0);
        let prod = self.landau()?;
        let lhs = Estimate::new(prod.value, prod.err);
        let rhs = Estimate::new(k * self.report.i, k * self.report.i_err);
        Ok(self
            .cert(CertificateName::DvLemma, lhs, rhs, k)
            .with_detail("lambda", lambda)
            .with_detail("excluded_mass", prod.excluded_mass))
    }

    /// `‖|X_t|²‖_p ≤ 2(1 + p/d)‖|X|²‖_p`, `p = 2 + 1/ε`, for every `t` in
    /// the grid; the row reports the smallest margin.
    pub fn chi_moment(&self, eps: f64, t_grid: &[f64]) -> Result<BoundCertificate> {
        check_eps(eps)?;
        if t_grid.is_empty() {
            return Err(Error::InvalidArgument("empty t grid".into()));
        }
        let d = self.x.dim() as f64;
        let p = 2.0 + 1.0 / eps;
        let factor = 2.0 * (1.0 + p / d);
        let mx = moment_norm_estimate(&self.x, p)?;
        let lhs = Estimate::new(factor * mx.value, factor * mx.err);
        let mut worst: Option<(f64, Estimate)> = None;
        for &t in t_grid {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::InvalidArgument(format!("t must be nonnegative, got {t}")));
            }
            let xt = self.ou_evolute(t)?;
            let m = xt.functional(|q| moment_norm_estimate(q, p))?;
            if worst.as_ref().is_none_or(|w| m.value > w.1.value) {
                worst = Some((t, m));
            }
        }
        let (t, rhs) = worst.unwrap();
        // chi-square step: ‖|G|²‖_p ≤ E|X|² (1 + p/d)
        let chi = chi_square_moment(self.x.dim(), p).powf(1.0 / p);
        Ok(self
            .cert(CertificateName::ChiMoment, lhs, rhs, factor)
            .with_epsilon(eps)
            .with_detail("t", t)
            .with_detail("chi_norm", chi)
            .with_detail("chi_bound", d * (1.0 + p / d)))
    }

    /// `D ≤ 10⁸ max{δ, δ^{1/2} √(E X₁⁸ / d)}`.
    pub fn d_vs_deficit(&self) -> Result<BoundCertificate> {
        let d = self.x.dim() as f64;
        let m8 = marginal_eighth_moment(&self.x)?;
        let delta = self.deficit();
        let lhs = propagate(
            |v| {
                let del = v[0].max(0.0);
                1e8 * del.max(del.sqrt() * (v[1] / d).sqrt())
            },
            &[delta, m8],
        );
        let rhs = Estimate::new(self.report.d, self.report.d_err);
        Ok(self.cert(CertificateName::DVsDeficit, lhs, rhs, 1e8).with_detail("marginal_m8", m8.value))
    }
}

/// Profile with `Σ p_i σ_i² = 1` built from any mixture specification.
fn unit_mixture(spec: &GaussianMixtureSpec) -> Result<GaussianMixtureSpec> {
    let mean = spec.mean_variance();
    GaussianMixtureSpec::new(spec.weights.clone(), spec.variances.iter().map(|s| s / mean).collect())
}

impl Certifier {
    /// The mixture example's pre-asymptotic chain
    ///
    /// `jump ≥ A_d(ε) · W₂^{2ε}(R, |G|/√d) · D / (σ₁² (Σ p_i (σ_i²/σ₁²)^{2+1/ε})^ε)`
    ///
    /// with `A_d(ε) = (dε/(1+(d+2)ε))^{2(1+2ε)} 2⁴ (1/200)^ε / (2⁸(1+ε)(1+2ε))^{1+ε}`,
    /// on the standardized mixture (`Σ p_i σ_i² = 1`).
    pub fn mixture_example(&self, eps: f64) -> Result<BoundCertificate> {
        check_eps(eps)?;
        let spec = self
            .x
            .mixture_spec()
            .ok_or_else(|| Error::InvalidArgument("mixture example needs a Gaussian mixture profile".into()))?;
        let d = self.x.dim() as f64;
        let s1 = spec.min_variance();
        let q = 2.0 + 1.0 / eps;
        let spread: f64 = spec.weights.iter().zip(&spec.variances).map(|(p, s)| p * (s / s1).powf(q)).sum();
        let ln_a = log_sum(
            self.x.settings().precision,
            &[
                2.0 * (1.0 + 2.0 * eps) * ln_dim_ratio(d, eps),
                4.0 * LN_2,
                -eps * 200f64.ln(),
                -(1.0 + eps) * (8.0 * LN_2 + (1.0 + eps).ln() + (1.0 + 2.0 * eps).ln()),
                -s1.ln(),
                -eps * spread.ln(),
            ],
        );
        let constant = ln_a.exp();
        let w2 = w2_radial_to_chi(&self.x)?;
        let w2e = Estimate::new(w2.w2, w2.err);
        let rhs = propagate(|v| constant * v[0].powf(2.0 * eps) * v[1].max(0.0), &[w2e, self.d_est()]);
        let lhs = self.entropy_jump()?;
        let limit: f64 = spec.weights.iter().zip(&spec.variances).map(|(p, s)| p * (s.sqrt() - 1.0).powi(2)).sum();
        let cubic: f64 = spec.weights.iter().zip(&spec.variances).map(|(p, s)| p * (s / s1).powi(3)).sum();
        let asymptotic = limit / (32768.0 * s1 * cubic) * self.report.d;
        let w2_sq = w2.w2 * w2.w2;
        Ok(self
            .cert(CertificateName::MixtureExample, lhs, rhs, constant)
            .with_epsilon(eps)
            .with_c(1.0 / s1)
            .with_detail("ln_constant", ln_a)
            .with_detail("w2_squared", w2_sq)
            .with_detail("w2_err", w2.err)
            .with_detail("w2_limit", limit)
            .with_detail("w2_ratio", if limit > 0.0 { w2_sq / limit } else { f64::NAN })
            .with_detail("asymptotic_rhs", asymptotic))
    }
}

pub fn certify_mixture_example_eps(spec: &GaussianMixtureSpec, dim: usize, eps: f64) -> Result<BoundCertificate> {
    let profile = RadialProfile::from_spec(dim, unit_mixture(spec)?, Default::default())?;
    Certifier::new(&profile)?.mixture_example(eps)
}

/// The mixture example at `ε = 1`.
pub fn certify_mixture_example(spec: &GaussianMixtureSpec, dim: usize) -> Result<BoundCertificate> {
    certify_mixture_example_eps(spec, dim, 1.0)
}

pub fn certify_fisher_jump(profile: &RadialProfile, c: f64, eps: f64) -> Result<BoundCertificate> {
    Certifier::new(profile)?.fisher_jump(c, eps)
}

pub fn certify_entropy_jump(profile: &RadialProfile, c: f64, eps: f64) -> Result<BoundCertificate> {
    Certifier::new(profile)?.entropy_jump_cert(c, eps)
}

pub fn certify_entropy_jump_noreg(profile: &RadialProfile, eps: f64) -> Result<BoundCertificate> {
    Certifier::new(profile)?.entropy_jump_noreg(eps)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LsiMode<'a> {
    NoReg { eps_grid: &'a [f64] },
    Reg { c: f64, eps: f64 },
}

pub fn certify_lsi(profile: &RadialProfile, mode: LsiMode<'_>) -> Result<BoundCertificate> {
    let cert = Certifier::new(profile)?;
    match mode {
        LsiMode::NoReg { eps_grid } => cert.lsi_noreg(eps_grid),
        LsiMode::Reg { c, eps } => cert.lsi_reg(c, eps),
    }
}

pub fn certify_improved_stam(profile: &RadialProfile) -> Result<BoundCertificate> {
    Certifier::new(profile)?.improved_stam()
}

pub fn certify_improved_lsi(profile: &RadialProfile) -> Result<BoundCertificate> {
    Certifier::new(profile)?.improved_lsi()
}

pub fn certify_dv_lemma(profile: &RadialProfile) -> Result<BoundCertificate> {
    Certifier::new(profile)?.dv_lemma()
}

pub fn certify_chi_moment(profile: &RadialProfile, eps: f64, t_grid: &[f64]) -> Result<BoundCertificate> {
    Certifier::new(profile)?.chi_moment(eps, t_grid)
}

pub fn certify_d_vs_deficit(profile: &RadialProfile) -> Result<BoundCertificate> {
    Certifier::new(profile)?.d_vs_deficit()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn example_mixture(d: usize) -> RadialProfile {
        RadialProfile::mixture(d, vec![0.5, 0.5], vec![0.5, 1.5]).unwrap()
    }

    #[test]
    fn k_eps_standard_gaussian() {
        let g = RadialProfile::gaussian(2, 1.0).unwrap();
        // (1/8)^1 / 16^2 * 2^2 / 48
        let oracle = 0.125 / 256.0 * 4.0 / 48.0;
        assert_relative_eq!(k_eps(&g, 1.0, 1.0).unwrap(), oracle, max_relative = 1e-10);
        assert_relative_eq!(oracle, 4.069e-5, max_relative = 1e-3);
    }

    #[test]
    fn c_constants_match_direct_arithmetic() {
        let g = RadialProfile::gaussian(2, 1.0).unwrap();
        let (d, e): (f64, f64) = (2.0, 1.0);
        let base = d * e / (1.0 + (d + 2.0) * e);
        let m1 = 2.0;
        let m = 48f64.powf(1.0 / 3.0);
        let c = base.powf(1.0 + 2.0 * e) * 16.0 * (d / 100.0).powf(e)
            / (256.0 * (1.0 + e) * (1.0 + 2.0 * e)).powf(1.0 + e)
            * m1
            / m.powf(1.0 + 2.0 * e);
        assert_relative_eq!(c_eps(&g, 1.0, 1.0).unwrap(), c, max_relative = 1e-10);
        let ct = base.powf(2.0 + 4.0 * e) * 4096.0 * (d / 100.0).powf(e)
            / (131072.0 * (1.0 + e) * (1.0 + 2.0 * e)).powf(1.0 + e)
            * m1
            / m.powf(1.0 + 2.0 * e);
        assert_relative_eq!(c_tilde_eps(&g, 1.0).unwrap(), ct, max_relative = 1e-10);
    }

    #[test]
    fn c_tilde_differs_from_c_by_printed_factors() {
        let m = example_mixture(3);
        for eps in [0.3, 1.0, 2.5] {
            let d = 3.0f64;
            let base = d * eps / (1.0 + (d + 2.0) * eps);
            let ratio = c_tilde_eps(&m, eps).unwrap() / c_eps(&m, 1.0, eps).unwrap();
            let expect = base.powf(1.0 + 2.0 * eps) * 256.0 / 512f64.powf(1.0 + eps);
            assert_relative_eq!(ratio, expect, max_relative = 1e-10);
        }
    }

    #[test]
    fn k_scaling_law() {
        let m = example_mixture(2);
        let t = 3.0;
        let s = m.scaled(t).unwrap();
        let ratio = k_eps(&s, 2.0 / (t * t), 1.0).unwrap() / k_eps(&m, 2.0, 1.0).unwrap();
        assert_relative_eq!(ratio, t * t, max_relative = 1e-10);
    }

    #[test]
    fn constants_stay_positive_for_large_eps() {
        let m = example_mixture(5);
        for eps in [0.05, 1.0, 10.0] {
            assert!(k_eps(&m, 2.0, eps).unwrap() > 0.0);
            assert!(c_eps(&m, 2.0, eps).unwrap() > 0.0);
            assert!(c_tilde_eps(&m, eps).unwrap() > 0.0);
        }
        // far below the double range, the logarithms stay accurate
        for eps in [40.0, 200.0] {
            let lk = ln_k_eps(&m, 2.0, eps).unwrap();
            assert!(lk.is_finite(), "{lk}");
            assert!(ln_c_eps(&m, 2.0, eps).unwrap().is_finite());
            assert!(ln_c_tilde_eps(&m, eps).unwrap().is_finite());
            let ratio = ln_k_eps(&m.scaled(3.0).unwrap(), 2.0 / 9.0, eps).unwrap() - lk;
            assert_relative_eq!(ratio, 2.0 * eps * 3f64.ln(), max_relative = 1e-10);
        }
    }

    #[test]
    fn heavy_tail_constant_finite_only_with_enough_moments() {
        // φ ∝ (1 + r²)^{-(d+4+δ)/2}·…: E|X|^{4+δ'} finite for δ' < δ
        let d = 3usize;
        let delta = 2.0;
        let r: Vec<f64> = (0..=1200).map(|i| i as f64 * 0.1).collect();
        let a = d as f64 + 4.0 + delta;
        let phi: Vec<f64> = r.iter().map(|x| (1.0 + x * x).powf(-0.5 * a)).collect();
        let p = RadialProfile::tabulated(d, r, phi).unwrap();
        // 2+1/ε = 2.25 needs E|X|^{4.5} < ∞
        assert!(k_eps(&p, 1.0, 4.0).unwrap() > 0.0);
        // 2+1/ε = 4 needs E|X|^8, which diverges
        assert!(matches!(k_eps(&p, 1.0, 0.5), Err(Error::DivergentMoment { .. })));
    }

    #[test]
    fn gaussian_certificates_are_trivial() {
        let g = RadialProfile::gaussian(3, 1.0).unwrap();
        let c = Certifier::new(&g).unwrap();
        for cert in [
            c.fisher_jump(1.0, 1.0).unwrap(),
            c.entropy_jump_cert(1.0, 1.0).unwrap(),
            c.entropy_jump_noreg(1.0).unwrap(),
            c.lsi_noreg(&DEFAULT_EPS_GRID).unwrap(),
            c.lsi_reg(1.0, 1.0).unwrap(),
            c.improved_lsi().unwrap(),
            c.dv_lemma().unwrap(),
            c.d_vs_deficit().unwrap(),
        ] {
            assert!(cert.pass, "{cert:?}");
            assert!(cert.lhs.abs() < 1e-6 && cert.rhs.abs() < 1e-6, "{cert:?}");
        }
        let stam = c.improved_stam().unwrap();
        assert!(stam.pass);
        assert!((stam.lhs - 1.0).abs() < 1e-6 && (stam.rhs - 1.0).abs() < 1e-6, "{stam:?}");
    }

    #[test]
    fn mixture_certificates_pass() {
        for d in [2, 5] {
            let m = example_mixture(d);
            let c = Certifier::new(&m).unwrap();
            for eps in [0.5, 1.0, 2.0] {
                let f = c.fisher_jump(2.0, eps).unwrap();
                assert!(f.pass && f.margin > 0.0, "{f:?}");
                let e = c.entropy_jump_cert(2.0, eps).unwrap();
                assert!(e.pass && e.margin > 0.0, "{e:?}");
                let n = c.entropy_jump_noreg(eps).unwrap();
                assert!(n.pass, "{n:?}");
                let l = c.lsi_reg(2.0, eps).unwrap();
                assert!(l.pass, "{l:?}");
            }
            let lsi = c.lsi_noreg(&[0.25, 0.5, 1.0, 2.0]).unwrap();
            assert!(lsi.pass && lsi.argmax_eps.is_some(), "{lsi:?}");
            let il = c.improved_lsi().unwrap();
            assert!(il.pass && il.margin > 0.0, "{il:?}");
            assert!(c.improved_stam().unwrap().pass);
            assert!(c.d_vs_deficit().unwrap().pass);
            assert!(c.dv_lemma().unwrap().pass);
        }
    }

    #[test]
    fn lsi_grid_max_never_exceeds_deficit() {
        let m = example_mixture(2);
        let c = Certifier::new(&m).unwrap();
        let grid = [0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0];
        let best = c.lsi_noreg(&grid).unwrap();
        for &e in &grid {
            let single = c.lsi_noreg(&[e]).unwrap();
            assert!(single.rhs <= best.rhs);
        }
        assert!(best.rhs <= best.lhs + best.tolerance);
    }

    #[test]
    fn fisher_certificate_scales_with_profile() {
        let m = example_mixture(2);
        let t = 3.0;
        let a = certify_fisher_jump(&m, 2.0, 1.0).unwrap();
        let b = certify_fisher_jump(&m.scaled(t).unwrap(), 2.0 / (t * t), 1.0).unwrap();
        assert_relative_eq!(b.lhs, a.lhs / (t * t), max_relative = 1e-6);
        assert_relative_eq!(b.rhs, a.rhs / (t * t), max_relative = 1e-6);
    }

    #[test]
    fn standardization_leaves_dimensionless_certificates_unchanged() {
        let m = RadialProfile::mixture(3, vec![0.3, 0.7], vec![1.0, 3.0]).unwrap();
        let (s, _) = m.standardized().unwrap();
        let a = certify_entropy_jump(&m, 1.0, 1.0).unwrap();
        let b = certify_entropy_jump(&s, 1.0 * m.second_moment() / 3.0, 1.0).unwrap();
        assert_relative_eq!(a.lhs, b.lhs, max_relative = 1e-9);
        assert_relative_eq!(a.rhs, b.rhs, max_relative = 1e-9);
    }

    #[test]
    fn marginal_eighth_moment_matches_mixture_oracle() {
        for d in [2, 8] {
            let m = example_mixture(d);
            let (x, _) = m.standardized().unwrap();
            let spec = x.mixture_spec().unwrap();
            let oracle: f64 = spec.weights.iter().zip(&spec.variances).map(|(p, s)| p * 105.0 * s.powi(4)).sum();
            let got = marginal_eighth_moment(&x).unwrap();
            assert_relative_eq!(got.value, oracle, max_relative = 1e-10);
            // direct quadrature over the one-dimensional marginal density
            let gl = crate::quadrature::GaussRule::legendre(200);
            let marg = |z: f64| -> f64 {
                spec.weights
                    .iter()
                    .zip(&spec.variances)
                    .map(|(p, s)| p * (-z * z / (2.0 * s)).exp() / (2.0 * std::f64::consts::PI * s).sqrt())
                    .sum()
            };
            let direct = 2.0 * gl.integrate_on(0.0, 20.0, |z| z.powi(8) * marg(z));
            assert_relative_eq!(got.value, direct, max_relative = 1e-9);
        }
    }

    #[test]
    fn d_vs_deficit_mixtures() {
        for d in [2, 8] {
            let cert = certify_d_vs_deficit(&example_mixture(d)).unwrap();
            assert!(cert.pass, "{cert:?}");
        }
    }

    #[test]
    fn chi_moment_bound_holds() {
        let m = example_mixture(3);
        for eps in [0.5, 1.0, 2.0] {
            let cert = certify_chi_moment(&m, eps, &[0.0, 0.1, 0.5, 1.0]).unwrap();
            assert!(cert.pass && cert.margin > 0.0, "{cert:?}");
            assert!(cert.details["chi_norm"] <= cert.details["chi_bound"]);
        }
    }

    #[test]
    fn mixture_example_degenerate_is_trivial() {
        let spec = GaussianMixtureSpec::new(vec![0.5, 0.5], vec![1.0, 1.0]).unwrap();
        let cert = certify_mixture_example(&spec, 8).unwrap();
        assert!(cert.pass);
        assert!(cert.lhs.abs() < 1e-6 && cert.rhs.abs() < 1e-6, "{cert:?}");
    }

    #[test]
    fn mixture_example_d16_passes() {
        let spec = GaussianMixtureSpec::new(vec![0.5, 0.5], vec![0.5, 1.5]).unwrap();
        let cert = certify_mixture_example(&spec, 16).unwrap();
        assert!(cert.pass && cert.margin > 0.0, "{cert:?}");
    }

    #[test]
    fn certificate_names_round_trip() {
        for n in CertificateName::ALL {
            assert_eq!(n.as_str().parse::<CertificateName>().unwrap(), n);
            let json = serde_json::to_string(&n).unwrap();
            assert_eq!(json, format!("\"{}\"", n.as_str()));
        }
        assert!("Bogus".parse::<CertificateName>().is_err());
    }
}
