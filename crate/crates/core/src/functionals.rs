//! Entropy, Fisher information and the quantities derived from them, plus
//! the one-dimensional Wasserstein distance between radial laws.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{sum_with, Estimate, GaussRule};
use crate::radial::RadialProfile;
use crate::special::{normal_cdf, normal_pdf, scaled_chi_mean, scaled_chi_tail_quantile};

const TWO_PI_E: f64 = 2.0 * std::f64::consts::PI * std::f64::consts::E;

/// Allowed disagreement between the two resolutions, relative to
/// `max(1, |value|)`.
pub const DIVERGENCE_BUDGET: f64 = 1e-6;

/// Mass that may be dropped because the score cannot be evaluated.
pub const EXCLUDED_MASS_BUDGET: f64 = 1e-12;

fn checked(what: &'static str, fine: f64, coarse: f64) -> Result<Estimate> {
    let est = Estimate::from_pair(fine, coarse);
    if !fine.is_finite() || est.err > DIVERGENCE_BUDGET * fine.abs().max(1.0) {
        return Err(Error::QuadratureDivergence { what, fine, coarse });
    }
    Ok(est)
}

/// Differential entropy `h(X) = -∫ f log f` in nats.
pub fn entropy(profile: &RadialProfile) -> Result<Estimate> {
    let precision = profile.settings().precision;
    let eval = |nodes: &crate::quadrature::RadialNodes| {
        sum_with(
            precision,
            nodes.r.iter().zip(&nodes.w).map(|(&r, &w)| {
                let lf = profile.log_density(r);
                if lf == f64::NEG_INFINITY {
                    0.0
                } else {
                    -w * lf.exp() * lf
                }
            }),
        )
    };
    let fine = eval(profile.fine_nodes());
    let coarse = eval(profile.coarse_nodes());
    let mass = profile.mass();
    // entropy of the normalized density f / m
    let corr = mass.ln();
    checked("entropy", fine / mass + corr, coarse / mass + corr)
}

/// Fisher information `J(X) = ∫ |∇f|² / f`.
pub fn fisher(profile: &RadialProfile) -> Result<Estimate> {
    if profile.has_trailing_zeros() {
        return Err(Error::UnboundedScore { excluded_mass: f64::INFINITY });
    }
    let precision = profile.settings().precision;
    let eval = |nodes: &crate::quadrature::RadialNodes| -> Result<(f64, f64)> {
        let mut excluded = 0.0;
        let mut terms = Vec::with_capacity(nodes.len());
        for (&r, &w) in nodes.r.iter().zip(&nodes.w) {
            let f = profile.density(r);
            match profile.score(r) {
                Ok(psi) => terms.push(w * f * psi * psi),
                Err(Error::VanishingDensity { .. }) => excluded += w * f,
                Err(e) => return Err(e),
            }
        }
        Ok((sum_with(precision, terms), excluded))
    };
    let (fine, excluded) = eval(profile.fine_nodes())?;
    let (coarse, _) = eval(profile.coarse_nodes())?;
    let mass = profile.mass();
    if excluded / mass > EXCLUDED_MASS_BUDGET {
        return Err(Error::UnboundedScore { excluded_mass: excluded / mass });
    }
    checked("fisher", fine / mass, coarse / mass)
}

/// `E|X|²` with its quadrature error.
pub fn second_moment(profile: &RadialProfile) -> Estimate {
    profile.moments().second_moment
}

/// Entropy of the matched Gaussian `G^X`.
pub fn matched_gaussian_entropy(dim: usize, second_moment: f64) -> f64 {
    0.5 * dim as f64 * (TWO_PI_E * second_moment / dim as f64).ln()
}

fn relative_entropy_from(dim: usize, h: Estimate, m2: Estimate) -> Estimate {
    let d = dim as f64;
    let value = matched_gaussian_entropy(dim, m2.value) - h.value;
    Estimate::new(value, h.err + 0.5 * d * m2.err / m2.value)
}

fn relative_fisher_from(dim: usize, j: Estimate, m2: Estimate) -> Estimate {
    let d = dim as f64;
    let jg = d * d / m2.value;
    Estimate::new(j.value - jg, j.err + jg * m2.err / m2.value)
}

fn entropy_power_from(dim: usize, h: Estimate) -> Estimate {
    let n = (2.0 * h.value / dim as f64).exp() / TWO_PI_E;
    Estimate::new(n, n * 2.0 * h.err / dim as f64)
}

/// Non-Gaussianness `D(X) = h(G^X) - h(X)`.
pub fn relative_entropy(profile: &RadialProfile) -> Result<Estimate> {
    Ok(relative_entropy_from(profile.dim(), entropy(profile)?, second_moment(profile)))
}

/// `I(X) = J(X) - J(G^X)` with `J(G^X) = d² / E|X|²`.
pub fn relative_fisher(profile: &RadialProfile) -> Result<Estimate> {
    Ok(relative_fisher_from(profile.dim(), fisher(profile)?, second_moment(profile)))
}

/// Entropy power `N(X) = exp(2h/d) / (2πe)`.
pub fn entropy_power(profile: &RadialProfile) -> Result<Estimate> {
    Ok(entropy_power_from(profile.dim(), entropy(profile)?))
}

/// All scalar functionals of one profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub h: f64,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "N")]
    pub n: f64,
    pub second_moment: f64,
    /// Smallest covariance eigenvalue, `E|X|² / d` for radial laws.
    pub lambda: f64,
    pub h_err: f64,
    #[serde(rename = "J_err")]
    pub j_err: f64,
    #[serde(rename = "D_err")]
    pub d_err: f64,
    #[serde(rename = "I_err")]
    pub i_err: f64,
    #[serde(rename = "N_err")]
    pub n_err: f64,
    pub second_moment_err: f64,
    pub lambda_err: f64,
}

impl FunctionalReport {
    pub fn compute(profile: &RadialProfile) -> Result<Self> {
        let dim = profile.dim();
        let h = entropy(profile)?;
        let j = fisher(profile)?;
        let m2 = second_moment(profile);
        let d = relative_entropy_from(dim, h, m2);
        let i = relative_fisher_from(dim, j, m2);
        let n = entropy_power_from(dim, h);
        Ok(FunctionalReport {
            h: h.value,
            j: j.value,
            d: d.value,
            i: i.value,
            n: n.value,
            second_moment: m2.value,
            lambda: m2.value / dim as f64,
            h_err: h.err,
            j_err: j.err,
            d_err: d.err,
            i_err: i.err,
            n_err: n.err,
            second_moment_err: m2.err,
            lambda_err: m2.err / dim as f64,
        })
    }

    /// LSI deficit `½I - D`.
    pub fn lsi_deficit(&self) -> Estimate {
        Estimate::new(0.5 * self.i - self.d, 0.5 * self.i_err + self.d_err)
    }

    pub const CSV_HEADER: &'static str =
        "h,J,D,I,N,second_moment,lambda,h_err,J_err,D_err,I_err,N_err,second_moment_err,lambda_err";

    pub fn csv_row(&self) -> String {
        [
            self.h,
            self.j,
            self.d,
            self.i,
            self.n,
            self.second_moment,
            self.lambda,
            self.h_err,
            self.j_err,
            self.d_err,
            self.i_err,
            self.n_err,
            self.second_moment_err,
            self.lambda_err,
        ]
        .iter()
        .map(|v| format!("{v:.17e}"))
        .collect::<Vec<_>>()
        .join(",")
    }
}

/// Result of a Wasserstein computation between `R = |X|/√d` and
/// `|G|/√d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct W2Report {
    /// `W₂(R, |G|/√d)`
    pub w2: f64,
    pub err: f64,
    /// `‖R - 1‖₂`
    pub radius_spread: f64,
    /// `‖|G|/√d - 1‖₂`
    pub chi_spread: f64,
    /// Slack in `‖R-1‖₂ - ‖|G|/√d-1‖₂ ≤ W₂ ≤ ‖R-1‖₂ + ‖|G|/√d-1‖₂`.
    pub deviation_slack: f64,
}

/// Quantile nodes `q_k` in probability space obtained from Gauss–Legendre
/// panels in the normal scale `q = Φ(z)`, which resolves both tails.
struct ProbabilityNodes {
    /// lower-tail probability, upper-tail probability, weight
    nodes: Vec<(f64, f64, f64)>,
}

const Z_RANGE: f64 = 8.5;

impl ProbabilityNodes {
    fn new(total: usize, order: usize) -> Self {
        let panels = (total / order).max(1);
        let rule = GaussRule::legendre(order);
        let width = 2.0 * Z_RANGE / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        for k in 0..panels {
            let a = -Z_RANGE + k as f64 * width;
            let half = 0.5 * width;
            let mid = a + half;
            for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
                let z = mid + half * x;
                nodes.push((normal_cdf(z), normal_cdf(-z), w * half * normal_pdf(z)));
            }
        }
        ProbabilityNodes { nodes }
    }
}

/// `W₂²` between two laws on `[0, ∞)` given by their tail quantiles.
fn w2_squared<A, B>(nodes: &ProbabilityNodes, qa: A, qb: B) -> Result<f64>
where
    A: Fn(f64, f64) -> Result<f64>,
    B: Fn(f64, f64) -> Result<f64>,
{
    let mut acc = 0.0;
    for &(lo, up, w) in &nodes.nodes {
        let diff = qa(lo, up)? - qb(lo, up)?;
        acc += w * diff * diff;
    }
    Ok(acc)
}

fn tail_args(lo: f64, up: f64) -> (f64, bool) {
    if lo <= 0.5 {
        (lo, false)
    } else {
        (up, true)
    }
}

/// `W₂(R, |G|/√d)` for `R = |X|/√d`, after rescaling `X` to `E|X|² = d`.
pub fn w2_radial_to_chi(profile: &RadialProfile) -> Result<W2Report> {
    let (x, _) = profile.standardized()?;
    let dim = x.dim();
    let sd = (dim as f64).sqrt();
    let total = x.settings().w2_nodes;
    let qa = |lo: f64, up: f64| {
        let (p, upper) = tail_args(lo, up);
        Ok(x.radial_tail_quantile(p, upper)? / sd)
    };
    let qb = |lo: f64, up: f64| {
        let (p, upper) = tail_args(lo, up);
        scaled_chi_tail_quantile(dim, p, upper)
    };
    let fine = w2_squared(&ProbabilityNodes::new(total, 16), qa, qb)?.max(0.0);
    let coarse = w2_squared(&ProbabilityNodes::new(total / 2, 16), qa, qb)?.max(0.0);
    let w2 = fine.sqrt();
    let err = (w2 - coarse.sqrt()).abs();
    let mean_r = x.mean_norm() / sd;
    let radius_spread = (2.0 - 2.0 * mean_r).max(0.0).sqrt();
    let chi_spread = (2.0 - 2.0 * scaled_chi_mean(dim)).max(0.0).sqrt();
    let deviation_slack = chi_spread - (w2 - radius_spread).abs();
    Ok(W2Report { w2, err, radius_spread, chi_spread, deviation_slack })
}

/// `W₂(|X_a|, |X_b|)` between the radial laws of two profiles.
pub fn w2_between(a: &RadialProfile, b: &RadialProfile) -> Result<Estimate> {
    let total = a.settings().w2_nodes.max(b.settings().w2_nodes);
    let qa = |lo: f64, up: f64| {
        let (t, upper) = tail_args(lo, up);
        a.radial_tail_quantile(t, upper)
    };
    let qb = |lo: f64, up: f64| {
        let (t, upper) = tail_args(lo, up);
        b.radial_tail_quantile(t, upper)
    };
    let fine = w2_squared(&ProbabilityNodes::new(total, 16), qa, qb)?.max(0.0);
    let coarse = w2_squared(&ProbabilityNodes::new(total / 2, 16), qa, qb)?.max(0.0);
    Ok(Estimate::from_pair(fine.sqrt(), coarse.sqrt()))
}
