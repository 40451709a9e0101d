//! Gauss rules and the composite radial / angular quadrature used by every
//! functional.
//!
//! Angular integrals over the sphere `S^{d-1}` are reduced to one-dimensional
//! integrals in `u = cos θ` against the weight `(1 - u²)^{(d-3)/2}`, which is
//! a symmetric Jacobi weight with `α = β = (d - 3)/2`. For `d = 2` the weight
//! has integrable endpoint singularities and the Jacobi rule absorbs them.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::special::{ln_beta, log_gamma, sphere_area};

/// Nodes and weights of a Gauss rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

type RuleKey = (usize, u64, u64);

fn rule_cache() -> &'static Mutex<HashMap<RuleKey, Arc<GaussRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<RuleKey, Arc<GaussRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl GaussRule {
    /// Gauss–Legendre rule with `n` nodes.
    pub fn legendre(n: usize) -> Arc<GaussRule> {
        Self::jacobi(n, 0.0, 0.0)
    }

    /// Gauss–Jacobi rule with `n` nodes for the weight `(1-x)^α (1+x)^β`.
    pub fn jacobi(n: usize, alpha: f64, beta: f64) -> Arc<GaussRule> {
        assert!(n >= 1, "rule needs at least one node");
        assert!(alpha > -1.0 && beta > -1.0, "Jacobi exponents must exceed -1");
        let key = (n, alpha.to_bits(), beta.to_bits());
        if let Some(rule) = rule_cache().lock().unwrap().get(&key) {
            return Arc::clone(rule);
        }
        let rule = Arc::new(build_jacobi(n, alpha, beta));
        rule_cache()
            .lock()
            .unwrap()
            .entry(key)
            .or_insert_with(|| Arc::clone(&rule))
            .clone()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ w_i f(x_i)` on the reference interval.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Integral over `[a, b]` of an unweighted integrand (Legendre rules only).
    pub fn integrate_on<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * self.integrate(|x| f(mid + half * x))
    }
}

// Jacobi polynomial P_n^{(α,β)} and P_{n-1} at x by the three-term recurrence.
fn jacobi_pair(n: usize, alpha: f64, beta: f64, x: f64) -> (f64, f64) {
    let ab = alpha + beta;
    let mut p_prev = 1.0;
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p = 0.5 * ((alpha - beta) + (ab + 2.0) * x);
    for k in 2..=n {
        let k = k as f64;
        let c = 2.0 * k + ab;
        let a1 = 2.0 * k * (k + ab) * (c - 2.0);
        let a2 = (c - 1.0) * (c * (c - 2.0) * x + alpha * alpha - beta * beta);
        let a3 = 2.0 * (k + alpha - 1.0) * (k + beta - 1.0) * c;
        let next = (a2 * p - a3 * p_prev) / a1;
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}

fn jacobi_derivative(n: usize, alpha: f64, beta: f64, x: f64, p: f64, p_prev: f64) -> f64 {
    let nf = n as f64;
    let c = 2.0 * nf + alpha + beta;
    (nf * ((alpha - beta) - c * x) * p + 2.0 * (nf + alpha) * (nf + beta) * p_prev) / (c * (1.0 - x * x))
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit QL with
/// Wilkinson shifts. `off[i]` couples rows `i - 1` and `i`; `off[0]` is unused.
fn tridiagonal_eigenvalues(mut d: Vec<f64>, mut e: Vec<f64>) -> Vec<f64> {
    let n = d.len();
    if n == 1 {
        return d;
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 100, "tridiagonal QL failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d
}

fn build_jacobi(n: usize, alpha: f64, beta: f64) -> GaussRule {
    let ab = alpha + beta;
    // Golub–Welsch: eigenvalues of the Jacobi matrix give starting nodes.
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    for i in 0..n {
        let k = i as f64;
        let c = 2.0 * k + ab;
        diag[i] = if i == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / (c * (c + 2.0))
        };
        if i + 1 < n {
            let k1 = k + 1.0;
            let c1 = 2.0 * k1 + ab;
            let b2 = if i == 0 {
                4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab).powi(2) * (3.0 + ab))
            } else {
                4.0 * k1 * (k1 + alpha) * (k1 + beta) * (k1 + ab) / (c1 * c1 * (c1 + 1.0) * (c1 - 1.0))
            };
            off[i + 1] = b2.sqrt();
        }
    }
    let mut nodes = tridiagonal_eigenvalues(diag, off);
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let nf = n as f64;
    let log_c = (ab + 1.0) * std::f64::consts::LN_2 + log_gamma(nf + alpha + 1.0) + log_gamma(nf + beta + 1.0)
        - log_gamma(nf + ab + 1.0)
        - log_gamma(nf + 1.0);
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        let mut xi = *x;
        for _ in 0..8 {
            let (p, pp) = jacobi_pair(n, alpha, beta, xi);
            let dp = jacobi_derivative(n, alpha, beta, xi, p, pp);
            let step = p / dp;
            let cand = xi - step;
            if !cand.is_finite() || cand <= -1.0 || cand >= 1.0 {
                break;
            }
            xi = cand;
            if step.abs() <= 1e-16 * xi.abs().max(1e-3) {
                break;
            }
        }
        *x = xi;
        let (p, pp) = jacobi_pair(n, alpha, beta, xi);
        let dp = jacobi_derivative(n, alpha, beta, xi, p, pp);
        weights.push((log_c - (1.0 - xi * xi).ln() - 2.0 * dp.abs().ln()).exp());
    }
    GaussRule { nodes, weights }
}

/// Accumulation precision for quadrature sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Double,
    /// Neumaier-compensated summation.
    Extended,
}

impl Precision {
    /// Reads `RADJUMP_PRECISION` (`double` | `extended`), defaulting to double.
    pub fn from_env() -> Precision {
        match std::env::var("RADJUMP_PRECISION").as_deref() {
            Ok("extended") => Precision::Extended,
            _ => Precision::Double,
        }
    }
}

/// Fixed-order summation, optionally compensated.
#[derive(Debug, Clone, Copy)]
pub struct Accumulator {
    sum: f64,
    comp: f64,
    precision: Precision,
}

impl Accumulator {
    pub fn new(precision: Precision) -> Self {
        Accumulator { sum: 0.0, comp: 0.0, precision }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        match self.precision {
            Precision::Double => self.sum += x,
            Precision::Extended => {
                let t = self.sum + x;
                if self.sum.abs() >= x.abs() {
                    self.comp += (self.sum - t) + x;
                } else {
                    self.comp += (x - t) + self.sum;
                }
                self.sum = t;
            }
        }
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn sum_with(precision: Precision, xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = Accumulator::new(precision);
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

/// A numerical value together with a quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub err: f64,
}

impl Estimate {
    pub fn new(value: f64, err: f64) -> Self {
        Estimate { value, err: err.abs() }
    }

    pub fn exact(value: f64) -> Self {
        Estimate { value, err: 0.0 }
    }

    /// From a fine and a coarse evaluation of the same quantity.
    pub fn from_pair(fine: f64, coarse: f64) -> Self {
        Estimate::new(fine, (fine - coarse).abs())
    }
}

/// Resolution settings shared by all quadratures of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSettings {
    /// Panel width for analytic profiles, as a multiple of the smallest
    /// component standard deviation.
    pub panel_width: f64,
    /// Gauss–Legendre order per panel (fine / coarse).
    pub radial_order: usize,
    pub radial_order_coarse: usize,
    /// Gauss–Legendre order per interval of a tabulated grid (fine / coarse).
    pub tabulated_order: usize,
    pub tabulated_order_coarse: usize,
    /// Largest angular Gauss–Jacobi order used by convolutions.
    pub angular_max_order: usize,
    /// Output grid spacing of numerical convolutions, relative to the
    /// smallest length scale of the inputs.
    pub output_spacing: f64,
    /// Quantile nodes for Wasserstein distances (the coarse check uses half).
    pub w2_nodes: usize,
    pub precision: Precision,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            panel_width: 0.5,
            radial_order: 16,
            radial_order_coarse: 12,
            tabulated_order: 6,
            tabulated_order_coarse: 4,
            angular_max_order: 256,
            output_spacing: 1.0 / 30.0,
            w2_nodes: 8192,
            precision: Precision::from_env(),
        }
    }
}

/// Radial nodes `r_k` with weights that already include the surface
/// measure, so `∫_{R^d} g(|x|) dx ≈ Σ_k w_k g(r_k)`.
#[derive(Debug, Clone)]
pub struct RadialNodes {
    pub r: Vec<f64>,
    pub w: Vec<f64>,
}

impl RadialNodes {
    /// Composite Gauss–Legendre over consecutive breakpoints.
    pub fn composite(dim: usize, breaks: &[f64], order: usize) -> RadialNodes {
        let rule = GaussRule::legendre(order);
        let area = sphere_area(dim - 1);
        let mut r = Vec::with_capacity(breaks.len() * order);
        let mut w = Vec::with_capacity(breaks.len() * order);
        for pair in breaks.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (&x, &wx) in rule.nodes.iter().zip(&rule.weights) {
                let ri = mid + half * x;
                r.push(ri);
                w.push(area * half * wx * ri.powi(dim as i32 - 1));
            }
        }
        RadialNodes { r, w }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

/// Panel breakpoints on `[0, r_max]`: uniform panels of width `h` with the
/// first panel split geometrically towards the origin.
pub fn graded_breaks(r_max: f64, h: f64) -> Vec<f64> {
    let h = h.min(r_max);
    let mut breaks = vec![0.0, h / 8.0, h / 4.0, h / 2.0];
    let n = (r_max / h).ceil().max(1.0) as usize;
    let step = r_max / n as f64;
    for i in 1..=n {
        breaks.push(step * i as f64);
    }
    if breaks[3] >= breaks[4] {
        breaks.truncate(1);
        breaks.extend((1..=n).map(|i| step * i as f64));
    }
    breaks
}

/// Angular rules for the weight `(1 - u²)^{(d-3)/2}`, ordered by size.
#[derive(Debug, Clone)]
pub struct AngularLadder {
    pub exponent: f64,
    pub rules: Vec<Arc<GaussRule>>,
}

impl AngularLadder {
    pub fn new(dim: usize, max_order: usize) -> AngularLadder {
        let exponent = 0.5 * (dim as f64 - 3.0);
        let mut rules = Vec::new();
        let mut n = 16;
        while n <= max_order.max(16) {
            rules.push(GaussRule::jacobi(n, exponent, exponent));
            n *= 2;
        }
        AngularLadder { exponent, rules }
    }

    /// Smallest rule adequate for an integrand varying like `exp(κ u)`.
    ///
    /// Gauss nodes cluster quadratically at the endpoints, so the order
    /// needed to resolve an endpoint layer of width `1/κ` grows like `√κ`
    /// for small exponents; large exponents push the peak inward and need
    /// order proportional to `κ / √(exponent)`.
    pub fn select(&self, kappa: f64) -> &GaussRule {
        let need = required_angular_order(kappa, self.exponent);
        for rule in &self.rules {
            if rule.len() as f64 >= need {
                return rule;
            }
        }
        self.rules.last().unwrap()
    }

    pub fn coarser(&self, rule: &GaussRule) -> &GaussRule {
        let idx = self.rules.iter().position(|r| r.len() == rule.len()).unwrap_or(0);
        &self.rules[idx.saturating_sub(1)]
    }

    /// Total mass of the weight, `B(1/2, (d-1)/2) = S_{d-1} / S_{d-2}`.
    pub fn weight_mass(&self) -> f64 {
        ln_beta(0.5, self.exponent + 1.0).exp()
    }
}

pub fn required_angular_order(kappa: f64, exponent: f64) -> f64 {
    let k = kappa.abs();
    let endpoint = 3.0 * k.sqrt() + 0.12 * k / (1.0 + exponent.max(0.0)).sqrt();
    12.0 + endpoint
}
