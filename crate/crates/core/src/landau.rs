//! Landau entropy production
//!
//! `½ ∬ |x - x*|² f(x) f(x*) |Π(x - x*)[ρ(x) - ρ(x*)]|² dx dx*`
//!
//! with `ρ = ∇ log f` and `Π(w)` the projection onto `w^⊥`. For radial
//! profiles the integrand depends on `(r, r*, u)` only and is quadratic in
//! `u = cos γ`, so a low-order Gauss–Jacobi rule in `u` is exact. The Monte
//! Carlo oracle works with explicit vectors in `R^d`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::relative_fisher;
use crate::quadrature::{sum_with, Estimate, GaussRule, RadialNodes};
use crate::radial::{RadialProfile, RadiusSampler};
use crate::special::log_sphere_area;

/// Samples per independent random stream.
pub const MC_BLOCK: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method")]
pub enum LandauMethod {
    Reduced3D { fine_nodes: usize, coarse_nodes: usize, angular_order: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandauEstimate {
    pub value: f64,
    /// Quadrature error estimate, or the Monte Carlo standard error.
    pub err: f64,
    /// Probability mass where the score could not be evaluated.
    pub excluded_mass: f64,
    pub method: LandauMethod,
}

/// `|Π(w) v|²` for vectors in `R^d`.
pub fn projected_norm_sq(w: &[f64], v: &[f64]) -> f64 {
    let ww: f64 = w.iter().map(|x| x * x).sum();
    if ww == 0.0 {
        return v.iter().map(|x| x * x).sum();
    }
    let vw: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
    let c = vw / ww;
    v.iter().zip(w).map(|(a, b)| (a - c * b) * (a - c * b)).sum()
}

struct ScoredNodes {
    r: Vec<f64>,
    /// weight times density
    mass: Vec<f64>,
    psi: Vec<f64>,
    excluded: f64,
}

fn scored(profile: &RadialProfile, nodes: &RadialNodes) -> ScoredNodes {
    let total = profile.mass();
    let mut out = ScoredNodes { r: Vec::new(), mass: Vec::new(), psi: Vec::new(), excluded: 0.0 };
    for (&r, &w) in nodes.r.iter().zip(&nodes.w) {
        let m = w * profile.density(r) / total;
        match profile.score(r) {
            Ok(psi) => {
                out.r.push(r);
                out.mass.push(m);
                out.psi.push(psi);
            }
            Err(_) => out.excluded += m,
        }
    }
    out
}

fn reduced_sum(profile: &RadialProfile, nodes: &ScoredNodes, rule: &GaussRule) -> f64 {
    let dim = profile.dim();
    // angular weights integrate to S_{d-1}/S_{d-2}; normalize to a mean
    let norm = (log_sphere_area(dim - 2) - log_sphere_area(dim - 1)).exp();
    let precision = profile.settings().precision;
    let rows: Vec<f64> = (0..nodes.r.len())
        .into_par_iter()
        .map(|k| {
            let (r, pr, mk) = (nodes.r[k], nodes.psi[k], nodes.mass[k]);
            let terms = (0..nodes.r.len()).map(|l| {
                let (s, ps, ml) = (nodes.r[l], nodes.psi[l], nodes.mass[l]);
                let mut ang = 0.0;
                for (&u, &v) in rule.nodes.iter().zip(&rule.weights) {
                    // w = r x̂ - s ŷ and δ = ψ(r) x̂ - ψ(s) ŷ with x̂·ŷ = u
                    let ww = r * r + s * s - 2.0 * r * s * u;
                    let dd = pr * pr + ps * ps - 2.0 * pr * ps * u;
                    let wd = pr * r - pr * s * u - ps * r * u + ps * s;
                    ang += v * (ww * dd - wd * wd);
                }
                ml * ang
            });
            mk * sum_with(precision, terms)
        })
        .collect();
    0.5 * norm * sum_with(precision, rows)
}

/// Reduced deterministic quadrature of the Landau functional.
pub fn landau_production(profile: &RadialProfile) -> Result<LandauEstimate> {
    let rule = GaussRule::jacobi(4, 0.5 * (profile.dim() as f64 - 3.0), 0.5 * (profile.dim() as f64 - 3.0));
    let fine_nodes = scored(profile, profile.fine_nodes());
    let coarse_nodes = scored(profile, profile.coarse_nodes());
    let fine = reduced_sum(profile, &fine_nodes, &rule);
    let coarse = reduced_sum(profile, &coarse_nodes, &rule);
    let est = Estimate::from_pair(fine, coarse);
    Ok(LandauEstimate {
        value: est.value,
        err: est.err,
        excluded_mass: fine_nodes.excluded,
        method: LandauMethod::Reduced3D {
            fine_nodes: fine_nodes.r.len(),
            coarse_nodes: coarse_nodes.r.len(),
            angular_order: rule.len(),
        },
    })
}

fn sample_point<R: Rng>(
    rng: &mut R,
    sampler: &RadiusSampler<'_>,
    profile: &RadialProfile,
    x: &mut [f64],
    rho: &mut [f64],
) -> Result<bool> {
    let mut n2 = 0.0;
    for xi in x.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *xi = z;
        n2 += z * z;
    }
    let u: f64 = rng.random();
    let r = sampler.quantile(u)?;
    let scale = r / n2.sqrt();
    for xi in x.iter_mut() {
        *xi *= scale;
    }
    match profile.score(r) {
        Ok(psi) => {
            let c = if r > 0.0 { psi / r } else { 0.0 };
            for (ri, xi) in rho.iter_mut().zip(x.iter()) {
                *ri = c * xi;
            }
            Ok(true)
        }
        Err(Error::VanishingDensity { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Monte Carlo estimate over `n` independent pairs with a per-block
/// counter-based stream, so results do not depend on the thread count.
pub fn landau_production_mc(profile: &RadialProfile, n: usize, seed: u64) -> Result<LandauEstimate> {
    let dim = profile.dim();
    let sampler = RadiusSampler::new(profile)?;
    let blocks = n.div_ceil(MC_BLOCK);
    let partial: Vec<Result<(f64, f64, usize, usize)>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = MC_BLOCK.min(n - b * MC_BLOCK);
            let (mut x, mut y) = (vec![0.0; dim], vec![0.0; dim]);
            let (mut rx, mut ry) = (vec![0.0; dim], vec![0.0; dim]);
            let (mut w, mut v) = (vec![0.0; dim], vec![0.0; dim]);
            let (mut s1, mut s2, mut dropped) = (0.0, 0.0, 0usize);
            for _ in 0..count {
                let ok_x = sample_point(&mut rng, &sampler, profile, &mut x, &mut rx)?;
                let ok_y = sample_point(&mut rng, &sampler, profile, &mut y, &mut ry)?;
                if !(ok_x && ok_y) {
                    dropped += 1;
                    continue;
                }
                for i in 0..dim {
                    w[i] = x[i] - y[i];
                    v[i] = rx[i] - ry[i];
                }
                let ww: f64 = w.iter().map(|a| a * a).sum();
                let g = 0.5 * ww * projected_norm_sq(&w, &v);
                s1 += g;
                s2 += g * g;
            }
            Ok((s1, s2, count, dropped))
        })
        .collect();
    let (mut s1, mut s2, mut total, mut dropped) = (0.0, 0.0, 0usize, 0usize);
    for p in partial {
        let (a, b, c, d) = p?;
        s1 += a;
        s2 += b;
        total += c;
        dropped += d;
    }
    let nf = total as f64;
    let mean = s1 / nf;
    let var = (s2 / nf - mean * mean).max(0.0) * nf / (nf - 1.0).max(1.0);
    Ok(LandauEstimate {
        value: mean,
        err: (var / nf).sqrt(),
        excluded_mass: dropped as f64 / nf,
        method: LandauMethod::MonteCarlo { samples: n, seed },
    })
}

/// Inputs and outcome of the Desvillettes–Villani comparison, on the
/// profile rescaled to `E|X|² = d` where `λ = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DvComparison {
    pub production: LandauEstimate,
    /// `(d - 1) I(X|G)`
    pub bound: Estimate,
    pub lambda: f64,
}

pub fn dv_comparison(profile: &RadialProfile) -> Result<DvComparison> {
    let (x, _) = profile.standardized()?;
    let production = landau_production(&x)?;
    let i = relative_fisher(&x)?;
    let lambda = x.second_moment() / x.dim() as f64;
    let k = lambda * (x.dim() as f64 - 1.0);
    Ok(DvComparison { production, bound: Estimate::new(k * i.value, k * i.err), lambda })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example_mixture(d: usize) -> RadialProfile {
        RadialProfile::mixture(d, vec![0.5, 0.5], vec![0.5, 1.5]).unwrap()
    }

    #[test]
    fn gaussian_production_vanishes() {
        for d in [2usize, 3, 7] {
            let g = RadialProfile::gaussian(d, 1.0).unwrap();
            let e = landau_production(&g).unwrap();
            assert!(e.value.abs() < 1e-8, "d={d} {}", e.value);
        }
        let g = RadialProfile::gaussian(3, 1.0).unwrap();
        let mc = landau_production_mc(&g, 100_000, 1).unwrap();
        assert!(mc.value.abs() <= 3.0 * mc.err + 1e-12, "{mc:?}");
    }

    // Under this generator seed 42 lands at z = -3.1; the calibration test
    // below shows the estimator and its standard error are sound.
    #[test]
    #[ignore = "fixed seed 42 draws a 3.1 sigma fluctuation"]
    fn reduced_matches_monte_carlo() {
        let m = example_mixture(2);
        let q = landau_production(&m).unwrap();
        let mc = landau_production_mc(&m, 1_000_000, 42).unwrap();
        let se = (q.err * q.err + mc.err * mc.err).sqrt();
        assert!((q.value - mc.value).abs() <= 3.0 * se, "{} vs {} ± {}", q.value, mc.value, mc.err);
    }

    #[test]
    fn reduced_matches_monte_carlo_over_seeds() {
        let m = example_mixture(2);
        let q = landau_production(&m).unwrap();
        let runs: Vec<LandauEstimate> =
            (0..300u64).map(|s| landau_production_mc(&m, 100_000, s).unwrap()).collect();
        let n = runs.len() as f64;
        let diffs: Vec<f64> = runs.iter().map(|r| r.value - q.value).collect();
        let mean = diffs.iter().sum::<f64>() / n;
        let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let se = runs.iter().map(|r| r.err).sum::<f64>() / n;
        assert!(mean.abs() <= 3.0 * sd / n.sqrt(), "bias {mean} sd {sd}");
        assert!((sd / se - 1.0).abs() < 0.15, "empirical sd {sd} vs reported se {se}");
        let outside = runs.iter().filter(|r| (r.value - q.value).abs() > 3.0 * r.err).count();
        assert!(outside <= 6, "{outside} of 300 runs outside 3 se");
    }

    #[test]
    fn mc_is_reproducible() {
        let m = example_mixture(3);
        let a = landau_production_mc(&m, 20_000, 7).unwrap();
        let b = landau_production_mc(&m, 20_000, 7).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let c = pool.install(|| landau_production_mc(&m, 20_000, 7).unwrap());
        assert_eq!(a.value.to_bits(), c.value.to_bits());
    }

    #[test]
    fn standard_error_scales_with_sample_count() {
        let m = example_mixture(2);
        let a = landau_production_mc(&m, 200_000, 3).unwrap();
        let b = landau_production_mc(&m, 800_000, 3).unwrap();
        let ratio = a.err / b.err;
        assert!((ratio / 2.0 - 1.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn dv_bound_holds() {
        for p in [
            example_mixture(2),
            example_mixture(5),
            RadialProfile::mixture(3, vec![0.3, 0.7], vec![0.4, 0.88 / 0.7]).unwrap(),
        ] {
            let c = dv_comparison(&p).unwrap();
            let tol = (c.production.err + c.bound.err).max(1e-9);
            assert!(c.production.value - c.bound.value >= -tol, "{c:?}");
            assert!((c.lambda - 1.0).abs() < 1e-10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn projection_algebra(v in proptest::collection::vec(-10.0f64..10.0, 5), w in proptest::collection::vec(-10.0f64..10.0, 5)) {
            let ww: f64 = w.iter().map(|x| x * x).sum();
            prop_assume!(ww > 1e-6);
            let vv: f64 = v.iter().map(|x| x * x).sum();
            let vw: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
            let want = vv - vw * vw / ww;
            let got = projected_norm_sq(&w, &v);
            prop_assert!((got - want).abs() <= 1e-12 * vv.max(1.0));
            prop_assert!(projected_norm_sq(&w, &w) <= 1e-12 * ww);
        }
    }
}
