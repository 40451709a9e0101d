//! Special functions used throughout the crate: sphere areas, chi-square
//! moments, regularized incomplete gamma functions and chi quantiles.

use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};

pub use statrs::function::gamma::ln_gamma as log_gamma;

/// Surface area of the unit sphere `S^{n}` embedded in `R^{n+1}`, i.e.
/// `2 π^{(n+1)/2} / Γ((n+1)/2)`.
pub fn sphere_area(n: usize) -> f64 {
    log_sphere_area(n).exp()
}

pub fn log_sphere_area(n: usize) -> f64 {
    let half = 0.5 * (n as f64 + 1.0);
    std::f64::consts::LN_2 + half * std::f64::consts::PI.ln() - ln_gamma(half)
}

/// `ln B(a, b)`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `E|G|^{2p}` for a standard Gaussian in dimension `d`: `2^p Γ(p + d/2) / Γ(d/2)`.
pub fn chi_square_moment(d: usize, p: f64) -> f64 {
    let h = 0.5 * d as f64;
    (p * std::f64::consts::LN_2 + ln_gamma(p + h) - ln_gamma(h)).exp()
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn reg_lower_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x.is_infinite() {
        1.0
    } else {
        gamma_lr(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn reg_upper_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x.is_infinite() {
        0.0
    } else {
        gamma_ur(a, x)
    }
}

/// Distribution function of `|G| / sqrt(d)` for a standard Gaussian `G` in `R^d`.
pub fn scaled_chi_cdf(d: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    reg_lower_gamma(0.5 * d as f64, 0.5 * d as f64 * x * x)
}

/// Complement of [`scaled_chi_cdf`].
pub fn scaled_chi_sf(d: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    reg_upper_gamma(0.5 * d as f64, 0.5 * d as f64 * x * x)
}

/// Density of `|G| / sqrt(d)`.
pub fn scaled_chi_pdf(d: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let h = 0.5 * d as f64;
    // |G|^2 ~ Gamma(h, 2); y = d x^2
    let ln = std::f64::consts::LN_2 + h * h.ln() + (d as f64 - 1.0) * x.ln() - h * x * x - ln_gamma(h);
    ln.exp()
}

/// Quantile of `|G| / sqrt(d)`, the inverse of [`scaled_chi_cdf`].
pub fn scaled_chi_quantile(d: usize, q: f64) -> Result<f64> {
    invert_monotone(
        q,
        |x| scaled_chi_cdf(d, x),
        |x| scaled_chi_sf(d, x),
        |x| scaled_chi_pdf(d, x),
        0.0,
        1.0,
    )
}

/// Inverts a continuous distribution function on `[0, ∞)`.
///
/// Lower-tail probabilities are matched against `cdf`, upper-tail ones
/// against `sf` so that quantiles near 1 keep their relative accuracy.
pub fn invert_monotone<C, S, P>(q: f64, cdf: C, sf: S, pdf: P, lo: f64, guess_hi: f64) -> Result<f64>
where
    C: Fn(f64) -> f64,
    S: Fn(f64) -> f64,
    P: Fn(f64) -> f64,
{
    if !(0.0..=1.0).contains(&q) || q.is_nan() {
        return Err(Error::QuantileInversionFailure { q });
    }
    if q > 0.5 {
        invert_tail(1.0 - q, true, cdf, sf, pdf, lo, guess_hi)
    } else {
        invert_tail(q, false, cdf, sf, pdf, lo, guess_hi)
    }
}

/// Solves `cdf(x) = p` (or `sf(x) = p` when `upper`) for a tail
/// probability `p` given directly. Newton steps are taken inside a
/// maintained bracket and fall back to bisection whenever they leave it.
pub fn invert_tail<C, S, P>(p: f64, upper: bool, cdf: C, sf: S, pdf: P, lo: f64, guess_hi: f64) -> Result<f64>
where
    C: Fn(f64) -> f64,
    S: Fn(f64) -> f64,
    P: Fn(f64) -> f64,
{
    let q = if upper { 1.0 - p } else { p };
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::QuantileInversionFailure { q });
    }
    if p == 0.0 && !upper {
        return Ok(lo);
    }
    if p == 0.0 {
        return Err(Error::QuantileInversionFailure { q });
    }
    // residual is increasing in x
    let residual = |x: f64| if upper { p - sf(x) } else { cdf(x) - p };

    let mut a = lo;
    let mut b = guess_hi.max(lo + 1e-12);
    let mut expand = 0;
    while residual(b) < 0.0 {
        a = b;
        b = 2.0 * b + 1.0;
        expand += 1;
        if expand > 200 || !b.is_finite() {
            return Err(Error::QuantileInversionFailure { q });
        }
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let r = residual(x);
        if r == 0.0 {
            return Ok(x);
        }
        if r < 0.0 {
            a = x;
        } else {
            b = x;
        }
        let dens = pdf(x);
        let newton = if dens > 0.0 { x - r / dens } else { f64::NAN };
        let next = if newton.is_finite() && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if (next - x).abs() <= 1e-15 * x.abs().max(1e-300) || b - a <= 1e-15 * b.abs() {
            return Ok(next);
        }
        x = next;
    }
    if b - a <= 1e-10 * b.abs().max(1.0) {
        Ok(0.5 * (a + b))
    } else {
        Err(Error::QuantileInversionFailure { q })
    }
}

/// Quantile of `|G| / sqrt(d)` from a tail probability.
pub fn scaled_chi_tail_quantile(d: usize, p: f64, upper: bool) -> Result<f64> {
    invert_tail(
        p,
        upper,
        |x| scaled_chi_cdf(d, x),
        |x| scaled_chi_sf(d, x),
        |x| scaled_chi_pdf(d, x),
        0.0,
        1.0,
    )
}

/// `E|G| / sqrt(d)` for a standard Gaussian in `R^d`.
pub fn scaled_chi_mean(d: usize) -> f64 {
    let h = 0.5 * d as f64;
    (0.5 * std::f64::consts::LN_2 + ln_gamma(h + 0.5) - ln_gamma(h) - 0.5 * (d as f64).ln()).exp()
}

/// Standard normal distribution function and its complement.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Numerically stable `ln Σ exp(x_i)`.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let s: f64 = xs.into_iter().map(|x| (x - m).exp()).sum();
    m + s.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_areas() {
        // S^1 = 2π, S^2 = 4π, S^3 = 2π²
        assert_relative_eq!(sphere_area(1), 2.0 * std::f64::consts::PI, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(2), 4.0 * std::f64::consts::PI, max_relative = 1e-14);
        assert_relative_eq!(
            sphere_area(3),
            2.0 * std::f64::consts::PI.powi(2),
            max_relative = 1e-14
        );
    }

    #[test]
    fn chi_square_moments() {
        // E|G|^2 = d, E|G|^4 = d(d+2)
        for d in 2..10 {
            assert_relative_eq!(chi_square_moment(d, 1.0), d as f64, max_relative = 1e-13);
            assert_relative_eq!(
                chi_square_moment(d, 2.0),
                (d * (d + 2)) as f64,
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn chi_quantile_round_trip() {
        for &d in &[2usize, 3, 8, 64] {
            for &q in &[1e-9, 1e-3, 0.25, 0.5, 0.9, 1.0 - 1e-9] {
                let x = scaled_chi_quantile(d, q).unwrap();
                let back = if q > 0.5 {
                    1.0 - scaled_chi_sf(d, x)
                } else {
                    scaled_chi_cdf(d, x)
                };
                assert!((back - q).abs() <= 1e-13 * q.max(1e-3), "d={d} q={q} back={back}");
            }
        }
    }

    #[test]
    fn chi_tail_quantile_far_upper_tail() {
        let x = scaled_chi_tail_quantile(4, 1e-17, true).unwrap();
        let back = scaled_chi_sf(4, x);
        assert!((back / 1e-17 - 1.0).abs() < 1e-10, "{back}");
    }

    #[test]
    fn chi_mean_closed_form() {
        // E|G| = sqrt(pi/2) for d = 1 analogue check at d = 2: sqrt(pi/2)
        assert_relative_eq!(scaled_chi_mean(2) * 2f64.sqrt(), (std::f64::consts::PI / 2.0).sqrt(), max_relative = 1e-14);
        assert_relative_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-16);
        assert_relative_eq!(normal_cdf(-8.0), 6.220960574271785e-16, max_relative = 1e-10);
    }

    #[test]
    fn chi_quantile_rejects_bad_probability() {
        assert!(scaled_chi_quantile(3, 1.5).is_err());
        assert!(scaled_chi_quantile(3, f64::NAN).is_err());
    }

    #[test]
    fn chi_pdf_integrates_to_cdf() {
        let d = 5;
        let (a, b) = (0.3, 1.4);
        let n = 20_000;
        let h = (b - a) / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            s += scaled_chi_pdf(d, a + (i as f64 + 0.5) * h) * h;
        }
        assert_relative_eq!(s, scaled_chi_cdf(d, b) - scaled_chi_cdf(d, a), max_relative = 1e-8);
    }
}
