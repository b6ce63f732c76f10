//! Special functions backing the price action model: the standard normal CDF
//! (through `erfc`) and the Student-t CDF (through the regularized incomplete
//! beta function).

use crate::error::{Error, Result};

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// Complementary error function.
///
/// Alternating Taylor series for `|x| < 2.5`, Lentz continued fraction in
/// the tails. Absolute error is below 1e-15 over the real line.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.5 {
        return 1.0 - erf_series(x);
    }
    if x > 27.3 {
        return 0.0;
    }
    erfc_continued_fraction(x)
}

fn erf_series(x: f64) -> f64 {
    // erf(x) = 2/sqrt(pi) * sum (-1)^n x^(2n+1) / (n! (2n+1))
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= -x2 / n;
        let contrib = term / (2.0 * n + 1.0);
        sum += contrib;
        if contrib.abs() <= EPS * sum.abs() {
            break;
        }
    }
    2.0 * FRAC_1_SQRT_PI * sum
}

fn erfc_continued_fraction(x: f64) -> f64 {
    // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for n in 1..500 {
        let a = n as f64 / 2.0;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    (-x * x).exp() * FRAC_1_SQRT_PI / f
}

/// Standard normal CDF. Infinite arguments map to 0 and 1.
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::NonFinite(
            "standard normal CDF argument is NaN".into(),
        ));
    }
    Ok(phi(x))
}

#[inline]
pub(crate) fn phi(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
    }
}

/// Upper tail `1 - Phi(x)` without cancellation for large `x`.
pub fn std_normal_sf(x: f64) -> f64 {
    phi(-x)
}

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized incomplete beta `I_x(a, b)`, with `y = 1 - x` supplied by the
/// caller so that values of `x` close to 1 keep full precision.
fn reg_inc_beta(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * y.ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, y) / b
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..100_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Student-t CDF with `dof` degrees of freedom.
pub fn student_t_cdf(x: f64, dof: f64) -> Result<f64> {
    if !(dof > 0.0) || dof.is_infinite() {
        return Err(Error::InvalidParameter(format!(
            "degrees of freedom must be positive and finite, got {dof}"
        )));
    }
    if x.is_nan() {
        return Err(Error::NonFinite("Student-t CDF argument is NaN".into()));
    }
    Ok(t_cdf(x, dof))
}

pub(crate) fn t_cdf(x: f64, dof: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == 0.0 {
        return 0.5;
    }
    let x2 = x * x;
    let denom = dof + x2;
    // one-sided tail mass 0.5 * I_{dof/(dof+x^2)}(dof/2, 1/2)
    let tail = 0.5 * reg_inc_beta(dof / 2.0, 0.5, dof / denom, x2 / denom);
    if x > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_basic_values() {
        assert_eq!(std_normal_cdf(0.0).unwrap(), 0.5);
        assert!((std_normal_cdf(1.959964).unwrap() - 0.975).abs() < 1e-6);
        assert_eq!(std_normal_cdf(f64::INFINITY).unwrap(), 1.0);
        assert_eq!(std_normal_cdf(f64::NEG_INFINITY).unwrap(), 0.0);
        for x in [0.1, 0.7, 1.3, 2.4, 3.7, 5.5, 8.0] {
            let s = std_normal_cdf(x).unwrap() + std_normal_cdf(-x).unwrap();
            assert!((s - 1.0).abs() < 1e-15, "{x}: {s}");
        }
    }

    #[test]
    fn phi_rejects_nan() {
        assert!(std_normal_cdf(f64::NAN).is_err());
    }

    #[test]
    fn erfc_is_continuous_at_the_switch() {
        let lo = erfc(2.5 - 1e-12);
        let hi = erfc(2.5);
        assert!((lo - hi).abs() < 1e-14);
    }

    #[test]
    fn ln_gamma_integers() {
        let mut fact = 1.0_f64;
        for n in 1..20 {
            fact *= n as f64;
            let got = ln_gamma(n as f64 + 1.0);
            assert!((got - fact.ln()).abs() < 1e-12 * fact.ln().max(1.0), "{n}");
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
    }

    #[test]
    fn t_cdf_values() {
        assert_eq!(student_t_cdf(0.0, 3.3).unwrap(), 0.5);
        assert!((student_t_cdf(1.0, 1.0).unwrap() - 0.75).abs() < 1e-12);
        assert!((student_t_cdf(2.0, 4.0).unwrap() - 0.941942).abs() < 1e-5);
        // dof = 2 closed form: 1/2 + x / (2 sqrt(2 + x^2))
        for x in [-3.0, -0.4, 0.2, 1.7, 9.0] {
            let exact = 0.5 + x / (2.0 * (2.0_f64 + x * x).sqrt());
            assert!((student_t_cdf(x, 2.0).unwrap() - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn t_cdf_rejects_bad_dof() {
        assert!(student_t_cdf(1.0, 0.0).is_err());
        assert!(student_t_cdf(1.0, -2.0).is_err());
        assert!(student_t_cdf(1.0, f64::NAN).is_err());
    }

    #[test]
    fn t_cdf_approaches_normal_for_large_dof() {
        for x in [-2.0, -0.5, 0.3, 1.5] {
            let t = student_t_cdf(x, 1e6).unwrap();
            assert!((t - phi(x)).abs() < 1e-5);
        }
    }
}
