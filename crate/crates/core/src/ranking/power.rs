//! Sample-size planning for a paired t-test via the noncentral t distribution.

use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Largest sample size the search will consider.
pub const MAX_SAMPLE_SIZE: u32 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    One,
    Two,
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// CDF of the noncentral t distribution, `P(T ≤ t)` for `df` degrees of
/// freedom and noncentrality `delta`.
///
/// Lenth's series (Applied Statistics algorithm AS 243): a Poisson mixture
/// of regularized incomplete beta functions, summed until the remaining
/// mass bounds the error below `1e-12`.
pub fn noncentral_t_cdf(t: f64, df: f64, delta: f64) -> f64 {
    const ERRMAX: f64 = 1e-12;
    const ITRMAX: usize = 10_000;
    let (tt, del, negate) = if t < 0.0 {
        (-t, -delta, true)
    } else {
        (t, delta, false)
    };

    let mut tnc = 0.0;
    let x = tt * tt / (tt * tt + df);
    if x > 0.0 {
        let lambda = del * del;
        let mut p = 0.5 * (-0.5 * lambda).exp();
        let mut q = (2.0 / std::f64::consts::PI).sqrt() * p * del;
        let mut s = 0.5 - p;
        let mut a = 0.5;
        let b = 0.5 * df;
        let rxb = (1.0 - x).powf(b);
        let albeta = 0.5 * std::f64::consts::PI.ln() + ln_gamma(b) - ln_gamma(0.5 + b);
        let mut xodd = beta_reg(a, b, x);
        let mut godd = 2.0 * rxb * (a * x.ln() - albeta).exp();
        let mut xeven = 1.0 - rxb;
        let mut geven = b * x * rxb;
        tnc = p * xodd + q * xeven;
        let mut en = 1.0;
        for _ in 0..ITRMAX {
            a += 1.0;
            xodd -= godd;
            xeven -= geven;
            godd *= x * (a + b - 1.0) / a;
            geven *= x * (a + b - 0.5) / (a + 0.5);
            p *= lambda / (2.0 * en);
            q *= lambda / (2.0 * en + 1.0);
            s -= p;
            en += 1.0;
            tnc += p * xodd + q * xeven;
            let errbd = 2.0 * s * (xodd - godd);
            if errbd.abs() <= ERRMAX {
                break;
            }
        }
    }
    tnc += normal_cdf(-del);
    let out = if negate { 1.0 - tnc } else { tnc };
    out.clamp(0.0, 1.0)
}

/// Power of a paired t-test with `n` pairs and standardized effect `d`.
pub fn paired_t_power(n: u32, d: f64, alpha: f64, tail: Tail) -> f64 {
    let df = (n - 1) as f64;
    let delta = d * (n as f64).sqrt();
    let central = StudentsT::new(0.0, 1.0, df).expect("df ≥ 1");
    match tail {
        Tail::One => {
            let crit = central.inverse_cdf(1.0 - alpha);
            1.0 - noncentral_t_cdf(crit, df, delta)
        }
        Tail::Two => {
            let crit = central.inverse_cdf(1.0 - alpha / 2.0);
            1.0 - noncentral_t_cdf(crit, df, delta) + noncentral_t_cdf(-crit, df, delta)
        }
    }
}

/// Smallest `n ≥ 2` whose paired t-test power reaches `power`.
pub fn paired_t_sample_size(d: f64, alpha: f64, power: f64, tail: Tail) -> Result<u32> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::invalid(format!(
            "effect size must be positive, got {d}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) || !(power > 0.0 && power < 1.0) {
        return Err(Error::invalid(format!(
            "alpha ({alpha}) and power ({power}) must lie in (0, 1)"
        )));
    }
    (2..=MAX_SAMPLE_SIZE)
        .find(|&n| paired_t_power(n, d, alpha, tail) >= power)
        .ok_or_else(|| {
            Error::invalid(format!(
                "no sample size up to {MAX_SAMPLE_SIZE} reaches power {power}"
            ))
        })
}
