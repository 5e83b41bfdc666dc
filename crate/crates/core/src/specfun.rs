//! Special functions used by the count likelihoods.
//!
//! `ln_gamma` and `digamma` shift small arguments upward with the recurrence
//! and then evaluate the Stirling / asymptotic series. `ln_gamma_approx` is
//! the closed-form sinh approximation, kept as a cross-check only: the
//! likelihoods always call the exact functions.

use crate::error::{Error, Result};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this argument both series are evaluated after an upward shift.
const SERIES_THRESHOLD: f64 = 15.0;

/// Summation is used for `ln_gamma_ratio` / `digamma_diff` up to this many terms,
/// or whenever `a` dominates `b`.
const SUM_TERMS: u64 = 32;

// B_{2k} / (2k (2k - 1)) for k = 1..8
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

// B_{2k} / (2k) for k = 1..7
const DIGAMMA_ASYMPTOTIC: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32_760.0,
    1.0 / 12.0,
];

/// A finite, strictly positive real argument.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PositiveReal(f64);

impl PositiveReal {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(Self(value))
        } else {
            Err(Error::Domain(format!(
                "argument must be finite and > 0, got {value}"
            )))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for PositiveReal {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

/// `log Γ(z)` for finite `z > 0`.
pub fn ln_gamma(z: f64) -> Result<f64> {
    Ok(ln_gamma_raw(PositiveReal::new(z)?.get()))
}

/// The sinh-corrected Stirling approximation
/// `½log(2π) + (z−½)log z − z + ½ z log(z sinh(1/z))`.
pub fn ln_gamma_approx(z: f64) -> Result<f64> {
    let z = PositiveReal::new(z)?.get();
    Ok(HALF_LN_2PI + (z - 0.5) * z.ln() - z + 0.5 * z * ln_sinhc(1.0 / z))
}

/// `ψ(z) = d/dz log Γ(z)` for finite `z > 0`.
pub fn digamma(z: f64) -> Result<f64> {
    Ok(digamma_raw(PositiveReal::new(z)?.get()))
}

/// `log Γ(a+b) − log Γ(a) = Σ_{j=1..b} log(a+j−1)` for integer `b ≥ 0`.
pub fn ln_gamma_ratio(a: f64, b: u64) -> Result<f64> {
    Ok(ln_gamma_ratio_raw(PositiveReal::new(a)?.get(), b))
}

/// `ψ(a+b) − ψ(a) = Σ_{j=0..b−1} 1/(a+j)` for integer `b ≥ 0`.
pub fn digamma_diff(a: f64, b: u64) -> Result<f64> {
    Ok(digamma_diff_raw(PositiveReal::new(a)?.get(), b))
}

pub(crate) fn ln_gamma_raw(z: f64) -> f64 {
    if z == 1.0 || z == 2.0 {
        return 0.0;
    }
    if z >= SERIES_THRESHOLD {
        return stirling(z);
    }
    let shift = (SERIES_THRESHOLD - z).ceil();
    let mut product = 1.0;
    let mut t = z;
    while t < SERIES_THRESHOLD {
        product *= t;
        t += 1.0;
    }
    debug_assert!((t - (z + shift)).abs() < 1e-9);
    stirling(t) - product.ln()
}

fn stirling(z: f64) -> f64 {
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let mut series = 0.0;
    for &c in STIRLING.iter().rev() {
        series = series * inv2 + c;
    }
    (z - 0.5) * z.ln() - z + HALF_LN_2PI + series * inv
}

pub(crate) fn digamma_raw(z: f64) -> f64 {
    let mut acc = 0.0;
    let mut t = z;
    while t < SERIES_THRESHOLD {
        acc -= 1.0 / t;
        t += 1.0;
    }
    let inv2 = 1.0 / (t * t);
    let mut series = 0.0;
    for &c in DIGAMMA_ASYMPTOTIC.iter().rev() {
        series = series * inv2 + c;
    }
    acc + t.ln() - 0.5 / t - series * inv2
}

fn use_summation(a: f64, b: u64) -> bool {
    b <= SUM_TERMS || (a > 1e3 * b as f64 && b <= 100_000)
}

pub(crate) fn ln_gamma_ratio_raw(a: f64, b: u64) -> f64 {
    if b == 0 {
        return 0.0;
    }
    if use_summation(a, b) {
        (0..b).map(|j| (a + j as f64).ln()).sum()
    } else {
        ln_gamma_raw(a + b as f64) - ln_gamma_raw(a)
    }
}

pub(crate) fn digamma_diff_raw(a: f64, b: u64) -> f64 {
    if b == 0 {
        return 0.0;
    }
    if use_summation(a, b) {
        (0..b).map(|j| 1.0 / (a + j as f64)).sum()
    } else {
        digamma_raw(a + b as f64) - digamma_raw(a)
    }
}

/// `log Γ(1/r + b) − log Γ(1/r) + b·log r = Σ_{j<b} log(1 + j·r)`, the
/// rising-factorial term of the negative binomial pmf with the `r^b` factor
/// folded in so the `r → 0` limit stays well conditioned.
pub(crate) fn ln_rising_scaled(r: f64, b: u64) -> f64 {
    if b == 0 {
        return 0.0;
    }
    let a = 1.0 / r;
    if use_summation(a, b) {
        (0..b).map(|j| (j as f64 * r).ln_1p()).sum()
    } else {
        ln_gamma_ratio_raw(a, b) + b as f64 * r.ln()
    }
}

/// `(ψ(1/r + b) − ψ(1/r)) / r = Σ_{j<b} 1/(1 + j·r)`.
pub(crate) fn digamma_diff_scaled(r: f64, b: u64) -> f64 {
    if b == 0 {
        return 0.0;
    }
    let a = 1.0 / r;
    if use_summation(a, b) {
        (0..b).map(|j| 1.0 / (1.0 + j as f64 * r)).sum()
    } else {
        digamma_diff_raw(a, b) / r
    }
}

/// `log(sinh(x)/x)` for `x > 0`, evaluated without cancellation near zero
/// and without overflow for large `x`.
fn ln_sinhc(x: f64) -> f64 {
    if x < 0.1 {
        let x2 = x * x;
        // (sinh x − x)/x
        let excess = x2
            * (1.0 / 6.0
                + x2 * (1.0 / 120.0
                    + x2 * (1.0 / 5040.0 + x2 * (1.0 / 362_880.0 + x2 / 39_916_800.0))));
        excess.ln_1p()
    } else if x < 20.0 {
        (x.sinh() / x).ln()
    } else {
        x + (-(-2.0 * x).exp()).ln_1p() - std::f64::consts::LN_2 - x.ln()
    }
}

/// `log(1 − exp(x))` for `x < 0`.
pub(crate) fn ln_1m_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn digamma_recurrence(z in 1e-6f64..100.0) {
            let lhs = digamma(z + 1.0).unwrap() - digamma(z).unwrap();
            prop_assert!((lhs - 1.0 / z).abs() <= 1e-9 * (1.0 / z).max(1.0));
        }

        #[test]
        fn ln_gamma_recurrence(z in 1e-3f64..1e4) {
            let lhs = ln_gamma(z + 1.0).unwrap() - ln_gamma(z).unwrap();
            let scale = ln_gamma(z + 1.0).unwrap().abs().max(1.0);
            prop_assert!((lhs - z.ln()).abs() <= 1e-10 * scale);
        }

        #[test]
        fn ratio_equals_ln_gamma_difference(a in 1e-3f64..50.0, b in 0u64..=200) {
            let ratio = ln_gamma_ratio(a, b).unwrap();
            let diff = ln_gamma(a + b as f64).unwrap() - ln_gamma(a).unwrap();
            prop_assert!((ratio - diff).abs() <= 1e-10 * diff.abs().max(1.0));
        }
    }
}
