//! Poisson, negative binomial and hurdle negative binomial distributions at
//! fixed parameters: pmfs, zero probabilities, moments and samplers.
//!
//! The negative binomial is parameterised by its mean `theta` and index of
//! dispersion `r`, so that `Var = theta + r·theta²`. The hurdle distribution
//! puts mass `phi` at zero and spreads `1 − phi` over a zero-truncated
//! negative binomial.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use crate::error::{Error, Result};
use crate::specfun::{ln_1m_exp, ln_gamma_raw, ln_rising_scaled};

/// Tail mass (of `y²·pmf`) at which moment summation stops.
pub const TRUNCATION_TAIL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NbParams {
    theta: f64,
    r: f64,
}

impl NbParams {
    pub fn new(theta: f64, r: f64) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::Domain(format!("theta must be finite and > 0, got {theta}")));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Domain(format!("r must be finite and > 0, got {r}")));
        }
        Ok(Self { theta, r })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// `log p(0) = −r⁻¹·log(1 + r·theta)`.
    pub fn ln_zero_prob(&self) -> f64 {
        -(self.r * self.theta).ln_1p() / self.r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurdleParams {
    nb: NbParams,
    phi: f64,
}

impl HurdleParams {
    pub fn new(nb: NbParams, phi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&phi) {
            return Err(Error::Domain(format!("phi must lie in [0, 1], got {phi}")));
        }
        Ok(Self { nb, phi })
    }

    pub fn nb(&self) -> NbParams {
        self.nb
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

/// Poisson log pmf, used for the `r → 0` limit and the Poisson family.
pub fn poisson_log_pmf(y: u64, lambda: f64) -> f64 {
    let yf = y as f64;
    let term = if y == 0 { 0.0 } else { yf * lambda.ln() };
    term - lambda - ln_gamma_raw(yf + 1.0)
}

/// Log of the negative binomial pmf at `y`.
pub fn nb_log_pmf(y: u64, p: &NbParams) -> f64 {
    let (theta, r) = (p.theta, p.r);
    let yf = y as f64;
    let log1p_rt = (r * theta).ln_1p();
    let count_term = if y == 0 {
        0.0
    } else {
        yf * (theta.ln() - log1p_rt)
    };
    ln_rising_scaled(r, y) - ln_gamma_raw(yf + 1.0) - log1p_rt / r + count_term
}

/// `p(0) = (1 + r·theta)^(−1/r)`.
pub fn nb_zero_prob(p: &NbParams) -> f64 {
    p.ln_zero_prob().exp()
}

pub fn nb_mean_var(p: &NbParams) -> Moments {
    Moments {
        mean: p.theta,
        variance: p.theta + p.r * p.theta * p.theta,
    }
}

/// Log of the hurdle pmf: `log phi` at zero, otherwise
/// `log(1 − phi) − log(1 − p(0)) + log NB(y)`.
pub fn hnb_log_pmf(y: u64, h: &HurdleParams) -> f64 {
    if y == 0 {
        return h.phi.ln();
    }
    if h.phi >= 1.0 {
        return f64::NEG_INFINITY;
    }
    (-h.phi).ln_1p() - ln_1m_exp(h.nb.ln_zero_prob()) + nb_log_pmf(y, &h.nb)
}

/// Hurdle pmf; `hnb_pmf(0, h)` is exactly `phi`.
pub fn hnb_pmf(y: u64, h: &HurdleParams) -> f64 {
    if y == 0 {
        h.phi
    } else {
        hnb_log_pmf(y, h).exp()
    }
}

/// Hurdle mean from the closed form `(1 − phi)·theta / (1 − p(0))` and
/// variance from truncated summation of `y²·pmf`.
pub fn hnb_mean_var(h: &HurdleParams) -> Moments {
    if h.phi >= 1.0 {
        return Moments {
            mean: 0.0,
            variance: 0.0,
        };
    }
    let mean = hnb_mean_closed_form(h);
    let summed = hnb_moments_by_summation(h);
    Moments {
        mean,
        variance: summed.second_raw - mean * mean,
    }
}

/// `(1 − phi)·theta / (1 − p(0))`.
pub fn hnb_mean_closed_form(h: &HurdleParams) -> f64 {
    (1.0 - h.phi) * h.nb.theta / -h.nb.ln_zero_prob().exp_m1()
}

/// Variance obtained analytically from the hurdle pmf:
/// `E[Y²] = (1 − phi)·E_NB[Y²] / (1 − p(0))`.
pub fn hnb_variance_closed_form(h: &HurdleParams) -> f64 {
    let theta = h.nb.theta;
    let second_nb = theta + (1.0 + h.nb.r) * theta * theta;
    let second = (1.0 - h.phi) * second_nb / -h.nb.ln_zero_prob().exp_m1();
    let mean = hnb_mean_closed_form(h);
    second - mean * mean
}

/// The hurdle variance expression as typeset in the source model description,
/// `mu·{phi + p̄(0) + (mu/phī)[r·p̄(0) + phi − p(0)]}`. It does not agree with
/// the pmf; it is evaluated only for the moment audit.
pub fn hnb_variance_as_printed(h: &HurdleParams) -> f64 {
    let p0 = nb_zero_prob(&h.nb);
    let p0_bar = 1.0 - p0;
    let phi = h.phi;
    let mu = hnb_mean_closed_form(h);
    mu * (phi + p0_bar + mu / (1.0 - phi) * (h.nb.r * p0_bar + phi - p0))
}

/// Raw moments of the hurdle distribution accumulated over the truncated
/// support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummedMoments {
    pub mass: f64,
    pub first_raw: f64,
    pub second_raw: f64,
    /// Largest support point included.
    pub support_max: u64,
}

impl SummedMoments {
    pub fn mean(&self) -> f64 {
        self.first_raw
    }

    pub fn variance(&self) -> f64 {
        self.second_raw - self.first_raw * self.first_raw
    }
}

/// Summation cap `10·(mean + 10·sd)` for a negative binomial.
fn support_cap(p: &NbParams) -> u64 {
    let m = nb_mean_var(p);
    (10.0 * (m.mean + 10.0 * m.variance.sqrt())).ceil().max(50.0) as u64
}

/// Walks `(y, log NB pmf(y))` for `y = 0, 1, …` until the bound on the
/// remaining `y²·pmf` tail (scaled by `scale`) falls below [`TRUNCATION_TAIL`]
/// or the support cap is hit. Returns the last `y` visited.
fn walk_nb_support(p: &NbParams, scale: f64, mut visit: impl FnMut(u64, f64)) -> u64 {
    let (theta, r) = (p.theta, p.r);
    let a = 1.0 / r;
    let q = r * theta / (1.0 + r * theta);
    let ln_q = theta.ln() + r.ln() - (r * theta).ln_1p();
    let cap = support_cap(p);
    let ln_tol = TRUNCATION_TAIL.ln();
    let mut lp = p.ln_zero_prob();
    let mut y = 0u64;
    loop {
        visit(y, lp);
        if y >= cap {
            return y;
        }
        let yf = y as f64;
        // pmf(y+1)/pmf(y) = (a + y)/(y + 1)·q, monotone in y; its supremum
        // over the remaining support is either the current ratio or the limit q.
        let rho = (a + yf) / (yf + 1.0) * q;
        let rho_max = if a >= 1.0 { rho } else { q };
        if y >= 1 {
            let growth = ((yf + 1.0) / yf).powi(2) * rho_max;
            if growth < 1.0 {
                let ln_bound =
                    scale.ln() + lp + 2.0 * yf.ln() + (growth / (1.0 - growth)).ln();
                if ln_bound < ln_tol {
                    return y;
                }
            }
        }
        lp += (a + yf).ln() - (yf + 1.0).ln() + ln_q;
        y += 1;
    }
}

/// Mass, mean and second raw moment of the NB pmf over its truncated support.
pub fn nb_moments_by_summation(p: &NbParams) -> SummedMoments {
    let (mut mass, mut first, mut second) = (0.0, 0.0, 0.0);
    let support_max = walk_nb_support(p, 1.0, |y, lp| {
        let pm = lp.exp();
        let yf = y as f64;
        mass += pm;
        first += yf * pm;
        second += yf * yf * pm;
    });
    SummedMoments {
        mass,
        first_raw: first,
        second_raw: second,
        support_max,
    }
}

/// Mass, mean and second raw moment of the hurdle pmf over its truncated
/// support (zero contributes `phi` to the mass only).
pub fn hnb_moments_by_summation(h: &HurdleParams) -> SummedMoments {
    if h.phi >= 1.0 {
        return SummedMoments {
            mass: 1.0,
            first_raw: 0.0,
            second_raw: 0.0,
            support_max: 0,
        };
    }
    let ln_weight = (-h.phi).ln_1p() - ln_1m_exp(h.nb.ln_zero_prob());
    let (mut mass, mut first, mut second) = (h.phi, 0.0, 0.0);
    let support_max = walk_nb_support(&h.nb, ln_weight.exp(), |y, lp| {
        if y == 0 {
            return;
        }
        let pm = (lp + ln_weight).exp();
        let yf = y as f64;
        mass += pm;
        first += yf * pm;
        second += yf * yf * pm;
    });
    SummedMoments {
        mass,
        first_raw: first,
        second_raw: second,
        support_max,
    }
}

/// Parameters of any distribution the crate can sample from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CountParams {
    Poisson(f64),
    Nb(NbParams),
    Hurdle(HurdleParams),
}

/// Deterministic generator for a seed and replication stream.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n` draws from `params`, reproducible from `seed`.
pub fn sample(params: &CountParams, n: usize, seed: u64) -> Result<Vec<u64>> {
    if n == 0 {
        return Err(Error::Domain("sample size must be at least 1".into()));
    }
    let mut rng = seeded_rng(seed, 0);
    Ok((0..n).map(|_| draw(&mut rng, params)).collect())
}

pub fn draw<R: Rng + ?Sized>(rng: &mut R, params: &CountParams) -> u64 {
    match params {
        CountParams::Poisson(lambda) => draw_poisson(rng, *lambda),
        CountParams::Nb(p) => draw_nb(rng, p),
        CountParams::Hurdle(h) => draw_hurdle(rng, h),
    }
}

pub fn draw_poisson<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    if !(lambda > 0.0) {
        return 0;
    }
    match Poisson::new(lambda) {
        Ok(d) => d.sample(rng) as u64,
        Err(_) => lambda.round() as u64,
    }
}

/// Gamma–Poisson mixture: `lambda ~ Gamma(shape 1/r, scale r·theta)`,
/// `y ~ Poisson(lambda)`.
pub fn draw_nb<R: Rng + ?Sized>(rng: &mut R, p: &NbParams) -> u64 {
    let gamma = Gamma::new(1.0 / p.r, p.r * p.theta).expect("validated NB parameters");
    let lambda: f64 = gamma.sample(rng);
    draw_poisson(rng, lambda)
}

/// Draw from the NB conditioned on `y > 0`.
pub fn draw_truncated_nb<R: Rng + ?Sized>(rng: &mut R, p: &NbParams) -> u64 {
    let ln_p0 = p.ln_zero_prob();
    if ln_p0 < -std::f64::consts::LN_2 {
        loop {
            let y = draw_nb(rng, p);
            if y > 0 {
                return y;
            }
        }
    }
    // Inversion over the positive support when zeros dominate.
    let positive_mass = -ln_p0.exp_m1();
    let target = rng.random::<f64>() * positive_mass;
    let a = 1.0 / p.r;
    let ln_q = p.theta.ln() + p.r.ln() - (p.r * p.theta).ln_1p();
    let cap = support_cap(p);
    let mut lp = ln_p0 + (a).ln() + ln_q;
    let mut cumulative = 0.0;
    let mut y = 1u64;
    loop {
        cumulative += lp.exp();
        if cumulative >= target || y >= cap {
            return y;
        }
        let yf = y as f64;
        lp += (a + yf).ln() - (yf + 1.0).ln() + ln_q;
        y += 1;
    }
}

/// Zero with probability `phi`, otherwise a zero-truncated NB draw.
pub fn draw_hurdle<R: Rng + ?Sized>(rng: &mut R, h: &HurdleParams) -> u64 {
    if rng.random::<f64>() < h.phi {
        0
    } else {
        draw_truncated_nb(rng, &h.nb)
    }
}
