//! Log-likelihoods and analytic scores for Poisson, NB and hurdle NB
//! regression.
//!
//! The mean equation uses a log link, `theta_i = exp(x_iᵀβ)`, and the hurdle
//! equation a logit link, `phi_i = logistic(x_hᵢᵀδ)`. The dispersion is
//! optimised as `log r`. All reductions run sequentially in row order so that
//! repeated evaluations are bit-identical.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::specfun::{digamma_diff_scaled, ln_1m_exp, ln_gamma_raw, ln_rising_scaled};

/// Linear predictors are clamped to `[-ETA_BOUND, ETA_BOUND]` before
/// exponentiation.
pub const ETA_BOUND: f64 = 700.0;

/// `log r` is kept inside this interval.
pub const LOG_R_BOUNDS: (f64, f64) = (-30.0, 15.0);

#[derive(Debug, Clone, PartialEq)]
pub struct NbRegParams {
    pub beta: DVector<f64>,
    pub log_r: f64,
}

impl NbRegParams {
    pub fn new(beta: DVector<f64>, r: f64) -> Self {
        Self {
            beta,
            log_r: r.ln(),
        }
    }

    pub fn r(&self) -> f64 {
        self.log_r.clamp(LOG_R_BOUNDS.0, LOG_R_BOUNDS.1).exp()
    }

    /// Packs `(β, log r)` into one vector.
    pub fn to_vector(&self) -> DVector<f64> {
        let k = self.beta.len();
        DVector::from_fn(k + 1, |i, _| if i < k { self.beta[i] } else { self.log_r })
    }

    pub fn from_vector(v: &DVector<f64>) -> Self {
        let k = v.len() - 1;
        Self {
            beta: v.rows(0, k).into_owned(),
            log_r: v[k],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HnbRegParams {
    pub nb: NbRegParams,
    pub delta: DVector<f64>,
}

impl HnbRegParams {
    /// Packs `(β, log r, δ)` into one vector.
    pub fn to_vector(&self) -> DVector<f64> {
        let head = self.nb.to_vector();
        let mut v = DVector::zeros(head.len() + self.delta.len());
        v.rows_mut(0, head.len()).copy_from(&head);
        v.rows_mut(head.len(), self.delta.len()).copy_from(&self.delta);
        v
    }

    /// Inverse of [`to_vector`](Self::to_vector) for a mean design with `k` columns.
    pub fn from_vector(v: &DVector<f64>, k: usize) -> Self {
        Self {
            nb: NbRegParams::from_vector(&v.rows(0, k + 1).into_owned()),
            delta: v.rows(k + 1, v.len() - k - 1).into_owned(),
        }
    }
}

/// Whether the `Σ log y_i!` constant is included.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoglikScale {
    /// Up to the additive constant `−Σ log Γ(y_i + 1)`.
    Proportional,
    /// The complete log-likelihood, comparable across families.
    Full,
}

/// The two separable pieces of the hurdle log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurdleLoglik {
    /// `Σ [I(y=0) log φ + I(y>0) log(1 − φ)]`.
    pub binary: f64,
    /// `Σ_{y>0} [log NB(y) − log(1 − p(0))]`.
    pub truncated: f64,
}

impl HurdleLoglik {
    pub fn total(&self) -> f64 {
        self.binary + self.truncated
    }
}

fn check_dims(x: &DMatrix<f64>, coef: usize, y: Option<&[u64]>) -> Result<()> {
    if x.ncols() != coef {
        return Err(Error::Dimension(format!(
            "design has {} columns, coefficient vector has {coef}",
            x.ncols()
        )));
    }
    if let Some(y) = y {
        if y.len() != x.nrows() {
            return Err(Error::Dimension(format!(
                "design has {} rows, response has {}",
                x.nrows(),
                y.len()
            )));
        }
    }
    Ok(())
}

fn clamped_eta(x: &DMatrix<f64>, coef: &DVector<f64>) -> DVector<f64> {
    (x * coef).map(|e| e.clamp(-ETA_BOUND, ETA_BOUND))
}

/// `theta_i = exp(x_iᵀβ)`.
pub fn link_mean(x: &DMatrix<f64>, beta: &DVector<f64>) -> Result<DVector<f64>> {
    check_dims(x, beta.len(), None)?;
    Ok(clamped_eta(x, beta).map(f64::exp))
}

/// `phi_i = logistic(x_iᵀδ)`.
pub fn link_hurdle(x_h: &DMatrix<f64>, delta: &DVector<f64>) -> Result<DVector<f64>> {
    check_dims(x_h, delta.len(), None)?;
    Ok(clamped_eta(x_h, delta).map(logistic))
}

pub fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Full NB log-pmf at `y` written in terms of the linear predictor.
#[inline]
fn nb_term(y: u64, eta: f64, r: f64) -> f64 {
    let theta = eta.exp();
    let log1p_rt = (r * theta).ln_1p();
    let yf = y as f64;
    let count = if y == 0 { 0.0 } else { yf * (eta - log1p_rt) };
    ln_rising_scaled(r, y) - ln_gamma_raw(yf + 1.0) - log1p_rt / r + count
}

/// Per-observation NB derivatives with respect to `eta` and `log r`.
#[inline]
fn nb_term_grad(y: u64, eta: f64, r: f64) -> (f64, f64) {
    let theta = eta.exp();
    let yf = y as f64;
    let denom = 1.0 + r * theta;
    let d_eta = (yf - theta) / denom;
    let d_log_r = -digamma_diff_scaled(r, y) + (r * theta).ln_1p() / r + (yf - theta) / denom;
    (d_eta, d_log_r)
}

fn log_factorial_sum(y: &[u64]) -> f64 {
    y.iter().map(|&v| ln_gamma_raw(v as f64 + 1.0)).sum()
}

/// Poisson log-likelihood `Σ [y η − e^η − log y!]`.
pub fn poisson_loglik(
    beta: &DVector<f64>,
    x: &DMatrix<f64>,
    y: &[u64],
    scale: LoglikScale,
) -> Result<f64> {
    check_dims(x, beta.len(), Some(y))?;
    let eta = clamped_eta(x, beta);
    let mut total = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        total += yi as f64 * eta[i] - eta[i].exp();
    }
    if scale == LoglikScale::Full {
        total -= log_factorial_sum(y);
    }
    Ok(total)
}

/// `Xᵀ(y − theta)`.
pub fn poisson_score(beta: &DVector<f64>, x: &DMatrix<f64>, y: &[u64]) -> Result<DVector<f64>> {
    check_dims(x, beta.len(), Some(y))?;
    let eta = clamped_eta(x, beta);
    let resid = DVector::from_fn(y.len(), |i, _| y[i] as f64 - eta[i].exp());
    Ok(x.tr_mul(&resid))
}

/// NB regression log-likelihood.
pub fn nb_loglik(
    params: &NbRegParams,
    x: &DMatrix<f64>,
    y: &[u64],
    scale: LoglikScale,
) -> Result<f64> {
    check_dims(x, params.beta.len(), Some(y))?;
    let r = params.r();
    let eta = clamped_eta(x, &params.beta);
    let mut total = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        total += nb_term(yi, eta[i], r);
    }
    if scale == LoglikScale::Proportional {
        total += log_factorial_sum(y);
    }
    Ok(total)
}

/// Gradient of [`nb_loglik`] with respect to `(β, log r)`.
pub fn nb_score(params: &NbRegParams, x: &DMatrix<f64>, y: &[u64]) -> Result<DVector<f64>> {
    check_dims(x, params.beta.len(), Some(y))?;
    let r = params.r();
    let eta = clamped_eta(x, &params.beta);
    let mut w = DVector::zeros(y.len());
    let mut d_log_r = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let (de, dr) = nb_term_grad(yi, eta[i], r);
        w[i] = de;
        d_log_r += dr;
    }
    let k = params.beta.len();
    let mut g = DVector::zeros(k + 1);
    g.rows_mut(0, k).copy_from(&x.tr_mul(&w));
    g[k] = d_log_r;
    Ok(g)
}

/// Binary part of the hurdle likelihood, `Σ [I(y=0) log φ + I(y>0) log(1 − φ)]`.
pub fn binary_loglik(delta: &DVector<f64>, x_h: &DMatrix<f64>, y: &[u64]) -> Result<f64> {
    check_dims(x_h, delta.len(), Some(y))?;
    let eta = clamped_eta(x_h, delta);
    let mut total = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        // log φ = −softplus(−η), log(1 − φ) = −softplus(η)
        total -= if yi == 0 {
            softplus(-eta[i])
        } else {
            softplus(eta[i])
        };
    }
    Ok(total)
}

/// `X_hᵀ(I(y=0) − φ)`.
pub fn binary_score(delta: &DVector<f64>, x_h: &DMatrix<f64>, y: &[u64]) -> Result<DVector<f64>> {
    check_dims(x_h, delta.len(), Some(y))?;
    let eta = clamped_eta(x_h, delta);
    let resid = DVector::from_fn(y.len(), |i, _| {
        let zero = if y[i] == 0 { 1.0 } else { 0.0 };
        zero - logistic(eta[i])
    });
    Ok(x_h.tr_mul(&resid))
}

/// Zero-truncated NB log-likelihood over the rows with `y > 0`.
pub fn truncated_loglik(params: &NbRegParams, x: &DMatrix<f64>, y: &[u64]) -> Result<f64> {
    check_dims(x, params.beta.len(), Some(y))?;
    let r = params.r();
    let eta = clamped_eta(x, &params.beta);
    let mut total = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        if yi > 0 {
            let ln_p0 = -(r * eta[i].exp()).ln_1p() / r;
            total += nb_term(yi, eta[i], r) - ln_1m_exp(ln_p0);
        }
    }
    Ok(total)
}

/// Gradient of [`truncated_loglik`] with respect to `(β, log r)`.
pub fn truncated_score(params: &NbRegParams, x: &DMatrix<f64>, y: &[u64]) -> Result<DVector<f64>> {
    check_dims(x, params.beta.len(), Some(y))?;
    let r = params.r();
    let eta = clamped_eta(x, &params.beta);
    let mut w = DVector::zeros(y.len());
    let mut d_log_r = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        if yi == 0 {
            continue;
        }
        let theta = eta[i].exp();
        let (de, dr) = nb_term_grad(yi, eta[i], r);
        let log1p_rt = (r * theta).ln_1p();
        let ln_p0 = -log1p_rt / r;
        // d[−log(1 − p0)] = p0/(1 − p0)·d log p0
        let odds = 1.0 / (-ln_p0).exp_m1();
        let denom = 1.0 + r * theta;
        w[i] = de - odds * theta / denom;
        d_log_r += dr + odds * (log1p_rt / r - theta / denom);
    }
    let k = params.beta.len();
    let mut g = DVector::zeros(k + 1);
    g.rows_mut(0, k).copy_from(&x.tr_mul(&w));
    g[k] = d_log_r;
    Ok(g)
}

/// Hurdle NB log-likelihood, returned as its binary and truncated parts.
pub fn hnb_loglik(
    params: &HnbRegParams,
    x: &DMatrix<f64>,
    x_h: &DMatrix<f64>,
    y: &[u64],
) -> Result<HurdleLoglik> {
    check_dims(x_h, params.delta.len(), Some(y))?;
    Ok(HurdleLoglik {
        binary: binary_loglik(&params.delta, x_h, y)?,
        truncated: truncated_loglik(&params.nb, x, y)?,
    })
}

/// Gradient of the hurdle log-likelihood, ordered `(β, log r, δ)`.
pub fn hnb_score(
    params: &HnbRegParams,
    x: &DMatrix<f64>,
    x_h: &DMatrix<f64>,
    y: &[u64],
) -> Result<DVector<f64>> {
    let head = truncated_score(&params.nb, x, y)?;
    let tail = binary_score(&params.delta, x_h, y)?;
    let mut g = DVector::zeros(head.len() + tail.len());
    g.rows_mut(0, head.len()).copy_from(&head);
    g.rows_mut(head.len(), tail.len()).copy_from(&tail);
    Ok(g)
}

/// Hurdle log-likelihood with the hurdle probabilities supplied directly
/// instead of through the logit link.
pub fn hnb_loglik_with_phi(
    nb: &NbRegParams,
    x: &DMatrix<f64>,
    phi: &[f64],
    y: &[u64],
) -> Result<HurdleLoglik> {
    if phi.len() != y.len() {
        return Err(Error::Dimension(format!(
            "{} hurdle probabilities for {} rows",
            phi.len(),
            y.len()
        )));
    }
    let binary = y
        .iter()
        .zip(phi)
        .map(|(&yi, &p)| if yi == 0 { p.ln() } else { (-p).ln_1p() })
        .sum();
    Ok(HurdleLoglik {
        binary,
        truncated: truncated_loglik(nb, x, y)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::countdist::{hnb_log_pmf, nb_log_pmf, nb_zero_prob, HurdleParams, NbParams};
    use crate::specfun::ln_gamma;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(
        rng: &mut ChaCha8Rng,
        n: usize,
        k: usize,
    ) -> (DMatrix<f64>, Vec<u64>, DVector<f64>) {
        let x = DMatrix::from_fn(n, k, |_, j| if j == 0 { 1.0 } else { rng.random_range(-1.0..1.0) });
        let y = (0..n)
            .map(|_| if rng.random_bool(0.3) { 0 } else { rng.random_range(1..40) })
            .collect();
        let beta = DVector::from_fn(k, |j, _| if j == 0 { 1.5 } else { rng.random_range(-0.5..0.5) });
        (x, y, beta)
    }

    fn central_difference(f: impl Fn(&DVector<f64>) -> f64, at: &DVector<f64>, h: f64) -> DVector<f64> {
        DVector::from_fn(at.len(), |j, _| {
            let mut up = at.clone();
            let mut down = at.clone();
            up[j] += h;
            down[j] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
    }

    fn assert_close_relative(a: &DVector<f64>, b: &DVector<f64>, tol: f64) {
        for (u, v) in a.iter().zip(b.iter()) {
            let scale = u.abs().max(v.abs()).max(1.0);
            assert!((u - v).abs() <= tol * scale, "{u} vs {v}");
        }
    }

    #[test]
    fn link_examples() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, -1.0, 1.0, 0.0]);
        let theta = link_mean(&x, &DVector::zeros(2)).unwrap();
        assert!(theta.iter().all(|&t| t == 1.0));
        let theta = link_mean(&x, &DVector::from_vec(vec![0.5, -0.25])).unwrap();
        assert_eq!(theta[0], 1.0);

        let ones = DMatrix::from_element(4, 1, 1.0);
        let theta = link_mean(&ones, &DVector::from_vec(vec![27.3193f64.ln()])).unwrap();
        assert_abs_diff_eq!(theta[2], 27.3193, epsilon = 1e-12);

        let phi = link_hurdle(&x, &DVector::zeros(2)).unwrap();
        assert!(phi.iter().all(|&p| p == 0.5));
        let logit = (0.0552f64 / (1.0 - 0.0552)).ln();
        let phi = link_hurdle(&ones, &DVector::from_vec(vec![logit])).unwrap();
        assert_abs_diff_eq!(phi[0], 0.0552, epsilon = 1e-15);

        let phi = link_hurdle(&ones, &DVector::from_vec(vec![f64::NEG_INFINITY])).unwrap();
        assert!(phi[0] > 0.0);
        let theta = link_mean(&ones, &DVector::from_vec(vec![1e6])).unwrap();
        assert!(theta[0].is_finite());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let x = DMatrix::from_element(3, 2, 1.0);
        assert!(matches!(link_mean(&x, &DVector::zeros(3)), Err(Error::Dimension(_))));
        let p = NbRegParams::new(DVector::zeros(2), 1.0);
        assert!(matches!(
            nb_loglik(&p, &x, &[1, 2], LoglikScale::Full),
            Err(Error::Dimension(_))
        ));
        let h = HnbRegParams {
            nb: p,
            delta: DVector::zeros(1),
        };
        assert!(hnb_score(&h, &x, &x, &[1, 2, 3]).is_err());
    }

    #[test]
    fn single_observation_loglik() {
        let x = DMatrix::from_element(1, 1, 1.0);
        let p = NbRegParams::new(DVector::zeros(1), 1.0);
        let ll = nb_loglik(&p, &x, &[0], LoglikScale::Full).unwrap();
        assert_abs_diff_eq!(ll, 0.5f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn loglik_equals_pmf_sum_and_gamma_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let (x, y, beta) = random_instance(&mut rng, 30, 3);
            let r = rng.random_range(0.1..3.0);
            let p = NbRegParams::new(beta.clone(), r);
            let theta = link_mean(&x, &beta).unwrap();
            let by_pmf: f64 = y
                .iter()
                .enumerate()
                .map(|(i, &yi)| nb_log_pmf(yi, &NbParams::new(theta[i], p.r()).unwrap()))
                .sum();
            // Γ-difference route of the proportional form plus the constant.
            let a = 1.0 / p.r();
            let by_gamma: f64 = y
                .iter()
                .enumerate()
                .map(|(i, &yi)| {
                    let yf = yi as f64;
                    ln_gamma(a + yf).unwrap() - ln_gamma(a).unwrap()
                        - (a + yf) * (1.0 + p.r() * theta[i]).ln()
                        + yf * (p.r().ln() + theta[i].ln())
                        - ln_gamma(yf + 1.0).unwrap()
                })
                .sum();
            let ll = nb_loglik(&p, &x, &y, LoglikScale::Full).unwrap();
            assert!((ll - by_pmf).abs() <= 1e-10 * ll.abs());
            assert!((ll - by_gamma).abs() <= 1e-9 * ll.abs());
            let prop = nb_loglik(&p, &x, &y, LoglikScale::Proportional).unwrap();
            let consts: f64 = y.iter().map(|&v| ln_gamma(v as f64 + 1.0).unwrap()).sum();
            assert_abs_diff_eq!(prop - consts, ll, epsilon = 1e-9);
        }
    }

    #[test]
    fn poisson_limit_of_loglik() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (x, y, beta) = random_instance(&mut rng, 40, 2);
        let beta = beta * 0.3;
        let nb = nb_loglik(&NbRegParams::new(beta.clone(), 1e-8), &x, &y, LoglikScale::Full).unwrap();
        let pois = poisson_loglik(&beta, &x, &y, LoglikScale::Full).unwrap();
        assert!((nb - pois).abs() < 1e-4, "{nb} vs {pois}");
    }

    #[test]
    fn nb_score_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let (x, y, beta) = random_instance(&mut rng, 50, 3);
            let p = NbRegParams::new(beta, rng.random_range(0.2..2.0));
            let v = p.to_vector();
            let fd = central_difference(
                |v| nb_loglik(&NbRegParams::from_vector(v), &x, &y, LoglikScale::Full).unwrap(),
                &v,
                1e-5,
            );
            assert_close_relative(&nb_score(&p, &x, &y).unwrap(), &fd, 1e-6);
        }
    }

    #[test]
    fn beta_score_vanishes_at_exact_fit() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let beta = DVector::from_vec(vec![0.0, 2f64.ln()]);
        let y = [1, 2, 4];
        let g = nb_score(&NbRegParams::new(beta, 0.5), &x, &y).unwrap();
        assert_eq!(g[0], 0.0);
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn hurdle_loglik_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (x, y, beta) = random_instance(&mut rng, 40, 3);
        let delta = DVector::from_vec(vec![-0.7, 0.3, 0.1]);
        let params = HnbRegParams {
            nb: NbRegParams::new(beta.clone(), 0.8),
            delta: delta.clone(),
        };
        let ll = hnb_loglik(&params, &x, &x, &y).unwrap();
        assert_eq!(ll.total(), ll.binary + ll.truncated);

        let theta = link_mean(&x, &beta).unwrap();
        let phi = link_hurdle(&x, &delta).unwrap();
        let by_pmf: f64 = y
            .iter()
            .enumerate()
            .map(|(i, &yi)| {
                let h = HurdleParams::new(NbParams::new(theta[i], 0.8).unwrap(), phi[i]).unwrap();
                hnb_log_pmf(yi, &h)
            })
            .sum();
        assert!((ll.total() - by_pmf).abs() <= 1e-10 * by_pmf.abs());

        let zeros = vec![0u64; 40];
        let ll = hnb_loglik(&params, &x, &x, &zeros).unwrap();
        assert_eq!(ll.truncated, 0.0);
        let want: f64 = phi.iter().map(|p| p.ln()).sum();
        assert_abs_diff_eq!(ll.binary, want, epsilon = 1e-10);
    }

    #[test]
    fn hnb_score_matches_finite_differences_and_separates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (x, y, beta) = random_instance(&mut rng, 60, 3);
        let params = HnbRegParams {
            nb: NbRegParams::new(beta, 0.6),
            delta: DVector::from_vec(vec![-0.4, 0.8, -0.2]),
        };
        let v = params.to_vector();
        let f = |v: &DVector<f64>| {
            hnb_loglik(&HnbRegParams::from_vector(v, 3), &x, &x, &y)
                .unwrap()
                .total()
        };
        let g = hnb_score(&params, &x, &x, &y).unwrap();
        assert_close_relative(&g, &central_difference(f, &v, 1e-5), 1e-6);

        // Moving δ leaves the truncated part untouched.
        let mut moved = params.clone();
        moved.delta[1] += 0.5;
        let a = hnb_loglik(&params, &x, &x, &y).unwrap();
        let b = hnb_loglik(&moved, &x, &x, &y).unwrap();
        assert_eq!(a.truncated, b.truncated);
        let ga = truncated_score(&params.nb, &x, &y).unwrap();
        let gb = truncated_score(&moved.nb, &x, &y).unwrap();
        assert_eq!(ga, gb);
    }

    #[test]
    fn binary_score_vanishes_at_zero_fraction() {
        let y = [0, 0, 3, 1, 0, 7, 2, 2];
        let x = DMatrix::from_element(8, 1, 1.0);
        let z: f64 = 3.0 / 8.0;
        let delta = DVector::from_vec(vec![(z / (1.0 - z)).ln()]);
        let g = binary_score(&delta, &x, &y).unwrap();
        assert!(g[0].abs() < 1e-14);
    }

    #[test]
    fn hurdle_collapses_to_nb() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let (x, y, beta) = random_instance(&mut rng, 50, 3);
            let nb = NbRegParams::new(beta.clone(), rng.random_range(0.1..2.0));
            let theta = link_mean(&x, &beta).unwrap();
            let phi: Vec<f64> = theta
                .iter()
                .map(|&t| nb_zero_prob(&NbParams::new(t, nb.r()).unwrap()))
                .collect();
            let hurdle = hnb_loglik_with_phi(&nb, &x, &phi, &y).unwrap().total();
            let plain = nb_loglik(&nb, &x, &y, LoglikScale::Full).unwrap();
            assert!((hurdle - plain).abs() <= 1e-12 * plain.abs(), "{hurdle} vs {plain}");
        }
    }

    #[test]
    fn evaluation_is_bit_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (x, y, beta) = random_instance(&mut rng, 200, 4);
        let p = NbRegParams::new(beta, 0.9);
        let a = nb_loglik(&p, &x, &y, LoglikScale::Full).unwrap();
        let b = nb_loglik(&p, &x, &y, LoglikScale::Full).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn poisson_score_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (x, y, beta) = random_instance(&mut rng, 40, 3);
        let fd = central_difference(
            |b| poisson_loglik(b, &x, &y, LoglikScale::Full).unwrap(),
            &beta,
            1e-5,
        );
        assert_close_relative(&poisson_score(&beta, &x, &y).unwrap(), &fd, 1e-6);
    }
}
