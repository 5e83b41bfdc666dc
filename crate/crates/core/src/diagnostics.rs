//! Residuals and goodness-of-fit summaries.
//!
//! Per-observation work is done in parallel; every reduction is a
//! sequential sum in row order so results do not depend on thread count.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::countdist::{
    hnb_mean_var, hnb_pmf, nb_log_pmf, nb_mean_var, poisson_log_pmf, CountParams, HurdleParams,
    NbParams,
};
use crate::error::{Error, Result};
use crate::fit::{Family, FittedModel};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualSet {
    pub mu: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub pearson: Vec<f64>,
    /// Signed deviance residuals, NB only.
    pub deviance: Option<Vec<f64>>,
    /// Pearson statistic `Σ r_i²`.
    pub ps: f64,
    /// `Σ d_i`.
    pub deviance_sum_signed: Option<f64>,
    /// `Σ d_i²`, the conventional deviance.
    pub deviance_sum_squared: Option<f64>,
    /// `n` minus the number of free parameters.
    pub df: usize,
}

impl ResidualSet {
    pub fn ps_per_df(&self) -> f64 {
        self.ps / self.df as f64
    }

    pub fn deviance_signed_per_df(&self) -> Option<f64> {
        self.deviance_sum_signed.map(|d| d / self.df as f64)
    }

    pub fn deviance_squared_per_df(&self) -> Option<f64> {
        self.deviance_sum_squared.map(|d| d / self.df as f64)
    }
}

/// Distribution of every observation under the fitted model.
pub fn row_distributions(
    m: &FittedModel,
    x: &DMatrix<f64>,
    x_h: Option<&DMatrix<f64>>,
) -> Result<Vec<CountParams>> {
    let theta = m.theta(x)?;
    match m.family {
        Family::Poisson => Ok(theta.iter().map(|&t| CountParams::Poisson(t)).collect()),
        Family::NegativeBinomial => {
            let r = m.r().expect("NB model has r");
            theta
                .iter()
                .map(|&t| NbParams::new(t, r).map(CountParams::Nb))
                .collect()
        }
        Family::HurdleNegativeBinomial => {
            let x_h = x_h.ok_or_else(|| Error::Config("HNB diagnostics need the hurdle design".into()))?;
            if x_h.nrows() != x.nrows() {
                return Err(Error::Dimension(format!(
                    "designs have {} and {} rows",
                    x.nrows(),
                    x_h.nrows()
                )));
            }
            let phi = m.phi(x_h)?;
            let r = m.r().expect("HNB model has r");
            theta
                .iter()
                .zip(phi.iter())
                .map(|(&t, &p)| {
                    let nb = NbParams::new(t, r)?;
                    HurdleParams::new(nb, p).map(CountParams::Hurdle)
                })
                .collect()
        }
    }
}

fn moments(p: &CountParams) -> (f64, f64) {
    match p {
        CountParams::Poisson(l) => (*l, *l),
        CountParams::Nb(nb) => {
            let m = nb_mean_var(nb);
            (m.mean, m.variance)
        }
        CountParams::Hurdle(h) => {
            let m = hnb_mean_var(h);
            (m.mean, m.variance)
        }
    }
}

fn pmf(y: u64, p: &CountParams) -> f64 {
    match p {
        CountParams::Poisson(l) => poisson_log_pmf(y, *l).exp(),
        CountParams::Nb(nb) => nb_log_pmf(y, nb).exp(),
        CountParams::Hurdle(h) => hnb_pmf(y, h),
    }
}

fn check_rows(x: &DMatrix<f64>, y: &[u64]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "design has {} rows, response has {}",
            x.nrows(),
            y.len()
        )));
    }
    Ok(())
}

fn degrees_of_freedom(m: &FittedModel, n: usize) -> Result<usize> {
    n.checked_sub(m.n_params())
        .filter(|&df| df > 0)
        .ok_or_else(|| Error::Data(format!("{n} observations leave no residual degrees of freedom")))
}

/// Pearson residuals `(y − μ)/σ` with the family's mean and variance; the
/// hurdle variance comes from truncated summation of the pmf.
pub fn pearson(
    m: &FittedModel,
    x: &DMatrix<f64>,
    x_h: Option<&DMatrix<f64>>,
    y: &[u64],
) -> Result<ResidualSet> {
    check_rows(x, y)?;
    let df = degrees_of_freedom(m, y.len())?;
    let rows = row_distributions(m, x, x_h)?;
    let per_row: Vec<(f64, f64, f64)> = rows
        .par_iter()
        .zip(y.par_iter())
        .map(|(p, &yi)| {
            let (mu, s2) = moments(p);
            (mu, s2, pearson_residual(yi as f64, mu, s2))
        })
        .collect();
    let mut out = ResidualSet {
        mu: Vec::with_capacity(y.len()),
        sigma2: Vec::with_capacity(y.len()),
        pearson: Vec::with_capacity(y.len()),
        deviance: None,
        ps: 0.0,
        deviance_sum_signed: None,
        deviance_sum_squared: None,
        df,
    };
    for (mu, s2, r) in per_row {
        out.mu.push(mu);
        out.sigma2.push(s2);
        out.pearson.push(r);
    }
    out.ps = out.pearson.iter().map(|r| r * r).sum();
    Ok(out)
}

pub fn pearson_residual(y: f64, mu: f64, sigma2: f64) -> f64 {
    if y == mu {
        0.0
    } else {
        (y - mu) / sigma2.sqrt()
    }
}

/// Squared NB deviance contribution `d²`:
/// `2[y log(y/θ) − (y + 1/r) log((1 + r y)/(1 + r θ))]` for `y > 0`,
/// `(2/r) log(1 + r θ)` for `y = 0`.
pub fn nb_deviance_squared(y: u64, theta: f64, r: f64) -> f64 {
    let log1p_rt = (r * theta).ln_1p();
    if y == 0 {
        return 2.0 * log1p_rt / r;
    }
    let yf = y as f64;
    let d2 = 2.0 * (yf * (yf / theta).ln() - (yf + 1.0 / r) * ((r * yf).ln_1p() - log1p_rt));
    d2.max(0.0)
}

/// Signed deviance residual `sign(y − θ)·sqrt(d²)`.
pub fn nb_deviance_residual(y: u64, theta: f64, r: f64) -> f64 {
    let d = nb_deviance_squared(y, theta, r).sqrt();
    if (y as f64) < theta {
        -d
    } else {
        d
    }
}

/// Pearson and deviance residuals of an NB fit. Both `Σ d_i` and `Σ d_i²`
/// are reported.
pub fn deviance_residuals(m: &FittedModel, x: &DMatrix<f64>, y: &[u64]) -> Result<ResidualSet> {
    if m.family != Family::NegativeBinomial {
        return Err(Error::UnsupportedFamily(format!(
            "deviance residuals are defined for NB fits only, got {}",
            m.family
        )));
    }
    let mut out = pearson(m, x, None, y)?;
    let r = m.r().expect("NB model has r");
    let dev: Vec<f64> = out
        .mu
        .par_iter()
        .zip(y.par_iter())
        .map(|(&theta, &yi)| nb_deviance_residual(yi, theta, r))
        .collect();
    out.deviance_sum_signed = Some(dev.iter().sum());
    out.deviance_sum_squared = Some(dev.iter().map(|d| d * d).sum());
    out.deviance = Some(dev);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyTable {
    /// Observed counts of `0..=y_max`.
    pub empirical: Vec<u64>,
    /// Observations above `y_max`.
    pub empirical_overflow: u64,
    /// Expected counts `Σ_i P_i(Y = j)` for `j = 0..=y_max`.
    pub fitted: Vec<f64>,
    /// Expected mass above `y_max`.
    pub fitted_overflow: f64,
}

/// Observed and model-expected frequencies of each count value.
pub fn frequency_table(
    y: &[u64],
    m: &FittedModel,
    x: &DMatrix<f64>,
    x_h: Option<&DMatrix<f64>>,
    y_max: u64,
) -> Result<FrequencyTable> {
    check_rows(x, y)?;
    let rows = row_distributions(m, x, x_h)?;
    let width = y_max as usize + 1;
    let mut empirical = vec![0u64; width];
    let mut empirical_overflow = 0;
    for &v in y {
        match empirical.get_mut(v as usize) {
            Some(c) => *c += 1,
            None => empirical_overflow += 1,
        }
    }
    let per_row: Vec<Vec<f64>> = rows
        .par_iter()
        .map(|p| (0..=y_max).map(|j| pmf(j, p)).collect())
        .collect();
    let mut fitted = vec![0.0; width];
    let mut fitted_overflow = 0.0;
    for probs in &per_row {
        for (f, p) in fitted.iter_mut().zip(probs) {
            *f += p;
        }
        fitted_overflow += (1.0 - probs.iter().sum::<f64>()).max(0.0);
    }
    Ok(FrequencyTable {
        empirical,
        empirical_overflow,
        fitted,
        fitted_overflow,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::countdist::{draw, seeded_rng};
    use crate::datamodel::DesignMatrix;
    use crate::fit::{fit_homogeneous, fit_nb, FitOptions};
    use crate::likelihood::link_mean;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;
    use proptest::prelude::*;
    use rand::Rng;

    fn opts() -> FitOptions {
        FitOptions::default()
    }

    #[test]
    fn pearson_examples() {
        assert_eq!(pearson_residual(4.0, 2.0, 4.0), 1.0);
        assert_eq!(pearson_residual(2.5, 2.5, 1.0), 0.0);
    }

    #[test]
    fn deviance_examples() {
        assert_eq!(nb_deviance_squared(3, 3.0, 0.5), 0.0);
        assert_abs_diff_eq!(nb_deviance_squared(0, 1.0, 1.0), 2.0 * 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(nb_deviance_residual(0, 1.0, 1.0), -1.1774100225154747, epsilon = 1e-12);
        // 2[3 ln 2 − 5 ln(2.5/1.75)]
        let want = 2.0 * (3.0 * 2f64.ln() - 5.0 * (2.5f64 / 1.75).ln());
        assert_abs_diff_eq!(nb_deviance_squared(3, 1.5, 0.5), want, epsilon = 1e-13);
        assert!(nb_deviance_residual(3, 1.5, 0.5) > 0.0);
    }

    #[test]
    fn homogeneous_zero_frequency_matches_hurdle() {
        let y = [0u64, 0, 0, 1, 2, 5, 1, 0, 7, 3, 0, 2];
        let m = fit_homogeneous(Family::HurdleNegativeBinomial, &y, &opts()).unwrap();
        let x = DMatrix::from_element(y.len(), 1, 1.0);
        let t = frequency_table(&y, &m, &x, Some(&x), 30).unwrap();
        assert_abs_diff_eq!(t.fitted[0], t.empirical[0] as f64, epsilon = 1e-6);
        let total: f64 = t.fitted.iter().sum::<f64>() + t.fitted_overflow;
        assert_abs_diff_eq!(total, y.len() as f64, epsilon = 1e-9);
        assert_eq!(t.empirical.iter().sum::<u64>() + t.empirical_overflow, y.len() as u64);
    }

    #[test]
    fn fitted_zero_frequency_is_n_times_pmf() {
        let y = [0u64, 0, 1];
        let m = fit_homogeneous(Family::Poisson, &y, &opts()).unwrap();
        let x = DMatrix::from_element(3, 1, 1.0);
        let t = frequency_table(&y, &m, &x, None, 2).unwrap();
        let theta = m.beta[0].exp();
        assert_abs_diff_eq!(t.fitted[0], 3.0 * (-theta).exp(), epsilon = 1e-14);
        assert_eq!(t.empirical, vec![2, 1, 0]);
    }

    #[test]
    fn deviance_needs_nb() {
        let y = [0u64, 1, 2, 3, 5];
        let m = fit_homogeneous(Family::Poisson, &y, &opts()).unwrap();
        let x = DMatrix::from_element(5, 1, 1.0);
        assert!(matches!(deviance_residuals(&m, &x, &y), Err(Error::UnsupportedFamily(_))));
        assert!(pearson(&m, &x, None, &y[..3]).is_err());
    }

    #[test]
    fn perfect_fit_has_zero_residuals() {
        let y = [4u64, 4, 4, 4];
        let m = fit_homogeneous(Family::Poisson, &y, &opts()).unwrap();
        let x = DMatrix::from_element(4, 1, 1.0);
        let res = pearson(&m, &x, None, &y).unwrap();
        assert!(res.pearson.iter().all(|r| r.abs() < 1e-12));
        assert!(res.ps < 1e-20);
    }

    #[test]
    fn parallel_and_sequential_ps_agree() {
        let n = 5000;
        let mut rng = seeded_rng(3, 0);
        let x1: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = DesignMatrix::from_columns(n, &[("x", x1)]).unwrap();
        let theta = link_mean(x.matrix(), &DVector::from_vec(vec![1.0, 0.5])).unwrap();
        let y: Vec<u64> = theta
            .iter()
            .map(|&t| draw(&mut rng, &CountParams::Nb(NbParams::new(t, 0.8).unwrap())))
            .collect();
        let m = fit_nb(&x, &y, &opts()).unwrap();
        let res = deviance_residuals(&m, x.matrix(), &y).unwrap();
        let sequential: f64 = res.pearson.iter().map(|r| r * r).sum();
        let parallel: f64 = res.pearson.par_iter().map(|r| r * r).sum();
        assert!((sequential - parallel).abs() <= 1e-8 * sequential);
        assert_eq!(res.ps, sequential);
        assert_eq!(res.df, n - 3);
        let dev = res.deviance.as_ref().unwrap();
        assert_abs_diff_eq!(
            res.deviance_sum_squared.unwrap(),
            dev.iter().map(|d| d * d).sum::<f64>()
        );
    }

    proptest! {
        #[test]
        fn deviance_is_saturated_minus_fitted(y in 0u64..300, theta in 0.01f64..200.0, r in 0.01f64..5.0) {
            let fitted = nb_log_pmf(y, &NbParams::new(theta, r).unwrap());
            let saturated = if y == 0 {
                0.0
            } else {
                nb_log_pmf(y, &NbParams::new(y as f64, r).unwrap())
            };
            let oracle = 2.0 * (saturated - fitted);
            let d2 = nb_deviance_squared(y, theta, r);
            prop_assert!((d2 - oracle).abs() <= 1e-9 * oracle.abs().max(1.0), "{d2} vs {oracle}");
        }
    }
}
