//! Wald inference, incidence-rate ratios, hurdle marginal effects and AIC.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::fit::{Block, FittedModel, Family};
use crate::likelihood::logistic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stars {
    #[serde(rename = "***")]
    Three,
    #[serde(rename = "**")]
    Two,
    #[serde(rename = "*")]
    One,
    #[serde(rename = "")]
    None,
}

impl Stars {
    /// Thresholds 0.01, 0.05 and 0.10.
    pub fn from_p(p: f64) -> Self {
        if p < 0.01 {
            Stars::Three
        } else if p < 0.05 {
            Stars::Two
        } else if p < 0.10 {
            Stars::One
        } else {
            Stars::None
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stars::Three => "***",
            Stars::Two => "**",
            Stars::One => "*",
            Stars::None => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientReport {
    pub name: String,
    pub block: Block,
    pub estimate: f64,
    pub std_err: f64,
    pub z: f64,
    pub p_value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub stars: Stars,
    /// Set when the standard error is zero and `z` is infinite.
    pub infinite_z: bool,
}

/// Two-sided critical value of the standard normal for confidence `level`.
pub fn normal_critical(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("confidence level must lie in (0, 1), got {level}")));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf(0.5 + level / 2.0))
}

/// Two-sided normal tail probability `P(|Z| ≥ |z|)`.
pub fn two_sided_p(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

impl CoefficientReport {
    /// Wald summary of a single estimate.
    pub fn from_estimate(
        name: impl Into<String>,
        block: Block,
        estimate: f64,
        std_err: f64,
        level: f64,
    ) -> Result<Self> {
        if !(std_err >= 0.0) {
            return Err(Error::Domain(format!("standard error must be nonnegative, got {std_err}")));
        }
        let crit = normal_critical(level)?;
        let infinite_z = std_err == 0.0;
        let z = if infinite_z {
            f64::INFINITY.copysign(estimate)
        } else {
            estimate / std_err
        };
        let p_value = two_sided_p(z);
        Ok(Self {
            name: name.into(),
            block,
            estimate,
            std_err,
            z,
            p_value,
            ci_low: estimate - crit * std_err,
            ci_high: estimate + crit * std_err,
            stars: Stars::from_p(p_value),
            infinite_z,
        })
    }
}

/// Wald table for every parameter of `m` on its natural scale. The
/// dispersion row tests `r = 0`, which lies on the boundary and is shown
/// for completeness only.
pub fn wald_table(m: &FittedModel, level: f64) -> Result<Vec<CoefficientReport>> {
    m.parameters()
        .into_iter()
        .map(|p| CoefficientReport::from_estimate(p.name, p.block, p.estimate, p.std_err, level))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IrrReport {
    pub name: String,
    pub irr: f64,
    pub irr_std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl IrrReport {
    pub fn from_coefficient(c: &CoefficientReport) -> Self {
        let irr = c.estimate.exp();
        Self {
            name: c.name.clone(),
            irr,
            irr_std_err: irr * c.std_err,
            ci_low: c.ci_low.exp(),
            ci_high: c.ci_high.exp(),
        }
    }
}

/// Incidence-rate ratios for the named mean-equation coefficients, in the
/// order requested.
pub fn irr(reports: &[CoefficientReport], names: &[&str]) -> Result<Vec<IrrReport>> {
    names
        .iter()
        .map(|&name| {
            reports
                .iter()
                .find(|c| c.name == name && c.block == Block::Mean)
                .map(IrrReport::from_coefficient)
                .ok_or_else(|| Error::UnknownName(name.to_string()))
        })
        .collect()
}

/// IRRs for every mean-equation coefficient except the intercept.
pub fn irr_all(reports: &[CoefficientReport]) -> Vec<IrrReport> {
    reports
        .iter()
        .filter(|c| c.block == Block::Mean && c.name != crate::datamodel::INTERCEPT)
        .map(IrrReport::from_coefficient)
        .collect()
}

/// `∂φ/∂x_j = δ_j φ (1 − φ)` at the hurdle-design row `at`.
pub fn marginal_effect_hurdle(m: &FittedModel, covariate: &str, at: &[f64]) -> Result<f64> {
    let delta = match (&m.delta, m.family) {
        (Some(d), Family::HurdleNegativeBinomial) => d,
        _ => {
            return Err(Error::UnsupportedFamily(format!(
                "marginal effects on the hurdle need an HNB model, got {}",
                m.family
            )))
        }
    };
    if at.len() != delta.len() {
        return Err(Error::Dimension(format!(
            "row has {} entries, hurdle equation has {}",
            at.len(),
            delta.len()
        )));
    }
    let j = m
        .hurdle_labels
        .iter()
        .position(|l| l == covariate)
        .ok_or_else(|| Error::UnknownName(covariate.to_string()))?;
    let eta: f64 = at.iter().zip(delta.iter()).map(|(x, d)| x * d).sum();
    let phi = logistic(eta);
    Ok(delta[j] * phi * (1.0 - phi))
}

/// `−2ℓ + 2p`.
pub fn aic_value(loglik: f64, n_params: usize) -> f64 {
    -2.0 * loglik + 2.0 * n_params as f64
}

pub fn aic(m: &FittedModel) -> f64 {
    aic_value(m.loglik, m.n_params())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedModel {
    /// Position in the input list.
    pub index: usize,
    pub family: Family,
    pub loglik: f64,
    pub n_params: usize,
    pub aic: f64,
    pub delta_aic: f64,
}

/// Models sorted by ascending AIC (stable on ties) with differences to the best.
pub fn compare(models: &[FittedModel]) -> Result<Vec<RankedModel>> {
    let first = models
        .first()
        .ok_or_else(|| Error::Config("no models to compare".into()))?;
    if let Some(bad) = models.iter().find(|m| m.n != first.n) {
        return Err(Error::Dimension(format!(
            "models fitted on {} and {} observations",
            first.n, bad.n
        )));
    }
    let mut ranked: Vec<RankedModel> = models
        .iter()
        .enumerate()
        .map(|(index, m)| RankedModel {
            index,
            family: m.family,
            loglik: m.loglik,
            n_params: m.n_params(),
            aic: aic(m),
            delta_aic: 0.0,
        })
        .collect();
    ranked.sort_by(|a, b| a.aic.total_cmp(&b.aic));
    let best = ranked[0].aic;
    for r in &mut ranked {
        r.delta_aic = r.aic - best;
    }
    Ok(ranked)
}
