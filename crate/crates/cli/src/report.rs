//! Report documents written by the subcommands.
//!
//! JSON reports carry `schema_version` and round every real to six
//! significant digits; text reports use four decimals.

use std::fmt::Write as _;

use countreg::diagnostics::ResidualSet;
use countreg::fit::{Block, FitWarning, FittedModel, Family};
use countreg::inference::{aic, irr_all, wald_table, CoefficientReport, IrrReport, RankedModel};
use countreg::Result;
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

/// Confidence level of every interval in the reports.
pub const CI_LEVEL: f64 = 0.95;

/// Rounds to six significant digits; non-finite values pass through.
pub fn sig6(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float")
}

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientRow {
    pub name: String,
    pub estimate: f64,
    pub std_err: f64,
    pub z: f64,
    pub p_value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub stars: String,
}

impl From<&CoefficientReport> for CoefficientRow {
    fn from(c: &CoefficientReport) -> Self {
        Self {
            name: c.name.clone(),
            estimate: sig6(c.estimate),
            std_err: sig6(c.std_err),
            z: sig6(c.z),
            p_value: sig6(c.p_value),
            ci_low: sig6(c.ci_low),
            ci_high: sig6(c.ci_high),
            stars: c.stars.as_str().to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IrrRow {
    pub name: String,
    pub irr: f64,
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl From<&IrrReport> for IrrRow {
    fn from(r: &IrrReport) -> Self {
        Self {
            name: r.name.clone(),
            irr: sig6(r.irr),
            std_err: sig6(r.irr_std_err),
            ci_low: sig6(r.ci_low),
            ci_high: sig6(r.ci_high),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Equation {
    pub coefficients: Vec<CoefficientRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dispersion: Option<CoefficientRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub irr: Option<Vec<IrrRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loglik: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualSummary {
    pub pearson_statistic: f64,
    pub df: usize,
    pub pearson_per_df: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deviance_sum_signed: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deviance_signed_per_df: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deviance_sum_squared: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deviance_squared_per_df: Option<f64>,
}

impl From<&ResidualSet> for ResidualSummary {
    fn from(r: &ResidualSet) -> Self {
        Self {
            pearson_statistic: sig6(r.ps),
            df: r.df,
            pearson_per_df: sig6(r.ps_per_df()),
            deviance_sum_signed: r.deviance_sum_signed.map(sig6),
            deviance_signed_per_df: r.deviance_signed_per_df().map(sig6),
            deviance_sum_squared: r.deviance_sum_squared.map(sig6),
            deviance_squared_per_df: r.deviance_squared_per_df().map(sig6),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelReport {
    pub family: Family,
    pub n: usize,
    pub n_params: usize,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub loglik: f64,
    pub aic: f64,
    pub warnings: Vec<FitWarning>,
    /// Mean equation of P and NB fits.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Equation>,
    /// Truncated NB part of an HNB fit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positives: Option<Equation>,
    /// Binary hurdle part of an HNB fit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeros: Option<Equation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residuals: Option<ResidualSummary>,
}

impl ModelReport {
    pub fn new(m: &FittedModel, residuals: Option<&ResidualSet>) -> Result<Self> {
        let table = wald_table(m, CI_LEVEL)?;
        let rows = |block: Block| -> Vec<CoefficientRow> {
            table.iter().filter(|c| c.block == block).map(CoefficientRow::from).collect()
        };
        let dispersion = table
            .iter()
            .find(|c| c.block == Block::Dispersion)
            .map(CoefficientRow::from);
        let irr: Vec<IrrRow> = irr_all(&table).iter().map(IrrRow::from).collect();
        let mean = Equation {
            coefficients: rows(Block::Mean),
            dispersion,
            irr: Some(irr),
            loglik: m.loglik_parts.map(|p| sig6(p.truncated)),
        };
        let (coefficients, positives, zeros) = if m.family == Family::HurdleNegativeBinomial {
            let zeros = Equation {
                coefficients: rows(Block::Hurdle),
                dispersion: None,
                irr: None,
                loglik: m.loglik_parts.map(|p| sig6(p.binary)),
            };
            (None, Some(mean), Some(zeros))
        } else {
            (Some(mean), None, None)
        };
        Ok(Self {
            family: m.family,
            n: m.n,
            n_params: m.n_params(),
            converged: m.converged,
            iterations: m.iterations,
            gradient_norm: sig6(m.gradient_norm),
            loglik: sig6(m.loglik),
            aic: sig6(aic(m)),
            warnings: m.warnings.clone(),
            coefficients,
            positives,
            zeros,
            residuals: residuals.map(ResidualSummary::from),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitDocument {
    pub schema_version: u32,
    pub command: &'static str,
    pub model: ModelReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub rank: usize,
    pub family: Family,
    pub loglik: f64,
    pub n_params: usize,
    /// Rounded to an integer.
    pub aic: i64,
    pub delta_aic: i64,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareDocument {
    pub schema_version: u32,
    pub command: &'static str,
    pub n: usize,
    pub ranking: Vec<ComparisonRow>,
}

impl CompareDocument {
    pub fn new(models: &[FittedModel], ranked: &[RankedModel]) -> Self {
        let ranking = ranked
            .iter()
            .enumerate()
            .map(|(i, r)| ComparisonRow {
                rank: i + 1,
                family: r.family,
                loglik: sig6(r.loglik),
                n_params: r.n_params,
                aic: r.aic.round() as i64,
                delta_aic: r.delta_aic.round() as i64,
                converged: models[r.index].converged,
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            command: "compare",
            n: models.first().map_or(0, |m| m.n),
            ranking,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "AIC comparison (n = {})", self.n).unwrap();
        writeln!(s, "{:<5} {:<7} {:>16} {:>6} {:>14} {:>10}", "rank", "family", "loglik", "p", "AIC", "dAIC").unwrap();
        for r in &self.ranking {
            writeln!(
                s,
                "{:<5} {:<7} {:>16} {:>6} {:>14} {:>10}{}",
                r.rank,
                r.family.code(),
                r.loglik,
                r.n_params,
                r.aic,
                r.delta_aic,
                if r.converged { "" } else { "  (not converged)" }
            )
            .unwrap();
        }
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Dropped {
    pub mean: Vec<String>,
    pub hurdle: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RestrictDocument {
    pub schema_version: u32,
    pub command: &'static str,
    pub level: f64,
    pub dropped: Dropped,
    pub intercept_only_fallback: bool,
    pub full_aic: f64,
    pub restricted: ModelReport,
}

fn fmt4(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.4}")
    } else {
        "inf".to_string()
    }
}

fn equation_text(s: &mut String, title: &str, eq: &Equation) {
    let width = eq
        .coefficients
        .iter()
        .map(|c| c.name.chars().count())
        .max()
        .unwrap_or(8)
        .max(8);
    writeln!(s, "{title}").unwrap();
    writeln!(
        s,
        "{:<width$}  {:>10}  {:>10}  {:>10}  {:>10}  {:>8}",
        "Variable", "Estimate", "Std. Err.", "95% lower", "95% upper", "p"
    )
    .unwrap();
    let all = eq.coefficients.iter().chain(eq.dispersion.iter());
    for c in all {
        writeln!(
            s,
            "{:<width$}  {:>10}  {:>10}  {:>10}  {:>10}  {:>8} {}",
            c.name,
            fmt4(c.estimate),
            fmt4(c.std_err),
            fmt4(c.ci_low),
            fmt4(c.ci_high),
            fmt4(c.p_value),
            c.stars
        )
        .unwrap();
    }
    if let Some(irr) = eq.irr.as_ref().filter(|v| !v.is_empty()) {
        writeln!(s, "\nIncidence rate ratios").unwrap();
        writeln!(
            s,
            "{:<width$}  {:>10}  {:>10}  {:>10}  {:>10}",
            "Variable", "IRR", "Std. Err.", "95% lower", "95% upper"
        )
        .unwrap();
        for r in irr {
            writeln!(
                s,
                "{:<width$}  {:>10}  {:>10}  {:>10}  {:>10}",
                r.name,
                fmt4(r.irr),
                fmt4(r.std_err),
                fmt4(r.ci_low),
                fmt4(r.ci_high)
            )
            .unwrap();
        }
    }
    s.push('\n');
}

impl ModelReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "Family {}  n = {}  parameters = {}  loglik = {}  AIC = {}",
            self.family.code(),
            self.n,
            self.n_params,
            self.loglik,
            self.aic
        )
        .unwrap();
        if !self.converged {
            writeln!(
                s,
                "NOT CONVERGED after {} iterations (gradient norm {:e})",
                self.iterations, self.gradient_norm
            )
            .unwrap();
        }
        for w in &self.warnings {
            writeln!(s, "warning: {}", serde_json::to_string(w).unwrap_or_default()).unwrap();
        }
        s.push('\n');
        if let Some(eq) = &self.coefficients {
            equation_text(&mut s, "Coefficients", eq);
        }
        if let Some(eq) = &self.positives {
            equation_text(&mut s, "Positives (truncated NB part)", eq);
        }
        if let Some(eq) = &self.zeros {
            equation_text(&mut s, "Zeros (hurdle part, P(y = 0))", eq);
        }
        if let Some(r) = &self.residuals {
            writeln!(s, "Pearson statistic {}  df {}  ratio {}", r.pearson_statistic, r.df, r.pearson_per_df).unwrap();
            if let (Some(d), Some(dd)) = (r.deviance_sum_signed, r.deviance_signed_per_df) {
                writeln!(s, "Deviance sum(d) {}  per df {}", fmt4(d), fmt4(dd)).unwrap();
            }
            if let (Some(d), Some(dd)) = (r.deviance_sum_squared, r.deviance_squared_per_df) {
                writeln!(s, "Deviance sum(d^2) {}  per df {}", fmt4(d), fmt4(dd)).unwrap();
            }
        }
        s
    }
}
