//! Maximum-likelihood fitting of Poisson, NB and hurdle NB regressions.
//!
//! Every fitter builds starting values deterministically, maximises with
//! [`optim::maximize`](crate::optim::maximize) and estimates the covariance
//! as the inverse observed information, a central-difference Hessian of the
//! analytic score at the optimum. The hurdle model is fitted as two
//! independent problems: a logistic regression for `I(y = 0)` and a
//! zero-truncated NB regression on the positive counts.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::datamodel::DesignMatrix;
use crate::error::{Error, Result};
use crate::likelihood::{
    binary_loglik, binary_score, link_hurdle, link_mean, logistic, nb_loglik, nb_score,
    poisson_loglik, poisson_score, truncated_loglik, truncated_score, HnbRegParams,
    HurdleLoglik, LoglikScale, NbRegParams, LOG_R_BOUNDS,
};
pub use crate::optim::FitOptions;
use crate::optim::{
    inverse_information, maximize, numerical_hessian, pseudo_inverse_information, AscentResult,
    Objective,
};

/// Below this dispersion estimate the fit is flagged as sitting on the
/// Poisson boundary.
pub const POISSON_BOUNDARY: f64 = 1e-6;

/// Relative covariance change (step `h` vs `2h`) above which a conditioning
/// warning is attached.
pub const COVARIANCE_STABILITY: f64 = 1e-6;

/// Fitted linear predictors beyond this magnitude in the binary part are
/// treated as separation.
const SEPARATION_ETA: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "P")]
    Poisson,
    #[serde(rename = "NB")]
    NegativeBinomial,
    #[serde(rename = "HNB")]
    HurdleNegativeBinomial,
}

impl Family {
    pub fn code(self) -> &'static str {
        match self {
            Family::Poisson => "P",
            Family::NegativeBinomial => "NB",
            Family::HurdleNegativeBinomial => "HNB",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "P" | "POISSON" => Ok(Family::Poisson),
            "NB" | "NEGBIN" => Ok(Family::NegativeBinomial),
            "HNB" | "HURDLE" => Ok(Family::HurdleNegativeBinomial),
            other => Err(Error::Config(format!("unknown family \"{other}\""))),
        }
    }
}

/// Which equation a parameter belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Mean,
    Dispersion,
    Hurdle,
}

/// A parameter on its natural scale (`r` rather than `log r`).
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub block: Block,
    pub estimate: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitWarning {
    /// Observed information was not positive definite; a pseudo-inverse was used.
    HessianNotNegativeDefinite,
    /// Covariance changed by more than the stability threshold when the
    /// Hessian step was doubled.
    IllConditionedCovariance { max_relative_change: f64 },
    PoissonBoundary { r: f64 },
    InterceptOnlyFallback,
}

#[derive(Debug, Clone)]
pub struct FittedModel {
    pub family: Family,
    pub mean_labels: Vec<String>,
    pub hurdle_labels: Vec<String>,
    pub beta: DVector<f64>,
    pub log_r: Option<f64>,
    pub delta: Option<DVector<f64>>,
    /// Covariance on the optimisation scale, ordered `(β, log r, δ)`.
    pub covariance: DMatrix<f64>,
    /// As `covariance` with `log r` replaced by `r` (delta method).
    pub natural_covariance: DMatrix<f64>,
    /// Full log-likelihood.
    pub loglik: f64,
    pub loglik_parts: Option<HurdleLoglik>,
    pub n: usize,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub warnings: Vec<FitWarning>,
}

impl FittedModel {
    /// Number of mean-equation coefficients.
    pub fn k(&self) -> usize {
        self.beta.len()
    }

    pub fn k_hurdle(&self) -> usize {
        self.delta.as_ref().map_or(0, |d| d.len())
    }

    /// Free parameters: `k` (P), `k + 1` (NB), `k + k_h + 1` (HNB).
    pub fn n_params(&self) -> usize {
        self.k() + usize::from(self.log_r.is_some()) + self.k_hurdle()
    }

    pub fn r(&self) -> Option<f64> {
        self.log_r.map(f64::exp)
    }

    pub fn nb_params(&self) -> Option<NbRegParams> {
        self.log_r.map(|log_r| NbRegParams {
            beta: self.beta.clone(),
            log_r,
        })
    }

    pub fn theta(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        link_mean(x, &self.beta)
    }

    pub fn phi(&self, x_h: &DMatrix<f64>) -> Result<DVector<f64>> {
        let delta = self
            .delta
            .as_ref()
            .ok_or_else(|| Error::UnsupportedFamily(format!("{} has no hurdle equation", self.family)))?;
        link_hurdle(x_h, delta)
    }

    /// Parameters on the natural scale in `(β, r, δ)` order.
    pub fn parameters(&self) -> Vec<Parameter> {
        let se = |i: usize| self.natural_covariance[(i, i)].max(0.0).sqrt();
        let mut out: Vec<Parameter> = self
            .beta
            .iter()
            .enumerate()
            .map(|(i, &b)| Parameter {
                name: self.mean_labels[i].clone(),
                block: Block::Mean,
                estimate: b,
                std_err: se(i),
            })
            .collect();
        let mut offset = self.k();
        if let Some(r) = self.r() {
            out.push(Parameter {
                name: "r".into(),
                block: Block::Dispersion,
                estimate: r,
                std_err: se(offset),
            });
            offset += 1;
        }
        if let Some(delta) = &self.delta {
            out.extend(delta.iter().enumerate().map(|(i, &d)| Parameter {
                name: self.hurdle_labels[i].clone(),
                block: Block::Hurdle,
                estimate: d,
                std_err: se(offset + i),
            }));
        }
        out
    }

    /// Fails with [`Error::NonConvergence`] unless the optimiser converged.
    pub fn ensure_converged(&self) -> Result<&Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence {
                iterations: self.iterations,
                gradient_norm: self.gradient_norm,
            })
        }
    }

    pub fn has_warning(&self, pred: impl Fn(&FitWarning) -> bool) -> bool {
        self.warnings.iter().any(pred)
    }

    /// Natural-scale estimates of an intercept-only model.
    pub fn homogeneous(&self) -> Option<HomogeneousEstimates> {
        if self.k() != 1 || self.k_hurdle() > 1 {
            return None;
        }
        let cov = &self.covariance;
        let theta = self.beta[0].exp();
        let mut out = HomogeneousEstimates {
            theta,
            theta_std_err: theta * cov[(0, 0)].max(0.0).sqrt(),
            r: None,
            r_std_err: None,
            phi: None,
            phi_std_err: None,
        };
        let mut offset = 1;
        if let Some(r) = self.r() {
            out.r = Some(r);
            out.r_std_err = Some(r * cov[(1, 1)].max(0.0).sqrt());
            offset += 1;
        }
        if let Some(delta) = &self.delta {
            let phi = logistic(delta[0]);
            out.phi = Some(phi);
            out.phi_std_err = Some(phi * (1.0 - phi) * cov[(offset, offset)].max(0.0).sqrt());
        }
        Some(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomogeneousEstimates {
    pub theta: f64,
    pub theta_std_err: f64,
    pub r: Option<f64>,
    pub r_std_err: Option<f64>,
    pub phi: Option<f64>,
    pub phi_std_err: Option<f64>,
}

struct PoissonObjective<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [u64],
}

impl Objective for PoissonObjective<'_> {
    fn dim(&self) -> usize {
        self.x.ncols()
    }
    fn value(&self, at: &DVector<f64>) -> f64 {
        poisson_loglik(at, self.x, self.y, LoglikScale::Proportional).expect("dimensions checked")
    }
    fn gradient(&self, at: &DVector<f64>) -> DVector<f64> {
        poisson_score(at, self.x, self.y).expect("dimensions checked")
    }
}

/// Full NB likelihood, or the zero-truncated one when `truncated` is set.
struct NbObjective<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [u64],
    truncated: bool,
}

impl Objective for NbObjective<'_> {
    fn dim(&self) -> usize {
        self.x.ncols() + 1
    }
    fn value(&self, at: &DVector<f64>) -> f64 {
        let p = NbRegParams::from_vector(at);
        if self.truncated {
            truncated_loglik(&p, self.x, self.y)
        } else {
            nb_loglik(&p, self.x, self.y, LoglikScale::Full)
        }
        .expect("dimensions checked")
    }
    fn gradient(&self, at: &DVector<f64>) -> DVector<f64> {
        let p = NbRegParams::from_vector(at);
        if self.truncated {
            truncated_score(&p, self.x, self.y)
        } else {
            nb_score(&p, self.x, self.y)
        }
        .expect("dimensions checked")
    }
    fn bounds(&self, coord: usize) -> (f64, f64) {
        if coord == self.x.ncols() {
            LOG_R_BOUNDS
        } else {
            (f64::NEG_INFINITY, f64::INFINITY)
        }
    }
}

struct BinaryObjective<'a> {
    x_h: &'a DMatrix<f64>,
    y: &'a [u64],
}

impl Objective for BinaryObjective<'_> {
    fn dim(&self) -> usize {
        self.x_h.ncols()
    }
    fn value(&self, at: &DVector<f64>) -> f64 {
        binary_loglik(at, self.x_h, self.y).expect("dimensions checked")
    }
    fn gradient(&self, at: &DVector<f64>) -> DVector<f64> {
        binary_score(at, self.x_h, self.y).expect("dimensions checked")
    }
}

/// Covariance estimate at an optimum plus any warnings it raised.
struct CovarianceEstimate {
    covariance: DMatrix<f64>,
    warnings: Vec<FitWarning>,
}

fn covariance_at<O: Objective>(f: &O, at: &DVector<f64>, opts: &FitOptions) -> CovarianceEstimate {
    let mut warnings = Vec::new();
    let hessian = numerical_hessian(f, at, opts.hessian_step);
    let covariance = match inverse_information(&hessian) {
        Some(c) => c,
        None => {
            warnings.push(FitWarning::HessianNotNegativeDefinite);
            pseudo_inverse_information(&hessian)
        }
    };
    let doubled = numerical_hessian(f, at, 2.0 * opts.hessian_step);
    let other = inverse_information(&doubled).unwrap_or_else(|| pseudo_inverse_information(&doubled));
    let change = max_relative_change(&covariance, &other);
    if change > COVARIANCE_STABILITY {
        warnings.push(FitWarning::IllConditionedCovariance {
            max_relative_change: change,
        });
    }
    CovarianceEstimate {
        covariance,
        warnings,
    }
}

/// Largest `|a_ij − b_ij| / sqrt(a_ii a_jj)`.
fn max_relative_change(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let p = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..p {
        for j in 0..p {
            let scale = (a[(i, i)] * a[(j, j)]).abs().sqrt();
            if scale > 0.0 {
                worst = worst.max((a[(i, j)] - b[(i, j)]).abs() / scale);
            }
        }
    }
    worst
}

/// Replaces the `log r` row/column at `idx` by `r` via the delta method.
fn to_natural_scale(cov: &DMatrix<f64>, idx: Option<usize>, r: f64) -> DMatrix<f64> {
    let mut out = cov.clone();
    if let Some(i) = idx {
        for j in 0..out.ncols() {
            out[(i, j)] *= r;
            out[(j, i)] *= r;
        }
    }
    out
}

fn check_response(x: &DesignMatrix, y: &[u64], extra: usize) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "design has {} rows, response has {}",
            x.nrows(),
            y.len()
        )));
    }
    if y.len() <= x.ncols() + extra {
        return Err(Error::Data(format!(
            "{} observations are too few for {} parameters",
            y.len(),
            x.ncols() + extra
        )));
    }
    if y.iter().all(|&v| v == 0) {
        return Err(Error::Structure("response is identically zero".into()));
    }
    Ok(())
}

/// Rejects designs whose column-normalised cross-product is numerically
/// singular, naming the column that loads most on the null direction.
fn check_rank(x: &DesignMatrix) -> Result<()> {
    let m = x.matrix();
    let norms: Vec<f64> = m.column_iter().map(|c| c.norm()).collect();
    if let Some(j) = norms.iter().position(|&v| v == 0.0) {
        return Err(Error::RankDeficient(format!("column \"{}\" is all zero", x.labels()[j])));
    }
    let scaled = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] / norms[j]);
    let gram = scaled.tr_mul(&scaled);
    let eig = SymmetricEigen::new(gram);
    let (imin, &lmin) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("at least one column");
    let lmax = eig.eigenvalues.amax();
    if lmin <= 1e-12 * lmax {
        let v = eig.eigenvectors.column(imin);
        let worst = (1..v.len())
            .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()))
            .unwrap_or(0);
        return Err(Error::RankDeficient(format!(
            "column \"{}\" is collinear with the others",
            x.labels()[worst]
        )));
    }
    Ok(())
}

fn mean_and_variance(y: &[u64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = y.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var)
}

/// `max((s² − ȳ)/ȳ², 1e−3)`.
fn moment_dispersion(y: &[u64]) -> f64 {
    let (mean, var) = mean_and_variance(y);
    ((var - mean) / (mean * mean)).max(1e-3)
}

fn intercept_start(x: &DesignMatrix, value: f64) -> DVector<f64> {
    let mut start = DVector::zeros(x.ncols());
    start[0] = value;
    start
}

fn poisson_ascent(x: &DesignMatrix, y: &[u64], opts: &FitOptions) -> AscentResult {
    let (mean, _) = mean_and_variance(y);
    let obj = PoissonObjective { x: x.matrix(), y };
    maximize(&obj, intercept_start(x, mean.ln()), opts)
}

/// Poisson regression with log link.
pub fn fit_poisson(x: &DesignMatrix, y: &[u64], opts: &FitOptions) -> Result<FittedModel> {
    opts.validate()?;
    check_response(x, y, 0)?;
    check_rank(x)?;
    let res = poisson_ascent(x, y, opts);
    let obj = PoissonObjective { x: x.matrix(), y };
    let cov = covariance_at(&obj, &res.argmax, opts);
    let loglik = poisson_loglik(&res.argmax, x.matrix(), y, LoglikScale::Full)?;
    Ok(FittedModel {
        family: Family::Poisson,
        mean_labels: x.labels().to_vec(),
        hurdle_labels: Vec::new(),
        beta: res.argmax.clone(),
        log_r: None,
        delta: None,
        natural_covariance: cov.covariance.clone(),
        covariance: cov.covariance,
        loglik,
        loglik_parts: None,
        n: y.len(),
        converged: res.converged,
        iterations: res.iterations,
        gradient_norm: res.gradient_norm(),
        warnings: cov.warnings,
    })
}

/// Shared NB / truncated-NB estimation on an already validated design.
fn nb_ascent(
    x: &DesignMatrix,
    y: &[u64],
    truncated: bool,
    opts: &FitOptions,
) -> (AscentResult, CovarianceEstimate) {
    let start_beta = poisson_ascent(x, y, opts).argmax;
    let k = x.ncols();
    let mut start = DVector::zeros(k + 1);
    start.rows_mut(0, k).copy_from(&start_beta);
    start[k] = moment_dispersion(y).ln();
    let obj = NbObjective {
        x: x.matrix(),
        y,
        truncated,
    };
    let res = maximize(&obj, start, opts);
    let cov = covariance_at(&obj, &res.argmax, opts);
    (res, cov)
}

/// Negative binomial regression with log link; `r` is estimated as `log r`.
pub fn fit_nb(x: &DesignMatrix, y: &[u64], opts: &FitOptions) -> Result<FittedModel> {
    opts.validate()?;
    check_response(x, y, 1)?;
    check_rank(x)?;
    let (res, cov) = nb_ascent(x, y, false, opts);
    let k = x.ncols();
    let params = NbRegParams::from_vector(&res.argmax);
    let r = params.log_r.exp();
    let mut warnings = cov.warnings;
    if r < POISSON_BOUNDARY {
        warnings.push(FitWarning::PoissonBoundary { r });
    }
    Ok(FittedModel {
        family: Family::NegativeBinomial,
        mean_labels: x.labels().to_vec(),
        hurdle_labels: Vec::new(),
        natural_covariance: to_natural_scale(&cov.covariance, Some(k), r),
        covariance: cov.covariance,
        loglik: nb_loglik(&params, x.matrix(), y, LoglikScale::Full)?,
        beta: params.beta,
        log_r: Some(params.log_r),
        delta: None,
        loglik_parts: None,
        n: y.len(),
        converged: res.converged,
        iterations: res.iterations,
        gradient_norm: res.gradient_norm(),
        warnings,
    })
}

/// 0/1 columns whose `1` rows are all zeros or all positives.
fn separated_dummy(x_h: &DesignMatrix, y: &[u64]) -> Option<String> {
    let m = x_h.matrix();
    for j in 1..m.ncols() {
        let col = m.column(j);
        if !col.iter().all(|&v| v == 0.0 || v == 1.0) {
            continue;
        }
        let mut zeros = 0usize;
        let mut ones = 0usize;
        for (i, &v) in col.iter().enumerate() {
            if v == 1.0 {
                if y[i] == 0 {
                    zeros += 1;
                } else {
                    ones += 1;
                }
            }
        }
        if zeros + ones > 0 && (zeros == 0 || ones == 0) {
            return Some(x_h.labels()[j].clone());
        }
    }
    None
}

/// Column contributing most to a diverging linear predictor.
fn dominant_column(x_h: &DesignMatrix, delta: &DVector<f64>) -> String {
    let m = x_h.matrix();
    let j = (1..m.ncols())
        .max_by(|&a, &b| {
            let sa = delta[a].abs() * m.column(a).amax();
            let sb = delta[b].abs() * m.column(b).amax();
            sa.total_cmp(&sb)
        })
        .unwrap_or(0);
    x_h.labels()[j].clone()
}

/// Hurdle negative binomial regression. The binary part (logit link on
/// `I(y = 0)`) and the zero-truncated NB part are maximised separately.
pub fn fit_hnb(
    x: &DesignMatrix,
    x_h: &DesignMatrix,
    y: &[u64],
    opts: &FitOptions,
) -> Result<FittedModel> {
    opts.validate()?;
    if x.nrows() != y.len() || x_h.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "designs have {} and {} rows, response has {}",
            x.nrows(),
            x_h.nrows(),
            y.len()
        )));
    }
    let positives: Vec<usize> = (0..y.len()).filter(|&i| y[i] > 0).collect();
    if positives.is_empty() {
        return Err(Error::Structure("hurdle model needs positive counts".into()));
    }
    if positives.len() == y.len() {
        return Err(Error::Structure("hurdle model needs zero counts".into()));
    }
    if y.len() <= x_h.ncols() {
        return Err(Error::Data("too few observations for the hurdle equation".into()));
    }
    check_rank(x_h)?;
    if let Some(column) = separated_dummy(x_h, y) {
        return Err(Error::Separation { column });
    }

    // Binary part.
    let zero_fraction = (y.len() - positives.len()) as f64 / y.len() as f64;
    let bin_obj = BinaryObjective { x_h: x_h.matrix(), y };
    let start = intercept_start(x_h, (zero_fraction / (1.0 - zero_fraction)).ln());
    let bin = maximize(&bin_obj, start, opts);
    let eta_max = (x_h.matrix() * &bin.argmax).amax();
    if !bin.converged || eta_max > SEPARATION_ETA {
        return Err(Error::Separation {
            column: dominant_column(x_h, &bin.argmax),
        });
    }
    let bin_cov = covariance_at(&bin_obj, &bin.argmax, opts);

    // Truncated part on the positive rows.
    let x_pos = x.select_rows(&positives);
    let y_pos: Vec<u64> = positives.iter().map(|&i| y[i]).collect();
    check_rank(&x_pos)?;
    let (trunc, trunc_cov) = nb_ascent(&x_pos, &y_pos, true, opts);

    let k = x.ncols();
    let kh = x_h.ncols();
    let params = HnbRegParams {
        nb: NbRegParams::from_vector(&trunc.argmax),
        delta: bin.argmax.clone(),
    };
    let r = params.nb.log_r.exp();
    let p = k + 1 + kh;
    let mut covariance = DMatrix::zeros(p, p);
    covariance
        .view_mut((0, 0), (k + 1, k + 1))
        .copy_from(&trunc_cov.covariance);
    covariance
        .view_mut((k + 1, k + 1), (kh, kh))
        .copy_from(&bin_cov.covariance);

    let parts = HurdleLoglik {
        binary: binary_loglik(&params.delta, x_h.matrix(), y)?,
        truncated: truncated_loglik(&params.nb, x.matrix(), y)?,
    };
    let mut warnings = trunc_cov.warnings;
    warnings.extend(bin_cov.warnings);
    if r < POISSON_BOUNDARY {
        warnings.push(FitWarning::PoissonBoundary { r });
    }
    let gradient_norm = trunc.gradient_norm().max(bin.gradient_norm());
    Ok(FittedModel {
        family: Family::HurdleNegativeBinomial,
        mean_labels: x.labels().to_vec(),
        hurdle_labels: x_h.labels().to_vec(),
        natural_covariance: to_natural_scale(&covariance, Some(k), r),
        covariance,
        loglik: parts.total(),
        loglik_parts: Some(parts),
        beta: params.nb.beta,
        log_r: Some(params.nb.log_r),
        delta: Some(params.delta),
        n: y.len(),
        converged: trunc.converged && bin.converged,
        iterations: trunc.iterations + bin.iterations,
        gradient_norm,
        warnings,
    })
}

/// Dispatches to the fitter for `family`; `x_h` is only used by HNB.
pub fn fit_family(
    family: Family,
    x: &DesignMatrix,
    x_h: &DesignMatrix,
    y: &[u64],
    opts: &FitOptions,
) -> Result<FittedModel> {
    match family {
        Family::Poisson => fit_poisson(x, y, opts),
        Family::NegativeBinomial => fit_nb(x, y, opts),
        Family::HurdleNegativeBinomial => fit_hnb(x, x_h, y, opts),
    }
}

/// Intercept-only fit of `family` to `y`.
pub fn fit_homogeneous(family: Family, y: &[u64], opts: &FitOptions) -> Result<FittedModel> {
    if y.is_empty() {
        return Err(Error::Data("empty response".into()));
    }
    let x = DesignMatrix::intercept_only(y.len());
    fit_family(family, &x, &x, y, opts)
}
