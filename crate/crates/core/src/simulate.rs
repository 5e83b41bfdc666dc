//! Synthetic regression data and Monte Carlo recovery studies.
//!
//! A [`SimDesign`] is a declarative JSON document describing covariates,
//! true coefficients and the response family. [`generate`] draws one data
//! set; [`recovery_study`] refits many replications in parallel, each on its
//! own generator stream, and merges them in replication order.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::countdist::{draw, seeded_rng, CountParams, HurdleParams, NbParams};
use crate::datamodel::{
    encode, encode_hurdle, Column, ColumnValues, Dataset, DesignMatrix, EncodingConfig,
    PredictorSpec,
};
use crate::error::{Error, Result};
use crate::fit::{fit_family, Block, Family, FitOptions, FitWarning, FittedModel};
use crate::inference::normal_critical;
use crate::likelihood::{link_hurdle, link_mean};

/// Name of the simulated response column.
pub const RESPONSE: &str = "y";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovariateSpec {
    /// Uniform on `[low, high)`.
    Numeric { name: String, low: f64, high: f64 },
    /// 0/1 indicator with `P(1) = prob`.
    Binary { name: String, prob: f64 },
    /// Levels drawn with the given probabilities; the first level is the base.
    Categorical {
        name: String,
        levels: Vec<String>,
        probs: Vec<f64>,
    },
}

impl CovariateSpec {
    pub fn name(&self) -> &str {
        match self {
            CovariateSpec::Numeric { name, .. }
            | CovariateSpec::Binary { name, .. }
            | CovariateSpec::Categorical { name, .. } => name,
        }
    }

    /// Design columns contributed by this covariate.
    fn width(&self) -> usize {
        match self {
            CovariateSpec::Categorical { levels, .. } => levels.len() - 1,
            _ => 1,
        }
    }

    fn predictor(&self) -> PredictorSpec {
        match self {
            CovariateSpec::Numeric { name, .. } => PredictorSpec::numeric(name),
            CovariateSpec::Binary { name, .. } => PredictorSpec::binary(name),
            CovariateSpec::Categorical { name, levels, .. } => {
                let levels: Vec<&str> = levels.iter().map(String::as_str).collect();
                PredictorSpec::categorical(name, &levels, levels[0])
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            CovariateSpec::Numeric { name, low, high } => {
                if !(low.is_finite() && high.is_finite() && low < high) {
                    return Err(Error::Config(format!("covariate \"{name}\": need low < high")));
                }
            }
            CovariateSpec::Binary { name, prob } => {
                if !(0.0..=1.0).contains(prob) {
                    return Err(Error::Config(format!("covariate \"{name}\": prob outside [0, 1]")));
                }
            }
            CovariateSpec::Categorical {
                name,
                levels,
                probs,
            } => {
                if levels.len() < 2 || levels.len() != probs.len() {
                    return Err(Error::Config(format!(
                        "covariate \"{name}\": need at least two levels with one probability each"
                    )));
                }
                if probs.iter().any(|p| !(*p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::Config(format!(
                        "covariate \"{name}\": probabilities must be nonnegative and sum to 1"
                    )));
                }
                let unique: HashSet<&String> = levels.iter().collect();
                if unique.len() != levels.len() {
                    return Err(Error::Config(format!("covariate \"{name}\": duplicate levels")));
                }
            }
        }
        Ok(())
    }

    fn draw_column<R: Rng>(&self, rng: &mut R, n: usize) -> ColumnValues {
        match self {
            CovariateSpec::Numeric { low, high, .. } => {
                ColumnValues::Numeric((0..n).map(|_| rng.random_range(*low..*high)).collect())
            }
            CovariateSpec::Binary { prob, .. } => ColumnValues::Numeric(
                (0..n)
                    .map(|_| if rng.random::<f64>() < *prob { 1.0 } else { 0.0 })
                    .collect(),
            ),
            CovariateSpec::Categorical { levels, probs, .. } => ColumnValues::Categorical(
                (0..n)
                    .map(|_| {
                        let u: f64 = rng.random();
                        let mut acc = 0.0;
                        let idx = probs
                            .iter()
                            .position(|p| {
                                acc += p;
                                u < acc
                            })
                            .unwrap_or(levels.len() - 1);
                        levels[idx].clone()
                    })
                    .collect(),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDesign {
    pub n: usize,
    pub seed: u64,
    pub family: Family,
    pub covariates: Vec<CovariateSpec>,
    /// Intercept first, then one coefficient per design column.
    pub beta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<f64>>,
    /// Covariates entering the hurdle equation; all when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hurdle_covariates: Option<Vec<String>>,
}

impl SimDesign {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let d: SimDesign = serde_json::from_str(&text)?;
        d.validate()?;
        Ok(d)
    }

    fn hurdle_names(&self) -> Vec<String> {
        self.hurdle_covariates
            .clone()
            .unwrap_or_else(|| self.covariates.iter().map(|c| c.name().to_string()).collect())
    }

    fn design_width(&self, names: &[String]) -> usize {
        1 + self
            .covariates
            .iter()
            .filter(|c| names.iter().any(|n| n == c.name()))
            .map(CovariateSpec::width)
            .sum::<usize>()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        let mut seen = HashSet::new();
        for c in &self.covariates {
            c.validate()?;
            if c.name() == RESPONSE || !seen.insert(c.name()) {
                return Err(Error::Config(format!("duplicate covariate name \"{}\"", c.name())));
            }
        }
        let all: Vec<String> = self.covariates.iter().map(|c| c.name().to_string()).collect();
        let k = self.design_width(&all);
        if self.beta.len() != k {
            return Err(Error::Config(format!("beta has {} entries, design has {k} columns", self.beta.len())));
        }
        if self.family != Family::Poisson {
            match self.r {
                Some(r) if r > 0.0 && r.is_finite() => {}
                _ => return Err(Error::Config("r must be positive for NB and HNB designs".into())),
            }
        }
        if self.family == Family::HurdleNegativeBinomial {
            let names = self.hurdle_names();
            if let Some(bad) = names.iter().find(|n| !all.contains(n)) {
                return Err(Error::Config(format!("unknown hurdle covariate \"{bad}\"")));
            }
            let kh = self.design_width(&names);
            match &self.delta {
                Some(d) if d.len() == kh => {}
                Some(d) => {
                    return Err(Error::Config(format!("delta has {} entries, hurdle design has {kh} columns", d.len())))
                }
                None => return Err(Error::Config("HNB designs need delta".into())),
            }
        }
        Ok(())
    }

    /// Encoding that reads the generated CSV back into the design.
    pub fn encoding(&self) -> EncodingConfig {
        EncodingConfig {
            response: RESPONSE.to_string(),
            predictors: self.covariates.iter().map(CovariateSpec::predictor).collect(),
            hurdle: self.hurdle_covariates.clone(),
        }
    }

    /// A design shaped like a large bibliometric data set: 43190 rows,
    /// 30 covariates (31 coefficients), `r = 0.6425`.
    pub fn large_scale(family: Family, seed: u64) -> Self {
        let mut covariates = Vec::new();
        let mut beta = vec![2.6];
        for j in 0..12 {
            covariates.push(CovariateSpec::Numeric {
                name: format!("u{j}"),
                low: 0.0,
                high: 1.0,
            });
            beta.push(if j % 2 == 0 { 0.15 } else { -0.1 } * (1.0 + j as f64 / 12.0));
        }
        for j in 0..10 {
            covariates.push(CovariateSpec::Binary {
                name: format!("b{j}"),
                prob: 0.1 + 0.07 * j as f64,
            });
            beta.push(if j % 3 == 0 { -0.2 } else { 0.12 });
        }
        let levels: Vec<String> = (0..9).map(|j| format!("field{j}")).collect();
        covariates.push(CovariateSpec::Categorical {
            name: "field".into(),
            levels,
            probs: vec![1.0 / 9.0; 9],
        });
        beta.extend((1..9).map(|j| 0.05 * j as f64 - 0.2));
        let delta = (family == Family::HurdleNegativeBinomial).then(|| {
            let mut d = vec![0.0; beta.len()];
            d[0] = -2.8;
            d[1] = 0.5;
            d
        });
        Self {
            n: 43_190,
            seed,
            family,
            covariates,
            beta,
            r: (family != Family::Poisson).then_some(0.6425),
            delta,
            hurdle_covariates: None,
        }
    }
}

/// True parameter values in the order of [`FittedModel::parameters`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthRecord {
    pub family: Family,
    pub mean: Vec<(String, f64)>,
    pub r: Option<f64>,
    pub hurdle: Vec<(String, f64)>,
}

impl TruthRecord {
    pub fn values(&self) -> Vec<(String, Block, f64)> {
        let mut out: Vec<(String, Block, f64)> = self
            .mean
            .iter()
            .map(|(n, v)| (n.clone(), Block::Mean, *v))
            .collect();
        if let Some(r) = self.r {
            out.push(("r".into(), Block::Dispersion, r));
        }
        out.extend(self.hurdle.iter().map(|(n, v)| (n.clone(), Block::Hurdle, *v)));
        out
    }
}

#[derive(Debug, Clone)]
pub struct Simulated {
    pub dataset: Dataset,
    pub encoding: EncodingConfig,
    pub x: DesignMatrix,
    pub x_h: DesignMatrix,
    pub truth: TruthRecord,
}

impl Simulated {
    /// Fits `family` to the simulated data.
    pub fn fit(&self, family: Family, opts: &FitOptions) -> Result<FittedModel> {
        fit_family(family, &self.x, &self.x_h, self.dataset.y(), opts)
    }
}

/// Draws one data set on the design's default stream.
pub fn generate(d: &SimDesign) -> Result<Simulated> {
    generate_stream(d, 0)
}

/// Draws one data set from generator stream `stream` of the design's seed.
pub fn generate_stream(d: &SimDesign, stream: u64) -> Result<Simulated> {
    d.validate()?;
    let mut rng = seeded_rng(d.seed, stream);
    let columns: Vec<Column> = d
        .covariates
        .iter()
        .map(|c| Column {
            name: c.name().to_string(),
            values: c.draw_column(&mut rng, d.n),
        })
        .collect();
    let encoding = d.encoding();
    // Responses are filled after encoding the covariates.
    let placeholder = Dataset::new(RESPONSE, vec![0; d.n], columns.clone())?;
    let x = encode(&placeholder, &encoding)?;
    let x_h = encode_hurdle(&placeholder, &encoding)?;

    let theta = link_mean(x.matrix(), &DVector::from_row_slice(&d.beta))?;
    let phi = match &d.delta {
        Some(delta) if d.family == Family::HurdleNegativeBinomial => {
            Some(link_hurdle(x_h.matrix(), &DVector::from_row_slice(delta))?)
        }
        _ => None,
    };
    let mut y = Vec::with_capacity(d.n);
    for i in 0..d.n {
        let params = match d.family {
            Family::Poisson => CountParams::Poisson(theta[i]),
            Family::NegativeBinomial => CountParams::Nb(NbParams::new(theta[i], d.r.expect("validated"))?),
            Family::HurdleNegativeBinomial => {
                let nb = NbParams::new(theta[i], d.r.expect("validated"))?;
                CountParams::Hurdle(HurdleParams::new(nb, phi.as_ref().expect("validated")[i])?)
            }
        };
        y.push(draw(&mut rng, &params));
    }
    let dataset = Dataset::new(RESPONSE, y, columns)?;

    let label = |labels: &[String], values: &[f64]| -> Vec<(String, f64)> {
        labels.iter().cloned().zip(values.iter().copied()).collect()
    };
    let truth = TruthRecord {
        family: d.family,
        mean: label(x.labels(), &d.beta),
        r: if d.family == Family::Poisson { None } else { d.r },
        hurdle: match (&d.delta, d.family) {
            (Some(delta), Family::HurdleNegativeBinomial) => label(x_h.labels(), delta),
            _ => Vec::new(),
        },
    };
    Ok(Simulated {
        dataset,
        encoding,
        x,
        x_h,
        truth,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationOutcome {
    pub index: usize,
    pub estimates: Option<Vec<f64>>,
    pub std_errs: Option<Vec<f64>>,
    pub covered: Option<Vec<bool>>,
    pub poisson_boundary: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterRecovery {
    pub name: String,
    pub block: Block,
    pub truth: f64,
    pub mean_estimate: f64,
    pub bias: f64,
    pub rmse: f64,
    /// Fraction of successful replications whose 95% Wald interval covers the truth.
    pub coverage: f64,
    /// Set for `r` when any replication ended on the Poisson boundary;
    /// coverage of `r` is then unreliable.
    pub boundary_flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoverySummary {
    pub family: Family,
    pub n: usize,
    pub replications: usize,
    pub succeeded: usize,
    pub failures: usize,
    pub boundary_replications: usize,
    pub parameters: Vec<ParameterRecovery>,
    pub outcomes: Vec<ReplicationOutcome>,
}

/// Coverage level of the Wald intervals used by [`recovery_study`].
pub const COVERAGE_LEVEL: f64 = 0.95;

fn replicate(d: &SimDesign, index: usize, truth: &[f64], crit: f64, opts: &FitOptions) -> ReplicationOutcome {
    let failed = |error: String| ReplicationOutcome {
        index,
        estimates: None,
        std_errs: None,
        covered: None,
        poisson_boundary: false,
        error: Some(error),
    };
    let fitted = generate_stream(d, index as u64 + 1)
        .and_then(|sim| sim.fit(d.family, opts))
        .and_then(|m| {
            m.ensure_converged()?;
            Ok(m)
        });
    match fitted {
        Err(e) => failed(e.to_string()),
        Ok(m) => {
            let params = m.parameters();
            let estimates: Vec<f64> = params.iter().map(|p| p.estimate).collect();
            let std_errs: Vec<f64> = params.iter().map(|p| p.std_err).collect();
            let covered = estimates
                .iter()
                .zip(&std_errs)
                .zip(truth)
                .map(|((e, s), t)| (e - t).abs() <= crit * s)
                .collect();
            ReplicationOutcome {
                index,
                estimates: Some(estimates),
                std_errs: Some(std_errs),
                covered: Some(covered),
                poisson_boundary: m.has_warning(|w| matches!(w, FitWarning::PoissonBoundary { .. })),
                error: None,
            }
        }
    }
}

/// Refits `replications` independent data sets drawn from `d` with the true
/// family. Fit failures and non-convergence are counted, not propagated.
pub fn recovery_study(d: &SimDesign, replications: usize, opts: &FitOptions) -> Result<RecoverySummary> {
    if replications == 0 {
        return Err(Error::Config("replications must be at least 1".into()));
    }
    d.validate()?;
    opts.validate()?;
    let truth = generate_stream(d, 0)?.truth.values();
    let truth_values: Vec<f64> = truth.iter().map(|t| t.2).collect();
    let crit = normal_critical(COVERAGE_LEVEL)?;
    let outcomes: Vec<ReplicationOutcome> = (0..replications)
        .into_par_iter()
        .map(|i| replicate(d, i, &truth_values, crit, opts))
        .collect();

    let ok: Vec<&ReplicationOutcome> = outcomes.iter().filter(|o| o.error.is_none()).collect();
    let boundary_replications = ok.iter().filter(|o| o.poisson_boundary).count();
    let parameters = truth
        .iter()
        .enumerate()
        .map(|(j, (name, block, t))| {
            let count = ok.len() as f64;
            let est: Vec<f64> = ok.iter().map(|o| o.estimates.as_ref().expect("succeeded")[j]).collect();
            let mean_estimate = est.iter().sum::<f64>() / count;
            let mse = est.iter().map(|e| (e - t).powi(2)).sum::<f64>() / count;
            let hits = ok
                .iter()
                .filter(|o| o.covered.as_ref().expect("succeeded")[j])
                .count();
            ParameterRecovery {
                name: name.clone(),
                block: *block,
                truth: *t,
                mean_estimate,
                bias: mean_estimate - t,
                rmse: mse.sqrt(),
                coverage: hits as f64 / count,
                boundary_flagged: *block == Block::Dispersion && boundary_replications > 0,
            }
        })
        .collect();
    Ok(RecoverySummary {
        family: d.family,
        n: d.n,
        replications,
        succeeded: ok.len(),
        failures: replications - ok.len(),
        boundary_replications,
        parameters,
        outcomes,
    })
}
