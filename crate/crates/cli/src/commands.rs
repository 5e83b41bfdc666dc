//! Subcommand implementations. Each returns whether every fit converged;
//! errors are reported by the caller.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use countreg::datamodel::{encode, encode_hurdle, read_csv, Dataset, DesignMatrix, EncodingConfig, INTERCEPT};
use countreg::diagnostics::{deviance_residuals, frequency_table, pearson, ResidualSet};
use countreg::fit::{fit_family, Block, Family, FitOptions, FitWarning, FittedModel};
use countreg::inference::{aic, compare, wald_table};
use countreg::simulate::{generate, recovery_study, SimDesign};
use countreg::{Error, Result};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::report::{CompareDocument, Dropped, FitDocument, ModelReport, RestrictDocument, SCHEMA_VERSION};

/// Largest count value tabulated individually in `frequency.csv`.
pub const FREQUENCY_CAP: u64 = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Converged,
    NotConverged,
}

impl Outcome {
    fn from_models<'a>(models: impl IntoIterator<Item = &'a FittedModel>) -> Self {
        if models.into_iter().all(|m| m.converged) {
            Outcome::Converged
        } else {
            Outcome::NotConverged
        }
    }
}

/// Data, encoding and fit settings shared by the model subcommands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub data: PathBuf,
    pub config: PathBuf,
    pub hurdle: Option<Vec<String>>,
    pub options: FitOptions,
    pub out: PathBuf,
}

pub struct Loaded {
    pub dataset: Dataset,
    pub x: DesignMatrix,
    pub x_h: DesignMatrix,
}

impl RunConfig {
    pub fn load(&self) -> Result<Loaded> {
        self.options.validate()?;
        let mut cfg = EncodingConfig::from_json_file(&self.config)?;
        if let Some(h) = &self.hurdle {
            cfg.hurdle = Some(h.clone());
        }
        cfg.validate()?;
        let dataset = read_csv(&self.data, &cfg)?;
        let x = encode(&dataset, &cfg)?;
        let x_h = encode_hurdle(&dataset, &cfg)?;
        Ok(Loaded { dataset, x, x_h })
    }

    fn out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out)?;
        Ok(&self.out)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn residuals_for(m: &FittedModel, data: &Loaded) -> Result<ResidualSet> {
    let y = data.dataset.y();
    match m.family {
        Family::NegativeBinomial => deviance_residuals(m, data.x.matrix(), y),
        Family::HurdleNegativeBinomial => pearson(m, data.x.matrix(), Some(data.x_h.matrix()), y),
        Family::Poisson => pearson(m, data.x.matrix(), None, y),
    }
}

/// Writes `frequency.csv`, `residuals.csv` and, for NB, `deviance.csv`.
fn write_plot_data(dir: &Path, m: &FittedModel, data: &Loaded, res: &ResidualSet) -> Result<()> {
    let y = data.dataset.y();
    let y_max = y.iter().copied().max().unwrap_or(0).min(FREQUENCY_CAP);
    let x_h = (m.family == Family::HurdleNegativeBinomial).then(|| data.x_h.matrix());
    let table = frequency_table(y, m, data.x.matrix(), x_h, y_max)?;
    let mut w = csv::Writer::from_path(dir.join("frequency.csv"))?;
    w.write_record(["value", "empirical", "fitted"])?;
    for (j, (e, f)) in table.empirical.iter().zip(&table.fitted).enumerate() {
        w.write_record([j.to_string(), e.to_string(), f.to_string()])?;
    }
    w.write_record([
        format!(">{y_max}"),
        table.empirical_overflow.to_string(),
        table.fitted_overflow.to_string(),
    ])?;
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("residuals.csv"))?;
    let with_dev = res.deviance.is_some();
    let mut header = vec!["row", "y", "fitted_mean", "fitted_variance", "pearson"];
    if with_dev {
        header.push("deviance");
    }
    w.write_record(&header)?;
    for i in 0..y.len() {
        let mut rec = vec![
            (i + 1).to_string(),
            y[i].to_string(),
            res.mu[i].to_string(),
            res.sigma2[i].to_string(),
            res.pearson[i].to_string(),
        ];
        if let Some(d) = &res.deviance {
            rec.push(d[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;

    if let Some(d) = &res.deviance {
        // Sorted residuals with Blom plotting positions for a normal probability plot.
        let mut sorted = d.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        let mut w = csv::Writer::from_path(dir.join("deviance.csv"))?;
        w.write_record(["rank", "deviance", "normal_quantile"])?;
        for (i, v) in sorted.iter().enumerate() {
            let p = (i as f64 + 1.0 - 0.375) / (n + 0.25);
            w.write_record([(i + 1).to_string(), v.to_string(), normal.inverse_cdf(p).to_string()])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn model_report(m: &FittedModel, data: &Loaded) -> Result<(ModelReport, ResidualSet)> {
    let res = residuals_for(m, data)?;
    Ok((ModelReport::new(m, Some(&res))?, res))
}

pub fn cmd_fit(run: &RunConfig, family: Family) -> Result<Outcome> {
    let data = run.load()?;
    let dir = run.out_dir()?;
    let m = fit_family(family, &data.x, &data.x_h, data.dataset.y(), &run.options)?;
    let (report, res) = model_report(&m, &data)?;
    write_json(
        &dir.join("report.json"),
        &FitDocument {
            schema_version: SCHEMA_VERSION,
            command: "fit",
            model: report.clone(),
        },
    )?;
    fs::write(dir.join("report.txt"), report.to_text())?;
    write_plot_data(dir, &m, &data, &res)?;
    Ok(Outcome::from_models([&m]))
}

pub fn cmd_compare(run: &RunConfig, families: &[Family]) -> Result<Outcome> {
    if families.len() < 2 {
        return Err(Error::Config("compare needs at least two families".into()));
    }
    let data = run.load()?;
    let dir = run.out_dir()?;
    let models = families
        .iter()
        .map(|&f| fit_family(f, &data.x, &data.x_h, data.dataset.y(), &run.options))
        .collect::<Result<Vec<_>>>()?;
    let ranked = compare(&models)?;
    let doc = CompareDocument::new(&models, &ranked);
    write_json(&dir.join("comparison.json"), &doc)?;
    fs::write(dir.join("comparison.txt"), doc.to_text())?;
    Ok(Outcome::from_models(&models))
}

/// Design labels whose Wald p-value exceeds `level`, per equation.
pub fn insignificant(m: &FittedModel, level: f64) -> Result<Dropped> {
    let table = wald_table(m, 0.95)?;
    let pick = |block: Block| -> Vec<String> {
        table
            .iter()
            .filter(|c| c.block == block && c.name != INTERCEPT && !(c.p_value <= level))
            .map(|c| c.name.clone())
            .collect()
    };
    Ok(Dropped {
        mean: pick(Block::Mean),
        hurdle: pick(Block::Hurdle),
    })
}

fn keep(x: &DesignMatrix, drop: &[String]) -> Result<DesignMatrix> {
    let labels: Vec<String> = x
        .labels()
        .iter()
        .filter(|l| !drop.contains(l))
        .cloned()
        .collect();
    x.select(&labels)
}

pub struct Restricted {
    pub full: FittedModel,
    pub restricted: FittedModel,
    pub dropped: Dropped,
    pub x: DesignMatrix,
    pub x_h: DesignMatrix,
}

/// One prune-and-refit step: coefficients with `p > level` are removed from
/// each equation independently and the model is refitted.
pub fn restrict(
    family: Family,
    x: &DesignMatrix,
    x_h: &DesignMatrix,
    y: &[u64],
    level: f64,
    opts: &FitOptions,
) -> Result<Restricted> {
    if !(0.0..=1.0).contains(&level) {
        return Err(Error::Config(format!("level must lie in [0, 1], got {level}")));
    }
    let full = fit_family(family, x, x_h, y, opts)?;
    let dropped = insignificant(&full, level)?;
    let rx = keep(x, &dropped.mean)?;
    let rx_h = keep(x_h, &dropped.hurdle)?;
    let mut restricted = fit_family(family, &rx, &rx_h, y, opts)?;
    let had_covariates = x.ncols() > 1 || (family == Family::HurdleNegativeBinomial && x_h.ncols() > 1);
    let intercept_only = rx.ncols() == 1 && (family != Family::HurdleNegativeBinomial || rx_h.ncols() == 1);
    if had_covariates && intercept_only {
        restricted.warnings.push(FitWarning::InterceptOnlyFallback);
    }
    Ok(Restricted {
        full,
        restricted,
        dropped,
        x: rx,
        x_h: rx_h,
    })
}

pub fn cmd_restrict(run: &RunConfig, family: Family, level: f64) -> Result<Outcome> {
    let data = run.load()?;
    let dir = run.out_dir()?;
    let r = restrict(family, &data.x, &data.x_h, data.dataset.y(), level, &run.options)?;
    let fallback = r.restricted.has_warning(|w| matches!(w, FitWarning::InterceptOnlyFallback));
    if fallback {
        eprintln!("warning: every covariate was dropped; fitted the intercept-only model");
    }
    let restricted_data = Loaded {
        dataset: data.dataset.clone(),
        x: r.x.clone(),
        x_h: r.x_h.clone(),
    };
    let (report, res) = model_report(&r.restricted, &restricted_data)?;
    let doc = RestrictDocument {
        schema_version: SCHEMA_VERSION,
        command: "restrict",
        level,
        dropped: r.dropped.clone(),
        intercept_only_fallback: fallback,
        full_aic: crate::report::sig6(aic(&r.full)),
        restricted: report.clone(),
    };
    write_json(&dir.join("restricted.json"), &doc)?;
    let mut text = format!(
        "Restricted model (dropped at p > {level}): mean [{}], hurdle [{}]\n",
        r.dropped.mean.join(", "),
        r.dropped.hurdle.join(", ")
    );
    text.push_str(&report.to_text());
    fs::write(dir.join("restricted.txt"), text)?;
    write_plot_data(dir, &r.restricted, &restricted_data, &res)?;
    Ok(Outcome::from_models([&r.full, &r.restricted]))
}

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub design: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub replications: Option<usize>,
    pub options: FitOptions,
}

/// Writes `data.csv`, `encoding.json`, `truth.json` and, with
/// replications, `recovery.json`.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<Outcome> {
    let mut design = SimDesign::from_json_file(&args.design)?;
    if let Some(seed) = args.seed {
        design.seed = seed;
    }
    fs::create_dir_all(&args.out)?;
    let sim = generate(&design)?;
    sim.dataset.write_csv(args.out.join("data.csv"))?;
    write_json(&args.out.join("encoding.json"), &sim.encoding)?;

    #[derive(Serialize)]
    struct TruthDocument<'a> {
        schema_version: u32,
        design: &'a SimDesign,
        truth: &'a countreg::simulate::TruthRecord,
    }
    write_json(
        &args.out.join("truth.json"),
        &TruthDocument {
            schema_version: SCHEMA_VERSION,
            design: &design,
            truth: &sim.truth,
        },
    )?;

    if let Some(reps) = args.replications {
        let summary = recovery_study(&design, reps, &args.options)?;
        #[derive(Serialize)]
        struct RecoveryDocument<'a> {
            schema_version: u32,
            summary: &'a countreg::simulate::RecoverySummary,
        }
        write_json(
            &args.out.join("recovery.json"),
            &RecoveryDocument {
                schema_version: SCHEMA_VERSION,
                summary: &summary,
            },
        )?;
        let mut out = std::io::stdout().lock();
        writeln!(
            out,
            "{} replications, {} failed, {} on the Poisson boundary",
            summary.replications, summary.failures, summary.boundary_replications
        )?;
        for p in &summary.parameters {
            writeln!(
                out,
                "{:<24} truth {:>10.4} bias {:>10.4} rmse {:>10.4} coverage {:.3}{}",
                p.name,
                p.truth,
                p.bias,
                p.rmse,
                p.coverage,
                if p.boundary_flagged { " (boundary)" } else { "" }
            )?;
        }
    }
    Ok(Outcome::Converged)
}
