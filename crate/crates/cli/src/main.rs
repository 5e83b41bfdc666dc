//! `countreg` command-line tool.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use countreg::fit::{Family, FitOptions};
use countreg_cli::commands::{
    cmd_compare, cmd_fit, cmd_restrict, cmd_simulate, Outcome, RunConfig, SimulateArgs,
};

#[derive(Parser, Debug)]
#[command(name = "countreg", version, about = "Count regression: Poisson, NB and hurdle NB")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one model and write reports and plot data.
    Fit {
        #[command(flatten)]
        run: RunArgs,
        /// P, NB or HNB.
        #[arg(long, default_value = "NB")]
        family: Family,
    },
    /// Fit several families and rank them by AIC.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated, e.g. P,NB,HNB.
        #[arg(long, value_delimiter = ',', default_value = "P,NB,HNB")]
        families: Vec<Family>,
    },
    /// Generate a data set from a simulation design.
    Simulate {
        /// Simulation design (JSON).
        #[arg(long, visible_alias = "config")]
        design: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the design's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also run a recovery study with this many replications.
        #[arg(long)]
        replications: Option<usize>,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Drop coefficients with p above --level and refit once.
    Restrict {
        #[command(flatten)]
        run: RunArgs,
        /// P, NB or HNB.
        #[arg(long, default_value = "HNB")]
        family: Family,
        /// Coefficients with a Wald p-value above this are dropped.
        #[arg(long, default_value_t = 0.10)]
        level: f64,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// CSV data file.
    #[arg(long)]
    data: PathBuf,
    /// Encoding configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated hurdle covariates, overriding the configuration.
    #[arg(long, value_delimiter = ',')]
    hurdle: Option<Vec<String>>,
    #[command(flatten)]
    fit: FitArgs,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Optimizer iteration cap.
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Convergence threshold on the gradient, relative to 1 + |loglik|.
    #[arg(long)]
    gradient_tolerance: Option<f64>,
}

impl FitArgs {
    fn options(&self) -> FitOptions {
        let mut o = FitOptions::default();
        if let Some(v) = self.max_iterations {
            o.max_iterations = v;
        }
        if let Some(v) = self.gradient_tolerance {
            o.gradient_tolerance = v;
        }
        o
    }
}

impl RunArgs {
    fn config(&self) -> RunConfig {
        RunConfig {
            data: self.data.clone(),
            config: self.config.clone(),
            hurdle: self.hurdle.clone(),
            options: self.fit.options(),
            out: self.out.clone(),
        }
    }
}

fn run(cli: Cli) -> countreg::Result<Outcome> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| countreg::Error::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Fit { run, family } => cmd_fit(&run.config(), family),
        Command::Compare { run, families } => cmd_compare(&run.config(), &families),
        Command::Restrict { run, family, level } => cmd_restrict(&run.config(), family, level),
        Command::Simulate {
            design,
            out,
            seed,
            replications,
            fit,
        } => cmd_simulate(&SimulateArgs {
            design,
            out,
            seed,
            replications,
            options: fit.options(),
        }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Outcome::Converged) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => {
            eprintln!("warning: optimisation did not converge; reports carry the flag");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
