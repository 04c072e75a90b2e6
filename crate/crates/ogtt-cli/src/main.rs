use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use ogtt_cli::config::RunConfig;
use ogtt_cli::pipeline;

/// Bayesian damped-oscillator fitting and classification of OGTT cohorts.
#[derive(Debug, Parser)]
#[command(name = "ogtt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic cohort CSV plus its generating-parameter sidecar.
    Synth(StageArgs),
    /// Fit every patient: MAP estimate, posterior sampling, summaries and plots.
    Fit(StageArgs),
    /// Train the healthy-vs-condition SVM on fitted (A, alpha) estimates.
    Classify(StageArgs),
    /// Assemble the human-readable run report from the stage artifacts.
    Report(StageArgs),
    /// Run fit, classify and report in sequence.
    Run(StageArgs),
}

/// Options shared by every stage. Precedence: config file < --set < flags.
#[derive(Debug, Args)]
struct StageArgs {
    /// TOML configuration file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override any configuration key by dotted path, e.g.
    /// --set sampler.iterations=5000 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Root seed for the whole pipeline.
    #[arg(long)]
    seed: Option<u64>,
    /// Observation noise standard deviation (mg/dl).
    #[arg(long)]
    gamma: Option<f64>,
    /// Likelihood exponent: inverse-variance or half-inverse-variance.
    #[arg(long)]
    likelihood: Option<String>,
    /// Output directory for all artifacts.
    #[arg(long, value_name = "DIR")]
    output_dir: Option<PathBuf>,
    /// Existing cohort CSV to fit instead of synthesizing one.
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Ensemble walker count.
    #[arg(long)]
    walkers: Option<usize>,
    /// Total sampler iterations.
    #[arg(long)]
    iterations: Option<usize>,
    /// Burn-in iterations discarded before retention.
    #[arg(long)]
    burn_in: Option<usize>,
    /// Thinning stride.
    #[arg(long)]
    thin: Option<usize>,
    /// Multi-start count of the MAP optimizer.
    #[arg(long)]
    starts: Option<usize>,
    /// SVM regularization C.
    #[arg(long)]
    svm_cost: Option<f64>,
    /// Write raw per-patient chains as CSV.
    #[arg(long)]
    export_chains: bool,
    /// Render static SVG figures next to the CSV data.
    #[arg(long)]
    svg: bool,
}

impl StageArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut config = RunConfig::load(self.config.as_deref(), &self.sets)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(gamma) = self.gamma {
            config.gamma = gamma;
        }
        if let Some(likelihood) = &self.likelihood {
            config.likelihood = likelihood
                .parse()
                .map_err(|e: String| anyhow::anyhow!(e))?;
        }
        if let Some(dir) = &self.output_dir {
            config.output_dir = dir.clone();
        }
        if let Some(input) = &self.input {
            config.input = Some(input.clone());
        }
        if let Some(walkers) = self.walkers {
            config.sampler.walkers = walkers;
        }
        if let Some(iterations) = self.iterations {
            config.sampler.iterations = iterations;
        }
        if let Some(burn_in) = self.burn_in {
            config.sampler.burn_in = burn_in;
        }
        if let Some(thin) = self.thin {
            config.sampler.thin = thin;
        }
        if let Some(starts) = self.starts {
            config.optimizer.starts = starts;
        }
        if let Some(cost) = self.svm_cost {
            config.svm.cost = cost;
        }
        if self.export_chains {
            config.export_chains = true;
        }
        if self.svg {
            config.svg = true;
        }
        config.validate()?;
        Ok(config)
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Synth(args) => pipeline::synth_command(&args.resolve()?),
        Command::Fit(args) => pipeline::fit_command(&args.resolve()?).map(|_| ()),
        Command::Classify(args) => pipeline::classify_command(&args.resolve()?).map(|_| ()),
        Command::Report(args) => pipeline::report_command(&args.resolve()?).map(|_| ()),
        Command::Run(args) => pipeline::run_all(&args.resolve()?),
    }
}
