//! `stmrf`: simulate, fit, evaluate and perturb from the command line.
//!
//! Exit codes: 0 success, 1 I/O or validation failure, 2 usage error,
//! 3 fit stopped at the cycle limit (results are still written).

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "stmrf", version, about = "Spatial-temporal hidden MRF calls of differential expression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate expression data and true states on a network.
    Simulate(SimulateArgs),
    /// Fit states and parameters to an expression table.
    Fit(FitArgs),
    /// Compare estimated states against truth.
    Eval(EvalArgs),
    /// Delete and add random edges.
    Perturb(PerturbArgs),
    /// Write the seeded 33-pathway synthetic network.
    SynthNetwork(SynthArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ScenarioArg {
    Temporal,
    Spatial,
    Spatiotemporal,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ModeArg {
    /// Spatial and temporal coupling.
    Full,
    /// Temporal coupling only (β0 = β1 = 0).
    Hmm,
    /// Spatial coupling only (β2 = 0).
    Hmrf,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub scenario: ScenarioArg,
    /// Edge list; its nodes are the simulated genes.
    #[arg(long)]
    pub network: PathBuf,
    /// Extra node list declaring isolated genes.
    #[arg(long)]
    pub nodes: Option<PathBuf>,
    /// `pathway<TAB>gene` lines; required by the spatial scenarios.
    #[arg(long, required_if_eq_any([("scenario", "spatial"), ("scenario", "spatiotemporal")]))]
    pub pathways: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u64).range(1..))]
    pub timepoints: u64,
    /// Replicate arrays per condition.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(2..))]
    pub reps: u64,
    /// alpha,alpha0,nu
    #[arg(long, default_value = "10,0.9,0.5", value_parser = parse_theta)]
    pub theta: [f64; 3],
    #[arg(long, default_value_t = 0.1, value_parser = parse_prob)]
    pub p_init_de: f64,
    #[arg(long, default_value_t = 0.7, value_parser = parse_prob)]
    pub p_de_given_de: f64,
    #[arg(long, default_value_t = 0.1, value_parser = parse_prob)]
    pub p_de_given_ee: f64,
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    pub gamma0: f64,
    #[arg(long, default_value_t = 2.0)]
    pub beta0: f64,
    #[arg(long, default_value_t = 5)]
    pub gibbs_sweeps: usize,
    /// Pathways set DE before the sweeps (default 9 spatial, 8 spatiotemporal).
    #[arg(long)]
    pub pathways_de: Option<usize>,
    #[arg(long, default_value_t = 0.1, value_parser = parse_prob)]
    pub p_path_de_given_ee: f64,
    #[arg(long, default_value_t = 0.7, value_parser = parse_prob)]
    pub p_path_de_given_de: f64,
    /// Independent datasets, written to `rep001/`, `rep002/`, ...
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub replicates: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: u64,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Expression table, or with `--replicates` a directory of `repNNN/expression.tsv`.
    #[arg(long)]
    pub expr: PathBuf,
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long)]
    pub nodes: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Full)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 0.01, value_parser = parse_positive)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_cycles: u64,
    #[arg(long, default_value_t = 0.05, value_parser = parse_open_unit)]
    pub ttest_alpha: f64,
    /// Seeds the restarts of the emission-parameter optimizer.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub replicates: Option<u64>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: u64,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Estimated state files; repeat once per replicate.
    #[arg(long, required = true)]
    pub est: Vec<PathBuf>,
    /// Truth state files, paired with `--est` in order.
    #[arg(long, required = true)]
    pub truth: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Labels for the aggregate table.
    #[arg(long, default_value = "full")]
    pub method: String,
    #[arg(long, default_value = "unspecified")]
    pub scenario: String,
}

#[derive(Args, Debug)]
pub struct PerturbArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long)]
    pub nodes: Option<PathBuf>,
    #[arg(long, value_parser = parse_prob)]
    pub del_frac: f64,
    #[arg(long)]
    pub add_count: usize,
    #[arg(long)]
    pub seed: u64,
    /// Output edge list; a node list and manifest are written beside it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2008)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|_| format!("`{s}` is not a number"))
}

fn parse_prob(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn parse_open_unit(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is outside (0, 1)"))
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} is not positive"))
    }
}

fn parse_theta(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected alpha,alpha0,nu".into());
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = parse_positive(p)?;
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Perturb(a) => commands::perturb(&a),
        Command::SynthNetwork(a) => commands::synth_network(&a),
    };
    match outcome {
        Ok(code) => code.into(),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
