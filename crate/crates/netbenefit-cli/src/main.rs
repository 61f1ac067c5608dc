//! Command-line cost-effectiveness estimation.
//!
//! Subcommands: `estimate` runs the full pipeline on a CSV dataset and
//! writes the determination, net monetary benefit, and acceptability curves
//! plus a run summary; `simulate` regenerates the benchmark replication
//! report (or emits a single simulated dataset); `oracle` prints the true
//! separation of a benchmark scenario. All diagnostics go to standard
//! error. Exit status: 0 success, 1 validation error, 2 numerical failure.

use netbenefit_cli::{config, data_io};

use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use netbenefit::domain::{validate_dataset, WtpGrid};
use netbenefit::inference::{bootstrap_curves, cea_curve, BootstrapOptions};
use netbenefit::simlab::{
    generate_dataset, oracle_true_theta, run_replication_study, CensoringLevel, ReplicationCell,
    ReplicationOptions, Scenario, ScenarioConfig,
};
use netbenefit::standardize::{run_curves, EstimationError, PipelineDiagnostics};
use serde::Serialize;

use config::{AnalysisConfig, LambdaSpec};

#[derive(Parser)]
#[command(name = "netbenefit", version, about = "Probabilistic cost-effectiveness analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate determination, net monetary benefit, and acceptability
    /// curves from a CSV dataset.
    Estimate(EstimateArgs),
    /// Run the benchmark replication study, or emit one simulated dataset.
    Simulate(SimulateArgs),
    /// Print the true separation of a benchmark scenario.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct EstimateArgs {
    /// Analysis configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the configured input CSV.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    k_boot: Option<usize>,
    #[arg(long)]
    k_draws: Option<usize>,
    #[command(flatten)]
    lambda: LambdaArgs,
}

#[derive(Args)]
struct LambdaArgs {
    /// Willingness-to-pay grid minimum (with --lambda-max/--lambda-step).
    #[arg(long)]
    lambda_min: Option<f64>,
    #[arg(long)]
    lambda_max: Option<f64>,
    #[arg(long)]
    lambda_step: Option<f64>,
}

impl LambdaArgs {
    fn grid(&self) -> Result<Option<WtpGrid>> {
        match (self.lambda_min, self.lambda_max, self.lambda_step) {
            (None, None, None) => Ok(None),
            (Some(min), Some(max), Some(step)) => WtpGrid::from_range(min, max, step)
                .map(Some)
                .map_err(|e| anyhow::anyhow!("invalid willingness-to-pay range: {e}")),
            _ => anyhow::bail!("--lambda-min, --lambda-max, and --lambda-step go together"),
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum ScenarioArg {
    #[value(name = "1")]
    Null,
    #[value(name = "2")]
    Effect,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Scenario {
        match s {
            ScenarioArg::Null => Scenario::Null,
            ScenarioArg::Effect => Scenario::Effect,
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum CensoringArg {
    Low,
    High,
}

impl From<CensoringArg> for CensoringLevel {
    fn from(c: CensoringArg) -> CensoringLevel {
        match c {
            CensoringArg::Low => CensoringLevel::Low,
            CensoringArg::High => CensoringLevel::High,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Benchmark scenario: 1 = no treatment effect, 2 = treatment raises
    /// survival and cost.
    #[arg(long)]
    scenario: ScenarioArg,
    #[arg(long, value_enum, default_value_t = CensoringArg::Low)]
    censoring: CensoringArg,
    /// Subjects per simulated dataset.
    #[arg(long)]
    n: usize,
    /// Simulated datasets per cell.
    #[arg(long, default_value_t = 200)]
    replicates: usize,
    #[arg(long, default_value_t = 300)]
    k_boot: usize,
    #[arg(long, default_value_t = 5000)]
    k_draws: usize,
    /// Oracle draws per arm for the truth column.
    #[arg(long, default_value_t = 1_000_000)]
    m_oracle: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory for replication.csv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Write one simulated dataset as CSV and exit (no replication study).
    #[arg(long)]
    emit_dataset: Option<PathBuf>,
    #[command(flatten)]
    lambda: LambdaArgs,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    scenario: ScenarioArg,
    /// Willingness-to-pay value.
    #[arg(long)]
    lambda: f64,
    #[arg(long, value_enum, default_value_t = CensoringArg::Low)]
    censoring: CensoringArg,
    /// Potential-outcome draws per arm.
    #[arg(long, default_value_t = 1_000_000)]
    m_oracle: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
}

/// Failure with its exit status.
enum Failure {
    /// Bad configuration, unreadable input, or dataset validation: exit 1.
    Validation(String),
    /// Model fitting or resampling breakdowns: exit 2.
    Numerical(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Failure {
        Failure::Validation(format!("{e:#}"))
    }
}

impl From<EstimationError> for Failure {
    fn from(e: EstimationError) -> Failure {
        match e {
            EstimationError::Config(_) | EstimationError::UnadjustedIncomplete { .. } => {
                Failure::Validation(e.to_string())
            }
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Estimate(args) => estimate(args),
        Command::Simulate(args) => simulate(args),
        Command::Oracle(args) => oracle(args),
    };
    match outcome {
        Ok(()) => {}
        Err(Failure::Validation(message)) => {
            eprintln!("error: {message}");
            std::process::exit(1);
        }
        Err(Failure::Numerical(message)) => {
            eprintln!("error: {message}");
            std::process::exit(2);
        }
    }
}

fn configure_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct BootstrapSummary {
    attempted: usize,
    failed: usize,
    first_failure: Option<String>,
}

#[derive(Serialize)]
struct Summary<'a> {
    config_hash: String,
    seed: u64,
    version: &'a str,
    n_observations: usize,
    n_control: usize,
    n_treated: usize,
    lambdas: &'a [f64],
    k_draws: usize,
    k_boot: usize,
    alpha: f64,
    convergence: &'a PipelineDiagnostics,
    bootstrap: Option<BootstrapSummary>,
}

fn estimate(args: EstimateArgs) -> Result<(), Failure> {
    let mut config = AnalysisConfig::load(&args.config)?;
    if let Some(input) = args.input {
        config.input = input;
    }
    if let Some(out) = args.out {
        config.output_dir = Some(out);
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(k_boot) = args.k_boot {
        config.k_boot = k_boot;
    }
    if let Some(k_draws) = args.k_draws {
        config.k_draws = k_draws;
    }
    if let Some(threads) = args.threads {
        config.threads = Some(threads);
    }
    if let Some(grid) = args.lambda.grid()? {
        config.lambda = LambdaSpec::Values { values: grid.lambdas().to_vec() };
    }
    configure_threads(config.threads)?;

    let raw = data_io::read_dataset(&config.input, &config.columns, config.tau)?;
    let dataset = validate_dataset(raw).map_err(|report| Failure::Validation(report.to_string()))?;
    let grid = config.lambda.grid()?;
    let out_dir = config.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))
        .map_err(Failure::from)?;

    let (ced, nmb, cea, diagnostics, bootstrap) = if config.k_boot == 0 {
        eprintln!("k_boot = 0: writing point estimates without intervals");
        let run = run_curves(&dataset, &config.model, &grid, config.k_draws, config.seed)?;
        (run.ced, run.nmb, None, run.diagnostics, None)
    } else {
        let boot = bootstrap_curves(
            &dataset,
            &config.model,
            &grid,
            &BootstrapOptions {
                k_boot: config.k_boot,
                k_draws: config.k_draws,
                alpha: config.alpha,
                seed: config.seed,
                stratified_by_arm: config.stratified_bootstrap,
            },
        )?;
        let cea = cea_curve(&boot.nmb);
        for (replicate, message) in &boot.failures {
            eprintln!("note: bootstrap replicate {replicate} dropped: {message}");
        }
        let summary = BootstrapSummary {
            attempted: boot.attempted,
            failed: boot.failures.len(),
            first_failure: boot.failures.first().map(|(_, m)| m.clone()),
        };
        (
            boot.nbs.curve_points(),
            boot.nmb.curve_points(),
            Some(cea.curve_points()),
            boot.diagnostics,
            Some(summary),
        )
    };
    if diagnostics.sigma_degenerate {
        eprintln!("warning: fitted cost dispersion is zero; cost draws are a point mass");
    }

    let write = |name: &str, points: &[netbenefit::domain::CurvePoint]| -> Result<()> {
        let path = out_dir.join(name);
        let mut file = std::fs::File::create(&path)
            .with_context(|| format!("cannot create {}", path.display()))?;
        data_io::write_curve(&mut file, points)?;
        Ok(())
    };
    write("ced.csv", &ced)?;
    write("nmb.csv", &nmb)?;
    match &cea {
        Some(points) => write("cea.csv", points)?,
        None => write("cea.csv", &[])?,
    }

    let summary = Summary {
        config_hash: config.content_hash(),
        seed: config.seed,
        version: env!("CARGO_PKG_VERSION"),
        n_observations: dataset.observations.len(),
        n_control: dataset.n_control(),
        n_treated: dataset.n_treated(),
        lambdas: grid.lambdas(),
        k_draws: config.k_draws,
        k_boot: config.k_boot,
        alpha: config.alpha,
        convergence: &diagnostics,
        bootstrap,
    };
    let summary_path = out_dir.join("summary.json");
    let mut file = std::fs::File::create(&summary_path)
        .with_context(|| format!("cannot create {}", summary_path.display()))
        .map_err(Failure::from)?;
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    file.write_all(text.as_bytes()).context("cannot write summary.json").map_err(Failure::from)?;
    file.write_all(b"\n").context("cannot write summary.json").map_err(Failure::from)?;
    eprintln!(
        "wrote {}, {}, {}, {}",
        out_dir.join("ced.csv").display(),
        out_dir.join("nmb.csv").display(),
        out_dir.join("cea.csv").display(),
        summary_path.display()
    );
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    configure_threads(args.threads)?;
    let scenario = Scenario::from(args.scenario);
    let censoring = CensoringLevel::from(args.censoring);

    if let Some(path) = args.emit_dataset {
        let config = ScenarioConfig::benchmark(scenario, censoring, args.n, args.seed);
        let dataset = generate_dataset(&config);
        let mut file = std::fs::File::create(&path)
            .with_context(|| format!("cannot create {}", path.display()))
            .map_err(Failure::from)?;
        data_io::write_dataset(&mut file, &dataset)?;
        eprintln!("wrote simulated dataset to {}", path.display());
        return Ok(());
    }

    let lambdas = match args.lambda.grid()? {
        Some(grid) => grid.lambdas().to_vec(),
        None => vec![2.0, 12.0],
    };
    let cell = ReplicationCell::benchmark(scenario, censoring, args.n);
    let mut options =
        ReplicationOptions::new(args.replicates, args.k_boot, args.k_draws, lambdas, args.seed);
    options.m_oracle = args.m_oracle;
    let report = run_replication_study(&[cell], &options)?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create output directory {}", args.out.display()))
        .map_err(Failure::from)?;
    let path = args.out.join("replication.csv");
    let mut file = std::fs::File::create(&path)
        .with_context(|| format!("cannot create {}", path.display()))
        .map_err(Failure::from)?;
    report.write_csv(&mut file).context("cannot write the report").map_err(Failure::from)?;
    eprintln!("wrote replication report to {}", path.display());
    Ok(())
}

fn oracle(args: OracleArgs) -> Result<(), Failure> {
    configure_threads(args.threads)?;
    let config = ScenarioConfig::benchmark(
        Scenario::from(args.scenario),
        CensoringLevel::from(args.censoring),
        1,
        args.seed,
    );
    let theta = oracle_true_theta(&config, args.lambda, args.m_oracle, args.seed);
    println!("theta({}) = {theta}", args.lambda);
    Ok(())
}
