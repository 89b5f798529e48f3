//! `evfactors`: run the product test on a CSV file, or simulate its size and
//! power on the built-in scenarios.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};

use evfactors_core::combine::{analyze_all_with, write_combined_csv, write_intervals_csv};
use evfactors_core::data::{load_csv, ColumnMapping, ModelSpec};
use evfactors_core::estimators::EstimatorOptions;
use evfactors_core::keyvalue::{check_keys, parse_key_values, split_list};
use evfactors_core::simulate::{run_sweep_with, summarize, Execution, ScenarioId, SweepConfig};

const MODEL_HELP: &str = "\
Model specs use a small syntax:
  backdoor[:adj=<cols>][:basis=<basis>][:interactions=true|false]
  frontdoor[:adj=<cols>][:basis=<basis>]
  iv
<cols> is a comma-separated covariate list (default: every mapped covariate).
<basis> is one of linear, poly:<degree> (2-5), spline:<knots> (1-10); the
default is spline:3. Examples: backdoor:adj=age,bmi  frontdoor:adj=age  iv";

#[derive(Debug, Parser)]
#[command(name = "evfactors", version, about = "Product test across candidate causal models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the effect under each model and run the combined test.
    #[command(after_help = MODEL_HELP)]
    Analyze(AnalyzeArgs),
    /// Monte Carlo rejection rates for a built-in scenario.
    #[command(after_help = MODEL_HELP)]
    Simulate(SimulateArgs),
    /// List the built-in scenarios.
    Scenarios,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Input CSV with a header row.
    csv: PathBuf,
    /// key=value file with any of: outcome, treatment, instrument, mediator,
    /// covariates, models (`;`-separated), alpha. Flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    outcome: Option<String>,
    #[arg(long)]
    treatment: Option<String>,
    #[arg(long)]
    instrument: Option<String>,
    #[arg(long)]
    mediator: Option<String>,
    /// Comma-separated covariate columns.
    #[arg(long)]
    covariates: Option<String>,
    /// Candidate model; repeat for each (at least two).
    #[arg(long = "model")]
    models: Vec<String>,
    /// Test levels, comma-separated.
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    /// Confidence level of the per-model Wald intervals.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Directory for `intervals.csv` and `combined.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// key=value file with any of: scenario, n_grid, beta, reps, alpha, seed,
    /// models. Flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    /// Sample sizes, comma-separated [default: 100,250,500,750,1000].
    #[arg(long, value_delimiter = ',')]
    n_grid: Vec<usize>,
    /// Effect sizes, comma-separated [default: 0].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    beta: Vec<f64>,
    /// Replicates per grid point [default: 1000].
    #[arg(long)]
    reps: Option<usize>,
    /// Test level [default: 0.05].
    #[arg(long)]
    alpha: Option<f64>,
    /// Master seed; required here or in the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// `;`-separated model specs [default: the scenario's own set].
    #[arg(long)]
    models: Option<String>,
    /// Run replicates on one thread.
    #[arg(long)]
    sequential: bool,
    /// Output CSV of rejection rates.
    #[arg(long)]
    out: Option<PathBuf>,
}

const ANALYZE_KEYS: [&str; 7] = [
    "outcome",
    "treatment",
    "instrument",
    "mediator",
    "covariates",
    "models",
    "alpha",
];

fn usage_error(cmd: &str, msg: impl std::fmt::Display) -> ! {
    let mut root = Cli::command();
    let sub = root.find_subcommand_mut(cmd).expect("known subcommand");
    sub.error(ErrorKind::MissingRequiredArgument, msg).exit()
}

fn read_config(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_key_values(&text).with_context(|| format!("parsing {}", path.display()))
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let mut pairs = match &args.config {
        Some(p) => read_config(p)?,
        None => BTreeMap::new(),
    };
    check_keys(&pairs, &ANALYZE_KEYS)?;
    for (key, value) in [
        ("outcome", &args.outcome),
        ("treatment", &args.treatment),
        ("instrument", &args.instrument),
        ("mediator", &args.mediator),
        ("covariates", &args.covariates),
    ] {
        if let Some(v) = value {
            pairs.insert(key.to_string(), v.clone());
        }
    }
    for key in ["outcome", "treatment"] {
        if !pairs.contains_key(key) {
            usage_error(
                "analyze",
                format!("the `{key}` column must be given by --{key} or the config file"),
            );
        }
    }

    let model_texts: Vec<String> = if args.models.is_empty() {
        pairs
            .get("models")
            .map(|v| {
                v.split(';')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            })
            .unwrap_or_default()
    } else {
        args.models.clone()
    };
    if model_texts.len() < 2 {
        usage_error(
            "analyze",
            format!(
                "the combined test needs at least 2 --model specs, got {}",
                model_texts.len()
            ),
        );
    }
    let levels = if !args.alpha.is_empty() {
        args.alpha.clone()
    } else if let Some(v) = pairs.get("alpha") {
        split_list(v)
            .iter()
            .map(|s| s.parse::<f64>().with_context(|| format!("alpha `{s}`")))
            .collect::<Result<_>>()?
    } else {
        vec![0.05]
    };

    let mapping = ColumnMapping::from_key_values(&pairs)?;
    let specs: Vec<ModelSpec> = model_texts
        .iter()
        .map(|t| ModelSpec::parse(t, &mapping.covariates))
        .collect::<Result<_, _>>()?;
    let table = load_csv(&args.csv, &mapping).with_context(|| format!("loading {}", args.csv.display()))?;
    let analysis = analyze_all_with(&table, &specs, &levels, args.level, &EstimatorOptions::default())?;

    std::io::stdout().lock().write_all(analysis.text_report().as_bytes())?;
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut buf = Vec::new();
        write_intervals_csv(&mut buf, &analysis.intervals)?;
        fs::write(dir.join("intervals.csv"), &buf)?;
        buf.clear();
        write_combined_csv(&mut buf, &analysis.test)?;
        fs::write(dir.join("combined.csv"), &buf)?;
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut pairs = match &args.config {
        Some(p) => read_config(p)?,
        None => BTreeMap::new(),
    };
    let mut set = |key: &str, value: Option<String>| {
        if let Some(v) = value {
            pairs.insert(key.to_string(), v);
        }
    };
    set("scenario", args.scenario.clone());
    set("n_grid", (!args.n_grid.is_empty()).then(|| join(&args.n_grid)));
    set("beta", (!args.beta.is_empty()).then(|| join(&args.beta)));
    set("reps", args.reps.map(|v| v.to_string()));
    set("alpha", args.alpha.map(|v| v.to_string()));
    set("seed", args.seed.map(|v| v.to_string()));
    set("models", args.models.clone());
    if !pairs.contains_key("seed") {
        usage_error(
            "simulate",
            "a master seed is required (--seed or `seed=` in the config file)",
        );
    }
    if !pairs.contains_key("scenario") {
        usage_error(
            "simulate",
            "a scenario is required (--scenario or `scenario=` in the config file)",
        );
    }

    let config = SweepConfig::from_key_values(&pairs)?;
    let execution = if args.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let table = run_sweep_with(&config, execution)?;
    let mut out = std::io::stdout().lock();
    for row in table.sorted_rows() {
        writeln!(out, "{row}")?;
    }
    if let Some(path) = &args.out {
        summarize(&table, path)?;
    }
    Ok(())
}

fn scenarios() -> Result<()> {
    let width = ScenarioId::ALL.iter().map(|s| s.key().len()).max().unwrap_or(0);
    let mut out = std::io::stdout().lock();
    for id in ScenarioId::ALL {
        writeln!(out, "{:<width$}  {:<12}  {}", id.key(), id.anchor(), id.description())?;
    }
    Ok(())
}

fn broken_pipe(e: &anyhow::Error) -> bool {
    e.downcast_ref::<std::io::Error>()
        .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(args) => analyze(args),
        Command::Simulate(args) => simulate(args),
        Command::Scenarios => scenarios(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
