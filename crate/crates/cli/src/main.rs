//! `kea`: fit greedy kernel interpolants, fine-tune them with the kernel
//! exchange algorithm and run the benchmark studies.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numerical failure.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use kea_core::KeaError;

use settings::Settings;

#[derive(Parser, Debug)]
#[command(name = "kea", version, about = "Greedy kernel interpolation and the kernel exchange algorithm")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Interpolate on a given center list (all points by default).
    Fit(FitArgs),
    /// Greedy center insertion.
    Greedy(GreedyArgs),
    /// Greedy center removal, starting from all points.
    Remove(RemoveArgs),
    /// Fine-tune a model at fixed size by exchanging centers.
    Kea(KeaArgs),
    /// Insertion vs removal error curves on a test function.
    Compare(CompareArgs),
    /// KEA improvement table over kernels and expansion sizes.
    Experiment(ExperimentArgs),
}

/// Flags shared by all subcommands.
#[derive(Args, Debug)]
struct Common {
    /// TOML file with default values for any flag.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in test function (comma-separated list for `experiment`).
    #[arg(long, value_delimiter = ',')]
    function: Option<Vec<String>>,
    /// Dataset CSV with header x1,...,xd,y.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    kernel: Option<String>,
    /// Matérn smoothness (comma-separated list for `experiment`).
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<u8>>,
    #[arg(long)]
    length_scale: Option<f64>,
    /// CSV with a d x d matrix applied to points before the kernel.
    #[arg(long)]
    transform: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// uniform or halton.
    #[arg(long)]
    sampler: Option<String>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Leave the timestamp out of the output metadata.
    #[arg(long)]
    no_timestamp: bool,
}

impl Common {
    fn settings(&self) -> Settings {
        Settings {
            function: self.function.clone(),
            data: self.data.clone(),
            kernel: self.kernel.clone(),
            p: self.p.clone(),
            length_scale: self.length_scale,
            transform: self.transform.clone(),
            seed: self.seed,
            sampler: self.sampler.clone(),
            n_train: self.n_train,
            out: self.out.clone(),
            ..Default::default()
        }
    }
}

/// Exchange settings.
#[derive(Args, Debug)]
struct ExchangeArgs {
    /// Maximum number of exchanges.
    #[arg(long)]
    exchanges: Option<usize>,
    /// Insertion rule: f or p.
    #[arg(long)]
    add: Option<String>,
    /// Removal rule: floo or ploo.
    #[arg(long)]
    remove: Option<String>,
    /// Returned state: best or last.
    #[arg(long = "return")]
    return_mode: Option<String>,
    /// Exchanges without improvement before stopping; 0 disables.
    #[arg(long)]
    stagnation_window: Option<usize>,
    #[arg(long)]
    stop_on_revisit: Option<bool>,
}

impl ExchangeArgs {
    fn fill(&self, s: Settings) -> Settings {
        Settings {
            exchanges: self.exchanges,
            add: self.add.clone(),
            remove: self.remove.clone(),
            return_mode: self.return_mode.clone(),
            stagnation_window: self.stagnation_window,
            stop_on_revisit: self.stop_on_revisit,
            ..s
        }
    }
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated center indices.
    #[arg(long, value_delimiter = ',')]
    centers: Option<Vec<usize>>,
}

#[derive(Args, Debug)]
struct GreedyArgs {
    #[command(flatten)]
    common: Common,
    /// f or p.
    #[arg(long)]
    criterion: Option<String>,
    #[arg(long)]
    n_max: Option<usize>,
    /// Stop once the max training residual is below this.
    #[arg(long)]
    tol_f: Option<f64>,
}

#[derive(Args, Debug)]
struct RemoveArgs {
    #[command(flatten)]
    common: Common,
    /// floo or ploo.
    #[arg(long)]
    criterion: Option<String>,
    #[arg(long)]
    n_min: Option<usize>,
}

#[derive(Args, Debug)]
struct KeaArgs {
    #[command(flatten)]
    common: Common,
    /// Model CSV to start from; otherwise a greedy model is built first.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Insertion rule for the initial greedy model: f or p.
    #[arg(long)]
    criterion: Option<String>,
    /// Size of the initial greedy model.
    #[arg(long)]
    n_max: Option<usize>,
    #[command(flatten)]
    exchange: ExchangeArgs,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    /// Insertion rule: f or p.
    #[arg(long)]
    add: Option<String>,
    /// Removal rule: floo or ploo.
    #[arg(long)]
    remove: Option<String>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    n_test: Option<usize>,
    /// Explicit comma-separated expansion sizes.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Log-spaced sizes: count, smallest and largest value.
    #[arg(long)]
    size_count: Option<usize>,
    #[arg(long)]
    size_min: Option<usize>,
    #[arg(long)]
    size_max: Option<usize>,
    #[command(flatten)]
    exchange: ExchangeArgs,
}

/// Flags first, then the config file.
fn resolve(common: &Common, flags: Settings) -> Result<Settings> {
    Ok(match &common.config {
        Some(path) => flags.or(Settings::from_file(path)?),
        None => flags,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(a) => {
            let s = resolve(&a.common, Settings { centers: a.centers.clone(), ..a.common.settings() })?;
            commands::fit(&s, !a.common.no_timestamp)
        }
        Command::Greedy(a) => {
            let flags = Settings {
                criterion: a.criterion.clone(),
                n_max: a.n_max,
                tol_f: a.tol_f,
                ..a.common.settings()
            };
            commands::greedy(&resolve(&a.common, flags)?, !a.common.no_timestamp)
        }
        Command::Remove(a) => {
            let flags = Settings {
                criterion: a.criterion.clone(),
                n_min: a.n_min,
                ..a.common.settings()
            };
            commands::remove(&resolve(&a.common, flags)?, !a.common.no_timestamp)
        }
        Command::Kea(a) => {
            let flags = a.exchange.fill(Settings {
                model: a.model.clone(),
                criterion: a.criterion.clone(),
                n_max: a.n_max,
                ..a.common.settings()
            });
            commands::kea(resolve(&a.common, flags)?, !a.common.no_timestamp)
        }
        Command::Compare(a) => {
            let flags = Settings {
                add: a.add.clone(),
                remove: a.remove.clone(),
                ..a.common.settings()
            };
            commands::compare(&resolve(&a.common, flags)?, !a.common.no_timestamp)
        }
        Command::Experiment(a) => {
            let flags = a.exchange.fill(Settings {
                n_test: a.n_test,
                sizes: a.sizes.clone(),
                size_count: a.size_count,
                size_min: a.size_min,
                size_max: a.size_max,
                ..a.common.settings()
            });
            commands::experiment(&resolve(&a.common, flags)?, !a.common.no_timestamp)
        }
    }
}

/// Caps the worker pool at `KEA_THREADS` when set.
fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("KEA_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("KEA_THREADS must be a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the worker pool")
}

fn report(err: &anyhow::Error) -> ExitCode {
    let Some(kea) = err.chain().find_map(|e| e.downcast_ref::<KeaError>()) else {
        eprintln!("error: {err:#}");
        return ExitCode::from(1);
    };
    eprintln!("error [{}]: {err:#}", kea.kind());
    let indices = kea.indices();
    if !indices.is_empty() {
        let list: Vec<String> = indices.iter().map(|i| i.to_string()).collect();
        eprintln!("indices: {}", list.join(","));
    }
    ExitCode::from(if kea.is_numerical() { 2 } else { 1 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Err(e) = init_threads() {
        return report(&e);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
