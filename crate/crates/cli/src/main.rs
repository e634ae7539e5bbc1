//! `dfslab <experiment> --config <path> [--seed N] [--workers W] [--out PREFIX]`
//!
//! Exit codes: 0 success, 1 I/O failure, 2 usage or config error, 3
//! numerical failure.

mod config;
mod experiments;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{CommandFactory, Parser};
use dfslab_core::operator::DEFAULT_RANK_TOL;
use dfslab_core::sampling::SeedStream;
use serde_json::json;

use experiments::{Context, EXPERIMENTS};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "dfslab", version, about = "Decoherence-free subspace experiments", disable_help_subcommand = true)]
struct Cli {
    /// Experiment to run (`list` to enumerate).
    experiment: Option<String>,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweep points.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output path prefix; overrides `output` in the config.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Debug)]
pub enum RunError {
    Usage(String),
    Config { field: String, message: String },
    Numerical(dfslab_core::Error),
    Io(String),
}

impl From<dfslab_core::Error> for RunError {
    fn from(e: dfslab_core::Error) -> Self {
        RunError::Numerical(e)
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Usage(m) => write!(f, "{m}"),
            RunError::Config { field, message } => write!(f, "invalid config field '{field}': {message}"),
            RunError::Numerical(e) => write!(f, "numerical failure: {e}"),
            RunError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl RunError {
    fn exit_code(&self) -> u8 {
        match self {
            RunError::Io(_) => 1,
            RunError::Usage(_) | RunError::Config { .. } => 2,
            RunError::Numerical(_) => 3,
        }
    }
}

fn experiment_list() -> String {
    let mut s = String::from("Experiments:\n");
    for (name, about, fields) in EXPERIMENTS {
        s.push_str(&format!("  {name:<14} {about}\n  {:<14} requires: {fields}\n", ""));
    }
    s.push_str(&format!("  {:<14} print this list\n", "list"));
    s
}

fn usage() -> String {
    format!(
        "{}\n{}\nEnvironment:\n  DFSLAB_TOL     override the rank tolerance (default {DEFAULT_RANK_TOL:e})\n",
        Cli::command().render_help(),
        experiment_list()
    )
}

fn suggest(name: &str) -> Option<&'static str> {
    EXPERIMENTS
        .iter()
        .map(|e| e.0)
        .chain(["list"])
        .map(|c| (strsim::levenshtein(name, c), c))
        .filter(|(d, c)| *d <= c.len().max(3) / 2 + 1)
        .min_by_key(|(d, _)| *d)
        .map(|(_, c)| c)
}

fn tolerance() -> Result<f64, RunError> {
    match std::env::var("DFSLAB_TOL") {
        Ok(v) => match v.trim().parse::<f64>() {
            Ok(t) if t > 0.0 && t.is_finite() => Ok(t),
            _ => Err(RunError::Config {
                field: "DFSLAB_TOL".into(),
                message: format!("expected a positive number, got '{v}'"),
            }),
        },
        Err(_) => Ok(DEFAULT_RANK_TOL),
    }
}

fn write(path: &Path, contents: &str) -> Result<(), RunError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| RunError::Io(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| RunError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Drops absent optional keys so the echo reads like the TOML it came from.
fn without_nulls(v: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match v {
        Value::Object(map) => Value::Object(
            map.into_iter()
                .filter(|(_, x)| !x.is_null())
                .map(|(k, x)| (k, without_nulls(x)))
                .collect(),
        ),
        Value::Array(items) => Value::Array(items.into_iter().map(without_nulls).collect()),
        other => other,
    }
}

fn with_suffix(prefix: &str, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}{suffix}"))
}

fn run(cli: Cli) -> Result<(), RunError> {
    let Some(name) = cli.experiment.as_deref() else {
        print!("{}", usage());
        return Ok(());
    };
    if name == "list" {
        print!("{}", experiment_list());
        return Ok(());
    }
    if !EXPERIMENTS.iter().any(|e| e.0 == name) {
        let hint = suggest(name).map(|s| format!("; did you mean '{s}'?")).unwrap_or_default();
        return Err(RunError::Usage(format!("unknown experiment '{name}'{hint}")));
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| RunError::Usage(format!("'{name}' needs --config <path>")))?;
    let text = std::fs::read_to_string(path).map_err(|e| RunError::Config {
        field: "--config".into(),
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let mut cfg = config::parse(&text)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.workers == 0 {
        return Err(RunError::Usage("--workers must be >= 1".into()));
    }
    let tol = tolerance()?;
    cfg.validate(name)?;

    let prefix = cli
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| format!("dfslab-{name}"));
    let ctx = Context {
        seeds: SeedStream::new(cfg.seed),
        tol,
        workers: cli.workers,
    };
    log::info!("running {name} with seed {} and tolerance {tol:e}", cfg.seed);
    let start = Instant::now();
    let artifacts = experiments::run(name, &cfg, &ctx)?;
    let wall = start.elapsed().as_secs_f64();

    let result = json!({
        "experiment": name,
        "version": VERSION,
        "seed": cfg.seed,
        "tolerance": tol,
        "result": artifacts.json,
    });
    let csv_path = with_suffix(&prefix, ".csv");
    let json_path = with_suffix(&prefix, ".json");
    let manifest_path = with_suffix(&prefix, ".manifest.json");
    let pretty = |v: &serde_json::Value| serde_json::to_string_pretty(v).expect("JSON values serialise") + "\n";
    write(&csv_path, &artifacts.csv)?;
    write(&json_path, &pretty(&result))?;
    let manifest = json!({
        "experiment": name,
        "version": VERSION,
        "seed": cfg.seed,
        "workers": cli.workers,
        "tolerance": tol,
        "config_path": path.display().to_string(),
        "config": without_nulls(serde_json::to_value(&cfg).expect("config serialises")),
        "outputs": [csv_path.display().to_string(), json_path.display().to_string()],
        "wall_time_seconds": wall,
    });
    write(&manifest_path, &pretty(&manifest))?;
    println!("{name}: wrote {} and {} ({wall:.2} s)", csv_path.display(), json_path.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // Dense kernels otherwise split work by the size of the enclosing rayon
    // pool, which changes summation order with --workers.
    faer::set_global_parallelism(faer::Par::Seq);
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
