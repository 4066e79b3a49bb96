//! `fraclobc`: runs the named experiments and writes deterministic CSV/JSON
//! artifacts with a hashed manifest.

mod config;
mod experiments;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use fraclobc_core::Error as CoreError;
use serde_json::json;
use sha2::{Digest, Sha256};

use config::{
    parse_config, parse_override, ConfigError, Experiment, ExperimentConfig, FileConfig, FlagConfig,
};

pub const THREADS_VAR: &str = "FRACLOBC_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: CoreError,
    },
    #[error("invariant violated: {}", .0.join("; "))]
    Invariant(Vec<String>),
    #[error("{0}")]
    Operational(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Invariant(_) => 2,
            Self::Core { source, .. } if is_invariant(source) => 2,
            _ => 1,
        }
    }
}

/// Core errors that refute a property rather than signal misuse.
fn is_invariant(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::BoundViolated { .. }
            | CoreError::SemigroupViolation { .. }
            | CoreError::SupersolutionViolated { .. }
            | CoreError::NonPositiveC1 { .. }
    )
}

#[derive(Parser)]
#[command(
    name = "fraclobc",
    version,
    about = "Experiments for the fractional viscous Hamilton-Jacobi equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its artifacts
    Run {
        #[arg(value_parser = parse_experiment)]
        experiment: Experiment,
        #[command(flatten)]
        flags: Flags,
        /// JSON config file; flags take precedence over its values
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Check a config file and print the resolved configuration
    Validate { config: PathBuf },
}

#[derive(Args)]
struct Flags {
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long = "T")]
    t: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// experiment parameter, `key=value` (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn parse_experiment(s: &str) -> Result<Experiment, String> {
    s.parse().map_err(|e: ConfigError| e.to_string())
}

impl Flags {
    fn into_config(self) -> Result<FlagConfig, ConfigError> {
        Ok(FlagConfig {
            s: self.s,
            p: self.p,
            n: self.n,
            t: self.t,
            seed: self.seed,
            out: self.out,
            overrides: self
                .set
                .iter()
                .map(|a| parse_override(a))
                .collect::<Result<_, _>>()?,
        })
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let k: usize = v.trim().parse().ok().filter(|&k| k > 0).ok_or_else(|| {
        ConfigError::new(
            THREADS_VAR,
            format!("{THREADS_VAR} must be a positive integer, got '{v}'"),
        )
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(k)
        .build_global()
        .map_err(|e| CliError::Operational(format!("thread pool: {e}")))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Writes every artifact, then the manifest that lists them.
fn write_outputs(
    cfg: &ExperimentConfig,
    outcome: &experiments::Outcome,
    wall: f64,
) -> Result<PathBuf, CliError> {
    let io = |p: &Path, e: std::io::Error| CliError::Operational(format!("{}: {e}", p.display()));
    let dir = &cfg.out_dir;
    let mut listed = Vec::with_capacity(outcome.files.len());
    for (rel, bytes) in &outcome.files {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| io(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| io(&path, e))?;
        listed.push(json!({ "path": rel, "bytes": bytes.len(), "sha256": sha256_hex(bytes) }));
    }
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let manifest = json!({
        "config": cfg,
        "versions": {
            "fraclobc": env!("CARGO_PKG_VERSION"),
            "fraclobc_core": env!("CARGO_PKG_VERSION"),
        },
        "threads": rayon::current_num_threads(),
        "wall_time_s": wall,
        "status": if outcome.violations.is_empty() { "ok" } else { "invariant_violated" },
        "violations": outcome.violations,
        "files": listed,
    });
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Operational(e.to_string()))?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| io(&path, e))?;
    Ok(path)
}

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Validate { config } => {
            let file = FileConfig::load(&config)?;
            let cfg = parse_config(None, Some(&file), &FlagConfig::default())?;
            let text = serde_json::to_string_pretty(&cfg)
                .map_err(|e| CliError::Operational(e.to_string()))?;
            println!("{text}");
            Ok(())
        }
        Command::Run {
            experiment,
            flags,
            config,
        } => {
            let file = config.as_deref().map(FileConfig::load).transpose()?;
            let cfg = parse_config(Some(experiment), file.as_ref(), &flags.into_config()?)?;
            init_threads()?;
            let start = Instant::now();
            let outcome = experiments::run_experiment(&cfg)?;
            let manifest = write_outputs(&cfg, &outcome, start.elapsed().as_secs_f64())?;
            println!("{}", experiments::headline(&cfg, &outcome));
            eprintln!("wrote {}", manifest.display());
            if outcome.violations.is_empty() {
                Ok(())
            } else {
                Err(CliError::Invariant(outcome.violations))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
