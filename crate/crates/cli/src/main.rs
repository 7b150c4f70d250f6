use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use speedwitness_cli::commands;
use speedwitness_cli::config::{Format, RunConfig};
use speedwitness_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "speedwitness", version, about = "Entanglement witnesses from statistical speeds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Separable speed bound versus coupling.
    Bounds(Common),
    /// Depth verdicts for experiment records.
    Witness {
        #[command(flatten)]
        common: Common,
        /// Record CSV (`n,kind,param1,param2[,param3]`).
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Monte Carlo of the KL estimator on a parity fringe.
    SimulateKl(Common),
    /// State-vector speed of a named state.
    Oracle(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<Format>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Inclusive grid `a:b:step`.
    #[arg(long = "eps-grid")]
    eps_grid: Option<String>,
}

fn build_config(name: &str, c: &Common) -> CliResult<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::from_file(name, p)?,
        None => RunConfig::new(name),
    };
    if let Some(f) = c.format {
        cfg.set("format", if f == Format::Json { "json" } else { "csv" });
    }
    if let Some(s) = c.seed {
        cfg.set("seed", s.to_string());
    }
    if let Some(m) = &c.model {
        cfg.set("model", m.clone());
    }
    if let Some(n) = c.n {
        cfg.set("n", n.to_string());
    }
    if let Some(g) = &c.eps_grid {
        cfg.set("eps_grid", g.clone());
    }
    if let Some(o) = &c.out {
        cfg.set("out", absolute(o).display().to_string());
    }
    Ok(cfg)
}

fn init_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("SPEEDWITNESS_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("SPEEDWITNESS_THREADS = `{raw}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))
}

fn execute(cli: Cli) -> CliResult<()> {
    init_threads()?;
    let cfg = match &cli.command {
        Command::Bounds(c) => build_config("bounds", c)?,
        Command::Witness { common, records } => {
            let mut cfg = build_config("witness", common)?;
            if let Some(r) = records {
                cfg.set("records", absolute(r).display().to_string());
            }
            cfg
        }
        Command::SimulateKl(c) => build_config("simulate-kl", c)?,
        Command::Oracle(c) => build_config("oracle", c)?,
    };
    let format = cfg.format()?;
    let report = commands::run(&cfg)?;
    for w in &report.metadata.warnings {
        eprintln!("warning: {w}");
    }
    let text = report.render(format)?;
    match cfg.path("out") {
        Some(path) => std::fs::write(&path, text).map_err(|source| CliError::Write { path, source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Flag paths are relative to the working directory, config paths to the
/// config file.
fn absolute(p: &std::path::Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
