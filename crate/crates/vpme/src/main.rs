use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use vpme::config::{parse_override, Config};
use vpme::experiments;

#[derive(Parser, Debug)]
#[command(name = "vpme", version, about = "Asymptotic-preserving PIC for Vlasov-Poisson with massless electrons")]
struct Cli {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one key, applied after the file; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Directory for CSV output.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Shorthand for `--set base_seed=<N>`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// One ensemble run; writes fields.csv.
    Simulate,
    /// Spatial convergence against a finer reference.
    Converge,
    /// Relative errors against the quasineutral solver.
    LimitCompare,
    /// Newton versus penalty linearization with shared seeds.
    SchemeCompare,
    /// Bi-fidelity surrogate error decay and statistics.
    Bifidelity,
    /// Truncation and eigenvalues of the random density field.
    KlInfo,
}

fn run(cli: Cli) -> Result<()> {
    let mut overrides = cli
        .set
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(s) = cli.seed {
        overrides.push(("base_seed".into(), s.to_string()));
    }
    let cfg = Config::load(cli.config.as_deref(), &overrides)?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    let out = &cli.out_dir;
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    std::fs::write(
        out.join("config_resolved.txt"),
        format!("# sha256 {}\n{}", cfg.hash(), cfg.canonical()),
    )?;
    log::info!("config hash {}", cfg.hash());
    match cli.command {
        Command::Simulate => experiments::simulate(&cfg, out).map(drop),
        Command::Converge => experiments::converge(&cfg, out).map(drop),
        Command::LimitCompare => experiments::limit_compare(&cfg, out).map(drop),
        Command::SchemeCompare => experiments::scheme_compare(&cfg, out).map(drop),
        Command::Bifidelity => experiments::bifidelity(&cfg, out).map(drop),
        Command::KlInfo => experiments::kl_info(&cfg, out).map(drop),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
