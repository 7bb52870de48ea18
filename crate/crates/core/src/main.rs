use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use decal::dataset::{self, SyntheticConfig};
use decal::harness::{self, ExperimentConfig};
use decal::{Error, Result};

#[derive(Parser)]
#[command(name = "decal", version, about = "Patient-aware pool-based active learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and write it as CSV.
    Gen {
        #[arg(long)]
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment and write raw, aggregate and plot files.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides experiment.workers.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run two configs that differ only in init_mode and compare them at a round.
    Compare {
        #[arg(long = "config-a")]
        config_a: PathBuf,
        #[arg(long = "config-b")]
        config_b: PathBuf,
        #[arg(long)]
        round: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild the aggregate CSV and plot from an existing raw.csv.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn config_dir(path: &Path) -> Option<&Path> {
    path.parent().filter(|p| !p.as_os_str().is_empty())
}

fn gen(preset: &str, seed: u64, out: &Path) -> Result<()> {
    let cfg = SyntheticConfig::preset(preset)?;
    let split = dataset::generate_synthetic(&cfg, seed)?;
    let file = fs::File::create(out)?;
    dataset::write_dataset(&split, file)?;
    log::info!(
        "wrote {} pool and {} test samples to {}",
        split.pool().len(),
        split.test().len(),
        out.display()
    );
    Ok(())
}

fn run(config: &Path, out: &Path, workers: Option<usize>) -> Result<()> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(w) = workers {
        cfg.experiment.workers = w;
        cfg.validate()?;
    }
    let split = cfg.dataset.build(config_dir(config))?;
    let result = harness::run_experiment_on(&split, &cfg)?;
    let files = harness::emit_report(std::slice::from_ref(&result), out)?;
    println!("{}", files.raw_csv.display());
    Ok(())
}

fn compare(config_a: &Path, config_b: &Path, round: usize, out: &Path) -> Result<()> {
    let a = ExperimentConfig::load(config_a)?;
    let b = ExperimentConfig::load(config_b)?;
    harness::check_comparable(&a, &b).map_err(|e| Error::Config(e.to_string()))?;
    let split = a.dataset.build(config_dir(config_a))?;
    let (cmp, ra, rb) = harness::compare_initializations(&split, &a, &b, round)?;
    harness::emit_report(&[ra, rb], out)?;
    harness::emit_comparison(std::slice::from_ref(&cmp), out)?;
    println!(
        "{} round {}: {} {:.4} ± {:.4} vs {} {:.4} ± {:.4} ({:+.2}%)",
        cmp.strategy,
        cmp.round,
        cmp.treatment.init_mode,
        cmp.treatment.mean,
        cmp.treatment.std,
        cmp.baseline.init_mode,
        cmp.baseline.mean,
        cmp.baseline.std,
        cmp.percent_change
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let res = match &cli.command {
        Command::Gen { preset, seed, out } => gen(preset, *seed, out),
        Command::Run { config, out, workers } => run(config, out, *workers),
        Command::Compare {
            config_a,
            config_b,
            round,
            out,
        } => compare(config_a, config_b, *round, out),
        Command::Report { input } => harness::regenerate_report(input).map(|_| ()),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("decal: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
