//! `calibrate --config <path> [--output-dir <path>] [--mode fixed-point|time-lagged]
//!            [--verify] [--snapshot-every N]`
//!
//! Exit status: 0 when the fixed point converged and every enabled check
//! passed, 2 when the iteration failed on every horizon or a check failed
//! (artifacts are still written), 1 on input or configuration errors.
//! `CALIBRATE_THREADS` caps the number of worker threads.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, ValueEnum};
use log::error;
use lsv_core::app::{error_exit_code, run_pipeline, RunConfig, RunOptions};
use lsv_core::fixed_point::Mode;
use lsv_core::Exec;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    FixedPoint,
    TimeLagged,
}

#[derive(Debug, Parser)]
#[command(name = "calibrate", version, about = "Calibrate an LSV leverage function to vanilla quotes")]
struct Args {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output.dir`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Run the verification checks even if the config disables them.
    #[arg(long)]
    verify: bool,
    #[arg(long, value_name = "N")]
    snapshot_every: Option<usize>,
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("CALIBRATE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("CALIBRATE_THREADS={raw} is not a thread count"))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("cannot configure the thread pool")?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    if let Err(e) = configure_threads() {
        error!("{e:#}");
        return ExitCode::from(1);
    }
    let cfg = match RunConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            error!("{}: {e}", args.config.display());
            return ExitCode::from(1);
        }
    };
    let opts = RunOptions {
        output_dir: args.output_dir,
        mode: args.mode.map(|m| match m {
            ModeArg::FixedPoint => Mode::FixedPoint,
            ModeArg::TimeLagged => Mode::TimeLagged,
        }),
        verify: args.verify.then_some(true),
        snapshot_every: args.snapshot_every,
        exec: Exec::Parallel,
    };
    match run_pipeline(&cfg, &opts) {
        Ok(outcome) => {
            if let Some(v) = &outcome.report.verification {
                log::info!(
                    "max marginal L1 {:.3e} (uncorrected {:.3e}), identity {:.1e}",
                    v.max_l1,
                    v.uncorrected_max_l1,
                    v.identity_max_rel
                );
            }
            log::info!("status: {:?}", outcome.status);
            ExitCode::from(outcome.status.exit_code() as u8)
        }
        Err(e) => {
            error!("{e}");
            ExitCode::from(error_exit_code(&e) as u8)
        }
    }
}
