//! `dhs <kind> --config path [--outdir path] [--seed n] [--overwrite] [--workers k]`
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical sentinel (blow-up,
//! non-contraction, loss of flow monotonicity). Passing `--config` more
//! than once runs a sweep: each scenario writes to `outdir/<file stem>`
//! and at most `--workers` run at a time. A sweep exits with the worst
//! code, usage errors ranking above sentinels.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use rayon::prelude::*;
use thiserror::Error;

use run::{run_scenario, Kind};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] dhs_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(dhs_core::Error::BlowUp { .. }) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "dhs",
    version,
    about = "Dispersive Hunter-Saxton numerical lab"
)]
struct Args {
    kind: Kind,

    /// Scenario file (TOML, or JSON with a .json extension). Repeat for a sweep.
    #[arg(long, required = true)]
    config: Vec<PathBuf>,

    /// Output directory; defaults to `out/<kind>`.
    #[arg(long)]
    outdir: Option<PathBuf>,

    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Replace an existing, non-empty output directory.
    #[arg(long)]
    overwrite: bool,

    /// Concurrent scenarios in a sweep.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    workers: u16,
}

fn severity(code: i32) -> u8 {
    match code {
        0 => 0,
        2 => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let root = args
        .outdir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(args.kind.name()));

    let code = if let [config] = args.config.as_slice() {
        run_scenario(args.kind, config, &root, args.seed, args.overwrite)
    } else {
        let pool = match rayon::ThreadPoolBuilder::new()
            .num_threads(args.workers as usize)
            .build()
        {
            Ok(p) => p,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        };
        let codes: Vec<i32> = pool.install(|| {
            args.config
                .par_iter()
                .map(|config| {
                    let stem = config.file_stem().unwrap_or_default();
                    run_scenario(
                        args.kind,
                        config,
                        &root.join(stem),
                        args.seed,
                        args.overwrite,
                    )
                })
                .collect()
        });
        codes.into_iter().max_by_key(|&c| severity(c)).unwrap_or(0)
    };
    ExitCode::from(code as u8)
}
