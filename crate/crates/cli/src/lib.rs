//! Batch front end: flags resolve into a [`config::RunConfig`], which
//! [`run::execute`] carries out and [`run::render`] serializes.

// `!(x > 0.0)` rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod config;
pub mod run;

use std::io::Write;

use config::RunConfig;
use run::Status;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_UNCONVERGED: i32 = 2;

/// Sizes the global rayon pool from `RELEQ_THREADS` when set.
pub fn configure_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("RELEQ_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| anyhow::anyhow!("RELEQ_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

/// Runs `cfg`, writes the report, and returns the process exit code.
pub fn run_config(cfg: &RunConfig) -> anyhow::Result<i32> {
    let (status, report) = run::execute(cfg)?;
    let text = run::render(cfg, report)?;
    match &cfg.output {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(match status {
        Status::Success => EXIT_OK,
        Status::Unconverged => EXIT_UNCONVERGED,
    })
}
