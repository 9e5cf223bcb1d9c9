use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mav_core::harness::{parse_window, rms_metrics, MetricKind, RunLog};
use mav_core::Result;

/// Metrics over exported run logs.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// RMS pose error: truth vs reference (control) or estimate vs truth (estimation).
    Rms {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        kind: MetricKind,
        /// Seconds, `a:b`; the whole log when omitted.
        #[arg(long)]
        window: Option<String>,
    },
}

fn rms(log: &PathBuf, kind: MetricKind, window: Option<&str>) -> Result<()> {
    let log = RunLog::load(log)?;
    let window = match window {
        Some(w) => parse_window(w)?,
        None => (
            log.records.first().map_or(0.0, |r| r.t),
            log.records.last().map_or(0.0, |r| r.t),
        ),
    };
    let report = rms_metrics(&log, kind, window)?;
    println!("kind={kind}");
    mav_cli::print_pairs(report.key_values(""));
    println!("samples={}", report.samples);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    mav_cli::finish(match cli.cmd {
        Cmd::Rms { log, kind, window } => rms(&log, kind, window.as_deref()),
    })
}
