use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mav_core::harness::{build_report, export, parse_param, run_scenario, with_param, ScenarioConfig};
use mav_core::{Error, Result};
use rayon::prelude::*;

/// Closed-loop scenario runs.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and export its log and report.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to `output` in the config, then `out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the scenario once per parameter value, in parallel.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Dotted config key and values, e.g. `wind.mean_force.0=0:5:6` or `seed=1,2,3`.
        #[arg(long)]
        param: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn out_dir(cfg: &ScenarioConfig, out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn run(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = ScenarioConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let dir = out_dir(&cfg, out);
    let result = run_scenario(&cfg)?;
    export(&cfg, &result, &dir)?;
    print!("{}", build_report(&cfg, &result)?.to_text());
    println!("out={}", dir.display());
    Ok(())
}

fn sweep(config: &Path, param: &str, out: Option<PathBuf>) -> Result<()> {
    let base = ScenarioConfig::load(config)?;
    let (path, values) = parse_param(param)?;
    let configs = values
        .iter()
        .map(|&v| with_param(&base, &path, v).map(|c| (v, c)))
        .collect::<Result<Vec<_>>>()?;
    let root = out_dir(&base, out);
    let runs: Vec<_> = configs
        .par_iter()
        .map(|(v, cfg)| {
            let dir = root.join(format!("{path}={v}"));
            let r = run_scenario(cfg)?;
            export(cfg, &r, &dir)?;
            Ok((*v, build_report(cfg, &r)?, dir))
        })
        .collect();
    let mut first_err: Option<Error> = None;
    for r in runs {
        match r {
            Ok((v, rep, dir)) => {
                let get = |k: &str| rep.get(k).unwrap_or("nan").to_string();
                println!(
                    "{path}={v} control_rms_pose={} estimation_rms_pose={} out={}",
                    get("control_rms_pose"),
                    get("estimation_rms_pose"),
                    dir.display()
                );
            }
            Err(e) => {
                eprintln!("error: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    first_err.map_or(Ok(()), Err)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    mav_cli::finish(match cli.cmd {
        Cmd::Run { config, seed, out } => run(&config, seed, out),
        Cmd::Sweep { config, param, out } => sweep(&config, &param, out),
    })
}
