use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mav_core::sysid::{fit_first_order, fit_second_order, Channel, FlightLog, ScaleParams};
use mav_core::Result;

/// Transfer-function identification from flight logs.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit a first or second order model to one channel.
    Fit {
        #[arg(long)]
        log: PathBuf,
        /// phi, theta, psidot or vz
        #[arg(long)]
        channel: Channel,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        order: u8,
        /// Units per count; defaults to the stock value for the channel.
        #[arg(long)]
        scale: Option<f64>,
        /// Trim in counts, subtracted from the command before scaling.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        trim: f64,
    },
}

fn fit(log: &PathBuf, ch: Channel, order: u8, scale: Option<f64>, trim: f64) -> Result<()> {
    let log = FlightLog::load(log)?;
    let scale = scale.unwrap_or_else(|| ScaleParams::default().get(ch));
    let u: Vec<f64> = log.commands(ch).iter().map(|c| (c - trim) * scale).collect();
    let y = log.output(ch);
    let dt = log.dt();
    let mut out = vec![
        ("channel".to_string(), ch.to_string()),
        ("order".into(), order.to_string()),
        ("samples".into(), log.len().to_string()),
        ("dt".into(), dt.to_string()),
        ("scale".into(), scale.to_string()),
    ];
    if order == 1 {
        let m = fit_first_order(&u, &y, dt)?;
        let (b0, a0) = m.to_tf();
        out.extend([
            ("k".into(), m.k.to_string()),
            ("tau".into(), m.tau.to_string()),
            ("tf_b0".into(), b0.to_string()),
            ("tf_a0".into(), a0.to_string()),
        ]);
    } else {
        let m = fit_second_order(&u, &y, dt)?;
        let (b0, a1, a0) = m.to_tf();
        out.extend([
            ("k".into(), m.k.to_string()),
            ("zeta".into(), m.zeta.to_string()),
            ("omega".into(), m.omega.to_string()),
            ("tf_b0".into(), b0.to_string()),
            ("tf_a1".into(), a1.to_string()),
            ("tf_a0".into(), a0.to_string()),
        ]);
    }
    mav_cli::print_pairs(out);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    mav_cli::finish(match cli.cmd {
        Cmd::Fit {
            log,
            channel,
            order,
            scale,
            trim,
        } => fit(&log, channel, order, scale, trim),
    })
}
