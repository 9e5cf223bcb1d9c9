//! Scenario harness: closed-loop runs, metrics, export and parameter sweeps.

pub mod config;
pub mod metrics;
pub mod runlog;
pub mod world;

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::sysid::{ActuatorCommand, FlightLog, FlightRecord};

pub use config::{NoisePreset, ScenarioConfig, ScenarioKind};
pub use metrics::{drift_metric, parse_window, rms_metrics, MetricKind, RmsReport};
pub use runlog::{RunLog, RunRecord};
pub use world::{build_reference, run_scenario, RunOutput, RunStats};

/// Summary of a run as ordered key=value pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub entries: Vec<(String, String)>,
}

impl Report {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

fn mean_over(log: &RunLog, window: (f64, f64), f: impl Fn(&RunRecord) -> [f64; 3]) -> [f64; 3] {
    let mut sum = [0.0; 3];
    let mut n = 0.0;
    for r in log.records.iter().filter(|r| r.t >= window.0 && r.t <= window.1) {
        for (s, v) in sum.iter_mut().zip(f(r)) {
            *s += v;
        }
        n += 1.0;
    }
    sum.map(|s| s / n)
}

pub fn build_report(cfg: &ScenarioConfig, out: &RunOutput) -> Result<Report> {
    let window = cfg.metric_window();
    let control = rms_metrics(&out.log, MetricKind::Control, window)?;
    let estimation = rms_metrics(&out.log, MetricKind::Estimation, window)?;
    let mut e: Vec<(String, String)> = vec![
        ("scenario".into(), format!("{:?}", cfg.scenario).to_lowercase()),
        ("seed".into(), cfg.seed.to_string()),
        ("preset".into(), format!("{:?}", cfg.preset).to_lowercase()),
        ("duration".into(), cfg.duration.to_string()),
        ("window_start".into(), window.0.to_string()),
        ("window_end".into(), window.1.to_string()),
        ("samples".into(), control.samples.to_string()),
    ];
    e.extend(control.key_values("control_rms_"));
    e.extend(estimation.key_values("estimation_rms_"));
    let drift = drift_metric(&out.log).map_or_else(|_| "nan".to_string(), |d| d.to_string());
    e.push(("drift_fraction".into(), drift));
    let f = mean_over(&out.log, window, |r| r.force_estimate().to_array());
    let w = mean_over(&out.log, window, |r| r.wind().to_array());
    for (i, axis) in ["x", "y", "z"].iter().enumerate() {
        e.push((format!("force_est_mean_{axis}"), f[i].to_string()));
    }
    for (i, axis) in ["x", "y", "z"].iter().enumerate() {
        e.push((format!("wind_mean_{axis}"), w[i].to_string()));
    }
    let s = &out.stats;
    e.push(("odometry_updates".into(), s.odometry_updates.to_string()));
    e.push(("observer_gated".into(), s.observer_gated.to_string()));
    e.push(("dropped_images".into(), s.dropped_images.to_string()));
    e.push(("dropped_syncs".into(), s.dropped_syncs.to_string()));
    e.push(("dropped_imu".into(), s.dropped_imu.to_string()));
    e.push(("nmpc_iterations".into(), s.nmpc_iterations.to_string()));
    Ok(Report { entries: e })
}

/// Flight-log view of a run, in the identification log format.
pub fn to_flight_log(log: &RunLog) -> Result<FlightLog> {
    let records = log
        .records
        .iter()
        .map(|r| FlightRecord {
            t: r.t,
            command: ActuatorCommand::new(r.c_phi, r.c_theta, r.c_psidot, r.c_vz),
            attitude: r.truth_attitude(),
            p: r.truth_p(),
            v: r.truth_v(),
        })
        .collect();
    FlightLog::new(records)
}

/// Files written by [`export`].
#[derive(Clone, Debug, PartialEq)]
pub struct Exported {
    pub run_log: PathBuf,
    pub report: PathBuf,
    pub flight_log: Option<PathBuf>,
}

/// Writes `runlog.csv`, `report.txt` and, for identification sweeps, `flight_log.csv`.
pub fn export(cfg: &ScenarioConfig, out: &RunOutput, dir: &Path) -> Result<Exported> {
    let report = build_report(cfg, out)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let run_log = dir.join("runlog.csv");
    out.log.save(&run_log)?;
    let report_path = dir.join("report.txt");
    let mut f = std::fs::File::create(&report_path).map_err(|e| Error::io(&report_path, e))?;
    f.write_all(report.to_text().as_bytes())
        .map_err(|e| Error::io(&report_path, e))?;
    let flight_log = if cfg.scenario == ScenarioKind::SysidSweep {
        let p = dir.join("flight_log.csv");
        to_flight_log(&out.log)?.save(&p)?;
        Some(p)
    } else {
        None
    };
    Ok(Exported {
        run_log,
        report: report_path,
        flight_log,
    })
}

/// Sweep values from `start:stop:count` (inclusive linspace) or `v1,v2,...`.
pub fn parse_range(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("range '{s}' must be start:stop:count or a comma list"));
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let (a, b) = (num(parts[0])?, num(parts[1])?);
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if n == 0 || !a.is_finite() || !b.is_finite() {
            return Err(bad());
        }
        if n == 1 {
            return Ok(vec![a]);
        }
        Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
    } else {
        s.split(',').map(num).collect()
    }
}

/// Parses `path=range` from the command line.
pub fn parse_param(s: &str) -> Result<(String, Vec<f64>)> {
    let (path, range) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("parameter '{s}' must look like path=range")))?;
    if path.trim().is_empty() {
        return Err(Error::Config("empty parameter path".into()));
    }
    Ok((path.trim().to_string(), parse_range(range)?))
}

/// Sets a dotted key that already exists in `root`; array elements are addressed by
/// index (`wind.mean_force.0`). Integer and boolean entries keep their type.
pub fn set_param(root: &mut toml::Value, path: &str, value: f64) -> Result<()> {
    let mut node = root;
    for key in path.split('.') {
        node = match node {
            toml::Value::Table(t) => t
                .get_mut(key)
                .ok_or_else(|| Error::Config(format!("unknown parameter '{path}'")))?,
            toml::Value::Array(a) => {
                let idx: usize = key
                    .parse()
                    .map_err(|_| Error::Config(format!("'{key}' in {path} is not an array index")))?;
                a.get_mut(idx)
                    .ok_or_else(|| Error::Config(format!("index {idx} out of range in {path}")))?
            }
            _ => return Err(Error::Config(format!("{path}: '{key}' is not inside a table"))),
        };
    }
    *node = match node {
        toml::Value::Integer(_) => {
            if value.fract() != 0.0 {
                return Err(Error::Config(format!("{path} is an integer, got {value}")));
            }
            toml::Value::Integer(value as i64)
        }
        toml::Value::Boolean(_) => toml::Value::Boolean(value != 0.0),
        toml::Value::Float(_) => toml::Value::Float(value),
        _ => return Err(Error::Config(format!("{path} is not a numeric parameter"))),
    };
    Ok(())
}

/// Copy of `base` with one parameter replaced.
pub fn with_param(base: &ScenarioConfig, path: &str, value: f64) -> Result<ScenarioConfig> {
    let mut v = toml::Value::try_from(base).map_err(|e| Error::Config(e.to_string()))?;
    set_param(&mut v, path, value)?;
    match v {
        toml::Value::Table(t) => ScenarioConfig::from_table(t, None),
        _ => Err(Error::Config("configuration is not a table".into())),
    }
}
