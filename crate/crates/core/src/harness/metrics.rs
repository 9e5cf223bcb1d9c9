//! RMS and drift metrics over a run log.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::wrap_angle;

use super::runlog::{RunLog, RunRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricKind {
    /// Truth against reference.
    Control,
    /// Truth against estimate.
    Estimation,
}

impl std::str::FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "control" => Ok(Self::Control),
            "estimation" => Ok(Self::Estimation),
            _ => Err(Error::InvalidInput(format!(
                "unknown metric kind '{s}' (control, estimation)"
            ))),
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Control => "control",
            Self::Estimation => "estimation",
        })
    }
}

/// Position RMS in metres, attitude RMS in degrees.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RmsReport {
    pub pose: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

impl RmsReport {
    pub fn key_values(&self, prefix: &str) -> Vec<(String, String)> {
        [
            ("pose", self.pose),
            ("x", self.x),
            ("y", self.y),
            ("z", self.z),
            ("roll_deg", self.roll),
            ("pitch_deg", self.pitch),
            ("yaw_deg", self.yaw),
        ]
        .iter()
        .map(|(k, v)| (format!("{prefix}{k}"), v.to_string()))
        .collect()
    }
}

/// Parses `a:b` (seconds).
pub fn parse_window(s: &str) -> Result<(f64, f64)> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| Error::InvalidInput(format!("window '{s}' must look like a:b")))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidInput(format!("bad window bound '{v}'")))
    };
    let (a, b) = (parse(a)?, parse(b)?);
    if !(b >= a) {
        return Err(Error::InvalidInput(format!("window {a}:{b} is reversed")));
    }
    Ok((a, b))
}

fn errors(r: &RunRecord, kind: MetricKind) -> [f64; 6] {
    let truth_p = r.truth_p();
    let truth_a = r.truth_attitude();
    let (p, a) = match kind {
        MetricKind::Control => (r.ref_p(), r.ref_attitude()),
        MetricKind::Estimation => (r.est_p(), r.est_attitude()),
    };
    let d = truth_p - p;
    [
        d.x,
        d.y,
        d.z,
        wrap_angle(truth_a.roll - a.roll),
        wrap_angle(truth_a.pitch - a.pitch),
        wrap_angle(truth_a.yaw - a.yaw),
    ]
}

pub fn rms_metrics(log: &RunLog, kind: MetricKind, window: (f64, f64)) -> Result<RmsReport> {
    let (a, b) = window;
    let mut sums = [0.0; 6];
    let mut n = 0usize;
    for r in log.records.iter().filter(|r| r.t >= a && r.t <= b) {
        for (s, e) in sums.iter_mut().zip(errors(r, kind)) {
            *s += e * e;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidInput(format!("no records in window [{a}, {b}]")));
    }
    let m = sums.map(|s| s / n as f64);
    Ok(RmsReport {
        pose: (m[0] + m[1] + m[2]).sqrt(),
        x: m[0].sqrt(),
        y: m[1].sqrt(),
        z: m[2].sqrt(),
        roll: m[3].sqrt().to_degrees(),
        pitch: m[4].sqrt().to_degrees(),
        yaw: m[5].sqrt().to_degrees(),
        window,
        samples: n,
    })
}

/// Final estimate offset from truth over the integrated truth path length.
pub fn drift_metric(log: &RunLog) -> Result<f64> {
    let length: f64 = log
        .records
        .windows(2)
        .map(|w| (w[1].truth_p() - w[0].truth_p()).norm())
        .sum();
    if !(length > 0.0) {
        return Err(Error::InvalidInput("drift needs a non-zero path length".into()));
    }
    let last = log.records.last().expect("non-empty after length check");
    Ok((last.est_p() - last.truth_p()).norm() / length)
}
