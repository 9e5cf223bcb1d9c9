use crate::error::{Error, Result};

use super::{Channel, DeadZone, FlightLog, FlightRecord, TrimOffset};

/// Velocity change, in m/s, that counts as motion during a dead-zone sweep.
pub const DEFAULT_MOTION_THRESHOLD: f64 = 0.02;

const MIN_TRIM_DURATION: f64 = 5.0;

/// Contiguous runs of records sharing one command value on `ch`.
fn levels(records: &[FlightRecord], ch: Channel) -> Vec<(f64, &[FlightRecord])> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=records.len() {
        if i == records.len() || records[i].command.get(ch) != records[start].command.get(ch) {
            out.push((records[start].command.get(ch), &records[start..i]));
            start = i;
        }
    }
    out
}

/// Finds the band around neutral where a staircase sweep on one channel produced no motion.
///
/// Each level's motion is the largest velocity change relative to the first sample of
/// that level. Fails if the sweep never leaves the quiet band on either side.
pub fn detect_dead_zone(sweep: &FlightLog, ch: Channel, motion_threshold: f64) -> Result<DeadZone> {
    if !(motion_threshold > 0.0) {
        return Err(Error::InvalidInput("motion threshold must be positive".into()));
    }
    let lv = levels(sweep.records(), ch);
    let cmds: Vec<f64> = lv.iter().map(|l| l.0).collect();
    let increasing = cmds.windows(2).all(|w| w[1] > w[0]);
    let decreasing = cmds.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) || cmds.len() < 2 {
        return Err(Error::InvalidInput(format!("{ch} sweep is not a monotone staircase")));
    }
    let mut steps: Vec<(f64, bool)> = lv
        .iter()
        .map(|(c, recs)| {
            let v0 = recs[0].v;
            let motion = recs.iter().map(|r| (r.v - v0).norm()).fold(0.0, f64::max);
            (*c, motion < motion_threshold)
        })
        .collect();
    if decreasing {
        steps.reverse();
    }
    if steps[0].0 > 0.0 || steps[steps.len() - 1].0 < 0.0 {
        return Err(Error::InvalidInput(format!("{ch} sweep does not pass through zero")));
    }
    let centre = (0..steps.len())
        .min_by(|&a, &b| steps[a].0.abs().total_cmp(&steps[b].0.abs()))
        .unwrap_or(0);
    if !steps[centre].1 {
        return Err(Error::InvalidInput(format!(
            "{ch} sweep shows motion at neutral command {}",
            steps[centre].0
        )));
    }
    let mut lo = centre;
    while lo > 0 && steps[lo - 1].1 {
        lo -= 1;
    }
    let mut hi = centre;
    while hi + 1 < steps.len() && steps[hi + 1].1 {
        hi += 1;
    }
    if lo == 0 || hi == steps.len() - 1 {
        return Err(Error::RangeNotBracketed(format!(
            "{ch} sweep [{}, {}] never left the quiet band",
            steps[0].0,
            steps[steps.len() - 1].0
        )));
    }
    DeadZone::new(steps[lo].0.min(0.0), steps[hi].0.max(0.0))
}

fn response(r: &FlightRecord, ch: Channel, yaw_rate: f64) -> f64 {
    match ch {
        Channel::Roll | Channel::Pitch => r.v.x * r.v.x + r.v.y * r.v.y,
        Channel::YawRate => yaw_rate * yaw_rate,
        Channel::Vertical => r.v.z * r.v.z,
    }
}

fn mode(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    let mut best = (None, 0usize);
    let mut i = 0;
    while i < v.len() {
        let j = v[i..].iter().take_while(|x| **x == v[i]).count();
        if j > best.1 {
            best = (Some(v[i]), j);
        }
        i += j;
    }
    best.0
}

/// Least-squares quadratic `a c^2 + b c + d`; returns `(a, b)`.
fn quadratic_fit(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut atb = nalgebra::Vector3::<f64>::zeros();
    for &(c, r) in pts {
        let row = nalgebra::Vector3::new(c * c, c, 1.0);
        ata += row * row.transpose();
        atb += row * r;
    }
    let s = ata.lu().solve(&atb)?;
    Some((s[0], s[1]))
}

pub fn estimate_trim(hover: &FlightLog) -> Result<TrimOffset> {
    estimate_trim_with_bound(hover, TrimOffset::DEFAULT_BOUND)
}

/// Per channel, the command at which the mean squared velocity response is smallest.
///
/// Only records whose other three channels sit at their most common value are used, so
/// a log may probe each channel in turn. With three or more levels the minimum of a
/// fitted parabola is taken; otherwise, or if the parabola opens downward, the level
/// with the smallest mean response wins.
pub fn estimate_trim_with_bound(hover: &FlightLog, bound: f64) -> Result<TrimOffset> {
    if hover.duration() < MIN_TRIM_DURATION {
        return Err(Error::InvalidInput(format!(
            "trim estimation needs at least {MIN_TRIM_DURATION} s of hover, got {:.3} s",
            hover.duration()
        )));
    }
    let recs = hover.records();
    let yaw_rate = hover.output(Channel::YawRate);
    let modal: Vec<f64> = Channel::ALL
        .iter()
        .map(|&c| mode(recs.iter().map(|r| r.command.get(c))).unwrap_or(0.0))
        .collect();

    let mut out = [0.0; 4];
    for ch in Channel::ALL {
        let mut per_level: Vec<(f64, f64, usize)> = Vec::new();
        for (i, r) in recs.iter().enumerate() {
            let others_modal = Channel::ALL
                .iter()
                .filter(|&&o| o != ch)
                .all(|&o| r.command.get(o) == modal[o.index()]);
            if !others_modal {
                continue;
            }
            let c = r.command.get(ch);
            let resp = response(r, ch, yaw_rate[i]);
            match per_level.iter_mut().find(|l| l.0 == c) {
                Some(l) => {
                    l.1 += resp;
                    l.2 += 1;
                }
                None => per_level.push((c, resp, 1)),
            }
        }
        let pts: Vec<(f64, f64)> = per_level.iter().map(|l| (l.0, l.1 / l.2 as f64)).collect();
        let fallback = pts
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|p| p.0)
            .unwrap_or(modal[ch.index()]);
        out[ch.index()] = if pts.len() >= 3 {
            let lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
            match quadratic_fit(&pts) {
                Some((a, b)) if a > 0.0 => (-b / (2.0 * a)).clamp(lo, hi),
                _ => fallback,
            }
        } else {
            fallback
        };
    }
    let trim = TrimOffset::from_array(out);
    trim.validate(bound)?;
    Ok(trim)
}
