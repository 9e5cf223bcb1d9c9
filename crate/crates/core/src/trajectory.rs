//! Reference generation: quintic segments, step setpoints and the figure-8.

use crate::error::{Error, Result};
use crate::frames::Vec3;
use crate::scalar::{wrap_angle, Real};

/// Position, velocity and acceleration at a segment boundary.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BoundaryState<T> {
    pub p: Vec3<T>,
    pub v: Vec3<T>,
    pub a: Vec3<T>,
}

impl<T: Real> BoundaryState<T> {
    pub fn rest(p: Vec3<T>) -> Self {
        Self {
            p,
            v: Vec3::zeros(),
            a: Vec3::zeros(),
        }
    }
}

/// Quintic in one variable on `[0, duration]`, coefficients in ascending powers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quintic<T> {
    pub coeffs: [T; 6],
    pub duration: T,
}

impl<T: Real> Quintic<T> {
    /// The unique quintic meeting position/velocity/acceleration at both ends.
    pub fn from_boundary(start: [T; 3], end: [T; 3], duration: T) -> Self {
        let [p0, v0, a0] = start;
        let [p1, v1, a1] = end;
        let two = T::lit(2.0);
        let t = duration;
        let (t2, t3) = (t * t, t * t * t);
        let h = p1 - p0 - v0 * t - a0 * t2 / two;
        let dv = v1 - v0 - a0 * t;
        let da = a1 - a0;
        let c3 = (T::lit(10.0) * h - T::lit(4.0) * dv * t + da * t2 / two) / t3;
        let c4 = (T::lit(-15.0) * h + T::lit(7.0) * dv * t - da * t2) / (t3 * t);
        let c5 = (T::lit(6.0) * h - T::lit(3.0) * dv * t + da * t2 / two) / (t3 * t2);
        Self {
            coeffs: [p0, v0, a0 / two, c3, c4, c5],
            duration,
        }
    }

    pub fn constant(value: T, duration: T) -> Self {
        let z = T::zero();
        Self {
            coeffs: [value, z, z, z, z, z],
            duration,
        }
    }

    /// Value and first three derivatives at `t`.
    pub fn eval(&self, t: T) -> [T; 4] {
        let c = &self.coeffs;
        let l = T::lit;
        let p = c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5]))));
        let v = c[1] + t * (l(2.0) * c[2] + t * (l(3.0) * c[3] + t * (l(4.0) * c[4] + t * l(5.0) * c[5])));
        let a = l(2.0) * c[2] + t * (l(6.0) * c[3] + t * (l(12.0) * c[4] + t * l(20.0) * c[5]));
        let j = l(6.0) * c[3] + t * (l(24.0) * c[4] + t * l(60.0) * c[5]);
        [p, v, a, j]
    }
}

/// Three-axis quintic segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolySegment<T> {
    pub axes: [Quintic<T>; 3],
    pub duration: T,
}

impl<T: Real> PolySegment<T> {
    pub fn eval(&self, t: T) -> (Vec3<T>, Vec3<T>, Vec3<T>) {
        let [x, y, z] = self.axes.map(|q| q.eval(t));
        (
            Vec3::new(x[0], y[0], z[0]),
            Vec3::new(x[1], y[1], z[1]),
            Vec3::new(x[2], y[2], z[2]),
        )
    }
}

/// Minimum-jerk boundary segment between two full boundary states.
pub fn quintic_segment<T: Real>(start: BoundaryState<T>, end: BoundaryState<T>, duration: T) -> Result<PolySegment<T>> {
    if !(duration > T::zero() && duration.is_finite()) {
        return Err(Error::InvalidInput("segment duration must be positive".into()));
    }
    let axis = |i: usize| {
        Quintic::from_boundary(
            [start.p[i], start.v[i], start.a[i]],
            [end.p[i], end.v[i], end.a[i]],
            duration,
        )
    };
    Ok(PolySegment {
        axes: [axis(0), axis(1), axis(2)],
        duration,
    })
}

/// One reference sample handed to the controller.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ReferenceSample<T> {
    pub p: Vec3<T>,
    pub v: Vec3<T>,
    pub a: Vec3<T>,
    pub yaw: T,
    pub yaw_rate: T,
}

/// Waypoint row of the `t,x,y,z,yaw` file format.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Waypoint<T> {
    pub t: T,
    pub p: Vec3<T>,
    pub yaw: T,
}

/// C2 piecewise-quintic trajectory with a quintic yaw profile.
#[derive(Clone, Debug, PartialEq)]
pub struct Piecewise<T> {
    segments: Vec<PolySegment<T>>,
    yaw: Vec<Quintic<T>>,
    starts: Vec<T>,
    length: T,
}

impl<T: Real> Piecewise<T> {
    /// Joins segments; position, velocity and acceleration must agree at every joint.
    pub fn new(segments: Vec<PolySegment<T>>, yaw: Vec<Quintic<T>>) -> Result<Self> {
        if segments.is_empty() || segments.len() != yaw.len() {
            return Err(Error::InvalidInput(
                "need one yaw profile per non-empty segment list".into(),
            ));
        }
        let tol = T::lit(1e-9);
        for (w, yw) in segments.windows(2).zip(yaw.windows(2)) {
            let (p0, v0, a0) = w[0].eval(w[0].duration);
            let (p1, v1, a1) = w[1].eval(T::zero());
            let ye = yw[0].eval(yw[0].duration);
            let ys = yw[1].eval(T::zero());
            let gap = (p0 - p1).max_abs().max((v0 - v1).max_abs()).max((a0 - a1).max_abs());
            let ygap = (0..3).fold(T::zero(), |m, i| m.max((ye[i] - ys[i]).abs()));
            if gap > tol || ygap > tol {
                return Err(Error::InvalidInput("segments are not C2 at a joint".into()));
            }
        }
        let mut starts = Vec::with_capacity(segments.len());
        let mut acc = T::zero();
        for s in &segments {
            starts.push(acc);
            acc = acc + s.duration;
        }
        let length = segments.iter().fold(T::zero(), |sum, s| {
            sum + arc_length(|t| s.eval(t).1.norm(), s.duration, 400)
        });
        Ok(Self {
            segments,
            yaw,
            starts,
            length,
        })
    }

    /// Quintics through timed waypoints; interior velocities from central differences,
    /// interior accelerations zero, rest at both ends.
    pub fn from_waypoints(wps: &[Waypoint<T>]) -> Result<Self> {
        if wps.len() < 2 {
            return Err(Error::InvalidInput("need at least two waypoints".into()));
        }
        if wps.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::InvalidInput("waypoint times must be strictly increasing".into()));
        }
        // unwrap yaw so the profile takes the short way round
        let mut yaws = vec![wps[0].yaw];
        for w in wps.windows(2) {
            let prev = *yaws.last().unwrap();
            yaws.push(prev + wrap_angle(w[1].yaw - w[0].yaw));
        }
        let n = wps.len();
        let vel = |i: usize| -> (Vec3<T>, T) {
            if i == 0 || i == n - 1 {
                return (Vec3::zeros(), T::zero());
            }
            let dt = wps[i + 1].t - wps[i - 1].t;
            ((wps[i + 1].p - wps[i - 1].p) / dt, (yaws[i + 1] - yaws[i - 1]) / dt)
        };
        let mut segs = Vec::with_capacity(n - 1);
        let mut yaw = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            let d = wps[i + 1].t - wps[i].t;
            let (v0, w0) = vel(i);
            let (v1, w1) = vel(i + 1);
            let start = BoundaryState {
                p: wps[i].p,
                v: v0,
                a: Vec3::zeros(),
            };
            let end = BoundaryState {
                p: wps[i + 1].p,
                v: v1,
                a: Vec3::zeros(),
            };
            segs.push(quintic_segment(start, end, d)?);
            yaw.push(Quintic::from_boundary(
                [yaws[i], w0, T::zero()],
                [yaws[i + 1], w1, T::zero()],
                d,
            ));
        }
        Self::new(segs, yaw)
    }

    pub fn duration(&self) -> T {
        *self.starts.last().unwrap() + self.segments.last().unwrap().duration
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn segment_starts(&self) -> &[T] {
        &self.starts
    }

    fn sample(&self, t: T) -> ReferenceSample<T> {
        let end = self.duration();
        let (idx, local, hold) = if t >= end {
            let i = self.segments.len() - 1;
            (i, self.segments[i].duration, true)
        } else {
            let i = self.starts.partition_point(|&s| s <= t).saturating_sub(1);
            (i, t - self.starts[i], false)
        };
        let (p, v, a) = self.segments[idx].eval(local);
        let y = self.yaw[idx].eval(local);
        if hold {
            ReferenceSample {
                p,
                v: Vec3::zeros(),
                a: Vec3::zeros(),
                yaw: wrap_angle(y[0]),
                yaw_rate: T::zero(),
            }
        } else {
            ReferenceSample {
                p,
                v,
                a,
                yaw: wrap_angle(y[0]),
                yaw_rate: y[1],
            }
        }
    }
}

/// Gerono lemniscate `x = A sin(wt)`, `y = (A/2) sin(2wt)`, `z = z0 + h sin(wt)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Figure8<T> {
    pub center: Vec3<T>,
    /// Half the lobe-to-lobe extent (A).
    pub half_width: T,
    pub height_amp: T,
    pub period: T,
    pub laps: usize,
    pub yaw_follow: bool,
    pub fixed_yaw: T,
    length_per_lap: T,
    v_max: T,
    a_max: T,
}

impl<T: Real> Figure8<T> {
    pub fn new(half_width: T, height_amp: T, period: T, yaw_follow: bool) -> Result<Self> {
        if !(half_width > T::zero() && period > T::zero() && height_amp >= T::zero()) {
            return Err(Error::InvalidInput(
                "figure-8 requires positive width/period and non-negative height".into(),
            ));
        }
        let mut f = Self {
            center: Vec3::zeros(),
            half_width,
            height_amp,
            period,
            laps: 1,
            yaw_follow,
            fixed_yaw: T::zero(),
            length_per_lap: T::zero(),
            v_max: T::zero(),
            a_max: T::zero(),
        };
        f.length_per_lap = arc_length(|t| f.kinematics(t).1.norm(), period, 4000);
        f.v_max = peak(|t| f.kinematics(t).1.norm(), period);
        f.a_max = peak(|t| f.kinematics(t).2.norm(), period);
        Ok(f)
    }

    /// Smallest-period figure-8 of the given lap length that respects both limits.
    pub fn fit_to_limits(length: T, height_amp: T, v_max: T, a_max: T, yaw_follow: bool) -> Result<Self> {
        if !(length > T::zero() && v_max > T::zero() && a_max > T::zero()) {
            return Err(Error::InvalidInput("length and limits must be positive".into()));
        }
        let two_pi = T::PI() + T::PI();
        // arc length is homogeneous of degree one in (A, h) at fixed period
        let unit = Self::new(T::one(), height_amp, two_pi, yaw_follow)?;
        let scale = length / unit.length_per_lap;
        let (vu, au) = (unit.v_max * scale, unit.a_max * scale);
        // at angular rate w: v = vu w, a = au w^2
        let w = (v_max / vu).min((a_max / au).sqrt());
        let period = two_pi / w * T::lit(1.0 + 1e-9);
        Self::new(scale, height_amp * scale, period, yaw_follow)
    }

    pub fn with_center(mut self, center: Vec3<T>) -> Self {
        self.center = center;
        self
    }

    pub fn with_laps(mut self, laps: usize) -> Self {
        self.laps = laps.max(1);
        self
    }

    pub fn with_fixed_yaw(mut self, yaw: T) -> Self {
        self.fixed_yaw = yaw;
        self
    }

    pub fn length_per_lap(&self) -> T {
        self.length_per_lap
    }

    pub fn v_max(&self) -> T {
        self.v_max
    }

    pub fn a_max(&self) -> T {
        self.a_max
    }

    pub fn duration(&self) -> T {
        self.period * T::from_usize(self.laps).unwrap()
    }

    fn kinematics(&self, t: T) -> (Vec3<T>, Vec3<T>, Vec3<T>) {
        let w = (T::PI() + T::PI()) / self.period;
        let two = T::lit(2.0);
        let (a, h) = (self.half_width, self.height_amp);
        let (s1, c1) = (w * t).sin_cos();
        let (s2, c2) = (two * w * t).sin_cos();
        let p = Vec3::new(a * s1, a / two * s2, h * s1);
        let v = Vec3::new(a * w * c1, a * w * c2, h * w * c1);
        let acc = Vec3::new(-a * w * w * s1, -two * a * w * w * s2, -h * w * w * s1);
        (p, v, acc)
    }

    fn sample(&self, t: T) -> ReferenceSample<T> {
        let end = self.duration();
        let tt = if t >= end { end } else { t };
        let (p, v, a) = self.kinematics(tt);
        let hold = t >= end;
        let (yaw, yaw_rate) = if self.yaw_follow {
            let sp2 = v.x * v.x + v.y * v.y;
            (v.y.atan2(v.x), (v.x * a.y - v.y * a.x) / sp2)
        } else {
            (self.fixed_yaw, T::zero())
        };
        ReferenceSample {
            p: p + self.center,
            v: if hold { Vec3::zeros() } else { v },
            a: if hold { Vec3::zeros() } else { a },
            yaw: wrap_angle(yaw),
            yaw_rate: if hold { T::zero() } else { yaw_rate },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ReferenceTrajectory<T> {
    /// Constant pose.
    Hover {
        p: Vec3<T>,
        yaw: T,
    },
    /// Setpoint jump from `from` to `to` at `t_step`.
    Step {
        from: Vec3<T>,
        to: Vec3<T>,
        t_step: T,
        yaw: T,
    },
    Piecewise(Piecewise<T>),
    Figure8(Figure8<T>),
}

impl<T: Real> ReferenceTrajectory<T> {
    /// Total duration; zero for a pure hover and the step time for a step.
    pub fn duration(&self) -> T {
        match self {
            Self::Hover { .. } => T::zero(),
            Self::Step { t_step, .. } => *t_step,
            Self::Piecewise(p) => p.duration(),
            Self::Figure8(f) => f.duration(),
        }
    }

    /// Nominal path length of the reference.
    pub fn length(&self) -> T {
        match self {
            Self::Hover { .. } => T::zero(),
            Self::Step { from, to, .. } => (*to - *from).norm(),
            Self::Piecewise(p) => p.length(),
            Self::Figure8(f) => f.length_per_lap * T::from_usize(f.laps).unwrap(),
        }
    }
}

/// Evaluates the reference at `t`; past the end the terminal pose is held at rest.
pub fn sample_reference<T: Real>(traj: &ReferenceTrajectory<T>, t: T) -> Result<ReferenceSample<T>> {
    if t < T::zero() || !t.is_finite() {
        return Err(Error::InvalidInput(format!(
            "reference time {} is negative",
            t.as_f64()
        )));
    }
    Ok(match traj {
        ReferenceTrajectory::Hover { p, yaw } => ReferenceSample {
            p: *p,
            yaw: *yaw,
            ..Default::default()
        },
        ReferenceTrajectory::Step { from, to, t_step, yaw } => ReferenceSample {
            p: if t < *t_step { *from } else { *to },
            yaw: *yaw,
            ..Default::default()
        },
        ReferenceTrajectory::Piecewise(p) => p.sample(t),
        ReferenceTrajectory::Figure8(f) => f.sample(t),
    })
}

/// Figure-8 centered at the origin with lobe-to-lobe extent `width`.
pub fn figure8<T: Real>(width: T, height_amp: T, period: T, yaw_follow: bool) -> Result<ReferenceTrajectory<T>> {
    Ok(ReferenceTrajectory::Figure8(Figure8::new(
        width / T::lit(2.0),
        height_amp,
        period,
        yaw_follow,
    )?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LimitKind {
    Speed,
    Acceleration,
}

/// Contiguous sampled interval exceeding a limit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Violation<T> {
    pub kind: LimitKind,
    pub start: T,
    pub end: T,
    pub peak: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeasibilityReport<T> {
    pub feasible: bool,
    pub peak_speed: T,
    pub peak_accel: T,
    pub violations: Vec<Violation<T>>,
}

/// Dense-samples speed and acceleration magnitude and reports limit violations.
pub fn check_feasibility<T: Real>(traj: &ReferenceTrajectory<T>, v_max: T, a_max: T) -> FeasibilityReport<T> {
    const SAMPLES: usize = 10_000;
    let dur = traj.duration();
    let n = if dur > T::zero() { SAMPLES } else { 0 };
    let mut report = FeasibilityReport {
        feasible: true,
        peak_speed: T::zero(),
        peak_accel: T::zero(),
        violations: Vec::new(),
    };
    let mut open: [Option<Violation<T>>; 2] = [None, None];
    for i in 0..=n {
        let t = if n == 0 {
            T::zero()
        } else {
            dur * T::from_usize(i).unwrap() / T::from_usize(n).unwrap()
        };
        let s = sample_reference(traj, t).expect("non-negative sample time");
        let vals = [
            (LimitKind::Speed, s.v.norm(), v_max),
            (LimitKind::Acceleration, s.a.norm(), a_max),
        ];
        report.peak_speed = report.peak_speed.max(vals[0].1);
        report.peak_accel = report.peak_accel.max(vals[1].1);
        for (slot, (kind, val, lim)) in open.iter_mut().zip(vals) {
            if val > lim {
                let v = slot.get_or_insert(Violation {
                    kind,
                    start: t,
                    end: t,
                    peak: val,
                });
                v.end = t;
                v.peak = v.peak.max(val);
            } else if let Some(v) = slot.take() {
                report.violations.push(v);
            }
        }
    }
    report.violations.extend(open.into_iter().flatten());
    report.violations.sort_by(|a, b| a.start.partial_cmp(&b.start).unwrap());
    report.feasible = report.violations.is_empty();
    report
}

fn arc_length<T: Real>(speed: impl Fn(T) -> T, duration: T, n: usize) -> T {
    // composite Simpson, n even
    let n = n + n % 2;
    let h = duration / T::from_usize(n).unwrap();
    let mut sum = speed(T::zero()) + speed(duration);
    for i in 1..n {
        let w = if i % 2 == 1 { T::lit(4.0) } else { T::lit(2.0) };
        sum = sum + w * speed(h * T::from_usize(i).unwrap());
    }
    sum * h / T::lit(3.0)
}

/// Maximum of a smooth periodic function: grid scan then golden-section refinement.
fn peak<T: Real>(f: impl Fn(T) -> T, period: T) -> T {
    let n = 720;
    let h = period / T::from_usize(n).unwrap();
    let mut best = (T::zero(), f(T::zero()));
    for i in 1..n {
        let t = h * T::from_usize(i).unwrap();
        let v = f(t);
        if v > best.1 {
            best = (t, v);
        }
    }
    let (mut lo, mut hi) = (best.0 - h, best.0 + h);
    let g = T::lit(0.618_033_988_749_894_9);
    for _ in 0..80 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if f(a) > f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    best.1.max(f((lo + hi) / T::lit(2.0)))
}

/// Reads a `t,x,y,z,yaw` waypoint file.
pub fn read_waypoints<R: std::io::Read>(r: R, origin: &std::path::Path) -> Result<Vec<Waypoint<f64>>> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let perr = |line: usize, msg: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    };
    let header = rd.headers().map_err(|e| perr(1, e.to_string()))?.clone();
    if header.iter().ne(["t", "x", "y", "z", "yaw"]) {
        return Err(perr(1, "expected header t,x,y,z,yaw".into()));
    }
    let mut out = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| perr(line, e.to_string()))?;
        let v: Vec<f64> = row
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| perr(line, format!("bad number '{f}'"))))
            .collect::<Result<_>>()?;
        if v.len() != 5 || v.iter().any(|x| !x.is_finite()) {
            return Err(perr(line, "expected 5 finite fields".into()));
        }
        out.push(Waypoint {
            t: v[0],
            p: Vec3::new(v[1], v[2], v[3]),
            yaw: v[4],
        });
    }
    Ok(out)
}

pub fn load_waypoints(path: impl AsRef<std::path::Path>) -> Result<Vec<Waypoint<f64>>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_waypoints(std::io::BufReader::new(f), path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rest_to_rest(dp: f64, t: f64) -> PolySegment<f64> {
        quintic_segment(
            BoundaryState::rest(Vec3::zeros()),
            BoundaryState::rest(Vec3::new(dp, 0.0, 0.0)),
            t,
        )
        .unwrap()
    }

    #[test]
    fn rest_to_rest_midpoint() {
        let s = rest_to_rest(1.0, 2.0);
        let (p, v, a) = s.eval(1.0);
        assert!((p.x - 0.5).abs() < 1e-12);
        assert!((v.x - 15.0 / 16.0).abs() < 1e-12);
        assert!((v.x - 0.9375).abs() < 1e-12);
        assert!(a.x.abs() < 1e-12);
    }

    #[test]
    fn degenerate_segment_is_constant() {
        let b = BoundaryState::rest(Vec3::new(1.0, 2.0, 3.0));
        let s = quintic_segment(b, b, 3.0).unwrap();
        for ax in s.axes {
            assert!(ax.coeffs[1..].iter().all(|c| *c == 0.0));
        }
        assert!(quintic_segment(b, b, 0.0).is_err());
    }

    #[test]
    fn sample_reference_edges() {
        let wps = [
            Waypoint {
                t: 0.0,
                p: Vec3::zeros(),
                yaw: 0.0,
            },
            Waypoint {
                t: 2.0,
                p: Vec3::new(1.0, 1.0, 0.5),
                yaw: 0.5,
            },
            Waypoint {
                t: 5.0,
                p: Vec3::new(3.0, 0.0, 1.0),
                yaw: -0.2,
            },
        ];
        let traj = ReferenceTrajectory::Piecewise(Piecewise::from_waypoints(&wps).unwrap());
        let s0 = sample_reference(&traj, 0.0).unwrap();
        assert_eq!(s0.p, Vec3::zeros());
        assert!(sample_reference(&traj, -0.1).is_err());
        let late = sample_reference(&traj, 50.0).unwrap();
        assert!((late.p - Vec3::new(3.0, 0.0, 1.0)).max_abs() < 1e-12);
        assert_eq!(late.v, Vec3::zeros());
        // joint: limit from the left equals value from the right
        let left = sample_reference(&traj, 2.0 - 1e-12).unwrap();
        let right = sample_reference(&traj, 2.0).unwrap();
        assert!((left.p - right.p).max_abs() < 1e-10);
        assert!((left.v - right.v).max_abs() < 1e-10);
        assert!((left.a - right.a).max_abs() < 1e-9);
    }

    #[test]
    fn piecewise_rejects_discontinuity() {
        let a = rest_to_rest(1.0, 1.0);
        let b = rest_to_rest(1.0, 1.0);
        let y = Quintic::constant(0.0, 1.0);
        assert!(Piecewise::new(vec![a, b], vec![y, y]).is_err());
    }

    #[test]
    fn piecewise_second_derivative_continuous() {
        let wps: Vec<_> = (0..6)
            .map(|i| {
                let t = i as f64 * 1.5;
                Waypoint {
                    t,
                    p: Vec3::new(t.sin(), (0.7 * t).cos(), 0.1 * t),
                    yaw: 0.3 * t,
                }
            })
            .collect();
        let traj = ReferenceTrajectory::Piecewise(Piecewise::from_waypoints(&wps).unwrap());
        let h = 1e-4;
        for joint in [1.5, 3.0, 4.5, 6.0] {
            // finite-difference second derivative from each side of the joint
            let p = |t: f64| sample_reference(&traj, t).unwrap().p;
            let left = (p(joint) - p(joint - h) * 2.0 + p(joint - 2.0 * h)) / (h * h);
            let right = (p(joint + 2.0 * h) - p(joint + h) * 2.0 + p(joint)) / (h * h);
            let exact = sample_reference(&traj, joint).unwrap().a;
            assert!((left - exact).max_abs() < 1e-2 && (right - exact).max_abs() < 1e-2);
            let al = sample_reference(&traj, joint - 1e-9).unwrap().a;
            assert!((al - exact).max_abs() < 1e-6);
        }
    }

    #[test]
    fn figure8_reported_extrema_match_dense_sampling() {
        let f = Figure8::new(1.68, 0.3, 9.07, true).unwrap();
        let traj = ReferenceTrajectory::Figure8(f);
        let n = 10_000;
        let (mut vmax, mut amax) = (0.0f64, 0.0f64);
        for i in 0..=n {
            let s = sample_reference(&traj, 9.07 * i as f64 / n as f64).unwrap();
            vmax = vmax.max(s.v.norm());
            amax = amax.max(s.a.norm());
        }
        assert!((f.v_max() - vmax).abs() / vmax < 0.005);
        assert!((f.a_max() - amax).abs() / amax < 0.005);
        assert!(f.v_max() * f.period >= f.length_per_lap());
    }

    #[test]
    fn figure8_planar_when_height_zero() {
        let traj = figure8(3.0, 0.0, 8.0, false).unwrap();
        for i in 0..100 {
            let s = sample_reference(&traj, 0.08 * i as f64).unwrap();
            assert_eq!(s.p.z, 0.0);
            assert_eq!(s.yaw, 0.0);
        }
    }

    #[test]
    fn figure8_fit_to_default_limits() {
        let f = Figure8::<f64>::fit_to_limits(10.24, 0.0, 1.63, 5.37, true).unwrap();
        assert!((f.length_per_lap() - 10.24).abs() < 1e-6);
        assert!(f.v_max() <= 1.63 + 1e-9);
        let traj = ReferenceTrajectory::Figure8(f);
        let rep = check_feasibility(&traj, 1.63, 5.37);
        assert!(rep.feasible, "{rep:?}");
        // length 10.24 m at 1.63 m/s needs about a 9.16 s lap
        assert!((f.period - 9.155).abs() < 0.01, "{}", f.period);
    }

    #[test]
    fn feasibility_flags_fast_segment_window() {
        let seg = rest_to_rest(4.0, 2.0);
        let ys = Quintic::constant(0.0, 2.0);
        let traj = ReferenceTrajectory::Piecewise(Piecewise::new(vec![seg], vec![ys]).unwrap());
        // peak speed 15*4/(8*2) = 3.75 at t = 1
        let rep = check_feasibility(&traj, 3.0, 100.0);
        assert!(!rep.feasible);
        assert_eq!(rep.violations.len(), 1);
        let v = rep.violations[0];
        assert_eq!(v.kind, LimitKind::Speed);
        // v(t) = 30 dp/T s^2 (1-s)^2 with s = t/T; solve v = 3 for the window edges
        let speed = |t: f64| {
            let s = t / 2.0;
            30.0 * 4.0 / 2.0 * s * s * (1.0 - s) * (1.0 - s)
        };
        let bisect = |mut lo: f64, mut hi: f64| {
            for _ in 0..60 {
                let m = 0.5 * (lo + hi);
                if (speed(m) - 3.0) * (speed(lo) - 3.0) > 0.0 {
                    lo = m
                } else {
                    hi = m
                }
            }
            0.5 * (lo + hi)
        };
        let (t0, t1) = (bisect(0.0, 1.0), bisect(1.0, 2.0));
        assert!((v.start - t0).abs() < 2.0 * 2.0 / 1e4 && (v.end - t1).abs() < 2.0 * 2.0 / 1e4);
        assert!((v.peak - 3.75).abs() < 1e-6);
        let hover = ReferenceTrajectory::Hover {
            p: Vec3::zeros(),
            yaw: 0.0,
        };
        assert!(check_feasibility(&hover, 0.1, 0.1).feasible);
    }

    proptest! {
        #[test]
        fn quintic_boundary_residuals(
            s in prop::array::uniform9(-5.0f64..5.0), e in prop::array::uniform9(-5.0f64..5.0), d in 0.2f64..10.0,
        ) {
            let start = BoundaryState { p: Vec3::new(s[0], s[1], s[2]), v: Vec3::new(s[3], s[4], s[5]), a: Vec3::new(s[6], s[7], s[8]) };
            let end = BoundaryState { p: Vec3::new(e[0], e[1], e[2]), v: Vec3::new(e[3], e[4], e[5]), a: Vec3::new(e[6], e[7], e[8]) };
            let seg = quintic_segment(start, end, d).unwrap();
            let (p0, v0, a0) = seg.eval(0.0);
            let (p1, v1, a1) = seg.eval(d);
            let res = (p0 - start.p).max_abs().max((v0 - start.v).max_abs()).max((a0 - start.a).max_abs())
                .max((p1 - end.p).max_abs()).max((v1 - end.v).max_abs()).max((a1 - end.a).max_abs());
            prop_assert!(res <= 1e-10, "residual {}", res);
        }
    }

    #[test]
    fn waypoint_file_parses() {
        let text = "t,x,y,z,yaw\n0,0,0,1,0\n2.5, 1, -1, 1.5, 0.3\n";
        let wps = read_waypoints(text.as_bytes(), std::path::Path::new("w.csv")).unwrap();
        assert_eq!(wps.len(), 2);
        assert_eq!(wps[1].p, Vec3::new(1.0, -1.0, 1.5));
        assert!(read_waypoints("t,x,y\n".as_bytes(), std::path::Path::new("w.csv")).is_err());
        assert!(matches!(
            read_waypoints("t,x,y,z,yaw\n0,1,2,3,nan\n".as_bytes(), std::path::Path::new("w.csv")),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
