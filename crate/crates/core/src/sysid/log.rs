use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::frames::{EulerAngles, Vec3};
use crate::scalar::wrap_angle;

use super::{ActuatorCommand, Channel};

pub const FLIGHT_LOG_HEADER: [&str; 14] = [
    "t", "c_phi", "c_theta", "c_psidot", "c_vz", "phi", "theta", "psi", "px", "py", "pz", "vx", "vy", "vz_meas",
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlightRecord {
    pub t: f64,
    pub command: ActuatorCommand,
    pub attitude: EulerAngles<f64>,
    pub p: Vec3<f64>,
    pub v: Vec3<f64>,
}

impl FlightRecord {
    fn to_row(self) -> [f64; 14] {
        let c = self.command;
        let a = self.attitude;
        [
            self.t,
            c.c_phi,
            c.c_theta,
            c.c_psi_dot,
            c.c_vz,
            a.roll,
            a.pitch,
            a.yaw,
            self.p.x,
            self.p.y,
            self.p.z,
            self.v.x,
            self.v.y,
            self.v.z,
        ]
    }

    fn from_row(r: [f64; 14]) -> Self {
        Self {
            t: r[0],
            command: ActuatorCommand::new(r[1], r[2], r[3], r[4]),
            attitude: EulerAngles::new(r[5], r[6], r[7]),
            p: Vec3::new(r[8], r[9], r[10]),
            v: Vec3::new(r[11], r[12], r[13]),
        }
    }
}

/// Time-ordered command/response records.
#[derive(Clone, Debug, PartialEq)]
pub struct FlightLog {
    records: Vec<FlightRecord>,
}

impl FlightLog {
    pub fn new(records: Vec<FlightRecord>) -> Result<Self> {
        if records.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "flight log needs at least 2 records, got {}",
                records.len()
            )));
        }
        for w in records.windows(2) {
            if !(w[1].t > w[0].t) {
                return Err(Error::OutOfOrder {
                    stamp: w[1].t,
                    last: w[0].t,
                });
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[FlightRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.records[self.records.len() - 1].t - self.records[0].t
    }

    /// Mean sample interval.
    pub fn dt(&self) -> f64 {
        self.duration() / (self.records.len() - 1) as f64
    }

    pub fn commands(&self, ch: Channel) -> Vec<f64> {
        self.records.iter().map(|r| r.command.get(ch)).collect()
    }

    /// Measured response of a channel. Yaw rate is differentiated from the wrapped heading.
    pub fn output(&self, ch: Channel) -> Vec<f64> {
        match ch {
            Channel::Roll => self.records.iter().map(|r| r.attitude.roll).collect(),
            Channel::Pitch => self.records.iter().map(|r| r.attitude.pitch).collect(),
            Channel::Vertical => self.records.iter().map(|r| r.v.z).collect(),
            Channel::YawRate => self.yaw_rate(),
        }
    }

    fn yaw_rate(&self) -> Vec<f64> {
        let r = &self.records;
        let n = r.len();
        let d = |i: usize, j: usize| wrap_angle(r[j].attitude.yaw - r[i].attitude.yaw) / (r[j].t - r[i].t);
        (0..n)
            .map(|i| match i {
                0 => d(0, 1),
                _ if i == n - 1 => d(n - 2, n - 1),
                _ => d(i - 1, i + 1),
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::InvalidInput(format!("csv write: {e}"));
        wr.write_record(FLIGHT_LOG_HEADER).map_err(io)?;
        for r in &self.records {
            wr.write_record(r.to_row().iter().map(|v| v.to_string())).map_err(io)?;
        }
        wr.flush().map_err(|e| Error::InvalidInput(format!("csv write: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv<R: Read>(r: R, origin: &Path) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let perr = |line: usize, msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            msg,
        };
        let header = rd.headers().map_err(|e| perr(1, e.to_string()))?.clone();
        if header.iter().ne(FLIGHT_LOG_HEADER.iter().copied()) {
            return Err(perr(1, format!("expected header {}", FLIGHT_LOG_HEADER.join(","))));
        }
        let mut records = Vec::new();
        for (i, row) in rd.records().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| perr(line, e.to_string()))?;
            if row.len() != 14 {
                return Err(perr(line, format!("expected 14 fields, got {}", row.len())));
            }
            let mut vals = [0.0; 14];
            for (k, field) in row.iter().enumerate() {
                vals[k] = field
                    .parse()
                    .map_err(|_| perr(line, format!("bad number '{field}' in column {}", FLIGHT_LOG_HEADER[k])))?;
            }
            records.push(FlightRecord::from_row(vals));
        }
        Self::new(records)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f), path)
    }
}
