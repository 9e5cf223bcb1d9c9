//! Control-rate run records and their CSV form.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{EulerAngles, Vec3};

/// One control tick: truth, estimate, reference, inputs, force estimate and wind.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub t: f64,
    pub px: f64,
    pub py: f64,
    pub pz: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub est_px: f64,
    pub est_py: f64,
    pub est_pz: f64,
    pub est_vx: f64,
    pub est_vy: f64,
    pub est_vz: f64,
    pub est_roll: f64,
    pub est_pitch: f64,
    pub est_yaw: f64,
    pub ref_px: f64,
    pub ref_py: f64,
    pub ref_pz: f64,
    pub ref_roll: f64,
    pub ref_pitch: f64,
    pub ref_yaw: f64,
    pub u_roll: f64,
    pub u_pitch: f64,
    pub u_thrust: f64,
    pub u_yaw_rate: f64,
    pub c_phi: f64,
    pub c_theta: f64,
    pub c_psidot: f64,
    pub c_vz: f64,
    pub fx_est: f64,
    pub fy_est: f64,
    pub fz_est: f64,
    pub wind_x: f64,
    pub wind_y: f64,
    pub wind_z: f64,
}

impl RunRecord {
    pub fn truth_p(&self) -> Vec3<f64> {
        Vec3::new(self.px, self.py, self.pz)
    }

    pub fn truth_v(&self) -> Vec3<f64> {
        Vec3::new(self.vx, self.vy, self.vz)
    }

    pub fn truth_attitude(&self) -> EulerAngles<f64> {
        EulerAngles::new(self.roll, self.pitch, self.yaw)
    }

    pub fn est_p(&self) -> Vec3<f64> {
        Vec3::new(self.est_px, self.est_py, self.est_pz)
    }

    pub fn est_attitude(&self) -> EulerAngles<f64> {
        EulerAngles::new(self.est_roll, self.est_pitch, self.est_yaw)
    }

    pub fn ref_p(&self) -> Vec3<f64> {
        Vec3::new(self.ref_px, self.ref_py, self.ref_pz)
    }

    pub fn ref_attitude(&self) -> EulerAngles<f64> {
        EulerAngles::new(self.ref_roll, self.ref_pitch, self.ref_yaw)
    }

    pub fn force_estimate(&self) -> Vec3<f64> {
        Vec3::new(self.fx_est, self.fy_est, self.fz_est)
    }

    pub fn wind(&self) -> Vec3<f64> {
        Vec3::new(self.wind_x, self.wind_y, self.wind_z)
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }

    fn values(&self) -> [f64; 39] {
        [
            self.t,
            self.px,
            self.py,
            self.pz,
            self.vx,
            self.vy,
            self.vz,
            self.roll,
            self.pitch,
            self.yaw,
            self.est_px,
            self.est_py,
            self.est_pz,
            self.est_vx,
            self.est_vy,
            self.est_vz,
            self.est_roll,
            self.est_pitch,
            self.est_yaw,
            self.ref_px,
            self.ref_py,
            self.ref_pz,
            self.ref_roll,
            self.ref_pitch,
            self.ref_yaw,
            self.u_roll,
            self.u_pitch,
            self.u_thrust,
            self.u_yaw_rate,
            self.c_phi,
            self.c_theta,
            self.c_psidot,
            self.c_vz,
            self.fx_est,
            self.fy_est,
            self.fz_est,
            self.wind_x,
            self.wind_y,
            self.wind_z,
        ]
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunLog {
    pub records: Vec<RunRecord>,
}

impl RunLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_records(w, &self.records)
    }

    pub fn read_csv<R: Read>(r: R, origin: &Path) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut records = Vec::new();
        for (i, row) in rd.deserialize().enumerate() {
            let rec: RunRecord = row.map_err(|e| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 2,
                msg: e.to_string(),
            })?;
            records.push(rec);
        }
        Ok(Self { records })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_csv(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f), path)
    }
}

pub(crate) fn write_records<W: Write>(mut w: W, records: &[RunRecord]) -> Result<()> {
    let fail = |e: String| Error::InvalidInput(format!("CSV write failed: {e}"));
    if records.is_empty() {
        let mut tmp = csv::Writer::from_writer(Vec::new());
        tmp.serialize(RunRecord::default()).map_err(|e| fail(e.to_string()))?;
        let bytes = tmp.into_inner().map_err(|e| fail(e.to_string()))?;
        let header = bytes.split(|b| *b == b'\n').next().unwrap_or_default();
        w.write_all(header)
            .and_then(|_| w.write_all(b"\n"))
            .map_err(|e| fail(e.to_string()))?;
        return Ok(());
    }
    let mut wr = csv::Writer::from_writer(w);
    for r in records {
        wr.serialize(r).map_err(|e| fail(e.to_string()))?;
    }
    wr.flush().map_err(|e| fail(e.to_string()))
}

/// CSV text of the last `n` records, for abort diagnostics.
pub(crate) fn tail_dump(records: &[RunRecord], n: usize) -> String {
    let start = records.len().saturating_sub(n);
    let mut buf = Vec::new();
    let _ = write_records(&mut buf, &records[start..]);
    String::from_utf8_lossy(&buf).into_owned()
}
