//! Multi-clock sensor stream reconciliation.
//!
//! The VI sensor publishes images and, separately, sync messages carrying the IMU-clock
//! stamp of each exposure. Both carry the same sequence number, so images are restamped
//! by exact seq lookup in a pair of ring buffers. Gyro and accelerometer run at different
//! rates and are merged at the gyro rate by interpolating the accelerometer.

use std::collections::VecDeque;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::frames::Vec3;

pub const DEFAULT_CAPACITY: usize = 32;

/// Bounded FIFO keyed by sequence number. Overflow evicts the oldest entry.
#[derive(Clone, Debug)]
pub struct RingBuffer<T> {
    slots: VecDeque<(u64, T)>,
    capacity: usize,
    dropped: u64,
}

impl<T> RingBuffer<T> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidInput("ring buffer capacity must be positive".into()));
        }
        Ok(Self {
            slots: VecDeque::with_capacity(capacity),
            capacity,
            dropped: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Entries evicted by overflow so far.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    /// Appends; the caller guarantees seq order. Returns the evicted entry, if any.
    pub fn push(&mut self, seq: u64, item: T) -> Option<(u64, T)> {
        let evicted = if self.slots.len() == self.capacity {
            self.dropped += 1;
            self.slots.pop_front()
        } else {
            None
        };
        self.slots.push_back((seq, item));
        evicted
    }

    /// Removes and returns the entry with exactly this seq.
    pub fn take(&mut self, seq: u64) -> Option<T> {
        let idx = self.slots.binary_search_by_key(&seq, |s| s.0).ok()?;
        self.slots.remove(idx).map(|s| s.1)
    }

    pub fn seqs(&self) -> impl Iterator<Item = u64> + '_ {
        self.slots.iter().map(|s| s.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyncMessage {
    pub seq: u64,
    /// IMU clock, seconds.
    pub stamp: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageMessage<P> {
    pub seq: u64,
    pub payload: P,
    /// Camera clock, seconds.
    pub arrival_stamp: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StampedImage<P> {
    pub seq: u64,
    pub stamp: f64,
    pub payload: P,
}

pub fn apply_camera_offset(stamp: f64, offset: f64) -> f64 {
    stamp + offset
}

/// Pairs images with sync messages of the same seq.
#[derive(Clone, Debug)]
pub struct ImageMatcher<P> {
    syncs: RingBuffer<f64>,
    images: RingBuffer<ImageMessage<P>>,
    offset: f64,
    last_sync: Option<u64>,
    last_image: Option<u64>,
}

impl<P> ImageMatcher<P> {
    pub fn new(capacity: usize) -> Result<Self> {
        Self::with_offset(capacity, 0.0)
    }

    /// `offset` is added to every emitted stamp.
    pub fn with_offset(capacity: usize, offset: f64) -> Result<Self> {
        Ok(Self {
            syncs: RingBuffer::new(capacity)?,
            images: RingBuffer::new(capacity)?,
            offset,
            last_sync: None,
            last_image: None,
        })
    }

    pub fn dropped_images(&self) -> u64 {
        self.images.dropped()
    }

    pub fn dropped_syncs(&self) -> u64 {
        self.syncs.dropped()
    }

    pub fn pending_images(&self) -> usize {
        self.images.len()
    }

    pub fn pending_syncs(&self) -> usize {
        self.syncs.len()
    }

    fn check(last: &mut Option<u64>, seq: u64) -> Result<()> {
        if let Some(l) = *last {
            if seq <= l {
                return Err(Error::SequenceOrder { seq, last: l });
            }
        }
        *last = Some(seq);
        Ok(())
    }

    pub fn on_image(&mut self, img: ImageMessage<P>) -> Result<Option<StampedImage<P>>> {
        Self::check(&mut self.last_image, img.seq)?;
        match self.syncs.take(img.seq) {
            Some(stamp) => Ok(Some(StampedImage {
                seq: img.seq,
                stamp: apply_camera_offset(stamp, self.offset),
                payload: img.payload,
            })),
            None => {
                self.images.push(img.seq, img);
                Ok(None)
            }
        }
    }

    pub fn on_sync(&mut self, sync: SyncMessage) -> Result<Option<StampedImage<P>>> {
        Self::check(&mut self.last_sync, sync.seq)?;
        if !sync.stamp.is_finite() {
            return Err(Error::InvalidInput(format!("sync {} has non-finite stamp", sync.seq)));
        }
        match self.images.take(sync.seq) {
            Some(img) => Ok(Some(StampedImage {
                seq: sync.seq,
                stamp: apply_camera_offset(sync.stamp, self.offset),
                payload: img.payload,
            })),
            None => {
                self.syncs.push(sync.seq, sync.stamp);
                Ok(None)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GyroSample {
    pub stamp: f64,
    pub w: Vec3<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AccelSample {
    pub stamp: f64,
    pub a: Vec3<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImuSample {
    pub stamp: f64,
    pub gyro: Vec3<f64>,
    pub accel: Vec3<f64>,
}

fn lerp(a0: &AccelSample, a1: &AccelSample, t: f64) -> Vec3<f64> {
    if t == a1.stamp {
        return a1.a;
    }
    if t == a0.stamp {
        return a0.a;
    }
    let s = (t - a0.stamp) / (a1.stamp - a0.stamp);
    a0.a + (a1.a - a0.a) * s
}

/// Streaming gyro/accel merger emitting at the gyro rate.
///
/// A gyro sample is held until an accelerometer sample at or after its stamp arrives.
/// Gyro samples stamped before the first accelerometer sample can never be bracketed
/// and are dropped.
#[derive(Clone, Debug, Default)]
pub struct ImuMerger {
    accel: VecDeque<AccelSample>,
    pending: VecDeque<GyroSample>,
    last_gyro: Option<f64>,
    dropped: u64,
}

impl ImuMerger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Gyro samples discarded because no accelerometer bracket exists.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    pub fn push_gyro(&mut self, g: GyroSample) -> Result<Vec<ImuSample>> {
        if let Some(l) = self.last_gyro {
            if !(g.stamp > l) {
                return Err(Error::OutOfOrder {
                    stamp: g.stamp,
                    last: l,
                });
            }
        }
        if !g.w.is_finite() {
            return Err(Error::InvalidInput(format!("gyro sample at {} is not finite", g.stamp)));
        }
        self.last_gyro = Some(g.stamp);
        self.pending.push_back(g);
        Ok(self.drain())
    }

    pub fn push_accel(&mut self, a: AccelSample) -> Result<Vec<ImuSample>> {
        if let Some(l) = self.accel.back() {
            if !(a.stamp > l.stamp) {
                return Err(Error::OutOfOrder {
                    stamp: a.stamp,
                    last: l.stamp,
                });
            }
        }
        if !a.a.is_finite() {
            return Err(Error::InvalidInput(format!(
                "accel sample at {} is not finite",
                a.stamp
            )));
        }
        self.accel.push_back(a);
        Ok(self.drain())
    }

    fn drain(&mut self) -> Vec<ImuSample> {
        let mut out = Vec::new();
        let Some(first) = self.accel.front().copied() else {
            return out;
        };
        while let Some(g) = self.pending.front().copied() {
            if g.stamp < first.stamp {
                self.pending.pop_front();
                self.dropped += 1;
                continue;
            }
            // drop accel samples that can no longer bracket anything
            while self.accel.len() >= 2 && self.accel[1].stamp <= g.stamp {
                self.accel.pop_front();
            }
            let a0 = self.accel[0];
            let accel = if g.stamp == a0.stamp {
                a0.a
            } else if self.accel.len() >= 2 {
                lerp(&a0, &self.accel[1], g.stamp)
            } else {
                break;
            };
            self.pending.pop_front();
            out.push(ImuSample {
                stamp: g.stamp,
                gyro: g.w,
                accel,
            });
        }
        out
    }

    /// Ends the stream; remaining unbracketed gyro samples are counted as dropped.
    pub fn finish(&mut self) -> u64 {
        self.dropped += self.pending.len() as u64;
        self.pending.clear();
        self.dropped
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MergedImu {
    pub samples: Vec<ImuSample>,
    pub dropped: u64,
}

/// Batch merge of two stamp-ordered streams.
pub fn merge_imu(gyro: &[GyroSample], accel: &[AccelSample]) -> Result<MergedImu> {
    let mut m = ImuMerger::new();
    let mut samples = Vec::with_capacity(gyro.len());
    let (mut i, mut j) = (0, 0);
    while i < gyro.len() || j < accel.len() {
        let take_accel = j < accel.len() && (i >= gyro.len() || accel[j].stamp <= gyro[i].stamp);
        if take_accel {
            samples.extend(m.push_accel(accel[j])?);
            j += 1;
        } else {
            samples.extend(m.push_gyro(gyro[i])?);
            i += 1;
        }
    }
    let dropped = m.finish();
    Ok(MergedImu { samples, dropped })
}

/// One line of a recorded sensor stream.
#[derive(Clone, Debug, PartialEq)]
pub enum StreamEvent {
    Image { seq: u64, stamp: f64, payload: String },
    Sync { seq: u64, stamp: f64 },
    Gyro(GyroSample),
    Accel(AccelSample),
}

impl StreamEvent {
    fn fields(&self) -> Vec<String> {
        let v3 = |v: &Vec3<f64>| [v.x.to_string(), v.y.to_string(), v.z.to_string()];
        match self {
            StreamEvent::Image { seq, stamp, payload } => {
                vec!["img".into(), seq.to_string(), stamp.to_string(), payload.clone()]
            }
            StreamEvent::Sync { seq, stamp } => vec!["sync".into(), seq.to_string(), stamp.to_string()],
            StreamEvent::Gyro(g) => [
                vec!["gyro".into(), String::new(), g.stamp.to_string()],
                v3(&g.w).to_vec(),
            ]
            .concat(),
            StreamEvent::Accel(a) => [
                vec!["accel".into(), String::new(), a.stamp.to_string()],
                v3(&a.a).to_vec(),
            ]
            .concat(),
        }
    }
}

/// Writes `kind,seq_or_blank,stamp,payload...` lines.
pub fn write_stream<W: Write>(w: W, events: &[StreamEvent]) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().flexible(true).from_writer(w);
    for e in events {
        wr.write_record(e.fields())
            .map_err(|e| Error::InvalidInput(format!("csv write: {e}")))?;
    }
    wr.flush().map_err(|e| Error::InvalidInput(format!("csv write: {e}")))
}

pub fn read_stream<R: Read>(r: R, origin: &Path) -> Result<Vec<StreamEvent>> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut out = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let line = i + 1;
        let perr = |msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            msg,
        };
        let row = row.map_err(|e| perr(e.to_string()))?;
        let f = |k: usize| row.get(k).ok_or_else(|| perr(format!("missing field {k}")));
        let num = |k: usize| -> Result<f64> {
            let s = f(k)?;
            s.parse().map_err(|_| perr(format!("bad number '{s}'")))
        };
        let seq = || -> Result<u64> {
            let s = f(1)?;
            s.parse().map_err(|_| perr(format!("bad sequence number '{s}'")))
        };
        let vec3 = || -> Result<Vec3<f64>> { Ok(Vec3::new(num(3)?, num(4)?, num(5)?)) };
        let ev = match f(0)? {
            "img" => StreamEvent::Image {
                seq: seq()?,
                stamp: num(2)?,
                payload: row.get(3).unwrap_or("").to_string(),
            },
            "sync" => StreamEvent::Sync {
                seq: seq()?,
                stamp: num(2)?,
            },
            "gyro" => StreamEvent::Gyro(GyroSample {
                stamp: num(2)?,
                w: vec3()?,
            }),
            "accel" => StreamEvent::Accel(AccelSample {
                stamp: num(2)?,
                a: vec3()?,
            }),
            k => return Err(perr(format!("unknown record kind '{k}'"))),
        };
        out.push(ev);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayOutput {
    pub images: Vec<StampedImage<String>>,
    pub imu: Vec<ImuSample>,
    pub dropped_images: u64,
    pub dropped_syncs: u64,
    pub dropped_gyro: u64,
}

/// Feeds a recorded stream through the matcher and the IMU merger in file order.
pub fn replay(events: &[StreamEvent], capacity: usize, camera_offset: f64) -> Result<ReplayOutput> {
    let mut matcher = ImageMatcher::with_offset(capacity, camera_offset)?;
    let mut merger = ImuMerger::new();
    let mut images = Vec::new();
    let mut imu = Vec::new();
    for e in events {
        match e {
            StreamEvent::Image { seq, stamp, payload } => images.extend(matcher.on_image(ImageMessage {
                seq: *seq,
                payload: payload.clone(),
                arrival_stamp: *stamp,
            })?),
            StreamEvent::Sync { seq, stamp } => images.extend(matcher.on_sync(SyncMessage {
                seq: *seq,
                stamp: *stamp,
            })?),
            StreamEvent::Gyro(g) => imu.extend(merger.push_gyro(*g)?),
            StreamEvent::Accel(a) => imu.extend(merger.push_accel(*a)?),
        }
    }
    let dropped_gyro = merger.finish();
    Ok(ReplayOutput {
        images,
        imu,
        dropped_images: matcher.dropped_images(),
        dropped_syncs: matcher.dropped_syncs(),
        dropped_gyro,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(seq: u64) -> ImageMessage<u64> {
        ImageMessage {
            seq,
            payload: seq * 100,
            arrival_stamp: seq as f64,
        }
    }

    #[test]
    fn exact_match_and_reordering() {
        let mut m = ImageMatcher::new(8).unwrap();
        assert!(m.on_sync(SyncMessage { seq: 10, stamp: 1.000 }).unwrap().is_none());
        assert!(m.on_sync(SyncMessage { seq: 11, stamp: 1.033 }).unwrap().is_none());
        let out = m.on_image(img(11)).unwrap().unwrap();
        assert_eq!((out.seq, out.stamp, out.payload), (11, 1.033, 1100));
        assert!(m.on_image(img(12)).unwrap().is_none());
        let out = m.on_sync(SyncMessage { seq: 12, stamp: 1.066 }).unwrap().unwrap();
        assert_eq!((out.seq, out.stamp), (12, 1.066));
        assert_eq!(m.pending_syncs(), 1);
        assert_eq!(m.pending_images(), 0);
    }

    #[test]
    fn overflow_drops_oldest() {
        let mut m = ImageMatcher::new(4).unwrap();
        for s in 0..5 {
            assert!(m.on_image(img(s)).unwrap().is_none());
        }
        assert_eq!(m.dropped_images(), 1);
        assert!(m.on_sync(SyncMessage { seq: 0, stamp: 0.0 }).unwrap().is_none());
        assert!(m.on_sync(SyncMessage { seq: 1, stamp: 0.1 }).unwrap().is_some());
    }

    #[test]
    fn rejects_non_increasing_seq() {
        let mut m = ImageMatcher::new(4).unwrap();
        m.on_image(img(3)).unwrap();
        assert!(matches!(
            m.on_image(img(3)),
            Err(Error::SequenceOrder { seq: 3, last: 3 })
        ));
        assert!(RingBuffer::<u8>::new(0).is_err());
    }

    #[test]
    fn camera_offset() {
        assert_eq!(apply_camera_offset(1.0, 0.005), 1.005);
        assert_eq!(apply_camera_offset(2.5, 0.0), 2.5);
        let mut m = ImageMatcher::with_offset(4, 0.005).unwrap();
        m.on_sync(SyncMessage { seq: 1, stamp: 1.0 }).unwrap();
        assert_eq!(m.on_image(img(1)).unwrap().unwrap().stamp, 1.005);
    }

    fn acc(t: f64, v: f64) -> AccelSample {
        AccelSample {
            stamp: t,
            a: Vec3::new(v, 0.0, 0.0),
        }
    }

    fn gyr(t: f64) -> GyroSample {
        GyroSample {
            stamp: t,
            w: Vec3::zeros(),
        }
    }

    #[test]
    fn interpolation_examples() {
        let r = merge_imu(&[gyr(0.004)], &[acc(0.0, 1.0), acc(0.010, 2.0)]).unwrap();
        assert!((r.samples[0].accel.x - 1.4).abs() < 1e-12);
        let r = merge_imu(&[gyr(0.010)], &[acc(0.0, 1.0), acc(0.010, 2.0), acc(0.02, 7.0)]).unwrap();
        assert_eq!(r.samples[0].accel.x, 2.0);
        let r = merge_imu(&[gyr(-0.1), gyr(0.005), gyr(0.5)], &[acc(0.0, 1.0), acc(0.010, 2.0)]).unwrap();
        assert_eq!(r.samples.len(), 1);
        assert_eq!(r.dropped, 2);
    }

    #[test]
    fn rate_arithmetic() {
        let gyro: Vec<GyroSample> = (0..2000).map(|i| gyr(i as f64 / 200.0)).collect();
        let accel: Vec<AccelSample> = (0..2500).map(|i| acc(i as f64 / 250.0 + 0.001, i as f64)).collect();
        let r = merge_imu(&gyro, &accel).unwrap();
        let (lo, hi) = (accel[0].stamp, accel[accel.len() - 1].stamp);
        let expected = gyro.iter().filter(|g| g.stamp >= lo && g.stamp <= hi).count();
        assert_eq!(r.samples.len(), expected);
        assert!(r.samples.len() >= 1998);
        assert_eq!(r.samples.len() as u64 + r.dropped, 2000);
    }

    #[test]
    fn stream_csv_round_trip() {
        let ev = vec![
            StreamEvent::Sync { seq: 4, stamp: 0.1 },
            StreamEvent::Image {
                seq: 4,
                stamp: 0.2,
                payload: "frame4.png".into(),
            },
            StreamEvent::Gyro(GyroSample {
                stamp: 0.3,
                w: Vec3::new(0.1, 0.2, 0.3),
            }),
            StreamEvent::Accel(AccelSample {
                stamp: 0.25,
                a: Vec3::new(1.0, 2.0, 9.81),
            }),
        ];
        let mut buf = Vec::new();
        write_stream(&mut buf, &ev).unwrap();
        assert!(String::from_utf8(buf.clone())
            .unwrap()
            .starts_with("sync,4,0.1\nimg,4,0.2,frame4.png\ngyro,,0.3,"));
        assert_eq!(read_stream(buf.as_slice(), Path::new("mem")).unwrap(), ev);
        let out = replay(&ev, 4, 0.0).unwrap();
        assert_eq!(out.images.len(), 1);
        assert_eq!(out.images[0].payload, "frame4.png");
    }
}
