use mav_core::frames::Vec3;
use mav_core::timesync::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug)]
pub enum Ev {
    Img(u64),
    Sync(u64, f64),
}

/// Reference matcher written with plain vectors and linear scans.
pub struct Naive {
    pub imgs: Vec<u64>,
    pub syncs: Vec<(u64, f64)>,
    pub cap: usize,
    pub dropped_imgs: u64,
    pub dropped_syncs: u64,
    pub out: Vec<(u64, f64)>,
}

impl Naive {
    pub fn new(cap: usize) -> Self {
        Self {
            imgs: vec![],
            syncs: vec![],
            cap,
            dropped_imgs: 0,
            dropped_syncs: 0,
            out: vec![],
        }
    }

    pub fn feed(&mut self, e: Ev) {
        match e {
            Ev::Img(s) => {
                if let Some(i) = self.syncs.iter().position(|x| x.0 == s) {
                    self.out.push(self.syncs.remove(i));
                } else {
                    self.imgs.push(s);
                    if self.imgs.len() > self.cap {
                        self.imgs.remove(0);
                        self.dropped_imgs += 1;
                    }
                }
            }
            Ev::Sync(s, t) => {
                if let Some(i) = self.imgs.iter().position(|x| *x == s) {
                    self.imgs.remove(i);
                    self.out.push((s, t));
                } else {
                    self.syncs.push((s, t));
                    if self.syncs.len() > self.cap {
                        self.syncs.remove(0);
                        self.dropped_syncs += 1;
                    }
                }
            }
        }
    }
}

pub fn truth_stamp(seq: u64, rng_jitter: f64) -> f64 {
    seq as f64 / 30.0 + rng_jitter
}

/// Interleaved stream with random loss and per-stream latency, in arrival order.
pub fn random_events(n: usize, seed: u64) -> (Vec<Ev>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = n / 2;
    let stamps: Vec<f64> = (0..frames as u64)
        .map(|s| truth_stamp(s, rng.random_range(-1e-4..1e-4)))
        .collect();
    let mut arrivals: Vec<(f64, Ev)> = Vec::with_capacity(n);
    for s in 0..frames as u64 {
        let t = stamps[s as usize];
        if rng.random::<f64>() > 0.03 {
            arrivals.push((t + rng.random_range(0.0..0.2), Ev::Img(s)));
        }
        if rng.random::<f64>() > 0.03 {
            arrivals.push((t + rng.random_range(0.0..0.05), Ev::Sync(s, t)));
        }
    }
    arrivals.sort_by(|a, b| a.0.total_cmp(&b.0));
    // each stream must stay seq-ordered: fix up by re-sorting per stream positions
    let mut img_pos = vec![];
    let mut sync_pos = vec![];
    for (i, a) in arrivals.iter().enumerate() {
        match a.1 {
            Ev::Img(_) => img_pos.push(i),
            Ev::Sync(..) => sync_pos.push(i),
        }
    }
    let mut imgs: Vec<Ev> = img_pos.iter().map(|&i| arrivals[i].1).collect();
    let mut syncs: Vec<Ev> = sync_pos.iter().map(|&i| arrivals[i].1).collect();
    imgs.sort_by_key(|e| if let Ev::Img(s) = e { *s } else { 0 });
    syncs.sort_by_key(|e| if let Ev::Sync(s, _) = e { *s } else { 0 });
    for (p, e) in img_pos.into_iter().zip(imgs) {
        arrivals[p].1 = e;
    }
    for (p, e) in sync_pos.into_iter().zip(syncs) {
        arrivals[p].1 = e;
    }
    (arrivals.into_iter().map(|a| a.1).collect(), stamps)
}

/// Feeds a random stream to the matcher and the naive reference; any disagreement in
/// emitted pairs, stamps or drop counters is an error.
pub fn check_matching(cap: usize, events: usize, seed: u64) -> Result<(), String> {
    let (events, stamps) = random_events(events, seed);
    let mut m = ImageMatcher::<u64>::new(cap).map_err(|e| e.to_string())?;
    let mut naive = Naive::new(cap);
    let mut emitted = Vec::new();
    for e in &events {
        naive.feed(*e);
        let out = match *e {
            Ev::Img(s) => m.on_image(ImageMessage {
                seq: s,
                payload: s,
                arrival_stamp: 0.0,
            }),
            Ev::Sync(s, t) => m.on_sync(SyncMessage { seq: s, stamp: t }),
        }
        .map_err(|e| e.to_string())?;
        emitted.extend(out);
    }
    let mismatched = emitted
        .iter()
        .filter(|o| o.stamp.to_bits() != stamps[o.seq as usize].to_bits() || o.payload != o.seq)
        .count();
    if mismatched != 0 {
        return Err(format!("N = {cap}: {mismatched} mismatched stamps"));
    }
    if !emitted
        .windows(2)
        .all(|w| w[1].seq > w[0].seq && w[1].stamp >= w[0].stamp)
    {
        return Err(format!("N = {cap}: output not ordered"));
    }
    let got: Vec<(u64, f64)> = emitted.iter().map(|o| (o.seq, o.stamp)).collect();
    if got != naive.out {
        return Err(format!(
            "N = {cap}: {} matches vs {} expected",
            got.len(),
            naive.out.len()
        ));
    }
    if m.dropped_images() != naive.dropped_imgs || m.dropped_syncs() != naive.dropped_syncs {
        return Err(format!(
            "N = {cap}: dropped {}/{} vs {}/{}",
            m.dropped_images(),
            m.dropped_syncs(),
            naive.dropped_imgs,
            naive.dropped_syncs
        ));
    }
    if m.pending_images() > cap || m.pending_syncs() > cap {
        return Err(format!("N = {cap}: buffers exceed capacity"));
    }
    Ok(())
}

/// Worst interpolation error of `merge_imu` on an affine accelerometer signal sampled
/// with jitter.
pub fn affine_interpolation_error(seed: u64) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c0 = Vec3::new(0.3, -1.2, 9.81);
    let c1 = Vec3::new(2.0, 0.5, -0.7);
    let mut t = 0.0;
    let accel: Vec<AccelSample> = (0..2500)
        .map(|_| {
            t += rng.random_range(0.003..0.005);
            AccelSample {
                stamp: t,
                a: c0 + c1 * t,
            }
        })
        .collect();
    let mut t = 0.0;
    let gyro: Vec<GyroSample> = (0..2000)
        .map(|_| {
            t += rng.random_range(0.004..0.006);
            GyroSample {
                stamp: t,
                w: Vec3::zeros(),
            }
        })
        .collect();
    let r = merge_imu(&gyro, &accel).map_err(|e| e.to_string())?;
    let stamps: Vec<f64> = r.samples.iter().map(|s| s.stamp).collect();
    let expected: Vec<f64> = gyro
        .iter()
        .map(|g| g.stamp)
        .filter(|&s| s >= accel[0].stamp && s <= accel[accel.len() - 1].stamp)
        .collect();
    if stamps != expected {
        return Err("merged stamps differ from the gyro stamps inside the accel span".into());
    }
    Ok(r.samples
        .iter()
        .map(|s| (s.accel - (c0 + c1 * s.stamp)).max_abs())
        .fold(0.0, f64::max))
}
