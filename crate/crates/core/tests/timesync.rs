use mav_core::timesync::*;
use proptest::prelude::*;

mod common;

use common::sync::*;

#[test]
fn randomized_matching_agrees_with_reference() {
    for cap in [2usize, 8, 32] {
        check_matching(cap, 100_000, cap as u64).unwrap();
    }
}

#[test]
fn affine_accel_interpolation_is_exact() {
    let err = affine_interpolation_error(5).unwrap();
    assert!(err < 1e-13, "{err}");
}

#[test]
fn offset_shifts_all_stamps_uniformly() {
    let (events, _) = random_events(2000, 99);
    let run = |offset: f64| {
        let mut m = ImageMatcher::<u64>::with_offset(8, offset).unwrap();
        let mut out = vec![];
        for e in &events {
            out.extend(match *e {
                Ev::Img(s) => m
                    .on_image(ImageMessage {
                        seq: s,
                        payload: s,
                        arrival_stamp: 0.0,
                    })
                    .unwrap(),
                Ev::Sync(s, t) => m.on_sync(SyncMessage { seq: s, stamp: t }).unwrap(),
            });
        }
        out
    };
    let (a, b) = (run(0.0), run(0.005));
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.seq, y.seq);
        assert_eq!(y.stamp, x.stamp + 0.005);
    }
}

proptest! {
    #[test]
    fn ring_buffer_bounded_and_ordered(cap in 1usize..16, n in 0usize..200) {
        let mut rb = RingBuffer::new(cap).unwrap();
        for s in 0..n as u64 {
            rb.push(s, s);
            prop_assert!(rb.len() <= cap);
        }
        let seqs: Vec<u64> = rb.seqs().collect();
        prop_assert!(seqs.windows(2).all(|w| w[1] > w[0]));
        prop_assert_eq!(rb.dropped() as usize, n.saturating_sub(cap));
        if n > 0 {
            prop_assert_eq!(rb.take(n as u64 - 1), Some(n as u64 - 1));
            prop_assert_eq!(rb.take(n as u64 + 5), None);
        }
    }
}
