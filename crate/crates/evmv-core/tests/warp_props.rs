//! Property tests for the warp stage: order preservation, count and
//! spatial-field conservation, determinism, and cross-view consistency of
//! a single warped stream.

mod oracle;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use evmv_core::encode::{encode_view, EncoderConfig};
use evmv_core::event::{Event, EventStream, ViewAxis};
use evmv_core::warp::{
    apply_warp, density_profile, sample_plan, warp_unit, WarpFamily, WarpPlan, WarpSpec,
};

fn sorted_stream(mut events: Vec<Event>, w: u16, h: u16) -> EventStream {
    events.sort_by_key(|e| e.t);
    EventStream::new(events, w, h).unwrap()
}

proptest! {
    #[test]
    fn warped_streams_keep_order_count_and_fields(
        raw in prop::collection::vec((0u64..1_000_000, 0u16..16, 0u16..16, any::<bool>()), 2..200),
        seed in any::<u64>(),
        l in 1u32..5,
    ) {
        let events: Vec<Event> = raw
            .into_iter()
            .map(|(t, x, y, pos)| Event { t, x, y, p: if pos { 1 } else { -1 } })
            .collect();
        let stream = sorted_stream(events, 16, 16);
        prop_assume!(stream.time_span().map(|(a, b)| a != b).unwrap_or(false));

        let plan = sample_plan(&stream, l, (0.5, 2.0), seed).unwrap();
        let warped = apply_warp(&stream, &plan).unwrap();

        prop_assert_eq!(warped.len(), stream.len());
        prop_assert!(warped.events().windows(2).all(|w| w[0].t <= w[1].t));
        let fields = |s: &EventStream| {
            let mut v: Vec<(u16, u16, i8)> = s.events().iter().map(|e| (e.x, e.y, e.p)).collect();
            v.sort_unstable();
            v
        };
        prop_assert_eq!(fields(&warped), fields(&stream));

        // Same seed, same plan, same bytes.
        let again = apply_warp(&stream, &sample_plan(&stream, l, (0.5, 2.0), seed).unwrap()).unwrap();
        prop_assert_eq!(warped, again);
    }

    #[test]
    fn unit_kernels_compose_monotone(
        family_idx in 0usize..5,
        magnitude in 0.5f64..2.0,
        s1 in 0.0f64..1.0,
        s2 in 0.0f64..1.0,
    ) {
        let family = WarpFamily::ALL[family_idx];
        let magnitude = if family == WarpFamily::Cosine { magnitude.min(0.99) } else { magnitude };
        prop_assume!(s1 != s2);
        let (lo, hi) = if s1 < s2 { (s1, s2) } else { (s2, s1) };
        let a = warp_unit(family, magnitude, lo).unwrap();
        let b = warp_unit(family, magnitude, hi).unwrap();
        prop_assert!(a < b);
        prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
    }
}

#[test]
fn strict_order_survives_inside_intervals_when_gaps_dominate() {
    // Coarsely spaced events cannot collide under bounded magnitudes, so
    // the continuous map's strictness survives microsecond rounding.
    let ts: Vec<u64> = (0..=60).map(|i| i * 10_000).collect();
    let stream = sorted_stream(
        ts.iter()
            .map(|&t| Event {
                t,
                x: 3,
                y: 4,
                p: 1,
            })
            .collect(),
        8,
        8,
    );
    for seed in 0..200 {
        let plan = sample_plan(&stream, 3, (0.5, 2.0), seed).unwrap();
        let warped = apply_warp(&stream, &plan).unwrap();
        assert!(
            warped.events().windows(2).all(|w| w[0].t < w[1].t),
            "collision under seed {seed}"
        );
    }
}

#[test]
fn no_temporal_reversal_across_interval_boundaries() {
    // Events bracketing every interval edge keep their global order.
    let ts: Vec<u64> = (0..500).map(|i| i * 37).collect();
    let stream = sorted_stream(
        ts.iter()
            .map(|&t| Event {
                t,
                x: 1,
                y: 1,
                p: -1,
            })
            .collect(),
        4,
        4,
    );
    for seed in [3, 17, 2024] {
        let plan = sample_plan(&stream, 4, (0.5, 2.0), seed).unwrap();
        let warped = apply_warp(&stream, &plan).unwrap();
        assert!(warped.events().windows(2).all(|w| w[0].t <= w[1].t));
    }
}

#[test]
fn warp_once_encode_twice_views_stay_consistent() {
    // Both temporal views must see the same retimed events: the time
    // marginal of the th count map equals that of the tw count map, and
    // both equal the density profile of the single warped stream.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let stream = oracle::random_stream(&mut rng, 600, 20, 14, 500_000);
    let plan = sample_plan(&stream, 4, (0.5, 2.0), 5).unwrap();
    let warped = apply_warp(&stream, &plan).unwrap();

    let t_bins = 8;
    let th = encode_view(
        &warped,
        &EncoderConfig::compact(ViewAxis::TimeHeight, t_bins).unwrap(),
    )
    .unwrap();
    let tw = encode_view(
        &warped,
        &EncoderConfig::compact(ViewAxis::TimeWidth, t_bins).unwrap(),
    )
    .unwrap();
    let hist = density_profile(&warped, t_bins).unwrap();
    for (bin, &expected) in hist.iter().enumerate() {
        let th_row: f64 = (0..th.cols()).map(|v| th.get(0, bin, v)).sum();
        let tw_row: f64 = (0..tw.cols()).map(|v| tw.get(0, bin, v)).sum();
        assert_eq!(th_row, expected as f64);
        assert_eq!(tw_row, expected as f64);
    }
}

#[test]
fn identity_specs_along_sampled_intervals_change_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let stream = oracle::random_stream(&mut rng, 300, 10, 10, 100_000);
    if stream.time_span().map(|(a, b)| a == b).unwrap_or(true) {
        return;
    }
    let sampled = sample_plan(&stream, 4, (0.5, 2.0), 8).unwrap();
    let plan = WarpPlan::identity(sampled.intervals.clone(), 8).unwrap();
    assert_eq!(apply_warp(&stream, &plan).unwrap(), stream);
}

#[test]
fn magnitude_sampling_respects_family_ranges() {
    let stream = sorted_stream(
        vec![
            Event {
                t: 0,
                x: 0,
                y: 0,
                p: 1,
            },
            Event {
                t: 1_000_000,
                x: 1,
                y: 1,
                p: 1,
            },
        ],
        4,
        4,
    );
    // A wide range straddling every invalid point.
    for seed in 0..300 {
        let plan = sample_plan(&stream, 4, (-1.5, 2.0), seed).unwrap();
        for spec in &plan.specs {
            match spec.family {
                WarpFamily::Identity => {}
                WarpFamily::Linear | WarpFamily::Power => assert!(spec.magnitude > 0.0),
                WarpFamily::Exponential => assert!(spec.magnitude != 0.0),
                WarpFamily::Cosine => assert!(spec.magnitude.abs() < 1.0),
            }
            WarpSpec::new(spec.family, spec.magnitude).unwrap();
        }
    }
}
