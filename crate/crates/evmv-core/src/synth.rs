//! Seeded synthetic stream generation for benchmarks and demos: uniform
//! spatial positions, exponential (Poisson-like) inter-arrival gaps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::event::{Event, EventStream};

/// Generates `n_events` events on a `width x height` sensor with mean
/// temporal gap `mean_gap_us` microseconds. Deterministic in `seed`.
pub fn synthetic_stream(
    n_events: usize,
    width: u16,
    height: u16,
    mean_gap_us: f64,
    seed: u64,
) -> EventStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::with_capacity(n_events);
    let mut clock = 0.0f64;
    let gap = mean_gap_us.max(f64::MIN_POSITIVE);
    for _ in 0..n_events {
        let u: f64 = rng.random_range(0.0..1.0);
        clock += -gap * (1.0 - u).ln();
        events.push(Event {
            t: clock.round() as u64,
            x: rng.random_range(0..width),
            y: rng.random_range(0..height),
            p: if rng.random_bool(0.5) { 1 } else { -1 },
        });
    }
    EventStream::from_parts_unchecked(events, width, height)
}
