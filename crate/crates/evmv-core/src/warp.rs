//! Temporal warping augmentation.
//!
//! A warp plan picks disjoint timestamp intervals and retimes the events
//! inside each one through a monotone unit kernel with fixed endpoints;
//! everything after an interval shifts by that interval's duration change
//! so the timeline stays continuous. Spatial coordinates and polarity are
//! never touched, which is what keeps the augmentation consistent across
//! view projections: warp once, encode any view.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encode::quantize_time;
use crate::error::{Error, Result};
use crate::event::EventStream;

/// Magnitudes this close to an invalid point are rejected or resampled.
const MAGNITUDE_EPS: f64 = 1e-6;

/// A normalized warp kernel: a strictly increasing map of `[0, 1]` onto
/// itself. Kernels are stateless strategies registered by name; the
/// magnitude is supplied per call.
pub trait WarpKernel: Sync {
    fn name(&self) -> &'static str;

    /// Checks the magnitude against the kernel's valid range.
    fn validate_magnitude(&self, magnitude: f64) -> Result<()>;

    /// Evaluates the unit warp at `s` in `[0, 1]`. Callers validate the
    /// magnitude and `s` first.
    fn unit(&self, magnitude: f64, s: f64) -> f64;

    /// Factor applied to the interval's duration; 1 for every kernel
    /// except the linear tempo change.
    fn duration_scale(&self, magnitude: f64) -> f64 {
        let _ = magnitude;
        1.0
    }
}

struct IdentityWarp;

impl WarpKernel for IdentityWarp {
    fn name(&self) -> &'static str {
        "identity"
    }

    fn validate_magnitude(&self, _magnitude: f64) -> Result<()> {
        Ok(())
    }

    fn unit(&self, _magnitude: f64, s: f64) -> f64 {
        s
    }
}

/// Uniform tempo change: the unit curve stays linear and the interval's
/// duration is scaled by the magnitude, shifting everything that follows.
struct LinearWarp;

impl WarpKernel for LinearWarp {
    fn name(&self) -> &'static str {
        "linear"
    }

    fn validate_magnitude(&self, magnitude: f64) -> Result<()> {
        if !magnitude.is_finite() || magnitude <= 0.0 {
            return Err(Error::contract(format!(
                "linear warp needs a positive duration scale, got {magnitude}"
            )));
        }
        Ok(())
    }

    fn unit(&self, _magnitude: f64, s: f64) -> f64 {
        s
    }

    fn duration_scale(&self, magnitude: f64) -> f64 {
        magnitude
    }
}

/// Power-curve warp `s^(1/magnitude)`. Magnitudes above 1 traverse the
/// early portion quickly and slow down late, packing events toward the end
/// of the interval; magnitudes below 1 do the opposite.
struct PowerWarp;

impl WarpKernel for PowerWarp {
    fn name(&self) -> &'static str {
        "power"
    }

    fn validate_magnitude(&self, magnitude: f64) -> Result<()> {
        if !magnitude.is_finite() || magnitude <= 0.0 {
            return Err(Error::contract(format!(
                "power warp needs a positive exponent parameter, got {magnitude}"
            )));
        }
        Ok(())
    }

    fn unit(&self, magnitude: f64, s: f64) -> f64 {
        s.powf(1.0 / magnitude)
    }
}

/// Exponential ease `(e^(bs) - 1) / (e^b - 1)`, evaluated through `exp_m1`
/// so small magnitudes stay accurate.
struct ExponentialWarp;

impl WarpKernel for ExponentialWarp {
    fn name(&self) -> &'static str {
        "exponential"
    }

    fn validate_magnitude(&self, magnitude: f64) -> Result<()> {
        if !magnitude.is_finite() || magnitude == 0.0 {
            return Err(Error::contract(format!(
                "exponential warp needs a nonzero rate, got {magnitude}"
            )));
        }
        Ok(())
    }

    fn unit(&self, magnitude: f64, s: f64) -> f64 {
        (magnitude * s).exp_m1() / magnitude.exp_m1()
    }
}

/// Sinusoidal tempo modulation `s - (h / 2pi) * sin(2pi s)`; `|h| < 1`
/// keeps the derivative `1 - h cos(2pi s)` strictly positive.
struct CosineWarp;

impl WarpKernel for CosineWarp {
    fn name(&self) -> &'static str {
        "cosine"
    }

    fn validate_magnitude(&self, magnitude: f64) -> Result<()> {
        if !magnitude.is_finite() || magnitude.abs() >= 1.0 {
            return Err(Error::contract(format!(
                "cosine warp needs |magnitude| < 1, got {magnitude}"
            )));
        }
        Ok(())
    }

    fn unit(&self, magnitude: f64, s: f64) -> f64 {
        use std::f64::consts::TAU;
        s - magnitude / TAU * (TAU * s).sin()
    }
}

/// Registry of warp kernels in sampling order.
static KERNELS: [&dyn WarpKernel; 5] = [
    &IdentityWarp,
    &LinearWarp,
    &PowerWarp,
    &ExponentialWarp,
    &CosineWarp,
];

pub fn kernels() -> &'static [&'static dyn WarpKernel] {
    &KERNELS
}

pub fn kernel_by_name(name: &str) -> Option<&'static dyn WarpKernel> {
    KERNELS
        .iter()
        .copied()
        .find(|k| k.name() == name.to_ascii_lowercase())
}

/// The five warp families, mirroring the kernel registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WarpFamily {
    Identity,
    Linear,
    Power,
    Exponential,
    Cosine,
}

impl WarpFamily {
    pub const ALL: [WarpFamily; 5] = [
        WarpFamily::Identity,
        WarpFamily::Linear,
        WarpFamily::Power,
        WarpFamily::Exponential,
        WarpFamily::Cosine,
    ];

    pub fn kernel(self) -> &'static dyn WarpKernel {
        KERNELS[self as usize]
    }

    pub fn name(self) -> &'static str {
        self.kernel().name()
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s.to_ascii_lowercase())
    }
}

impl std::fmt::Display for WarpFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Evaluates a family's unit kernel at `s`, validating the magnitude and
/// the argument range.
pub fn warp_unit(family: WarpFamily, magnitude: f64, s: f64) -> Result<f64> {
    let kernel = family.kernel();
    kernel.validate_magnitude(magnitude)?;
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::contract(format!("warp argument {s} outside [0, 1]")));
    }
    Ok(kernel.unit(magnitude, s))
}

/// One sampled warp: a family plus its magnitude parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpSpec {
    pub family: WarpFamily,
    pub magnitude: f64,
}

impl WarpSpec {
    pub fn new(family: WarpFamily, magnitude: f64) -> Result<Self> {
        family.kernel().validate_magnitude(magnitude)?;
        Ok(Self { family, magnitude })
    }

    pub const fn identity() -> Self {
        Self {
            family: WarpFamily::Identity,
            magnitude: 0.0,
        }
    }
}

/// A full augmentation plan: disjoint intervals inside the stream's time
/// span, one warp per interval, and the seed it was sampled from.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpPlan {
    /// Ascending, pairwise disjoint `(start, end)` pairs in microseconds.
    pub intervals: Vec<(f64, f64)>,
    /// One warp per interval.
    pub specs: Vec<WarpSpec>,
    pub rng_seed: u64,
}

impl WarpPlan {
    pub fn new(intervals: Vec<(f64, f64)>, specs: Vec<WarpSpec>, rng_seed: u64) -> Result<Self> {
        let plan = Self {
            intervals,
            specs,
            rng_seed,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// A plan that retimes nothing: identity warps over the given intervals.
    pub fn identity(intervals: Vec<(f64, f64)>, rng_seed: u64) -> Result<Self> {
        let specs = vec![WarpSpec::identity(); intervals.len()];
        Self::new(intervals, specs, rng_seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.intervals.len() != self.specs.len() {
            return Err(Error::contract(format!(
                "{} intervals but {} warp specs",
                self.intervals.len(),
                self.specs.len()
            )));
        }
        let mut prev_end = f64::NEG_INFINITY;
        for &(a, b) in &self.intervals {
            if !(a.is_finite() && b.is_finite()) || a >= b {
                return Err(Error::contract(format!(
                    "interval [{a}, {b}] is not a positive-length range"
                )));
            }
            if a <= prev_end {
                return Err(Error::contract(
                    "intervals must be ascending and pairwise disjoint",
                ));
            }
            prev_end = b;
        }
        for spec in &self.specs {
            spec.family.kernel().validate_magnitude(spec.magnitude)?;
        }
        Ok(())
    }

    /// Sum of the duration changes introduced by the linear warps.
    pub fn total_duration_change(&self) -> f64 {
        self.intervals
            .iter()
            .zip(&self.specs)
            .map(|(&(a, b), spec)| {
                (spec.family.kernel().duration_scale(spec.magnitude) - 1.0) * (b - a)
            })
            .sum()
    }
}

impl std::fmt::Display for WarpPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "warp plan: seed={} intervals={}",
            self.rng_seed,
            self.intervals.len()
        )?;
        for (i, (&(a, b), spec)) in self.intervals.iter().zip(&self.specs).enumerate() {
            writeln!(
                f,
                "  [{i}] {a:.3}..{b:.3} family={} magnitude={:.6}",
                spec.family, spec.magnitude
            )?;
        }
        Ok(())
    }
}

/// Maps a uniform draw into the family's valid magnitude range.
fn sample_magnitude(family: WarpFamily, rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    match family {
        WarpFamily::Identity => 0.0,
        WarpFamily::Linear | WarpFamily::Power => rng.random_range(lo..=hi).max(MAGNITUDE_EPS),
        WarpFamily::Exponential => {
            // Zero rate is the identity's job; resample away from it.
            let mut m = rng.random_range(lo..=hi);
            let mut guard = 0;
            while m.abs() < MAGNITUDE_EPS && guard < 64 {
                m = rng.random_range(lo..=hi);
                guard += 1;
            }
            if m.abs() < MAGNITUDE_EPS {
                m = MAGNITUDE_EPS;
            }
            m
        }
        WarpFamily::Cosine => rng
            .random_range(lo..=hi)
            .clamp(-1.0 + MAGNITUDE_EPS, 1.0 - MAGNITUDE_EPS),
    }
}

/// Samples `l` disjoint intervals (2l sorted uniform cut points, paired)
/// and one warp per interval, uniformly over the five families with the
/// magnitude drawn from `magnitude_range`. Deterministic in `rng_seed`.
pub fn sample_plan(
    stream: &EventStream,
    l: u32,
    magnitude_range: (f64, f64),
    rng_seed: u64,
) -> Result<WarpPlan> {
    if l == 0 {
        return Err(Error::contract("a warp plan needs at least one interval"));
    }
    let (lo, hi) = magnitude_range;
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::contract(format!(
            "invalid magnitude range [{lo}, {hi}]"
        )));
    }
    let Some((t0, t1)) = stream.time_span() else {
        return Err(Error::Degenerate(
            "cannot plan a warp for an empty stream".into(),
        ));
    };
    if t0 == t1 {
        return Err(Error::Degenerate(
            "stream needs at least two distinct timestamps".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let span = (t0 as f64, t1 as f64);
    let n_cuts = 2 * l as usize;
    let mut cuts = vec![0.0f64; n_cuts];
    for _attempt in 0..1000 {
        for c in cuts.iter_mut() {
            *c = rng.random_range(span.0..=span.1);
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if cuts.windows(2).all(|w| w[0] < w[1]) {
            let intervals: Vec<(f64, f64)> = cuts.chunks_exact(2).map(|c| (c[0], c[1])).collect();
            let specs: Vec<WarpSpec> = intervals
                .iter()
                .map(|_| {
                    let family = WarpFamily::ALL[rng.random_range(0..WarpFamily::ALL.len())];
                    let magnitude = sample_magnitude(family, &mut rng, lo, hi);
                    WarpSpec { family, magnitude }
                })
                .collect();
            return WarpPlan::new(intervals, specs, rng_seed);
        }
    }
    Err(Error::Degenerate(format!(
        "time span [{t0}, {t1}] too narrow for {l} disjoint intervals"
    )))
}

/// Applies the plan to the stream's timestamps. Events inside interval
/// `[a, b]` map through `a + scale * (b - a) * kernel((t - a) / (b - a))`;
/// every later timestamp shifts by the accumulated duration change, so the
/// warped timeline is continuous and order-preserving. Spatial coordinates
/// and polarities are untouched and the event count is preserved. Warped
/// timestamps are rounded to the nearest microsecond at the end.
pub fn apply_warp(stream: &EventStream, plan: &WarpPlan) -> Result<EventStream> {
    plan.validate()?;
    if let (Some(&(first, _)), Some(&(_, last))) = (plan.intervals.first(), plan.intervals.last()) {
        match stream.time_span() {
            Some((t0, t1)) if first >= t0 as f64 && last <= t1 as f64 => {}
            _ => {
                return Err(Error::contract(
                    "plan intervals must lie within the stream's time span",
                ));
            }
        }
    }

    let mut out = Vec::with_capacity(stream.len());
    let mut shift = 0.0f64;
    let mut j = 0usize;
    let mut prev_t = 0u64;
    for e in stream.events() {
        let t = e.t as f64;
        while j < plan.intervals.len() && t > plan.intervals[j].1 {
            let (a, b) = plan.intervals[j];
            let spec = &plan.specs[j];
            shift += (spec.family.kernel().duration_scale(spec.magnitude) - 1.0) * (b - a);
            j += 1;
        }
        let warped = if j < plan.intervals.len() && t >= plan.intervals[j].0 {
            let (a, b) = plan.intervals[j];
            let spec = &plan.specs[j];
            let kernel = spec.family.kernel();
            let d = b - a;
            let s = (t - a) / d;
            shift + a + kernel.duration_scale(spec.magnitude) * d * kernel.unit(spec.magnitude, s)
        } else {
            t + shift
        };
        // The continuous map is monotone and never drops below the span
        // start; rounding keeps both properties up to the clamp below.
        let rounded = warped.round().max(0.0) as u64;
        let t_new = rounded.max(prev_t);
        prev_t = t_new;
        out.push(crate::event::Event { t: t_new, ..*e });
    }
    Ok(EventStream::from_parts_unchecked(
        out,
        stream.sensor_width(),
        stream.sensor_height(),
    ))
}

/// Rescales the stream's timestamps so its span becomes `target_span`
/// microseconds, keeping the first timestamp fixed. Streams with fewer
/// than two distinct timestamps are returned unchanged.
pub fn rescale_duration(stream: &EventStream, target_span: u64) -> EventStream {
    let Some((t0, t1)) = stream.time_span() else {
        return stream.clone();
    };
    if t0 == t1 {
        return stream.clone();
    }
    let factor = target_span as f64 / (t1 - t0) as f64;
    let mut prev_t = 0u64;
    let events = stream
        .events()
        .iter()
        .map(|e| {
            let t = t0 as f64 + (e.t - t0) as f64 * factor;
            let t_new = (t.round().max(0.0) as u64).max(prev_t);
            prev_t = t_new;
            crate::event::Event { t: t_new, ..*e }
        })
        .collect();
    EventStream::from_parts_unchecked(events, stream.sensor_width(), stream.sensor_height())
}

/// Event count per time bin over the stream's own span; the 1-D density
/// used to observe a warp's effect.
pub fn density_profile(stream: &EventStream, t_bins: u32) -> Result<Vec<u64>> {
    if t_bins == 0 {
        return Err(Error::contract("t_bins must be positive"));
    }
    let mut hist = vec![0u64; t_bins as usize];
    let Some((t0, t1)) = stream.time_span() else {
        return Ok(hist);
    };
    for e in stream.events() {
        let b = quantize_time(e.t, t0, t1, t_bins)?;
        hist[b as usize] += 1;
    }
    Ok(hist)
}
