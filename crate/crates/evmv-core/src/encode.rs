//! Sparse-to-dense view encoding.
//!
//! An encoder channel is described by a [`ConversionSpec`]: a window
//! function selecting events, a measurement mapping each selected event to
//! a scalar, and an aggregation reducing the scalars that land in the same
//! map cell. The encoder itself is a single scatter-accumulate pass over
//! the (time-sorted) event sequence; per event it advances a time-bin
//! cursor and updates one accumulator cell, so there is no per-event
//! division. A literal per-cell scan oracle lives in the test tree.

use crate::error::{Error, Result};
use crate::event::{in_bounds_after_shift, shift_along_axis, Event, EventStream, ViewAxis};

/// Absolute tolerance for comparing variance-aggregated channels.
/// Integer-valued channels (count/polarity under sum/max/min) compare
/// exactly.
pub const VARIANCE_TOLERANCE: f64 = 1e-9;

/// Window stage: which events a channel sees, as a partition of the view's
/// orthogonal axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WindowFn {
    /// One bin-less window covering the full axis.
    Global,
    /// `num_bins` equal, contiguous, non-overlapping intervals of the axis;
    /// produces one channel per bin.
    Binned(u32),
}

impl WindowFn {
    pub fn channel_count(self) -> usize {
        match self {
            WindowFn::Global => 1,
            WindowFn::Binned(k) => k as usize,
        }
    }
}

/// Measurement stage: the scalar taken from each event. `..Pos` / `..Neg`
/// variants restrict the channel to one polarity, the others see every
/// event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeasurementFn {
    /// The orthogonal coordinate of the event.
    ZCoord,
    ZCoordPos,
    ZCoordNeg,
    /// Signed polarity, -1 or +1.
    Polarity,
    /// Constant 1.
    Count,
    CountPos,
    CountNeg,
}

/// Aggregation stage, applied per map cell over the measured values.
/// Cells that receive no events hold 0 for every aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggregationFn {
    Max,
    Min,
    Sum,
    Mean,
    /// Population variance (divide by n), accumulated with Welford updates.
    Variance,
}

/// One encoder channel family: (window, measurement, aggregation).
/// A `Global` window yields one channel, `Binned(k)` yields `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConversionSpec {
    pub window: WindowFn,
    pub measurement: MeasurementFn,
    pub aggregation: AggregationFn,
}

impl ConversionSpec {
    pub const fn new(
        window: WindowFn,
        measurement: MeasurementFn,
        aggregation: AggregationFn,
    ) -> Self {
        Self {
            window,
            measurement,
            aggregation,
        }
    }

    pub fn channel_count(&self) -> usize {
        self.window.channel_count()
    }

    /// True when every cell of the encoded channel is an exact integer, so
    /// comparisons may demand bit equality.
    pub fn is_integer_valued(&self) -> bool {
        matches!(
            self.measurement,
            MeasurementFn::Count
                | MeasurementFn::CountPos
                | MeasurementFn::CountNeg
                | MeasurementFn::Polarity
        ) && matches!(
            self.aggregation,
            AggregationFn::Sum | AggregationFn::Max | AggregationFn::Min
        )
    }

    /// Comparison tolerance used by the invariance harness.
    pub fn comparison_tolerance(&self) -> f64 {
        if self.is_integer_valued() {
            0.0
        } else {
            VARIANCE_TOLERANCE
        }
    }

    /// Parses `window/measurement/aggregation`, e.g. `global/count/sum` or
    /// `binned2/z+/var`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('/').collect();
        if parts.len() != 3 {
            return Err(Error::config(format!(
                "spec `{s}` must have the form window/measurement/aggregation"
            )));
        }
        let window = parse_window(parts[0])
            .ok_or_else(|| Error::config(format!("unknown window `{}`", parts[0])))?;
        let measurement = parse_measurement(parts[1])
            .ok_or_else(|| Error::config(format!("unknown measurement `{}`", parts[1])))?;
        let aggregation = parse_aggregation(parts[2])
            .ok_or_else(|| Error::config(format!("unknown aggregation `{}`", parts[2])))?;
        Ok(Self::new(window, measurement, aggregation))
    }
}

fn parse_window(s: &str) -> Option<WindowFn> {
    let s = s.to_ascii_lowercase();
    if s == "global" {
        return Some(WindowFn::Global);
    }
    let k: u32 = s.strip_prefix("binned")?.parse().ok()?;
    (k >= 1).then_some(WindowFn::Binned(k))
}

fn parse_measurement(s: &str) -> Option<MeasurementFn> {
    match s.to_ascii_lowercase().as_str() {
        "z" | "zcoord" => Some(MeasurementFn::ZCoord),
        "z+" | "zpos" => Some(MeasurementFn::ZCoordPos),
        "z-" | "zneg" => Some(MeasurementFn::ZCoordNeg),
        "p" | "polarity" => Some(MeasurementFn::Polarity),
        "c" | "count" => Some(MeasurementFn::Count),
        "c+" | "count+" | "countpos" => Some(MeasurementFn::CountPos),
        "c-" | "count-" | "countneg" => Some(MeasurementFn::CountNeg),
        _ => None,
    }
}

fn parse_aggregation(s: &str) -> Option<AggregationFn> {
    match s.to_ascii_lowercase().as_str() {
        "max" => Some(AggregationFn::Max),
        "min" => Some(AggregationFn::Min),
        "sum" => Some(AggregationFn::Sum),
        "mean" => Some(AggregationFn::Mean),
        "var" | "variance" => Some(AggregationFn::Variance),
        _ => None,
    }
}

impl std::fmt::Display for ConversionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.window {
            WindowFn::Global => write!(f, "global/")?,
            WindowFn::Binned(k) => write!(f, "binned{k}/")?,
        }
        let m = match self.measurement {
            MeasurementFn::ZCoord => "z",
            MeasurementFn::ZCoordPos => "z+",
            MeasurementFn::ZCoordNeg => "z-",
            MeasurementFn::Polarity => "polarity",
            MeasurementFn::Count => "count",
            MeasurementFn::CountPos => "count+",
            MeasurementFn::CountNeg => "count-",
        };
        let a = match self.aggregation {
            AggregationFn::Max => "max",
            AggregationFn::Min => "min",
            AggregationFn::Sum => "sum",
            AggregationFn::Mean => "mean",
            AggregationFn::Variance => "var",
        };
        write!(f, "{m}/{a}")
    }
}

/// The seven translation-invariant channel families: count and polarity
/// sums under the global window, plus variance of the orthogonal coordinate
/// (full and per polarity).
pub fn invariant_spec_set() -> Vec<ConversionSpec> {
    use AggregationFn::*;
    use MeasurementFn::*;
    use WindowFn::Global;
    vec![
        ConversionSpec::new(Global, Polarity, Sum),
        ConversionSpec::new(Global, Count, Sum),
        ConversionSpec::new(Global, CountPos, Sum),
        ConversionSpec::new(Global, CountNeg, Sum),
        ConversionSpec::new(Global, ZCoord, Variance),
        ConversionSpec::new(Global, ZCoordPos, Variance),
        ConversionSpec::new(Global, ZCoordNeg, Variance),
    ]
}

/// The compact two-channel encoder: count sum first, polarity sum second.
pub fn compact_spec_set() -> Vec<ConversionSpec> {
    vec![
        ConversionSpec::new(WindowFn::Global, MeasurementFn::Count, AggregationFn::Sum),
        ConversionSpec::new(
            WindowFn::Global,
            MeasurementFn::Polarity,
            AggregationFn::Sum,
        ),
    ]
}

/// Resolves a command-line spec selector: `compact`, `invariant`, or a
/// comma-separated list of `window/measurement/aggregation` entries.
pub fn parse_spec_selector(s: &str) -> Result<Vec<ConversionSpec>> {
    match s.to_ascii_lowercase().as_str() {
        "compact" => return Ok(compact_spec_set()),
        "invariant" => return Ok(invariant_spec_set()),
        _ => {}
    }
    let specs: Vec<ConversionSpec> = s
        .split(',')
        .map(|part| ConversionSpec::parse(part.trim()))
        .collect::<Result<_>>()?;
    if specs.is_empty() {
        return Err(Error::config("empty spec list"));
    }
    Ok(specs)
}

/// A full view encoder: which projection, which channel families, and the
/// time-axis resolution of the map.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub view: ViewAxis,
    pub specs: Vec<ConversionSpec>,
    pub t_bins: u32,
}

impl EncoderConfig {
    pub fn new(view: ViewAxis, specs: Vec<ConversionSpec>, t_bins: u32) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::config("encoder needs at least one conversion spec"));
        }
        if t_bins == 0 {
            return Err(Error::config("t_bins must be positive"));
        }
        Ok(Self {
            view,
            specs,
            t_bins,
        })
    }

    /// The compact count+polarity encoder at the given time resolution.
    pub fn compact(view: ViewAxis, t_bins: u32) -> Result<Self> {
        Self::new(view, compact_spec_set(), t_bins)
    }

    pub fn total_channels(&self) -> usize {
        self.specs.iter().map(ConversionSpec::channel_count).sum()
    }
}

/// A dense `channels x rows x cols` map of 64-bit reals, stored row-major,
/// channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMap {
    channels: usize,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMap {
    pub fn zeros(channels: usize, rows: usize, cols: usize) -> Self {
        Self {
            channels,
            rows,
            cols,
            data: vec![0.0; channels * rows * cols],
        }
    }

    /// Builds a map from raw parts, validating the payload length.
    pub fn from_data(channels: usize, rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * rows * cols {
            return Err(Error::contract(format!(
                "payload holds {} values, expected {}x{}x{}",
                data.len(),
                channels,
                rows,
                cols
            )));
        }
        Ok(Self {
            channels,
            rows,
            cols,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, c: usize, u: usize, v: usize) -> f64 {
        self.data[(c * self.rows + u) * self.cols + v]
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.rows * self.cols;
        &self.data[c * n..(c + 1) * n]
    }

    /// Concatenates along the channel axis. Panics if cell shapes differ;
    /// callers encode every channel at the same view resolution.
    fn append_channels(&mut self, other: DenseMap) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.channels += other.channels;
        self.data.extend(other.data);
    }

    /// Largest absolute cell difference, or an error on shape mismatch.
    pub fn max_abs_diff(&self, other: &DenseMap) -> Result<f64> {
        if (self.channels, self.rows, self.cols) != (other.channels, other.rows, other.cols) {
            return Err(Error::contract(format!(
                "map shapes differ: {}x{}x{} vs {}x{}x{}",
                self.channels, self.rows, self.cols, other.channels, other.rows, other.cols
            )));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// Map shape for a view: time-height is `t_bins x H`, time-width is
/// `t_bins x W`, height-width is `H x W`.
pub fn map_dims(view: ViewAxis, t_bins: u32, width: u16, height: u16) -> (usize, usize) {
    match view {
        ViewAxis::TimeHeight => (t_bins as usize, height as usize),
        ViewAxis::TimeWidth => (t_bins as usize, width as usize),
        ViewAxis::HeightWidth => (height as usize, width as usize),
    }
}

/// Maps a timestamp inside `[t_start, t_end]` to a bin index in
/// `[0, t_bins)`: `floor((t - t_start) * t_bins / (t_end - t_start + 1))`.
/// The +1 in the denominator lets `t_end` land in the last bin without a
/// special case; a single-instant range maps to bin 0.
pub fn quantize_time(t: u64, t_start: u64, t_end: u64, t_bins: u32) -> Result<u32> {
    if t_bins == 0 {
        return Err(Error::contract("t_bins must be positive"));
    }
    if t < t_start || t > t_end {
        return Err(Error::contract(format!(
            "timestamp {t} outside [{t_start}, {t_end}]"
        )));
    }
    if t_end == t_start {
        return Ok(0);
    }
    let dt = (t - t_start) as u128;
    let denom = (t_end - t_start) as u128 + 1;
    Ok((dt * t_bins as u128 / denom) as u32)
}

/// Smallest timestamps opening each quantization bin: an event belongs to
/// bin `b` iff `boundary[b] <= t < boundary[b + 1]`. Entry `bins` may
/// saturate; callers never index past the last real bin.
fn bin_boundaries(t_start: u64, t_end: u64, bins: u32) -> Vec<u64> {
    let denom = (t_end - t_start) as u128 + 1;
    (0..=bins)
        .map(|b| {
            let offset = (b as u128 * denom).div_ceil(bins as u128);
            u64::try_from(t_start as u128 + offset).unwrap_or(u64::MAX)
        })
        .collect()
}

pub mod accum {
    //! Per-cell accumulation strategies, one per aggregation function.
    //! Each is a tiny state machine: feed values with `push`, combine
    //! partial states with `merge`, and read the cell value with `finish`
    //! (0 for a cell that saw no events).

    pub trait Accumulator: Copy + Default {
        fn push(&mut self, v: f64);
        fn merge(self, other: Self) -> Self;
        fn finish(self) -> f64;
    }

    #[derive(Clone, Copy, Default)]
    pub struct SumAcc(f64);

    impl Accumulator for SumAcc {
        #[inline]
        fn push(&mut self, v: f64) {
            self.0 += v;
        }

        fn merge(self, other: Self) -> Self {
            SumAcc(self.0 + other.0)
        }

        fn finish(self) -> f64 {
            self.0
        }
    }

    #[derive(Clone, Copy, Default)]
    pub struct MaxAcc {
        v: f64,
        any: bool,
    }

    impl Accumulator for MaxAcc {
        #[inline]
        fn push(&mut self, v: f64) {
            self.v = if self.any { self.v.max(v) } else { v };
            self.any = true;
        }

        fn merge(self, other: Self) -> Self {
            match (self.any, other.any) {
                (true, true) => MaxAcc {
                    v: self.v.max(other.v),
                    any: true,
                },
                (true, false) => self,
                _ => other,
            }
        }

        fn finish(self) -> f64 {
            if self.any {
                self.v
            } else {
                0.0
            }
        }
    }

    #[derive(Clone, Copy, Default)]
    pub struct MinAcc {
        v: f64,
        any: bool,
    }

    impl Accumulator for MinAcc {
        #[inline]
        fn push(&mut self, v: f64) {
            self.v = if self.any { self.v.min(v) } else { v };
            self.any = true;
        }

        fn merge(self, other: Self) -> Self {
            match (self.any, other.any) {
                (true, true) => MinAcc {
                    v: self.v.min(other.v),
                    any: true,
                },
                (true, false) => self,
                _ => other,
            }
        }

        fn finish(self) -> f64 {
            if self.any {
                self.v
            } else {
                0.0
            }
        }
    }

    #[derive(Clone, Copy, Default)]
    pub struct MeanAcc {
        sum: f64,
        n: u64,
    }

    impl Accumulator for MeanAcc {
        #[inline]
        fn push(&mut self, v: f64) {
            self.sum += v;
            self.n += 1;
        }

        fn merge(self, other: Self) -> Self {
            MeanAcc {
                sum: self.sum + other.sum,
                n: self.n + other.n,
            }
        }

        fn finish(self) -> f64 {
            if self.n == 0 {
                0.0
            } else {
                self.sum / self.n as f64
            }
        }
    }

    /// Single-pass population variance (Welford). `merge` uses the pairwise
    /// combining formula so partitioned accumulation stays stable.
    #[derive(Clone, Copy, Default)]
    pub struct VarianceAcc {
        n: u64,
        mean: f64,
        m2: f64,
    }

    impl Accumulator for VarianceAcc {
        #[inline]
        fn push(&mut self, v: f64) {
            self.n += 1;
            let delta = v - self.mean;
            self.mean += delta / self.n as f64;
            self.m2 += delta * (v - self.mean);
        }

        fn merge(self, other: Self) -> Self {
            if self.n == 0 {
                return other;
            }
            if other.n == 0 {
                return self;
            }
            let n = self.n + other.n;
            let delta = other.mean - self.mean;
            let mean = self.mean + delta * (other.n as f64 / n as f64);
            let m2 =
                self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64 / n as f64);
            VarianceAcc { n, mean, m2 }
        }

        fn finish(self) -> f64 {
            if self.n == 0 {
                0.0
            } else {
                self.m2 / self.n as f64
            }
        }
    }
}

use accum::{Accumulator, MaxAcc, MeanAcc, MinAcc, SumAcc, VarianceAcc};

/// Precomputed per-event routing for one (stream, view, window, t_bins)
/// combination: map shape, window-channel count, time-bin boundaries, and
/// the spatial window lookup table.
struct Router {
    rows: usize,
    cols: usize,
    win_channels: usize,
    /// Time-bin boundaries; rows for TH/TW maps, window bins for HW.
    time_bounds: Vec<u64>,
    time_bin_count: u32,
    /// Orthogonal-coordinate -> window bin for spatial windows.
    spatial_lut: Vec<u32>,
}

impl Router {
    fn build(
        stream: &EventStream,
        view: ViewAxis,
        window: WindowFn,
        t_bins: u32,
    ) -> Result<Option<Self>> {
        if t_bins == 0 {
            return Err(Error::contract("t_bins must be positive"));
        }
        let (rows, cols) = map_dims(view, t_bins, stream.sensor_width(), stream.sensor_height());
        let win_channels = window.channel_count();
        if let WindowFn::Binned(k) = window {
            if k == 0 {
                return Err(Error::config("binned window needs at least one bin"));
            }
            // Spatial extents are known even for empty streams; the
            // temporal extent is the stream's span, checked further down.
            if let Some(bound) = view.spatial_bound(stream) {
                if u64::from(k) > bound {
                    return Err(Error::config(format!(
                        "binned window with {k} bins exceeds axis extent {bound}"
                    )));
                }
            }
        }
        let Some((t0, t1)) = stream.time_span() else {
            return Ok(None);
        };

        let mut spatial_lut = Vec::new();
        let mut time_bounds = Vec::new();
        let mut time_bin_count = 0u32;
        match view {
            ViewAxis::TimeHeight | ViewAxis::TimeWidth => {
                time_bounds = bin_boundaries(t0, t1, t_bins);
                time_bin_count = t_bins;
                if let WindowFn::Binned(k) = window {
                    let bound = view.spatial_bound(stream).unwrap();
                    spatial_lut = (0..bound)
                        .map(|z| (z as u128 * k as u128 / bound as u128) as u32)
                        .collect();
                }
            }
            ViewAxis::HeightWidth => {
                if let WindowFn::Binned(k) = window {
                    let extent = t1 - t0 + 1;
                    if u64::from(k) > extent {
                        return Err(Error::config(format!(
                            "binned window with {k} bins exceeds time extent {extent}"
                        )));
                    }
                    time_bounds = bin_boundaries(t0, t1, k);
                    time_bin_count = k;
                }
            }
        }
        Ok(Some(Self {
            rows,
            cols,
            win_channels,
            time_bounds,
            time_bin_count,
            spatial_lut,
        }))
    }
}

fn scatter<A: Accumulator>(
    stream: &EventStream,
    view: ViewAxis,
    window: WindowFn,
    t_bins: u32,
    measure: impl Fn(&Event) -> Option<f64>,
) -> Result<DenseMap> {
    let (rows, cols) = map_dims(view, t_bins, stream.sensor_width(), stream.sensor_height());
    let router = match Router::build(stream, view, window, t_bins)? {
        Some(r) => r,
        None => return Ok(DenseMap::zeros(window.channel_count(), rows, cols)),
    };
    let cell_count = router.rows * router.cols;
    let mut grid = vec![A::default(); router.win_channels * cell_count];

    let mut tb = 0usize;
    for e in stream.events() {
        // Timestamps are non-decreasing, so the time-bin cursor only moves
        // forward; no per-event division.
        while (tb as u32) + 1 < router.time_bin_count && e.t >= router.time_bounds[tb + 1] {
            tb += 1;
        }
        let (win, row, col) = match view {
            ViewAxis::TimeHeight => {
                let win = match window {
                    WindowFn::Global => 0,
                    WindowFn::Binned(_) => router.spatial_lut[e.x as usize] as usize,
                };
                (win, tb, e.y as usize)
            }
            ViewAxis::TimeWidth => {
                let win = match window {
                    WindowFn::Global => 0,
                    WindowFn::Binned(_) => router.spatial_lut[e.y as usize] as usize,
                };
                (win, tb, e.x as usize)
            }
            ViewAxis::HeightWidth => {
                let win = match window {
                    WindowFn::Global => 0,
                    WindowFn::Binned(_) => tb,
                };
                (win, e.y as usize, e.x as usize)
            }
        };
        if let Some(v) = measure(e) {
            grid[win * cell_count + row * router.cols + col].push(v);
        }
    }

    let data = grid.into_iter().map(Accumulator::finish).collect();
    DenseMap::from_data(router.win_channels, router.rows, router.cols, data)
}

#[inline]
fn z_value(view: ViewAxis, e: &Event) -> f64 {
    view.orthogonal_coord(e) as f64
}

fn scatter_measured<A: Accumulator>(
    stream: &EventStream,
    view: ViewAxis,
    spec: &ConversionSpec,
    t_bins: u32,
) -> Result<DenseMap> {
    let w = spec.window;
    match spec.measurement {
        MeasurementFn::ZCoord => scatter::<A>(stream, view, w, t_bins, |e| Some(z_value(view, e))),
        MeasurementFn::ZCoordPos => scatter::<A>(stream, view, w, t_bins, |e| {
            (e.p > 0).then(|| z_value(view, e))
        }),
        MeasurementFn::ZCoordNeg => scatter::<A>(stream, view, w, t_bins, |e| {
            (e.p < 0).then(|| z_value(view, e))
        }),
        MeasurementFn::Polarity => scatter::<A>(stream, view, w, t_bins, |e| Some(f64::from(e.p))),
        MeasurementFn::Count => scatter::<A>(stream, view, w, t_bins, |_| Some(1.0)),
        MeasurementFn::CountPos => {
            scatter::<A>(stream, view, w, t_bins, |e| (e.p > 0).then_some(1.0))
        }
        MeasurementFn::CountNeg => {
            scatter::<A>(stream, view, w, t_bins, |e| (e.p < 0).then_some(1.0))
        }
    }
}

/// Encodes one conversion spec into a dense map with one channel per
/// window bin. Cells receiving no events hold 0.
pub fn encode_channel(
    stream: &EventStream,
    view: ViewAxis,
    spec: &ConversionSpec,
    t_bins: u32,
) -> Result<DenseMap> {
    match spec.aggregation {
        AggregationFn::Sum => scatter_measured::<SumAcc>(stream, view, spec, t_bins),
        AggregationFn::Max => scatter_measured::<MaxAcc>(stream, view, spec, t_bins),
        AggregationFn::Min => scatter_measured::<MinAcc>(stream, view, spec, t_bins),
        AggregationFn::Mean => scatter_measured::<MeanAcc>(stream, view, spec, t_bins),
        AggregationFn::Variance => scatter_measured::<VarianceAcc>(stream, view, spec, t_bins),
    }
}

/// Encodes every spec of the config and concatenates the channels in spec
/// order. The compact config yields exactly two channels.
pub fn encode_view(stream: &EventStream, config: &EncoderConfig) -> Result<DenseMap> {
    let mut iter = config.specs.iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::config("encoder needs at least one conversion spec"))?;
    let mut map = encode_channel(stream, config.view, first, config.t_bins)?;
    for spec in iter {
        let next = encode_channel(stream, config.view, spec, config.t_bins)?;
        map.append_channels(next);
    }
    Ok(map)
}

/// Outcome of an empirical translation-invariance check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvarianceReport {
    /// True iff every evaluated shift reproduced the unshifted map within
    /// the channel spec's comparison tolerance.
    pub invariant: bool,
    /// Worst cell difference observed across evaluated shifts.
    pub max_abs_deviation: f64,
    /// Number of deltas that passed the in-bounds guard and were encoded.
    pub deltas_evaluated: usize,
}

/// Encodes the stream and every in-bounds shifted copy of it, comparing
/// maps cell by cell. Deltas that would clip events are skipped. Integer
/// channels must match exactly, variance channels within
/// [`VARIANCE_TOLERANCE`].
pub fn check_invariance(
    stream: &EventStream,
    view: ViewAxis,
    spec: &ConversionSpec,
    deltas: &[i64],
    t_bins: u32,
) -> Result<InvarianceReport> {
    if deltas.is_empty() {
        return Err(Error::contract("invariance check needs at least one delta"));
    }
    let base = encode_channel(stream, view, spec, t_bins)?;
    let tolerance = spec.comparison_tolerance();
    let mut max_dev = 0.0f64;
    let mut evaluated = 0usize;
    let mut invariant = true;
    for &delta in deltas {
        if !in_bounds_after_shift(stream, view, delta)? {
            continue;
        }
        let shifted = shift_along_axis(stream, view, delta)?;
        let map = encode_channel(&shifted, view, spec, t_bins)?;
        let dev = base.max_abs_diff(&map)?;
        max_dev = max_dev.max(dev);
        if dev > tolerance {
            invariant = false;
        }
        evaluated += 1;
    }
    Ok(InvarianceReport {
        invariant,
        max_abs_deviation: max_dev,
        deltas_evaluated: evaluated,
    })
}
