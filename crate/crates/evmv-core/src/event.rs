//! Sparse event model: events, streams, view geometry, and the
//! shift/clip transform used by the translation-robustness protocol.

use crate::error::{Error, Result};

/// One sensor event. Timestamps are microseconds; polarity is -1 or +1,
/// never 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    /// Timestamp in microseconds.
    pub t: u64,
    /// Pixel column, `0 <= x < sensor_width`.
    pub x: u16,
    /// Pixel row, `0 <= y < sensor_height`.
    pub y: u16,
    /// Polarity, +1 (brightness increase) or -1 (decrease).
    pub p: i8,
}

/// An ordered event sequence with its sensor geometry.
///
/// Timestamps are non-decreasing (real sensors emit simultaneous events at
/// distinct pixels). Empty streams are legal everywhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    events: Vec<Event>,
    sensor_width: u16,
    sensor_height: u16,
}

impl EventStream {
    /// Validates every stream invariant: coordinate bounds, polarity in
    /// {-1, +1}, and non-decreasing timestamps.
    pub fn new(events: Vec<Event>, sensor_width: u16, sensor_height: u16) -> Result<Self> {
        if sensor_width == 0 || sensor_height == 0 {
            return Err(Error::contract("sensor dimensions must be positive"));
        }
        let mut prev_t = 0u64;
        for (i, e) in events.iter().enumerate() {
            if e.x >= sensor_width || e.y >= sensor_height {
                return Err(Error::contract(format!(
                    "event {i} at ({}, {}) outside {}x{} sensor",
                    e.x, e.y, sensor_width, sensor_height
                )));
            }
            if e.p != 1 && e.p != -1 {
                return Err(Error::contract(format!(
                    "event {i} has polarity {}, expected -1 or +1",
                    e.p
                )));
            }
            if e.t < prev_t {
                return Err(Error::contract(format!(
                    "event {i} timestamp {} decreases below {}",
                    e.t, prev_t
                )));
            }
            prev_t = e.t;
        }
        Ok(Self {
            events,
            sensor_width,
            sensor_height,
        })
    }

    /// Constructor for internal transforms that preserve the invariants by
    /// construction.
    pub(crate) fn from_parts_unchecked(
        events: Vec<Event>,
        sensor_width: u16,
        sensor_height: u16,
    ) -> Self {
        debug_assert!(events.windows(2).all(|w| w[0].t <= w[1].t));
        Self {
            events,
            sensor_width,
            sensor_height,
        }
    }

    pub fn empty(sensor_width: u16, sensor_height: u16) -> Self {
        Self {
            events: Vec::new(),
            sensor_width,
            sensor_height,
        }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn sensor_width(&self) -> u16 {
        self.sensor_width
    }

    pub fn sensor_height(&self) -> u16 {
        self.sensor_height
    }

    /// First and last timestamp, or `None` for an empty stream.
    pub fn time_span(&self) -> Option<(u64, u64)> {
        match (self.events.first(), self.events.last()) {
            (Some(a), Some(b)) => Some((a.t, b.t)),
            _ => None,
        }
    }
}

/// One of the three 2-D projections of the H-W-T event volume.
///
/// Each view marginalizes exactly one coordinate, its *orthogonal axis*:
/// `x` for time-height, `y` for time-width, `t` for height-width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViewAxis {
    /// Map axes (time, y); orthogonal axis x.
    TimeHeight,
    /// Map axes (time, x); orthogonal axis y.
    TimeWidth,
    /// Map axes (y, x); orthogonal axis t.
    HeightWidth,
}

impl ViewAxis {
    pub const ALL: [ViewAxis; 3] = [
        ViewAxis::TimeHeight,
        ViewAxis::TimeWidth,
        ViewAxis::HeightWidth,
    ];

    /// Short lowercase name used on the command line and in reports.
    pub fn name(self) -> &'static str {
        match self {
            ViewAxis::TimeHeight => "th",
            ViewAxis::TimeWidth => "tw",
            ViewAxis::HeightWidth => "hw",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "th" => Some(ViewAxis::TimeHeight),
            "tw" => Some(ViewAxis::TimeWidth),
            "hw" => Some(ViewAxis::HeightWidth),
            _ => None,
        }
    }

    /// The marginalized coordinate of `e` for this view.
    pub fn orthogonal_coord(self, e: &Event) -> u64 {
        match self {
            ViewAxis::TimeHeight => u64::from(e.x),
            ViewAxis::TimeWidth => u64::from(e.y),
            ViewAxis::HeightWidth => e.t,
        }
    }

    /// Extent of the orthogonal axis for spatial views; `None` for the
    /// height-width view, whose orthogonal axis (time) is unbounded.
    pub fn spatial_bound(self, stream: &EventStream) -> Option<u64> {
        match self {
            ViewAxis::TimeHeight => Some(u64::from(stream.sensor_width())),
            ViewAxis::TimeWidth => Some(u64::from(stream.sensor_height())),
            ViewAxis::HeightWidth => None,
        }
    }
}

impl std::fmt::Display for ViewAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn require_spatial(view: ViewAxis) -> Result<()> {
    if view == ViewAxis::HeightWidth {
        return Err(Error::contract(
            "shift along the time axis is an augmentation concern, not a spatial shift",
        ));
    }
    Ok(())
}

/// Shifts every event's orthogonal coordinate by `delta` and drops events
/// whose shifted coordinate leaves `[0, bound)`. Clipping is the defined
/// behavior, not an error; order and all other fields are preserved.
pub fn shift_along_axis(stream: &EventStream, view: ViewAxis, delta: i64) -> Result<EventStream> {
    require_spatial(view)?;
    let bound = view.spatial_bound(stream).unwrap() as i64;
    let shifted = stream
        .events()
        .iter()
        .filter_map(|e| {
            let z = view.orthogonal_coord(e) as i64 + delta;
            if z < 0 || z >= bound {
                return None;
            }
            let mut out = *e;
            match view {
                ViewAxis::TimeHeight => out.x = z as u16,
                ViewAxis::TimeWidth => out.y = z as u16,
                ViewAxis::HeightWidth => unreachable!(),
            }
            Some(out)
        })
        .collect();
    Ok(EventStream::from_parts_unchecked(
        shifted,
        stream.sensor_width(),
        stream.sensor_height(),
    ))
}

/// True iff `shift_along_axis` with the same arguments would remove no
/// events. Vacuously true for empty streams. Used as the guard in the
/// invariance harness.
pub fn in_bounds_after_shift(stream: &EventStream, view: ViewAxis, delta: i64) -> Result<bool> {
    require_spatial(view)?;
    if stream.is_empty() {
        return Ok(true);
    }
    let bound = view.spatial_bound(stream).unwrap() as i64;
    let mut min_z = i64::MAX;
    let mut max_z = i64::MIN;
    for e in stream.events() {
        let z = view.orthogonal_coord(e) as i64;
        min_z = min_z.min(z);
        max_z = max_z.max(z);
    }
    Ok(min_z + delta >= 0 && max_z + delta < bound)
}
