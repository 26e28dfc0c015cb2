//! Event-camera stream processing: dense translation-invariant multi-view
//! maps, monotone temporal warping augmentation, and dynamic cross-view
//! logit fusion.
//!
//! The pipeline runs sparse `(x, y, t, p)` events through three stages:
//!
//! * [`encode`] projects a stream onto 2-D views through (window,
//!   measurement, aggregation) channel specs; the invariant spec set
//!   yields maps unaffected by in-bounds shifts along a view's
//!   marginalized axis.
//! * [`warp`] retimes random timestamp intervals through monotone unit
//!   kernels, modulating local event density without reordering.
//! * [`fusion`] combines per-view logits, optionally weighting them per
//!   sample from attention over the views' pooled features.
//!
//! All operations are pure and deterministic given explicit seeds.

pub mod encode;
mod error;
pub mod event;
pub mod fusion;
pub mod io;
pub mod synth;
pub mod warp;

pub use error::{Error, Result};
