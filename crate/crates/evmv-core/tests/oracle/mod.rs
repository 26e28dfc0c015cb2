//! Brute-force reference implementations, deliberately independent of the
//! library's fast paths: the encoder scans every event once per map cell,
//! and the attention oracle evaluates the head from its flat parameter
//! array with plain nested loops. These are the source of expected values
//! for the equivalence suites.

// Each integration-test target compiles this module separately and uses a
// subset of it.
#![allow(dead_code)]

use evmv_core::encode::{AggregationFn, ConversionSpec, DenseMap, MeasurementFn, WindowFn};
use evmv_core::event::{Event, EventStream, ViewAxis};
use evmv_core::fusion::{AttentionHead, FusionWeights, SemanticVector};

/// Literal floor((t - t0) * bins / (span + 1)) in wide integers.
fn time_bin(t: u64, t0: u64, t1: u64, bins: u32) -> usize {
    if t1 == t0 {
        return 0;
    }
    ((t - t0) as u128 * bins as u128 / ((t1 - t0) as u128 + 1)) as usize
}

fn orthogonal(view: ViewAxis, e: &Event) -> u64 {
    match view {
        ViewAxis::TimeHeight => u64::from(e.x),
        ViewAxis::TimeWidth => u64::from(e.y),
        ViewAxis::HeightWidth => e.t,
    }
}

fn measure(spec: MeasurementFn, view: ViewAxis, e: &Event) -> Option<f64> {
    match spec {
        MeasurementFn::ZCoord => Some(orthogonal(view, e) as f64),
        MeasurementFn::ZCoordPos => (e.p > 0).then(|| orthogonal(view, e) as f64),
        MeasurementFn::ZCoordNeg => (e.p < 0).then(|| orthogonal(view, e) as f64),
        MeasurementFn::Polarity => Some(f64::from(e.p)),
        MeasurementFn::Count => Some(1.0),
        MeasurementFn::CountPos => (e.p > 0).then_some(1.0),
        MeasurementFn::CountNeg => (e.p < 0).then_some(1.0),
    }
}

fn aggregate(agg: AggregationFn, values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    match agg {
        AggregationFn::Sum => values.iter().sum(),
        AggregationFn::Max => values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        AggregationFn::Min => values.iter().cloned().fold(f64::INFINITY, f64::min),
        AggregationFn::Mean => values.iter().sum::<f64>() / values.len() as f64,
        AggregationFn::Variance => {
            // Textbook two-pass population variance.
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
        }
    }
}

/// O(cells x events) reference encoder with the same contract as
/// `encode_channel`. Callers pass configurations the fast path accepts.
pub fn oracle_encode(
    stream: &EventStream,
    view: ViewAxis,
    spec: &ConversionSpec,
    t_bins: u32,
) -> DenseMap {
    let (rows, cols) = match view {
        ViewAxis::TimeHeight => (t_bins as usize, stream.sensor_height() as usize),
        ViewAxis::TimeWidth => (t_bins as usize, stream.sensor_width() as usize),
        ViewAxis::HeightWidth => (
            stream.sensor_height() as usize,
            stream.sensor_width() as usize,
        ),
    };
    let win_channels = match spec.window {
        WindowFn::Global => 1usize,
        WindowFn::Binned(k) => k as usize,
    };
    let span = stream.time_span();
    let mut data = Vec::with_capacity(win_channels * rows * cols);
    for win in 0..win_channels {
        for u in 0..rows {
            for v in 0..cols {
                let mut values = Vec::new();
                for e in stream.events() {
                    let (t0, t1) = span.unwrap();
                    let in_window = match spec.window {
                        WindowFn::Global => true,
                        WindowFn::Binned(k) => {
                            let bin = match view {
                                ViewAxis::TimeHeight => {
                                    e.x as usize * k as usize / stream.sensor_width() as usize
                                }
                                ViewAxis::TimeWidth => {
                                    e.y as usize * k as usize / stream.sensor_height() as usize
                                }
                                ViewAxis::HeightWidth => time_bin(e.t, t0, t1, k),
                            };
                            bin == win
                        }
                    };
                    if !in_window {
                        continue;
                    }
                    let (eu, ev) = match view {
                        ViewAxis::TimeHeight => (time_bin(e.t, t0, t1, t_bins), e.y as usize),
                        ViewAxis::TimeWidth => (time_bin(e.t, t0, t1, t_bins), e.x as usize),
                        ViewAxis::HeightWidth => (e.y as usize, e.x as usize),
                    };
                    if (eu, ev) != (u, v) {
                        continue;
                    }
                    if let Some(m) = measure(spec.measurement, view, e) {
                        values.push(m);
                    }
                }
                data.push(aggregate(spec.aggregation, &values));
            }
        }
    }
    DenseMap::from_data(win_channels, rows, cols, data).unwrap()
}

fn slice<'a>(params: &'a [f64], offset: &mut usize, len: usize) -> &'a [f64] {
    let out = &params[*offset..*offset + len];
    *offset += len;
    out
}

fn softmax(row: &[f64]) -> Vec<f64> {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Naive dense evaluation of the weighting head straight from its flat
/// parameter array.
pub fn oracle_attention(
    head: &AttentionHead,
    s_th: &SemanticVector,
    s_tw: &SemanticVector,
) -> FusionWeights {
    let d = head.model_dim();
    let c = head.classes();
    let heads = head.num_heads();
    let dk = d / heads;
    let params = head.flat_params();
    let mut off = 0usize;
    let wq = slice(&params, &mut off, d * d);
    let bq = slice(&params, &mut off, d);
    let wk = slice(&params, &mut off, d * d);
    let bk = slice(&params, &mut off, d);
    let wv = slice(&params, &mut off, d * d);
    let bv = slice(&params, &mut off, d);
    let wo = slice(&params, &mut off, d * d);
    let bo = slice(&params, &mut off, d);
    let wf = slice(&params, &mut off, 2 * d * 2 * c);
    let bf = slice(&params, &mut off, 2 * c);
    assert_eq!(off, params.len());

    let x = [s_th.values.clone(), s_tw.values.clone()];
    let project = |w: &[f64], b: &[f64]| -> Vec<Vec<f64>> {
        (0..2)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        let mut acc = b[j];
                        for m in 0..d {
                            acc += x[i][m] * w[m * d + j];
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    };
    let q = project(wq, bq);
    let k = project(wk, bk);
    let v = project(wv, bv);

    let mut concat = vec![vec![0.0f64; d]; 2];
    for h in 0..heads {
        let o = h * dk;
        for i in 0..2 {
            let mut scores = vec![0.0f64; 2];
            for (j, score) in scores.iter_mut().enumerate() {
                let mut dot = 0.0;
                for e in 0..dk {
                    dot += q[i][o + e] * k[j][o + e];
                }
                *score = dot / (dk as f64).sqrt();
            }
            let attn = softmax(&scores);
            for e in 0..dk {
                concat[i][o + e] = attn[0] * v[0][o + e] + attn[1] * v[1][o + e];
            }
        }
    }

    let mut tokens = vec![vec![0.0f64; d]; 2];
    for i in 0..2 {
        for j in 0..d {
            let mut acc = bo[j];
            for m in 0..d {
                acc += concat[i][m] * wo[m * d + j];
            }
            tokens[i][j] = acc;
        }
    }

    let mut u = Vec::with_capacity(2 * d);
    u.extend_from_slice(&tokens[0]);
    u.extend_from_slice(&tokens[1]);
    let mut y = bf.to_vec();
    for (m, &uv) in u.iter().enumerate() {
        for (kk, yv) in y.iter_mut().enumerate() {
            *yv += uv * wf[m * 2 * c + kk];
        }
    }

    let mut w_th = vec![0.0; c];
    let mut w_tw = vec![0.0; c];
    for cls in 0..c {
        let pair = softmax(&[y[cls], y[c + cls]]);
        w_th[cls] = pair[0];
        w_tw[cls] = pair[1];
    }
    FusionWeights::new(w_th, w_tw).unwrap()
}

/// Seeded random stream for equivalence tests: events sorted by time,
/// mixed polarity, coordinates anywhere on the sensor.
pub fn random_stream(
    rng: &mut impl rand::Rng,
    max_events: usize,
    width: u16,
    height: u16,
    max_t: u64,
) -> EventStream {
    let n = rng.random_range(0..=max_events);
    let mut events: Vec<Event> = (0..n)
        .map(|_| Event {
            t: rng.random_range(0..=max_t),
            x: rng.random_range(0..width),
            y: rng.random_range(0..height),
            p: if rng.random_bool(0.5) { 1 } else { -1 },
        })
        .collect();
    events.sort_by_key(|e| e.t);
    EventStream::new(events, width, height).unwrap()
}

/// Random stream whose orthogonal-axis coordinates keep `margin` pixels of
/// slack on both ends, so shifts up to `margin` stay in bounds.
pub fn random_stream_with_margin(
    rng: &mut impl rand::Rng,
    max_events: usize,
    width: u16,
    height: u16,
    margin: u16,
    max_t: u64,
) -> EventStream {
    let n = rng.random_range(1..=max_events.max(1));
    let mut events: Vec<Event> = (0..n)
        .map(|_| Event {
            t: rng.random_range(0..=max_t),
            x: rng.random_range(margin..width - margin),
            y: rng.random_range(margin..height - margin),
            p: if rng.random_bool(0.5) { 1 } else { -1 },
        })
        .collect();
    events.sort_by_key(|e| e.t);
    EventStream::new(events, width, height).unwrap()
}
