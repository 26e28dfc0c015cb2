//! The sample-adaptive weighting head: multi-head self-attention over the
//! two per-view semantic vectors, a final linear layer to one raw score
//! per (view, class), and a per-class softmax across the view axis.
//!
//! The backward pass is derived by hand and verified against central
//! finite differences by [`gradient_check`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FusionWeights, Logits, SemanticVector};
use crate::error::{Error, Result};

/// Central-difference step used by [`gradient_check`].
pub const GRAD_CHECK_STEP: f64 = 1e-5;

/// Attention weighting head. Parameters are immutable after construction;
/// forward and gradient evaluations are pure.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionHead {
    num_heads: usize,
    model_dim: usize,
    classes: usize,
    wq: Vec<f64>,
    bq: Vec<f64>,
    wk: Vec<f64>,
    bk: Vec<f64>,
    wv: Vec<f64>,
    bv: Vec<f64>,
    wo: Vec<f64>,
    bo: Vec<f64>,
    /// Final linear layer, `2·model_dim x 2·classes`, row-major.
    wf: Vec<f64>,
    bf: Vec<f64>,
}

impl AttentionHead {
    pub const DEFAULT_MODEL_DIM: usize = 512;
    pub const DEFAULT_NUM_HEADS: usize = 8;

    fn check_dims(model_dim: usize, classes: usize, num_heads: usize) -> Result<()> {
        if model_dim == 0 || num_heads == 0 {
            return Err(Error::contract("model_dim and num_heads must be positive"));
        }
        if classes < 2 {
            return Err(Error::contract("need at least two classes"));
        }
        if !model_dim.is_multiple_of(num_heads) {
            return Err(Error::contract(format!(
                "model_dim {model_dim} not divisible by {num_heads} heads"
            )));
        }
        Ok(())
    }

    /// All-zero parameters: attention emits zero tokens and the per-class
    /// softmax of equal scores yields 0.5 / 0.5 weights.
    pub fn zeros(model_dim: usize, classes: usize, num_heads: usize) -> Result<Self> {
        Self::check_dims(model_dim, classes, num_heads)?;
        Ok(Self {
            num_heads,
            model_dim,
            classes,
            wq: vec![0.0; model_dim * model_dim],
            bq: vec![0.0; model_dim],
            wk: vec![0.0; model_dim * model_dim],
            bk: vec![0.0; model_dim],
            wv: vec![0.0; model_dim * model_dim],
            bv: vec![0.0; model_dim],
            wo: vec![0.0; model_dim * model_dim],
            bo: vec![0.0; model_dim],
            wf: vec![0.0; 2 * model_dim * 2 * classes],
            bf: vec![0.0; 2 * classes],
        })
    }

    /// Seeded uniform initialization scaled by `1/sqrt(model_dim)`.
    pub fn random(model_dim: usize, classes: usize, num_heads: usize, seed: u64) -> Result<Self> {
        let mut head = Self::zeros(model_dim, classes, num_heads)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (model_dim as f64).sqrt();
        for slot in [
            &mut head.wq,
            &mut head.bq,
            &mut head.wk,
            &mut head.bk,
            &mut head.wv,
            &mut head.bv,
            &mut head.wo,
            &mut head.bo,
            &mut head.wf,
            &mut head.bf,
        ] {
            for v in slot.iter_mut() {
                *v = rng.random_range(-scale..scale);
            }
        }
        Ok(head)
    }

    pub fn model_dim(&self) -> usize {
        self.model_dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn num_heads(&self) -> usize {
        self.num_heads
    }

    pub fn param_count(&self) -> usize {
        4 * (self.model_dim * self.model_dim + self.model_dim)
            + 2 * self.model_dim * 2 * self.classes
            + 2 * self.classes
    }

    /// Every parameter in the documented order: wq, bq, wk, bk, wv, bv,
    /// wo, bo, wf, bf — each row-major.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for slot in [
            &self.wq, &self.bq, &self.wk, &self.bk, &self.wv, &self.bv, &self.wo, &self.bo,
            &self.wf, &self.bf,
        ] {
            out.extend_from_slice(slot);
        }
        out
    }

    /// Rebuilds a head from [`Self::flat_params`] output.
    pub fn from_flat_params(
        model_dim: usize,
        classes: usize,
        num_heads: usize,
        params: &[f64],
    ) -> Result<Self> {
        let mut head = Self::zeros(model_dim, classes, num_heads)?;
        if params.len() != head.param_count() {
            return Err(Error::contract(format!(
                "expected {} parameters, got {}",
                head.param_count(),
                params.len()
            )));
        }
        let mut offset = 0;
        for slot in [
            &mut head.wq,
            &mut head.bq,
            &mut head.wk,
            &mut head.bk,
            &mut head.wv,
            &mut head.bv,
            &mut head.wo,
            &mut head.bo,
            &mut head.wf,
            &mut head.bf,
        ] {
            let len = slot.len();
            slot.copy_from_slice(&params[offset..offset + len]);
            offset += len;
        }
        Ok(head)
    }

    /// Computes the per-class view weights for one (s_th, s_tw) pair.
    pub fn forward(&self, s_th: &SemanticVector, s_tw: &SemanticVector) -> Result<FusionWeights> {
        let trace = self.forward_traced(s_th, s_tw)?;
        FusionWeights::new(trace.w_th, trace.w_tw)
    }

    fn forward_traced(&self, s_th: &SemanticVector, s_tw: &SemanticVector) -> Result<Trace> {
        let d = self.model_dim;
        if s_th.values.len() != d || s_tw.values.len() != d {
            return Err(Error::contract(format!(
                "semantic vectors must have length {d}, got {} and {}",
                s_th.values.len(),
                s_tw.values.len()
            )));
        }
        let mut x = Vec::with_capacity(2 * d);
        x.extend_from_slice(&s_th.values);
        x.extend_from_slice(&s_tw.values);

        let q = linear_tokens(&x, &self.wq, &self.bq, d, d);
        let k = linear_tokens(&x, &self.wk, &self.bk, d, d);
        let v = linear_tokens(&x, &self.wv, &self.bv, d, d);

        let dk = d / self.num_heads;
        let inv_sqrt = 1.0 / (dk as f64).sqrt();
        let mut attn = vec![0.0; self.num_heads * 4];
        let mut hcat = vec![0.0; 2 * d];
        for h in 0..self.num_heads {
            let o = h * dk;
            // 2x2 score matrix for this head.
            let mut z = [0.0f64; 4];
            for i in 0..2 {
                for j in 0..2 {
                    let mut dot = 0.0;
                    for e in 0..dk {
                        dot += q[i * d + o + e] * k[j * d + o + e];
                    }
                    z[i * 2 + j] = dot * inv_sqrt;
                }
            }
            for i in 0..2 {
                let (a0, a1) = softmax2(z[i * 2], z[i * 2 + 1]);
                attn[h * 4 + i * 2] = a0;
                attn[h * 4 + i * 2 + 1] = a1;
                for e in 0..dk {
                    hcat[i * d + o + e] = a0 * v[o + e] + a1 * v[d + o + e];
                }
            }
        }

        // Output projection; the two projected tokens, flattened in order,
        // feed the final linear layer.
        let o_proj = linear_tokens(&hcat, &self.wo, &self.bo, d, d);
        let y = linear_row(&o_proj, &self.wf, &self.bf, 2 * d, 2 * self.classes);

        let c = self.classes;
        let mut w_th = vec![0.0; c];
        let mut w_tw = vec![0.0; c];
        for cls in 0..c {
            let (a, b) = softmax2(y[cls], y[c + cls]);
            w_th[cls] = a;
            w_tw[cls] = b;
        }
        if w_th.iter().chain(&w_tw).any(|v| !v.is_finite()) {
            return Err(Error::Numeric(
                "attention forward produced non-finite weights".into(),
            ));
        }
        Ok(Trace {
            x,
            q,
            k,
            v,
            attn,
            hcat,
            o_proj,
            w_th,
            w_tw,
        })
    }

    /// Backward pass from weight gradients to parameter and input
    /// gradients. `trace` must come from `forward_traced` on this head.
    fn backward(&self, trace: &Trace, d_w_th: &[f64], d_w_tw: &[f64]) -> Backward {
        let d = self.model_dim;
        let c = self.classes;
        let dk = d / self.num_heads;
        let inv_sqrt = 1.0 / (dk as f64).sqrt();

        // Per-class softmax over the two views.
        let mut dy = vec![0.0; 2 * c];
        for cls in 0..c {
            let p1 = trace.w_th[cls];
            let p2 = trace.w_tw[cls];
            let dot = d_w_th[cls] * p1 + d_w_tw[cls] * p2;
            dy[cls] = p1 * (d_w_th[cls] - dot);
            dy[c + cls] = p2 * (d_w_tw[cls] - dot);
        }

        // Final linear layer: y = u * wf + bf with u the flattened tokens.
        let u = &trace.o_proj;
        let mut dwf = vec![0.0; 2 * d * 2 * c];
        let mut du = vec![0.0; 2 * d];
        for m in 0..2 * d {
            let row = &self.wf[m * 2 * c..(m + 1) * 2 * c];
            let mut acc = 0.0;
            for kk in 0..2 * c {
                acc += dy[kk] * row[kk];
                dwf[m * 2 * c + kk] = u[m] * dy[kk];
            }
            du[m] = acc;
        }
        let dbf = dy;

        // Output projection: o = hcat * wo + bo (token-wise).
        let d_o = du;
        let mut dwo = vec![0.0; d * d];
        let mut dbo = vec![0.0; d];
        let mut dh = vec![0.0; 2 * d];
        for i in 0..2 {
            for m in 0..d {
                let mut acc = 0.0;
                for e in 0..d {
                    let g = d_o[i * d + e];
                    acc += g * self.wo[m * d + e];
                    dwo[m * d + e] += trace.hcat[i * d + m] * g;
                }
                dh[i * d + m] = acc;
            }
            for e in 0..d {
                dbo[e] += d_o[i * d + e];
            }
        }

        // Heads: hcat[i, o+e] = sum_j attn[i, j] * v[j, o+e].
        let mut dq = vec![0.0; 2 * d];
        let mut dkm = vec![0.0; 2 * d];
        let mut dv = vec![0.0; 2 * d];
        for h in 0..self.num_heads {
            let o = h * dk;
            let a = &trace.attn[h * 4..h * 4 + 4];
            let mut da = [0.0f64; 4];
            for i in 0..2 {
                for j in 0..2 {
                    let mut acc = 0.0;
                    for e in 0..dk {
                        acc += dh[i * d + o + e] * trace.v[j * d + o + e];
                        // dv accumulates below to keep one pass per pair.
                    }
                    da[i * 2 + j] = acc;
                }
            }
            for j in 0..2 {
                for e in 0..dk {
                    dv[j * d + o + e] += a[j] * dh[o + e] + a[2 + j] * dh[d + o + e];
                }
            }
            // Row softmax backward, then the scaled dot-product.
            for i in 0..2 {
                let (a0, a1) = (a[i * 2], a[i * 2 + 1]);
                let dot = da[i * 2] * a0 + da[i * 2 + 1] * a1;
                let dz = [a0 * (da[i * 2] - dot), a1 * (da[i * 2 + 1] - dot)];
                for j in 0..2 {
                    let g = dz[j] * inv_sqrt;
                    for e in 0..dk {
                        dq[i * d + o + e] += g * trace.k[j * d + o + e];
                        dkm[j * d + o + e] += g * trace.q[i * d + o + e];
                    }
                }
            }
        }

        // Input projections: q = x * wq + bq and likewise for k, v.
        let mut dx = vec![0.0; 2 * d];
        let (dwq, dbq) = linear_tokens_backward(&trace.x, &self.wq, &dq, d, d, &mut dx);
        let (dwk, dbk) = linear_tokens_backward(&trace.x, &self.wk, &dkm, d, d, &mut dx);
        let (dwv, dbv) = linear_tokens_backward(&trace.x, &self.wv, &dv, d, d, &mut dx);

        let mut params = Vec::with_capacity(self.param_count());
        for slot in [&dwq, &dbq, &dwk, &dbk, &dwv, &dbv, &dwo, &dbo, &dwf, &dbf] {
            params.extend_from_slice(slot);
        }
        Backward { params, dx }
    }
}

struct Trace {
    x: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// heads x 2 x 2 attention rows.
    attn: Vec<f64>,
    /// Concatenated head outputs, 2 tokens x model_dim.
    hcat: Vec<f64>,
    /// After the output projection; flattened, this is the final layer's
    /// input.
    o_proj: Vec<f64>,
    w_th: Vec<f64>,
    w_tw: Vec<f64>,
}

struct Backward {
    /// Parameter gradients in `flat_params` order.
    params: Vec<f64>,
    /// Gradient w.r.t. the two stacked input tokens.
    dx: Vec<f64>,
}

/// Gradients of a scalar loss through the sample-weighted fusion, for
/// every head parameter and every input.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionGradients {
    /// In [`AttentionHead::flat_params`] order.
    pub head_params: Vec<f64>,
    pub s_th: Vec<f64>,
    pub s_tw: Vec<f64>,
    pub l_th: Vec<f64>,
    pub l_tw: Vec<f64>,
}

/// Analytic backward pass of `loss(fuse_sample_weighted(...))`.
pub fn fusion_backward(
    head: &AttentionHead,
    s_th: &SemanticVector,
    s_tw: &SemanticVector,
    l_th: &Logits,
    l_tw: &Logits,
    loss: &dyn ScalarLoss,
) -> Result<FusionGradients> {
    let c = head.classes();
    if l_th.values.len() != c || l_tw.values.len() != c {
        return Err(Error::contract(format!(
            "logit vectors must have length {c}"
        )));
    }
    let trace = head.forward_traced(s_th, s_tw)?;
    let fused: Vec<f64> = l_th
        .values
        .iter()
        .zip(&l_tw.values)
        .zip(trace.w_th.iter().zip(&trace.w_tw))
        .map(|((a, b), (wa, wb))| wa * a + wb * b)
        .collect();
    let g = loss.grad(&fused);
    let d_w_th: Vec<f64> = g.iter().zip(&l_th.values).map(|(g, l)| g * l).collect();
    let d_w_tw: Vec<f64> = g.iter().zip(&l_tw.values).map(|(g, l)| g * l).collect();
    let back = head.backward(&trace, &d_w_th, &d_w_tw);
    let d = head.model_dim();
    Ok(FusionGradients {
        head_params: back.params,
        s_th: back.dx[..d].to_vec(),
        s_tw: back.dx[d..].to_vec(),
        l_th: g.iter().zip(&trace.w_th).map(|(g, w)| g * w).collect(),
        l_tw: g.iter().zip(&trace.w_tw).map(|(g, w)| g * w).collect(),
    })
}

fn softmax2(a: f64, b: f64) -> (f64, f64) {
    let m = a.max(b);
    let ea = (a - m).exp();
    let eb = (b - m).exp();
    let z = ea + eb;
    (ea / z, eb / z)
}

/// y[i, k] = b[k] + sum_m x[i, m] * w[m, k] for two tokens.
fn linear_tokens(x: &[f64], w: &[f64], b: &[f64], d_in: usize, d_out: usize) -> Vec<f64> {
    let mut out = vec![0.0; 2 * d_out];
    for i in 0..2 {
        let row = linear_row(&x[i * d_in..(i + 1) * d_in], w, b, d_in, d_out);
        out[i * d_out..(i + 1) * d_out].copy_from_slice(&row);
    }
    out
}

fn linear_row(x: &[f64], w: &[f64], b: &[f64], d_in: usize, d_out: usize) -> Vec<f64> {
    let mut out = b.to_vec();
    for (m, &xv) in x.iter().enumerate().take(d_in) {
        let row = &w[m * d_out..(m + 1) * d_out];
        for (o, &wv) in row.iter().enumerate() {
            out[o] += xv * wv;
        }
    }
    out
}

/// Backward of `linear_tokens`: returns (dW, db) and accumulates dX.
fn linear_tokens_backward(
    x: &[f64],
    w: &[f64],
    dy: &[f64],
    d_in: usize,
    d_out: usize,
    dx: &mut [f64],
) -> (Vec<f64>, Vec<f64>) {
    let mut dw = vec![0.0; d_in * d_out];
    let mut db = vec![0.0; d_out];
    for i in 0..2 {
        for m in 0..d_in {
            let xv = x[i * d_in + m];
            let mut acc = 0.0;
            for o in 0..d_out {
                let g = dy[i * d_out + o];
                dw[m * d_out + o] += xv * g;
                acc += g * w[m * d_out + o];
            }
            dx[i * d_in + m] += acc;
        }
        for o in 0..d_out {
            db[o] += dy[i * d_out + o];
        }
    }
    (dw, db)
}

/// A differentiable scalar objective over fused logits, supplying its own
/// analytic gradient.
pub trait ScalarLoss {
    fn value(&self, fused: &[f64]) -> f64;
    fn grad(&self, fused: &[f64]) -> Vec<f64>;
}

/// `sum_c coeff[c] * fused[c]`.
pub struct WeightedSumLoss(pub Vec<f64>);

impl ScalarLoss for WeightedSumLoss {
    fn value(&self, fused: &[f64]) -> f64 {
        fused.iter().zip(&self.0).map(|(f, c)| f * c).sum()
    }

    fn grad(&self, fused: &[f64]) -> Vec<f64> {
        assert_eq!(fused.len(), self.0.len());
        self.0.clone()
    }
}

/// Picks out one fused logit.
pub struct LogitLoss(pub usize);

impl ScalarLoss for LogitLoss {
    fn value(&self, fused: &[f64]) -> f64 {
        fused[self.0]
    }

    fn grad(&self, fused: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; fused.len()];
        g[self.0] = 1.0;
        g
    }
}

/// Outcome of one analytic-vs-numeric gradient comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    /// Worst `|analytic - numeric| / max(1, |analytic|, |numeric|)` over
    /// every head parameter.
    pub max_rel_error: f64,
    pub params_checked: usize,
}

fn fused_through(
    head: &AttentionHead,
    s_th: &SemanticVector,
    s_tw: &SemanticVector,
    l_th: &Logits,
    l_tw: &Logits,
) -> Result<Vec<f64>> {
    let weights = head.forward(s_th, s_tw)?;
    Ok(l_th
        .values
        .iter()
        .zip(&l_tw.values)
        .zip(weights.w_th.iter().zip(&weights.w_tw))
        .map(|((a, b), (wa, wb))| wa * a + wb * b)
        .collect())
}

/// Differentiates `loss(fuse_sample_weighted(...))` with respect to every
/// head parameter twice — once analytically through the hand-derived
/// backward pass, once with central differences of step
/// [`GRAD_CHECK_STEP`] — and reports the worst relative disagreement.
pub fn gradient_check(
    head: &AttentionHead,
    s_th: &SemanticVector,
    s_tw: &SemanticVector,
    l_th: &Logits,
    l_tw: &Logits,
    loss: &dyn ScalarLoss,
) -> Result<GradCheckReport> {
    let c = head.classes();
    if l_th.values.len() != c || l_tw.values.len() != c {
        return Err(Error::contract(format!(
            "logit vectors must have length {c}"
        )));
    }

    // Analytic path.
    let analytic = fusion_backward(head, s_th, s_tw, l_th, l_tw, loss)?.head_params;

    // Numeric path.
    let base = head.flat_params();
    let mut max_rel = 0.0f64;
    let mut params = base.clone();
    for i in 0..base.len() {
        params[i] = base[i] + GRAD_CHECK_STEP;
        let plus = AttentionHead::from_flat_params(head.model_dim(), c, head.num_heads(), &params)?;
        let f_plus = loss.value(&fused_through(&plus, s_th, s_tw, l_th, l_tw)?);
        params[i] = base[i] - GRAD_CHECK_STEP;
        let minus =
            AttentionHead::from_flat_params(head.model_dim(), c, head.num_heads(), &params)?;
        let f_minus = loss.value(&fused_through(&minus, s_th, s_tw, l_th, l_tw)?);
        params[i] = base[i];

        let numeric = (f_plus - f_minus) / (2.0 * GRAD_CHECK_STEP);
        let a = analytic[i];
        let rel = (a - numeric).abs() / 1.0f64.max(a.abs()).max(numeric.abs());
        max_rel = max_rel.max(rel);
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        params_checked: base.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::ViewAxis;

    fn sem(values: Vec<f64>, view: ViewAxis) -> SemanticVector {
        SemanticVector::for_view(values, view).unwrap()
    }

    fn seeded_inputs(
        d: usize,
        c: usize,
        seed: u64,
    ) -> (SemanticVector, SemanticVector, Logits, Logits) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vals =
            |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let s_th = sem(vals(d), ViewAxis::TimeHeight);
        let s_tw = sem(vals(d), ViewAxis::TimeWidth);
        let l_th = Logits::for_view(vals(c), ViewAxis::TimeHeight).unwrap();
        let l_tw = Logits::for_view(vals(c), ViewAxis::TimeWidth).unwrap();
        (s_th, s_tw, l_th, l_tw)
    }

    #[test]
    fn zero_head_yields_even_weights() {
        let head = AttentionHead::zeros(16, 5, 2).unwrap();
        let (s_th, s_tw, _, _) = seeded_inputs(16, 5, 3);
        let w = head.forward(&s_th, &s_tw).unwrap();
        assert!(w.w_th.iter().all(|&v| v == 0.5));
        assert!(w.w_tw.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn weights_normalize_per_class() {
        for seed in 0..20 {
            let head = AttentionHead::random(16, 5, 2, seed).unwrap();
            let (s_th, s_tw, _, _) = seeded_inputs(16, 5, seed + 100);
            let w = head.forward(&s_th, &s_tw).unwrap();
            for c in 0..5 {
                let sum = w.w_th[c] + w.w_tw[c];
                assert!((sum - 1.0).abs() < 1e-12);
                assert!((0.0..=1.0).contains(&w.w_th[c]));
            }
        }
    }

    #[test]
    fn dims_are_validated() {
        assert!(AttentionHead::zeros(15, 5, 2).is_err());
        assert!(AttentionHead::zeros(16, 1, 2).is_err());
        assert!(AttentionHead::zeros(0, 5, 1).is_err());
        let head = AttentionHead::zeros(16, 5, 2).unwrap();
        let (s_th, _, _, _) = seeded_inputs(16, 5, 0);
        let short = sem(vec![0.0; 8], ViewAxis::TimeWidth);
        assert!(head.forward(&s_th, &short).is_err());
    }

    #[test]
    fn flat_params_round_trip() {
        let head = AttentionHead::random(16, 5, 2, 9).unwrap();
        let flat = head.flat_params();
        assert_eq!(flat.len(), head.param_count());
        let rebuilt = AttentionHead::from_flat_params(16, 5, 2, &flat).unwrap();
        assert_eq!(rebuilt, head);
        assert!(AttentionHead::from_flat_params(16, 5, 2, &flat[1..]).is_err());
    }

    #[test]
    fn gradient_check_zero_head() {
        let head = AttentionHead::zeros(16, 5, 2).unwrap();
        let (s_th, s_tw, l_th, l_tw) = seeded_inputs(16, 5, 17);
        let loss = WeightedSumLoss(vec![0.3, -1.0, 0.7, 0.2, -0.4]);
        let report = gradient_check(&head, &s_th, &s_tw, &l_th, &l_tw, &loss).unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
        assert_eq!(report.params_checked, head.param_count());
    }

    #[test]
    fn gradient_check_random_head() {
        let head = AttentionHead::random(16, 5, 2, 5).unwrap();
        let (s_th, s_tw, l_th, l_tw) = seeded_inputs(16, 5, 23);
        let loss = LogitLoss(2);
        let report = gradient_check(&head, &s_th, &s_tw, &l_th, &l_tw, &loss).unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }

    #[test]
    fn single_head_matches_multi_head_param_count() {
        // Head count reshapes the attention but not the parameter layout.
        let a = AttentionHead::zeros(16, 5, 1).unwrap();
        let b = AttentionHead::zeros(16, 5, 4).unwrap();
        assert_eq!(a.param_count(), b.param_count());
    }

    #[test]
    fn input_gradients_match_finite_differences() {
        let head = AttentionHead::random(8, 3, 2, 41).unwrap();
        let (s_th, s_tw, l_th, l_tw) = seeded_inputs(8, 3, 59);
        let loss = WeightedSumLoss(vec![1.0, -0.5, 2.0]);
        let grads = fusion_backward(&head, &s_th, &s_tw, &l_th, &l_tw, &loss).unwrap();

        let eval = |s_th: &SemanticVector, s_tw: &SemanticVector, l_th: &Logits, l_tw: &Logits| {
            loss.value(&fused_through(&head, s_th, s_tw, l_th, l_tw).unwrap())
        };
        let h = GRAD_CHECK_STEP;
        for i in 0..8 {
            let mut plus = s_th.clone();
            let mut minus = s_th.clone();
            plus.values[i] += h;
            minus.values[i] -= h;
            let fd =
                (eval(&plus, &s_tw, &l_th, &l_tw) - eval(&minus, &s_tw, &l_th, &l_tw)) / (2.0 * h);
            assert!((grads.s_th[i] - fd).abs() < 1e-6, "s_th[{i}]");
        }
        for i in 0..3 {
            let mut plus = l_tw.clone();
            let mut minus = l_tw.clone();
            plus.values[i] += h;
            minus.values[i] -= h;
            let fd =
                (eval(&s_th, &s_tw, &l_th, &plus) - eval(&s_th, &s_tw, &l_th, &minus)) / (2.0 * h);
            assert!((grads.l_tw[i] - fd).abs() < 1e-6, "l_tw[{i}]");
        }
    }

    #[test]
    fn forced_th_weights_kill_tw_logit_gradients() {
        // With per-class weights pinned to (1, 0), the fused logits do not
        // depend on the tw logits at all.
        use crate::fusion::{fuse_class_weighted, FusionWeights};
        let w = FusionWeights::new(vec![1.0, 1.0, 1.0], vec![0.0, 0.0, 0.0]).unwrap();
        let l_th = Logits::for_view(vec![0.4, -1.0, 2.0], ViewAxis::TimeHeight).unwrap();
        let base = Logits::for_view(vec![5.0, 6.0, 7.0], ViewAxis::TimeWidth).unwrap();
        let fused = fuse_class_weighted(&l_th, &base, &w).unwrap();
        for i in 0..3 {
            let mut bumped = base.clone();
            bumped.values[i] += 123.0;
            let fused_b = fuse_class_weighted(&l_th, &bumped, &w).unwrap();
            assert_eq!(fused.values[0], fused_b.values[0]);
            assert_eq!(fused.values, fused_b.values);
        }
    }
}
