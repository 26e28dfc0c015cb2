//! Cross-view logit fusion.
//!
//! Two feature branches produce per-view logits and semantic vectors; a
//! fusion strategy combines the logits into one prediction. The four
//! strategies form a refinement chain — plain averaging, two learned view
//! scalars, per-class weights, and sample-adaptive weights from the
//! attention head — and collapse to the same output at their neutral
//! parameters. Strategies implement a common trait and are selected by
//! registry name.

mod attention;
mod branch;

pub use attention::{
    fusion_backward, gradient_check, AttentionHead, FusionGradients, GradCheckReport, LogitLoss,
    ScalarLoss, WeightedSumLoss, GRAD_CHECK_STEP,
};
pub use branch::ToyBranch;

use crate::encode::{encode_view, EncoderConfig};
use crate::error::{Error, Result};
use crate::event::{EventStream, ViewAxis};

/// Pre-softmax class scores. `view` records which projection produced
/// them; fused outputs carry `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits {
    pub values: Vec<f64>,
    pub view: Option<ViewAxis>,
}

impl Logits {
    pub fn for_view(values: Vec<f64>, view: ViewAxis) -> Result<Self> {
        Self::validated(values, Some(view))
    }

    pub fn fused(values: Vec<f64>) -> Result<Self> {
        Self::validated(values, None)
    }

    fn validated(values: Vec<f64>, view: Option<ViewAxis>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::contract("logits need at least two classes"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite logit".into()));
        }
        Ok(Self { values, view })
    }

    pub fn classes(&self) -> usize {
        self.values.len()
    }
}

/// A globally pooled pre-head feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticVector {
    pub values: Vec<f64>,
    pub view: Option<ViewAxis>,
}

impl SemanticVector {
    pub fn for_view(values: Vec<f64>, view: ViewAxis) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite semantic feature".into()));
        }
        Ok(Self {
            values,
            view: Some(view),
        })
    }
}

/// Normalized per-class view weights: `w_th[c] + w_tw[c] = 1` with both
/// halves in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights {
    pub w_th: Vec<f64>,
    pub w_tw: Vec<f64>,
}

impl FusionWeights {
    pub fn new(w_th: Vec<f64>, w_tw: Vec<f64>) -> Result<Self> {
        if w_th.len() != w_tw.len() || w_th.is_empty() {
            return Err(Error::contract("weight halves must have equal length"));
        }
        for (a, b) in w_th.iter().zip(&w_tw) {
            if !(0.0..=1.0).contains(a) || !(0.0..=1.0).contains(b) {
                return Err(Error::contract(format!(
                    "weights ({a}, {b}) outside [0, 1]"
                )));
            }
            if (a + b - 1.0).abs() > 1e-9 {
                return Err(Error::contract(format!(
                    "weights ({a}, {b}) do not sum to 1"
                )));
            }
        }
        Ok(Self { w_th, w_tw })
    }

    /// 0.5 / 0.5 for every class.
    pub fn uniform(classes: usize) -> Result<Self> {
        Self::new(vec![0.5; classes], vec![0.5; classes])
    }

    pub fn classes(&self) -> usize {
        self.w_th.len()
    }
}

fn check_matching_classes(l_th: &Logits, l_tw: &Logits) -> Result<usize> {
    if l_th.classes() != l_tw.classes() {
        return Err(Error::contract(format!(
            "class counts differ: {} vs {}",
            l_th.classes(),
            l_tw.classes()
        )));
    }
    Ok(l_th.classes())
}

/// Element-wise mean of the two logit vectors.
pub fn fuse_average(l_th: &Logits, l_tw: &Logits) -> Result<Logits> {
    check_matching_classes(l_th, l_tw)?;
    let values = l_th
        .values
        .iter()
        .zip(&l_tw.values)
        .map(|(a, b)| (a + b) / 2.0)
        .collect();
    Logits::fused(values)
}

/// `a * l_th + b * l_tw` with two sample-independent scalars.
pub fn fuse_view_weighted(l_th: &Logits, l_tw: &Logits, a: f64, b: f64) -> Result<Logits> {
    check_matching_classes(l_th, l_tw)?;
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::contract("view weights must be finite"));
    }
    let values = l_th
        .values
        .iter()
        .zip(&l_tw.values)
        .map(|(x, y)| a * x + b * y)
        .collect();
    Logits::fused(values)
}

/// Per-class Hadamard combination `w_th ⊙ l_th + w_tw ⊙ l_tw`.
pub fn fuse_class_weighted(l_th: &Logits, l_tw: &Logits, w: &FusionWeights) -> Result<Logits> {
    let c = check_matching_classes(l_th, l_tw)?;
    if w.classes() != c {
        return Err(Error::contract(format!(
            "weights cover {} classes, logits have {c}",
            w.classes()
        )));
    }
    let values = l_th
        .values
        .iter()
        .zip(&l_tw.values)
        .zip(w.w_th.iter().zip(&w.w_tw))
        .map(|((x, y), (wa, wb))| wa * x + wb * y)
        .collect();
    Logits::fused(values)
}

/// Computes sample-specific weights from the semantic vectors, then
/// applies the per-class combination.
pub fn fuse_sample_weighted(
    l_th: &Logits,
    l_tw: &Logits,
    s_th: &SemanticVector,
    s_tw: &SemanticVector,
    head: &AttentionHead,
) -> Result<Logits> {
    let c = check_matching_classes(l_th, l_tw)?;
    if head.classes() != c {
        return Err(Error::contract(format!(
            "head emits {} classes, logits have {c}",
            head.classes()
        )));
    }
    let weights = attention_forward(head, s_th, s_tw)?;
    fuse_class_weighted(l_th, l_tw, &weights)
}

/// Runs the attention weighting head over the 2-token semantic sequence.
pub fn attention_forward(
    head: &AttentionHead,
    s_th: &SemanticVector,
    s_tw: &SemanticVector,
) -> Result<FusionWeights> {
    head.forward(s_th, s_tw)
}

/// Everything a fusion strategy may consume. Semantic vectors are only
/// required by the sample-adaptive strategy.
#[derive(Debug, Clone, Copy)]
pub struct FusionInputs<'a> {
    pub l_th: &'a Logits,
    pub l_tw: &'a Logits,
    pub s_th: Option<&'a SemanticVector>,
    pub s_tw: Option<&'a SemanticVector>,
}

impl<'a> FusionInputs<'a> {
    pub fn logits_only(l_th: &'a Logits, l_tw: &'a Logits) -> Self {
        Self {
            l_th,
            l_tw,
            s_th: None,
            s_tw: None,
        }
    }
}

/// A late-fusion rule over per-view logits, selectable by name.
pub trait FusionStrategy {
    fn name(&self) -> &'static str;
    fn fuse(&self, inputs: &FusionInputs) -> Result<Logits>;
}

/// Plain logit averaging.
pub struct AverageFusion;

impl FusionStrategy for AverageFusion {
    fn name(&self) -> &'static str {
        "average"
    }

    fn fuse(&self, inputs: &FusionInputs) -> Result<Logits> {
        fuse_average(inputs.l_th, inputs.l_tw)
    }
}

/// Two learned scalars, one per view.
pub struct ViewWeightedFusion {
    pub a: f64,
    pub b: f64,
}

impl FusionStrategy for ViewWeightedFusion {
    fn name(&self) -> &'static str {
        "view-weighted"
    }

    fn fuse(&self, inputs: &FusionInputs) -> Result<Logits> {
        fuse_view_weighted(inputs.l_th, inputs.l_tw, self.a, self.b)
    }
}

/// Per-class weights, fixed across samples.
pub struct ClassWeightedFusion {
    pub weights: FusionWeights,
}

impl FusionStrategy for ClassWeightedFusion {
    fn name(&self) -> &'static str {
        "class-weighted"
    }

    fn fuse(&self, inputs: &FusionInputs) -> Result<Logits> {
        fuse_class_weighted(inputs.l_th, inputs.l_tw, &self.weights)
    }
}

/// Sample-adaptive weights from the attention head; needs the semantic
/// vectors.
pub struct SampleWeightedFusion {
    pub head: AttentionHead,
}

impl FusionStrategy for SampleWeightedFusion {
    fn name(&self) -> &'static str {
        "sample-weighted"
    }

    fn fuse(&self, inputs: &FusionInputs) -> Result<Logits> {
        let (s_th, s_tw) = match (inputs.s_th, inputs.s_tw) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::contract(
                    "sample-weighted fusion needs both semantic vectors",
                ))
            }
        };
        fuse_sample_weighted(inputs.l_th, inputs.l_tw, s_th, s_tw, &self.head)
    }
}

/// Registry names in refinement order.
pub const STRATEGY_NAMES: [&str; 4] = [
    "average",
    "view-weighted",
    "class-weighted",
    "sample-weighted",
];

/// Builds a strategy by registry name at neutral parameters: equal view
/// scalars, uniform class weights, or the supplied attention head for the
/// sample-adaptive rule. Short aliases `la`, `vw`, `cw`, `sw` are
/// accepted.
pub fn strategy_by_name(
    name: &str,
    classes: usize,
    head: Option<AttentionHead>,
) -> Result<Box<dyn FusionStrategy>> {
    match name.to_ascii_lowercase().as_str() {
        "average" | "la" => Ok(Box::new(AverageFusion)),
        "view-weighted" | "vw" => Ok(Box::new(ViewWeightedFusion { a: 0.5, b: 0.5 })),
        "class-weighted" | "cw" => Ok(Box::new(ClassWeightedFusion {
            weights: FusionWeights::uniform(classes)?,
        })),
        "sample-weighted" | "sw" => {
            let head = head
                .ok_or_else(|| Error::contract("sample-weighted fusion needs an attention head"))?;
            Ok(Box::new(SampleWeightedFusion { head }))
        }
        other => Err(Error::config(format!(
            "unknown fusion strategy `{other}`; known: {}",
            STRATEGY_NAMES.join(", ")
        ))),
    }
}

/// End-to-end forward pass: encode both temporal views, run each branch,
/// and fuse with sample-adaptive weights.
pub fn pipeline_forward(
    stream: &EventStream,
    branch_th: &ToyBranch,
    branch_tw: &ToyBranch,
    head: &AttentionHead,
    config_th: &EncoderConfig,
    config_tw: &EncoderConfig,
) -> Result<Logits> {
    if config_th.view != ViewAxis::TimeHeight || config_tw.view != ViewAxis::TimeWidth {
        return Err(Error::contract(
            "pipeline configs must target the th and tw views",
        ));
    }
    let map_th = encode_view(stream, config_th)?;
    let map_tw = encode_view(stream, config_tw)?;
    let (s_th, l_th) = branch_th.forward(&map_th)?;
    let (s_tw, l_tw) = branch_tw.forward(&map_tw)?;
    fuse_sample_weighted(&l_th, &l_tw, &s_th, &s_tw, head)
}
