//! A deterministic stand-in feature branch: global average pooling per map
//! channel, then two affine layers with a tanh between them. The first
//! layer's activations are the branch's semantic vector, the second
//! layer's outputs its class logits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Logits, SemanticVector};
use crate::encode::DenseMap;
use crate::error::{Error, Result};
use crate::event::ViewAxis;

#[derive(Debug, Clone, PartialEq)]
pub struct ToyBranch {
    view: ViewAxis,
    in_channels: usize,
    model_dim: usize,
    classes: usize,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

impl ToyBranch {
    fn check_dims(in_channels: usize, model_dim: usize, classes: usize) -> Result<()> {
        if in_channels == 0 || model_dim == 0 {
            return Err(Error::contract(
                "branch needs positive channel and feature dims",
            ));
        }
        if classes < 2 {
            return Err(Error::contract("need at least two classes"));
        }
        Ok(())
    }

    pub fn zeros(
        view: ViewAxis,
        in_channels: usize,
        model_dim: usize,
        classes: usize,
    ) -> Result<Self> {
        Self::check_dims(in_channels, model_dim, classes)?;
        Ok(Self {
            view,
            in_channels,
            model_dim,
            classes,
            w1: vec![0.0; in_channels * model_dim],
            b1: vec![0.0; model_dim],
            w2: vec![0.0; model_dim * classes],
            b2: vec![0.0; classes],
        })
    }

    pub fn random(
        view: ViewAxis,
        in_channels: usize,
        model_dim: usize,
        classes: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut branch = Self::zeros(view, in_channels, model_dim, classes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for slot in [
            &mut branch.w1,
            &mut branch.b1,
            &mut branch.w2,
            &mut branch.b2,
        ] {
            for v in slot.iter_mut() {
                *v = rng.random_range(-0.5..0.5);
            }
        }
        Ok(branch)
    }

    pub fn view(&self) -> ViewAxis {
        self.view
    }

    pub fn model_dim(&self) -> usize {
        self.model_dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Pools the map and runs the two affine layers, returning the
    /// semantic vector and the class logits for this branch's view.
    pub fn forward(&self, map: &DenseMap) -> Result<(SemanticVector, Logits)> {
        if map.channels() != self.in_channels {
            return Err(Error::contract(format!(
                "branch expects {} channels, map has {}",
                self.in_channels,
                map.channels()
            )));
        }
        let cell_count = (map.rows() * map.cols()) as f64;
        let pooled: Vec<f64> = (0..map.channels())
            .map(|c| map.channel(c).iter().sum::<f64>() / cell_count)
            .collect();

        let mut semantic = self.b1.clone();
        for (m, &x) in pooled.iter().enumerate() {
            for (o, s) in semantic.iter_mut().enumerate() {
                *s += x * self.w1[m * self.model_dim + o];
            }
        }
        for s in semantic.iter_mut() {
            *s = s.tanh();
        }

        let mut logits = self.b2.clone();
        for (m, &x) in semantic.iter().enumerate() {
            for (o, l) in logits.iter_mut().enumerate() {
                *l += x * self.w2[m * self.classes + o];
            }
        }

        Ok((
            SemanticVector::for_view(semantic, self.view)?,
            Logits::for_view(logits, self.view)?,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_map_yields_bias_only_outputs() {
        let branch = ToyBranch::random(ViewAxis::TimeHeight, 2, 8, 3, 1).unwrap();
        let map = DenseMap::zeros(2, 4, 4);
        let (s, l) = branch.forward(&map).unwrap();
        // tanh(b1) then the second affine of that; recompute directly.
        let expect_s: Vec<f64> = branch.b1.iter().map(|v| v.tanh()).collect();
        assert_eq!(s.values, expect_s);
        assert_eq!(l.values.len(), 3);
        assert_eq!(l.view, Some(ViewAxis::TimeHeight));
    }

    #[test]
    fn forward_is_deterministic() {
        let branch = ToyBranch::random(ViewAxis::TimeWidth, 2, 8, 3, 7).unwrap();
        let mut map = DenseMap::zeros(2, 3, 3);
        let _ = &mut map;
        let a = branch.forward(&map).unwrap();
        let b = branch.forward(&map).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn channel_mismatch_is_an_error() {
        let branch = ToyBranch::zeros(ViewAxis::TimeHeight, 2, 8, 3).unwrap();
        assert!(branch.forward(&DenseMap::zeros(3, 4, 4)).is_err());
    }
}
