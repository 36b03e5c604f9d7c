//! Two-layer perceptron used as a building block by the flow coupling
//! subnet, the VAE encoders/decoder, and the rule-task encoder.

use crate::error::Result;
use crate::rng::Rng;
use crate::tape::{Tape, ValueId};
use crate::tensor::Tensor;

/// `in_dim -> hidden (tanh) -> out_dim` perceptron. With `hidden == 0` it
/// degenerates to a single linear layer.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
    hidden: usize,
}

/// Tape handles for one registration of the parameters.
#[derive(Debug, Clone, Copy)]
pub struct MlpIds {
    pub w1: ValueId,
    pub b1: ValueId,
    pub w2: ValueId,
    pub b2: ValueId,
}

impl Mlp {
    /// Xavier-style random init scaled by 1/sqrt(fan_in).
    pub fn new(in_dim: usize, hidden: usize, out_dim: usize, rng: &mut Rng) -> Self {
        if hidden == 0 {
            return Mlp {
                w1: Tensor::zeros(&[1, 1]),
                b1: Tensor::zeros(&[1]),
                w2: Tensor::randn(&[in_dim, out_dim], rng).scale(1.0 / (in_dim as f64).sqrt()),
                b2: Tensor::zeros(&[out_dim]),
                hidden,
            };
        }
        Mlp {
            w1: Tensor::randn(&[in_dim, hidden], rng).scale(1.0 / (in_dim as f64).sqrt()),
            b1: Tensor::zeros(&[hidden]),
            w2: Tensor::randn(&[hidden, out_dim], rng).scale(1.0 / (hidden as f64).sqrt()),
            b2: Tensor::zeros(&[out_dim]),
            hidden,
        }
    }

    /// Zero-initialized output layer (random first layer): the map is
    /// identically zero at initialization.
    pub fn zero_output(in_dim: usize, hidden: usize, out_dim: usize, rng: &mut Rng) -> Self {
        let mut mlp = Mlp::new(in_dim, hidden, out_dim, rng);
        mlp.w2 = Tensor::zeros(mlp.w2.shape());
        mlp.b2 = Tensor::zeros(mlp.b2.shape());
        mlp
    }

    pub fn out_dim(&self) -> usize {
        self.w2.cols()
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> Vec<&Tensor> {
        if self.hidden == 0 {
            vec![&self.w2, &self.b2]
        } else {
            vec![&self.w1, &self.b1, &self.w2, &self.b2]
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        if self.hidden == 0 {
            vec![&mut self.w2, &mut self.b2]
        } else {
            vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
        }
    }

    pub fn register(&self, tape: &mut Tape) -> MlpIds {
        MlpIds {
            w1: tape.param(self.w1.clone()),
            b1: tape.param(self.b1.clone()),
            w2: tape.param(self.w2.clone()),
            b2: tape.param(self.b2.clone()),
        }
    }

    /// Tape param handles in the same order as `params()`.
    pub fn param_ids(&self, ids: MlpIds) -> Vec<ValueId> {
        if self.hidden == 0 {
            vec![ids.w2, ids.b2]
        } else {
            vec![ids.w1, ids.b1, ids.w2, ids.b2]
        }
    }

    pub fn forward_on_tape(&self, tape: &mut Tape, ids: MlpIds, x: ValueId) -> Result<ValueId> {
        if self.hidden == 0 {
            let out = tape.matmul(x, ids.w2)?;
            return tape.add_row_broadcast(out, ids.b2);
        }
        let h = tape.matmul(x, ids.w1)?;
        let h = tape.add_row_broadcast(h, ids.b1)?;
        let h = tape.tanh(h);
        let out = tape.matmul(h, ids.w2)?;
        tape.add_row_broadcast(out, ids.b2)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if self.hidden == 0 {
            return x.matmul(&self.w2)?.add_row_broadcast(&self.b2);
        }
        let h = x.matmul(&self.w1)?.add_row_broadcast(&self.b1)?.map(f64::tanh);
        h.matmul(&self.w2)?.add_row_broadcast(&self.b2)
    }
}
