//! Invertible flow over latent vectors: a stack of blocks, each made of an
//! affine coupling layer, a fixed seeded permutation, and ActNorm.
//!
//! The coupling subnet is a two-layer perceptron producing (log s, t) from
//! the passive half; its raw log-scale output passes through a `2 * tanh`
//! soft clamp so scales stay bounded. The output layer is zero-initialized,
//! making a fresh model the identity map with zero log-determinant.

use std::collections::BTreeMap;

use crate::error::{CoreError, Result};
use crate::mlp::{Mlp, MlpIds};
use crate::optim::{AdamW, AdamWConfig};
use crate::rng::Rng;
use crate::tape::{Tape, ValueId};
use crate::tensor::Tensor;

const LOG_SCALE_CLAMP: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct ActNorm {
    pub log_scale: Tensor,
    pub bias: Tensor,
    pub initialized: bool,
}

impl ActNorm {
    pub fn new(dim: usize) -> Self {
        ActNorm {
            log_scale: Tensor::zeros(&[1, dim]),
            bias: Tensor::zeros(&[1, dim]),
            initialized: false,
        }
    }

    pub fn identity(dim: usize) -> Self {
        ActNorm { initialized: true, ..ActNorm::new(dim) }
    }

    /// Data-dependent initialization: the given activations map to zero
    /// mean, unit variance per dimension.
    pub fn initialize_from(&mut self, batch: &[Tensor]) {
        let dim = self.log_scale.len();
        let n = batch.len() as f64;
        let mut mean = vec![0.0; dim];
        for x in batch {
            for (m, &v) in mean.iter_mut().zip(x.data().iter()) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; dim];
        for x in batch {
            for (s, (&v, &m)) in var.iter_mut().zip(x.data().iter().zip(mean.iter())) {
                *s += (v - m) * (v - m) / n;
            }
        }
        for j in 0..dim {
            let std = var[j].sqrt() + 1e-6;
            self.log_scale.data_mut()[j] = -std.ln();
            self.bias.data_mut()[j] = -mean[j] / std;
        }
        self.initialized = true;
    }

    fn forward(&self, x: &Tensor) -> Result<(Tensor, f64)> {
        if !self.initialized {
            return Err(CoreError::UninitializedActNorm);
        }
        let y = x.mul(&self.log_scale.map(f64::exp))?.add(&self.bias)?;
        Ok((y, self.log_scale.sum()))
    }

    fn inverse(&self, y: &Tensor) -> Result<Tensor> {
        if !self.initialized {
            return Err(CoreError::UninitializedActNorm);
        }
        y.sub(&self.bias)?.mul(&self.log_scale.map(|v| (-v).exp()))
    }
}

#[derive(Debug, Clone)]
pub struct Permutation {
    /// Output column j reads input column perm[j].
    pub perm: Vec<usize>,
    inv: Vec<usize>,
}

impl Permutation {
    pub fn identity(dim: usize) -> Self {
        Permutation { perm: (0..dim).collect(), inv: (0..dim).collect() }
    }

    pub fn seeded(dim: usize, rng: &mut Rng) -> Self {
        Permutation::from_perm(rng.permutation(dim))
    }

    pub fn from_perm(perm: Vec<usize>) -> Self {
        let mut inv = vec![0; perm.len()];
        for (j, &p) in perm.iter().enumerate() {
            inv[p] = j;
        }
        Permutation { perm, inv }
    }

    fn forward(&self, x: &Tensor) -> Tensor {
        let mut out = vec![0.0; x.len()];
        for (j, &p) in self.perm.iter().enumerate() {
            out[j] = x.data()[p];
        }
        Tensor::from_vec(x.shape().to_vec(), out).expect("same shape")
    }

    fn inverse(&self, y: &Tensor) -> Tensor {
        let mut out = vec![0.0; y.len()];
        for (j, &p) in self.inv.iter().enumerate() {
            out[j] = y.data()[p];
        }
        Tensor::from_vec(y.shape().to_vec(), out).expect("same shape")
    }
}

#[derive(Debug, Clone)]
pub struct AffineCoupling {
    /// Maps the passive half to (raw log s, t), each of width `split`.
    pub subnet: Mlp,
    pub split: usize,
    dim: usize,
}

impl AffineCoupling {
    /// Zero-output subnet makes the layer the identity at initialization.
    pub fn new(dim: usize, hidden: usize, rng: &mut Rng) -> Self {
        let split = dim / 2;
        AffineCoupling {
            subnet: Mlp::zero_output(dim - split, hidden, 2 * split, rng),
            split,
            dim,
        }
    }

    fn subnet_outputs(&self, passive: &Tensor) -> Result<(Tensor, Tensor)> {
        let out = self.subnet.forward(passive)?;
        let raw: Vec<f64> = out.data()[..self.split].to_vec();
        let t: Vec<f64> = out.data()[self.split..].to_vec();
        let log_s: Vec<f64> =
            raw.iter().map(|&v| LOG_SCALE_CLAMP * v.tanh()).collect();
        Ok((
            Tensor::from_vec(vec![1, self.split], log_s)?,
            Tensor::from_vec(vec![1, self.split], t)?,
        ))
    }

    fn forward(&self, x: &Tensor) -> Result<(Tensor, f64)> {
        let active = Tensor::from_vec(vec![1, self.split], x.data()[..self.split].to_vec())?;
        let passive =
            Tensor::from_vec(vec![1, self.dim - self.split], x.data()[self.split..].to_vec())?;
        let (log_s, t) = self.subnet_outputs(&passive)?;
        let ya = active.mul(&log_s.map(f64::exp))?.add(&t)?;
        let mut data = ya.into_data();
        data.extend_from_slice(passive.data());
        Ok((Tensor::from_vec(x.shape().to_vec(), data)?, log_s.sum()))
    }

    fn inverse(&self, y: &Tensor) -> Result<Tensor> {
        let ya = Tensor::from_vec(vec![1, self.split], y.data()[..self.split].to_vec())?;
        let passive =
            Tensor::from_vec(vec![1, self.dim - self.split], y.data()[self.split..].to_vec())?;
        let (log_s, t) = self.subnet_outputs(&passive)?;
        let xa = ya.sub(&t)?.mul(&log_s.map(|v| (-v).exp()))?;
        let mut data = xa.into_data();
        data.extend_from_slice(passive.data());
        Tensor::from_vec(y.shape().to_vec(), data)
    }
}

#[derive(Debug, Clone)]
pub enum Block {
    Coupling(AffineCoupling),
    Permutation(Permutation),
    ActNorm(ActNorm),
}

/// Tape handles for one block's parameters.
enum BlockIds {
    Coupling(MlpIds),
    Permutation,
    ActNorm { log_scale: ValueId, bias: ValueId },
}

#[derive(Debug, Clone)]
pub struct FlowModel {
    pub blocks: Vec<Block>,
    pub dim: usize,
    pub seed: u64,
}

pub const DEFAULT_BLOCKS: usize = 10;
pub const DEFAULT_HIDDEN: usize = 512;

/// Training objective for `train`.
pub enum Objective {
    /// Negative log-likelihood under the standard Gaussian base density.
    Unsupervised,
    /// Squared distance to the labelled cluster centre, scaled by
    /// 1/(1 - sigma2), minus the log-determinant.
    Supervised { centers: BTreeMap<String, Tensor>, sigma2: f64 },
}

pub const DEFAULT_SIGMA2: f64 = 0.6;

#[derive(Debug, Clone)]
pub struct FlowTrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub optimizer: AdamWConfig,
    pub seed: u64,
}

impl Default for FlowTrainConfig {
    fn default() -> Self {
        FlowTrainConfig {
            steps: 200,
            batch_size: 32,
            optimizer: AdamWConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub losses: Vec<f64>,
}

impl FlowModel {
    /// Fresh model: identity couplings, seeded permutations, uninitialized
    /// ActNorm layers (call `initialize_actnorm` or `train` before forward).
    pub fn new(dim: usize, n_blocks: usize, hidden: usize, seed: u64) -> Result<Self> {
        if dim < 2 {
            return Err(CoreError::InvalidArgument(
                "flow dimension must be at least 2".into(),
            ));
        }
        let rng = Rng::from_seed(seed);
        let mut blocks = Vec::with_capacity(3 * n_blocks);
        for b in 0..n_blocks {
            let mut block_rng = rng.split(b as u64);
            blocks.push(Block::Coupling(AffineCoupling::new(dim, hidden, &mut block_rng)));
            blocks.push(Block::Permutation(Permutation::seeded(dim, &mut block_rng)));
            blocks.push(Block::ActNorm(ActNorm::new(dim)));
        }
        Ok(FlowModel { blocks, dim, seed })
    }

    /// Identity model: zero couplings, identity permutations, unit ActNorm.
    pub fn identity(dim: usize, n_blocks: usize, hidden: usize) -> Result<Self> {
        if dim < 2 {
            return Err(CoreError::InvalidArgument(
                "flow dimension must be at least 2".into(),
            ));
        }
        let mut rng = Rng::from_seed(0);
        let mut blocks = Vec::with_capacity(3 * n_blocks);
        for _ in 0..n_blocks {
            blocks.push(Block::Coupling(AffineCoupling::new(dim, hidden, &mut rng)));
            blocks.push(Block::Permutation(Permutation::identity(dim)));
            blocks.push(Block::ActNorm(ActNorm::identity(dim)));
        }
        Ok(FlowModel { blocks, dim, seed: 0 })
    }

    pub fn actnorm_initialized(&self) -> bool {
        self.blocks.iter().all(|b| match b {
            Block::ActNorm(a) => a.initialized,
            _ => true,
        })
    }

    /// Runs the batch through the stack, initializing each ActNorm from the
    /// activations that reach it.
    pub fn initialize_actnorm(&mut self, batch: &[Tensor]) -> Result<()> {
        if batch.is_empty() {
            return Err(CoreError::EmptyInput("actnorm initialization batch".into()));
        }
        let mut current: Vec<Tensor> = batch.iter().map(|x| as_row(x, self.dim)).collect::<Result<_>>()?;
        for block in &mut self.blocks {
            match block {
                Block::Coupling(c) => {
                    for x in &mut current {
                        *x = c.forward(x)?.0;
                    }
                }
                Block::Permutation(p) => {
                    for x in &mut current {
                        *x = p.forward(x);
                    }
                }
                Block::ActNorm(a) => {
                    if !a.initialized {
                        a.initialize_from(&current);
                    }
                    for x in &mut current {
                        *x = a.forward(x)?.0;
                    }
                }
            }
        }
        Ok(())
    }

    /// Forward map: returns (z, log |det dz/dx|).
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, f64)> {
        let mut current = as_row(x, self.dim)?;
        let mut logdet = 0.0;
        for block in &self.blocks {
            match block {
                Block::Coupling(c) => {
                    let (y, ld) = c.forward(&current)?;
                    current = y;
                    logdet += ld;
                }
                Block::Permutation(p) => current = p.forward(&current),
                Block::ActNorm(a) => {
                    let (y, ld) = a.forward(&current)?;
                    current = y;
                    logdet += ld;
                }
            }
        }
        current.ensure_finite("flow forward")?;
        Ok((current, logdet))
    }

    pub fn inverse(&self, z: &Tensor) -> Result<Tensor> {
        let mut current = as_row(z, self.dim)?;
        for block in self.blocks.iter().rev() {
            match block {
                Block::Coupling(c) => current = c.inverse(&current)?,
                Block::Permutation(p) => current = p.inverse(&current),
                Block::ActNorm(a) => current = a.inverse(&current)?,
            }
        }
        Ok(current)
    }

    /// Per-block log-determinants (diagnostic; their sum is the total).
    pub fn block_logdets(&self, x: &Tensor) -> Result<Vec<f64>> {
        let mut current = as_row(x, self.dim)?;
        let mut out = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            match block {
                Block::Coupling(c) => {
                    let (y, ld) = c.forward(&current)?;
                    current = y;
                    out.push(ld);
                }
                Block::Permutation(p) => {
                    current = p.forward(&current);
                    out.push(0.0);
                }
                Block::ActNorm(a) => {
                    let (y, ld) = a.forward(&current)?;
                    current = y;
                    out.push(ld);
                }
            }
        }
        Ok(out)
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for block in &self.blocks {
            match block {
                Block::Coupling(c) => out.extend(c.subnet.params()),
                Block::Permutation(_) => {}
                Block::ActNorm(a) => {
                    out.push(&a.log_scale);
                    out.push(&a.bias);
                }
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for block in &mut self.blocks {
            match block {
                Block::Coupling(c) => out.extend(c.subnet.params_mut()),
                Block::Permutation(_) => {}
                Block::ActNorm(a) => {
                    out.push(&mut a.log_scale);
                    out.push(&mut a.bias);
                }
            }
        }
        out
    }

    fn register(&self, tape: &mut Tape) -> (Vec<BlockIds>, Vec<ValueId>) {
        let mut block_ids = Vec::new();
        let mut params = Vec::new();
        for block in &self.blocks {
            match block {
                Block::Coupling(c) => {
                    let ids = c.subnet.register(tape);
                    params.extend(c.subnet.param_ids(ids));
                    block_ids.push(BlockIds::Coupling(ids));
                }
                Block::Permutation(_) => block_ids.push(BlockIds::Permutation),
                Block::ActNorm(a) => {
                    let log_scale = tape.param(a.log_scale.clone());
                    let bias = tape.param(a.bias.clone());
                    params.push(log_scale);
                    params.push(bias);
                    block_ids.push(BlockIds::ActNorm { log_scale, bias });
                }
            }
        }
        (block_ids, params)
    }

    fn forward_on_tape(
        &self,
        tape: &mut Tape,
        block_ids: &[BlockIds],
        x: ValueId,
    ) -> Result<(ValueId, ValueId)> {
        let mut current = x;
        let mut logdet = tape.constant(Tensor::scalar(0.0));
        for (block, ids) in self.blocks.iter().zip(block_ids.iter()) {
            match (block, ids) {
                (Block::Coupling(c), BlockIds::Coupling(mlp_ids)) => {
                    let split = c.split;
                    let active = tape.slice_cols(current, 0, split)?;
                    let passive = tape.slice_cols(current, split, c.dim)?;
                    let out = c.subnet.forward_on_tape(tape, *mlp_ids, passive)?;
                    let raw = tape.slice_cols(out, 0, split)?;
                    let t = tape.slice_cols(out, split, 2 * split)?;
                    let clamped = tape.tanh(raw);
                    let log_s = tape.scale(clamped, LOG_SCALE_CLAMP);
                    let s = tape.exp(log_s)?;
                    let scaled = tape.mul(active, s)?;
                    let ya = tape.add(scaled, t)?;
                    current = tape.concat_cols(ya, passive)?;
                    let ld = tape.sum(log_s);
                    logdet = tape.add(logdet, ld)?;
                }
                (Block::Permutation(p), BlockIds::Permutation) => {
                    current = tape.permute_cols(current, &p.perm)?;
                }
                (Block::ActNorm(a), BlockIds::ActNorm { log_scale, bias }) => {
                    if !a.initialized {
                        return Err(CoreError::UninitializedActNorm);
                    }
                    let s = tape.exp(*log_scale)?;
                    let scaled = tape.mul(current, s)?;
                    current = tape.add(scaled, *bias)?;
                    let ld = tape.sum(*log_scale);
                    logdet = tape.add(logdet, ld)?;
                }
                _ => unreachable!("block and id streams are built together"),
            }
        }
        Ok((current, logdet))
    }

    /// Mean unsupervised NLL over the batch:
    /// `0.5 ||T(x)||^2 - logdet(x) + (D/2) log 2 pi`.
    pub fn nll_unsupervised(&self, batch: &[Tensor]) -> Result<f64> {
        if batch.is_empty() {
            return Err(CoreError::EmptyInput("nll batch".into()));
        }
        let mut total = 0.0;
        for x in batch {
            let (z, logdet) = self.forward(x)?;
            total += 0.5 * z.norm_sq() - logdet
                + 0.5 * self.dim as f64 * (2.0 * std::f64::consts::PI).ln();
        }
        Ok(total / batch.len() as f64)
    }

    /// Mean supervised loss over the batch:
    /// `||T(x) - mu_label||^2 / (1 - sigma2) - logdet(x)`.
    pub fn loss_supervised(
        &self,
        batch: &[(Tensor, String)],
        centers: &BTreeMap<String, Tensor>,
        sigma2: f64,
    ) -> Result<f64> {
        validate_sigma2(sigma2)?;
        if batch.is_empty() {
            return Err(CoreError::EmptyInput("supervised batch".into()));
        }
        let mut total = 0.0;
        for (x, label) in batch {
            let center = centers
                .get(label)
                .ok_or_else(|| CoreError::MissingLabel(label.clone()))?;
            let (z, logdet) = self.forward(x)?;
            let diff = z.sub(&as_row(center, self.dim)?)?;
            total += diff.norm_sq() / (1.0 - sigma2) - logdet;
        }
        Ok(total / batch.len() as f64)
    }

    /// Trains in place; see `Objective`. Zero steps leaves the model
    /// bit-identical. A non-finite loss aborts with the failing step index.
    pub fn train(
        &mut self,
        examples: &[(Tensor, Option<String>)],
        objective: &Objective,
        config: &FlowTrainConfig,
    ) -> Result<TrainReport> {
        if examples.is_empty() {
            return Err(CoreError::EmptyInput("training examples".into()));
        }
        if let Objective::Supervised { centers, sigma2 } = objective {
            validate_sigma2(*sigma2)?;
            for (_, label) in examples {
                let label = label
                    .as_ref()
                    .ok_or_else(|| CoreError::MissingLabel("<unlabelled example>".into()))?;
                if !centers.contains_key(label) {
                    return Err(CoreError::MissingLabel(label.clone()));
                }
            }
        }
        if config.steps == 0 {
            return Ok(TrainReport { losses: Vec::new() });
        }
        if !self.actnorm_initialized() {
            let first: Vec<Tensor> = examples
                .iter()
                .take(config.batch_size.max(2))
                .map(|(x, _)| x.clone())
                .collect();
            self.initialize_actnorm(&first)?;
        }

        let mut rng = Rng::from_seed(config.seed).split_str("flow-train");
        let mut optimizer = AdamW::for_params(config.optimizer.clone(), &self.params());
        let mut losses = Vec::with_capacity(config.steps);
        let batch_size = config.batch_size.max(1).min(examples.len());

        for step in 0..config.steps {
            let mut batch_idx: Vec<usize> =
                (0..batch_size).map(|_| rng.below(examples.len())).collect();
            batch_idx.sort_unstable();

            let mut tape = Tape::new();
            let (block_ids, param_ids) = self.register(&mut tape);
            let mut loss_acc: Option<ValueId> = None;
            for &i in &batch_idx {
                let (x, label) = &examples[i];
                let xv = tape.constant(as_row(x, self.dim)?);
                let (z, logdet) = self.forward_on_tape(&mut tape, &block_ids, xv)?;
                let per_example = match objective {
                    Objective::Unsupervised => {
                        let sq = tape.sum_sq(z)?;
                        let half = tape.scale(sq, 0.5);
                        let neg_logdet = tape.neg(logdet);
                        let nll = tape.add(half, neg_logdet)?;
                        tape.add_const(
                            nll,
                            0.5 * self.dim as f64 * (2.0 * std::f64::consts::PI).ln(),
                        )
                    }
                    Objective::Supervised { centers, sigma2 } => {
                        let label = label.as_ref().expect("validated above");
                        let center = tape.constant(as_row(&centers[label], self.dim)?);
                        let diff = tape.sub(z, center)?;
                        let sq = tape.sum_sq(diff)?;
                        let scaled = tape.scale(sq, 1.0 / (1.0 - sigma2));
                        let neg_logdet = tape.neg(logdet);
                        tape.add(scaled, neg_logdet)?
                    }
                };
                loss_acc = Some(match loss_acc {
                    Some(acc) => tape.add(acc, per_example)?,
                    None => per_example,
                });
            }
            let loss = tape.scale(loss_acc.expect("non-empty batch"), 1.0 / batch_size as f64);
            let loss_value = tape.value(loss).item()?;
            if !loss_value.is_finite() {
                return Err(CoreError::NanLoss { step });
            }
            losses.push(loss_value);

            let grads = tape.backward(loss)?;
            let grad_tensors = tape.param_gradients(&grads, &param_ids);
            let mut params = self.params_mut();
            optimizer.step(&mut params, &grad_tensors);
        }
        Ok(TrainReport { losses })
    }
}

fn validate_sigma2(sigma2: f64) -> Result<()> {
    if sigma2 <= 0.0 || sigma2 >= 1.0 {
        return Err(CoreError::InvalidArgument(format!(
            "sigma2 must lie in (0, 1), got {sigma2}"
        )));
    }
    Ok(())
}

fn as_row(x: &Tensor, dim: usize) -> Result<Tensor> {
    if x.len() != dim {
        return Err(CoreError::ShapeMismatch(format!(
            "expected {dim}-dimensional vector, got {:?}",
            x.shape()
        )));
    }
    Tensor::from_vec(vec![1, dim], x.data().to_vec())
}
