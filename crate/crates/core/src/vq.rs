//! Vector quantization: nearest-code selection, EMA codebook updates,
//! Gumbel-softmax index sampling, the two latent-space loss terms with
//! stop-gradient routing, the uniform-prior KL constant, and the
//! token-level interpolation rule.

use crate::error::{CoreError, Result};
use crate::rng::Rng;
use crate::tape::{Tape, ValueId};
use crate::tensor::Tensor;

pub const DEFAULT_CODES: usize = 512;
pub const DEFAULT_DECAY: f64 = 0.99;
pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_BETA: f64 = 0.25;
/// Consecutive low-count updates before a code is considered dead.
pub const DEAD_CODE_PATIENCE: u32 = 100;
const DEAD_COUNT_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct Codebook {
    /// K x I table, one code embedding per row.
    entries: Tensor,
    ema_counts: Vec<f64>,
    /// K x I accumulators matching `ema_counts`.
    ema_sums: Tensor,
    decay: f64,
    epsilon: f64,
    dead_streak: Vec<u32>,
}

/// Output of `quantize_kmeans`.
#[derive(Debug, Clone)]
pub struct QuantizeResult {
    pub indices: Vec<usize>,
    /// Input embeddings replaced by their selected codes.
    pub quantized: Tensor,
    /// `||sg[E] - z_k||^2` summed over tokens.
    pub vq_loss: f64,
    /// `beta * ||E - sg[z_k]||^2` summed over tokens.
    pub commit_loss: f64,
}

impl Codebook {
    pub fn new(k: usize, width: usize, rng: &mut Rng) -> Result<Self> {
        if k == 0 {
            return Err(CoreError::InvalidArgument("codebook needs K >= 1".into()));
        }
        let entries = Tensor::randn(&[k, width], rng);
        Ok(Codebook {
            ema_sums: entries.clone(),
            ema_counts: vec![1.0; k],
            entries,
            decay: DEFAULT_DECAY,
            epsilon: DEFAULT_EPSILON,
            dead_streak: vec![0; k],
        })
    }

    /// Data-dependent initialization: k-means++ style seeding over the
    /// batch rows (each next code drawn with probability proportional to
    /// squared distance from the codes chosen so far).
    pub fn init_from_batch(
        batch: &Tensor,
        k: usize,
        decay: f64,
        epsilon: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        if k == 0 {
            return Err(CoreError::InvalidArgument("codebook needs K >= 1".into()));
        }
        if batch.rows() == 0 {
            return Err(CoreError::EmptyInput("codebook init batch".into()));
        }
        let width = batch.cols();
        let n = batch.rows();
        let mut chosen: Vec<usize> = vec![rng.below(n)];
        let mut dist: Vec<f64> = (0..n)
            .map(|i| sq_dist(batch.row(i), batch.row(chosen[0])))
            .collect();
        while chosen.len() < k {
            let total: f64 = dist.iter().sum();
            let next = if total <= 0.0 {
                // Batch has fewer distinct rows than codes; cycle through.
                chosen.len() % n
            } else {
                let mut target = rng.uniform() * total;
                let mut pick = n - 1;
                for (i, &d) in dist.iter().enumerate() {
                    if target < d {
                        pick = i;
                        break;
                    }
                    target -= d;
                }
                pick
            };
            chosen.push(next);
            for (i, d) in dist.iter_mut().enumerate() {
                *d = d.min(sq_dist(batch.row(i), batch.row(next)));
            }
        }
        let mut entries = Vec::with_capacity(k * width);
        for &i in &chosen {
            entries.extend_from_slice(batch.row(i));
        }
        Codebook::from_entries(Tensor::from_vec(vec![k, width], entries)?, decay, epsilon)
    }

    pub fn from_entries(entries: Tensor, decay: f64, epsilon: f64) -> Result<Self> {
        if entries.rows() == 0 {
            return Err(CoreError::InvalidArgument("codebook needs K >= 1".into()));
        }
        if !(0.0..1.0).contains(&decay) {
            return Err(CoreError::InvalidArgument(format!(
                "EMA decay must lie in [0, 1), got {decay}"
            )));
        }
        let k = entries.rows();
        Ok(Codebook {
            ema_sums: entries.clone(),
            ema_counts: vec![1.0; k],
            entries,
            decay,
            epsilon,
            dead_streak: vec![0; k],
        })
    }

    pub fn len(&self) -> usize {
        self.entries.rows()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees K >= 1
    }

    pub fn width(&self) -> usize {
        self.entries.cols()
    }

    pub fn entries(&self) -> &Tensor {
        &self.entries
    }

    pub fn entry(&self, k: usize) -> &[f64] {
        self.entries.row(k)
    }

    pub fn ema_counts(&self) -> &[f64] {
        &self.ema_counts
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    fn check_width(&self, e: &Tensor) -> Result<()> {
        if e.cols() != self.width() {
            return Err(CoreError::ShapeMismatch(format!(
                "token width {} vs codebook width {}",
                e.cols(),
                self.width()
            )));
        }
        Ok(())
    }

    /// Nearest code per token by L2 distance, ties to the smallest index.
    pub fn quantize_kmeans(&self, e: &Tensor) -> Result<QuantizeResult> {
        self.check_width(e)?;
        let tokens = e.rows();
        let width = self.width();
        let mut indices = Vec::with_capacity(tokens);
        let mut quantized = Vec::with_capacity(tokens * width);
        let mut vq_loss = 0.0;
        for t in 0..tokens {
            let row = e.row(t);
            let (best, dist_sq) = self.nearest_code(row);
            indices.push(best);
            quantized.extend_from_slice(self.entries.row(best));
            vq_loss += dist_sq;
        }
        // With exact code replacement the two residuals coincide; the beta
        // weighting is applied by `vq_loss` when the caller needs the pair.
        Ok(QuantizeResult {
            indices,
            quantized: Tensor::from_vec(vec![tokens, width], quantized)?,
            vq_loss,
            commit_loss: DEFAULT_BETA * vq_loss,
        })
    }

    fn nearest_code(&self, token: &[f64]) -> (usize, f64) {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for k in 0..self.len() {
            let d = sq_dist(token, self.entries.row(k));
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        (best, best_d)
    }

    /// EMA update from a batch and its assignments:
    /// counts <- rho counts + (1 - rho) batch_counts, likewise sums, then
    /// entry_k <- sums_k / counts_k while counts_k stays above epsilon.
    /// Codes whose mass has decayed below epsilon keep their entry.
    pub fn ema_update(&mut self, e: &Tensor, indices: &[usize]) -> Result<()> {
        self.check_width(e)?;
        if indices.len() != e.rows() {
            return Err(CoreError::ShapeMismatch(format!(
                "{} assignments for {} tokens",
                indices.len(),
                e.rows()
            )));
        }
        let (k, width) = (self.len(), self.width());
        if let Some(&bad) = indices.iter().find(|&&i| i >= k) {
            return Err(CoreError::IndexOutOfRange { index: bad, dim: k });
        }
        let mut batch_counts = vec![0.0; k];
        let mut batch_sums = vec![0.0; k * width];
        for (t, &code) in indices.iter().enumerate() {
            batch_counts[code] += 1.0;
            for (j, &v) in e.row(t).iter().enumerate() {
                batch_sums[code * width + j] += v;
            }
        }
        let rho = self.decay;
        for code in 0..k {
            self.ema_counts[code] = rho * self.ema_counts[code] + (1.0 - rho) * batch_counts[code];
            for j in 0..width {
                let s = self.ema_sums.get(code, j);
                self.ema_sums
                    .set(code, j, rho * s + (1.0 - rho) * batch_sums[code * width + j]);
            }
            if self.ema_counts[code] > self.epsilon {
                for j in 0..width {
                    let v = self.ema_sums.get(code, j) / self.ema_counts[code];
                    self.entries.set(code, j, v);
                }
            }
            if self.ema_counts[code] < DEAD_COUNT_THRESHOLD {
                self.dead_streak[code] = self.dead_streak[code].saturating_add(1);
            } else {
                self.dead_streak[code] = 0;
            }
        }
        Ok(())
    }

    /// Re-seeds codes dead for `DEAD_CODE_PATIENCE` consecutive updates to a
    /// random row of the given batch. Returns the re-seeded code ids.
    pub fn reseed_dead(&mut self, batch: &Tensor, rng: &mut Rng) -> Result<Vec<usize>> {
        self.check_width(batch)?;
        let mut reseeded = Vec::new();
        for code in 0..self.len() {
            if self.dead_streak[code] >= DEAD_CODE_PATIENCE {
                let row = rng.below(batch.rows());
                for (j, &v) in batch.row(row).iter().enumerate() {
                    self.entries.set(code, j, v);
                    self.ema_sums.set(code, j, v);
                }
                self.ema_counts[code] = 1.0;
                self.dead_streak[code] = 0;
                reseeded.push(code);
            }
        }
        Ok(reseeded)
    }

    /// Token-level interpolation:
    /// `argmin_j (1-t) ||z_prev - e_j|| + t ||z_target - e_j||`,
    /// ties to the smallest index.
    pub fn token_interpolate(&self, z_prev: &Tensor, z_target: &Tensor, t: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&t) {
            return Err(CoreError::InvalidArgument(format!(
                "interpolation parameter t must lie in [0, 1], got {t}"
            )));
        }
        if z_prev.len() != self.width() || z_target.len() != self.width() {
            return Err(CoreError::ShapeMismatch(format!(
                "token widths {} / {} vs codebook width {}",
                z_prev.len(),
                z_target.len(),
                self.width()
            )));
        }
        let mut best = 0;
        let mut best_cost = f64::INFINITY;
        for k in 0..self.len() {
            let e = self.entries.row(k);
            let cost = (1.0 - t) * sq_dist(z_prev.data(), e).sqrt()
                + t * sq_dist(z_target.data(), e).sqrt();
            if cost < best_cost {
                best_cost = cost;
                best = k;
            }
        }
        Ok(best)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The two latent-space terms of the quantization objective as plain values:
/// `(||sg[E] - z_k||^2, beta ||E - sg[z_k]||^2)`.
pub fn vq_loss(e: &Tensor, z_k: &Tensor, beta: f64) -> Result<(f64, f64)> {
    if e.shape() != z_k.shape() {
        return Err(CoreError::ShapeMismatch(format!(
            "vq_loss: {:?} vs {:?}",
            e.shape(),
            z_k.shape()
        )));
    }
    let sq = e.sub(z_k)?.norm_sq();
    Ok((sq, beta * sq))
}

/// Same objective recorded on a tape with stop-gradient routing: the
/// codebook term sees no encoder gradient, the commitment term sees no
/// codebook gradient.
pub fn vq_loss_on_tape(
    tape: &mut Tape,
    e: ValueId,
    z_k: ValueId,
    beta: f64,
) -> Result<(ValueId, ValueId)> {
    let e_stop = tape.detach(e);
    let zk_stop = tape.detach(z_k);
    let codebook_diff = tape.sub(e_stop, z_k)?;
    let codebook_term = tape.sum_sq(codebook_diff)?;
    let commit_diff = tape.sub(e, zk_stop)?;
    let commit_sq = tape.sum_sq(commit_diff)?;
    let commit_term = tape.scale(commit_sq, beta);
    Ok((codebook_term, commit_term))
}

/// Gumbel-max index sampling at temperature tau: per token,
/// `argmax_k (logit_k + g_k) / tau` with `g_k` standard Gumbel noise.
/// The marginal selection law is `softmax(logits)` row-wise.
pub fn quantize_gumbel(logits: &Tensor, tau: f64, rng: &mut Rng) -> Result<Vec<usize>> {
    if tau <= 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "gumbel temperature must be positive, got {tau}"
        )));
    }
    let (tokens, k) = (logits.rows(), logits.cols());
    let mut indices = Vec::with_capacity(tokens);
    for t in 0..tokens {
        let row = logits.row(t);
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (j, &l) in row.iter().enumerate() {
            let score = (l + rng.gumbel()) / tau;
            if score > best_score {
                best_score = score;
                best = j;
            }
        }
        debug_assert!(best < k);
        indices.push(best);
    }
    Ok(indices)
}

/// KL between the one-hot selection posterior and the uniform prior over K
/// codes: a constant `ln K`, independent of the selection.
pub fn kl_uniform(k: usize) -> Result<f64> {
    if k < 1 {
        return Err(CoreError::InvalidArgument("kl_uniform needs K >= 1".into()));
    }
    Ok((k as f64).ln())
}
