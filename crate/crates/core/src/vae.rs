//! Toy VAE harness over embedding records: reparameterized diagonal
//! Gaussians, cyclical KL weight with free-bits thresholding, a
//! role-conditional prior, BM25 neighbour retrieval with posterior
//! averaging, and the combined objective with a weighted classifier term.
//!
//! Reconstruction is squared error in embedding space; no token decoding
//! happens here.

use std::collections::BTreeMap;

use crate::error::{CoreError, Result};
use crate::mlp::{Mlp, MlpIds};
use crate::optim::{AdamW, AdamWConfig};
use crate::rng::Rng;
use crate::tape::{Tape, ValueId};
use crate::tensor::Tensor;

pub const DEFAULT_FREE_BITS_LAMBDA: f64 = 0.5;
pub const DEFAULT_NEIGHBORS: usize = 12;
/// Classifier-weight presets exercised by the experiments.
pub const CLS_WEIGHT_PRESETS: [f64; 3] = [1.0, 0.5, 0.1];

#[derive(Debug, Clone)]
pub struct GaussianParams {
    pub mu: Tensor,
    pub log_sigma: Tensor,
}

impl GaussianParams {
    pub fn new(mu: Tensor, log_sigma: Tensor) -> Result<Self> {
        if mu.len() != log_sigma.len() {
            return Err(CoreError::ShapeMismatch(format!(
                "mu dim {} vs log_sigma dim {}",
                mu.len(),
                log_sigma.len()
            )));
        }
        Ok(GaussianParams { mu, log_sigma })
    }

    pub fn standard(dim: usize) -> Self {
        GaussianParams { mu: Tensor::zeros(&[dim]), log_sigma: Tensor::zeros(&[dim]) }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn sigma(&self) -> Tensor {
        self.log_sigma.map(f64::exp)
    }
}

/// `z = mu + sigma * eps` with standard-normal noise.
pub fn reparameterize(p: &GaussianParams, rng: &mut Rng) -> Tensor {
    let eps = Tensor::vector(&rng.gaussian_vec(p.dim()));
    reparameterize_with_noise(p, &eps)
}

pub fn reparameterize_with_noise(p: &GaussianParams, eps: &Tensor) -> Tensor {
    let sigma = p.sigma();
    let mut out = p.mu.clone();
    for ((o, s), e) in out
        .data_mut()
        .iter_mut()
        .zip(sigma.data().iter())
        .zip(eps.data().iter())
    {
        *o += s * e;
    }
    out
}

/// Closed-form per-dimension KL between diagonal Gaussians:
/// `ln(sp/sq) + (sq^2 + (mq - mp)^2) / (2 sp^2) - 1/2`, clamped at zero
/// against float round-off.
pub fn kl_diag_gaussians(q: &GaussianParams, p: &GaussianParams) -> Result<Tensor> {
    if q.dim() != p.dim() {
        return Err(CoreError::ShapeMismatch(format!(
            "kl: q dim {} vs p dim {}",
            q.dim(),
            p.dim()
        )));
    }
    let mut out = Tensor::zeros(&[q.dim()]);
    for i in 0..q.dim() {
        let (mq, lq) = (q.mu.data()[i], q.log_sigma.data()[i]);
        let (mp, lp) = (p.mu.data()[i], p.log_sigma.data()[i]);
        let var_ratio = (2.0 * (lq - lp)).exp();
        let mean_term = (mq - mp) * (mq - mp) / (2.0 * lp.exp().powi(2));
        out.data_mut()[i] = ((lp - lq) + 0.5 * var_ratio + mean_term - 0.5).max(0.0);
    }
    Ok(out)
}

/// Free-bits thresholding: `sum_i max(lambda, kl_i)`.
pub fn free_bits(kl_per_dim: &Tensor, lambda: f64) -> Result<f64> {
    if lambda < 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "free-bits lambda must be nonnegative, got {lambda}"
        )));
    }
    Ok(kl_per_dim.data().iter().map(|&k| k.max(lambda)).sum())
}

/// Cyclical KL-weight schedule: each cycle ramps beta linearly from 0 to 1
/// over its first half, then holds at 1.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Schedule {
    pub total_steps: usize,
    pub n_cycles: usize,
    /// Fraction of the cycle spent ramping (0.5 per the cited schedule).
    pub ramp: f64,
    /// Free-bits threshold.
    pub lambda: f64,
}

impl Schedule {
    pub fn new(total_steps: usize, n_cycles: usize, lambda: f64) -> Result<Self> {
        if n_cycles == 0 || total_steps == 0 {
            return Err(CoreError::InvalidArgument(
                "schedule needs at least one step and one cycle".into(),
            ));
        }
        if !total_steps.is_multiple_of(n_cycles) {
            return Err(CoreError::InvalidArgument(format!(
                "total_steps {total_steps} must be divisible by n_cycles {n_cycles}"
            )));
        }
        if lambda < 0.0 {
            return Err(CoreError::InvalidArgument("lambda must be nonnegative".into()));
        }
        Ok(Schedule { total_steps, n_cycles, ramp: 0.5, lambda })
    }

    pub fn cycle_len(&self) -> usize {
        self.total_steps / self.n_cycles
    }

    pub fn beta_at(&self, step: usize) -> Result<f64> {
        if step >= self.total_steps {
            return Err(CoreError::IndexOutOfRange { index: step, dim: self.total_steps });
        }
        let cycle_len = self.cycle_len();
        let frac = (step % cycle_len) as f64 / cycle_len as f64;
        Ok((frac / self.ramp).min(1.0))
    }
}

/// `elbo + cls_weight * classifier_loss`.
pub fn combined_loss(elbo: f64, classifier_loss: f64, cls_weight: f64) -> Result<f64> {
    if cls_weight < 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "cls_weight must be nonnegative, got {cls_weight}"
        )));
    }
    Ok(elbo + cls_weight * classifier_loss)
}

// ---------------------------------------------------------------------------
// Role-conditional VAE over embedding records
// ---------------------------------------------------------------------------

/// Posterior and prior encoders are separate parameter sets; the prior sees
/// only the role sequence, the posterior sees the embedding and the roles.
#[derive(Debug, Clone)]
pub struct VaeModel {
    pub posterior: Mlp,
    pub prior: Mlp,
    pub decoder: Mlp,
    pub role_vocab: Vec<String>,
    pub input_dim: usize,
    pub latent_dim: usize,
    /// When set, the prior's log-variance head receives no gradient.
    pub freeze_prior_logvar: bool,
}

struct VaeIds {
    posterior: MlpIds,
    prior: MlpIds,
    decoder: MlpIds,
}

impl VaeModel {
    pub fn new(
        input_dim: usize,
        latent_dim: usize,
        hidden: usize,
        role_vocab: Vec<String>,
        rng: &mut Rng,
    ) -> Self {
        let role_dim = role_vocab.len();
        VaeModel {
            posterior: Mlp::new(input_dim + role_dim, hidden, 2 * latent_dim, rng),
            prior: Mlp::new(role_dim.max(1), hidden, 2 * latent_dim, rng),
            decoder: Mlp::new(latent_dim, hidden, input_dim, rng),
            role_vocab,
            input_dim,
            latent_dim,
            freeze_prior_logvar: false,
        }
    }

    /// Vocabulary = union of label keys across the records, sorted.
    pub fn role_vocab_from_records(records: &[crate::geometry::LatentRecord]) -> Vec<String> {
        let mut set: Vec<String> = records
            .iter()
            .flat_map(|r| r.labels.keys().cloned())
            .collect();
        set.sort();
        set.dedup();
        set
    }

    /// Multi-hot role indicator. Every role must be in the vocabulary.
    pub fn role_vector(&self, roles: &[String]) -> Result<Tensor> {
        if roles.is_empty() {
            return Err(CoreError::MissingLabel("empty role sequence".into()));
        }
        let mut v = Tensor::zeros(&[1, self.role_vocab.len().max(1)]);
        for role in roles {
            let idx = self
                .role_vocab
                .iter()
                .position(|r| r == role)
                .ok_or_else(|| CoreError::MissingLabel(role.clone()))?;
            v.data_mut()[idx] = 1.0;
        }
        Ok(v)
    }

    fn split_gaussian(&self, out: &Tensor) -> GaussianParams {
        let d = self.latent_dim;
        GaussianParams {
            mu: Tensor::vector(&out.data()[..d]),
            log_sigma: Tensor::vector(&out.data()[d..2 * d]),
        }
    }

    pub fn posterior_params(&self, x: &Tensor, roles: &[String]) -> Result<GaussianParams> {
        let role_vec = self.role_vector(roles)?;
        let mut input = x.data().to_vec();
        input.extend_from_slice(role_vec.data());
        let out = self
            .posterior
            .forward(&Tensor::from_vec(vec![1, self.input_dim + self.role_vocab.len()], input)?)?;
        Ok(self.split_gaussian(&out))
    }

    pub fn prior_params(&self, roles: &[String]) -> Result<GaussianParams> {
        let role_vec = self.role_vector(roles)?;
        let out = self.prior.forward(&role_vec)?;
        Ok(self.split_gaussian(&out))
    }

    pub fn decode(&self, z: &Tensor) -> Result<Tensor> {
        let row = Tensor::from_vec(vec![1, self.latent_dim], z.data().to_vec())?;
        Ok(Tensor::vector(self.decoder.forward(&row)?.data()))
    }

    /// Conditional ELBO for one record at one schedule step:
    /// squared reconstruction error plus
    /// `beta(step) * free_bits(KL(q(z|x,r) || p(z|r)), lambda)`.
    /// The noise vector makes evaluation deterministic for gradient checks.
    pub fn elbo_conditional(
        &self,
        x: &Tensor,
        roles: &[String],
        schedule: &Schedule,
        step: usize,
        noise: &Tensor,
    ) -> Result<f64> {
        let q = self.posterior_params(x, roles)?;
        let p = self.prior_params(roles)?;
        let z = reparameterize_with_noise(&q, noise);
        let recon = self.decode(&z)?.sub(x)?.norm_sq();
        let kl = kl_diag_gaussians(&q, &p)?;
        let beta = schedule.beta_at(step)?;
        Ok(recon + beta * free_bits(&kl, schedule.lambda)?)
    }

    fn register(&self, tape: &mut Tape) -> (VaeIds, Vec<ValueId>) {
        let posterior = self.posterior.register(tape);
        let prior = self.prior.register(tape);
        let decoder = self.decoder.register(tape);
        let mut params = self.posterior.param_ids(posterior);
        params.extend(self.prior.param_ids(prior));
        params.extend(self.decoder.param_ids(decoder));
        (VaeIds { posterior, prior, decoder }, params)
    }

    /// Tape version of `elbo_conditional`; returns the loss node.
    #[allow(clippy::too_many_arguments)]
    fn elbo_on_tape(
        &self,
        tape: &mut Tape,
        ids: &VaeIds,
        x: &Tensor,
        roles: &[String],
        beta: f64,
        lambda: f64,
        noise: &Tensor,
    ) -> Result<ValueId> {
        let role_vec = self.role_vector(roles)?;
        let mut input = x.data().to_vec();
        input.extend_from_slice(role_vec.data());
        let x_row = tape.constant(Tensor::from_vec(vec![1, self.input_dim], x.data().to_vec())?);
        let post_in = tape.constant(Tensor::from_vec(
            vec![1, self.input_dim + self.role_vocab.len()],
            input,
        )?);
        let prior_in = tape.constant(role_vec);

        let d = self.latent_dim;
        let post_out = self.posterior.forward_on_tape(tape, ids.posterior, post_in)?;
        let q_mu = tape.slice_cols(post_out, 0, d)?;
        let q_ls = tape.slice_cols(post_out, d, 2 * d)?;
        let prior_out = self.prior.forward_on_tape(tape, ids.prior, prior_in)?;
        let p_mu = tape.slice_cols(prior_out, 0, d)?;
        let p_ls_raw = tape.slice_cols(prior_out, d, 2 * d)?;
        let p_ls = if self.freeze_prior_logvar { tape.detach(p_ls_raw) } else { p_ls_raw };

        // z = mu + exp(log_sigma) * eps
        let eps = tape.constant(Tensor::from_vec(vec![1, d], noise.data().to_vec())?);
        let q_sigma = tape.exp(q_ls)?;
        let scaled_eps = tape.mul(q_sigma, eps)?;
        let z = tape.add(q_mu, scaled_eps)?;

        let decoded = self.decoder.forward_on_tape(tape, ids.decoder, z)?;
        let diff = tape.sub(decoded, x_row)?;
        let recon = tape.sum_sq(diff)?;

        // Per-dim KL: (lp - lq) + 0.5 exp(2(lq - lp)) + (mq - mp)^2 / (2 exp(2 lp)) - 0.5
        let ls_diff = tape.sub(q_ls, p_ls)?;
        let neg_ls_diff = tape.neg(ls_diff);
        let two_diff = tape.scale(ls_diff, 2.0);
        let var_ratio = tape.exp(two_diff)?;
        let half_ratio = tape.scale(var_ratio, 0.5);
        let mu_diff = tape.sub(q_mu, p_mu)?;
        let mu_sq = tape.mul(mu_diff, mu_diff)?;
        let neg_two_lp = tape.scale(p_ls, -2.0);
        let inv_var_p = tape.exp(neg_two_lp)?;
        let mean_term_raw = tape.mul(mu_sq, inv_var_p)?;
        let mean_term = tape.scale(mean_term_raw, 0.5);
        let kl_a = tape.add(neg_ls_diff, half_ratio)?;
        let kl_b = tape.add(kl_a, mean_term)?;
        let kl = tape.add_const(kl_b, -0.5);
        let kl_floored = tape.max_const(kl, lambda);
        let kl_sum = tape.sum(kl_floored);
        let beta_kl = tape.scale(kl_sum, beta);
        tape.add(recon, beta_kl)
    }

    /// Trains on records; each record's role sequence is its label-key set.
    pub fn train(
        &mut self,
        records: &[crate::geometry::LatentRecord],
        schedule: &Schedule,
        config: &VaeTrainConfig,
    ) -> Result<Vec<f64>> {
        if records.is_empty() {
            return Err(CoreError::EmptyInput("vae training records".into()));
        }
        let mut rng = Rng::from_seed(config.seed).split_str("vae-train");
        let mut optimizer = AdamW::for_params(config.optimizer.clone(), &self.params());
        let mut losses = Vec::with_capacity(schedule.total_steps);
        let batch_size = config.batch_size.max(1).min(records.len());

        for step in 0..schedule.total_steps {
            let beta = schedule.beta_at(step)?;
            let mut tape = Tape::new();
            let (ids, param_ids) = self.register(&mut tape);
            let mut acc: Option<ValueId> = None;
            for _ in 0..batch_size {
                let rec = &records[rng.below(records.len())];
                let roles: Vec<String> = rec.labels.keys().cloned().collect();
                let noise = Tensor::vector(&rng.gaussian_vec(self.latent_dim));
                let loss = self.elbo_on_tape(
                    &mut tape,
                    &ids,
                    &rec.vector,
                    &roles,
                    beta,
                    schedule.lambda,
                    &noise,
                )?;
                acc = Some(match acc {
                    Some(a) => tape.add(a, loss)?,
                    None => loss,
                });
            }
            let loss = tape.scale(acc.expect("non-empty batch"), 1.0 / batch_size as f64);
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
        Ok(losses)
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = self.posterior.params();
        out.extend(self.prior.params());
        out.extend(self.decoder.params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.posterior.params_mut();
        out.extend(self.prior.params_mut());
        out.extend(self.decoder.params_mut());
        out
    }
}

#[derive(Debug, Clone)]
pub struct VaeTrainConfig {
    pub batch_size: usize,
    pub optimizer: AdamWConfig,
    pub seed: u64,
}

impl Default for VaeTrainConfig {
    fn default() -> Self {
        VaeTrainConfig {
            batch_size: 16,
            optimizer: AdamWConfig::with_lr(1e-3),
            seed: 0,
        }
    }
}

// ---------------------------------------------------------------------------
// Rule-conditioned posterior averaging and BM25 retrieval
// ---------------------------------------------------------------------------

/// One (rule, premise, conclusion) training triple in embedding space.
#[derive(Debug, Clone)]
pub struct RuleExample {
    pub rule: String,
    pub premise: Tensor,
    pub conclusion: Tensor,
}

/// A target pair with its retrieved same-rule neighbours.
#[derive(Debug, Clone)]
pub struct RuleBatch {
    pub rule: String,
    pub premise: Tensor,
    pub conclusion: Tensor,
    pub neighbors: Vec<RuleExample>,
}

impl RuleBatch {
    pub fn new(
        rule: String,
        premise: Tensor,
        conclusion: Tensor,
        neighbors: Vec<RuleExample>,
    ) -> Result<Self> {
        if neighbors.is_empty() {
            return Err(CoreError::EmptyInput("rule batch neighbours".into()));
        }
        if let Some(bad) = neighbors.iter().find(|n| n.rule != rule) {
            return Err(CoreError::InvalidArgument(format!(
                "neighbour carries rule {:?}, target rule is {:?}",
                bad.rule, rule
            )));
        }
        Ok(RuleBatch { rule, premise, conclusion, neighbors })
    }
}

/// Posterior encoder for rule triples: [premise; conclusion; rule one-hot]
/// to Gaussian parameters.
#[derive(Debug, Clone)]
pub struct RuleEncoder {
    pub mlp: Mlp,
    pub rule_vocab: Vec<String>,
    pub latent_dim: usize,
    pub input_dim: usize,
}

impl RuleEncoder {
    pub fn new(
        input_dim: usize,
        latent_dim: usize,
        hidden: usize,
        rule_vocab: Vec<String>,
        rng: &mut Rng,
    ) -> Self {
        let in_total = 2 * input_dim + rule_vocab.len();
        RuleEncoder {
            mlp: Mlp::new(in_total, hidden, 2 * latent_dim, rng),
            rule_vocab,
            latent_dim,
            input_dim,
        }
    }

    pub fn encode(&self, premise: &Tensor, conclusion: &Tensor, rule: &str) -> Result<GaussianParams> {
        let idx = self
            .rule_vocab
            .iter()
            .position(|r| r == rule)
            .ok_or_else(|| CoreError::MissingLabel(rule.to_string()))?;
        let mut input = premise.data().to_vec();
        input.extend_from_slice(conclusion.data());
        let mut onehot = vec![0.0; self.rule_vocab.len()];
        onehot[idx] = 1.0;
        input.extend_from_slice(&onehot);
        let out = self.mlp.forward(&Tensor::from_vec(
            vec![1, 2 * self.input_dim + self.rule_vocab.len()],
            input,
        )?)?;
        let d = self.latent_dim;
        Ok(GaussianParams {
            mu: Tensor::vector(&out.data()[..d]),
            log_sigma: Tensor::vector(&out.data()[d..2 * d]),
        })
    }
}

/// Encodes every neighbour triple and averages the Gaussian parameters
/// component-wise (means and log-variances alike). Permutation-invariant in
/// the neighbour list.
pub fn rule_posterior(encoder: &RuleEncoder, batch: &RuleBatch) -> Result<GaussianParams> {
    if batch.neighbors.is_empty() {
        return Err(CoreError::EmptyInput("rule batch neighbours".into()));
    }
    let n = batch.neighbors.len() as f64;
    let d = encoder.latent_dim;
    let mut mu = Tensor::zeros(&[d]);
    let mut log_sigma = Tensor::zeros(&[d]);
    for neighbor in &batch.neighbors {
        let params = encoder.encode(&neighbor.premise, &neighbor.conclusion, &neighbor.rule)?;
        for i in 0..d {
            mu.data_mut()[i] += params.mu.data()[i] / n;
            log_sigma.data_mut()[i] += params.log_sigma.data()[i] / n;
        }
    }
    Ok(GaussianParams { mu, log_sigma })
}

// ---------------------------------------------------------------------------
// BM25
// ---------------------------------------------------------------------------

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

/// Standard BM25 ranking over whitespace-style token lists:
/// `idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))`,
/// `score(d) = sum_t idf(t) tf(t,d) (k1+1) / (tf(t,d) + k1 (1 - b + b |d|/avg))`
/// summed over query tokens with multiplicity. Ties rank by ascending id.
pub fn bm25_topk(
    query: &[String],
    corpus: &[(String, Vec<String>)],
    k: usize,
) -> Result<Vec<String>> {
    Ok(bm25_rank(query, corpus, k)?.into_iter().map(|(id, _)| id).collect())
}

/// Top-k ids with their scores (zero-score documents still rank, by id).
pub fn bm25_rank(
    query: &[String],
    corpus: &[(String, Vec<String>)],
    k: usize,
) -> Result<Vec<(String, f64)>> {
    if corpus.is_empty() {
        return Err(CoreError::EmptyInput("bm25 corpus".into()));
    }
    if k < 1 {
        return Err(CoreError::InvalidArgument("bm25 requires k >= 1".into()));
    }
    let n = corpus.len() as f64;
    let avg_len: f64 =
        corpus.iter().map(|(_, toks)| toks.len() as f64).sum::<f64>() / n;

    let mut df: BTreeMap<&str, f64> = BTreeMap::new();
    for (_, toks) in corpus {
        let mut seen: Vec<&str> = toks.iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_insert(0.0) += 1.0;
        }
    }

    let mut scored: Vec<(f64, &String)> = corpus
        .iter()
        .map(|(id, toks)| {
            let len = toks.len() as f64;
            let mut score = 0.0;
            for q in query {
                let Some(&dfq) = df.get(q.as_str()) else { continue };
                let tf = toks.iter().filter(|t| *t == q).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let idf = (1.0 + (n - dfq + 0.5) / (dfq + 0.5)).ln();
                let denom = tf + BM25_K1 * (1.0 - BM25_B + BM25_B * len / avg_len.max(1e-12));
                score += idf * tf * (BM25_K1 + 1.0) / denom;
            }
            (score, id)
        })
        .collect();
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.1.cmp(b.1))
    });
    Ok(scored.into_iter().take(k).map(|(s, id)| (id.clone(), s)).collect())
}

/// One retrievable instance: its premise token list plus the embedding-space
/// triple.
#[derive(Debug, Clone)]
pub struct RuleCorpusEntry {
    pub id: String,
    pub tokens: Vec<String>,
    pub example: RuleExample,
}

/// Retrieves `n` same-rule neighbours by BM25 over the premise tokens.
/// Zero-score documents do not count as matches; when fewer than `n` match,
/// the remainder is filled by seeded random same-rule sampling (with
/// replacement once the pool is exhausted).
pub fn retrieve_neighbors(
    rule: &str,
    query_tokens: &[String],
    corpus: &[RuleCorpusEntry],
    n: usize,
    rng: &mut Rng,
) -> Result<Vec<RuleExample>> {
    if n == 0 {
        return Err(CoreError::InvalidArgument("neighbour count must be positive".into()));
    }
    let pool: Vec<&RuleCorpusEntry> =
        corpus.iter().filter(|e| e.example.rule == rule).collect();
    if pool.is_empty() {
        return Err(CoreError::MissingLabel(format!("no corpus entries for rule {rule:?}")));
    }
    let docs: Vec<(String, Vec<String>)> = pool
        .iter()
        .map(|e| (e.id.clone(), e.tokens.clone()))
        .collect();
    let ranked = bm25_rank(query_tokens, &docs, n)?;
    let mut out: Vec<RuleExample> = ranked
        .iter()
        .filter(|(_, score)| *score > 0.0)
        .map(|(id, _)| {
            pool.iter()
                .find(|e| &e.id == id)
                .expect("ranked ids come from the pool")
                .example
                .clone()
        })
        .collect();
    while out.len() < n {
        out.push(pool[rng.below(pool.len())].example.clone());
    }
    Ok(out)
}
