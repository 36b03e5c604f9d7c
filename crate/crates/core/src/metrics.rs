//! Evaluation devices: exact Word Mover's Distance, the interpolation
//! smoothness ratio, proxy classifiers (kNN, Gaussian naive Bayes, linear
//! hinge), label-retention ratios, k-means cluster MSE, and PCA projection.

use std::collections::BTreeMap;

use crate::error::{CoreError, Result};
use crate::geometry::{ArithmeticOp, TokenEmbedding};
use crate::linalg::symmetric_eigen;
use crate::rng::Rng;
use crate::tensor::Tensor;

pub const MAX_WMD_TOKENS: usize = 32;

/// String-to-string label map carried by records and outcomes.
pub type LabelMap = BTreeMap<String, String>;

/// A sentence as its token embeddings with uniform mass 1/|tokens|.
#[derive(Debug, Clone)]
pub struct TokenizedSentence {
    pub tokens: Vec<TokenEmbedding>,
}

impl TokenizedSentence {
    pub fn new(tokens: Vec<TokenEmbedding>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(CoreError::EmptyInput("tokenized sentence".into()));
        }
        let d = tokens[0].vector.len();
        if tokens.iter().any(|t| t.vector.len() != d) {
            return Err(CoreError::ShapeMismatch("token dimensions differ".into()));
        }
        Ok(TokenizedSentence { tokens })
    }

    pub fn from_vectors(vectors: &[Tensor]) -> Result<Self> {
        TokenizedSentence::new(
            vectors
                .iter()
                .enumerate()
                .map(|(i, v)| TokenEmbedding { text: format!("t{i}"), vector: v.clone() })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.tokens[0].vector.len()
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Exact 1-Wasserstein distance between the uniform token-mass distributions
/// with Euclidean ground cost. Masses are scaled to integers
/// (lcm(n, m) units) and the transport solved exactly by successive
/// shortest paths, so the result is the true LP optimum.
pub fn wmd(a: &TokenizedSentence, b: &TokenizedSentence) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(CoreError::ShapeMismatch(format!(
            "token dims {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let (n, m) = (a.len(), b.len());
    if n > MAX_WMD_TOKENS || m > MAX_WMD_TOKENS {
        return Err(CoreError::InvalidArgument(format!(
            "sentences over {MAX_WMD_TOKENS} tokens are not supported (got {n} and {m})"
        )));
    }
    let mut cost = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            cost[i * m + j] = a.tokens[i]
                .vector
                .euclidean_distance(&b.tokens[j].vector)?;
        }
    }
    let units = n / gcd(n, m) * m;
    let supply = units / n;
    let demand = units / m;
    let total = min_cost_transport(&cost, n, m, supply as i64, demand as i64);
    Ok(total / units as f64)
}

/// Min-cost flow (successive shortest paths with Bellman-Ford) on the
/// bipartite transport graph: `n` sources with `supply` units each, `m`
/// sinks demanding `demand` units each.
fn min_cost_transport(cost: &[f64], n: usize, m: usize, supply: i64, demand: i64) -> f64 {
    // Node ids: 0 = source, 1..=n suppliers, n+1..=n+m consumers, n+m+1 sink.
    let v = n + m + 2;
    let source = 0;
    let sink = n + m + 1;

    struct Edge {
        to: usize,
        cap: i64,
        cost: f64,
        flow: i64,
    }
    let mut edges: Vec<Edge> = Vec::new();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); v];
    let add_edge = |edges: &mut Vec<Edge>, adj: &mut Vec<Vec<usize>>, from: usize, to: usize, cap: i64, cost: f64| {
        adj[from].push(edges.len());
        edges.push(Edge { to, cap, cost, flow: 0 });
        adj[to].push(edges.len());
        edges.push(Edge { to: from, cap: 0, cost: -cost, flow: 0 });
    };

    for i in 0..n {
        add_edge(&mut edges, &mut adj, source, 1 + i, supply, 0.0);
    }
    for i in 0..n {
        for j in 0..m {
            add_edge(&mut edges, &mut adj, 1 + i, 1 + n + j, supply, cost[i * m + j]);
        }
    }
    for j in 0..m {
        add_edge(&mut edges, &mut adj, 1 + n + j, sink, demand, 0.0);
    }

    let mut total_cost = 0.0;
    loop {
        // Bellman-Ford shortest augmenting path by cost.
        let mut dist = vec![f64::INFINITY; v];
        let mut in_queue = vec![false; v];
        let mut prev_edge = vec![usize::MAX; v];
        dist[source] = 0.0;
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(source);
        in_queue[source] = true;
        while let Some(u) = queue.pop_front() {
            in_queue[u] = false;
            for &ei in &adj[u] {
                let e = &edges[ei];
                if e.cap - e.flow > 0 && dist[u] + e.cost < dist[e.to] - 1e-15 {
                    dist[e.to] = dist[u] + e.cost;
                    prev_edge[e.to] = ei;
                    if !in_queue[e.to] {
                        queue.push_back(e.to);
                        in_queue[e.to] = true;
                    }
                }
            }
        }
        if !dist[sink].is_finite() {
            break;
        }
        // Bottleneck along the path.
        let mut push = i64::MAX;
        let mut node = sink;
        while node != source {
            let ei = prev_edge[node];
            push = push.min(edges[ei].cap - edges[ei].flow);
            node = edges[ei ^ 1].to;
        }
        let mut node = sink;
        while node != source {
            let ei = prev_edge[node];
            edges[ei].flow += push;
            edges[ei ^ 1].flow -= push;
            total_cost += push as f64 * edges[ei].cost;
            node = edges[ei ^ 1].to;
        }
    }
    total_cost
}

/// Endpoint semantic distance over summed adjacent-step distances along an
/// interpolation path. A fully degenerate path (0/0) is 1 by convention.
pub fn interpolation_smoothness(path: &[TokenizedSentence]) -> Result<f64> {
    if path.len() < 2 {
        return Err(CoreError::InvalidArgument(format!(
            "interpolation smoothness needs a path of length >= 2, got {}",
            path.len()
        )));
    }
    let ideal = wmd(&path[0], &path[path.len() - 1])?;
    let mut actual = 0.0;
    for w in path.windows(2) {
        actual += wmd(&w[0], &w[1])?;
    }
    if ideal == 0.0 && actual == 0.0 {
        return Ok(1.0);
    }
    Ok(ideal / actual)
}

/// Per-path IS values with their aggregate.
#[derive(Debug, Clone)]
pub struct IsReport {
    pub per_path: Vec<f64>,
    pub avg: f64,
    pub max: f64,
    pub min: f64,
}

pub fn is_report(paths: &[Vec<TokenizedSentence>]) -> Result<IsReport> {
    if paths.is_empty() {
        return Err(CoreError::EmptyInput("interpolation paths".into()));
    }
    let per_path: Vec<f64> = paths
        .iter()
        .map(|p| interpolation_smoothness(p))
        .collect::<Result<_>>()?;
    let avg = per_path.iter().sum::<f64>() / per_path.len() as f64;
    let max = per_path.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = per_path.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(IsReport { per_path, avg, max, min })
}

// ---------------------------------------------------------------------------
// Proxy classifiers
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierKind {
    Knn,
    NaiveBayes,
    Linear,
}

impl std::str::FromStr for ClassifierKind {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "knn" => Ok(ClassifierKind::Knn),
            "naive_bayes" | "nb" => Ok(ClassifierKind::NaiveBayes),
            "linear" => Ok(ClassifierKind::Linear),
            other => Err(CoreError::InvalidArgument(format!(
                "unknown classifier {other:?} (expected knn|naive_bayes|linear)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ClassifierReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

const KNN_K: usize = 5;
const NB_VAR_FLOOR: f64 = 1e-9;
const LINEAR_EPOCHS: usize = 200;

/// Trains the chosen classifier on `train` and scores macro-averaged
/// metrics on `test`. Every test label must appear in the training set.
pub fn proxy_classifier(
    kind: ClassifierKind,
    train: &[(Tensor, usize)],
    test: &[(Tensor, usize)],
) -> Result<ClassifierReport> {
    if train.is_empty() || test.is_empty() {
        return Err(CoreError::EmptyInput("classifier data".into()));
    }
    let mut train_labels: Vec<usize> = train.iter().map(|(_, y)| *y).collect();
    train_labels.sort_unstable();
    train_labels.dedup();
    for (_, y) in test {
        if !train_labels.contains(y) {
            return Err(CoreError::MissingLabel(format!("test label {y} unseen in training")));
        }
    }
    let predictions: Vec<usize> = match kind {
        ClassifierKind::Knn => test.iter().map(|(x, _)| knn_predict(train, x)).collect(),
        ClassifierKind::NaiveBayes => {
            let model = NaiveBayes::fit(train, &train_labels);
            test.iter().map(|(x, _)| model.predict(x)).collect()
        }
        ClassifierKind::Linear => {
            let model = LinearOvr::fit(train, &train_labels);
            test.iter().map(|(x, _)| model.predict(x)).collect()
        }
    };
    Ok(macro_metrics(test, &predictions))
}

fn knn_predict(train: &[(Tensor, usize)], x: &Tensor) -> usize {
    let mut dists: Vec<(f64, usize, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, (t, y))| (x.euclidean_distance(t).unwrap_or(f64::INFINITY), i, *y))
        .collect();
    dists.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
    });
    let k = KNN_K.min(dists.len());
    let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
    for (_, _, y) in dists.into_iter().take(k) {
        *votes.entry(y).or_insert(0) += 1;
    }
    // Max votes; ties resolve to the smaller label id (BTreeMap order).
    let mut best = (0usize, 0usize);
    for (&label, &count) in &votes {
        if count > best.1 {
            best = (label, count);
        }
    }
    best.0
}

struct NaiveBayes {
    labels: Vec<usize>,
    log_prior: Vec<f64>,
    means: Vec<Vec<f64>>,
    vars: Vec<Vec<f64>>,
}

impl NaiveBayes {
    fn fit(train: &[(Tensor, usize)], labels: &[usize]) -> Self {
        let dim = train[0].0.len();
        let n = train.len() as f64;
        let mut log_prior = Vec::new();
        let mut means = Vec::new();
        let mut vars = Vec::new();
        for &label in labels {
            let members: Vec<&Tensor> =
                train.iter().filter(|(_, y)| *y == label).map(|(x, _)| x).collect();
            let c = members.len() as f64;
            log_prior.push((c / n).ln());
            let mut mean = vec![0.0; dim];
            for x in &members {
                for (m, &v) in mean.iter_mut().zip(x.data()) {
                    *m += v / c;
                }
            }
            let mut var = vec![0.0; dim];
            for x in &members {
                for (s, (&v, &m)) in var.iter_mut().zip(x.data().iter().zip(mean.iter())) {
                    *s += (v - m) * (v - m) / c;
                }
            }
            for s in &mut var {
                *s = s.max(NB_VAR_FLOOR);
            }
            means.push(mean);
            vars.push(var);
        }
        NaiveBayes { labels: labels.to_vec(), log_prior, means, vars }
    }

    fn predict(&self, x: &Tensor) -> usize {
        let mut best = (self.labels[0], f64::NEG_INFINITY);
        for (c, &label) in self.labels.iter().enumerate() {
            let mut score = self.log_prior[c];
            for (j, &v) in x.data().iter().enumerate() {
                let var = self.vars[c][j];
                let diff = v - self.means[c][j];
                score -= 0.5 * ((2.0 * std::f64::consts::PI * var).ln() + diff * diff / var);
            }
            if score > best.1 {
                best = (label, score);
            }
        }
        best.0
    }
}

/// One-vs-rest hinge-loss SGD with a fixed seed and schedule.
struct LinearOvr {
    labels: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

impl LinearOvr {
    fn fit(train: &[(Tensor, usize)], labels: &[usize]) -> Self {
        let dim = train[0].0.len();
        let reg = 1e-4;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for &label in labels {
            let mut w = vec![0.0; dim];
            let mut b = 0.0;
            let mut rng = Rng::from_seed(0xC1A5_5EED).split(label as u64);
            let mut t = 0usize;
            for _ in 0..LINEAR_EPOCHS {
                let order = rng.permutation(train.len());
                for idx in order {
                    let (x, y) = &train[idx];
                    let target = if *y == label { 1.0 } else { -1.0 };
                    let margin =
                        target * (x.data().iter().zip(w.iter()).map(|(a, b)| a * b).sum::<f64>() + b);
                    let lr = 0.1 / (1.0 + 1e-3 * t as f64);
                    if margin < 1.0 {
                        for (wj, &xj) in w.iter_mut().zip(x.data()) {
                            *wj += lr * (target * xj - reg * *wj);
                        }
                        b += lr * target;
                    } else {
                        for wj in w.iter_mut() {
                            *wj -= lr * reg * *wj;
                        }
                    }
                    t += 1;
                }
            }
            weights.push(w);
            biases.push(b);
        }
        LinearOvr { labels: labels.to_vec(), weights, biases }
    }

    fn predict(&self, x: &Tensor) -> usize {
        let mut best = (self.labels[0], f64::NEG_INFINITY);
        for (c, &label) in self.labels.iter().enumerate() {
            let score = x
                .data()
                .iter()
                .zip(self.weights[c].iter())
                .map(|(a, b)| a * b)
                .sum::<f64>()
                + self.biases[c];
            if score > best.1 {
                best = (label, score);
            }
        }
        best.0
    }
}

fn macro_metrics(test: &[(Tensor, usize)], predictions: &[usize]) -> ClassifierReport {
    let mut labels: Vec<usize> = test.iter().map(|(_, y)| *y).collect();
    labels.sort_unstable();
    labels.dedup();

    let correct = test
        .iter()
        .zip(predictions.iter())
        .filter(|((_, y), p)| y == *p)
        .count();
    let accuracy = correct as f64 / test.len() as f64;

    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    let mut f1_sum = 0.0;
    for &label in &labels {
        let tp = test
            .iter()
            .zip(predictions.iter())
            .filter(|((_, y), p)| *y == label && **p == label)
            .count() as f64;
        let fp = test
            .iter()
            .zip(predictions.iter())
            .filter(|((_, y), p)| *y != label && **p == label)
            .count() as f64;
        let fn_ = test
            .iter()
            .zip(predictions.iter())
            .filter(|((_, y), p)| *y == label && **p != label)
            .count() as f64;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        precision_sum += precision;
        recall_sum += recall;
        f1_sum += f1;
    }
    let c = labels.len() as f64;
    ClassifierReport {
        accuracy,
        precision: precision_sum / c,
        recall: recall_sum / c,
        f1: f1_sum / c,
    }
}

// ---------------------------------------------------------------------------
// Label-retention ratios
// ---------------------------------------------------------------------------

/// Fraction of pairs whose output label at `key` equals the input label.
pub fn invertibility_ratio(pairs: &[(LabelMap, LabelMap)], key: &str) -> Result<f64> {
    if pairs.is_empty() {
        return Err(CoreError::EmptyInput("invertibility pairs".into()));
    }
    let mut held = 0usize;
    for (input, output) in pairs {
        let a = input
            .get(key)
            .ok_or_else(|| CoreError::MissingLabel(format!("{key} missing on input")))?;
        let b = output
            .get(key)
            .ok_or_else(|| CoreError::MissingLabel(format!("{key} missing on output")))?;
        if a == b {
            held += 1;
        }
    }
    Ok(held as f64 / pairs.len() as f64)
}

/// Labelled outcome of one latent arithmetic operation.
#[derive(Debug, Clone)]
pub struct ArithmeticOutcome {
    pub op: ArithmeticOp,
    pub labels: BTreeMap<String, String>,
}

/// Fraction of `op` outcomes still labelled `role = content`.
pub fn retention_ratio(
    outcomes: &[ArithmeticOutcome],
    op: ArithmeticOp,
    role: &str,
    content: &str,
) -> Result<f64> {
    let group: Vec<&ArithmeticOutcome> = outcomes.iter().filter(|o| o.op == op).collect();
    if group.is_empty() {
        return Err(CoreError::EmptyInput(format!("no outcomes for {op:?}")));
    }
    let mut held = 0usize;
    for outcome in &group {
        let value = outcome
            .labels
            .get(role)
            .ok_or_else(|| CoreError::MissingLabel(format!("{role} missing on outcome")))?;
        if value == content {
            held += 1;
        }
    }
    Ok(held as f64 / group.len() as f64)
}

// ---------------------------------------------------------------------------
// k-means and PCA
// ---------------------------------------------------------------------------

/// Lloyd's algorithm with k-means++ seeding, 100-iteration cap. Returns
/// (centroids, assignments, mean squared distance to assigned centroid).
pub fn kmeans(vectors: &[Tensor], k: usize, seed: u64) -> Result<(Vec<Tensor>, Vec<usize>, f64)> {
    if vectors.is_empty() {
        return Err(CoreError::EmptyInput("kmeans input".into()));
    }
    if k == 0 || k > vectors.len() {
        return Err(CoreError::InvalidArgument(format!(
            "k must lie in 1..={}, got {k}",
            vectors.len()
        )));
    }
    let mut rng = Rng::from_seed(seed).split_str("kmeans");
    let n = vectors.len();

    // k-means++ seeding.
    let mut centroids: Vec<Tensor> = vec![vectors[rng.below(n)].clone()];
    let mut dist_sq: Vec<f64> = vectors
        .iter()
        .map(|v| sq_distance(v, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = dist_sq.iter().sum();
        let next = if total <= 0.0 {
            // All points coincide with chosen centroids; take the first
            // index not yet selected.
            (0..n)
                .find(|&i| !centroids.iter().any(|c| c.data() == vectors[i].data()))
                .unwrap_or(0)
        } else {
            let mut target = rng.uniform() * total;
            let mut pick = n - 1;
            for (i, &d) in dist_sq.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        };
        centroids.push(vectors[next].clone());
        for (i, v) in vectors.iter().enumerate() {
            dist_sq[i] = dist_sq[i].min(sq_distance(v, centroids.last().unwrap()));
        }
    }

    let mut assignments = vec![0usize; n];
    for _ in 0..100 {
        let mut changed = false;
        for (i, v) in vectors.iter().enumerate() {
            let mut best = (0usize, f64::INFINITY);
            for (c, centroid) in centroids.iter().enumerate() {
                let d = sq_distance(v, centroid);
                if d < best.1 {
                    best = (c, d);
                }
            }
            if assignments[i] != best.0 {
                assignments[i] = best.0;
                changed = true;
            }
        }
        let dim = vectors[0].len();
        for c in 0..k {
            let members: Vec<&Tensor> = vectors
                .iter()
                .zip(assignments.iter())
                .filter(|(_, &a)| a == c)
                .map(|(v, _)| v)
                .collect();
            if members.is_empty() {
                // Re-seat an empty cluster at the point farthest from its
                // current assignment's centroid (deterministic tie: index).
                let mut far = (0usize, -1.0);
                for (i, v) in vectors.iter().enumerate() {
                    let d = sq_distance(v, &centroids[assignments[i]]);
                    if d > far.1 {
                        far = (i, d);
                    }
                }
                centroids[c] = vectors[far.0].clone();
                changed = true;
                continue;
            }
            let mut mean = vec![0.0; dim];
            for v in &members {
                for (m, &x) in mean.iter_mut().zip(v.data()) {
                    *m += x / members.len() as f64;
                }
            }
            centroids[c] = Tensor::vector(&mean);
        }
        if !changed {
            break;
        }
    }

    let mse = vectors
        .iter()
        .zip(assignments.iter())
        .map(|(v, &a)| sq_distance(v, &centroids[a]))
        .sum::<f64>()
        / n as f64;
    Ok((centroids, assignments, mse))
}

/// Mean squared distance to the assigned k-means centroid.
pub fn cluster_mse(vectors: &[Tensor], k: usize, seed: u64) -> Result<f64> {
    Ok(kmeans(vectors, k, seed)?.2)
}

fn sq_distance(a: &Tensor, b: &Tensor) -> f64 {
    a.data()
        .iter()
        .zip(b.data().iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// Centered PCA projection onto the top principal axes. Returns the
/// projected vectors and the explained-variance fraction per component.
pub fn pca_project(vectors: &[Tensor], out_dim: usize) -> Result<(Vec<Tensor>, Vec<f64>)> {
    if vectors.is_empty() {
        return Err(CoreError::EmptyInput("pca input".into()));
    }
    let d = vectors[0].len();
    if out_dim == 0 || out_dim > d {
        return Err(CoreError::InvalidArgument(format!(
            "out_dim must lie in 1..={d}, got {out_dim}"
        )));
    }
    let n = vectors.len() as f64;
    let mut mean = vec![0.0; d];
    for v in vectors {
        for (m, &x) in mean.iter_mut().zip(v.data()) {
            *m += x / n;
        }
    }
    let mut cov = Tensor::zeros(&[d, d]);
    for v in vectors {
        for i in 0..d {
            for j in 0..d {
                let add = (v.data()[i] - mean[i]) * (v.data()[j] - mean[j]) / n;
                let cur = cov.get(i, j);
                cov.set(i, j, cur + add);
            }
        }
    }
    let (eigenvalues, eigenvectors) = symmetric_eigen(&cov)?;
    let trace: f64 = eigenvalues.iter().sum();
    let explained: Vec<f64> = eigenvalues
        .iter()
        .take(out_dim)
        .map(|&l| if trace > 0.0 { l / trace } else { 0.0 })
        .collect();
    let projected = vectors
        .iter()
        .map(|v| {
            let mut out = vec![0.0; out_dim];
            for (c, o) in out.iter_mut().enumerate() {
                for (i, (&vi, &mi)) in v.data().iter().zip(mean.iter()).enumerate() {
                    *o += (vi - mi) * eigenvectors.get(i, c);
                }
            }
            Tensor::vector(&out)
        })
        .collect();
    Ok((projected, explained))
}
