//! Convex-cone latent geometry: labelled embedding records, linear
//! interpolation paths, dimension-resampling traversal, Ornstein-Uhlenbeck
//! walks, latent arithmetic, nonnegative-combination cone membership, and
//! the averaging/resampling data-augmentation procedure.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// One identified embedding with its label map and optional per-token
/// embeddings; the universal ingestion unit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatentRecord {
    pub id: String,
    #[serde(with = "vec_tensor")]
    pub vector: Tensor,
    #[serde(default)]
    pub labels: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<TokenEmbedding>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TokenEmbedding {
    pub text: String,
    #[serde(with = "vec_tensor")]
    pub vector: Tensor,
}

mod vec_tensor {
    use super::Tensor;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(t: &Tensor, s: S) -> Result<S::Ok, S::Error> {
        t.data().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Tensor, D::Error> {
        let data = Vec::<f64>::deserialize(d)?;
        Ok(Tensor::vector(&data))
    }
}

impl LatentRecord {
    pub fn new(id: impl Into<String>, vector: Tensor) -> Self {
        LatentRecord { id: id.into(), vector, labels: BTreeMap::new(), tokens: None }
    }

    pub fn with_label(mut self, key: &str, value: &str) -> Self {
        self.labels.insert(key.to_string(), value.to_string());
        self
    }

    pub fn label(&self, key: &str) -> Option<&str> {
        self.labels.get(key).map(String::as_str)
    }
}

/// A role-content cone given by the member vectors collected from a corpus.
#[derive(Debug, Clone)]
pub struct ConeSpec {
    pub role: String,
    pub content: String,
    pub basis: Vec<Tensor>,
}

impl ConeSpec {
    pub fn new(role: &str, content: &str, basis: Vec<Tensor>) -> Result<Self> {
        if basis.is_empty() {
            return Err(CoreError::EmptyInput("cone basis".into()));
        }
        let dim = basis[0].len();
        if basis.iter().any(|b| b.len() != dim) {
            return Err(CoreError::ShapeMismatch("cone basis dimensions differ".into()));
        }
        Ok(ConeSpec { role: role.to_string(), content: content.to_string(), basis })
    }

    /// Collects same-label vectors from records into a cone basis.
    pub fn from_records(records: &[LatentRecord], role: &str, content: &str) -> Result<Self> {
        let basis: Vec<Tensor> = records
            .iter()
            .filter(|r| r.label(role) == Some(content))
            .map(|r| r.vector.clone())
            .collect();
        ConeSpec::new(role, content, basis)
    }

    pub fn dim(&self) -> usize {
        self.basis[0].len()
    }
}

/// Membership verdict with the achieved least-squares residual.
#[derive(Debug, Clone, Copy)]
pub struct MembershipResult {
    pub member: bool,
    pub residual: f64,
}

/// Default membership tolerance: 1e-6 scaled by the candidate norm.
pub fn default_cone_tolerance(candidate: &Tensor) -> f64 {
    (1e-6 * candidate.norm()).max(1e-12)
}

/// Tests whether `candidate` is a nonnegative combination of the basis,
/// solving min ||B a - x|| s.t. a >= 0 by active-set nonnegative least
/// squares (iteration cap 10 x dim).
pub fn cone_membership(candidate: &Tensor, cone: &ConeSpec, tol: f64) -> Result<MembershipResult> {
    if candidate.len() != cone.dim() {
        return Err(CoreError::ShapeMismatch(format!(
            "candidate dim {} vs cone dim {}",
            candidate.len(),
            cone.dim()
        )));
    }
    let coeffs = nnls(&cone.basis, candidate)?;
    let mut reconstructed = Tensor::zeros(&[candidate.len()]);
    for (a, b) in coeffs.iter().zip(cone.basis.iter()) {
        if *a != 0.0 {
            reconstructed = reconstructed.add(&b.scale(*a))?;
        }
    }
    let residual = reconstructed.sub(&flatten(candidate))?.norm();
    Ok(MembershipResult { member: residual <= tol, residual })
}

fn flatten(t: &Tensor) -> Tensor {
    Tensor::vector(t.data())
}

/// Lawson-Hanson nonnegative least squares over the basis columns.
fn nnls(basis: &[Tensor], target: &Tensor) -> Result<Vec<f64>> {
    let n = basis.len();
    let dim = target.len();
    let max_iter = 10 * dim.max(n);

    let dot = |a: &Tensor, b: &[f64]| -> f64 {
        a.data().iter().zip(b.iter()).map(|(x, y)| x * y).sum()
    };

    let mut x = vec![0.0; n];
    let mut passive: Vec<bool> = vec![false; n];
    let mut residual: Vec<f64> = target.data().to_vec();

    for _ in 0..max_iter {
        // Gradient of 0.5 ||B a - x||^2 restricted to the active set.
        let w: Vec<f64> = basis.iter().map(|b| dot(b, &residual)).collect();
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if !passive[j] && w[j] > 1e-12
                && best.is_none_or(|(_, bw)| w[j] > bw) {
                    best = Some((j, w[j]));
                }
        }
        let Some((enter, _)) = best else { break };
        passive[enter] = true;

        loop {
            let s = solve_passive(basis, target, &passive)?;
            let negative: Vec<usize> = (0..n)
                .filter(|&j| passive[j] && s[j] <= 1e-12)
                .collect();
            if negative.is_empty() {
                for j in 0..n {
                    x[j] = if passive[j] { s[j] } else { 0.0 };
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for &j in &negative {
                let denom = x[j] - s[j];
                if denom.abs() > 1e-15 {
                    alpha = alpha.min(x[j] / denom);
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for j in 0..n {
                if passive[j] {
                    x[j] += alpha * (s[j] - x[j]);
                    if x[j] <= 1e-12 {
                        x[j] = 0.0;
                        passive[j] = false;
                    }
                }
            }
        }
        for (j, r) in residual.iter_mut().enumerate() {
            let mut reconstructed = 0.0;
            for (b, &c) in basis.iter().zip(x.iter()) {
                reconstructed += c * b.data()[j];
            }
            *r = target.data()[j] - reconstructed;
        }
    }
    Ok(x)
}

/// Unconstrained least squares restricted to the passive columns, solved via
/// the normal equations with a small ridge for degenerate bases.
fn solve_passive(basis: &[Tensor], target: &Tensor, passive: &[bool]) -> Result<Vec<f64>> {
    let cols: Vec<usize> = (0..basis.len()).filter(|&j| passive[j]).collect();
    let m = cols.len();
    if m == 0 {
        return Ok(vec![0.0; basis.len()]);
    }
    let mut gram = Tensor::zeros(&[m, m]);
    let mut rhs = vec![0.0; m];
    for (a, &ja) in cols.iter().enumerate() {
        for (b, &jb) in cols.iter().enumerate() {
            let v = basis[ja].dot(&basis[jb])?;
            gram.set(a, b, if a == b { v + 1e-12 } else { v });
        }
        rhs[a] = basis[ja]
            .data()
            .iter()
            .zip(target.data().iter())
            .map(|(x, y)| x * y)
            .sum();
    }
    let sol = crate::linalg::solve(&gram, &rhs)?;
    let mut full = vec![0.0; basis.len()];
    for (a, &j) in cols.iter().enumerate() {
        full[j] = sol[a];
    }
    Ok(full)
}

/// Linear interpolation path `z1 (1-t) + z2 t` for t = 0, step, ..., 1
/// inclusive; endpoints are returned exactly.
pub fn interpolate(z1: &Tensor, z2: &Tensor, step: f64) -> Result<Vec<Tensor>> {
    if z1.shape() != z2.shape() {
        return Err(CoreError::ShapeMismatch(format!(
            "interpolate: {:?} vs {:?}",
            z1.shape(),
            z2.shape()
        )));
    }
    if step <= 0.0 || step > 1.0 {
        return Err(CoreError::InvalidArgument(format!(
            "interpolation step must lie in (0, 1], got {step}"
        )));
    }
    let mut path = vec![z1.clone()];
    let delta = z2.sub(z1)?;
    let mut k = 1usize;
    loop {
        let t = k as f64 * step;
        if t >= 1.0 - 1e-12 {
            break;
        }
        // z1 + t (z2 - z1): equal endpoints yield a bit-identical path.
        path.push(z1.add(&delta.scale(t))?);
        k += 1;
    }
    path.push(z2.clone());
    Ok(path)
}

/// Copy of `z` with coordinate `dim` redrawn from the standard normal; all
/// other coordinates bit-identical.
pub fn traverse_dimension(z: &Tensor, dim: usize, rng: &mut Rng) -> Result<Tensor> {
    if dim >= z.len() {
        return Err(CoreError::IndexOutOfRange { index: dim, dim: z.len() });
    }
    let mut out = z.clone();
    out.data_mut()[dim] = rng.gaussian();
    Ok(out)
}

/// Ornstein-Uhlenbeck recurrence `z_{t+1} = -gamma z_t + sigma W_t` with
/// standard-normal noise. Returns the `steps` states after the seed.
pub fn ou_walk(z0: &Tensor, gamma: f64, sigma: f64, steps: usize, rng: &mut Rng) -> Vec<Tensor> {
    let mut path = Vec::with_capacity(steps);
    let mut current = z0.clone();
    for _ in 0..steps {
        let noise = Tensor::vector(&rng.gaussian_vec(current.len()));
        let next = current
            .scale(-gamma)
            .add(&noise.scale(sigma))
            .expect("shapes fixed");
        let next = Tensor::from_vec(z0.shape().to_vec(), next.into_data()).expect("same shape");
        path.push(next.clone());
        current = next;
    }
    path
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArithmeticOp {
    Add,
    Sub,
    Average,
}

impl std::str::FromStr for ArithmeticOp {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "add" => Ok(ArithmeticOp::Add),
            "sub" => Ok(ArithmeticOp::Sub),
            "average" => Ok(ArithmeticOp::Average),
            other => Err(CoreError::InvalidArgument(format!(
                "unknown arithmetic op {other:?} (expected add|sub|average)"
            ))),
        }
    }
}

pub fn arithmetic(op: ArithmeticOp, z1: &Tensor, z2: &Tensor) -> Result<Tensor> {
    match op {
        ArithmeticOp::Add => z1.add(z2),
        ArithmeticOp::Sub => z1.sub(z2),
        ArithmeticOp::Average => Ok(z1.add(z2)?.scale(0.5)),
    }
}

/// Latent transform used by augmentation: identity for raw embedding spaces,
/// or a flow mapping to and from its Gaussian space.
pub trait LatentTransform {
    fn encode(&self, x: &Tensor) -> Result<Tensor>;
    fn decode(&self, z: &Tensor) -> Result<Tensor>;
}

pub struct IdentityTransform;

impl LatentTransform for IdentityTransform {
    fn encode(&self, x: &Tensor) -> Result<Tensor> {
        Ok(flatten(x))
    }
    fn decode(&self, z: &Tensor) -> Result<Tensor> {
        Ok(flatten(z))
    }
}

impl LatentTransform for crate::flow::FlowModel {
    fn encode(&self, x: &Tensor) -> Result<Tensor> {
        Ok(flatten(&self.forward(x)?.0))
    }
    fn decode(&self, z: &Tensor) -> Result<Tensor> {
        Ok(flatten(&self.inverse(z)?))
    }
}

/// Augmentation by averaging and neighbour traversal: repeatedly average two
/// same-label vectors in the transform space, emit one candidate per
/// coordinate with that coordinate redrawn, decode, and keep candidates the
/// filter accepts, until `budget` keepers exist or the candidate stream is
/// exhausted (budget * dim * 8 attempts).
pub fn augment(
    records: &[LatentRecord],
    transform: &dyn LatentTransform,
    label_key: &str,
    label_value: &str,
    rng: &mut Rng,
    budget: usize,
    mut keep: impl FnMut(&Tensor) -> bool,
) -> Result<Vec<LatentRecord>> {
    let members: Vec<&LatentRecord> = records
        .iter()
        .filter(|r| r.label(label_key) == Some(label_value))
        .collect();
    if members.len() < 2 {
        return Err(CoreError::InvalidArgument(format!(
            "augmentation needs at least 2 records labelled {label_key}={label_value}, got {}",
            members.len()
        )));
    }
    let mut out = Vec::with_capacity(budget);
    if budget == 0 {
        return Ok(out);
    }
    let dim = members[0].vector.len();
    let max_attempts = budget * dim.max(1) * 8;
    let mut attempts = 0;
    'outer: while out.len() < budget && attempts < max_attempts {
        let i = rng.below(members.len());
        let mut j = rng.below(members.len());
        if members.len() > 1 {
            while j == i {
                j = rng.below(members.len());
            }
        }
        let zi = transform.encode(&members[i].vector)?;
        let zj = transform.encode(&members[j].vector)?;
        let center = arithmetic(ArithmeticOp::Average, &zi, &zj)?;
        for d in 0..dim {
            attempts += 1;
            let neighbour = traverse_dimension(&center, d, rng)?;
            let decoded = transform.decode(&neighbour)?;
            if keep(&decoded) {
                let mut labels = BTreeMap::new();
                labels.insert(label_key.to_string(), label_value.to_string());
                out.push(LatentRecord {
                    id: format!("aug-{:04}", out.len()),
                    vector: decoded,
                    labels,
                    tokens: None,
                });
                if out.len() >= budget {
                    break 'outer;
                }
            }
            if attempts >= max_attempts {
                break 'outer;
            }
        }
    }
    Ok(out)
}
