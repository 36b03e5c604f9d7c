//! Reverse-mode automatic differentiation on a linear tape.
//!
//! Forward evaluation is eager: every operation computes its value
//! immediately and records itself as a node. `backward` replays the nodes in
//! reverse, accumulating vector-Jacobian products. `detach` realizes the
//! stop-gradient operator: values flow forward, gradients stop cold.

use crate::error::{CoreError, Result};
use crate::tensor::Tensor;

/// Handle to a value recorded on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ValueId(usize);

impl ValueId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    // The parent id and the added constant are kept for graph dumps even
    // though backward never reads them (Detach blocks, AddConst passes).
    #[allow(dead_code)]
    Detach(ValueId),
    Add(ValueId, ValueId),
    Sub(ValueId, ValueId),
    Mul(ValueId, ValueId),
    Scale(ValueId, f64),
    #[allow(dead_code)]
    AddConst(ValueId, f64),
    Matmul(ValueId, ValueId),
    AddRowBroadcast(ValueId, ValueId),
    Exp(ValueId),
    Ln(ValueId),
    Tanh(ValueId),
    Sum(ValueId),
    Mean(ValueId),
    SoftmaxRows(ValueId),
    CrossEntropy { logits: ValueId, targets: Vec<usize> },
    SliceCols { src: ValueId, start: usize, end: usize },
    ConcatCols(ValueId, ValueId),
    PermuteCols { src: ValueId, perm: Vec<usize> },
    MaxConst(ValueId, f64),
}

struct Node {
    op: Op,
    value: Tensor,
    is_param: bool,
}

/// Gradients of one backward pass, indexed by `ValueId`.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: ValueId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    /// Gradient for `id`, zeros when nothing flowed to it.
    pub fn get_or_zeros(&self, id: ValueId, shape: &[usize]) -> Tensor {
        self.get(id).cloned().unwrap_or_else(|| Tensor::zeros(shape))
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: ValueId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Tensor, is_param: bool) -> ValueId {
        self.nodes.push(Node { op, value, is_param });
        ValueId(self.nodes.len() - 1)
    }

    /// Record a constant (no gradient is reported for it).
    pub fn constant(&mut self, t: Tensor) -> ValueId {
        self.push(Op::Leaf, t, false)
    }

    /// Record a parameter leaf; `backward` reports its gradient.
    pub fn param(&mut self, t: Tensor) -> ValueId {
        self.push(Op::Leaf, t, true)
    }

    /// Stop-gradient: forwards the value, blocks the backward path.
    pub fn detach(&mut self, v: ValueId) -> ValueId {
        let t = self.value(v).clone();
        self.push(Op::Detach(v), t, false)
    }

    pub fn add(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        let t = self.value(a).add(self.value(b))?;
        Ok(self.push(Op::Add(a, b), t, false))
    }

    pub fn sub(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        let t = self.value(a).sub(self.value(b))?;
        Ok(self.push(Op::Sub(a, b), t, false))
    }

    pub fn mul(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        let t = self.value(a).mul(self.value(b))?;
        Ok(self.push(Op::Mul(a, b), t, false))
    }

    pub fn scale(&mut self, v: ValueId, c: f64) -> ValueId {
        let t = self.value(v).scale(c);
        self.push(Op::Scale(v, c), t, false)
    }

    pub fn add_const(&mut self, v: ValueId, c: f64) -> ValueId {
        let t = self.value(v).map(|x| x + c);
        self.push(Op::AddConst(v, c), t, false)
    }

    pub fn neg(&mut self, v: ValueId) -> ValueId {
        self.scale(v, -1.0)
    }

    pub fn matmul(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        let t = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::Matmul(a, b), t, false))
    }

    /// Matrix plus row vector broadcast over rows.
    pub fn add_row_broadcast(&mut self, m: ValueId, row: ValueId) -> Result<ValueId> {
        let t = self.value(m).add_row_broadcast(self.value(row))?;
        Ok(self.push(Op::AddRowBroadcast(m, row), t, false))
    }

    pub fn exp(&mut self, v: ValueId) -> Result<ValueId> {
        let t = self.value(v).map(f64::exp);
        t.ensure_finite("exp")?;
        Ok(self.push(Op::Exp(v), t, false))
    }

    pub fn ln(&mut self, v: ValueId) -> Result<ValueId> {
        let t = self.value(v).map(f64::ln);
        t.ensure_finite("ln")?;
        Ok(self.push(Op::Ln(v), t, false))
    }

    pub fn tanh(&mut self, v: ValueId) -> ValueId {
        let t = self.value(v).map(f64::tanh);
        self.push(Op::Tanh(v), t, false)
    }

    pub fn sum(&mut self, v: ValueId) -> ValueId {
        let t = Tensor::scalar(self.value(v).sum());
        self.push(Op::Sum(v), t, false)
    }

    pub fn mean(&mut self, v: ValueId) -> ValueId {
        let n = self.value(v).len() as f64;
        let t = Tensor::scalar(self.value(v).sum() / n);
        self.push(Op::Mean(v), t, false)
    }

    /// Sum of squared entries as a scalar node.
    pub fn sum_sq(&mut self, v: ValueId) -> Result<ValueId> {
        let sq = self.mul(v, v)?;
        Ok(self.sum(sq))
    }

    pub fn softmax_rows(&mut self, v: ValueId) -> Result<ValueId> {
        let t = self.value(v).softmax_rows()?;
        Ok(self.push(Op::SoftmaxRows(v), t, false))
    }

    /// Mean negative log-likelihood of `targets` under row-wise softmax.
    pub fn cross_entropy(&mut self, logits: ValueId, targets: &[usize]) -> Result<ValueId> {
        let l = self.value(logits);
        if l.rank() != 2 || l.rows() != targets.len() {
            return Err(CoreError::ShapeMismatch(format!(
                "cross_entropy: logits {:?} vs {} targets",
                l.shape(),
                targets.len()
            )));
        }
        let cols = l.cols();
        if let Some(&t) = targets.iter().find(|&&t| t >= cols) {
            return Err(CoreError::IndexOutOfRange { index: t, dim: cols });
        }
        let probs = l.softmax_rows()?;
        let mut nll = 0.0;
        for (i, &t) in targets.iter().enumerate() {
            nll -= probs.get(i, t).max(f64::MIN_POSITIVE).ln();
        }
        nll /= targets.len() as f64;
        Ok(self.push(
            Op::CrossEntropy { logits, targets: targets.to_vec() },
            Tensor::scalar(nll),
            false,
        ))
    }

    /// Columns `start..end` of a rank-2 value.
    pub fn slice_cols(&mut self, src: ValueId, start: usize, end: usize) -> Result<ValueId> {
        let t = self.value(src);
        let (rows, cols) = (t.rows(), t.cols());
        if start >= end || end > cols {
            return Err(CoreError::InvalidArgument(format!(
                "slice_cols {start}..{end} of {cols} columns"
            )));
        }
        let mut data = Vec::with_capacity(rows * (end - start));
        for r in 0..rows {
            data.extend_from_slice(&t.row(r)[start..end]);
        }
        let out = Tensor::from_vec(vec![rows, end - start], data)?;
        Ok(self.push(Op::SliceCols { src, start, end }, out, false))
    }

    pub fn concat_cols(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rows() != tb.rows() {
            return Err(CoreError::ShapeMismatch(format!(
                "concat_cols: rows {} vs {}",
                ta.rows(),
                tb.rows()
            )));
        }
        let rows = ta.rows();
        let mut data = Vec::with_capacity(ta.len() + tb.len());
        for r in 0..rows {
            data.extend_from_slice(ta.row(r));
            data.extend_from_slice(tb.row(r));
        }
        let out = Tensor::from_vec(vec![rows, ta.cols() + tb.cols()], data)?;
        Ok(self.push(Op::ConcatCols(a, b), out, false))
    }

    /// Column permutation: output column j holds input column `perm[j]`.
    pub fn permute_cols(&mut self, src: ValueId, perm: &[usize]) -> Result<ValueId> {
        let t = self.value(src);
        let (rows, cols) = (t.rows(), t.cols());
        if perm.len() != cols {
            return Err(CoreError::ShapeMismatch(format!(
                "permute_cols: {} indices for {} columns",
                perm.len(),
                cols
            )));
        }
        let mut data = vec![0.0; rows * cols];
        for r in 0..rows {
            for (j, &p) in perm.iter().enumerate() {
                data[r * cols + j] = t.get(r, p);
            }
        }
        let out = Tensor::from_vec(vec![rows, cols], data)?;
        Ok(self.push(Op::PermuteCols { src, perm: perm.to_vec() }, out, false))
    }

    /// Elementwise max with a constant floor. The subgradient at a tie goes
    /// to the constant side (zero).
    pub fn max_const(&mut self, v: ValueId, c: f64) -> ValueId {
        let t = self.value(v).map(|x| x.max(c));
        self.push(Op::MaxConst(v, c), t, false)
    }

    /// Reverse pass from a scalar output. Returns gradients for every node
    /// that received one; detached subgraphs receive none.
    pub fn backward(&self, output: ValueId) -> Result<Gradients> {
        let out_node = &self.nodes[output.0];
        if !out_node.value.is_scalar() {
            return Err(CoreError::NonScalarOutput(out_node.value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=output.0).rev() {
            let Some(d_out) = grads[idx].clone() else { continue };
            match &self.nodes[idx].op {
                Op::Leaf | Op::Detach(_) => {}
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, d_out.clone());
                    accumulate(&mut grads, *b, d_out);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, d_out.clone());
                    accumulate(&mut grads, *b, d_out.scale(-1.0));
                }
                Op::Mul(a, b) => {
                    let da = d_out.mul(&self.nodes[b.0].value)?;
                    let db = d_out.mul(&self.nodes[a.0].value)?;
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Scale(v, c) => accumulate(&mut grads, *v, d_out.scale(*c)),
                Op::AddConst(v, _) => accumulate(&mut grads, *v, d_out),
                Op::Matmul(a, b) => {
                    let ta = &self.nodes[a.0].value;
                    let tb = &self.nodes[b.0].value;
                    let da = d_out.matmul(&tb.transpose())?;
                    let db = ta.transpose().matmul(&d_out)?;
                    accumulate(&mut grads, *a, reshape_like(da, ta));
                    accumulate(&mut grads, *b, reshape_like(db, tb));
                }
                Op::AddRowBroadcast(m, row) => {
                    let cols = self.nodes[row.0].value.len();
                    let mut d_row = vec![0.0; cols];
                    for r in 0..d_out.rows() {
                        for (j, dr) in d_row.iter_mut().enumerate() {
                            *dr += d_out.get(r, j);
                        }
                    }
                    accumulate(&mut grads, *m, d_out);
                    accumulate(
                        &mut grads,
                        *row,
                        reshape_like(Tensor::vector(&d_row), &self.nodes[row.0].value),
                    );
                }
                Op::Exp(v) => {
                    let dy = d_out.mul(&self.nodes[idx].value)?;
                    accumulate(&mut grads, *v, dy);
                }
                Op::Ln(v) => {
                    let x = &self.nodes[v.0].value;
                    let dy = d_out.mul(&x.map(|t| 1.0 / t))?;
                    accumulate(&mut grads, *v, dy);
                }
                Op::Tanh(v) => {
                    let y = &self.nodes[idx].value;
                    let dy = d_out.mul(&y.map(|t| 1.0 - t * t))?;
                    accumulate(&mut grads, *v, dy);
                }
                Op::Sum(v) => {
                    let g = d_out.item()?;
                    let shape = self.nodes[v.0].value.shape().to_vec();
                    accumulate(&mut grads, *v, Tensor::ones(&shape).scale(g));
                }
                Op::Mean(v) => {
                    let n = self.nodes[v.0].value.len() as f64;
                    let g = d_out.item()? / n;
                    let shape = self.nodes[v.0].value.shape().to_vec();
                    accumulate(&mut grads, *v, Tensor::ones(&shape).scale(g));
                }
                Op::SoftmaxRows(v) => {
                    let s = &self.nodes[idx].value;
                    let (rows, cols) = (s.rows(), s.cols());
                    let mut d_in = vec![0.0; rows * cols];
                    for r in 0..rows {
                        let mut dot = 0.0;
                        for j in 0..cols {
                            dot += d_out.get(r, j) * s.get(r, j);
                        }
                        for j in 0..cols {
                            d_in[r * cols + j] = s.get(r, j) * (d_out.get(r, j) - dot);
                        }
                    }
                    accumulate(&mut grads, *v, Tensor::from_vec(vec![rows, cols], d_in)?);
                }
                Op::CrossEntropy { logits, targets } => {
                    let g = d_out.item()? / targets.len() as f64;
                    let probs = self.nodes[logits.0].value.softmax_rows()?;
                    let (rows, cols) = (probs.rows(), probs.cols());
                    let mut d_l = vec![0.0; rows * cols];
                    for (r, &t) in targets.iter().enumerate() {
                        for j in 0..cols {
                            let onehot = if j == t { 1.0 } else { 0.0 };
                            d_l[r * cols + j] = g * (probs.get(r, j) - onehot);
                        }
                    }
                    accumulate(&mut grads, *logits, Tensor::from_vec(vec![rows, cols], d_l)?);
                }
                Op::SliceCols { src, start, end } => {
                    let t = &self.nodes[src.0].value;
                    let (rows, cols) = (t.rows(), t.cols());
                    let mut d_src = Tensor::zeros(&[rows, cols]);
                    for r in 0..rows {
                        for j in *start..*end {
                            d_src.set(r, j, d_out.get(r, j - start));
                        }
                    }
                    accumulate(&mut grads, *src, reshape_like(d_src, t));
                }
                Op::ConcatCols(a, b) => {
                    let ca = self.nodes[a.0].value.cols();
                    let cb = self.nodes[b.0].value.cols();
                    let rows = d_out.rows();
                    let mut da = Tensor::zeros(&[rows, ca]);
                    let mut db = Tensor::zeros(&[rows, cb]);
                    for r in 0..rows {
                        for j in 0..ca {
                            da.set(r, j, d_out.get(r, j));
                        }
                        for j in 0..cb {
                            db.set(r, j, d_out.get(r, ca + j));
                        }
                    }
                    accumulate(&mut grads, *a, reshape_like(da, &self.nodes[a.0].value));
                    accumulate(&mut grads, *b, reshape_like(db, &self.nodes[b.0].value));
                }
                Op::PermuteCols { src, perm } => {
                    let t = &self.nodes[src.0].value;
                    let (rows, cols) = (t.rows(), t.cols());
                    let mut d_src = Tensor::zeros(&[rows, cols]);
                    for r in 0..rows {
                        for (j, &p) in perm.iter().enumerate() {
                            d_src.set(r, p, d_out.get(r, j));
                        }
                    }
                    accumulate(&mut grads, *src, reshape_like(d_src, t));
                }
                Op::MaxConst(v, c) => {
                    let x = &self.nodes[v.0].value;
                    let mask: Vec<f64> =
                        x.data().iter().map(|&t| if t > *c { 1.0 } else { 0.0 }).collect();
                    let dm = d_out.mul(&Tensor::from_vec(x.shape().to_vec(), mask)?)?;
                    accumulate(&mut grads, *v, dm);
                }
            }
        }
        Ok(Gradients { grads })
    }

    /// Parameter gradients in registration order (zeros where none flowed).
    pub fn param_gradients(&self, grads: &Gradients, params: &[ValueId]) -> Vec<Tensor> {
        params
            .iter()
            .map(|&p| {
                debug_assert!(self.nodes[p.0].is_param);
                grads.get_or_zeros(p, self.nodes[p.0].value.shape())
            })
            .collect()
    }
}

fn reshape_like(mut g: Tensor, like: &Tensor) -> Tensor {
    // Matmul promotes rank-1 operands to a row; fold the gradient back.
    if g.shape() != like.shape() && g.len() == like.len() {
        g = Tensor::from_vec(like.shape().to_vec(), g.into_data()).expect("same length");
    }
    g
}

fn accumulate(grads: &mut [Option<Tensor>], id: ValueId, g: Tensor) {
    match &mut grads[id.0] {
        Some(existing) => {
            *existing = existing.add(&g).expect("gradient shapes agree");
        }
        slot @ None => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    /// Central finite differences of f at params, h = 1e-5.
    fn finite_diff(
        f: &dyn Fn(&[Tensor]) -> f64,
        params: &[Tensor],
        h: f64,
    ) -> Vec<Tensor> {
        let mut out = Vec::new();
        for (pi, p) in params.iter().enumerate() {
            let mut g = Tensor::zeros(p.shape());
            for i in 0..p.len() {
                let mut plus = params.to_vec();
                plus[pi].data_mut()[i] += h;
                let mut minus = params.to_vec();
                minus[pi].data_mut()[i] -= h;
                g.data_mut()[i] = (f(&plus) - f(&minus)) / (2.0 * h);
            }
            out.push(g);
        }
        out
    }

    #[test]
    fn square_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(3.0));
        let y = tape.mul(x, x).unwrap();
        let grads = tape.backward(y).unwrap();
        assert_eq!(grads.get(x).unwrap().item().unwrap(), 6.0);
    }

    #[test]
    fn detach_blocks_gradient() {
        // d(sg(x) * y)/dx = 0, d/dy = x
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(4.0));
        let y = tape.param(Tensor::scalar(5.0));
        let sx = tape.detach(x);
        let prod = tape.mul(sx, y).unwrap();
        let grads = tape.backward(prod).unwrap();
        assert!(grads.get(x).is_none());
        assert_eq!(grads.get(y).unwrap().item().unwrap(), 4.0);
    }

    #[test]
    fn backward_requires_scalar() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(&[1.0, 2.0]));
        assert!(matches!(tape.backward(x), Err(CoreError::NonScalarOutput(_))));
    }

    #[test]
    fn shared_node_accumulates() {
        // out = x*x + x => d/dx = 2x + 1
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(3.0));
        let sq = tape.mul(x, x).unwrap();
        let out = tape.add(sq, x).unwrap();
        let grads = tape.backward(out).unwrap();
        assert_eq!(grads.get(x).unwrap().item().unwrap(), 7.0);
    }

    #[test]
    fn mlp_gradient_matches_finite_differences() {
        let mut rng = Rng::from_seed(17);
        let w1 = Tensor::randn(&[4, 8], &mut rng);
        let b1 = Tensor::randn(&[8], &mut rng).scale(0.1);
        let w2 = Tensor::randn(&[8, 1], &mut rng);
        let x = Tensor::matrix(1, 4, rng.gaussian_vec(4)).unwrap();

        let eval = |params: &[Tensor]| -> f64 {
            let mut tape = Tape::new();
            let xv = tape.constant(x.clone());
            let w1v = tape.param(params[0].clone());
            let b1v = tape.param(params[1].clone());
            let w2v = tape.param(params[2].clone());
            let h = tape.matmul(xv, w1v).unwrap();
            let h = tape.add_row_broadcast(h, b1v).unwrap();
            let h = tape.tanh(h);
            let o = tape.matmul(h, w2v).unwrap();
            let loss = tape.sum_sq(o).unwrap();
            tape.value(loss).item().unwrap()
        };

        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let w1v = tape.param(w1.clone());
        let b1v = tape.param(b1.clone());
        let w2v = tape.param(w2.clone());
        let h = tape.matmul(xv, w1v).unwrap();
        let h = tape.add_row_broadcast(h, b1v).unwrap();
        let h = tape.tanh(h);
        let o = tape.matmul(h, w2v).unwrap();
        let loss = tape.sum_sq(o).unwrap();
        let grads = tape.backward(loss).unwrap();
        let analytic = tape.param_gradients(&grads, &[w1v, b1v, w2v]);

        let numeric = finite_diff(&eval, &[w1, b1, w2], 1e-5);
        for (a, n) in analytic.iter().zip(numeric.iter()) {
            for (&ga, &gn) in a.data().iter().zip(n.data().iter()) {
                let denom = gn.abs().max(1e-6);
                assert!(
                    ((ga - gn) / denom).abs() < 1e-5,
                    "analytic {ga} vs numeric {gn}"
                );
            }
        }
    }

    #[test]
    fn softmax_cross_entropy_gradients_match_fd() {
        let mut rng = Rng::from_seed(23);
        let logits = Tensor::matrix(3, 5, rng.gaussian_vec(15)).unwrap();
        let targets = vec![1usize, 4, 0];

        let eval = |params: &[Tensor]| -> f64 {
            let mut tape = Tape::new();
            let l = tape.param(params[0].clone());
            let ce = tape.cross_entropy(l, &targets).unwrap();
            tape.value(ce).item().unwrap()
        };

        let mut tape = Tape::new();
        let l = tape.param(logits.clone());
        let ce = tape.cross_entropy(l, &targets).unwrap();
        let grads = tape.backward(ce).unwrap();
        let analytic = grads.get(l).unwrap();
        let numeric = &finite_diff(&eval, &[logits], 1e-5)[0];
        for (&ga, &gn) in analytic.data().iter().zip(numeric.data().iter()) {
            assert!((ga - gn).abs() < 1e-7, "{ga} vs {gn}");
        }
    }

    #[test]
    fn slice_concat_permute_roundtrip_gradient() {
        let mut rng = Rng::from_seed(31);
        let x0 = Tensor::matrix(1, 6, rng.gaussian_vec(6)).unwrap();
        let perm = vec![2usize, 0, 5, 1, 4, 3];

        let eval = |params: &[Tensor]| -> f64 {
            let mut tape = Tape::new();
            let x = tape.param(params[0].clone());
            let p = tape.permute_cols(x, &perm).unwrap();
            let a = tape.slice_cols(p, 0, 3).unwrap();
            let b = tape.slice_cols(p, 3, 6).unwrap();
            let a2 = tape.exp(a).unwrap();
            let joined = tape.concat_cols(a2, b).unwrap();
            let s = tape.sum_sq(joined).unwrap();
            tape.value(s).item().unwrap()
        };

        let mut tape = Tape::new();
        let x = tape.param(x0.clone());
        let p = tape.permute_cols(x, &perm).unwrap();
        let a = tape.slice_cols(p, 0, 3).unwrap();
        let b = tape.slice_cols(p, 3, 6).unwrap();
        let a2 = tape.exp(a).unwrap();
        let joined = tape.concat_cols(a2, b).unwrap();
        let s = tape.sum_sq(joined).unwrap();
        let grads = tape.backward(s).unwrap();
        let analytic = grads.get(x).unwrap();
        let numeric = &finite_diff(&eval, &[x0], 1e-5)[0];
        for (&ga, &gn) in analytic.data().iter().zip(numeric.data().iter()) {
            let denom = gn.abs().max(1e-6);
            assert!(((ga - gn) / denom).abs() < 1e-4, "{ga} vs {gn}");
        }
    }

    #[test]
    fn max_const_floor_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(&[0.1, 2.0]));
        let fl = tape.max_const(x, 0.5);
        let s = tape.sum(fl);
        assert_eq!(tape.value(s).item().unwrap(), 2.5);
        let grads = tape.backward(s).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[0.0, 1.0]);
    }

    #[test]
    fn deterministic_replay() {
        let build = || {
            let mut rng = Rng::from_seed(99);
            let mut tape = Tape::new();
            let x = tape.param(Tensor::randn(&[2, 3], &mut rng));
            let w = tape.param(Tensor::randn(&[3, 2], &mut rng));
            let y = tape.matmul(x, w).unwrap();
            let sm = tape.softmax_rows(y).unwrap();
            let loss = tape.sum_sq(sm).unwrap();
            let grads = tape.backward(loss).unwrap();
            (
                tape.value(loss).item().unwrap(),
                grads.get(w).unwrap().data().to_vec(),
            )
        };
        assert_eq!(build(), build());
    }
}
