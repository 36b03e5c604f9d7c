//! Small dense solvers: Gaussian elimination and a Jacobi eigendecomposition
//! for symmetric matrices. Sizes here are desk-scale (tens of dimensions).

use crate::error::{CoreError, Result};
use crate::tensor::Tensor;

/// Solves A x = b by Gaussian elimination with partial pivoting.
pub fn solve(a: &Tensor, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n || b.len() != n {
        return Err(CoreError::ShapeMismatch(format!(
            "solve: A is {:?}, b has {}",
            a.shape(),
            b.len()
        )));
    }
    let mut m = a.data().to_vec();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let mut pivot = col;
        for r in col + 1..n {
            if m[r * n + col].abs() > m[pivot * n + col].abs() {
                pivot = r;
            }
        }
        if m[pivot * n + col].abs() < 1e-14 {
            return Err(CoreError::InvalidArgument("singular system".into()));
        }
        if pivot != col {
            for j in 0..n {
                m.swap(col * n + j, pivot * n + j);
            }
            rhs.swap(col, pivot);
        }
        let diag = m[col * n + col];
        for r in col + 1..n {
            let factor = m[r * n + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                m[r * n + j] -= factor * m[col * n + j];
            }
            rhs[r] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut acc = rhs[r];
        for j in r + 1..n {
            acc -= m[r * n + j] * x[j];
        }
        x[r] = acc / m[r * n + r];
    }
    Ok(x)
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues, eigenvectors as columns), sorted by descending
/// eigenvalue with index order breaking ties. Each eigenvector is sign-fixed
/// so its largest-magnitude entry is positive.
pub fn symmetric_eigen(a: &Tensor) -> Result<(Vec<f64>, Tensor)> {
    let n = a.rows();
    if a.cols() != n {
        return Err(CoreError::ShapeMismatch(format!(
            "symmetric_eigen: {:?} is not square",
            a.shape()
        )));
    }
    let mut m = a.data().to_vec();
    let mut v = Tensor::eye(n).into_data();

    let off_diag_sq = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[i * n + j] * m[i * n + j];
                }
            }
        }
        s
    };

    for _sweep in 0..100 {
        if off_diag_sq(&m) < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-18 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[j * n + j]
            .partial_cmp(&m[i * n + i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });

    let eigenvalues: Vec<f64> = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vectors = Tensor::zeros(&[n, n]);
    for (new_col, &old_col) in order.iter().enumerate() {
        // Deterministic sign: the largest-|entry| coordinate made positive.
        let mut best = 0;
        for r in 1..n {
            if v[r * n + old_col].abs() > v[best * n + old_col].abs() {
                best = r;
            }
        }
        let sign = if v[best * n + old_col] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            vectors.set(r, new_col, sign * v[r * n + old_col]);
        }
    }
    Ok((eigenvalues, vectors))
}
