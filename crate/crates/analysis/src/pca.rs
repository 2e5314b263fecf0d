use crate::error::{AnalysisError, Result};

/// Principal component decomposition of a small dense data matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    /// Column means of the input, subtracted before projection.
    pub mean: Vec<f64>,
    /// Top-k eigenvectors of the covariance, one `Vec` per component,
    /// orthonormal, ordered by descending eigenvalue. Sign convention: the
    /// first component with magnitude above 1e-12 is positive.
    pub basis: Vec<Vec<f64>>,
    /// Input rows projected onto the basis, n rows of k scores.
    pub scores: Vec<Vec<f64>>,
    /// All eigenvalues of the covariance, descending, clamped at zero.
    pub eigenvalues: Vec<f64>,
    /// Fraction of total variance carried by each kept component.
    pub explained: Vec<f64>,
}

impl Pca {
    /// Map a score row back into the original space.
    pub fn reconstruct(&self, score: &[f64]) -> Vec<f64> {
        let d = self.mean.len();
        let mut out = self.mean.clone();
        for (s, axis) in score.iter().zip(&self.basis) {
            for i in 0..d {
                out[i] += s * axis[i];
            }
        }
        out
    }
}

/// Reduce `rows` (n samples of equal width d) to `k` principal components.
///
/// The covariance is the sample covariance of the mean-centered data and its
/// eigensystem is solved exactly with cyclic Jacobi rotations, so the result
/// is deterministic: no iteration-order or initialization freedom. Requires
/// `1 <= k <= d` and `n >= k`.
pub fn pca_reduce(rows: &[Vec<f64>], k: usize) -> Result<Pca> {
    let n = rows.len();
    if n < k {
        return Err(AnalysisError::TooFewRows { rows: n, need: k });
    }
    if k == 0 {
        return Err(AnalysisError::InvalidInput("k must be at least 1".into()));
    }
    let d = rows[0].len();
    if d == 0 {
        return Err(AnalysisError::InvalidInput("rows must be non-empty".into()));
    }
    if k > d {
        return Err(AnalysisError::InvalidInput(format!(
            "cannot keep {k} components of {d}-dimensional data"
        )));
    }
    for r in rows {
        if r.len() != d {
            return Err(AnalysisError::RaggedRows { a: d, b: r.len() });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(AnalysisError::NonFinite);
        }
    }

    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    let denom = (n.max(2) - 1) as f64;
    let mut cov = vec![0.0; d * d];
    for r in rows {
        for i in 0..d {
            let ci = r[i] - mean[i];
            for j in i..d {
                cov[i * d + j] += ci * (r[j] - mean[j]) / denom;
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            cov[i * d + j] = cov[j * d + i];
        }
    }

    let (mut eigenvalues, mut vectors) = jacobi_eigen(&cov, d);

    // descending eigenvalue order with a stable tie rule
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eigenvalues[b].partial_cmp(&eigenvalues[a]).unwrap().then(a.cmp(&b)));
    eigenvalues = order.iter().map(|&i| eigenvalues[i].max(0.0)).collect();
    vectors = order.iter().map(|&i| std::mem::take(&mut vectors[i])).collect();

    for v in &mut vectors {
        if let Some(first) = v.iter().find(|c| c.abs() > 1e-12) {
            if *first < 0.0 {
                for c in v.iter_mut() {
                    *c = -*c;
                }
            }
        }
    }

    let total: f64 = eigenvalues.iter().sum();
    let explained = eigenvalues[..k]
        .iter()
        .map(|&l| if total > 0.0 { l / total } else { 0.0 })
        .collect();

    let basis: Vec<Vec<f64>> = vectors.into_iter().take(k).collect();
    let scores = rows
        .iter()
        .map(|r| {
            basis
                .iter()
                .map(|axis| axis.iter().zip(r).zip(&mean).map(|((a, v), m)| a * (v - m)).sum())
                .collect()
        })
        .collect();

    Ok(Pca { mean, basis, scores, eigenvalues, explained })
}

/// Cyclic Jacobi eigensolver for a symmetric matrix in row-major order.
/// Returns unsorted (eigenvalues, eigenvectors as rows of the result).
fn jacobi_eigen(sym: &[f64], d: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut a = sym.to_vec();
    // v holds the accumulated rotations; column j converges to eigenvector j
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    let scale: f64 = sym.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    off += a[i * d + j] * a[i * d + j];
                }
            }
        }
        if off.sqrt() <= 1e-14 * scale {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..d {
                    let aip = a[i * d + p];
                    let aiq = a[i * d + q];
                    a[i * d + p] = c * aip - s * aiq;
                    a[i * d + q] = s * aip + c * aiq;
                }
                for j in 0..d {
                    let apj = a[p * d + j];
                    let aqj = a[q * d + j];
                    a[p * d + j] = c * apj - s * aqj;
                    a[q * d + j] = s * apj + c * aqj;
                }
                for i in 0..d {
                    let vip = v[i * d + p];
                    let viq = v[i * d + q];
                    v[i * d + p] = c * vip - s * viq;
                    v[i * d + q] = s * vip + c * viq;
                }
            }
        }
    }

    let values = (0..d).map(|i| a[i * d + i]).collect();
    let vectors = (0..d).map(|j| (0..d).map(|i| v[i * d + j]).collect()).collect();
    (values, vectors)
}
