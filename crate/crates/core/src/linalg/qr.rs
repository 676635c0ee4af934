use super::RealMatrix;
use crate::error::{Error, Result};

/// Thin QR factorization `M = Q R` of a tall matrix.
#[derive(Debug, Clone)]
pub struct Qr {
    /// `rows x cols`, orthonormal columns.
    pub q: RealMatrix,
    /// `cols x cols`, upper triangular with a positive diagonal.
    pub r: RealMatrix,
}

/// Householder QR with the diagonal of `R` made positive.
///
/// Fails with [`Error::RankDeficient`] when a pivot falls below `1e-12` times the
/// largest column norm of `m`.
pub fn qr_decompose(m: &RealMatrix) -> Result<Qr> {
    let (rows, cols) = (m.rows(), m.cols());
    if rows < cols {
        return Err(Error::DimensionMismatch(format!(
            "QR needs rows >= cols, got {rows}x{cols}"
        )));
    }
    let scale = (0..cols)
        .map(|j| m.column(j).iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::RankDeficient { column: 0 });
    }

    // Column-major working copy; reflectors stored per step.
    let mut a: Vec<Vec<f64>> = (0..cols).map(|j| m.column(j)).collect();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(cols);

    for k in 0..cols {
        let x = &a[k][k..];
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-12 * scale {
            return Err(Error::RankDeficient { column: k });
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = x.to_vec();
        v[0] -= alpha;
        let vnorm = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        if vnorm > 0.0 {
            v.iter_mut().for_each(|t| *t /= vnorm);
        }
        for col in a.iter_mut().skip(k) {
            let tail = &mut col[k..];
            let dot: f64 = v.iter().zip(tail.iter()).map(|(p, q)| p * q).sum();
            for (t, vi) in tail.iter_mut().zip(&v) {
                *t -= 2.0 * dot * vi;
            }
        }
        reflectors.push(v);
    }

    let mut r = RealMatrix::zeros(cols, cols);
    for (j, col) in a.iter().enumerate() {
        for (i, &val) in col.iter().enumerate().take(j + 1) {
            r[(i, j)] = val;
        }
    }

    // Q = H_0 H_1 ... H_{n-1} applied to the first `cols` unit vectors.
    let mut q_cols: Vec<Vec<f64>> = (0..cols)
        .map(|j| {
            let mut e = vec![0.0; rows];
            e[j] = 1.0;
            e
        })
        .collect();
    for (k, v) in reflectors.iter().enumerate().rev() {
        for col in q_cols.iter_mut() {
            let tail = &mut col[k..];
            let dot: f64 = v.iter().zip(tail.iter()).map(|(p, q)| p * q).sum();
            for (t, vi) in tail.iter_mut().zip(v) {
                *t -= 2.0 * dot * vi;
            }
        }
    }

    for i in 0..cols {
        if r[(i, i)] < 0.0 {
            for j in i..cols {
                r[(i, j)] = -r[(i, j)];
            }
            for x in q_cols[i].iter_mut() {
                *x = -*x;
            }
        }
    }

    let q = RealMatrix::from_columns(&q_cols)?;
    Ok(Qr { q, r })
}
