//! Dense Householder QR least squares for the small systems used here
//! (polynomial fits and damped Gauss-Newton steps).

use crate::error::{Error, Result};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

/// Columns whose R diagonal falls below this fraction of the largest one are
/// treated as linearly dependent.
const RANK_TOLERANCE: f64 = 1e-13;

/// Minimizes `||A x - b||` for a row-major `rows x cols` matrix.
///
/// Columns are scaled to unit norm before factorization so the rank test is
/// independent of column magnitudes. An all-zero column is reported as rank
/// deficiency.
pub fn least_squares(rows: usize, cols: usize, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != rows * cols || b.len() != rows {
        return Err(Error::invalid("least-squares dimensions do not match"));
    }
    if rows < cols {
        return Err(Error::Conditioning(format!(
            "{rows} equations for {cols} unknowns"
        )));
    }

    // Column-major working copy.
    let mut q = vec![0.0; rows * cols];
    let mut scale = vec![0.0; cols];
    for j in 0..cols {
        let mut norm = 0.0;
        for i in 0..rows {
            let v = a[i * cols + j];
            norm += v * v;
        }
        let norm = libm::sqrt(norm);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Conditioning(format!("column {j} is zero or non-finite")));
        }
        scale[j] = norm;
        for i in 0..rows {
            q[j * rows + i] = a[i * cols + j] / norm;
        }
    }
    let mut rhs = b.to_vec();
    let mut diag = vec![0.0; cols];

    for k in 0..cols {
        let col = &q[k * rows..(k + 1) * rows];
        let mut norm = 0.0;
        for v in &col[k..] {
            norm += v * v;
        }
        let norm = libm::sqrt(norm);
        let alpha = if col[k] > 0.0 { -norm } else { norm };
        diag[k] = alpha;
        if norm == 0.0 {
            continue;
        }
        // Householder vector stored in place of the column below the diagonal.
        let mut v: Vec<f64> = col[k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in (k + 1)..cols {
            let c = &mut q[j * rows + k..(j + 1) * rows];
            let dot: f64 = v.iter().zip(c.iter()).map(|(x, y)| x * y).sum();
            let f = 2.0 * dot / vnorm2;
            for (ci, vi) in c.iter_mut().zip(&v) {
                *ci -= f * vi;
            }
        }
        let dot: f64 = v.iter().zip(&rhs[k..]).map(|(x, y)| x * y).sum();
        let f = 2.0 * dot / vnorm2;
        for (ri, vi) in rhs[k..].iter_mut().zip(&v) {
            *ri -= f * vi;
        }
    }

    let max_diag = diag.iter().fold(0.0f64, |m, d| m.max(libm::fabs(*d)));
    for (k, d) in diag.iter().enumerate() {
        if !(libm::fabs(*d) > RANK_TOLERANCE * max_diag) {
            return Err(Error::Conditioning(format!(
                "rank deficient at column {k} (|r_kk| = {:e}, max {:e})",
                libm::fabs(*d),
                max_diag
            )));
        }
    }

    let mut x = vec![0.0; cols];
    for k in (0..cols).rev() {
        let mut s = rhs[k];
        for j in (k + 1)..cols {
            s -= q[j * rows + k] * x[j];
        }
        x[k] = s / diag[k];
    }
    for (xj, s) in x.iter_mut().zip(&scale) {
        *xj /= s;
    }
    Ok(x)
}
