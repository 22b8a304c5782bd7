//! Dense least squares by Householder QR, sized for the small design
//! matrices used here (a handful of columns, at most a few thousand rows).
//! The decomposition also yields (X'X)^-1 and the hat-matrix diagonal, which
//! the regression diagnostics need.

use crate::error::{Error, Result};
use crate::num::{real, Real};

/// Solution of a least-squares problem min ||X b - y||.
#[derive(Debug, Clone)]
pub struct LeastSquares<T: Real> {
    pub coef: Vec<T>,
    pub fitted: Vec<T>,
    pub residuals: Vec<T>,
    pub sse: T,
    /// (X'X)^-1, needed for coefficient covariance and mean-response bands.
    pub xtx_inv: Vec<Vec<T>>,
    /// Leverage h_i = x_i' (X'X)^-1 x_i per row.
    pub hat_diag: Vec<T>,
}

/// Solve min ||X b - y|| for a full-column-rank `X` given as rows.
/// Rank deficiency is reported as [`Error::SingularDesign`].
pub fn least_squares<T: Real>(rows: &[Vec<T>], y: &[T]) -> Result<LeastSquares<T>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let p = rows[0].len();
    if p == 0 {
        return Err(Error::EmptyInput);
    }
    if y.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: y.len(),
        });
    }
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::LengthMismatch {
            left: p,
            right: rows.iter().map(|r| r.len()).max().unwrap(),
        });
    }
    if n < p {
        return Err(Error::DegreesOfFreedom { n, params: p });
    }

    // column-major working copy of X and a copy of y
    let mut a: Vec<Vec<T>> = (0..p)
        .map(|j| rows.iter().map(|r| r[j]).collect())
        .collect();
    let mut qty: Vec<T> = y.to_vec();

    // Householder vectors, stored per column in the eliminated part
    let mut householder: Vec<Vec<T>> = Vec::with_capacity(p);
    let mut r_mat = vec![vec![T::zero(); p]; p];

    for j in 0..p {
        // norm of the active part of column j
        let norm = a[j][j..].iter().map(|&v| v * v).sum::<T>().sqrt();
        let alpha = if a[j][j] >= T::zero() { -norm } else { norm };
        let mut v: Vec<T> = a[j][j..].to_vec();
        v[0] = v[0] - alpha;
        let vnorm2: T = v.iter().map(|&x| x * x).sum();
        if norm > T::zero() && vnorm2 > T::zero() {
            // apply H = I - 2 v v'/v'v to remaining columns and to y
            for col in a.iter_mut().skip(j) {
                let dot: T = v.iter().zip(&col[j..]).map(|(&vi, &ci)| vi * ci).sum();
                let scale = real::<T>(2.0) * dot / vnorm2;
                for (vi, ci) in v.iter().zip(col[j..].iter_mut()) {
                    *ci = *ci - scale * *vi;
                }
            }
            let dot: T = v.iter().zip(&qty[j..]).map(|(&vi, &ci)| vi * ci).sum();
            let scale = real::<T>(2.0) * dot / vnorm2;
            for (vi, ci) in v.iter().zip(qty[j..].iter_mut()) {
                *ci = *ci - scale * *vi;
            }
        }
        householder.push(v);
        for i in 0..=j {
            r_mat[i][j] = a[j][i];
        }
    }

    // rank check on the diagonal of R
    let max_diag = (0..p).map(|j| r_mat[j][j].abs()).fold(T::zero(), T::max);
    let tol = T::epsilon() * real(n as f64) * max_diag;
    if max_diag == T::zero() || (0..p).any(|j| r_mat[j][j].abs() <= tol) {
        return Err(Error::SingularDesign);
    }

    // back substitution: R b = (Q'y)[0..p]
    let mut coef = vec![T::zero(); p];
    for i in (0..p).rev() {
        let mut s = qty[i];
        for j in i + 1..p {
            s = s - r_mat[i][j] * coef[j];
        }
        coef[i] = s / r_mat[i][i];
    }

    let fitted: Vec<T> = rows
        .iter()
        .map(|r| r.iter().zip(&coef).map(|(&x, &b)| x * b).sum())
        .collect();
    let residuals: Vec<T> = y.iter().zip(&fitted).map(|(&a, &b)| a - b).collect();
    let sse: T = residuals.iter().map(|&e| e * e).sum();

    // R^-1 by back substitution, then (X'X)^-1 = R^-1 R^-T
    let mut r_inv = vec![vec![T::zero(); p]; p];
    for k in 0..p {
        // solve R z = e_k
        let mut z = vec![T::zero(); p];
        for i in (0..=k).rev() {
            let mut s = if i == k { T::one() } else { T::zero() };
            for j in i + 1..=k {
                s = s - r_mat[i][j] * z[j];
            }
            z[i] = s / r_mat[i][i];
        }
        for (row, &zi) in r_inv.iter_mut().zip(&z) {
            row[k] = zi;
        }
    }
    let mut xtx_inv = vec![vec![T::zero(); p]; p];
    for i in 0..p {
        for j in 0..p {
            xtx_inv[i][j] = (0..p).map(|k| r_inv[i][k] * r_inv[j][k]).sum();
        }
    }

    let hat_diag: Vec<T> = rows.iter().map(|r| quadratic_form(&xtx_inv, r)).collect();

    Ok(LeastSquares {
        coef,
        fitted,
        residuals,
        sse,
        xtx_inv,
        hat_diag,
    })
}

/// x' M x for a symmetric matrix M.
pub fn quadratic_form<T: Real>(m: &[Vec<T>], x: &[T]) -> T {
    let mut acc = T::zero();
    for (i, &xi) in x.iter().enumerate() {
        for (j, &xj) in x.iter().enumerate() {
            acc = acc + xi * m[i][j] * xj;
        }
    }
    acc
}
