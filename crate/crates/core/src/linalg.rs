//! Dense least squares by reorthogonalized modified Gram-Schmidt QR.

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares<T> {
    pub coef: Vec<T>,
    pub std_errors: Vec<T>,
    pub residual_sd: T,
    pub r2: T,
}

/// Column `column` of the design is (numerically) a combination of `depends_on`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankDeficiency {
    pub column: usize,
    pub depends_on: Vec<usize>,
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn rank_tol<T: Scalar>() -> T {
    T::epsilon().sqrt() * T::of(1e-2)
}

/// Solves `min ||X b - y||` with `X` given column-wise.
pub fn least_squares<T: Scalar>(
    columns: &[Vec<T>],
    y: &[T],
) -> Result<LeastSquares<T>, RankDeficiency> {
    let p = columns.len();
    let n = y.len();
    let tol = rank_tol::<T>();
    let mut q: Vec<Vec<T>> = Vec::with_capacity(p);
    let mut r = vec![vec![T::zero(); p]; p];

    for (j, col) in columns.iter().enumerate() {
        debug_assert_eq!(col.len(), n);
        let orig_norm = dot(col, col).sqrt();
        let mut v = col.clone();
        // two passes keep Q orthogonal to working precision
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let rij = dot(qi, &v);
                r[i][j] = r[i][j] + rij;
                for (vk, &qk) in v.iter_mut().zip(qi) {
                    *vk = *vk - rij * qk;
                }
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm <= tol * orig_norm || orig_norm == T::zero() {
            // express column j in the original columns: R[..j, ..j] c = R[..j, j]
            let mut c = vec![T::zero(); j];
            for i in (0..j).rev() {
                let mut s = r[i][j];
                for k in i + 1..j {
                    s = s - r[i][k] * c[k];
                }
                c[i] = s / r[i][i];
            }
            let depends_on = (0..j)
                .filter(|&i| (c[i] * dot(&columns[i], &columns[i]).sqrt()).abs() > tol.sqrt() * orig_norm)
                .collect();
            return Err(RankDeficiency { column: j, depends_on });
        }
        r[j][j] = norm;
        for vk in v.iter_mut() {
            *vk = *vk / norm;
        }
        q.push(v);
    }

    let qty: Vec<T> = q.iter().map(|qi| dot(qi, y)).collect();
    let mut coef = vec![T::zero(); p];
    for i in (0..p).rev() {
        let mut s = qty[i];
        for k in i + 1..p {
            s = s - r[i][k] * coef[k];
        }
        coef[i] = s / r[i][i];
    }

    let mut ssr = T::zero();
    for row in 0..n {
        let fitted = (0..p).fold(T::zero(), |acc, j| acc + columns[j][row] * coef[j]);
        let e = y[row] - fitted;
        ssr = ssr + e * e;
    }
    let y_mean = crate::stats::mean(y);
    let sst = y.iter().fold(T::zero(), |acc, &v| acc + (v - y_mean) * (v - y_mean));
    let r2 = if sst > T::zero() {
        T::one() - ssr / sst
    } else {
        T::one()
    };
    let dof = n.saturating_sub(p);
    let residual_sd = if dof > 0 {
        (ssr / T::of(dof as f64)).sqrt()
    } else {
        T::zero()
    };

    // (X'X)^-1 = R^-1 R^-T, so se_j = sigma * ||row j of R^-1||
    let rinv = upper_inverse(&r);
    let std_errors = rinv
        .iter()
        .map(|row| residual_sd * dot(row, row).sqrt())
        .collect();

    Ok(LeastSquares {
        coef,
        std_errors,
        residual_sd,
        r2,
    })
}

fn upper_inverse<T: Scalar>(r: &[Vec<T>]) -> Vec<Vec<T>> {
    let p = r.len();
    let mut inv = vec![vec![T::zero(); p]; p];
    for col in 0..p {
        for i in (0..=col).rev() {
            let mut s = if i == col { T::one() } else { T::zero() };
            for k in i + 1..=col {
                s = s - r[i][k] * inv[k][col];
            }
            inv[i][col] = s / r[i][i];
        }
    }
    inv
}
