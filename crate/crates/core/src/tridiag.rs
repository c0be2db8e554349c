//! Symmetric tridiagonal kernels: implicit-shift QL eigensolver and an
//! LDLᵀ (Thomas) factorization for positive-definite systems.

use std::ops::{Div, Mul, Sub};

use crate::error::{QgError, Result};

/// Eigen-decomposition of a real symmetric tridiagonal matrix.
///
/// `vectors` is row-major `n × n`; column `m` holds the eigenvector of
/// `values[m]`. Eigenvalues are sorted ascending and each eigenvector is
/// signed so that its last nonzero component is positive.
#[derive(Debug, Clone)]
pub struct TridiagEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
}

pub fn symmetric_tridiag_eigen(diag: &[f64], off: &[f64]) -> Result<TridiagEigen> {
    let n = diag.len();
    if n == 0 || off.len() + 1 != n {
        return Err(QgError::InvalidInput(format!(
            "tridiagonal matrix needs n >= 1 and n-1 off-diagonal entries (n={n}, off={})",
            off.len()
        )));
    }
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(QgError::Eigensolver(format!(
                    "QL iteration did not converge for eigenvalue {l}"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let zf = z[k * n + i + 1];
                    z[k * n + i + 1] = s * z[k * n + i] + c * zf;
                    z[k * n + i] = c * z[k * n + i] - s * zf;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    if d.iter().any(|v| !v.is_finite()) {
        return Err(QgError::Eigensolver("non-finite eigenvalue".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values: Vec<f64> = order.iter().map(|&j| d[j]).collect();
    let mut vectors = vec![0.0; n * n];
    for (new_col, &old_col) in order.iter().enumerate() {
        let sign = (0..n)
            .rev()
            .map(|k| z[k * n + old_col])
            .find(|v| v.abs() > 1e-12)
            .map_or(1.0, f64::signum);
        for k in 0..n {
            vectors[k * n + new_col] = sign * z[k * n + old_col];
        }
    }
    Ok(TridiagEigen { values, vectors })
}

/// LDLᵀ factorization of a symmetric positive-definite tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct SymTridiagFactor {
    pivots: Vec<f64>,
    mult: Vec<f64>,
    off: Vec<f64>,
}

impl SymTridiagFactor {
    pub fn new(diag: &[f64], off: &[f64]) -> Result<Self> {
        let n = diag.len();
        if n == 0 || off.len() + 1 != n {
            return Err(QgError::InvalidInput("bad tridiagonal dimensions".into()));
        }
        let mut pivots = vec![0.0; n];
        let mut mult = vec![0.0; n];
        pivots[0] = diag[0];
        for j in 1..n {
            if pivots[j - 1] <= 0.0 {
                return Err(QgError::InvalidInput(format!(
                    "tridiagonal system is not positive definite (pivot {} = {})",
                    j - 1,
                    pivots[j - 1]
                )));
            }
            mult[j] = off[j - 1] / pivots[j - 1];
            pivots[j] = diag[j] - mult[j] * off[j - 1];
        }
        if pivots[n - 1] <= 0.0 {
            return Err(QgError::InvalidInput(
                "tridiagonal system is not positive definite".into(),
            ));
        }
        Ok(Self {
            pivots,
            mult,
            off: off.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.pivots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pivots.is_empty()
    }

    pub fn solve_in_place<T>(&self, rhs: &mut [T])
    where
        T: Copy + Sub<Output = T> + Mul<f64, Output = T> + Div<f64, Output = T>,
    {
        let n = self.pivots.len();
        debug_assert_eq!(rhs.len(), n);
        for j in 1..n {
            rhs[j] = rhs[j] - rhs[j - 1] * self.mult[j];
        }
        rhs[n - 1] = rhs[n - 1] / self.pivots[n - 1];
        for j in (0..n - 1).rev() {
            rhs[j] = (rhs[j] - rhs[j + 1] * self.off[j]) / self.pivots[j];
        }
    }
}
