//! Symmetric eigendecomposition by cyclic Jacobi rotations.

use super::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

const MAX_SWEEPS: usize = 100;

/// `a = vectors · diag(values) · vectorsᵀ`, values in descending order,
/// eigenvectors stored as columns.
#[derive(Clone, Debug)]
pub struct SymEig<T = f64> {
    pub values: Vec<T>,
    pub vectors: Matrix<T>,
}

impl<T: Real> SymEig<T> {
    pub fn reconstruct(&self) -> Matrix<T> {
        let n = self.values.len();
        Matrix::from_fn(n, n, |i, j| {
            (0..n).fold(T::zero(), |acc, k| {
                acc + self.vectors[(i, k)] * self.values[k] * self.vectors[(j, k)]
            })
        })
    }
}

/// Relative asymmetry tolerance: `1e-10` in double precision, a few ulps in
/// single precision.
fn symmetry_tolerance<T: Real>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(100.0))
}

pub fn check_symmetric<T: Real>(a: &Matrix<T>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::dim(
            "sym_eig",
            "square matrix",
            format!("{}x{}", a.rows(), a.cols()),
        ));
    }
    let scale = a.max_abs().max(T::one());
    let (gap, row, col) = a.max_asymmetry();
    if gap > symmetry_tolerance::<T>() * scale {
        return Err(Error::Asymmetric {
            row,
            col,
            gap: gap.to_f64_lossless(),
        });
    }
    if let Some((r, c)) = a.first_non_finite() {
        return Err(Error::NonFinite { row: r, col: c });
    }
    Ok(())
}

pub fn sym_eig<T: Real>(a: &Matrix<T>) -> Result<SymEig<T>> {
    check_symmetric(a)?;
    let n = a.rows();
    // symmetrize so that tiny input asymmetry cannot bias the rotations
    let mut m = Matrix::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)]) * T::lit(0.5));
    let mut v = Matrix::<T>::identity(n);

    let total = m.frobenius_norm();
    let threshold = total * T::epsilon() * T::from_usize(n.max(1)).unwrap();

    let off_norm = |m: &Matrix<T>| {
        let mut s = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[(i, j)] * m[(i, j)];
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off_norm(&m) <= threshold;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(Error::Convergence {
                routine: "jacobi eigensolver",
                iterations: MAX_SWEEPS,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                // tan of the rotation angle, smaller root for stability
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = T::zero();
                m[(q, p)] = T::zero();

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        converged = off_norm(&m) <= threshold;
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps ties in index order
    order.sort_by(|&i, &j| m[(j, j)].partial_cmp(&m[(i, i)]).unwrap());
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymEig { values, vectors })
}
