//! Sylvester equation `A·W + W·B = C` for symmetric coefficients, plus the
//! dense Kronecker-product oracle used to check it.
//!
//! With `A = U·diag(α)·Uᵀ` and `B = V·diag(β)·Vᵀ` the equation decouples in the
//! rotated basis: `W̃ = Uᵀ·C·V`, `W̃ᵢⱼ /= αᵢ + βⱼ`, `W = U·W̃·Vᵀ`. This is
//! Bartels-Stewart with the Schur factors replaced by eigenbases, which is
//! valid because both coefficients are symmetric.

use super::{sym_eig, Matrix};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest `n·m` the dense oracle accepts (16×16 blocks).
pub const KRON_ORACLE_MAX_DIM: usize = 16;

pub fn solve_sylvester<T: Real>(a: &Matrix<T>, b: &Matrix<T>, c: &Matrix<T>) -> Result<Matrix<T>> {
    let (n, m) = (a.rows(), b.rows());
    if c.shape() != (n, m) {
        return Err(Error::dim(
            "solve_sylvester",
            format!("C of shape {n}x{m}"),
            format!("{}x{}", c.rows(), c.cols()),
        ));
    }
    let ea = sym_eig(a)?;
    let eb = sym_eig(b)?;

    let scale = ea
        .values
        .iter()
        .chain(&eb.values)
        .fold(T::one(), |acc, v| acc.max(v.abs()));
    let floor = T::lit(1e-12).max(T::epsilon() * T::lit(16.0)) * scale;

    let mut rotated = ea.vectors.t_matmul(c)?.matmul(&eb.vectors)?;
    for i in 0..n {
        for j in 0..m {
            let denom = ea.values[i] + eb.values[j];
            if denom.abs() <= floor {
                return Err(Error::Singular(format!(
                    "eigenvalue pair a[{i}] = {:e}, b[{j}] = {:e} sums to {:e}",
                    ea.values[i].to_f64_lossless(),
                    eb.values[j].to_f64_lossless(),
                    denom.to_f64_lossless()
                )));
            }
            rotated[(i, j)] /= denom;
        }
    }
    ea.vectors.matmul(&rotated)?.matmul_t(&eb.vectors)
}

/// Residual `A·W + W·B − C`.
pub fn sylvester_residual<T: Real>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    c: &Matrix<T>,
    w: &Matrix<T>,
) -> Result<Matrix<T>> {
    a.matmul(w)?.add(&w.matmul(b)?)?.sub(c)
}

/// Solves `(I⊗A + Bᵀ⊗I)·vec(W) = vec(C)` by dense Gaussian elimination,
/// with `vec` stacking columns. Independent of the eigen route; intended for
/// tests and small problems only.
pub fn kron_solve_oracle<T: Real>(a: &Matrix<T>, b: &Matrix<T>, c: &Matrix<T>) -> Result<Matrix<T>> {
    let (n, m) = (a.rows(), b.rows());
    if !a.is_square() || !b.is_square() || c.shape() != (n, m) {
        return Err(Error::dim(
            "kron_solve_oracle",
            format!("A {n}x{n}, B {m}x{m}, C {n}x{m}"),
            format!(
                "A {}x{}, B {}x{}, C {}x{}",
                a.rows(),
                a.cols(),
                b.rows(),
                b.cols(),
                c.rows(),
                c.cols()
            ),
        ));
    }
    if n > KRON_ORACLE_MAX_DIM || m > KRON_ORACLE_MAX_DIM {
        return Err(Error::dim(
            "kron_solve_oracle",
            format!("dimensions <= {KRON_ORACLE_MAX_DIM}"),
            format!("{n}x{m}"),
        ));
    }
    let size = n * m;
    // vec index of W[i, j] is j*n + i
    let mut sys = Matrix::<T>::zeros(size, size);
    for j in 0..m {
        for i in 0..n {
            let row = j * n + i;
            // (A·W)[i, j] = Σ_k A[i,k] W[k,j]
            for k in 0..n {
                sys[(row, j * n + k)] += a[(i, k)];
            }
            // (W·B)[i, j] = Σ_l W[i,l] B[l,j]
            for l in 0..m {
                sys[(row, l * n + i)] += b[(l, j)];
            }
        }
    }
    let rhs: Vec<T> = (0..size).map(|r| c[(r % n, r / n)]).collect();
    let x = lu_solve(&sys, &rhs)?;
    Ok(Matrix::from_fn(n, m, |i, j| x[j * n + i]))
}

/// Gaussian elimination with partial pivoting on a single right-hand side.
pub fn lu_solve<T: Real>(a: &Matrix<T>, rhs: &[T]) -> Result<Vec<T>> {
    let n = a.rows();
    if !a.is_square() || rhs.len() != n {
        return Err(Error::dim("lu_solve", format!("{n}x{n} system"), rhs.len()));
    }
    let mut m = a.clone();
    let mut x = rhs.to_vec();
    let scale = a.max_abs().max(T::min_positive_value());
    let tol = scale * T::epsilon() * T::from_usize(n.max(1)).unwrap();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[(i, col)].abs().partial_cmp(&m[(j, col)].abs()).unwrap())
            .unwrap();
        if m[(pivot, col)].abs() <= tol {
            return Err(Error::Singular(format!(
                "pivot {:e} in column {col} of a {n}x{n} system",
                m[(pivot, col)].to_f64_lossless()
            )));
        }
        if pivot != col {
            for k in 0..n {
                let tmp = m[(col, k)];
                m[(col, k)] = m[(pivot, k)];
                m[(pivot, k)] = tmp;
            }
            x.swap(col, pivot);
        }
        let p = m[(col, col)];
        for r in (col + 1)..n {
            let f = m[(r, col)] / p;
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                let v = m[(col, k)];
                m[(r, k)] -= f * v;
            }
            let xc = x[col];
            x[r] -= f * xc;
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for k in (col + 1)..n {
            s -= m[(col, k)] * x[k];
        }
        x[col] = s / m[(col, col)];
    }
    Ok(x)
}

/// Solves `S·X = R` for symmetric positive definite `S` via Cholesky.
pub fn cholesky_solve<T: Real>(s: &Matrix<T>, r: &Matrix<T>) -> Result<Matrix<T>> {
    let n = s.rows();
    if !s.is_square() || r.rows() != n {
        return Err(Error::dim(
            "cholesky_solve",
            format!("{n}x{n} system with {n}-row rhs"),
            format!("{}x{} with {}-row rhs", s.rows(), s.cols(), r.rows()),
        ));
    }
    let tol = s.diag().into_iter().fold(T::zero(), |m, v| m.max(v.abs()))
        * T::epsilon()
        * T::from_usize(n.max(1)).unwrap();
    let mut l = Matrix::<T>::zeros(n, n);
    for j in 0..n {
        let mut d = s[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= tol {
            return Err(Error::Singular(format!(
                "matrix is not positive definite (pivot {:e} at {j})",
                d.to_f64_lossless()
            )));
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut v = s[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / djj;
        }
    }
    let cols = r.cols();
    let mut x = r.clone();
    for c in 0..cols {
        // forward: L y = r
        for i in 0..n {
            let mut v = x[(i, c)];
            for k in 0..i {
                v -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = v / l[(i, i)];
        }
        // backward: Lᵀ x = y
        for i in (0..n).rev() {
            let mut v = x[(i, c)];
            for k in (i + 1)..n {
                v -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = v / l[(i, i)];
        }
    }
    Ok(x)
}
