//! Closed-form linear maps from sketch features to image features.
//!
//! All three fits minimize a quadratic in `W` (`d_sketch × d_img`) and are
//! solved through their stationarity conditions:
//!
//! * direct regression, `‖X_S W − X_I‖² + r‖W‖²`:
//!   `(X_SᵀX_S + r·I)·W = X_SᵀX_I`
//! * ESZSL, `‖X_S W − X_I‖² + γ‖X_I Wᵀ‖² + λ‖X_S W‖² + β‖W‖²` with `β = γλ`:
//!   `(1+λ)·X_SᵀX_S·W + W·(γ·X_IᵀX_I + β·I) = X_SᵀX_I`
//! * SAE, `‖X_I − X_S W‖² + λ‖X_I Wᵀ − X_S‖²`:
//!   `X_SᵀX_S·W + λ·W·X_IᵀX_I = (1+λ)·X_SᵀX_I`
//!
//! The last two are Sylvester equations with symmetric PSD coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, solve_sylvester, Matrix};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearMethod {
    Regression,
    Eszsl,
    Sae,
}

impl LinearMethod {
    pub fn name(self) -> &'static str {
        match self {
            LinearMethod::Regression => "regression",
            LinearMethod::Eszsl => "eszsl",
            LinearMethod::Sae => "sae",
        }
    }
}

/// Hyperparameters a map was fit with and the objective it reached.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub method: LinearMethod,
    /// Ridge weight (regression only).
    pub ridge: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearMap<T = f64> {
    /// `d_sketch × d_img`; predictions are `x_sketch · w`.
    pub w: Matrix<T>,
    pub meta: FitMeta,
}

impl<T: Real> LinearMap<T> {
    pub fn d_sketch(&self) -> usize {
        self.w.rows()
    }

    pub fn d_img(&self) -> usize {
        self.w.cols()
    }

    pub fn predict(&self, sketch: &Matrix<T>) -> Result<Matrix<T>> {
        sketch.matmul(&self.w)
    }

    pub fn predict_one(&self, sketch: &[T]) -> Result<Vec<T>> {
        if sketch.len() != self.d_sketch() {
            return Err(Error::dim("LinearMap::predict", self.d_sketch(), sketch.len()));
        }
        self.w.transpose().mat_vec(sketch)
    }
}

fn check_pair<T: Real>(x_s: &Matrix<T>, x_i: &Matrix<T>) -> Result<()> {
    if x_s.rows() != x_i.rows() {
        return Err(Error::dim("linear fit", format!("{} image rows", x_s.rows()), x_i.rows()));
    }
    if x_s.rows() == 0 {
        return Err(Error::Config("empty training set".into()));
    }
    Ok(())
}

fn check_hyper(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::Domain(format!("{name} must be finite and >= 0, got {v}")));
    }
    Ok(())
}

pub fn fit_direct_regression<T: Real>(x_s: &Matrix<T>, x_i: &Matrix<T>, ridge: f64) -> Result<LinearMap<T>> {
    check_pair(x_s, x_i)?;
    check_hyper("ridge", ridge)?;
    let gram = x_s.t_matmul(x_s)?.add_diag(T::lit(ridge));
    let rhs = x_s.t_matmul(x_i)?;
    let w = cholesky_solve(&gram, &rhs).map_err(|e| match e {
        Error::Singular(msg) if ridge == 0.0 => {
            Error::Singular(format!("{msg}; sketch Gram matrix is rank deficient, use a ridge > 0"))
        }
        other => other,
    })?;
    let objective = regression_objective(x_s, x_i, &w, ridge)?.to_f64_lossless();
    Ok(LinearMap {
        w,
        meta: FitMeta {
            method: LinearMethod::Regression,
            ridge,
            gamma: 0.0,
            lambda: 0.0,
            objective,
        },
    })
}

pub fn fit_eszsl<T: Real>(x_s: &Matrix<T>, x_i: &Matrix<T>, gamma: f64, lambda: f64) -> Result<LinearMap<T>> {
    check_pair(x_s, x_i)?;
    check_hyper("gamma", gamma)?;
    check_hyper("lambda", lambda)?;
    let beta = gamma * lambda;
    let a = x_s.t_matmul(x_s)?.scale(T::lit(1.0 + lambda));
    let b = x_i.t_matmul(x_i)?.scale(T::lit(gamma)).add_diag(T::lit(beta));
    let c = x_s.t_matmul(x_i)?;
    let w = solve_sylvester(&a, &b, &c)?;
    let objective = eszsl_objective(x_s, x_i, &w, gamma, lambda)?.to_f64_lossless();
    Ok(LinearMap {
        w,
        meta: FitMeta {
            method: LinearMethod::Eszsl,
            ridge: 0.0,
            gamma,
            lambda,
            objective,
        },
    })
}

pub fn fit_sae<T: Real>(x_s: &Matrix<T>, x_i: &Matrix<T>, lambda: f64) -> Result<LinearMap<T>> {
    check_pair(x_s, x_i)?;
    check_hyper("lambda", lambda)?;
    let a = x_s.t_matmul(x_s)?;
    let b = x_i.t_matmul(x_i)?.scale(T::lit(lambda));
    let c = x_s.t_matmul(x_i)?.scale(T::lit(1.0 + lambda));
    let w = solve_sylvester(&a, &b, &c)?;
    let objective = sae_objective(x_s, x_i, &w, lambda)?.to_f64_lossless();
    Ok(LinearMap {
        w,
        meta: FitMeta {
            method: LinearMethod::Sae,
            ridge: 0.0,
            gamma: 0.0,
            lambda,
            objective,
        },
    })
}

pub fn regression_objective<T: Real>(x_s: &Matrix<T>, x_i: &Matrix<T>, w: &Matrix<T>, ridge: f64) -> Result<T> {
    Ok(x_s.matmul(w)?.sub(x_i)?.sq_frobenius() + T::lit(ridge) * w.sq_frobenius())
}

pub fn eszsl_objective<T: Real>(
    x_s: &Matrix<T>,
    x_i: &Matrix<T>,
    w: &Matrix<T>,
    gamma: f64,
    lambda: f64,
) -> Result<T> {
    let sw = x_s.matmul(w)?;
    let fit = sw.sub(x_i)?.sq_frobenius();
    let img_side = x_i.matmul_t(w)?.sq_frobenius();
    Ok(fit
        + T::lit(gamma) * img_side
        + T::lit(lambda) * sw.sq_frobenius()
        + T::lit(gamma * lambda) * w.sq_frobenius())
}

pub fn sae_objective<T: Real>(x_s: &Matrix<T>, x_i: &Matrix<T>, w: &Matrix<T>, lambda: f64) -> Result<T> {
    let forward = x_i.sub(&x_s.matmul(w)?)?.sq_frobenius();
    let backward = x_i.matmul_t(w)?.sub(x_s)?.sq_frobenius();
    Ok(forward + T::lit(lambda) * backward)
}

/// Analytic gradient of the direct-regression objective.
pub fn regression_gradient<T: Real>(x_s: &Matrix<T>, x_i: &Matrix<T>, w: &Matrix<T>, ridge: f64) -> Result<Matrix<T>> {
    let two = T::lit(2.0);
    let resid = x_s.matmul(w)?.sub(x_i)?;
    x_s.t_matmul(&resid)?.scale(two).add(&w.scale(two * T::lit(ridge)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;

    fn random(n: usize, m: usize, rng: &mut Rng) -> Matrix<f64> {
        Matrix::from_fn(n, m, |_, _| rng.normal())
    }

    #[test]
    fn square_invertible_regression_is_exact() {
        let mut rng = Rng::new(2);
        let x_s = random(5, 5, &mut rng).add_diag(3.0);
        let x_i = random(5, 3, &mut rng);
        let map = fit_direct_regression(&x_s, &x_i, 0.0).unwrap();
        assert!(map.predict(&x_s).unwrap().sub(&x_i).unwrap().max_abs() < 1e-9);
        assert!(map.meta.objective < 1e-16);
    }

    #[test]
    fn self_regression_is_identity() {
        let mut rng = Rng::new(3);
        let x = random(20, 4, &mut rng);
        let map = fit_direct_regression(&x, &x, 0.0).unwrap();
        assert!(map.w.sub(&Matrix::identity(4)).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn ridge_regression_is_stationary() {
        let mut rng = Rng::new(4);
        let x_s = random(50, 6, &mut rng);
        let x_i = random(50, 4, &mut rng);
        let map = fit_direct_regression(&x_s, &x_i, 0.1).unwrap();
        let g = regression_gradient(&x_s, &x_i, &map.w, 0.1).unwrap();
        let scale = x_s.t_matmul(&x_i).unwrap().frobenius_norm();
        assert!(g.frobenius_norm() <= 1e-8 * scale);
    }

    #[test]
    fn rank_deficient_regression_suggests_ridge() {
        let x_s = Matrix::from_fn(10, 3, |r, c| if c == 2 { 0.0 } else { (r + c) as f64 });
        let x_i = Matrix::from_fn(10, 2, |r, _| r as f64);
        match fit_direct_regression(&x_s, &x_i, 0.0) {
            Err(Error::Singular(msg)) => assert!(msg.contains("ridge")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(fit_direct_regression(&x_s, &x_i, 1e-3).is_ok());
    }

    #[test]
    fn eszsl_without_regularization_is_least_squares() {
        let mut rng = Rng::new(5);
        let x_s = random(4, 4, &mut rng).add_diag(3.0);
        let x_i = random(4, 6, &mut rng);
        let map = fit_eszsl(&x_s, &x_i, 0.0, 0.0).unwrap();
        assert!(map.predict(&x_s).unwrap().sub(&x_i).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn eszsl_heavy_regularization_shrinks_to_zero() {
        let mut rng = Rng::new(6);
        let x_s = random(30, 5, &mut rng);
        let x_i = random(30, 4, &mut rng);
        let map = fit_eszsl(&x_s, &x_i, 1e6, 1e6).unwrap();
        assert!(map.w.frobenius_norm() < 1e-3);
    }

    #[test]
    fn sae_without_regularization_is_least_squares() {
        let mut rng = Rng::new(7);
        let x_s = random(40, 5, &mut rng);
        let x_i = random(40, 3, &mut rng);
        let sae = fit_sae(&x_s, &x_i, 0.0).unwrap();
        let ols = fit_direct_regression(&x_s, &x_i, 0.0).unwrap();
        assert!(sae.w.sub(&ols.w).unwrap().max_abs() < 1e-9);
    }

    #[test]
    fn sae_on_identical_views_is_identity() {
        let mut rng = Rng::new(8);
        let x = random(25, 4, &mut rng);
        for lambda in [0.0, 0.5, 3.0] {
            let map = fit_sae(&x, &x, lambda).unwrap();
            assert!(map.w.sub(&Matrix::identity(4)).unwrap().max_abs() < 1e-9);
            assert!(map.meta.objective < 1e-16);
        }
    }

    #[test]
    fn negative_hyperparameters_rejected() {
        let x = Matrix::<f64>::identity(3);
        assert!(matches!(fit_sae(&x, &x, -1.0), Err(Error::Domain(_))));
        assert!(matches!(fit_eszsl(&x, &x, 1.0, -1.0), Err(Error::Domain(_))));
        assert!(fit_direct_regression(&x, &Matrix::zeros(2, 3), 0.0).is_err());
    }
}
