//! Evaluation of the deep sketch hashing objective for caller-supplied codes
//! and network outputs. No training happens here.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

pub const DSH_DEFAULT_LAMBDA: f64 = 0.01;
pub const DSH_DEFAULT_GAMMA: f64 = 1e-5;

/// Shapes, with `m` the code length, `n` the number of items and `e` the
/// word-embedding width:
/// `b_i`, `b_s`, `f_i_out`, `f_s_out` are `m × n`; `w_sim` is `n × n`;
/// `phi_i`, `phi_s` are `e × n`; `d_basis` is `e × m`.
#[derive(Clone, Debug)]
pub struct DshLossInputs<T = f64> {
    pub b_i: Matrix<T>,
    pub b_s: Matrix<T>,
    pub w_sim: Matrix<T>,
    pub phi_i: Matrix<T>,
    pub phi_s: Matrix<T>,
    pub d_basis: Matrix<T>,
    pub f_i_out: Matrix<T>,
    pub f_s_out: Matrix<T>,
    pub lambda: T,
    pub gamma: T,
    /// Scalar multiplying `w_sim`; `None` means the code length `m`.
    pub magnitude: Option<T>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DshLoss<T = f64> {
    pub total: T,
    pub cross_view: T,
    pub semantic: T,
    pub quantization: T,
}

impl<T: Real> DshLossInputs<T> {
    /// Inputs with the default `lambda` and `gamma` and magnitude `m`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        b_i: Matrix<T>,
        b_s: Matrix<T>,
        w_sim: Matrix<T>,
        phi_i: Matrix<T>,
        phi_s: Matrix<T>,
        d_basis: Matrix<T>,
        f_i_out: Matrix<T>,
        f_s_out: Matrix<T>,
    ) -> Self {
        Self {
            b_i,
            b_s,
            w_sim,
            phi_i,
            phi_s,
            d_basis,
            f_i_out,
            f_s_out,
            lambda: T::lit(DSH_DEFAULT_LAMBDA),
            gamma: T::lit(DSH_DEFAULT_GAMMA),
            magnitude: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (m, n) = self.b_i.shape();
        let e = self.phi_i.rows();
        let expect = [
            ("b_s", self.b_s.shape(), (m, n)),
            ("f_i_out", self.f_i_out.shape(), (m, n)),
            ("f_s_out", self.f_s_out.shape(), (m, n)),
            ("w_sim", self.w_sim.shape(), (n, n)),
            ("phi_i", self.phi_i.shape(), (e, n)),
            ("phi_s", self.phi_s.shape(), (e, n)),
            ("d_basis", self.d_basis.shape(), (e, m)),
        ];
        for (name, got, want) in expect {
            if got != want {
                return Err(Error::dim("dsh_loss_eval", format!("{name} {want:?}"), format!("{got:?}")));
            }
        }
        for (name, codes) in [("b_i", &self.b_i), ("b_s", &self.b_s)] {
            let bad = codes.as_slice().iter().position(|&v| v != T::one() && v != -T::one());
            if let Some(pos) = bad {
                return Err(Error::Constraint(format!(
                    "{name}[{},{}] = {} is not ±1",
                    pos / n,
                    pos % n,
                    codes.as_slice()[pos]
                )));
            }
        }
        Ok(())
    }
}

/// ```text
/// ‖m·W − B_IᵀB_S‖² + λ(‖Φ_I − D·B_I‖² + ‖Φ_S − D·B_S‖²) + γ(‖F_I − B_I‖² + ‖F_S − B_S‖²)
/// ```
/// The cross-view, semantic and quantization terms are reported unweighted.
pub fn dsh_loss_eval<T: Real>(inputs: &DshLossInputs<T>) -> Result<DshLoss<T>> {
    inputs.validate()?;
    let m = inputs
        .magnitude
        .unwrap_or_else(|| T::from_usize(inputs.b_i.rows()).unwrap());
    let cross_view = inputs
        .w_sim
        .scale(m)
        .sub(&inputs.b_i.t_matmul(&inputs.b_s)?)?
        .sq_frobenius();
    let semantic = inputs.phi_i.sub(&inputs.d_basis.matmul(&inputs.b_i)?)?.sq_frobenius()
        + inputs.phi_s.sub(&inputs.d_basis.matmul(&inputs.b_s)?)?.sq_frobenius();
    let quantization = inputs.f_i_out.sub(&inputs.b_i)?.sq_frobenius() + inputs.f_s_out.sub(&inputs.b_s)?.sq_frobenius();
    Ok(DshLoss {
        total: cross_view + inputs.lambda * semantic + inputs.gamma * quantization,
        cross_view,
        semantic,
        quantization,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;

    fn consistent(seed: u64) -> DshLossInputs<f64> {
        let mut rng = Rng::new(seed);
        let (m, n, e) = (4, 5, 3);
        let b = Matrix::from_fn(m, n, |_, _| if rng.uniform() < 0.5 { -1.0 } else { 1.0 });
        let d = Matrix::from_fn(e, m, |_, _| rng.normal());
        let phi = d.matmul(&b).unwrap();
        let w = b.t_matmul(&b).unwrap().scale(1.0 / m as f64);
        DshLossInputs::new(b.clone(), b.clone(), w, phi.clone(), phi, d, b.clone(), b)
    }

    #[test]
    fn consistent_inputs_have_zero_loss() {
        let l = dsh_loss_eval(&consistent(1)).unwrap();
        assert!(l.total.abs() < 1e-12, "{l:?}");
    }

    #[test]
    fn zero_weights_leave_cross_view_only() {
        let mut inp = consistent(2);
        inp.f_i_out = inp.f_i_out.map(|v| v * 0.3);
        inp.phi_s = inp.phi_s.map(|v| v + 1.0);
        inp.w_sim = inp.w_sim.map(|v| v + 0.5);
        inp.lambda = 0.0;
        inp.gamma = 0.0;
        let l = dsh_loss_eval(&inp).unwrap();
        assert!(l.semantic > 0.0 && l.quantization > 0.0);
        assert_eq!(l.total, l.cross_view);
    }

    #[test]
    fn flipping_a_bit_raises_quantization() {
        let inp = consistent(3);
        let base = dsh_loss_eval(&inp).unwrap().quantization;
        let mut flipped = inp.clone();
        let mut codes = flipped.b_i.into_vec();
        codes[0] = -codes[0];
        flipped.b_i = Matrix::from_vec(4, 5, codes).unwrap();
        assert!(dsh_loss_eval(&flipped).unwrap().quantization > base);
    }

    #[test]
    fn non_binary_codes_rejected() {
        let mut inp = consistent(4);
        let mut codes = inp.b_s.into_vec();
        codes[7] = 0.5;
        inp.b_s = Matrix::from_vec(4, 5, codes).unwrap();
        assert!(matches!(dsh_loss_eval(&inp), Err(Error::Constraint(_))));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut inp = consistent(5);
        inp.w_sim = Matrix::zeros(4, 4);
        assert!(matches!(dsh_loss_eval(&inp), Err(Error::Dimension { .. })));
    }
}
