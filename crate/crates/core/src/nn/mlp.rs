use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Linear,
    Sigmoid,
}

impl Activation {
    #[inline]
    fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Relu => x.max(T::zero()),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `x`.
    #[inline]
    fn derivative<T: Real>(self, x: T) -> T {
        match self {
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                T::one() - t * t
            }
        }
    }
}

impl OutputActivation {
    #[inline]
    fn apply<T: Real>(self, x: T) -> T {
        match self {
            OutputActivation::Linear => x,
            OutputActivation::Sigmoid => sigmoid(x),
        }
    }

    #[inline]
    fn derivative<T: Real>(self, x: T) -> T {
        match self {
            OutputActivation::Linear => T::one(),
            OutputActivation::Sigmoid => {
                let s = sigmoid(x);
                s * (T::one() - s)
            }
        }
    }
}

#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Fully connected feed-forward network. Layer `i` maps
/// `dims[i] → dims[i+1]` as `x·Wᵢ + bᵢ`; hidden layers use `hidden`, the
/// last layer uses `output`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T = f64> {
    dims: Vec<usize>,
    weights: Vec<Matrix<T>>,
    biases: Vec<Vec<T>>,
    hidden: Activation,
    output: OutputActivation,
}

/// Intermediate values of a forward pass, consumed by [`Mlp::backward`].
#[derive(Clone, Debug)]
pub struct ForwardTrace<T = f64> {
    inputs: Vec<Matrix<T>>,
    pre_activations: Vec<Matrix<T>>,
    output: Matrix<T>,
}

impl<T> ForwardTrace<T> {
    pub fn output(&self) -> &Matrix<T> {
        &self.output
    }

    pub fn into_output(self) -> Matrix<T> {
        self.output
    }
}

/// Gradients mirroring the parameters of one [`Mlp`].
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrads<T = f64> {
    pub weights: Vec<Matrix<T>>,
    pub biases: Vec<Vec<T>>,
}

impl<T: Real> MlpGrads<T> {
    pub fn zeros_like(net: &Mlp<T>) -> Self {
        Self {
            weights: net
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            biases: net.biases.iter().map(|b| vec![T::zero(); b.len()]).collect(),
        }
    }

    pub fn slices(&self) -> Vec<&[T]> {
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.push(w.as_slice());
            out.push(b.as_slice());
        }
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            out.push(w.as_mut_slice());
            out.push(b.as_mut_slice());
        }
        out
    }

    pub fn scale(&mut self, s: T) {
        for sl in self.slices_mut() {
            sl.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn accumulate(&mut self, other: &Self) {
        for (dst, src) in self.slices_mut().into_iter().zip(other.slices()) {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.slices()
            .iter()
            .all(|s| s.iter().all(|v| *v == T::zero()))
    }
}

impl<T: Real> Mlp<T> {
    /// Random initialization: weights `N(0, 2/fan_in)` for ReLU networks and
    /// `N(0, 2/(fan_in + fan_out))` for tanh networks; biases zero.
    pub fn new(
        dims: &[usize],
        hidden: Activation,
        output: OutputActivation,
        rng: &mut Rng,
    ) -> Result<Self> {
        validate_dims(dims)?;
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for pair in dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let var = match hidden {
                Activation::Relu => 2.0 / fan_in as f64,
                Activation::Tanh => 2.0 / (fan_in + fan_out) as f64,
            };
            let sd = var.sqrt();
            weights.push(Matrix::from_fn(fan_in, fan_out, |_, _| {
                T::lit(sd * rng.normal())
            }));
            biases.push(vec![T::zero(); fan_out]);
        }
        Ok(Self {
            dims: dims.to_vec(),
            weights,
            biases,
            hidden,
            output,
        })
    }

    pub fn from_parts(
        weights: Vec<Matrix<T>>,
        biases: Vec<Vec<T>>,
        hidden: Activation,
        output: OutputActivation,
    ) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::Config(format!(
                "{} weight matrices with {} bias vectors",
                weights.len(),
                biases.len()
            )));
        }
        let mut dims = vec![weights[0].rows()];
        for (i, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.rows() != *dims.last().unwrap() || b.len() != w.cols() {
                return Err(Error::dim(
                    "Mlp::from_parts",
                    format!("layer {i}: {}x{} with bias {}", dims[i], w.cols(), w.cols()),
                    format!("{}x{} with bias {}", w.rows(), w.cols(), b.len()),
                ));
            }
            dims.push(w.cols());
        }
        validate_dims(&dims)?;
        Ok(Self {
            dims,
            weights,
            biases,
            hidden,
            output,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn weights(&self) -> &[Matrix<T>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<T>] {
        &self.biases
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|s| s.len()).sum()
    }

    /// Parameter tensors in a fixed order: `W₀, b₀, W₁, b₁, …`.
    pub fn params(&self) -> Vec<&[T]> {
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.push(w.as_slice());
            out.push(b.as_slice());
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            out.push(w.as_mut_slice());
            out.push(b.as_mut_slice());
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    pub fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_input(x)?;
        let last = self.weights.len() - 1;
        let mut h = x.clone();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = h.matmul(w)?;
            add_bias(&mut z, b);
            h = if l == last {
                let act = self.output;
                z.map(|v| act.apply(v))
            } else {
                let act = self.hidden;
                z.map(|v| act.apply(v))
            };
        }
        Ok(h)
    }

    pub fn forward_trace(&self, x: &Matrix<T>) -> Result<ForwardTrace<T>> {
        self.check_input(x)?;
        let last = self.weights.len() - 1;
        let mut inputs = Vec::with_capacity(self.weights.len());
        let mut pre = Vec::with_capacity(self.weights.len());
        let mut h = x.clone();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = h.matmul(w)?;
            add_bias(&mut z, b);
            let next = if l == last {
                let act = self.output;
                z.map(|v| act.apply(v))
            } else {
                let act = self.hidden;
                z.map(|v| act.apply(v))
            };
            inputs.push(h);
            pre.push(z);
            h = next;
        }
        Ok(ForwardTrace {
            inputs,
            pre_activations: pre,
            output: h,
        })
    }

    /// Exact gradients of `Σ upstream ⊙ output` with respect to every
    /// parameter and to the input batch.
    pub fn backward(
        &self,
        trace: &ForwardTrace<T>,
        upstream: &Matrix<T>,
    ) -> Result<(MlpGrads<T>, Matrix<T>)> {
        if upstream.shape() != trace.output.shape() {
            return Err(Error::dim(
                "Mlp::backward",
                format!("{}x{}", trace.output.rows(), trace.output.cols()),
                format!("{}x{}", upstream.rows(), upstream.cols()),
            ));
        }
        let last = self.weights.len() - 1;
        let out_act = self.output;
        let mut delta = upstream.hadamard(&trace.pre_activations[last].map(|v| out_act.derivative(v)))?;
        let mut grads = MlpGrads::zeros_like(self);
        for l in (0..=last).rev() {
            grads.weights[l] = trace.inputs[l].t_matmul(&delta)?;
            for row in delta.row_iter() {
                for (g, &d) in grads.biases[l].iter_mut().zip(row) {
                    *g += d;
                }
            }
            let input_grad = delta.matmul_t(&self.weights[l])?;
            if l == 0 {
                return Ok((grads, input_grad));
            }
            let act = self.hidden;
            delta = input_grad.hadamard(&trace.pre_activations[l - 1].map(|v| act.derivative(v)))?;
        }
        unreachable!("network has at least one layer")
    }

    /// Forward then backward in one call.
    pub fn backprop(&self, x: &Matrix<T>, upstream: &Matrix<T>) -> Result<(MlpGrads<T>, Matrix<T>)> {
        let trace = self.forward_trace(x)?;
        self.backward(&trace, upstream)
    }

    fn check_input(&self, x: &Matrix<T>) -> Result<()> {
        if x.cols() != self.dims[0] {
            return Err(Error::dim("Mlp::forward", self.dims[0], x.cols()));
        }
        Ok(())
    }
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::Config(format!(
            "network needs at least an input and an output dimension, got {dims:?}"
        )));
    }
    if dims.contains(&0) {
        return Err(Error::Config(format!("zero-width layer in {dims:?}")));
    }
    Ok(())
}

fn add_bias<T: Real>(z: &mut Matrix<T>, b: &[T]) {
    for r in 0..z.rows() {
        for (v, &bb) in z.row_mut(r).iter_mut().zip(b) {
            *v += bb;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric_grad(net: &Mlp<f64>, x: &Matrix<f64>, target: &Matrix<f64>) -> Vec<Vec<f64>> {
        let h = 1e-4;
        let loss = |n: &Mlp<f64>| {
            let out = n.forward(x).unwrap();
            0.5 * out.sub(target).unwrap().sq_frobenius()
        };
        let mut work = net.clone();
        let shapes: Vec<usize> = net.params().iter().map(|s| s.len()).collect();
        let mut out = Vec::new();
        for (t, &len) in shapes.iter().enumerate() {
            let mut g = Vec::with_capacity(len);
            for i in 0..len {
                let orig = work.params()[t][i];
                work.params_mut()[t][i] = orig + h;
                let up = loss(&work);
                work.params_mut()[t][i] = orig - h;
                let down = loss(&work);
                work.params_mut()[t][i] = orig;
                g.push((up - down) / (2.0 * h));
            }
            out.push(g);
        }
        out
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let a = Mlp::<f64>::new(&[4, 8, 3], Activation::Relu, OutputActivation::Linear, &mut Rng::new(1)).unwrap();
        let b = Mlp::<f64>::new(&[4, 8, 3], Activation::Relu, OutputActivation::Linear, &mut Rng::new(1)).unwrap();
        assert_eq!(a, b);
        assert!(a.biases().iter().all(|b| b.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn init_variance_matches_fan_in() {
        let net = Mlp::<f64>::new(&[100, 200], Activation::Relu, OutputActivation::Linear, &mut Rng::new(3)).unwrap();
        let w = net.weights()[0].as_slice();
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len() as f64;
        let expected = 2.0 / 100.0;
        assert!((var - expected).abs() < 0.2 * expected, "var {var}");
    }

    #[test]
    fn empty_dims_rejected() {
        assert!(Mlp::<f64>::new(&[], Activation::Relu, OutputActivation::Linear, &mut Rng::new(0)).is_err());
        assert!(Mlp::<f64>::new(&[3], Activation::Relu, OutputActivation::Linear, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn zero_weights_output_final_bias() {
        let w = vec![Matrix::zeros(3, 4), Matrix::zeros(4, 2)];
        let b = vec![vec![0.5; 4], vec![1.5, -2.0]];
        let net = Mlp::from_parts(w, b, Activation::Relu, OutputActivation::Linear).unwrap();
        let x = Matrix::from_fn(5, 3, |r, c| (r * c) as f64 - 1.0);
        let y = net.forward(&x).unwrap();
        for r in 0..5 {
            assert_eq!(y.row(r), &[1.5, -2.0]);
        }
    }

    #[test]
    fn identity_layer_is_identity() {
        let net = Mlp::from_parts(
            vec![Matrix::identity(3)],
            vec![vec![0.0; 3]],
            Activation::Relu,
            OutputActivation::Linear,
        )
        .unwrap();
        let x = Matrix::from_fn(2, 3, |r, c| (r as f64) - (c as f64) * 0.7);
        assert_eq!(net.forward(&x).unwrap(), x);
    }

    #[test]
    fn hand_computed_two_layer_forward() {
        // x = [1, -2]; W0 = [[1, 2], [3, -1]], b0 = [0.5, 0]; relu
        // z0 = [1 - 6 + 0.5, 2 + 2] = [-4.5, 4] -> h = [0, 4]
        // W1 = [[2], [0.25]], b1 = [0.1] -> y = 0 + 1 + 0.1 = 1.1
        let net = Mlp::from_parts(
            vec![
                Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, -1.0]]).unwrap(),
                Matrix::from_rows(&[vec![2.0], vec![0.25]]).unwrap(),
            ],
            vec![vec![0.5, 0.0], vec![0.1]],
            Activation::Relu,
            OutputActivation::Linear,
        )
        .unwrap();
        let y = net.forward(&Matrix::from_rows(&[vec![1.0, -2.0]]).unwrap()).unwrap();
        assert!((y[(0, 0)] - 1.1f64).abs() < 1e-12);

        let sig = Mlp::from_parts(
            vec![Matrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap()],
            vec![vec![0.0]],
            Activation::Relu,
            OutputActivation::Sigmoid,
        )
        .unwrap();
        let y = sig.forward(&Matrix::from_rows(&[vec![0.3, -0.3]]).unwrap()).unwrap();
        assert!((y[(0, 0)] - 0.5f64).abs() < 1e-12);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let net = Mlp::<f64>::new(&[3, 5, 2], Activation::Tanh, OutputActivation::Linear, &mut Rng::new(2)).unwrap();
        let x = Matrix::from_fn(4, 3, |r, c| (r + c) as f64 * 0.1);
        let (g, dx) = net.backprop(&x, &Matrix::zeros(4, 2)).unwrap();
        assert!(g.is_zero());
        assert_eq!(dx.max_abs(), 0.0);
    }

    #[test]
    fn linear_least_squares_gradient() {
        let mut rng = Rng::new(8);
        let w = Matrix::from_fn(3, 2, |_, _| rng.normal());
        let net = Mlp::from_parts(vec![w.clone()], vec![vec![0.0; 2]], Activation::Relu, OutputActivation::Linear).unwrap();
        let x = Matrix::from_fn(1, 3, |_, _| rng.normal());
        let y = Matrix::from_fn(1, 2, |_, _| rng.normal());
        let resid = x.matmul(&w).unwrap().sub(&y).unwrap();
        let (g, _) = net.backprop(&x, &resid).unwrap();
        // dW = xᵀ (xW − y) in row-vector convention
        let expected = x.t_matmul(&resid).unwrap();
        assert!(g.weights[0].sub(&expected).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn backprop_matches_finite_differences() {
        for (act, out) in [
            (Activation::Tanh, OutputActivation::Linear),
            (Activation::Tanh, OutputActivation::Sigmoid),
            (Activation::Relu, OutputActivation::Linear),
        ] {
            let mut rng = Rng::new(17);
            let net = Mlp::<f64>::new(&[4, 6, 5, 3], act, out, &mut rng).unwrap();
            let x = Matrix::from_fn(5, 4, |_, _| rng.normal());
            let target = Matrix::from_fn(5, 3, |_, _| rng.normal());
            let trace = net.forward_trace(&x).unwrap();
            let upstream = trace.output().sub(&target).unwrap();
            let (g, _) = net.backward(&trace, &upstream).unwrap();
            let numeric = numeric_grad(&net, &x, &target);
            for (a, n) in g.slices().iter().zip(&numeric) {
                for (&ai, &ni) in a.iter().zip(n) {
                    let rel = (ai - ni).abs() / ai.abs().max(ni.abs()).max(1e-3);
                    assert!(rel < 1e-4, "{act:?}/{out:?}: analytic {ai}, numeric {ni}");
                }
            }
        }
    }

    #[test]
    fn bias_free_relu_is_positively_homogeneous() {
        let mut rng = Rng::new(5);
        let net = Mlp::<f64>::new(&[3, 7, 2], Activation::Relu, OutputActivation::Linear, &mut rng).unwrap();
        let x = Matrix::from_fn(4, 3, |_, _| rng.normal());
        let y = net.forward(&x).unwrap();
        let y2 = net.forward(&x.scale(2.5)).unwrap();
        assert!(y2.sub(&y.scale(2.5)).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn input_dimension_checked() {
        let net = Mlp::<f64>::new(&[3, 2], Activation::Relu, OutputActivation::Linear, &mut Rng::new(0)).unwrap();
        assert!(matches!(net.forward(&Matrix::zeros(1, 4)), Err(Error::Dimension { .. })));
        let trace = net.forward_trace(&Matrix::zeros(1, 3)).unwrap();
        assert!(net.backward(&trace, &Matrix::zeros(1, 3)).is_err());
    }
}
