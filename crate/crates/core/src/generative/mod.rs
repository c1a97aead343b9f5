//! Conditional generative models of image features given sketch features.

mod batch;
mod caae;
mod config;
mod cvae;
mod train;

pub use batch::{write_trace, BatchSampler, LossRecord, TraceUnit, Trained, TrainingPairs};
pub use caae::{CaaeGrads, CaaeLosses, CaaeModel, DISC_CLAMP};
pub use config::{ModelConfig, TrainConfig};
pub use cvae::{CvaeGrads, CvaeLoss, CvaeModel, LOGVAR_CLAMP};
pub use train::{train_caae, train_caae_observed, train_cvae, train_cvae_observed};

use crate::error::{Error, Result};
use crate::linalg::{gaussian_sample, Matrix, Rng};
use crate::nn::{Mlp, MlpGrads};
use crate::scalar::Real;

pub(crate) fn check_batch<T: Real>(
    sketch: &Matrix<T>,
    image: &Matrix<T>,
    d_sketch: usize,
    d_img: usize,
) -> Result<()> {
    if sketch.rows() == 0 || sketch.rows() != image.rows() {
        return Err(Error::dim(
            "batch",
            format!("{} nonempty paired rows", sketch.rows()),
            format!("{} image rows", image.rows()),
        ));
    }
    if sketch.cols() != d_sketch {
        return Err(Error::dim("batch sketch features", d_sketch, sketch.cols()));
    }
    if image.cols() != d_img {
        return Err(Error::dim("batch image features", d_img, image.cols()));
    }
    Ok(())
}

/// Batch mean of squared row distances, with its gradient in `pred`.
pub(crate) fn mean_sq_error<T: Real>(pred: &Matrix<T>, target: &Matrix<T>) -> Result<(T, Matrix<T>)> {
    let diff = pred.sub(target)?;
    let inv_b = T::one() / T::from_usize(pred.rows()).unwrap();
    Ok((diff.sq_frobenius() * inv_b, diff.scale(T::lit(2.0) * inv_b)))
}

/// `mean ‖f(x̂) − x_sketch‖²` for the one-layer regressor `f`. Gradients are
/// returned already multiplied by `lambda`.
pub(crate) fn sketch_reconstruction<T: Real>(
    regressor: &Mlp<T>,
    x_hat: &Matrix<T>,
    sketch: &Matrix<T>,
    lambda: T,
) -> Result<(T, MlpGrads<T>, Matrix<T>)> {
    let trace = regressor.forward_trace(x_hat)?;
    let (value, d_out) = mean_sq_error(trace.output(), sketch)?;
    let (grads, d_in) = regressor.backward(&trace, &d_out.scale(lambda))?;
    Ok((value, grads, d_in))
}

pub(crate) fn decode_samples<T: Real>(
    decoder: &Mlp<T>,
    d_latent: usize,
    sketch: &[T],
    n: usize,
    rng: &mut Rng,
) -> Result<Matrix<T>> {
    if decoder.input_dim() != d_latent + sketch.len() {
        return Err(Error::dim(
            "generate",
            decoder.input_dim() - d_latent,
            sketch.len(),
        ));
    }
    let z: Matrix<T> = gaussian_sample(rng, n, d_latent);
    decoder.forward(&z.hstack(&Matrix::repeat_row(sketch, n))?)
}
