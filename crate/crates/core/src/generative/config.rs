use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, AdamConfig};

/// Architecture of the conditional generators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_img: usize,
    pub d_sketch: usize,
    pub d_latent: usize,
    /// Hidden widths shared by encoder and decoder.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Weight of the sketch-reconstruction penalty.
    pub lambda_recons: f64,
    /// Hidden widths of the CAAE discriminator.
    pub disc_hidden: Vec<usize>,
    /// Use `-log D(E(x))` for the encoder's adversarial term instead of
    /// `log(1 - D(E(x)))`.
    pub nonsaturating: bool,
}

impl ModelConfig {
    pub fn new(d_img: usize, d_sketch: usize, d_latent: usize) -> Self {
        let width = 256.max(2 * d_latent);
        Self {
            d_img,
            d_sketch,
            d_latent,
            hidden: vec![width, width],
            activation: Activation::Relu,
            lambda_recons: 0.1,
            disc_hidden: vec![64, 64],
            nonsaturating: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_img == 0 || self.d_sketch == 0 || self.d_latent == 0 {
            return Err(Error::Config(format!(
                "feature and latent dimensions must be positive (img {}, sketch {}, latent {})",
                self.d_img, self.d_sketch, self.d_latent
            )));
        }
        if self.hidden.contains(&0) || self.disc_hidden.contains(&0) {
            return Err(Error::Config("zero-width hidden layer".into()));
        }
        if !(self.lambda_recons >= 0.0 && self.lambda_recons.is_finite()) {
            return Err(Error::Config(format!(
                "lambda_recons must be a finite value >= 0, got {}",
                self.lambda_recons
            )));
        }
        Ok(())
    }

    pub(crate) fn encoder_dims(&self, out: usize) -> Vec<usize> {
        let mut dims = vec![self.d_img + self.d_sketch];
        dims.extend(&self.hidden);
        dims.push(out);
        dims
    }

    pub(crate) fn decoder_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.d_latent + self.d_sketch];
        dims.extend(&self.hidden);
        dims.push(self.d_img);
        dims
    }

    pub(crate) fn discriminator_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.d_latent];
        dims.extend(&self.disc_hidden);
        dims.push(1);
        dims
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Passes over the data (CVAE and the embedding baselines).
    pub epochs: usize,
    /// Encoder/decoder updates (CAAE).
    pub iterations: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Discriminator updates per encoder/decoder update (CAAE).
    pub disc_iters_per_gen: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn cvae(seed: u64) -> Self {
        Self {
            epochs: 25,
            iterations: 0,
            batch_size: 64,
            adam: AdamConfig::default(),
            disc_iters_per_gen: 1,
            seed,
        }
    }

    pub fn caae(seed: u64) -> Self {
        Self {
            epochs: 0,
            iterations: 6000,
            batch_size: 128,
            adam: AdamConfig::default(),
            disc_iters_per_gen: 32,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.disc_iters_per_gen == 0 {
            return Err(Error::Config("disc_iters_per_gen must be >= 1".into()));
        }
        let a = &self.adam;
        if !(a.lr > 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.epsilon > 0.0) {
            return Err(Error::Config(format!("invalid Adam hyperparameters {a:?}")));
        }
        Ok(())
    }
}
