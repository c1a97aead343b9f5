use crate::error::{Error, Result};
use crate::linalg::{gaussian_sample, Matrix, Rng};
use crate::nn::{gaussian_kl, Activation, Mlp, MlpGrads, OutputActivation};
use crate::scalar::Real;

use super::config::ModelConfig;
use super::{check_batch, decode_samples, mean_sq_error, sketch_reconstruction};

/// Log-variance produced by the encoder is clamped to this range.
pub const LOGVAR_CLAMP: f64 = 10.0;

/// Conditional VAE over image features given sketch features.
///
/// Encoder: `[x_img | x_sketch] → [μ | logvar]`. Decoder:
/// `[z | x_sketch] → x̂_img`. Regressor: one linear layer `x̂_img → x_sketch`
/// whose squared error, weighted by `lambda_recons`, is added to the bound.
#[derive(Clone, Debug, PartialEq)]
pub struct CvaeModel<T = f64> {
    pub encoder: Mlp<T>,
    pub decoder: Mlp<T>,
    pub regressor: Mlp<T>,
    pub lambda_recons: T,
    pub d_latent: usize,
}

/// Batch-mean loss components. `total = kl + recon + λ·sketch_recon`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CvaeLoss<T = f64> {
    pub total: T,
    pub kl: T,
    pub recon: T,
    pub sketch_recon: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvaeGrads<T = f64> {
    pub encoder: MlpGrads<T>,
    pub decoder: MlpGrads<T>,
    pub regressor: MlpGrads<T>,
}

impl<T: Real> CvaeGrads<T> {
    pub fn slices(&self) -> Vec<&[T]> {
        let mut out = self.encoder.slices();
        out.extend(self.decoder.slices());
        out.extend(self.regressor.slices());
        out
    }
}

impl<T: Real> CvaeModel<T> {
    pub fn new(cfg: &ModelConfig, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        let encoder = Mlp::new(
            &cfg.encoder_dims(2 * cfg.d_latent),
            cfg.activation,
            OutputActivation::Linear,
            rng,
        )?;
        let decoder = Mlp::new(&cfg.decoder_dims(), cfg.activation, OutputActivation::Linear, rng)?;
        let regressor = Mlp::new(
            &[cfg.d_img, cfg.d_sketch],
            Activation::Relu,
            OutputActivation::Linear,
            rng,
        )?;
        Ok(Self {
            encoder,
            decoder,
            regressor,
            lambda_recons: T::lit(cfg.lambda_recons),
            d_latent: cfg.d_latent,
        })
    }

    /// Reassembles a model from its networks, checking the dimension chain.
    pub fn from_parts(
        encoder: Mlp<T>,
        decoder: Mlp<T>,
        regressor: Mlp<T>,
        lambda_recons: T,
        d_latent: usize,
    ) -> Result<Self> {
        let m = Self {
            encoder,
            decoder,
            regressor,
            lambda_recons,
            d_latent,
        };
        m.check_chain()?;
        Ok(m)
    }

    fn check_chain(&self) -> Result<()> {
        let d_img = self.decoder.output_dim();
        let d_sketch = self.regressor.output_dim();
        let ok = self.encoder.input_dim() == d_img + d_sketch
            && self.encoder.output_dim() == 2 * self.d_latent
            && self.decoder.input_dim() == self.d_latent + d_sketch
            && self.regressor.input_dim() == d_img
            && self.regressor.num_layers() == 1;
        if !ok || !(self.lambda_recons >= T::zero()) {
            return Err(Error::Consistency(format!(
                "CVAE networks do not chain: encoder {:?}, decoder {:?}, regressor {:?}, latent {}",
                self.encoder.dims(),
                self.decoder.dims(),
                self.regressor.dims(),
                self.d_latent
            )));
        }
        Ok(())
    }

    pub fn d_img(&self) -> usize {
        self.decoder.output_dim()
    }

    pub fn d_sketch(&self) -> usize {
        self.regressor.output_dim()
    }

    pub fn params(&self) -> Vec<&[T]> {
        let mut out = self.encoder.params();
        out.extend(self.decoder.params());
        out.extend(self.regressor.params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = self.encoder.params_mut();
        out.extend(self.decoder.params_mut());
        out.extend(self.regressor.params_mut());
        out
    }

    pub fn loss(&self, sketch: &Matrix<T>, image: &Matrix<T>, rng: &mut Rng) -> Result<CvaeLoss<T>> {
        Ok(self.loss_and_grads(sketch, image, rng)?.0)
    }

    /// Loss and exact gradients for one batch. Draws one `ε ~ N(0, I)` per
    /// row for the reparameterized sample `z = μ + exp(logvar/2)·ε`.
    pub fn loss_and_grads(
        &self,
        sketch: &Matrix<T>,
        image: &Matrix<T>,
        rng: &mut Rng,
    ) -> Result<(CvaeLoss<T>, CvaeGrads<T>)> {
        check_batch(sketch, image, self.d_sketch(), self.d_img())?;
        let b = sketch.rows();
        let inv_b = T::one() / T::from_usize(b).unwrap();
        let l = self.d_latent;
        let clamp = T::lit(LOGVAR_CLAMP);

        let enc_in = image.hstack(sketch)?;
        let enc_trace = self.encoder.forward_trace(&enc_in)?;
        let (mu, raw_logvar) = enc_trace.output().split_cols(l);
        let logvar = raw_logvar.map(|v| v.max(-clamp).min(clamp));

        let eps: Matrix<T> = gaussian_sample(rng, b, l);
        let std = logvar.map(|v| (v * T::lit(0.5)).exp());
        let z = mu.add(&std.hadamard(&eps)?)?;

        let dec_in = z.hstack(sketch)?;
        let dec_trace = self.decoder.forward_trace(&dec_in)?;
        let x_hat = dec_trace.output();

        let (recon, mut d_xhat) = mean_sq_error(x_hat, image)?;
        let (sketch_recon, reg_grads, d_xhat_reg) =
            sketch_reconstruction(&self.regressor, x_hat, sketch, self.lambda_recons)?;
        d_xhat.add_assign(&d_xhat_reg)?;

        let kl = (0..b)
            .map(|r| gaussian_kl(mu.row(r), logvar.row(r)))
            .sum::<T>()
            * inv_b;

        let (dec_grads, d_dec_in) = self.decoder.backward(&dec_trace, &d_xhat)?;
        let (dz, _) = d_dec_in.split_cols(l);

        let half = T::lit(0.5);
        let mut d_enc_out = Matrix::zeros(b, 2 * l);
        for r in 0..b {
            for j in 0..l {
                let (m, lv, raw) = (mu[(r, j)], logvar[(r, j)], raw_logvar[(r, j)]);
                let g = dz[(r, j)];
                d_enc_out[(r, j)] = g + m * inv_b;
                let d_lv = g * eps[(r, j)] * half * std[(r, j)] + half * (lv.exp() - T::one()) * inv_b;
                // clamped log-variance has zero derivative
                d_enc_out[(r, l + j)] = if raw.abs() < clamp { d_lv } else { T::zero() };
            }
        }
        let (enc_grads, _) = self.encoder.backward(&enc_trace, &d_enc_out)?;

        let total = kl + recon + self.lambda_recons * sketch_recon;
        Ok((
            CvaeLoss {
                total,
                kl,
                recon,
                sketch_recon,
            },
            CvaeGrads {
                encoder: enc_grads,
                decoder: dec_grads,
                regressor: reg_grads,
            },
        ))
    }

    /// `n` image features for one sketch: row `i` decodes `[zᵢ | sketch]`
    /// with `zᵢ ~ N(0, I)` drawn in row order.
    pub fn generate(&self, sketch: &[T], n: usize, rng: &mut Rng) -> Result<Matrix<T>> {
        decode_samples(&self.decoder, self.d_latent, sketch, n, rng)
    }
}
