use crate::error::{Error, Result};
use crate::linalg::{gaussian_sample, Matrix, Rng};
use crate::nn::{Activation, ForwardTrace, Mlp, MlpGrads, OutputActivation};
use crate::scalar::Real;

use super::config::ModelConfig;
use super::{check_batch, decode_samples, mean_sq_error, sketch_reconstruction};

/// Discriminator outputs are clamped to `[p, 1 - p]` before taking logs.
pub const DISC_CLAMP: f64 = 1e-7;

/// Conditional adversarial autoencoder. The encoder is deterministic; a
/// discriminator on the latent code separates prior draws (`N(0, I)`, "real")
/// from encoded training pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct CaaeModel<T = f64> {
    pub encoder: Mlp<T>,
    pub decoder: Mlp<T>,
    pub discriminator: Mlp<T>,
    pub regressor: Mlp<T>,
    pub lambda_recons: T,
    pub d_latent: usize,
    pub nonsaturating: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CaaeLosses<T = f64> {
    /// `recon + adversarial + λ·sketch_recon`, minimized by encoder/decoder.
    pub enc_dec: T,
    /// `-[mean log D(z_prior) + mean log(1 - D(E(x)))]`.
    pub disc: T,
    pub recon: T,
    pub adversarial: T,
    pub sketch_recon: T,
}

/// Gradients of one CAAE objective with respect to every network.
#[derive(Clone, Debug, PartialEq)]
pub struct CaaeGrads<T = f64> {
    pub encoder: MlpGrads<T>,
    pub decoder: MlpGrads<T>,
    pub discriminator: MlpGrads<T>,
    pub regressor: MlpGrads<T>,
}

impl<T: Real> CaaeGrads<T> {
    /// Encoder, decoder and regressor tensors, in `autoencoder_params_mut` order.
    pub fn autoencoder_slices(&self) -> Vec<&[T]> {
        let mut out = self.encoder.slices();
        out.extend(self.decoder.slices());
        out.extend(self.regressor.slices());
        out
    }
}

struct Encoded<T> {
    trace: ForwardTrace<T>,
    disc_trace: ForwardTrace<T>,
}

#[inline]
fn clamp_prob<T: Real>(p: T) -> (T, bool) {
    let lo = T::lit(DISC_CLAMP);
    let hi = T::one() - lo;
    if p < lo {
        (lo, false)
    } else if p > hi {
        (hi, false)
    } else {
        (p, true)
    }
}

impl<T: Real> CaaeModel<T> {
    pub fn new(cfg: &ModelConfig, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        let encoder = Mlp::new(
            &cfg.encoder_dims(cfg.d_latent),
            cfg.activation,
            OutputActivation::Linear,
            rng,
        )?;
        let decoder = Mlp::new(&cfg.decoder_dims(), cfg.activation, OutputActivation::Linear, rng)?;
        let discriminator = Mlp::new(
            &cfg.discriminator_dims(),
            cfg.activation,
            OutputActivation::Sigmoid,
            rng,
        )?;
        let regressor = Mlp::new(
            &[cfg.d_img, cfg.d_sketch],
            Activation::Relu,
            OutputActivation::Linear,
            rng,
        )?;
        Ok(Self {
            encoder,
            decoder,
            discriminator,
            regressor,
            lambda_recons: T::lit(cfg.lambda_recons),
            d_latent: cfg.d_latent,
            nonsaturating: cfg.nonsaturating,
        })
    }

    pub fn from_parts(
        encoder: Mlp<T>,
        decoder: Mlp<T>,
        discriminator: Mlp<T>,
        regressor: Mlp<T>,
        lambda_recons: T,
        d_latent: usize,
        nonsaturating: bool,
    ) -> Result<Self> {
        let m = Self {
            encoder,
            decoder,
            discriminator,
            regressor,
            lambda_recons,
            d_latent,
            nonsaturating,
        };
        let d_img = m.d_img();
        let d_sketch = m.d_sketch();
        let ok = m.encoder.input_dim() == d_img + d_sketch
            && m.encoder.output_dim() == d_latent
            && m.decoder.input_dim() == d_latent + d_sketch
            && m.discriminator.input_dim() == d_latent
            && m.discriminator.output_dim() == 1
            && m.discriminator.output_activation() == OutputActivation::Sigmoid
            && m.regressor.input_dim() == d_img
            && m.regressor.num_layers() == 1;
        if !ok || !(lambda_recons >= T::zero()) {
            return Err(Error::Consistency(format!(
                "CAAE networks do not chain: encoder {:?}, decoder {:?}, discriminator {:?}, regressor {:?}",
                m.encoder.dims(),
                m.decoder.dims(),
                m.discriminator.dims(),
                m.regressor.dims()
            )));
        }
        Ok(m)
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
        out.extend(self.discriminator.params());
        out.extend(self.regressor.params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = self.encoder.params_mut();
        out.extend(self.decoder.params_mut());
        out.extend(self.discriminator.params_mut());
        out.extend(self.regressor.params_mut());
        out
    }

    /// Encoder, decoder and regressor tensors.
    pub fn autoencoder_params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = self.encoder.params_mut();
        out.extend(self.decoder.params_mut());
        out.extend(self.regressor.params_mut());
        out
    }

    fn encode(&self, sketch: &Matrix<T>, image: &Matrix<T>) -> Result<Encoded<T>> {
        check_batch(sketch, image, self.d_sketch(), self.d_img())?;
        let trace = self.encoder.forward_trace(&image.hstack(sketch)?)?;
        let disc_trace = self.discriminator.forward_trace(trace.output())?;
        Ok(Encoded { trace, disc_trace })
    }

    /// Both objectives on one batch; `rng` supplies the prior draws for the
    /// discriminator term.
    pub fn losses(&self, sketch: &Matrix<T>, image: &Matrix<T>, rng: &mut Rng) -> Result<CaaeLosses<T>> {
        let (ae, _) = self.autoencoder_loss_and_grads(sketch, image)?;
        let (disc, _) = self.discriminator_loss_and_grads(sketch, image, rng)?;
        Ok(CaaeLosses { disc, ..ae })
    }

    /// Encoder/decoder objective and its gradients with respect to all four
    /// networks. The `disc` field of the returned losses is left at zero.
    pub fn autoencoder_loss_and_grads(
        &self,
        sketch: &Matrix<T>,
        image: &Matrix<T>,
    ) -> Result<(CaaeLosses<T>, CaaeGrads<T>)> {
        let enc = self.encode(sketch, image)?;
        let b = sketch.rows();
        let inv_b = T::one() / T::from_usize(b).unwrap();
        let l = self.d_latent;
        let z = enc.trace.output();

        let dec_trace = self.decoder.forward_trace(&z.hstack(sketch)?)?;
        let x_hat = dec_trace.output();
        let (recon, mut d_xhat) = mean_sq_error(x_hat, image)?;
        let (sketch_recon, reg_grads, d_xhat_reg) =
            sketch_reconstruction(&self.regressor, x_hat, sketch, self.lambda_recons)?;
        d_xhat.add_assign(&d_xhat_reg)?;

        let d_out = enc.disc_trace.output();
        let mut adversarial = T::zero();
        let mut d_disc_out = Matrix::zeros(b, 1);
        for r in 0..b {
            let (p, live) = clamp_prob(d_out[(r, 0)]);
            if self.nonsaturating {
                adversarial -= p.ln() * inv_b;
                if live {
                    d_disc_out[(r, 0)] = -inv_b / p;
                }
            } else {
                adversarial += (T::one() - p).ln() * inv_b;
                if live {
                    d_disc_out[(r, 0)] = -inv_b / (T::one() - p);
                }
            }
        }
        let (disc_grads, dz_adv) = self.discriminator.backward(&enc.disc_trace, &d_disc_out)?;
        let (dec_grads, d_dec_in) = self.decoder.backward(&dec_trace, &d_xhat)?;
        let (mut dz, _) = d_dec_in.split_cols(l);
        dz.add_assign(&dz_adv)?;
        let (enc_grads, _) = self.encoder.backward(&enc.trace, &dz)?;

        let enc_dec = recon + adversarial + self.lambda_recons * sketch_recon;
        Ok((
            CaaeLosses {
                enc_dec,
                disc: T::zero(),
                recon,
                adversarial,
                sketch_recon,
            },
            CaaeGrads {
                encoder: enc_grads,
                decoder: dec_grads,
                discriminator: disc_grads,
                regressor: reg_grads,
            },
        ))
    }

    /// Discriminator objective and its gradients. Decoder and regressor do
    /// not enter this objective; their gradients are zero.
    pub fn discriminator_loss_and_grads(
        &self,
        sketch: &Matrix<T>,
        image: &Matrix<T>,
        rng: &mut Rng,
    ) -> Result<(T, CaaeGrads<T>)> {
        let (loss, grads, _) = self.discriminator_step_parts(sketch, image, rng)?;
        Ok((loss, grads))
    }

    /// Also returns the discriminator's accuracy on the batch: prior draws
    /// classified real (`D > 0.5`) plus encodings classified fake.
    pub(crate) fn discriminator_step_parts(
        &self,
        sketch: &Matrix<T>,
        image: &Matrix<T>,
        rng: &mut Rng,
    ) -> Result<(T, CaaeGrads<T>, f64)> {
        let enc = self.encode(sketch, image)?;
        let b = sketch.rows();
        let inv_b = T::one() / T::from_usize(b).unwrap();
        let half = T::lit(0.5);

        let prior: Matrix<T> = gaussian_sample(rng, b, self.d_latent);
        let prior_trace = self.discriminator.forward_trace(&prior)?;

        let mut loss = T::zero();
        let mut correct = 0usize;
        let mut d_prior = Matrix::zeros(b, 1);
        let mut d_fake = Matrix::zeros(b, 1);
        for r in 0..b {
            let raw_real = prior_trace.output()[(r, 0)];
            let (p_real, live_real) = clamp_prob(raw_real);
            loss -= p_real.ln() * inv_b;
            if live_real {
                d_prior[(r, 0)] = -inv_b / p_real;
            }
            let raw_fake = enc.disc_trace.output()[(r, 0)];
            let (p_fake, live_fake) = clamp_prob(raw_fake);
            loss -= (T::one() - p_fake).ln() * inv_b;
            if live_fake {
                d_fake[(r, 0)] = inv_b / (T::one() - p_fake);
            }
            correct += usize::from(raw_real > half) + usize::from(raw_fake <= half);
        }

        let (mut disc_grads, _) = self.discriminator.backward(&prior_trace, &d_prior)?;
        let (fake_grads, dz) = self.discriminator.backward(&enc.disc_trace, &d_fake)?;
        disc_grads.accumulate(&fake_grads);
        let (enc_grads, _) = self.encoder.backward(&enc.trace, &dz)?;

        let accuracy = correct as f64 / (2 * b) as f64;
        Ok((
            loss,
            CaaeGrads {
                encoder: enc_grads,
                decoder: MlpGrads::zeros_like(&self.decoder),
                discriminator: disc_grads,
                regressor: MlpGrads::zeros_like(&self.regressor),
            },
            accuracy,
        ))
    }

    pub fn generate(&self, sketch: &[T], n: usize, rng: &mut Rng) -> Result<Matrix<T>> {
        decode_samples(&self.decoder, self.d_latent, sketch, n, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (CaaeModel<f64>, Matrix<f64>, Matrix<f64>) {
        let mut cfg = ModelConfig::new(6, 4, 3);
        cfg.hidden = vec![8];
        cfg.disc_hidden = vec![5];
        let mut rng = Rng::new(33);
        let model = CaaeModel::new(&cfg, &mut rng).unwrap();
        let sketch = Matrix::from_fn(5, 4, |_, _| rng.normal());
        let image = Matrix::from_fn(5, 6, |_, _| rng.normal());
        (model, sketch, image)
    }

    #[test]
    fn constant_half_discriminator() {
        let (mut model, s, x) = small();
        // zero output layer: sigmoid(0) = 0.5 everywhere
        let last = model.discriminator.num_layers() - 1;
        let mut p = model.discriminator.params_mut();
        p[2 * last].iter_mut().for_each(|v| *v = 0.0);
        p[2 * last + 1].iter_mut().for_each(|v| *v = 0.0);
        let l = model.losses(&s, &x, &mut Rng::new(2)).unwrap();
        assert!((l.adversarial - 0.5f64.ln()).abs() < 1e-15);
        assert!((l.disc - (-2.0 * 0.5f64.ln())).abs() < 1e-15);
        assert!((l.disc - 1.3862943611198906).abs() < 1e-12);
    }

    #[test]
    fn lambda_zero_drops_sketch_term() {
        let (mut model, s, x) = small();
        model.lambda_recons = 0.0;
        let l = model.losses(&s, &x, &mut Rng::new(2)).unwrap();
        assert_eq!(l.enc_dec, l.recon + l.adversarial);
    }

    #[test]
    fn discriminator_probabilities_are_open_interval() {
        let (model, s, x) = small();
        let z = model.encoder.forward(&x.hstack(&s).unwrap()).unwrap();
        let d = model.discriminator.forward(&z).unwrap();
        assert!(d.as_slice().iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn generation_matches_cvae_contract() {
        let (model, s, _) = small();
        let a = model.generate(s.row(1), 4, &mut Rng::new(5)).unwrap();
        assert_eq!(a, model.generate(s.row(1), 4, &mut Rng::new(5)).unwrap());
        let one = model.generate(s.row(1), 1, &mut Rng::new(5)).unwrap();
        assert_eq!(one.row(0), a.row(0));
    }
}
