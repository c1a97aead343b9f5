use crate::error::{Error, Result};
use crate::linalg::Rng;
use crate::nn::AdamState;
use crate::scalar::Real;

use super::batch::{BatchSampler, LossRecord, TraceUnit, Trained, TrainingPairs};
use super::caae::CaaeModel;
use super::config::{ModelConfig, TrainConfig};
use super::cvae::CvaeModel;

// Independent streams of the run seed.
const STREAM_INIT: u64 = 0;
const STREAM_BATCHES: u64 = 1;
const STREAM_NOISE: u64 = 2;

fn check_inputs<T: Real>(data: &TrainingPairs<'_, T>, cfg: &ModelConfig, tcfg: &TrainConfig) -> Result<()> {
    tcfg.validate()?;
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    if data.sketch.cols() != cfg.d_sketch || data.image.cols() != cfg.d_img {
        return Err(Error::dim(
            "training data",
            format!("sketch {} / image {} features", cfg.d_sketch, cfg.d_img),
            format!("sketch {} / image {}", data.sketch.cols(), data.image.cols()),
        ));
    }
    Ok(())
}

pub fn train_cvae<T: Real>(
    data: TrainingPairs<'_, T>,
    cfg: &ModelConfig,
    tcfg: &TrainConfig,
) -> Result<Trained<CvaeModel<T>>> {
    train_cvae_observed(data, cfg, tcfg, &mut |_| {})
}

/// As [`train_cvae`]; `observer` sees the row indices of every batch before
/// it is used.
pub fn train_cvae_observed<T: Real>(
    data: TrainingPairs<'_, T>,
    cfg: &ModelConfig,
    tcfg: &TrainConfig,
    observer: &mut dyn FnMut(&[usize]),
) -> Result<Trained<CvaeModel<T>>> {
    check_inputs(&data, cfg, tcfg)?;
    let mut model = CvaeModel::new(cfg, &mut Rng::with_stream(tcfg.seed, STREAM_INIT))?;
    let mut sampler = BatchSampler::new(data.len(), tcfg.batch_size, Rng::with_stream(tcfg.seed, STREAM_BATCHES));
    let mut noise = Rng::with_stream(tcfg.seed, STREAM_NOISE);
    let mut adam = AdamState::new(tcfg.adam);
    let mut trace = Vec::with_capacity(tcfg.epochs);

    for epoch in 1..=tcfg.epochs {
        let mut sums = [0.0f64; 4];
        for batch in sampler.epoch_batches() {
            observer(&batch);
            let (s, x) = data.batch(&batch);
            let (loss, grads) = model.loss_and_grads(&s, &x, &mut noise)?;
            if !loss.total.is_finite() {
                return Err(Error::Divergence { stage: "epoch", index: epoch });
            }
            adam.step(model.params_mut(), grads.slices())?;
            let w = batch.len() as f64;
            for (acc, v) in sums.iter_mut().zip([loss.total, loss.kl, loss.recon, loss.sketch_recon]) {
                *acc += w * v.to_f64_lossless();
            }
        }
        let n = data.len() as f64;
        trace.push(LossRecord::new(
            TraceUnit::Epoch,
            epoch,
            &[
                ("total", sums[0] / n),
                ("kl", sums[1] / n),
                ("recon", sums[2] / n),
                ("sketch_recon", sums[3] / n),
            ],
        ));
    }
    if !model.encoder.is_finite() || !model.decoder.is_finite() {
        return Err(Error::Divergence { stage: "epoch", index: tcfg.epochs });
    }
    Ok(Trained { model, trace })
}

pub fn train_caae<T: Real>(
    data: TrainingPairs<'_, T>,
    cfg: &ModelConfig,
    tcfg: &TrainConfig,
) -> Result<Trained<CaaeModel<T>>> {
    train_caae_observed(data, cfg, tcfg, &mut |_| {})
}

/// Alternating schedule: `disc_iters_per_gen` discriminator updates, then
/// one encoder/decoder/regressor update, repeated `iterations` times.
pub fn train_caae_observed<T: Real>(
    data: TrainingPairs<'_, T>,
    cfg: &ModelConfig,
    tcfg: &TrainConfig,
    observer: &mut dyn FnMut(&[usize]),
) -> Result<Trained<CaaeModel<T>>> {
    check_inputs(&data, cfg, tcfg)?;
    let mut model = CaaeModel::new(cfg, &mut Rng::with_stream(tcfg.seed, STREAM_INIT))?;
    let mut sampler = BatchSampler::new(data.len(), tcfg.batch_size, Rng::with_stream(tcfg.seed, STREAM_BATCHES));
    let mut noise = Rng::with_stream(tcfg.seed, STREAM_NOISE);
    let mut disc_adam = AdamState::new(tcfg.adam);
    let mut ae_adam = AdamState::new(tcfg.adam);
    let mut trace = Vec::with_capacity(tcfg.iterations);

    for it in 1..=tcfg.iterations {
        let mut disc_loss = 0.0;
        let mut accuracy = 0.0;
        for _ in 0..tcfg.disc_iters_per_gen {
            let batch = sampler.next_batch();
            observer(&batch);
            let (s, x) = data.batch(&batch);
            let (loss, grads, acc) = model.discriminator_step_parts(&s, &x, &mut noise)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { stage: "iteration", index: it });
            }
            disc_adam.step(model.discriminator.params_mut(), grads.discriminator.slices())?;
            disc_loss = loss.to_f64_lossless();
            accuracy += acc;
        }
        accuracy /= tcfg.disc_iters_per_gen as f64;

        let batch = sampler.next_batch();
        observer(&batch);
        let (s, x) = data.batch(&batch);
        let (losses, grads) = model.autoencoder_loss_and_grads(&s, &x)?;
        if !losses.enc_dec.is_finite() {
            return Err(Error::Divergence { stage: "iteration", index: it });
        }
        ae_adam.step(model.autoencoder_params_mut(), grads.autoencoder_slices())?;

        trace.push(LossRecord::new(
            TraceUnit::Iteration,
            it,
            &[
                ("enc_dec", losses.enc_dec.to_f64_lossless()),
                ("recon", losses.recon.to_f64_lossless()),
                ("adversarial", losses.adversarial.to_f64_lossless()),
                ("sketch_recon", losses.sketch_recon.to_f64_lossless()),
                ("disc", disc_loss),
                ("disc_accuracy", accuracy),
            ],
        ));
    }
    Ok(Trained { model, trace })
}
