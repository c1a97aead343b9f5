//! Finite-difference checks of every analytic gradient and of the
//! stationarity of the closed-form fits, on small seeded instances.

use serde::Serialize;

use crate::baselines::{
    eszsl_objective, fit_eszsl, fit_sae, sae_objective, EmbeddingBatch, EmbeddingConfig, EmbeddingLoss,
    EmbeddingPair, PairItem, Triplet,
};
use crate::error::Result;
use crate::generative::{CaaeModel, CvaeModel, ModelConfig, TrainingPairs};
use crate::linalg::{Matrix, Rng};
use crate::nn::{Activation, MlpGrads};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-4;
/// Largest accepted relative error between analytic and numeric gradients.
pub const GRAD_TOLERANCE: f64 = 1e-4;
/// Largest accepted gradient norm at a closed-form solution, relative to the
/// gradient norm at `W = 0`.
pub const STATIONARITY_TOLERANCE: f64 = 1e-6;
/// Denominator floor of [`relative_error`], so that entries which are zero
/// up to rounding compare on an absolute scale.
pub const RELATIVE_FLOOR: f64 = 1e-3;

/// Names of the checked objectives, in report order.
pub const GRADCHECK_LOSSES: [&str; 9] = [
    "siamese-contrastive",
    "siamese-exponential",
    "triplet",
    "cvae-bound",
    "cvae-sketch-recon",
    "caae-autoencoder",
    "caae-discriminator",
    "eszsl-stationarity",
    "sae-stationarity",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckRow {
    pub loss: &'static str,
    /// Worst relative error, or the relative gradient norm for the
    /// stationarity rows.
    pub metric: f64,
    pub tolerance: f64,
    /// Number of scalar parameters compared.
    pub checked: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckOptions {
    pub seed: u64,
    pub step: f64,
    /// Perturb the analytic gradient of the named loss before comparing, to
    /// confirm the harness can fail.
    pub corrupt: Option<String>,
}

impl GradCheckOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            step: FD_STEP,
            corrupt: None,
        }
    }
}

/// `|a − n| / max(|a|, |n|, RELATIVE_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Central differences of `f` at `x`.
pub fn numeric_gradient(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Worst relative error between `analytic` (flattened in `params` order) and
/// central differences of `loss` over every parameter of `model`.
fn compare<M: Clone>(
    model: &M,
    params: fn(&mut M) -> Vec<&mut [f64]>,
    analytic: &[f64],
    h: f64,
    loss: impl Fn(&M) -> Result<f64>,
) -> Result<(f64, usize)> {
    let mut m = model.clone();
    let shape: Vec<usize> = params(&mut m).iter().map(|s| s.len()).collect();
    assert_eq!(shape.iter().sum::<usize>(), analytic.len(), "gradient layout");
    let mut worst = 0.0f64;
    let mut k = 0;
    for (b, &len) in shape.iter().enumerate() {
        for i in 0..len {
            let orig = params(&mut m)[b][i];
            params(&mut m)[b][i] = orig + h;
            let up = loss(&m)?;
            params(&mut m)[b][i] = orig - h;
            let down = loss(&m)?;
            params(&mut m)[b][i] = orig;
            worst = worst.max(relative_error(analytic[k], (up - down) / (2.0 * h)));
            k += 1;
        }
    }
    Ok((worst, k))
}

fn flatten(parts: &[&MlpGrads<f64>]) -> Vec<f64> {
    parts.iter().flat_map(|g| g.slices().concat()).collect()
}

fn row(loss: &'static str, metric: f64, tolerance: f64, checked: usize) -> GradCheckRow {
    GradCheckRow {
        loss,
        metric,
        tolerance,
        checked,
        passed: metric <= tolerance,
    }
}

fn embedding_params(m: &mut EmbeddingPair<f64>) -> Vec<&mut [f64]> {
    m.params_mut()
}

fn cvae_params(m: &mut CvaeModel<f64>) -> Vec<&mut [f64]> {
    m.params_mut()
}

fn caae_params(m: &mut CaaeModel<f64>) -> Vec<&mut [f64]> {
    m.params_mut()
}

struct Instance {
    sketch: Matrix<f64>,
    image: Matrix<f64>,
    labels: Vec<usize>,
}

fn instance(rng: &mut Rng, n: usize, d_s: usize, d_i: usize) -> Instance {
    Instance {
        sketch: Matrix::from_fn(n, d_s, |_, _| rng.normal()),
        image: Matrix::from_fn(n, d_i, |_, _| rng.normal()),
        labels: (0..n).map(|i| i % 3).collect(),
    }
}

fn embedding_row(name: &'static str, loss: EmbeddingLoss, data: &Instance, opts: &GradCheckOptions) -> Result<GradCheckRow> {
    let mut cfg = EmbeddingConfig::new(loss, opts.seed);
    cfg.embed_dim = 3;
    cfg.hidden = vec![5];
    cfg.activation = Activation::Tanh;
    let mut model = EmbeddingPair::new(data.sketch.cols(), data.image.cols(), &cfg, &mut Rng::new(opts.seed))?;
    let pairs = TrainingPairs::new(&data.sketch, &data.image)?;
    let n = data.labels.len();
    let batch = match loss {
        EmbeddingLoss::Siamese1 | EmbeddingLoss::Siamese2 => {
            // margin/Q large enough that the dissimilar hinge is active
            model.margin_or_q = 3.0;
            EmbeddingBatch::Pairs(
                (0..n)
                    .map(|i| {
                        let image = if i % 2 == 0 { i } else { (i + 1) % n };
                        PairItem {
                            sketch: i,
                            image,
                            same_class: data.labels[i] == data.labels[image],
                        }
                    })
                    .collect(),
            )
        }
        _ => {
            model.margin_or_q = 5.0;
            EmbeddingBatch::Triplets(
                (0..n)
                    .map(|i| Triplet {
                        anchor: i,
                        positive: i,
                        negative: (i + 1) % n,
                    })
                    .collect(),
            )
        }
    };
    let (_, gs, gi) = model.batch_loss_and_grads(&pairs, &batch)?;
    let mut analytic = flatten(&[&gs, &gi]);
    corrupt_if(name, opts, &mut analytic);
    let (metric, checked) = compare(&model, embedding_params, &analytic, opts.step, |m| {
        Ok(m.batch_loss_and_grads(&pairs, &batch)?.0)
    })?;
    Ok(row(name, metric, GRAD_TOLERANCE, checked))
}

fn corrupt_if(name: &str, opts: &GradCheckOptions, analytic: &mut [f64]) {
    if opts.corrupt.as_deref() == Some(name) {
        if let Some(v) = analytic.first_mut() {
            *v = *v * 1.5 + 0.1;
        }
    }
}

fn model_config(d_i: usize, d_s: usize, lambda: f64) -> ModelConfig {
    let mut cfg = ModelConfig::new(d_i, d_s, 2);
    cfg.hidden = vec![5];
    cfg.disc_hidden = vec![4];
    cfg.activation = Activation::Tanh;
    cfg.lambda_recons = lambda;
    cfg
}

fn cvae_row(name: &'static str, lambda: f64, data: &Instance, opts: &GradCheckOptions) -> Result<GradCheckRow> {
    let cfg = model_config(data.image.cols(), data.sketch.cols(), lambda);
    let model = CvaeModel::new(&cfg, &mut Rng::new(opts.seed))?;
    let noise = Rng::with_stream(opts.seed, 1);
    let (_, grads) = model.loss_and_grads(&data.sketch, &data.image, &mut noise.clone())?;
    let mut analytic = flatten(&[&grads.encoder, &grads.decoder, &grads.regressor]);
    corrupt_if(name, opts, &mut analytic);
    // the same noise draws at every evaluation
    let (metric, checked) = compare(&model, cvae_params, &analytic, opts.step, |m| {
        Ok(m.loss(&data.sketch, &data.image, &mut noise.clone())?.total)
    })?;
    Ok(row(name, metric, GRAD_TOLERANCE, checked))
}

fn caae_rows(data: &Instance, opts: &GradCheckOptions) -> Result<[GradCheckRow; 2]> {
    let cfg = model_config(data.image.cols(), data.sketch.cols(), 0.5);
    let model = CaaeModel::new(&cfg, &mut Rng::new(opts.seed))?;

    let (_, g) = model.autoencoder_loss_and_grads(&data.sketch, &data.image)?;
    let mut analytic = flatten(&[&g.encoder, &g.decoder, &g.discriminator, &g.regressor]);
    corrupt_if(GRADCHECK_LOSSES[5], opts, &mut analytic);
    let (metric, checked) = compare(&model, caae_params, &analytic, opts.step, |m| {
        Ok(m.autoencoder_loss_and_grads(&data.sketch, &data.image)?.0.enc_dec)
    })?;
    let ae = row(GRADCHECK_LOSSES[5], metric, GRAD_TOLERANCE, checked);

    let prior = Rng::with_stream(opts.seed, 2);
    let (_, g) = model.discriminator_loss_and_grads(&data.sketch, &data.image, &mut prior.clone())?;
    let mut analytic = flatten(&[&g.encoder, &g.decoder, &g.discriminator, &g.regressor]);
    corrupt_if(GRADCHECK_LOSSES[6], opts, &mut analytic);
    let (metric, checked) = compare(&model, caae_params, &analytic, opts.step, |m| {
        Ok(m.discriminator_loss_and_grads(&data.sketch, &data.image, &mut prior.clone())?.0)
    })?;
    Ok([ae, row(GRADCHECK_LOSSES[6], metric, GRAD_TOLERANCE, checked)])
}

/// `‖∇f(W)‖ / ‖∇f(0)‖` with both gradients taken by central differences.
pub fn relative_stationarity(f: impl Fn(&Matrix<f64>) -> f64, w: &Matrix<f64>, h: f64) -> Result<f64> {
    let (r, c) = w.shape();
    let as_matrix = |v: &[f64]| Matrix::from_vec(r, c, v.to_vec()).expect("shape preserved");
    let grad = |at: &[f64]| numeric_gradient(|p| f(&as_matrix(p)), at, h);
    let g_w: f64 = grad(w.as_slice()).iter().map(|v| v * v).sum::<f64>().sqrt();
    let g_0: f64 = grad(&vec![0.0; r * c]).iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(g_w / g_0.max(f64::MIN_POSITIVE))
}

fn stationarity_rows(opts: &GradCheckOptions) -> Result<[GradCheckRow; 2]> {
    let mut rng = Rng::with_stream(opts.seed, 3);
    let x_s = Matrix::from_fn(30, 5, |_, _| rng.normal());
    let x_i = Matrix::from_fn(30, 4, |_, _| rng.normal());
    let (gamma, lambda) = (0.3, 0.7);

    let mut eszsl = fit_eszsl(&x_s, &x_i, gamma, lambda)?.w;
    let mut sae = fit_sae(&x_s, &x_i, lambda)?.w;
    if opts.corrupt.as_deref() == Some(GRADCHECK_LOSSES[7]) {
        eszsl.as_mut_slice()[0] += 0.1;
    }
    if opts.corrupt.as_deref() == Some(GRADCHECK_LOSSES[8]) {
        sae.as_mut_slice()[0] += 0.1;
    }
    let e = relative_stationarity(
        |w| eszsl_objective(&x_s, &x_i, w, gamma, lambda).expect("shapes fixed"),
        &eszsl,
        opts.step,
    )?;
    let s = relative_stationarity(
        |w| sae_objective(&x_s, &x_i, w, lambda).expect("shapes fixed"),
        &sae,
        opts.step,
    )?;
    let n = eszsl.as_slice().len();
    Ok([
        row(GRADCHECK_LOSSES[7], e, STATIONARITY_TOLERANCE, n),
        row(GRADCHECK_LOSSES[8], s, STATIONARITY_TOLERANCE, n),
    ])
}

/// Runs every check; one row per entry of [`GRADCHECK_LOSSES`].
pub fn run_gradient_suite(opts: &GradCheckOptions) -> Result<Vec<GradCheckRow>> {
    let mut rng = Rng::new(opts.seed);
    let data = instance(&mut rng, 6, 3, 4);
    let mut rows = vec![
        embedding_row(GRADCHECK_LOSSES[0], EmbeddingLoss::Siamese1, &data, opts)?,
        embedding_row(GRADCHECK_LOSSES[1], EmbeddingLoss::Siamese2, &data, opts)?,
        embedding_row(GRADCHECK_LOSSES[2], EmbeddingLoss::TripletFine, &data, opts)?,
        cvae_row(GRADCHECK_LOSSES[3], 0.0, &data, opts)?,
        cvae_row(GRADCHECK_LOSSES[4], 0.8, &data, opts)?,
    ];
    rows.extend(caae_rows(&data, opts)?);
    rows.extend(stationarity_rows(opts)?);
    Ok(rows)
}
