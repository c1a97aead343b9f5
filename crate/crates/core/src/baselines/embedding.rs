//! Two-branch embedding networks trained with contrastive or triplet losses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generative::{LossRecord, TraceUnit, Trained, TrainingPairs};
use crate::linalg::{norm, sq_dist, Matrix, Rng};
use crate::nn::{Activation, AdamConfig, AdamState, Mlp, MlpGrads, OutputActivation};
use crate::scalar::Real;

use super::losses::{siamese_v1_with_grad, siamese_v2_with_grad, triplet_active, triplet_loss};
use super::triplets::{Triplet, TripletSampler, TripletStrategy};

const STREAM_INIT: u64 = 0;
const STREAM_ORDER: u64 = 1;
const STREAM_NEGATIVES: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingLoss {
    /// Contrastive loss with a margin.
    Siamese1,
    /// Exponential contrastive loss scaled by the distance bound `Q`.
    Siamese2,
    TripletCoarse,
    TripletFine,
}

impl EmbeddingLoss {
    pub fn name(self) -> &'static str {
        match self {
            EmbeddingLoss::Siamese1 => "siamese1",
            EmbeddingLoss::Siamese2 => "siamese2",
            EmbeddingLoss::TripletCoarse => "triplet_coarse",
            EmbeddingLoss::TripletFine => "triplet_fine",
        }
    }

    pub fn is_triplet(self) -> bool {
        matches!(self, EmbeddingLoss::TripletCoarse | EmbeddingLoss::TripletFine)
    }

    /// Epoch cap: 20 for the Siamese losses, 80 for triplets.
    pub fn default_epochs(self) -> usize {
        if self.is_triplet() {
            80
        } else {
            20
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub loss: EmbeddingLoss,
    pub embed_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Margin of the contrastive and triplet losses.
    pub margin: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl EmbeddingConfig {
    pub fn new(loss: EmbeddingLoss, seed: u64) -> Self {
        Self {
            loss,
            embed_dim: 64,
            hidden: vec![256],
            activation: Activation::Relu,
            margin: 1.0,
            epochs: loss.default_epochs(),
            batch_size: 64,
            adam: AdamConfig::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::Config("embedding and hidden widths must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return Err(Error::Config(format!("margin must be > 0, got {}", self.margin)));
        }
        Ok(())
    }

    fn dims(&self, input: usize) -> Vec<usize> {
        let mut dims = vec![input];
        dims.extend(&self.hidden);
        dims.push(self.embed_dim);
        dims
    }
}

/// One sketch/image pair for a contrastive loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairItem {
    pub sketch: usize,
    pub image: usize,
    pub same_class: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EmbeddingBatch {
    Pairs(Vec<PairItem>),
    Triplets(Vec<Triplet>),
}

impl EmbeddingBatch {
    pub fn len(&self) -> usize {
        match self {
            EmbeddingBatch::Pairs(p) => p.len(),
            EmbeddingBatch::Triplets(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Sketch and image branches mapping into a shared embedding space.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingPair<T = f64> {
    pub sketch_net: Mlp<T>,
    pub image_net: Mlp<T>,
    pub embed_dim: usize,
    /// Margin for `Siamese1` and the triplet losses; `Q` for `Siamese2`.
    pub margin_or_q: T,
    pub loss: EmbeddingLoss,
}

impl<T: Real> EmbeddingPair<T> {
    pub fn new(d_sketch: usize, d_img: usize, cfg: &EmbeddingConfig, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        let sketch_net = Mlp::new(&cfg.dims(d_sketch), cfg.activation, OutputActivation::Linear, rng)?;
        let image_net = Mlp::new(&cfg.dims(d_img), cfg.activation, OutputActivation::Linear, rng)?;
        Ok(Self {
            sketch_net,
            image_net,
            embed_dim: cfg.embed_dim,
            margin_or_q: T::lit(cfg.margin),
            loss: cfg.loss,
        })
    }

    pub fn from_parts(sketch_net: Mlp<T>, image_net: Mlp<T>, margin_or_q: T, loss: EmbeddingLoss) -> Result<Self> {
        let embed_dim = sketch_net.output_dim();
        if image_net.output_dim() != embed_dim {
            return Err(Error::Consistency(format!(
                "branch outputs differ: sketch {embed_dim}, image {}",
                image_net.output_dim()
            )));
        }
        if !(margin_or_q > T::zero()) {
            return Err(Error::Consistency(format!("margin/Q must be > 0, got {margin_or_q}")));
        }
        Ok(Self {
            sketch_net,
            image_net,
            embed_dim,
            margin_or_q,
            loss,
        })
    }

    pub fn d_sketch(&self) -> usize {
        self.sketch_net.input_dim()
    }

    pub fn d_img(&self) -> usize {
        self.image_net.input_dim()
    }

    pub fn embed_sketch(&self, sketch: &Matrix<T>) -> Result<Matrix<T>> {
        self.sketch_net.forward(sketch)
    }

    pub fn embed_image(&self, image: &Matrix<T>) -> Result<Matrix<T>> {
        self.image_net.forward(image)
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = self.sketch_net.params_mut();
        out.extend(self.image_net.params_mut());
        out
    }

    /// Mean loss over a batch and its gradients for the sketch and image
    /// branches. Contrastive losses use Euclidean distance, triplets use
    /// squared Euclidean distance.
    pub fn batch_loss_and_grads(
        &self,
        data: &TrainingPairs<'_, T>,
        batch: &EmbeddingBatch,
    ) -> Result<(T, MlpGrads<T>, MlpGrads<T>)> {
        if batch.is_empty() {
            return Err(Error::Config("empty embedding batch".into()));
        }
        match batch {
            EmbeddingBatch::Pairs(items) => self.pair_loss(data, items),
            EmbeddingBatch::Triplets(items) => self.triplet_batch_loss(data, items),
        }
    }

    fn pair_loss(&self, data: &TrainingPairs<'_, T>, items: &[PairItem]) -> Result<(T, MlpGrads<T>, MlpGrads<T>)> {
        let b = items.len();
        let inv_b = T::one() / T::from_usize(b).unwrap();
        let s_idx: Vec<usize> = items.iter().map(|p| p.sketch).collect();
        let i_idx: Vec<usize> = items.iter().map(|p| p.image).collect();
        let s_trace = self.sketch_net.forward_trace(&data.sketch.select_rows(&s_idx))?;
        let i_trace = self.image_net.forward_trace(&data.image.select_rows(&i_idx))?;
        let (ea, ep) = (s_trace.output(), i_trace.output());

        let mut total = T::zero();
        let mut d_a = Matrix::zeros(b, self.embed_dim);
        let mut d_p = Matrix::zeros(b, self.embed_dim);
        for (r, item) in items.iter().enumerate() {
            let diff: Vec<T> = ea.row(r).iter().zip(ep.row(r)).map(|(&a, &p)| a - p).collect();
            let dist = norm(&diff);
            let (value, g) = match self.loss {
                EmbeddingLoss::Siamese1 => siamese_v1_with_grad(dist, item.same_class, self.margin_or_q)?,
                EmbeddingLoss::Siamese2 => siamese_v2_with_grad(dist, item.same_class, self.margin_or_q)?,
                other => return Err(Error::Config(format!("{} takes triplet batches", other.name()))),
            };
            total += value;
            if dist > T::zero() {
                let coef = g / dist * inv_b;
                for (c, &dv) in diff.iter().enumerate() {
                    d_a[(r, c)] = coef * dv;
                    d_p[(r, c)] = -coef * dv;
                }
            }
        }
        let (gs, _) = self.sketch_net.backward(&s_trace, &d_a)?;
        let (gi, _) = self.image_net.backward(&i_trace, &d_p)?;
        Ok((total * inv_b, gs, gi))
    }

    fn triplet_batch_loss(
        &self,
        data: &TrainingPairs<'_, T>,
        items: &[Triplet],
    ) -> Result<(T, MlpGrads<T>, MlpGrads<T>)> {
        if !self.loss.is_triplet() {
            return Err(Error::Config(format!("{} takes pair batches", self.loss.name())));
        }
        let b = items.len();
        let inv_b = T::one() / T::from_usize(b).unwrap();
        let two = T::lit(2.0);
        let anchors: Vec<usize> = items.iter().map(|t| t.anchor).collect();
        // positives in rows 0..b, negatives in rows b..2b
        let images: Vec<usize> = items
            .iter()
            .map(|t| t.positive)
            .chain(items.iter().map(|t| t.negative))
            .collect();
        let s_trace = self.sketch_net.forward_trace(&data.sketch.select_rows(&anchors))?;
        let i_trace = self.image_net.forward_trace(&data.image.select_rows(&images))?;
        let (ea, ei) = (s_trace.output(), i_trace.output());

        let mut total = T::zero();
        let mut d_a = Matrix::zeros(b, self.embed_dim);
        let mut d_i = Matrix::zeros(2 * b, self.embed_dim);
        for r in 0..b {
            let (a, p, n) = (ea.row(r), ei.row(r), ei.row(b + r));
            let (dp, dn) = (sq_dist(a, p), sq_dist(a, n));
            total += triplet_loss(dp, dn, self.margin_or_q);
            if triplet_active(dp, dn, self.margin_or_q) {
                for c in 0..self.embed_dim {
                    d_a[(r, c)] = two * (n[c] - p[c]) * inv_b;
                    d_i[(r, c)] = -two * (a[c] - p[c]) * inv_b;
                    d_i[(b + r, c)] = two * (a[c] - n[c]) * inv_b;
                }
            }
        }
        let (gs, _) = self.sketch_net.backward(&s_trace, &d_a)?;
        let (gi, _) = self.image_net.backward(&i_trace, &d_i)?;
        Ok((total * inv_b, gs, gi))
    }

    /// Largest Euclidean distance over the given pairs.
    fn max_pair_distance(&self, data: &TrainingPairs<'_, T>, items: &[PairItem]) -> Result<T> {
        let s_idx: Vec<usize> = items.iter().map(|p| p.sketch).collect();
        let i_idx: Vec<usize> = items.iter().map(|p| p.image).collect();
        let ea = self.embed_sketch(&data.sketch.select_rows(&s_idx))?;
        let ep = self.embed_image(&data.image.select_rows(&i_idx))?;
        Ok((0..items.len())
            .map(|r| sq_dist(ea.row(r), ep.row(r)).sqrt())
            .fold(T::zero(), T::max))
    }
}

/// Trains both branches with Adam on the configured loss. Each epoch visits
/// every sketch once as an anchor.
///
/// Contrastive epochs pair each sketch with its own image or, with
/// probability one half, an image of another class. For `Siamese2` the bound
/// `Q` is re-estimated before every epoch as the largest pair distance of
/// that epoch's pairs.
pub fn train_embedding<T: Real>(
    data: TrainingPairs<'_, T>,
    labels: &[usize],
    cfg: &EmbeddingConfig,
) -> Result<Trained<EmbeddingPair<T>>> {
    cfg.validate()?;
    if labels.len() != data.len() {
        return Err(Error::Consistency(format!(
            "{} labels for {} training pairs",
            labels.len(),
            data.len()
        )));
    }
    let strategy = match cfg.loss {
        EmbeddingLoss::TripletFine => TripletStrategy::Fine,
        _ => TripletStrategy::Coarse,
    };
    let mut sampler = TripletSampler::new(labels, strategy, Rng::with_stream(cfg.seed, STREAM_NEGATIVES))?;
    let mut model = EmbeddingPair::new(
        data.sketch.cols(),
        data.image.cols(),
        cfg,
        &mut Rng::with_stream(cfg.seed, STREAM_INIT),
    )?;
    let mut order_rng = Rng::with_stream(cfg.seed, STREAM_ORDER);
    let mut adam = AdamState::new(cfg.adam);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order_rng.shuffle(&mut order);
        let batches: Vec<EmbeddingBatch> = if cfg.loss.is_triplet() {
            let all: Vec<Triplet> = order.iter().map(|&i| sampler.draw_for(i)).collect();
            all.chunks(cfg.batch_size).map(|c| EmbeddingBatch::Triplets(c.to_vec())).collect()
        } else {
            let all: Vec<PairItem> = order
                .iter()
                .map(|&i| {
                    if order_rng.uniform() < 0.5 {
                        PairItem { sketch: i, image: i, same_class: true }
                    } else {
                        let neg = sampler.draw_for(i).negative;
                        PairItem {
                            sketch: i,
                            image: neg,
                            same_class: labels[neg] == labels[i],
                        }
                    }
                })
                .collect();
            if cfg.loss == EmbeddingLoss::Siamese2 {
                model.margin_or_q = model.max_pair_distance(&data, &all)?.max(T::tiny());
            }
            all.chunks(cfg.batch_size).map(|c| EmbeddingBatch::Pairs(c.to_vec())).collect()
        };

        let mut sum = 0.0;
        for batch in &batches {
            let (loss, gs, gi) = model.batch_loss_and_grads(&data, batch)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { stage: "epoch", index: epoch });
            }
            let mut grads = gs.slices();
            grads.extend(gi.slices());
            adam.step(model.params_mut(), grads)?;
            sum += loss.to_f64_lossless() * batch.len() as f64;
        }
        let mut comps = vec![("loss", sum / data.len() as f64)];
        if cfg.loss == EmbeddingLoss::Siamese2 {
            comps.push(("q", model.margin_or_q.to_f64_lossless()));
        }
        trace.push(LossRecord::new(TraceUnit::Epoch, epoch, &comps));
    }
    if !model.sketch_net.is_finite() || !model.image_net.is_finite() {
        return Err(Error::Divergence { stage: "epoch", index: cfg.epochs });
    }
    Ok(Trained { model, trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_class(n_per: usize, seed: u64) -> (Matrix<f64>, Matrix<f64>, Vec<usize>) {
        let mut rng = Rng::new(seed);
        let labels: Vec<usize> = (0..2 * n_per).map(|i| i / n_per).collect();
        let centre = |c: usize| if c == 0 { -1.0 } else { 1.0 };
        let image = Matrix::from_fn(2 * n_per, 4, |r, _| centre(labels[r]) + 0.2 * rng.normal());
        let sketch = Matrix::from_fn(2 * n_per, 3, |r, c| 0.5 * image[(r, c)] + 0.1 * rng.normal());
        (sketch, image, labels)
    }

    fn small_cfg(loss: EmbeddingLoss) -> EmbeddingConfig {
        let mut cfg = EmbeddingConfig::new(loss, 3);
        cfg.embed_dim = 4;
        cfg.hidden = vec![16];
        cfg.epochs = 3;
        cfg.batch_size = 8;
        cfg
    }

    #[test]
    fn default_epochs_follow_loss_family() {
        assert_eq!(EmbeddingConfig::new(EmbeddingLoss::Siamese1, 0).epochs, 20);
        assert_eq!(EmbeddingConfig::new(EmbeddingLoss::Siamese2, 0).epochs, 20);
        assert_eq!(EmbeddingConfig::new(EmbeddingLoss::TripletFine, 0).epochs, 80);
    }

    #[test]
    fn training_is_seeded() {
        let (s, x, labels) = two_class(10, 1);
        for loss in [EmbeddingLoss::Siamese2, EmbeddingLoss::TripletCoarse] {
            let data = TrainingPairs::new(&s, &x).unwrap();
            let a = train_embedding(data, &labels, &small_cfg(loss)).unwrap();
            let b = train_embedding(data, &labels, &small_cfg(loss)).unwrap();
            assert_eq!(a.model, b.model);
            assert_eq!(a.trace, b.trace);
        }
    }

    #[test]
    fn siamese2_records_q() {
        let (s, x, labels) = two_class(6, 2);
        let t = train_embedding(TrainingPairs::new(&s, &x).unwrap(), &labels, &small_cfg(EmbeddingLoss::Siamese2)).unwrap();
        assert!(t.trace.iter().all(|r| r.get("q").unwrap() > 0.0));
        assert!(t.model.margin_or_q > 0.0);
    }

    #[test]
    fn mismatched_branch_widths_rejected() {
        let mut rng = Rng::new(0);
        let a = Mlp::<f64>::new(&[3, 4], Activation::Relu, OutputActivation::Linear, &mut rng).unwrap();
        let b = Mlp::<f64>::new(&[5, 6], Activation::Relu, OutputActivation::Linear, &mut rng).unwrap();
        assert!(EmbeddingPair::from_parts(a, b, 1.0, EmbeddingLoss::Siamese1).is_err());
    }

    #[test]
    fn wrong_batch_kind_rejected() {
        let (s, x, labels) = two_class(4, 5);
        let data = TrainingPairs::new(&s, &x).unwrap();
        let model = EmbeddingPair::<f64>::new(3, 4, &small_cfg(EmbeddingLoss::Siamese1), &mut Rng::new(0)).unwrap();
        let batch = EmbeddingBatch::Triplets(vec![Triplet { anchor: 0, positive: 0, negative: 5 }]);
        assert!(model.batch_loss_and_grads(&data, &batch).is_err());
        assert_eq!(labels.len(), 8);
    }
}
