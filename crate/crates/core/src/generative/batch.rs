use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};
use crate::scalar::Real;

/// Row-aligned sketch/image features used for training.
#[derive(Clone, Copy, Debug)]
pub struct TrainingPairs<'a, T = f64> {
    pub sketch: &'a Matrix<T>,
    pub image: &'a Matrix<T>,
}

impl<'a, T: Real> TrainingPairs<'a, T> {
    pub fn new(sketch: &'a Matrix<T>, image: &'a Matrix<T>) -> Result<Self> {
        if sketch.rows() != image.rows() {
            return Err(Error::Consistency(format!(
                "{} sketch rows paired with {} image rows",
                sketch.rows(),
                image.rows()
            )));
        }
        if sketch.rows() == 0 {
            return Err(Error::Config("empty training set".into()));
        }
        Ok(Self { sketch, image })
    }

    pub fn len(&self) -> usize {
        self.sketch.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn batch(&self, idx: &[usize]) -> (Matrix<T>, Matrix<T>) {
        (self.sketch.select_rows(idx), self.image.select_rows(idx))
    }
}

/// Shuffles once per epoch and hands out consecutive batches; the last
/// partial batch of an epoch is kept.
#[derive(Clone, Debug)]
pub struct BatchSampler {
    order: Vec<usize>,
    cursor: usize,
    batch_size: usize,
    epoch: usize,
    rng: Rng,
}

impl BatchSampler {
    pub fn new(n: usize, batch_size: usize, rng: Rng) -> Self {
        let mut s = Self {
            order: (0..n).collect(),
            cursor: n,
            batch_size,
            epoch: 0,
            rng,
        };
        s.cursor = s.order.len();
        s
    }

    /// Number of completed reshuffles.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }

    /// All batches of one fresh epoch.
    pub fn epoch_batches(&mut self) -> Vec<Vec<usize>> {
        self.reshuffle();
        let batches = self
            .order
            .chunks(self.batch_size)
            .map(<[usize]>::to_vec)
            .collect();
        self.cursor = self.order.len();
        batches
    }

    /// Next batch in an endless stream of epochs.
    pub fn next_batch(&mut self) -> Vec<usize> {
        if self.cursor >= self.order.len() {
            self.reshuffle();
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let batch = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        batch
    }

    fn reshuffle(&mut self) {
        self.rng.shuffle(&mut self.order);
        self.cursor = 0;
        self.epoch += 1;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceUnit {
    Epoch,
    Iteration,
}

/// One line of a loss trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossRecord {
    pub unit: TraceUnit,
    pub index: usize,
    #[serde(flatten)]
    pub components: BTreeMap<String, f64>,
}

impl LossRecord {
    pub fn new(unit: TraceUnit, index: usize, components: &[(&str, f64)]) -> Self {
        Self {
            unit,
            index,
            components: components
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
        }
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.components.get(key).copied()
    }
}

/// Writes records as line-delimited JSON.
pub fn write_trace(records: &[LossRecord], mut out: impl std::io::Write) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// A trained model with its loss history.
#[derive(Clone, Debug)]
pub struct Trained<M> {
    pub model: M,
    pub trace: Vec<LossRecord>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_covers_every_row_once_and_keeps_partial_batch() {
        let mut s = BatchSampler::new(10, 4, Rng::new(1));
        let batches = s.epoch_batches();
        assert_eq!(batches.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4, 2]);
        let mut all: Vec<usize> = batches.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn endless_stream_reshuffles() {
        let mut s = BatchSampler::new(5, 2, Rng::new(3));
        let sizes: Vec<usize> = (0..6).map(|_| s.next_batch().len()).collect();
        assert_eq!(sizes, vec![2, 2, 1, 2, 2, 1]);
        assert_eq!(s.epoch(), 2);
    }

    #[test]
    fn trace_lines_are_json_objects() {
        let rec = LossRecord::new(TraceUnit::Epoch, 3, &[("total", 1.5), ("kl", 0.25)]);
        let mut buf = Vec::new();
        write_trace(&[rec], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "{\"unit\":\"epoch\",\"index\":3,\"kl\":0.25,\"total\":1.5}\n"
        );
    }
}
