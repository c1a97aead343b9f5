use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Rng;

/// How negatives are chosen for a sketch anchor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TripletStrategy {
    /// Any image of a different class.
    Coarse,
    /// Any image other than the anchor's own paired image.
    Fine,
}

/// Indices into a paired dataset: sketch `anchor`, image `positive`
/// (always the anchor's paired image) and image `negative`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

/// Endless stream of triplets over a paired dataset with per-row class ids.
#[derive(Clone, Debug)]
pub struct TripletSampler<'a> {
    labels: &'a [usize],
    strategy: TripletStrategy,
    rng: Rng,
}

impl<'a> TripletSampler<'a> {
    pub fn new(labels: &'a [usize], strategy: TripletStrategy, rng: Rng) -> Result<Self> {
        match strategy {
            TripletStrategy::Coarse => {
                let first = labels.first().copied();
                let classes = if labels.iter().any(|&c| Some(c) != first) { 2 } else { labels.len().min(1) };
                if classes < 2 {
                    return Err(Error::Cardinality {
                        what: "classes for coarse triplets",
                        needed: 2,
                        got: classes,
                    });
                }
            }
            TripletStrategy::Fine => {
                if labels.len() < 2 {
                    return Err(Error::Cardinality {
                        what: "images for fine triplets",
                        needed: 2,
                        got: labels.len(),
                    });
                }
            }
        }
        Ok(Self { labels, strategy, rng })
    }

    /// A triplet for a uniformly drawn anchor.
    pub fn draw(&mut self) -> Triplet {
        let anchor = self.rng.below(self.labels.len());
        self.draw_for(anchor)
    }

    /// A triplet for a given anchor.
    pub fn draw_for(&mut self, anchor: usize) -> Triplet {
        let n = self.labels.len();
        let negative = match self.strategy {
            // rejection keeps the draw uniform over other-class images
            TripletStrategy::Coarse => loop {
                let j = self.rng.below(n);
                if self.labels[j] != self.labels[anchor] {
                    break j;
                }
            },
            TripletStrategy::Fine => {
                let j = self.rng.below(n - 1);
                if j >= anchor {
                    j + 1
                } else {
                    j
                }
            }
        };
        Triplet {
            anchor,
            positive: anchor,
            negative,
        }
    }
}

impl Iterator for TripletSampler<'_> {
    type Item = Triplet;

    fn next(&mut self) -> Option<Triplet> {
        Some(self.draw())
    }
}

/// `count` triplets drawn from a fresh sampler.
pub fn sample_triplets(
    labels: &[usize],
    strategy: TripletStrategy,
    count: usize,
    rng: Rng,
) -> Result<Vec<Triplet>> {
    Ok(TripletSampler::new(labels, strategy, rng)?.take(count).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_needs_two_classes() {
        let err = TripletSampler::new(&[3, 3, 3], TripletStrategy::Coarse, Rng::new(0)).unwrap_err();
        assert!(matches!(err, Error::Cardinality { needed: 2, got: 1, .. }));
        assert!(TripletSampler::new(&[], TripletStrategy::Coarse, Rng::new(0)).is_err());
        assert!(TripletSampler::new(&[0], TripletStrategy::Fine, Rng::new(0)).is_err());
        assert!(TripletSampler::new(&[0, 0], TripletStrategy::Fine, Rng::new(0)).is_ok());
    }

    #[test]
    fn fine_never_returns_paired_image() {
        let labels = [0, 0, 1, 1];
        let ts = sample_triplets(&labels, TripletStrategy::Fine, 2000, Rng::new(4)).unwrap();
        assert!(ts.iter().all(|t| t.negative != t.anchor && t.positive == t.anchor));
    }

    #[test]
    fn seeded_streams_repeat() {
        let labels = [0, 1, 2, 0, 1, 2];
        let a = sample_triplets(&labels, TripletStrategy::Coarse, 50, Rng::new(8)).unwrap();
        let b = sample_triplets(&labels, TripletStrategy::Coarse, 50, Rng::new(8)).unwrap();
        assert_eq!(a, b);
    }
}
