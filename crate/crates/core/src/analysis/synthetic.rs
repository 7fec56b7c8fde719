//! Seeded generator of annotations with a planted latent quality, for
//! exercising the split harness without real human data.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{AnnotationRecord, AnnotationSet, Quality, MAX_RATING};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedNoise {
    pub n_pairs: usize,
    pub n_annotators: usize,
    /// Standard deviation of each annotator's rating noise, in rating units.
    pub annotator_noise: f64,
    /// Standard deviation of the metric's noise, in latent units.
    pub metric_noise: f64,
    pub seed: u64,
}

impl Default for PlantedNoise {
    fn default() -> Self {
        Self {
            n_pairs: 60,
            n_annotators: 10,
            annotator_noise: 1.0,
            metric_noise: 0.8,
            seed: 7,
        }
    }
}

impl PlantedNoise {
    /// Every pair gets a latent quality `z ~ N(0, 1)`; annotator ratings are
    /// `round(2 + z + e)` clamped to `0..=4`, the metric is `0.1 (z + m)`.
    pub fn generate(&self, quality: Quality) -> (AnnotationSet, BTreeMap<String, f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let mut records = Vec::with_capacity(self.n_pairs * self.n_annotators);
        let mut scores = BTreeMap::new();
        for p in 0..self.n_pairs {
            let pair_id = format!("pair{p:03}");
            let z: f64 = unit.sample(&mut rng);
            for a in 0..self.n_annotators {
                let e: f64 = unit.sample(&mut rng) * self.annotator_noise;
                let rating = (2.0 + z + e).round().clamp(0.0, f64::from(MAX_RATING)) as u8;
                records.push(AnnotationRecord {
                    pair_id: pair_id.clone(),
                    annotator_id: format!("ann{a:02}"),
                    quality,
                    score: rating,
                });
            }
            let m: f64 = unit.sample(&mut rng) * self.metric_noise;
            scores.insert(pair_id, 0.1 * (z + m));
        }
        let set = AnnotationSet::new(records).expect("generated ratings are in range and unique");
        (set, scores)
    }
}
