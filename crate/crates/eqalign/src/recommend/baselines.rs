//! Statistical reference recommenders: random guessing, a single static
//! preset, and ground-truth replay. None of them look at the prompt text
//! beyond (for the oracle) using it as a lookup key, which is the point —
//! they bracket the achievable range for the language-driven strategies.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{RecommendError, Recommender};
use crate::beosonic::{BeoCoord, DB_MAX, DB_MIN};
use crate::dataset::Dataset;

/// Simulates random guessing: per evaluation, a fresh bivariate Gaussian
/// with mean drawn uniformly over the square and isotropic spread `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomGaussianBaseline {
    pub sigma: f64,
}

impl Default for RandomGaussianBaseline {
    fn default() -> Self {
        Self { sigma: 2.0 }
    }
}

impl Recommender for RandomGaussianBaseline {
    fn name(&self) -> &str {
        "random-gaussian"
    }

    fn recommend(
        &self,
        _prompt: &str,
        n_samples: usize,
        seed: u64,
    ) -> Result<Vec<BeoCoord>, RecommendError> {
        if n_samples == 0 {
            return Err(RecommendError::InvalidConfig(
                "n_samples must be at least 1".into(),
            ));
        }
        if !self.sigma.is_finite() || self.sigma <= 0.0 {
            return Err(RecommendError::InvalidConfig(format!(
                "sigma must be positive and finite, got {}",
                self.sigma
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mean_x = rng.random_range(DB_MIN..=DB_MAX);
        let mean_y = rng.random_range(DB_MIN..=DB_MAX);
        let noise = Normal::new(0.0, self.sigma).expect("sigma checked above");
        Ok((0..n_samples)
            .map(|_| {
                let x = mean_x + noise.sample(&mut rng);
                let y = mean_y + noise.sample(&mut rng);
                BeoCoord::clamped(x, y).expect("gaussian draw is finite")
            })
            .collect())
    }
}

/// Always answers with the global centroid of the training annotations,
/// regardless of the prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticPresetBaseline {
    centroid: BeoCoord,
}

impl StaticPresetBaseline {
    pub fn from_train(train: &Dataset) -> Result<Self, RecommendError> {
        if train.entries.is_empty() {
            return Err(RecommendError::EmptyTrain);
        }
        let mut sum_x = 0.0;
        let mut sum_y = 0.0;
        let mut n = 0usize;
        for entry in &train.entries {
            for p in entry.responses.points() {
                sum_x += p.x();
                sum_y += p.y();
                n += 1;
            }
        }
        let centroid = BeoCoord::new(sum_x / n as f64, sum_y / n as f64)
            .expect("mean of in-square points is in the square");
        Ok(Self { centroid })
    }

    pub fn centroid(&self) -> BeoCoord {
        self.centroid
    }
}

impl Recommender for StaticPresetBaseline {
    fn name(&self) -> &str {
        "static-preset"
    }

    fn recommend(
        &self,
        _prompt: &str,
        n_samples: usize,
        _seed: u64,
    ) -> Result<Vec<BeoCoord>, RecommendError> {
        if n_samples == 0 {
            return Err(RecommendError::InvalidConfig(
                "n_samples must be at least 1".into(),
            ));
        }
        Ok(vec![self.centroid; n_samples])
    }
}

/// Replays the ground-truth annotations for each known prompt. With
/// `n_samples` equal to the annotation count this reproduces the target
/// distribution exactly (distance zero under an exact metric); other counts
/// cycle through the annotations in order.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReplay {
    answers: BTreeMap<String, Vec<BeoCoord>>,
}

impl OracleReplay {
    /// Indexes a dataset by prompt text. If the same prompt text appears
    /// twice, the first entry wins.
    pub fn from_dataset(data: &Dataset) -> Result<Self, RecommendError> {
        if data.entries.is_empty() {
            return Err(RecommendError::EmptyTrain);
        }
        let mut answers = BTreeMap::new();
        for entry in &data.entries {
            answers
                .entry(entry.prompt.clone())
                .or_insert_with(|| entry.responses.points().to_vec());
        }
        Ok(Self { answers })
    }
}

impl Recommender for OracleReplay {
    fn name(&self) -> &str {
        "oracle-replay"
    }

    fn recommend(
        &self,
        prompt: &str,
        n_samples: usize,
        _seed: u64,
    ) -> Result<Vec<BeoCoord>, RecommendError> {
        if n_samples == 0 {
            return Err(RecommendError::InvalidConfig(
                "n_samples must be at least 1".into(),
            ));
        }
        let points = self
            .answers
            .get(prompt)
            .ok_or_else(|| RecommendError::UnknownPrompt {
                prompt: prompt.to_string(),
            })?;
        Ok((0..n_samples).map(|i| points[i % points.len()]).collect())
    }
}
