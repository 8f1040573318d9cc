//! Empirical sensitivity of the head fine-tuning algorithm.
//!
//! The sampler draws `m` index pairs `(i, j)` uniformly and independently
//! (so `i == j` can occur), trains one head on `d` without record `i` and one
//! on `d` without record `j` using the same configuration and seed, and
//! records the L1 and L2 distances between the two heads. The estimate is the
//! maximum over pairs. Because it is a maximum over a sample of adjacent
//! pairs, it lower-bounds the true sensitivity.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::mechanisms::Sensitivity;
use crate::pipeline::{finetune_head, Dataset, TrainConfig, WeightVector};
use crate::rng::RngStream;

/// Largest dataset accepted by [`brute_force_sensitivity`] (`|d|²` trainings).
pub const BRUTE_FORCE_LIMIT: usize = 12;

/// Anything that maps `(θ, d, cfg)` to head weights deterministically.
pub trait HeadTrainer: Sync {
    fn train(&self, theta: &WeightVector, data: &Dataset, cfg: &TrainConfig) -> Result<WeightVector>;
}

impl<F> HeadTrainer for F
where
    F: Fn(&WeightVector, &Dataset, &TrainConfig) -> Result<WeightVector> + Sync,
{
    fn train(&self, theta: &WeightVector, data: &Dataset, cfg: &TrainConfig) -> Result<WeightVector> {
        self(theta, data, cfg)
    }
}

/// The pipeline's own head trainer.
#[derive(Debug, Clone, Copy, Default)]
pub struct FinetuneTrainer;

impl HeadTrainer for FinetuneTrainer {
    fn train(&self, theta: &WeightVector, data: &Dataset, cfg: &TrainConfig) -> Result<WeightVector> {
        finetune_head(theta, data, cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityEstimate {
    pub delta_l1: f64,
    pub delta_l2: f64,
    pub m: usize,
    pub seed: u64,
    /// `[l1, l2]` distance of every sampled pair, in draw order.
    pub per_pair_norms: Vec<[f64; 2]>,
}

impl SensitivityEstimate {
    pub fn from_pair_norms(per_pair_norms: Vec<[f64; 2]>, seed: u64) -> Result<Self> {
        if per_pair_norms.is_empty() {
            return Err(Error::Empty("sensitivity estimate needs at least one pair"));
        }
        let delta_l1 = per_pair_norms.iter().map(|p| p[0]).fold(0.0, f64::max);
        let delta_l2 = per_pair_norms.iter().map(|p| p[1]).fold(0.0, f64::max);
        Ok(Self {
            delta_l1,
            delta_l2,
            m: per_pair_norms.len(),
            seed,
            per_pair_norms,
        })
    }

    pub fn l1(&self) -> Result<Sensitivity> {
        Sensitivity::l1(self.delta_l1)
    }

    pub fn l2(&self) -> Result<Sensitivity> {
        Sensitivity::l2(self.delta_l2)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// The `m` index pairs the sampler visits for a dataset of `n` records.
///
/// Draws are sequential from stream 0 of `seed`, `i` before `j`, so the
/// pairs for a smaller `m` are a prefix of those for a larger one.
pub fn draw_index_pairs(n: usize, m: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut g = RngStream::new(seed, 0).generator();
    (0..m).map(|_| (g.gen_range(0..n), g.gen_range(0..n))).collect()
}

/// Distances between leave-one-out heads for an explicit pair list.
///
/// Each distinct removed index is trained once; trainings run in parallel
/// and the result does not depend on scheduling.
pub fn sensitivity_for_pairs(
    trainer: &impl HeadTrainer,
    theta: &WeightVector,
    data: &Dataset,
    cfg: &TrainConfig,
    pairs: &[(usize, usize)],
    seed: u64,
) -> Result<SensitivityEstimate> {
    if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= data.len() || j >= data.len()) {
        return Err(invalid(format!("pair ({i}, {j}) out of range for {} records", data.len())));
    }
    let removed: Vec<usize> = pairs
        .iter()
        .flat_map(|&(i, j)| [i, j])
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let heads: BTreeMap<usize, WeightVector> = removed
        .par_iter()
        .map(|&k| Ok((k, trainer.train(theta, &data.without(k)?, cfg)?)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .collect();
    let norms = pairs
        .iter()
        .map(|(i, j)| {
            let (a, b) = (&heads[i], &heads[j]);
            Ok([a.l1_distance(b)?, a.l2_distance(b)?])
        })
        .collect::<Result<Vec<_>>>()?;
    SensitivityEstimate::from_pair_norms(norms, seed)
}

pub fn sample_sensitivity_with(
    trainer: &impl HeadTrainer,
    theta: &WeightVector,
    data: &Dataset,
    cfg: &TrainConfig,
    m: usize,
    seed: u64,
) -> Result<SensitivityEstimate> {
    if data.len() < 2 {
        return Err(Error::InsufficientRecords {
            needed: 2,
            available: data.len(),
        });
    }
    if m == 0 {
        return Err(invalid("sample size m must be at least 1"));
    }
    let pairs = draw_index_pairs(data.len(), m, seed);
    sensitivity_for_pairs(trainer, theta, data, cfg, &pairs, seed)
}

/// Empirical sensitivity of [`finetune_head`] from `m` sampled pairs.
pub fn sample_sensitivity(
    theta: &WeightVector,
    data: &Dataset,
    cfg: &TrainConfig,
    m: usize,
    seed: u64,
) -> Result<SensitivityEstimate> {
    sample_sensitivity_with(&FinetuneTrainer, theta, data, cfg, m, seed)
}

/// Exact maximum over all ordered leave-one-out pairs; `m = |d|²`.
pub fn brute_force_sensitivity_with(
    trainer: &impl HeadTrainer,
    theta: &WeightVector,
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<SensitivityEstimate> {
    let n = data.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(invalid(format!(
            "brute force is limited to {BRUTE_FORCE_LIMIT} records, got {n}"
        )));
    }
    if n < 2 {
        return Err(Error::InsufficientRecords { needed: 2, available: n });
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    sensitivity_for_pairs(trainer, theta, data, cfg, &pairs, 0)
}

pub fn brute_force_sensitivity(theta: &WeightVector, data: &Dataset, cfg: &TrainConfig) -> Result<SensitivityEstimate> {
    brute_force_sensitivity_with(&FinetuneTrainer, theta, data, cfg)
}
