//! Sweep configuration, loadable from a single JSON document.

use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use crate::error::{invalid, Result};
use crate::mechanisms::{MechanismKind, Norm, Sensitivity, DEFAULT_GAUSSIAN_DELTA};
use crate::mia::AttackClassifierConfig;
use crate::pipeline::io::read_dataset_csv;
use crate::pipeline::{Dataset, SyntheticSource, TrainConfig};
use crate::sensitivity::SensitivityEstimate;

/// Where the five data splits come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Gaussian class clusters; see [`SyntheticSource`]. Shadow partitions
    /// default to the fine-tuning size.
    Synthetic {
        num_classes: usize,
        feature_dim: usize,
        cluster_spread: f64,
        pretrain_records: usize,
        finetune_records: usize,
        holdout_records: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shadow_records: Option<usize>,
        seed: u64,
    },
    /// CSV files as written by `pipeline::io::write_dataset_csv`.
    Csv {
        pretrain: PathBuf,
        finetune: PathBuf,
        holdout: PathBuf,
        shadow_in: PathBuf,
        shadow_out: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        num_classes: Option<usize>,
    },
}

/// The splits a sweep runs on. `holdout` is both the utility validation set
/// and the victim's non-member set; the shadow partitions are disjoint from
/// everything the victim saw.
#[derive(Debug, Clone)]
pub struct DataSplits {
    pub pretrain: Dataset,
    pub finetune: Dataset,
    pub holdout: Dataset,
    pub shadow_in: Dataset,
    pub shadow_out: Dataset,
}

impl DatasetSpec {
    pub fn load(&self) -> Result<DataSplits> {
        match self {
            Self::Synthetic {
                num_classes,
                feature_dim,
                cluster_spread,
                pretrain_records,
                finetune_records,
                holdout_records,
                shadow_records,
                seed,
            } => {
                let src = SyntheticSource::new(*num_classes, *feature_dim, *cluster_spread, *seed)?;
                let shadow = shadow_records.unwrap_or(*finetune_records);
                Ok(DataSplits {
                    pretrain: src.generate(*pretrain_records, 1)?,
                    finetune: src.generate(*finetune_records, 2)?,
                    holdout: src.generate(*holdout_records, 3)?,
                    shadow_in: src.generate(shadow, 4)?,
                    shadow_out: src.generate(shadow, 5)?,
                })
            }
            Self::Csv { pretrain, finetune, holdout, shadow_in, shadow_out, num_classes } => {
                let read = |p: &PathBuf| read_dataset_csv(p, *num_classes);
                let splits = DataSplits {
                    pretrain: read(pretrain)?,
                    finetune: read(finetune)?,
                    holdout: read(holdout)?,
                    shadow_in: read(shadow_in)?,
                    shadow_out: read(shadow_out)?,
                };
                let dim = splits.pretrain.feature_dim();
                let classes = splits.finetune.num_classes();
                for d in [&splits.finetune, &splits.holdout, &splits.shadow_in, &splits.shadow_out] {
                    if d.feature_dim() != dim || d.num_classes() != classes {
                        return Err(invalid("CSV splits disagree on feature or class count"));
                    }
                }
                Ok(splits)
            }
        }
    }
}

/// The privacy budgets to sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EpsilonGrid {
    Explicit { values: Vec<f64> },
    /// `ε_k = Δ₁ / (anchor_scale · 2ᵏ)` for `k = 0..points`.
    Halving { anchor_scale: f64, points: usize },
    /// `ε_k = Δ₁ / scale_k`: the budgets at which the L1 mechanisms use
    /// exactly these scales.
    Scales { values: Vec<f64> },
}

impl EpsilonGrid {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        match self {
            Self::Explicit { values } | Self::Scales { values } => {
                if values.is_empty() || !values.iter().all(|&v| ok(v)) {
                    return Err(invalid("grid must be a nonempty list of positive values"));
                }
            }
            Self::Halving { anchor_scale, points } => {
                if *points == 0 || !ok(*anchor_scale) {
                    return Err(invalid("halving grid needs points >= 1 and a positive anchor scale"));
                }
            }
        }
        Ok(())
    }

    /// The ε values. Grids defined through scales need the L1 sensitivity.
    pub fn epsilons(&self, delta_l1: Option<f64>) -> Result<Vec<f64>> {
        self.validate()?;
        let l1 = || delta_l1.ok_or_else(|| invalid("an L1 sensitivity is required to place this ε grid"));
        Ok(match self {
            Self::Explicit { values } => values.clone(),
            Self::Halving { anchor_scale, points } => {
                let l1 = l1()?;
                (0..*points).map(|k| l1 / (anchor_scale * 2f64.powi(k as i32))).collect()
            }
            Self::Scales { values } => {
                let l1 = l1()?;
                values.iter().map(|s| l1 / s).collect()
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SensitivitySource {
    /// Estimate with the pair sampler on the fine-tuning split.
    Sampled { m: usize, seed: u64 },
    /// Known values; a norm may be omitted if no mechanism needs it.
    Fixed {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        l1: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        l2: Option<f64>,
    },
    /// A saved [`SensitivityEstimate`].
    File { path: PathBuf },
}

/// The sensitivities a sweep used, with the estimate when one was computed
/// or loaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRecord {
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<SensitivityEstimate>,
}

impl SensitivityRecord {
    pub fn from_estimate(source: &str, estimate: SensitivityEstimate) -> Self {
        Self {
            source: source.to_string(),
            l1: Some(estimate.delta_l1),
            l2: Some(estimate.delta_l2),
            estimate: Some(estimate),
        }
    }

    /// The sensitivity in the norm `kind` is calibrated against.
    pub fn for_kind(&self, kind: MechanismKind) -> Result<Sensitivity> {
        let value = match kind.norm() {
            Norm::L1 => self.l1,
            Norm::L2 => self.l2,
        };
        let value = value.ok_or_else(|| invalid(format!("{kind} needs a {} sensitivity", kind.norm().name())))?;
        Sensitivity::new(kind.norm(), value)
    }
}

fn default_delta() -> f64 {
    DEFAULT_GAUSSIAN_DELTA
}

fn default_repeats() -> usize {
    5
}

/// A full sweep.
///
/// Every seed inside the nested configs is combined with `master_seed`
/// before use, so changing `master_seed` alone reruns the whole experiment
/// on fresh randomness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub dataset: DatasetSpec,
    pub pretrain: TrainConfig,
    pub finetune: TrainConfig,
    pub mechanisms: Vec<MechanismKind>,
    pub epsilon_grid: EpsilonGrid,
    pub sensitivity: SensitivitySource,
    /// δ for the Gaussian mechanism.
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub attack: AttackClassifierConfig,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mechanisms.is_empty() {
            return Err(invalid("at least one mechanism is required"));
        }
        if self.repeats == 0 {
            return Err(invalid("repeats must be at least 1"));
        }
        self.epsilon_grid.validate()?;
        self.pretrain.validate()?;
        self.finetune.validate()?;
        self.attack.validate()?;
        if self.mechanisms.contains(&MechanismKind::Gaussian) && !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!("the gaussian mechanism needs 0 < delta < 1, got {}", self.delta)));
        }
        if let SensitivitySource::Sampled { m: 0, .. } = self.sensitivity {
            return Err(invalid("sampled sensitivity needs m >= 1"));
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: Self = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The main synthetic trade-off experiment: 10 classes, 2000 pretraining,
    /// 500 fine-tuning and 500 held-out records of dimension 32, sensitivity
    /// from 50 sampled pairs, 7 halving budgets, 5 repeats.
    pub fn desk(master_seed: u64) -> Self {
        Self {
            dataset: DatasetSpec::Synthetic {
                num_classes: 10,
                feature_dim: 32,
                cluster_spread: 1.0,
                pretrain_records: 2000,
                finetune_records: 500,
                holdout_records: 500,
                shadow_records: None,
                seed: 0,
            },
            pretrain: TrainConfig::encoder_default(0),
            finetune: TrainConfig::head_default(0),
            mechanisms: MechanismKind::ALL.to_vec(),
            epsilon_grid: EpsilonGrid::Halving { anchor_scale: 0.02, points: 7 },
            sensitivity: SensitivitySource::Sampled { m: 50, seed: 0 },
            delta: DEFAULT_GAUSSIAN_DELTA,
            repeats: 5,
            master_seed,
            attack: AttackClassifierConfig { train_pairs: 1000, ..Default::default() },
        }
    }

    /// A victim fine-tuned far past convergence on 100 records, so that its
    /// outputs leak membership. Encoder, mechanisms and repeats match
    /// [`SweepConfig::desk`].
    pub fn overfit(master_seed: u64) -> Self {
        let desk = Self::desk(master_seed);
        Self {
            dataset: DatasetSpec::Synthetic {
                num_classes: 10,
                feature_dim: 32,
                cluster_spread: 1.0,
                pretrain_records: 2000,
                finetune_records: 100,
                holdout_records: 100,
                shadow_records: None,
                seed: 0,
            },
            finetune: TrainConfig { epochs: 1000, ..desk.finetune.clone() },
            // the larger head weights need noise up to a larger scale
            epsilon_grid: EpsilonGrid::Halving { anchor_scale: 0.1, points: 7 },
            attack: AttackClassifierConfig { train_pairs: 200, epochs: 200, ..Default::default() },
            ..desk
        }
    }
}
