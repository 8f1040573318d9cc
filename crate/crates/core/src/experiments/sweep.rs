//! The ε sweep: train once, then protect and attack at every grid point.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DataSplits, DatasetSpec, SensitivityRecord, SensitivitySource, SweepConfig};
use crate::error::{invalid, Error, Result};
use crate::mechanisms::{scale_for_budget, MechanismKind, Norm, PrivacyBudget};
use crate::mia::{
    build_attack_dataset, head_attack_records, train_attack_classifier, AttackClassifier, AttackClassifierConfig,
    AttackRecord,
};
use crate::pipeline::{
    argmax, encode_dataset, finetune_head, head_probabilities, pretrain_encoder, Dataset, TrainConfig, WeightVector,
};
use crate::protection::protect_existing;
use crate::rng::derive_seed;
use crate::sensitivity::{sample_sensitivity, SensitivityEstimate};

// Path components for seeds derived from the master seed.
const SEED_DATASET: u64 = 1;
const SEED_PRETRAIN: u64 = 2;
const SEED_FINETUNE: u64 = 3;
const SEED_SENSITIVITY: u64 = 4;
const SEED_SHADOW: u64 = 5;
const SEED_ATTACK_DATA: u64 = 6;
const SEED_ATTACK_MODEL: u64 = 7;
const SEED_EVALUATION: u64 = 8;
const SEED_NOISE: u64 = 9;

/// `1 − protected / unprotected`; negative when the noise happens to help.
pub fn utility_loss(protected_metric: f64, unprotected_metric: f64) -> Result<f64> {
    if !(unprotected_metric.is_finite() && unprotected_metric > 0.0) {
        return Err(invalid(format!(
            "utility loss is undefined for an unprotected metric of {unprotected_metric}"
        )));
    }
    if !protected_metric.is_finite() {
        return Err(Error::NonFinite("protected metric"));
    }
    Ok(1.0 - protected_metric / unprotected_metric)
}

/// One protected release.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mechanism: MechanismKind,
    pub epsilon: f64,
    pub scale: f64,
    pub delta: f64,
    pub sensitivity_norm: Norm,
    pub sensitivity: f64,
    pub repeat: usize,
    /// Held-out accuracy of the protected model.
    pub accuracy: f64,
    pub utility_loss: f64,
    pub mia_accuracy: f64,
    /// Set for Gaussian rows at ε ≥ 1, where the classical calibration
    /// argument does not apply.
    pub gaussian_outside_calibration: bool,
}

/// Repeat-averaged statistics at one `(mechanism, ε)` point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedRow {
    pub mechanism: MechanismKind,
    pub epsilon: f64,
    pub scale: f64,
    pub repeats: usize,
    pub utility_loss: f64,
    pub utility_loss_sd: f64,
    pub mia_accuracy: f64,
    pub mia_accuracy_sd: f64,
}

/// The unprotected model's held-out accuracy and attack accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub accuracy: f64,
    pub mia_accuracy: f64,
    /// Training-set accuracy of the fine-tuned head.
    pub train_accuracy: f64,
    /// Attack accuracy on the shadow model's own records.
    pub shadow_attack_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub sensitivity: SensitivityRecord,
    pub unprotected_baseline: Baseline,
    pub rows: Vec<SweepRow>,
    pub averaged: Vec<AveragedRow>,
}

fn reseeded(cfg: &TrainConfig, master: u64, tag: u64) -> TrainConfig {
    TrainConfig { seed: derive_seed(master, &[tag, cfg.seed]), ..cfg.clone() }
}

fn dataset_accuracy(reps: &[Vec<f64>], data: &Dataset, omega: &WeightVector) -> Result<f64> {
    let mut correct = 0usize;
    for (r, rec) in reps.iter().zip(data.records()) {
        if argmax(&head_probabilities(omega, r)?) == rec.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Data, encoder and clean head of a sweep, trained once.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub splits: DataSplits,
    pub theta: WeightVector,
    pub omega: WeightVector,
    /// The fine-tuning config with its effective seed.
    pub finetune: TrainConfig,
}

/// Loads the splits and trains encoder and head exactly as [`run_sweep`]
/// does.
pub fn train_pipeline(cfg: &SweepConfig) -> Result<Pipeline> {
    cfg.validate()?;
    let master = cfg.master_seed;
    let mut dataset = cfg.dataset.clone();
    if let DatasetSpec::Synthetic { seed, .. } = &mut dataset {
        *seed = derive_seed(master, &[SEED_DATASET, *seed]);
    }
    let splits = dataset.load()?;
    if splits.holdout.is_empty() || splits.finetune.is_empty() {
        return Err(Error::Empty("fine-tuning and held-out splits"));
    }
    let pre_cfg = reseeded(&cfg.pretrain, master, SEED_PRETRAIN);
    let finetune = reseeded(&cfg.finetune, master, SEED_FINETUNE);
    let theta = pretrain_encoder(&splits.pretrain, &pre_cfg)?;
    let omega = finetune_head(&theta, &splits.finetune, &finetune)?;
    Ok(Pipeline { splits, theta, omega, finetune })
}

/// The sensitivity named by `cfg.sensitivity`; sampling runs on the
/// fine-tuning split.
pub fn resolve_sensitivity(cfg: &SweepConfig, pipeline: &Pipeline) -> Result<SensitivityRecord> {
    Ok(match &cfg.sensitivity {
        SensitivitySource::Sampled { m, seed } => {
            let seed = derive_seed(cfg.master_seed, &[SEED_SENSITIVITY, *seed]);
            let est = sample_sensitivity(&pipeline.theta, &pipeline.splits.finetune, &pipeline.finetune, *m, seed)?;
            SensitivityRecord::from_estimate("sampled", est)
        }
        SensitivitySource::Fixed { l1, l2 } => {
            SensitivityRecord { source: "fixed".into(), l1: *l1, l2: *l2, estimate: None }
        }
        SensitivitySource::File { path } => SensitivityRecord::from_estimate("file", SensitivityEstimate::load_json(path)?),
    })
}

/// The attacker's side: a shadow head fine-tuned on the shadow member
/// partition with its own seed, the attack records it yields, and the
/// classifier trained on them.
pub fn train_attacker(cfg: &SweepConfig, pipeline: &Pipeline) -> Result<(AttackClassifier, Vec<AttackRecord>)> {
    let master = cfg.master_seed;
    let splits = &pipeline.splits;
    let shadow_cfg = reseeded(&cfg.finetune, master, SEED_SHADOW);
    let shadow_omega = finetune_head(&pipeline.theta, &splits.shadow_in, &shadow_cfg)?;
    let records = build_attack_dataset(
        &pipeline.theta,
        &shadow_omega,
        &splits.shadow_in,
        &splits.shadow_out,
        cfg.attack.train_pairs,
        derive_seed(master, &[SEED_ATTACK_DATA]),
    )?;
    let attack_cfg = AttackClassifierConfig { seed: derive_seed(master, &[SEED_ATTACK_MODEL, cfg.attack.seed]), ..cfg.attack.clone() };
    Ok((train_attack_classifier(&records, &attack_cfg)?, records))
}

/// Attack accuracy against the head `omega`, with the fine-tuning split as
/// members and the held-out split as non-members.
pub fn victim_attack_accuracy(
    cfg: &SweepConfig,
    pipeline: &Pipeline,
    classifier: &AttackClassifier,
    theta: &WeightVector,
    omega: &WeightVector,
) -> Result<f64> {
    let s = &pipeline.splits;
    classifier.accuracy(&head_attack_records(theta, omega, &s.finetune, &s.holdout, evaluation_seed(cfg.master_seed))?)
}

fn evaluation_seed(master: u64) -> u64 {
    derive_seed(master, &[SEED_EVALUATION])
}

/// Seed of the noise draw for one row.
pub fn row_noise_seed(master: u64, kind: MechanismKind, epsilon_index: usize, repeat: usize) -> u64 {
    derive_seed(master, &[SEED_NOISE, kind.index(), epsilon_index as u64, repeat as u64])
}

/// Runs the sweep. Rows are independent once the shared stage is trained
/// and are computed in parallel; the report is identical for any thread
/// count.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    let pipeline = train_pipeline(cfg)?;
    let sensitivity = resolve_sensitivity(cfg, &pipeline)?;
    let (classifier, attack_data) = train_attacker(cfg, &pipeline)?;
    let splits = &pipeline.splits;
    let (theta, omega) = (&pipeline.theta, &pipeline.omega);
    let holdout_reps = encode_dataset(theta, &splits.holdout)?;
    let train_reps = encode_dataset(theta, &splits.finetune)?;
    let baseline = Baseline {
        accuracy: dataset_accuracy(&holdout_reps, &splits.holdout, omega)?,
        mia_accuracy: victim_attack_accuracy(cfg, &pipeline, &classifier, theta, omega)?,
        train_accuracy: dataset_accuracy(&train_reps, &splits.finetune, omega)?,
        shadow_attack_accuracy: classifier.accuracy(&attack_data)?,
    };
    let epsilons = cfg.epsilon_grid.epsilons(sensitivity.l1)?;

    let mut mechanisms = cfg.mechanisms.clone();
    mechanisms.sort_by_key(MechanismKind::index);
    mechanisms.dedup();
    let tasks: Vec<(MechanismKind, usize, usize)> = mechanisms
        .iter()
        .flat_map(|&k| (0..epsilons.len()).flat_map(move |e| (0..cfg.repeats).map(move |r| (k, e, r))))
        .collect();

    let rows = tasks
        .par_iter()
        .map(|&(kind, e, repeat)| {
            let sens = sensitivity.for_kind(kind)?;
            let delta = if kind == MechanismKind::Gaussian { cfg.delta } else { 0.0 };
            let budget = PrivacyBudget::new(epsilons[e], delta)?;
            let spec = scale_for_budget(kind, budget, sens)?;
            let model = protect_existing(theta, omega, &spec, row_noise_seed(cfg.master_seed, kind, e, repeat))?;
            let accuracy = dataset_accuracy(&holdout_reps, &splits.holdout, model.omega_noisy())?;
            Ok(SweepRow {
                mechanism: kind,
                epsilon: epsilons[e],
                scale: spec.scale(),
                delta,
                sensitivity_norm: sens.norm,
                sensitivity: sens.value,
                repeat,
                accuracy,
                utility_loss: utility_loss(accuracy, baseline.accuracy)?,
                mia_accuracy: victim_attack_accuracy(cfg, &pipeline, &classifier, theta, model.omega_noisy())?,
                gaussian_outside_calibration: kind == MechanismKind::Gaussian && epsilons[e] >= 1.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = SweepReport {
        config: cfg.clone(),
        sensitivity,
        unprotected_baseline: baseline,
        rows,
        averaged: Vec::new(),
    };
    report.sort_rows();
    report.averaged = average_rows(&report.rows);
    Ok(report)
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups rows by `(mechanism, ε)` in report order and averages repeats.
pub fn average_rows(rows: &[SweepRow]) -> Vec<AveragedRow> {
    let mut out: Vec<AveragedRow> = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let key = (rows[start].mechanism, rows[start].epsilon);
        let end = start + rows[start..].iter().take_while(|r| (r.mechanism, r.epsilon) == key).count();
        let group = &rows[start..end];
        let (u, usd) = mean_sd(&group.iter().map(|r| r.utility_loss).collect::<Vec<_>>());
        let (m, msd) = mean_sd(&group.iter().map(|r| r.mia_accuracy).collect::<Vec<_>>());
        out.push(AveragedRow {
            mechanism: key.0,
            epsilon: key.1,
            scale: group[0].scale,
            repeats: group.len(),
            utility_loss: u,
            utility_loss_sd: usd,
            mia_accuracy: m,
            mia_accuracy_sd: msd,
        });
        start = end;
    }
    out
}

impl SweepReport {
    /// Orders rows by mechanism, then ε descending, then repeat.
    pub fn sort_rows(&mut self) {
        self.rows.sort_by(|a, b| {
            a.mechanism
                .index()
                .cmp(&b.mechanism.index())
                .then(b.epsilon.total_cmp(&a.epsilon))
                .then(a.repeat.cmp(&b.repeat))
        });
    }

    pub fn averaged_for(&self, kind: MechanismKind) -> Vec<&AveragedRow> {
        self.averaged.iter().filter(|r| r.mechanism == kind).collect()
    }
}
