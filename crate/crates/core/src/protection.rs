//! Post-training protection: train the encoder and head, add mechanism
//! noise to the head weights once, and answer queries from the noisy head.
//!
//! A [`ProtectedModel`] keeps the clean head only so that utility can be
//! measured against it. Query answering and every released artifact read the
//! noisy head exclusively.

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mechanisms::{budget_for_scale, perturb, MechanismKind, MechanismSpec, Sensitivity};
use crate::pipeline::io::{load_weights, save_weights};
use crate::pipeline::{
    finetune_head, predict, pretrain_encoder, representation_dim, Dataset, TrainConfig, WeightVector,
};
use crate::rng::RngStream;

const THETA_FILE: &str = "theta.weights";
const OMEGA_FILE: &str = "omega.weights";
const SIDECAR_FILE: &str = "release.json";

/// Noise for a protected head is drawn from stream 0 of the noise seed.
pub fn noise_stream(noise_seed: u64) -> RngStream {
    RngStream::new(noise_seed, 0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtectedModel {
    theta: WeightVector,
    omega_clean: WeightVector,
    omega_noisy: WeightVector,
    spec: MechanismSpec,
    noise_seed: u64,
}

fn check_compatible(theta: &WeightVector, omega: &WeightVector) -> Result<()> {
    let rep = representation_dim(theta)?;
    match omega.shape().layers() {
        [l] if l.inputs == rep => Ok(()),
        _ => Err(Error::ShapeMismatch {
            expected: format!("single-layer head over {rep} dims"),
            found: omega.shape().to_string(),
        }),
    }
}

/// Perturb an already trained head; no retraining happens.
pub fn protect_existing(
    theta: &WeightVector,
    omega: &WeightVector,
    spec: &MechanismSpec,
    noise_seed: u64,
) -> Result<ProtectedModel> {
    check_compatible(theta, omega)?;
    let omega_noisy = perturb(omega, spec, noise_stream(noise_seed))?;
    Ok(ProtectedModel {
        theta: theta.clone(),
        omega_clean: omega.clone(),
        omega_noisy,
        spec: *spec,
        noise_seed,
    })
}

/// The full handler: pretrain on `pretrain`, fine-tune on `finetune`, perturb
/// the head once, and answer `queries` from the perturbed model.
pub fn run_query_handler(
    pretrain: &Dataset,
    finetune: &Dataset,
    pre_cfg: &TrainConfig,
    fine_cfg: &TrainConfig,
    spec: &MechanismSpec,
    noise_seed: u64,
    queries: &[Vec<f64>],
) -> Result<(ProtectedModel, Vec<Vec<f64>>)> {
    let theta = pretrain_encoder(pretrain, pre_cfg)?;
    let omega = finetune_head(&theta, finetune, fine_cfg)?;
    let model = protect_existing(&theta, &omega, spec, noise_seed)?;
    let answers = queries.iter().map(|q| model.answer(q)).collect::<Result<Vec<_>>>()?;
    Ok((model, answers))
}

impl ProtectedModel {
    pub fn theta(&self) -> &WeightVector {
        &self.theta
    }

    pub fn omega_clean(&self) -> &WeightVector {
        &self.omega_clean
    }

    pub fn omega_noisy(&self) -> &WeightVector {
        &self.omega_noisy
    }

    pub fn spec(&self) -> &MechanismSpec {
        &self.spec
    }

    pub fn noise_seed(&self) -> u64 {
        self.noise_seed
    }

    /// Protected output for query `x`; reads only the noisy head.
    pub fn answer(&self, x: &[f64]) -> Result<Vec<f64>> {
        predict(&self.theta, &self.omega_noisy, x)
    }

    /// Output of the unprotected model, for utility evaluation only.
    pub fn answer_unprotected(&self, x: &[f64]) -> Result<Vec<f64>> {
        predict(&self.theta, &self.omega_clean, x)
    }

    /// The noise vector, regenerated from `(spec, noise_seed)`.
    pub fn noise(&self) -> Vec<f64> {
        self.spec.noise(noise_stream(self.noise_seed), self.omega_clean.len())
    }

    /// Protect the same clean head again under a new mechanism or seed.
    pub fn reprotect(&self, spec: &MechanismSpec, noise_seed: u64) -> Result<ProtectedModel> {
        protect_existing(&self.theta, &self.omega_clean, spec, noise_seed)
    }

    /// The releasable part: encoder, noisy head and mechanism parameters.
    /// `epsilon` is filled in when a sensitivity is supplied.
    pub fn release(&self, sensitivity: Option<Sensitivity>) -> Result<ReleasedModel> {
        let epsilon = sensitivity
            .map(|s| budget_for_scale(&self.spec, s).map(|b| b.epsilon))
            .transpose()?;
        Ok(ReleasedModel {
            theta: self.theta.clone(),
            omega: self.omega_noisy.clone(),
            metadata: ReleaseMetadata {
                kind: self.spec.kind(),
                scale: self.spec.scale(),
                delta: self.spec.delta(),
                epsilon,
            },
        })
    }
}

/// JSON sidecar of an exported model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleaseMetadata {
    pub kind: MechanismKind,
    pub scale: f64,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

/// A protected model as published: no clean weights, no noise seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ReleasedModel {
    pub theta: WeightVector,
    pub omega: WeightVector,
    pub metadata: ReleaseMetadata,
}

impl ReleasedModel {
    pub fn answer(&self, x: &[f64]) -> Result<Vec<f64>> {
        predict(&self.theta, &self.omega, x)
    }

    /// Writes `theta.weights`, `omega.weights` and `release.json` into `dir`.
    pub fn export(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        save_weights(&self.theta, dir.join(THETA_FILE))?;
        save_weights(&self.omega, dir.join(OMEGA_FILE))?;
        fs::write(dir.join(SIDECAR_FILE), serde_json::to_string_pretty(&self.metadata)? + "\n")?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let theta = load_weights(dir.join(THETA_FILE))?;
        let omega = load_weights(dir.join(OMEGA_FILE))?;
        check_compatible(&theta, &omega)?;
        let metadata: ReleaseMetadata = serde_json::from_str(&fs::read_to_string(dir.join(SIDECAR_FILE))?)?;
        MechanismSpec::new(metadata.kind, metadata.scale, metadata.delta)?;
        Ok(Self { theta, omega, metadata })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{make_synthetic_dataset, ShapeTag, TrainConfig};

    fn trained() -> (WeightVector, WeightVector, Dataset) {
        let d = make_synthetic_dataset(3, 8, 5, 0.6, 2).unwrap();
        let theta = pretrain_encoder(&d, &TrainConfig::encoder_default(1)).unwrap();
        let omega = finetune_head(&theta, &d, &TrainConfig::head_default(2)).unwrap();
        (theta, omega, d)
    }

    #[test]
    fn different_noise_seeds() {
        let (theta, omega, _) = trained();
        let spec = MechanismSpec::logistic(0.1).unwrap();
        let a = protect_existing(&theta, &omega, &spec, 1).unwrap();
        let b = protect_existing(&theta, &omega, &spec, 2).unwrap();
        assert_ne!(a.omega_noisy(), b.omega_noisy());
        assert_eq!(a.omega_clean(), b.omega_clean());
        assert_eq!(a.theta(), &theta);
    }

    #[test]
    fn noise_is_reproducible() {
        let (theta, omega, _) = trained();
        for spec in [
            MechanismSpec::logistic(0.2).unwrap(),
            MechanismSpec::laplace(0.2).unwrap(),
            MechanismSpec::gaussian(0.2, 1e-5).unwrap(),
        ] {
            let m = protect_existing(&theta, &omega, &spec, 77).unwrap();
            assert_eq!(m.spec().kind(), spec.kind());
            let recovered = m.omega_noisy().difference(m.omega_clean()).unwrap();
            let regenerated = m.noise();
            for ((r, g), w) in recovered.iter().zip(&regenerated).zip(omega.values()) {
                // the subtraction can lose at most one rounding of the sum
                assert!((r - g).abs() <= f64::EPSILON * (w.abs() + g.abs()));
            }
            assert_eq!(
                m.omega_noisy().values(),
                &omega.values().iter().zip(&regenerated).map(|(a, b)| a + b).collect::<Vec<_>>()[..]
            );
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let (theta, _, _) = trained();
        let wrong = WeightVector::zeros(ShapeTag::dense(3, 3).unwrap());
        assert!(protect_existing(&theta, &wrong, &MechanismSpec::logistic(1.0).unwrap(), 0).is_err());
    }

    #[test]
    fn answers_never_read_clean_head() {
        let (theta, omega, d) = trained();
        let spec = MechanismSpec::laplace(0.05).unwrap();
        let mut m = protect_existing(&theta, &omega, &spec, 5).unwrap();
        let expected: Vec<Vec<f64>> = d.features().map(|x| m.answer(x).unwrap()).collect();
        // poison the clean head; protected answers must be unaffected
        m.omega_clean = WeightVector::new(vec![f64::NAN; omega.len()], omega.shape().clone()).unwrap();
        for (x, e) in d.features().zip(&expected) {
            assert_eq!(&m.answer(x).unwrap(), e);
        }
        let released = m.release(None).unwrap();
        for (x, e) in d.features().zip(&expected) {
            assert_eq!(&released.answer(x).unwrap(), e);
        }
    }

    #[test]
    fn reprotect_starts_from_clean() {
        let (theta, omega, _) = trained();
        let m = protect_existing(&theta, &omega, &MechanismSpec::logistic(0.5).unwrap(), 1).unwrap();
        let spec = MechanismSpec::gaussian(0.01, 1e-5).unwrap();
        let again = m.reprotect(&spec, 9).unwrap();
        assert_eq!(again, protect_existing(&theta, &omega, &spec, 9).unwrap());
    }

    #[test]
    fn handler_contract() {
        let d = make_synthetic_dataset(3, 6, 4, 0.5, 3).unwrap();
        let pre = TrainConfig::encoder_default(1);
        let fine = TrainConfig::head_default(2);
        let spec = MechanismSpec::logistic(1e-12).unwrap();
        let (m, out) = run_query_handler(&d, &d, &pre, &fine, &spec, 3, &[]).unwrap();
        assert!(out.is_empty());
        let queries: Vec<Vec<f64>> = d.features().map(<[f64]>::to_vec).collect();
        let (m2, out2) = run_query_handler(&d, &d, &pre, &fine, &spec, 3, &queries).unwrap();
        assert_eq!(m, m2);
        let (m3, out3) = run_query_handler(&d, &d, &pre, &fine, &spec, 3, &queries).unwrap();
        assert_eq!((m2.clone(), out2.clone()), (m3, out3));
        for (q, o) in queries.iter().zip(&out2) {
            let clean = m2.answer_unprotected(q).unwrap();
            for (a, b) in o.iter().zip(&clean) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn export_omits_clean_weights() {
        let (theta, omega, d) = trained();
        let spec = MechanismSpec::logistic(0.05).unwrap();
        let m = protect_existing(&theta, &omega, &spec, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let rel = m.release(Some(Sensitivity::l1(0.01).unwrap())).unwrap();
        rel.export(dir.path()).unwrap();
        let back = ReleasedModel::load(dir.path()).unwrap();
        assert_eq!(back, rel);
        assert_eq!(back.omega, *m.omega_noisy());
        assert!((back.metadata.epsilon.unwrap() - 0.2).abs() < 1e-12);
        let sidecar = std::fs::read_to_string(dir.path().join("release.json")).unwrap();
        assert!(!sidecar.contains("seed"));
        let mut names: Vec<String> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert_eq!(names, ["omega.weights", "release.json", "theta.weights"]);
        assert_eq!(back.answer(&d.records()[0].features).unwrap(), m.answer(&d.records()[0].features).unwrap());
    }
}
