//! Projection head: a single dense layer with softmax output, trained by
//! full-batch gradient descent on mean cross-entropy over frozen encoder
//! representations.

use super::config::TrainConfig;
use super::dataset::Dataset;
use super::encoder::{encode, encode_dataset, representation_dim};
use super::net::{cross_entropy, dense_accumulate, dense_forward, init_params, softmax_in_place};
use super::weights::{DenseShape, ShapeTag, WeightVector};
use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;

const STREAM_INIT: u64 = 3;

fn head_shape(omega: &WeightVector) -> Result<DenseShape> {
    match omega.shape().layers() {
        [l] => Ok(*l),
        _ => Err(Error::ShapeMismatch {
            expected: "single dense layer head".into(),
            found: omega.shape().to_string(),
        }),
    }
}

/// The seeded starting point of head training.
pub fn initial_head(rep_dim: usize, num_classes: usize, cfg: &TrainConfig) -> Result<WeightVector> {
    let shape = DenseShape::new(rep_dim, num_classes);
    let values = init_params(&[shape], cfg.init_scale, RngStream::new(cfg.seed, STREAM_INIT));
    WeightVector::new(values, ShapeTag::new(vec![shape])?)
}

/// Mean cross-entropy and its gradient with respect to the flattened head.
pub fn head_loss_and_gradient(omega: &WeightVector, reps: &[Vec<f64>], labels: &[usize]) -> Result<(f64, Vec<f64>)> {
    let shape = head_shape(omega)?;
    check_batch(shape, reps, labels)?;
    Ok(loss_and_gradient(omega.values(), shape, reps, labels))
}

fn check_batch(shape: DenseShape, reps: &[Vec<f64>], labels: &[usize]) -> Result<()> {
    if reps.is_empty() {
        return Err(Error::Empty("fine-tuning batch"));
    }
    if reps.len() != labels.len() {
        return Err(invalid("representations and labels differ in length"));
    }
    if let Some(r) = reps.iter().find(|r| r.len() != shape.inputs) {
        return Err(Error::ShapeMismatch {
            expected: format!("{} representation dims", shape.inputs),
            found: format!("{}", r.len()),
        });
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= shape.outputs) {
        return Err(invalid(format!("class index {l} out of range for {} classes", shape.outputs)));
    }
    Ok(())
}

fn loss_and_gradient(params: &[f64], shape: DenseShape, reps: &[Vec<f64>], labels: &[usize]) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; params.len()];
    let mut z = vec![0.0; shape.outputs];
    let mut loss = 0.0;
    for (r, &y) in reps.iter().zip(labels) {
        dense_forward(params, shape, r, &mut z);
        loss += cross_entropy(&z, y);
        softmax_in_place(&mut z);
        z[y] -= 1.0;
        dense_accumulate(&mut grad, shape, r, &z);
    }
    let n = reps.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    (loss / n, grad)
}

/// Train the head on cached representations.
pub fn finetune_head_on(
    reps: &[Vec<f64>],
    labels: &[usize],
    num_classes: usize,
    cfg: &TrainConfig,
) -> Result<WeightVector> {
    Ok(finetune_head_traced(reps, labels, num_classes, cfg)?.0)
}

/// As [`finetune_head_on`], also returning the loss before each step.
pub fn finetune_head_traced(
    reps: &[Vec<f64>],
    labels: &[usize],
    num_classes: usize,
    cfg: &TrainConfig,
) -> Result<(WeightVector, Vec<f64>)> {
    cfg.validate()?;
    let rep_dim = reps.first().ok_or(Error::Empty("fine-tuning dataset"))?.len();
    let omega = initial_head(rep_dim, num_classes, cfg)?;
    let shape = head_shape(&omega)?;
    check_batch(shape, reps, labels)?;
    let tag = omega.shape().clone();
    let mut params = omega.into_values();
    let mut losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let (loss, grad) = loss_and_gradient(&params, shape, reps, labels);
        losses.push(loss);
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= cfg.learning_rate * g;
        }
    }
    Ok((WeightVector::new(params, tag)?, losses))
}

/// Fine-tune a head `ω` on `data` encoded through the frozen encoder `θ`.
pub fn finetune_head(theta: &WeightVector, data: &Dataset, cfg: &TrainConfig) -> Result<WeightVector> {
    data.require_nonempty("fine-tuning dataset")?;
    let reps = encode_dataset(theta, data)?;
    finetune_head_on(&reps, &data.labels(), data.num_classes(), cfg)
}

/// Class probabilities of the head at representation `r`.
pub fn head_probabilities(omega: &WeightVector, r: &[f64]) -> Result<Vec<f64>> {
    let shape = head_shape(omega)?;
    if r.len() != shape.inputs {
        return Err(Error::ShapeMismatch {
            expected: format!("{} representation dims", shape.inputs),
            found: format!("{}", r.len()),
        });
    }
    let mut z = vec![0.0; shape.outputs];
    dense_forward(omega.values(), shape, r, &mut z);
    softmax_in_place(&mut z);
    Ok(z)
}

/// `softmax(ω · θ(x))`.
pub fn predict(theta: &WeightVector, omega: &WeightVector, x: &[f64]) -> Result<Vec<f64>> {
    let shape = head_shape(omega)?;
    let rep = representation_dim(theta)?;
    if shape.inputs != rep {
        return Err(Error::ShapeMismatch {
            expected: format!("head over {rep} dims"),
            found: omega.shape().to_string(),
        });
    }
    head_probabilities(omega, &encode(theta, x)?)
}

/// Smoothness constant `L = ½ · max ‖(r, 1)‖²` of the mean cross-entropy
/// over `reps`. Gradient descent with `learning_rate <= 1/L` never increases
/// the training loss.
pub fn head_smoothness_bound(reps: &[Vec<f64>]) -> f64 {
    0.5 * reps
        .iter()
        .map(|r| 1.0 + r.iter().map(|v| v * v).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{make_synthetic_dataset, pretrain_encoder};

    fn head_cfg(epochs: usize, lr: f64) -> TrainConfig {
        TrainConfig {
            hidden_dims: vec![],
            epochs,
            learning_rate: lr,
            seed: 17,
            init_scale: 1.0,
            transforms: 4,
        }
    }

    fn encoder() -> (WeightVector, Dataset) {
        let d = make_synthetic_dataset(3, 10, 5, 0.7, 4).unwrap();
        let theta = pretrain_encoder(&d, &TrainConfig::encoder_default(1)).unwrap();
        (theta, d)
    }

    #[test]
    fn finetune_is_deterministic() {
        let (theta, d) = encoder();
        let a = finetune_head(&theta, &d, &head_cfg(50, 0.5)).unwrap();
        let b = finetune_head(&theta, &d, &head_cfg(50, 0.5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.shape().to_string(), "dense(16,3)");
    }

    #[test]
    fn zero_learning_rate_keeps_initialisation() {
        let (theta, d) = encoder();
        let cfg = head_cfg(25, 0.0);
        let w = finetune_head(&theta, &d, &cfg).unwrap();
        assert_eq!(w, initial_head(16, 3, &cfg).unwrap());
    }

    #[test]
    fn single_record_is_memorised() {
        let (theta, d) = encoder();
        let one = d.subset(&[2]).unwrap();
        let w = finetune_head(&theta, &one, &head_cfg(2000, 1.0)).unwrap();
        let p = predict(&theta, &w, &one.records()[0].features).unwrap();
        assert!(p[one.records()[0].label] > 0.99, "{p:?}");
    }

    #[test]
    fn bad_labels_rejected() {
        let (theta, d) = encoder();
        let reps = encode_dataset(&theta, &d).unwrap();
        let mut labels = d.labels();
        labels[0] = 7;
        assert!(finetune_head_on(&reps, &labels, 3, &head_cfg(5, 0.1)).is_err());
        assert!(finetune_head_on(&[], &[], 3, &head_cfg(5, 0.1)).is_err());
    }

    #[test]
    fn zero_head_predicts_uniform() {
        let (theta, d) = encoder();
        let omega = WeightVector::zeros(ShapeTag::dense(16, 3).unwrap());
        let p = predict(&theta, &omega, &d.records()[0].features).unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let wrong = WeightVector::zeros(ShapeTag::dense(4, 3).unwrap());
        assert!(predict(&theta, &wrong, &d.records()[0].features).is_err());
    }

    #[test]
    fn logit_shift_invariance() {
        let (theta, d) = encoder();
        let omega = finetune_head(&theta, &d, &head_cfg(30, 0.5)).unwrap();
        let mut shifted = omega.values().to_vec();
        let biases = shifted.len() - 3;
        for b in &mut shifted[biases..] {
            *b += 123.0;
        }
        let shifted = WeightVector::new(shifted, omega.shape().clone()).unwrap();
        for r in d.records() {
            let p = predict(&theta, &omega, &r.features).unwrap();
            let q = predict(&theta, &shifted, &r.features).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (a, b) in p.iter().zip(&q) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn loss_nonincreasing_below_smoothness_threshold() {
        let (theta, d) = encoder();
        let reps = encode_dataset(&theta, &d).unwrap();
        let lr = 1.0 / head_smoothness_bound(&reps);
        let (_, losses) = finetune_head_traced(&reps, &d.labels(), 3, &head_cfg(200, lr)).unwrap();
        for w in losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "{} -> {}", w[0], w[1]);
        }
        assert!(losses.last().unwrap() < &losses[0]);
    }
}
