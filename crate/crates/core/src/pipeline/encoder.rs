//! Base encoder: one tanh hidden layer pretrained on a pseudo-label task.
//!
//! The pretext task never reads `Record::label`. Each input is passed through
//! one of `k` seeded signed permutations (transform 0 is the identity) and the
//! network learns to predict which one was applied. Only the hidden layer is
//! kept; it is the encoder `θ`.

use rand::seq::SliceRandom;
use rand::Rng;

use super::config::TrainConfig;
use super::dataset::Dataset;
use super::net::{chunked_gradient, cross_entropy, dense_accumulate, dense_backward_input, dense_forward, init_params, softmax_in_place};
use super::weights::{DenseShape, ShapeTag, WeightVector};
use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;

const STREAM_TRANSFORMS: u64 = 1;
const STREAM_INIT: u64 = 2;

/// `x ↦ (sign_i · x[perm_i])_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedPermutation {
    perm: Vec<usize>,
    signs: Vec<f64>,
}

impl SignedPermutation {
    pub fn identity(dim: usize) -> Self {
        Self {
            perm: (0..dim).collect(),
            signs: vec![1.0; dim],
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.perm.iter().zip(&self.signs).map(|(&p, &s)| s * x[p]).collect()
    }
}

/// The `k` pretext transforms for inputs of dimension `dim` under `seed`.
pub fn pretext_transforms(dim: usize, k: usize, seed: u64) -> Vec<SignedPermutation> {
    let mut g = RngStream::new(seed, STREAM_TRANSFORMS).generator();
    let mut out = vec![SignedPermutation::identity(dim)];
    while out.len() < k {
        let mut perm: Vec<usize> = (0..dim).collect();
        perm.shuffle(&mut g);
        let signs = (0..dim).map(|_| if g.gen::<bool>() { 1.0 } else { -1.0 }).collect();
        out.push(SignedPermutation { perm, signs });
    }
    out
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub theta: WeightVector,
    /// Accuracy on the pretext task over the pretraining set after training.
    pub pseudo_accuracy: f64,
    pub final_loss: f64,
}

fn encoder_width(cfg: &TrainConfig) -> Result<usize> {
    match cfg.hidden_dims.as_slice() {
        [h] if *h > 0 => Ok(*h),
        other => Err(invalid(format!(
            "encoder needs exactly one positive hidden width, got {other:?}"
        ))),
    }
}

/// Train the encoder on `data` and return `θ` with shape `dense(F, H)`.
pub fn pretrain_encoder(data: &Dataset, cfg: &TrainConfig) -> Result<WeightVector> {
    Ok(pretrain_encoder_detailed(data, cfg)?.theta)
}

pub fn pretrain_encoder_detailed(data: &Dataset, cfg: &TrainConfig) -> Result<PretrainOutcome> {
    cfg.validate()?;
    data.require_nonempty("pretraining dataset")?;
    let hidden = encoder_width(cfg)?;
    let k = cfg.transforms;
    if k < 2 {
        return Err(invalid("pretext task needs at least two transforms"));
    }
    let f = data.feature_dim();
    let l1 = DenseShape::new(f, hidden);
    let l2 = DenseShape::new(hidden, k);
    let n1 = l1.param_count();

    let transforms = pretext_transforms(f, k, cfg.seed);
    let inputs: Vec<(Vec<f64>, usize)> = data
        .features()
        .flat_map(|x| transforms.iter().enumerate().map(move |(t, tr)| (tr.apply(x), t)))
        .collect();
    let n = inputs.len();

    let mut params = init_params(&[l1, l2], cfg.init_scale, RngStream::new(cfg.seed, STREAM_INIT));
    let dim = params.len();

    let pass = |params: &[f64], range: std::ops::Range<usize>, grad: &mut [f64]| -> f64 {
        let (p1, p2) = params.split_at(n1);
        let mut h = vec![0.0; hidden];
        let mut z = vec![0.0; k];
        let mut dh = vec![0.0; hidden];
        let mut loss = 0.0;
        for (x, t) in &inputs[range] {
            dense_forward(p1, l1, x, &mut h);
            h.iter_mut().for_each(|v| *v = v.tanh());
            dense_forward(p2, l2, &h, &mut z);
            loss += cross_entropy(&z, *t);
            softmax_in_place(&mut z);
            z[*t] -= 1.0;
            let (g1, g2) = grad.split_at_mut(n1);
            dense_accumulate(g2, l2, &h, &z);
            dense_backward_input(p2, l2, &z, &mut dh);
            for (d, hv) in dh.iter_mut().zip(&h) {
                *d *= 1.0 - hv * hv;
            }
            dense_accumulate(g1, l1, x, &dh);
        }
        loss
    };

    let mut final_loss = f64::NAN;
    for _ in 0..cfg.epochs {
        let (loss, grad) = chunked_gradient(n, dim, |r, g| pass(&params, r, g));
        final_loss = loss / n as f64;
        let step = cfg.learning_rate / n as f64;
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= step * g;
        }
    }

    let (p1, p2) = params.split_at(n1);
    let mut h = vec![0.0; hidden];
    let mut z = vec![0.0; k];
    let correct = inputs
        .iter()
        .filter(|(x, t)| {
            dense_forward(p1, l1, x, &mut h);
            h.iter_mut().for_each(|v| *v = v.tanh());
            dense_forward(p2, l2, &h, &mut z);
            super::metrics::argmax(&z) == *t
        })
        .count();

    Ok(PretrainOutcome {
        theta: WeightVector::new(p1.to_vec(), ShapeTag::new(vec![l1])?)?,
        pseudo_accuracy: correct as f64 / n as f64,
        final_loss,
    })
}

fn encoder_shape(theta: &WeightVector) -> Result<DenseShape> {
    match theta.shape().layers() {
        [l] => Ok(*l),
        _ => Err(Error::ShapeMismatch {
            expected: "single dense layer encoder".into(),
            found: theta.shape().to_string(),
        }),
    }
}

/// Representation `tanh(W x + b)`; its length is the encoder width.
pub fn encode(theta: &WeightVector, x: &[f64]) -> Result<Vec<f64>> {
    let shape = encoder_shape(theta)?;
    if x.len() != shape.inputs {
        return Err(Error::ShapeMismatch {
            expected: format!("{} features", shape.inputs),
            found: format!("{} features", x.len()),
        });
    }
    let mut out = vec![0.0; shape.outputs];
    dense_forward(theta.values(), shape, x, &mut out);
    out.iter_mut().for_each(|v| *v = v.tanh());
    Ok(out)
}

/// Encode every record of `data`, in order.
pub fn encode_dataset(theta: &WeightVector, data: &Dataset) -> Result<Vec<Vec<f64>>> {
    data.features().map(|x| encode(theta, x)).collect()
}

/// Output width of an encoder.
pub fn representation_dim(theta: &WeightVector) -> Result<usize> {
    Ok(encoder_shape(theta)?.outputs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::make_synthetic_dataset;

    fn cfg() -> TrainConfig {
        TrainConfig {
            hidden_dims: vec![8],
            epochs: 60,
            learning_rate: 0.5,
            seed: 3,
            init_scale: 1.0,
            transforms: 4,
        }
    }

    #[test]
    fn pretraining_is_deterministic() {
        let d = make_synthetic_dataset(4, 20, 6, 0.5, 1).unwrap();
        let a = pretrain_encoder(&d, &cfg()).unwrap();
        let b = pretrain_encoder(&d, &cfg()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.shape().to_string(), "dense(6,8)");
    }

    #[test]
    fn zero_epochs_rejected() {
        let d = make_synthetic_dataset(2, 2, 3, 0.5, 1).unwrap();
        let mut c = cfg();
        c.epochs = 0;
        assert!(pretrain_encoder(&d, &c).is_err());
        let mut c = cfg();
        c.hidden_dims = vec![];
        assert!(pretrain_encoder(&d, &c).is_err());
    }

    #[test]
    fn pretext_accuracy_beats_chance() {
        let d = make_synthetic_dataset(5, 40, 8, 0.5, 2).unwrap();
        let out = pretrain_encoder_detailed(&d, &cfg()).unwrap();
        assert!(out.pseudo_accuracy > 0.25 + 0.1, "{}", out.pseudo_accuracy);
    }

    #[test]
    fn transforms_are_signed_permutations() {
        let ts = pretext_transforms(5, 4, 9);
        assert_eq!(ts.len(), 4);
        assert_eq!(ts[0], SignedPermutation::identity(5));
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        for t in &ts {
            let mut y: Vec<f64> = t.apply(&x).iter().map(|v| v.abs()).collect();
            y.sort_by(f64::total_cmp);
            assert_eq!(y, x.to_vec());
        }
    }

    #[test]
    fn encode_zero_weights() {
        let theta = WeightVector::zeros(ShapeTag::dense(3, 4).unwrap());
        assert_eq!(encode(&theta, &[1.0, -2.0, 7.0]).unwrap(), vec![0.0; 4]);
        assert!(encode(&theta, &[1.0]).is_err());
    }

    #[test]
    fn encode_is_affine_before_activation() {
        let d = make_synthetic_dataset(3, 5, 4, 0.5, 2).unwrap();
        let theta = pretrain_encoder(&d, &cfg()).unwrap();
        let pre = |x: &[f64]| -> Vec<f64> { encode(&theta, x).unwrap().iter().map(|v| v.atanh()).collect() };
        let x = [0.1, -0.2, 0.05, 0.3];
        let y = [-0.15, 0.1, 0.2, -0.05];
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        let (px, py, pm) = (pre(&x), pre(&y), pre(&mid));
        for i in 0..pm.len() {
            assert!((pm[i] - 0.5 * (px[i] + py[i])).abs() < 1e-9);
        }
        assert_eq!(encode(&theta, &x).unwrap(), encode(&theta, &x).unwrap());
    }
}
