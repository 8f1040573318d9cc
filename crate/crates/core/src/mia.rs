//! Black-box membership inference with a single shadow model.
//!
//! The attacker queries a shadow model on records it trained on and records
//! it did not, and fits a binary MLP on `(output vector, one-hot label)`
//! inputs to tell the two apart. The fitted classifier is then pointed at the
//! victim's outputs.

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use crate::error::{invalid, Error, Result};
use crate::pipeline::{
    dense_accumulate, dense_backward_input, dense_forward, init_params, predict, Dataset, DenseShape, WeightVector,
};
use crate::protection::ProtectedModel;
use crate::rng::RngStream;

/// Which model produced an attack record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Shadow,
    Victim,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackRecord {
    pub output: Vec<f64>,
    pub label_onehot: Vec<f64>,
    pub member: bool,
    pub provenance: Provenance,
}

impl AttackRecord {
    pub fn new(output: Vec<f64>, label: usize, member: bool, provenance: Provenance) -> Result<Self> {
        if label >= output.len() {
            return Err(invalid(format!("label {label} out of range for {} outputs", output.len())));
        }
        let total: f64 = output.iter().sum();
        if (total - 1.0).abs() > 1e-9 || output.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(invalid(format!("output vector is not a probability vector (sum {total})")));
        }
        let mut label_onehot = vec![0.0; output.len()];
        label_onehot[label] = 1.0;
        Ok(Self { output, label_onehot, member, provenance })
    }

    pub fn num_classes(&self) -> usize {
        self.output.len()
    }

    pub fn label(&self) -> usize {
        self.label_onehot.iter().position(|&v| v == 1.0).unwrap_or(0)
    }

    /// Classifier input: outputs followed by the one-hot label.
    pub fn input(&self) -> Vec<f64> {
        let mut v = self.output.clone();
        v.extend_from_slice(&self.label_onehot);
        v
    }

    fn target(&self) -> f64 {
        if self.member {
            1.0
        } else {
            0.0
        }
    }
}

fn sample_indices(len: usize, amount: usize, rng: RngStream) -> Vec<usize> {
    let mut g = rng.generator();
    index::sample(&mut g, len, amount).into_vec()
}

fn collect_records(
    theta: &WeightVector,
    omega: &WeightVector,
    in_set: &Dataset,
    out_set: &Dataset,
    per_side: usize,
    seed: u64,
    provenance: Provenance,
) -> Result<Vec<AttackRecord>> {
    in_set.require_nonempty("member set")?;
    out_set.require_nonempty("non-member set")?;
    for set in [in_set, out_set] {
        if set.len() < per_side {
            return Err(Error::InsufficientRecords { needed: per_side, available: set.len() });
        }
    }
    let mut records = Vec::with_capacity(2 * per_side);
    for (stream, set, member) in [(0, in_set, true), (1, out_set, false)] {
        for i in sample_indices(set.len(), per_side, RngStream::new(seed, stream)) {
            let r = &set.records()[i];
            records.push(AttackRecord::new(predict(theta, omega, &r.features)?, r.label, member, provenance)?);
        }
    }
    Ok(records)
}

/// Draws `pairs / 2` records from each partition without replacement and
/// labels the shadow model's outputs on them by membership.
pub fn build_attack_dataset(
    shadow_theta: &WeightVector,
    shadow_omega: &WeightVector,
    in_set: &Dataset,
    out_set: &Dataset,
    pairs: usize,
    seed: u64,
) -> Result<Vec<AttackRecord>> {
    if pairs == 0 || !pairs.is_multiple_of(2) {
        return Err(invalid(format!("pairs must be positive and even, got {pairs}")));
    }
    collect_records(shadow_theta, shadow_omega, in_set, out_set, pairs / 2, seed, Provenance::Shadow)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    /// Plain gradient descent.
    Gd,
    /// Adam with β₁ = 0.9, β₂ = 0.999, ε = 1e-7.
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackClassifierConfig {
    #[serde(default = "default_hidden_layers")]
    pub hidden_layers: usize,
    #[serde(default = "default_hidden_width")]
    pub hidden_width: usize,
    #[serde(default = "default_attack_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_attack_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_train_pairs")]
    pub train_pairs: usize,
    /// Minibatch size; `None` trains on the full batch every step.
    #[serde(default = "default_batch_size")]
    pub batch_size: Option<usize>,
    #[serde(default = "default_optimizer")]
    pub optimizer: Optimizer,
}

fn default_hidden_layers() -> usize {
    5
}
fn default_hidden_width() -> usize {
    64
}
fn default_attack_lr() -> f64 {
    0.001
}
fn default_attack_epochs() -> usize {
    60
}
fn default_train_pairs() -> usize {
    2000
}
fn default_batch_size() -> Option<usize> {
    Some(32)
}
fn default_optimizer() -> Optimizer {
    Optimizer::Adam
}

impl Default for AttackClassifierConfig {
    fn default() -> Self {
        Self {
            hidden_layers: default_hidden_layers(),
            hidden_width: default_hidden_width(),
            learning_rate: default_attack_lr(),
            epochs: default_attack_epochs(),
            seed: 0,
            train_pairs: default_train_pairs(),
            batch_size: default_batch_size(),
            optimizer: default_optimizer(),
        }
    }
}

impl AttackClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers == 0 || self.hidden_width == 0 {
            return Err(invalid("attack classifier needs at least one nonempty hidden layer"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(invalid(format!("attack learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.train_pairs == 0 || !self.train_pairs.is_multiple_of(2) {
            return Err(invalid(format!("train_pairs must be positive and even, got {}", self.train_pairs)));
        }
        if self.batch_size == Some(0) {
            return Err(invalid("batch size must be positive"));
        }
        Ok(())
    }

    fn layers(&self, input_dim: usize) -> Vec<DenseShape> {
        let mut layers = vec![DenseShape::new(input_dim, self.hidden_width)];
        layers.extend((1..self.hidden_layers).map(|_| DenseShape::new(self.hidden_width, self.hidden_width)));
        layers.push(DenseShape::new(self.hidden_width, 1));
        layers
    }
}

/// ReLU MLP with a single sigmoid output: the probability of membership.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackClassifier {
    layers: Vec<DenseShape>,
    params: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `-[y ln σ(z) + (1-y) ln(1-σ(z))]` computed from the logit.
fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

impl AttackClassifier {
    /// Assembles a classifier from explicit layers and flattened parameters.
    pub fn from_parts(layers: Vec<DenseShape>, params: Vec<f64>) -> Result<Self> {
        if layers.is_empty() || layers.last().map(|l| l.outputs) != Some(1) {
            return Err(invalid("attack classifier must end in a single output"));
        }
        if layers.windows(2).any(|w| w[0].outputs != w[1].inputs) {
            return Err(invalid("attack classifier layers do not chain"));
        }
        let expected: usize = layers.iter().map(DenseShape::param_count).sum();
        if params.len() != expected {
            return Err(Error::ShapeMismatch { expected: format!("{expected} parameters"), found: format!("{}", params.len()) });
        }
        Ok(Self { layers, params })
    }

    pub fn layers(&self) -> &[DenseShape] {
        &self.layers
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} attack inputs", self.input_dim()),
                found: format!("{}", x.len()),
            });
        }
        Ok(())
    }

    /// Activations after every layer; the last entry is the output logit.
    fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut offset = 0;
        let last = self.layers.len() - 1;
        for (k, &shape) in self.layers.iter().enumerate() {
            let mut out = vec![0.0; shape.outputs];
            let input = if k == 0 { x } else { &acts[k - 1][..] };
            dense_forward(&self.params[offset..offset + shape.param_count()], shape, input, &mut out);
            if k != last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            offset += shape.param_count();
            acts.push(out);
        }
        acts
    }

    pub fn logit(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.forward(x).last().expect("at least one layer")[0])
    }

    /// Membership probability for a raw input vector.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        self.logit(x).map(sigmoid)
    }

    pub fn score_record(&self, r: &AttackRecord) -> Result<f64> {
        self.score(&r.input())
    }

    /// Member iff the membership probability exceeds 0.5.
    pub fn predict_member(&self, r: &AttackRecord) -> Result<bool> {
        Ok(self.score_record(r)? > 0.5)
    }

    /// Adds the loss gradient for one example into `grad` and returns its loss.
    fn backprop(&self, x: &[f64], y: f64, grad: &mut [f64]) -> f64 {
        let acts = self.forward(x);
        let z = acts.last().expect("at least one layer")[0];
        let loss = bce_with_logit(z, y);
        let mut delta = vec![sigmoid(z) - y];
        let mut offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0, |acc, l| {
                let o = *acc;
                *acc += l.param_count();
                Some(o)
            })
            .collect();
        for k in (0..self.layers.len()).rev() {
            let shape = self.layers[k];
            let off = offsets.pop().expect("offset per layer");
            let input = if k == 0 { x } else { &acts[k - 1][..] };
            dense_accumulate(&mut grad[off..off + shape.param_count()], shape, input, &delta);
            if k > 0 {
                let mut dx = vec![0.0; shape.inputs];
                dense_backward_input(&self.params[off..off + shape.param_count()], shape, &delta, &mut dx);
                for (d, a) in dx.iter_mut().zip(&acts[k - 1]) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
                delta = dx;
            }
        }
        loss
    }

    /// Mean binary cross-entropy over `records`.
    pub fn loss(&self, records: &[AttackRecord]) -> Result<f64> {
        let mut total = 0.0;
        for r in records {
            total += bce_with_logit(self.logit(&r.input())?, r.target());
        }
        Ok(total / records.len().max(1) as f64)
    }

    /// Mean loss and gradient over `records`, for gradient checks.
    pub fn loss_and_gradient(&self, records: &[AttackRecord]) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.params.len()];
        let mut total = 0.0;
        for r in records {
            let x = r.input();
            self.check_input(&x)?;
            total += self.backprop(&x, r.target(), &mut grad);
        }
        let n = records.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok((total / n, grad))
    }

    /// Fraction of records whose membership is predicted correctly.
    pub fn accuracy(&self, records: &[AttackRecord]) -> Result<f64> {
        if records.is_empty() {
            return Err(Error::Empty("attack records"));
        }
        let mut correct = 0usize;
        for r in records {
            if self.predict_member(r)? == r.member {
                correct += 1;
            }
        }
        Ok(correct as f64 / records.len() as f64)
    }
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

/// Trains the attack MLP on shadow-model records.
///
/// Initialisation uses stream 0 of `cfg.seed` and minibatch shuffling uses
/// stream 1, so the result depends only on `records` and `cfg`.
pub fn train_attack_classifier(records: &[AttackRecord], cfg: &AttackClassifierConfig) -> Result<AttackClassifier> {
    cfg.validate()?;
    let first = records.first().ok_or(Error::Empty("attack training records"))?;
    if records.iter().any(|r| r.provenance != Provenance::Shadow) {
        return Err(invalid("attack classifier may only be trained on shadow-model outputs"));
    }
    if records.iter().all(|r| r.member) || records.iter().all(|r| !r.member) {
        return Err(invalid("attack training records contain a single membership class"));
    }
    let input_dim = first.input().len();
    if records.iter().any(|r| r.input().len() != input_dim) {
        return Err(invalid("attack records have inconsistent widths"));
    }

    let layers = cfg.layers(input_dim);
    // He-uniform weights suit the ReLU layers
    let params = init_params(&layers, std::f64::consts::SQRT_2, RngStream::new(cfg.seed, 0));
    let mut clf = AttackClassifier::from_parts(layers, params)?;
    let inputs: Vec<(Vec<f64>, f64)> = records.iter().map(|r| (r.input(), r.target())).collect();
    let batch = cfg.batch_size.unwrap_or(inputs.len()).min(inputs.len());
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut shuffler = RngStream::new(cfg.seed, 1).generator();
    let mut adam = AdamState { m: vec![0.0; clf.params.len()], v: vec![0.0; clf.params.len()], t: 0 };

    for _ in 0..cfg.epochs {
        if batch < inputs.len() {
            order.shuffle(&mut shuffler);
        }
        for chunk in order.chunks(batch) {
            let mut grad = vec![0.0; clf.params.len()];
            for &i in chunk {
                clf.backprop(&inputs[i].0, inputs[i].1, &mut grad);
            }
            let scale = 1.0 / chunk.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            step(&mut clf.params, &grad, cfg, &mut adam);
        }
    }
    Ok(clf)
}

fn step(params: &mut [f64], grad: &[f64], cfg: &AttackClassifierConfig, adam: &mut AdamState) {
    match cfg.optimizer {
        Optimizer::Gd => {
            for (p, g) in params.iter_mut().zip(grad) {
                *p -= cfg.learning_rate * g;
            }
        }
        Optimizer::Adam => {
            const B1: f64 = 0.9;
            const B2: f64 = 0.999;
            const EPS: f64 = 1e-7;
            adam.t += 1;
            let c1 = 1.0 - B1.powi(adam.t);
            let c2 = 1.0 - B2.powi(adam.t);
            for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut adam.m).zip(&mut adam.v) {
                *m = B1 * *m + (1.0 - B1) * g;
                *v = B2 * *v + (1.0 - B2) * g * g;
                *p -= cfg.learning_rate * (*m / c1) / ((*v / c2).sqrt() + EPS);
            }
        }
    }
}

/// Victim attack records on a balanced sample: `min(|members|, |nonmembers|)`
/// records drawn from each side of the model `(theta, omega)`.
pub fn head_attack_records(
    theta: &WeightVector,
    omega: &WeightVector,
    members: &Dataset,
    nonmembers: &Dataset,
    seed: u64,
) -> Result<Vec<AttackRecord>> {
    let per_side = members.len().min(nonmembers.len());
    collect_records(theta, omega, members, nonmembers, per_side, seed, Provenance::Victim)
}

/// Victim attack records from the noisy head when `use_protected_outputs`
/// is set, from the clean head otherwise.
pub fn victim_attack_records(
    victim: &ProtectedModel,
    members: &Dataset,
    nonmembers: &Dataset,
    use_protected_outputs: bool,
    seed: u64,
) -> Result<Vec<AttackRecord>> {
    let omega = if use_protected_outputs { victim.omega_noisy() } else { victim.omega_clean() };
    head_attack_records(victim.theta(), omega, members, nonmembers, seed)
}

/// Balanced membership accuracy of `classifier` against `victim`.
pub fn attack_accuracy(
    classifier: &AttackClassifier,
    victim: &ProtectedModel,
    members: &Dataset,
    nonmembers: &Dataset,
    use_protected_outputs: bool,
    seed: u64,
) -> Result<f64> {
    classifier.accuracy(&victim_attack_records(victim, members, nonmembers, use_protected_outputs, seed)?)
}

/// Attack records as CSV: `p0..`, `y0..`, `member`.
pub fn write_attack_csv<W: Write>(records: &[AttackRecord], writer: W) -> Result<()> {
    let c = records.first().map_or(0, AttackRecord::num_classes);
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..c).map(|i| format!("p{i}")).collect();
    header.extend((0..c).map(|i| format!("y{i}")));
    header.push("member".into());
    w.write_record(&header)?;
    for r in records {
        if r.num_classes() != c {
            return Err(invalid("attack records have inconsistent widths"));
        }
        let mut row: Vec<String> = r.output.iter().chain(&r.label_onehot).map(|v| v.to_string()).collect();
        row.push(u8::from(r.member).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads records written by [`write_attack_csv`]; they are tagged as shadow
/// records.
pub fn read_attack_csv<R: Read>(reader: R) -> Result<Vec<AttackRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let width = r.headers()?.len();
    if width < 3 || width % 2 == 0 {
        return Err(Error::Format(format!("attack CSV needs 2C+1 columns, found {width}")));
    }
    let c = (width - 1) / 2;
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let vals: Vec<f64> = row
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Format(format!("bad number {s:?}: {e}"))))
            .collect::<Result<_>>()?;
        let label = vals[c..2 * c]
            .iter()
            .position(|&v| v == 1.0)
            .filter(|_| vals[c..2 * c].iter().filter(|&&v| v != 0.0).count() == 1)
            .ok_or_else(|| Error::Format("label columns are not one-hot".into()))?;
        let member = match vals[2 * c] {
            1.0 => true,
            0.0 => false,
            v => return Err(Error::Format(format!("membership must be 0 or 1, got {v}"))),
        };
        out.push(AttackRecord::new(vals[..c].to_vec(), label, member, Provenance::Shadow)?);
    }
    Ok(out)
}
