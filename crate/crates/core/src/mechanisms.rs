//! Additive noise mechanisms and their privacy accounting.
//!
//! | mechanism | sensitivity | scale from budget                     |
//! |-----------|-------------|----------------------------------------|
//! | logistic  | L1          | `s = Δ₁ / ε`                            |
//! | Laplace   | L1          | `b = Δ₁ / ε`                            |
//! | Gaussian  | L2          | `σ = Δ₂ · sqrt(2 ln(1.25/δ)) / ε`       |
//!
//! The mapping between scale and budget is exact in both directions; the
//! differential-privacy inequality itself is certified numerically by
//! [`log_ratio_bound_check`] and [`multivariate_log_ratio_check`].

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::noise::{GaussianParams, LaplaceParams, LogisticParams, NoiseDistribution};
use crate::pipeline::WeightVector;
use crate::rng::RngStream;

/// δ used for the Gaussian mechanism unless configured otherwise.
pub const DEFAULT_GAUSSIAN_DELTA: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MechanismKind {
    Logistic,
    Laplace,
    Gaussian,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 3] = [Self::Logistic, Self::Laplace, Self::Gaussian];

    pub const fn name(&self) -> &'static str {
        match self {
            Self::Logistic => "logistic",
            Self::Laplace => "laplace",
            Self::Gaussian => "gaussian",
        }
    }

    /// The sensitivity norm this mechanism is calibrated against.
    pub const fn norm(&self) -> Norm {
        match self {
            Self::Logistic | Self::Laplace => Norm::L1,
            Self::Gaussian => Norm::L2,
        }
    }

    pub const fn index(&self) -> u64 {
        match self {
            Self::Logistic => 0,
            Self::Laplace => 1,
            Self::Gaussian => 2,
        }
    }

    fn check_delta(&self, delta: f64) -> Result<()> {
        match self {
            Self::Logistic | Self::Laplace if delta != 0.0 => Err(Error::DeltaMismatch {
                kind: self.name(),
                delta,
                reason: "pure mechanisms require delta = 0",
            }),
            Self::Gaussian if !(delta > 0.0 && delta < 1.0) => Err(Error::DeltaMismatch {
                kind: self.name(),
                delta,
                reason: "gaussian mechanism requires 0 < delta < 1",
            }),
            _ => Ok(()),
        }
    }

    fn check_norm(&self, norm: Norm) -> Result<()> {
        if norm != self.norm() {
            return Err(Error::NormMismatch {
                kind: self.name(),
                expected: self.norm().name(),
                found: norm.name(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MechanismKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "logistic" => Ok(Self::Logistic),
            "laplace" => Ok(Self::Laplace),
            "gaussian" => Ok(Self::Gaussian),
            _ => Err(invalid(format!("unknown mechanism {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
}

impl Norm {
    pub const fn name(&self) -> &'static str {
        match self {
            Self::L1 => "l1",
            Self::L2 => "l2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub norm: Norm,
    pub value: f64,
}

impl Sensitivity {
    pub fn new(norm: Norm, value: f64) -> Result<Self> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(invalid(format!("sensitivity must be finite and >= 0, got {value}")));
        }
        Ok(Self { norm, value })
    }

    pub fn l1(value: f64) -> Result<Self> {
        Self::new(Norm::L1, value)
    }

    pub fn l2(value: f64) -> Result<Self> {
        Self::new(Norm::L2, value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(invalid(format!("epsilon must be positive and finite, got {epsilon}")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(invalid(format!("delta must lie in [0,1), got {delta}")));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn pure(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 0.0)
    }
}

/// A fully resolved additive mechanism: family, noise scale (`s`, `b` or
/// `σ`) and δ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct MechanismSpec {
    kind: MechanismKind,
    scale: f64,
    delta: f64,
}

#[derive(Deserialize)]
struct RawSpec {
    kind: MechanismKind,
    scale: f64,
    #[serde(default)]
    delta: f64,
}

impl TryFrom<RawSpec> for MechanismSpec {
    type Error = Error;

    fn try_from(r: RawSpec) -> Result<Self> {
        Self::new(r.kind, r.scale, r.delta)
    }
}

impl MechanismSpec {
    pub fn new(kind: MechanismKind, scale: f64, delta: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(invalid(format!("mechanism scale must be positive and finite, got {scale}")));
        }
        kind.check_delta(delta)?;
        Ok(Self { kind, scale, delta })
    }

    pub fn logistic(s: f64) -> Result<Self> {
        Self::new(MechanismKind::Logistic, s, 0.0)
    }

    pub fn laplace(b: f64) -> Result<Self> {
        Self::new(MechanismKind::Laplace, b, 0.0)
    }

    pub fn gaussian(sigma: f64, delta: f64) -> Result<Self> {
        Self::new(MechanismKind::Gaussian, sigma, delta)
    }

    pub fn kind(&self) -> MechanismKind {
        self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Zero-location noise law of this mechanism.
    pub fn distribution(&self) -> NoiseDistribution {
        // scale was validated on construction
        match self.kind {
            MechanismKind::Logistic => {
                NoiseDistribution::Logistic(LogisticParams::centered(self.scale).expect("valid scale"))
            }
            MechanismKind::Laplace => {
                NoiseDistribution::Laplace(LaplaceParams::centered(self.scale).expect("valid scale"))
            }
            MechanismKind::Gaussian => {
                NoiseDistribution::Gaussian(GaussianParams::centered(self.scale).expect("valid scale"))
            }
        }
    }

    /// The noise vector [`perturb`] adds for a vector of length `n`.
    pub fn noise(&self, rng: RngStream, n: usize) -> Vec<f64> {
        self.distribution().sample(rng, n)
    }
}

/// `sqrt(2 ln(1.25/δ))`, the Gaussian calibration constant.
pub fn gaussian_calibration(delta: f64) -> f64 {
    (2.0 * (1.25 / delta).ln()).sqrt()
}

/// Numerator `k` in `scale = k / ε`.
fn scale_numerator(kind: MechanismKind, delta: f64, sens: &Sensitivity) -> Result<f64> {
    kind.check_norm(sens.norm)?;
    kind.check_delta(delta)?;
    if sens.value <= 0.0 {
        return Err(invalid("sensitivity must be positive to calibrate a mechanism"));
    }
    Ok(match kind {
        MechanismKind::Logistic | MechanismKind::Laplace => sens.value,
        MechanismKind::Gaussian => sens.value * gaussian_calibration(delta),
    })
}

/// Noise scale achieving `budget` for a function with sensitivity `sens`.
pub fn scale_for_budget(kind: MechanismKind, budget: PrivacyBudget, sens: Sensitivity) -> Result<MechanismSpec> {
    let budget = PrivacyBudget::new(budget.epsilon, budget.delta)?;
    let k = scale_numerator(kind, budget.delta, &sens)?;
    MechanismSpec::new(kind, k / budget.epsilon, budget.delta)
}

/// Privacy budget delivered by `spec` for sensitivity `sens`; the exact
/// inverse of [`scale_for_budget`].
pub fn budget_for_scale(spec: &MechanismSpec, sens: Sensitivity) -> Result<PrivacyBudget> {
    let k = scale_numerator(spec.kind, spec.delta, &sens)?;
    PrivacyBudget::new(k / spec.scale, spec.delta)
}

/// Adds independent zero-location noise from `spec` to every coordinate of
/// `w`, biases included. The input is left untouched.
pub fn perturb(w: &WeightVector, spec: &MechanismSpec, rng: RngStream) -> Result<WeightVector> {
    if !w.is_finite() {
        return Err(Error::NonFinite("weight vector"));
    }
    let noise = spec.noise(rng, w.len());
    let values = w.values().iter().zip(&noise).map(|(a, n)| a + n).collect();
    WeightVector::new(values, w.shape().clone())
}

/// Maximum over `z_grid` of `ln p(z - gamma) - ln p(z)` for the noise law of
/// `spec`: the privacy loss at output `z` between two inputs whose query
/// values differ by `gamma`.
pub fn log_ratio_bound_check(spec: &MechanismSpec, gamma: f64, z_grid: &[f64]) -> Result<f64> {
    if z_grid.is_empty() {
        return Err(Error::Empty("z grid"));
    }
    let dist = spec.distribution();
    z_grid.iter().try_fold(f64::NEG_INFINITY, |acc, &z| {
        Ok(acc.max(dist.ln_shift_ratio(gamma, z)?))
    })
}

/// Privacy loss of a vector-valued release: the per-coordinate log ratios
/// summed, maximised over `samples` random output vectors drawn from `rng`.
///
/// Output coordinate `i` is drawn uniformly from
/// `[-(20·scale + 2|γᵢ|), 20·scale + 2|γᵢ|]`, which covers both saturated
/// tails and the transition region of every coordinate.
pub fn multivariate_log_ratio_check(
    spec: &MechanismSpec,
    gamma: &[f64],
    samples: usize,
    rng: RngStream,
) -> Result<f64> {
    if gamma.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gamma vector"));
    }
    if gamma.is_empty() || samples == 0 {
        return Ok(0.0);
    }
    let dist = spec.distribution();
    let mut g = rng.generator();
    let mut best = f64::NEG_INFINITY;
    for _ in 0..samples {
        let mut total = 0.0;
        for &gi in gamma {
            let r = 20.0 * spec.scale + 2.0 * gi.abs();
            total += dist.ln_shift_ratio(gi, g.uniform_range(-r, r))?;
        }
        best = best.max(total);
    }
    Ok(best)
}
