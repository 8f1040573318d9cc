//! Published full-scale results, kept as reference data.
//!
//! These numbers come from self-supervised encoders trained on image
//! benchmarks and are not reproducible by the small synthetic pipeline in
//! this crate. They are used to check grid construction and trend
//! statistics, never as targets for the synthetic runs.

use crate::mechanisms::MechanismKind;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityReference {
    pub dataset: &'static str,
    pub pretrain_records: usize,
    pub finetune_records: usize,
    /// Number of sampled adjacent pairs.
    pub m: usize,
    pub delta_l1: f64,
    pub delta_l2: f64,
}

pub const SENSITIVITIES: [SensitivityReference; 3] = [
    SensitivityReference {
        dataset: "cifar10",
        pretrain_records: 40_000,
        finetune_records: 10_000,
        m: 500,
        delta_l1: 0.017492,
        delta_l2: 0.013842,
    },
    SensitivityReference {
        dataset: "cifar100",
        pretrain_records: 40_000,
        finetune_records: 10_000,
        m: 500,
        delta_l1: 0.020738,
        delta_l2: 0.016391,
    },
    SensitivityReference {
        dataset: "stl10",
        pretrain_records: 100_000,
        finetune_records: 5_000,
        m: 250,
        delta_l1: 0.013242,
        delta_l2: 0.010856,
    },
];

/// Unprotected membership-inference accuracy per dataset.
pub const UNPROTECTED_MIA_ACCURACY: [(&str, f64); 3] = [("cifar10", 0.62), ("stl10", 0.61), ("cifar100", 0.71)];

/// The ε scale anchoring the published halving grids: `ε_k = Δ₁ / (0.005 · 2ᵏ)`.
pub const GRID_ANCHOR_SCALE: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveReference {
    pub dataset: &'static str,
    pub mechanism: MechanismKind,
    /// `(ε, utility loss)` in the order published, ε decreasing.
    pub points: &'static [(f64, f64)],
}

/// Utility loss of the logistic mechanism on cifar100.
pub const CIFAR100_LOGISTIC_UTILITY: CurveReference = CurveReference {
    dataset: "cifar100",
    mechanism: MechanismKind::Logistic,
    points: &[
        (4.1476, 0.00148703706308817),
        (2.0738, 0.0211895850511289),
        (1.0369, 0.0791821346850201),
        (0.51845, 0.201115234633804),
        (0.259225, 0.453903336950394),
        (0.1296125, 0.697769515244048),
        (0.06480625, 0.864312266383916),
        (0.032403125, 0.928252785345436),
        (0.0162015625, 0.944237919461993),
    ],
};

/// ε grid of the logistic cifar10 curve.
pub const CIFAR10_LOGISTIC_EPSILONS: [f64; 9] = [
    3.4984, 1.7492, 0.8746, 0.4373, 0.21865, 0.109325, 0.0546625, 0.02733125, 0.013665625,
];

/// First published point of the logistic cifar10 curve.
pub const CIFAR10_LOGISTIC_FIRST_POINT: (f64, f64) = (3.4984, 0.0189793121301386);

pub fn sensitivity_reference(dataset: &str) -> Option<&'static SensitivityReference> {
    SENSITIVITIES.iter().find(|r| r.dataset == dataset)
}
