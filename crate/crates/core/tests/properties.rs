//! Property tests over the noise distributions, mechanisms and weight
//! containers.

use postdp_core::mechanisms::{budget_for_scale, perturb, scale_for_budget, MechanismKind, MechanismSpec};
use postdp_core::noise::{LaplaceParams, LogisticParams};
use postdp_core::pipeline::{ShapeTag, WeightVector};
use postdp_core::{PrivacyBudget, RngStream, Sensitivity};
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = MechanismKind> {
    prop_oneof![Just(MechanismKind::Logistic), Just(MechanismKind::Laplace), Just(MechanismKind::Gaussian)]
}

proptest! {
    #[test]
    fn logistic_pdf_is_symmetric(mu in -5.0..5.0f64, s in 1e-3..10.0f64, x in 0.0..50.0f64) {
        let d = LogisticParams::new(mu, s).unwrap();
        let (a, b) = (d.pdf(mu + x).unwrap(), d.pdf(mu - x).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * a.max(b));
    }

    #[test]
    fn quantile_inverts_cdf(mu in -5.0..5.0f64, s in 1e-2..10.0f64, p in 1e-6..(1.0 - 1e-6)) {
        let l = LogisticParams::new(mu, s).unwrap();
        prop_assert!((l.cdf(l.quantile(p).unwrap()).unwrap() - p).abs() < 1e-12);
        let b = LaplaceParams::new(mu, s).unwrap();
        prop_assert!((b.cdf(b.quantile(p).unwrap()).unwrap() - p).abs() < 1e-12);
    }

    #[test]
    fn cdf_is_monotone(s in 1e-3..10.0f64, x in -100.0..100.0f64, dx in 0.0..10.0f64) {
        let l = LogisticParams::centered(s).unwrap();
        prop_assert!(l.cdf(x + dx).unwrap() >= l.cdf(x).unwrap());
        let b = LaplaceParams::centered(s).unwrap();
        prop_assert!(b.cdf(x + dx).unwrap() >= b.cdf(x).unwrap());
    }

    #[test]
    fn shift_ratio_never_exceeds_budget(
        s in 1e-3..10.0f64,
        frac in -1.0..1.0f64,
        delta in 1e-3..5.0f64,
        z in -1e3..1e3f64,
    ) {
        let gamma = frac * delta;
        let l = LogisticParams::centered(s).unwrap();
        prop_assert!(l.ln_shift_ratio(gamma, z).unwrap() <= delta / s + 1e-12);
        let b = LaplaceParams::centered(s).unwrap();
        prop_assert!(b.ln_shift_ratio(gamma, z).unwrap() <= delta / s + 1e-12);
    }

    #[test]
    fn budget_round_trip(k in kind(), eps in 1e-3..100.0f64, d in 1e-4..10.0f64, delta in 1e-9..0.5f64) {
        let sens = Sensitivity::new(k.norm(), d).unwrap();
        let delta = if k == MechanismKind::Gaussian { delta } else { 0.0 };
        let spec = scale_for_budget(k, PrivacyBudget::new(eps, delta).unwrap(), sens).unwrap();
        let back = budget_for_scale(&spec, sens).unwrap();
        prop_assert!((back.epsilon - eps).abs() <= f64::EPSILON * eps);
        prop_assert_eq!(back.delta, delta);
    }

    #[test]
    fn perturb_keeps_shape_and_is_seeded(
        k in kind(),
        vals in prop::collection::vec(-10.0..10.0f64, 2..40),
        scale in 1e-3..5.0f64,
        seed in any::<u64>(),
    ) {
        let n = vals.len();
        let w = WeightVector::new(vals, ShapeTag::dense(n - 1, 1).unwrap()).unwrap();
        let delta = if k == MechanismKind::Gaussian { 1e-5 } else { 0.0 };
        let spec = MechanismSpec::new(k, scale, delta).unwrap();
        let a = perturb(&w, &spec, RngStream::new(seed, 0)).unwrap();
        prop_assert_eq!(a.shape(), w.shape());
        prop_assert_eq!(&a, &perturb(&w, &spec, RngStream::new(seed, 0)).unwrap());
        let noise = spec.noise(RngStream::new(seed, 0), n);
        for ((x, y), e) in a.values().iter().zip(w.values()).zip(&noise) {
            prop_assert_eq!(*x, y + e);
        }
    }

    #[test]
    fn samples_are_finite(k in kind(), scale in 1e-6..1e3f64, seed in any::<u64>()) {
        let delta = if k == MechanismKind::Gaussian { 1e-5 } else { 0.0 };
        let spec = MechanismSpec::new(k, scale, delta).unwrap();
        prop_assert!(spec.noise(RngStream::new(seed, 3), 256).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn distances_are_metrics(
        a in prop::collection::vec(-5.0..5.0f64, 6),
        b in prop::collection::vec(-5.0..5.0f64, 6),
    ) {
        let tag = ShapeTag::dense(2, 2).unwrap();
        let (x, y) = (WeightVector::new(a, tag.clone()).unwrap(), WeightVector::new(b, tag).unwrap());
        let (l1, l2) = (x.l1_distance(&y).unwrap(), x.l2_distance(&y).unwrap());
        prop_assert!(l2 <= l1 + 1e-12 && l1 <= l2 * 6f64.sqrt() + 1e-12);
        prop_assert_eq!(l1, y.l1_distance(&x).unwrap());
        prop_assert_eq!(x.l1_distance(&x).unwrap(), 0.0);
    }
}

#[test]
fn mismatched_norm_is_rejected() {
    let budget = PrivacyBudget::pure(1.0).unwrap();
    assert!(scale_for_budget(MechanismKind::Logistic, budget, Sensitivity::l2(1.0).unwrap()).is_err());
    let budget = PrivacyBudget::new(1.0, 1e-5).unwrap();
    assert!(scale_for_budget(MechanismKind::Gaussian, budget, Sensitivity::l1(1.0).unwrap()).is_err());
}
