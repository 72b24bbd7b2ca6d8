//! Deeper coupled-pair laws: the generator's age-drift terms checked
//! against the Monte Carlo drift of an age-dependent test function, a
//! hand-computed generator value on an age-dependent rate field, and
//! marginal-law preservation when the two components disagree in count.

use smpsim::coupling::{dynkin_check, generator_apply, simulate_coupled, TestFunction};
use smpsim::harness::catalog;
use smpsim::harness::{ks_two_sample, EmpiricalDistribution};
use smpsim::layout::MarkResolution;
use smpsim::prm::PointStream;
use smpsim::solver::{simulate_path, AugmentedState};

#[test]
fn generator_splits_same_state_unequal_ages_by_hand() {
    // λ_12(y) = min(y, 2): at ages 1.0 and 0.5 the lone-jump masses are
    // (1.0 − 0.5)⁺ and (0.5 − 1.0)⁺, the shared mass is 0.5
    let entry = catalog::build("agelinear", &Default::default()).unwrap();
    let model = &entry.model;
    let z1 = AugmentedState::new(1).with_age(1.0);
    let z2 = AugmentedState::new(1).with_age(0.5);

    let product = TestFunction::both_states_are(2, 2);
    let a = generator_apply(model, &product, &z1, &z2);
    assert!((a - 0.5).abs() < 1e-12, "product indicator: {a}");

    let first = TestFunction::first_state_is(2);
    let a = generator_apply(model, &first, &z1, &z2);
    assert!((a - 1.0).abs() < 1e-12, "lone indicator: {a}");

    let second = TestFunction::second_state_is(2);
    let a = generator_apply(model, &second, &z1, &z2);
    assert!((a - 0.5).abs() < 1e-12, "second indicator: {a}");
}

#[test]
fn dynkin_drift_matches_for_age_dependent_test_function() {
    // φ = e^{−y₁−y₂} has nonzero age-drift: Aφ must pick up the −2φ term
    let entry = catalog::build("agelinear", &Default::default()).unwrap();
    let model = &entry.model;
    let resolution = MarkResolution::new(model);
    let phi = TestFunction::new(|z1: &AugmentedState, z2: &AugmentedState| {
        (-z1.age - z2.age).exp()
    })
    .with_partials(
        |z1: &AugmentedState, z2: &AugmentedState| -(-z1.age - z2.age).exp(),
        |z1: &AugmentedState, z2: &AugmentedState| -(-z1.age - z2.age).exp(),
    );

    // cross-check the generator value by hand at equal states and ages:
    // drift −2e^{−2y} plus the shared jump mass λ(y)(1 − e^{−2y})
    let y = 0.8;
    let z = AugmentedState::new(1).with_age(y);
    let lam = model.rate(1, 2, y, 0);
    let want = -2.0 * (-2.0 * y).exp() + lam * (1.0 - (-2.0 * y).exp());
    let got = generator_apply(model, &phi, &z, &z);
    assert!((got - want).abs() < 1e-12, "Aφ = {got}, want {want}");

    let stream = PointStream::new(0xd1f7, 9, resolution.strip_height()).unwrap();
    for (z1, z2) in [
        (
            AugmentedState::new(1).with_age(0.8),
            AugmentedState::new(1).with_age(0.8),
        ),
        (
            AugmentedState::new(1).with_age(1.2),
            AugmentedState::new(2).with_age(0.3),
        ),
    ] {
        let check = dynkin_check(
            model,
            &resolution,
            &phi,
            z1,
            z2,
            &[0.02, 0.01],
            200_000,
            &stream,
        )
        .unwrap();
        assert!(
            check.pass,
            "drift mismatch: residual {} bound {} trend {}",
            check.residual_at_smallest, check.bound_at_smallest, check.trend_ok
        );
    }
}

#[test]
fn coupling_preserves_marginals_under_count_asymmetry() {
    // the count-reading model couples components with unequal counts;
    // each marginal must keep its solo first-jump law
    let entry = catalog::build("ndecay", &Default::default()).unwrap();
    let model = &entry.model;
    let resolution = MarkResolution::new(model);
    let reps = 20_000;
    let horizon = 30.0;

    let coupled_root = PointStream::new(0xc0a1, 0, resolution.strip_height()).unwrap();
    let solo_root = PointStream::new(0xc0a2, 1, resolution.strip_height()).unwrap();
    let init_fresh = AugmentedState::new(1);
    let init_worn = AugmentedState::new(1).with_count(3);

    let mut coupled_t1 = Vec::new();
    let mut coupled_partner_t1 = Vec::new();
    for r in 0..reps {
        let mut stream = coupled_root.fork_child(r as u64);
        let path =
            simulate_coupled(model, &resolution, &mut stream, init_fresh, init_worn, horizon)
                .unwrap();
        if let Some(f) = path.first().jumps().first() {
            coupled_t1.push(f.time);
        }
        if let Some(f) = path.second().jumps().first() {
            coupled_partner_t1.push(f.time);
        }
    }
    let mut solo_t1 = Vec::new();
    let mut solo_worn_t1 = Vec::new();
    for r in 0..reps {
        let mut stream = solo_root.fork_child(r as u64);
        let traj =
            simulate_path(model, &resolution, &mut stream, init_fresh, horizon).unwrap();
        if let Some(f) = traj.jumps().first() {
            solo_t1.push(f.time);
        }
        let mut stream = solo_root.fork_child(reps as u64 + r as u64);
        let traj = simulate_path(model, &resolution, &mut stream, init_worn, horizon).unwrap();
        if let Some(f) = traj.jumps().first() {
            solo_worn_t1.push(f.time);
        }
    }

    for (name, coupled, solo) in [
        ("fresh component", coupled_t1, solo_t1),
        ("worn component", coupled_partner_t1, solo_worn_t1),
    ] {
        let ks = ks_two_sample(
            &EmpiricalDistribution::from_samples(coupled).unwrap(),
            &EmpiricalDistribution::from_samples(solo).unwrap(),
        )
        .unwrap();
        assert!(
            ks.passes_at(0.005),
            "{name}: coupled marginal drifted from the solo law (p = {})",
            ks.p_value
        );
    }
}
