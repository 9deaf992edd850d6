mod common;

use grasp_sentinel::geometry::{AngleConvention, Quaternion};
use grasp_sentinel::{
    activation_mse, derive_params, evaluate_dataset, evaluate_state, quaternion_angle, Condition, ContextMode, Dataset,
    ErrorParams, GraspLabel, TrainingScope, Trial, WristState,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute_force_error, geodesic_deg, random_local_state, random_unit_quaternion};

fn dataset(k: usize, states: Vec<WristState>) -> Dataset {
    let states =
        states.into_iter().enumerate().map(|(i, s)| WristState { timestamp_ms: i as f64 * 12.0, ..s }).collect();
    Dataset::new(
        k,
        vec![Trial { trial_id: "t".into(), grasp_label: GraspLabel::Power, condition: Condition::Training, states }],
    )
}

fn mode_strategy() -> impl Strategy<Value = ContextMode> {
    prop_oneof![Just(ContextMode::PositionAndRotation), Just(ContextMode::RotationOnly)]
}

fn activation_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..8).prop_flat_map(|k| (prop::collection::vec(0.0..=1.0f64, k), prop::collection::vec(0.0..=1.0f64, k)))
}

proptest! {
    #[test]
    fn mse_is_bounded_and_symmetric((a, b) in activation_pair()) {
        let ab = activation_mse(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, activation_mse(&b, &a).unwrap());
        prop_assert_eq!(activation_mse(&a, &a).unwrap(), 0.0);
        prop_assert_eq!(ab == 0.0, a == b);
    }

    #[test]
    fn state_error_matches_brute_force(
        seed in any::<u64>(),
        n in 0usize..100,
        k in prop::sample::select(vec![1usize, 2, 5]),
        n_min in 1usize..8,
        mode in mode_strategy(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = derive_params(k, n_min, 0.25, 0.02, 20.0, mode).unwrap();
        let training: Vec<WristState> = (0..n).map(|_| random_local_state(&mut rng, k, 0.03, 15.0)).collect();
        let x = random_local_state(&mut rng, k, 0.01, 5.0);
        let got = evaluate_state(&x, &dataset(k, training.clone()), &params).unwrap();
        let (want, count) = brute_force_error(&x, &training, &params);
        prop_assert_eq!(got.neighbour_count, count);
        match (got.error, want) {
            (Some(g), Some(w)) => prop_assert!((g - w).abs() <= 1e-12, "{} vs {}", g, w),
            (None, None) => {}
            other => prop_assert!(false, "evaluability differs: {:?}", other),
        }
    }

    #[test]
    fn error_stays_within_unit_interval(seed in any::<u64>(), mode in mode_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = ErrorParams::table_defaults(mode);
        let training: Vec<WristState> = (0..60).map(|_| random_local_state(&mut rng, 2, 0.02, 10.0)).collect();
        let x = random_local_state(&mut rng, 2, 0.01, 5.0);
        let e = evaluate_state(&x, &dataset(2, training), &params).unwrap();
        if let Some(err) = e.error {
            prop_assert!((0.0..=1.0).contains(&err));
            prop_assert!(e.neighbour_count >= params.n_min);
        }
    }

    #[test]
    fn duplicating_training_leaves_error_unchanged(seed in any::<u64>(), mode in mode_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = ErrorParams::table_defaults(mode);
        let training: Vec<WristState> = (0..40).map(|_| random_local_state(&mut rng, 2, 0.02, 10.0)).collect();
        let doubled: Vec<WristState> = training.iter().chain(&training).cloned().collect();
        let x = random_local_state(&mut rng, 2, 0.01, 5.0);
        let once = evaluate_state(&x, &dataset(2, training), &params).unwrap();
        let twice = evaluate_state(&x, &dataset(2, doubled), &params).unwrap();
        prop_assert_eq!(twice.neighbour_count, 2 * once.neighbour_count);
        if let (Some(a), Some(b)) = (once.error, twice.error) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn states_outside_the_focal_area_do_not_matter(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = ErrorParams::table_defaults(ContextMode::PositionAndRotation);
        let near: Vec<WristState> = (0..30).map(|_| random_local_state(&mut rng, 2, 0.015, 8.0)).collect();
        let x = random_local_state(&mut rng, 2, 0.005, 3.0);
        let mut with_far = near.clone();
        for _ in 0..30 {
            let mut s = random_local_state(&mut rng, 2, 0.01, 8.0);
            s.position[rng.random_range(0..3)] += 0.5;
            with_far.push(s);
        }
        let a = evaluate_state(&x, &dataset(2, near), &params).unwrap();
        let b = evaluate_state(&x, &dataset(2, with_far), &params).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn constant_difference_gives_that_difference(seed in any::<u64>(), level in 0.0..=1.0f64) {
        // Every neighbour has the same activation, so the weighted mean is its MSE
        // regardless of the weights.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = ErrorParams::table_defaults(ContextMode::PositionAndRotation);
        let training: Vec<WristState> = (0..25)
            .map(|_| WristState { activation: vec![level, level], ..random_local_state(&mut rng, 2, 0.01, 5.0) })
            .collect();
        let x = WristState { position: [0.0; 3], orientation: Quaternion::IDENTITY, activation: vec![0.0, 1.0], timestamp_ms: 0.0 };
        let e = evaluate_state(&x, &dataset(2, training), &params).unwrap();
        let want = activation_mse(&x.activation, &[level, level]).unwrap();
        if let Some(err) = e.error {
            prop_assert!((err - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn quaternion_angle_is_half_the_rotation_geodesic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q1 = random_unit_quaternion(&mut rng);
        let q2 = random_unit_quaternion(&mut rng);
        let theta = quaternion_angle(&q1, &q2, AngleConvention::Absolute).unwrap();
        prop_assert!((0.0..=90.0).contains(&theta));
        prop_assert!((theta - geodesic_deg(&q1, &q2) / 2.0).abs() < 1e-5, "{} vs {}", theta, geodesic_deg(&q1, &q2));
        prop_assert_eq!(theta, quaternion_angle(&q2, &q1, AngleConvention::Absolute).unwrap());
    }

    #[test]
    fn quaternion_angle_ignores_sign(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q1 = random_unit_quaternion(&mut rng);
        let q2 = random_unit_quaternion(&mut rng);
        let theta = quaternion_angle(&q1, &q2, AngleConvention::Absolute).unwrap();
        prop_assert_eq!(theta, quaternion_angle(&q1.neg(), &q2, AngleConvention::Absolute).unwrap());
        prop_assert_eq!(theta, quaternion_angle(&q1, &q2.neg(), AngleConvention::Absolute).unwrap());
        prop_assert!(quaternion_angle(&q1, &q1.neg(), AngleConvention::Absolute).unwrap() < 1e-5);
        // Without the absolute value the two covers are supplementary.
        let literal = quaternion_angle(&q1, &q2, AngleConvention::Literal).unwrap();
        let flipped = quaternion_angle(&q1, &q2.neg(), AngleConvention::Literal).unwrap();
        prop_assert!((literal + flipped - 180.0).abs() < 1e-6);
    }
}

#[test]
fn rotation_only_evaluates_a_superset() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let training = dataset(2, (0..200).map(|_| random_local_state(&mut rng, 2, 0.04, 25.0)).collect());
    let test = dataset(2, (0..200).map(|_| random_local_state(&mut rng, 2, 0.04, 25.0)).collect());
    let combined = evaluate_dataset(
        &test,
        &training,
        &ErrorParams::table_defaults(ContextMode::PositionAndRotation),
        TrainingScope::Full,
    )
    .unwrap();
    let rotation = evaluate_dataset(
        &test,
        &training,
        &ErrorParams::table_defaults(ContextMode::RotationOnly),
        TrainingScope::Full,
    )
    .unwrap();
    assert!(combined.evaluable_states() > 0);
    assert!(rotation.evaluable_states() > combined.evaluable_states());
    for (c, r) in combined.trials[0].states.iter().zip(&rotation.trials[0].states) {
        assert!(!c.is_evaluable() || r.is_evaluable());
        assert!(r.neighbour_count >= c.neighbour_count);
    }
}

#[test]
fn evaluation_run_is_aligned_with_test_trials() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let training = dataset(2, (0..50).map(|_| random_local_state(&mut rng, 2, 0.02, 10.0)).collect());
    let trials = (0..4)
        .map(|i| Trial {
            trial_id: format!("q{i}"),
            grasp_label: GraspLabel::Tridigital,
            condition: Condition::Success,
            states: (0..5 + i)
                .map(|j| WristState { timestamp_ms: j as f64, ..random_local_state(&mut rng, 2, 0.02, 10.0) })
                .collect(),
        })
        .collect();
    let test = Dataset::new(2, trials);
    let params = ErrorParams::table_defaults(ContextMode::PositionAndRotation);
    let run = evaluate_dataset(&test, &training, &params, TrainingScope::Full).unwrap();
    for (t, e) in test.trials.iter().zip(&run.trials) {
        assert_eq!(t.trial_id, e.trial_id);
        assert_eq!(t.states.len(), e.states.len());
        for (s, ev) in t.states.iter().zip(&e.states) {
            assert_eq!(*ev, evaluate_state(s, &training, &params).unwrap());
        }
    }
}
