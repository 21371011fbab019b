use super::*;
use rand::SeedableRng;

#[test]
fn subspace_counts_are_gaussian_binomial_sums() {
    for (n, want) in [(1, 2), (2, 5), (3, 16), (4, 67)] {
        let all = all_subspaces(n).unwrap();
        assert_eq!(all.len(), want);
        let per_dim = |k: usize| all.iter().filter(|s| s.dim() == k).count();
        assert_eq!(per_dim(0), 1);
        assert_eq!(per_dim(n), 1);
        assert_eq!(per_dim(1), (1 << n) - 1);
    }
}

#[test]
fn success_trajectory_reaches_the_known_fixed_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = rand_subspace(8, 4, &mut rng).unwrap();
    let t = crate::cp::success_trajectory(&a, 100);
    assert!((t[0] - (15.0f64 / 16.0).powi(3)).abs() < 1e-12);
    assert!((t[99] - (15.0f64 / 16.0).powi(4)).abs() < 1e-12);
    assert!(t.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn both_token_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..5 {
        let a = rand_subspace(4, 2, &mut rng).unwrap();
        assert!((both_token_win(&a) - 9.0 / 64.0).abs() < 1e-15);
    }
}

/// One query on `|+⟩|0⟩` to a constant-one oracle, with `F = {x = 0}`:
/// `W = 1/2` but the final states have overlap `1/2`, so the distance is
/// `√3/2 > √(1/2)`.
#[test]
fn single_query_exceeds_the_unscaled_bound() {
    let f = ClassicalFunction::new(1, vec![1, 1]).unwrap();
    let layout = RegisterLayout::new([("x", 1), ("out", 1)]).unwrap();
    let circuit =
        Circuit::new()
            .hadamard("x")
            .query("O", XInput::Register("x".into()), None, "out");
    let inst = bbbv_instance(
        &circuit,
        &QuantumState::zero(layout).unwrap(),
        &f,
        &HashSet::from([(0, 0)]),
    )
    .unwrap();
    assert_eq!(inst.queries, 1);
    assert!((inst.weight - 0.5).abs() < 1e-12);
    assert!((inst.distance - 3f64.sqrt() / 2.0).abs() < 1e-12);
    assert!(inst.distance > inst.literal_bound());
    assert!(inst.distance <= inst.hybrid_bound());
}

#[test]
fn empty_flag_set_changes_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f = ClassicalFunction::random(8, 2, &mut rng).unwrap();
    let layout = RegisterLayout::new([("x", 3), ("out", 2)]).unwrap();
    let circuit = Circuit::new()
        .unitary(&["x"], linalg::random_unitary(8, &mut rng))
        .query("O", XInput::Register("x".into()), None, "out")
        .hadamard("out")
        .query("O", XInput::Register("x".into()), None, "out");
    let inst = bbbv_instance(
        &circuit,
        &QuantumState::zero(layout).unwrap(),
        &f,
        &HashSet::new(),
    )
    .unwrap();
    assert_eq!((inst.queries, inst.weight), (2, 0.0));
    assert!(inst.distance < 1e-12);
}

#[test]
fn suite_parsing() {
    assert_eq!(parse_suite("all").unwrap(), (1..=10).collect::<Vec<u8>>());
    assert_eq!(parse_suite("4, 6").unwrap(), vec![4, 6]);
    assert!(parse_suite("11").is_err());
    assert!(parse_suite("x").is_err());
}

#[test]
fn cheap_criteria_pass_and_repeat() {
    let a = run_suite(&[4, 6], 7).unwrap();
    assert!(a.passed, "{a:?}");
    let b = run_suite(&[4, 6], 7).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    assert_eq!(a.to_game_report().wins, 2);
}
