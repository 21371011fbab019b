use super::*;
use crate::circuit::{oracle_set, Circuit, OracleSet, XInput};
use crate::linalg::{self, c, CMatrix, CVector, C64, ONE, ZERO};
use crate::oracles::{classical_gate, ClassicalFunction};
use crate::qsim::{QuantumState, RegisterLayout};
use crate::stats::binomial_sigma_floored;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::FRAC_1_SQRT_2;

/// One-qubit program: `|0⟩` computes `f`, `|1⟩` computes `f ⊕ 1`.
fn toy_evaluator(reg: &str, f: &ClassicalFunction) -> Evaluator {
    let out = format!("{reg}.out");
    let table = f.clone();
    let o = out.clone();
    let r = reg.to_string();
    Evaluator::new(
        reg,
        1,
        move |x| {
            let fx = table.eval(x);
            Circuit::new().classical(&[r.as_str()], &o, move |b| fx ^ b)
        },
        OracleSet::new(),
    )
    .with_ancilla(&out, f.width())
    .with_output(&[out.as_str()], Some)
}

/// Program that ignores its register and queries a table oracle.
fn table_evaluator(g: &ClassicalFunction) -> Evaluator {
    Evaluator::new(
        "p",
        1,
        |x| Circuit::new().query("T", XInput::Const(x), None, "out"),
        oracle_set([("T", classical_gate(g).unwrap())]),
    )
    .with_ancilla("out", g.width())
    .with_output(&["out"], Some)
}

fn random_state(layout: RegisterLayout, rng: &mut ChaCha8Rng) -> QuantumState {
    let v = linalg::random_unit_vector(layout.dim(), rng);
    QuantumState::pure(layout, v).unwrap()
}

fn random_mixed(layout: RegisterLayout, rank: usize, rng: &mut ChaCha8Rng) -> QuantumState {
    let d = layout.dim();
    let mut rho = CMatrix::zeros(d, d);
    for _ in 0..rank {
        let v = linalg::random_unit_vector(d, rng);
        rho += linalg::outer(&v, &v) * c(rng.gen::<f64>() + 0.05);
    }
    let t = linalg::trace(&rho).re;
    QuantumState::mixed(layout, rho / c(t)).unwrap()
}

fn random_contraction(d: usize, rng: &mut ChaCha8Rng) -> BinaryPovm {
    let u = linalg::random_unitary(d, rng);
    let diag = CVector::from_fn(d, |_, _| c(rng.gen::<f64>()));
    BinaryPovm::new(&u * CMatrix::from_diagonal(&diag) * u.adjoint()).unwrap()
}

fn random_projector(d: usize, rank: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let u = linalg::random_unitary(d, rng);
    let cols: Vec<CVector> = (0..rank).map(|k| u.column(k).clone_owned()).collect();
    linalg::projector_from_columns(&cols, d)
}

#[test]
fn goodness_of_table_programs() {
    let f = ClassicalFunction::new(2, vec![0, 1, 2, 3]).unwrap();
    let d = uniform_inputs(4);
    let perfect = goodness_povm(&table_evaluator(&f), &f, &d).unwrap();
    assert!(linalg::max_abs_diff(perfect.operator(), &linalg::identity(2)) < 1e-12);
    let wrong = ClassicalFunction::from_fn(4, 2, |x| f.eval(x) ^ 1).unwrap();
    let p = goodness_povm(&table_evaluator(&wrong), &f, &d).unwrap();
    assert!(linalg::max_abs_diff(p.operator(), &CMatrix::zeros(2, 2)) < 1e-12);
    let half = ClassicalFunction::new(2, vec![0, 1, 0, 0]).unwrap();
    let p = goodness_povm(&table_evaluator(&half), &f, &d).unwrap();
    let s = QuantumState::zero(RegisterLayout::single("p", 1)).unwrap();
    assert!((p.accept_probability(&s, &["p"]).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn goodness_trace_matches_born_rule_average() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let f = ClassicalFunction::random(4, 1, &mut rng).unwrap();
    let eval = toy_evaluator("r", &f);
    let d = uniform_inputs(4);
    let p = goodness_povm(&eval, &f, &d).unwrap();
    let s = random_state(RegisterLayout::single("r", 1), &mut rng);
    let mut born = 0.0;
    for &(x, w) in &d {
        let dist = eval.output_distribution(&s, x).unwrap();
        born += w * dist.get(&Some(f.eval(x))).copied().unwrap_or(0.0);
    }
    assert!((p.accept_probability(&s, &["r"]).unwrap() - born).abs() < 1e-12);
}

#[test]
fn predicate_generalizes_equality() {
    let f = ClassicalFunction::new(2, vec![3, 0, 1, 2]).unwrap();
    let d = uniform_inputs(4);
    let eval = toy_evaluator("r", &f);
    let eq = goodness_povm(&eval, &f, &d).unwrap();
    let via_pred = goodness_povm_predicate(&eval, &Predicate::equality(&f, &d)).unwrap();
    assert!(linalg::max_abs_diff(eq.operator(), via_pred.operator()) < 1e-15);
    let all = goodness_povm_predicate(&eval, &Predicate::accept_all(&d)).unwrap();
    assert!(linalg::max_abs_diff(all.operator(), &linalg::identity(2)) < 1e-12);

    // Signing-style predicate: both f(x) and f(x) ⊕ 1 are valid answers.
    let sign = d.iter().fold(Predicate::new(), |p, &(x, w)| {
        let a = f.eval(x);
        p.coin(w, x, move |y| y == Some(a) || y == Some(a ^ 1))
    });
    let noncanonical = QuantumState::basis_index(RegisterLayout::single("r", 1), 1).unwrap();
    let under_sign = goodness_povm_predicate(&eval, &sign).unwrap();
    assert!(
        (under_sign
            .accept_probability(&noncanonical, &["r"])
            .unwrap()
            - 1.0)
            .abs()
            < 1e-12
    );
    assert!(eq.accept_probability(&noncanonical, &["r"]).unwrap().abs() < 1e-12);
}

#[test]
fn proj_impl_examples() {
    let p = CMatrix::from_diagonal(&CVector::from_vec(vec![ONE, ZERO]));
    let pi = proj_impl(&BinaryPovm::new(p.clone()).unwrap()).unwrap();
    assert_eq!(pi.eigenvalues(), vec![1.0, 0.0]);
    assert!(linalg::max_abs_diff(&pi.pairs()[0].1, &p) < 1e-12);

    let scalar = proj_impl(&BinaryPovm::new(linalg::identity(2) * c(0.3)).unwrap()).unwrap();
    assert_eq!(scalar.pairs().len(), 1);
    assert!((scalar.pairs()[0].0 - 0.3).abs() < 1e-12);
    assert!(linalg::max_abs_diff(&scalar.pairs()[0].1, &linalg::identity(2)) < 1e-12);

    assert!(matches!(
        BinaryPovm::new(linalg::identity(2) * c(1.5)),
        Err(crate::Error::InvalidPovm(_))
    ));
}

#[test]
fn spectral_reconstruction_and_orthogonality() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for d in [2, 4, 8, 16, 32, 64] {
        let povm = random_contraction(d, &mut rng);
        let pi = proj_impl(&povm).unwrap();
        assert!(linalg::max_abs_diff(&pi.reconstruct(), povm.operator()) < 1e-8);
        let pairs = pi.pairs();
        for i in 0..pairs.len() {
            for j in 0..i {
                let prod = &pairs[i].1 * &pairs[j].1;
                assert!(prod.iter().all(|z| z.norm() < 1e-8));
            }
        }
        let sum = pairs.iter().fold(CMatrix::zeros(d, d), |a, (_, p)| a + p);
        assert!(linalg::max_abs_diff(&sum, &linalg::identity(d)) < 1e-8);
    }
}

#[test]
fn proj_impl_reproduces_povm_statistics() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for d in [2, 4, 8, 16] {
        let povm = random_contraction(d, &mut rng);
        let pi = proj_impl(&povm).unwrap();
        let s = random_mixed(
            RegisterLayout::single("q", d.trailing_zeros() as usize),
            3,
            &mut rng,
        );
        let exact = povm.accept_probability(&s, &["q"]).unwrap();
        let shots = 10_000;
        let mut total = 0.0;
        let mut sq = 0.0;
        for _ in 0..shots {
            let (p, _) = apply_proj_impl(&pi, &s, &mut rng).unwrap();
            total += p;
            sq += p * p;
        }
        let mean = total / shots as f64;
        let var = sq / shots as f64 - mean * mean;
        let sigma = (var / shots as f64).sqrt().max(1e-12);
        assert!(
            (mean - exact).abs() <= 3.0 * sigma,
            "d={d} mean={mean} exact={exact}"
        );
    }
}

#[test]
fn proj_impl_is_projective() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let povm = random_contraction(8, &mut rng);
    let pi = proj_impl(&povm).unwrap();
    for _ in 0..50 {
        let s = random_state(RegisterLayout::single("q", 3), &mut rng);
        let (p1, post) = apply_proj_impl(&pi, &s, &mut rng).unwrap();
        let (p2, post2) = apply_proj_impl(&pi, &post, &mut rng).unwrap();
        assert_eq!(p1, p2);
        assert!(post.fidelity(&post2).unwrap() > 1.0 - 1e-10);
    }
    // An eigenstate returns its eigenvalue and is left alone.
    let (vals, vecs) = linalg::hermitian_eigen(povm.operator()).unwrap();
    let eig =
        QuantumState::pure(RegisterLayout::single("q", 3), vecs.column(2).clone_owned()).unwrap();
    let (p, post) = apply_proj_impl(&pi, &eig, &mut rng).unwrap();
    assert!((p - vals[2]).abs() < 1e-9);
    assert!(post.fidelity(&eig).unwrap() > 1.0 - 1e-10);
}

#[test]
fn threshold_examples_and_monotonicity() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let povm = random_contraction(8, &mut rng);
    let pi = proj_impl(&povm).unwrap();
    assert!(linalg::max_abs_diff(&threshold_impl(&pi, 0.0).unwrap(), &linalg::identity(8)) < 1e-9);
    let strict = BinaryPovm::new(povm.operator() * c(0.99)).unwrap();
    let t = threshold_impl(&proj_impl(&strict).unwrap(), 1.0 + 1e-6).unwrap();
    assert!(t.iter().all(|z| z.norm() < 1e-12));
    let s = random_mixed(RegisterLayout::single("q", 3), 4, &mut rng);
    let mut last = f64::INFINITY;
    for k in 0..=20 {
        let ti = threshold_impl(&pi, k as f64 / 20.0).unwrap();
        linalg::check_projector(&ti).unwrap();
        let tr = s.expectation_local(&["q"], &ti).unwrap().re;
        assert!(tr <= last + 1e-12);
        last = tr;
        if tr > 1e-6 {
            let post = s.apply_local(&["q"], &ti).unwrap().renormalized().unwrap();
            let again = post.expectation_local(&["q"], &ti).unwrap().re;
            assert!((again - 1.0).abs() < 1e-9);
        }
    }
    assert!(threshold_impl(&pi, -0.1).is_err());
}

fn toy_pirate(amps: [f64; 4], f: &ClassicalFunction) -> PirateOutput {
    let l = RegisterLayout::new([("R1", 1), ("R2", 1)]).unwrap();
    let v = CVector::from_iterator(4, amps.iter().map(|&a| c(a)));
    let s = QuantumState::pure(l, v).unwrap();
    PirateOutput::new(s, toy_evaluator("R1", f), toy_evaluator("R2", f)).unwrap()
}

#[test]
fn toy_threshold_is_the_good_program_projector() {
    let f = ClassicalFunction::new(1, vec![0, 1, 1, 0]).unwrap();
    let p = goodness_povm(&toy_evaluator("r", &f), &f, &uniform_inputs(4)).unwrap();
    let ti = threshold_impl(&proj_impl(&p).unwrap(), 0.5).unwrap();
    let want = CMatrix::from_diagonal(&CVector::from_vec(vec![ONE, ZERO]));
    assert!(linalg::max_abs_diff(&ti, &want) < 1e-12);
}

#[test]
fn splitting_attacks_on_the_toy_program() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let f = ClassicalFunction::new(1, vec![0, 1, 1, 0]).unwrap();
    let d = uniform_inputs(4);
    let h = FRAC_1_SQRT_2;
    let swap = toy_pirate([0.0, h, h, 0.0], &f);
    let corr = toy_pirate([(1.0f64 / 3.0).sqrt(), 0.0, 0.0, (2.0f64 / 3.0).sqrt()], &f);
    let good = toy_pirate([1.0, 0.0, 0.0, 0.0], &f);
    let p1 = goodness_povm(&swap.first, &f, &d).unwrap();
    let p2 = goodness_povm(&swap.second, &f, &d).unwrap();
    for k in 1..=10 {
        let gamma = k as f64 / 10.0;
        let c = joint_threshold_measure(&corr, &p1, &p2, gamma, &mut rng).unwrap();
        assert!((c.both_good - 1.0 / 3.0).abs() < 1e-9);
        let g = joint_threshold_measure(&good, &p1, &p2, gamma, &mut rng).unwrap();
        assert_eq!((g.b1, g.b2), (0, 0));
        if gamma > 0.5 {
            let s = joint_threshold_measure(&swap, &p1, &p2, gamma, &mut rng).unwrap();
            assert!(s.both_good.abs() < 1e-9);
            assert!((s.b1, s.b2) != (0, 0));
        }
    }
}

#[test]
fn joint_threshold_is_order_independent_on_entangled_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let l = RegisterLayout::new([("R1", 2), ("R2", 2)]).unwrap();
    for _ in 0..20 {
        let t1 =
            threshold_impl(&proj_impl(&random_contraction(4, &mut rng)).unwrap(), 0.5).unwrap();
        let t2 =
            threshold_impl(&proj_impl(&random_contraction(4, &mut rng)).unwrap(), 0.5).unwrap();
        let s = random_mixed(l.clone(), 3, &mut rng);
        let joint = joint_outcome_probabilities(&s, ("R1", "R2"), &t1, &t2).unwrap();
        for order in [true, false] {
            let seq = sequential_outcome_probabilities(&s, ("R1", "R2"), &t1, &t2, order).unwrap();
            for a in 0..2 {
                for b in 0..2 {
                    assert!((seq[a][b] - joint[a][b]).abs() < 1e-9);
                }
            }
        }
        if joint[0][0] > 1e-6 {
            let post = s
                .apply_local(&["R1", "R2"], &linalg::kron(&t1, &t2))
                .unwrap()
                .renormalized()
                .unwrap();
            let again = joint_outcome_probabilities(&post, ("R1", "R2"), &t1, &t2).unwrap();
            assert!((again[0][0] - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn controlled_projection_forms_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let a = random_projector(4, 1, &mut rng);
    let b = random_projector(4, 2, &mut rng);
    let single = ControlledProjection::new(vec![(1.0, a.clone())]).unwrap();
    assert!(linalg::max_abs_diff(single.mixture().operator(), &a) < 1e-15);
    let fam = ControlledProjection::new(vec![(0.5, a.clone()), (0.5, b.clone())]).unwrap();
    let s = random_mixed(RegisterLayout::single("q", 2), 2, &mut rng);
    let mix = fam.mixture().accept_probability(&s, &["q"]).unwrap();
    let lin = 0.5 * s.expectation_local(&["q"], &a).unwrap().re
        + 0.5 * s.expectation_local(&["q"], &b).unwrap().re;
    assert!((mix - lin).abs() < 1e-12);

    // Control-register operator with the coin state reproduces the mixture.
    let coin = fam.coin_state();
    let cl = RegisterLayout::single("coin", fam.coin_qubits());
    let cs = QuantumState::pure(cl, coin).unwrap().tensor(&s).unwrap();
    let via_control = cs
        .expectation_local(&["coin", "q"], &fam.control_operator())
        .unwrap()
        .re;
    assert!((via_control - mix).abs() < 1e-12);

    let shots = 10_000u64;
    let (mut n1, mut n2) = (0u64, 0u64);
    for _ in 0..shots {
        n1 += (fam.sample_with_control(&s, &["q"], &mut rng).unwrap() == 0) as u64;
        n2 += (fam.sample_mixture(&s, &["q"], &mut rng).unwrap() == 0) as u64;
    }
    let (r1, r2) = (n1 as f64 / shots as f64, n2 as f64 / shots as f64);
    let sigma = (2.0f64).sqrt() * binomial_sigma_floored(mix, shots);
    assert!((r1 - r2).abs() <= 3.0 * sigma, "{r1} vs {r2}");

    assert!(ControlledProjection::new(vec![(0.7, a)]).is_err());
    let too_many = vec![(1.0 / 5000.0, linalg::identity(1)); 5000];
    assert!(matches!(
        ControlledProjection::new(too_many),
        Err(crate::Error::Resource { .. })
    ));
}

#[test]
fn dilation_preserves_the_mixture() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let fam = ControlledProjection::new(vec![
        (0.25, random_contraction(4, &mut rng).operator().clone()),
        (0.75, random_contraction(4, &mut rng).operator().clone()),
    ])
    .unwrap();
    let dil = ProjectiveFamily::dilate(&fam).unwrap();
    assert_eq!(dil.work_dim(), 2);
    for (_, e) in dil.coins() {
        linalg::check_projector(e).unwrap();
    }
    assert!(linalg::max_abs_diff(dil.mixture().operator(), fam.mixture().operator()) < 1e-9);
}

fn noncommuting_family() -> ProjectiveFamily {
    let zero = CMatrix::from_diagonal(&CVector::from_vec(vec![ONE, ZERO]));
    let plus = CMatrix::from_element(2, 2, c(0.5));
    ProjectiveFamily::from_projectors(vec![(0.5, zero), (0.5, plus)]).unwrap()
}

#[test]
fn api_on_eigenstates() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let l = RegisterLayout::single("q", 1);
    let id = ProjectiveFamily::from_projectors(vec![(1.0, linalg::identity(2))]).unwrap();
    let s = random_state(l.clone(), &mut rng);
    let out = sampled_api(&s, &["q"], &id, 0.1, 0.05, &mut rng).unwrap();
    assert_eq!(out.estimate, 1.0);
    assert!(out.post.fidelity(&s).unwrap() > 1.0 - 1e-10);
    assert_eq!(out.rounds, 738);

    // P_D = ½|0⟩⟨0| + ½|+⟩⟨+| has eigenvalues ½ ± 1/(2√2).
    let fam = noncommuting_family();
    let (vals, vecs) = linalg::hermitian_eigen(fam.mixture().operator()).unwrap();
    assert!((vals[0] - (0.5 + 0.5 * FRAC_1_SQRT_2)).abs() < 1e-12);
    for (k, &val) in vals.iter().enumerate().take(2) {
        let eig = QuantumState::pure(l.clone(), vecs.column(k).clone_owned()).unwrap();
        let runs = 200;
        let mut close = 0;
        for _ in 0..runs {
            let out = sampled_api(&eig, &["q"], &fam, 0.1, 0.05, &mut rng).unwrap();
            close += ((out.estimate - val).abs() <= 0.1) as usize;
            assert!(out.post.fidelity(&eig).unwrap() > 1.0 - 1e-9);
        }
        assert!(
            close as f64 / runs as f64 >= 0.95,
            "eigenvalue {}: {close}/{runs}",
            val
        );
    }
}

#[test]
fn api_is_almost_projective_with_spectators() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let l = RegisterLayout::new([("q", 2), ("e", 1)]).unwrap();
    let fam = ProjectiveFamily::from_projectors(vec![
        (0.3, random_projector(4, 1, &mut rng)),
        (0.3, random_projector(4, 2, &mut rng)),
        (0.4, random_projector(4, 3, &mut rng)),
    ])
    .unwrap();
    let runs = 100;
    let mut close = 0;
    for _ in 0..runs {
        let s = random_state(l.clone(), &mut rng);
        let a = sampled_api(&s, &["q"], &fam, 0.1, 0.05, &mut rng).unwrap();
        let b = sampled_api(&a.post, &["q"], &fam, 0.1, 0.05, &mut rng).unwrap();
        close += ((a.estimate - b.estimate).abs() <= 0.1) as usize;
    }
    let rate = close as f64 / runs as f64;
    assert!(
        rate >= 0.95 - 3.0 * binomial_sigma_floored(0.95, runs as u64),
        "{rate}"
    );
}

#[test]
fn api_accepts_dilated_families_and_mixed_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let fam = ControlledProjection::new(vec![
        (0.5, linalg::identity(2) * c(0.2)),
        (0.5, linalg::identity(2) * c(0.6)),
    ])
    .unwrap();
    let dil = ProjectiveFamily::from_family(&fam).unwrap();
    assert_eq!(dil.work_dim(), 2);
    let s = random_mixed(RegisterLayout::single("q", 1), 2, &mut rng);
    let mut close = 0;
    for _ in 0..100 {
        let out = sampled_api(&s, &["q"], &dil, 0.1, 0.05, &mut rng).unwrap();
        close += ((out.estimate - 0.4).abs() <= 0.1) as usize;
        assert!(out.post.is_pure());
    }
    assert!(close >= 90);
    let (bit, _) = approx_threshold(&s, &["q"], &dil, 0.9, 0.1, 0.05, &mut rng).unwrap();
    assert_eq!(bit, 1);
}

#[test]
fn measurement_report_json() {
    let r = MeasurementReport::sampled(0.5, 30, 100);
    let v = serde_json::to_value(&r).unwrap();
    assert_eq!(v["gamma"], 0.5);
    assert!(v["trace"].is_null());
    assert_eq!(v["shots"], 100);
    assert_eq!(v["ci95"].as_array().unwrap().len(), 2);
    let back: MeasurementReport = serde_json::from_value(v).unwrap();
    assert_eq!(back, r);
    let e = MeasurementReport::exact(0.9, 0.25);
    assert_eq!(e.ci95, [0.25, 0.25]);
}

#[test]
fn pirate_output_validates_registers() {
    let f = ClassicalFunction::new(1, vec![0, 1]).unwrap();
    let l = RegisterLayout::new([("R1", 1), ("R2", 2)]).unwrap();
    let s = QuantumState::zero(l).unwrap();
    assert!(
        PirateOutput::new(s.clone(), toy_evaluator("R1", &f), toy_evaluator("R2", &f)).is_err()
    );
    assert!(PirateOutput::new(s, toy_evaluator("R1", &f), toy_evaluator("R1", &f)).is_err());
    let _ = C64::new(0.0, 0.0);
}
