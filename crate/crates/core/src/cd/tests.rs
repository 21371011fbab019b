use super::*;
use crate::games::GameReport;
use crate::linalg::{self, max_abs_diff, CMatrix};
use crate::measure::{goodness_povm_predicate, proj_impl, threshold_impl};
use crate::stats::binomial_sigma_floored;
use rand::SeedableRng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn within_3_sigma(r: &GameReport, p: f64) -> bool {
    (r.win_rate - p).abs() <= 3.0 * binomial_sigma_floored(p, r.trials)
}

fn diag_u64(r: &GameReport, path: &[&str]) -> u64 {
    let mut v = &r.diagnostics[path[0]];
    for k in &path[1..] {
        v = &v[*k];
    }
    v.as_u64().unwrap()
}

/// `|A⟩⟨A|` from the subspace's members, enumerated by brute force.
fn subspace_projector(a: &F2Subspace) -> CMatrix {
    let dim = 1usize << a.ambient_dim();
    let members: Vec<usize> = (0..dim).filter(|&u| a.contains_bits(u as u64)).collect();
    let mut m = CMatrix::zeros(dim, dim);
    let w = 1.0 / members.len() as f64;
    for &i in &members {
        for &j in &members {
            m[(i, j)] = c(w);
        }
    }
    m
}

#[test]
fn setup_examples() {
    let cd = ToyCd::toy(8, 64, 8).unwrap();
    let (pk, sk) = cd_setup(&cd, &mut rng(1)).unwrap();
    assert_eq!(pk.xk, sk.mk.extraction_key());
    assert_eq!(pk.xk.positions.len(), MARK_POSITIONS);
    assert!(pk.xk.positions.windows(2).all(|w| w[0] < w[1]));
    assert!(pk.xk.positions.iter().all(|&h| h < 64));
    let wide = CopyDetection {
        wm: ToyWatermark::new(64, 2).unwrap(),
        qm: ToySubspaceMoney::new(8, 3).unwrap(),
    };
    assert!(cd_setup(&wide, &mut rng(1)).is_err());
    assert!(ToyWatermark::new(7, 2).is_err());
    assert!(matches!(
        ToySubspaceMoney::new(5, 2),
        Err(Error::OddLambda(5))
    ));
}

#[test]
fn verification_is_the_subspace_state_projector() {
    let qm = ToySubspaceMoney::new(4, 3).unwrap();
    let (bank, ver) = qm.setup(&mut rng(2)).unwrap();
    for s in 0..8 {
        let a = ver.subspace(s).unwrap();
        let dual = a.dual();
        let mut op = CMatrix::zeros(16, 16);
        let mut literal = CMatrix::zeros(16, 16);
        let mut reject = CMatrix::zeros(16, 16);
        for col in 0..16 {
            let basis = QuantumState::basis_index(RegisterLayout::single("n", 4), col).unwrap();
            let out = qm.ver_branch(&ver, s, &basis, "n").unwrap().unwrap();
            op.set_column(col, out.amplitudes().unwrap());
            let rej = qm.reject_branch(&ver, s, &basis, "n").unwrap();
            reject.set_column(col, rej.amplitudes().unwrap());
            let seq = basis
                .project_basis(|i| a.contains_bits(i as u64))
                .hadamard_all("n")
                .unwrap()
                .project_basis(|i| dual.contains_bits(i as u64))
                .hadamard_all("n")
                .unwrap();
            literal.set_column(col, seq.amplitudes().unwrap());
        }
        let want = subspace_projector(&a);
        assert!(max_abs_diff(&op, &want) < 1e-12, "serial {s}");
        assert!(max_abs_diff(&literal, &want) < 1e-12, "serial {s}");
        assert!(max_abs_diff(&reject, &(linalg::identity(16) - &want)) < 1e-12);
        let note = qm.gen_serial(&bank, s).unwrap();
        let p = qm
            .ver_branch(&ver, s, &note, NOTE_REGISTER)
            .unwrap()
            .unwrap()
            .trace();
        assert!((p - 1.0).abs() < 1e-12);
    }
    let z = QuantumState::zero(RegisterLayout::single("n", 4)).unwrap();
    assert!(qm.ver_branch(&ver, 8, &z, "n").unwrap().is_none());
    let narrow = QuantumState::zero(RegisterLayout::single("n", 3)).unwrap();
    assert!(qm.ver_branch(&ver, 0, &narrow, "n").unwrap().is_none());
}

#[test]
fn generate_marks_with_the_serial() {
    let cd = ToyCd::toy(8, 64, 8).unwrap();
    let mut r = rng(3);
    let (pk, sk) = cd_setup(&cd, &mut r).unwrap();
    for _ in 0..20 {
        let (f, aux) = cd.wm.samp(&mut r).unwrap();
        let p = cd_generate(&cd, &sk, &f, &mut r).unwrap();
        assert_eq!(cd.wm.extract(&pk.xk, &aux, &p.table), Some(p.serial));
        let diff = (0..64).filter(|&x| p.table.eval(x) != f.eval(x)).count();
        assert!(diff <= MARK_POSITIONS);
        assert!((0..64).all(|x| p.compute(x) == p.table.eval(x)));
        let c = check_branch(&cd, &pk, &aux, &p.table, p.serial, &p.state, NOTE_REGISTER).unwrap();
        assert!((c.accept_prob - 1.0).abs() < 1e-12);
    }
}

#[test]
fn check_examples() {
    let cd = ToyCd::toy(8, 64, 8).unwrap();
    let mut r = rng(4);
    let (pk, sk) = cd_setup(&cd, &mut r).unwrap();
    let (f, aux) = cd.wm.samp(&mut r).unwrap();
    let p = cd_generate(&cd, &sk, &f, &mut r).unwrap();
    for _ in 0..20 {
        let (b, post) = cd_check(&cd, &pk, &aux, &p, &mut r).unwrap();
        assert_eq!(b, 0);
        let (b2, _) = cd_check(&cd, &pk, &aux, &post, &mut r).unwrap();
        assert_eq!(b2, 0);
    }

    let other = (p.serial + 1) % 256;
    let remarked = CdProgram {
        table: cd.wm.mark(&sk.mk, &f, other).unwrap(),
        ..p.clone()
    };
    assert_eq!(cd_check(&cd, &pk, &aux, &remarked, &mut r).unwrap().0, 1);
    let wrong_shape = CdProgram {
        table: ClassicalFunction::new(8, vec![0; 32]).unwrap(),
        ..p.clone()
    };
    assert_eq!(cd_check(&cd, &pk, &aux, &wrong_shape, &mut r).unwrap().0, 1);
    let no_note = CdProgram {
        state: QuantumState::zero(RegisterLayout::single("x", 8)).unwrap(),
        ..p.clone()
    };
    assert_eq!(cd_check(&cd, &pk, &aux, &no_note, &mut r).unwrap().0, 1);
}

#[test]
fn measured_note_passes_with_inverse_subspace_size() {
    let cd = ToyCd::toy(8, 64, 8).unwrap();
    let mut r = rng(5);
    let (pk, sk) = cd_setup(&cd, &mut r).unwrap();
    let (f, aux) = cd.wm.samp(&mut r).unwrap();
    let p = cd_generate(&cd, &sk, &f, &mut r).unwrap();
    let a = pk.verifier.subspace(p.serial).unwrap();
    let proj = subspace_projector(&a);
    for u in 0..256usize {
        let basis = QuantumState::basis_index(RegisterLayout::single(NOTE_REGISTER, 8), u).unwrap();
        let c = check_branch(&cd, &pk, &aux, &p.table, p.serial, &basis, NOTE_REGISTER).unwrap();
        assert!((c.accept_prob - proj[(u, u)].re).abs() < 1e-12);
        let want = if a.contains_bits(u as u64) {
            1.0 / 16.0
        } else {
            0.0
        };
        assert!((c.accept_prob - want).abs() < 1e-12);
    }
    let copy = CdProgram {
        state: QuantumState::basis_index(RegisterLayout::single(NOTE_REGISTER, 8), 0).unwrap(),
        ..p
    };
    let mut passed = 0;
    for _ in 0..4000 {
        let (b, post) = cd_check(&cd, &pk, &aux, &copy, &mut r).unwrap();
        if b == 0 {
            passed += 1;
            let again = cd
                .qm
                .ver_branch(&pk.verifier, copy.serial, &post.state, NOTE_REGISTER)
                .unwrap()
                .unwrap();
            assert!((again.trace() - 1.0).abs() < 1e-9);
        } else {
            let again = cd
                .qm
                .ver_branch(&pk.verifier, copy.serial, &post.state, NOTE_REGISTER)
                .unwrap()
                .unwrap();
            assert!(again.trace() < 1e-9);
        }
    }
    let rate = passed as f64 / 4000.0;
    assert!((rate - 1.0 / 16.0).abs() <= 3.0 * binomial_sigma_floored(1.0 / 16.0, 4000));
}

#[test]
fn watermark_correctness_triple() {
    for (domain, width) in [(64, 8), (256, 3)] {
        let wm = ToyWatermark::new(domain, width).unwrap();
        let tol = wm.tolerance();
        let mut r = rng(6);
        let (mut worst_diff, mut wrong_extract, mut spurious) = (0.0f64, 0, 0);
        let samples = 1000;
        for _ in 0..samples {
            let (xk, mk) = wm.setup(&mut r).unwrap();
            let (f, aux) = wm.samp(&mut r).unwrap();
            let tau = r.gen_range(0..wm.message_space());
            let marked = wm.mark(&mk, &f, tau).unwrap();
            let diff = (0..domain as u64)
                .filter(|&x| marked.eval(x) != f.eval(x))
                .count();
            worst_diff = worst_diff.max(diff as f64 / domain as f64);
            wrong_extract += (wm.extract(&xk, &aux, &marked) != Some(tau)) as usize;
            spurious += wm.extract(&xk, &aux, &f).is_some() as usize;
        }
        assert!(worst_diff <= tol);
        assert_eq!(wrong_extract, 0);
        assert!(
            spurious as f64 / samples as f64 <= tol,
            "{spurious} spurious extractions"
        );
    }
}

#[test]
fn spurious_extraction_matches_enumeration() {
    // Enumerate all 4-tuples of 3-bit values.
    let q = 8u64;
    let mut hits = 0u64;
    for code in 0..q.pow(4) {
        let v: Vec<u64> = (0..4).map(|i| (code / q.pow(i)) % q).collect();
        hits += v
            .iter()
            .any(|&a| v.iter().filter(|&&b| b == a).count() >= 3) as u64;
    }
    let exact = hits as f64 / q.pow(4) as f64;
    let wm = ToyWatermark::new(256, 3).unwrap();
    assert!((wm.spurious_extract_probability() - exact).abs() < 1e-12);
}

#[test]
fn table_goodness_is_a_scalar_povm() {
    let mut r = rng(7);
    let f = ClassicalFunction::random(16, 2, &mut r).unwrap();
    let g = ClassicalFunction::new(
        2,
        f.table()
            .iter()
            .enumerate()
            .map(|(x, &y)| if x < 5 { y ^ 1 } else { y })
            .collect(),
    )
    .unwrap();
    let test = TableTest::uniform(&f);
    let p = test.success(&g);
    assert!((p - 11.0 / 16.0).abs() < 1e-12);
    let prog = CdProgram {
        table: g,
        serial: 0,
        state: QuantumState::zero(RegisterLayout::single(NOTE_REGISTER, 2)).unwrap(),
    };
    let povm = goodness_povm_predicate(&prog.evaluator(), &test.predicate()).unwrap();
    assert!(max_abs_diff(povm.operator(), &(linalg::identity(2) * c(p))) < 1e-12);
    for (gamma, want) in [(0.5, 1.0), (11.0 / 16.0, 1.0), (0.7, 0.0)] {
        let ti = threshold_impl(&proj_impl(&povm).unwrap(), gamma).unwrap();
        assert!(
            (linalg::trace(&ti).re / 2.0 - want).abs() < 1e-9,
            "γ = {gamma}"
        );
    }
}

#[test]
fn duplicate_everything_is_caught_and_lands_on_e_prime() {
    let cfg = CdConfig {
        trials: 2000,
        seed: 8,
        ..CdConfig::default()
    };
    let r = run_copy_detection_game(&cfg, &DuplicateEverything).unwrap();
    let derived = 1.0 / 256.0;
    assert_eq!(r.derived_expectation, Some(derived));
    assert!(r.win_rate <= 1.0 / 16.0 + 3.0 * binomial_sigma_floored(1.0 / 16.0, r.trials));
    assert!(within_3_sigma(&r, derived), "{}", r.win_rate);
    let mean = r.diagnostics["mean_exact_win_probability"]
        .as_f64()
        .unwrap();
    assert!((mean - derived).abs() < 1e-12);
    assert_eq!(diag_u64(&r, &["claimed_events", "E_prime"]), cfg.trials);
    assert_eq!(diag_u64(&r, &["events_on_pass", "E"]), 0);
    assert_eq!(diag_u64(&r, &["dichotomy_violations"]), 0);
    if let Some(m) = r.diagnostics["recheck_min"].as_f64() {
        assert!(m >= 1.0 - 1e-9);
    }
}

#[test]
fn mark_eraser_lands_on_e() {
    let cfg = CdConfig {
        trials: 2000,
        seed: 9,
        ..CdConfig::default()
    };
    let r = run_copy_detection_game(&cfg, &MarkEraser).unwrap();
    assert_eq!(r.derived_expectation, Some(1.0 / 16.0));
    assert!(within_3_sigma(&r, 1.0 / 16.0), "{}", r.win_rate);
    assert_eq!(diag_u64(&r, &["claimed_events", "E"]), cfg.trials);
    assert_eq!(diag_u64(&r, &["events_on_pass", "E_prime"]), 0);
    assert!(diag_u64(&r, &["events_on_pass", "E"]) > 0);
    assert!(r.diagnostics["recheck_min"].as_f64().unwrap() >= 1.0 - 1e-9);
}

#[test]
fn honest_plus_dummy_never_wins() {
    let cfg = CdConfig {
        trials: 300,
        seed: 10,
        ..CdConfig::default()
    };
    assert_eq!(
        run_copy_detection_game(&cfg, &HonestPlusDummy)
            .unwrap()
            .wins,
        0
    );
}

struct Silent;

impl CdPirate for Silent {
    fn name(&self) -> &'static str {
        "silent"
    }

    fn play(&self, ch: CdChallenge<'_>, _: &mut dyn RngCore) -> Result<CdPirateOutput> {
        Ok(CdPirateOutput {
            programs: ch.programs,
            state: ch.state,
        })
    }
}

#[test]
fn config_and_protocol_errors() {
    let base = CdConfig::default();
    assert!(base.validate().is_ok());
    assert!(matches!(
        CdConfig {
            q: 2,
            ..base.clone()
        }
        .validate(),
        Err(Error::Resource { .. })
    ));
    assert!(CdConfig {
        q: 0,
        ..base.clone()
    }
    .validate()
    .is_err());
    assert!(CdConfig {
        gamma: 0.0,
        ..base.clone()
    }
    .validate()
    .is_err());
    let cfg = CdConfig { trials: 2, ..base };
    assert!(matches!(
        run_copy_detection_game(&cfg, &Silent),
        Err(Error::ProtocolViolation(_))
    ));
    assert!(cd_pirate("nope").is_err());
    for name in CD_PIRATES {
        assert_eq!(cd_pirate(name).unwrap().name(), *name);
    }
}

#[test]
fn q_two_at_small_lambda() {
    let cfg = CdConfig {
        lambda: 4,
        q: 2,
        trials: 2000,
        seed: 11,
        ..CdConfig::default()
    };
    let r = run_copy_detection_game(&cfg, &DuplicateEverything).unwrap();
    let derived = 0.25f64.powi(3);
    assert_eq!(r.derived_expectation, Some(derived));
    assert!(within_3_sigma(&r, derived), "{}", r.win_rate);
    assert_eq!(diag_u64(&r, &["claimed_events", "E_prime"]), cfg.trials);
}
