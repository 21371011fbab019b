use super::*;
use crate::linalg::{self, max_abs_diff};
use crate::measure::goodness_povm_predicate;
use crate::stats::binomial_sigma_floored;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn cfg(trials: u64) -> MoneyConfig {
    MoneyConfig {
        trials,
        ..MoneyConfig::default()
    }
}

#[test]
fn pke_decrypts_every_encryption() {
    let pke = ToyPke::new(8, 8, 256).unwrap();
    for seed in 0..20 {
        let (pk, sk) = pke.keygen(&mut rng(seed));
        let mut seen = std::collections::HashSet::new();
        for m in 0..8 {
            for r in 0..8 {
                let c = pke.enc(&pk, m, r).unwrap();
                assert!(c < 256);
                assert!(seen.insert(c), "ciphertext {c} reused");
                assert_eq!(pke.dec(&sk, c), Some(m));
            }
        }
        assert!(sk.dec.iter().all(|&m| m < 8));
    }
}

#[test]
fn pke_rejects_bad_parameters() {
    assert!(ToyPke::new(6, 8, 256).is_err());
    assert!(ToyPke::new(8, 64, 256).is_err());
    assert!(ToyPke::new(8, 0, 256).is_err());
    assert!(pke_enc_out_of_range());
}

fn pke_enc_out_of_range() -> bool {
    let pke = ToyPke::new(4, 2, 16).unwrap();
    let (pk, _) = pke.keygen(&mut rng(0));
    pke.enc(&pk, 4, 0).is_err() && pke.enc(&pk, 0, 2).is_err()
}

#[test]
fn honest_notes_verify() {
    let r = run_money_honest(&cfg(1000)).unwrap();
    assert!(r.win_rate >= 0.99, "accept rate {}", r.win_rate);
    assert_eq!(r.wins, 1000);
}

#[test]
fn honest_note_survives_repeated_verification() {
    let c = cfg(1);
    let scheme = ToyMoney::new(&c).unwrap();
    let mut r = rng(3);
    let (pk, sk) = money_keygen(&scheme, &mut r).unwrap();
    let mut note = money_gennote(&scheme, &sk, &mut r).unwrap();
    for _ in 0..5 {
        let (bit, post) = money_verify(&scheme, &pk, &note, &c, &mut r).unwrap();
        assert_eq!(bit, 0);
        assert!(
            (post.program.state.amplitudes().unwrap() - note.program.state.amplitudes().unwrap())
                .norm()
                < 1e-9
        );
        note = post;
    }
}

#[test]
fn garbage_tables_are_rejected() {
    let c = cfg(1);
    let scheme = ToyMoney::new(&c).unwrap();
    for seed in 0..30 {
        let mut r = rng(seed);
        let (pk, sk) = money_keygen(&scheme, &mut r).unwrap();
        let mut note = money_gennote(&scheme, &sk, &mut r).unwrap();
        note.program.table = ClassicalFunction::new(3, vec![0; 256]).unwrap();
        let (bit, _) = money_verify(&scheme, &pk, &note, &c, &mut r).unwrap();
        assert_eq!(bit, 1);
    }
}

#[test]
fn wrong_aux_is_rejected() {
    let c = cfg(1);
    let scheme = ToyMoney::new(&c).unwrap();
    let mut r = rng(1);
    let (pk, sk) = money_keygen(&scheme, &mut r).unwrap();
    let mut note = money_gennote(&scheme, &sk, &mut r).unwrap();
    note.aux.width = 2;
    assert_eq!(money_verify(&scheme, &pk, &note, &c, &mut r).unwrap().0, 1);
}

fn binomial_tail(p: f64, k: usize, need: usize) -> f64 {
    (need..=k)
        .map(|j| {
            let choose = (0..j).fold(1.0, |acc, i| acc * (k - i) as f64 / (i + 1) as f64);
            choose * p.powi(j as i32) * (1.0 - p).powi((k - j) as i32)
        })
        .sum()
}

#[test]
fn sampled_goodness_tracks_the_binomial_tail() {
    let c = MoneyConfig {
        sampled: true,
        k: 16,
        ..cfg(1)
    };
    let scheme = ToyMoney::new(&c).unwrap();
    let n = 400u64;
    for corrupt in [false, true] {
        let (mut hits, mut want) = (0u64, 0.0);
        for seed in 0..n {
            let mut r = rng(seed);
            let (pk, sk) = money_keygen(&scheme, &mut r).unwrap();
            let mut note = money_gennote(&scheme, &sk, &mut r).unwrap();
            if corrupt {
                let table = note
                    .program
                    .table
                    .table()
                    .iter()
                    .map(|&m| if m == 7 { 0 } else { m })
                    .collect();
                note.program.table = ClassicalFunction::new(3, table).unwrap();
            }
            let p = scheme
                .pke
                .decryption_test(&pk.pke)
                .unwrap()
                .success(&note.program.table);
            assert!(p >= if corrupt { 52.0 / 64.0 } else { 60.0 / 64.0 }, "{p}");
            want += binomial_tail(p, 16, 15);
            hits += u64::from(money_verify(&scheme, &pk, &note, &c, &mut r).unwrap().0 == 0);
        }
        let (rate, want) = (hits as f64 / n as f64, want / n as f64);
        assert!(
            (rate - want).abs() <= 3.0 * binomial_sigma_floored(want, n),
            "{rate} vs {want}"
        );
        assert!(rate < 0.99);
    }
}

#[test]
fn decryption_goodness_is_a_scalar_povm() {
    let c = cfg(1);
    let scheme = ToyMoney::new(&c).unwrap();
    let mut r = rng(11);
    let (pk, sk) = money_keygen(&scheme, &mut r).unwrap();
    let note = money_gennote(&scheme, &sk, &mut r).unwrap();
    let test = scheme.pke.decryption_test(&pk.pke).unwrap();
    assert!(test.success(&note.program.table) >= 60.0 / 64.0);
    let table: Vec<u64> = note
        .program
        .table
        .table()
        .iter()
        .map(|&m| if m < 2 { m ^ 1 } else { m })
        .collect();
    let bad = ClassicalFunction::new(3, table).unwrap();
    for t in [note.program.table.clone(), bad] {
        let p = test.success(&t);
        let prog = CdProgram {
            table: t,
            serial: note.program.serial,
            state: note.program.state.clone(),
        };
        let povm = goodness_povm_predicate(&prog.evaluator(), &test.predicate()).unwrap();
        let want = linalg::identity(2) * Complex64::new(p, 0.0);
        assert!(max_abs_diff(povm.operator(), &want) < 1e-12, "p = {p}");
    }
}

#[test]
fn measure_clone_pair_rarely_verifies() {
    let c = cfg(2000);
    let r = run_money_clone_game(&c, &MeasureClone).unwrap();
    let want = MeasureClone.expected_win(&c).unwrap();
    assert!((want - 1.0 / 256.0).abs() < 1e-15);
    let bound = 1.0 / 16.0 + 3.0 * binomial_sigma_floored(1.0 / 16.0, 2000);
    assert!(r.win_rate <= bound, "{}", r.win_rate);
    assert!((r.win_rate - want).abs() <= 3.0 * binomial_sigma_floored(want, 2000));
    let mean = r.diagnostics["mean_exact_win_probability"]
        .as_f64()
        .unwrap();
    assert!((mean - want).abs() < 1e-9, "{mean}");
}

#[test]
fn keep_and_forge_pair_verifies_at_the_forgery_rate() {
    let c = cfg(2000);
    let r = run_money_clone_game(&c, &KeepAndForge).unwrap();
    let want = KeepAndForge.expected_win(&c).unwrap();
    let bound = 1.0 / 16.0 + 3.0 * binomial_sigma_floored(1.0 / 16.0, 2000);
    assert!(r.win_rate <= bound, "{}", r.win_rate);
    assert!((r.win_rate - want).abs() <= 3.0 * binomial_sigma_floored(want, 2000));
    let mean = r.diagnostics["mean_exact_win_probability"]
        .as_f64()
        .unwrap();
    assert!((mean - want).abs() < 1e-9, "{mean}");
}

#[test]
fn clone_game_matches_the_copy_detection_game_trace() {
    let c = cfg(1);
    for name in MONEY_ATTACKS {
        let attack = money_attack(name).unwrap();
        let mut wins = 0;
        for seed in 0..300 {
            let a = clone_trial(&c, attack.as_ref(), &mut rng(seed))
                .unwrap()
                .win;
            let b = reduction_trial(&c, attack.as_ref(), &mut rng(seed)).unwrap();
            assert_eq!(a, b, "{name}, seed {seed}");
            wins += u64::from(a);
        }
        assert!(*name != "keep-and-forge" || wins > 0);
    }
}

#[test]
fn config_errors() {
    assert!(money_attack("nope").is_err());
    for bad in [
        MoneyConfig {
            lambda: 7,
            ..cfg(1)
        },
        MoneyConfig {
            msg_space: 6,
            ..cfg(1)
        },
        MoneyConfig {
            gamma: 0.0,
            ..cfg(1)
        },
        MoneyConfig { k: 0, ..cfg(1) },
        MoneyConfig {
            trials: 0,
            ..cfg(1)
        },
    ] {
        assert!(bad.validate().is_err(), "{bad:?}");
    }
}
