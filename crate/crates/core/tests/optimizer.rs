mod common;

use aqec::adjoint::objective;
use aqec::ansatz::BasisFamily;
use aqec::hilbert::*;
use aqec::objective::LogicalPair;
use aqec::optimizer::*;
use common::*;
use proptest::prelude::*;

fn toy(iters: usize, seed: u64) -> SearchConfig {
    SearchConfig {
        cutoff: 2,
        family: BasisFamily::Distance { d: 1 },
        t_final: 0.2,
        iters,
        seed,
        lr: 0.01,
        lr_final: 0.005,
        steps_per_unit: 200,
        checkpoint_every: 10,
        ..SearchConfig::default()
    }
}

fn reevaluate(cfg: &SearchConfig, c: &Checkpoint) -> f64 {
    let basis = cfg.basis().unwrap();
    let model = search_model(&basis, c.alpha.clone(), cfg.kappa(), cfg.kappa_q()).unwrap();
    let pair = LogicalPair::new(unpack_state(&c.psi0), unpack_state(&c.psi1)).unwrap();
    objective(&model, &pair, cfg.t_final, cfg.nsteps(), cfg.modified).unwrap()
}

#[test]
fn adam_first_step_on_two_vector() {
    let mut p = vec![0.0, 0.0];
    let mut s = AdamState::new(2);
    adam_step(&mut p, &[2.0, -1e-3], &mut s, 0.01).unwrap();
    // bias-corrected m̂ = g and v̂ = g², so the step is lr·g/(|g| + ε)
    assert!((p[0] - 0.01 * 2.0 / (2.0 + 1e-8)).abs() < 1e-16);
    assert!((p[1] + 0.01 * 1e-3 / (1e-3 + 1e-8)).abs() < 1e-16);
    assert!(adam_step(&mut p, &[1.0], &mut s, 0.01).is_err());
}

#[test]
fn zero_gradient_leaves_parameters_and_decays_moments() {
    let mut p = vec![0.3, -0.2];
    let mut s = AdamState::new(2);
    adam_step(&mut p, &[1.0, 1.0], &mut s, 0.1).unwrap();
    let (m, v) = (s.m.clone(), s.v.clone());
    let mut q = vec![0.3, -0.2];
    let mut z = AdamState::new(2);
    adam_step(&mut q, &[0.0, 0.0], &mut z, 0.1).unwrap();
    assert_eq!(q, vec![0.3, -0.2]);
    let before = p.clone();
    adam_step(&mut p, &[0.0, 0.0], &mut s, 0.1).unwrap();
    assert!(s.m[0] < m[0] && s.v[0] < v[0]);
    assert_ne!(p, before);
}

#[test]
fn reorthogonalize_examples() {
    let mut r = rng(1);
    let pair = random_pair(&mut r, 6);
    let same = reorthogonalize(&pair.psi0, &pair.psi1).unwrap();
    let d0 = same.psi0.iter().zip(pair.psi0.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    let d1 = same.psi1.iter().zip(pair.psi1.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(d0 < 1e-14 && d1 < 1e-14);

    // ψ₁ = ψ₀ + εχ with χ ⊥ ψ₀ comes back as χ̂
    let chi = pair.psi1.clone();
    let eps = 1e-3;
    let out = reorthogonalize(&pair.psi0, &(&pair.psi0 + &chi.mapv(|z| z * eps))).unwrap();
    let ov = inner(&chi, &out.psi1);
    assert!((ov - C64::new(1.0, 0.0)).norm() < 1e-10);
}

#[test]
fn zero_iterations_return_seeded_start() {
    let cfg = toy(0, 3);
    let res = train(&cfg).unwrap();
    let (alpha, pair) = initial_point(&cfg, &cfg.basis().unwrap()).unwrap();
    assert_eq!(res.alpha, alpha);
    assert_eq!(res.pair.psi0, pair.psi0);
    assert_eq!(res.fidelity_history.len(), 1);
    assert_eq!(res.best_iteration, 0);
    assert!(res.alpha.iter().all(|a| a.abs() <= 0.1 * cfg.bound() + 1e-12));
}

#[test]
fn toy_search_improves() {
    let res = train(&toy(50, 0)).unwrap();
    let h = &res.fidelity_history;
    assert_eq!(h.len(), 51);
    assert!(h.iter().all(|f| (0.0..=1.0).contains(f)));
    assert!(h.last().unwrap() >= &h[0], "{} -> {}", h[0], h.last().unwrap());
    assert!(res.objective >= h[0]);
    assert!(res.aborted.is_none());
}

#[test]
fn search_is_deterministic() {
    let a = train(&toy(8, 5)).unwrap();
    let b = train(&toy(8, 5)).unwrap();
    assert_eq!(a.fidelity_history, b.fidelity_history);
    assert_eq!(a.alpha, b.alpha);
    assert_eq!(a.pair.psi1, b.pair.psi1);
}

#[test]
fn checkpoints_match_reevaluation() {
    let cfg = toy(20, 2);
    let mut seen = Vec::new();
    let res = train_with(&cfg, |c| seen.push(c.iteration)).unwrap();
    assert_eq!(seen, vec![0, 10, 20]);
    for c in &res.checkpoints {
        assert!((reevaluate(&cfg, c) - res.fidelity_history[c.iteration]).abs() < 1e-10);
        assert!(c.alpha.iter().all(|a| a.abs() <= cfg.bound()));
        let pair = LogicalPair::new(unpack_state(&c.psi0), unpack_state(&c.psi1)).unwrap();
        assert!(inner(&pair.psi0, &pair.psi1).norm() < 1e-12);
        assert!((norm(&pair.psi0) - 1.0).abs() < 1e-12 && (norm(&pair.psi1) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn invalid_configs_rejected() {
    for cfg in [
        SearchConfig { kappa_mhz: -1.0, ..toy(1, 0) },
        SearchConfig { t_final: 0.0, ..toy(1, 0) },
        SearchConfig { lr_final: 0.1, ..toy(1, 0) },
        SearchConfig { family: BasisFamily::Distance { d: 5 }, ..toy(1, 0) },
    ] {
        assert!(train(&cfg).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reorthogonalized_pairs_are_orthonormal(seed in any::<u64>(), dim in 2usize..12) {
        let mut r = rng(seed);
        let (a, b) = (random_state(&mut r, dim).mapv(|z| z * 3.0), random_state(&mut r, dim));
        let p = reorthogonalize(&a, &b).unwrap();
        prop_assert!(inner(&p.psi0, &p.psi1).norm() < 1e-14);
        prop_assert!((norm(&p.psi0) - 1.0).abs() < 1e-14);
        prop_assert!((norm(&p.psi1) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn learning_rate_decays_linearly(iters in 2usize..500, lr in 1e-4f64..0.1, frac in 0.05f64..1.0) {
        let c = SearchConfig { iters, lr, lr_final: lr * frac, ..SearchConfig::default() };
        prop_assert!((c.learning_rate(0) - lr).abs() < 1e-15);
        prop_assert!((c.learning_rate(iters - 1) - lr * frac).abs() < 1e-12);
        for k in 1..iters {
            prop_assert!(c.learning_rate(k) <= c.learning_rate(k - 1) + 1e-15);
        }
    }
}
