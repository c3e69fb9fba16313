mod common;

use std::f64::consts::PI;

use aqec::ansatz::{hamiltonian_distance, single_mode_block};
use aqec::codes::*;
use aqec::hilbert::*;
use aqec::lindblad::*;
use aqec::objective::*;
use approx::assert_abs_diff_eq;
use proptest::prelude::*;

const VARIANTS: [Sqrt3Variant; 2] = [Sqrt3Variant::One, Sqrt3Variant::Two];

fn number(cutoff: usize) -> Operator {
    let a = fock_annihilation(cutoff).unwrap();
    dagger(&a).dot(&a)
}

#[test]
fn listed_variant_one_coefficients() {
    let c = sqrt3_coefficients(Sqrt3Variant::One);
    for (got, listed) in [(c.a0, 0.650115), (c.a3, 0.759836), (c.a1, 0.891830), (c.a4, -0.381530), (c.ak, 0.243048)] {
        assert_abs_diff_eq!(got, listed, epsilon = 1e-5);
    }
}

#[test]
fn constraint_system_holds_for_both_variants() {
    for v in VARIANTS {
        for (name, r) in sqrt3_coefficients(v).constraint_residuals() {
            assert!(r.abs() < 1e-12, "{v:?} {name}: {r}");
        }
    }
}

#[test]
fn codewords_carry_sqrt3_photons() {
    for v in VARIANTS {
        let pair = sqrt3_code(v, 10).unwrap();
        let n = number(10);
        assert_abs_diff_eq!(expectation(&pair.psi0, &n, &pair.psi0).re, 3f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(expectation(&pair.psi1, &n, &pair.psi1).re, 3f64.sqrt(), epsilon = 1e-12);
        assert_eq!(inner(&pair.psi0, &pair.psi1).norm(), 0.0);
    }
    assert!(sqrt3_code(Sqrt3Variant::Two, 6).is_err());
}

#[test]
fn hamiltonian_is_local() {
    for v in VARIANTS {
        let c = sqrt3_construction(v, 10).unwrap();
        for ((m, n), x) in c.locality_entries() {
            assert!(x < 1e-12, "{v:?} H({m},{n}) = {x}");
        }
        assert_eq!(hamiltonian_distance(&c.h_tilde), 2);
        assert!(hamiltonian_distance(&c.h_tilde_with_stabilization()) <= 2);
        for n in c.normalizations {
            assert!(n.is_finite() && n > 0.0);
        }
    }
}

#[test]
fn joint_hamiltonian_scaling() {
    let scale = 2.0 * PI * 10.0;
    for stab in [false, true] {
        let (h, _) = sqrt3_hamiltonian(Sqrt3Variant::One, 9, scale, stab).unwrap();
        assert!(hermiticity_error(&h) < 1e-12);
        let block = single_mode_block(&h).unwrap();
        let peak = block.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert_abs_diff_eq!(peak, scale, epsilon = 1e-10);
        assert!(h.iter().map(|z| z.norm()).fold(0.0, f64::max) <= scale + 1e-10);
    }
    assert!(sqrt3_hamiltonian(Sqrt3Variant::One, 9, 0.0, true).is_err());
}

#[test]
fn corrected_transitions_map_errors_back() {
    let c = sqrt3_construction(Sqrt3Variant::One, 9).unwrap();
    let (p2, p3) = &c.error_pair;
    let a = fock_annihilation(9).unwrap();
    // âψ₀ ∝ ψ₂ and âψ₁ ∝ ψ₃
    for (src, err) in [(&c.pair.psi0, p2), (&c.pair.psi1, p3)] {
        let v = a.dot(src);
        assert_abs_diff_eq!(inner(err, &v).norm(), norm(&v), epsilon = 1e-12);
    }
    assert!(inner(p2, p3).norm() < 1e-14);
    // H̃ sends ψ₀ → ψ₂ and ψ₁ → ψ₃
    assert!(max_abs_diff_vec(&c.h_tilde.dot(&c.pair.psi0), p2) < 1e-12);
    assert!(max_abs_diff_vec(&c.h_tilde.dot(&c.pair.psi1), p3) < 1e-12);
}

fn max_abs_diff_vec(a: &StateVector, b: &StateVector) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn knill_laflamme_examples() {
    let a = fock_annihilation(10).unwrap();
    for v in VARIANTS {
        let rep = kl_check(&sqrt3_code(v, 10).unwrap(), std::slice::from_ref(&a), 1e-12).unwrap();
        assert!(rep.pass, "{v:?}: {}", rep.max_residual);
        let ada = rep.entries.iter().find(|e| e.e == 1 && e.e_prime == 1).unwrap();
        assert_abs_diff_eq!(ada.lambda[0], 3f64.sqrt(), epsilon = 1e-12);
    }
    let trivial = kl_check(&LogicalPair::basis_states(11, 0, 1), &[a], 1e-6).unwrap();
    assert!(!trivial.pass);
    // ⟨0|â|1⟩ = 1
    assert_abs_diff_eq!(trivial.max_residual, 1.0, epsilon = 1e-12);
}

fn effective(rate: f64, kappa: f64) -> (LindbladModel, Sqrt3Construction) {
    let c = sqrt3_construction(Sqrt3Variant::One, 9).unwrap();
    let m = effective_dissipator_model(&c.pair, (&c.error_pair.0, &c.error_pair.1), rate, kappa).unwrap();
    (m, c)
}

#[test]
fn effective_dissipator_restores_errors() {
    let (model, c) = effective(1.0, 0.0);
    let m = liouvillian(&model).unwrap();
    let (p2, p3) = &c.error_pair;
    let out = matexp_propagate(&m, &outer(p2, p2), 20.0).unwrap();
    assert!(expectation(&c.pair.psi0, &out, &c.pair.psi0).re > 1.0 - 1e-6);

    let s = 0.5f64.sqrt();
    let err = (p2 + p3).mapv(|z| z * s);
    let code = (&c.pair.psi0 + &c.pair.psi1).mapv(|z| z * s);
    let out = matexp_propagate(&m, &outer(&err, &err), 20.0).unwrap();
    assert!((expectation(&code, &out, &code).re - 1.0).abs() < 1e-6);
}

#[test]
fn effective_dissipator_rejects_overlapping_states() {
    let c = sqrt3_construction(Sqrt3Variant::One, 9).unwrap();
    assert!(effective_dissipator_model(&c.pair, (&c.pair.psi0, &c.error_pair.1), 1.0, 0.1).is_err());
}

#[test]
fn effective_model_beats_break_even() {
    let kappa = 2.0 * PI * 0.1;
    let (model, c) = effective(2.0 * PI * 20.0, kappa);
    let traj = propagate_code(&model, &c.pair, &uniform_grid(10.0, 20), 100).unwrap();
    let curve = fidelity_curve(&c.pair, &traj, kappa);
    for i in 1..curve.tgrid.len() {
        assert!(curve.values[i] > curve.baseline[i], "t = {}: {} vs {}", curve.tgrid[i], curve.values[i], curve.baseline[i]);
    }
}

#[test]
fn fock_stabilization_reaches_classical_limit() {
    let r = fock_stabilization_example(&FockStabilizationParams::default()).unwrap();
    assert_abs_diff_eq!(*r.curve.values.last().unwrap(), 2.0 / 3.0, epsilon = 0.02);
    assert_abs_diff_eq!(r.pole_fidelities[0], 1.0, epsilon = 0.02);
    assert_abs_diff_eq!(r.pole_fidelities[1], 1.0, epsilon = 0.02);
    assert_abs_diff_eq!(r.equator_fidelity, 0.5, epsilon = 0.03);
    assert!(fock_stabilization_example(&FockStabilizationParams { cutoff: 1, ..Default::default() }).is_err());
}

#[test]
fn joint_sqrt3_simulation_beats_break_even() {
    let kappa = 2.0 * PI * 0.1;
    let (model, pair) = sqrt3_joint_model(Sqrt3Variant::One, 9, 2.0 * PI * 10.0, true, kappa, 2.0 * PI * 20.0).unwrap();
    let f = final_average_fidelity(&model, &pair, 0.5, 500).unwrap();
    assert!(f > break_even(0.5, kappa), "{f}");
}

#[test]
fn stabilization_helps_at_long_times() {
    let kappa = 2.0 * PI * 0.1;
    let run = |stab| {
        let (model, pair) = sqrt3_joint_model(Sqrt3Variant::One, 9, 2.0 * PI * 10.0, stab, kappa, 2.0 * PI * 20.0).unwrap();
        final_average_fidelity(&model, &pair, 5.0, 5000).unwrap()
    };
    let (with, without) = (run(true), run(false));
    assert!(with > without, "{with} vs {without}");
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[test]
fn wigner_of_fock_states() {
    let vac = outer(&basis_ket(12, 0), &basis_ket(12, 0));
    let one = outer(&basis_ket(12, 1), &basis_ket(12, 1));
    let w0 = wigner(&vac, &[0.0, 1.0], &[0.0]).unwrap();
    assert_abs_diff_eq!(w0.values[[0, 0]], 1.0 / PI, epsilon = 1e-12);
    // vacuum Gaussian exp(−x² − p²)/π
    assert_abs_diff_eq!(w0.values[[1, 0]], (-1.0f64).exp() / PI, epsilon = 1e-10);
    let w1 = wigner(&one, &[0.0], &[0.0]).unwrap();
    assert_abs_diff_eq!(w1.values[[0, 0]], -1.0 / PI, epsilon = 1e-12);
    assert!(w1.warning.is_none() && w1.leakage < 1e-9);
}

#[test]
fn wigner_of_code_state_is_normalized() {
    let pair = sqrt3_code(Sqrt3Variant::One, 20).unwrap();
    let axis = grid(-6.0, 6.0, 49);
    let w = wigner(&pair.code_state(), &axis, &axis).unwrap();
    assert!((w.integral() - 1.0).abs() < 1e-3, "{}", w.integral());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn code_wigner_ignores_relative_phase(phi in 0.0f64..6.3) {
        let pair = sqrt3_code(Sqrt3Variant::One, 12).unwrap();
        let rotated = LogicalPair::new(pair.psi0.clone(), pair.psi1.mapv(|z| z * C64::from_polar(1.0, phi))).unwrap();
        let axis = grid(-3.0, 3.0, 9);
        let a = wigner(&pair.code_state(), &axis, &axis).unwrap();
        let b = wigner(&rotated.code_state(), &axis, &axis).unwrap();
        let dev = (&a.values - &b.values).iter().map(|v| v.abs()).fold(0.0, f64::max);
        prop_assert!(dev < 1e-12);
    }
}
