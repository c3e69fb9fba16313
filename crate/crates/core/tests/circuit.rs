use std::f64::consts::PI;

use aqec::circuit::*;
use aqec::codes::{sqrt3_construction, Sqrt3Variant};
use aqec::dressed::{Branch, CouplerParams};
use aqec::hilbert::*;
use aqec::objective::{break_even, LogicalPair};

const MHZ: f64 = 2.0 * PI;

fn sqrt3_h_tilde(levels: usize) -> Operator {
    sqrt3_construction(Sqrt3Variant::One, levels).unwrap().h_tilde_with_stabilization()
}

fn uniform(t: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| t * k as f64 / n as f64).collect()
}

#[test]
fn uncoupled_tones_divide_by_sqrt_n() {
    let p = CouplerParams { delta1: 1000.0 * MHZ, delta2: 1200.0 * MHZ, g1: 0.0, g2: 0.0, n_max: 6 };
    let frame = DressedFrame::new(&p, 5).unwrap();
    let alpha = C64::new(0.3, -0.1);
    let coeffs = AqecCoefficients { alpha1: (1..=5).map(|n| (n, alpha)).collect(), ..Default::default() };
    let set = synthesize_drives(&frame, &coeffs, 0.0).unwrap();
    assert_eq!(set.tones[0].len(), 5);
    for tone in &set.tones[0] {
        assert!((tone.amplitude.norm() - alpha.norm() / (tone.n as f64).sqrt()).abs() < 1e-12);
        assert!((tone.amplitude * tone.element - alpha).norm() < 1e-12);
        assert!((tone.frequency - p.delta1).abs() < 1e-9);
    }
    assert!(set.tones[3].is_empty());
}

#[test]
fn tone_counts_follow_coefficients() {
    let cfg = CircuitConfig::desk_scale();
    let frame = DressedFrame::new(&cfg.coupler, cfg.levels).unwrap();
    let coeffs = AqecCoefficients::from_h_tilde(&sqrt3_h_tilde(cfg.levels)).unwrap();
    let set = synthesize_drives(&frame, &coeffs, cfg.omega).unwrap();
    assert_eq!(set.tones[0].len(), coeffs.alpha1.len());
    assert_eq!(set.tones[1].len(), coeffs.alpha2.len());
    assert_eq!(set.tones[2].len(), coeffs.alpha3.len());
    assert_eq!(set.tones[3].len(), cfg.levels + 1);
    for tone in &set.tones[2] {
        let e = frame.spectrum.energy(tone.n, Branch::E) - frame.spectrum.energy(tone.n + 2, Branch::G);
        assert!((tone.frequency - e).abs() <= 1e-9 * e.abs());
    }
    let too_high = AqecCoefficients { alpha1: vec![(cfg.levels + 1, C64::from(1.0))], ..Default::default() };
    assert!(synthesize_drives(&frame, &too_high, 0.0).is_err());
}

#[test]
fn tone_spacing_doubles_with_chi() {
    let spacing = |delta1: f64| {
        let p = CouplerParams::matched(delta1, 50.0 * MHZ, 1.2, 10);
        let frame = DressedFrame::new(&p, 6).unwrap();
        let coeffs = AqecCoefficients { alpha1: (1..=6).map(|n| (n, C64::from(1.0))).collect(), ..Default::default() };
        let set = synthesize_drives(&frame, &coeffs, 0.0).unwrap();
        (set.tones[0][1].frequency - set.tones[0][0].frequency, frame.chi())
    };
    let (s1, chi1) = spacing(8000.0 * MHZ);
    let (s2, chi2) = spacing(4000.0 * MHZ);
    assert!((s2 / s1 - 2.0).abs() < 0.05, "{}", s2 / s1);
    assert!((chi2 / chi1 - 2.0).abs() < 0.05, "{}", chi2 / chi1);
}

#[test]
fn projection_recovers_coefficients() {
    let cfg = CircuitConfig::desk_scale();
    let ht = sqrt3_h_tilde(cfg.levels);
    let model = build_circuit_model(&cfg, &ht).unwrap();
    let raw = AqecCoefficients::from_h_tilde(&ht).unwrap();
    let target = raw.scaled(cfg.alpha_max / raw.max_abs());
    let got = recovered_coefficients(&model, 1e-3 * MHZ);
    for (want, have) in [(&target.alpha1, &got.alpha1), (&target.alpha2, &got.alpha2), (&target.alpha3, &got.alpha3)] {
        assert_eq!(want.len(), have.len());
        for ((n, a), (m, b)) in want.iter().zip(have.iter()) {
            assert_eq!(n, m);
            assert!((a - b).norm() < 0.02 * a.norm(), "n={n}: {a} vs {b}");
        }
    }
}

#[test]
fn zero_drives_give_zero_waveforms() {
    let t = uniform(0.01, 200);
    let w = synthesize_flux_waveforms(&DriveSet::default(), &FluxParams::default(), &t).unwrap();
    assert!(w.eps1.iter().chain(&w.eps2).all(|v| *v == 0.0));
    let bad = FluxParams { phi_b: 0.0, ..FluxParams::default() };
    assert!(synthesize_flux_waveforms(&DriveSet::default(), &bad, &t).is_err());
}

#[test]
fn single_f2_tone_sets_eps1_amplitude() {
    let amp = C64::from_polar(0.7, 0.4);
    let mut set = DriveSet::default();
    set.tones[1].push(Tone { n: 1, frequency: 50.0 * MHZ, amplitude: amp, element: C64::from(1.0) });
    let p = FluxParams::default();
    let t = uniform(0.02, 4000);
    let w = synthesize_flux_waveforms(&set, &p, &t).unwrap();
    let peak = w.eps1.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let expect = 2.0 * amp.norm() / (p.phi_a * p.phi_b * p.g_ab1);
    assert!((peak - expect).abs() < 1e-3 * expect, "{peak} vs {expect}");
    assert!(w.eps2.iter().all(|v| *v == 0.0));
    // ε₁ is the single tone −2Re(A e^{−iνt})/(φ_aφ_b g)
    for (s, v) in t.iter().zip(&w.eps1).step_by(97) {
        let direct = -2.0 * (amp * C64::from_polar(1.0, -50.0 * MHZ * s)).re / (p.phi_a * p.phi_b * p.g_ab1);
        assert!((v - direct).abs() < 1e-12 * expect);
    }
}

#[test]
fn effective_b_decay_through_reset_mode() {
    let cfg = CircuitConfig { drives_on: false, kappa: 0.0, kappa_b: 0.0, ..CircuitConfig::desk_scale() };
    let target = cfg.effective_b_decay();
    assert!((target - 0.1 * MHZ).abs() < 1e-12);
    let model = build_circuit_model(&cfg, &sqrt3_h_tilde(cfg.levels)).unwrap();
    let f = &model.frame;
    let excited = basis_ket(model.dim(), 2 * f.index(0, Branch::E));
    let t = 1.0 / target;
    let out = evolve(&model, &outer(&excited, &excited), &[0.0, t]).unwrap();
    let pe: f64 = (0..=f.levels).map(|n| out[1][[2 * f.index(n, Branch::E), 2 * f.index(n, Branch::E)]].re).sum();
    let rate = -pe.ln() / t;
    assert!((rate - target).abs() < 0.1 * target, "{rate} vs {target}");
}

#[test]
fn drives_off_tracks_break_even() {
    let cfg = CircuitConfig { drives_on: false, omega: 0.0, ..CircuitConfig::desk_scale() };
    let model = build_circuit_model(&cfg, &sqrt3_h_tilde(cfg.levels)).unwrap();
    assert!(model.h.entries.is_empty());
    let pair = LogicalPair::basis_states(cfg.levels + 1, 0, 1);
    let grid = uniform(cfg.reference_time(), 5);
    let run = simulate_circuit(&model, &pair, &grid, cfg.kappa).unwrap();
    for (i, t) in grid.iter().enumerate() {
        let be = break_even(*t, cfg.kappa);
        assert!((run.curve.values[i] - be).abs() < 0.02 * be, "t={t}: {} vs {be}", run.curve.values[i]);
    }
    assert!(run.trace_error < 1e-7);
    assert!(run.hermiticity_error < 1e-7);
}

#[test]
fn evolve_rejects_wrong_dimension() {
    let cfg = CircuitConfig { drives_on: false, ..CircuitConfig::desk_scale() };
    let model = build_circuit_model(&cfg, &sqrt3_h_tilde(cfg.levels)).unwrap();
    assert!(evolve(&model, &zeros(3), &[0.0, 1.0]).is_err());
}
