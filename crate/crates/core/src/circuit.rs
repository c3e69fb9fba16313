//! Drive synthesis for the dressed oscillator–qubit–reset-mode circuit and its
//! rotating-frame simulation.
//!
//! The simulated space is span{|~n,g⟩, |~n,e⟩ : n ≤ levels} ⊗ {|0⟩, |1⟩}_c with
//! joint index 2k + c, where k enumerates the dressed states (g-branch first).
//! In the frame of H_ab every operator entry |i⟩⟨j| picks up e^{i(E_i − E_j)t}.

use std::f64::consts::PI;

use ndarray::Array2;
use serde::Serialize;

use crate::dressed::{coupler_spectrum_to, Branch, CouplerParams, DressedSpectrum};
use crate::error::{invalid, Error, Result};
use crate::hilbert::{dagger, fock_annihilation, identity, tensor, Operator, SparseOperator, StateVector, C64, ZERO};
use crate::lindblad::{apply_lindblad_sparse, integrate, Generator};
use crate::objective::{average_fidelity, break_even, Branches, FidelityCurve, LogicalPair};

/// AQEC couplings α^(l)_n keyed by the e-branch photon number n:
/// type 1 links |~n,e⟩ with |~n−1,g⟩, type 2 with |~n+1,g⟩, type 3 with |~n+2,g⟩.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AqecCoefficients {
    pub alpha1: Vec<(usize, C64)>,
    pub alpha2: Vec<(usize, C64)>,
    pub alpha3: Vec<(usize, C64)>,
}

impl AqecCoefficients {
    /// Reads α^(1)_n = H̃*_{n−1,n}, α^(2)_n = H̃*_{n+1,n}, α^(3)_n = H̃*_{n+2,n}
    /// from the single-mode block H̃_{mn} = ⟨m,g|H|n,e⟩.
    pub fn from_h_tilde(h_tilde: &Operator) -> Result<Self> {
        let mut c = AqecCoefficients::default();
        for ((m, n), v) in h_tilde.indexed_iter() {
            if v.norm() < 1e-14 {
                continue;
            }
            let entry = (n, v.conj());
            match m as isize - n as isize {
                -1 => c.alpha1.push(entry),
                1 => c.alpha2.push(entry),
                2 => c.alpha3.push(entry),
                off => {
                    return invalid(format!(
                        "H~({m},{n}) has offset {off}; only -1, +1, +2 are realizable"
                    ))
                }
            }
        }
        for list in [&mut c.alpha1, &mut c.alpha2, &mut c.alpha3] {
            list.sort_by_key(|e| e.0);
        }
        Ok(c)
    }

    pub fn max_abs(&self) -> f64 {
        self.alpha1.iter().chain(&self.alpha2).chain(&self.alpha3).map(|e| e.1.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let f = |l: &Vec<(usize, C64)>| l.iter().map(|&(n, v)| (n, v * s)).collect();
        AqecCoefficients { alpha1: f(&self.alpha1), alpha2: f(&self.alpha2), alpha3: f(&self.alpha3) }
    }

    pub fn max_level(&self) -> usize {
        let a = self.alpha1.iter().map(|e| e.0);
        let b = self.alpha2.iter().map(|e| e.0 + 1);
        let c = self.alpha3.iter().map(|e| e.0 + 2);
        a.chain(b).chain(c).max().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.alpha1.is_empty() && self.alpha2.is_empty() && self.alpha3.is_empty()
    }
}

/// One component A e^{−iνt} of a drive envelope.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tone {
    pub n: usize,
    pub frequency: f64,
    pub amplitude: C64,
    /// Dressed matrix element used as the denominator.
    pub element: C64,
}

/// Tone lists for f₁…f₄.
#[derive(Clone, Debug, Default, Serialize)]
pub struct DriveSet {
    pub tones: [Vec<Tone>; 4],
}

impl DriveSet {
    /// f_k(t) for k = 1..=4.
    pub fn sample(&self, k: usize, t: f64) -> C64 {
        self.tones[k - 1].iter().map(|tone| tone.amplitude * C64::from_polar(1.0, -tone.frequency * t)).sum()
    }
}

/// Bare a ⊗ {g, e, f} operators with b̂ = |g⟩⟨e|.
struct BareOps {
    a: Operator,
    bdag: Operator,
}

impl BareOps {
    fn new(a_cutoff: usize) -> Result<Self> {
        let a = tensor(&fock_annihilation(a_cutoff)?, &identity(3));
        let mut eg = Array2::zeros((3, 3));
        eg[[1, 0]] = C64::from(1.0);
        let bdag = tensor(&identity(a_cutoff + 1), &eg);
        Ok(BareOps { a, bdag })
    }

    /// Drive operators a†b†, a b†, a² b†, b†.
    fn drive(&self, kind: usize) -> Operator {
        match kind {
            1 => dagger(&self.a).dot(&self.bdag),
            2 => self.a.dot(&self.bdag),
            3 => self.a.dot(&self.a).dot(&self.bdag),
            _ => self.bdag.clone(),
        }
    }
}

/// Dressed g/e branches for n ≤ levels, embedded in the bare space.
#[derive(Clone, Debug)]
pub struct DressedFrame {
    pub spectrum: DressedSpectrum,
    pub levels: usize,
    /// (n, branch) per dressed index.
    pub labels: Vec<(usize, Branch)>,
    pub energies: Vec<f64>,
    /// Columns are dressed states in the bare basis.
    pub vectors: Operator,
    a_cutoff: usize,
}

impl DressedFrame {
    pub fn new(params: &CouplerParams, levels: usize) -> Result<Self> {
        if levels < 1 {
            return invalid("need at least two oscillator levels");
        }
        let spectrum = coupler_spectrum_to(params, levels)?;
        let a_cutoff = levels + 2;
        let mut labels = Vec::new();
        for branch in [Branch::G, Branch::E] {
            for n in 0..=levels {
                labels.push((n, branch));
            }
        }
        let energies: Vec<f64> = labels.iter().map(|&(n, b)| spectrum.energy(n, b)).collect();
        let mut vectors = Array2::zeros((3 * (a_cutoff + 1), labels.len()));
        for (k, &(n, b)) in labels.iter().enumerate() {
            vectors.column_mut(k).assign(&spectrum.state(n, b, a_cutoff));
        }
        Ok(DressedFrame { spectrum, levels, labels, energies, vectors, a_cutoff })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index(&self, n: usize, branch: Branch) -> usize {
        match branch {
            Branch::G => n,
            _ => self.levels + 1 + n,
        }
    }

    /// ⟨~i|X|~j⟩ for a bare operator X.
    pub fn project(&self, bare: &Operator) -> Operator {
        dagger(&self.vectors).dot(bare).dot(&self.vectors)
    }

    /// Joint (dressed ⊗ c) ket for Fock amplitudes placed on |~n,g⟩|0⟩.
    pub fn logical_ket(&self, fock: &StateVector) -> Result<StateVector> {
        let mut v = StateVector::zeros(2 * self.len());
        for (n, &amp) in fock.iter().enumerate() {
            if amp.norm() == 0.0 {
                continue;
            }
            if n > self.levels {
                return invalid(format!("Fock level {n} exceeds the simulated {} levels", self.levels));
            }
            v[2 * self.index(n, Branch::G)] = amp;
        }
        Ok(v)
    }

    pub fn logical_pair(&self, pair: &LogicalPair) -> Result<LogicalPair> {
        LogicalPair::new(self.logical_ket(&pair.psi0)?, self.logical_ket(&pair.psi1)?)
    }

    /// χ from the dressed g/e transition frequencies at n = 0, 1.
    pub fn chi(&self) -> f64 {
        let s = &self.spectrum;
        (s.energy(1, Branch::E) - s.energy(1, Branch::G)) - (s.energy(0, Branch::E) - s.energy(0, Branch::G))
    }

    fn bare_ops(&self) -> Result<BareOps> {
        BareOps::new(self.a_cutoff)
    }
}

const MIN_ELEMENT: f64 = 1e-6;

/// Tones of f₁…f₄ with amplitudes α divided by the dressed matrix elements;
/// f₄ gets one tone of strength Ω per dressed qubit transition n ≤ levels.
pub fn synthesize_drives(frame: &DressedFrame, coeffs: &AqecCoefficients, omega: f64) -> Result<DriveSet> {
    if coeffs.max_level() > frame.levels {
        return invalid(format!(
            "coefficients reach Fock level {} but the frame has {} levels",
            coeffs.max_level(),
            frame.levels
        ));
    }
    let ops = frame.bare_ops()?;
    let s = &frame.spectrum;
    let mut set = DriveSet::default();
    let groups: [(&[(usize, C64)], isize); 3] = [(&coeffs.alpha1, -1), (&coeffs.alpha2, 1), (&coeffs.alpha3, 2)];
    for (kind, (list, offset)) in groups.iter().enumerate() {
        let x = frame.project(&ops.drive(kind + 1));
        for &(n, alpha) in list.iter() {
            let src = n as isize + offset;
            if src < 0 {
                return invalid(format!("type {} coupling at n = {n} has no source level", kind + 1));
            }
            let src = src as usize;
            let element = x[[frame.index(n, Branch::E), frame.index(src, Branch::G)]];
            if element.norm() < MIN_ELEMENT {
                return Err(Error::VanishingMatrixElement { kind: kind as u8 + 1, n });
            }
            set.tones[kind].push(Tone {
                n,
                frequency: s.energy(n, Branch::E) - s.energy(src, Branch::G),
                amplitude: alpha / element,
                element,
            });
        }
    }
    if omega != 0.0 {
        let x = frame.project(&ops.drive(4));
        for n in 0..=frame.levels {
            let element = x[[frame.index(n, Branch::E), frame.index(n, Branch::G)]];
            if element.norm() < MIN_ELEMENT {
                return Err(Error::VanishingMatrixElement { kind: 4, n });
            }
            set.tones[3].push(Tone {
                n,
                frequency: s.energy(n, Branch::E) - s.energy(n, Branch::G),
                amplitude: C64::from(omega) / element,
                element,
            });
        }
    }
    Ok(set)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FluxParams {
    pub omega_a: f64,
    pub omega_c: f64,
    pub phi_a: f64,
    pub phi_b: f64,
    pub phi_c: f64,
    pub g_ab1: f64,
    pub g_ab2: f64,
    pub g_bc1: f64,
}

impl Default for FluxParams {
    fn default() -> Self {
        FluxParams {
            omega_a: 2.0 * PI * 3500.0,
            omega_c: 2.0 * PI * 2500.0,
            phi_a: 0.1,
            phi_b: 0.1,
            phi_c: 0.1,
            g_ab1: 2.0 * PI * 100.0,
            g_ab2: 2.0 * PI * 100.0,
            g_bc1: 2.0 * PI * 100.0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FluxWaveforms {
    pub t: Vec<f64>,
    pub eps1: Vec<f64>,
    pub eps2: Vec<f64>,
}

/// Lab-frame pump waveforms ε₁(t), ε₂(t) realizing the drive set.
pub fn synthesize_flux_waveforms(drives: &DriveSet, p: &FluxParams, t: &[f64]) -> Result<FluxWaveforms> {
    let prods = [p.phi_a * p.phi_b * p.g_ab1, p.phi_b * p.phi_c * p.g_bc1, p.phi_a * p.phi_a * p.phi_b * p.g_ab2];
    if prods.iter().any(|v| *v == 0.0 || !v.is_finite()) {
        return invalid("flux coupling products must be finite and nonzero");
    }
    let mut eps1 = Vec::with_capacity(t.len());
    let mut eps2 = Vec::with_capacity(t.len());
    for &s in t {
        let ab = (C64::from_polar(1.0, -2.0 * p.omega_a * s) * drives.sample(1, s) + drives.sample(2, s)) / prods[0];
        let bc = C64::from_polar(1.0, (p.omega_c - p.omega_a) * s) * drives.sample(4, s) / prods[1];
        eps1.push(-2.0 * (ab + bc).re);
        let f3 = 2.0 * C64::from_polar(1.0, p.omega_a * s) * drives.sample(3, s) / prods[2];
        eps2.push(-2.0 * f3.re);
    }
    Ok(FluxWaveforms { t: t.to_vec(), eps1, eps2 })
}

/// Σ v e^{iωt} |i⟩⟨j|
#[derive(Clone, Debug, Default)]
pub struct PhasedOperator {
    pub dim: usize,
    pub entries: Vec<(usize, usize, C64, f64)>,
}

impl PhasedOperator {
    pub fn at(&self, t: f64) -> SparseOperator {
        let mut dense = vec![ZERO; self.dim * self.dim];
        for &(i, j, v, w) in &self.entries {
            dense[i * self.dim + j] += v * C64::from_polar(1.0, w * t);
        }
        let entries = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != ZERO)
            .map(|(k, &v)| (k / self.dim, k % self.dim, v))
            .collect();
        SparseOperator { dim: self.dim, entries }
    }

    pub fn max_frequency(&self) -> f64 {
        self.entries.iter().map(|e| e.3.abs()).fold(0.0, f64::max)
    }
}

/// Entries merged by matrix slot so that each evaluation touches every slot once.
struct CompiledPhased {
    dim: usize,
    slots: Vec<(usize, usize)>,
    terms: Vec<(usize, C64, f64)>,
}

impl CompiledPhased {
    fn new(op: &PhasedOperator) -> Self {
        let mut index = std::collections::HashMap::new();
        let mut slots = Vec::new();
        let mut terms = Vec::with_capacity(op.entries.len());
        for &(i, j, v, w) in &op.entries {
            let k = *index.entry((i, j)).or_insert_with(|| {
                slots.push((i, j));
                slots.len() - 1
            });
            terms.push((k, v, w));
        }
        CompiledPhased { dim: op.dim, slots, terms }
    }

    fn at(&self, t: f64) -> SparseOperator {
        let mut vals = vec![ZERO; self.slots.len()];
        for &(k, v, w) in &self.terms {
            vals[k] += if w == 0.0 { v } else { v * C64::from_polar(1.0, w * t) };
        }
        let entries = self.slots.iter().zip(vals).map(|(&(i, j), v)| (i, j, v)).collect();
        SparseOperator { dim: self.dim, entries }
    }
}

struct CircuitGenerator {
    dim: usize,
    h: CompiledPhased,
    jumps: Vec<(f64, CompiledPhased)>,
}

impl CircuitGenerator {
    fn new(model: &CircuitModel) -> Self {
        CircuitGenerator {
            dim: model.dim(),
            h: CompiledPhased::new(&model.h),
            jumps: model.jumps.iter().map(|(r, j)| (*r, CompiledPhased::new(j))).collect(),
        }
    }
}

impl Generator for CircuitGenerator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, t: f64, x: &[C64], out: &mut [C64]) {
        let h = self.h.at(t);
        let jumps: Vec<(f64, SparseOperator)> = self.jumps.iter().map(|(r, j)| (*r, j.at(t))).collect();
        apply_lindblad_sparse(&h, &jumps, x, out);
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CircuitConfig {
    pub coupler: CouplerParams,
    /// Highest simulated photon number.
    pub levels: usize,
    /// Largest |α^(l)_n| after rescaling, rad/μs.
    pub alpha_max: f64,
    /// b–c swap strength Ω, rad/μs.
    pub omega: f64,
    pub kappa: f64,
    pub kappa_b: f64,
    pub kappa_c: f64,
    /// Drive terms oscillating faster than this in the dressed frame are dropped.
    pub rwa_cutoff: f64,
    /// Jump-operator components closer than this in frequency form one secular cluster.
    pub secular_tol: f64,
    /// Secular clusters carrying less than this fraction of a jump operator's weight are dropped.
    pub cluster_floor: f64,
    /// RK4 steps satisfy h·ω_max ≤ this.
    pub phase_per_step: f64,
    pub drives_on: bool,
}

impl CircuitConfig {
    /// χ/2π ≈ 10 MHz with |α|/2π = 0.05 MHz, κ/2π = 0.5 kHz, effective b decay
    /// 0.1 MHz through a c mode decaying at 2 MHz.
    pub fn desk_scale() -> Self {
        let mhz = 2.0 * PI;
        let kappa_c = 2.0 * mhz;
        let b_eff = 0.1 * mhz;
        CircuitConfig {
            coupler: CouplerParams::matched(1000.0 * mhz, 50.0 * mhz, 1.2, 10),
            levels: 7,
            alpha_max: 0.05 * mhz,
            omega: omega_for_effective_decay(b_eff, kappa_c),
            kappa: 0.0005 * mhz,
            kappa_b: 0.0005 * mhz,
            kappa_c,
            rwa_cutoff: 250.0 * mhz,
            secular_tol: 1.0 * mhz,
            cluster_floor: 1e-4,
            phase_per_step: 0.2,
            drives_on: true,
        }
    }

    /// t* = 0.3/κ
    pub fn reference_time(&self) -> f64 {
        0.3 / self.kappa
    }

    /// 4Ω²/κ_c
    pub fn effective_b_decay(&self) -> f64 {
        4.0 * self.omega * self.omega / self.kappa_c
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("kappa", self.kappa), ("kappa_b", self.kappa_b), ("kappa_c", self.kappa_c)] {
            if !(v >= 0.0) {
                return invalid(format!("{name} must be non-negative"));
            }
        }
        if !(self.rwa_cutoff > 0.0 && self.secular_tol > 0.0 && self.phase_per_step > 0.0) {
            return invalid("rwa_cutoff, secular_tol and phase_per_step must be positive");
        }
        if !(self.alpha_max >= 0.0) || !self.omega.is_finite() {
            return invalid("drive strengths must be finite");
        }
        Ok(())
    }
}

pub fn omega_for_effective_decay(b_eff: f64, kappa_c: f64) -> f64 {
    (b_eff * kappa_c).sqrt() / 2.0
}

/// The rotating-frame model: phased Hamiltonian and secular jump clusters.
pub struct CircuitModel {
    pub frame: DressedFrame,
    pub drives: DriveSet,
    pub h: PhasedOperator,
    pub jumps: Vec<(f64, PhasedOperator)>,
    pub step: f64,
}

impl CircuitModel {
    pub fn dim(&self) -> usize {
        2 * self.frame.len()
    }
}

fn lift_dressed(x: &Operator, c_op: &Operator) -> Vec<(usize, usize, C64)> {
    let mut out = Vec::new();
    for ((i, j), &v) in x.indexed_iter() {
        if v == ZERO {
            continue;
        }
        for ((ci, cj), &w) in c_op.indexed_iter() {
            if w != ZERO {
                out.push((2 * i + ci, 2 * j + cj, v * w));
            }
        }
    }
    out
}

/// Splits Σ X̃_ij e^{i(E_i−E_j)t} into clusters of nearby frequency; each cluster
/// keeps its residual phases.
fn secular_clusters(entries: Vec<(usize, usize, C64, f64)>, dim: usize, tol: f64) -> Vec<PhasedOperator> {
    let mut sorted = entries;
    sorted.sort_by(|a, b| a.3.total_cmp(&b.3));
    let mut groups: Vec<Vec<(usize, usize, C64, f64)>> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for e in sorted {
        if e.3 - last > tol || groups.is_empty() {
            groups.push(Vec::new());
        }
        last = e.3;
        groups.last_mut().expect("group").push(e);
    }
    groups
        .into_iter()
        .map(|g| {
            let wsum: f64 = g.iter().map(|e| e.2.norm_sqr()).sum();
            let center = g.iter().map(|e| e.2.norm_sqr() * e.3).sum::<f64>() / wsum;
            PhasedOperator { dim, entries: g.into_iter().map(|(i, j, v, w)| (i, j, v, w - center)).collect() }
        })
        .collect()
}

pub fn build_circuit_model(config: &CircuitConfig, h_tilde: &Operator) -> Result<CircuitModel> {
    config.validate()?;
    let frame = DressedFrame::new(&config.coupler, config.levels)?;
    let raw = AqecCoefficients::from_h_tilde(h_tilde)?;
    let coeffs = if config.drives_on && raw.max_abs() > 0.0 {
        raw.scaled(config.alpha_max / raw.max_abs())
    } else {
        AqecCoefficients::default()
    };
    let chi = frame.chi();
    if coeffs.max_abs() > chi.abs() / 10.0 {
        log::warn!("drive strength {:.3e} violates |alpha| << chi = {chi:.3e}", coeffs.max_abs());
    }
    let drives = synthesize_drives(&frame, &coeffs, config.omega)?;
    let ops = frame.bare_ops()?;
    let d = frame.len();
    let dim = 2 * d;
    let e = &frame.energies;
    let id_c = identity(2);
    let c = fock_annihilation(1)?;

    let peak = coeffs.max_abs().max(config.omega.abs());
    let drop_below = 1e-9 * peak;
    let mut h = PhasedOperator { dim, entries: Vec::new() };
    for kind in 1..=4 {
        if drives.tones[kind - 1].is_empty() {
            continue;
        }
        let x = frame.project(&ops.drive(kind));
        let lifted = lift_dressed(&x, if kind == 4 { &c } else { &id_c });
        for tone in &drives.tones[kind - 1] {
            for &(i, j, v) in &lifted {
                let amp = tone.amplitude * v;
                let w = e[i / 2] - e[j / 2] - tone.frequency;
                if amp.norm() < drop_below || w.abs() > config.rwa_cutoff {
                    continue;
                }
                h.entries.push((i, j, amp, w));
                h.entries.push((j, i, amp.conj(), -w));
            }
        }
    }

    let mut jumps = Vec::new();
    let bare_b = dagger(&ops.bdag);
    for (rate, bare) in [(config.kappa, &ops.a), (config.kappa_b, &bare_b)] {
        if rate == 0.0 {
            continue;
        }
        let x = frame.project(bare);
        let entries: Vec<_> = lift_dressed(&x, &id_c)
            .into_iter()
            .filter(|t| t.2.norm() > 1e-7)
            .map(|(i, j, v)| (i, j, v, e[i / 2] - e[j / 2]))
            .filter(|t| t.3.abs() <= config.rwa_cutoff.max(2.0 * config.coupler.delta1.abs()))
            .collect();
        let clusters = secular_clusters(entries, dim, config.secular_tol);
        let weight = |c: &PhasedOperator| c.entries.iter().map(|e| e.2.norm_sqr()).sum::<f64>();
        let total: f64 = clusters.iter().map(weight).sum();
        for cluster in clusters {
            if weight(&cluster) > config.cluster_floor * total {
                jumps.push((rate, cluster));
            }
        }
    }
    if config.kappa_c > 0.0 {
        let entries = lift_dressed(&identity(d), &c).into_iter().map(|(i, j, v)| (i, j, v, 0.0)).collect();
        jumps.push((config.kappa_c, PhasedOperator { dim, entries }));
    }

    let w_max = h.max_frequency().max(jumps.iter().map(|j| j.1.max_frequency()).fold(0.0, f64::max));
    let rate_scale = config.kappa_c + peak;
    let step = config.phase_per_step / w_max.max(rate_scale).max(1e-12);
    Ok(CircuitModel { frame, drives, h, jumps, step })
}

#[derive(Clone, Debug, Serialize)]
pub struct CircuitRun {
    pub curve: FidelityCurve,
    pub steps: usize,
    pub dim: usize,
    pub chi: f64,
    /// Largest trace drift of ρ₀₀, ρ₁₁ over the grid.
    pub trace_error: f64,
    pub hermiticity_error: f64,
}

/// Propagates the three logical branches through the rotating-frame model.
pub fn simulate_circuit(model: &CircuitModel, pair: &LogicalPair, tgrid: &[f64], kappa: f64) -> Result<CircuitRun> {
    let dressed = model.frame.logical_pair(pair)?;
    let gen = CircuitGenerator::new(model);
    let dt_max = tgrid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let spi = ((dt_max / model.step).ceil() as usize).max(1);
    let [r00, r11, r10] = crate::lindblad::branch_initial_states(&dressed);
    let (a, (b, c)) = rayon::join(
        || integrate(&gen, &r00, tgrid, spi),
        || rayon::join(|| integrate(&gen, &r11, tgrid, spi), || integrate(&gen, &r10, tgrid, spi)),
    );
    let (a, b, c) = (a?, b?, c?);
    let mut values = Vec::with_capacity(tgrid.len());
    let mut trace_error: f64 = 0.0;
    let mut herm: f64 = 0.0;
    for i in 0..tgrid.len() {
        values.push(average_fidelity(&dressed, Branches::new(&a[i], &b[i], &c[i])));
        for r in [&a[i], &b[i]] {
            trace_error = trace_error.max((crate::hilbert::trace(r) - 1.0).norm());
            herm = herm.max(crate::hilbert::hermiticity_error(r));
        }
    }
    let baseline = tgrid.iter().map(|&t| break_even(t, kappa)).collect();
    Ok(CircuitRun {
        curve: FidelityCurve { tgrid: tgrid.to_vec(), values, baseline },
        steps: spi * (tgrid.len() - 1),
        dim: model.dim(),
        chi: model.frame.chi(),
        trace_error,
        hermiticity_error: herm,
    })
}

/// Evolves a single joint (dressed ⊗ c) density matrix through the model.
pub fn evolve(model: &CircuitModel, rho0: &Operator, tgrid: &[f64]) -> Result<Vec<Operator>> {
    if rho0.dim() != (model.dim(), model.dim()) {
        return Err(Error::DimensionMismatch(format!("state is {:?}, model is {}", rho0.dim(), model.dim())));
    }
    let dt_max = tgrid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let spi = ((dt_max / model.step).ceil() as usize).max(1);
    integrate(&CircuitGenerator::new(model), rho0, tgrid, spi)
}

/// Zero-frequency part of the drive Hamiltonian between |~n,e⟩|0⟩ and the
/// given g-branch source, recovered from the assembled model.
pub fn recovered_coefficients(model: &CircuitModel, tol: f64) -> AqecCoefficients {
    let f = &model.frame;
    let mut out = AqecCoefficients::default();
    let lists = [&mut out.alpha1, &mut out.alpha2, &mut out.alpha3];
    for (list, offset) in lists.into_iter().zip([-1isize, 1, 2]) {
        for n in 0..=f.levels {
            let src = n as isize + offset;
            if src < 0 || src as usize > f.levels {
                continue;
            }
            let i = 2 * f.index(n, Branch::E);
            let j = 2 * f.index(src as usize, Branch::G);
            let v: C64 = model
                .h
                .entries
                .iter()
                .filter(|e| e.0 == i && e.1 == j && e.3.abs() < tol)
                .map(|e| e.2)
                .sum();
            if v.norm() > 1e-12 {
                list.push((n, v));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_map_to_drive_types() {
        let mut ht = Array2::zeros((4, 4));
        ht[[0, 1]] = C64::new(1.0, 2.0);
        ht[[2, 1]] = C64::from(3.0);
        ht[[3, 1]] = C64::from(4.0);
        let c = AqecCoefficients::from_h_tilde(&ht).unwrap();
        assert_eq!(c.alpha1, vec![(1, C64::new(1.0, -2.0))]);
        assert_eq!(c.alpha2, vec![(1, C64::from(3.0))]);
        assert_eq!(c.alpha3, vec![(1, C64::from(4.0))]);
        ht[[1, 1]] = C64::from(1.0);
        assert!(AqecCoefficients::from_h_tilde(&ht).is_err());
    }

    #[test]
    fn clusters_split_on_gaps() {
        let e = vec![(0, 1, C64::from(1.0), 0.0), (1, 2, C64::from(1.0), 0.1), (2, 3, C64::from(1.0), 5.0)];
        let c = secular_clusters(e, 4, 1.0);
        assert_eq!(c.len(), 2);
        assert!((c[0].entries[0].3 + 0.05).abs() < 1e-15);
    }
}
