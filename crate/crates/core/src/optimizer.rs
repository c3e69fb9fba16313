//! Adam search over Hamiltonian coefficients and logical states.
//!
//! Coefficients are optimized in normalized form x = α / bound, so a single
//! learning rate serves both x ∈ [−1, 1] and the state amplitudes.

use std::f64::consts::PI;
use std::time::Instant;

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::adjoint::value_and_gradient;
use crate::ansatz::{BasisFamily, HamiltonianBasis};
use crate::error::{invalid, Error, Result};
use crate::hilbert::{fock_annihilation, identity, inner, norm, tensor, StateVector, C64};
use crate::lindblad::{Dissipator, LindbladModel};
use crate::objective::{break_even, LogicalPair};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub cutoff: usize,
    pub family: BasisFamily,
    pub kappa_mhz: f64,
    pub kappa_q_mhz: f64,
    pub t_final: f64,
    pub bound_mhz: f64,
    pub lr: f64,
    pub lr_final: f64,
    pub iters: usize,
    pub seed: u64,
    /// RK4 steps per μs.
    pub steps_per_unit: usize,
    /// 0 disables checkpoints.
    pub checkpoint_every: usize,
    /// Train on the modified average fidelity.
    pub modified: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            cutoff: 20,
            family: BasisFamily::Distance { d: 2 },
            kappa_mhz: 0.1,
            kappa_q_mhz: 20.0,
            t_final: 0.5,
            bound_mhz: 10.0,
            lr: 0.001,
            lr_final: 0.0003,
            iters: 2000,
            seed: 0,
            steps_per_unit: 1000,
            checkpoint_every: 100,
            modified: true,
        }
    }
}

impl SearchConfig {
    pub fn kappa(&self) -> f64 {
        2.0 * PI * self.kappa_mhz
    }

    pub fn kappa_q(&self) -> f64 {
        2.0 * PI * self.kappa_q_mhz
    }

    pub fn bound(&self) -> f64 {
        2.0 * PI * self.bound_mhz
    }

    pub fn nsteps(&self) -> usize {
        ((self.t_final * self.steps_per_unit as f64).ceil() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_mhz >= 0.0 && self.kappa_q_mhz >= 0.0) {
            return invalid("rates must be non-negative");
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return invalid("T must be positive");
        }
        if !(self.bound_mhz > 0.0 && self.bound_mhz.is_finite()) {
            return invalid("bound must be positive");
        }
        if !(self.lr > 0.0 && self.lr_final > 0.0 && self.lr_final <= self.lr) {
            return invalid("need 0 < lr_final <= lr");
        }
        if self.steps_per_unit == 0 {
            return invalid("steps_per_unit must be positive");
        }
        HamiltonianBasis::build(self.family, self.cutoff)?;
        Ok(())
    }

    /// Learning rate at iteration k, decayed linearly to lr_final at the last one.
    pub fn learning_rate(&self, k: usize) -> f64 {
        if self.iters <= 1 {
            return self.lr;
        }
        let s = k as f64 / (self.iters - 1) as f64;
        self.lr + (self.lr_final - self.lr) * s
    }

    pub fn basis(&self) -> Result<HamiltonianBasis> {
        Ok(HamiltonianBasis::build(self.family, self.cutoff)?.with_bound(self.bound()))
    }
}

/// Joint model with photon loss √κ â and ancilla decay √κ_q σ₋.
pub fn search_model(basis: &HamiltonianBasis, alpha: Vec<f64>, kappa: f64, kappa_q: f64) -> Result<LindbladModel> {
    let c = basis.cutoff;
    let a = tensor(&fock_annihilation(c)?, &identity(2));
    let q = tensor(&identity(c + 1), &fock_annihilation(1)?);
    LindbladModel::new(
        basis.dim(),
        basis.terms.clone(),
        alpha,
        vec![Dissipator::new(kappa, a), Dissipator::new(kappa_q, q)],
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState { m: vec![0.0; n], v: vec![0.0; n], t: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// One Adam step that ascends `grads`.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != grads.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} parameters, {} gradients, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient(i));
    }
    state.t += 1;
    let b1t = 1.0 - state.beta1.powi(state.t as i32);
    let b2t = 1.0 - state.beta2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let mh = state.m[i] / b1t;
        let vh = state.v[i] / b2t;
        params[i] += lr * mh / (vh.sqrt() + state.eps);
    }
    Ok(())
}

/// ψ₁ → ψ₁ − (⟨ψ₀|ψ₁⟩/⟨ψ₀|ψ₀⟩)ψ₀, then both normalized.
pub fn reorthogonalize(psi0: &StateVector, psi1: &StateVector) -> Result<LogicalPair> {
    if psi0.len() != psi1.len() {
        return Err(Error::DimensionMismatch("logical states differ in length".into()));
    }
    let n00 = inner(psi0, psi0).re;
    if !(n00 > 0.0) || !n00.is_finite() {
        return invalid("psi0 must be nonzero and finite");
    }
    let proj = inner(psi0, psi1) / n00;
    let p1 = psi1 - &psi0.mapv(|z| z * proj);
    let r = norm(&p1);
    if !(r >= 1e-10) {
        return Err(Error::Collapse);
    }
    let p0 = psi0.mapv(|z| z / n00.sqrt());
    let mut p1 = p1.mapv(|z| z / r);
    // One more pass removes the rounding residue of the first projection.
    let o = inner(&p0, &p1);
    p1 = &p1 - &p0.mapv(|z| z * o);
    let r = norm(&p1);
    LogicalPair::new_unchecked(p0, p1.mapv(|z| z / r))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub iteration: usize,
    pub objective: f64,
    pub alpha: Vec<f64>,
    pub psi0: Vec<[f64; 2]>,
    pub psi1: Vec<[f64; 2]>,
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    pub config: SearchConfig,
    pub basis: HamiltonianBasis,
    pub pair: LogicalPair,
    pub alpha: Vec<f64>,
    /// Training objective before each update; the last entry is the final iterate.
    pub fidelity_history: Vec<f64>,
    pub best_iteration: usize,
    /// Objective of the returned iterate.
    pub objective: f64,
    /// Plain F̄(T) of the returned iterate.
    pub fidelity: f64,
    pub break_even: f64,
    pub wall_time: f64,
    pub checkpoints: Vec<Checkpoint>,
    /// Set when training stopped early on a numerical failure.
    pub aborted: Option<String>,
}

pub fn pack_state(v: &StateVector) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub fn unpack_state(v: &[[f64; 2]]) -> StateVector {
    v.iter().map(|p| C64::new(p[0], p[1])).collect()
}

/// Seeded initialization: α uniform in ±0.1·bound, ψ from a complex Gaussian.
pub fn initial_point(config: &SearchConfig, basis: &HamiltonianBasis) -> Result<(Vec<f64>, LogicalPair)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let bound = config.bound();
    let alpha: Vec<f64> = (0..basis.len()).map(|_| rng.random_range(-0.1..=0.1) * bound).collect();
    let dim = basis.dim();
    let mut gauss = || -> StateVector {
        Array1::from_shape_fn(dim, |_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
    };
    let (p0, p1) = (gauss(), gauss());
    Ok((alpha, reorthogonalize(&p0, &p1)?))
}

/// Runs the search, calling `on_checkpoint` every `checkpoint_every` iterations.
pub fn train_with<F: FnMut(&Checkpoint)>(config: &SearchConfig, mut on_checkpoint: F) -> Result<SearchResult> {
    config.validate()?;
    let start = Instant::now();
    let basis = config.basis()?;
    let bound = config.bound();
    let nsteps = config.nsteps();
    let (alpha0, mut pair) = initial_point(config, &basis)?;
    let nalpha = basis.len();
    let dim = basis.dim();
    let mut x: Vec<f64> = alpha0.iter().map(|a| a / bound).collect();
    let mut adam = AdamState::new(nalpha + 4 * dim);
    let mut params = vec![0.0; nalpha + 4 * dim];
    let mut history = Vec::with_capacity(config.iters + 1);
    let mut checkpoints = Vec::new();
    let mut best: Option<(f64, usize, Vec<f64>, LogicalPair)> = None;
    let mut aborted = None;

    let snapshot = |k: usize, f: f64, alpha: &[f64], pair: &LogicalPair| Checkpoint {
        iteration: k,
        objective: f,
        alpha: alpha.to_vec(),
        psi0: pack_state(&pair.psi0),
        psi1: pack_state(&pair.psi1),
    };

    for k in 0..=config.iters {
        let alpha: Vec<f64> = x.iter().map(|v| v * bound).collect();
        let model = search_model(&basis, alpha.clone(), config.kappa(), config.kappa_q())?;
        let step = value_and_gradient(&model, &pair, config.t_final, nsteps, config.modified);
        let (f, bundle) = match step {
            Ok(v) => v,
            Err(e) if e.is_numerical() => {
                aborted = Some(format!("iteration {k}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        };
        history.push(f);
        if best.as_ref().map_or(true, |b| f > b.0) {
            best = Some((f, k, alpha.clone(), pair.clone()));
        }
        if config.checkpoint_every > 0 && (k % config.checkpoint_every == 0 || k == config.iters) {
            let c = snapshot(k, f, &alpha, &pair);
            on_checkpoint(&c);
            checkpoints.push(c);
        }
        if k == config.iters {
            break;
        }

        let mut grads = Vec::with_capacity(params.len());
        grads.extend(bundle.grad_alpha.iter().map(|g| g * bound));
        for (g, psi) in [(&bundle.grad_psi0, &pair.psi0), (&bundle.grad_psi1, &pair.psi1)] {
            let radial = psi.iter().zip(g.iter()).map(|(p, z)| (p.conj() * z).re).sum::<f64>();
            grads.extend(g.iter().zip(psi.iter()).map(|(z, p)| z - p * radial).flat_map(|z| [z.re, z.im]));
        }
        params[..nalpha].copy_from_slice(&x);
        for (i, z) in pair.psi0.iter().chain(pair.psi1.iter()).enumerate() {
            params[nalpha + 2 * i] = z.re;
            params[nalpha + 2 * i + 1] = z.im;
        }
        if let Err(e) = adam_step(&mut params, &grads, &mut adam, config.learning_rate(k)) {
            aborted = Some(format!("iteration {k}: {e}"));
            break;
        }
        x = params[..nalpha].iter().map(|v| v.clamp(-1.0, 1.0)).collect();
        let unpack = |off: usize| -> StateVector {
            (0..dim).map(|i| C64::new(params[off + 2 * i], params[off + 2 * i + 1])).collect()
        };
        pair = match reorthogonalize(&unpack(nalpha), &unpack(nalpha + 2 * dim)) {
            Ok(p) => p,
            Err(e) => {
                aborted = Some(format!("iteration {k}: {e}"));
                break;
            }
        };
    }

    let (objective, best_iteration, alpha, pair) =
        best.ok_or(Error::Diverged { time: config.t_final })?;
    let model = search_model(&basis, alpha.clone(), config.kappa(), config.kappa_q())?;
    let fidelity = crate::adjoint::objective(&model, &pair, config.t_final, nsteps, false)?;
    Ok(SearchResult {
        config: config.clone(),
        basis,
        pair,
        alpha,
        fidelity_history: history,
        best_iteration,
        objective,
        fidelity,
        break_even: break_even(config.t_final, config.kappa()),
        wall_time: start.elapsed().as_secs_f64(),
        checkpoints,
        aborted,
    })
}

pub fn train(config: &SearchConfig) -> Result<SearchResult> {
    train_with(config, |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_first_step_by_hand() {
        let mut p = vec![1.0, -2.0];
        let mut s = AdamState::new(2);
        adam_step(&mut p, &[0.5, -3.0], &mut s, 0.1).unwrap();
        // m̂ = g, v̂ = g², so each coordinate moves by lr·g/(|g| + ε).
        assert!((p[0] - (1.0 + 0.1 * 0.5 / (0.5 + 1e-8))).abs() < 1e-15);
        assert!((p[1] - (-2.0 - 0.1 * 3.0 / (3.0 + 1e-8))).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut p = vec![0.3, 0.4];
        let mut s = AdamState::new(2);
        s.m = vec![1.0, 1.0];
        adam_step(&mut p, &[0.0, 0.0], &mut s, 0.1).unwrap_or(());
        let mut q = vec![0.3, 0.4];
        let mut z = AdamState::new(2);
        adam_step(&mut q, &[0.0, 0.0], &mut z, 0.1).unwrap();
        assert_eq!(q, vec![0.3, 0.4]);
        assert!(s.m[0] < 1.0);
        assert!(adam_step(&mut q, &[f64::NAN, 0.0], &mut z, 0.1).is_err());
    }

    #[test]
    fn learning_rate_schedule_endpoints() {
        let c = SearchConfig { iters: 11, ..SearchConfig::default() };
        assert_eq!(c.learning_rate(0), c.lr);
        assert!((c.learning_rate(10) - c.lr_final).abs() < 1e-18);
    }

    #[test]
    fn collapse_detected() {
        let v: StateVector = Array1::from(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        assert!(matches!(reorthogonalize(&v, &v.mapv(|z| z * 2.0)), Err(Error::Collapse)));
    }
}
