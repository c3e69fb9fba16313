//! Gradients of the average fidelity through the master equation.
//!
//! The backward pass is the exact discrete adjoint of the forward RK4 map.
//! For a time-independent generator one RK4 step is ρ ↦ Σ_{k≤4} (hL)^k/k! ρ,
//! so the adjoint step is the same polynomial in hL†, and the parameter
//! sensitivity of a step reduces to Σ_j ⟨S_j, ∂L r_j⟩ with r_j = L^j ρ_n and
//! S_j = Σ_i h^{i+j+1}/(i+j+1)! (L†)^i a_{n+1}.

use ndarray::Array2;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::hilbert::{
    dagger, liouvillian, matexp_propagate, Operator, SparseOperator, StateVector, C64, I, ONE,
    ZERO,
};
use crate::lindblad::{branch_initial_states, propagate_code, uniform_grid, LindbladGenerator, LindbladModel, Trajectory};
use crate::objective::{fidelity_terms, Branches, LogicalPair};

#[derive(Clone, Debug)]
pub struct AdjointBundle {
    /// ∂F̄/∂ρ_b(T) for the branches (ρ₀₀, ρ₁₁, ρ₁₀).
    pub terminal: [Operator; 3],
    /// Adjoint states carried back to t = 0.
    pub initial: [Operator; 3],
    pub grad_alpha: Vec<f64>,
    pub grad_beta: Vec<f64>,
    /// Packed as ∂/∂Re ψ + i ∂/∂Im ψ.
    pub grad_psi0: StateVector,
    pub grad_psi1: StateVector,
}

/// Unit phase c with |z| = Re(c̄ z); falls back to 1 at z = 0.
fn coherence_phase(z: C64, modified: bool) -> C64 {
    if !modified || z.norm() < 1e-14 {
        ONE
    } else {
        z / z.norm()
    }
}

/// ∂F̄/∂ρ_b(T) under ⟨a, δρ⟩ = Re tr(a† δρ).
pub fn terminal_adjoints(pair: &LogicalPair, fin: Branches, modified: bool) -> Result<[Operator; 3]> {
    pair.check_orthonormal()?;
    let [r00, r11, r10] = branch_initial_states(pair);
    let (_, z) = fidelity_terms(pair, fin);
    let c = coherence_phase(z, modified);
    let w0 = r00.mapv(|x| x / 3.0) + r11.mapv(|x| x / 6.0);
    let w1 = r00.mapv(|x| x / 6.0) + r11.mapv(|x| x / 3.0);
    let a10 = r10.mapv(|x| c * x / 3.0);
    Ok([w0, w1, a10])
}

struct BranchGradient {
    initial: Operator,
    g: Operator,
    p: Operator,
    jump: Vec<f64>,
}

fn as_slice(a: &Operator) -> &[C64] {
    a.as_slice().expect("standard layout")
}

fn apply_op(f: impl Fn(&[C64], &mut [C64]), x: &Operator) -> Operator {
    let mut out = Array2::zeros(x.dim());
    f(as_slice(x), out.as_slice_mut().expect("standard layout"));
    out
}

fn backward_branch(
    gen: &LindbladGenerator,
    jumps: &[SparseOperator],
    states: &[Operator],
    tgrid: &[f64],
    terminal: &Operator,
) -> BranchGradient {
    let dim = terminal.nrows();
    let mut a = terminal.clone();
    let mut g = Array2::<C64>::zeros((dim, dim));
    let mut p = Array2::<C64>::zeros((dim, dim));
    let mut jump = vec![0.0; jumps.len()];
    let mut tmp = vec![ZERO; dim * dim];
    let mut w = vec![ZERO; dim * dim];

    for n in (0..states.len() - 1).rev() {
        let h = tgrid[n + 1] - tgrid[n];
        let c = [1.0, h, h * h / 2.0, h * h * h / 6.0, h * h * h * h / 24.0];

        let mut s = Vec::with_capacity(5);
        s.push(a.clone());
        for i in 1..5 {
            let next = apply_op(|x, o| gen.adjoint(x, o), &s[i - 1]);
            s.push(next);
        }
        let mut r = Vec::with_capacity(4);
        r.push(states[n].clone());
        for j in 1..4 {
            let next = apply_op(|x, o| gen.forward(x, o), &r[j - 1]);
            r.push(next);
        }

        for j in 0..4 {
            let mut sj = Array2::<C64>::zeros((dim, dim));
            for i in 0..(4 - j) {
                sj.scaled_add(C64::from(c[i + j + 1]), &s[i]);
            }
            let sd = dagger(&sj);
            let x = r[j].dot(&sd);
            let y = sd.dot(&r[j]);
            g += &(&x - &y);
            p += &(&x + &y);
            for (k, op) in jumps.iter().enumerate() {
                tmp.fill(ZERO);
                w.fill(ZERO);
                op.left(as_slice(&r[j]), &mut tmp, ONE);
                op.right_dag(&tmp, &mut w, ONE);
                jump[k] += sj.iter().zip(&w).map(|(u, v)| u.re * v.re + u.im * v.im).sum::<f64>();
            }
        }

        let mut next = Array2::<C64>::zeros((dim, dim));
        for (ci, si) in c.iter().zip(&s) {
            next.scaled_add(C64::from(*ci), si);
        }
        a = next;
    }
    BranchGradient { initial: a, g, p, jump }
}

/// Backward pass over a trajectory stored at RK4 step resolution.
/// Gradients are of F̄ (ascent direction); ψ gradients are left at zero.
pub fn backpropagate(model: &LindbladModel, traj: &Trajectory, terminal: &[Operator; 3]) -> Result<AdjointBundle> {
    if traj.steps_per_interval != 1 {
        return invalid("backpropagation needs the trajectory stored at every RK4 step");
    }
    if traj.branches.len() != 3 {
        return invalid("backpropagation needs the three code branches");
    }
    let dim = model.dim();
    for t in terminal {
        if t.dim() != (dim, dim) {
            return Err(Error::DimensionMismatch("terminal adjoint dimension".into()));
        }
    }
    let gen = LindbladGenerator::new(model);
    let jumps: Vec<SparseOperator> = model.dissipators.iter().map(|d| SparseOperator::from_dense(&d.op)).collect();
    let run = |b: usize| backward_branch(&gen, &jumps, &traj.branches[b], &traj.tgrid, &terminal[b]);
    let (b0, (b1, b2)) = rayon::join(|| run(0), || rayon::join(|| run(1), || run(2)));

    let g = &(&b0.g + &b1.g) + &b2.g;
    let p = &(&b0.p + &b1.p) + &b2.p;
    let grad_alpha = model
        .basis
        .iter()
        .map(|h| (-I * SparseOperator::from_dense(h).trace_with(as_slice(&g))).re)
        .collect();
    let grad_beta = model
        .dissipators
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let kk = dagger(&d.op).dot(&d.op);
            let anti = SparseOperator::from_dense(&kk).trace_with(as_slice(&p)).re;
            b0.jump[k] + b1.jump[k] + b2.jump[k] - 0.5 * anti
        })
        .collect();
    Ok(AdjointBundle {
        terminal: terminal.clone(),
        initial: [b0.initial, b1.initial, b2.initial],
        grad_alpha,
        grad_beta,
        grad_psi0: StateVector::zeros(dim),
        grad_psi1: StateVector::zeros(dim),
    })
}

fn herm_part_times(a: &Operator, v: &StateVector) -> StateVector {
    a.dot(v) + dagger(a).dot(v)
}

/// Chains the t = 0 adjoints and the explicit ψ-dependence of F̄'s weights
/// through ρ₀₀ = |ψ₀⟩⟨ψ₀|, ρ₁₁ = |ψ₁⟩⟨ψ₁|, ρ₁₀ = |ψ₁⟩⟨ψ₀|.
pub fn grad_logical_states(
    initial: &[Operator; 3],
    pair: &LogicalPair,
    fin: Branches,
    modified: bool,
) -> Result<(StateVector, StateVector)> {
    let dim = pair.dim();
    if initial.iter().any(|a| a.dim() != (dim, dim)) || fin.rho00.dim() != (dim, dim) {
        return Err(Error::DimensionMismatch("adjoint and logical state dimensions differ".into()));
    }
    let (p0, p1) = (&pair.psi0, &pair.psi1);
    let [a00, a11, a10] = initial;
    let mut g0 = herm_part_times(a00, p0) + dagger(a10).dot(p1);
    let mut g1 = herm_part_times(a11, p1) + a10.dot(p0);

    let h0 = herm_part_times(fin.rho00, p0);
    let h1 = herm_part_times(fin.rho11, p0);
    g0 = g0 + h0.mapv(|x| x / 3.0) + h1.mapv(|x| x / 6.0);
    let h0 = herm_part_times(fin.rho00, p1);
    let h1 = herm_part_times(fin.rho11, p1);
    g1 = g1 + h0.mapv(|x| x / 6.0) + h1.mapv(|x| x / 3.0);

    let (_, z) = fidelity_terms(pair, fin);
    let c = coherence_phase(z, modified);
    g0 = g0 + dagger(fin.rho10).dot(p1).mapv(|x| c * x / 3.0);
    g1 = g1 + fin.rho10.dot(p0).mapv(|x| c.conj() * x / 3.0);
    Ok((g0, g1))
}

/// F̄(T) (plain or modified) from a forward pass with `nsteps` RK4 steps.
pub fn objective(model: &LindbladModel, pair: &LogicalPair, t_end: f64, nsteps: usize, modified: bool) -> Result<f64> {
    let traj = propagate_code(model, pair, &[0.0, t_end], nsteps)?;
    Ok(fidelity_value(pair, Branches::last(&traj), modified))
}

pub(crate) fn fidelity_value(pair: &LogicalPair, b: Branches, modified: bool) -> f64 {
    let (pop, z) = fidelity_terms(pair, b);
    pop + if modified { z.norm() } else { z.re }
}

/// F̄(T) from the dense superoperator exponential; oracle for small dims.
pub fn exact_objective(model: &LindbladModel, pair: &LogicalPair, t_end: f64, modified: bool) -> Result<f64> {
    let m = liouvillian(model)?;
    let [a, b, c] = branch_initial_states(pair);
    let fa = matexp_propagate(&m, &a, t_end)?;
    let fb = matexp_propagate(&m, &b, t_end)?;
    let fc = matexp_propagate(&m, &c, t_end)?;
    Ok(fidelity_value(pair, Branches::new(&fa, &fb, &fc), modified))
}

/// Forward pass, fidelity, and all gradients in one call.
pub fn value_and_gradient(
    model: &LindbladModel,
    pair: &LogicalPair,
    t_end: f64,
    nsteps: usize,
    modified: bool,
) -> Result<(f64, AdjointBundle)> {
    if nsteps == 0 || !(t_end > 0.0) {
        return invalid("need T > 0 and at least one RK4 step");
    }
    let traj = propagate_code(model, pair, &uniform_grid(t_end, nsteps), 1)?;
    let fin = Branches::last(&traj);
    let value = fidelity_value(pair, fin, modified);
    let terminal = terminal_adjoints(pair, fin, modified)?;
    let mut bundle = backpropagate(model, &traj, &terminal)?;
    let (g0, g1) = grad_logical_states(&bundle.initial, pair, fin, modified)?;
    bundle.grad_psi0 = g0;
    bundle.grad_psi1 = g1;
    Ok((value, bundle))
}

#[derive(Clone, Debug, Serialize)]
pub struct GradEntry {
    pub name: String,
    pub adjoint: f64,
    pub finite_difference: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradcheckReport {
    pub entries: Vec<GradEntry>,
    pub max_rel_error: f64,
    pub passed: bool,
    pub degenerate: bool,
    pub note: Option<String>,
}

pub const GRADCHECK_REL_TOL: f64 = 1e-5;
pub const GRADCHECK_ABS_FLOOR: f64 = 1e-9;

/// Compares every adjoint gradient component with central differences of
/// the same discretized objective.
pub fn gradcheck(
    model: &LindbladModel,
    pair: &LogicalPair,
    t_end: f64,
    nsteps: usize,
    modified: bool,
) -> Result<GradcheckReport> {
    let (_, bundle) = value_and_gradient(model, pair, t_end, nsteps, modified)?;
    let delta = 1e-6;
    let eval = |m: &LindbladModel, p: &LogicalPair| objective(m, p, t_end, nsteps, modified);
    let mut entries = Vec::new();
    let mut push = |name: String, adjoint: f64, fd: f64| {
        let abs_error = (adjoint - fd).abs();
        let rel_error = abs_error / fd.abs().max(f64::MIN_POSITIVE);
        let pass = abs_error <= (GRADCHECK_REL_TOL * fd.abs()).max(GRADCHECK_ABS_FLOOR);
        entries.push(GradEntry { name, adjoint, finite_difference: fd, abs_error, rel_error, pass });
    };

    for j in 0..model.alpha.len() {
        let mut plus = model.clone();
        let mut minus = model.clone();
        plus.alpha[j] += delta;
        minus.alpha[j] -= delta;
        let fd = (eval(&plus, pair)? - eval(&minus, pair)?) / (2.0 * delta);
        push(format!("alpha[{j}]"), bundle.grad_alpha[j], fd);
    }
    for k in 0..model.dissipators.len() {
        let mut plus = model.clone();
        let mut minus = model.clone();
        plus.dissipators[k].rate += delta;
        minus.dissipators[k].rate = (minus.dissipators[k].rate - delta).max(0.0);
        let span = plus.dissipators[k].rate - minus.dissipators[k].rate;
        let fd = (eval(&plus, pair)? - eval(&minus, pair)?) / span;
        push(format!("beta[{k}]"), bundle.grad_beta[k], fd);
    }
    for (which, grad) in [(0usize, &bundle.grad_psi0), (1, &bundle.grad_psi1)] {
        for n in 0..pair.dim() {
            for (part, unit, comp) in [("re", ONE, grad[n].re), ("im", I, grad[n].im)] {
                let shift = |s: f64| {
                    let mut p = pair.clone();
                    let v = if which == 0 { &mut p.psi0 } else { &mut p.psi1 };
                    v[n] += unit * s;
                    p
                };
                let fd = (eval_unchecked(model, &shift(delta), t_end, nsteps, modified)?
                    - eval_unchecked(model, &shift(-delta), t_end, nsteps, modified)?)
                    / (2.0 * delta);
                push(format!("psi{which}[{n}].{part}"), comp, fd);
            }
        }
    }

    let degenerate = entries.iter().all(|e| e.adjoint.abs() < 1e-12);
    let max_rel_error = entries
        .iter()
        .filter(|e| e.finite_difference.abs() > GRADCHECK_ABS_FLOOR / GRADCHECK_REL_TOL)
        .map(|e| e.rel_error)
        .fold(0.0, f64::max);
    let passed = !degenerate && entries.iter().all(|e| e.pass);
    let note = degenerate.then(|| "degenerate; increase T".to_string());
    Ok(GradcheckReport { entries, max_rel_error, passed, degenerate, note })
}

/// Forward objective without the orthonormality gate, for perturbed states.
fn eval_unchecked(model: &LindbladModel, pair: &LogicalPair, t_end: f64, nsteps: usize, modified: bool) -> Result<f64> {
    use crate::lindblad::{integrate, LindbladGenerator};
    let gen = LindbladGenerator::new(model);
    let grid = [0.0, t_end];
    let [a, b, c] = branch_initial_states(pair);
    let fa = integrate(&gen, &a, &grid, nsteps)?.pop().expect("final state");
    let fb = integrate(&gen, &b, &grid, nsteps)?.pop().expect("final state");
    let fc = integrate(&gen, &c, &grid, nsteps)?.pop().expect("final state");
    Ok(fidelity_value(pair, Branches::new(&fa, &fb, &fc), modified))
}
