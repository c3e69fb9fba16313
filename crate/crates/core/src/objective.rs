//! Fidelity functionals of a logical pair under the three propagated branches
//! ρ₀₀(t), ρ₁₁(t), ρ₁₀(t). The branch ρ₀₁(t) is always taken as ρ₁₀(t)†.

use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hilbert::{basis_ket, expectation, inner, norm, outer, Operator, StateVector, C64};
use crate::lindblad::Trajectory;

#[derive(Clone, Debug, PartialEq)]
pub struct LogicalPair {
    pub psi0: StateVector,
    pub psi1: StateVector,
}

impl LogicalPair {
    pub fn new(psi0: StateVector, psi1: StateVector) -> Result<Self> {
        let pair = LogicalPair::new_unchecked(psi0, psi1)?;
        pair.check_orthonormal()?;
        Ok(pair)
    }

    /// Checks only that the two vectors share a dimension.
    pub fn new_unchecked(psi0: StateVector, psi1: StateVector) -> Result<Self> {
        if psi0.len() != psi1.len() || psi0.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "logical states have lengths {} and {}",
                psi0.len(),
                psi1.len()
            )));
        }
        Ok(LogicalPair { psi0, psi1 })
    }

    /// Basis-state encoding {|i⟩, |j⟩} in a space of the given dimension.
    pub fn basis_states(dim: usize, i: usize, j: usize) -> Self {
        LogicalPair { psi0: basis_ket(dim, i), psi1: basis_ket(dim, j) }
    }

    pub fn dim(&self) -> usize {
        self.psi0.len()
    }

    pub fn overlap(&self) -> f64 {
        inner(&self.psi0, &self.psi1).norm()
    }

    pub fn check_orthonormal(&self) -> Result<()> {
        let ov = self.overlap();
        let n0 = norm(&self.psi0);
        let n1 = norm(&self.psi1);
        if ov > 1e-8 || (n0 - 1.0).abs() > 1e-10 || (n1 - 1.0).abs() > 1e-10 {
            return Err(Error::NotOrthonormal(ov.max((n0 - 1.0).abs()).max((n1 - 1.0).abs())));
        }
        Ok(())
    }

    /// Lifts single-mode states to oscillator ⊗ ancilla with the ancilla in |g⟩.
    pub fn with_ancilla_ground(&self, ancilla_dim: usize) -> LogicalPair {
        let g = basis_ket(ancilla_dim, 0);
        LogicalPair {
            psi0: crate::hilbert::kron_vec(&self.psi0, &g),
            psi1: crate::hilbert::kron_vec(&self.psi1, &g),
        }
    }

    /// The maximally mixed code state ½(|ψ₀⟩⟨ψ₀| + |ψ₁⟩⟨ψ₁|).
    pub fn code_state(&self) -> Operator {
        (outer(&self.psi0, &self.psi0) + outer(&self.psi1, &self.psi1)).mapv(|z| 0.5 * z)
    }

    pub fn bloch_state(&self, theta: f64, phi: f64) -> StateVector {
        let c = (0.5 * theta).cos();
        let s = C64::from_polar((0.5 * theta).sin(), phi);
        self.psi0.mapv(|z| z * c) + self.psi1.mapv(|z| z * s)
    }
}

/// Borrowed branch states (ρ₀₀, ρ₁₁, ρ₁₀) at one instant.
#[derive(Clone, Copy, Debug)]
pub struct Branches<'a> {
    pub rho00: &'a Operator,
    pub rho11: &'a Operator,
    pub rho10: &'a Operator,
}

impl<'a> Branches<'a> {
    pub fn new(rho00: &'a Operator, rho11: &'a Operator, rho10: &'a Operator) -> Self {
        Branches { rho00, rho11, rho10 }
    }

    pub fn from_slice(states: &[&'a Operator]) -> Self {
        Branches { rho00: states[0], rho11: states[1], rho10: states[2] }
    }

    pub fn at(traj: &'a Trajectory, index: usize) -> Self {
        Branches {
            rho00: &traj.branches[0][index],
            rho11: &traj.branches[1][index],
            rho10: &traj.branches[2][index],
        }
    }

    pub fn last(traj: &'a Trajectory) -> Self {
        Branches::at(traj, traj.tgrid.len() - 1)
    }
}

/// ρ_{θφ}(t) assembled from the branches by linearity.
pub fn bloch_density(theta: f64, phi: f64, b: Branches) -> Operator {
    let c = (0.5 * theta).cos();
    let s = (0.5 * theta).sin();
    let w = C64::from_polar(c * s, phi);
    let mut rho = b.rho00.mapv(|z| z * c * c) + b.rho11.mapv(|z| z * s * s);
    rho.scaled_add(w, b.rho10);
    let rho01 = b.rho10.t().mapv(|z| z.conj());
    rho.scaled_add(w.conj(), &rho01);
    rho
}

pub fn single_state_fidelity(theta: f64, phi: f64, pair: &LogicalPair, b: Branches) -> f64 {
    let psi = pair.bloch_state(theta, phi);
    expectation(&psi, &bloch_density(theta, phi, b), &psi).re
}

/// Population terms and the coherence z = tr(⅓ρ₀₁ρ₁₀(t)) of the average fidelity.
pub(crate) fn fidelity_terms(pair: &LogicalPair, b: Branches) -> (f64, C64) {
    let (p0, p1) = (&pair.psi0, &pair.psi1);
    let pop = expectation(p0, b.rho00, p0).re / 3.0
        + expectation(p1, b.rho00, p1).re / 6.0
        + expectation(p0, b.rho11, p0).re / 6.0
        + expectation(p1, b.rho11, p1).re / 3.0;
    let z = expectation(p1, b.rho10, p0) / 3.0;
    (pop, z)
}

pub fn average_fidelity(pair: &LogicalPair, b: Branches) -> f64 {
    let (pop, z) = fidelity_terms(pair, b);
    pop + z.re
}

pub fn modified_average_fidelity(pair: &LogicalPair, b: Branches) -> f64 {
    let (pop, z) = fidelity_terms(pair, b);
    pop + z.norm()
}

pub fn entanglement_fidelity(pair: &LogicalPair, b: Branches) -> f64 {
    let (p0, p1) = (&pair.psi0, &pair.psi1);
    0.25 * (expectation(p0, b.rho00, p0).re
        + expectation(p1, b.rho11, p1).re
        + 2.0 * expectation(p1, b.rho10, p0).re)
}

/// Average fidelity of the bare {|0⟩, |1⟩} encoding under photon loss at rate κ.
pub fn break_even(t: f64, kappa: f64) -> f64 {
    ((-kappa * t).exp() + 2.0 * (-0.5 * kappa * t).exp() + 3.0) / 6.0
}

/// Single-state fidelities on a regular θ ∈ [0, π], φ ∈ [0, 2π) grid.
#[derive(Clone, Debug)]
pub struct BlochMap {
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
    /// values[[i, j]] at (thetas[i], phis[j])
    pub values: Array2<f64>,
}

impl BlochMap {
    /// Sphere average with trapezoid weights in θ times sin θ.
    pub fn sphere_mean(&self) -> f64 {
        let n = self.thetas.len();
        let h = PI / (n - 1) as f64;
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, th) in self.thetas.iter().enumerate() {
            let edge = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            let w = edge * h * th.sin();
            num += w * self.values.row(i).mean().unwrap_or(0.0);
            den += w;
        }
        num / den
    }
}

pub fn bloch_map(pair: &LogicalPair, b: Branches, n_theta: usize, n_phi: usize) -> Result<BlochMap> {
    if n_theta < 2 || n_phi < 2 {
        return invalid("Bloch grid needs at least 2 points per axis");
    }
    let thetas: Vec<f64> = (0..n_theta).map(|i| PI * i as f64 / (n_theta - 1) as f64).collect();
    let phis: Vec<f64> = (0..n_phi).map(|j| 2.0 * PI * j as f64 / n_phi as f64).collect();
    let values = Array2::from_shape_fn((n_theta, n_phi), |(i, j)| {
        single_state_fidelity(thetas[i], phis[j], pair, b)
    });
    Ok(BlochMap { thetas, phis, values })
}

/// 2 tr(ρ_A ρ_B) for the maximally mixed code states; 1 iff the spans coincide.
pub fn subspace_overlap(a: &LogicalPair, b: &LogicalPair) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch("pairs live in different spaces".into()));
    }
    let mut s = 0.0;
    for u in [&a.psi0, &a.psi1] {
        for v in [&b.psi0, &b.psi1] {
            s += inner(u, v).norm_sqr();
        }
    }
    Ok(0.5 * s)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FidelityCurve {
    pub tgrid: Vec<f64>,
    pub values: Vec<f64>,
    pub baseline: Vec<f64>,
}

/// F̄(t) along a three-branch trajectory, with the break-even baseline at rate κ.
pub fn fidelity_curve(pair: &LogicalPair, traj: &Trajectory, kappa: f64) -> FidelityCurve {
    let values = (0..traj.tgrid.len()).map(|i| average_fidelity(pair, Branches::at(traj, i))).collect();
    let baseline = traj.tgrid.iter().map(|&t| break_even(t, kappa)).collect();
    FidelityCurve { tgrid: traj.tgrid.clone(), values, baseline }
}
