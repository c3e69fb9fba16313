//! Analytic √3 codes, their locality-constrained correction Hamiltonians,
//! reduced models, the |0⟩/|2⟩ stabilization example, and Wigner grids.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::ansatz::{hamiltonian_distance, lift_to_joint};
use crate::error::{invalid, Error, Result};
use crate::hilbert::{
    basis_ket, dagger, expectation, fock_annihilation, identity, inner, norm, outer, tensor, Operator,
    StateVector, C64, ONE, ZERO,
};
use crate::lindblad::{propagate_code, uniform_grid, Dissipator, LindbladModel};
use crate::objective::{average_fidelity, fidelity_curve, single_state_fidelity, Branches, FidelityCurve, LogicalPair};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sqrt3Variant {
    /// ψ₁ supported on {|1⟩, |4⟩, |6⟩}.
    One,
    /// ψ₁ supported on {|1⟩, |4⟩, |7⟩}.
    Two,
}

impl Sqrt3Variant {
    pub fn from_index(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Sqrt3Variant::One),
            2 => Ok(Sqrt3Variant::Two),
            _ => invalid(format!("unknown sqrt3 variant {v}")),
        }
    }

    /// Highest Fock level of ψ₁.
    pub fn top(self) -> usize {
        match self {
            Sqrt3Variant::One => 6,
            Sqrt3Variant::Two => 7,
        }
    }
}

/// ψ₀ = a₀|0⟩ + a₃|3⟩, ψ₁ = a₁|1⟩ + a₄|4⟩ + a_k|k⟩ with k = 6 or 7.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Sqrt3Coefficients {
    pub a0: f64,
    pub a3: f64,
    pub a1: f64,
    pub a4: f64,
    pub ak: f64,
    pub k: usize,
}

pub fn sqrt3_coefficients(variant: Sqrt3Variant) -> Sqrt3Coefficients {
    let s3 = 3f64.sqrt();
    let a0 = (1.0 - 1.0 / s3).sqrt();
    let a3 = 3f64.powf(-0.25);
    match variant {
        Sqrt3Variant::One => Sqrt3Coefficients {
            a0,
            a3,
            a1: (2.0 * (6.0 - s3) / (s3 + 9.0)).sqrt(),
            a4: -((s3 - 1.0) * (6.0 - s3) / (2.0 * (s3 + 9.0))).sqrt(),
            ak: ((3.0 - s3) / (2.0 * (s3 + 9.0))).sqrt(),
            k: 6,
        },
        Sqrt3Variant::Two => Sqrt3Coefficients {
            a0,
            a3,
            a1: (4.0 * (7.0 - s3) / (3.0 * (7.0 + s3))).sqrt(),
            a4: -((s3 - 1.0) * (7.0 - s3) / (3.0 * (7.0 + s3))).sqrt(),
            ak: ((3.0 - s3) / (3.0 * (7.0 + s3))).sqrt(),
            k: 7,
        },
    }
}

impl Sqrt3Coefficients {
    /// β of ψ₆ ∝ a₁|0⟩ + 2a₄|3⟩ + β|k−1⟩, fixed by ψ₆ ⊥ ψ₃.
    pub fn beta(&self) -> f64 {
        -(self.a1 * self.a1 + 4.0 * self.a4 * self.a4) / ((self.k as f64).sqrt() * self.ak)
    }

    /// β′ of ψ₅ ∝ a₁|1⟩ + a₄|4⟩ + β′|k⟩, fixed by ψ₅ ⊥ ψ₁.
    pub fn beta_prime(&self) -> f64 {
        -(self.a1 * self.a1 + self.a4 * self.a4) / self.ak
    }

    /// Residuals of the algebraic system fixing the code, by name.
    pub fn constraint_residuals(&self) -> Vec<(&'static str, f64)> {
        let Sqrt3Coefficients { a0, a3, a1, a4, ak, k } = *self;
        let kf = k as f64;
        let beta = self.beta();
        vec![
            ("normalization_psi0", a0 * a0 + a3 * a3 - 1.0),
            ("normalization_psi1", a1 * a1 + a4 * a4 + ak * ak - 1.0),
            ("error_orthogonality", a0 * a1 + 2.0 * a3 * a4),
            ("equal_photon_loss", 3.0 * a3 * a3 - (a1 * a1 + 4.0 * a4 * a4 + kf * ak * ak)),
            ("beta_elimination", -(a1 * a1 + 4.0 * a4 * a4) * (1.0 - a1 * a1) + kf * ak * ak * a1 * a1),
            ("beta_orthogonality", a1 * a1 + 4.0 * a4 * a4 + kf.sqrt() * beta * ak),
            ("beta_locality", beta * (1.0 - a1 * a1) + kf.sqrt() * ak * a1 * a1),
        ]
    }
}

#[derive(Clone, Debug)]
pub struct Sqrt3Construction {
    pub variant: Sqrt3Variant,
    pub cutoff: usize,
    pub coefficients: Sqrt3Coefficients,
    pub pair: LogicalPair,
    /// ψ₂ ∝ âψ₀, ψ₃ ∝ âψ₁.
    pub error_pair: (StateVector, StateVector),
    /// ψ₄, ψ₅, ψ₆ spanning part of the orthogonal complement.
    pub orthogonal_basis: Vec<StateVector>,
    pub beta: f64,
    pub beta_prime: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub normalizations: [f64; 4],
    /// Unscaled H̃ = |ψ₂⟩⟨ψ₀| + |ψ₃⟩⟨ψ₁| + β₁|ψ₆⟩⟨ψ₄| + β₂|ψ₆⟩⟨ψ₅|.
    pub h_tilde: Operator,
    /// |ψ₄⟩⟨ψ₂| and (a_k|4⟩ − a₄|k⟩)⟨k−1|.
    pub stabilization_terms: Vec<Operator>,
}

impl Sqrt3Construction {
    /// The single-mode couplings whose vanishing fixes β₁, β₂.
    pub fn locality_entries(&self) -> Vec<((usize, usize), f64)> {
        let k = self.coefficients.k;
        [(0, 4), (0, k), (3, k), (k - 1, 1)]
            .iter()
            .map(|&(m, n)| ((m, n), self.h_tilde[[m, n]].norm()))
            .collect()
    }

    pub fn h_tilde_with_stabilization(&self) -> Operator {
        let mut h = self.h_tilde.clone();
        for s in &self.stabilization_terms {
            h += s;
        }
        h
    }
}

fn fock_vector(cutoff: usize, amps: &[(usize, f64)]) -> StateVector {
    let mut v = Array1::zeros(cutoff + 1);
    for &(n, a) in amps {
        v[n] = C64::from(a);
    }
    v
}

fn normalized(v: StateVector) -> (StateVector, f64) {
    let n = norm(&v);
    (v.mapv(|z| z / n), 1.0 / n)
}

pub fn sqrt3_construction(variant: Sqrt3Variant, cutoff: usize) -> Result<Sqrt3Construction> {
    let k = variant.top();
    if cutoff < k {
        return invalid(format!("the sqrt3 code needs cutoff >= {k}"));
    }
    let c = sqrt3_coefficients(variant);
    let kf = k as f64;
    let psi0 = fock_vector(cutoff, &[(0, c.a0), (3, c.a3)]);
    let psi1 = fock_vector(cutoff, &[(1, c.a1), (4, c.a4), (k, c.ak)]);
    let psi2 = fock_vector(cutoff, &[(2, 1.0)]);
    let (psi3, n1) = normalized(fock_vector(cutoff, &[(0, c.a1), (3, 2.0 * c.a4), (k - 1, kf.sqrt() * c.ak)]));
    let beta = c.beta();
    let beta_prime = c.beta_prime();
    let (psi6, n2) = normalized(fock_vector(cutoff, &[(0, c.a1), (3, 2.0 * c.a4), (k - 1, beta)]));
    let (psi4, n3) = normalized(fock_vector(cutoff, &[(1, c.a4), (4, -c.a1)]));
    let (psi5, n4) = normalized(fock_vector(cutoff, &[(1, c.a1), (4, c.a4), (k, beta_prime)]));

    // Least-squares solve of the four locality equations for (β₁, β₂).
    let base = outer(&psi3, &psi1);
    let t1 = outer(&psi6, &psi4);
    let t2 = outer(&psi6, &psi5);
    let entries = [(0, 4), (0, k), (3, k), (k - 1, 1)];
    let (mut m11, mut m12, mut m22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(i, j) in &entries {
        let (x, y, b) = (t1[[i, j]].re, t2[[i, j]].re, -base[[i, j]].re);
        m11 += x * x;
        m12 += x * y;
        m22 += y * y;
        r1 += x * b;
        r2 += y * b;
    }
    let det = m11 * m22 - m12 * m12;
    if det.abs() < 1e-14 {
        return Err(Error::Consistency("singular locality system".into()));
    }
    let beta1 = (m22 * r1 - m12 * r2) / det;
    let beta2 = (m11 * r2 - m12 * r1) / det;

    let h_tilde = outer(&psi2, &psi0) + &base + t1.mapv(|z| z * beta1) + t2.mapv(|z| z * beta2);
    let stab_row = fock_vector(cutoff, &[(4, c.ak), (k, -c.a4)]);
    let stabilization_terms =
        vec![outer(&psi4, &psi2), outer(&stab_row, &basis_ket(cutoff + 1, k - 1))];

    let construction = Sqrt3Construction {
        variant,
        cutoff,
        coefficients: c,
        pair: LogicalPair::new(psi0, psi1)?,
        error_pair: (psi2, psi3),
        orthogonal_basis: vec![psi4, psi5, psi6],
        beta,
        beta_prime,
        beta1,
        beta2,
        normalizations: [n1, n2, n3, n4],
        h_tilde,
        stabilization_terms,
    };
    for h in [&construction.h_tilde, &construction.h_tilde_with_stabilization()] {
        let d = hamiltonian_distance(h);
        if d > 2 {
            return Err(Error::Consistency(format!("constructed H~ has distance {d}")));
        }
    }
    Ok(construction)
}

pub fn sqrt3_code(variant: Sqrt3Variant, cutoff: usize) -> Result<LogicalPair> {
    Ok(sqrt3_construction(variant, cutoff)?.pair)
}

/// Joint Hamiltonian H̃† ⊗ |e⟩⟨g| + H̃ ⊗ |g⟩⟨e| with the largest coupling set to `scale`.
pub fn sqrt3_hamiltonian(
    variant: Sqrt3Variant,
    cutoff: usize,
    scale: f64,
    include_stabilization: bool,
) -> Result<(Operator, Sqrt3Construction)> {
    if !(scale > 0.0) {
        return invalid("scale must be positive");
    }
    let c = sqrt3_construction(variant, cutoff)?;
    let ht = if include_stabilization { c.h_tilde_with_stabilization() } else { c.h_tilde.clone() };
    let peak = ht.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let scaled = ht.mapv(|z| z * scale / peak);
    Ok((lift_to_joint(&scaled), c))
}

#[derive(Clone, Debug, Serialize)]
pub struct KlEntry {
    pub e: usize,
    pub e_prime: usize,
    /// [[M00, M01], [M10, M11]] with M_ij = ⟨ψ_i|E†E′|ψ_j⟩, as [re, im].
    pub matrix: [[[f64; 2]; 2]; 2],
    pub lambda: [f64; 2],
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KlReport {
    pub entries: Vec<KlEntry>,
    pub max_residual: f64,
    pub pass: bool,
}

/// Knill–Laflamme residuals over E, E′ ∈ {I} ∪ `error_ops`.
pub fn kl_check(pair: &LogicalPair, error_ops: &[Operator], tol: f64) -> Result<KlReport> {
    pair.check_orthonormal()?;
    let dim = pair.dim();
    let mut ops = vec![identity(dim)];
    for e in error_ops {
        if e.dim() != (dim, dim) {
            return Err(Error::DimensionMismatch("error operator dimension".into()));
        }
        ops.push(e.clone());
    }
    let states = [&pair.psi0, &pair.psi1];
    let mut entries = Vec::new();
    for (i, e) in ops.iter().enumerate() {
        for (j, f) in ops.iter().enumerate() {
            let prod = dagger(e).dot(f);
            let m: Vec<Vec<C64>> =
                states.iter().map(|u| states.iter().map(|v| expectation(u, &prod, v)).collect()).collect();
            let lambda = (m[0][0] + m[1][1]) * 0.5;
            let residual = (m[0][0] - lambda).norm().max((m[1][1] - lambda).norm()).max(m[0][1].norm()).max(m[1][0].norm());
            let pack = |z: C64| [z.re, z.im];
            entries.push(KlEntry {
                e: i,
                e_prime: j,
                matrix: [[pack(m[0][0]), pack(m[0][1])], [pack(m[1][0]), pack(m[1][1])]],
                lambda: pack(lambda),
                residual,
            });
        }
    }
    let max_residual = entries.iter().map(|e| e.residual).fold(0.0, f64::max);
    Ok(KlReport { entries, max_residual, pass: max_residual < tol })
}

/// Single-mode model with jump √γ(|ψ₀⟩⟨ψ₂| + |ψ₁⟩⟨ψ₃|) and photon loss √κ â.
pub fn effective_dissipator_model(
    pair: &LogicalPair,
    error_pair: (&StateVector, &StateVector),
    rate: f64,
    kappa: f64,
) -> Result<LindbladModel> {
    let dim = pair.dim();
    let (psi2, psi3) = error_pair;
    let states = [&pair.psi0, &pair.psi1, psi2, psi3];
    for (i, u) in states.iter().enumerate() {
        for (j, v) in states.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            if (inner(u, v) - target).norm() > 1e-8 {
                return Err(Error::NotOrthonormal((inner(u, v) - target).norm()));
            }
        }
    }
    let jump = outer(&pair.psi0, psi2) + outer(&pair.psi1, psi3);
    LindbladModel::with_hamiltonian(
        Array2::zeros((dim, dim)),
        vec![Dissipator::new(rate, jump), Dissipator::new(kappa, fock_annihilation(dim - 1)?)],
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct FockStabilizationParams {
    /// Coupling g of |2,e⟩⟨1,g| + h.c., rad/μs.
    pub coupling: f64,
    pub kappa: f64,
    pub kappa_q: f64,
    pub cutoff: usize,
    pub t_end: f64,
    pub points: usize,
    pub steps_per_interval: usize,
}

impl Default for FockStabilizationParams {
    fn default() -> Self {
        FockStabilizationParams {
            coupling: 2.0 * PI * 80.0,
            kappa: 2.0 * PI * 0.1,
            kappa_q: 2.0 * PI * 160.0,
            cutoff: 3,
            t_end: 8.0,
            points: 16,
            steps_per_interval: 800,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FockStabilization {
    pub curve: FidelityCurve,
    /// F at θ = 0 and θ = π at the final time.
    pub pole_fidelities: [f64; 2],
    /// F at θ = π/2, φ = 0 at the final time.
    pub equator_fidelity: f64,
}

/// Code {|0⟩, |2⟩}: a single loss |2⟩ → |1⟩ is pumped back via |1,g⟩ ↔ |2,e⟩
/// and ancilla decay, which keeps populations but not the coherence.
pub fn fock_stabilization_example(p: &FockStabilizationParams) -> Result<FockStabilization> {
    if p.cutoff < 2 {
        return invalid("the |0>/|2> example needs cutoff >= 2");
    }
    let dim = 2 * (p.cutoff + 1);
    let ket = |n: usize, s: usize| basis_ket(dim, 2 * n + s);
    let coupling = outer(&ket(2, 1), &ket(1, 0));
    let h = (&coupling + &dagger(&coupling)).mapv(|z| z * p.coupling);
    let a = tensor(&fock_annihilation(p.cutoff)?, &identity(2));
    let b = tensor(&identity(p.cutoff + 1), &fock_annihilation(1)?);
    let model = LindbladModel::with_hamiltonian(h, vec![Dissipator::new(p.kappa, a), Dissipator::new(p.kappa_q, b)])?;
    let pair = LogicalPair::new(ket(0, 0), ket(2, 0))?;
    let traj = propagate_code(&model, &pair, &uniform_grid(p.t_end, p.points), p.steps_per_interval)?;
    let last = Branches::last(&traj);
    Ok(FockStabilization {
        curve: fidelity_curve(&pair, &traj, p.kappa),
        pole_fidelities: [single_state_fidelity(0.0, 0.0, &pair, last), single_state_fidelity(PI, 0.0, &pair, last)],
        equator_fidelity: single_state_fidelity(0.5 * PI, 0.0, &pair, last),
    })
}

/// Convenience: F̄ at the end of a joint simulation of the √3 Hamiltonian.
pub fn sqrt3_joint_model(
    variant: Sqrt3Variant,
    cutoff: usize,
    scale: f64,
    include_stabilization: bool,
    kappa: f64,
    kappa_q: f64,
) -> Result<(LindbladModel, LogicalPair)> {
    let (h, c) = sqrt3_hamiltonian(variant, cutoff, scale, include_stabilization)?;
    let a = tensor(&fock_annihilation(cutoff)?, &identity(2));
    let b = tensor(&identity(cutoff + 1), &fock_annihilation(1)?);
    let model = LindbladModel::with_hamiltonian(h, vec![Dissipator::new(kappa, a), Dissipator::new(kappa_q, b)])?;
    Ok((model, c.pair.with_ancilla_ground(2)))
}

pub fn final_average_fidelity(model: &LindbladModel, pair: &LogicalPair, t: f64, steps: usize) -> Result<f64> {
    let traj = propagate_code(model, pair, &[0.0, t], steps)?;
    Ok(average_fidelity(pair, Branches::last(&traj)))
}

#[derive(Clone, Debug)]
pub struct WignerGrid {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    /// values[[i, j]] = W(xs[i], ps[j])
    pub values: Array2<f64>,
    /// Largest fraction of tr ρ lost by truncating the displaced state.
    pub leakage: f64,
    pub warning: Option<String>,
}

impl WignerGrid {
    /// ∬ W dx dp by the trapezoid rule.
    pub fn integral(&self) -> f64 {
        let w = |v: &[f64], i: usize| {
            let left = if i > 0 { v[i] - v[i - 1] } else { 0.0 };
            let right = if i + 1 < v.len() { v[i + 1] - v[i] } else { 0.0 };
            0.5 * (left + right)
        };
        let mut s = 0.0;
        for i in 0..self.xs.len() {
            for j in 0..self.ps.len() {
                s += w(&self.xs, i) * w(&self.ps, j) * self.values[[i, j]];
            }
        }
        s
    }
}

/// Generalized Laguerre polynomials L_k^{(a)}(x) for k = 0..=n.
fn laguerre_all(n: usize, a: f64, x: f64) -> Vec<f64> {
    let mut l = Vec::with_capacity(n + 1);
    l.push(1.0);
    if n >= 1 {
        l.push(1.0 + a - x);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + a - x) * l[k] - (kf + a) * l[k - 1]) / (kf + 1.0);
        l.push(next);
    }
    l
}

/// ⟨m|D(α)|n⟩ for m < rows, n < cols, from the closed Laguerre form.
fn displacement_elements(alpha: C64, rows: usize, cols: usize, log_fact: &[f64]) -> Array2<C64> {
    let x = alpha.norm_sqr();
    let r = alpha.norm();
    let phase = if r > 0.0 { alpha / r } else { ONE };
    let mut d = Array2::zeros((rows, cols));
    let size = rows.max(cols);
    for delta in 0..size {
        let lag = laguerre_all(size, delta as f64, x);
        for lo in 0..size {
            let hi = lo + delta;
            if hi >= size {
                break;
            }
            let mag = if delta == 0 {
                (-0.5 * x).exp()
            } else if r == 0.0 {
                0.0
            } else {
                (0.5 * (log_fact[lo] - log_fact[hi]) + delta as f64 * r.ln() - 0.5 * x).exp()
            };
            let val = mag * lag[lo];
            // m ≥ n: α^{m−n}; m < n: (−α*)^{n−m}
            if hi < rows && lo < cols {
                d[[hi, lo]] = phase.powu(delta as u32) * val;
            }
            if delta > 0 && lo < rows && hi < cols {
                d[[lo, hi]] = (-phase.conj()).powu(delta as u32) * val;
            }
        }
    }
    d
}

/// W(x, p) = (1/π) tr[Π D†(α) ρ D(α)] with α = (x + ip)/√2.
pub fn wigner(rho: &Operator, xs: &[f64], ps: &[f64]) -> Result<WignerGrid> {
    if rho.nrows() != rho.ncols() || rho.nrows() == 0 {
        return Err(Error::DimensionMismatch("Wigner input must be a square density matrix".into()));
    }
    if xs.iter().chain(ps).any(|v| !v.is_finite()) {
        return invalid("Wigner grid must be finite");
    }
    let n = rho.nrows();
    let tr: f64 = rho.diag().iter().map(|z| z.re).sum();
    let rmax2 = xs.iter().map(|x| x * x).fold(0.0, f64::max) + ps.iter().map(|p| p * p).fold(0.0, f64::max);
    let big = n + 30 + (2.0 * rmax2).ceil() as usize;
    let mut log_fact = vec![0.0; big + 1];
    for k in 1..=big {
        log_fact[k] = log_fact[k - 1] + (k as f64).ln();
    }
    let mut values = Array2::zeros((xs.len(), ps.len()));
    let mut leakage: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        for (j, &p) in ps.iter().enumerate() {
            let alpha = C64::new(x, p) / 2f64.sqrt();
            let d = displacement_elements(alpha, n, big, &log_fact);
            // (D† ρ D)_kk = Σ_{m,n} conj(D_mk) ρ_mn D_nk
            let rd = rho.dot(&d);
            let mut w = 0.0;
            let mut kept = 0.0;
            for k in 0..big {
                let mut s = ZERO;
                for m in 0..n {
                    s += d[[m, k]].conj() * rd[[m, k]];
                }
                kept += s.re;
                w += if k % 2 == 0 { s.re } else { -s.re };
            }
            values[[i, j]] = w / PI;
            if tr.abs() > 0.0 {
                leakage = leakage.max(1.0 - kept / tr);
            }
        }
    }
    let warning = (leakage > 0.01).then(|| format!("displaced-state truncation leaks {:.2}% of the trace", 100.0 * leakage));
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    Ok(WignerGrid { xs: xs.to_vec(), ps: ps.to_vec(), values, leakage, warning })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn variant_one_coefficients() {
        let c = sqrt3_coefficients(Sqrt3Variant::One);
        assert_relative_eq!(c.a0, 0.650115167, epsilon = 1e-8);
        assert_relative_eq!(c.a3, 0.759835686, epsilon = 1e-8);
        assert_relative_eq!(c.a1, 0.891832425, epsilon = 1e-8);
        assert_relative_eq!(c.a4, -0.381525767, epsilon = 1e-8);
        assert_relative_eq!(c.ak, 0.243049408, epsilon = 1e-8);
    }

    #[test]
    fn displacement_of_vacuum_is_coherent_state() {
        let alpha = C64::new(0.7, -0.3);
        let mut lf = vec![0.0; 12];
        for k in 1..12 {
            lf[k] = lf[k - 1] + (k as f64).ln();
        }
        let d = displacement_elements(alpha, 11, 11, &lf);
        let mut fact = 1.0;
        for m in 0..11 {
            if m > 0 {
                fact *= m as f64;
            }
            let expect = (-0.5 * alpha.norm_sqr()).exp() * alpha.powu(m as u32) / fact.sqrt();
            assert!((d[[m, 0]] - expect).norm() < 1e-13);
        }
    }
}
