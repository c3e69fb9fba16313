//! Fixed-step RK4 integration of the Lindblad master equation.

use ndarray::Array2;

use crate::error::{invalid, Error, Result};
use crate::hilbert::{dagger, hermiticity_error, Operator, SparseOperator, C64, I, ONE, ZERO};
use crate::objective::LogicalPair;

#[derive(Clone, Debug)]
pub struct Dissipator {
    /// Rate β in rad/μs.
    pub rate: f64,
    pub op: Operator,
}

impl Dissipator {
    pub fn new(rate: f64, op: Operator) -> Self {
        Dissipator { rate, op }
    }
}

/// H(α) = Σ α_j H_j together with the dissipators {(β_k, A_k)}.
#[derive(Clone, Debug)]
pub struct LindbladModel {
    pub basis: Vec<Operator>,
    pub alpha: Vec<f64>,
    pub dissipators: Vec<Dissipator>,
    dim: usize,
}

impl LindbladModel {
    pub fn new(
        dim: usize,
        basis: Vec<Operator>,
        alpha: Vec<f64>,
        dissipators: Vec<Dissipator>,
    ) -> Result<Self> {
        if basis.len() != alpha.len() {
            return invalid(format!("{} basis terms but {} coefficients", basis.len(), alpha.len()));
        }
        for (j, h) in basis.iter().enumerate() {
            if h.dim() != (dim, dim) {
                return Err(Error::DimensionMismatch(format!("basis term {j} is not {dim}x{dim}")));
            }
            if hermiticity_error(h) > 1e-12 {
                return invalid(format!("basis term {j} is not Hermitian"));
            }
        }
        for (k, d) in dissipators.iter().enumerate() {
            if d.op.dim() != (dim, dim) {
                return Err(Error::DimensionMismatch(format!("jump operator {k} is not {dim}x{dim}")));
            }
            if !(d.rate >= 0.0) {
                return invalid(format!("dissipator {k} has negative rate {}", d.rate));
            }
        }
        Ok(LindbladModel { basis, alpha, dissipators, dim })
    }

    /// Model with a single fixed Hamiltonian (coefficient 1).
    pub fn with_hamiltonian(h: Operator, dissipators: Vec<Dissipator>) -> Result<Self> {
        let dim = h.nrows();
        LindbladModel::new(dim, vec![h], vec![1.0], dissipators)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian(&self) -> Operator {
        let mut h = Array2::zeros((self.dim, self.dim));
        for (a, term) in self.alpha.iter().zip(&self.basis) {
            if *a != 0.0 {
                h.scaled_add(C64::from(*a), term);
            }
        }
        h
    }

    pub fn rates(&self) -> Vec<f64> {
        self.dissipators.iter().map(|d| d.rate).collect()
    }
}

/// Linear generator acting on row-major flattened matrices.
pub trait Generator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, t: f64, x: &[C64], out: &mut [C64]);
}

/// Time-independent generator built around H_eff = H − (i/2) Σ β A†A.
#[derive(Clone, Debug)]
pub struct LindbladGenerator {
    dim: usize,
    heff: SparseOperator,
    jumps: Vec<(f64, SparseOperator)>,
}

impl LindbladGenerator {
    pub fn new(model: &LindbladModel) -> Self {
        let dim = model.dim();
        let mut heff = model.hamiltonian();
        let mut jumps = Vec::new();
        for d in &model.dissipators {
            if d.rate == 0.0 {
                continue;
            }
            let k = dagger(&d.op).dot(&d.op);
            heff.scaled_add(C64::new(0.0, -0.5 * d.rate), &k);
            jumps.push((d.rate, SparseOperator::from_dense(&d.op)));
        }
        LindbladGenerator { dim, heff: SparseOperator::from_dense(&heff), jumps }
    }

    /// out = L(x)
    pub fn forward(&self, x: &[C64], out: &mut [C64]) {
        out.fill(ZERO);
        self.heff.left(x, out, -I);
        self.heff.right_dag(x, out, I);
        if self.jumps.is_empty() {
            return;
        }
        let mut tmp = vec![ZERO; x.len()];
        for (rate, a) in &self.jumps {
            tmp.fill(ZERO);
            a.left(x, &mut tmp, ONE);
            a.right_dag(&tmp, out, C64::from(*rate));
        }
    }

    /// out = L†(x) under the inner product Re tr(a† b).
    pub fn adjoint(&self, x: &[C64], out: &mut [C64]) {
        out.fill(ZERO);
        self.heff.dag_left(x, out, I);
        self.heff.right(x, out, -I);
        if self.jumps.is_empty() {
            return;
        }
        let mut tmp = vec![ZERO; x.len()];
        for (rate, a) in &self.jumps {
            tmp.fill(ZERO);
            a.dag_left(x, &mut tmp, ONE);
            a.right(&tmp, out, C64::from(*rate));
        }
    }
}

impl Generator for LindbladGenerator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, _t: f64, x: &[C64], out: &mut [C64]) {
        self.forward(x, out);
    }
}

/// out = −i[H, x] + Σ β (A x A† − ½{A†A, x}) for Hermitian H given sparse.
pub fn apply_lindblad_sparse(
    h: &SparseOperator,
    jumps: &[(f64, SparseOperator)],
    x: &[C64],
    out: &mut [C64],
) {
    out.fill(ZERO);
    h.left(x, out, -I);
    h.right(x, out, I);
    let mut ax = vec![ZERO; x.len()];
    let mut xad = vec![ZERO; x.len()];
    for (rate, a) in jumps {
        let r = C64::from(*rate);
        ax.fill(ZERO);
        xad.fill(ZERO);
        a.left(x, &mut ax, ONE);
        a.right_dag(x, &mut xad, ONE);
        a.right_dag(&ax, out, r);
        a.dag_left(&ax, out, -0.5 * r);
        a.right(&xad, out, -0.5 * r);
    }
}

struct TimeDependentGenerator<'a, F: Fn(f64) -> Operator + Sync> {
    dim: usize,
    h_of_t: &'a F,
    jumps: Vec<(f64, SparseOperator)>,
}

impl<F: Fn(f64) -> Operator + Sync> Generator for TimeDependentGenerator<'_, F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, t: f64, x: &[C64], out: &mut [C64]) {
        let h = SparseOperator::from_dense(&(self.h_of_t)(t));
        apply_lindblad_sparse(&h, &self.jumps, x, out);
    }
}

/// Stored states per branch at each grid time. When `steps_per_interval == 1`
/// the grid is the RK4 step grid and the trajectory can feed the adjoint pass.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub tgrid: Vec<f64>,
    pub branches: Vec<Vec<Operator>>,
    pub steps_per_interval: usize,
}

impl Trajectory {
    pub fn final_states(&self) -> Vec<&Operator> {
        self.branches.iter().map(|b| b.last().expect("non-empty trajectory")).collect()
    }

    pub fn states_at(&self, index: usize) -> Vec<&Operator> {
        self.branches.iter().map(|b| &b[index]).collect()
    }
}

pub fn uniform_grid(t_end: f64, intervals: usize) -> Vec<f64> {
    (0..=intervals).map(|k| t_end * k as f64 / intervals as f64).collect()
}

fn check_grid(tgrid: &[f64], steps_per_interval: usize) -> Result<()> {
    if tgrid.is_empty() || tgrid[0] != 0.0 {
        return invalid("time grid must start at 0");
    }
    if tgrid.windows(2).any(|w| !(w[1] > w[0])) || tgrid.iter().any(|t| !t.is_finite()) {
        return invalid("time grid must be finite and strictly ascending");
    }
    if steps_per_interval == 0 {
        return invalid("steps_per_interval must be at least 1");
    }
    Ok(())
}

struct Rk4Scratch {
    k: Vec<C64>,
    acc: Vec<C64>,
    stage: Vec<C64>,
}

fn rk4_step<G: Generator + ?Sized>(gen: &G, t: f64, h: f64, x: &mut [C64], s: &mut Rk4Scratch) {
    let n = x.len();
    gen.apply(t, x, &mut s.k);
    for i in 0..n {
        s.acc[i] = s.k[i];
        s.stage[i] = x[i] + 0.5 * h * s.k[i];
    }
    gen.apply(t + 0.5 * h, &s.stage, &mut s.k);
    for i in 0..n {
        s.acc[i] += 2.0 * s.k[i];
        s.stage[i] = x[i] + 0.5 * h * s.k[i];
    }
    gen.apply(t + 0.5 * h, &s.stage, &mut s.k);
    for i in 0..n {
        s.acc[i] += 2.0 * s.k[i];
        s.stage[i] = x[i] + h * s.k[i];
    }
    gen.apply(t + h, &s.stage, &mut s.k);
    for i in 0..n {
        x[i] += h / 6.0 * (s.acc[i] + s.k[i]);
    }
}

/// Integrates one branch, storing the state at every grid time.
pub fn integrate<G: Generator + ?Sized>(
    gen: &G,
    rho0: &Operator,
    tgrid: &[f64],
    steps_per_interval: usize,
) -> Result<Vec<Operator>> {
    check_grid(tgrid, steps_per_interval)?;
    let dim = gen.dim();
    if rho0.dim() != (dim, dim) {
        return Err(Error::DimensionMismatch(format!(
            "generator dim {dim}, initial state {}x{}",
            rho0.nrows(),
            rho0.ncols()
        )));
    }
    let n = dim * dim;
    let mut x: Vec<C64> = rho0.iter().copied().collect();
    let mut scratch = Rk4Scratch { k: vec![ZERO; n], acc: vec![ZERO; n], stage: vec![ZERO; n] };
    let mut out = Vec::with_capacity(tgrid.len());
    out.push(rho0.clone());
    for w in tgrid.windows(2) {
        let h = (w[1] - w[0]) / steps_per_interval as f64;
        for s in 0..steps_per_interval {
            let t = w[0] + s as f64 * h;
            rk4_step(gen, t, h, &mut x, &mut scratch);
        }
        if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Diverged { time: w[1] });
        }
        out.push(Array2::from_shape_vec((dim, dim), x.clone()).expect("square"));
    }
    Ok(out)
}

pub fn propagate(
    model: &LindbladModel,
    rho0: &Operator,
    tgrid: &[f64],
    steps_per_interval: usize,
) -> Result<Trajectory> {
    let gen = LindbladGenerator::new(model);
    let states = integrate(&gen, rho0, tgrid, steps_per_interval)?;
    Ok(Trajectory { tgrid: tgrid.to_vec(), branches: vec![states], steps_per_interval })
}

pub fn propagate_time_dependent<F>(
    h_of_t: &F,
    dissipators: &[Dissipator],
    rho0: &Operator,
    tgrid: &[f64],
    steps_per_interval: usize,
) -> Result<Trajectory>
where
    F: Fn(f64) -> Operator + Sync,
{
    check_grid(tgrid, steps_per_interval)?;
    let dim = rho0.nrows();
    // Spot-check Hermiticity at the grid and stage times of the first interval.
    let probe: Vec<f64> = tgrid
        .iter()
        .copied()
        .chain(tgrid.windows(2).map(|w| 0.5 * (w[0] + w[1])))
        .collect();
    for t in probe {
        let h = h_of_t(t);
        if h.dim() != (dim, dim) {
            return Err(Error::DimensionMismatch(format!("H({t}) is not {dim}x{dim}")));
        }
        let drift = hermiticity_error(&h);
        if drift > 1e-9 {
            return invalid(format!("H({t}) departs from Hermiticity by {drift:.3e}"));
        }
    }
    let mut jumps = Vec::new();
    for d in dissipators {
        if d.rate < 0.0 {
            return invalid("negative dissipator rate");
        }
        if d.rate > 0.0 {
            jumps.push((d.rate, SparseOperator::from_dense(&d.op)));
        }
    }
    let gen = TimeDependentGenerator { dim, h_of_t, jumps };
    let states = integrate(&gen, rho0, tgrid, steps_per_interval)?;
    Ok(Trajectory { tgrid: tgrid.to_vec(), branches: vec![states], steps_per_interval })
}

/// Initial branch states ρ₀₀ = |ψ₀⟩⟨ψ₀|, ρ₁₁ = |ψ₁⟩⟨ψ₁|, ρ₁₀ = |ψ₁⟩⟨ψ₀|.
pub fn branch_initial_states(pair: &LogicalPair) -> [Operator; 3] {
    use crate::hilbert::outer;
    [outer(&pair.psi0, &pair.psi0), outer(&pair.psi1, &pair.psi1), outer(&pair.psi1, &pair.psi0)]
}

/// Propagates the three code branches with any generator, concurrently.
pub fn integrate_code<G: Generator + ?Sized>(
    gen: &G,
    pair: &LogicalPair,
    tgrid: &[f64],
    steps_per_interval: usize,
) -> Result<Trajectory> {
    pair.check_orthonormal()?;
    let [r00, r11, r10] = branch_initial_states(pair);
    let (a, (b, c)) = rayon::join(
        || integrate(gen, &r00, tgrid, steps_per_interval),
        || {
            rayon::join(
                || integrate(gen, &r11, tgrid, steps_per_interval),
                || integrate(gen, &r10, tgrid, steps_per_interval),
            )
        },
    );
    Ok(Trajectory { tgrid: tgrid.to_vec(), branches: vec![a?, b?, c?], steps_per_interval })
}

pub fn propagate_code(
    model: &LindbladModel,
    pair: &LogicalPair,
    tgrid: &[f64],
    steps_per_interval: usize,
) -> Result<Trajectory> {
    if pair.dim() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "model dim {} vs logical states dim {}",
            model.dim(),
            pair.dim()
        )));
    }
    integrate_code(&LindbladGenerator::new(model), pair, tgrid, steps_per_interval)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{basis_ket, fock_annihilation, outer, trace};
    use approx::assert_relative_eq;

    #[test]
    fn single_photon_decay() {
        let kappa = 0.6283;
        let model = LindbladModel::with_hamiltonian(
            crate::hilbert::zeros(2),
            vec![Dissipator::new(kappa, fock_annihilation(1).unwrap())],
        )
        .unwrap();
        let one = basis_ket(2, 1);
        let traj = propagate(&model, &outer(&one, &one), &[0.0, 1.0], 200).unwrap();
        let rho = traj.final_states()[0];
        assert_relative_eq!(rho[[1, 1]].re, (-kappa).exp(), epsilon = 1e-10);
        assert_relative_eq!(trace(rho).re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_grid() {
        let model = LindbladModel::with_hamiltonian(crate::hilbert::zeros(2), vec![]).unwrap();
        let rho = crate::hilbert::identity(2);
        assert!(propagate(&model, &rho, &[0.5, 1.0], 1).is_err());
        assert!(propagate(&model, &rho, &[0.0, 1.0, 1.0], 1).is_err());
        assert!(propagate(&model, &rho, &[0.0, 1.0], 0).is_err());
    }

    #[test]
    fn large_step_reports_divergence() {
        let h = crate::hilbert::number_operator(3).mapv(|z| z * 1e4);
        let model = LindbladModel::with_hamiltonian(h, vec![]).unwrap();
        let rho = outer(&basis_ket(4, 3), &basis_ket(4, 0));
        let err = propagate(&model, &rho, &uniform_grid(40.0, 40), 1).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }));
    }
}
