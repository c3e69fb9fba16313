//! Oscillator coupled to a three-level qubit:
//! H_ab = Δ₁|e⟩⟨e| + Δ₂|f⟩⟨f| + g₁(â|e⟩⟨g| + h.c.) + g₂(â|f⟩⟨e| + h.c.).
//! The excitation number N splits H_ab into blocks {|N,g⟩, |N−1,e⟩, |N−2,f⟩}.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::hilbert::{StateVector, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CouplerParams {
    pub delta1: f64,
    pub delta2: f64,
    pub g1: f64,
    pub g2: f64,
    pub n_max: usize,
}

impl CouplerParams {
    /// Matched point g₂²/g₁² = Δ₂/Δ₁ = r.
    pub fn matched(delta1: f64, g1: f64, r: f64, n_max: usize) -> Self {
        CouplerParams { delta1, delta2: r * delta1, g1, g2: r.sqrt() * g1, n_max }
    }

    pub fn is_dispersive(&self) -> bool {
        let gmax = self.g1.abs().max(self.g2.abs()) * (self.n_max as f64).sqrt();
        self.delta1.abs() >= 5.0 * gmax && self.delta2.abs() >= 5.0 * gmax
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Branch {
    G,
    E,
    F,
}

impl Branch {
    fn level(self) -> usize {
        match self {
            Branch::G => 0,
            Branch::E => 1,
            Branch::F => 2,
        }
    }
}

/// One excitation-number block, eigenvectors indexed by branch.
#[derive(Clone, Debug, Serialize)]
pub struct Block {
    pub excitations: usize,
    /// Energies of the g, e, f branches (NaN where the bare state does not exist).
    pub energies: [f64; 3],
    /// vectors[branch][k] is the amplitude on |N−k, k⟩ (k = g, e, f level).
    pub vectors: [[f64; 3]; 3],
}

#[derive(Clone, Debug, Serialize)]
pub struct DressedSpectrum {
    pub params: CouplerParams,
    pub blocks: Vec<Block>,
    /// δ_n = E_{n,g} − E_{n−1,g} for n = 1..=n_max.
    pub emission: Vec<f64>,
    pub bandwidth: f64,
}

impl DressedSpectrum {
    /// E_{n,s}; the state |~n,s⟩ lives in block N = n + level(s).
    pub fn energy(&self, n: usize, branch: Branch) -> f64 {
        self.blocks[n + branch.level()].energies[branch.level()]
    }

    pub fn max_level(&self) -> usize {
        self.blocks.len() - 1
    }

    /// Dressed state |~n,s⟩ in the bare basis a(0..=a_cutoff) ⊗ {g,e,f}, index 3m + level.
    pub fn state(&self, n: usize, branch: Branch, a_cutoff: usize) -> StateVector {
        let big_n = n + branch.level();
        let block = &self.blocks[big_n];
        let mut v = Array1::zeros(3 * (a_cutoff + 1));
        for k in 0..3 {
            if k <= big_n && big_n - k <= a_cutoff {
                v[3 * (big_n - k) + k] = C64::from(block.vectors[branch.level()][k]);
            }
        }
        v
    }
}

fn block_matrix(big_n: usize, p: &CouplerParams) -> (usize, DMatrix<f64>) {
    let size = (big_n + 1).min(3);
    let mut m = DMatrix::zeros(size, size);
    let diag = [0.0, p.delta1, p.delta2];
    for k in 0..size {
        m[(k, k)] = diag[k];
    }
    if size >= 2 {
        let c = (big_n as f64).sqrt() * p.g1;
        m[(0, 1)] = c;
        m[(1, 0)] = c;
    }
    if size == 3 {
        let c = ((big_n - 1) as f64).sqrt() * p.g2;
        m[(1, 2)] = c;
        m[(2, 1)] = c;
    }
    (size, m)
}

fn diagonalize_block(big_n: usize, p: &CouplerParams) -> Result<Block> {
    let (size, m) = block_matrix(big_n, p);
    let eig = SymmetricEigen::new(m);
    let mut energies = [f64::NAN; 3];
    let mut vectors = [[0.0; 3]; 3];
    let mut taken = [false; 3];
    for bare in 0..size {
        let (best, overlap) = (0..size)
            .map(|col| (col, eig.eigenvectors[(bare, col)].powi(2)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty block");
        if overlap < 0.5 || taken[best] {
            return Err(Error::LabeledCrossing { block: big_n, overlap });
        }
        taken[best] = true;
        energies[bare] = eig.eigenvalues[best];
        let sign = eig.eigenvectors[(bare, best)].signum();
        for k in 0..size {
            vectors[bare][k] = sign * eig.eigenvectors[(k, best)];
        }
    }
    Ok(Block { excitations: big_n, energies, vectors })
}

/// Exact diagonalization of blocks N = 0..=levels + 2, so that E_{n,s} is
/// available for every n ≤ levels and every branch.
pub fn coupler_spectrum_to(params: &CouplerParams, levels: usize) -> Result<DressedSpectrum> {
    if params.n_max < 2 {
        return invalid("n_max must be at least 2");
    }
    if !params.is_dispersive() {
        log::warn!("coupler parameters are outside the dispersive regime; branch labels may be unreliable");
    }
    let blocks = (0..=levels.max(params.n_max) + 2).map(|n| diagonalize_block(n, params)).collect::<Result<Vec<_>>>()?;
    let eg: Vec<f64> = (0..=params.n_max).map(|n| blocks[n].energies[0]).collect();
    let emission: Vec<f64> = eg.windows(2).map(|w| w[1] - w[0]).collect();
    let hi = emission.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = emission.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(DressedSpectrum { params: *params, blocks, emission, bandwidth: hi - lo })
}

pub fn coupler_spectrum(params: &CouplerParams) -> Result<DressedSpectrum> {
    coupler_spectrum_to(params, params.n_max)
}

/// λ³ − (Δ₁+Δ₂)λ² + [Δ₁Δ₂ − N g₁² − (N−1) g₂²]λ + N g₁² Δ₂, relative to Δ³.
pub fn cubic_residual(big_n: usize, lambda: f64, p: &CouplerParams) -> f64 {
    let nf = big_n as f64;
    let (d1, d2, g1s, g2s) = (p.delta1, p.delta2, p.g1 * p.g1, p.g2 * p.g2);
    let poly = lambda.powi(3) - (d1 + d2) * lambda * lambda + (d1 * d2 - nf * g1s - (nf - 1.0) * g2s) * lambda
        + nf * g1s * d2;
    let scale = d1.abs().max(d2.abs()).max(lambda.abs()).powi(3);
    poly.abs() / scale
}

/// Second-order shift of |~n+2, g⟩.
pub fn lambda2(n: usize, p: &CouplerParams) -> f64 {
    let m = (n + 2) as f64;
    let g1s = p.g1 * p.g1;
    let g2s = p.g2 * p.g2;
    m * g1s / (p.delta1 * p.delta1) * (m * g1s / p.delta1 - (m - 1.0) * g2s / p.delta2)
}

pub fn bandwidth(params: &CouplerParams) -> Result<f64> {
    Ok(coupler_spectrum(params)?.bandwidth)
}

/// E_{n+1,g} − 2E_{n,g} + E_{n−1,g} for n = 1..n_max−1.
pub fn second_differences(params: &CouplerParams) -> Result<Vec<f64>> {
    let s = coupler_spectrum(params)?;
    Ok(s.emission.windows(2).map(|w| w[1] - w[0]).collect())
}

#[derive(Clone, Debug)]
pub struct BandwidthScan {
    /// g₂²/g₁² values (rows).
    pub g2sq_over_g1sq: Vec<f64>,
    /// Δ₂/Δ₁ values (columns).
    pub d2_over_d1: Vec<f64>,
    pub log10_bandwidth: Array2<f64>,
}

/// log₁₀ ℬ over a grid, floored at 1e−12·Δ₁.
pub fn bandwidth_scan(base: &CouplerParams, g2sq_over_g1sq: &[f64], d2_over_d1: &[f64]) -> Result<BandwidthScan> {
    if g2sq_over_g1sq.iter().chain(d2_over_d1).any(|v| !(*v > 0.0)) {
        return invalid("scan grids must be positive");
    }
    let cells: Vec<(usize, usize)> =
        (0..g2sq_over_g1sq.len()).flat_map(|i| (0..d2_over_d1.len()).map(move |j| (i, j))).collect();
    let floor = 1e-12 * base.delta1.abs();
    let vals = cells
        .par_iter()
        .map(|&(i, j)| {
            let p = CouplerParams {
                delta2: d2_over_d1[j] * base.delta1,
                g2: g2sq_over_g1sq[i].sqrt() * base.g1,
                ..*base
            };
            bandwidth(&p).map(|b| b.max(floor).log10())
        })
        .collect::<Result<Vec<f64>>>()?;
    let log10_bandwidth = Array2::from_shape_vec((g2sq_over_g1sq.len(), d2_over_d1.len()), vals)
        .expect("grid shape");
    Ok(BandwidthScan {
        g2sq_over_g1sq: g2sq_over_g1sq.to_vec(),
        d2_over_d1: d2_over_d1.to_vec(),
        log10_bandwidth,
    })
}

/// χ_e = 2g₁²/Δ₁ − g₂²/(Δ₂ − Δ₁).
pub fn chi_e(p: &CouplerParams) -> Result<f64> {
    if p.delta2 == p.delta1 {
        return invalid("chi_e has a pole at delta2 = delta1");
    }
    Ok(2.0 * p.g1 * p.g1 / p.delta1 - p.g2 * p.g2 / (p.delta2 - p.delta1))
}

/// χ_e at the matched point: (g₁²/Δ₁)(r − 2)/(r − 1).
pub fn chi_e_matched(g1: f64, delta1: f64, r: f64) -> Result<f64> {
    if r == 1.0 {
        return invalid("chi_e has a pole at r = 1");
    }
    Ok(g1 * g1 / delta1 * (r - 2.0) / (r - 1.0))
}

#[derive(Clone, Debug, Serialize)]
pub struct FluxoniumSpectrum {
    /// Transition frequencies in GHz.
    pub f_ge: f64,
    pub f_ef: f64,
    /// |⟨f|n̂|e⟩|² / |⟨e|n̂|g⟩|²
    pub ratio: f64,
    /// |⟨g|n̂|f⟩| / |⟨e|n̂|g⟩|
    pub gf_parity_leak: f64,
    /// Lowest levels relative to the ground state, GHz.
    pub levels: Vec<f64>,
    pub basis_size: usize,
    /// Largest shift of the lowest three levels on doubling the basis, GHz.
    pub convergence_shift: f64,
}

fn fluxonium_levels(ec: f64, ej: f64, el: f64, phi_ext: f64, size: usize) -> (Vec<f64>, DMatrix<f64>, DMatrix<f64>) {
    let phi0 = (8.0 * ec / el).powf(0.25);
    let omega = (8.0 * ec * el).sqrt();
    // X = (a + a†)/√2 and P = i(a† − a)/√2; n̂ = P/φ₀ is imaginary-antisymmetric,
    // so work with the real matrix P̃ = −i P.
    let mut x = DMatrix::zeros(size, size);
    let mut pt = DMatrix::zeros(size, size);
    for k in 1..size {
        let s = (k as f64 / 2.0).sqrt();
        x[(k - 1, k)] = s;
        x[(k, k - 1)] = s;
        pt[(k, k - 1)] = s;
        pt[(k - 1, k)] = -s;
    }
    let phi = &x * phi0;
    let eig = SymmetricEigen::new(phi);
    let cos_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| (v - phi_ext).cos()));
    let cos_phi = &eig.eigenvectors * cos_diag * eig.eigenvectors.transpose();
    let mut h = -cos_phi * ej;
    for k in 0..size {
        h[(k, k)] += omega * (k as f64 + 0.5);
    }
    let sol = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&i, &j| sol.eigenvalues[i].total_cmp(&sol.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&i| sol.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(size, size, |r, c| sol.eigenvectors[(r, order[c])]);
    let n_tilde = pt / phi0;
    (values, vecs, n_tilde)
}

/// Diagonalizes 4E_C n̂² − E_J cos(φ̂ − φ_ext) + ½E_L φ̂² (all energies in GHz)
/// in the harmonic basis of the inductive term, checking convergence by doubling.
pub fn fluxonium_spectrum(ec: f64, ej: f64, el: f64, phi_ext: f64, basis_size: usize) -> Result<FluxoniumSpectrum> {
    if !(ec > 0.0 && el > 0.0 && ej >= 0.0) {
        return invalid("need E_C > 0, E_L > 0, E_J >= 0");
    }
    if basis_size < 60 {
        return invalid("basis_size must be at least 60");
    }
    let (vals, vecs, n_tilde) = fluxonium_levels(ec, ej, el, phi_ext, basis_size);
    let (vals2, _, _) = fluxonium_levels(ec, ej, el, phi_ext, 2 * basis_size);
    let shift = (0..3).map(|k| ((vals[k] - vals[0]) - (vals2[k] - vals2[0])).abs()).fold(0.0, f64::max);
    if shift > 1e-3 {
        return Err(Error::NotConverged { shift_ghz: shift });
    }
    let mel = |i: usize, j: usize| (vecs.column(i).transpose() * &n_tilde * vecs.column(j))[(0, 0)];
    let eg = mel(1, 0);
    let fe = mel(2, 1);
    let gf = mel(0, 2);
    Ok(FluxoniumSpectrum {
        f_ge: vals[1] - vals[0],
        f_ef: vals[2] - vals[1],
        ratio: fe * fe / (eg * eg),
        gf_parity_leak: gf.abs() / eg.abs(),
        levels: vals.iter().take(6).map(|v| v - vals[0]).collect(),
        basis_size,
        convergence_shift: shift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uncoupled_spectrum_is_flat() {
        let p = CouplerParams { delta1: 100.0, delta2: 150.0, g1: 0.0, g2: 0.0, n_max: 4 };
        let s = coupler_spectrum(&p).unwrap();
        assert!(s.emission.iter().all(|d| d.abs() < 1e-15));
        assert_eq!(s.bandwidth, 0.0);
        assert_eq!(s.energy(3, Branch::E), 100.0);
    }

    #[test]
    fn chi_branches_agree_at_match() {
        let p = CouplerParams::matched(1000.0, 60.0, 1.2, 4);
        let a = chi_e(&p).unwrap();
        let b = chi_e_matched(60.0, 1000.0, 1.2).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
        assert_relative_eq!(chi_e_matched(60.0, 1000.0, 2.0).unwrap(), 0.0);
        assert!(chi_e(&CouplerParams { delta2: 1000.0, ..p }).is_err());
    }

    #[test]
    fn harmonic_fluxonium_limit() {
        let s = fluxonium_spectrum(0.95, 0.0, 0.65, 0.0, 60).unwrap();
        let w = (8.0f64 * 0.95 * 0.65).sqrt();
        assert_relative_eq!(s.f_ge, w, epsilon = 1e-6);
        assert_relative_eq!(s.f_ef, w, epsilon = 1e-6);
    }
}
