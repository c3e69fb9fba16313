#![allow(dead_code)]

use aqec::ansatz::{assemble, distance_d_basis};
use aqec::hilbert::{dagger, fock_annihilation, identity, tensor, Operator, StateVector, C64};
use aqec::lindblad::{Dissipator, LindbladModel};
use aqec::objective::LogicalPair;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, dim: usize) -> Operator {
    Array2::from_shape_fn((dim, dim), |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize) -> Operator {
    let a = random_matrix(rng, dim);
    (&a + &dagger(&a)).mapv(|z| 0.5 * z)
}

pub fn random_density(rng: &mut ChaCha8Rng, dim: usize) -> Operator {
    let a = random_matrix(rng, dim);
    let r = a.dot(&dagger(&a));
    let tr: C64 = r.diag().sum();
    r.mapv(|z| z / tr)
}

pub fn random_state(rng: &mut ChaCha8Rng, dim: usize) -> StateVector {
    let v = Array1::from_shape_fn(dim, |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.mapv(|z| z / n)
}

pub fn random_pair(rng: &mut ChaCha8Rng, dim: usize) -> LogicalPair {
    let p0 = random_state(rng, dim);
    let mut p1 = random_state(rng, dim);
    let ov: C64 = p0.iter().zip(p1.iter()).map(|(a, b)| a.conj() * b).sum();
    p1 = &p1 - &p0.mapv(|z| z * ov);
    let n = p1.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    LogicalPair::new(p0, p1.mapv(|z| z / n)).unwrap()
}

/// Random Hamiltonian plus two random jump operators.
pub fn random_model(rng: &mut ChaCha8Rng, dim: usize) -> LindbladModel {
    let h = random_hermitian(rng, dim);
    let d1 = Dissipator::new(rng.random_range(0.1..0.8), random_matrix(rng, dim));
    let d2 = Dissipator::new(rng.random_range(0.1..0.8), random_matrix(rng, dim));
    LindbladModel::with_hamiltonian(h, vec![d1, d2]).unwrap()
}

/// Distance-d ansatz with random coefficients, photon loss and ancilla decay.
pub fn random_ansatz_model(rng: &mut ChaCha8Rng, cutoff: usize, d: usize, scale: f64, kappa: f64, kappa_q: f64) -> LindbladModel {
    let basis = distance_d_basis(cutoff, d).unwrap();
    let alpha: Vec<f64> = (0..basis.len()).map(|_| rng.random_range(-scale..scale)).collect();
    let _ = assemble(&basis, &alpha).unwrap();
    let a = tensor(&fock_annihilation(cutoff).unwrap(), &identity(2));
    let b = tensor(&identity(cutoff + 1), &fock_annihilation(1).unwrap());
    LindbladModel::new(
        2 * (cutoff + 1),
        basis.terms,
        alpha,
        vec![Dissipator::new(kappa, a), Dissipator::new(kappa_q, b)],
    )
    .unwrap()
}
