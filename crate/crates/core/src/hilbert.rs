//! Operators on the truncated oscillator ⊗ ancilla space.
//!
//! Joint basis states |n, s⟩ are indexed `n * ancilla_dim + s` (ancilla fastest).
//! Density matrices vectorize row-major: |i⟩⟨j| maps to index `i * dim + j`,
//! so vec(AρB) = (A ⊗ Bᵀ) vec(ρ).

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::lindblad::LindbladModel;

pub type C64 = Complex64;
pub type Operator = Array2<C64>;
pub type StateVector = Array1<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Dense Liouvillian acting on row-major vectorized density matrices.
#[derive(Clone, Debug)]
pub struct Superoperator {
    pub dim: usize,
    pub matrix: Array2<C64>,
}

impl Superoperator {
    pub fn dim2(&self) -> usize {
        self.dim * self.dim
    }

    pub fn apply(&self, rho: &Operator) -> Result<Operator> {
        let v = vectorize(rho);
        if v.len() != self.dim2() {
            return Err(Error::DimensionMismatch(format!(
                "superoperator acts on dim {}, state has dim {}",
                self.dim,
                rho.nrows()
            )));
        }
        unvectorize(&self.matrix.dot(&v))
    }
}

pub fn identity(dim: usize) -> Operator {
    Array2::from_diag_elem(dim, ONE)
}

pub fn zeros(dim: usize) -> Operator {
    Array2::zeros((dim, dim))
}

pub fn fock_annihilation(cutoff: usize) -> Result<Operator> {
    if cutoff == 0 {
        return invalid("cutoff must be at least 1");
    }
    let mut a = zeros(cutoff + 1);
    for n in 1..=cutoff {
        a[[n - 1, n]] = C64::from((n as f64).sqrt());
    }
    Ok(a)
}

pub fn number_operator(cutoff: usize) -> Operator {
    Array2::from_diag(&Array1::from_iter((0..=cutoff).map(|n| C64::from(n as f64))))
}

/// Kronecker product with the second factor's index varying fastest.
pub fn tensor(a: &Operator, b: &Operator) -> Operator {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let s = a[[i, j]];
            if s == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = s * b[[k, l]];
                }
            }
        }
    }
    out
}

pub fn kron_vec(u: &StateVector, v: &StateVector) -> StateVector {
    let mut out = Array1::zeros(u.len() * v.len());
    for (i, &x) in u.iter().enumerate() {
        for (j, &y) in v.iter().enumerate() {
            out[i * v.len() + j] = x * y;
        }
    }
    out
}

pub fn dagger(a: &Operator) -> Operator {
    a.t().mapv(|z| z.conj())
}

pub fn basis_ket(dim: usize, i: usize) -> StateVector {
    let mut v = Array1::zeros(dim);
    v[i] = ONE;
    v
}

/// |u⟩⟨v|
pub fn outer(u: &StateVector, v: &StateVector) -> Operator {
    let mut out = Array2::zeros((u.len(), v.len()));
    for (i, &x) in u.iter().enumerate() {
        for (j, &y) in v.iter().enumerate() {
            out[[i, j]] = x * y.conj();
        }
    }
    out
}

pub fn inner(u: &StateVector, v: &StateVector) -> C64 {
    u.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm(u: &StateVector) -> f64 {
    u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(a: &Operator) -> C64 {
    a.diag().sum()
}

/// Re tr(a† b), the real inner product used for all adjoint quantities.
pub fn real_inner(a: &Operator, b: &Operator) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// ⟨u|A|v⟩
pub fn expectation(u: &StateVector, a: &Operator, v: &StateVector) -> C64 {
    inner(u, &a.dot(v))
}

pub fn max_abs_diff(a: &Operator, b: &Operator) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn hermiticity_error(a: &Operator) -> f64 {
    max_abs_diff(a, &dagger(a))
}

/// Traces out the fastest-varying factor of dimension `inner_dim`.
pub fn partial_trace_inner(rho: &Operator, inner_dim: usize) -> Result<Operator> {
    if inner_dim == 0 || rho.nrows() % inner_dim != 0 || rho.nrows() != rho.ncols() {
        return Err(Error::DimensionMismatch(format!("cannot trace a factor of {inner_dim} from {}", rho.nrows())));
    }
    let outer_dim = rho.nrows() / inner_dim;
    Ok(Array2::from_shape_fn((outer_dim, outer_dim), |(m, n)| {
        (0..inner_dim).map(|s| rho[[m * inner_dim + s, n * inner_dim + s]]).sum()
    }))
}

pub fn vectorize(rho: &Operator) -> StateVector {
    Array1::from_iter(rho.iter().copied())
}

pub fn unvectorize(v: &StateVector) -> Result<Operator> {
    let dim = (v.len() as f64).sqrt().round() as usize;
    if dim * dim != v.len() || dim == 0 {
        return invalid(format!("length {} is not a perfect square", v.len()));
    }
    Ok(Array2::from_shape_vec((dim, dim), v.to_vec()).expect("shape checked"))
}

pub fn liouvillian(model: &LindbladModel) -> Result<Superoperator> {
    let dim = model.dim();
    let id = identity(dim);
    let h = model.hamiltonian();
    let mut m = (tensor(&h, &id) - tensor(&id, &h.t().to_owned())).mapv(|z| -I * z);
    for d in &model.dissipators {
        if d.rate < 0.0 {
            return invalid(format!("negative dissipator rate {}", d.rate));
        }
        let a = &d.op;
        let k = dagger(a).dot(a);
        let term = tensor(a, &a.mapv(|z| z.conj()))
            - tensor(&k, &id).mapv(|z| 0.5 * z)
            - tensor(&id, &k.t().to_owned()).mapv(|z| 0.5 * z);
        m = m + term.mapv(|z| d.rate * z);
    }
    Ok(Superoperator { dim, matrix: m })
}

pub(crate) fn to_nalgebra(a: &Array2<C64>) -> DMatrix<C64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub(crate) fn from_nalgebra(a: &DMatrix<C64>) -> Array2<C64> {
    Array2::from_shape_fn((a.nrows(), a.ncols()), |(i, j)| a[(i, j)])
}

/// Dense-exponential propagation, intended as a test oracle for dim ≤ 12.
pub fn matexp_propagate(m: &Superoperator, rho0: &Operator, t: f64) -> Result<Operator> {
    if t < 0.0 {
        return invalid("propagation time must be non-negative");
    }
    if rho0.nrows() != m.dim || rho0.ncols() != m.dim {
        return Err(Error::DimensionMismatch(format!(
            "superoperator dim {} vs state {}x{}",
            m.dim,
            rho0.nrows(),
            rho0.ncols()
        )));
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let mt = to_nalgebra(&m.matrix.mapv(|z| z * t));
    let e = from_nalgebra(&mt.exp());
    unvectorize(&e.dot(&vectorize(rho0)))
}

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and
/// eigenvectors stored as columns.
pub fn eigh(a: &Operator) -> (Vec<f64>, Operator) {
    let eig = to_nalgebra(a).symmetric_eigen();
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Array2::from_shape_fn(a.dim(), |(r, c)| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Row-sorted sparse operator used by the propagators.
#[derive(Clone, Debug, Default)]
pub struct SparseOperator {
    pub dim: usize,
    pub entries: Vec<(usize, usize, C64)>,
}

impl SparseOperator {
    pub fn from_dense(a: &Operator) -> Self {
        let mut entries = Vec::new();
        for ((i, j), &v) in a.indexed_iter() {
            if v != ZERO {
                entries.push((i, j, v));
            }
        }
        SparseOperator { dim: a.nrows(), entries }
    }

    pub fn to_dense(&self) -> Operator {
        let mut out = zeros(self.dim);
        for &(i, j, v) in &self.entries {
            out[[i, j]] += v;
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// out += s · A X
    pub fn left(&self, x: &[C64], out: &mut [C64], s: C64) {
        let d = self.dim;
        for &(r, c, v) in &self.entries {
            let f = s * v;
            let (src, dst) = (&x[c * d..c * d + d], &mut out[r * d..r * d + d]);
            for (o, &xv) in dst.iter_mut().zip(src) {
                *o += f * xv;
            }
        }
    }

    /// out += s · A† X
    pub fn dag_left(&self, x: &[C64], out: &mut [C64], s: C64) {
        let d = self.dim;
        for &(r, c, v) in &self.entries {
            let f = s * v.conj();
            let (src, dst) = (&x[r * d..r * d + d], &mut out[c * d..c * d + d]);
            for (o, &xv) in dst.iter_mut().zip(src) {
                *o += f * xv;
            }
        }
    }

    /// out += s · X A
    pub fn right(&self, x: &[C64], out: &mut [C64], s: C64) {
        let d = self.dim;
        for &(r, c, v) in &self.entries {
            let f = s * v;
            for i in 0..d {
                out[i * d + c] += f * x[i * d + r];
            }
        }
    }

    /// out += s · X A†
    pub fn right_dag(&self, x: &[C64], out: &mut [C64], s: C64) {
        let d = self.dim;
        for &(r, c, v) in &self.entries {
            let f = s * v.conj();
            for i in 0..d {
                out[i * d + r] += f * x[i * d + c];
            }
        }
    }

    /// tr(A X) for dense X.
    pub fn trace_with(&self, x: &[C64]) -> C64 {
        let d = self.dim;
        self.entries.iter().map(|&(r, c, v)| v * x[c * d + r]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ladder_entries() {
        let a = fock_annihilation(2).unwrap();
        assert_relative_eq!(a[[1, 2]].re, 2f64.sqrt());
        assert_eq!(a[[0, 1]], ONE);
        assert!(fock_annihilation(0).is_err());
        let n = dagger(&fock_annihilation(3).unwrap()).dot(&fock_annihilation(3).unwrap());
        for k in 0..4 {
            assert_relative_eq!(n[[k, k]].re, k as f64, epsilon = 1e-14);
        }
    }

    #[test]
    fn tensor_orders_ancilla_fastest() {
        let a = fock_annihilation(1).unwrap();
        let op = tensor(&a, &identity(2));
        // |1,g⟩ is index 2, |0,g⟩ index 0
        assert_eq!(op[[0, 2]], ONE);
        assert_eq!(tensor(&identity(2), &identity(2)), identity(4));
    }

    #[test]
    fn sparse_products_match_dense() {
        let a = Array2::from_shape_fn((3, 3), |(i, j)| C64::new((i + 2 * j) as f64, (i as f64) - 1.0));
        let x = Array2::from_shape_fn((3, 3), |(i, j)| C64::new(j as f64 - 0.5, (i * j) as f64));
        let s = SparseOperator::from_dense(&a);
        let xs = x.as_slice().unwrap();
        let check = |f: &dyn Fn(&[C64], &mut [C64]), expect: Operator| {
            let mut out = vec![ZERO; 9];
            f(xs, &mut out);
            let got = Array2::from_shape_vec((3, 3), out).unwrap();
            assert!(max_abs_diff(&got, &expect) < 1e-12);
        };
        check(&|x, o| s.left(x, o, ONE), a.dot(&x));
        check(&|x, o| s.dag_left(x, o, ONE), dagger(&a).dot(&x));
        check(&|x, o| s.right(x, o, ONE), x.dot(&a));
        check(&|x, o| s.right_dag(x, o, ONE), x.dot(&dagger(&a)));
        assert!((s.trace_with(xs) - trace(&a.dot(&x))).norm() < 1e-12);
    }

    #[test]
    fn eigh_sorts_ascending() {
        let h = Array2::from_shape_vec((2, 2), vec![ONE, I, -I, ONE]).unwrap();
        let (vals, vecs) = eigh(&h);
        assert_relative_eq!(vals[0], 0.0, epsilon = 1e-14);
        assert_relative_eq!(vals[1], 2.0, epsilon = 1e-14);
        let v = vecs.column(1).to_owned();
        let hv = h.dot(&v);
        for k in 0..2 {
            assert!((hv[k] - 2.0 * v[k]).norm() < 1e-13);
        }
    }
}
