//! Constrained Hamiltonian families on the oscillator ⊗ qubit-ancilla space.

use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hilbert::{dagger, tensor, Operator, C64, I, ONE};

/// Joint index of |n, s⟩ with a two-level ancilla (s = 0 for g, 1 for e).
pub fn joint_index(n: usize, s: usize) -> usize {
    2 * n + s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    Gg,
    Ee,
    Ge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    Re,
    Im,
    Diag,
}

/// Term coupling |m, ·⟩ and |n, ·⟩ in the given sector. For `Ge` the term
/// links |m, g⟩ with |n, e⟩.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TermLabel {
    pub m: usize,
    pub n: usize,
    pub sector: Sector,
    pub quadrature: Quadrature,
}

impl fmt::Display for TermLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}({},{}).{:?}", self.sector, self.m, self.n, self.quadrature)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisFamily {
    AllToAll { diagonals: bool },
    Distance { d: usize },
}

#[derive(Clone, Debug)]
pub struct HamiltonianBasis {
    pub cutoff: usize,
    pub family: BasisFamily,
    pub terms: Vec<Operator>,
    pub labels: Vec<TermLabel>,
    /// Drive-strength bound per coefficient, rad/μs.
    pub bound: f64,
}

impl HamiltonianBasis {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn dim(&self) -> usize {
        2 * (self.cutoff + 1)
    }

    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = bound;
        self
    }

    pub fn build(family: BasisFamily, cutoff: usize) -> Result<Self> {
        match family {
            BasisFamily::AllToAll { diagonals } => all_to_all_basis(cutoff, diagonals),
            BasisFamily::Distance { d } => distance_d_basis(cutoff, d),
        }
    }
}

fn pair_terms(dim: usize, u: usize, v: usize) -> (Operator, Operator) {
    let mut re = Array2::zeros((dim, dim));
    re[[u, v]] = ONE;
    re[[v, u]] = ONE;
    let mut im = Array2::zeros((dim, dim));
    im[[u, v]] = I;
    im[[v, u]] = -I;
    (re, im)
}

/// In-sector couplings between every pair of joint basis states, optionally
/// with the diagonal detunings |u⟩⟨u|.
pub fn all_to_all_basis(cutoff: usize, diagonals: bool) -> Result<HamiltonianBasis> {
    if cutoff == 0 {
        return invalid("cutoff must be at least 1");
    }
    let dim = 2 * (cutoff + 1);
    let mut terms = Vec::new();
    let mut labels = Vec::new();
    for (s, sector) in [(0, Sector::Gg), (1, Sector::Ee)] {
        for m in 0..=cutoff {
            for n in (m + 1)..=cutoff {
                let (re, im) = pair_terms(dim, joint_index(m, s), joint_index(n, s));
                terms.push(re);
                labels.push(TermLabel { m, n, sector, quadrature: Quadrature::Re });
                terms.push(im);
                labels.push(TermLabel { m, n, sector, quadrature: Quadrature::Im });
            }
        }
        if diagonals {
            for n in 0..=cutoff {
                let mut d = Array2::zeros((dim, dim));
                d[[joint_index(n, s), joint_index(n, s)]] = ONE;
                terms.push(d);
                labels.push(TermLabel { m: n, n, sector, quadrature: Quadrature::Diag });
            }
        }
    }
    Ok(HamiltonianBasis {
        cutoff,
        family: BasisFamily::AllToAll { diagonals },
        terms,
        labels,
        bound: f64::INFINITY,
    })
}

/// Couplings |m, g⟩⟨n, e| + h.c. with 0 < |m − n| ≤ d.
pub fn distance_d_basis(cutoff: usize, d: usize) -> Result<HamiltonianBasis> {
    if d == 0 {
        return invalid("distance must be at least 1");
    }
    if cutoff == 0 || d > cutoff {
        return invalid(format!("need 1 <= d <= cutoff, got d = {d}, cutoff = {cutoff}"));
    }
    let dim = 2 * (cutoff + 1);
    let mut terms = Vec::new();
    let mut labels = Vec::new();
    for m in 0..=cutoff {
        for n in 0..=cutoff {
            if m == n || m.abs_diff(n) > d {
                continue;
            }
            let (re, im) = pair_terms(dim, joint_index(m, 0), joint_index(n, 1));
            terms.push(re);
            labels.push(TermLabel { m, n, sector: Sector::Ge, quadrature: Quadrature::Re });
            terms.push(im);
            labels.push(TermLabel { m, n, sector: Sector::Ge, quadrature: Quadrature::Im });
        }
    }
    Ok(HamiltonianBasis { cutoff, family: BasisFamily::Distance { d }, terms, labels, bound: f64::INFINITY })
}

pub fn assemble(basis: &HamiltonianBasis, alpha: &[f64]) -> Result<Operator> {
    if alpha.len() != basis.len() {
        return invalid(format!("{} coefficients for {} basis terms", alpha.len(), basis.len()));
    }
    let dim = basis.dim();
    let mut h = Array2::zeros((dim, dim));
    for (a, t) in alpha.iter().zip(&basis.terms) {
        h.scaled_add(C64::from(*a), t);
    }
    Ok(h)
}

pub fn project_bounds(alpha: &[f64], bound: f64) -> Vec<f64> {
    alpha.iter().map(|a| a.clamp(-bound, bound)).collect()
}

/// Smallest d such that |H̃_{mn}| < 1e-10 whenever |m − n| > d.
pub fn hamiltonian_distance(h: &Operator) -> usize {
    let mut d = 0;
    for ((m, n), v) in h.indexed_iter() {
        if v.norm() >= 1e-10 {
            d = d.max(m.abs_diff(n));
        }
    }
    d
}

/// H̃_{mn} = ⟨m, g|H|n, e⟩, the single-mode block of a joint Hamiltonian.
pub fn single_mode_block(h: &Operator) -> Result<Operator> {
    if h.nrows() % 2 != 0 || h.nrows() != h.ncols() {
        return Err(Error::DimensionMismatch("joint operator must have even square dimension".into()));
    }
    let levels = h.nrows() / 2;
    Ok(Array2::from_shape_fn((levels, levels), |(m, n)| h[[joint_index(m, 0), joint_index(n, 1)]]))
}

/// H = H̃ ⊗ |g⟩⟨e| + H̃† ⊗ |e⟩⟨g|.
pub fn lift_to_joint(h_tilde: &Operator) -> Operator {
    let mut ge = Array2::zeros((2, 2));
    ge[[0, 1]] = ONE;
    tensor(h_tilde, &ge) + tensor(&dagger(h_tilde), &dagger(&ge))
}
