//! Bosonic occupation bases, site and photon operators, and their lift to
//! the joint atom-field space.

mod sparse;

use std::collections::HashMap;

use num_complex::Complex64 as C64;

pub use sparse::{SparseOperator, HERMITIAN_TOL};

use crate::error::{Error, Result};

/// Occupation vector `(n_1, …, n_M)`.
pub type Occupation = Vec<u32>;

/// Bond set used by the hopping operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    #[default]
    Open,
    /// Ring topology. For two sites the single bond is counted once.
    Periodic,
}

/// Fixed-N bosonic basis in lexicographically descending order, from
/// `|N,0,…,0⟩` to `|0,…,0,N⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeBasis {
    num_atoms: usize,
    num_sites: usize,
    states: Vec<Occupation>,
    index: HashMap<Occupation, usize>,
}

impl LatticeBasis {
    pub fn num_atoms(&self) -> usize {
        self.num_atoms
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[Occupation] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &[u32] {
        &self.states[i]
    }

    pub fn index_of(&self, occ: &[u32]) -> Option<usize> {
        self.index.get(occ).copied()
    }

    /// Index of an occupation vector, as an argument error when absent.
    pub fn require_index(&self, occ: &[u32]) -> Result<usize> {
        self.index_of(occ).ok_or_else(|| {
            Error::arg(format!(
                "occupation {occ:?} is not in the N={} M={} basis",
                self.num_atoms, self.num_sites
            ))
        })
    }
}

/// Enumerates all occupations of `num_sites` sites by `num_atoms` bosons.
pub fn enumerate_basis(num_atoms: usize, num_sites: usize) -> Result<LatticeBasis> {
    if num_atoms < 1 {
        return Err(Error::arg("atom number must be at least 1"));
    }
    if num_sites < 2 {
        return Err(Error::arg("site number must be at least 2"));
    }
    let mut states = Vec::new();
    let mut current = vec![0u32; num_sites];
    fill(&mut states, &mut current, 0, num_atoms as u32);
    let index = states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();
    Ok(LatticeBasis {
        num_atoms,
        num_sites,
        states,
        index,
    })
}

fn fill(out: &mut Vec<Occupation>, current: &mut Occupation, site: usize, left: u32) {
    if site + 1 == current.len() {
        current[site] = left;
        out.push(current.clone());
        return;
    }
    for n in (0..=left).rev() {
        current[site] = n;
        fill(out, current, site + 1, left - n);
    }
    current[site] = 0;
}

/// `binomial(n, k)` in floating point-free integer arithmetic.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Atomic basis tensored with the photon Fock space `|0⟩ … |n_max⟩`.
/// The joint index is `atomic * (n_max + 1) + photons`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointBasis {
    atomic: LatticeBasis,
    photon_cutoff: usize,
}

impl JointBasis {
    pub fn new(atomic: LatticeBasis, photon_cutoff: usize) -> Self {
        Self {
            atomic,
            photon_cutoff,
        }
    }

    pub fn atomic(&self) -> &LatticeBasis {
        &self.atomic
    }

    pub fn photon_cutoff(&self) -> usize {
        self.photon_cutoff
    }

    pub fn photon_dim(&self) -> usize {
        self.photon_cutoff + 1
    }

    pub fn dim(&self) -> usize {
        self.atomic.dim() * self.photon_dim()
    }

    pub fn index(&self, atomic: usize, photons: usize) -> usize {
        debug_assert!(photons <= self.photon_cutoff);
        atomic * self.photon_dim() + photons
    }

    /// `(atomic index, photon number)` of a joint index.
    pub fn split(&self, joint: usize) -> (usize, usize) {
        (joint / self.photon_dim(), joint % self.photon_dim())
    }
}

/// Factor a single-space operator acts on when lifted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    Atomic,
    Photonic,
}

fn bonds(num_sites: usize, boundary: Boundary) -> Vec<(usize, usize)> {
    let mut b: Vec<(usize, usize)> = (0..num_sites - 1).map(|k| (k, k + 1)).collect();
    if boundary == Boundary::Periodic && num_sites > 2 {
        b.push((num_sites - 1, 0));
    }
    b
}

/// Number of bonds the hopping operator sums over.
pub fn bond_count(num_sites: usize, boundary: Boundary) -> usize {
    bonds(num_sites, boundary).len()
}

/// Hopping operator `B = Σ_k (b†_{k+1} b_k + h.c.)`.
pub fn build_hop_operator(basis: &LatticeBasis, boundary: Boundary) -> SparseOperator {
    let mut trips = Vec::new();
    for (col, occ) in basis.states().iter().enumerate() {
        for &(i, j) in &bonds(basis.num_sites(), boundary) {
            for (from, to) in [(i, j), (j, i)] {
                if occ[from] == 0 {
                    continue;
                }
                let amp = (occ[from] as f64 * (occ[to] as f64 + 1.0)).sqrt();
                let mut target = occ.clone();
                target[from] -= 1;
                target[to] += 1;
                let row = basis.index_of(&target).expect("hopping conserves N");
                trips.push((row, col, C64::new(amp, 0.0)));
            }
        }
    }
    SparseOperator::from_triplets(basis.dim(), trips, 0.0)
        .expect("indices in range")
        .with_hermitian_flag(true)
}

fn diagonal_from(basis: &LatticeBasis, f: impl Fn(&[u32]) -> f64) -> SparseOperator {
    let values: Vec<f64> = basis.states().iter().map(|s| f(s)).collect();
    SparseOperator::diagonal(&values)
}

/// Total number operator `N̂`.
pub fn build_number_operator(basis: &LatticeBasis) -> SparseOperator {
    diagonal_from(basis, |s| s.iter().map(|&n| n as f64).sum())
}

/// Site occupation `n̂_site` (site index from 0).
pub fn build_site_number(basis: &LatticeBasis, site: usize) -> SparseOperator {
    diagonal_from(basis, |s| s[site] as f64)
}

/// On-site interaction `C = Σ_k n_k (n_k - 1)`.
pub fn build_onsite_interaction(basis: &LatticeBasis) -> SparseOperator {
    diagonal_from(basis, |s| {
        s.iter().map(|&n| n as f64 * (n as f64 - 1.0)).sum()
    })
}

/// Odd/even imbalance `D = Σ_k (-1)^{k+1} n_k`, first site positive.
pub fn build_imbalance_operator(basis: &LatticeBasis) -> SparseOperator {
    diagonal_from(basis, |s| {
        s.iter()
            .enumerate()
            .map(|(k, &n)| if k % 2 == 0 { n as f64 } else { -(n as f64) })
            .sum()
    })
}

/// Truncated photon operators `(a, a†, a†a)` on `|0⟩ … |n_max⟩`.
pub struct PhotonOps {
    pub a: SparseOperator,
    pub a_dag: SparseOperator,
    pub number: SparseOperator,
}

pub fn build_photon_ops(n_max: usize) -> PhotonOps {
    let dim = n_max + 1;
    let trips = (1..dim).map(|n| (n - 1, n, C64::new((n as f64).sqrt(), 0.0)));
    let a = SparseOperator::from_triplets(dim, trips, 0.0).expect("in range");
    let a_dag = a.adjoint();
    let number = SparseOperator::diagonal(&(0..dim).map(|n| n as f64).collect::<Vec<_>>());
    PhotonOps { a, a_dag, number }
}

/// Tensor product with the identity on the other factor of `basis`.
pub fn lift_to_joint(
    op: &SparseOperator,
    basis: &JointBasis,
    side: Factor,
) -> Result<SparseOperator> {
    match side {
        Factor::Atomic => {
            if op.dim() != basis.atomic().dim() {
                return Err(Error::arg(format!(
                    "atomic operator has dimension {}, basis has {}",
                    op.dim(),
                    basis.atomic().dim()
                )));
            }
            Ok(op.kron_identity(basis.photon_dim()))
        }
        Factor::Photonic => {
            if op.dim() != basis.photon_dim() {
                return Err(Error::arg(format!(
                    "photon operator has dimension {}, cutoff space has {}",
                    op.dim(),
                    basis.photon_dim()
                )));
            }
            Ok(op.identity_kron(basis.atomic().dim()))
        }
    }
}

/// Recommended cutoff for an estimated mean photon number, covering the
/// coherent-state tail: `ceil(n + 6 sqrt(n) + 10)`.
pub fn suggest_photon_cutoff(estimated_photons: f64) -> usize {
    let n = estimated_photons.max(0.0);
    (n + 6.0 * n.sqrt() + 10.0).ceil() as usize
}
