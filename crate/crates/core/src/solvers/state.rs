//! Pure states and density operators over a model space.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fockspace::SparseOperator;
use crate::models::Space;
use crate::C64;

/// Normalized amplitude vector.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amps: Vec<C64>,
}

impl QuantumState {
    /// Normalizes `amps`; a zero vector is rejected.
    pub fn new(mut amps: Vec<C64>) -> Result<Self> {
        let norm = norm(&amps);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::arg("state vector has zero or non-finite norm"));
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(Self { amps })
    }

    /// Basis vector `index` of a `dim`-dimensional space.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::arg(format!("basis index {index} outside dimension {dim}")));
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self { amps })
    }

    /// Wraps amplitudes that are already normalized to within `1e-10`.
    pub fn from_normalized(amps: Vec<C64>) -> Result<Self> {
        let n = norm(&amps);
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::arg(format!("state norm {n} differs from 1")));
        }
        Ok(Self { amps })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amps)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &QuantumState) -> C64 {
        inner(&self.amps, &other.amps)
    }

    pub fn expectation(&self, op: &SparseOperator) -> C64 {
        op.expectation(&self.amps)
    }

    /// Tensor product `self ⊗ photon` in the joint layout (photon index fastest).
    pub fn tensor(&self, photon: &QuantumState) -> QuantumState {
        let mut amps = Vec::with_capacity(self.dim() * photon.dim());
        for a in &self.amps {
            for p in &photon.amps {
                amps.push(a * p);
            }
        }
        QuantumState { amps }
    }

    pub fn to_density(&self) -> DensityOperator {
        let v = nalgebra::DVector::from_column_slice(&self.amps);
        DensityOperator {
            mat: &v * v.adjoint(),
        }
    }
}

/// Hermitian, unit-trace, positive matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    mat: DMatrix<C64>,
}

impl DensityOperator {
    /// Checks hermiticity (1e-10), trace (1e-8) and positivity (-1e-8).
    pub fn new(mat: DMatrix<C64>) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::arg("density matrix must be square"));
        }
        let rho = Self { mat };
        let herm = rho.hermiticity_error();
        if herm > 1e-10 {
            return Err(Error::arg(format!("density matrix not hermitian (error {herm:.2e})")));
        }
        let tr = rho.trace();
        if (tr - 1.0).abs() > 1e-8 {
            return Err(Error::arg(format!("density matrix trace {tr} differs from 1")));
        }
        let min = rho.min_eigenvalue();
        if min < -1e-8 {
            return Err(Error::arg(format!("density matrix has eigenvalue {min:.3e}")));
        }
        Ok(rho)
    }

    pub(crate) fn from_raw(mat: DMatrix<C64>) -> Self {
        Self { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut err = 0.0f64;
        for j in 0..n {
            for i in 0..=j {
                err = err.max((self.mat[(i, j)] - self.mat[(j, i)].conj()).norm());
            }
        }
        err
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.mat + self.mat.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `Tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn expectation(&self, op: &SparseOperator) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (r, c, v) in op.triplets() {
            acc += v * self.mat[(c, r)];
        }
        acc
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn fidelity_with(&self, psi: &QuantumState) -> f64 {
        let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
        (v.adjoint() * &self.mat * &v)[(0, 0)].re
    }
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Pure or mixed state, the argument type of most observables.
#[derive(Debug, Clone, Copy)]
pub enum StateRef<'a> {
    Pure(&'a QuantumState),
    Mixed(&'a DensityOperator),
}

impl<'a> From<&'a QuantumState> for StateRef<'a> {
    fn from(s: &'a QuantumState) -> Self {
        StateRef::Pure(s)
    }
}

impl<'a> From<&'a DensityOperator> for StateRef<'a> {
    fn from(s: &'a DensityOperator) -> Self {
        StateRef::Mixed(s)
    }
}

impl StateRef<'_> {
    pub fn dim(&self) -> usize {
        match self {
            StateRef::Pure(p) => p.dim(),
            StateRef::Mixed(r) => r.dim(),
        }
    }

    pub fn expectation(&self, op: &SparseOperator) -> Result<C64> {
        if op.dim() != self.dim() {
            return Err(Error::arg(format!(
                "operator dimension {} does not match state dimension {}",
                op.dim(),
                self.dim()
            )));
        }
        Ok(match self {
            StateRef::Pure(p) => p.expectation(op),
            StateRef::Mixed(r) => r.expectation(op),
        })
    }

    /// Reduced atomic density matrix; the identity map for atomic spaces.
    pub fn atomic_density(&self, space: &Space) -> Result<DMatrix<C64>> {
        if space.dim() != self.dim() {
            return Err(Error::arg(format!(
                "state dimension {} does not match space dimension {}",
                self.dim(),
                space.dim()
            )));
        }
        match space {
            Space::Photon { .. } => Err(Error::arg("empty-cavity state has no atomic part")),
            Space::Atomic(_) => Ok(match self {
                StateRef::Pure(p) => p.to_density().into_matrix(),
                StateRef::Mixed(r) => r.matrix().clone(),
            }),
            Space::Joint(b) => {
                let da = b.atomic().dim();
                let dp = b.photon_dim();
                let mut out = DMatrix::<C64>::zeros(da, da);
                match self {
                    StateRef::Pure(p) => {
                        let a = p.amplitudes();
                        for i in 0..da {
                            for j in 0..da {
                                let mut s = C64::new(0.0, 0.0);
                                for n in 0..dp {
                                    s += a[i * dp + n] * a[j * dp + n].conj();
                                }
                                out[(i, j)] = s;
                            }
                        }
                    }
                    StateRef::Mixed(r) => {
                        let m = r.matrix();
                        for i in 0..da {
                            for j in 0..da {
                                let mut s = C64::new(0.0, 0.0);
                                for n in 0..dp {
                                    s += m[(i * dp + n, j * dp + n)];
                                }
                                out[(i, j)] = s;
                            }
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    /// Photon-number distribution `P(n)`, `n = 0..=n_max`.
    pub fn photon_distribution(&self, space: &Space) -> Result<Vec<f64>> {
        if space.dim() != self.dim() {
            return Err(Error::arg("state does not match space"));
        }
        let (da, dp) = match space {
            Space::Photon { n_max } => (1, n_max + 1),
            Space::Joint(b) => (b.atomic().dim(), b.photon_dim()),
            Space::Atomic(_) => return Err(Error::arg("atomic space has no photon mode")),
        };
        let mut p = vec![0.0; dp];
        for i in 0..da {
            for (n, pn) in p.iter_mut().enumerate() {
                let k = i * dp + n;
                *pn += match self {
                    StateRef::Pure(s) => s.amplitudes()[k].norm_sqr(),
                    StateRef::Mixed(r) => r.matrix()[(k, k)].re,
                };
            }
        }
        Ok(p)
    }
}
