//! Lowest eigenpair of a hermitian operator.

use log::{debug, warn};
use nalgebra::{DMatrix, SymmetricEigen};

use super::state::{inner, norm, QuantumState};
use crate::error::{Error, Result};
use crate::fockspace::{SparseOperator, HERMITIAN_TOL};
use crate::C64;

/// Energy gap below which the ground space counts as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-10;

/// Ground-state solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Largest dimension handled by dense diagonalization.
    pub dense_limit: usize,
    /// Krylov space size per Lanczos restart.
    pub krylov_dim: usize,
    /// Residual norm `‖Hψ - Eψ‖` at which Lanczos stops.
    pub tolerance: f64,
    pub max_restarts: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            dense_limit: 4096,
            krylov_dim: 80,
            tolerance: 1e-10,
            max_restarts: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundState {
    pub energy: f64,
    pub state: QuantumState,
    /// Gap to the next eigenvalue (infinite for one-dimensional spaces).
    pub gap: f64,
    /// Set when the gap is below [`DEGENERACY_GAP`]; the returned vector is
    /// then the one closest to the reference, if one was given.
    pub degenerate: bool,
}

/// Ground state with default options and no tie-break reference.
pub fn ground_state(h: &SparseOperator) -> Result<GroundState> {
    ground_state_with(h, None, &EigenOptions::default())
}

/// Ground state; within a degenerate ground space the returned vector is
/// the normalized projection of `reference`.
pub fn ground_state_with(
    h: &SparseOperator,
    reference: Option<&QuantumState>,
    opts: &EigenOptions,
) -> Result<GroundState> {
    if !h.is_hermitian(HERMITIAN_TOL) {
        return Err(Error::arg("ground_state requires a hermitian operator"));
    }
    if let Some(r) = reference {
        if r.dim() != h.dim() {
            return Err(Error::arg("tie-break reference has wrong dimension"));
        }
    }
    let (energies, vectors) = if h.dim() <= opts.dense_limit {
        dense_lowest(h)
    } else {
        lanczos_lowest(h, opts)?
    };
    let e0 = energies[0];
    let gap = energies.get(1).map_or(f64::INFINITY, |e| e - e0);
    let ground_space: Vec<&Vec<C64>> = energies
        .iter()
        .zip(&vectors)
        .filter(|(e, _)| *e - e0 < DEGENERACY_GAP)
        .map(|(_, v)| v)
        .collect();
    let degenerate = ground_space.len() > 1;
    let mut psi = ground_space[0].clone();
    if degenerate {
        debug!("degenerate ground space of dimension {}", ground_space.len());
        if let Some(r) = reference {
            let mut proj = vec![C64::new(0.0, 0.0); h.dim()];
            for v in &ground_space {
                let c = inner(v, r.amplitudes());
                for (p, x) in proj.iter_mut().zip(v.iter()) {
                    *p += c * x;
                }
            }
            if norm(&proj) > 1e-8 {
                psi = proj;
            } else {
                warn!("tie-break reference orthogonal to the degenerate ground space");
            }
        }
    }
    fix_phase(&mut psi);
    Ok(GroundState {
        energy: e0,
        state: QuantumState::new(psi)?,
        gap,
        degenerate,
    })
}

/// `√(1 - ε²)|ψ0⟩ + ε|ψ1⟩` from the two lowest eigenvectors, each with
/// its phase fixed.
pub fn perturbed_ground_state(h: &SparseOperator, mixing: f64, opts: &EigenOptions) -> Result<QuantumState> {
    if !(0.0..=1.0).contains(&mixing) {
        return Err(Error::arg(format!("mixing amplitude {mixing} outside [0, 1]")));
    }
    if !h.is_hermitian(HERMITIAN_TOL) {
        return Err(Error::arg("ground_state requires a hermitian operator"));
    }
    let (_, mut vectors) = if h.dim() <= opts.dense_limit {
        dense_lowest(h)
    } else {
        lanczos_lowest(h, opts)?
    };
    if vectors.len() < 2 {
        if mixing == 0.0 {
            return QuantumState::new(vectors.swap_remove(0));
        }
        return Err(Error::arg("no excited state to mix in a one-dimensional space"));
    }
    vectors.iter_mut().for_each(|v| fix_phase(v));
    let c0 = (1.0 - mixing * mixing).sqrt();
    let amps = vectors[0]
        .iter()
        .zip(&vectors[1])
        .map(|(g, e)| g * c0 + e * mixing)
        .collect();
    QuantumState::new(amps)
}

/// Rotates the global phase so the largest component is real and positive.
pub fn fix_phase(v: &mut [C64]) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = v
        .iter()
        .find(|z| z.norm() >= max * (1.0 - 1e-9))
        .copied()
        .expect("nonzero vector");
    let phase = pivot.conj() / pivot.norm();
    v.iter_mut().for_each(|z| *z *= phase);
}

/// All eigenpairs near the bottom of the spectrum, sorted ascending; at
/// most eight are returned.
fn dense_lowest(h: &SparseOperator) -> (Vec<f64>, Vec<Vec<C64>>) {
    let eig = SymmetricEigen::new(h.to_dense());
    sorted_pairs(&eig.eigenvalues.iter().cloned().collect::<Vec<_>>(), &eig.eigenvectors, 8)
}

fn sorted_pairs(values: &[f64], vectors: &DMatrix<C64>, keep: usize) -> (Vec<f64>, Vec<Vec<C64>>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    order.truncate(keep);
    let e = order.iter().map(|&i| values[i]).collect();
    let v = order
        .iter()
        .map(|&i| vectors.column(i).iter().cloned().collect())
        .collect();
    (e, v)
}

/// Explicitly restarted Lanczos with full reorthogonalization. The start
/// vector of each restart is the current lowest Ritz vector plus a small
/// admixture of the second one.
fn lanczos_lowest(h: &SparseOperator, opts: &EigenOptions) -> Result<(Vec<f64>, Vec<Vec<C64>>)> {
    let n = h.dim();
    let m = opts.krylov_dim.min(n).max(2);
    // deterministic, generic start vector
    let mut start: Vec<C64> = (0..n)
        .map(|i| C64::new(1.0 + 0.37 * ((i as f64) * 0.618).sin(), 0.0))
        .collect();
    let s = norm(&start);
    start.iter_mut().for_each(|z| *z /= s);

    let mut best: Option<(Vec<f64>, Vec<Vec<C64>>)> = None;
    for restart in 0..opts.max_restarts {
        let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m);
        let mut alpha = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        basis.push(start.clone());
        let mut w = vec![C64::new(0.0, 0.0); n];
        for k in 0..m {
            h.apply_into(&basis[k], &mut w);
            let a = inner(&basis[k], &w).re;
            alpha.push(a);
            for _ in 0..2 {
                for v in &basis {
                    let c = inner(v, &w);
                    for (wi, vi) in w.iter_mut().zip(v) {
                        *wi -= c * vi;
                    }
                }
            }
            let b = norm(&w);
            if k + 1 == m || b < 1e-12 {
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|z| z / b).collect());
        }
        let k = alpha.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let ritz = |col: usize| -> Vec<C64> {
            let mut v = vec![C64::new(0.0, 0.0); n];
            for (j, bj) in basis.iter().enumerate() {
                let c = eig.eigenvectors[(j, col)];
                for (vi, x) in v.iter_mut().zip(bj) {
                    *vi += x * c;
                }
            }
            let s = norm(&v);
            v.iter_mut().for_each(|z| *z /= s);
            v
        };
        let keep = order.len().min(2);
        let vecs: Vec<Vec<C64>> = order[..keep].iter().map(|&c| ritz(c)).collect();
        let vals: Vec<f64> = order[..keep].iter().map(|&c| eig.eigenvalues[c]).collect();
        let hv = h.apply(&vecs[0]);
        let resid = norm(
            &hv.iter()
                .zip(&vecs[0])
                .map(|(a, b)| a - b * vals[0])
                .collect::<Vec<_>>(),
        );
        best = Some((vals.clone(), vecs.clone()));
        if resid < opts.tolerance || k == n {
            debug!("Lanczos converged after {} restarts (residual {resid:.2e})", restart + 1);
            return Ok(best.unwrap());
        }
        start = vecs[0].clone();
        if vecs.len() > 1 {
            for (s, x) in start.iter_mut().zip(&vecs[1]) {
                *s += x * 1e-3;
            }
        }
        let s = norm(&start);
        start.iter_mut().for_each(|z| *z /= s);
    }
    match best {
        Some(_) => Err(Error::Numerical(format!(
            "Lanczos did not converge in {} restarts",
            opts.max_restarts
        ))),
        None => Err(Error::Numerical("Lanczos produced no Ritz pairs".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_operator() {
        let h = SparseOperator::diagonal(&[0.0, 1.0, 2.0]);
        let g = ground_state(&h).unwrap();
        assert_eq!(g.energy, 0.0);
        assert!((g.state.amplitudes()[0] - C64::new(1.0, 0.0)).norm() < 1e-14);
        assert!((g.gap - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let op = SparseOperator::from_triplets(2, [(0, 1, C64::new(1.0, 0.0))], 0.0).unwrap();
        assert!(ground_state(&op).is_err());
    }

    #[test]
    fn degenerate_space_uses_reference() {
        let h = SparseOperator::diagonal(&[0.0, 0.0, 1.0]);
        let r = QuantumState::new(vec![C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(5.0, 0.0)])
            .unwrap();
        let g = ground_state_with(&h, Some(&r), &EigenOptions::default()).unwrap();
        assert!(g.degenerate);
        let a = g.state.amplitudes();
        assert!((a[1] / a[0] - C64::new(2.0, 0.0)).norm() < 1e-12);
        assert_eq!(a[2], C64::new(0.0, 0.0));
    }

    #[test]
    fn perturbed_ground_mixes_first_excited() {
        let h = SparseOperator::diagonal(&[2.0, 0.0, 1.0]);
        let psi = perturbed_ground_state(&h, 0.05, &EigenOptions::default()).unwrap();
        let a = psi.amplitudes();
        assert!((a[1].re - (1.0 - 0.0025f64).sqrt()).abs() < 1e-14);
        assert!((a[2].re - 0.05).abs() < 1e-14);
        assert_eq!(a[0].norm(), 0.0);
        assert!(perturbed_ground_state(&h, 1.5, &EigenOptions::default()).is_err());
    }

    #[test]
    fn lanczos_matches_dense() {
        // tridiagonal chain with a complex coupling
        let n = 60;
        let mut trips = Vec::new();
        for i in 0..n {
            trips.push((i, i, C64::new(0.05 * i as f64 + 0.3 * (i as f64).sin(), 0.0)));
            if i + 1 < n {
                trips.push((i, i + 1, C64::new(0.4, 0.2)));
                trips.push((i + 1, i, C64::new(0.4, -0.2)));
            }
        }
        let h = SparseOperator::from_triplets(n, trips, 0.0).unwrap().into_hermitian().unwrap();
        let dense = ground_state(&h).unwrap();
        let opts = EigenOptions {
            dense_limit: 10,
            krylov_dim: 20,
            ..Default::default()
        };
        let sparse = ground_state_with(&h, None, &opts).unwrap();
        assert!((dense.energy - sparse.energy).abs() < 1e-10);
        let ov = dense.state.inner(&sparse.state).norm();
        assert!(ov > 1.0 - 1e-10, "overlap {ov}, gap {}", dense.gap);
    }
}
