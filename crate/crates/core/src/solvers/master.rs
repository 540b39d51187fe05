//! Lindblad master equation: propagation, vectorized generator and steady
//! states.

use log::{debug, info, warn};
use nalgebra::{DMatrix, DVector};

use super::ode::{Dopri5, OdeOptions};
use super::state::DensityOperator;
use crate::error::{Error, Result};
use crate::fockspace::SparseOperator;
use crate::models::LindbladModel;
use crate::C64;

/// Trace drift per step above which propagation is aborted.
pub const MAX_TRACE_DRIFT: f64 = 1e-6;

/// Precomputed pieces of `dρ/dt = -i H_eff ρ + h.c. + Σ 2 r c ρ c† - Σ γ [X,[X,ρ]]`
/// with `H_eff = H - i Σ r c†c`.
pub struct MasterGenerator {
    dim: usize,
    h_eff: SparseOperator,
    jumps: Vec<(SparseOperator, f64)>,
    double: Vec<(SparseOperator, f64)>,
}

impl MasterGenerator {
    pub fn new(model: &LindbladModel) -> Result<Self> {
        let dim = model.dim();
        let mut terms: Vec<(C64, SparseOperator)> = vec![(C64::new(1.0, 0.0), model.hamiltonian.clone())];
        for ch in &model.channels {
            let cdc = ch.op.adjoint().matmul(&ch.op)?;
            terms.push((C64::new(0.0, -ch.rate), cdc));
        }
        let refs: Vec<(C64, &SparseOperator)> = terms.iter().map(|(c, o)| (*c, o)).collect();
        let h_eff = SparseOperator::combine(dim, &refs)?;
        Ok(Self {
            dim,
            h_eff,
            jumps: model.channels.iter().map(|c| (c.op.clone(), c.rate)).collect(),
            double: model
                .double_commutators
                .iter()
                .map(|d| (d.op.clone(), d.gamma))
                .collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes `dρ/dt` for a hermitian `ρ` (column-major) into `out`.
    pub fn apply(&self, rho: &[C64], out: &mut [C64]) {
        let n = self.dim;
        let rho_m = DMatrix::from_column_slice(n, n, rho);
        let mut x = self.h_eff.mul_dense(&rho_m);
        x *= C64::new(0.0, -1.0);
        let mut d = &x + x.adjoint();
        for (c, rate) in &self.jumps {
            // c ρ c† = c (c ρ)† for hermitian ρ
            let c_rho = c.mul_dense(&rho_m);
            let term = c.mul_dense(&c_rho.adjoint());
            d += term * C64::new(2.0 * rate, 0.0);
        }
        for (op, gamma) in &self.double {
            let x_rho = op.mul_dense(&rho_m);
            let comm = &x_rho - x_rho.adjoint();
            let x_comm = op.mul_dense(&comm);
            // [X, comm] with comm anti-hermitian: comm X = -(X comm)†
            let outer = &x_comm + x_comm.adjoint();
            d -= outer * C64::new(*gamma, 0.0);
        }
        out.copy_from_slice(d.as_slice());
    }

    /// Dense `d² × d²` generator acting on column-major `vec(ρ)`.
    pub fn superoperator(&self) -> DMatrix<C64> {
        let n = self.dim;
        let id = DMatrix::<C64>::identity(n, n);
        let h_eff = self.h_eff.to_dense();
        let i = C64::new(0.0, 1.0);
        // vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)
        let mut l = -(id.kronecker(&h_eff)) * i + h_eff.adjoint().transpose().kronecker(&id) * i;
        for (c, rate) in &self.jumps {
            let cd = c.to_dense();
            l += cd.conjugate().kronecker(&cd) * C64::new(2.0 * rate, 0.0);
        }
        for (op, gamma) in &self.double {
            let x = op.to_dense();
            let x2 = &x * &x;
            let g = C64::new(*gamma, 0.0);
            l -= (id.kronecker(&x2) + x2.transpose().kronecker(&id) - x.transpose().kronecker(&x) * C64::new(2.0, 0.0)) * g;
        }
        l
    }
}

fn hermitize(rho: &mut [C64], n: usize) {
    for j in 0..n {
        for i in 0..j {
            let a = rho[j * n + i];
            let b = rho[i * n + j];
            let m = (a + b.conj()) * 0.5;
            rho[j * n + i] = m;
            rho[i * n + j] = m.conj();
        }
        rho[j * n + j].im = 0.0;
    }
}

fn trace(rho: &[C64], n: usize) -> f64 {
    (0..n).map(|i| rho[i * n + i].re).sum()
}

/// Density operators sampled on the time grid.
#[derive(Debug, Clone)]
pub struct MasterRun {
    pub times: Vec<f64>,
    pub states: Vec<DensityOperator>,
    /// Largest per-step trace deviation seen before renormalization.
    pub max_trace_drift: f64,
    pub steps: usize,
}

/// Propagates `rho0` and returns the state at every grid time.
pub fn evolve_master(
    model: &LindbladModel,
    rho0: &DensityOperator,
    t_grid: &[f64],
    opts: &OdeOptions,
) -> Result<MasterRun> {
    let mut states = Vec::with_capacity(t_grid.len());
    let (drift, steps) = evolve_master_with(model, rho0, t_grid, opts, |_, rho| {
        states.push(rho.clone());
        Ok(())
    })?;
    Ok(MasterRun {
        times: t_grid.to_vec(),
        states,
        max_trace_drift: drift,
        steps,
    })
}

/// Propagates `rho0`, handing each grid-time state to `observe`. Returns
/// the largest trace drift and the number of accepted steps.
pub fn evolve_master_with<F>(
    model: &LindbladModel,
    rho0: &DensityOperator,
    t_grid: &[f64],
    opts: &OdeOptions,
    mut observe: F,
) -> Result<(f64, usize)>
where
    F: FnMut(f64, &DensityOperator) -> Result<()>,
{
    check_grid(t_grid)?;
    if rho0.dim() != model.dim() {
        return Err(Error::arg(format!(
            "initial state dimension {} does not match model dimension {}",
            rho0.dim(),
            model.dim()
        )));
    }
    let gen = MasterGenerator::new(model)?;
    let n = gen.dim();
    let mut y: Vec<C64> = rho0.matrix().as_slice().to_vec();
    let mut ode = Dopri5::new(n * n, *opts);
    let mut rhs = |_t: f64, r: &[C64], out: &mut [C64]| gen.apply(r, out);
    let mut max_drift = 0.0f64;
    let mut t = t_grid[0];
    observe(t, &DensityOperator::from_raw(DMatrix::from_column_slice(n, n, &y)))?;
    for &t1 in &t_grid[1..] {
        ode.advance(&mut rhs, t, &mut y, t1, |r| {
            let tr = trace(r, n);
            let drift = (tr - 1.0).abs();
            max_drift = max_drift.max(drift);
            if drift > MAX_TRACE_DRIFT {
                return Err(Error::Numerical(format!(
                    "trace drift {drift:.3e} in one step exceeds {MAX_TRACE_DRIFT:.0e}"
                )));
            }
            hermitize(r, n);
            r.iter_mut().for_each(|z| *z /= tr);
            Ok(())
        })?;
        t = t1;
        observe(t, &DensityOperator::from_raw(DMatrix::from_column_slice(n, n, &y)))?;
    }
    let (steps, rejected) = ode.step_counts();
    debug!("master propagation: {steps} steps, {rejected} rejected, max trace drift {max_drift:.2e}");
    Ok((max_drift, steps))
}

pub(crate) fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::arg("time grid is empty"));
    }
    if t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::arg("time grid contains non-finite values"));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::arg("time grid must be strictly increasing"));
    }
    Ok(())
}

/// Steady-state solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyOptions {
    /// Largest Hilbert dimension solved through the dense vectorized
    /// generator; larger models are propagated in time.
    pub dense_limit: usize,
    /// Relative singular-value threshold for a degenerate null space.
    pub degeneracy_tol: f64,
    /// Convergence threshold on `‖dρ/dt‖₁` for the propagation route.
    pub derivative_tol: f64,
    /// Time between convergence checks on the propagation route.
    pub check_interval: f64,
    pub max_time: f64,
    pub ode: OdeOptions,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self {
            dense_limit: 32,
            degeneracy_tol: 1e-12,
            derivative_tol: 1e-10,
            check_interval: 10.0,
            max_time: 1e6,
            ode: OdeOptions::default(),
        }
    }
}

/// How the steady state was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteadyMethod {
    NullVector,
    Projection,
    Propagation,
}

#[derive(Debug, Clone)]
pub struct SteadyState {
    pub rho: DensityOperator,
    pub method: SteadyMethod,
    /// Dimension of the numerically detected null space (1 on the
    /// propagation route, where it is not computed).
    pub multiplicity: usize,
    /// Smallest singular values of the generator, ascending (dense route).
    pub singular_values: Vec<f64>,
}

impl SteadyState {
    pub fn is_degenerate(&self) -> bool {
        self.multiplicity > 1
    }
}

/// Unique steady state. Degenerate null spaces raise a multiplicity
/// warning and return the limit reached from the maximally mixed state;
/// use [`steady_state_from`] to select the state reached from a given
/// initial condition.
pub fn steady_state(model: &LindbladModel, opts: &SteadyOptions) -> Result<SteadyState> {
    require_dissipation(model)?;
    let n = model.dim();
    if n > opts.dense_limit {
        let rho0 = maximally_mixed(n);
        return steady_by_propagation(model, &rho0, opts);
    }
    let gen = MasterGenerator::new(model)?;
    let l = gen.superoperator();
    let sv = ascending_singular_values(&l);
    let multiplicity = null_dimension(&sv, opts.degeneracy_tol);
    if multiplicity > 1 {
        warn!("steady state is not unique: null space of dimension {multiplicity}");
        return steady_state_from(model, &maximally_mixed(n), opts);
    }
    let rho = trace_constrained_solve(&l, n)?;
    Ok(SteadyState {
        rho,
        method: SteadyMethod::NullVector,
        multiplicity,
        singular_values: sv.into_iter().take(4).collect(),
    })
}

/// Infinite-time limit of the evolution started from `rho0`: the projection
/// of `rho0` onto the null space along the conserved quantities.
pub fn steady_state_from(
    model: &LindbladModel,
    rho0: &DensityOperator,
    opts: &SteadyOptions,
) -> Result<SteadyState> {
    require_dissipation(model)?;
    let n = model.dim();
    if rho0.dim() != n {
        return Err(Error::arg("initial state dimension does not match the model"));
    }
    if n > opts.dense_limit {
        return steady_by_propagation(model, rho0, opts);
    }
    let gen = MasterGenerator::new(model)?;
    let l = gen.superoperator();
    let svd = l.clone().svd(true, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let multiplicity = null_dimension(&sv, opts.degeneracy_tol);
    if multiplicity <= 1 {
        let rho = trace_constrained_solve(&l, n)?;
        return Ok(SteadyState {
            rho,
            method: SteadyMethod::NullVector,
            multiplicity: 1,
            singular_values: sv.into_iter().take(4).collect(),
        });
    }
    info!("projecting onto a {multiplicity}-dimensional steady-state manifold");
    let u = svd.u.as_ref().expect("computed");
    let v_t = svd.v_t.as_ref().expect("computed");
    let dd = n * n;
    // right null vectors are rows of Vᵀ (conjugated), left null vectors
    // columns of U
    let mut r = DMatrix::<C64>::zeros(dd, multiplicity);
    let mut lft = DMatrix::<C64>::zeros(dd, multiplicity);
    for (k, &idx) in order.iter().take(multiplicity).enumerate() {
        for i in 0..dd {
            r[(i, k)] = v_t[(idx, i)].conj();
            lft[(i, k)] = u[(i, idx)];
        }
    }
    let gram = lft.adjoint() * &r;
    let coeffs = gram
        .lu()
        .solve(&(lft.adjoint() * DVector::from_column_slice(rho0.matrix().as_slice())))
        .ok_or_else(|| Error::Numerical("singular projection onto steady manifold".into()))?;
    let vec_rho = r * coeffs;
    let rho = finalize(DMatrix::from_column_slice(n, n, vec_rho.as_slice()))?;
    Ok(SteadyState {
        rho,
        method: SteadyMethod::Projection,
        multiplicity,
        singular_values: sv.into_iter().take(4).collect(),
    })
}

fn require_dissipation(model: &LindbladModel) -> Result<()> {
    if !model.is_dissipative() {
        return Err(Error::arg("steady state requires at least one dissipator"));
    }
    Ok(())
}

fn maximally_mixed(n: usize) -> DensityOperator {
    DensityOperator::from_raw(DMatrix::identity(n, n) * C64::new(1.0 / n as f64, 0.0))
}

fn ascending_singular_values(l: &DMatrix<C64>) -> Vec<f64> {
    let mut sv: Vec<f64> = l.clone().singular_values().iter().cloned().collect();
    sv.sort_by(f64::total_cmp);
    sv
}

fn null_dimension(ascending: &[f64], rel_tol: f64) -> usize {
    let scale = ascending.last().copied().unwrap_or(1.0).max(1.0);
    ascending.iter().take_while(|&&s| s < rel_tol * scale).count().max(1)
}

/// Replaces the first row of `L vec(ρ) = 0` by `tr ρ = 1` and solves.
fn trace_constrained_solve(l: &DMatrix<C64>, n: usize) -> Result<DensityOperator> {
    let dd = n * n;
    let mut a = l.clone();
    for j in 0..dd {
        a[(0, j)] = C64::new(0.0, 0.0);
    }
    for i in 0..n {
        a[(0, i * n + i)] = C64::new(1.0, 0.0);
    }
    let mut b = DVector::<C64>::zeros(dd);
    b[0] = C64::new(1.0, 0.0);
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Numerical("trace-constrained steady-state system is singular".into()))?;
    finalize(DMatrix::from_column_slice(n, n, x.as_slice()))
}

fn finalize(mut m: DMatrix<C64>) -> Result<DensityOperator> {
    let n = m.nrows();
    {
        let s = m.as_mut_slice();
        hermitize(s, n);
    }
    let tr = m.trace().re;
    if !(tr.abs() > 1e-300) {
        return Err(Error::Numerical("steady state has zero trace".into()));
    }
    m /= C64::new(tr, 0.0);
    let rho = DensityOperator::from_raw(m);
    let min = rho.min_eigenvalue();
    if min < -1e-8 {
        warn!("steady state has negative eigenvalue {min:.3e}");
    }
    Ok(rho)
}

fn steady_by_propagation(
    model: &LindbladModel,
    rho0: &DensityOperator,
    opts: &SteadyOptions,
) -> Result<SteadyState> {
    let gen = MasterGenerator::new(model)?;
    let n = gen.dim();
    let mut rho = rho0.clone();
    let mut t = 0.0;
    let mut deriv = vec![C64::new(0.0, 0.0); n * n];
    loop {
        gen.apply(rho.matrix().as_slice(), &mut deriv);
        let dm = DMatrix::from_column_slice(n, n, &deriv);
        let trace_norm = trace_norm_hermitian(&dm);
        if trace_norm < opts.derivative_tol {
            return Ok(SteadyState {
                rho,
                method: SteadyMethod::Propagation,
                multiplicity: 1,
                singular_values: Vec::new(),
            });
        }
        if t >= opts.max_time {
            return Err(Error::Numerical(format!(
                "no steady state by t = {t}: ‖dρ/dt‖₁ = {trace_norm:.3e}"
            )));
        }
        let run = evolve_master(model, &rho, &[t, t + opts.check_interval], &opts.ode)?;
        rho = run.states.into_iter().last().expect("two grid points");
        t += opts.check_interval;
    }
}

fn trace_norm_hermitian(m: &DMatrix<C64>) -> f64 {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    h.symmetric_eigenvalues().iter().map(|x| x.abs()).sum()
}
