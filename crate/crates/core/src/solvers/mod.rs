//! Exact diagonalization, master-equation and quantum-jump propagation, and
//! steady states.

mod checkpoint;
mod eigen;
mod master;
mod mcwf;
mod ode;
mod state;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use eigen::{
    fix_phase, ground_state, ground_state_with, perturbed_ground_state, EigenOptions, GroundState,
    DEGENERACY_GAP,
};
pub use master::{
    evolve_master, evolve_master_with, steady_state, steady_state_from, MasterGenerator, MasterRun,
    SteadyMethod, SteadyOptions, SteadyState, MAX_TRACE_DRIFT,
};
pub use mcwf::{
    evolve_mcwf, single_trajectory, Jump, McwfOptions, ObservableFn, TrajectoryEnsemble,
    JUMP_TIME_RTOL, RNG_NAME,
};
pub use ode::{Dopri5, OdeOptions};
pub use state::{inner, norm, DensityOperator, QuantumState, StateRef};

use crate::error::Result;
use crate::fockspace::SparseOperator;
use crate::C64;

/// Schrödinger propagation of `psi0` under a hermitian `h`, sampled on
/// `t_grid`.
pub fn evolve_pure(
    h: &SparseOperator,
    psi0: &QuantumState,
    t_grid: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<QuantumState>> {
    master::check_grid(t_grid)?;
    let mut ode = Dopri5::new(psi0.dim(), *opts);
    let mut rhs = |_t: f64, y: &[C64], out: &mut [C64]| {
        h.apply_into(y, out);
        out.iter_mut().for_each(|z| *z *= C64::new(0.0, -1.0));
    };
    let mut y = psi0.amplitudes().to_vec();
    let mut out = vec![psi0.clone()];
    let mut t = t_grid[0];
    for &t1 in &t_grid[1..] {
        ode.advance(&mut rhs, t, &mut y, t1, |_| Ok(()))?;
        t = t1;
        out.push(QuantumState::new(y.clone())?);
    }
    Ok(out)
}
