//! Quantum-jump (Monte-Carlo wavefunction) unraveling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::master::check_grid;
use super::ode::{Dopri5, OdeOptions};
use super::state::{norm, QuantumState};
use crate::error::{Error, Result};
use crate::fockspace::SparseOperator;
use crate::models::{Channel, LindbladModel};
use crate::C64;

/// Name of the random generator, written into output headers.
pub const RNG_NAME: &str = "ChaCha8 (rand_chacha), stream = trajectory index";

/// Relative accuracy of the bisected jump time.
pub const JUMP_TIME_RTOL: f64 = 1e-10;

/// Observable evaluated on normalized trajectory states.
pub type ObservableFn<'a> = &'a (dyn Fn(&QuantumState) -> f64 + Sync);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub channel: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McwfOptions {
    pub n_traj: usize,
    pub seed: u64,
    pub ode: OdeOptions,
}

impl Default for McwfOptions {
    fn default() -> Self {
        Self {
            n_traj: 500,
            seed: 0,
            ode: OdeOptions::default(),
        }
    }
}

/// Ensemble averages and per-trajectory jump records.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub times: Vec<f64>,
    pub n_traj: usize,
    pub seed: u64,
    /// `mean[k][i]`: observable `k` at time `i`.
    pub mean: Vec<Vec<f64>>,
    /// Standard error of the mean, same layout.
    pub std_err: Vec<Vec<f64>>,
    pub jumps: Vec<Vec<Jump>>,
}

struct Trajectory {
    values: Vec<Vec<f64>>,
    jumps: Vec<Jump>,
}

struct NonHermitian {
    h_eff: SparseOperator,
    channels: Vec<Channel>,
}

impl NonHermitian {
    fn new(model: &LindbladModel) -> Result<Self> {
        let channels = model.channels_with_double_commutators();
        let mut terms: Vec<(C64, SparseOperator)> = vec![(C64::new(1.0, 0.0), model.hamiltonian.clone())];
        for ch in &channels {
            terms.push((C64::new(0.0, -ch.rate), ch.op.adjoint().matmul(&ch.op)?));
        }
        let refs: Vec<(C64, &SparseOperator)> = terms.iter().map(|(c, o)| (*c, o)).collect();
        Ok(Self {
            h_eff: SparseOperator::combine(model.dim(), &refs)?,
            channels,
        })
    }

    fn rhs(&self, psi: &[C64], out: &mut [C64]) {
        self.h_eff.apply_into(psi, out);
        out.iter_mut().for_each(|z| *z *= C64::new(0.0, -1.0));
    }
}

/// Runs `opts.n_traj` trajectories in parallel. Trajectory `k` draws from
/// the ChaCha stream `k` of `opts.seed`, and the reduction runs in
/// trajectory order, so results do not depend on scheduling.
pub fn evolve_mcwf(
    model: &LindbladModel,
    psi0: &QuantumState,
    t_grid: &[f64],
    observables: &[ObservableFn<'_>],
    opts: &McwfOptions,
) -> Result<TrajectoryEnsemble> {
    check_grid(t_grid)?;
    if opts.n_traj == 0 {
        return Err(Error::arg("n_traj must be at least 1"));
    }
    if psi0.dim() != model.dim() {
        return Err(Error::arg("initial state dimension does not match the model"));
    }
    let nh = NonHermitian::new(model)?;
    let trajs: Vec<Result<Trajectory>> = (0..opts.n_traj)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(k as u64);
            run_trajectory(&nh, psi0, t_grid, observables, &opts.ode, &mut rng)
        })
        .collect();
    let trajs: Vec<Trajectory> = trajs.into_iter().collect::<Result<_>>()?;

    let n_obs = observables.len();
    let n_t = t_grid.len();
    let nf = opts.n_traj as f64;
    let mean: Vec<Vec<f64>> = (0..n_obs)
        .map(|k| {
            (0..n_t)
                .map(|i| trajs.iter().map(|tr| tr.values[k][i]).sum::<f64>() / nf)
                .collect()
        })
        .collect();
    let std_err = (0..n_obs)
        .map(|k| {
            (0..n_t)
                .map(|i| {
                    if opts.n_traj < 2 {
                        return 0.0;
                    }
                    let m = mean[k][i];
                    let ss: f64 = trajs.iter().map(|tr| (tr.values[k][i] - m).powi(2)).sum();
                    (ss / (nf - 1.0) / nf).sqrt()
                })
                .collect()
        })
        .collect();
    Ok(TrajectoryEnsemble {
        times: t_grid.to_vec(),
        n_traj: opts.n_traj,
        seed: opts.seed,
        mean,
        std_err,
        jumps: trajs.into_iter().map(|t| t.jumps).collect(),
    })
}

/// Runs a single trajectory with its own generator.
pub fn single_trajectory(
    model: &LindbladModel,
    psi0: &QuantumState,
    t_grid: &[f64],
    observables: &[ObservableFn<'_>],
    ode: &OdeOptions,
    seed: u64,
    stream: u64,
) -> Result<(Vec<Vec<f64>>, Vec<Jump>)> {
    check_grid(t_grid)?;
    let nh = NonHermitian::new(model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let tr = run_trajectory(&nh, psi0, t_grid, observables, ode, &mut rng)?;
    Ok((tr.values, tr.jumps))
}

fn draw_threshold(rng: &mut ChaCha8Rng) -> f64 {
    // (0, 1]: a zero threshold would never trigger
    1.0 - rng.random::<f64>()
}

fn run_trajectory(
    nh: &NonHermitian,
    psi0: &QuantumState,
    t_grid: &[f64],
    observables: &[ObservableFn<'_>],
    ode_opts: &OdeOptions,
    rng: &mut ChaCha8Rng,
) -> Result<Trajectory> {
    let n = psi0.dim();
    let mut values = vec![Vec::with_capacity(t_grid.len()); observables.len()];
    let mut jumps = Vec::new();
    let mut ode = Dopri5::new(n, *ode_opts);
    let mut rhs = |_t: f64, y: &[C64], out: &mut [C64]| nh.rhs(y, out);

    let record = |values: &mut Vec<Vec<f64>>, psi: &[C64]| -> Result<()> {
        let s = QuantumState::new(psi.to_vec())?;
        for (k, f) in observables.iter().enumerate() {
            values[k].push(f(&s));
        }
        Ok(())
    };

    let mut psi: Vec<C64> = psi0.amplitudes().to_vec();
    let mut t = t_grid[0];
    let mut threshold = draw_threshold(rng);
    record(&mut values, &psi)?;
    for &t_next in &t_grid[1..] {
        while t < t_next {
            let (t_new, y_new) = ode.step(&mut rhs, t, &psi, t_next)?;
            let n2 = norm(&y_new).powi(2);
            if n2 > threshold || nh.channels.is_empty() {
                psi = y_new;
                t = t_new;
                continue;
            }
            // bisect the crossing inside (t, t_new] with single steps from t
            let (mut lo, mut hi) = (0.0, t_new - t);
            let mut y_hi = y_new;
            while hi - lo > JUMP_TIME_RTOL * (t + hi).abs().max(1.0) {
                let mid = 0.5 * (lo + hi);
                let (y_mid, _) = ode.attempt(&mut rhs, t, &psi, mid);
                if norm(&y_mid).powi(2) > threshold {
                    lo = mid;
                } else {
                    hi = mid;
                    y_hi = y_mid;
                }
            }
            t += hi;
            psi = y_hi;
            let weights: Vec<(Vec<C64>, f64)> = nh
                .channels
                .iter()
                .map(|ch| {
                    let c_psi = ch.op.apply(&psi);
                    let w = ch.rate * norm(&c_psi).powi(2);
                    (c_psi, w)
                })
                .collect();
            let total: f64 = weights.iter().map(|(_, w)| w).sum();
            if !(total > 0.0) {
                return Err(Error::Numerical(format!(
                    "norm decayed at t = {t} but no channel can fire"
                )));
            }
            let pick = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = weights.len() - 1;
            for (k, (_, w)) in weights.iter().enumerate() {
                acc += w;
                if pick < acc {
                    chosen = k;
                    break;
                }
            }
            let c_psi = &weights[chosen].0;
            let s = norm(c_psi);
            psi = c_psi.iter().map(|z| z / s).collect();
            jumps.push(Jump {
                time: t,
                channel: chosen,
            });
            threshold = draw_threshold(rng);
        }
        record(&mut values, &psi)?;
    }
    Ok(Trajectory { values, jumps })
}
