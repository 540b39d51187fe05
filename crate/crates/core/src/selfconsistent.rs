//! Self-consistent lattice depth for the field-eliminated cavity-pump
//! model: the depth sets the Wannier matrix elements, the matrix elements
//! set the ground state, and the ground state sets the photon number that
//! deepens the lattice.

use log::{debug, warn};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fockspace::SparseOperator;
use crate::lattice::{LatticeConfig, MatrixElements};
use crate::models::{
    adiabatic_field_operator, build_adiabatic_cavity_pump, CavityVariant, Detuning, Interaction,
    ModelParams, Setup, Space,
};
use crate::observables::{build_mi_state, build_sf_state, overlap_probability};
use crate::solvers::{ground_state_with, EigenOptions, GroundState};

#[derive(Debug, Clone, PartialEq)]
pub struct SelfConsistentOptions {
    /// Mixing `α` in `V ← (1-α)V + α V_new`; `None` picks 0.5 within three
    /// linewidths of the dispersive resonance and 1.0 elsewhere.
    pub relaxation: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    /// Starting depth; `None` uses `V_cl + U0 η²/(κ² + Δc'²)`.
    pub initial_depth: Option<f64>,
    pub variant: CavityVariant,
    pub lattice: LatticeConfig,
    pub eigen: EigenOptions,
}

impl Default for SelfConsistentOptions {
    fn default() -> Self {
        Self {
            relaxation: None,
            tol: 1e-8,
            max_iter: 200,
            initial_depth: None,
            variant: CavityVariant::EffHam,
            lattice: LatticeConfig::default(),
            eigen: EigenOptions::default(),
        }
    }
}

/// One pass of the fixed-point loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// Depth the matrix elements were evaluated at, `E_R`.
    pub depth: f64,
    pub photons: f64,
    /// `|V_new - V|`, `E_R`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfConsistentResult {
    pub elements: MatrixElements,
    pub ground: GroundState,
    pub photons: f64,
    pub depth: f64,
    pub p_mi: Option<f64>,
    pub p_sf: f64,
    pub relaxation: f64,
    pub trace: Vec<IterationRecord>,
    pub converged: bool,
}

impl SelfConsistentResult {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// Photon estimate of the empty lattice, where `J0 = 1/2`.
fn initial_photons(p: &ModelParams) -> f64 {
    let d = match p.detuning {
        Detuning::Shifted(d) => d,
        Detuning::Bare(dc) => dc - 0.5 * p.u0 * p.n_atoms as f64,
    };
    p.eta * p.eta / (p.kappa * p.kappa + d * d)
}

/// Default mixing: damped near the dispersive resonance.
pub fn default_relaxation(p: &ModelParams, m: &MatrixElements) -> f64 {
    if p.shifted_detuning(m).abs() <= 3.0 * p.kappa {
        0.5
    } else {
        1.0
    }
}

struct Evaluation {
    elements: MatrixElements,
    ground: GroundState,
    photons: f64,
}

fn evaluate(
    p: &ModelParams,
    depth: f64,
    opts: &SelfConsistentOptions,
    mi: Option<&crate::solvers::QuantumState>,
) -> Result<Evaluation> {
    let m = p.matrix_elements(depth, &opts.lattice)?;
    let model = build_adiabatic_cavity_pump(opts.variant, p, &m)?;
    let ground = ground_state_with(&model.hamiltonian, mi, &opts.eigen)?;
    let a = adiabatic_field_operator(Setup::CavityPump, p, &m)?;
    let photons = photons_from(&a, &ground)?;
    Ok(Evaluation {
        elements: m,
        ground,
        photons,
    })
}

fn photons_from(a: &SparseOperator, ground: &GroundState) -> Result<f64> {
    let v = a.apply(ground.state.amplitudes());
    Ok(v.iter().map(|z| z.norm_sqr()).sum())
}

/// Fixed-point iteration for the lattice depth `V = V_cl + U0 ⟨a†a⟩`.
/// Reported quantities belong to the last evaluated depth.
pub fn iterate(p: &ModelParams, opts: &SelfConsistentOptions) -> Result<SelfConsistentResult> {
    if p.kappa <= 0.0 {
        return Err(Error::ModelValidity {
            param: "kappa".into(),
            reason: "cavity linewidth must be positive".into(),
        });
    }
    if opts.max_iter == 0 {
        return Err(Error::arg("max_iter must be at least 1"));
    }
    if let Some(a) = opts.relaxation {
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::arg(format!("relaxation {a} outside (0, 1]")));
        }
    }
    let mut depth = opts
        .initial_depth
        .unwrap_or_else(|| p.v_cl + p.u0 * initial_photons(p));
    if depth >= 0.0 {
        return Err(Error::UnsupportedGeometry { depth });
    }
    let basis = p.atomic_basis()?;
    let mi = build_mi_state(&basis).ok();
    let sf = build_sf_state(&basis)?;
    let space = Space::Atomic(basis);

    let mut trace = Vec::new();
    let mut alpha = opts.relaxation;
    loop {
        let ev = evaluate(p, depth, opts, mi.as_ref())?;
        let a = *alpha.get_or_insert_with(|| default_relaxation(p, &ev.elements));
        let target = p.v_cl + p.u0 * ev.photons;
        let residual = (target - depth).abs();
        trace.push(IterationRecord {
            depth,
            photons: ev.photons,
            residual,
        });
        let converged = residual < opts.tol;
        if converged || trace.len() >= opts.max_iter {
            if !converged {
                warn!(
                    "self-consistency not reached after {} iterations (residual {residual:.3e})",
                    trace.len()
                );
            }
            debug!("self-consistent depth {depth:.10} after {} iterations", trace.len());
            let p_mi = match &mi {
                Some(s) => Some(overlap_probability(&ev.ground.state, &space, s)?),
                None => None,
            };
            let p_sf = overlap_probability(&ev.ground.state, &space, &sf)?;
            return Ok(SelfConsistentResult {
                elements: ev.elements,
                ground: ev.ground,
                photons: ev.photons,
                depth,
                p_mi,
                p_sf,
                relaxation: a,
                trace,
                converged,
            });
        }
        let next = (1.0 - a) * depth + a * target;
        if next >= 0.0 {
            return Err(Error::UnsupportedGeometry { depth: next });
        }
        depth = next;
    }
}

/// Classical Bose-Hubbard ground state `(E + J V) B + (U/2) C` at depth `v`
/// with interaction `g1d`; returns `(p_MI, p_SF)`.
pub fn classical_overlaps(p: &ModelParams, depth: f64, g1d: f64, cfg: &LatticeConfig) -> Result<(f64, f64)> {
    let q = ModelParams {
        eta: 0.0,
        eta_eff: 0.0,
        v_cl: depth,
        interaction: Interaction::G1d(g1d),
        ..p.clone()
    };
    let m = q.matrix_elements(depth, cfg)?;
    let model = build_adiabatic_cavity_pump(CavityVariant::EffHam, &q, &m)?;
    let basis = q.atomic_basis()?;
    let mi = build_mi_state(&basis)?;
    let sf = build_sf_state(&basis)?;
    let g = ground_state_with(&model.hamiltonian, Some(&mi), &EigenOptions::default())?;
    let space = Space::Atomic(basis);
    Ok((
        overlap_probability(&g.state, &space, &mi)?,
        overlap_probability(&g.state, &space, &sf)?,
    ))
}

/// Bisection settings for crossing searches.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossingOptions {
    pub g1d_lo: f64,
    pub g1d_hi: f64,
    /// Absolute tolerance on `g1d`.
    pub tol: f64,
    pub max_bisections: usize,
    pub selfconsistent: SelfConsistentOptions,
}

impl Default for CrossingOptions {
    fn default() -> Self {
        Self {
            g1d_lo: 0.0,
            g1d_hi: 20.0,
            tol: 1e-9,
            max_bisections: 80,
            selfconsistent: SelfConsistentOptions::default(),
        }
    }
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
pub fn bisect<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (lo, hi);
    let fa = f(a)?;
    let fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Bracket { lo, hi });
    }
    let mut sa = fa.signum();
    for _ in 0..max_iter {
        if b - a <= tol {
            break;
        }
        let mid = 0.5 * (a + b);
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == sa {
            a = mid;
            sa = fm.signum();
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// `g1d` where the self-consistent ground state has `p_MI = p_SF`.
pub fn quantum_crossing(p: &ModelParams, opts: &CrossingOptions) -> Result<f64> {
    mott_divisible(p)?;
    bisect(
        |g| {
            let q = ModelParams {
                interaction: Interaction::G1d(g),
                ..p.clone()
            };
            let r = iterate(&q, &opts.selfconsistent)?;
            Ok(r.p_mi.expect("divisible") - r.p_sf)
        },
        opts.g1d_lo,
        opts.g1d_hi,
        opts.tol,
        opts.max_bisections,
    )
}

/// `g1d` where the classical Bose-Hubbard ground state at `depth` has
/// `p_MI = p_SF`.
pub fn classical_crossing(p: &ModelParams, depth: f64, opts: &CrossingOptions) -> Result<f64> {
    mott_divisible(p)?;
    let cfg = opts.selfconsistent.lattice;
    bisect(
        |g| {
            let (mi, sf) = classical_overlaps(p, depth, g, &cfg)?;
            Ok(mi - sf)
        },
        opts.g1d_lo,
        opts.g1d_hi,
        opts.tol,
        opts.max_bisections,
    )
}

fn mott_divisible(p: &ModelParams) -> Result<()> {
    if p.n_atoms % p.n_sites != 0 {
        return Err(Error::UndefinedMott {
            atoms: p.n_atoms,
            sites: p.n_sites,
        });
    }
    Ok(())
}

/// Pump amplitude giving the equivalent depth `U0 η²/(κ² + Δc'²) = depth`.
pub fn pump_for_depth(u0: f64, kappa: f64, shifted_detuning: f64, depth: f64) -> Result<f64> {
    let eta2 = depth * (kappa * kappa + shifted_detuning * shifted_detuning) / u0;
    if !(eta2 >= 0.0) || !eta2.is_finite() {
        return Err(Error::ModelValidity {
            param: "eta".into(),
            reason: format!("depth {depth} is not reachable with U0 = {u0}"),
        });
    }
    Ok(eta2.sqrt())
}

/// Crossing points along a linewidth schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingPoint {
    pub kappa: f64,
    pub eta: f64,
    pub g1d_quantum: f64,
    pub g1d_classical: f64,
}

/// For each `κ`, sets `Δc' = detuning_ratio · κ` and scales `η` so the
/// equivalent depth stays at `depth`, then locates the quantum crossing and
/// the classical one at `V_cl = depth`. The template's `V_cl` should be 0.
/// Points run in parallel; output follows the schedule order.
pub fn sweep_crossing(
    template: &ModelParams,
    kappas: &[f64],
    detuning_ratio: f64,
    depth: f64,
    opts: &CrossingOptions,
) -> Result<Vec<CrossingPoint>> {
    mott_divisible(template)?;
    kappas
        .par_iter()
        .map(|&kappa| {
            let shifted = detuning_ratio * kappa;
            let eta = pump_for_depth(template.u0, kappa, shifted, depth)?;
            let p = ModelParams {
                kappa,
                eta,
                detuning: Detuning::Shifted(shifted),
                ..template.clone()
            };
            Ok(CrossingPoint {
                kappa,
                eta,
                g1d_quantum: quantum_crossing(&p, opts)?,
                g1d_classical: classical_crossing(&p, depth, opts)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams {
            u0: -1.0,
            kappa: 4.0,
            eta: 10.0,
            detuning: Detuning::Shifted(-20.0),
            v_cl: -2.0,
            interaction: Interaction::G1d(1.0),
            n_atoms: 2,
            n_sites: 2,
            ..Default::default()
        }
    }

    #[test]
    fn no_drive_converges_immediately() {
        let p = ModelParams {
            eta: 0.0,
            ..params()
        };
        let r = iterate(&p, &SelfConsistentOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations(), 1);
        assert_eq!(r.photons, 0.0);
        assert_eq!(r.depth, p.v_cl);
    }

    #[test]
    fn fixed_point_reproduces_photons() {
        let p = params();
        let opts = SelfConsistentOptions::default();
        let r = iterate(&p, &opts).unwrap();
        assert!(r.converged);
        assert!(r.iterations() <= 20);
        let again = evaluate(&p, r.depth, &opts, None).unwrap();
        assert!((again.photons - r.photons).abs() < 1e-10);
        assert!((p.v_cl + p.u0 * r.photons - r.depth).abs() < 1e-8);
    }

    #[test]
    fn relaxation_does_not_move_fixed_point() {
        let p = params();
        let full = iterate(
            &p,
            &SelfConsistentOptions {
                relaxation: Some(1.0),
                ..Default::default()
            },
        )
        .unwrap();
        let damped = iterate(
            &p,
            &SelfConsistentOptions {
                relaxation: Some(0.3),
                ..Default::default()
            },
        )
        .unwrap();
        assert!((full.depth - damped.depth).abs() < 1e-7);
    }

    #[test]
    fn untrapped_start_is_rejected() {
        let p = ModelParams {
            v_cl: 0.0,
            eta: 0.0,
            ..params()
        };
        assert!(matches!(
            iterate(&p, &SelfConsistentOptions::default()),
            Err(Error::UnsupportedGeometry { .. })
        ));
    }

    #[test]
    fn bisection_and_bracket_errors() {
        let root = bisect(|x| Ok(x * x - 2.0), 0.0, 2.0, 1e-12, 100).unwrap();
        assert!((root - 2f64.sqrt()).abs() < 1e-11);
        assert_eq!(
            bisect(|x| Ok(x + 1.0), 0.0, 1.0, 1e-9, 10).unwrap_err(),
            Error::Bracket { lo: 0.0, hi: 1.0 }
        );
    }

    #[test]
    fn pump_scaling() {
        let eta = pump_for_depth(-1.0, 4.0, -4.0, -6.0).unwrap();
        assert!((-eta * eta / 32.0 + 6.0).abs() < 1e-12);
        assert!(pump_for_depth(-1.0, 4.0, 0.0, 6.0).is_err());
    }
}
