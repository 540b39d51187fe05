use cqlattice::fockspace::{enumerate_basis, suggest_photon_cutoff, Boundary};
use cqlattice::lattice::{LatticeConfig, MatrixElements};
use cqlattice::models::{
    build_adiabatic_atom_pump, build_adiabatic_cavity_pump, build_atom_pump_full,
    build_cavity_pump_full, build_field_eliminated_master, build_general_full, photon_estimate,
    CavityVariant, Detuning, Interaction, LindbladModel, ModelParams, Setup, Space,
};
use cqlattice::observables::{
    build_coherent_state, build_mi_state, build_sf_state, format_float, photon_number,
    ObservableRecord, ObservableSet,
};
use cqlattice::selfconsistent::{
    classical_crossing, classical_overlaps, iterate, pump_for_depth, quantum_crossing,
    CrossingOptions, SelfConsistentOptions, SelfConsistentResult,
};
use cqlattice::solvers::{
    evolve_master_with, evolve_mcwf, ground_state, perturbed_ground_state, steady_state,
    steady_state_from, EigenOptions, McwfOptions, ObservableFn, OdeOptions, QuantumState,
    StateRef, SteadyOptions,
};
use cqlattice::C64;
use log::{info, warn};
use rayon::prelude::*;

use crate::config::{
    with_model_value, AtomInit, BoundaryKind, ExperimentConfig, PhotonInit, SetupKind,
    SolverKind, VariantKind,
};
use crate::error::CliError;

/// Observable columns shared by every state-based solver.
const VALUE_COLUMNS: [&str; 7] = [
    "p_mi",
    "p_sf",
    "photons",
    "photons_adiabatic",
    "mean_kx",
    "exp_d2",
    "exp_b",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Result of one configuration: header facts plus the data table.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub header: Vec<(String, String)>,
    pub table: Table,
    /// Photon cutoff picked when the config left it open.
    pub n_max: Option<usize>,
}

fn cell(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

fn values(r: &ObservableRecord) -> [Option<f64>; 7] {
    [
        r.p_mi,
        r.p_sf,
        r.photon_number,
        r.photon_number_adiabatic,
        r.mean_kx,
        r.exp_d2,
        r.exp_b,
    ]
}

fn strings(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

/// Column layout for a solver, known before anything runs.
pub fn columns(cfg: &ExperimentConfig) -> Vec<String> {
    match cfg.solver.kind {
        SolverKind::Ground => {
            let mut c = strings(&["energy", "gap", "degenerate", "depth_er"]);
            c.extend(strings(&VALUE_COLUMNS));
            c
        }
        SolverKind::Steady => {
            let mut c = strings(&["multiplicity"]);
            c.extend(strings(&VALUE_COLUMNS));
            c
        }
        SolverKind::Master => strings(&ObservableRecord::COLUMNS),
        SolverKind::Mcwf => {
            let mut c = vec!["time_wr".to_string()];
            for v in VALUE_COLUMNS {
                c.push(v.to_string());
                c.push(format!("{v}_se"));
            }
            c
        }
        SolverKind::Selfconsistent => {
            let mut c = strings(&[
                "depth_er",
                "photons",
                "p_mi",
                "p_sf",
                "iterations",
                "converged",
                "relaxation",
            ]);
            if cfg.solver.classical_depth_er.is_some() {
                c.extend(strings(&["p_mi_classical", "p_sf_classical"]));
            }
            c
        }
        SolverKind::Crossing => strings(&[
            "kappa_wr",
            "eta_wr",
            "g1d_quantum_erd",
            "g1d_classical_erd",
            "difference_erd",
        ]),
    }
}

/// Model parameters and lattice resolved from a configuration.
pub struct Prepared {
    pub params: ModelParams,
    pub setup: SetupKind,
    pub variant: CavityVariant,
    pub lattice: LatticeConfig,
    pub depth: f64,
    pub elements: MatrixElements,
    pub selfconsistent: Option<SelfConsistentResult>,
}

fn no_lattice() -> MatrixElements {
    MatrixElements {
        e0: 0.0,
        e: 0.0,
        j0: 0.0,
        j: 0.0,
        jt0: 0.0,
        u: 0.0,
        depth_used: 0.0,
    }
}

fn variant(v: VariantKind) -> CavityVariant {
    match v {
        VariantKind::Effham => CavityVariant::EffHam,
        VariantKind::Effham0 => CavityVariant::EffHam0,
    }
}

/// Parameters without any numerics beyond the equivalent-depth pump.
pub fn model_params(cfg: &ExperimentConfig) -> Result<ModelParams, CliError> {
    let m = &cfg.model;
    let detuning = match (m.delta_c_wr, m.delta_c_shifted_wr, m.delta_c_shifted_over_kappa) {
        (Some(d), _, _) => Detuning::Bare(d),
        (_, Some(d), _) => Detuning::Shifted(d),
        (_, _, Some(r)) => Detuning::Shifted(r * m.kappa_wr),
        _ => Detuning::Bare(0.0),
    };
    let mut eta = m.eta_wr.unwrap_or(0.0);
    if let (Some(depth), Detuning::Shifted(d)) = (m.equivalent_depth_er, detuning) {
        eta = pump_for_depth(m.u0_wr, m.kappa_wr, d, depth)?;
    }
    Ok(ModelParams {
        u0: m.u0_wr,
        kappa: m.kappa_wr,
        eta,
        eta_eff: m.eta_eff_wr,
        detuning,
        v_cl: m.v_cl_er,
        interaction: match (m.g1d_erd, m.u_er) {
            (_, Some(u)) => Interaction::OnSite(u),
            (g, None) => Interaction::G1d(g.unwrap_or(0.0)),
        },
        n_atoms: m.atoms,
        n_sites: m.sites,
        n_max: m.n_max.unwrap_or(0),
        boundary: match m.boundary {
            BoundaryKind::Open => Boundary::Open,
            BoundaryKind::Periodic => Boundary::Periodic,
        },
        strict_cutoff: m.strict_cutoff,
    })
}

pub fn selfconsistent_options(cfg: &ExperimentConfig) -> SelfConsistentOptions {
    let d = SelfConsistentOptions::default();
    SelfConsistentOptions {
        relaxation: cfg.solver.relaxation,
        tol: cfg.solver.tol_er.unwrap_or(d.tol),
        max_iter: cfg.solver.max_iter.unwrap_or(d.max_iter),
        variant: variant(cfg.model.variant),
        lattice: cfg.lattice.config(),
        ..d
    }
}

/// Photon estimate of the lattice-free cavity, used to place the depth of
/// full cavity-pump models when there is no classical lattice.
fn empty_lattice_depth(p: &ModelParams) -> f64 {
    let d = match p.detuning {
        Detuning::Shifted(d) => d,
        Detuning::Bare(dc) => dc - 0.5 * p.u0 * p.n_atoms as f64,
    };
    p.v_cl + p.u0 * p.eta * p.eta / (p.kappa * p.kappa + d * d)
}

/// Resolves depth, matrix elements and photon cutoff.
///
/// Without an explicit `depth_er`: full models use `V_cl` (or the
/// empty-lattice cavity depth when `V_cl = 0`), field-eliminated cavity
/// models use the self-consistent depth, atom-pump models use `V_cl`.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, CliError> {
    let mut params = model_params(cfg)?;
    let lattice = cfg.lattice.config();
    let setup = cfg.model.setup;
    let mut sc = None;
    let (depth, elements) = if params.n_atoms == 0 {
        if setup != SetupKind::CavityPumpFull {
            return Err(CliError::Config(
                "atoms = 0 (empty cavity) needs setup = \"cavity_pump_full\"".into(),
            ));
        }
        (0.0, no_lattice())
    } else if let Some(d) = cfg.model.depth_er {
        (d, params.matrix_elements(d, &lattice)?)
    } else {
        match setup {
            SetupKind::AtomPumpFull | SetupKind::AdiabaticAtom => {
                (params.v_cl, params.matrix_elements(params.v_cl, &lattice)?)
            }
            SetupKind::CavityPumpFull | SetupKind::GeneralFull => {
                let d = if params.v_cl < 0.0 {
                    params.v_cl
                } else {
                    empty_lattice_depth(&params)
                };
                (d, params.matrix_elements(d, &lattice)?)
            }
            SetupKind::AdiabaticCavity | SetupKind::FieldEliminated => {
                let r = iterate(&params, &selfconsistent_options(cfg))?;
                if !r.converged {
                    warn!("self-consistent depth not converged after {} iterations", r.iterations());
                }
                let out = (r.depth, r.elements);
                sc = Some(r);
                out
            }
        }
    };
    if cfg.model.n_max.is_none() {
        let est = if params.n_atoms == 0 {
            params.eta * params.eta / params.lorentzian_denominator(&elements)
        } else {
            photon_estimate(Setup::CavityPump, &params, &elements)
                + photon_estimate(Setup::AtomPump, &params, &elements)
        };
        params.n_max = suggest_photon_cutoff(est);
        info!("photon cutoff n_max = {} for estimate {est:.4}", params.n_max);
    }
    Ok(Prepared {
        params,
        setup,
        variant: variant(cfg.model.variant),
        lattice,
        depth,
        elements,
        selfconsistent: sc,
    })
}

impl Prepared {
    fn pump(&self) -> Setup {
        match self.setup {
            SetupKind::AtomPumpFull | SetupKind::AdiabaticAtom => Setup::AtomPump,
            SetupKind::GeneralFull if self.params.eta == 0.0 => Setup::AtomPump,
            _ => Setup::CavityPump,
        }
    }

    pub fn build(&self, keep_dispersive_hop: bool) -> Result<LindbladModel, CliError> {
        let (p, m) = (&self.params, &self.elements);
        Ok(match self.setup {
            SetupKind::CavityPumpFull => build_cavity_pump_full(p, m)?,
            SetupKind::AtomPumpFull => build_atom_pump_full(p, m, keep_dispersive_hop)?,
            SetupKind::GeneralFull => build_general_full(p, m)?,
            SetupKind::AdiabaticCavity => build_adiabatic_cavity_pump(self.variant, p, m)?,
            SetupKind::FieldEliminated => build_field_eliminated_master(p, m)?,
            SetupKind::AdiabaticAtom => build_adiabatic_atom_pump(p, m)?,
        })
    }

    /// Atomic Hamiltonian whose ground state seeds `perturbed_ground` on
    /// joint spaces.
    fn reference_hamiltonian(&self, model: &LindbladModel) -> Result<LindbladModel, CliError> {
        if let Space::Atomic(_) = model.space {
            return Ok(model.clone());
        }
        let m = &self.elements;
        Ok(match self.pump() {
            Setup::CavityPump => {
                let p = ModelParams { eta_eff: 0.0, ..self.params.clone() };
                build_adiabatic_cavity_pump(self.variant, &p, m)?
            }
            Setup::AtomPump => {
                let p = ModelParams { eta: 0.0, ..self.params.clone() };
                build_adiabatic_atom_pump(&p, m)?
            }
        })
    }

    pub fn header(&self, space: Option<&Space>) -> Vec<(String, String)> {
        let mut h = Vec::new();
        if let Some(s) = space {
            h.push(("basis".into(), s.describe()));
        }
        if self.params.n_atoms > 0 {
            let m = &self.elements;
            h.push(("depth_er".into(), format_float(self.depth)));
            h.push((
                "matrix_elements".into(),
                format!(
                    "e0={} e={} j0={} j={} jt0={} u={}",
                    format_float(m.e0),
                    format_float(m.e),
                    format_float(m.j0),
                    format_float(m.j),
                    format_float(m.jt0),
                    format_float(m.u)
                ),
            ));
            h.push(("shifted_detuning_wr".into(), format_float(self.params.shifted_detuning(m))));
        }
        h.push(("eta_wr".into(), format_float(self.params.eta)));
        h.push(("n_max".into(), self.params.n_max.to_string()));
        h
    }
}

/// Evaluates records on atomic or joint spaces, and the photon number
/// alone on the empty cavity.
enum Observer {
    Atoms(ObservableSet),
    Photons(Space),
}

impl Observer {
    fn new(prep: &Prepared, space: &Space) -> Result<Self, CliError> {
        if let Space::Photon { .. } = space {
            return Ok(Observer::Photons(space.clone()));
        }
        let set = ObservableSet::new(space, Some((prep.pump(), &prep.params, &prep.elements)))?;
        Ok(Observer::Atoms(set))
    }

    fn record<'a>(&self, t: f64, state: impl Into<StateRef<'a>>, drift: f64) -> Result<ObservableRecord, CliError> {
        match self {
            Observer::Atoms(set) => Ok(set.evaluate(t, state, drift)?),
            Observer::Photons(space) => Ok(ObservableRecord {
                time: t,
                p_mi: None,
                p_sf: None,
                photon_number: Some(photon_number(state, space)?),
                photon_number_adiabatic: None,
                mean_kx: None,
                exp_d2: None,
                exp_b: None,
                trace_drift: drift,
            }),
        }
    }
}

fn initial_state(cfg: &ExperimentConfig, prep: &Prepared, model: &LindbladModel) -> Result<QuantumState, CliError> {
    let init = &cfg.initial;
    let photon = |n_max: usize| -> Result<QuantumState, CliError> {
        Ok(match init.photon {
            PhotonInit::Vacuum => QuantumState::basis(n_max + 1, 0)?,
            PhotonInit::Fock => {
                let n = init.photon_n.expect("checked");
                if n > n_max {
                    return Err(CliError::Config(format!(
                        "photon_n = {n} exceeds the photon cutoff n_max = {n_max}"
                    )));
                }
                QuantumState::basis(n_max + 1, n)?
            }
            PhotonInit::Coherent => build_coherent_state(C64::new(init.alpha_re, init.alpha_im), n_max)?,
        })
    };
    let atoms = |basis: &cqlattice::fockspace::LatticeBasis| -> Result<QuantumState, CliError> {
        Ok(match init.atoms {
            AtomInit::Mi => build_mi_state(basis)?,
            AtomInit::Sf => build_sf_state(basis)?,
            AtomInit::Fock => {
                let occ = init.occupation.as_ref().expect("checked");
                QuantumState::basis(basis.dim(), basis.require_index(occ)?)?
            }
            AtomInit::PerturbedGround => {
                let h = prep.reference_hamiltonian(model)?.hamiltonian;
                perturbed_ground_state(&h, init.mixing, &EigenOptions::default())?
            }
        })
    };
    match &model.space {
        Space::Photon { n_max } => photon(*n_max),
        Space::Atomic(b) => atoms(b),
        Space::Joint(j) => Ok(atoms(j.atomic())?.tensor(&photon(j.photon_cutoff())?)),
    }
}

fn ode_options(cfg: &ExperimentConfig) -> OdeOptions {
    let d = OdeOptions::default();
    OdeOptions {
        atol: cfg.solver.atol.unwrap_or(d.atol),
        rtol: cfg.solver.rtol.unwrap_or(d.rtol),
        ..d
    }
}

fn time_grid(cfg: &ExperimentConfig) -> Vec<f64> {
    let t = cfg.solver.t_final_inv_wr.expect("checked");
    let n = cfg.solver.n_steps;
    (0..=n).map(|i| t * i as f64 / n as f64).collect()
}

fn kept(i: usize, n: usize, stride: usize) -> bool {
    i % stride == 0 || i + 1 == n
}

/// Runs a configuration without a sweep.
pub fn run_config(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let kind = cfg.solver.kind;
    if kind == SolverKind::Crossing {
        return run_crossing(cfg);
    }
    let prep = prepare(cfg)?;
    let mut table = Table {
        columns: columns(cfg),
        rows: Vec::new(),
    };
    if kind == SolverKind::Selfconsistent {
        let basis = prep.params.atomic_basis()?;
        let header = prep.header(Some(&Space::Atomic(basis)));
        table.rows.push(selfconsistent_row(cfg, &prep)?);
        return Ok(Outcome { header, table, n_max: None });
    }
    let model = prep.build(cfg.model.keep_dispersive_hop)?;
    let space = model.space.clone();
    let observer = Observer::new(&prep, &space)?;
    let mut header = prep.header(Some(&space));
    header.push(("model".into(), model.label.clone()));
    match kind {
        SolverKind::Ground => {
            let g = ground_state(&model.hamiltonian)?;
            let r = observer.record(0.0, &g.state, 0.0)?;
            let mut row = vec![
                format_float(g.energy),
                format_float(g.gap),
                g.degenerate.to_string(),
                format_float(prep.depth),
            ];
            row.extend(values(&r).iter().map(|v| cell(*v)));
            table.rows.push(row);
        }
        SolverKind::Steady => {
            let opts = SteadyOptions {
                ode: ode_options(cfg),
                ..SteadyOptions::default()
            };
            let ss = if cfg.solver.steady_from_initial {
                steady_state_from(&model, &initial_state(cfg, &prep, &model)?.to_density(), &opts)?
            } else {
                steady_state(&model, &opts)?
            };
            let r = observer.record(f64::INFINITY, &ss.rho, 0.0)?;
            let mut row = vec![ss.multiplicity.to_string()];
            row.extend(values(&r).iter().map(|v| cell(*v)));
            table.rows.push(row);
        }
        SolverKind::Master => {
            let rho0 = initial_state(cfg, &prep, &model)?.to_density();
            let grid = time_grid(cfg);
            let stride = cfg.output.stride;
            let mut i = 0;
            let mut err = None;
            evolve_master_with(&model, &rho0, &grid, &ode_options(cfg), |t, rho| {
                if kept(i, grid.len(), stride) {
                    match observer.record(t, rho, (rho.trace() - 1.0).abs()) {
                        Ok(r) => table.rows.push(r.to_csv_row().split(',').map(String::from).collect()),
                        Err(e) => err = Some(e),
                    }
                }
                i += 1;
                Ok(())
            })?;
            if let Some(e) = err {
                return Err(e);
            }
        }
        SolverKind::Mcwf => {
            let psi0 = initial_state(cfg, &prep, &model)?;
            let grid = time_grid(cfg);
            let available: Vec<usize> = values(&observer.record(0.0, &psi0, 0.0)?)
                .iter()
                .enumerate()
                .filter_map(|(k, v)| v.map(|_| k))
                .collect();
            let fns: Vec<Box<dyn Fn(&QuantumState) -> f64 + Sync + '_>> = available
                .iter()
                .map(|&k| {
                    let obs = &observer;
                    Box::new(move |psi: &QuantumState| {
                        obs.record(0.0, psi, 0.0)
                            .ok()
                            .and_then(|r| values(&r)[k])
                            .unwrap_or(f64::NAN)
                    }) as Box<dyn Fn(&QuantumState) -> f64 + Sync>
                })
                .collect();
            let refs: Vec<ObservableFn<'_>> = fns.iter().map(|f| f.as_ref()).collect();
            let opts = McwfOptions {
                n_traj: cfg.solver.n_traj,
                seed: cfg.solver.seed,
                ode: ode_options(cfg),
            };
            let ens = evolve_mcwf(&model, &psi0, &grid, &refs, &opts)?;
            let jumps: usize = ens.jumps.iter().map(Vec::len).sum();
            header.push(("trajectories".into(), format!("{} ({jumps} jumps)", ens.n_traj)));
            for (i, &t) in grid.iter().enumerate() {
                if !kept(i, grid.len(), cfg.output.stride) {
                    continue;
                }
                let mut row = vec![format_float(t)];
                for k in 0..VALUE_COLUMNS.len() {
                    match available.iter().position(|&a| a == k) {
                        Some(j) => {
                            row.push(format_float(ens.mean[j][i]));
                            row.push(format_float(ens.std_err[j][i]));
                        }
                        None => row.extend([String::new(), String::new()]),
                    }
                }
                table.rows.push(row);
            }
        }
        SolverKind::Selfconsistent | SolverKind::Crossing => unreachable!("handled above"),
    }
    let n_max = cfg.model.n_max.is_none().then_some(prep.params.n_max);
    Ok(Outcome { header, table, n_max })
}

fn selfconsistent_row(cfg: &ExperimentConfig, prep: &Prepared) -> Result<Vec<String>, CliError> {
    let r = match &prep.selfconsistent {
        Some(r) if cfg.model.depth_er.is_none() => r.clone(),
        _ => iterate(&prep.params, &selfconsistent_options(cfg))?,
    };
    let mut row = vec![
        format_float(r.depth),
        format_float(r.photons),
        cell(r.p_mi),
        format_float(r.p_sf),
        r.iterations().to_string(),
        r.converged.to_string(),
        format_float(r.relaxation),
    ];
    if let Some(d) = cfg.solver.classical_depth_er {
        let g = prep.params.g1d_at(d, &prep.lattice)?;
        let (mi, sf) = classical_overlaps(&prep.params, d, g, &prep.lattice)?;
        row.extend([format_float(mi), format_float(sf)]);
    }
    Ok(row)
}

fn run_crossing(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let params = model_params(cfg)?;
    let depth = cfg
        .solver
        .classical_depth_er
        .or(cfg.model.equivalent_depth_er)
        .ok_or_else(|| {
            CliError::Config("crossing needs classical_depth_er or equivalent_depth_er".into())
        })?;
    let d = CrossingOptions::default();
    let opts = CrossingOptions {
        g1d_lo: cfg.solver.g1d_lo_erd.unwrap_or(d.g1d_lo),
        g1d_hi: cfg.solver.g1d_hi_erd.unwrap_or(d.g1d_hi),
        selfconsistent: selfconsistent_options(cfg),
        ..d
    };
    let quantum = quantum_crossing(&params, &opts)?;
    let classical = classical_crossing(&params, depth, &opts)?;
    let basis = enumerate_basis(params.n_atoms, params.n_sites)?;
    Ok(Outcome {
        header: vec![
            ("basis".into(), Space::Atomic(basis).describe()),
            ("classical_depth_er".into(), format_float(depth)),
        ],
        table: Table {
            columns: columns(cfg),
            rows: vec![vec![
                format_float(params.kappa),
                format_float(params.eta),
                format_float(quantum),
                format_float(classical),
                format_float(quantum - classical),
            ]],
        },
        n_max: None,
    })
}

fn csv_escape(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
}

/// Runs every point of the sweep axis in parallel. Rows follow the axis;
/// a failing point leaves its cells empty and fills the error column.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("config has no [sweep] section".into()))?;
    let axis = sweep.axis()?;
    let points: Vec<ExperimentConfig> = axis
        .iter()
        .map(|&x| with_model_value(cfg, &sweep.parameter, x))
        .collect::<Result<_, _>>()?;
    let solver_columns = columns(cfg);
    let width = solver_columns.len();
    let axis_column = if solver_columns.contains(&sweep.parameter) {
        format!("sweep_{}", sweep.parameter)
    } else {
        sweep.parameter.clone()
    };
    let mut table = Table {
        columns: std::iter::once(axis_column)
            .chain(solver_columns)
            .chain(std::iter::once("error".to_string()))
            .collect(),
        rows: Vec::new(),
    };
    table.rows = axis
        .par_iter()
        .zip(points.par_iter())
        .map(|(&x, point)| {
            let mut row = vec![format_float(x)];
            match run_config(point) {
                Ok(out) => match out.table.rows.last() {
                    Some(last) => {
                        row.extend(last.iter().cloned());
                        row.push(String::new());
                    }
                    None => {
                        row.extend(std::iter::repeat_n(String::new(), width));
                        row.push(csv_escape("no output rows"));
                    }
                },
                Err(e) => {
                    warn!("{} = {x}: {e}", sweep.parameter);
                    row.extend(std::iter::repeat_n(String::new(), width));
                    row.push(csv_escape(&e.to_string()));
                }
            }
            row
        })
        .collect();
    let mut header = Vec::new();
    if cfg.model.atoms > 0 {
        if let Ok(b) = enumerate_basis(cfg.model.atoms, cfg.model.sites) {
            header.push(("atomic_basis".into(), Space::Atomic(b).describe()));
        }
    }
    header.push((
        "sweep".into(),
        format!("{} over {} points", sweep.parameter, axis.len()),
    ));
    Ok(Outcome { header, table, n_max: None })
}
