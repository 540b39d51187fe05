//! Experiment files: strict TOML with unit-suffixed keys.
//!
//! Suffixes: `_wr` rates and frequencies in `ω_R`, `_er` energies in `E_R`,
//! `_erd` interaction strengths in `E_R d`, `_inv_wr` times in `1/ω_R`.

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub lattice: LatticeSection,
    pub solver: SolverSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SetupKind {
    CavityPumpFull,
    AtomPumpFull,
    GeneralFull,
    AdiabaticCavity,
    FieldEliminated,
    AdiabaticAtom,
}

impl SetupKind {
    pub fn is_cavity_pump(self) -> bool {
        matches!(
            self,
            SetupKind::CavityPumpFull | SetupKind::AdiabaticCavity | SetupKind::FieldEliminated
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKind {
    #[default]
    Effham,
    Effham0,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    #[default]
    Open,
    Periodic,
}

fn yes() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub setup: SetupKind,
    #[serde(default)]
    pub variant: VariantKind,
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub keep_dispersive_hop: bool,
    pub atoms: usize,
    pub sites: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default)]
    pub boundary: BoundaryKind,
    #[serde(default)]
    pub u0_wr: f64,
    pub kappa_wr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_wr: Option<f64>,
    #[serde(default)]
    pub eta_eff_wr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_c_wr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_c_shifted_wr: Option<f64>,
    /// `Δc'/κ`, dimensionless.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_c_shifted_over_kappa: Option<f64>,
    #[serde(default)]
    pub v_cl_er: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g1d_erd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_er: Option<f64>,
    /// Depth the Wannier functions are built at.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_er: Option<f64>,
    /// Sets `η` so that `U0 η²/(κ² + Δc'²)` equals this depth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equivalent_depth_er: Option<f64>,
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub strict_cutoff: bool,
}

/// Numeric `[model]` keys a sweep may vary.
pub const SWEEPABLE: [&str; 12] = [
    "u0_wr",
    "kappa_wr",
    "eta_wr",
    "eta_eff_wr",
    "delta_c_wr",
    "delta_c_shifted_wr",
    "delta_c_shifted_over_kappa",
    "v_cl_er",
    "g1d_erd",
    "u_er",
    "depth_er",
    "equivalent_depth_er",
];

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeSection {
    pub n_q: usize,
    pub n_pw: usize,
    pub points_per_period: usize,
    pub half_width_periods: usize,
}

impl Default for LatticeSection {
    fn default() -> Self {
        let d = cqlattice::lattice::LatticeConfig::default();
        Self {
            n_q: d.n_q,
            n_pw: d.n_pw,
            points_per_period: d.points_per_period,
            half_width_periods: d.half_width_periods,
        }
    }
}

impl LatticeSection {
    pub fn config(&self) -> cqlattice::lattice::LatticeConfig {
        cqlattice::lattice::LatticeConfig {
            n_q: self.n_q,
            n_pw: self.n_pw,
            points_per_period: self.points_per_period,
            half_width_periods: self.half_width_periods,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Ground,
    Master,
    Mcwf,
    Steady,
    Selfconsistent,
    Crossing,
}

fn default_steps() -> usize {
    100
}

fn default_traj() -> usize {
    500
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub kind: SolverKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final_inv_wr: Option<f64>,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    #[serde(default = "default_traj")]
    pub n_traj: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    /// Fixed-point tolerance on the depth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_er: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relaxation: Option<f64>,
    /// Steady state reached from `[initial]` instead of the unique one.
    #[serde(default, skip_serializing_if = "is_false")]
    pub steady_from_initial: bool,
    /// Adds classical Bose-Hubbard overlaps at this depth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classical_depth_er: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g1d_lo_erd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g1d_hi_erd: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomInit {
    #[default]
    Mi,
    Sf,
    Fock,
    PerturbedGround,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhotonInit {
    #[default]
    Vacuum,
    Fock,
    Coherent,
}

fn default_mixing() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default)]
    pub atoms: AtomInit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupation: Option<Vec<u32>>,
    /// Amplitude mixed in from the first excited state.
    #[serde(default = "default_mixing")]
    pub mixing: f64,
    #[serde(default)]
    pub photon: PhotonInit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photon_n: Option<usize>,
    #[serde(default)]
    pub alpha_re: f64,
    #[serde(default)]
    pub alpha_im: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            atoms: AtomInit::Mi,
            occupation: None,
            mixing: default_mixing(),
            photon: PhotonInit::Vacuum,
            photon_n: None,
            alpha_re: 0.0,
            alpha_im: 0.0,
        }
    }
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    /// Keep every `stride`-th sample of a time series.
    #[serde(default = "one")]
    pub stride: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { csv: None, stride: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default)]
    pub spacing: Spacing,
    /// Explicit axis, instead of `from`/`to`/`points`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl SweepSection {
    pub fn axis(&self) -> Result<Vec<f64>, CliError> {
        if !SWEEPABLE.contains(&self.parameter.as_str()) {
            return Err(CliError::Config(format!(
                "sweep parameter `{}` is not a numeric model key; expected one of {}",
                self.parameter,
                SWEEPABLE.join(", ")
            )));
        }
        match (&self.values, self.from, self.to, self.points) {
            (Some(v), None, None, None) => Ok(v.clone()),
            (None, Some(a), Some(b), Some(n)) => {
                if n == 0 {
                    return Ok(Vec::new());
                }
                if n == 1 {
                    return Ok(vec![a]);
                }
                let step = |i: usize| i as f64 / (n - 1) as f64;
                match self.spacing {
                    Spacing::Linear => Ok((0..n).map(|i| a + (b - a) * step(i)).collect()),
                    Spacing::Geometric => {
                        if a * b <= 0.0 {
                            return Err(CliError::Config(
                                "geometric sweep needs endpoints of one sign".into(),
                            ));
                        }
                        Ok((0..n).map(|i| a * (b / a).powf(step(i))).collect())
                    }
                }
            }
            _ => Err(CliError::Config(
                "sweep needs either `values` or all of `from`, `to`, `points`".into(),
            )),
        }
    }
}

/// Every key the parser accepts, for unit-suffix hints.
const KNOWN_KEYS: &[&str] = &[
    "setup", "variant", "keep_dispersive_hop", "atoms", "sites", "n_max", "boundary", "u0_wr",
    "kappa_wr", "eta_wr", "eta_eff_wr", "delta_c_wr", "delta_c_shifted_wr",
    "delta_c_shifted_over_kappa", "v_cl_er", "g1d_erd", "u_er", "depth_er",
    "equivalent_depth_er", "strict_cutoff", "n_q", "n_pw", "points_per_period",
    "half_width_periods", "kind", "t_final_inv_wr", "n_steps", "n_traj", "seed", "atol", "rtol",
    "tol_er", "max_iter", "relaxation", "steady_from_initial", "classical_depth_er",
    "g1d_lo_erd", "g1d_hi_erd", "occupation", "mixing", "photon", "photon_n", "alpha_re",
    "alpha_im", "csv", "stride", "parameter", "from", "to", "points", "spacing", "values",
];

const SUFFIXES: [&str; 4] = ["_inv_wr", "_wr", "_erd", "_er"];

fn stem(key: &str) -> &str {
    SUFFIXES
        .iter()
        .find_map(|s| key.strip_suffix(s))
        .unwrap_or(key)
}

/// Suggests the correctly suffixed key for an unknown one.
pub fn suffix_hint(unknown: &str) -> Option<String> {
    let s = stem(unknown);
    let candidates: Vec<&str> = KNOWN_KEYS
        .iter()
        .copied()
        .filter(|k| *k != unknown && stem(k) == s && SUFFIXES.iter().any(|x| k.ends_with(x)))
        .collect();
    if candidates.is_empty() {
        return None;
    }
    Some(format!(
        "did you mean `{}`? physical quantities carry a unit suffix (_wr: ω_R, _er: E_R, _erd: E_R·d, _inv_wr: 1/ω_R)",
        candidates.join("` or `")
    ))
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

fn unknown_field(message: &str) -> Option<&str> {
    let rest = message.split("unknown field `").nth(1)?;
    rest.split('`').next()
}

/// Parses and validates an experiment file. `origin` names the source in
/// diagnostics.
pub fn parse(text: &str, origin: &str) -> Result<ExperimentConfig, CliError> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let message = e.message().trim().to_string();
        let location = e
            .span()
            .map(|s| {
                let (l, c) = line_column(text, s.start);
                format!("{origin}:{l}:{c}")
            })
            .unwrap_or_else(|| origin.to_string());
        let hint = unknown_field(&message)
            .and_then(suffix_hint)
            .map(|h| format!("\n  hint: {h}"))
            .unwrap_or_default();
        CliError::Config(format!("{location}: {message}{hint}"))
    })?;
    cfg.check()?;
    Ok(cfg)
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    /// Structural checks that do not need any numerics.
    pub fn check(&self) -> Result<(), CliError> {
        let m = &self.model;
        let detunings = [m.delta_c_wr, m.delta_c_shifted_wr, m.delta_c_shifted_over_kappa]
            .iter()
            .filter(|d| d.is_some())
            .count();
        if detunings > 1 {
            return Err(config_err(
                "give only one of delta_c_wr, delta_c_shifted_wr, delta_c_shifted_over_kappa",
            ));
        }
        if m.g1d_erd.is_some() && m.u_er.is_some() {
            return Err(config_err("give at most one of g1d_erd, u_er"));
        }
        if m.equivalent_depth_er.is_some() {
            if m.eta_wr.is_some() {
                return Err(config_err("equivalent_depth_er sets eta_wr; give only one"));
            }
            if m.delta_c_wr.is_some() {
                return Err(config_err(
                    "equivalent_depth_er needs the shifted detuning (delta_c_shifted_wr or delta_c_shifted_over_kappa)",
                ));
            }
        }
        let s = &self.solver;
        let timed = matches!(s.kind, SolverKind::Master | SolverKind::Mcwf);
        if timed {
            match s.t_final_inv_wr {
                Some(t) if t > 0.0 && t.is_finite() => {}
                Some(t) => return Err(config_err(format!("t_final_inv_wr must be positive, got {t}"))),
                None => return Err(config_err(format!("solver `{:?}` needs t_final_inv_wr", s.kind).to_lowercase())),
            }
            if s.n_steps == 0 {
                return Err(config_err("n_steps must be at least 1"));
            }
        }
        if self.output.stride == 0 {
            return Err(config_err("stride must be at least 1"));
        }
        let i = &self.initial;
        if i.atoms == AtomInit::Fock {
            match &i.occupation {
                Some(occ) if occ.len() == m.sites && occ.iter().sum::<u32>() as usize == m.atoms => {}
                Some(occ) => {
                    return Err(config_err(format!(
                        "occupation {occ:?} must list {} sites holding {} atoms",
                        m.sites, m.atoms
                    )))
                }
                None => return Err(config_err("atoms = \"fock\" needs an occupation list")),
            }
        } else if i.occupation.is_some() {
            return Err(config_err("occupation is only used with atoms = \"fock\""));
        }
        if i.photon == PhotonInit::Fock && i.photon_n.is_none() {
            return Err(config_err("photon = \"fock\" needs photon_n"));
        }
        let atomic_model = matches!(
            m.setup,
            SetupKind::AdiabaticCavity | SetupKind::FieldEliminated | SetupKind::AdiabaticAtom
        );
        if atomic_model && i.photon != PhotonInit::Vacuum {
            return Err(config_err(format!(
                "setup `{}` has no photon mode; initial photon state must be vacuum",
                setup_name(m.setup)
            )));
        }
        if matches!(s.kind, SolverKind::Selfconsistent | SolverKind::Crossing) && !m.setup.is_cavity_pump() {
            return Err(config_err("selfconsistent and crossing solvers need a cavity-pump setup"));
        }
        if let Some(sw) = &self.sweep {
            sw.axis()?;
        }
        Ok(())
    }

    /// The resolved configuration as TOML text.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

pub fn setup_name(s: SetupKind) -> &'static str {
    match s {
        SetupKind::CavityPumpFull => "cavity_pump_full",
        SetupKind::AtomPumpFull => "atom_pump_full",
        SetupKind::GeneralFull => "general_full",
        SetupKind::AdiabaticCavity => "adiabatic_cavity",
        SetupKind::FieldEliminated => "field_eliminated",
        SetupKind::AdiabaticAtom => "adiabatic_atom",
    }
}

/// Copy of `cfg` with one model key replaced.
pub fn with_model_value(cfg: &ExperimentConfig, key: &str, value: f64) -> Result<ExperimentConfig, CliError> {
    let mut v = toml::Value::try_from(cfg).map_err(|e| config_err(e.to_string()))?;
    let model = v
        .get_mut("model")
        .and_then(|m| m.as_table_mut())
        .expect("model table");
    model.insert(key.to_string(), toml::Value::Float(value));
    let mut out: ExperimentConfig = v.try_into().map_err(|e: toml::de::Error| config_err(e.message().to_string()))?;
    out.sweep = None;
    out.check()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[model]\nsetup = \"cavity_pump_full\"\natoms = 0\nsites = 1\nkappa_wr = 1.0\neta_wr = 0.5\n\n[solver]\nkind = \"steady\"\n";

    #[test]
    fn minimal_parses() {
        let c = parse(MINIMAL, "t").unwrap();
        assert_eq!(c.model.kappa_wr, 1.0);
        assert_eq!(c.initial.mixing, 0.05);
    }

    #[test]
    fn unknown_key_reports_position_and_hint() {
        let text = MINIMAL.replace("kappa_wr", "kappa_hz");
        let err = parse(&text, "t").unwrap_err().to_string();
        assert!(err.contains("t:5:1"), "{err}");
        assert!(err.contains("kappa_wr"), "{err}");
    }

    #[test]
    fn bare_key_gets_hint() {
        assert!(suffix_hint("kappa").unwrap().contains("kappa_wr"));
        assert!(suffix_hint("g1d").unwrap().contains("g1d_erd"));
        assert!(suffix_hint("setup_wr").is_none());
    }

    #[test]
    fn resolved_config_roundtrips() {
        let c = parse(MINIMAL, "t").unwrap();
        assert_eq!(parse(&c.to_toml(), "again").unwrap(), c);
    }

    #[test]
    fn conflicting_keys_rejected() {
        let text = MINIMAL.replace("eta_wr = 0.5", "eta_wr = 0.5\ndelta_c_wr = 0.0\ndelta_c_shifted_wr = 1.0");
        assert!(parse(&text, "t").is_err());
    }

    #[test]
    fn geometric_axis() {
        let s = SweepSection {
            parameter: "kappa_wr".into(),
            from: Some(4.0),
            to: Some(64.0),
            points: Some(5),
            spacing: Spacing::Geometric,
            values: None,
        };
        let a = s.axis().unwrap();
        for (x, y) in a.iter().zip([4.0, 8.0, 16.0, 32.0, 64.0]) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn model_value_override() {
        let c = parse(MINIMAL, "t").unwrap();
        let d = with_model_value(&c, "kappa_wr", 3.0).unwrap();
        assert_eq!(d.model.kappa_wr, 3.0);
        assert!(with_model_value(&c, "u_er", 0.1).is_ok());
    }
}
