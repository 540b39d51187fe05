//! Hamiltonians and dissipators of the cavity lattice, as full atom-field
//! models on the joint space and as field-eliminated atomic models.
//!
//! All builders use `ħ = 1`: energies in `E_R`, rates in `ω_R`. A channel
//! `(c, rate)` contributes `rate (2 c ρ c† - c†c ρ - ρ c†c)` to `dρ/dt`, so
//! cavity loss is the channel `(a, κ)`.

use log::warn;

use crate::error::{Error, Result};
use crate::fockspace::{
    build_hop_operator, build_imbalance_operator, build_number_operator,
    build_onsite_interaction, build_photon_ops, enumerate_basis, Boundary, Factor, JointBasis,
    LatticeBasis, SparseOperator,
};
use crate::lattice::{g1d_for_onsite, matrix_elements_at_depth, LatticeConfig, MatrixElements};
use crate::C64;

/// Largest Poisson tail beyond the photon cutoff accepted by the builders.
pub const CUTOFF_TAIL_TOL: f64 = 1e-8;

/// Cavity-pump detuning, either bare `Δc` or shifted `Δc' = Δc - U0 J0 N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Detuning {
    Bare(f64),
    Shifted(f64),
}

/// On-site interaction, either through `g1d` (units `E_R d`) or fixed
/// directly as `U` (units `E_R`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Interaction {
    G1d(f64),
    OnSite(f64),
}

/// Physical configuration in recoil units.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Single-atom light shift at an antinode.
    pub u0: f64,
    pub kappa: f64,
    /// Cavity pump amplitude.
    pub eta: f64,
    /// Transverse (atom) pump amplitude.
    pub eta_eff: f64,
    pub detuning: Detuning,
    /// Classical lattice depth, `E_R`.
    pub v_cl: f64,
    pub interaction: Interaction,
    pub n_atoms: usize,
    pub n_sites: usize,
    pub n_max: usize,
    pub boundary: Boundary,
    /// Refuse (rather than warn about) a photon cutoff that is too small.
    pub strict_cutoff: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            u0: 0.0,
            kappa: 1.0,
            eta: 0.0,
            eta_eff: 0.0,
            detuning: Detuning::Bare(0.0),
            v_cl: 0.0,
            interaction: Interaction::G1d(0.0),
            n_atoms: 2,
            n_sites: 2,
            n_max: 10,
            boundary: Boundary::Open,
            strict_cutoff: true,
        }
    }
}

impl ModelParams {
    pub fn shifted_detuning(&self, m: &MatrixElements) -> f64 {
        match self.detuning {
            Detuning::Bare(dc) => dc - self.u0 * m.j0 * self.n_atoms as f64,
            Detuning::Shifted(d) => d,
        }
    }

    pub fn bare_detuning(&self, m: &MatrixElements) -> f64 {
        match self.detuning {
            Detuning::Bare(dc) => dc,
            Detuning::Shifted(d) => d + self.u0 * m.j0 * self.n_atoms as f64,
        }
    }

    /// `κ² + Δc'²`.
    pub fn lorentzian_denominator(&self, m: &MatrixElements) -> f64 {
        let d = self.shifted_detuning(m);
        self.kappa * self.kappa + d * d
    }

    /// Matrix elements at `depth`, with `U` resolved from the interaction
    /// setting.
    pub fn matrix_elements(&self, depth: f64, cfg: &LatticeConfig) -> Result<MatrixElements> {
        match self.interaction {
            Interaction::G1d(g) => matrix_elements_at_depth(depth, g, cfg),
            Interaction::OnSite(u) => {
                let mut m = matrix_elements_at_depth(depth, 0.0, cfg)?;
                m.u = u;
                Ok(m)
            }
        }
    }

    /// `g1d` equivalent of the interaction setting at `depth`.
    pub fn g1d_at(&self, depth: f64, cfg: &LatticeConfig) -> Result<f64> {
        match self.interaction {
            Interaction::G1d(g) => Ok(g),
            Interaction::OnSite(u) => g1d_for_onsite(u, depth, cfg),
        }
    }

    pub fn atomic_basis(&self) -> Result<LatticeBasis> {
        enumerate_basis(self.n_atoms, self.n_sites)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("u0", self.u0),
            ("kappa", self.kappa),
            ("eta", self.eta),
            ("eta_eff", self.eta_eff),
            ("v_cl", self.v_cl),
        ] {
            if !v.is_finite() {
                return Err(Error::arg(format!("{name} must be finite")));
            }
        }
        if self.kappa <= 0.0 {
            return Err(Error::ModelValidity {
                param: "kappa".into(),
                reason: format!("cavity linewidth must be positive, got {}", self.kappa),
            });
        }
        Ok(())
    }

    fn require_no_atom_pump(&self) -> Result<()> {
        if self.eta_eff != 0.0 {
            return Err(Error::ModelValidity {
                param: "eta_eff".into(),
                reason: "cavity-pump models require eta_eff = 0".into(),
            });
        }
        Ok(())
    }

    fn require_no_cavity_pump(&self) -> Result<()> {
        if self.eta != 0.0 {
            return Err(Error::ModelValidity {
                param: "eta".into(),
                reason: "atom-pump models require eta = 0".into(),
            });
        }
        Ok(())
    }
}

/// Pumping geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setup {
    CavityPump,
    AtomPump,
}

/// Which field-eliminated cavity-pump Hamiltonian to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CavityVariant {
    /// Field substituted into Hamiltonian and Liouvillean.
    EffHam0,
    /// Field substituted into the symmetrized Heisenberg equations.
    EffHam,
}

/// Hilbert space a model acts on.
#[derive(Debug, Clone, PartialEq)]
pub enum Space {
    /// Empty cavity, Fock states `0..=n_max`.
    Photon { n_max: usize },
    Atomic(LatticeBasis),
    Joint(JointBasis),
}

impl Space {
    pub fn dim(&self) -> usize {
        match self {
            Space::Photon { n_max } => n_max + 1,
            Space::Atomic(b) => b.dim(),
            Space::Joint(b) => b.dim(),
        }
    }

    pub fn atomic(&self) -> Option<&LatticeBasis> {
        match self {
            Space::Photon { .. } => None,
            Space::Atomic(b) => Some(b),
            Space::Joint(b) => Some(b.atomic()),
        }
    }

    pub fn photon_cutoff(&self) -> Option<usize> {
        match self {
            Space::Photon { n_max } => Some(*n_max),
            Space::Atomic(_) => None,
            Space::Joint(b) => Some(b.photon_cutoff()),
        }
    }

    /// Short human-readable description used in output headers.
    pub fn describe(&self) -> String {
        match self {
            Space::Photon { n_max } => format!("photon n_max={n_max} dim={}", n_max + 1),
            Space::Atomic(b) => format!(
                "atomic N={} M={} dim={}",
                b.num_atoms(),
                b.num_sites(),
                b.dim()
            ),
            Space::Joint(b) => format!(
                "joint N={} M={} n_max={} dim={}",
                b.atomic().num_atoms(),
                b.atomic().num_sites(),
                b.photon_cutoff(),
                b.dim()
            ),
        }
    }
}

/// Collapse operator with its rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub op: SparseOperator,
    pub rate: f64,
    pub label: String,
}

/// Dissipator `-γ [X, [X, ρ]]` for hermitian `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleCommutator {
    pub op: SparseOperator,
    pub gamma: f64,
}

/// Hamiltonian plus dissipators; the input to every solver.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladModel {
    pub hamiltonian: SparseOperator,
    pub channels: Vec<Channel>,
    pub double_commutators: Vec<DoubleCommutator>,
    pub space: Space,
    pub label: String,
}

impl LindbladModel {
    pub fn new(hamiltonian: SparseOperator, space: Space, label: impl Into<String>) -> Result<Self> {
        if hamiltonian.dim() != space.dim() {
            return Err(Error::arg(format!(
                "Hamiltonian dimension {} does not match space dimension {}",
                hamiltonian.dim(),
                space.dim()
            )));
        }
        Ok(Self {
            hamiltonian: hamiltonian.into_hermitian()?,
            channels: Vec::new(),
            double_commutators: Vec::new(),
            space,
            label: label.into(),
        })
    }

    pub fn with_channel(mut self, op: SparseOperator, rate: f64, label: &str) -> Result<Self> {
        if op.dim() != self.dim() {
            return Err(Error::arg(format!("collapse operator '{label}' has wrong dimension")));
        }
        if rate.is_nan() || rate < 0.0 {
            return Err(Error::ModelValidity {
                param: label.into(),
                reason: format!("negative dissipation rate {rate}"),
            });
        }
        if rate > 0.0 {
            self.channels.push(Channel {
                op,
                rate,
                label: label.into(),
            });
        }
        Ok(self)
    }

    pub fn with_double_commutator(mut self, op: SparseOperator, gamma: f64) -> Result<Self> {
        if op.dim() != self.dim() || !op.is_hermitian(crate::fockspace::HERMITIAN_TOL) {
            return Err(Error::arg("double-commutator operator must be hermitian and match the space"));
        }
        if gamma.is_nan() || gamma < 0.0 {
            return Err(Error::ModelValidity {
                param: "gamma".into(),
                reason: format!("double-commutator prefactor {gamma} is negative"),
            });
        }
        if gamma > 0.0 {
            self.double_commutators.push(DoubleCommutator { op, gamma });
        }
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// True when the model has any dissipative term.
    pub fn is_dissipative(&self) -> bool {
        !self.channels.is_empty() || !self.double_commutators.is_empty()
    }

    /// Same model with every dissipator removed.
    pub fn unitary_part(&self) -> Self {
        Self {
            channels: Vec::new(),
            double_commutators: Vec::new(),
            ..self.clone()
        }
    }

    /// Double commutators rewritten as equivalent Lindblad channels
    /// (`-γ[X,[X,ρ]]` equals the channel `(X, γ)` for hermitian `X`).
    pub fn channels_with_double_commutators(&self) -> Vec<Channel> {
        let mut out = self.channels.clone();
        out.extend(self.double_commutators.iter().map(|d| Channel {
            op: d.op.clone(),
            rate: d.gamma,
            label: "double_commutator".into(),
        }));
        out
    }
}

/// Probability that a Poisson variable of mean `mean` exceeds `n_max`.
pub fn poisson_tail(mean: f64, n_max: usize) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    // sum terms from n_max+1 upward in log space to avoid cancellation
    let mut log_term = -mean + (n_max as f64 + 1.0) * mean.ln() - ln_factorial(n_max + 1);
    let mut total = 0.0;
    let mut k = n_max + 1;
    loop {
        let term = log_term.exp();
        total += term;
        if (k as f64) > mean && term < 1e-18 * total.max(1e-300) {
            break;
        }
        if k > n_max + 100_000 {
            break;
        }
        k += 1;
        log_term += mean.ln() - (k as f64).ln();
    }
    total.min(1.0)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Checks the cutoff against the estimated photon number, refusing or
/// warning according to `strict`.
pub fn check_cutoff(estimate: f64, n_max: usize, strict: bool) -> Result<()> {
    let tail = poisson_tail(estimate, n_max);
    if tail > CUTOFF_TAIL_TOL {
        if strict {
            return Err(Error::CutoffTooSmall { n_max, estimate });
        }
        warn!("photon cutoff {n_max} leaves Poisson tail {tail:.2e} for estimate {estimate:.4}");
    }
    Ok(())
}

/// Empty-lattice photon estimate for either pump.
pub fn photon_estimate(setup: Setup, p: &ModelParams, m: &MatrixElements) -> f64 {
    let denom = p.lorentzian_denominator(m);
    match setup {
        Setup::CavityPump => p.eta * p.eta / denom,
        Setup::AtomPump => {
            let n = p.n_atoms as f64;
            p.eta_eff * p.eta_eff * m.jt0 * m.jt0 * n * n / denom
        }
    }
}

/// Driven damped empty cavity `H = -Δc a†a - iη(a - a†)`, channel `(a, κ)`.
pub fn build_driven_cavity(eta: f64, kappa: f64, delta_c: f64, n_max: usize) -> Result<LindbladModel> {
    if kappa <= 0.0 {
        return Err(Error::ModelValidity {
            param: "kappa".into(),
            reason: format!("cavity linewidth must be positive, got {kappa}"),
        });
    }
    let ph = build_photon_ops(n_max);
    let i = C64::new(0.0, 1.0);
    let h = SparseOperator::combine(
        n_max + 1,
        &[
            (C64::from(-delta_c), &ph.number),
            (-i * eta, &ph.a),
            (i * eta, &ph.a_dag),
        ],
    )?;
    LindbladModel::new(h, Space::Photon { n_max }, "driven_cavity")?.with_channel(ph.a, kappa, "cavity_loss")
}

/// Atomic operators shared by the builders.
struct AtomOps {
    basis: LatticeBasis,
    n: SparseOperator,
    b: SparseOperator,
    c: SparseOperator,
    d: SparseOperator,
}

impl AtomOps {
    fn new(p: &ModelParams) -> Result<Self> {
        let basis = p.atomic_basis()?;
        Ok(Self {
            n: build_number_operator(&basis),
            b: build_hop_operator(&basis, p.boundary),
            c: build_onsite_interaction(&basis),
            d: build_imbalance_operator(&basis),
            basis,
        })
    }
}

/// Joint-space copies of the atomic and photon operators.
struct JointOps {
    basis: JointBasis,
    n: SparseOperator,
    b: SparseOperator,
    c: SparseOperator,
    d: SparseOperator,
    a: SparseOperator,
    a_dag: SparseOperator,
    num: SparseOperator,
    num_b: SparseOperator,
}

impl JointOps {
    fn new(p: &ModelParams) -> Result<Self> {
        let at = AtomOps::new(p)?;
        let ph = build_photon_ops(p.n_max);
        let basis = JointBasis::new(at.basis.clone(), p.n_max);
        let lift = |op: &SparseOperator| crate::fockspace::lift_to_joint(op, &basis, Factor::Atomic);
        let lift_ph = |op: &SparseOperator| crate::fockspace::lift_to_joint(op, &basis, Factor::Photonic);
        Ok(Self {
            n: lift(&at.n)?,
            b: lift(&at.b)?,
            c: lift(&at.c)?,
            d: lift(&at.d)?,
            a: lift_ph(&ph.a)?,
            a_dag: lift_ph(&ph.a_dag)?,
            num: lift_ph(&ph.number)?,
            num_b: at.b.kron(&ph.number),
            basis,
        })
    }
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Full atom-field model with both pumps:
/// `H = E0 N + E B + (U0 a†a + V_cl)(J0 N + J B) + η_eff J̃0 D (a + a†)
///      - Δc a†a - iη (a - a†) + (U/2) C`, channel `(a, κ)`.
pub fn build_general_full(p: &ModelParams, m: &MatrixElements) -> Result<LindbladModel> {
    p.validate()?;
    let est = photon_estimate(Setup::CavityPump, p, m) + photon_estimate(Setup::AtomPump, p, m);
    check_cutoff(est, p.n_max, p.strict_cutoff)?;
    let o = JointOps::new(p)?;
    let i = C64::new(0.0, 1.0);
    let dc = p.bare_detuning(m);
    let n_num = o.n.matmul(&o.num)?;
    let d_field = o.d.matmul(&o.a)?.add(&o.d.matmul(&o.a_dag)?)?;
    let h = SparseOperator::combine(
        o.basis.dim(),
        &[
            (re(m.e0 + p.v_cl * m.j0), &o.n),
            (re(m.e + p.v_cl * m.j), &o.b),
            (re(p.u0 * m.j0), &n_num),
            (re(p.u0 * m.j), &o.num_b),
            (re(p.eta_eff * m.jt0), &d_field),
            (re(-dc), &o.num),
            (-i * p.eta, &o.a),
            (i * p.eta, &o.a_dag),
            (re(m.u / 2.0), &o.c),
        ],
    )?;
    LindbladModel::new(h, Space::Joint(o.basis), "general_full")?.with_channel(o.a, p.kappa, "cavity_loss")
}

/// Full cavity-pump model
/// `H = E0 N + E B + (U0 a†a + V_cl)(J0 N + J B) - Δc a†a - iη(a - a†) + (U/2) C`.
/// With zero atoms this is the empty driven cavity.
pub fn build_cavity_pump_full(p: &ModelParams, m: &MatrixElements) -> Result<LindbladModel> {
    p.validate()?;
    p.require_no_atom_pump()?;
    if p.n_atoms == 0 {
        let est = p.eta * p.eta / (p.kappa * p.kappa + p.bare_detuning(m).powi(2));
        check_cutoff(est, p.n_max, p.strict_cutoff)?;
        return build_driven_cavity(p.eta, p.kappa, p.bare_detuning(m), p.n_max);
    }
    let mut model = build_general_full(p, m)?;
    model.label = "cavity_pump_full".into();
    Ok(model)
}

/// Full atom-pump model. With `keep_dispersive_hop`
/// `H = (E + J V_cl) B + (U0 J0 N - Δc) a†a + (U/2) C + U0 J a†a B + η_eff J̃0 D (a + a†)`;
/// without it the `U0 J a†a B` term is dropped.
pub fn build_atom_pump_full(
    p: &ModelParams,
    m: &MatrixElements,
    keep_dispersive_hop: bool,
) -> Result<LindbladModel> {
    p.validate()?;
    p.require_no_cavity_pump()?;
    check_cutoff(photon_estimate(Setup::AtomPump, p, m), p.n_max, p.strict_cutoff)?;
    let o = JointOps::new(p)?;
    let shifted = p.shifted_detuning(m);
    let d_field = o.d.matmul(&o.a)?.add(&o.d.matmul(&o.a_dag)?)?;
    let disp = if keep_dispersive_hop { p.u0 * m.j } else { 0.0 };
    let h = SparseOperator::combine(
        o.basis.dim(),
        &[
            (re(m.hopping_at(p.v_cl)), &o.b),
            (re(-shifted), &o.num),
            (re(m.u / 2.0), &o.c),
            (re(disp), &o.num_b),
            (re(p.eta_eff * m.jt0), &d_field),
        ],
    )?;
    let label = if keep_dispersive_hop {
        "atom_pump_full"
    } else {
        "atom_pump_full_nodisp"
    };
    LindbladModel::new(h, Space::Joint(o.basis), label)?.with_channel(o.a, p.kappa, "cavity_loss")
}

/// Coefficient `c₂` of `B²` in the field-eliminated cavity-pump Hamiltonian.
pub fn b2_coefficient(variant: CavityVariant, p: &ModelParams, m: &MatrixElements) -> f64 {
    let d = p.shifted_detuning(m);
    let k2 = p.kappa * p.kappa;
    let denom = k2 + d * d;
    match variant {
        CavityVariant::EffHam => p.u0 * m.j * d / denom,
        CavityVariant::EffHam0 => p.u0 * m.j * d * (k2 - 3.0 * d * d) / (denom * denom),
    }
}

/// Field-eliminated cavity-pump model
/// `H = (E + J V_cl) B + (U/2) C + U0 J η²/(κ² + Δc'²) (B + c₂ B²)`
/// with channel `(B, κ U0² J² η² / (κ² + Δc'²)²)`.
pub fn build_adiabatic_cavity_pump(
    variant: CavityVariant,
    p: &ModelParams,
    m: &MatrixElements,
) -> Result<LindbladModel> {
    p.validate()?;
    p.require_no_atom_pump()?;
    let at = AtomOps::new(p)?;
    let denom = p.lorentzian_denominator(m);
    let shift = p.u0 * m.j * p.eta * p.eta / denom;
    let c2 = b2_coefficient(variant, p, m);
    let b2 = at.b.matmul(&at.b)?;
    let h = SparseOperator::combine(
        at.basis.dim(),
        &[
            (re(m.hopping_at(p.v_cl) + shift), &at.b),
            (re(shift * c2), &b2),
            (re(m.u / 2.0), &at.c),
        ],
    )?;
    let rate = p.kappa * (p.u0 * m.j * p.eta).powi(2) / (denom * denom);
    let label = match variant {
        CavityVariant::EffHam0 => "adiabatic_cavity_effham0",
        CavityVariant::EffHam => "adiabatic_cavity_effham",
    };
    LindbladModel::new(h, Space::Atomic(at.basis), label)?.with_channel(at.b, rate, "hopping_loss")
}

/// Prefactor `γ = (J U0 η)² (κ² - Δc'²) / (2κ (κ² + Δc'²)²)` of the
/// double-commutator dissipator.
pub fn double_commutator_gamma(p: &ModelParams, m: &MatrixElements) -> f64 {
    let d = p.shifted_detuning(m);
    let k2 = p.kappa * p.kappa;
    let denom = k2 + d * d;
    (m.j * p.u0 * p.eta).powi(2) * (k2 - d * d) / (2.0 * p.kappa * denom * denom)
}

/// Field-eliminated master equation with unitary part
/// `H_at + U0 η²/(κ² + Δc'²) (J B + U0 Δc' J²/(κ² + Δc'²) B²)` and
/// dissipator `-γ [B, [B, ρ]]`.
pub fn build_field_eliminated_master(p: &ModelParams, m: &MatrixElements) -> Result<LindbladModel> {
    p.validate()?;
    p.require_no_atom_pump()?;
    let gamma = double_commutator_gamma(p, m);
    if gamma < 0.0 {
        return Err(Error::ModelValidity {
            param: "delta_c".into(),
            reason: format!(
                "|Δc'| = {:.6} exceeds κ = {}: double-commutator prefactor is negative",
                p.shifted_detuning(m).abs(),
                p.kappa
            ),
        });
    }
    let eps = (p.u0 * photon_estimate(Setup::CavityPump, p, m) / p.kappa).abs();
    if eps > 0.1 {
        warn!("field elimination outside its validity range: |U0 n / κ| = {eps:.3}");
    }
    let at = AtomOps::new(p)?;
    let d = p.shifted_detuning(m);
    let denom = p.lorentzian_denominator(m);
    let pre = p.u0 * p.eta * p.eta / denom;
    let b2 = at.b.matmul(&at.b)?;
    let h = SparseOperator::combine(
        at.basis.dim(),
        &[
            (re(m.hopping_at(p.v_cl) + pre * m.j), &at.b),
            (re(pre * p.u0 * d * m.j * m.j / denom), &b2),
            (re(m.u / 2.0), &at.c),
        ],
    )?;
    LindbladModel::new(h, Space::Atomic(at.basis), "field_eliminated")?.with_double_commutator(at.b, gamma)
}

/// Field-eliminated atom-pump model
/// `H = (E + J V_cl) B + (U/2) C + J̃0² η_eff² Δc'/(κ² + Δc'²) D²` with
/// channel `(D, κ η_eff² J̃0² / (κ² + Δc'²))`.
pub fn build_adiabatic_atom_pump(p: &ModelParams, m: &MatrixElements) -> Result<LindbladModel> {
    p.validate()?;
    p.require_no_cavity_pump()?;
    let at = AtomOps::new(p)?;
    let d = p.shifted_detuning(m);
    let denom = p.lorentzian_denominator(m);
    let s = (m.jt0 * p.eta_eff).powi(2) / denom;
    let d2 = at.d.matmul(&at.d)?;
    let h = SparseOperator::combine(
        at.basis.dim(),
        &[
            (re(m.hopping_at(p.v_cl)), &at.b),
            (re(m.u / 2.0), &at.c),
            (re(s * d), &d2),
        ],
    )?;
    LindbladModel::new(h, Space::Atomic(at.basis), "adiabatic_atom_pump")?
        .with_channel(at.d, p.kappa * s, "imbalance_loss")
}

/// Adiabatic cavity field as an atomic operator.
///
/// Cavity pump: `η/A [1 - i U0 J/A B - (U0 J)²/A² B²]` with `A = κ - iΔc'`.
/// Atom pump: `i η_eff J̃0 / (iΔc' - κ) D`.
pub fn adiabatic_field_operator(setup: Setup, p: &ModelParams, m: &MatrixElements) -> Result<SparseOperator> {
    p.validate()?;
    let at = AtomOps::new(p)?;
    let d = p.shifted_detuning(m);
    let i = C64::new(0.0, 1.0);
    let dim = at.basis.dim();
    match setup {
        Setup::CavityPump => {
            let a0 = C64::new(p.kappa, -d);
            let g = re(p.u0 * m.j) / a0;
            let id = SparseOperator::identity(dim);
            let b2 = at.b.matmul(&at.b)?;
            let pre = re(p.eta) / a0;
            SparseOperator::combine(dim, &[(pre, &id), (-pre * i * g, &at.b), (-pre * g * g, &b2)])
        }
        Setup::AtomPump => {
            let coeff = i * p.eta_eff * m.jt0 / C64::new(-p.kappa, d);
            Ok(at.d.scale(coeff))
        }
    }
}

/// Amplitude `α` of the coherent field scattered by a single unit of
/// imbalance in the atom-pump setup, `a_ss = α D`.
pub fn atom_pump_field_amplitude(p: &ModelParams, m: &MatrixElements) -> C64 {
    let i = C64::new(0.0, 1.0);
    i * p.eta_eff * m.jt0 / C64::new(-p.kappa, p.shifted_detuning(m))
}
