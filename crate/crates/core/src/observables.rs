//! Reference states and the observables reported by the solvers.

use std::f64::consts::PI;
use std::fmt::Write as _;

use log::warn;
use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::fockspace::{
    build_hop_operator, build_imbalance_operator, build_site_number, lift_to_joint, Factor,
    LatticeBasis, SparseOperator,
};
use crate::lattice::MatrixElements;
use crate::models::{adiabatic_field_operator, ModelParams, Setup, Space};
use crate::solvers::{QuantumState, StateRef};
use crate::C64;

/// Population of the highest photon state above which a cutoff warning is
/// logged.
pub const CUTOFF_SATURATION: f64 = 1e-4;

/// Mott state `|n, n, …, n⟩` with `n = N/M`.
pub fn build_mi_state(basis: &LatticeBasis) -> Result<QuantumState> {
    let (n, m) = (basis.num_atoms(), basis.num_sites());
    if n % m != 0 {
        return Err(Error::UndefinedMott { atoms: n, sites: m });
    }
    let occ = vec![(n / m) as u32; m];
    QuantumState::basis(basis.dim(), basis.require_index(&occ)?)
}

/// Superfluid state `(Σ_j b_j†/√M)^N |vac⟩ / √(N!)`, with amplitudes
/// `√(N!/(M^N ∏ k_i!))`.
pub fn build_sf_state(basis: &LatticeBasis) -> Result<QuantumState> {
    let amps: Vec<C64> = basis
        .states()
        .iter()
        .map(|occ| {
            let log_fact: f64 = occ.iter().map(|&k| ln_factorial(k as usize)).sum();
            C64::new((-0.5 * log_fact).exp(), 0.0)
        })
        .collect();
    QuantumState::new(amps)
}

/// Coherent state `|α⟩` truncated at `n_max` and renormalized.
pub fn build_coherent_state(alpha: C64, n_max: usize) -> Result<QuantumState> {
    let mut amps = Vec::with_capacity(n_max + 1);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..=n_max {
        if n > 0 {
            c *= alpha / (n as f64).sqrt();
        }
        amps.push(c);
    }
    QuantumState::new(amps)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `⟨ref|ρ_at|ref⟩` with the photon mode traced out where present.
pub fn overlap_probability<'a>(
    state: impl Into<StateRef<'a>>,
    space: &Space,
    reference: &QuantumState,
) -> Result<f64> {
    let state = state.into();
    let atomic_dim = space
        .atomic()
        .ok_or_else(|| Error::arg("overlap probability needs an atomic factor"))?
        .dim();
    if reference.dim() != atomic_dim {
        return Err(Error::arg(format!(
            "reference dimension {} does not match atomic dimension {atomic_dim}",
            reference.dim()
        )));
    }
    if let (StateRef::Pure(psi), Space::Atomic(_)) = (state, space) {
        if psi.dim() != atomic_dim {
            return Err(Error::arg("state does not match the atomic basis"));
        }
        return Ok(reference.inner(psi).norm_sqr());
    }
    let rho = state.atomic_density(space)?;
    let v = DVector::from_column_slice(reference.amplitudes());
    Ok((v.adjoint() * rho * &v)[(0, 0)].re.clamp(0.0, 1.0))
}

/// Site populations `⟨n̂_j⟩`.
pub fn site_populations<'a>(state: impl Into<StateRef<'a>>, space: &Space) -> Result<Vec<f64>> {
    let state = state.into();
    let basis = space
        .atomic()
        .ok_or_else(|| Error::arg("site populations need an atomic factor"))?;
    let rho = state.atomic_density(space)?;
    Ok((0..basis.num_sites())
        .map(|j| {
            basis
                .states()
                .iter()
                .enumerate()
                .map(|(i, occ)| occ[j] as f64 * rho[(i, i)].re)
                .sum()
        })
        .collect())
}

/// `⟨kx⟩ = Σ_j jπ ⟨n̂_j⟩ / N`, sites indexed from 0.
pub fn mean_position<'a>(state: impl Into<StateRef<'a>>, space: &Space) -> Result<f64> {
    let pops = site_populations(state, space)?;
    let n = space.atomic().expect("checked above").num_atoms() as f64;
    Ok(pops
        .iter()
        .enumerate()
        .map(|(j, p)| j as f64 * PI * p)
        .sum::<f64>()
        / n)
}

/// `⟨a†a⟩`, warning when the top Fock state is populated above
/// [`CUTOFF_SATURATION`].
pub fn photon_number<'a>(state: impl Into<StateRef<'a>>, space: &Space) -> Result<f64> {
    let dist = state.into().photon_distribution(space)?;
    let top = *dist.last().expect("at least the vacuum");
    if top > CUTOFF_SATURATION {
        warn!(
            "photon cutoff saturated: population {top:.2e} in |n_max = {}⟩",
            dist.len() - 1
        );
    }
    Ok(dist.iter().enumerate().map(|(n, p)| n as f64 * p).sum())
}

/// Population of the highest retained photon state.
pub fn cutoff_population<'a>(state: impl Into<StateRef<'a>>, space: &Space) -> Result<f64> {
    let dist = state.into().photon_distribution(space)?;
    Ok(*dist.last().expect("at least the vacuum"))
}

/// Photon number predicted by the adiabatic field, `⟨a_ss† a_ss⟩`.
pub fn photon_number_adiabatic<'a>(
    state: impl Into<StateRef<'a>>,
    space: &Space,
    setup: Setup,
    p: &ModelParams,
    m: &MatrixElements,
) -> Result<f64> {
    let state = state.into();
    let a = adiabatic_field_operator(setup, p, m)?;
    let ada = a.adjoint().matmul(&a)?;
    let rho = state.atomic_density(space)?;
    if rho.nrows() != ada.dim() {
        return Err(Error::arg("state does not match the model's atomic basis"));
    }
    let mut acc = C64::new(0.0, 0.0);
    for (r, c, v) in ada.triplets() {
        acc += v * rho[(c, r)];
    }
    Ok(acc.re)
}

/// One row of observables. Quantities that do not apply to the space are
/// `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableRecord {
    /// `ω_R t`.
    pub time: f64,
    pub p_mi: Option<f64>,
    pub p_sf: Option<f64>,
    pub photon_number: Option<f64>,
    pub photon_number_adiabatic: Option<f64>,
    pub mean_kx: Option<f64>,
    pub exp_d2: Option<f64>,
    pub exp_b: Option<f64>,
    pub trace_drift: f64,
}

impl ObservableRecord {
    pub const COLUMNS: [&'static str; 9] = [
        "time_wr",
        "p_mi",
        "p_sf",
        "photons",
        "photons_adiabatic",
        "mean_kx",
        "exp_d2",
        "exp_b",
        "trace_drift",
    ];

    pub fn csv_header() -> String {
        Self::COLUMNS.join(",")
    }

    /// Comma-separated row, 17 significant digits, empty cells for `None`.
    pub fn to_csv_row(&self) -> String {
        let mut s = String::new();
        let cells = [
            Some(self.time),
            self.p_mi,
            self.p_sf,
            self.photon_number,
            self.photon_number_adiabatic,
            self.mean_kx,
            self.exp_d2,
            self.exp_b,
            Some(self.trace_drift),
        ];
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            if let Some(v) = c {
                write!(s, "{}", format_float(*v)).expect("string write");
            }
        }
        s
    }
}

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Precomputed operators for evaluating [`ObservableRecord`]s on one space.
pub struct ObservableSet {
    space: Space,
    mi: Option<QuantumState>,
    sf: QuantumState,
    b: SparseOperator,
    d2: SparseOperator,
    site_numbers: Vec<SparseOperator>,
    adiabatic: Option<SparseOperator>,
}

impl ObservableSet {
    /// Observables on `space`; `adiabatic` adds the adiabatic photon
    /// estimate for the given pump setup.
    pub fn new(
        space: &Space,
        adiabatic: Option<(Setup, &ModelParams, &MatrixElements)>,
    ) -> Result<Self> {
        let basis = space
            .atomic()
            .ok_or_else(|| Error::arg("observable set needs an atomic factor"))?
            .clone();
        let lift = |op: SparseOperator| -> Result<SparseOperator> {
            match space {
                Space::Joint(j) => lift_to_joint(&op, j, Factor::Atomic),
                _ => Ok(op),
            }
        };
        let d = build_imbalance_operator(&basis);
        let d2 = d.matmul(&d)?;
        let boundary = adiabatic.map(|(_, p, _)| p.boundary).unwrap_or_default();
        let ad = match adiabatic {
            Some((setup, p, m)) => {
                let a = adiabatic_field_operator(setup, p, m)?;
                Some(lift(a.adjoint().matmul(&a)?)?)
            }
            None => None,
        };
        Ok(Self {
            mi: build_mi_state(&basis).ok(),
            sf: build_sf_state(&basis)?,
            b: lift(build_hop_operator(&basis, boundary))?,
            d2: lift(d2)?,
            site_numbers: (0..basis.num_sites())
                .map(|j| lift(build_site_number(&basis, j)))
                .collect::<Result<_>>()?,
            adiabatic: ad,
            space: space.clone(),
        })
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn evaluate<'a>(&self, time: f64, state: impl Into<StateRef<'a>>, trace_drift: f64) -> Result<ObservableRecord> {
        let state = state.into();
        let p_mi = match &self.mi {
            Some(mi) => Some(overlap_probability(state, &self.space, mi)?),
            None => None,
        };
        let p_sf = Some(overlap_probability(state, &self.space, &self.sf)?);
        let photons = match self.space {
            Space::Joint(_) => Some(photon_number(state, &self.space)?),
            _ => None,
        };
        let n_atoms = self.space.atomic().expect("checked in new").num_atoms() as f64;
        let mut kx = 0.0;
        for (j, op) in self.site_numbers.iter().enumerate() {
            kx += j as f64 * PI * state.expectation(op)?.re;
        }
        Ok(ObservableRecord {
            time,
            p_mi,
            p_sf,
            photon_number: photons,
            photon_number_adiabatic: match &self.adiabatic {
                Some(op) => Some(state.expectation(op)?.re),
                None => None,
            },
            mean_kx: Some(kx / n_atoms),
            exp_d2: Some(state.expectation(&self.d2)?.re),
            exp_b: Some(state.expectation(&self.b)?.re),
            trace_drift,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::{enumerate_basis, JointBasis};

    fn state(basis: &LatticeBasis, terms: &[(&[u32], f64)]) -> QuantumState {
        let mut v = vec![C64::new(0.0, 0.0); basis.dim()];
        for (occ, a) in terms {
            v[basis.index_of(occ).unwrap()] = C64::new(*a, 0.0);
        }
        QuantumState::new(v).unwrap()
    }

    #[test]
    fn mott_states() {
        let b = enumerate_basis(2, 2).unwrap();
        let mi = build_mi_state(&b).unwrap();
        assert_eq!(mi.amplitudes()[b.index_of(&[1, 1]).unwrap()], C64::new(1.0, 0.0));
        let b4 = enumerate_basis(4, 4).unwrap();
        let mi4 = build_mi_state(&b4).unwrap();
        assert_eq!(mi4.amplitudes()[b4.index_of(&[1, 1, 1, 1]).unwrap()].re, 1.0);
        let b3 = enumerate_basis(3, 2).unwrap();
        assert_eq!(
            build_mi_state(&b3).unwrap_err(),
            Error::UndefinedMott { atoms: 3, sites: 2 }
        );
    }

    #[test]
    fn superfluid_states() {
        let b = enumerate_basis(1, 2).unwrap();
        let sf = build_sf_state(&b).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!(sf.amplitudes().iter().all(|z| (z.re - h).abs() < 1e-15));

        // (b1† + b2†)²|0⟩ / (2√2) expanded by hand
        let b = enumerate_basis(2, 2).unwrap();
        let sf = build_sf_state(&b).unwrap();
        let expect = state(&b, &[(&[2, 0], 0.5), (&[1, 1], h), (&[0, 2], 0.5)]);
        assert!((sf.inner(&expect).norm() - 1.0).abs() < 1e-15);

        let b = enumerate_basis(4, 4).unwrap();
        assert!((build_sf_state(&b).unwrap().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overlap_examples() {
        let b = enumerate_basis(2, 2).unwrap();
        let space = Space::Atomic(b.clone());
        let mi = build_mi_state(&b).unwrap();
        let sf = build_sf_state(&b).unwrap();
        assert!((overlap_probability(&mi, &space, &mi).unwrap() - 1.0).abs() < 1e-15);
        assert!((overlap_probability(&sf, &space, &mi).unwrap() - 0.5).abs() < 1e-15);
        let cat = state(&b, &[(&[2, 0], 1.0), (&[0, 2], 1.0)]);
        assert_eq!(overlap_probability(&cat, &space, &mi).unwrap(), 0.0);
        let wrong = build_mi_state(&enumerate_basis(2, 1 + 1).unwrap()).unwrap();
        let other = Space::Atomic(enumerate_basis(3, 3).unwrap());
        assert!(overlap_probability(&wrong, &other, &wrong).is_err());
    }

    #[test]
    fn overlap_on_joint_space_traces_photons() {
        let b = enumerate_basis(2, 2).unwrap();
        let space = Space::Joint(JointBasis::new(b.clone(), 3));
        let sf = build_sf_state(&b).unwrap();
        let ph = QuantumState::new(vec![
            C64::new(0.3, 0.0),
            C64::new(0.0, 0.5),
            C64::new(0.1, 0.0),
            C64::new(0.2, 0.0),
        ])
        .unwrap();
        let joint = sf.tensor(&ph);
        let mi = build_mi_state(&b).unwrap();
        assert!((overlap_probability(&joint, &space, &mi).unwrap() - 0.5).abs() < 1e-14);
        let rho = joint.to_density();
        assert!((overlap_probability(&rho, &space, &mi).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn positions() {
        let b = enumerate_basis(1, 2).unwrap();
        let space = Space::Atomic(b.clone());
        let l = state(&b, &[(&[1, 0], 1.0)]);
        let r = state(&b, &[(&[0, 1], 1.0)]);
        let sym = state(&b, &[(&[1, 0], 1.0), (&[0, 1], 1.0)]);
        assert_eq!(mean_position(&l, &space).unwrap(), 0.0);
        assert!((mean_position(&r, &space).unwrap() - PI).abs() < 1e-15);
        assert!((mean_position(&sym, &space).unwrap() - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn photon_numbers() {
        let b = enumerate_basis(2, 2).unwrap();
        let space = Space::Joint(JointBasis::new(b.clone(), 4));
        let vac = build_mi_state(&b)
            .unwrap()
            .tensor(&QuantumState::basis(5, 0).unwrap());
        assert_eq!(photon_number(&vac, &space).unwrap(), 0.0);
        let three = build_mi_state(&b)
            .unwrap()
            .tensor(&QuantumState::basis(5, 3).unwrap());
        assert_eq!(photon_number(&three, &space).unwrap(), 3.0);
        assert_eq!(cutoff_population(&three, &space).unwrap(), 0.0);
    }

    #[test]
    fn adiabatic_photons_atom_pump() {
        let m = MatrixElements {
            e0: 1.0,
            e: -0.06,
            j0: 0.84,
            j: -0.004,
            jt0: 0.9,
            u: 0.0,
            depth_used: -10.0,
        };
        let p = ModelParams {
            u0: -0.1,
            kappa: 4.0,
            eta_eff: 1.3,
            detuning: crate::models::Detuning::Shifted(2.0),
            n_atoms: 2,
            n_sites: 2,
            ..Default::default()
        };
        let b = p.atomic_basis().unwrap();
        let space = Space::Atomic(b.clone());
        let mi = build_mi_state(&b).unwrap();
        let n_mi = photon_number_adiabatic(&mi, &space, Setup::AtomPump, &p, &m).unwrap();
        assert_eq!(n_mi, 0.0);
        let left = state(&b, &[(&[2, 0], 1.0)]);
        let n_left = photon_number_adiabatic(&left, &space, Setup::AtomPump, &p, &m).unwrap();
        let expect = 4.0 * (p.eta_eff * m.jt0).powi(2) / (16.0 + 4.0);
        assert!((n_left - expect).abs() < 1e-12);
    }

    #[test]
    fn csv_row_layout() {
        let r = ObservableRecord {
            time: 0.5,
            p_mi: Some(1.0),
            p_sf: None,
            photon_number: None,
            photon_number_adiabatic: None,
            mean_kx: Some(PI),
            exp_d2: None,
            exp_b: None,
            trace_drift: 0.0,
        };
        let row = r.to_csv_row();
        assert_eq!(row.split(',').count(), ObservableRecord::COLUMNS.len());
        assert!(row.starts_with("5.0000000000000000e-1,1.0000000000000000e0,,"));
        let kx: f64 = row.split(',').nth(5).unwrap().parse().unwrap();
        assert_eq!(kx, PI);
    }
}
