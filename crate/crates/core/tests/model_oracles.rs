use cqlattice::fockspace::{build_number_operator, suggest_photon_cutoff, lift_to_joint, Boundary, Factor, JointBasis, SparseOperator};
use cqlattice::lattice::{LatticeConfig, MatrixElements};
use cqlattice::models::*;
use cqlattice::observables::*;
use cqlattice::solvers::*;
use cqlattice::C64;
use proptest::prelude::*;

fn elements_at(p: &ModelParams, depth: f64) -> MatrixElements {
    p.matrix_elements(depth, &LatticeConfig::default()).unwrap()
}

fn lifted_number(p: &ModelParams) -> SparseOperator {
    let basis = p.atomic_basis().unwrap();
    let joint = JointBasis::new(basis.clone(), p.n_max);
    lift_to_joint(&build_number_operator(&basis), &joint, Factor::Atomic).unwrap()
}

fn fixed_elements(u: f64) -> MatrixElements {
    MatrixElements {
        e0: 1.1,
        e: -0.05,
        j0: 0.8,
        j: -0.006,
        jt0: 0.88,
        u,
        depth_used: -8.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn builders_conserve_atom_number(
        u0 in -3.0f64..0.0,
        kappa in 0.5f64..5.0,
        eta in 0.0f64..1.0,
        delta in -4.0f64..4.0,
        u in 0.0f64..2.0,
        n in 1usize..=3,
        m in 2usize..=3,
    ) {
        let p = ModelParams {
            u0,
            kappa,
            eta,
            detuning: Detuning::Shifted(delta),
            v_cl: -5.0,
            n_atoms: n,
            n_sites: m,
            n_max: 0,
            ..ModelParams::default()
        };
        let me = fixed_elements(u);
        let q = ModelParams { eta: 0.0, eta_eff: eta, ..p.clone() };
        let estimate = photon_estimate(Setup::CavityPump, &p, &me).max(photon_estimate(Setup::AtomPump, &q, &me));
        let n_max = suggest_photon_cutoff(estimate);
        let (p, q) = (ModelParams { n_max, ..p }, ModelParams { n_max, ..q });
        let num = lifted_number(&p);
        for model in [build_general_full(&p, &me).unwrap(), build_cavity_pump_full(&p, &me).unwrap()] {
            prop_assert!(model.hamiltonian.is_hermitian(1e-12));
            prop_assert!(model.hamiltonian.commutator(&num).unwrap().is_zero(1e-12));
            prop_assert!(model.channels.iter().all(|c| c.rate >= 0.0));
        }
        for keep in [false, true] {
            let model = build_atom_pump_full(&q, &me, keep).unwrap();
            prop_assert!(model.hamiltonian.is_hermitian(1e-12));
            prop_assert!(model.hamiltonian.commutator(&num).unwrap().is_zero(1e-12));
        }
        for variant in [CavityVariant::EffHam, CavityVariant::EffHam0] {
            let model = build_adiabatic_cavity_pump(variant, &p, &me).unwrap();
            prop_assert!(model.hamiltonian.is_hermitian(1e-12));
            prop_assert!(model.channels.iter().all(|c| c.rate >= 0.0));
        }
        let model = build_adiabatic_atom_pump(&q, &me).unwrap();
        prop_assert!(model.hamiltonian.is_hermitian(1e-12));
        prop_assert!(model.channels.iter().all(|c| c.rate >= 0.0));
    }
}

#[test]
fn without_light_every_builder_is_bose_hubbard() {
    let p = ModelParams {
        kappa: 2.0,
        detuning: Detuning::Bare(-1.0),
        v_cl: -6.0,
        interaction: Interaction::OnSite(0.4),
        n_atoms: 3,
        n_sites: 3,
        n_max: 3,
        ..ModelParams::default()
    };
    let me = elements_at(&p, p.v_cl);
    let basis = p.atomic_basis().unwrap();
    let space = Space::Atomic(basis.clone());
    let bh = SparseOperator::combine(
        basis.dim(),
        &[
            (C64::new(me.hopping_at(p.v_cl), 0.0), &cqlattice::fockspace::build_hop_operator(&basis, p.boundary)),
            (C64::new(me.u / 2.0, 0.0), &cqlattice::fockspace::build_onsite_interaction(&basis)),
        ],
    )
    .unwrap();
    let reference = ground_state(&bh).unwrap().state;
    let fidelity = |psi: &QuantumState, model: &LindbladModel| -> f64 {
        let rho = StateRef::from(psi).atomic_density(&model.space).unwrap();
        let v = nalgebra::DVector::from_column_slice(reference.amplitudes());
        (v.adjoint() * rho * &v)[(0, 0)].re
    };
    let atomic_models = [
        build_adiabatic_cavity_pump(CavityVariant::EffHam, &p, &me).unwrap(),
        build_adiabatic_cavity_pump(CavityVariant::EffHam0, &p, &me).unwrap(),
        build_adiabatic_atom_pump(&p, &me).unwrap(),
        build_field_eliminated_master(&p, &me).unwrap(),
    ];
    for model in &atomic_models {
        let g = ground_state(&model.hamiltonian).unwrap();
        assert!(fidelity(&g.state, model) > 1.0 - 1e-10, "{}", model.label);
        assert!(model.channels_with_double_commutators().iter().all(|c| c.rate == 0.0));
    }
    for model in [
        build_general_full(&p, &me).unwrap(),
        build_cavity_pump_full(&p, &me).unwrap(),
        build_atom_pump_full(&p, &me, true).unwrap(),
    ] {
        let g = ground_state(&model.hamiltonian).unwrap();
        assert!(fidelity(&g.state, &model) > 1.0 - 1e-10, "{}", model.label);
        assert!(photon_number(&g.state, &model.space).unwrap() < 1e-12);
    }
    let g = ground_state(&bh).unwrap();
    assert!((overlap_probability(&g.state, &space, &reference).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn empty_cavity_steady_photons() {
    for (eta, kappa, dc) in [(1.0, 1.0, 0.0), (0.5, 2.0, 1.5), (0.9, 0.7, -0.4)] {
        let p = ModelParams {
            kappa,
            eta,
            detuning: Detuning::Bare(dc),
            n_atoms: 0,
            n_max: 14,
            ..ModelParams::default()
        };
        let me = fixed_elements(0.0);
        let model = build_cavity_pump_full(&p, &me).unwrap();
        let ss = steady_state(&model, &SteadyOptions::default()).unwrap();
        let n = photon_number(&ss.rho, &model.space).unwrap();
        let expected = eta * eta / (kappa * kappa + dc * dc);
        assert!((n - expected).abs() < 1e-8 * expected, "{n} vs {expected}");
    }
}

#[test]
fn undriven_atom_pump_keeps_the_vacuum() {
    let p = ModelParams {
        u0: -0.1,
        kappa: 4.0,
        detuning: Detuning::Shifted(4.0),
        v_cl: -10.0,
        n_atoms: 2,
        n_sites: 2,
        n_max: 3,
        boundary: Boundary::Periodic,
        ..ModelParams::default()
    };
    let me = elements_at(&p, p.v_cl);
    let model = build_atom_pump_full(&p, &me, true).unwrap();
    let basis = p.atomic_basis().unwrap();
    let psi0 = build_sf_state(&basis).unwrap().tensor(&QuantumState::basis(p.n_max + 1, 0).unwrap());
    let t: Vec<f64> = (0..=10).map(|i| i as f64 * 10.0).collect();
    let run = evolve_master(&model, &psi0.to_density(), &t, &OdeOptions::default()).unwrap();
    for rho in &run.states {
        assert!(photon_number(rho, &model.space).unwrap() < 1e-14);
    }
}

#[test]
fn atom_pump_respects_reflection_photon_parity() {
    // P = (site reflection) ⊗ (-1)^{a†a} commutes with the atom-pump
    // Hamiltonian and with the jump a up to a sign
    let p = ModelParams {
        u0: -0.1,
        kappa: 4.0,
        eta_eff: 1.0,
        detuning: Detuning::Shifted(4.0),
        v_cl: -10.0,
        interaction: Interaction::OnSite(0.3),
        n_atoms: 2,
        n_sites: 2,
        n_max: 6,
        boundary: Boundary::Periodic,
        ..ModelParams::default()
    };
    let me = elements_at(&p, p.v_cl);
    let model = build_atom_pump_full(&p, &me, true).unwrap();
    let basis = p.atomic_basis().unwrap();
    let joint = JointBasis::new(basis.clone(), p.n_max);
    let parity = |idx: usize| -> Option<usize> {
        let (ia, n) = (idx / (p.n_max + 1), idx % (p.n_max + 1));
        let occ = basis.state(ia);
        let mirrored: Vec<u32> = occ.iter().rev().cloned().collect();
        let ja = basis.index_of(&mirrored)?;
        Some(joint.index(ja, n))
    };
    let sign = |idx: usize| if (idx % (p.n_max + 1)) % 2 == 0 { 1.0 } else { -1.0 };
    let mut triplets = Vec::new();
    for i in 0..joint.dim() {
        triplets.push((parity(i).unwrap(), i, C64::new(sign(i), 0.0)));
    }
    let op = SparseOperator::from_triplets(joint.dim(), triplets, 0.0).unwrap();
    assert!(model.hamiltonian.commutator(&op).unwrap().is_zero(1e-12));

    let psi0 = build_mi_state(&basis).unwrap().tensor(&QuantumState::basis(p.n_max + 1, 0).unwrap());
    let states = evolve_pure(&model.hamiltonian, &psi0, &[0.0, 7.0, 40.0], &OdeOptions::default()).unwrap();
    for s in &states {
        let ps = op.apply(s.amplitudes());
        let odd: f64 = s.amplitudes().iter().zip(&ps).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / 4.0;
        assert!(odd < 1e-18, "odd-parity weight {odd}");
    }
}

#[test]
fn field_elimination_tracks_effective_hamiltonian() {
    let p = ModelParams {
        u0: -50.0,
        kappa: 25.0,
        eta: 1.0,
        detuning: Detuning::Shifted(0.0),
        v_cl: -10.0,
        interaction: Interaction::OnSite(0.2),
        n_atoms: 2,
        n_sites: 2,
        boundary: Boundary::Periodic,
        ..ModelParams::default()
    };
    let me = elements_at(&p, p.v_cl + p.u0 * p.eta * p.eta / (p.kappa * p.kappa));
    let master = build_field_eliminated_master(&p, &me).unwrap();
    let eff = build_adiabatic_cavity_pump(CavityVariant::EffHam, &p, &me).unwrap();
    let basis = p.atomic_basis().unwrap();
    let mi = build_mi_state(&basis).unwrap();
    let period = std::f64::consts::PI / me.hopping_at(p.v_cl).abs();
    let t: Vec<f64> = (0..=50).map(|i| 5.0 * period * i as f64 / 50.0).collect();
    let a = evolve_master(&master, &mi.to_density(), &t, &OdeOptions::default()).unwrap();
    let b = evolve_master(&eff, &mi.to_density(), &t, &OdeOptions::default()).unwrap();
    let worst = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| {
            (overlap_probability(x, &master.space, &mi).unwrap() - overlap_probability(y, &eff.space, &mi).unwrap()).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst < 0.02, "{worst}");
}

#[test]
fn field_elimination_refuses_negative_rates() {
    let p = ModelParams {
        u0: -1.0,
        kappa: 1.0,
        eta: 1.0,
        v_cl: -5.0,
        ..ModelParams::default()
    };
    let me = fixed_elements(0.0);
    let at_edge = ModelParams { detuning: Detuning::Shifted(1.0), ..p.clone() };
    let model = build_field_eliminated_master(&at_edge, &me).unwrap();
    assert!(model.double_commutators.iter().all(|d| d.gamma.abs() < 1e-15));
    let beyond = ModelParams { detuning: Detuning::Shifted(1.5), ..p };
    assert!(matches!(build_field_eliminated_master(&beyond, &me), Err(cqlattice::Error::ModelValidity { .. })));
}

#[test]
fn variants_converge_with_linewidth() {
    // η²/κ² and Δc'/κ fixed: both B² coefficients scale as 1/κ
    let mut last = f64::INFINITY;
    for kappa in [1.0, 2.0, 4.0, 8.0, 16.0] {
        let p = ModelParams {
            u0: -1.0,
            kappa,
            eta: 2.0 * kappa,
            detuning: Detuning::Shifted(-0.5 * kappa),
            v_cl: -2.0,
            interaction: Interaction::OnSite(0.05),
            // in two wells B² is constant on the symmetric sector
            n_atoms: 3,
            n_sites: 3,
            boundary: Boundary::Periodic,
            ..ModelParams::default()
        };
        let me = elements_at(&p, -5.0);
        let basis = p.atomic_basis().unwrap();
        let space = Space::Atomic(basis.clone());
        let mi = build_mi_state(&basis).unwrap();
        let p_mi = |v| {
            let g = ground_state(&build_adiabatic_cavity_pump(v, &p, &me).unwrap().hamiltonian).unwrap();
            overlap_probability(&g.state, &space, &mi).unwrap()
        };
        let diff = (p_mi(CavityVariant::EffHam) - p_mi(CavityVariant::EffHam0)).abs();
        assert!(diff < last, "kappa {kappa}: {diff} vs {last}");
        last = diff;
    }
}

#[test]
fn adiabatic_fields() {
    let p = ModelParams {
        u0: -2.0,
        kappa: 1.5,
        eta: 0.7,
        eta_eff: 0.0,
        detuning: Detuning::Shifted(0.4),
        n_atoms: 2,
        n_sites: 2,
        ..ModelParams::default()
    };
    let mut me = fixed_elements(0.0);
    me.j = 0.0;
    let a = adiabatic_field_operator(Setup::CavityPump, &p, &me).unwrap();
    let expected = C64::new(p.eta, 0.0) / C64::new(p.kappa, -0.4);
    for i in 0..a.dim() {
        assert!((a.get(i, i) - expected).norm() < 1e-14);
    }
    let q = ModelParams { eta: 0.0, eta_eff: 0.9, ..p };
    let basis = q.atomic_basis().unwrap();
    let space = Space::Atomic(basis.clone());
    let mi = build_mi_state(&basis).unwrap();
    assert!(photon_number_adiabatic(&mi, &space, Setup::AtomPump, &q, &me).unwrap().abs() < 1e-15);
    let left = QuantumState::basis(basis.dim(), basis.index_of(&[2, 0]).unwrap()).unwrap();
    let n = photon_number_adiabatic(&left, &space, Setup::AtomPump, &q, &me).unwrap();
    let expected = 4.0 * (0.9 * me.jt0).powi(2) / (q.kappa * q.kappa + 0.16);
    assert!((n - expected).abs() < 1e-12);
}
