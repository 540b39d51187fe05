use cqlattice::fockspace::*;
use cqlattice::C64;
use proptest::prelude::*;

fn random_vector(dim: usize, seed: &[f64]) -> Vec<C64> {
    (0..dim)
        .map(|i| {
            let a = seed[i % seed.len()];
            C64::new((1.7 * i as f64 + a).sin(), (0.3 * i as f64 - a).cos())
        })
        .collect()
}

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn boundary() -> impl Strategy<Value = Boundary> {
    prop_oneof![Just(Boundary::Open), Just(Boundary::Periodic)]
}

proptest! {
    #[test]
    fn number_conserving_operators_commute_with_n(n in 1usize..=4, m in 2usize..=4, b in boundary()) {
        let basis = enumerate_basis(n, m).unwrap();
        let num = build_number_operator(&basis);
        for op in [
            build_hop_operator(&basis, b),
            build_onsite_interaction(&basis),
            build_imbalance_operator(&basis),
        ] {
            prop_assert!(op.commutator(&num).unwrap().is_zero(0.0));
            prop_assert!(op.is_hermitian(0.0));
        }
    }

    #[test]
    fn hopping_is_self_adjoint_on_random_vectors(
        n in 1usize..=4,
        m in 2usize..=4,
        b in boundary(),
        seed in prop::collection::vec(-3.0f64..3.0, 1..6),
    ) {
        let basis = enumerate_basis(n, m).unwrap();
        let hop = build_hop_operator(&basis, b);
        let x = random_vector(basis.dim(), &seed);
        let y = random_vector(basis.dim(), &seed.iter().map(|s| s * 0.7 + 1.0).collect::<Vec<_>>());
        let lhs = inner(&x, &hop.apply(&y));
        let rhs = inner(&hop.apply(&x), &y);
        prop_assert!((lhs - rhs).norm() < 1e-12 * (1.0 + lhs.norm()));
    }

    #[test]
    fn site_numbers_sum_to_total(n in 1usize..=4, m in 2usize..=4) {
        let basis = enumerate_basis(n, m).unwrap();
        let total = (0..m)
            .map(|j| build_site_number(&basis, j))
            .reduce(|a, b| a.add(&b).unwrap())
            .unwrap();
        let diff = total.add(&build_number_operator(&basis).scale(C64::new(-1.0, 0.0))).unwrap();
        prop_assert!(diff.is_zero(1e-14));
        for i in 0..basis.dim() {
            prop_assert_eq!(basis.state(i).iter().sum::<u32>() as usize, n);
        }
    }

    #[test]
    fn ladder_commutator_below_cutoff(n_max in 1usize..=30) {
        let ph = build_photon_ops(n_max);
        let comm = ph.a.commutator(&ph.a_dag).unwrap();
        for k in 0..n_max {
            prop_assert!((comm.get(k, k) - C64::new(1.0, 0.0)).norm() < 1e-12);
        }
        // truncation shows up only in the top corner
        prop_assert!((comm.get(n_max, n_max) + C64::new(n_max as f64, 0.0)).norm() < 1e-12);
        let n_op = ph.a_dag.matmul(&ph.a).unwrap();
        let diff = n_op.add(&ph.number.scale(C64::new(-1.0, 0.0))).unwrap();
        prop_assert!(diff.is_zero(1e-12));
    }

    #[test]
    fn lifted_factors_commute(n in 1usize..=3, m in 2usize..=3, n_max in 1usize..=5) {
        let atomic = enumerate_basis(n, m).unwrap();
        let joint = JointBasis::new(atomic.clone(), n_max);
        let hop = lift_to_joint(&build_hop_operator(&atomic, Boundary::Open), &joint, Factor::Atomic).unwrap();
        let a = lift_to_joint(&build_photon_ops(n_max).a, &joint, Factor::Photonic).unwrap();
        prop_assert!(hop.commutator(&a).unwrap().is_zero(1e-14));
        prop_assert_eq!(hop.dim(), atomic.dim() * (n_max + 1));
    }

    #[test]
    fn kron_respects_products(seed in prop::collection::vec(-2.0f64..2.0, 4..8)) {
        let a = SparseOperator::from_dense(&nalgebra::DMatrix::from_fn(2, 2, |i, j| random_vector(4, &seed)[2 * i + j]), 0.0).unwrap();
        let b = SparseOperator::from_dense(&nalgebra::DMatrix::from_fn(3, 3, |i, j| random_vector(9, &seed[1..])[3 * i + j]), 0.0).unwrap();
        let lhs = a.kron(&b).matmul(&a.kron(&b)).unwrap();
        let rhs = a.matmul(&a).unwrap().kron(&b.matmul(&b).unwrap());
        let diff = lhs.add(&rhs.scale(C64::new(-1.0, 0.0))).unwrap();
        prop_assert!(diff.is_zero(1e-10));
        let adj = a.kron(&b).adjoint().add(&a.adjoint().kron(&b.adjoint()).scale(C64::new(-1.0, 0.0))).unwrap();
        prop_assert!(adj.is_zero(1e-14));
    }
}

#[test]
fn hopping_and_imbalance_do_not_commute_in_two_wells() {
    let basis = enumerate_basis(2, 2).unwrap();
    let b = build_hop_operator(&basis, Boundary::Periodic);
    let d = build_imbalance_operator(&basis);
    assert!(!b.commutator(&d).unwrap().is_zero(1e-12));
}

#[test]
fn operators_close_on_the_basis() {
    let basis = enumerate_basis(3, 3).unwrap();
    for op in [
        build_hop_operator(&basis, Boundary::Periodic),
        build_onsite_interaction(&basis),
        build_imbalance_operator(&basis),
    ] {
        for (r, c, _) in op.triplets() {
            assert!(r < basis.dim() && c < basis.dim());
            let nr: u32 = basis.state(r).iter().sum();
            let nc: u32 = basis.state(c).iter().sum();
            assert_eq!(nr, nc);
        }
    }
}

#[test]
fn basis_sizes_follow_stars_and_bars() {
    for n in 1..=5 {
        for m in 2..=5 {
            let basis = enumerate_basis(n, m).unwrap();
            assert_eq!(basis.dim(), binomial(n + m - 1, n));
            for i in 0..basis.dim() {
                assert_eq!(basis.index_of(basis.state(i)), Some(i));
            }
        }
    }
}
