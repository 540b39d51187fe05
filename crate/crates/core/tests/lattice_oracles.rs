use std::f64::consts::PI;

use cqlattice::lattice::*;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use proptest::prelude::*;

/// Lowest eigenvalue of `-d²/dx² + V cos²x` on one period with twisted
/// boundary `ψ(x + π) = e^{iqπ} ψ(x)`, second-order finite differences.
fn finite_difference_energy(depth: f64, q: f64, n: usize) -> f64 {
    let h = PI / n as f64;
    let twist = Complex64::from_polar(1.0, q * PI);
    // Hermitian n×n matrix embedded as a real 2n×2n symmetric one.
    let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
    let mut set = |i: usize, j: usize, z: Complex64| {
        m[(i, j)] += z.re;
        m[(i + n, j + n)] += z.re;
        m[(i, j + n)] -= z.im;
        m[(i + n, j)] += z.im;
    };
    for i in 0..n {
        let x = i as f64 * h;
        set(i, i, Complex64::new(2.0 / (h * h) + depth * x.cos().powi(2), 0.0));
        let off = Complex64::new(-1.0 / (h * h), 0.0);
        if i + 1 < n {
            set(i, i + 1, off);
            set(i + 1, i, off);
        }
    }
    set(n - 1, 0, Complex64::new(-1.0 / (h * h), 0.0) * twist);
    set(0, n - 1, Complex64::new(-1.0 / (h * h), 0.0) * twist.conj());
    SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::MAX, f64::min)
}

fn wannier(depth: f64, site: i64) -> WannierFunction {
    let cfg = LatticeConfig::default();
    let band = solve_bloch(depth, cfg.n_q, cfg.n_pw).unwrap();
    build_wannier_on_grid(&band, site, cfg.points_per_period, cfg.support_for(depth)).unwrap()
}

#[test]
fn band_matches_finite_differences() {
    for depth in [-2.0, -5.0, -12.0] {
        let band = solve_bloch(depth, 16, 21).unwrap();
        for (&q, &e) in band.quasimomenta().iter().zip(band.energies()).step_by(3) {
            let fd = finite_difference_energy(depth, q, 400);
            assert!((e - fd).abs() < 2e-3 * (1.0 + e.abs()), "V={depth} q={q}: {e} vs {fd}");
        }
    }
}

#[test]
fn deep_lattice_bandwidth_follows_mathieu_asymptotics() {
    let s: f64 = 30.0;
    let band = solve_bloch(-s, 64, 21).unwrap();
    let t_asym = 4.0 / PI.sqrt() * s.powf(0.75) * (-2.0 * s.sqrt()).exp();
    let ratio = band.bandwidth() / (4.0 * t_asym);
    assert!(band.bandwidth() < 0.01);
    assert!((ratio - 1.0).abs() < 0.15, "ratio {ratio}");
}

#[test]
fn deep_wannier_is_nearly_harmonic_ground_state() {
    let w = wannier(-30.0, 0);
    let omega = 30.0f64.sqrt();
    let norm = (omega / PI).powf(0.25);
    let gauss: Vec<f64> = w
        .grid()
        .map(|x| norm * (-omega * x * x / 2.0).exp())
        .collect();
    let overlap = simpson(
        &w.values().iter().zip(&gauss).map(|(a, b)| a * b).collect::<Vec<_>>(),
        w.dx(),
    );
    assert!(overlap > 0.99, "{overlap}");
}

#[test]
fn wannier_functions_are_orthonormal() {
    for depth in [-3.0, -5.0, -10.0, -20.0] {
        let w0 = wannier(depth, 0);
        assert!((overlap(&w0, &w0).unwrap() - 1.0).abs() < 1e-8);
        for site in 1..=3 {
            let w = wannier(depth, site);
            let o = overlap(&w0, &w).unwrap();
            assert!(o.abs() < 1e-8, "V={depth} site {site}: {o}");
        }
    }
}

#[test]
fn duality_with_band_fourier_coefficients() {
    let cfg = LatticeConfig::default();
    for depth in [-5.0, -10.0, -20.0] {
        let band = solve_bloch(depth, cfg.n_q, cfg.n_pw).unwrap();
        let m = matrix_elements_at_depth(depth, 0.0, &cfg).unwrap();
        let mean: f64 = band.energies().iter().sum::<f64>() / band.energies().len() as f64;
        assert!((m.e0 + depth * m.j0 - mean).abs() < 1e-6);
        assert!((m.e + depth * m.j - band.fourier_coefficient(1)).abs() < 1e-6);
        // lowest-band tight-binding: ε(q) ≈ ε̄ + 2(E + JV) cos(qπ)
        let width = 4.0 * m.hopping_at(depth).abs();
        assert!((band.bandwidth() - width).abs() < 0.05 * width + 1e-6);
    }
}

#[test]
fn quadrature_grid_doubling() {
    let cfg = LatticeConfig::default();
    let band = solve_bloch(-8.0, cfg.n_q, cfg.n_pw).unwrap();
    let coarse = compute_matrix_elements(&build_wannier_on_grid(&band, 0, 256, 8).unwrap(), 0.3).unwrap();
    let fine = compute_matrix_elements(&build_wannier_on_grid(&band, 0, 512, 8).unwrap(), 0.3).unwrap();
    for (a, b) in [
        (coarse.e0, fine.e0),
        (coarse.e, fine.e),
        (coarse.j0, fine.j0),
        (coarse.j, fine.j),
        (coarse.jt0, fine.jt0),
        (coarse.u, fine.u),
    ] {
        assert!((a - b).abs() < 1e-7, "{a} vs {b}");
    }
}

#[test]
fn plane_wave_doubling() {
    let a = solve_bloch(-15.0, 32, 21).unwrap();
    let b = solve_bloch(-15.0, 32, 41).unwrap();
    for (x, y) in a.energies().iter().zip(b.energies()) {
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn deep_lattice_overlaps_match_gaussian() {
    let m = matrix_elements_at_depth(-30.0, 0.0, &LatticeConfig::default()).unwrap();
    // narrow Gaussian with <x²> = 1/(2√|V|)
    let var = 1.0 / (2.0 * 30.0f64.sqrt());
    let j0 = (1.0 + (-2.0 * var).exp()) / 2.0;
    let jt0 = (-var / 2.0).exp();
    assert!((m.j0 - j0).abs() < 0.01, "{} vs {j0}", m.j0);
    assert!((m.jt0 - jt0).abs() < 0.01, "{} vs {jt0}", m.jt0);
    assert!(m.jt0 > 0.95 && m.j0 < 1.0);
}

#[test]
fn gauge_signs() {
    let m = matrix_elements_at_depth(-6.0, 0.0, &LatticeConfig::default()).unwrap();
    assert!(m.j < 0.0);
    assert!(m.e < 0.0);
    assert!(m.e0 > 0.0);
}

#[test]
fn onsite_roundtrip() {
    let cfg = LatticeConfig::default();
    let g = g1d_for_onsite(0.7, -9.0, &cfg).unwrap();
    let m = matrix_elements_at_depth(-9.0, g, &cfg).unwrap();
    assert!((m.u - 0.7).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn tunneling_shrinks_with_depth(v in 3.0f64..25.0, dv in 0.5f64..5.0) {
        let cfg = LatticeConfig { n_q: 32, points_per_period: 128, ..LatticeConfig::default() };
        let shallow = matrix_elements_at_depth(-v, 0.0, &cfg).unwrap();
        let deep = matrix_elements_at_depth(-v - dv, 0.0, &cfg).unwrap();
        prop_assert!(deep.j.abs() < shallow.j.abs());
        prop_assert!(deep.e.abs() < shallow.e.abs());
        prop_assert!(deep.hopping_at(-v - dv).abs() < shallow.hopping_at(-v).abs());
        prop_assert!(deep.j0 > shallow.j0);
    }

    #[test]
    fn dispersion_even_and_minimal_at_zone_center(v in 1.0f64..30.0) {
        let band = solve_bloch(-v, 32, 21).unwrap();
        prop_assert!(band.asymmetry() < 1e-9);
        let e = band.energies();
        let (imin, _) = e.iter().enumerate().fold((0, f64::MAX), |a, (i, &x)| if x < a.1 { (i, x) } else { a });
        prop_assert!(band.quasimomenta()[imin].abs() <= 1.0 / 32.0 + 1e-12);
    }
}
