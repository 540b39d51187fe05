//! Lowest band of the `V cos²(x)` lattice, Wannier functions in the
//! real-symmetric Bloch gauge, and the single-band matrix elements.
//!
//! Lengths are in `1/k` (lattice period `π`), energies in `E_R`, so the
//! single-particle Hamiltonian is `-d²/dx² + V cos²(x)`. Wells sit at
//! antinodes `x_j = jπ` when `V < 0`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Numerical resolution of the band solver and the real-space quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeConfig {
    /// Quasimomentum samples over the first Brillouin zone.
    pub n_q: usize,
    /// Plane waves per Bloch state.
    pub n_pw: usize,
    /// Quadrature points per lattice period.
    pub points_per_period: usize,
    /// Wannier support on each side of its center, in periods.
    pub half_width_periods: usize,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self {
            n_q: 64,
            n_pw: 21,
            points_per_period: 512,
            half_width_periods: 8,
        }
    }
}

impl LatticeConfig {
    /// Half-width actually used at `depth`: shallow lattices have slowly
    /// decaying Wannier tails and get proportionally wider support, capped
    /// below the aliasing period of the quasimomentum grid.
    pub fn support_for(&self, depth: f64) -> usize {
        let wanted = (24.0 / depth.abs().max(1e-3)).ceil() as usize;
        let cap = (self.n_q / 2).saturating_sub(2).max(3);
        self.half_width_periods.max(wanted.min(cap))
    }
}

pub const MIN_POINTS_PER_PERIOD: usize = 64;

/// Lowest-band Bloch states on a midpoint quasimomentum grid.
#[derive(Debug, Clone)]
pub struct BandSolution {
    depth: f64,
    q: Vec<f64>,
    /// Plane-wave orders `-K..=K`.
    orders: Vec<i64>,
    /// Real coefficients `c_n(q)` of `ψ_q(x) = Σ c_n e^{i(q+2n)x}`, one row per q.
    coeffs: Vec<Vec<f64>>,
    energies: Vec<f64>,
}

impl BandSolution {
    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn quasimomenta(&self) -> &[f64] {
        &self.q
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn coefficients(&self, iq: usize) -> &[f64] {
        &self.coeffs[iq]
    }

    pub fn bandwidth(&self) -> f64 {
        let max = self.energies.iter().cloned().fold(f64::MIN, f64::max);
        let min = self.energies.iter().cloned().fold(f64::MAX, f64::min);
        max - min
    }

    /// Largest `|ε(q) - ε(-q)|` over the grid.
    pub fn asymmetry(&self) -> f64 {
        let n = self.energies.len();
        (0..n)
            .map(|i| (self.energies[i] - self.energies[n - 1 - i]).abs())
            .fold(0.0, f64::max)
    }

    /// `(1/n_q) Σ_q ε(q) cos(q j π)`: the Wannier-basis matrix element of the
    /// full single-particle Hamiltonian between sites `0` and `j`.
    pub fn fourier_coefficient(&self, j: i64) -> f64 {
        let sum: f64 = self
            .q
            .iter()
            .zip(&self.energies)
            .map(|(q, e)| e * (q * j as f64 * PI).cos())
            .sum();
        sum / self.q.len() as f64
    }
}

/// Diagonalizes the plane-wave Hamiltonian at each quasimomentum and keeps
/// the lowest band, with `ψ_q(0)` real and positive.
pub fn solve_bloch(depth: f64, n_q: usize, n_pw: usize) -> Result<BandSolution> {
    if depth > 0.0 {
        return Err(Error::UnsupportedGeometry { depth });
    }
    if depth == 0.0 {
        return Err(Error::FlatBand);
    }
    if !depth.is_finite() {
        return Err(Error::arg("lattice depth must be finite"));
    }
    if n_q < 16 {
        return Err(Error::arg(format!("n_q = {n_q} < 16")));
    }
    if n_pw < 7 {
        return Err(Error::arg(format!("n_pw = {n_pw} < 7")));
    }
    let k_max = (n_pw / 2) as i64;
    let orders: Vec<i64> = (-k_max..=k_max).collect();
    let size = orders.len();
    let q: Vec<f64> = (0..n_q)
        .map(|m| -1.0 + (2 * m + 1) as f64 / n_q as f64)
        .collect();

    let mut coeffs = Vec::with_capacity(n_q);
    let mut energies = Vec::with_capacity(n_q);
    for &qm in &q {
        let mut h = DMatrix::<f64>::zeros(size, size);
        for (i, &n) in orders.iter().enumerate() {
            let kk = qm + 2.0 * n as f64;
            h[(i, i)] = kk * kk + depth / 2.0;
            if i + 1 < size {
                h[(i, i + 1)] = depth / 4.0;
                h[(i + 1, i)] = depth / 4.0;
            }
        }
        let eig = SymmetricEigen::new(h);
        let (imin, emin) = eig
            .eigenvalues
            .iter()
            .cloned()
            .enumerate()
            .fold((0, f64::MAX), |acc, (i, e)| if e < acc.1 { (i, e) } else { acc });
        let mut c: Vec<f64> = eig.eigenvectors.column(imin).iter().cloned().collect();
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        let at_origin: f64 = c.iter().sum();
        if at_origin.abs() < 1e-12 * norm {
            return Err(Error::GaugeFailure { ratio: f64::INFINITY });
        }
        let sign = at_origin.signum() / norm;
        c.iter_mut().for_each(|x| *x *= sign);
        coeffs.push(c);
        energies.push(emin);
    }
    Ok(BandSolution {
        depth,
        q,
        orders,
        coeffs,
        energies,
    })
}

/// Real Wannier function sampled on a uniform grid centered on its site,
/// with its second derivative evaluated spectrally.
#[derive(Debug, Clone)]
pub struct WannierFunction {
    site: i64,
    depth: f64,
    x0: f64,
    dx: f64,
    points_per_period: usize,
    values: Vec<f64>,
    second_derivative: Vec<f64>,
}

impl WannierFunction {
    pub fn site(&self) -> i64 {
        self.site
    }

    pub fn center(&self) -> f64 {
        self.site as f64 * PI
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn points_per_period(&self) -> usize {
        self.points_per_period
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn second_derivative(&self) -> &[f64] {
        &self.second_derivative
    }

    pub fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| self.x0 + i as f64 * self.dx)
    }

    pub fn norm(&self) -> f64 {
        simpson(&self.values.iter().map(|w| w * w).collect::<Vec<_>>(), self.dx).sqrt()
    }

    /// Largest `|w(c + x) - w(c - x)|` relative to the peak.
    pub fn asymmetry(&self) -> f64 {
        let n = self.values.len();
        let peak = self.peak();
        (0..n / 2)
            .map(|i| (self.values[i] - self.values[n - 1 - i]).abs() / peak)
            .fold(0.0, f64::max)
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Largest `|w|` at distance `>= periods` from the center, relative to
    /// the peak.
    pub fn tail_ratio(&self, periods: f64) -> f64 {
        let c = self.center();
        let peak = self.peak();
        self.grid()
            .zip(&self.values)
            .filter(|(x, _)| (x - c).abs() >= periods * PI - 1e-12)
            .map(|(_, v)| v.abs() / peak)
            .fold(0.0, f64::max)
    }
}

/// Wannier function at `site_index` on the default grid.
pub fn build_wannier(band: &BandSolution, site_index: i64) -> Result<WannierFunction> {
    let cfg = LatticeConfig::default();
    build_wannier_on_grid(band, site_index, cfg.points_per_period, cfg.half_width_periods)
}

/// Wannier function `w(x - x_site) = (1/(n_q √π)) Σ_q e^{-iq x_site} ψ_q(x)`
/// sampled on `[x_site - Rπ, x_site + Rπ]`.
pub fn build_wannier_on_grid(
    band: &BandSolution,
    site_index: i64,
    points_per_period: usize,
    half_width_periods: usize,
) -> Result<WannierFunction> {
    if points_per_period < MIN_POINTS_PER_PERIOD || points_per_period % 2 != 0 {
        return Err(Error::Resolution {
            points_per_period,
            required: MIN_POINTS_PER_PERIOD,
        });
    }
    if half_width_periods < 3 {
        return Err(Error::arg("Wannier support must span at least 3 periods per side"));
    }
    let dx = PI / points_per_period as f64;
    let count = 2 * half_width_periods * points_per_period + 1;
    let center = site_index as f64 * PI;
    let x0 = center - half_width_periods as f64 * PI;

    // Periodic parts on one period; the grid is aligned so that the phase
    // index of sample i is i mod points_per_period.
    let ppp = points_per_period;
    let nq = band.q.len();
    let mut u0 = vec![vec![(0.0f64, 0.0f64); ppp]; nq];
    let mut u1 = vec![vec![(0.0f64, 0.0f64); ppp]; nq];
    let mut u2 = vec![vec![(0.0f64, 0.0f64); ppp]; nq];
    for p in 0..ppp {
        let xp = p as f64 * dx;
        let phases: Vec<(f64, f64)> = band
            .orders
            .iter()
            .map(|&n| {
                let (s, c) = (2.0 * n as f64 * xp).sin_cos();
                (c, s)
            })
            .collect();
        for iq in 0..nq {
            let (mut a0, mut a1, mut a2) = ((0.0, 0.0), (0.0, 0.0), (0.0, 0.0));
            for ((&n, &cn), &(pc, ps)) in band.orders.iter().zip(&band.coeffs[iq]).zip(&phases) {
                let nf = n as f64;
                a0.0 += cn * pc;
                a0.1 += cn * ps;
                a1.0 += nf * cn * pc;
                a1.1 += nf * cn * ps;
                a2.0 += nf * nf * cn * pc;
                a2.1 += nf * nf * cn * ps;
            }
            u0[iq][p] = a0;
            u1[iq][p] = a1;
            u2[iq][p] = a2;
        }
    }

    let pref = 1.0 / (nq as f64 * PI.sqrt());
    let mut values = vec![0.0; count];
    let mut second = vec![0.0; count];
    for i in 0..count {
        // x - x_site, exactly representable as a multiple of dx
        let rel = (i as f64 - (half_width_periods * ppp) as f64) * dx;
        let p = i % ppp;
        let (mut w, mut w2) = (0.0, 0.0);
        for (iq, &q) in band.q.iter().enumerate() {
            let (s, c) = (q * rel).sin_cos();
            let (a0, a1, a2) = (u0[iq][p], u1[iq][p], u2[iq][p]);
            // Re[e^{iq·rel} u]
            w += c * a0.0 - s * a0.1;
            // ψ'' = -e^{iqx}[q² u0 + 4q u1 + 4 u2]
            let b = (
                q * q * a0.0 + 4.0 * q * a1.0 + 4.0 * a2.0,
                q * q * a0.1 + 4.0 * q * a1.1 + 4.0 * a2.1,
            );
            w2 -= c * b.0 - s * b.1;
        }
        values[i] = pref * w;
        second[i] = pref * w2;
    }

    let wf = WannierFunction {
        site: site_index,
        depth: band.depth,
        x0,
        dx,
        points_per_period,
        values,
        second_derivative: second,
    };
    if band.depth <= -5.0 {
        let ratio = wf.tail_ratio(2.0);
        if ratio > 1e-2 {
            return Err(Error::GaugeFailure { ratio });
        }
    }
    Ok(wf)
}

/// Composite Simpson rule on an odd number of uniformly spaced samples.
pub fn simpson(f: &[f64], dx: f64) -> f64 {
    let n = f.len();
    assert!(n >= 3 && n % 2 == 1, "Simpson needs an odd sample count >= 3");
    let mut s = f[0] + f[n - 1];
    for (i, v) in f.iter().enumerate().take(n - 1).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * dx / 3.0
}

/// `∫ a(x) g(x) b(x - shift·π) dx` on the grid of `a`, with `b` sampled on
/// the same grid layout and zero outside its support.
fn shifted_integral(
    a: &[f64],
    b: &[f64],
    shift_periods: i64,
    ppp: usize,
    x0: f64,
    dx: f64,
    g: impl Fn(f64) -> f64,
) -> f64 {
    let n = a.len();
    let offset = shift_periods * ppp as i64;
    let integrand: Vec<f64> = (0..n)
        .map(|i| {
            let j = i as i64 - offset;
            if j < 0 || j >= n as i64 {
                0.0
            } else {
                a[i] * g(x0 + i as f64 * dx) * b[j as usize]
            }
        })
        .collect();
    simpson(&integrand, dx)
}

/// `⟨w_a|w_b⟩` for two Wannier functions sampled with the same resolution.
pub fn overlap(a: &WannierFunction, b: &WannierFunction) -> Result<f64> {
    if a.points_per_period != b.points_per_period || a.values.len() != b.values.len() {
        return Err(Error::arg("Wannier functions sampled on different grids"));
    }
    Ok(shifted_integral(
        &a.values,
        &b.values,
        b.site - a.site,
        a.points_per_period,
        a.x0,
        a.dx,
        |_| 1.0,
    ))
}

/// Single-band parameters of the generalized Bose-Hubbard Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixElements {
    /// On-site kinetic energy, `E_R`.
    pub e0: f64,
    /// Nearest-neighbor kinetic element, `E_R`.
    pub e: f64,
    /// On-site `cos²` overlap.
    pub j0: f64,
    /// Nearest-neighbor `cos²` overlap.
    pub j: f64,
    /// On-site `cos` overlap magnitude.
    pub jt0: f64,
    /// On-site interaction, `E_R`.
    pub u: f64,
    /// Lattice depth the Wannier functions were built at, `E_R`.
    pub depth_used: f64,
}

impl MatrixElements {
    /// Classical Bose-Hubbard hopping coefficient `E + J V` at depth `v`.
    pub fn hopping_at(&self, v: f64) -> f64 {
        self.e + self.j * v
    }
}

/// Integrates the kinetic, `cos²`, `cos` and quartic overlaps. `g1d` is in
/// units of `E_R d` with `d = π/k`, so `U = π g1d ∫ w⁴ dx`.
pub fn compute_matrix_elements(w: &WannierFunction, g1d: f64) -> Result<MatrixElements> {
    let ppp = w.points_per_period;
    if ppp < MIN_POINTS_PER_PERIOD {
        return Err(Error::Resolution {
            points_per_period: ppp,
            required: MIN_POINTS_PER_PERIOD,
        });
    }
    let (x0, dx) = (w.x0, w.dx);
    let v = &w.values;
    let d2 = &w.second_derivative;
    let e0 = -shifted_integral(v, d2, 0, ppp, x0, dx, |_| 1.0);
    let e = -shifted_integral(v, d2, 1, ppp, x0, dx, |_| 1.0);
    let j0 = shifted_integral(v, v, 0, ppp, x0, dx, |x| x.cos().powi(2));
    let j = shifted_integral(v, v, 1, ppp, x0, dx, |x| x.cos().powi(2));
    let jt0 = shifted_integral(v, v, 0, ppp, x0, dx, f64::cos).abs();
    let quartic = simpson(&v.iter().map(|x| x.powi(4)).collect::<Vec<_>>(), dx);
    let u = if g1d == 0.0 { 0.0 } else { PI * g1d * quartic };
    Ok(MatrixElements {
        e0,
        e,
        j0,
        j,
        jt0,
        u,
        depth_used: w.depth,
    })
}

/// Nearest-neighbor `cos` overlap `J̃_{k,k+1}`, which vanishes by symmetry.
pub fn nearest_neighbor_cos_overlap(w: &WannierFunction) -> f64 {
    shifted_integral(
        &w.values,
        &w.values,
        1,
        w.points_per_period,
        w.x0,
        w.dx,
        f64::cos,
    )
}

/// Band solve, Wannier construction and quadrature in one call.
pub fn matrix_elements_at_depth(
    depth: f64,
    g1d: f64,
    cfg: &LatticeConfig,
) -> Result<MatrixElements> {
    let band = solve_bloch(depth, cfg.n_q, cfg.n_pw)?;
    let w = build_wannier_on_grid(&band, 0, cfg.points_per_period, cfg.support_for(depth))?;
    compute_matrix_elements(&w, g1d)
}

/// `∫ w⁴ dx` at a given depth; converts an on-site energy into `g1d`.
pub fn quartic_overlap(depth: f64, cfg: &LatticeConfig) -> Result<f64> {
    let band = solve_bloch(depth, cfg.n_q, cfg.n_pw)?;
    let w = build_wannier_on_grid(&band, 0, cfg.points_per_period, cfg.support_for(depth))?;
    Ok(simpson(
        &w.values.iter().map(|x| x.powi(4)).collect::<Vec<_>>(),
        w.dx,
    ))
}

/// `g1d` producing on-site energy `u` at `depth`.
pub fn g1d_for_onsite(u: f64, depth: f64, cfg: &LatticeConfig) -> Result<f64> {
    Ok(u / (PI * quartic_overlap(depth, cfg)?))
}
