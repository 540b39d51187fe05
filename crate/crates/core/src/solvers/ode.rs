//! Dormand–Prince 5(4) stepper on complex state vectors.

use crate::error::{Error, Result};
use crate::C64;

/// Error-control settings shared by the master-equation and trajectory
/// propagators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub atol: f64,
    pub rtol: f64,
    /// First trial step; `None` picks one from the right-hand side.
    pub initial_step: Option<f64>,
    pub min_step: f64,
    pub max_step: f64,
    /// Cap on accepted plus rejected steps per `advance` call.
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            atol: 1e-9,
            rtol: 1e-9,
            initial_step: None,
            min_step: 1e-14,
            max_step: f64::INFINITY,
            max_steps: 10_000_000,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Adaptive Dormand–Prince integrator for `dy/dt = f(t, y)`.
///
/// The right-hand side writes its result into the second slice.
#[derive(Debug, Clone)]
pub struct Dopri5 {
    opts: OdeOptions,
    h: Option<f64>,
    k: [Vec<C64>; 7],
    tmp: Vec<C64>,
    steps: usize,
    rejected: usize,
}

impl Dopri5 {
    pub fn new(dim: usize, opts: OdeOptions) -> Self {
        let z = vec![C64::new(0.0, 0.0); dim];
        Self {
            opts,
            h: opts.initial_step,
            k: std::array::from_fn(|_| z.clone()),
            tmp: z,
            steps: 0,
            rejected: 0,
        }
    }

    pub fn options(&self) -> &OdeOptions {
        &self.opts
    }

    /// Accepted and rejected step counts so far.
    pub fn step_counts(&self) -> (usize, usize) {
        (self.steps, self.rejected)
    }

    /// Step size the next `advance` will try first.
    pub fn current_step(&self) -> Option<f64> {
        self.h
    }

    fn initial_step<F>(&mut self, f: &mut F, t: f64, y: &[C64]) -> f64
    where
        F: FnMut(f64, &[C64], &mut [C64]),
    {
        f(t, y, &mut self.k[0]);
        let (mut d0, mut d1) = (0.0f64, 0.0f64);
        for (yi, fi) in y.iter().zip(&self.k[0]) {
            let sc = self.opts.atol + self.opts.rtol * yi.norm();
            d0 = d0.max(yi.norm() / sc);
            d1 = d1.max(fi.norm() / sc);
        }
        let h = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h.min(self.opts.max_step)
    }

    /// One trial step of size `h` from `(t, y)`; returns the fifth-order
    /// solution and the scaled error norm.
    pub fn attempt<F>(&mut self, f: &mut F, t: f64, y: &[C64], h: f64) -> (Vec<C64>, f64)
    where
        F: FnMut(f64, &[C64], &mut [C64]),
    {
        let n = y.len();
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let tmp = &mut self.tmp;
        f(t, y, k1);
        for i in 0..n {
            tmp[i] = y[i] + k1[i] * (h * A21);
        }
        f(t + C2 * h, tmp, k2);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * h;
        }
        f(t + C3 * h, tmp, k3);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * h;
        }
        f(t + C4 * h, tmp, k4);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * h;
        }
        f(t + C5 * h, tmp, k5);
        for i in 0..n {
            tmp[i] = y[i]
                + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * h;
        }
        f(t + h, tmp, k6);
        let mut y_new = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            y_new[i] =
                y[i] + (k1[i] * B1 + k3[i] * B3 + k4[i] * B4 + k5[i] * B5 + k6[i] * B6) * h;
        }
        f(t + h, &y_new, k7);
        let mut acc = 0.0;
        for i in 0..n {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7)
                * h;
            let sc = self.opts.atol + self.opts.rtol * y[i].norm().max(y_new[i].norm());
            let r = e.norm() / sc;
            acc += r * r;
        }
        (y_new, (acc / n.max(1) as f64).sqrt())
    }

    fn next_step(&self, h: f64, err: f64) -> f64 {
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        (h * factor).min(self.opts.max_step)
    }

    /// Takes one accepted adaptive step not beyond `t_end`. Returns the new
    /// time and state.
    pub fn step<F>(&mut self, f: &mut F, t: f64, y: &[C64], t_end: f64) -> Result<(f64, Vec<C64>)>
    where
        F: FnMut(f64, &[C64], &mut [C64]),
    {
        let mut h = match self.h {
            Some(h) => h,
            None => self.initial_step(f, t, y),
        };
        loop {
            if self.steps + self.rejected >= self.opts.max_steps {
                return Err(Error::Numerical(format!(
                    "step budget of {} exhausted at t = {t}",
                    self.opts.max_steps
                )));
            }
            let remaining = t_end - t;
            let last = h >= remaining;
            let h_try = if last { remaining } else { h };
            let (y_new, err) = self.attempt(f, t, y, h_try);
            if err.is_finite() && err <= 1.0 {
                self.steps += 1;
                // keep the unclipped proposal so a short final step does
                // not shrink the next interval's first step
                let proposal = self.next_step(h_try, err);
                self.h = Some(if last { proposal.max(h) } else { proposal });
                let t_new = if last { t_end } else { t + h_try };
                return Ok((t_new, y_new));
            }
            self.rejected += 1;
            h = if err.is_finite() {
                self.next_step(h_try, err).min(0.9 * h_try)
            } else {
                0.25 * h_try
            };
            if h < self.opts.min_step {
                return Err(Error::Numerical(format!(
                    "step size {h:.3e} below minimum at t = {t}"
                )));
            }
        }
    }

    /// Integrates from `t` to `t_end`, calling `after_step` on every accepted
    /// state (for projections such as renormalization).
    pub fn advance<F, G>(
        &mut self,
        f: &mut F,
        t: f64,
        y: &mut Vec<C64>,
        t_end: f64,
        mut after_step: G,
    ) -> Result<()>
    where
        F: FnMut(f64, &[C64], &mut [C64]),
        G: FnMut(&mut [C64]) -> Result<()>,
    {
        let mut t = t;
        while t < t_end {
            let (t_new, mut y_new) = self.step(f, t, y, t_end)?;
            after_step(&mut y_new)?;
            *y = y_new;
            t = t_new;
        }
        Ok(())
    }
}
