//! Adaptive Dormand–Prince 5(4) integrator for complex-valued systems, with
//! the fourth-order continuous extension used for dense output.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Error-control contract of the integrator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rtol: 1e-9, atol: 1e-12 }
    }
}

#[derive(Clone, Debug)]
pub struct Dopri5 {
    pub tol: Tolerance,
    /// Upper bound on the step size; `None` means the span length.
    pub h_max: Option<f64>,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5::new(Tolerance::default())
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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

struct Work {
    k: [Vec<Complex64>; 7],
    ytmp: Vec<Complex64>,
    ynew: Vec<Complex64>,
    cont: [Vec<Complex64>; 5],
}

impl Work {
    fn new(n: usize) -> Self {
        let z = || vec![Complex64::new(0.0, 0.0); n];
        Work {
            k: [z(), z(), z(), z(), z(), z(), z()],
            ytmp: z(),
            ynew: z(),
            cont: [z(), z(), z(), z(), z()],
        }
    }
}

impl Dopri5 {
    pub fn new(tol: Tolerance) -> Self {
        Dopri5 {
            tol,
            h_max: None,
            max_steps: 2_000_000,
        }
    }

    pub fn with_h_max(mut self, h_max: f64) -> Self {
        self.h_max = Some(h_max);
        self
    }

    /// Integrate `dy/dt = f(t, y)` from `t_out[0]` and return the state at every
    /// requested time. The integration is restarted at each breakpoint so that
    /// steps never straddle a known discontinuity of `f`.
    pub fn integrate<F>(&self, mut f: F, y0: &[Complex64], t_out: &[f64], breakpoints: &[f64]) -> Result<Vec<Vec<Complex64>>>
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        let mut out = Vec::with_capacity(t_out.len());
        self.integrate_with(&mut f, y0, t_out, breakpoints, |_, _, y| out.push(y.to_vec()))?;
        Ok(out)
    }

    /// Like [`Dopri5::integrate`] but hands each output state to `sink`
    /// (index, time, state) instead of collecting them.
    pub fn integrate_with<F, S>(&self, f: &mut F, y0: &[Complex64], t_out: &[f64], breakpoints: &[f64], mut sink: S) -> Result<()>
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
        S: FnMut(usize, f64, &[Complex64]),
    {
        if t_out.is_empty() {
            return Ok(());
        }
        if t_out.windows(2).any(|w| !(w[1] > w[0])) || t_out.iter().any(|t| !t.is_finite()) {
            return Err(Error::param("t_grid", "output times must be finite and strictly increasing"));
        }
        let n = y0.len();
        let t0 = t_out[0];
        let t_end = *t_out.last().unwrap();
        sink(0, t0, y0);
        if t_out.len() == 1 {
            return Ok(());
        }
        // breakpoints closer than this to a piece boundary are merged into it
        let tiny = 1e-11 * (t_end - t0).max(t0.abs()).max(t_end.abs());
        let mut stops: Vec<f64> = breakpoints.iter().copied().filter(|&b| b > t0 + tiny && b < t_end - tiny).collect();
        stops.sort_by(f64::total_cmp);
        stops.dedup_by(|b, a| *b - *a < tiny);
        stops.push(t_end);

        let mut w = Work::new(n);
        let mut y = y0.to_vec();
        let mut t = t0;
        let mut next_out = 1;
        let mut steps = 0usize;
        let mut h_guess: Option<f64> = None;

        for &stop in &stops {
            let span = stop - t;
            if span <= 0.0 {
                continue;
            }
            let h_max = self.h_max.unwrap_or(span).min(span);
            // stage times are nudged inside the piece so a discontinuity at a
            // breakpoint is always seen from the correct side
            let delta = 1e-12 * span;
            let (lo, hi) = (t + delta, stop - delta);
            let mut g = |tt: f64, yy: &[Complex64], dd: &mut [Complex64]| f(tt.clamp(lo, hi), yy, dd);
            g(t, &y, &mut w.k[0]);
            let mut h = match h_guess {
                Some(h) => h.min(h_max),
                None => self.initial_step(&mut g, t, &y, &mut w, h_max),
            };
            let mut last_rejected = false;
            loop {
                steps += 1;
                if steps > self.max_steps {
                    return Err(Error::Integrator {
                        t,
                        reason: format!("exceeded {} steps", self.max_steps),
                    });
                }
                let mut last = false;
                if t + h >= stop || (stop - t - h) < 1e-12 * span {
                    h = stop - t;
                    last = true;
                }
                if h < 1e-14 * t.abs().max(1.0) {
                    return Err(Error::Integrator {
                        t,
                        reason: format!("step size underflow (h={h:e})"),
                    });
                }
                let err = self.step(&mut g, t, h, &y, &mut w);
                if !err.is_finite() {
                    return Err(Error::Integrator {
                        t,
                        reason: "non-finite state".into(),
                    });
                }
                if err <= 1.0 {
                    let t_new = if last { stop } else { t + h };
                    while next_out < t_out.len() && t_out[next_out] <= t_new {
                        let tq = t_out[next_out];
                        if tq == t_new {
                            sink(next_out, tq, &w.ynew);
                        } else {
                            let theta = (tq - t) / h;
                            dense(&w.cont, theta, &mut w.ytmp);
                            sink(next_out, tq, &w.ytmp);
                        }
                        next_out += 1;
                    }
                    t = t_new;
                    std::mem::swap(&mut y, &mut w.ynew);
                    let k7 = std::mem::take(&mut w.k[6]);
                    w.k[0].copy_from_slice(&k7);
                    w.k[6] = k7;
                    let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
                    fac = fac.clamp(0.2, 10.0);
                    if last_rejected {
                        fac = fac.min(1.0);
                    }
                    last_rejected = false;
                    if last {
                        h_guess = Some((h * fac).max(h));
                        break;
                    }
                    h = (h * fac).min(h_max);
                } else {
                    let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                    h *= fac;
                    last_rejected = true;
                }
            }
        }
        debug_assert_eq!(next_out, t_out.len());
        Ok(())
    }

    fn initial_step<F>(&self, f: &mut F, t: f64, y: &[Complex64], w: &mut Work, h_max: f64) -> f64
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        let sc = |v: Complex64| self.tol.atol + self.tol.rtol * v.norm();
        let n = y.len().max(1) as f64;
        let d0 = (y.iter().map(|v| (v.norm() / sc(*v)).powi(2)).sum::<f64>() / n).sqrt();
        let d1 = (w.k[0].iter().zip(y).map(|(k, v)| (k.norm() / sc(*v)).powi(2)).sum::<f64>() / n).sqrt();
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(h_max);
        for i in 0..y.len() {
            w.ytmp[i] = y[i] + w.k[0][i] * h0;
        }
        f(t + h0, &w.ytmp, &mut w.k[1]);
        let d2 = (w.k[1]
            .iter()
            .zip(&w.k[0])
            .zip(y)
            .map(|((a, b), v)| ((a - b).norm() / sc(*v)).powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
            / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(h_max)
    }

    /// One trial step from `(t, y)`; expects `k[0] = f(t, y)`. Fills `ynew`,
    /// `k[6] = f(t+h, ynew)` and the dense-output coefficients; returns the
    /// scaled error norm.
    fn step<F>(&self, f: &mut F, t: f64, h: f64, y: &[Complex64], w: &mut Work) -> f64
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        let n = y.len();
        macro_rules! stage {
            ($dst:expr, $c:expr, $( ($a:expr, $j:expr) ),+ ) => {{
                for i in 0..n {
                    let mut acc = Complex64::new(0.0, 0.0);
                    $( acc += w.k[$j][i] * $a; )+
                    w.ytmp[i] = y[i] + acc * h;
                }
                let (_, rest) = w.k.split_at_mut($dst);
                f(t + $c * h, &w.ytmp, &mut rest[0]);
            }};
        }
        stage!(1, C2, (A21, 0));
        stage!(2, C3, (A31, 0), (A32, 1));
        stage!(3, C4, (A41, 0), (A42, 1), (A43, 2));
        stage!(4, C5, (A51, 0), (A52, 1), (A53, 2), (A54, 3));
        stage!(5, 1.0, (A61, 0), (A62, 1), (A63, 2), (A64, 3), (A65, 4));
        for i in 0..n {
            let acc = w.k[0][i] * A71 + w.k[2][i] * A73 + w.k[3][i] * A74 + w.k[4][i] * A75 + w.k[5][i] * A76;
            w.ynew[i] = y[i] + acc * h;
        }
        {
            let (_, rest) = w.k.split_at_mut(6);
            f(t + h, &w.ynew, &mut rest[0]);
        }
        let mut err = 0.0;
        for i in 0..n {
            let e = (w.k[0][i] * E1 + w.k[2][i] * E3 + w.k[3][i] * E4 + w.k[4][i] * E5 + w.k[5][i] * E6 + w.k[6][i] * E7) * h;
            let sc = self.tol.atol + self.tol.rtol * y[i].norm().max(w.ynew[i].norm());
            err += (e.norm() / sc).powi(2);
        }
        let err = (err / n.max(1) as f64).sqrt();
        if err <= 1.0 {
            for i in 0..n {
                let dy = w.ynew[i] - y[i];
                let bspl = w.k[0][i] * h - dy;
                w.cont[0][i] = y[i];
                w.cont[1][i] = dy;
                w.cont[2][i] = bspl;
                w.cont[3][i] = dy - w.k[6][i] * h - bspl;
                w.cont[4][i] = (w.k[0][i] * D1 + w.k[2][i] * D3 + w.k[3][i] * D4 + w.k[4][i] * D5 + w.k[5][i] * D6 + w.k[6][i] * D7) * h;
            }
        }
        err
    }
}

fn dense(cont: &[Vec<Complex64>; 5], theta: f64, out: &mut [Complex64]) {
    let theta1 = 1.0 - theta;
    for i in 0..out.len() {
        out[i] = cont[0][i] + (cont[1][i] + (cont[2][i] + (cont[3][i] + cont[4][i] * theta1) * theta) * theta1) * theta;
    }
}

/// Uniform grid `t0, t0+dt, ...` with `n` points.
pub fn uniform_grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![t0];
    }
    let dt = (t1 - t0) / (n - 1) as f64;
    (0..n).map(|i| if i + 1 == n { t1 } else { t0 + dt * i as f64 }).collect()
}
