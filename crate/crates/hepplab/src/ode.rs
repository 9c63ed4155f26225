// Copyright 2026 The hepplab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Embedded Dormand-Prince 5(4) integrator on complex state vectors,
//! with PI step control and cubic Hermite dense output.

use crate::error::{Error, Result};
use crate::linalg::C64;

#[derive(Debug, Clone)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_initial: Option<f64>,
    pub h_min: f64,
    pub h_max: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, h_initial: None, h_min: 1e-13, h_max: None, max_steps: 2_000_000 }
    }
}

/// One accepted step with endpoint derivatives for Hermite interpolation.
#[derive(Debug, Clone)]
pub struct DenseStep {
    pub t0: f64,
    pub t1: f64,
    pub y0: Vec<C64>,
    pub y1: Vec<C64>,
    pub f0: Vec<C64>,
    pub f1: Vec<C64>,
}

#[derive(Debug, Clone, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evals: usize,
}

#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub steps: Vec<DenseStep>,
    pub stats: OdeStats,
    pub t_start: f64,
    pub t_end: f64,
}

impl OdeSolution {
    pub fn y_end(&self) -> &[C64] {
        &self.steps.last().expect("empty solution").y1
    }

    /// Cubic Hermite evaluation; `t` clamped to the solved span.
    pub fn eval(&self, t: f64) -> Vec<C64> {
        let step = self.locate(t);
        let h = step.t1 - step.t0;
        if h == 0.0 {
            return step.y0.clone();
        }
        let th = ((t - step.t0) / h).clamp(0.0, 1.0);
        let th2 = th * th;
        let th3 = th2 * th;
        let c_y0 = 2.0 * th3 - 3.0 * th2 + 1.0;
        let c_f0 = (th3 - 2.0 * th2 + th) * h;
        let c_y1 = -2.0 * th3 + 3.0 * th2;
        let c_f1 = (th3 - th2) * h;
        (0..step.y0.len())
            .map(|i| {
                step.y0[i] * crate::linalg::cr(c_y0)
                    + step.f0[i] * crate::linalg::cr(c_f0)
                    + step.y1[i] * crate::linalg::cr(c_y1)
                    + step.f1[i] * crate::linalg::cr(c_f1)
            })
            .collect()
    }

    fn locate(&self, t: f64) -> &DenseStep {
        let forward = self.t_end >= self.t_start;
        for s in &self.steps {
            let inside = if forward { t <= s.t1 } else { t >= s.t1 };
            if inside {
                return s;
            }
        }
        self.steps.last().expect("empty solution")
    }
}

// Dormand-Prince tableau; the last row of A doubles as the 5th-order
// weights (FSAL).
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate `dy/dt = f(t, y)` from `t0` to `t1` (either direction).
/// `on_accept` runs after every accepted step and may veto it by error.
pub fn dopri5<F, G>(
    mut f: F,
    t0: f64,
    t1: f64,
    y0: Vec<C64>,
    opts: &OdeOptions,
    mut on_accept: G,
) -> Result<OdeSolution>
where
    F: FnMut(f64, &[C64]) -> Vec<C64>,
    G: FnMut(f64, &[C64]) -> Result<()>,
{
    let n = y0.len();
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    if span == 0.0 {
        let f0 = f(t0, &y0);
        return Ok(OdeSolution {
            steps: vec![DenseStep { t0, t1, y0: y0.clone(), y1: y0, f0: f0.clone(), f1: f0 }],
            stats: OdeStats { accepted: 0, rejected: 0, evals: 1 },
            t_start: t0,
            t_end: t1,
        });
    }
    let h_max = opts.h_max.unwrap_or(span);
    let mut h = opts.h_initial.unwrap_or((span / 100.0).min(h_max)) * dir;
    let mut t = t0;
    let mut y = y0;
    let mut k0 = f(t, &y);
    let mut stats = OdeStats { accepted: 0, rejected: 0, evals: 1 };
    let mut steps: Vec<DenseStep> = Vec::new();
    let mut err_prev: f64 = 1.0;
    let mut ks: Vec<Vec<C64>> = vec![vec![crate::linalg::cr(0.0); n]; 7];
    let done_tol = 1e-12 * span + f64::EPSILON * (t0.abs() + t1.abs());
    for _ in 0..opts.max_steps {
        if (t - t1) * dir >= -done_tol {
            if let Some(last) = steps.last_mut() {
                last.t1 = t1;
            }
            return Ok(OdeSolution { steps, stats, t_start: t0, t_end: t1 });
        }
        if (t + h - t1) * dir > 0.0 {
            h = t1 - t;
        }
        if h.abs() < opts.h_min {
            return Err(Error::BlowupSuspected {
                last_time: t,
                detail: format!("step size collapsed to {:.3e}", h.abs()),
            });
        }
        ks[0] = k0.clone();
        for s in 0..6 {
            let mut ys = y.clone();
            for (j, w) in A[s].iter().enumerate().take(s + 1) {
                if *w != 0.0 {
                    for i in 0..n {
                        ys[i] += ks[j][i] * crate::linalg::cr(w * h);
                    }
                }
            }
            ks[s + 1] = f(t + C[s] * h, &ys);
            stats.evals += 1;
        }
        let mut y1 = y.clone();
        for (j, w) in A[5].iter().enumerate() {
            if *w != 0.0 {
                for i in 0..n {
                    y1[i] += ks[j][i] * crate::linalg::cr(w * h);
                }
            }
        }
        // embedded 4th-order error estimate
        let mut err_acc = 0.0f64;
        for i in 0..n {
            let mut e = crate::linalg::cr(0.0);
            for (j, w) in E.iter().enumerate() {
                if *w != 0.0 {
                    e += ks[j][i] * crate::linalg::cr(*w);
                }
            }
            let sc = opts.atol + opts.rtol * y[i].norm().max(y1[i].norm());
            let r = e.norm() * h.abs() / sc;
            err_acc += r * r;
        }
        let err = (err_acc / n as f64).sqrt().max(1e-30);
        if err <= 1.0 {
            let f1 = ks[6].clone();
            steps.push(DenseStep {
                t0: t,
                t1: t + h,
                y0: y.clone(),
                y1: y1.clone(),
                f0: k0.clone(),
                f1: f1.clone(),
            });
            t += h;
            y = y1;
            k0 = f1;
            stats.accepted += 1;
            on_accept(t, &y)?;
            // PI controller
            let fac = 0.9 * err.powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
            h *= fac.clamp(0.2, 5.0);
            if h.abs() > h_max {
                h = h_max * dir;
            }
            err_prev = err;
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
        }
    }
    Err(Error::Solver(format!("max step count {} exhausted at t = {t:.6}", opts.max_steps)))
}

/// Composite Simpson quadrature of a complex integrand with `2m` panels.
pub fn simpson<F>(f: F, a: f64, b: f64, half_panels: usize) -> C64
where
    F: Fn(f64) -> C64,
{
    let m = half_panels.max(1);
    let n = 2 * m;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(a + i as f64 * h) * crate::linalg::cr(w);
    }
    acc * crate::linalg::cr(h / 3.0)
}

/// Adaptive Simpson for real integrands to a relative tolerance.
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    fn simpson3(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson3(fa, flm, fm, m - a);
        let right = simpson3(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let fa = f(a);
    let fm = f(0.5 * (a + b));
    let fb = f(b);
    let whole = simpson3(fa, fm, fb, b - a);
    let tol = rel_tol * whole.abs().max(1e-300);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}
