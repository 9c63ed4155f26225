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

//! Coherent states on a truncated Fock space: the explicit series
//! against the Weyl displacement of the vacuum, the Poisson number
//! statistics, and exact transport under the free evolution.
//!
//! ```bash
//! cargo run --release --example coherent_free_field
//! ```

use hepplab::fock::{build_basis, coherent_state, free_evolution, number_op, poisson_tail, weyl_op};
use hepplab::linalg::{c, cr, CMat, C64, I};
use hepplab::tensor::{Conjugation, ModeSpace};

fn main() {
    let omega = 1.3;
    let mut a = CMat::zeros(1, 1);
    a[(0, 0)] = cr(omega);
    let ms = ModeSpace::new(a, 1.0, Conjugation::Componentwise).unwrap();
    let basis = build_basis(ms, 24).unwrap();
    let eps = 0.25;
    let u = vec![c(0.45, 0.20)];

    // series construction vs Weyl-displaced vacuum
    let (series, tail) = coherent_state(&basis, &u, eps).unwrap();
    let arg: Vec<C64> = u.iter().map(|z| z * (-I) * cr(2.0f64.sqrt() / eps)).collect();
    let displaced = weyl_op(&basis, &arg, eps).unwrap().apply(&basis.vacuum());
    let dev: f64 = (0..basis.dim)
        .map(|i| (series.coeffs[i] - displaced.coeffs[i]).norm())
        .fold(0.0, f64::max);
    let lambda: f64 = u.iter().map(|z| z.norm_sqr()).sum::<f64>() / eps;
    println!("coherent state at |u|^2/eps = {lambda:.3} on {} sectors", basis.max_total + 1);
    println!("  truncation tail     {tail:.3e} (Poisson check {:.3e})", poisson_tail(lambda, basis.max_total));
    println!("  series vs Weyl path {dev:.3e}");

    // mean particle number tracks |u|^2
    let n_op = number_op(&basis, eps).unwrap();
    let mean = series.inner(&n_op.apply(&series)).re;
    println!("  <N_eps> = {mean:.6} vs |u|^2 = {:.6}", lambda * eps);

    // free evolution carries the state to the rotated coherent state
    let t = 0.8;
    let evo = free_evolution(&basis, t).unwrap();
    let rotated: Vec<C64> = vec![u[0] * (-I * cr(omega * t)).exp()];
    let (expected, _) = coherent_state(&basis, &rotated, eps).unwrap();
    // e^{-it dGamma_1(A)} psi_u = psi_{e^{-itA} u}
    let moved = evo.adjoint().apply(&series);
    let dev: f64 = (0..basis.dim)
        .map(|i| (moved.coeffs[i] - expected.coeffs[i]).norm())
        .fold(0.0, f64::max);
    println!("  free transport to psi(e^(-itA) u): deviation {dev:.3e}");
}
