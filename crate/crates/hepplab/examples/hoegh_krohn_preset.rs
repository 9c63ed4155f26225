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

//! The analytic-interaction preset: exponential-series coefficients on
//! smeared, momentum-regularized kernels, with the super-exponential
//! decay report that gates its use.
//!
//! ```bash
//! cargo run --release --example hoegh_krohn_preset
//! ```

use hepplab::linalg::ln_factorial;
use hepplab::pphi2::{build_model, hk_preset, CutoffProfile};

fn main() {
    let model = build_model(
        4,
        0.5,
        1.0,
        CutoffProfile::Gaussian { width: 1.0 },
        vec![0.0, 0.0, 1e-30],
    )
    .unwrap();

    // series coefficients a_j = c^j / j!
    let c_small = 0.4f64;
    let a: Vec<f64> = (0..=6).map(|j| c_small.powi(j as i32) / ln_factorial(j).exp()).collect();
    let kappa = 1.5;
    let radius = 1.0;
    let decay = (0.05, 1.5);
    let series = hk_preset(&model, kappa, radius, &a, decay).unwrap();

    println!("analytic preset on a 4-mode grid (kappa = {kappa}, r = {radius})");
    println!("  degree components and norms:");
    for (j, t) in series.tensors.iter().enumerate() {
        println!("    |V^({j})| = {:.6e}", t.norm());
    }
    let report = series.a3_report().unwrap();
    println!("  decay report sum_j e^(2 a l^j) |V^(j)|^2 = {report:.6e} at (alpha, lambda) = {decay:?}");
    println!("  total series norm |V| = {:.6e}", series.norm());

    // the sufficient condition on the raw coefficients
    let cond: f64 = a
        .iter()
        .enumerate()
        .map(|(j, &aj)| (2.0 * 0.06 * 1.5f64.powi(j as i32)).exp() * ln_factorial(j).exp() * aj * aj)
        .sum();
    println!("  coefficient-side sufficient sum {cond:.6e} (finite)");

    // a too-aggressive coefficient family is rejected by construction
    let bad: Vec<f64> = (0..=6).map(|j| 3.0f64.powi((j * j) as i32 / 2)).collect();
    match hk_preset(&model, kappa, radius, &bad, (2.0, 3.0)) {
        Err(e) => println!("  runaway coefficients rejected: {e}"),
        Ok(s) => println!("  runaway family report: {:?}", s.a3_report()),
    }
}
