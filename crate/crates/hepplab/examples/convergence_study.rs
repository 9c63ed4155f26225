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

//! The headline experiment: exact evolution of a displaced vacuum under
//! a quartic single-mode Hamiltonian versus the order-N approximant,
//! swept over the semiclassical parameter. The error obeys the
//! `eps^((N+1)/2)` law: fitted slopes near 0.5, 1.0 and 1.5 for
//! N = 0, 1, 2.
//!
//! ```bash
//! cargo run --release --example convergence_study
//! ```

use hepplab::hepp::{convergence_study, PsiSpec, StudyOptions};
use hepplab::linalg::cr;
use hepplab::pphi2::{build_model, restrict_model, CutoffProfile};
use hepplab::Tolerances;

fn main() {
    let start = std::time::Instant::now();
    let model = build_model(
        8,
        0.5,
        1.0,
        CutoffProfile::Gaussian { width: 1.0 },
        vec![0.0, 0.0, 0.0, 0.0, 0.25],
    )
    .unwrap();
    let (_, series) = restrict_model(&model, 1).unwrap();
    println!("quartic one-mode model: quartic tensor {:.6}", series.tensors[4].coeffs[0].re);

    let tols = Tolerances::default();
    let reports = convergence_study(
        "quartic-one-mode",
        &series,
        &[cr(0.5)],
        &PsiSpec::Vacuum,
        1.0,
        &[0, 1, 2],
        &[0.32, 0.16, 0.08, 0.04, 0.02],
        &tols,
        &StudyOptions::default(),
        7,
    )
    .unwrap();

    for rep in &reports {
        let target = (rep.n_order as f64 + 1.0) / 2.0;
        println!(
            "N = {}: slope {:.4} (target {target:.1}), 95% ci {:.4}",
            rep.n_order,
            rep.slope.unwrap(),
            rep.slope_ci95.unwrap()
        );
        println!("    eps      M    error        fidelity-gap");
        for s in &rep.samples {
            println!("    {:<7}  {:<4} {:.4e}   {:.4e}", s.eps, s.m_cut, s.err_norm, s.err_fidelity);
        }
    }
    println!("total runtime {:.1}s", start.elapsed().as_secs_f64());
}
