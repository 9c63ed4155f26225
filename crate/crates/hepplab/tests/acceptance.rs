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

//! Acceptance gate: every exit criterion of the laboratory, each as one
//! test that prints a PASS/FAIL line with the measured numbers.
//! Run with `cargo test --test acceptance -- --nocapture` to see them.

use hepplab::suites;
use hepplab::Tolerances;

const SEED: u64 = 7;

fn report(name: &str, suite: &suites::SuiteReport, budget_s: f64) {
    let status = if suite.passed() && suite.runtime_s <= budget_s { "PASS" } else { "FAIL" };
    let detail: Vec<String> = suite
        .checks
        .iter()
        .map(|c| format!("{} {:.3e}<={:.1e}{}", c.name, c.measured, c.threshold, if c.passed { "" } else { " !" }))
        .collect();
    println!("[{status}] {name}: {} ({:.1}s, budget {budget_s}s)", detail.join("; "), suite.runtime_s);
}

#[test]
fn convergence_law_and_subquadratic_exactness() {
    // slopes 0.5 / 1.0 / 1.5 within +-0.15 for N = 0, 1, 2 on the quartic
    // single-mode model (phi0 = 0.5, psi = vacuum, T = 1, eps down to
    // 0.02), and err < 1e-6 for every eps on a degree-2 model; the runtime
    // budget for the pair is 10 minutes
    let tols = Tolerances::default();
    let (suite, reports) = suites::convergence_suite(SEED, &tols).unwrap();
    for rep in &reports {
        if rep.exact_regime {
            let worst = rep.samples.iter().map(|s| s.err_norm).fold(0.0, f64::max);
            println!(
                "[{}] subquadratic-exactness: max err {:.3e} <= {:.1e}",
                if worst <= tols.tol_exact { "PASS" } else { "FAIL" },
                worst,
                tols.tol_exact
            );
        } else {
            let target = (rep.n_order as f64 + 1.0) / 2.0;
            let slope = rep.slope.unwrap();
            println!(
                "[{}] convergence-law N={}: slope {:.4} (target {target} +- {}), ci95 {:.4}",
                if (slope - target).abs() <= tols.slope_band { "PASS" } else { "FAIL" },
                rep.n_order,
                slope,
                tols.slope_band,
                rep.slope_ci95.unwrap()
            );
        }
    }
    report("convergence-suite", &suite, 600.0);
    assert!(suite.passed(), "convergence checks failed: {:?}", suite.checks);
    assert!(suite.runtime_s <= 600.0, "convergence runtime {:.1}s over budget", suite.runtime_s);
}

#[test]
fn wick_algebra_oracle_suite() {
    // two-path quantization, composition, translation, adjoint,
    // homogeneity, free covariance: 200 seeded random cases each
    let tols = Tolerances::default();
    let suite = suites::wick_oracle_suite(SEED, &tols).unwrap();
    report("wick-oracles", &suite, 120.0);
    assert!(suite.passed(), "wick oracle failures: {:?}", suite.checks);
    assert!(suite.runtime_s <= 120.0, "wick suite runtime {:.1}s over budget", suite.runtime_s);
}

#[test]
fn ccr_weyl_suite() {
    // commutators, the Weyl composition phase and the number/resolvent
    // conjugation identities, guard-banded
    let tols = Tolerances::default();
    let suite = suites::ccr_weyl_suite(SEED, &tols).unwrap();
    report("ccr-weyl", &suite, 60.0);
    assert!(suite.passed(), "ccr/weyl failures: {:?}", suite.checks);
    assert!(suite.runtime_s <= 60.0, "ccr/weyl runtime {:.1}s over budget", suite.runtime_s);
}

#[test]
fn bogoliubov_transport_suite() {
    // U2* Wick_1(b) U2 = Wick_1(b^) for 10 random symbols x 3 times at
    // 1e-6, and eps-independence of the quadratic propagator at 1e-8
    let tols = Tolerances::default();
    let suite = suites::bogoliubov_suite(SEED, &tols).unwrap();
    report("bogoliubov-transport", &suite, 180.0);
    assert!(suite.passed(), "transport failures: {:?}", suite.checks);
    assert!(suite.runtime_s <= 180.0, "transport runtime {:.1}s over budget", suite.runtime_s);
}

#[test]
fn classical_layer_suite() {
    // energy conservation (d=32, T=2) below 1e-8, action identity below
    // 1e-6, the certified envelope inside the lifespan bound, residual
    // halving under tolerance halving, dual-path phase agreement at 1e-8
    let tols = Tolerances::default();
    let suite = suites::classical_suite(SEED, &tols).unwrap();
    report("classical-layer", &suite, 180.0);
    assert!(suite.passed(), "classical failures: {:?}", suite.checks);
    assert!(suite.runtime_s <= 180.0, "classical runtime {:.1}s over budget", suite.runtime_s);
}

#[test]
fn pphi2_nonlinearity_suite() {
    // FFT route vs direct summation at 1e-10 (d=8), gradient vs the
    // tensor path at 1e-9 (d<=4), analytic-preset decay report finite
    let tols = Tolerances::default();
    let suite = suites::pphi2_suite(SEED, &tols).unwrap();
    report("pphi2-nonlinearity", &suite, 60.0);
    assert!(suite.passed(), "pphi2 failures: {:?}", suite.checks);
    assert!(suite.runtime_s <= 60.0, "pphi2 runtime {:.1}s over budget", suite.runtime_s);
}
