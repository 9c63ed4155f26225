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

//! Seeded validation suites over every module, shared between the
//! integration tests and the batch front door. Each suite returns the
//! measured deviations next to the thresholds they were held to.

use crate::bogoliubov::{build_v2_path, integrate_symplectic, integrate_u2, transport_symbol};
use crate::classical::{
    bihari_g, classical_action_check, integrate_flow, lifespan_bound, mild_residual, FlowOptions,
};
use crate::error::Result;
use crate::fock::{build_basis, field_op, ladder_op, max_dev_on_sectors, number_op, number_shift_pow, weyl_op, Ladder};
use crate::hepp::{convergence_study, ConvergenceReport, PsiSpec, StudyOptions};
use crate::linalg::{c, cr, max_abs, CMat, C64, I};
use crate::pphi2::{
    build_model, build_potential_tensors, delta_circ, hk_preset, integrate_field, nonlinearity_direct,
    nonlinearity_eval, restrict_model, CutoffProfile,
};
use crate::tensor::{sector_dim, Conjugation, ModeSpace, SymTensor};
use crate::wick::{
    compose_symbols, quantize, quantize_ladder, symbol_free_evolved, translate_symbol, PolySymbol,
    PotentialSeries,
};
use crate::Tolerances;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::sync::Arc;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub runtime_s: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &str, measured: f64, threshold: f64) {
        self.checks.push(CheckResult {
            name: name.to_string(),
            passed: measured <= threshold,
            measured,
            threshold,
        });
    }
}

fn rand_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<C64> {
    (0..d).map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect()
}

fn rand_kernel(rng: &mut ChaCha8Rng, d: usize, p: usize, q: usize) -> CMat {
    CMat::from_fn(sector_dim(d, q).unwrap(), sector_dim(d, p).unwrap(), |_, _| {
        c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    })
}

fn diag_space(d: usize) -> ModeSpace {
    let mut a = CMat::zeros(d, d);
    for i in 0..d {
        a[(i, i)] = cr(1.0 + 0.25 * i as f64);
    }
    ModeSpace::new(a, 1.0, Conjugation::Componentwise).unwrap()
}

/// Wick algebra oracles: two-path quantization, composition against the
/// matrix product, translation, adjoint, homogeneity and free-evolution
/// covariance, 200 seeded random cases each.
pub fn wick_oracle_suite(seed: u64, _tols: &Tolerances) -> Result<SuiteReport> {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport { name: "wick-oracles".into(), seed, checks: Vec::new(), runtime_s: 0.0 };
    let cases = 200;
    let ms = Arc::new(diag_space(2));
    let basis = build_basis((*ms).clone(), 8)?;
    let small_orders = [(1usize, 0usize), (0, 1), (1, 1), (2, 0), (0, 2), (2, 1), (1, 2), (2, 2)];

    // two-path quantization
    let mut worst = 0.0f64;
    for i in 0..cases {
        let (p, q) = small_orders[i % small_orders.len()];
        let b = PolySymbol::monomial(2, p, q, rand_kernel(&mut rng, 2, p, q))?;
        let eps = 0.2 + 0.8 * rng.gen::<f64>();
        let w1 = quantize(&b, eps, &basis)?;
        let w2 = quantize_ladder(&b, eps, &basis)?;
        worst = worst.max(max_abs(&(&w1.mat - &w2.mat)));
    }
    report.push("quantize-two-path", worst, 1e-11);

    // composition against the operator product on the guard band
    let mut worst = 0.0f64;
    for i in 0..cases {
        let (p1, q1) = small_orders[i % 5];
        let (p2, q2) = small_orders[(i + 3) % 5];
        let b1 = PolySymbol::monomial(2, p1, q1, rand_kernel(&mut rng, 2, p1, q1))?;
        let b2 = PolySymbol::monomial(2, p2, q2, rand_kernel(&mut rng, 2, p2, q2))?;
        let eps = 0.2 + 0.8 * rng.gen::<f64>();
        let comp = compose_symbols(&b1, &b2, eps)?;
        let lhs = quantize(&comp, eps, &basis)?;
        let rhs = &quantize(&b1, eps, &basis)?.mat * &quantize(&b2, eps, &basis)?.mat;
        let guard = basis.max_total - (p1 + q1 + p2 + q2);
        worst = worst.max(max_dev_on_sectors(&lhs.mat, &rhs, &basis, guard));
    }
    report.push("compose-matrix-product", worst, 1e-10);

    // translation: pointwise evaluation oracle
    let mut worst = 0.0f64;
    for i in 0..cases {
        let (p, q) = small_orders[i % small_orders.len()];
        let b = PolySymbol::monomial(2, p, q, rand_kernel(&mut rng, 2, p, q))?;
        let u = rand_vec(&mut rng, 2);
        let t = translate_symbol(&b, &u)?;
        let z = rand_vec(&mut rng, 2);
        let zu: Vec<C64> = z.iter().zip(&u).map(|(a, b)| a + b).collect();
        let dev = (crate::wick::eval_symbol(&t, &z)? - crate::wick::eval_symbol(&b, &zu)?).norm();
        worst = worst.max(dev);
    }
    report.push("translate-pointwise", worst, 1e-11);

    // adjoint rule on the guard band
    let mut worst = 0.0f64;
    for i in 0..cases {
        let (p, q) = small_orders[i % small_orders.len()];
        let b = PolySymbol::monomial(2, p, q, rand_kernel(&mut rng, 2, p, q))?;
        let eps = 0.2 + 0.8 * rng.gen::<f64>();
        let w = quantize(&b, eps, &basis)?;
        let wc = quantize(&b.conj(), eps, &basis)?;
        let guard = basis.max_total - (p + q).max(1);
        worst = worst.max(max_dev_on_sectors(&w.mat.adjoint(), &wc.mat, &basis, guard));
    }
    report.push("adjoint-rule", worst, 1e-12);

    // homogeneity in eps
    let mut worst = 0.0f64;
    for i in 0..cases {
        let (p, q) = small_orders[i % small_orders.len()];
        let b = PolySymbol::monomial(2, p, q, rand_kernel(&mut rng, 2, p, q))?;
        let eps = 0.1 + 0.9 * rng.gen::<f64>();
        let w_eps = quantize(&b, eps, &basis)?;
        let w_one = quantize(&b, 1.0, &basis)?;
        let scale = eps.powf((p + q) as f64 / 2.0);
        worst = worst.max(max_abs(&(&w_eps.mat - &w_one.mat * cr(scale))));
    }
    report.push("homogeneity", worst, 1e-12);

    // free-evolution covariance
    let mut worst = 0.0f64;
    for i in 0..cases {
        let (p, q) = small_orders[i % small_orders.len()];
        let b = PolySymbol::monomial(2, p, q, rand_kernel(&mut rng, 2, p, q))?;
        let t = rng.gen::<f64>();
        let eps = 0.3 + 0.7 * rng.gen::<f64>();
        let evo = crate::fock::free_evolution(&basis, t)?;
        let wick = quantize(&b, eps, &basis)?;
        let lhs = &evo.mat * &wick.mat * evo.mat.adjoint();
        let rhs = quantize(&symbol_free_evolved(&b, &ms, t)?, eps, &basis)?;
        let guard = basis.max_total - (p + q).max(1);
        worst = worst.max(max_dev_on_sectors(&lhs, &rhs.mat, &basis, guard));
    }
    report.push("free-covariance", worst, 1e-9);

    report.runtime_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// CCR commutators, the Weyl composition phase and the number/field
/// conjugation identities as guard-banded matrix facts.
pub fn ccr_weyl_suite(seed: u64, _tols: &Tolerances) -> Result<SuiteReport> {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport { name: "ccr-weyl".into(), seed, checks: Vec::new(), runtime_s: 0.0 };

    // CCR batch on d=2
    let ms = Arc::new(diag_space(2));
    let basis = build_basis((*ms).clone(), 6)?;
    let mut worst_mixed = 0.0f64;
    let mut worst_zero = 0.0f64;
    for _ in 0..20 {
        let u = rand_vec(&mut rng, 2);
        let v = rand_vec(&mut rng, 2);
        let eps = 0.2 + 0.8 * rng.gen::<f64>();
        let au = ladder_op(&basis, &u, eps, Ladder::Annihilation)?;
        let av = ladder_op(&basis, &v, eps, Ladder::Annihilation)?;
        let cu = ladder_op(&basis, &u, eps, Ladder::Creation)?;
        let cv = ladder_op(&basis, &v, eps, Ladder::Creation)?;
        let uv: C64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
        let comm = &au.mat * &cv.mat - &cv.mat * &au.mat;
        let expect = CMat::identity(basis.dim, basis.dim) * (uv * cr(eps));
        worst_mixed = worst_mixed.max(max_dev_on_sectors(&comm, &expect, &basis, basis.max_total - 1));
        let z = CMat::zeros(basis.dim, basis.dim);
        let caa = &au.mat * &av.mat - &av.mat * &au.mat;
        let ccc = &cu.mat * &cv.mat - &cv.mat * &cu.mat;
        worst_zero = worst_zero.max(max_dev_on_sectors(&caa, &z, &basis, basis.max_total));
        worst_zero = worst_zero.max(max_dev_on_sectors(&ccc, &z, &basis, basis.max_total - 2));
    }
    report.push("ccr-mixed", worst_mixed, 1e-12);
    report.push("ccr-vanishing", worst_zero, 1e-12);

    // Weyl composition phase on a deep d=1 basis
    let ms1 = Arc::new(diag_space(1));
    let basis1 = build_basis((*ms1).clone(), 28)?;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let u1 = rand_vec(&mut rng, 1);
        let u2 = rand_vec(&mut rng, 1);
        let eps = 0.3 + 0.5 * rng.gen::<f64>();
        let w1 = weyl_op(&basis1, &u1, eps)?;
        let w2 = weyl_op(&basis1, &u2, eps)?;
        let u12: Vec<C64> = u1.iter().zip(&u2).map(|(a, b)| a + b).collect();
        let w12 = weyl_op(&basis1, &u12, eps)?;
        let sigma: f64 = -2.0 * u1.iter().zip(&u2).map(|(a, b)| (a.conj() * b).im).sum::<f64>();
        let lhs = &w1.mat * &w2.mat;
        let rhs = &w12.mat * (I * cr(eps * sigma / 4.0)).exp();
        worst = worst.max(max_dev_on_sectors(&lhs, &rhs, &basis1, 8));
    }
    report.push("weyl-composition-phase", worst, 1e-8);

    // number translation identity
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let u = rand_vec(&mut rng, 1);
        let eps = 0.3 + 0.5 * rng.gen::<f64>();
        let iu: Vec<C64> = u.iter().map(|z| z * I).collect();
        let w = weyl_op(&basis1, &u, eps)?;
        let n_op = number_op(&basis1, eps)?;
        let n2: f64 = u.iter().map(|z| z.norm_sqr()).sum();
        let lhs = w.mat.adjoint() * &n_op.mat * &w.mat;
        let rhs = &n_op.mat
            + &field_op(&basis1, &iu, eps)?.mat * cr(eps)
            + CMat::identity(basis1.dim, basis1.dim) * cr(eps * eps * n2 / 2.0);
        worst = worst.max(max_dev_on_sectors(&lhs, &rhs, &basis1, 8));
    }
    report.push("weyl-number-translation", worst, 1e-8);

    // resolvent commutator identity on d=2
    let basis2 = build_basis((*ms).clone(), 8)?;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let u = rand_vec(&mut rng, 2);
        let eps = 0.3 + 0.5 * rng.gen::<f64>();
        let n2: f64 = u.iter().map(|z| z.norm_sqr()).sum();
        let iu: Vec<C64> = u.iter().map(|z| z * I).collect();
        let n1 = number_op(&basis2, 1.0)?;
        let id = CMat::identity(basis2.dim, basis2.dim);
        let a_app = &n1.mat + &id + &field_op(&basis2, &iu, eps)?.mat + &id * cr(eps * n2 / 2.0);
        let b_app = number_shift_pow(&basis2, -1.0).mat;
        let lhs = &b_app * &a_app - &a_app * &b_app;
        let rhs = &b_app * &field_op(&basis2, &u, eps)?.mat * &b_app * (-I);
        worst = worst.max(max_dev_on_sectors(&lhs, &rhs, &basis2, basis2.max_total - 2));
    }
    report.push("resolvent-commutator", worst, 1e-10);

    report.runtime_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Quartic single-mode reference used by the quadratic-dynamics and
/// remainder suites.
fn reference_quartic(strength: f64) -> (Arc<ModeSpace>, PotentialSeries) {
    let ms = Arc::new(diag_space(1));
    let mut tensors: Vec<SymTensor> = (0..4).map(|j| SymTensor::zero(1, j).unwrap()).collect();
    tensors.push(SymTensor::from_coeffs(1, 4, vec![cr(strength)]).unwrap());
    let series = PotentialSeries::new(ms.clone(), tensors, None).unwrap();
    (ms, series)
}

/// Quadratic-propagator suite: transported-symbol conjugation oracle for
/// ten random symbols at three times, plus the eps-independence of the
/// interaction-picture propagator.
pub fn bogoliubov_suite(seed: u64, tols: &Tolerances) -> Result<SuiteReport> {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport { name: "bogoliubov".into(), seed, checks: Vec::new(), runtime_s: 0.0 };
    let (ms, series) = reference_quartic(0.3);
    let t_final = 0.9;
    let opts = FlowOptions { override_lifespan: true, tol: 1e-12, samples: 13 };
    let traj = integrate_flow(&series, &[cr(0.4)], t_final, &opts)?;
    let grid: Vec<f64> = (0..=12).map(|i| t_final * i as f64 / 12.0).collect();
    let qpath = build_v2_path(&series, &traj, &grid)?;
    let maps = integrate_symplectic(&qpath, &grid, 1e-12)?;
    let basis = build_basis((*ms).clone(), 40)?;
    let prop = integrate_u2(&basis, &qpath, 1.0, 1e-11)?;
    let probe_times = [grid[4], grid[8], grid[12]];
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let p = rng.gen_range(0..=2usize);
        let q = rng.gen_range(0..=2usize);
        let b = PolySymbol::monomial(1, p, q, rand_kernel(&mut rng, 1, p, q))?;
        for &t in &probe_times {
            // transport_symbol errors out above transport_tol; measure the
            // actual deviation through a witness comparison as well
            let hat = transport_symbol(&b, t, &maps, &prop, &basis, tols.transport_tol)?;
            let idx = grid.iter().position(|&x| (x - t).abs() < 1e-12).unwrap();
            let u2 = &prop.u2[idx];
            let lhs = u2.adjoint() * &quantize(&b, 1.0, &basis)?.mat * u2;
            let rhs = quantize(&hat, 1.0, &basis)?.mat;
            let guard = basis
                .max_total
                .saturating_sub(b.total_order() + crate::config::TRANSPORT_PROBE_DISTANCE);
            worst = worst.max(max_dev_on_sectors(&lhs, &rhs, &basis, guard));
        }
    }
    report.push("transport-oracle", worst, tols.transport_tol);

    // eps-independence of the quadratic propagator
    let basis_small = build_basis((*ms).clone(), 12)?;
    let prop_a = integrate_u2(&basis_small, &qpath, 0.5, 1e-10)?;
    let prop_b = integrate_u2(&basis_small, &qpath, 0.25, 1e-10)?;
    let mut worst = 0.0f64;
    for (a, b) in prop_a.u2.iter().zip(&prop_b.u2) {
        worst = worst.max(max_abs(&(a - b)));
    }
    report.push("u2-eps-independence", worst, 1e-8);

    report.runtime_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Classical-layer suite: lattice energy conservation over a d=32 grid,
/// the action identity, the certified envelope inside the lifespan
/// bound, residual scaling with the solver tolerance and the dual-path
/// phase agreement.
pub fn classical_suite(seed: u64, tols: &Tolerances) -> Result<SuiteReport> {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport { name: "classical".into(), seed, checks: Vec::new(), runtime_s: 0.0 };

    // energy conservation, d = 32, T = 2
    let model = build_model(32, 0.5, 1.0, CutoffProfile::Gaussian { width: 1.0 }, vec![0.0, 0.0, 0.0, 0.0, 0.25])?;
    let phi0: Vec<C64> = (0..32).map(|_| c(0.4 * (rng.gen::<f64>() - 0.5), 0.4 * (rng.gen::<f64>() - 0.5))).collect();
    let opts = FlowOptions { override_lifespan: true, tol: 1e-10, samples: 33 };
    let traj = integrate_field(&model, &phi0, 2.0, &opts)?;
    let h0 = traj.energy[0];
    let drift = traj.energy.iter().map(|h| (h - h0).abs()).fold(0.0, f64::max);
    report.push("energy-conservation", drift, tols.energy_tol);

    // classical action identity on the single-mode quartic
    let (_, series) = reference_quartic(0.5);
    let opts_fine = FlowOptions { override_lifespan: true, tol: 1e-11, samples: 65 };
    let qt = integrate_flow(&series, &[cr(0.5)], 1.0, &opts_fine)?;
    let action = classical_action_check(&qt, &series, tols.action_tol)?;
    report.push("action-identity", action.max_deviation, tols.action_tol);

    // Bihari envelope before the certified lifespan
    let v_norm = series.norm();
    let t0 = lifespan_bound(v_norm, 0.5);
    let traj_cert = integrate_flow(&series, &[cr(0.5)], 0.95 * t0, &FlowOptions { tol: 1e-11, ..Default::default() })?;
    let mut excess: f64 = f64::NEG_INFINITY;
    let g0 = bihari_g(v_norm, 0.5);
    for (i, &t) in traj_cert.times.iter().enumerate() {
        let norm = crate::linalg::vec_norm(&traj_cert.states[i]);
        excess = excess.max(bihari_g(v_norm, norm) - g0 - t.abs());
    }
    report.push("bihari-envelope", excess.max(0.0), 1e-9);

    // residual scaling: halving the tolerance at least halves the residual
    let mut resids = Vec::new();
    for &tol in &[4e-5, 2e-5, 1e-5] {
        let o = FlowOptions { tol, override_lifespan: true, samples: 17 };
        let t = integrate_flow(&series, &[cr(0.5)], 1.0, &o)?;
        let mut worst = 0.0f64;
        for i in 1..=10 {
            worst = worst.max(mild_residual(&t, &series, i as f64 / 10.0)?);
        }
        resids.push(worst);
    }
    let ratio = (resids[1] / resids[0]).max(resids[2] / resids[1]);
    report.push("residual-halving-ratio", ratio, 0.5);

    // dual-path phase agreement on a d=4 grid
    let model4 = build_model(4, 0.5, 1.0, CutoffProfile::Gaussian { width: 1.0 }, vec![0.2, 0.1, 0.3, 0.05, 0.25])?;
    let series4 = build_potential_tensors(&model4, 4)?;
    let phi4: Vec<C64> = (0..4).map(|_| c(0.4 * (rng.gen::<f64>() - 0.5), 0.4 * (rng.gen::<f64>() - 0.5))).collect();
    let traj4 = integrate_flow(&series4, &phi4, 1.0, &FlowOptions { tol: 1e-11, override_lifespan: true, samples: 9 })?;
    let circ = delta_circ(&model4, &traj4)?;
    let mut worst = 0.0f64;
    for (i, &dc) in circ.iter().enumerate() {
        worst = worst.max((dc - traj4.delta[i]).abs());
    }
    report.push("delta-dual-path", worst, 1e-8);

    report.runtime_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Lattice-model suite: FFT gradient against direct summation, the
/// tensor-route gradient, and the analytic-preset decay report.
pub fn pphi2_suite(seed: u64, _tols: &Tolerances) -> Result<SuiteReport> {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport { name: "pphi2".into(), seed, checks: Vec::new(), runtime_s: 0.0 };

    let model8 = build_model(8, 0.5, 1.0, CutoffProfile::Gaussian { width: 1.0 }, vec![0.1, 0.2, 0.15, 0.05, 0.25])?;
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let z: Vec<C64> = (0..8).map(|_| c(0.6 * (rng.gen::<f64>() - 0.5), 0.6 * (rng.gen::<f64>() - 0.5))).collect();
        let fft = nonlinearity_eval(&model8, &z);
        let direct = nonlinearity_direct(&model8, &z)?;
        let dev: f64 = fft.iter().zip(&direct).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        worst = worst.max(dev);
    }
    report.push("fft-vs-direct", worst, 1e-10);

    let model4 = build_model(4, 0.5, 1.0, CutoffProfile::Gaussian { width: 1.0 }, vec![0.1, 0.3, 0.2, 0.1, 0.25])?;
    let series4 = build_potential_tensors(&model4, 4)?;
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let z: Vec<C64> = (0..4).map(|_| c(0.5 * (rng.gen::<f64>() - 0.5), 0.5 * (rng.gen::<f64>() - 0.5))).collect();
        let (_, g_t) = crate::classical::eval_potential(&series4, &z)?;
        let g_f = nonlinearity_eval(&model4, &z);
        let dev: f64 = g_t.iter().zip(&g_f).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        worst = worst.max(dev);
    }
    report.push("gradient-tensor-path", worst, 1e-9);

    // analytic preset decay report finite for a_j = c^j / j!
    let a: Vec<f64> = (0..=6).map(|j| 0.4f64.powi(j as i32) / crate::linalg::ln_factorial(j).exp()).collect();
    let hk = hk_preset(&model4, 1.5, 1.0, &a, (0.05, 1.5))?;
    let a3 = hk.a3_report().unwrap();
    report.push("hk-a3-finite", if a3.is_finite() && a3 > 0.0 { 0.0 } else { 1.0 }, 0.5);

    report.runtime_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// The two quantitative acceptance studies: the convergence exponent of
/// the quartic one-mode model and the exactness of a degree-2 model.
pub fn convergence_suite(
    seed: u64,
    tols: &Tolerances,
) -> Result<(SuiteReport, Vec<ConvergenceReport>)> {
    let start = std::time::Instant::now();
    let mut report = SuiteReport { name: "convergence".into(), seed, checks: Vec::new(), runtime_s: 0.0 };
    let eps_grid = [0.32, 0.16, 0.08, 0.04, 0.02];

    // quartic single-mode model from the lattice builder
    let model = build_model(8, 0.5, 1.0, CutoffProfile::Gaussian { width: 1.0 }, vec![0.0, 0.0, 0.0, 0.0, 0.25])?;
    let (_, series) = restrict_model(&model, 1)?;
    let reports = convergence_study(
        "quartic-one-mode",
        &series,
        &[cr(0.5)],
        &PsiSpec::Vacuum,
        1.0,
        &[0, 1, 2],
        &eps_grid,
        tols,
        &StudyOptions::default(),
        seed,
    )?;
    for rep in &reports {
        let target = (rep.n_order as f64 + 1.0) / 2.0;
        let slope = rep.slope.unwrap_or(f64::NAN);
        report.push(&format!("slope-n{}", rep.n_order), (slope - target).abs(), tols.slope_band);
        report.push(
            &format!("monotone-n{}", rep.n_order),
            if rep.monotone_decreasing { 0.0 } else { 1.0 },
            0.5,
        );
    }
    // asymptotic ordering on the two smallest eps
    for pair in reports.windows(2) {
        for idx in [eps_grid.len() - 2, eps_grid.len() - 1] {
            let hi = &pair[0].samples[idx];
            let lo = &pair[1].samples[idx];
            report.push(
                &format!("ordering-n{}-vs-n{}-eps{}", pair[1].n_order, pair[0].n_order, hi.eps),
                lo.err_norm / hi.err_norm,
                1.0,
            );
        }
    }

    // degree-2 exactness on the same one-mode setup
    let model2 = build_model(8, 0.5, 1.0, CutoffProfile::Gaussian { width: 1.0 }, vec![0.1, 0.2, 0.3])?;
    let (_, series2) = restrict_model(&model2, 1)?;
    let exact_reports = convergence_study(
        "subquadratic-one-mode",
        &series2,
        &[cr(0.5)],
        &PsiSpec::Vacuum,
        1.0,
        &[0],
        &eps_grid,
        tols,
        &StudyOptions::default(),
        seed,
    )?;
    let worst = exact_reports[0].samples.iter().map(|s| s.err_norm).fold(0.0, f64::max);
    report.push("subquadratic-exactness", worst, tols.tol_exact);
    if !exact_reports[0].exact_regime {
        report.push("subquadratic-flagged", 1.0, 0.5);
    }

    report.runtime_s = start.elapsed().as_secs_f64();
    let mut all = reports;
    all.extend(exact_reports);
    Ok((report, all))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_are_deterministic() {
        let tols = Tolerances::default();
        let a = pphi2_suite(7, &tols).unwrap();
        let b = pphi2_suite(7, &tols).unwrap();
        assert!(a.passed());
        for (x, y) in a.checks.iter().zip(&b.checks) {
            assert_eq!(x.measured, y.measured);
            assert_eq!(x.name, y.name);
        }
        let c = pphi2_suite(8, &tols).unwrap();
        // a different seed still passes but measures different numbers
        assert!(c.passed());
    }
}
