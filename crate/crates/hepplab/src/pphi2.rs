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

//! Momentum-grid field models with polynomial self-interaction: the
//! relativistic dispersion, a spatial cutoff profile, interaction
//! kernels, an FFT nonlinearity for large grids, phase and energy
//! bookkeeping, a real-space residual diagnostic and an
//! analytic-interaction preset.
//!
//! Lattice conventions (`c_norm`): with `L = 2 pi / dk` and `dx = L / d`,
//! every continuum momentum integral becomes `dk * sum` (one factor per
//! kernel slot) and every spatial integral `dx * sum` over the dual
//! lattice. The cutoff transform is the lattice transform
//! `g^(K) = dx sum_n g(x_n) e^{-i K x_n}`, evaluable at any `K`, so the
//! kernel route and the FFT route agree to round-off by construction.

use crate::classical::{integrate_flow, FlowOptions, Potential, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::{cr, ln_factorial, CMat, C64};
use crate::tensor::{Conjugation, ModeSpace, SectorIndex, SymTensor};
use crate::wick::PotentialSeries;
use rustfft::FftPlanner;
use std::sync::Arc;

/// Spatial cutoff profile.
#[derive(Debug, Clone, PartialEq)]
pub enum CutoffProfile {
    /// Unit-mass Gaussian of the given width.
    Gaussian { width: f64 },
    /// Smooth bump `exp(-1/(1-(x/w)^2))` on `|x| < w`, normalized to
    /// unit mass.
    Bump { width: f64 },
}

impl CutoffProfile {
    fn value(&self, x: f64) -> f64 {
        match self {
            CutoffProfile::Gaussian { width } => {
                (-(x * x) / (2.0 * width * width)).exp() / (width * (2.0 * std::f64::consts::PI).sqrt())
            }
            CutoffProfile::Bump { width } => {
                let u = x / width;
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    // integral of exp(-1/(1-u^2)) over [-1,1] = 0.4439938...
                    (-1.0 / (1.0 - u * u)).exp() / (0.443_993_816_168_079_44 * width)
                }
            }
        }
    }

    fn width(&self) -> f64 {
        match self {
            CutoffProfile::Gaussian { width } | CutoffProfile::Bump { width } => *width,
        }
    }
}

/// Momentum-grid model: even grid size `d`, spacing `dk`, dispersion
/// `w(k) = sqrt(m0^2 + k^2)`, sampled cutoff and polynomial coefficients
/// `beta_0..beta_{2n}`.
#[derive(Debug, Clone)]
pub struct GridModel {
    pub d: usize,
    pub dk: f64,
    pub m0: f64,
    pub beta: Vec<f64>,
    pub profile: CutoffProfile,
    /// Momenta in FFT layout: `k_j = dk j` for `j < d/2`, `dk (j - d)`
    /// above; the pairing `j <-> (d-j) mod d` realizes `k -> -k`.
    pub momenta: Vec<f64>,
    pub omega: Vec<f64>,
    /// Cutoff sampled on the dual lattice (periodized).
    pub g_samples: Vec<f64>,
    pub dx: f64,
    mode_space: Arc<ModeSpace>,
}

impl GridModel {
    pub fn mode_space(&self) -> &Arc<ModeSpace> {
        &self.mode_space
    }

    /// `2n`, the polynomial degree.
    pub fn degree(&self) -> usize {
        self.beta.len() - 1
    }

    /// Lattice transform of the cutoff at an arbitrary momentum (real by
    /// evenness of the periodized profile).
    pub fn g_hat(&self, k: f64) -> f64 {
        let mut acc = 0.0;
        for (n, &g) in self.g_samples.iter().enumerate() {
            acc += g * (k * self.dx * n as f64).cos();
        }
        acc * self.dx
    }

    /// `|g|_1` on the lattice (= transform at 0).
    pub fn g_l1(&self) -> f64 {
        self.dx * self.g_samples.iter().sum::<f64>()
    }

    pub fn pair(&self, j: usize) -> usize {
        (self.d - j) % self.d
    }
}

/// Build a grid model; validates the polynomial, evenness of the grid
/// and that the box resolves the cutoff profile.
pub fn build_model(d: usize, dk: f64, m0: f64, profile: CutoffProfile, beta: Vec<f64>) -> Result<GridModel> {
    if d < 2 || d % 2 != 0 {
        return Err(Error::InvalidModel(format!("grid size must be even and >= 2, got {d}")));
    }
    if dk <= 0.0 || m0 <= 0.0 {
        return Err(Error::InvalidModel("dk and m0 must be positive".into()));
    }
    if beta.len() < 3 || beta.len() % 2 == 0 {
        return Err(Error::InvalidModel(format!(
            "polynomial must have even degree >= 2; got {} coefficients",
            beta.len()
        )));
    }
    if *beta.last().unwrap() <= 0.0 {
        return Err(Error::InvalidModel("dominant coefficient must be positive".into()));
    }
    let length = 2.0 * std::f64::consts::PI / dk;
    if length < 6.0 * profile.width() {
        return Err(Error::InvalidModel(format!(
            "box length {length:.3} does not cover the cutoff support (need >= {:.3})",
            6.0 * profile.width()
        )));
    }
    let momenta: Vec<f64> =
        (0..d).map(|j| if j < d / 2 { dk * j as f64 } else { dk * (j as f64 - d as f64) }).collect();
    let omega: Vec<f64> = momenta.iter().map(|k| (m0 * m0 + k * k).sqrt()).collect();
    let dx = length / d as f64;
    let g_samples: Vec<f64> = (0..d)
        .map(|n| {
            let x = n as f64 * dx;
            let mut acc = 0.0;
            for image in -2i64..=2 {
                acc += profile.value(x + image as f64 * length);
            }
            acc
        })
        .collect();
    for (n, &g) in g_samples.iter().enumerate() {
        if g < 0.0 {
            return Err(Error::InvalidModel("cutoff profile must be nonnegative".into()));
        }
        let mirrored = g_samples[(d - n) % d];
        if (g - mirrored).abs() > 1e-12 * (1.0 + g.abs()) {
            return Err(Error::InvalidModel("cutoff profile must be even".into()));
        }
    }
    let mut a = CMat::zeros(d, d);
    for j in 0..d {
        a[(j, j)] = cr(omega[j]);
    }
    let pairing: Vec<usize> = (0..d).map(|j| (d - j) % d).collect();
    let mode_space = Arc::new(ModeSpace::new(a, m0, Conjugation::ModePairing(pairing))?);
    Ok(GridModel { d, dk, m0, beta, profile, momenta, omega, g_samples, dx, mode_space })
}

/// Interaction tensors `V^(j) = sqrt(j!) 2^{-j/2} beta_j w_j` with the
/// lattice kernel `w_j = dk^j 2^{j/2} g^(k_1+...+k_j) prod w(k_m)^{-1/2}`
/// (one `dk` per slot), symmetrized. Intended for small grids; the cap
/// guards the `d^j` expansion.
pub fn build_potential_tensors(model: &GridModel, jmax_cap: usize) -> Result<PotentialSeries> {
    let d = model.d;
    let jmax = model.degree().min(jmax_cap);
    let mut tensors = Vec::with_capacity(jmax + 1);
    let mut v0 = SymTensor::zero(d, 0)?;
    v0.coeffs[0] = cr(model.beta[0] * model.g_l1());
    tensors.push(v0);
    for j in 1..=jmax {
        let beta_j = model.beta.get(j).copied().unwrap_or(0.0);
        let size = (d as f64).powi(j as i32);
        if size > crate::config::DEFAULT_SIZE_CAP as f64 {
            return Err(Error::SizeCap { d, n: j, size: size as usize, cap: crate::config::DEFAULT_SIZE_CAP });
        }
        let mut raw = vec![cr(0.0); size as usize];
        if beta_j != 0.0 {
            let mut idx = vec![0usize; j];
            for (flat, slot) in raw.iter_mut().enumerate() {
                let mut rem = flat;
                for s in (0..j).rev() {
                    idx[s] = rem % d;
                    rem /= d;
                }
                let ksum: f64 = idx.iter().map(|&m| model.momenta[m]).sum();
                let mut w = model.g_hat(ksum) * model.dk.powi(j as i32) * 2.0f64.powf(j as f64 / 2.0);
                for &m in &idx {
                    w /= model.omega[m].sqrt();
                }
                *slot = cr(w);
            }
        }
        let sym = crate::tensor::symmetrize(d, j, &raw)?;
        let scale = (0.5 * ln_factorial(j)).exp() * 2.0f64.powf(-(j as f64) / 2.0) * beta_j;
        tensors.push(sym.scaled(cr(scale)));
    }
    PotentialSeries::new(model.mode_space.clone(), tensors, None)
}

/// The lattice field combination entering every interaction formula:
/// `W(x_n) = dk sum_k (conj z(k) + z(-k)) w(k)^{-1/2} e^{-i k x_n}`,
/// real for every `z` by the pairing symmetry.
pub fn field_profile(model: &GridModel, z: &[C64]) -> Vec<f64> {
    let d = model.d;
    let mut w: Vec<C64> =
        (0..d).map(|j| (z[j].conj() + z[model.pair(j)]) / cr(model.omega[j].sqrt())).collect();
    // e^{-i k_j x_n} = e^{-2 pi i j n / d} in the FFT momentum layout
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(d);
    fft.process(&mut w);
    w.iter().map(|v| v.re * model.dk).collect()
}

/// The interaction gradient via the real-space route:
/// `P(phi)(k) = dk w(k)^{-1/2} [dx sum_n g_n P'(W_n) e^{-i k x_n}]`.
pub fn nonlinearity_eval(model: &GridModel, z: &[C64]) -> Vec<C64> {
    let d = model.d;
    let w = field_profile(model, z);
    let mut f: Vec<C64> = (0..d)
        .map(|n| {
            let mut pp = 0.0;
            for (j, &b) in model.beta.iter().enumerate().skip(1) {
                pp += j as f64 * b * w[n].powi(j as i32 - 1);
            }
            cr(model.g_samples[n] * pp)
        })
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(d);
    fft.process(&mut f);
    (0..d).map(|j| f[j] * cr(model.dx * model.dk / model.omega[j].sqrt())).collect()
}

/// Direct `O(d^j)` momentum-space summation of the gradient, the oracle
/// for the FFT route on small grids.
pub fn nonlinearity_direct(model: &GridModel, z: &[C64]) -> Result<Vec<C64>> {
    let d = model.d;
    let mut out = vec![cr(0.0); d];
    for (j, &beta_j) in model.beta.iter().enumerate().skip(1) {
        if beta_j == 0.0 {
            continue;
        }
        let slots = j - 1;
        let size = (d as f64).powi(slots as i32);
        if size > 5e7 {
            return Err(Error::SizeCap { d, n: slots, size: size as usize, cap: 50_000_000 });
        }
        let mut idx = vec![0usize; slots];
        for flat in 0..size as usize {
            let mut rem = flat;
            for s in (0..slots).rev() {
                idx[s] = rem % d;
                rem /= d;
            }
            let mut prod = cr(1.0);
            let mut ksum = 0.0;
            for &m in &idx {
                prod *= (z[m].conj() + z[model.pair(m)]) / cr(model.omega[m].sqrt());
                ksum += model.momenta[m];
            }
            for (k_out, out_slot) in out.iter_mut().enumerate() {
                let w = model.g_hat(ksum + model.momenta[k_out]) / model.omega[k_out].sqrt();
                *out_slot += prod * cr(j as f64 * beta_j * w * model.dk.powi(j as i32));
            }
        }
    }
    Ok(out)
}

/// Interaction functional `b(z) = sum_j beta_j dx sum_n g_n W_n(z)^j`,
/// the lattice form of the spatially smeared field polynomial.
pub fn interaction_value(model: &GridModel, z: &[C64]) -> f64 {
    let w = field_profile(model, z);
    let mut acc = 0.0;
    for (n, &g) in model.g_samples.iter().enumerate() {
        let mut p = 0.0;
        for (j, &b) in model.beta.iter().enumerate() {
            p += b * w[n].powi(j as i32);
        }
        acc += g * p;
    }
    acc * model.dx
}

/// `sqrt(sum_j |V^(j)|^2)` without materializing tensors: kernel norms
/// via `j`-fold convolutions of `1/omega` against `|g^|^2` on the
/// (unbounded) sum lattice.
pub fn series_norm_fft(model: &GridModel) -> f64 {
    let mut total = model.beta[0] * model.beta[0] * model.g_l1() * model.g_l1();
    let jmax = model.degree();
    let rho: Vec<(i64, f64)> = (0..model.d)
        .map(|j| {
            let f = if j < model.d / 2 { j as i64 } else { j as i64 - model.d as i64 };
            (f, 1.0 / model.omega[j])
        })
        .collect();
    let mut conv: std::collections::BTreeMap<i64, f64> = rho.iter().cloned().collect();
    for j in 1..=jmax {
        if j > 1 {
            let mut next: std::collections::BTreeMap<i64, f64> = std::collections::BTreeMap::new();
            for (&ka, &va) in &conv {
                for &(kb, vb) in &rho {
                    *next.entry(ka + kb).or_insert(0.0) += va * vb;
                }
            }
            conv = next;
        }
        let beta_j = model.beta.get(j).copied().unwrap_or(0.0);
        if beta_j == 0.0 {
            continue;
        }
        let mut ksum = 0.0;
        for (&kidx, &weight) in &conv {
            let ghat = model.g_hat(kidx as f64 * model.dk);
            ksum += ghat * ghat * weight;
        }
        total += ln_factorial(j).exp() * beta_j * beta_j * model.dk.powi(2 * j as i32) * ksum;
    }
    total.sqrt()
}

impl Potential for GridModel {
    fn mode_space(&self) -> &Arc<ModeSpace> {
        &self.mode_space
    }

    fn value_grad(&self, z: &[C64]) -> Result<(C64, Vec<C64>)> {
        Ok((cr(interaction_value(self, z)), nonlinearity_eval(self, z)))
    }

    fn series_norm(&self) -> f64 {
        series_norm_fft(self)
    }
}

/// Integrate the lattice field equation through the generic flow with
/// `A = diag(omega)` and the FFT nonlinearity; asserts the energy lower
/// bound `h(z) >= |w^(1/2) z|^2 - |g|_1 |inf P|` along the samples.
pub fn integrate_field(model: &GridModel, phi0: &[C64], t_final: f64, opts: &FlowOptions) -> Result<Trajectory> {
    let traj = integrate_flow(model, phi0, t_final, opts)?;
    let bound = model.g_l1() * poly_inf(&model.beta).abs();
    for (i, state) in traj.states.iter().enumerate() {
        let kinetic: f64 = state.iter().zip(&model.omega).map(|(z, w)| w * z.norm_sqr()).sum();
        if traj.energy[i] < kinetic - bound - 1e-9 {
            return Err(Error::Solver(format!(
                "energy lower bound violated at sample {i}: h = {} < {}",
                traj.energy[i],
                kinetic - bound
            )));
        }
    }
    Ok(traj)
}

/// Infimum of the polynomial over the reals (coarse grid plus local
/// refinement; adequate for the bounded-below polynomials accepted by
/// the model).
fn poly_inf(beta: &[f64]) -> f64 {
    let eval = |x: f64| -> f64 { beta.iter().enumerate().map(|(j, &b)| b * x.powi(j as i32)).sum() };
    let mut lo = f64::INFINITY;
    let mut x_best = 0.0;
    for i in -4000..=4000 {
        let x = i as f64 * 0.01;
        let v = eval(x);
        if v < lo {
            lo = v;
            x_best = x;
        }
    }
    let mut step = 0.01;
    let mut x = x_best;
    for _ in 0..60 {
        step *= 0.7;
        for dx in [-step, step] {
            if eval(x + dx) < eval(x) {
                x += dx;
            }
        }
    }
    eval(x).min(0.0)
}

/// Phase samples
/// `delta(t) = sum_j ((j-2)/2) beta_j int_0^t dx sum_n g_n W_n(s)^j ds`
/// (the `j = 0` term contributing `-beta_0 |g|_1 t`), accumulated by the
/// same lattice contraction as the nonlinearity.
pub fn delta_circ(model: &GridModel, traj: &Trajectory) -> Result<Vec<f64>> {
    let rate = |s: f64| -> f64 {
        let phi = traj.phi(s);
        let w = field_profile(model, &phi);
        let mut acc = 0.0;
        for (j, &b) in model.beta.iter().enumerate() {
            if b == 0.0 {
                continue;
            }
            let factor = (j as f64 - 2.0) / 2.0;
            if factor == 0.0 {
                continue;
            }
            let mut lattice = 0.0;
            for (n, &g) in model.g_samples.iter().enumerate() {
                lattice += g * w[n].powi(j as i32);
            }
            acc += factor * b * lattice * model.dx;
        }
        acc
    };
    let mut out = Vec::with_capacity(traj.times.len());
    for (i, &t) in traj.times.iter().enumerate() {
        if i == 0 {
            out.push(0.0);
            continue;
        }
        out.push(crate::ode::simpson(|s| cr(rate(s)), 0.0, t, 128).re);
    }
    Ok(out)
}

/// Real-space residual diagnostic for the wave-equation form of the
/// flow. The candidate map is
/// `zeta^(k, t) = (phi_t(k) + conj(phi_t(-k))) / sqrt(2 w(k))`; the
/// second time derivative is formed by centered differences with step
/// `h_t`, the spatial part spectrally, the nonlinear term by the shared
/// lattice contraction. Returns NaN when the candidate map is disabled.
pub fn realspace_residual(
    model: &GridModel,
    traj: &Trajectory,
    t: f64,
    h_t: f64,
    candidate_enabled: bool,
) -> Result<f64> {
    if !candidate_enabled {
        return Ok(f64::NAN);
    }
    let d = model.d;
    let zeta_hat = |tt: f64| -> Vec<C64> {
        let phi = traj.phi(tt);
        (0..d)
            .map(|j| (phi[j] + phi[model.pair(j)].conj()) / cr((2.0 * model.omega[j]).sqrt()))
            .collect()
    };
    let zc = zeta_hat(t);
    let zp = zeta_hat(t + h_t);
    let zm = zeta_hat(t - h_t);
    let q = nonlinear_wave_term(model, &zc);
    let mut resid2 = 0.0;
    for j in 0..d {
        let dtt = (zp[j] - zc[j] * cr(2.0) + zm[j]) / cr(h_t * h_t);
        let lin = zc[j] * cr(model.momenta[j] * model.momenta[j] + model.m0 * model.m0);
        resid2 += (dtt + lin - q[j]).norm_sqr();
    }
    Ok(resid2.sqrt())
}

/// `Q^(zeta)(k)`: the nonlinear term of the wave form; its real-space
/// field `sqrt2 * s(x)` coincides with the flow's field profile, so the
/// same contraction applies.
fn nonlinear_wave_term(model: &GridModel, zeta_hat: &[C64]) -> Vec<C64> {
    let d = model.d;
    let mut s: Vec<C64> = zeta_hat.to_vec();
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(d);
    ifft.process(&mut s);
    let field: Vec<f64> = s.iter().map(|v| v.re * model.dk).collect();
    let mut f: Vec<C64> = (0..d)
        .map(|n| {
            let mut pp = 0.0;
            for (j, &b) in model.beta.iter().enumerate().skip(1) {
                pp += j as f64 * b * (2.0f64.sqrt() * field[n]).powi(j as i32 - 1);
            }
            cr(-model.g_samples[n] * pp * 2.0f64.sqrt())
        })
        .collect();
    let fft = planner.plan_fft_forward(d);
    fft.process(&mut f);
    (0..d).map(|j| f[j] * cr(model.dx * model.dk)).collect()
}

/// Restrict a model to its lowest-|k| modes for the quantum experiments:
/// returns the small mode space (componentwise conjugation on the
/// self-paired selection) and the restricted interaction tensors.
pub fn restrict_model(model: &GridModel, modes: usize) -> Result<(Arc<ModeSpace>, PotentialSeries)> {
    if modes == 0 || modes > 2 {
        return Err(Error::InvalidModel("quantum restriction supports 1 or 2 modes".into()));
    }
    if modes == 2 && model.d != 2 {
        // pairing must close on the selected set; {0, d/2} are the two
        // self-paired momenta only when d = 2
        return Err(Error::InvalidModel(
            "a 2-mode quantum restriction needs d = 2 (the pairing must close on the selection)".into(),
        ));
    }
    let selected: Vec<usize> = (0..modes).collect();
    let tensors_full = build_potential_tensors(model, model.degree())?;
    let d_small = selected.len();
    let mut a = CMat::zeros(d_small, d_small);
    for (i, &m) in selected.iter().enumerate() {
        a[(i, i)] = cr(model.omega[m]);
    }
    let ms_small = Arc::new(ModeSpace::new(a, model.m0, Conjugation::Componentwise)?);
    let mut tensors = Vec::new();
    for (j, t) in tensors_full.tensors.iter().enumerate() {
        let small_sector = SectorIndex::new(d_small, j)?;
        let big_sector = SectorIndex::new(model.d, j)?;
        let mut small = SymTensor::zero(d_small, j)?;
        for (ks, mi_small) in small_sector.mis.iter().enumerate() {
            let mut counts = vec![0usize; model.d];
            for (i, &m) in selected.iter().enumerate() {
                counts[m] = mi_small.counts[i];
            }
            let kb = big_sector.position(&crate::tensor::MultiIndex::new(counts)).unwrap();
            small.coeffs[ks] = t.coeffs[kb];
        }
        tensors.push(small);
    }
    let series = PotentialSeries::new(ms_small, tensors, None)?;
    Ok((series.mode_space.clone(), series))
}

/// Analytic-interaction preset: `V^(j) = sqrt(j!) 2^{-j/2} a_j f_j` with
/// `f_j = prod u_k(k_m) F(1_{|x|<=r})(k_1+...+k_j)` on the lattice and
/// `u_k(k) = sqrt2 w(k)^{-1/2} chi^(k/kappa)` for a smooth unit-mass
/// bump `chi`. The decay report `sum_j e^{2 a l^j} |V^(j)|^2` must be
/// finite at the requested `(alpha, lambda)`.
pub fn hk_preset(
    model: &GridModel,
    kappa: f64,
    r: f64,
    a_coeffs: &[f64],
    decay: (f64, f64),
) -> Result<PotentialSeries> {
    if kappa < 1.0 {
        return Err(Error::InvalidModel("kappa must be >= 1".into()));
    }
    let d = model.d;
    let chi_hat = |k: f64| -> f64 {
        crate::ode::adaptive_simpson(
            &|x: f64| CutoffProfile::Bump { width: 1.0 }.value(x) * (k * x).cos(),
            -1.0,
            1.0,
            1e-12,
        )
    };
    // lattice transform of the (periodized) ball indicator: periodic in
    // K with period d dk, which keeps the kernels conjugation-symmetric
    // when the self-paired -d/2 momentum enters a sum
    let length = 2.0 * std::f64::consts::PI / model.dk;
    if 2.0 * r >= length {
        return Err(Error::InvalidModel(format!(
            "ball radius {r} does not fit the box of length {length:.3}"
        )));
    }
    let box_hat = |k: f64| -> f64 {
        let mut acc = 0.0;
        for n in 0..d {
            let mut x = n as f64 * model.dx;
            if x > length / 2.0 {
                x -= length;
            }
            if x.abs() <= r {
                acc += (k * n as f64 * model.dx).cos();
            }
        }
        acc * model.dx
    };
    let mut tensors = Vec::with_capacity(a_coeffs.len());
    let mut v0 = SymTensor::zero(d, 0)?;
    v0.coeffs[0] = cr(a_coeffs[0] * box_hat(0.0));
    tensors.push(v0);
    let chi_vals: Vec<f64> = (0..d).map(|m| chi_hat(model.momenta[m] / kappa)).collect();
    for (j, &aj) in a_coeffs.iter().enumerate().skip(1) {
        let size = (d as f64).powi(j as i32);
        if size > crate::config::DEFAULT_SIZE_CAP as f64 {
            return Err(Error::SizeCap { d, n: j, size: size as usize, cap: crate::config::DEFAULT_SIZE_CAP });
        }
        let mut raw = vec![cr(0.0); size as usize];
        if aj != 0.0 {
            let mut idx = vec![0usize; j];
            for (flat, slot) in raw.iter_mut().enumerate() {
                let mut rem = flat;
                for s in (0..j).rev() {
                    idx[s] = rem % d;
                    rem /= d;
                }
                let ksum: f64 = idx.iter().map(|&m| model.momenta[m]).sum();
                let mut w = box_hat(ksum) * model.dk.powi(j as i32);
                for &m in &idx {
                    w *= 2.0f64.sqrt() / model.omega[m].sqrt() * chi_vals[m];
                }
                *slot = cr(w);
            }
        }
        let sym = crate::tensor::symmetrize(d, j, &raw)?;
        let scale = (0.5 * ln_factorial(j)).exp() * 2.0f64.powf(-(j as f64) / 2.0) * aj;
        tensors.push(sym.scaled(cr(scale)));
    }
    let series = PotentialSeries::new(model.mode_space.clone(), tensors, Some(decay))?;
    let report = series.a3_report().unwrap();
    if !report.is_finite() {
        return Err(Error::InvalidModel(format!("decay report diverges at (alpha, lambda) = {decay:?}")));
    }
    Ok(series)
}

/// Parse the model spec file: `key = value` lines with
/// `d, dk, m0, g = gauss(width)|bump(width), beta = [..], jmax`.
pub fn parse_model_spec(text: &str) -> Result<(GridModel, usize)> {
    let mut d = None;
    let mut dk = None;
    let mut m0 = None;
    let mut profile = None;
    let mut beta: Option<Vec<f64>> = None;
    let mut jmax = usize::MAX;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) =
            line.split_once('=').ok_or(Error::Parse { line: lineno + 1, msg: "expected key = value".into() })?;
        let key = key.trim();
        let value = value.trim();
        let parse_f =
            |v: &str| -> Result<f64> { v.parse::<f64>().map_err(|e| Error::Parse { line: lineno + 1, msg: e.to_string() }) };
        match key {
            "d" => {
                d = Some(value.parse::<usize>().map_err(|e| Error::Parse { line: lineno + 1, msg: e.to_string() })?)
            }
            "dk" => dk = Some(parse_f(value)?),
            "m0" => m0 = Some(parse_f(value)?),
            "jmax" => {
                jmax = value.parse::<usize>().map_err(|e| Error::Parse { line: lineno + 1, msg: e.to_string() })?
            }
            "g" => {
                let v = value.replace(' ', "");
                if let Some(rest) = v.strip_prefix("gauss(").and_then(|r| r.strip_suffix(')')) {
                    profile = Some(CutoffProfile::Gaussian {
                        width: rest.parse().map_err(|_| Error::Parse { line: lineno + 1, msg: "bad width".into() })?,
                    });
                } else if let Some(rest) = v.strip_prefix("bump(").and_then(|r| r.strip_suffix(')')) {
                    profile = Some(CutoffProfile::Bump {
                        width: rest.parse().map_err(|_| Error::Parse { line: lineno + 1, msg: "bad width".into() })?,
                    });
                } else {
                    return Err(Error::Parse { line: lineno + 1, msg: format!("unknown profile '{value}'") });
                }
            }
            "beta" => {
                let v = value.trim_start_matches('[').trim_end_matches(']');
                let parsed: std::result::Result<Vec<f64>, _> =
                    v.split(',').map(|x| x.trim().parse::<f64>()).collect();
                beta = Some(parsed.map_err(|e| Error::Parse { line: lineno + 1, msg: e.to_string() })?);
            }
            other => return Err(Error::UnknownKey { key: other.to_string(), line: lineno + 1 }),
        }
    }
    let model = build_model(
        d.ok_or(Error::Parse { line: 0, msg: "missing d".into() })?,
        dk.ok_or(Error::Parse { line: 0, msg: "missing dk".into() })?,
        m0.ok_or(Error::Parse { line: 0, msg: "missing m0".into() })?,
        profile.ok_or(Error::Parse { line: 0, msg: "missing g".into() })?,
        beta.ok_or(Error::Parse { line: 0, msg: "missing beta".into() })?,
    )?;
    Ok((model, jmax))
}
