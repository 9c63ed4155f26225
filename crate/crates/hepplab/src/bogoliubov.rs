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

//! Time-dependent quadratic (Bogoliubov) dynamics along a classical
//! trajectory: the second Taylor coefficient `V2(t)`, the
//! interaction-picture quadratic generator, its unitary propagator on the
//! truncated Fock space, the real-linear symplectic flow split into
//! linear and antilinear parts, and the transported symbol `b -> b^_t`.

use crate::classical::{taylor_coefficients, Trajectory};
use crate::error::{Error, Result};
use crate::fock::{free_evolution, max_dev_on_sectors, FockBasis};
use crate::linalg::{cr, polar_unitary, CMat, C64, I};
use crate::ode::{dopri5, OdeOptions};
use crate::tensor::{embed_full, ModeSpace, SymTensor};
use crate::wick::{
    poly_to_symbol, quantize, symbol_one_particle, symbol_to_poly, PhasePoly, PolySymbol, PotentialSeries,
};
use std::sync::Arc;

/// `V2(t)` samples along a trajectory plus everything needed to evaluate
/// the quadratic generator in between grid points.
#[derive(Debug, Clone)]
pub struct QuadraticPath {
    pub times: Vec<f64>,
    pub v2: Vec<SymTensor>,
    series: PotentialSeries,
    traj: Trajectory,
}

impl QuadraticPath {
    pub fn v2_at(&self, t: f64) -> Result<SymTensor> {
        let phi = self.traj.phi(t);
        Ok(taylor_coefficients(&self.series, &phi, 2)?.remove(2))
    }

    pub fn mode_space(&self) -> &Arc<ModeSpace> {
        &self.series.mode_space
    }

    /// Symbol of the twisted quadratic generator
    /// `F(z) = (1/sqrt2) <(e^{-itA} z + e^{itA} c z)^{(x)2}, V2(t)>`,
    /// split into its (2,0), (1,1) and (0,2) kernels.
    pub fn generator_symbol(&self, t: f64) -> Result<PolySymbol> {
        let v2 = self.v2_at(t)?;
        twisted_quadratic_symbol(&v2, &self.series.mode_space, t)
    }

    /// Trapezoid cumulative `int_0^t |V2(s)| ds` on the stored grid.
    pub fn v2_norm_integral(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for i in 1..self.times.len() {
            let (a, b) = (self.times[i - 1], self.times[i]);
            let na = self.v2[i - 1].norm();
            let nb = self.v2[i].norm();
            let seg_end = if (t - a).abs() < (b - a).abs() && (t - a).signum() == (b - a).signum() {
                t
            } else {
                b
            };
            let frac = if (b - a).abs() < 1e-300 { 0.0 } else { (seg_end - a) / (b - a) };
            let frac = frac.clamp(0.0, 1.0);
            let n_end = na + (nb - na) * frac;
            acc += 0.5 * (na + n_end) * (seg_end - a).abs();
            if frac < 1.0 {
                break;
            }
        }
        acc
    }
}

/// Build the twisted quadratic symbol for a given order-2 tensor: the
/// kernels are `(1/sqrt2)|Vt>`, `(1/sqrt2)<Vt|` and, mode-indexed,
/// `B[m,m'] = sqrt2 sum_n Vt[m,n] conj((c_t e_m')[n])` with
/// `Vt = Gamma_2(e^{itA}) V2` and `c_t = e^{2itA} c`.
fn twisted_quadratic_symbol(v2: &SymTensor, ms: &ModeSpace, t: f64) -> Result<PolySymbol> {
    let d = ms.d;
    let lift = crate::tensor::sym_power_matrix(&ms.exp_ita(t), 2)?;
    let mut vt = SymTensor::zero(d, 2)?;
    for i in 0..vt.coeffs.len() {
        for j in 0..v2.coeffs.len() {
            vt.coeffs[i] += lift[(i, j)] * v2.coeffs[j];
        }
    }
    let vt_full = embed_full(&vt)?; // d^2 entries, row-major (m, n)
    let inv_sqrt2 = cr(1.0 / 2.0f64.sqrt());
    let mut sym = PolySymbol::zero(d);
    let mut k02 = CMat::zeros(vt.coeffs.len(), 1);
    for (i, v) in vt.coeffs.iter().enumerate() {
        k02[(i, 0)] = v * inv_sqrt2;
    }
    sym.add_term(0, 2, &k02, cr(1.0));
    let mut k20 = CMat::zeros(1, vt.coeffs.len());
    for (i, v) in vt.coeffs.iter().enumerate() {
        k20[(0, i)] = v.conj() * inv_sqrt2;
    }
    sym.add_term(2, 0, &k20, cr(1.0));
    let mut b11 = CMat::zeros(d, d);
    for mp in 0..d {
        let mut ce = vec![cr(0.0); d];
        ce[ms.conjugation.pair(mp)] = cr(1.0);
        let ct_e = ms.apply_exp_ita(2.0 * t, &ce);
        for m in 0..d {
            let mut acc = cr(0.0);
            for n in 0..d {
                acc += vt_full[m * d + n] * ct_e[n].conj();
            }
            b11[(m, mp)] = acc * cr(2.0f64.sqrt());
        }
    }
    sym.add_scaled(&symbol_one_particle(&b11)?, cr(1.0));
    Ok(sym)
}

/// Sample `V2(t) = taylor_coefficients(V, phi_t, 2)[2]` on a grid inside
/// the trajectory span.
pub fn build_v2_path(series: &PotentialSeries, traj: &Trajectory, grid: &[f64]) -> Result<QuadraticPath> {
    let span = traj.t_final();
    for &t in grid {
        let inside = if span >= 0.0 { t >= -1e-12 && t <= span + 1e-12 } else { t <= 1e-12 && t >= span - 1e-12 };
        if !inside {
            return Err(Error::Range(format!("grid point {t} outside the trajectory span [0, {span}]")));
        }
    }
    let mut v2 = Vec::with_capacity(grid.len());
    for &t in grid {
        let phi = traj.phi(t);
        v2.push(taylor_coefficients(series, &phi, 2)?.remove(2));
    }
    Ok(QuadraticPath { times: grid.to_vec(), v2, series: series.clone(), traj: traj.clone() })
}

/// Unitary quadratic propagator sampled on the path grid, stored as
/// `U2(t_i, 0)`; `U2(t,s) = U2(t,0) U2(s,0)^{-1}` by convention.
#[derive(Debug, Clone)]
pub struct PropagatorPath {
    pub basis: Arc<FockBasis>,
    pub times: Vec<f64>,
    pub u2: Vec<CMat>,
}

impl PropagatorPath {
    pub fn at_time(&self, t: f64) -> Result<&CMat> {
        self.times
            .iter()
            .position(|&x| (x - t).abs() < 1e-12)
            .map(|i| &self.u2[i])
            .ok_or_else(|| Error::Range(format!("time {t} is not a propagator grid point")))
    }
}

/// Integrate `i eps d(Ut)/dt = Wick_eps(F^{c_t}_{Vt2(t)}) Ut` grid
/// interval by grid interval, re-unitarizing by the polar factor after
/// each accepted interval, then attach the free part:
/// `U2(t,0) = e^{-it dGamma_1(A)} Ut(t,0)`. The result carries no `eps`
/// dependence beyond round-off since the generator is quadratic.
pub fn integrate_u2(basis: &Arc<FockBasis>, qpath: &QuadraticPath, eps: f64, tol: f64) -> Result<PropagatorPath> {
    let dim = basis.dim;
    let mut u = CMat::identity(dim, dim);
    let mut out = Vec::with_capacity(qpath.times.len());
    let opts = OdeOptions { rtol: tol, atol: tol * 1e-2, ..Default::default() };
    let rhs = |t: f64, y: &[C64]| -> Vec<C64> {
        let gen = qpath.generator_symbol(t).expect("generator symbol failed");
        let q = quantize(&gen, eps, basis).expect("generator quantization failed");
        let mut m = CMat::zeros(dim, dim);
        for col in 0..dim {
            for row in 0..dim {
                m[(row, col)] = y[col * dim + row];
            }
        }
        let du = &q.mat * m * (-I / cr(eps));
        let mut dy = vec![cr(0.0); dim * dim];
        for col in 0..dim {
            for row in 0..dim {
                dy[col * dim + row] = du[(row, col)];
            }
        }
        dy
    };
    for (i, &t) in qpath.times.iter().enumerate() {
        if i == 0 {
            if t.abs() > 1e-14 {
                return Err(Error::Range("propagator grid must start at t = 0".into()));
            }
            out.push(CMat::identity(dim, dim));
            continue;
        }
        let t_prev = qpath.times[i - 1];
        let mut y0 = vec![cr(0.0); dim * dim];
        for col in 0..dim {
            for row in 0..dim {
                y0[col * dim + row] = u[(row, col)];
            }
        }
        let sol = dopri5(rhs, t_prev, t, y0, &opts, |_, _| Ok(()))?;
        let yend = sol.y_end();
        for col in 0..dim {
            for row in 0..dim {
                u[(row, col)] = yend[col * dim + row];
            }
        }
        let drift = crate::linalg::max_abs(&(u.adjoint() * &u - CMat::identity(dim, dim)));
        if drift > 1e-6 {
            return Err(Error::Numerical(format!("propagator unitarity drift {drift:.3e} at t = {t:.4}")));
        }
        u = polar_unitary(&u)?;
        let evo = free_evolution(basis, t)?;
        out.push(evo.mat.adjoint() * &u);
    }
    Ok(PropagatorPath { basis: basis.clone(), times: qpath.times.clone(), u2: out })
}

/// Real-linear map `z -> L z + Aa conj(z)` (a symplectomorphism when
/// produced by the quadratic flow).
#[derive(Debug, Clone)]
pub struct SymplecticMap {
    pub l: CMat,
    pub aa: CMat,
    pub time: f64,
}

impl SymplecticMap {
    pub fn identity(d: usize, time: f64) -> Self {
        Self { l: CMat::identity(d, d), aa: CMat::zeros(d, d), time }
    }

    pub fn apply(&self, z: &[C64]) -> Vec<C64> {
        let d = self.l.nrows();
        (0..d)
            .map(|i| (0..d).map(|j| self.l[(i, j)] * z[j] + self.aa[(i, j)] * z[j].conj()).sum())
            .collect()
    }

    /// `sigma(phi u, phi v) - sigma(u, v)` with `sigma(u,v) = -2 Im<u,v>`;
    /// zero for a symplectomorphism.
    pub fn symplectic_defect(&self, u: &[C64], v: &[C64]) -> f64 {
        let sigma =
            |a: &[C64], b: &[C64]| -> f64 { -2.0 * a.iter().zip(b).map(|(x, y)| (x.conj() * y).im).sum::<f64>() };
        sigma(&self.apply(u), &self.apply(v)) - sigma(u, v)
    }
}

/// Integrate a real-linear flow `dz/dt = G_L(t) z + G_A(t) conj z` as a
/// coupled `(L, Aa)` ODE on the given grid.
pub(crate) fn integrate_symplectic_with<F>(
    d: usize,
    gens: F,
    grid: &[f64],
    tol: f64,
    symplectic_check: bool,
) -> Result<Vec<SymplecticMap>>
where
    F: Fn(f64) -> Result<(CMat, CMat)>,
{
    let opts = OdeOptions { rtol: tol, atol: tol * 1e-2, ..Default::default() };
    let pack = |l: &CMat, aa: &CMat| -> Vec<C64> {
        let mut y = Vec::with_capacity(2 * d * d);
        for col in 0..d {
            for row in 0..d {
                y.push(l[(row, col)]);
            }
        }
        for col in 0..d {
            for row in 0..d {
                y.push(aa[(row, col)]);
            }
        }
        y
    };
    let unpack = |y: &[C64]| -> (CMat, CMat) {
        let mut l = CMat::zeros(d, d);
        let mut aa = CMat::zeros(d, d);
        for col in 0..d {
            for row in 0..d {
                l[(row, col)] = y[col * d + row];
                aa[(row, col)] = y[d * d + col * d + row];
            }
        }
        (l, aa)
    };
    let rhs = |t: f64, y: &[C64]| -> Vec<C64> {
        let (l, aa) = unpack(y);
        let (gl, ga) = gens(t).expect("generator evaluation failed");
        // dL = G_L L + G_A conj(Aa); dAa = G_L Aa + G_A conj(L)
        let dl = &gl * &l + &ga * aa.map(|v| v.conj());
        let daa = &gl * &aa + &ga * l.map(|v| v.conj());
        pack(&dl, &daa)
    };
    let mut maps = Vec::with_capacity(grid.len());
    let mut cur = SymplecticMap::identity(d, grid[0]);
    maps.push(cur.clone());
    for w in grid.windows(2) {
        let y0 = pack(&cur.l, &cur.aa);
        let sol = dopri5(rhs, w[0], w[1], y0, &opts, |_, _| Ok(()))?;
        let (l, aa) = unpack(sol.y_end());
        cur = SymplecticMap { l, aa, time: w[1] };
        if symplectic_check {
            let u: Vec<C64> = (0..d).map(|i| crate::linalg::c(0.3 + 0.1 * i as f64, -0.2)).collect();
            let v: Vec<C64> = (0..d).map(|i| crate::linalg::c(-0.1, 0.4 + 0.05 * i as f64)).collect();
            let defect = cur.symplectic_defect(&u, &v);
            if defect.abs() > 1e-7 {
                return Err(Error::Numerical(format!("symplectic form drift {defect:.3e} at t = {:.4}", w[1])));
            }
        }
        maps.push(cur.clone());
    }
    Ok(maps)
}

/// Generators of the interaction-picture quadratic flow:
/// `dz/dt = -i sqrt2 T (conj z + e^{-2itA} C z)` with `T[n,m] = Vt[m,n]`.
fn quadratic_generators(qpath: &QuadraticPath, t: f64) -> Result<(CMat, CMat)> {
    let ms = &qpath.series.mode_space;
    let d = ms.d;
    let v2 = qpath.v2_at(t)?;
    let lift = crate::tensor::sym_power_matrix(&ms.exp_ita(t), 2)?;
    let mut vt = SymTensor::zero(d, 2)?;
    for i in 0..vt.coeffs.len() {
        for j in 0..v2.coeffs.len() {
            vt.coeffs[i] += lift[(i, j)] * v2.coeffs[j];
        }
    }
    let full = embed_full(&vt)?;
    let mut tmat = CMat::zeros(d, d);
    for m in 0..d {
        for n in 0..d {
            tmat[(n, m)] = full[m * d + n];
        }
    }
    let scale = cr(2.0f64.sqrt()) * (-I);
    let ga = &tmat * scale;
    let mut cmat = CMat::zeros(d, d);
    for mp in 0..d {
        let mut ce = vec![cr(0.0); d];
        ce[ms.conjugation.pair(mp)] = cr(1.0);
        let rot = ms.apply_exp_ita(-2.0 * t, &ce);
        for m in 0..d {
            cmat[(m, mp)] = rot[m];
        }
    }
    let gl = &tmat * &cmat * scale;
    Ok((gl, ga))
}

/// Symplectic maps of the interaction-picture quadratic flow on a grid.
pub fn integrate_symplectic(qpath: &QuadraticPath, grid: &[f64], tol: f64) -> Result<Vec<SymplecticMap>> {
    let d = qpath.series.mode_space.d;
    integrate_symplectic_with(d, |t| quadratic_generators(qpath, t), grid, tol, true)
}

/// The order-lowering operator of the transported-symbol expansion:
/// `L b = -2 Tr(W d dbar b) + <v, dbar^2 b> + <d^2 b, v>` with
/// `W = A~^T conj(A~)` (the matrix of `A~* A~`) and `v = L~ A~^T`
/// realized as a 2-tensor; the adjoint convention is pinned by the
/// transport oracle. Drops the total order by 2; zero when `Aa = 0`.
pub fn lambda_op(b: &PolySymbol, map: &SymplecticMap) -> Result<PolySymbol> {
    let f = symbol_to_poly(b)?;
    let g = lambda_poly(&f, map);
    poly_to_symbol(&g)
}

fn lambda_poly(f: &PhasePoly, map: &SymplecticMap) -> PhasePoly {
    let d = f.d;
    let w = map.aa.transpose() * map.aa.map(|v| v.conj());
    // the pairing vector as a 2-tensor: conj(L~) A~, symmetrized; the
    // adjoint convention is the one that survives the transport oracle
    let v_raw = map.l.map(|v| v.conj()) * &map.aa;
    let v = (&v_raw + v_raw.transpose()) * cr(0.5);
    let mut out = PhasePoly::zero(d);
    for m in 0..d {
        for mp in 0..d {
            if w[(m, mp)] != cr(0.0) {
                out.add_poly(&f.d_z(m).d_zbar(mp), -cr(2.0) * w[(m, mp)]);
            }
        }
    }
    for m in 0..d {
        for n in 0..d {
            let vmn = v[(m, n)];
            if vmn != cr(0.0) {
                out.add_poly(&f.d_zbar(m).d_zbar(n), vmn.conj());
                out.add_poly(&f.d_z(m).d_z(n), vmn);
            }
        }
    }
    out
}

/// Transported symbol without the matrix oracle:
/// `b^ = sum_{k <= m/2} (1/(2^k k!)) Lambda^k (b o phi_t)` where
/// `phi_t = e^{-itA} (L~ + A~ conj)` is the full quadratic flow.
pub fn transport_symbol_unchecked(b: &PolySymbol, map: &SymplecticMap, ms: &ModeSpace) -> Result<PolySymbol> {
    let t = map.time;
    let rot = ms.exp_ita(-t);
    let l_full = &rot * &map.l;
    let a_full = &rot * &map.aa;
    let f = symbol_to_poly(b)?;
    let composed = f.substitute_real_linear(&l_full, &a_full, None);
    let m_ord = b.total_order();
    let mut acc = PhasePoly::zero(b.d);
    let mut lam_k = composed;
    for k in 0..=(m_ord / 2) {
        let w = 1.0 / (2.0f64.powi(k as i32) * crate::linalg::ln_factorial(k).exp());
        acc.add_poly(&lam_k, cr(w));
        if 2 * (k + 1) <= m_ord {
            lam_k = lambda_poly(&lam_k, map);
        } else {
            break;
        }
    }
    poly_to_symbol(&acc)
}

/// Transported symbol with the mandatory conjugation oracle:
/// `U2(t,0)^* Wick_1(b) U2(t,0) = Wick_1(b^)`. Unlike polynomial guard
/// bands, the quadratic propagator couples every sector, so compression
/// error decays only geometrically in the distance to the cutoff; the
/// probe band therefore stays [`TRANSPORT_PROBE_DISTANCE`] sectors below
/// it (and below `M - m - 2`). A deviation past `transport_tol` is a
/// hard error, never a silent inaccuracy.
///
/// [`TRANSPORT_PROBE_DISTANCE`]: crate::config::TRANSPORT_PROBE_DISTANCE
pub fn transport_symbol(
    b: &PolySymbol,
    t: f64,
    maps: &[SymplecticMap],
    prop: &PropagatorPath,
    basis: &Arc<FockBasis>,
    transport_tol: f64,
) -> Result<PolySymbol> {
    let idx = prop
        .times
        .iter()
        .position(|&x| (x - t).abs() < 1e-12)
        .ok_or_else(|| Error::Range(format!("time {t} is not on the propagator grid")))?;
    let map = maps
        .iter()
        .find(|m| (m.time - t).abs() < 1e-12)
        .ok_or_else(|| Error::Range("symplectic maps and propagator grids disagree".into()))?;
    let hat = transport_symbol_unchecked(b, map, &basis.mode_space)?;
    let m_ord = b.total_order();
    let u2 = &prop.u2[idx];
    let lhs = u2.adjoint() * &quantize(b, 1.0, basis)?.mat * u2;
    let rhs = quantize(&hat, 1.0, basis)?.mat;
    let guard = basis
        .max_total
        .saturating_sub(m_ord + 2)
        .min(basis.max_total.saturating_sub(m_ord + crate::config::TRANSPORT_PROBE_DISTANCE));
    let deviation = max_dev_on_sectors(&lhs, &rhs, basis, guard);
    if deviation > transport_tol {
        return Err(Error::TransportMismatch { deviation, tol: transport_tol });
    }
    Ok(hat)
}
