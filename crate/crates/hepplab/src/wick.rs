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

//! Polynomial Wick symbols and their quantization.
//!
//! A monomial symbol of bidegree `(p, q)` is `b(z) = <z^{(x)q}, K z^{(x)p}>`
//! with a kernel `K` stored as a `D(q) x D(p)` matrix in the orthonormal
//! symmetrized bases. A [`PolySymbol`] is a finite sum of such terms.
//!
//! Quantization is implemented twice on purpose: a closed sector formula
//! and an independent normal-ordered ladder-product construction. The
//! combinatorial prefactors are the most error-prone part of this
//! machinery, so the two paths are cross-checked in the suites and any
//! discrepancy fails the build.

use crate::config::DEFAULT_SYMBOL_ORDER_CAP;
use crate::error::{Error, Result};
use crate::fock::{ladder_op, FockBasis, FockOperator, Ladder};
use crate::linalg::{cr, ln_factorial, CMat, C64};
use crate::tensor::{conj_apply, Conjugation, ModeSpace, MultiIndex, SectorIndex, SymTensor};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

/// Finite sum of monomial kernels, keyed by bidegree `(p, q)`.
#[derive(Debug, Clone)]
pub struct PolySymbol {
    pub d: usize,
    pub terms: BTreeMap<(usize, usize), CMat>,
}

impl PolySymbol {
    pub fn zero(d: usize) -> Self {
        Self { d, terms: BTreeMap::new() }
    }

    pub fn constant(d: usize, value: C64) -> Self {
        let mut s = Self::zero(d);
        if value != cr(0.0) {
            s.terms.insert((0, 0), CMat::from_element(1, 1, value));
        }
        s
    }

    /// Single monomial term; `kernel` must be `D(q) x D(p)`.
    pub fn monomial(d: usize, p: usize, q: usize, kernel: CMat) -> Result<Self> {
        let dq = crate::tensor::sector_dim(d, q)?;
        let dp = crate::tensor::sector_dim(d, p)?;
        if kernel.nrows() != dq || kernel.ncols() != dp {
            return Err(Error::Shape(format!(
                "kernel for (p={p}, q={q}) must be {dq}x{dp}, got {}x{}",
                kernel.nrows(),
                kernel.ncols()
            )));
        }
        let mut s = Self::zero(d);
        s.terms.insert((p, q), kernel);
        Ok(s)
    }

    /// Largest `p + q` over stored terms.
    pub fn total_order(&self) -> usize {
        self.terms.keys().map(|&(p, q)| p + q).max().unwrap_or(0)
    }

    pub fn add_term(&mut self, p: usize, q: usize, kernel: &CMat, scale: C64) {
        if scale == cr(0.0) {
            return;
        }
        let entry = self
            .terms
            .entry((p, q))
            .or_insert_with(|| CMat::zeros(kernel.nrows(), kernel.ncols()));
        *entry += kernel * scale;
    }

    pub fn add_scaled(&mut self, other: &PolySymbol, scale: C64) {
        for (&(p, q), k) in &other.terms {
            self.add_term(p, q, k, scale);
        }
    }

    pub fn scaled(&self, scale: C64) -> PolySymbol {
        let mut out = self.clone();
        for k in out.terms.values_mut() {
            *k *= scale;
        }
        out
    }

    /// Pointwise complex conjugate symbol: term `(p,q)` with kernel `K`
    /// becomes term `(q,p)` with kernel `K^*`.
    pub fn conj(&self) -> PolySymbol {
        let mut out = PolySymbol::zero(self.d);
        for (&(p, q), k) in &self.terms {
            out.add_term(q, p, &k.adjoint(), cr(1.0));
        }
        out
    }

    /// Sum of kernel Frobenius norms, a cheap magnitude gauge.
    pub fn kernel_norm(&self) -> f64 {
        self.terms.values().map(|k| k.norm()).sum()
    }

    /// Drop terms whose kernels vanish identically.
    pub fn pruned(mut self) -> PolySymbol {
        self.terms.retain(|_, k| k.iter().any(|v| *v != cr(0.0)));
        self
    }
}

/// Interaction datum: one conjugation-symmetric tensor per degree.
#[derive(Debug, Clone)]
pub struct PotentialSeries {
    pub mode_space: Arc<ModeSpace>,
    pub tensors: Vec<SymTensor>,
    pub decay: Option<(f64, f64)>,
}

impl PotentialSeries {
    /// `tensors[j]` is the degree-`j` component; each must be invariant
    /// under the lifted conjugation.
    pub fn new(mode_space: Arc<ModeSpace>, tensors: Vec<SymTensor>, decay: Option<(f64, f64)>) -> Result<Self> {
        for (j, t) in tensors.iter().enumerate() {
            if t.d != mode_space.d || t.n != j {
                return Err(Error::InvalidPotential(format!(
                    "component {j} has (d={}, n={}), expected (d={}, n={j})",
                    t.d, t.n, mode_space.d
                )));
            }
            let ct = conj_apply(&mode_space.conjugation, t)?;
            let dev: f64 = ct.coeffs.iter().zip(&t.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            if dev > 1e-11 * (1.0 + t.norm()) {
                return Err(Error::InvalidPotential(format!(
                    "component {j} violates conjugation symmetry by {dev:.3e}"
                )));
            }
        }
        Ok(Self { mode_space, tensors, decay })
    }

    pub fn jmax(&self) -> usize {
        self.tensors.len().saturating_sub(1)
    }

    /// `sqrt(sum_j |V^(j)|^2)`.
    pub fn norm(&self) -> f64 {
        self.tensors.iter().map(|t| t.norm().powi(2)).sum::<f64>().sqrt()
    }

    /// `sum_j exp(2 a l^j) |V^(j)|^2` for the stored decay profile.
    pub fn a3_report(&self) -> Option<f64> {
        let (alpha, lambda) = self.decay?;
        let mut acc = 0.0f64;
        for (j, t) in self.tensors.iter().enumerate() {
            acc += (2.0 * alpha * lambda.powi(j as i32)).exp() * t.norm().powi(2);
        }
        Some(acc)
    }
}

// ---------------------------------------------------------------------
// Mode-indexed constructors
// ---------------------------------------------------------------------
//
// Sector-1 kernel entries follow the lexicographic multi-index order,
// which is NOT the mode order for d > 1. These helpers take mode-indexed
// data and permute it into kernel position.

/// Position of mode `m` within the lexicographic order-1 sector.
pub fn mode_position(d: usize, m: usize) -> Result<usize> {
    let sector = SectorIndex::new(d, 1)?;
    let mut e = vec![0usize; d];
    e[m] = 1;
    Ok(sector.position(&MultiIndex::new(e)).unwrap())
}

/// `<u, z>` as a `(1,0)` monomial (quantizes to the annihilator).
pub fn symbol_bra(u: &[C64]) -> Result<PolySymbol> {
    let d = u.len();
    let mut k = CMat::zeros(1, d);
    for m in 0..d {
        k[(0, mode_position(d, m)?)] = u[m].conj();
    }
    PolySymbol::monomial(d, 1, 0, k)
}

/// `<z, u>` as a `(0,1)` monomial (quantizes to the creator).
pub fn symbol_ket(u: &[C64]) -> Result<PolySymbol> {
    let d = u.len();
    let mut k = CMat::zeros(d, 1);
    for m in 0..d {
        k[(mode_position(d, m)?, 0)] = u[m];
    }
    PolySymbol::monomial(d, 0, 1, k)
}

/// `<z, B z>` as a `(1,1)` monomial from a mode-indexed matrix
/// (quantizes to `dGamma_eps(B)`).
pub fn symbol_one_particle(b: &CMat) -> Result<PolySymbol> {
    let d = b.nrows();
    if b.ncols() != d {
        return Err(Error::Shape("one-particle kernel must be square".into()));
    }
    let mut k = CMat::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            k[(mode_position(d, i)?, mode_position(d, j)?)] = b[(i, j)];
        }
    }
    PolySymbol::monomial(d, 1, 1, k)
}

// ---------------------------------------------------------------------
// Scalar polynomial representation in (z, conj z)
// ---------------------------------------------------------------------

/// Polynomial in the 2d commuting variables `(z, zbar)`; the faithful
/// scalar form of a [`PolySymbol`]. Keys are (conj-degree, holo-degree)
/// multi-index pairs.
#[derive(Debug, Clone, Default)]
pub(crate) struct PhasePoly {
    pub d: usize,
    pub terms: BTreeMap<(Vec<usize>, Vec<usize>), C64>,
}

impl PhasePoly {
    pub fn zero(d: usize) -> Self {
        Self { d, terms: BTreeMap::new() }
    }

    pub fn one(d: usize) -> Self {
        let mut p = Self::zero(d);
        p.add(vec![0; d], vec![0; d], cr(1.0));
        p
    }

    pub fn add(&mut self, a: Vec<usize>, b: Vec<usize>, v: C64) {
        if v == cr(0.0) {
            return;
        }
        *self.terms.entry((a, b)).or_insert(cr(0.0)) += v;
    }

    pub fn add_poly(&mut self, other: &PhasePoly, scale: C64) {
        for ((a, b), v) in &other.terms {
            self.add(a.clone(), b.clone(), v * scale);
        }
    }

    pub fn mul(&self, other: &PhasePoly) -> PhasePoly {
        let mut out = PhasePoly::zero(self.d);
        for ((a1, b1), v1) in &self.terms {
            for ((a2, b2), v2) in &other.terms {
                let a: Vec<usize> = a1.iter().zip(a2).map(|(x, y)| x + y).collect();
                let b: Vec<usize> = b1.iter().zip(b2).map(|(x, y)| x + y).collect();
                out.add(a, b, v1 * v2);
            }
        }
        out
    }

    pub fn pow(&self, k: usize) -> PhasePoly {
        let mut acc = PhasePoly::one(self.d);
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Wirtinger derivative in `z_m`.
    pub fn d_z(&self, m: usize) -> PhasePoly {
        let mut out = PhasePoly::zero(self.d);
        for ((a, b), v) in &self.terms {
            if b[m] == 0 {
                continue;
            }
            let mut b2 = b.clone();
            b2[m] -= 1;
            out.add(a.clone(), b2, v * cr(b[m] as f64));
        }
        out
    }

    /// Wirtinger derivative in `zbar_m`.
    pub fn d_zbar(&self, m: usize) -> PhasePoly {
        let mut out = PhasePoly::zero(self.d);
        for ((a, b), v) in &self.terms {
            if a[m] == 0 {
                continue;
            }
            let mut a2 = a.clone();
            a2[m] -= 1;
            out.add(a2, b.clone(), v * cr(a[m] as f64));
        }
        out
    }

    #[cfg(test)]
    pub fn eval(&self, z: &[C64]) -> C64 {
        let zbar: Vec<C64> = z.iter().map(|v| v.conj()).collect();
        let mut acc = cr(0.0);
        for ((a, b), v) in &self.terms {
            acc += v
                * MultiIndex::new(a.clone()).monomial(&zbar)
                * MultiIndex::new(b.clone()).monomial(z);
        }
        acc
    }

    /// Substitute `z_i -> sum_j L[i,j] z_j + Aa[i,j] zbar_j + u_i` (and
    /// the conjugate rule for `zbar_i`).
    pub fn substitute_real_linear(&self, l: &CMat, aa: &CMat, shift: Option<&[C64]>) -> PhasePoly {
        let d = self.d;
        let mut forms_z: Vec<PhasePoly> = Vec::with_capacity(d);
        let mut forms_zbar: Vec<PhasePoly> = Vec::with_capacity(d);
        for i in 0..d {
            let mut fz = PhasePoly::zero(d);
            let mut fzb = PhasePoly::zero(d);
            for j in 0..d {
                let mut ej = vec![0usize; d];
                ej[j] = 1;
                fz.add(vec![0; d], ej.clone(), l[(i, j)]);
                fz.add(ej.clone(), vec![0; d], aa[(i, j)]);
                fzb.add(ej.clone(), vec![0; d], l[(i, j)].conj());
                fzb.add(vec![0; d], ej, aa[(i, j)].conj());
            }
            if let Some(u) = shift {
                fz.add(vec![0; d], vec![0; d], u[i]);
                fzb.add(vec![0; d], vec![0; d], u[i].conj());
            }
            forms_z.push(fz);
            forms_zbar.push(fzb);
        }
        let mut out = PhasePoly::zero(d);
        for ((a, b), v) in &self.terms {
            let mut acc = PhasePoly::one(d);
            for m in 0..d {
                if b[m] > 0 {
                    acc = acc.mul(&forms_z[m].pow(b[m]));
                }
                if a[m] > 0 {
                    acc = acc.mul(&forms_zbar[m].pow(a[m]));
                }
            }
            out.add_poly(&acc, *v);
        }
        out
    }
}

/// Faithful scalar expansion of a symbol: kernel entries reweighted by
/// `sqrt(q!/A!) sqrt(p!/B!)`.
pub(crate) fn symbol_to_poly(b: &PolySymbol) -> Result<PhasePoly> {
    let mut out = PhasePoly::zero(b.d);
    for (&(p, q), k) in &b.terms {
        let rows = SectorIndex::new(b.d, q)?;
        let cols = SectorIndex::new(b.d, p)?;
        let lp = ln_factorial(p);
        let lq = ln_factorial(q);
        for (ia, a) in rows.mis.iter().enumerate() {
            for (ib, bb) in cols.mis.iter().enumerate() {
                let v = k[(ia, ib)];
                if v == cr(0.0) {
                    continue;
                }
                let w = (0.5 * (lq - a.ln_factorial()) + 0.5 * (lp - bb.ln_factorial())).exp();
                out.add(a.counts.clone(), bb.counts.clone(), v * cr(w));
            }
        }
    }
    Ok(out)
}

/// Regroup a scalar polynomial into symbol kernels.
pub(crate) fn poly_to_symbol(f: &PhasePoly) -> Result<PolySymbol> {
    let mut out = PolySymbol::zero(f.d);
    let mut sectors: BTreeMap<usize, SectorIndex> = BTreeMap::new();
    for ((a, b), v) in &f.terms {
        if *v == cr(0.0) {
            continue;
        }
        let q: usize = a.iter().sum();
        let p: usize = b.iter().sum();
        if p + q > DEFAULT_SYMBOL_ORDER_CAP {
            return Err(Error::Shape(format!(
                "symbol order {} exceeds the configured cap {}",
                p + q,
                DEFAULT_SYMBOL_ORDER_CAP
            )));
        }
        if !sectors.contains_key(&q) {
            sectors.insert(q, SectorIndex::new(f.d, q)?);
        }
        if !sectors.contains_key(&p) {
            sectors.insert(p, SectorIndex::new(f.d, p)?);
        }
        let mia = MultiIndex::new(a.clone());
        let mib = MultiIndex::new(b.clone());
        let ia = sectors[&q].position(&mia).unwrap();
        let ib = sectors[&p].position(&mib).unwrap();
        let w = (0.5 * (mia.ln_factorial() - ln_factorial(q)) + 0.5 * (mib.ln_factorial() - ln_factorial(p))).exp();
        let dq = sectors[&q].dim();
        let dp = sectors[&p].dim();
        let entry = out.terms.entry((p, q)).or_insert_with(|| CMat::zeros(dq, dp));
        entry[(ia, ib)] += v * cr(w);
    }
    Ok(out.pruned())
}

// ---------------------------------------------------------------------
// Construction from potentials
// ---------------------------------------------------------------------

/// Symbol of `F_V(z) = sum_j < (z + c z)^{(x)j} / sqrt(j!), V^(j) >`,
/// expanded into `(p, q)` kernels with binomial weights over the slots
/// carrying a conjugation.
pub fn symbol_from_potential(v: &PotentialSeries) -> Result<PolySymbol> {
    let mut f = PhasePoly::zero(v.mode_space.d);
    for t in &v.tensors {
        add_tensor_poly(&mut f, t, &v.mode_space.conjugation)?;
    }
    poly_to_symbol(&f)
}

/// Symbol of a single `F_{V^(l)}` term.
pub fn symbol_from_tensor(t: &SymTensor, conj: &Conjugation) -> Result<PolySymbol> {
    let mut f = PhasePoly::zero(t.d);
    add_tensor_poly(&mut f, t, conj)?;
    poly_to_symbol(&f)
}

fn add_tensor_poly(f: &mut PhasePoly, t: &SymTensor, conj: &Conjugation) -> Result<()> {
    let d = t.d;
    let sector = SectorIndex::new(d, t.n)?;
    // F(z) = sum_a V_a / sqrt(a!) prod_m (zbar_m + z_{pi(m)})^{a_m}
    for (k, alpha) in sector.mis.iter().enumerate() {
        let v = t.coeffs[k];
        if v == cr(0.0) {
            continue;
        }
        let base = v * cr((-0.5 * alpha.ln_factorial()).exp());
        let mut stack: Vec<(usize, Vec<usize>, Vec<usize>, f64)> = vec![(0, vec![0; d], vec![0; d], 1.0)];
        while let Some((m, a_acc, b_acc, w)) = stack.pop() {
            if m == d {
                f.add(a_acc, b_acc, base * cr(w));
                continue;
            }
            let am = alpha.counts[m];
            for r in 0..=am {
                let mut a2 = a_acc.clone();
                let mut b2 = b_acc.clone();
                a2[m] += r;
                b2[conj.pair(m)] += am - r;
                let binom = (ln_factorial(am) - ln_factorial(r) - ln_factorial(am - r)).exp();
                stack.push((m + 1, a2, b2, w * binom));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------
// Evaluation and derivatives
// ---------------------------------------------------------------------

/// `b(z) = sum_terms <z^{(x)q}, K z^{(x)p}>`.
pub fn eval_symbol(b: &PolySymbol, z: &[C64]) -> Result<C64> {
    let mut acc = cr(0.0);
    let mut powers: BTreeMap<usize, SymTensor> = BTreeMap::new();
    for (&(p, q), k) in &b.terms {
        for n in [p, q] {
            if !powers.contains_key(&n) {
                powers.insert(n, crate::tensor::sym_tensor_power(z, n)?);
            }
        }
        let zp = &powers[&p];
        let zq = &powers[&q];
        for (ia, ca) in zq.coeffs.iter().enumerate() {
            for (ib, cb) in zp.coeffs.iter().enumerate() {
                let kv = k[(ia, ib)];
                if kv != cr(0.0) {
                    acc += ca.conj() * kv * cb;
                }
            }
        }
    }
    Ok(acc)
}

/// Kernel of the mixed derivative `dbar^j d^k b` at the point `z`, as a
/// `D(j) x D(k)` matrix; zero when an order is out of range.
pub fn derive_symbol(b: &PolySymbol, z: &[C64], k_order: usize, j_order: usize) -> Result<CMat> {
    let d = b.d;
    let rows = SectorIndex::new(d, j_order)?;
    let cols = SectorIndex::new(d, k_order)?;
    let mut out = CMat::zeros(rows.dim(), cols.dim());
    for (&(p, q), kern) in &b.terms {
        if k_order > p || j_order > q {
            continue;
        }
        let right = right_insert_matrix(d, p, k_order, z)?;
        let left = left_contract_matrix(d, q, j_order, z)?;
        let factor =
            (ln_factorial(p) - ln_factorial(p - k_order) + ln_factorial(q) - ln_factorial(q - j_order)).exp();
        out += left * kern * right * cr(factor);
    }
    Ok(out)
}

/// Matrix of `x -> S_p(z^{(x)(p-k)} x x)` from sector `k` to sector `p`.
fn right_insert_matrix(d: usize, p: usize, k: usize, z: &[C64]) -> Result<CMat> {
    let dst = SectorIndex::new(d, p)?;
    let src = SectorIndex::new(d, k)?;
    let mut m = CMat::zeros(dst.dim(), src.dim());
    let lpk = ln_factorial(p - k);
    let lk = ln_factorial(k);
    let lp = ln_factorial(p);
    for (it, tp) in dst.mis.iter().enumerate() {
        for (is, ts) in src.mis.iter().enumerate() {
            if let Some(gamma) = tp.checked_sub(ts) {
                let w = (lpk - gamma.ln_factorial() + 0.5 * (tp.ln_factorial() + lk - lp - ts.ln_factorial())).exp();
                m[(it, is)] = gamma.monomial(z) * cr(w);
            }
        }
    }
    Ok(m)
}

/// Matrix of `y -> S_j((<z^{(x)(q-j)}| x 1^{(x)j}) y)` from sector `q` to
/// sector `j`.
fn left_contract_matrix(d: usize, q: usize, j: usize, z: &[C64]) -> Result<CMat> {
    let src = SectorIndex::new(d, q)?;
    let dst = SectorIndex::new(d, j)?;
    let zbar: Vec<C64> = z.iter().map(|v| v.conj()).collect();
    let mut m = CMat::zeros(dst.dim(), src.dim());
    let lqj = ln_factorial(q - j);
    let lj = ln_factorial(j);
    let lq = ln_factorial(q);
    for (is, sp) in dst.mis.iter().enumerate() {
        for (iq, sq) in src.mis.iter().enumerate() {
            if let Some(gamma) = sq.checked_sub(sp) {
                let w = (lqj - gamma.ln_factorial() + 0.5 * (sq.ln_factorial() + lj - lq - sp.ln_factorial())).exp();
                m[(is, iq)] = gamma.monomial(&zbar) * cr(w);
            }
        }
    }
    Ok(m)
}

// ---------------------------------------------------------------------
// Quantization
// ---------------------------------------------------------------------

/// Wick quantization by the closed sector formula: on sector `n >= p` the
/// `(p,q)` term contributes
/// `eps^{(p+q)/2} sqrt(n! (n+q-p)!)/(n-p)! S(K x 1^{(x)(n-p)})`,
/// compressed at the cutoff.
pub fn quantize(b: &PolySymbol, eps: f64, basis: &Arc<FockBasis>) -> Result<FockOperator> {
    if b.d != basis.mode_space.d {
        return Err(Error::Shape(format!(
            "symbol over d={} quantized on a basis with d={}",
            b.d, basis.mode_space.d
        )));
    }
    let mut mat = CMat::zeros(basis.dim, basis.dim);
    for (&(p, q), kern) in &b.terms {
        let rows = SectorIndex::new(b.d, q)?;
        let cols = SectorIndex::new(b.d, p)?;
        let scale = eps.powf((p + q) as f64 / 2.0);
        let half_lpq = 0.5 * (ln_factorial(p) + ln_factorial(q));
        for n in p..=basis.max_total {
            let n_out = n + q - p;
            if n_out > basis.max_total {
                continue;
            }
            let kappa = &basis.sectors[n - p];
            let off_in = basis.offsets[n];
            let off_out = basis.offsets[n_out];
            let sec_in = &basis.sectors[n];
            let sec_out = &basis.sectors[n_out];
            for (is, sigma) in rows.mis.iter().enumerate() {
                for (it, tau) in cols.mis.iter().enumerate() {
                    let kv = kern[(is, it)];
                    if kv == cr(0.0) {
                        continue;
                    }
                    let half_st = 0.5 * (sigma.ln_factorial() + tau.ln_factorial());
                    for kap in &kappa.mis {
                        let mu = sigma.add(kap);
                        let nu = tau.add(kap);
                        let iu = sec_out.position(&mu).unwrap();
                        let iv = sec_in.position(&nu).unwrap();
                        let lw =
                            half_lpq + 0.5 * (mu.ln_factorial() + nu.ln_factorial()) - kap.ln_factorial() - half_st;
                        mat[(off_out + iu, off_in + iv)] += kv * cr(scale * lw.exp());
                    }
                }
            }
        }
    }
    FockOperator::new(basis.clone(), mat, false, false)
}

/// Independent quantization path: expand the kernel over rank-one
/// symmetrized basis pairs and assemble normal-ordered ladder products
/// `sqrt(q!/s!) sqrt(p!/t!) prod a*(e)^s prod a(e)^t`.
pub fn quantize_ladder(b: &PolySymbol, eps: f64, basis: &Arc<FockBasis>) -> Result<FockOperator> {
    let d = basis.mode_space.d;
    let mut cre_m: Vec<CMat> = Vec::with_capacity(d);
    let mut ann_m: Vec<CMat> = Vec::with_capacity(d);
    for m in 0..d {
        let mut e = vec![cr(0.0); d];
        e[m] = cr(1.0);
        cre_m.push(ladder_op(basis, &e, eps, Ladder::Creation)?.mat);
        ann_m.push(ladder_op(basis, &e, eps, Ladder::Annihilation)?.mat);
    }
    let mut mat = CMat::zeros(basis.dim, basis.dim);
    for (&(p, q), kern) in &b.terms {
        let rows = SectorIndex::new(b.d, q)?;
        let cols = SectorIndex::new(b.d, p)?;
        for (is, sigma) in rows.mis.iter().enumerate() {
            for (it, tau) in cols.mis.iter().enumerate() {
                let kv = kern[(is, it)];
                if kv == cr(0.0) {
                    continue;
                }
                let w = (0.5 * (ln_factorial(q) - sigma.ln_factorial())
                    + 0.5 * (ln_factorial(p) - tau.ln_factorial()))
                .exp();
                let mut term = CMat::identity(basis.dim, basis.dim);
                for m in 0..d {
                    for _ in 0..sigma.counts[m] {
                        term = &term * &cre_m[m];
                    }
                }
                for m in 0..d {
                    for _ in 0..tau.counts[m] {
                        term = &term * &ann_m[m];
                    }
                }
                mat += term * (kv * cr(w));
            }
        }
    }
    FockOperator::new(basis.clone(), mat, false, false)
}

// ---------------------------------------------------------------------
// Composition and translation
// ---------------------------------------------------------------------

/// Symbol of `Wick_eps(b1) Wick_eps(b2)`:
/// `sum_k (eps^k / k!) <d^k b1, dbar^k b2>` with the dual pairing carried
/// out on the scalar representation.
pub fn compose_symbols(b1: &PolySymbol, b2: &PolySymbol, eps: f64) -> Result<PolySymbol> {
    if b1.d != b2.d {
        return Err(Error::Shape("symbol mode counts differ".into()));
    }
    let d = b1.d;
    let f1 = symbol_to_poly(b1)?;
    let f2 = symbol_to_poly(b2)?;
    let p1_max = b1.terms.keys().map(|&(p, _)| p).max().unwrap_or(0);
    let q2_max = b2.terms.keys().map(|&(_, q)| q).max().unwrap_or(0);
    let kmax = p1_max.min(q2_max);
    let mut total = PhasePoly::zero(d);
    for k in 0..=kmax {
        let betas = crate::tensor::enumerate_multi_indices(d, k)?;
        let mut ck = PhasePoly::zero(d);
        for beta in &betas {
            // (k!/beta!) d_z^beta f1 * d_zbar^beta f2
            let mut g1 = f1.clone();
            let mut g2 = f2.clone();
            for m in 0..d {
                for _ in 0..beta.counts[m] {
                    g1 = g1.d_z(m);
                    g2 = g2.d_zbar(m);
                }
            }
            if g1.terms.is_empty() || g2.terms.is_empty() {
                continue;
            }
            let w = (ln_factorial(k) - beta.ln_factorial()).exp();
            ck.add_poly(&g1.mul(&g2), cr(w));
        }
        let scale = eps.powi(k as i32) / ln_factorial(k).exp();
        total.add_poly(&ck, cr(scale));
    }
    poly_to_symbol(&total)
}

/// Symbol of `b(. + u)` through the Taylor expansion: the `(k, j)` term
/// carries the kernel `(1/(j! k!)) dbar^j d^k b(u)`.
pub fn translate_symbol(b: &PolySymbol, u: &[C64]) -> Result<PolySymbol> {
    let p_max = b.terms.keys().map(|&(p, _)| p).max().unwrap_or(0);
    let q_max = b.terms.keys().map(|&(_, q)| q).max().unwrap_or(0);
    let mut out = PolySymbol::zero(b.d);
    for k in 0..=p_max {
        for j in 0..=q_max {
            let kern = derive_symbol(b, u, k, j)?;
            if kern.iter().all(|v| *v == cr(0.0)) {
                continue;
            }
            let w = (-(ln_factorial(j) + ln_factorial(k))).exp();
            out.add_term(k, j, &kern, cr(w));
        }
    }
    Ok(out.pruned())
}

/// Symbol of `b(e^{-itA} .)`: kernels conjugated by the sector lifts of
/// `e^{+-itA}`.
pub fn symbol_free_evolved(b: &PolySymbol, ms: &ModeSpace, t: f64) -> Result<PolySymbol> {
    let u_fwd = ms.exp_ita(t);
    let u_bwd = ms.exp_ita(-t);
    let mut out = PolySymbol::zero(b.d);
    for (&(p, q), kern) in &b.terms {
        let lq = crate::tensor::sym_power_matrix(&u_fwd, q)?;
        let lp = crate::tensor::sym_power_matrix(&u_bwd, p)?;
        let newk = lq * kern * lp;
        out.add_term(p, q, &newk, cr(1.0));
    }
    Ok(out)
}

// ---------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct TermJson {
    p: usize,
    q: usize,
    rows: usize,
    cols: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SymbolJson {
    d: usize,
    terms: Vec<TermJson>,
}

/// Serialize to the documented JSON form; kernel entries row-major.
pub fn symbol_to_json(b: &PolySymbol) -> Result<String> {
    let mut terms = Vec::new();
    for (&(p, q), k) in &b.terms {
        let mut re = Vec::with_capacity(k.len());
        let mut im = Vec::with_capacity(k.len());
        for i in 0..k.nrows() {
            for j in 0..k.ncols() {
                re.push(k[(i, j)].re);
                im.push(k[(i, j)].im);
            }
        }
        terms.push(TermJson { p, q, rows: k.nrows(), cols: k.ncols(), re, im });
    }
    Ok(serde_json::to_string(&SymbolJson { d: b.d, terms })?)
}

pub fn symbol_from_json(s: &str) -> Result<PolySymbol> {
    let parsed: SymbolJson = serde_json::from_str(s)?;
    let mut out = PolySymbol::zero(parsed.d);
    for t in parsed.terms {
        if t.re.len() != t.rows * t.cols || t.im.len() != t.rows * t.cols {
            return Err(Error::Shape("kernel entry count mismatch in JSON".into()));
        }
        let mut k = CMat::zeros(t.rows, t.cols);
        for i in 0..t.rows {
            for j in 0..t.cols {
                k[(i, j)] = C64::new(t.re[i * t.cols + j], t.im[i * t.cols + j]);
            }
        }
        out.add_term(t.p, t.q, &k, cr(1.0));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{build_basis, dgamma_op, field_op, max_dev_on_sectors, number_op, weyl_op};
    use crate::linalg::{c, max_abs, I};
    use crate::tensor::sym_tensor_power;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn space(d: usize) -> Arc<ModeSpace> {
        let mut a = CMat::zeros(d, d);
        for i in 0..d {
            a[(i, i)] = cr(1.0 + 0.25 * i as f64);
        }
        Arc::new(ModeSpace::new(a, 1.0, Conjugation::Componentwise).unwrap())
    }

    fn rand_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<C64> {
        (0..d).map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect()
    }

    fn rand_kernel(rng: &mut ChaCha8Rng, d: usize, p: usize, q: usize) -> CMat {
        let rows = crate::tensor::sector_dim(d, q).unwrap();
        let cols = crate::tensor::sector_dim(d, p).unwrap();
        CMat::from_fn(rows, cols, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
    }

    fn bra_symbol(u: &[C64]) -> PolySymbol {
        symbol_bra(u).unwrap()
    }

    fn ket_symbol(u: &[C64]) -> PolySymbol {
        symbol_ket(u).unwrap()
    }

    #[test]
    fn potential_symbols_match_hand_formulas() {
        let ms = space(2);
        // V^(0) = c only: constant symbol
        let v0 = SymTensor::from_coeffs(2, 0, vec![cr(1.7)]).unwrap();
        let series = PotentialSeries::new(ms.clone(), vec![v0], None).unwrap();
        let sym = symbol_from_potential(&series).unwrap();
        let z = vec![c(0.3, 0.2), c(-0.1, 0.4)];
        assert!((eval_symbol(&sym, &z).unwrap() - cr(1.7)).norm() < 1e-14);

        // V^(1) = v, componentwise: F(z) = 2 Re <z, v> at z = e1
        let v: Vec<C64> = vec![cr(0.4), cr(-0.9)];
        let v1 = sym_tensor_power(&v, 1).unwrap();
        let series = PotentialSeries::new(ms.clone(), vec![SymTensor::zero(2, 0).unwrap(), v1], None).unwrap();
        let sym = symbol_from_potential(&series).unwrap();
        let e1 = vec![cr(1.0), cr(0.0)];
        let got = eval_symbol(&sym, &e1).unwrap();
        let ip: C64 = e1.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
        assert!((got - cr(2.0 * ip.re)).norm() < 1e-13);

        // d=1, V^(2) only: F(z) = V (z^2 + 2|z|^2 + zbar^2) / sqrt(2)
        let ms1 = space(1);
        let vval = 0.8;
        let v2 = SymTensor::from_coeffs(1, 2, vec![cr(vval)]).unwrap();
        let series = PotentialSeries::new(
            ms1,
            vec![SymTensor::zero(1, 0).unwrap(), SymTensor::zero(1, 1).unwrap(), v2],
            None,
        )
        .unwrap();
        let sym = symbol_from_potential(&series).unwrap();
        let z = vec![c(0.3, -0.5)];
        let zz = z[0];
        let expect = (zz * zz + cr(2.0 * zz.norm_sqr()) + zz.conj() * zz.conj()) * cr(vval / 2.0f64.sqrt());
        let got = eval_symbol(&sym, &z).unwrap();
        assert!((got - expect).norm() < 1e-13, "got {got} expect {expect}");
    }

    #[test]
    fn potential_rejects_asymmetric_tensor() {
        let ms = space(1);
        let v1 = SymTensor::from_coeffs(1, 1, vec![c(0.4, 0.3)]).unwrap();
        let err = PotentialSeries::new(ms, vec![SymTensor::zero(1, 0).unwrap(), v1], None);
        assert!(matches!(err, Err(Error::InvalidPotential(_))));
    }

    #[test]
    fn potential_symbol_agrees_with_direct_evaluation() {
        // 50 random points: F_V(z) = sum_j <(z+cz)^{(x)j}/sqrt(j!), V^(j)>
        let ms = space(2);
        let mut r = ChaCha8Rng::seed_from_u64(41);
        let mut tensors = Vec::new();
        for j in 0..=3usize {
            let dim = crate::tensor::sector_dim(2, j).unwrap();
            let coeffs: Vec<C64> = (0..dim).map(|_| cr(r.gen::<f64>() - 0.5)).collect();
            tensors.push(SymTensor::from_coeffs(2, j, coeffs).unwrap());
        }
        let series = PotentialSeries::new(ms.clone(), tensors.clone(), None).unwrap();
        let sym = symbol_from_potential(&series).unwrap();
        for _ in 0..50 {
            let z = rand_vec(&mut r, 2);
            let via_symbol = eval_symbol(&sym, &z).unwrap();
            let cz = ms.conj_vec(&z);
            let y: Vec<C64> = z.iter().zip(&cz).map(|(a, b)| a + b).collect();
            let mut direct = cr(0.0);
            for (j, t) in tensors.iter().enumerate() {
                let yj = sym_tensor_power(&y, j).unwrap();
                direct += yj.inner(t) * cr((-0.5 * ln_factorial(j)).exp());
            }
            assert!((via_symbol - direct).norm() < 1e-11, "dev {}", (via_symbol - direct).norm());
        }
    }

    #[test]
    fn derivative_of_linear_symbol() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let u = rand_vec(&mut r, 2);
        let b = bra_symbol(&u);
        let z = rand_vec(&mut r, 2);
        // d b = <u, .> constant in z; dbar b = 0
        let dk = derive_symbol(&b, &z, 1, 0).unwrap();
        for m in 0..2 {
            let pos = mode_position(2, m).unwrap();
            assert!((dk[(0, pos)] - u[m].conj()).norm() < 1e-14);
        }
        let dbar = derive_symbol(&b, &z, 0, 1).unwrap();
        assert!(max_abs(&dbar) < 1e-15);
        // out-of-range orders give zero kernels, not errors
        let over = derive_symbol(&b, &z, 2, 0).unwrap();
        assert!(max_abs(&over) < 1e-15);
    }

    #[test]
    fn mixed_derivative_matches_finite_differences() {
        // b(z) = |z|^4 on d=1: dbar d b(z) = 4 |z|^2 at z = 0.7
        let k = CMat::from_element(1, 1, cr(1.0));
        let b = PolySymbol::monomial(1, 2, 2, k).unwrap();
        let z = vec![cr(0.7)];
        let kern = derive_symbol(&b, &z, 1, 1).unwrap();
        assert!((kern[(0, 0)] - cr(4.0 * 0.49)).norm() < 1e-12);
        // FD oracle: dzbar dz f = (f_xx + f_yy)/4 for real f
        let f = |x: f64, y: f64| eval_symbol(&b, &[c(x, y)]).unwrap().re;
        let h = 1e-5;
        let (x, y) = (0.7, 0.0);
        let fxx = (f(x + h, y) - 2.0 * f(x, y) + f(x - h, y)) / (h * h);
        let fyy = (f(x, y + h) - 2.0 * f(x, y) + f(x, y - h)) / (h * h);
        let fd = (fxx + fyy) / 4.0;
        assert!((kern[(0, 0)].re - fd).abs() < 1e-6);
    }

    #[test]
    fn taylor_reconstruction_for_random_symbol() {
        let d = 2;
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let b = PolySymbol::monomial(d, 2, 2, rand_kernel(&mut r, d, 2, 2)).unwrap();
        for _ in 0..5 {
            let z = rand_vec(&mut r, d);
            let h = rand_vec(&mut r, d);
            let zh: Vec<C64> = z.iter().zip(&h).map(|(a, b)| a + b).collect();
            let direct = eval_symbol(&b, &zh).unwrap();
            let mut acc = cr(0.0);
            for j in 0..=2usize {
                for k in 0..=2usize {
                    let kern = derive_symbol(&b, &z, k, j).unwrap();
                    let hk = sym_tensor_power(&h, k).unwrap();
                    let hj = sym_tensor_power(&h, j).unwrap();
                    let mut pair = cr(0.0);
                    for (ia, ca) in hj.coeffs.iter().enumerate() {
                        for (ib, cb) in hk.coeffs.iter().enumerate() {
                            pair += ca.conj() * kern[(ia, ib)] * cb;
                        }
                    }
                    acc += pair * cr((-(ln_factorial(j) + ln_factorial(k))).exp());
                }
            }
            assert!((acc - direct).norm() < 1e-10, "taylor dev {}", (acc - direct).norm());
        }
    }

    #[test]
    fn quantize_reproduces_ladder_table() {
        let ms = space(2);
        let basis = build_basis((*ms).clone(), 5).unwrap();
        let eps = 0.45;
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let u = rand_vec(&mut r, 2);
        // <u,z> -> a_eps(u)
        let a = ladder_op(&basis, &u, eps, Ladder::Annihilation).unwrap();
        let qa = quantize(&bra_symbol(&u), eps, &basis).unwrap();
        assert!(max_abs(&(&qa.mat - &a.mat)) < 1e-12);
        // <z,u> -> a*_eps(u)
        let cre = ladder_op(&basis, &u, eps, Ladder::Creation).unwrap();
        let qc = quantize(&ket_symbol(&u), eps, &basis).unwrap();
        assert!(max_abs(&(&qc.mat - &cre.mat)) < 1e-12);
        // identity kernel (1,1) -> N_eps
        let idk = CMat::identity(2, 2);
        let qn = quantize(&PolySymbol::monomial(2, 1, 1, idk).unwrap(), eps, &basis).unwrap();
        let n = number_op(&basis, eps).unwrap();
        assert!(max_abs(&(&qn.mat - &n.mat)) < 1e-12);
        // B kernel (1,1) -> dGamma_eps(B)
        let mut bmat = CMat::zeros(2, 2);
        bmat[(0, 0)] = cr(0.3);
        bmat[(0, 1)] = c(0.2, -0.1);
        bmat[(1, 0)] = c(0.2, 0.1);
        bmat[(1, 1)] = cr(-0.6);
        let qdg = quantize(&symbol_one_particle(&bmat).unwrap(), eps, &basis).unwrap();
        let dg = dgamma_op(&basis, &bmat, eps).unwrap();
        assert!(max_abs(&(&qdg.mat - &dg.mat)) < 1e-12);
        // sqrt(2) Re<u,z> -> Phi_eps(u)
        let mut field_sym = bra_symbol(&u).scaled(cr(1.0 / 2.0f64.sqrt()));
        field_sym.add_scaled(&ket_symbol(&u), cr(1.0 / 2.0f64.sqrt()));
        let qf = quantize(&field_sym, eps, &basis).unwrap();
        let phi = field_op(&basis, &u, eps).unwrap();
        assert!(max_abs(&(&qf.mat - &phi.mat)) < 1e-12);
    }

    #[test]
    fn quantize_two_paths_agree() {
        // random kernels across bidegrees: sector formula vs ladder products
        let ms = space(2);
        let basis = build_basis((*ms).clone(), 6).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(4);
        for &(p, q) in &[(2usize, 1usize), (1, 2), (2, 2), (3, 0), (0, 3), (2, 0)] {
            let b = PolySymbol::monomial(2, p, q, rand_kernel(&mut r, 2, p, q)).unwrap();
            let w1 = quantize(&b, 0.6, &basis).unwrap();
            let w2 = quantize_ladder(&b, 0.6, &basis).unwrap();
            assert!(max_abs(&(&w1.mat - &w2.mat)) < 1e-11, "(p,q)=({p},{q})");
        }
    }

    #[test]
    fn quantize_homogeneity_and_adjoint() {
        let ms = space(2);
        let basis = build_basis((*ms).clone(), 6).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let b = PolySymbol::monomial(2, 2, 1, rand_kernel(&mut r, 2, 2, 1)).unwrap();
        let eps = 0.37;
        let w_eps = quantize(&b, eps, &basis).unwrap();
        let w_one = quantize(&b, 1.0, &basis).unwrap();
        let scale = eps.powf(1.5);
        assert!(max_abs(&(&w_eps.mat - &w_one.mat * cr(scale))) < 1e-13);
        // adjoint rule on the guard band
        let wc = quantize(&b.conj(), eps, &basis).unwrap();
        let dev = max_dev_on_sectors(&w_eps.mat.adjoint(), &wc.mat, &basis, basis.max_total - 3);
        assert!(dev < 1e-12);
    }

    #[test]
    fn quantize_is_linear() {
        let ms = space(2);
        let basis = build_basis((*ms).clone(), 4).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(6);
        let b1 = PolySymbol::monomial(2, 1, 1, rand_kernel(&mut r, 2, 1, 1)).unwrap();
        let b2 = PolySymbol::monomial(2, 2, 0, rand_kernel(&mut r, 2, 2, 0)).unwrap();
        let s = c(0.3, -0.8);
        let mut combo = b1.clone();
        combo.add_scaled(&b2, s);
        let lhs = quantize(&combo, 0.5, &basis).unwrap();
        let rhs = &quantize(&b1, 0.5, &basis).unwrap().mat + &quantize(&b2, 0.5, &basis).unwrap().mat * s;
        assert!(max_abs(&(&lhs.mat - &rhs)) < 1e-13);
    }

    #[test]
    fn compose_ccr_example() {
        // b1 = <u,z> (-> a), b2 = <z,u> (-> a*): b1 o b2 = |<u,z>|^2 + eps|u|^2
        let mut r = ChaCha8Rng::seed_from_u64(7);
        let u = rand_vec(&mut r, 2);
        let eps = 0.41;
        let comp = compose_symbols(&bra_symbol(&u), &ket_symbol(&u), eps).unwrap();
        let n2: f64 = u.iter().map(|z| z.norm_sqr()).sum();
        for _ in 0..10 {
            let z = rand_vec(&mut r, 2);
            let uz: C64 = u.iter().zip(&z).map(|(a, b)| a.conj() * b).sum();
            let expect = cr(uz.norm_sqr() + eps * n2);
            let got = eval_symbol(&comp, &z).unwrap();
            assert!((got - expect).norm() < 1e-12);
        }
        // compose with a constant is scalar multiplication
        let cst = PolySymbol::constant(2, c(0.7, -0.1));
        let comp = compose_symbols(&cst, &bra_symbol(&u), eps).unwrap();
        let z = rand_vec(&mut r, 2);
        let got = eval_symbol(&comp, &z).unwrap();
        let uz: C64 = u.iter().zip(&z).map(|(a, b)| a.conj() * b).sum();
        assert!((got - c(0.7, -0.1) * uz).norm() < 1e-13);
    }

    #[test]
    fn compose_matches_operator_product() {
        let ms = space(2);
        let basis = build_basis((*ms).clone(), 8).unwrap();
        let eps = 0.52;
        let mut r = ChaCha8Rng::seed_from_u64(8);
        let pairs = [((1usize, 1usize), (2usize, 0usize)), ((2, 1), (1, 1)), ((1, 2), (2, 0))];
        for &((p1, q1), (p2, q2)) in &pairs {
            let b1 = PolySymbol::monomial(2, p1, q1, rand_kernel(&mut r, 2, p1, q1)).unwrap();
            let b2 = PolySymbol::monomial(2, p2, q2, rand_kernel(&mut r, 2, p2, q2)).unwrap();
            let comp = compose_symbols(&b1, &b2, eps).unwrap();
            let lhs = quantize(&comp, eps, &basis).unwrap();
            let rhs = &quantize(&b1, eps, &basis).unwrap().mat * &quantize(&b2, eps, &basis).unwrap().mat;
            let guard = basis.max_total - (p1 + q1 + p2 + q2);
            let dev = max_dev_on_sectors(&lhs.mat, &rhs, &basis, guard);
            assert!(dev < 1e-10, "compose oracle dev {dev:.3e} for ({p1},{q1})x({p2},{q2})");
        }
    }

    #[test]
    fn compose_associativity_via_matrices() {
        let ms = space(2);
        let basis = build_basis((*ms).clone(), 8).unwrap();
        let eps = 0.5;
        let mut r = ChaCha8Rng::seed_from_u64(9);
        let b1 = PolySymbol::monomial(2, 1, 0, rand_kernel(&mut r, 2, 1, 0)).unwrap();
        let b2 = PolySymbol::monomial(2, 1, 1, rand_kernel(&mut r, 2, 1, 1)).unwrap();
        let b3 = PolySymbol::monomial(2, 0, 1, rand_kernel(&mut r, 2, 0, 1)).unwrap();
        let left = compose_symbols(&compose_symbols(&b1, &b2, eps).unwrap(), &b3, eps).unwrap();
        let right = compose_symbols(&b1, &compose_symbols(&b2, &b3, eps).unwrap(), eps).unwrap();
        let lm = quantize(&left, eps, &basis).unwrap();
        let rm = quantize(&right, eps, &basis).unwrap();
        let dev = max_dev_on_sectors(&lm.mat, &rm.mat, &basis, basis.max_total - 4);
        assert!(dev < 1e-9);
    }

    #[test]
    fn translation_examples() {
        let mut r = ChaCha8Rng::seed_from_u64(10);
        // constants unchanged
        let cst = PolySymbol::constant(2, c(1.1, -0.2));
        let u = rand_vec(&mut r, 2);
        let t = translate_symbol(&cst, &u).unwrap();
        let z = rand_vec(&mut r, 2);
        assert!((eval_symbol(&t, &z).unwrap() - c(1.1, -0.2)).norm() < 1e-14);
        // linear shift: <u0, z> -> <u0, z> + <u0, u>
        let u0 = rand_vec(&mut r, 2);
        let lin = bra_symbol(&u0);
        let t = translate_symbol(&lin, &u).unwrap();
        let got = eval_symbol(&t, &z).unwrap();
        let expect: C64 = u0.iter().zip(z.iter().zip(&u)).map(|(a, (b, w))| a.conj() * (b + w)).sum();
        assert!((got - expect).norm() < 1e-13);
        // d=1 quartic translated by 0.3: pointwise match at 30 random z
        let k = CMat::from_element(1, 1, cr(0.9));
        let quartic = PolySymbol::monomial(1, 2, 2, k).unwrap();
        let shift = vec![cr(0.3)];
        let t = translate_symbol(&quartic, &shift).unwrap();
        for _ in 0..30 {
            let z = rand_vec(&mut r, 1);
            let zs = vec![z[0] + shift[0]];
            let expect = eval_symbol(&quartic, &zs).unwrap();
            let got = eval_symbol(&t, &z).unwrap();
            assert!((got - expect).norm() < 1e-11);
        }
    }

    #[test]
    fn translation_weyl_conjugation() {
        // W_eps(-i sqrt2 u/eps)^* Wick_eps(b) W_eps(...) = Wick_eps(b(.+u))
        let ms = space(1);
        let basis = build_basis((*ms).clone(), 30).unwrap();
        let eps = 0.3;
        let u = vec![c(0.25, -0.15)];
        let k = CMat::from_element(1, 1, cr(0.8));
        let b = PolySymbol::monomial(1, 1, 1, k).unwrap();
        let w_arg: Vec<C64> = u.iter().map(|z| z * (-I) * cr(2.0f64.sqrt() / eps)).collect();
        let w = weyl_op(&basis, &w_arg, eps).unwrap();
        let wick = quantize(&b, eps, &basis).unwrap();
        let lhs = w.mat.adjoint() * &wick.mat * &w.mat;
        let rhs = quantize(&translate_symbol(&b, &u).unwrap(), eps, &basis).unwrap();
        let dev = max_dev_on_sectors(&lhs, &rhs.mat, &basis, 6);
        assert!(dev < 1e-7, "translation conjugation dev {dev:.3e}");
    }

    #[test]
    fn free_evolution_covariance() {
        // e^{it dG_1(A)} Wick_eps(b) e^{-it dG_1(A)} = Wick_eps(b(e^{-itA} .))
        let ms = space(2);
        let basis = build_basis((*ms).clone(), 7).unwrap();
        let eps = 0.6;
        let t = 0.75;
        let mut r = ChaCha8Rng::seed_from_u64(11);
        let b = PolySymbol::monomial(2, 2, 1, rand_kernel(&mut r, 2, 2, 1)).unwrap();
        let evo = crate::fock::free_evolution(&basis, t).unwrap();
        let wick = quantize(&b, eps, &basis).unwrap();
        let lhs = &evo.mat * &wick.mat * evo.mat.adjoint();
        let evolved = symbol_free_evolved(&b, &ms, t).unwrap();
        let rhs = quantize(&evolved, eps, &basis).unwrap();
        let dev = max_dev_on_sectors(&lhs, &rhs.mat, &basis, basis.max_total - 3);
        assert!(dev < 1e-9, "free covariance dev {dev:.3e}");
        // and the scalar values agree pointwise
        let z = rand_vec(&mut r, 2);
        let back = ms.apply_exp_ita(-t, &z);
        let lhs_val = eval_symbol(&evolved, &z).unwrap();
        let rhs_val = eval_symbol(&b, &back).unwrap();
        assert!((lhs_val - rhs_val).norm() < 1e-12);
    }

    #[test]
    fn number_estimates_with_frozen_constant() {
        // |(N+1)^{-a/2} Wick_eps(b) (N+1)^{-b/2}| <= C eps^{(p+q)/2} |K|
        // with a + b = p + q, across an eps grid
        let ms = space(2);
        let basis = build_basis((*ms).clone(), 8).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(12);
        for &(p, q) in &[(1usize, 1usize), (2, 1), (2, 2)] {
            let b = PolySymbol::monomial(2, p, q, rand_kernel(&mut r, 2, p, q)).unwrap();
            let kn = crate::linalg::op_norm(&b.terms[&(p, q)]);
            for &eps in &[1.0, 0.5, 0.1, 0.01] {
                let w = quantize(&b, eps, &basis).unwrap();
                let alpha = p as f64;
                let beta = q as f64;
                let lhs = crate::fock::number_shift_pow(&basis, -alpha / 2.0).mat
                    * &w.mat
                    * crate::fock::number_shift_pow(&basis, -beta / 2.0).mat;
                let norm = crate::linalg::op_norm(&lhs);
                let bound = crate::config::NUMBER_ESTIMATE_C * eps.powf((p + q) as f64 / 2.0) * kn;
                assert!(norm <= bound, "(p,q)=({p},{q}) eps={eps}: {norm:.3e} > {bound:.3e}");
            }
        }
    }

    #[test]
    fn serialization_round_trip_is_bit_stable() {
        let mut r = ChaCha8Rng::seed_from_u64(13);
        let mut b = PolySymbol::monomial(2, 2, 1, rand_kernel(&mut r, 2, 2, 1)).unwrap();
        b.add_scaled(&PolySymbol::constant(2, c(0.123456789012345, -7.0 / 3.0)), cr(1.0));
        let s1 = symbol_to_json(&b).unwrap();
        let b2 = symbol_from_json(&s1).unwrap();
        let s2 = symbol_to_json(&b2).unwrap();
        assert_eq!(s1, s2);
        for (k1, k2) in b.terms.values().zip(b2.terms.values()) {
            assert_eq!(k1, k2);
        }
    }

    proptest::proptest! {
        #[test]
        fn prop_serialization_round_trip(parts in proptest::collection::vec(-1.0f64..1.0, 12)) {
            let k = CMat::from_fn(3, 2, |i, j| c(parts[2 * (2 * i + j)], parts[2 * (2 * i + j) + 1]));
            let b = PolySymbol::monomial(2, 1, 2, k).unwrap();
            let s1 = symbol_to_json(&b).unwrap();
            let b2 = symbol_from_json(&s1).unwrap();
            proptest::prop_assert_eq!(s1, symbol_to_json(&b2).unwrap());
        }

        #[test]
        fn prop_translate_by_zero_is_identity(parts in proptest::collection::vec(-1.0f64..1.0, 8)) {
            let k = CMat::from_fn(2, 2, |i, j| c(parts[2 * (2 * i + j)], parts[2 * (2 * i + j) + 1]));
            let b = PolySymbol::monomial(2, 1, 1, k).unwrap();
            let t = translate_symbol(&b, &[cr(0.0), cr(0.0)]).unwrap();
            let z = vec![c(parts[0], parts[3]), c(parts[5], parts[6])];
            let dev = (eval_symbol(&t, &z).unwrap() - eval_symbol(&b, &z).unwrap()).norm();
            proptest::prop_assert!(dev < 1e-12);
        }
    }

    #[test]
    fn phase_poly_round_trip() {
        let mut r = ChaCha8Rng::seed_from_u64(14);
        let mut b = PolySymbol::monomial(2, 2, 2, rand_kernel(&mut r, 2, 2, 2)).unwrap();
        b.add_scaled(&PolySymbol::monomial(2, 1, 0, rand_kernel(&mut r, 2, 1, 0)).unwrap(), c(0.3, 0.1));
        let f = symbol_to_poly(&b).unwrap();
        let b2 = poly_to_symbol(&f).unwrap();
        for _ in 0..10 {
            let z = rand_vec(&mut r, 2);
            let v1 = eval_symbol(&b, &z).unwrap();
            let v2 = eval_symbol(&b2, &z).unwrap();
            let v3 = f.eval(&z);
            assert!((v1 - v2).norm() < 1e-12);
            assert!((v1 - v3).norm() < 1e-12);
        }
    }

    #[test]
    fn substitution_matches_direct_evaluation() {
        let mut r = ChaCha8Rng::seed_from_u64(15);
        let d = 2;
        let b = PolySymbol::monomial(d, 2, 1, rand_kernel(&mut r, d, 2, 1)).unwrap();
        let f = symbol_to_poly(&b).unwrap();
        let l = CMat::from_fn(d, d, |_, _| c(r.gen::<f64>() - 0.5, r.gen::<f64>() - 0.5));
        let aa = CMat::from_fn(d, d, |_, _| c(r.gen::<f64>() - 0.5, r.gen::<f64>() - 0.5));
        let shift = rand_vec(&mut r, d);
        let sub = f.substitute_real_linear(&l, &aa, Some(&shift));
        for _ in 0..10 {
            let z = rand_vec(&mut r, d);
            let zc: Vec<C64> = z.iter().map(|v| v.conj()).collect();
            let mapped: Vec<C64> = (0..d)
                .map(|i| {
                    (0..d).map(|j| l[(i, j)] * z[j] + aa[(i, j)] * zc[j]).sum::<C64>() + shift[i]
                })
                .collect();
            let lhs = sub.eval(&z);
            let rhs = f.eval(&mapped);
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }
}
