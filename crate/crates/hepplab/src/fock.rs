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

//! Truncated bosonic Fock space over a [`ModeSpace`].
//!
//! The occupation basis keeps every sector up to a total particle cutoff
//! `M`; operators are compressed as `P Op P`, which keeps Hermitian
//! operators Hermitian. Algebraic identities involving `k` creation
//! orders hold exactly on the guard band of sectors `<= M - k`.

use crate::config::DEFAULT_SIZE_CAP;
use crate::error::{Error, Result};
use crate::linalg::{cr, expi_hermitian, CMat, CVec, C64, I};
use crate::tensor::{ModeSpace, MultiIndex, SectorIndex};
use std::sync::Arc;

/// Occupation basis of all sectors `n <= M`. The vacuum is flat index 0.
#[derive(Debug)]
pub struct FockBasis {
    pub mode_space: ModeSpace,
    pub max_total: usize,
    pub sectors: Vec<SectorIndex>,
    pub offsets: Vec<usize>,
    pub dim: usize,
}

/// Which ladder operator to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    Creation,
    Annihilation,
}

pub fn build_basis(mode_space: ModeSpace, max_total: usize) -> Result<Arc<FockBasis>> {
    let d = mode_space.d;
    let mut sectors = Vec::with_capacity(max_total + 1);
    let mut offsets = Vec::with_capacity(max_total + 1);
    let mut dim = 0usize;
    for n in 0..=max_total {
        let s = SectorIndex::new(d, n)?;
        offsets.push(dim);
        dim += s.dim();
        if dim > DEFAULT_SIZE_CAP {
            return Err(Error::SizeCap { d, n, size: dim, cap: DEFAULT_SIZE_CAP });
        }
        sectors.push(s);
    }
    Ok(Arc::new(FockBasis { mode_space, max_total, sectors, offsets, dim }))
}

impl FockBasis {
    pub fn flat(&self, n: usize, mi: &MultiIndex) -> Option<usize> {
        if n > self.max_total {
            return None;
        }
        self.sectors[n].position(mi).map(|k| self.offsets[n] + k)
    }

    /// Sector of a flat index.
    pub fn sector_of(&self, flat: usize) -> usize {
        match self.offsets.binary_search(&flat) {
            Ok(n) => n,
            Err(n) => n - 1,
        }
    }

    pub fn sector_range(&self, n: usize) -> std::ops::Range<usize> {
        let start = self.offsets[n];
        let end = if n < self.max_total { self.offsets[n + 1] } else { self.dim };
        start..end
    }

    pub fn vacuum(self: &Arc<Self>) -> FockVector {
        let mut coeffs = CVec::zeros(self.dim);
        coeffs[0] = cr(1.0);
        FockVector { basis: self.clone(), coeffs }
    }

    pub fn same_shape(&self, other: &FockBasis) -> bool {
        self.max_total == other.max_total && self.mode_space.d == other.mode_space.d
    }
}

/// State vector on the truncated occupation basis.
#[derive(Debug, Clone)]
pub struct FockVector {
    pub basis: Arc<FockBasis>,
    pub coeffs: CVec,
}

impl FockVector {
    pub fn zero(basis: &Arc<FockBasis>) -> Self {
        Self { basis: basis.clone(), coeffs: CVec::zeros(basis.dim) }
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.norm()
    }

    pub fn inner(&self, other: &FockVector) -> C64 {
        self.coeffs.dotc(&other.coeffs)
    }

    /// Norm squared carried by sector `n`.
    pub fn sector_mass(&self, n: usize) -> f64 {
        self.basis.sector_range(n).map(|i| self.coeffs[i].norm_sqr()).sum()
    }

    /// Zero out all sectors above `nmax`.
    pub fn projected(&self, nmax: usize) -> FockVector {
        let mut out = self.clone();
        for i in 0..self.basis.dim {
            if self.basis.sector_of(i) > nmax {
                out.coeffs[i] = cr(0.0);
            }
        }
        out
    }
}

/// Dense operator on the truncated space with optional verified flags.
#[derive(Debug, Clone)]
pub struct FockOperator {
    pub basis: Arc<FockBasis>,
    pub mat: CMat,
    pub hermitian: bool,
    pub unitary: bool,
}

impl FockOperator {
    pub fn new(basis: Arc<FockBasis>, mat: CMat, hermitian: bool, unitary: bool) -> Result<Self> {
        if mat.nrows() != basis.dim || mat.ncols() != basis.dim {
            return Err(Error::Shape(format!(
                "operator is {}x{}, basis dim {}",
                mat.nrows(),
                mat.ncols(),
                basis.dim
            )));
        }
        let tol = 1e-10 * (1.0 + crate::linalg::max_abs(&mat));
        if hermitian && crate::linalg::max_abs(&(&mat - mat.adjoint())) > tol {
            return Err(Error::Numerical("hermitian flag set on a non-Hermitian matrix".into()));
        }
        if unitary {
            let dev = crate::linalg::max_abs(&(mat.adjoint() * &mat - CMat::identity(mat.nrows(), mat.ncols())));
            if dev > 1e-10 * (basis.dim as f64).sqrt() {
                return Err(Error::Numerical(format!("unitary flag set but U*U - 1 deviates by {dev:.3e}")));
            }
        }
        Ok(Self { basis, mat, hermitian, unitary })
    }

    pub fn apply(&self, v: &FockVector) -> FockVector {
        FockVector { basis: v.basis.clone(), coeffs: &self.mat * &v.coeffs }
    }

    pub fn adjoint(&self) -> FockOperator {
        FockOperator {
            basis: self.basis.clone(),
            mat: self.mat.adjoint(),
            hermitian: self.hermitian,
            unitary: self.unitary,
        }
    }
}

/// Creation or annihilation operator for mode vector `u` at scale `eps`.
///
/// Creation acts on the occupation basis as
/// `|a> -> sum_m u_m sqrt(eps (a_m + 1)) |a + e_m>`, rows above the cutoff
/// dropped; annihilation is its adjoint on the truncation, antilinear in
/// `u`.
pub fn ladder_op(basis: &Arc<FockBasis>, u: &[C64], eps: f64, kind: Ladder) -> Result<FockOperator> {
    let d = basis.mode_space.d;
    if u.len() != d {
        return Err(Error::Shape(format!("mode vector length {} vs d = {}", u.len(), d)));
    }
    let mut mat = CMat::zeros(basis.dim, basis.dim);
    for n in 0..basis.max_total {
        let src = &basis.sectors[n];
        let dst = &basis.sectors[n + 1];
        let off_src = basis.offsets[n];
        let off_dst = basis.offsets[n + 1];
        for (k, mi) in src.mis.iter().enumerate() {
            for m in 0..d {
                if u[m] == cr(0.0) {
                    continue;
                }
                let mut up = mi.clone();
                up.counts[m] += 1;
                let kd = dst.position(&up).unwrap();
                let amp = (eps * up.counts[m] as f64).sqrt();
                mat[(off_dst + kd, off_src + k)] += u[m] * cr(amp);
            }
        }
    }
    let mat = match kind {
        Ladder::Creation => mat,
        Ladder::Annihilation => mat.adjoint(),
    };
    FockOperator::new(basis.clone(), mat, false, false)
}

/// Segal field operator `(a*(u) + a(u)) / sqrt(2)`.
pub fn field_op(basis: &Arc<FockBasis>, u: &[C64], eps: f64) -> Result<FockOperator> {
    let cre = ladder_op(basis, u, eps, Ladder::Creation)?;
    let mat = (&cre.mat + cre.mat.adjoint()) * cr(1.0 / 2.0f64.sqrt());
    FockOperator::new(basis.clone(), mat, true, false)
}

/// Weyl operator `exp(i Phi(u))` through the Hermitian spectrum of the
/// compressed field operator; exactly unitary as a matrix.
pub fn weyl_op(basis: &Arc<FockBasis>, u: &[C64], eps: f64) -> Result<FockOperator> {
    let phi = field_op(basis, u, eps)?;
    let mat = expi_hermitian(&phi.mat, 1.0)?;
    FockOperator::new(basis.clone(), mat, false, true)
}

/// Second quantization `dGamma_eps(B)`, block diagonal over sectors.
pub fn dgamma_op(basis: &Arc<FockBasis>, b: &CMat, eps: f64) -> Result<FockOperator> {
    let d = basis.mode_space.d;
    if b.nrows() != d || b.ncols() != d {
        return Err(Error::Shape(format!("B is {}x{}, expected {d}x{d}", b.nrows(), b.ncols())));
    }
    let mut mat = CMat::zeros(basis.dim, basis.dim);
    for n in 0..=basis.max_total {
        let sec = &basis.sectors[n];
        let off = basis.offsets[n];
        for (k, mi) in sec.mis.iter().enumerate() {
            for m in 0..d {
                if mi.counts[m] == 0 {
                    continue;
                }
                for mp in 0..d {
                    if b[(mp, m)] == cr(0.0) {
                        continue;
                    }
                    if mp == m {
                        mat[(off + k, off + k)] += b[(m, m)] * cr(eps * mi.counts[m] as f64);
                    } else {
                        let mut to = mi.clone();
                        to.counts[m] -= 1;
                        to.counts[mp] += 1;
                        let kd = sec.position(&to).unwrap();
                        let amp = (mi.counts[m] as f64 * to.counts[mp] as f64).sqrt();
                        mat[(off + kd, off + k)] += b[(mp, m)] * cr(eps * amp);
                    }
                }
            }
        }
    }
    let hermitian = crate::linalg::max_abs(&(b - b.adjoint())) < 1e-12;
    FockOperator::new(basis.clone(), mat, hermitian, false)
}

/// `N_eps = dGamma_eps(1)`: diagonal `eps * n` per sector.
pub fn number_op(basis: &Arc<FockBasis>, eps: f64) -> Result<FockOperator> {
    let mut mat = CMat::zeros(basis.dim, basis.dim);
    for n in 0..=basis.max_total {
        for i in basis.sector_range(n) {
            mat[(i, i)] = cr(eps * n as f64);
        }
    }
    FockOperator::new(basis.clone(), mat, true, false)
}

/// Diagonal `(N_1 + 1)^power`.
pub fn number_shift_pow(basis: &Arc<FockBasis>, power: f64) -> FockOperator {
    let mut mat = CMat::zeros(basis.dim, basis.dim);
    for n in 0..=basis.max_total {
        let v = ((n + 1) as f64).powf(power);
        for i in basis.sector_range(n) {
            mat[(i, i)] = cr(v);
        }
    }
    FockOperator { basis: basis.clone(), mat, hermitian: true, unitary: false }
}

/// Coherent state built from the explicit series
/// `e^{-|u|^2/(2 eps)} sum_n eps^{-n/2} u^{(x)n} / sqrt(n!)`, kept
/// unnormalized; the truncated mass `1 - |psi|^2` is returned alongside.
pub fn coherent_state(basis: &Arc<FockBasis>, u: &[C64], eps: f64) -> Result<(FockVector, f64)> {
    let d = basis.mode_space.d;
    if u.len() != d {
        return Err(Error::Shape(format!("mode vector length {} vs d = {}", u.len(), d)));
    }
    if eps <= 0.0 {
        return Err(Error::Shape("eps must be positive".into()));
    }
    let norm2: f64 = u.iter().map(|z| z.norm_sqr()).sum();
    let prefactor = (-norm2 / (2.0 * eps)).exp();
    let mut v = FockVector::zero(basis);
    for n in 0..=basis.max_total {
        let sec = &basis.sectors[n];
        let off = basis.offsets[n];
        let scale = eps.powf(-(n as f64) / 2.0) * prefactor;
        for (k, mi) in sec.mis.iter().enumerate() {
            // e^{-|u|^2/2eps} eps^{-n/2} u^a / sqrt(a!)
            let amp = mi.monomial(u) * cr(scale * (-0.5 * mi.ln_factorial()).exp());
            v.coeffs[off + k] = amp;
        }
    }
    let tail = (1.0 - v.coeffs.norm_squared()).max(0.0);
    Ok((v, tail))
}

/// Poisson tail mass `P[X > m]` for intensity `lambda`; the exact
/// coherent-state mass beyond sector `m`.
pub fn poisson_tail(lambda: f64, m: usize) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let mut kept = 0.0;
    for n in 0..=m {
        let ln_p = -lambda + n as f64 * lambda.ln() - crate::linalg::ln_factorial(n);
        kept += ln_p.exp();
    }
    (1.0 - kept).max(0.0)
}

/// Free evolution `exp(i (t/eps) dGamma_eps(A)) = exp(i t dGamma_1(A))`,
/// block diagonal over sectors and independent of `eps`.
pub fn free_evolution(basis: &Arc<FockBasis>, t: f64) -> Result<FockOperator> {
    let ms = &basis.mode_space;
    let mut mat = CMat::zeros(basis.dim, basis.dim);
    let diagonal = (0..ms.d).all(|i| (0..ms.d).all(|j| i == j || ms.a[(i, j)] == cr(0.0)));
    if diagonal {
        for n in 0..=basis.max_total {
            let sec = &basis.sectors[n];
            let off = basis.offsets[n];
            for (k, mi) in sec.mis.iter().enumerate() {
                let energy: f64 = mi.counts.iter().enumerate().map(|(m, &cnt)| cnt as f64 * ms.a[(m, m)].re).sum();
                mat[(off + k, off + k)] = (I * (t * energy)).exp();
            }
        }
    } else {
        // sector-wise lift of exp(itA)
        let u1 = ms.exp_ita(t);
        for n in 0..=basis.max_total {
            let block = crate::tensor::sym_power_matrix(&u1, n)?;
            let off = basis.offsets[n];
            for i in 0..block.nrows() {
                for j in 0..block.ncols() {
                    mat[(off + i, off + j)] = block[(i, j)];
                }
            }
        }
    }
    FockOperator::new(basis.clone(), mat, false, true)
}

/// Max deviation of `lhs - rhs` on columns supported in sectors `<= nmax`.
pub fn max_dev_on_sectors(lhs: &CMat, rhs: &CMat, basis: &FockBasis, nmax: usize) -> f64 {
    let mut dev: f64 = 0.0;
    let limit = basis.sector_range(nmax.min(basis.max_total)).end;
    for j in 0..limit {
        for i in 0..basis.dim {
            dev = dev.max((lhs[(i, j)] - rhs[(i, j)]).norm());
        }
    }
    dev
}

/// Embed a symmetric tensor into Fock sector `n`.
pub fn embed_sector(basis: &Arc<FockBasis>, t: &crate::tensor::SymTensor) -> Result<FockVector> {
    if t.n > basis.max_total || t.d != basis.mode_space.d {
        return Err(Error::Shape("tensor does not fit the basis".into()));
    }
    let mut v = FockVector::zero(basis);
    let off = basis.offsets[t.n];
    for (k, cval) in t.coeffs.iter().enumerate() {
        v.coeffs[off + k] = *cval;
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs};
    use crate::tensor::{sym_tensor_power, Conjugation, ModeSpace};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn space(d: usize) -> ModeSpace {
        let mut a = CMat::zeros(d, d);
        for i in 0..d {
            a[(i, i)] = cr(1.0 + 0.3 * i as f64);
        }
        ModeSpace::new(a, 1.0, Conjugation::Componentwise).unwrap()
    }

    fn rand_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<C64> {
        (0..d).map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect()
    }

    #[test]
    fn basis_dims() {
        assert_eq!(build_basis(space(1), 10).unwrap().dim, 11);
        assert_eq!(build_basis(space(2), 3).unwrap().dim, 10);
        assert_eq!(build_basis(space(3), 2).unwrap().dim, 10);
        let b = build_basis(space(2), 3).unwrap();
        let v = b.vacuum();
        assert_eq!(v.coeffs[0], cr(1.0));
        assert!((v.norm() - 1.0).abs() < 1e-15);
        for w in b.offsets.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn ladder_on_vacuum_and_back() {
        let basis = build_basis(space(2), 4).unwrap();
        let eps = 0.3;
        let e1 = vec![cr(1.0), cr(0.0)];
        let cre = ladder_op(&basis, &e1, eps, Ladder::Creation).unwrap();
        let v = cre.apply(&basis.vacuum());
        // sqrt(eps) e1 in sector 1
        let k = basis.flat(1, &MultiIndex::new(vec![1, 0])).unwrap();
        assert!((v.coeffs[k] - cr(eps.sqrt())).norm() < 1e-14);
        assert!((v.norm() - eps.sqrt()).abs() < 1e-14);
        let ann = ladder_op(&basis, &e1, eps, Ladder::Annihilation).unwrap();
        let back = ann.apply(&v);
        assert!((back.coeffs[0] - cr(eps)).norm() < 1e-14);
    }

    #[test]
    fn ladder_linearity_and_antilinearity() {
        let basis = build_basis(space(2), 3).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let u = rand_vec(&mut r, 2);
        let s = c(0.7, -0.4);
        let su: Vec<C64> = u.iter().map(|z| z * s).collect();
        let cre_u = ladder_op(&basis, &u, 0.5, Ladder::Creation).unwrap();
        let cre_su = ladder_op(&basis, &su, 0.5, Ladder::Creation).unwrap();
        assert!(max_abs(&(&cre_su.mat - &cre_u.mat * s)) < 1e-13);
        let ann_u = ladder_op(&basis, &u, 0.5, Ladder::Annihilation).unwrap();
        let ann_su = ladder_op(&basis, &su, 0.5, Ladder::Annihilation).unwrap();
        assert!(max_abs(&(&ann_su.mat - &ann_u.mat * s.conj())) < 1e-13);
    }

    #[test]
    fn ccr_on_guard_band() {
        let basis = build_basis(space(2), 6).unwrap();
        let eps = 0.37;
        let mut r = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let u = rand_vec(&mut r, 2);
            let v = rand_vec(&mut r, 2);
            let au = ladder_op(&basis, &u, eps, Ladder::Annihilation).unwrap();
            let av = ladder_op(&basis, &v, eps, Ladder::Annihilation).unwrap();
            let cu = ladder_op(&basis, &u, eps, Ladder::Creation).unwrap();
            let cv = ladder_op(&basis, &v, eps, Ladder::Creation).unwrap();
            let uv: C64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            // [a(u), a*(v)] = eps <u,v> on sectors <= M-1
            let comm = &au.mat * &cv.mat - &cv.mat * &au.mat;
            let expect = CMat::identity(basis.dim, basis.dim) * (uv * cr(eps));
            assert!(max_dev_on_sectors(&comm, &expect, &basis, basis.max_total - 1) < 1e-12);
            // [a,a] everywhere, [a*,a*] on sectors <= M-2
            let z = CMat::zeros(basis.dim, basis.dim);
            let caa = &au.mat * &av.mat - &av.mat * &au.mat;
            assert!(max_dev_on_sectors(&caa, &z, &basis, basis.max_total) < 1e-13);
            let ccc = &cu.mat * &cv.mat - &cv.mat * &cu.mat;
            assert!(max_dev_on_sectors(&ccc, &z, &basis, basis.max_total - 2) < 1e-13);
        }
    }

    #[test]
    fn field_vacuum_fluctuation() {
        let basis = build_basis(space(2), 5).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let u = rand_vec(&mut r, 2);
        let eps = 0.42;
        let phi = field_op(&basis, &u, eps).unwrap();
        assert!(phi.hermitian);
        let om = basis.vacuum();
        let val = om.inner(&phi.apply(&phi.apply(&om)));
        let n2: f64 = u.iter().map(|z| z.norm_sqr()).sum();
        assert!((val - cr(eps * n2 / 2.0)).norm() < 1e-13);
        // Phi(0) = 0
        let z = field_op(&basis, &[cr(0.0), cr(0.0)], eps).unwrap();
        assert!(max_abs(&z.mat) < 1e-15);
    }

    #[test]
    fn weyl_identity_and_composition_phase() {
        let basis = build_basis(space(1), 28).unwrap();
        let eps = 0.5;
        let w0 = weyl_op(&basis, &[cr(0.0)], eps).unwrap();
        assert!(max_abs(&(&w0.mat - CMat::identity(basis.dim, basis.dim))) < 1e-12);
        let u1 = vec![c(0.6, 0.2)];
        let u2 = vec![c(-0.3, 0.5)];
        let w1 = weyl_op(&basis, &u1, eps).unwrap();
        let w2 = weyl_op(&basis, &u2, eps).unwrap();
        let u12: Vec<C64> = u1.iter().zip(&u2).map(|(a, b)| a + b).collect();
        let w12 = weyl_op(&basis, &u12, eps).unwrap();
        let sigma: f64 = -2.0 * u1.iter().zip(&u2).map(|(a, b)| (a.conj() * b).im).sum::<f64>();
        let phase = (I * (eps * sigma / 4.0)).exp();
        let lhs = &w1.mat * &w2.mat;
        let rhs = &w12.mat * phase;
        assert!(max_dev_on_sectors(&lhs, &rhs, &basis, 8) < 1e-8);
    }

    #[test]
    fn weyl_number_translation_identity() {
        // W(u)* N W(u) = N + eps Phi(iu) + eps^2 |u|^2 / 2 on low sectors
        let basis = build_basis(space(1), 26).unwrap();
        let eps = 0.4;
        let u = vec![c(0.5, -0.3)];
        let iu: Vec<C64> = u.iter().map(|z| z * I).collect();
        let w = weyl_op(&basis, &u, eps).unwrap();
        let n_op = number_op(&basis, eps).unwrap();
        let phi_iu = field_op(&basis, &iu, eps).unwrap();
        let n2: f64 = u.iter().map(|z| z.norm_sqr()).sum();
        let lhs = w.mat.adjoint() * &n_op.mat * &w.mat;
        let rhs = &n_op.mat + &phi_iu.mat * cr(eps) + CMat::identity(basis.dim, basis.dim) * cr(eps * eps * n2 / 2.0);
        assert!(max_dev_on_sectors(&lhs, &rhs, &basis, 8) < 1e-8);
    }

    #[test]
    fn appendix_commutator_identity() {
        // A = N_1 + 1 + Phi_eps(iu) + eps |u|^2/2, B = (N_1+1)^-1:
        // [B, A] = -i B Phi_eps(u) B on the guard band
        let basis = build_basis(space(2), 8).unwrap();
        let eps = 0.7;
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let u = rand_vec(&mut r, 2);
        let n2: f64 = u.iter().map(|z| z.norm_sqr()).sum();
        let iu: Vec<C64> = u.iter().map(|z| z * I).collect();
        let n1 = number_op(&basis, 1.0).unwrap();
        let id = CMat::identity(basis.dim, basis.dim);
        let a_app = &n1.mat + &id + &field_op(&basis, &iu, eps).unwrap().mat + &id * cr(eps * n2 / 2.0);
        let b_app = number_shift_pow(&basis, -1.0).mat;
        let lhs = &b_app * &a_app - &a_app * &b_app;
        let phi = field_op(&basis, &u, eps).unwrap();
        let rhs = &b_app * &phi.mat * &b_app * (-I);
        assert!(max_dev_on_sectors(&lhs, &rhs, &basis, basis.max_total - 2) < 1e-10);
    }

    #[test]
    fn dgamma_basics() {
        let basis = build_basis(space(2), 4).unwrap();
        let eps = 0.25;
        // dGamma_eps(1) on sector 3 is 3 eps
        let n_op = number_op(&basis, eps).unwrap();
        for i in basis.sector_range(3) {
            assert!((n_op.mat[(i, i)] - cr(3.0 * eps)).norm() < 1e-15);
        }
        let dg1 = dgamma_op(&basis, &CMat::identity(2, 2), eps).unwrap();
        assert!(max_abs(&(&dg1.mat - &n_op.mat)) < 1e-13);
        // hermitian for hermitian B
        let mut b = CMat::zeros(2, 2);
        b[(0, 0)] = cr(0.4);
        b[(0, 1)] = c(0.1, 0.2);
        b[(1, 0)] = c(0.1, -0.2);
        b[(1, 1)] = cr(-0.3);
        let dg = dgamma_op(&basis, &b, eps).unwrap();
        assert!(dg.hermitian);
        assert!(max_abs(&(&dg.mat - dg.mat.adjoint())) < 1e-12);
    }

    #[test]
    fn dgamma_exponential_moves_powers() {
        // e^{it dGamma_1(B)} z^{(x)n} = (e^{itB} z)^{(x)n}, n = 2
        let basis = build_basis(space(2), 3).unwrap();
        let mut b = CMat::zeros(2, 2);
        b[(0, 0)] = cr(0.9);
        b[(0, 1)] = c(0.2, 0.1);
        b[(1, 0)] = c(0.2, -0.1);
        b[(1, 1)] = cr(1.4);
        let t = 0.6;
        let dg = dgamma_op(&basis, &b, 1.0).unwrap();
        let evo = expi_hermitian(&dg.mat, t).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(6);
        let z = rand_vec(&mut r, 2);
        let zn = embed_sector(&basis, &sym_tensor_power(&z, 2).unwrap()).unwrap();
        let lhs = &evo * &zn.coeffs;
        let expb = crate::linalg::expi_hermitian(&b, t).unwrap();
        let bz: Vec<C64> = (0..2).map(|i| (0..2).map(|j| expb[(i, j)] * z[j]).sum()).collect();
        let rhs = embed_sector(&basis, &sym_tensor_power(&bz, 2).unwrap()).unwrap();
        for i in 0..basis.dim {
            assert!((lhs[i] - rhs.coeffs[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn coherent_state_checks() {
        let basis = build_basis(space(1), 20).unwrap();
        // u = 0 gives the vacuum with zero tail
        let (v0, tail0) = coherent_state(&basis, &[cr(0.0)], 0.3).unwrap();
        assert!((v0.coeffs[0] - cr(1.0)).norm() < 1e-15);
        assert_eq!(tail0, 0.0);
        // |u|^2/eps = 1: tail below 1e-13 at M = 20, and matches Poisson
        let eps = 0.25;
        let u = vec![cr(0.5)];
        let (v, tail) = coherent_state(&basis, &u, eps).unwrap();
        assert!(tail < 1e-13, "tail = {tail:.3e}");
        let poisson = poisson_tail(1.0, 20);
        assert!((tail - poisson).abs() < 1e-13);
        // ladder expectation <psi, a(w) psi> = <w,u> (1 - O(tail))
        let mut r = ChaCha8Rng::seed_from_u64(7);
        let w = rand_vec(&mut r, 1);
        let a = ladder_op(&basis, &w, eps, Ladder::Annihilation).unwrap();
        let got = v.inner(&a.apply(&v));
        let expect: C64 = w.iter().zip(&u).map(|(a, b)| a.conj() * b).sum();
        assert!((got - expect).norm() < 10.0 * tail.max(1e-14));
        // mean particle number near |u|^2 within a tail-controlled bound
        let n_op = number_op(&basis, eps).unwrap();
        let mean = v.inner(&n_op.apply(&v)).re;
        let lambda = 1.0;
        let bound = eps * lambda * poisson_tail(lambda, basis.max_total - 1) * 1.5 + 1e-13;
        assert!((mean - 0.25).abs() <= bound, "dev {} bound {}", (mean - 0.25).abs(), bound);
    }

    #[test]
    fn coherent_series_matches_weyl_displacement() {
        // series path vs W_eps(-i sqrt(2) u / eps) applied to the vacuum
        let basis = build_basis(space(1), 24).unwrap();
        let eps = 0.5;
        let u = vec![c(0.4, 0.3)];
        let (series, tail) = coherent_state(&basis, &u, eps).unwrap();
        let scale = 2.0f64.sqrt() / eps;
        let arg: Vec<C64> = u.iter().map(|z| z * (-I) * cr(scale)).collect();
        let w = weyl_op(&basis, &arg, eps).unwrap();
        let displaced = w.apply(&basis.vacuum());
        let dev: f64 = (0..basis.dim).map(|i| (series.coeffs[i] - displaced.coeffs[i]).norm()).fold(0.0, f64::max);
        assert!(dev < 1e-9 + 10.0 * tail, "dev {dev:.3e} tail {tail:.3e}");
    }

    #[test]
    fn free_evolution_conjugations() {
        let basis = build_basis(space(1), 26).unwrap();
        let t = 0.8;
        let evo = free_evolution(&basis, t).unwrap();
        // t = 0 is the identity
        let e0 = free_evolution(&basis, 0.0).unwrap();
        assert!(max_abs(&(&e0.mat - CMat::identity(basis.dim, basis.dim))) < 1e-14);
        // conjugating Phi gives Phi(e^{itA} u)
        let eps = 0.6;
        let u = vec![c(0.5, -0.2)];
        let phi = field_op(&basis, &u, eps).unwrap();
        let lhs = &evo.mat * &phi.mat * evo.mat.adjoint();
        let ut = basis.mode_space.apply_exp_ita(t, &u);
        let rhs = field_op(&basis, &ut, eps).unwrap();
        assert!(max_dev_on_sectors(&lhs, &rhs.mat, &basis, basis.max_total - 1) < 1e-9);
        // conjugating W gives W(e^{itA} u) on the guard band
        let w = weyl_op(&basis, &u, eps).unwrap();
        let lhs = &evo.mat * &w.mat * evo.mat.adjoint();
        let rhs = weyl_op(&basis, &ut, eps).unwrap();
        assert!(max_dev_on_sectors(&lhs, &rhs.mat, &basis, 8) < 1e-8);
    }

    #[test]
    fn free_evolution_nondiagonal_block_lift() {
        // non-diagonal A goes through the sector lift; cross-check against
        // direct exponentiation of dGamma_1(A)
        let mut a = CMat::zeros(2, 2);
        a[(0, 0)] = cr(1.5);
        a[(0, 1)] = cr(0.3);
        a[(1, 0)] = cr(0.3);
        a[(1, 1)] = cr(1.2);
        let ms = ModeSpace::new(a.clone(), 0.5, Conjugation::Componentwise).unwrap();
        let basis = build_basis(ms, 4).unwrap();
        let t = 0.9;
        let evo = free_evolution(&basis, t).unwrap();
        let dg = dgamma_op(&basis, &a, 1.0).unwrap();
        let oracle = expi_hermitian(&dg.mat, t).unwrap();
        assert!(max_abs(&(&evo.mat - &oracle)) < 1e-11);
    }

    #[test]
    fn weyl_number_growth_envelope() {
        // |(N+1)^k W (N+1)^{-k}| on a guarded column band stays inside the
        // frozen envelope M * |u|^k 2^{k^2} across eps
        let basis = build_basis(space(1), 30).unwrap();
        for &eps in &[1.0, 0.5, 0.1] {
            for &k in &[1.0f64, 2.0] {
                for &unorm in &[1.0f64, 1.5, 2.0] {
                    let u = vec![cr(unorm)];
                    let w = weyl_op(&basis, &u, eps).unwrap();
                    let t = number_shift_pow(&basis, k).mat * &w.mat * number_shift_pow(&basis, -k).mat;
                    let band = basis.sector_range(10).end;
                    let sub = t.view((0, 0), (basis.dim, band)).into_owned();
                    let norm = crate::linalg::op_norm(&sub);
                    let envelope = crate::config::WEYL_NUMBER_ENVELOPE_M * unorm.powf(k) * 2.0f64.powf(k * k);
                    assert!(norm <= envelope, "k={k} eps={eps} |u|={unorm}: {norm:.3e} > {envelope:.3e}");
                }
            }
        }
    }
}
