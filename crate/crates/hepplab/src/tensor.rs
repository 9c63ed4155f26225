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

//! Symmetric tensor algebra over a finite-mode one-particle space.
//!
//! An order-`n` symmetric tensor over `C^d` is stored as one complex
//! coefficient per multi-index of order `n`, with respect to the
//! orthonormal symmetrized basis
//! `E_a = sqrt(n!/a!) S_n(e_1^{a_1} x ... x e_d^{a_d})`.
//! With this normalization the tensor norm is the plain Euclidean norm of
//! the coefficient vector, and full `d^n` embeddings are only ever built
//! inside test oracles.

use crate::config::DEFAULT_SIZE_CAP;
use crate::error::{Error, Result};
use crate::linalg::{c, cr, ln_factorial, CMat, C64};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Antilinear involution on `C^d`: plain componentwise conjugation, or a
/// self-inverse mode permutation composed with componentwise conjugation.
#[derive(Debug, Clone, PartialEq)]
pub enum Conjugation {
    Componentwise,
    ModePairing(Vec<usize>),
}

impl Conjugation {
    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            Conjugation::Componentwise => Ok(()),
            Conjugation::ModePairing(p) => {
                if p.len() != d {
                    return Err(Error::Shape(format!(
                        "pairing length {} does not match mode count {}",
                        p.len(),
                        d
                    )));
                }
                for (i, &j) in p.iter().enumerate() {
                    if j >= d || p[j] != i {
                        return Err(Error::Shape(format!("pairing is not an involution at mode {i}")));
                    }
                }
                Ok(())
            }
        }
    }

    /// Image of mode `m` under the permutation part.
    pub fn pair(&self, m: usize) -> usize {
        match self {
            Conjugation::Componentwise => m,
            Conjugation::ModePairing(p) => p[m],
        }
    }

    pub fn apply_vec(&self, z: &[C64]) -> Vec<C64> {
        (0..z.len()).map(|m| z[self.pair(m)].conj()).collect()
    }
}

/// One-particle phase space: `C^d` with a Hermitian energy matrix `A`
/// bounded below by `m0` and a compatible conjugation.
#[derive(Debug, Clone)]
pub struct ModeSpace {
    pub d: usize,
    pub a: CMat,
    pub m0: f64,
    pub conjugation: Conjugation,
    a_vals: Vec<f64>,
    a_vecs: Option<CMat>,
}

impl ModeSpace {
    pub fn new(a: CMat, m0: f64, conjugation: Conjugation) -> Result<Self> {
        let d = a.nrows();
        if d == 0 || a.ncols() != d {
            return Err(Error::Shape(format!("A must be square and nonempty, got {}x{}", d, a.ncols())));
        }
        if m0 <= 0.0 {
            return Err(Error::Shape("m0 must be positive".into()));
        }
        conjugation.validate(d)?;
        if crate::linalg::max_abs(&(&a - a.adjoint())) > 1e-12 {
            return Err(Error::Shape("A is not Hermitian to 1e-12".into()));
        }
        let diagonal = (0..d).all(|i| (0..d).all(|j| i == j || a[(i, j)] == cr(0.0)));
        let (a_vals, a_vecs) = if diagonal {
            ((0..d).map(|i| a[(i, i)].re).collect::<Vec<_>>(), None)
        } else {
            let (vals, vecs) = crate::linalg::eigh(&a)?;
            (vals, Some(vecs))
        };
        let min_eig = a_vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < m0 - 1e-10 {
            return Err(Error::Shape(format!("spectrum of A reaches {min_eig:.6e} below m0 = {m0:.6e}")));
        }
        let space = Self { d, a, m0, conjugation, a_vals, a_vecs };
        space.check_conjugation()?;
        Ok(space)
    }

    /// Spot-checks on deterministic pseudo-random vectors: the conjugation
    /// is a norm-preserving involution and commutes with A.
    fn check_conjugation(&self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_a1);
        for _ in 0..8 {
            let z: Vec<C64> = (0..self.d).map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
            let cz = self.conjugation.apply_vec(&z);
            let ccz = self.conjugation.apply_vec(&cz);
            let nz = crate::linalg::vec_norm(&z);
            if (crate::linalg::vec_norm(&cz) - nz).abs() > 1e-12 * nz.max(1.0) {
                return Err(Error::Shape("conjugation does not preserve norms".into()));
            }
            let dev: f64 = z.iter().zip(&ccz).map(|(x, y)| (x - y).norm()).sum();
            if dev > 1e-12 {
                return Err(Error::Shape("conjugation is not involutive".into()));
            }
            let az = self.apply_a(&z);
            let caz = self.conjugation.apply_vec(&az);
            let acz = self.apply_a(&cz);
            let comm: f64 = caz.iter().zip(&acz).map(|(x, y)| (x - y).norm()).sum();
            if comm > 1e-12 * (1.0 + crate::linalg::max_abs(&self.a)) {
                return Err(Error::Shape("A does not commute with the conjugation".into()));
            }
        }
        Ok(())
    }

    pub fn apply_a(&self, z: &[C64]) -> Vec<C64> {
        (0..self.d)
            .map(|i| (0..self.d).map(|j| self.a[(i, j)] * z[j]).sum())
            .collect()
    }

    /// `exp(i t A) z` through the stored spectrum of A.
    pub fn apply_exp_ita(&self, t: f64, z: &[C64]) -> Vec<C64> {
        match &self.a_vecs {
            None => (0..self.d)
                .map(|i| z[i] * (crate::linalg::I * (t * self.a_vals[i])).exp())
                .collect(),
            Some(vecs) => {
                let mut w = vec![cr(0.0); self.d];
                // V^* z, scale by phases, back with V
                for k in 0..self.d {
                    let mut acc = cr(0.0);
                    for i in 0..self.d {
                        acc += vecs[(i, k)].conj() * z[i];
                    }
                    w[k] = acc * (crate::linalg::I * (t * self.a_vals[k])).exp();
                }
                (0..self.d)
                    .map(|i| (0..self.d).map(|k| vecs[(i, k)] * w[k]).sum())
                    .collect()
            }
        }
    }

    /// Dense `exp(i t A)`.
    pub fn exp_ita(&self, t: f64) -> CMat {
        let mut m = CMat::zeros(self.d, self.d);
        for j in 0..self.d {
            let mut e = vec![cr(0.0); self.d];
            e[j] = cr(1.0);
            let col = self.apply_exp_ita(t, &e);
            for i in 0..self.d {
                m[(i, j)] = col[i];
            }
        }
        m
    }

    pub fn conj_vec(&self, z: &[C64]) -> Vec<C64> {
        self.conjugation.apply_vec(z)
    }
}

/// Occupation-number multi-index over `d` modes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex {
    pub counts: Vec<usize>,
}

impl MultiIndex {
    pub fn new(counts: Vec<usize>) -> Self {
        Self { counts }
    }

    pub fn order(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn ln_factorial(&self) -> f64 {
        self.counts.iter().map(|&k| ln_factorial(k)).sum()
    }

    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        let mut out = Vec::with_capacity(self.counts.len());
        for (a, b) in self.counts.iter().zip(&other.counts) {
            if a < b {
                return None;
            }
            out.push(a - b);
        }
        Some(MultiIndex::new(out))
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex::new(self.counts.iter().zip(&other.counts).map(|(a, b)| a + b).collect())
    }

    /// `prod_m v[m]^counts[m]`.
    pub fn monomial(&self, v: &[C64]) -> C64 {
        let mut acc = cr(1.0);
        for (m, &k) in self.counts.iter().enumerate() {
            for _ in 0..k {
                acc *= v[m];
            }
        }
        acc
    }

    /// Image under a mode permutation: counts[m] moves to slot perm[m].
    pub fn permuted(&self, conj: &Conjugation) -> MultiIndex {
        match conj {
            Conjugation::Componentwise => self.clone(),
            Conjugation::ModePairing(p) => {
                let mut out = vec![0usize; self.counts.len()];
                for (m, &k) in self.counts.iter().enumerate() {
                    out[p[m]] = k;
                }
                MultiIndex::new(out)
            }
        }
    }
}

/// `binom(n+d-1, d-1)` as a float (safe against overflow).
pub fn sector_dim_f64(d: usize, n: usize) -> f64 {
    (ln_factorial(n + d - 1) - ln_factorial(n) - ln_factorial(d - 1)).exp()
}

/// Exact sector dimension; errors with `SizeCap` past the configured cap.
pub fn sector_dim(d: usize, n: usize) -> Result<usize> {
    sector_dim_capped(d, n, DEFAULT_SIZE_CAP)
}

pub fn sector_dim_capped(d: usize, n: usize, cap: usize) -> Result<usize> {
    let est = sector_dim_f64(d, n);
    if est > cap as f64 * 1.000001 {
        return Err(Error::SizeCap { d, n, size: est as usize, cap });
    }
    // exact integer evaluation, overflow-free at this size
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for i in 1..d {
        num *= (n + i) as u128;
        den *= i as u128;
    }
    Ok((num / den) as usize)
}

/// All multi-indices over `d` modes of order `n`, lexicographically sorted.
pub fn enumerate_multi_indices(d: usize, n: usize) -> Result<Vec<MultiIndex>> {
    let dim = sector_dim(d, n)?;
    let mut out = Vec::with_capacity(dim);
    let mut cur = vec![0usize; d];
    fill(&mut out, &mut cur, 0, n, d);
    debug_assert_eq!(out.len(), dim);
    Ok(out)
}

fn fill(out: &mut Vec<MultiIndex>, cur: &mut Vec<usize>, slot: usize, left: usize, d: usize) {
    if slot == d - 1 {
        cur[slot] = left;
        out.push(MultiIndex::new(cur.clone()));
        return;
    }
    for k in 0..=left {
        cur[slot] = k;
        fill(out, cur, slot + 1, left - k, d);
    }
}

/// A sector's multi-index list plus reverse lookup.
#[derive(Debug, Clone)]
pub struct SectorIndex {
    pub d: usize,
    pub n: usize,
    pub mis: Vec<MultiIndex>,
    pos: BTreeMap<Vec<usize>, usize>,
}

impl SectorIndex {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        let mis = enumerate_multi_indices(d, n)?;
        let pos = mis.iter().enumerate().map(|(i, mi)| (mi.counts.clone(), i)).collect();
        Ok(Self { d, n, mis, pos })
    }

    pub fn dim(&self) -> usize {
        self.mis.len()
    }

    pub fn position(&self, mi: &MultiIndex) -> Option<usize> {
        self.pos.get(&mi.counts).copied()
    }
}

/// Order-`n` symmetric tensor in the orthonormal symmetrized basis.
#[derive(Debug, Clone)]
pub struct SymTensor {
    pub d: usize,
    pub n: usize,
    pub coeffs: Vec<C64>,
}

impl SymTensor {
    pub fn zero(d: usize, n: usize) -> Result<Self> {
        Ok(Self { d, n, coeffs: vec![cr(0.0); sector_dim(d, n)?] })
    }

    pub fn from_coeffs(d: usize, n: usize, coeffs: Vec<C64>) -> Result<Self> {
        let dim = sector_dim(d, n)?;
        if coeffs.len() != dim {
            return Err(Error::Shape(format!("expected {dim} coefficients for (d={d}, n={n}), got {}", coeffs.len())));
        }
        Ok(Self { d, n, coeffs })
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::vec_norm(&self.coeffs)
    }

    /// `<self, other>`, antilinear on the left.
    pub fn inner(&self, other: &SymTensor) -> C64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn scaled(&self, s: C64) -> SymTensor {
        SymTensor { d: self.d, n: self.n, coeffs: self.coeffs.iter().map(|v| v * s).collect() }
    }

    pub fn add_scaled(&mut self, other: &SymTensor, s: C64) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * s;
        }
    }
}

/// Project a raw `d^n` coefficient array (row-major over slot indices)
/// onto the symmetrized basis.
pub fn symmetrize(d: usize, n: usize, raw: &[C64]) -> Result<SymTensor> {
    let expected = (d as f64).powi(n as i32);
    if raw.len() as f64 != expected {
        return Err(Error::Shape(format!("raw tensor has {} entries, expected d^n = {}", raw.len(), expected)));
    }
    let sector = SectorIndex::new(d, n)?;
    let mut coeffs = vec![cr(0.0); sector.dim()];
    // accumulate per type, then apply sqrt(a!/n!)
    let mut slots = vec![0usize; n];
    for (flat, value) in raw.iter().enumerate() {
        if n > 0 {
            let mut rem = flat;
            for s in (0..n).rev() {
                slots[s] = rem % d;
                rem /= d;
            }
        }
        let mut counts = vec![0usize; d];
        for &s in &slots {
            counts[s] += 1;
        }
        let mi = MultiIndex::new(counts);
        let k = sector.position(&mi).unwrap();
        coeffs[k] += value;
    }
    let ln_n = ln_factorial(n);
    for (k, mi) in sector.mis.iter().enumerate() {
        let w = (0.5 * (mi.ln_factorial() - ln_n)).exp();
        coeffs[k] *= cr(w);
    }
    SymTensor::from_coeffs(d, n, coeffs)
}

/// Expand to the full `d^n` array. Test-oracle helper; capped.
pub fn embed_full(t: &SymTensor) -> Result<Vec<C64>> {
    let full = (t.d as f64).powi(t.n as i32);
    if full > DEFAULT_SIZE_CAP as f64 {
        return Err(Error::SizeCap { d: t.d, n: t.n, size: full as usize, cap: DEFAULT_SIZE_CAP });
    }
    let sector = SectorIndex::new(t.d, t.n)?;
    let mut out = vec![cr(0.0); full as usize];
    let ln_n = ln_factorial(t.n);
    let mut slots = vec![0usize; t.n];
    for (flat, slot) in out.iter_mut().enumerate() {
        if t.n > 0 {
            let mut rem = flat;
            for s in (0..t.n).rev() {
                slots[s] = rem % t.d;
                rem /= t.d;
            }
        }
        let mut counts = vec![0usize; t.d];
        for &s in &slots {
            counts[s] += 1;
        }
        let mi = MultiIndex::new(counts);
        let k = sector.position(&mi).unwrap();
        let w = (0.5 * (mi.ln_factorial() - ln_n)).exp();
        *slot = t.coeffs[k] * cr(w);
    }
    Ok(out)
}

/// `z^{(x) n}` as a symmetric tensor; coefficients `sqrt(n!/a!) z^a`.
pub fn sym_tensor_power(z: &[C64], n: usize) -> Result<SymTensor> {
    let d = z.len();
    let sector = SectorIndex::new(d, n)?;
    let ln_n = ln_factorial(n);
    let coeffs = sector
        .mis
        .iter()
        .map(|mi| mi.monomial(z) * cr((0.5 * (ln_n - mi.ln_factorial())).exp()))
        .collect();
    SymTensor::from_coeffs(d, n, coeffs)
}

/// Pair `paired` slots of `t` against `w` (antilinear in `w`), leaving a
/// symmetric tensor of order `t.n - paired`.
pub fn contract_partial(t: &SymTensor, w: &[C64], paired: usize) -> Result<SymTensor> {
    if w.len() != t.d {
        return Err(Error::Shape(format!("vector length {} vs mode count {}", w.len(), t.d)));
    }
    if paired > t.n {
        return Err(Error::Shape(format!("cannot pair {paired} slots of an order-{} tensor", t.n)));
    }
    let j = t.n;
    let r = j - paired;
    let src = SectorIndex::new(t.d, j)?;
    let out_sector = SectorIndex::new(t.d, r)?;
    let gammas = enumerate_multi_indices(t.d, paired)?;
    let wbar: Vec<C64> = w.iter().map(|v| v.conj()).collect();
    let ln_j = ln_factorial(j);
    let ln_p = ln_factorial(paired);
    let ln_r = ln_factorial(r);
    let mut coeffs = vec![cr(0.0); out_sector.dim()];
    for (kb, beta) in out_sector.mis.iter().enumerate() {
        let mut acc = cr(0.0);
        for gamma in &gammas {
            let alpha = beta.add(gamma);
            let ka = src.position(&alpha).unwrap();
            let cval = t.coeffs[ka];
            if cval == cr(0.0) {
                continue;
            }
            // (p!/g!) wbar^g sqrt((g+b)!/j!)
            let lw = ln_p - gamma.ln_factorial() + 0.5 * (alpha.ln_factorial() - ln_j);
            acc += gamma.monomial(&wbar) * cval * cr(lw.exp());
        }
        let lead = 0.5 * (ln_r - beta.ln_factorial());
        coeffs[kb] = acc * cr(lead.exp());
    }
    SymTensor::from_coeffs(t.d, r, coeffs)
}

/// Lifted conjugation on a sector: permute the multi-index by the mode
/// pairing and conjugate the coefficient.
pub fn conj_apply(conj: &Conjugation, t: &SymTensor) -> Result<SymTensor> {
    let sector = SectorIndex::new(t.d, t.n)?;
    let mut coeffs = vec![cr(0.0); sector.dim()];
    for (k, mi) in sector.mis.iter().enumerate() {
        let src = sector.position(&mi.permuted(conj)).unwrap();
        coeffs[k] = t.coeffs[src].conj();
    }
    SymTensor::from_coeffs(t.d, t.n, coeffs)
}

/// `S_{n+1}(v x t)` for an order-`n` symmetric tensor.
pub fn sym_append(t: &SymTensor, v: &[C64]) -> Result<SymTensor> {
    let n1 = t.n + 1;
    let src = SectorIndex::new(t.d, t.n)?;
    let dst = SectorIndex::new(t.d, n1)?;
    let mut coeffs = vec![cr(0.0); dst.dim()];
    for (k, mu) in dst.mis.iter().enumerate() {
        let mut acc = cr(0.0);
        for m in 0..t.d {
            if mu.counts[m] == 0 {
                continue;
            }
            let mut nu = mu.clone();
            nu.counts[m] -= 1;
            let kv = src.position(&nu).unwrap();
            acc += v[m] * t.coeffs[kv] * cr((mu.counts[m] as f64 / n1 as f64).sqrt());
        }
        coeffs[k] = acc;
    }
    SymTensor::from_coeffs(t.d, n1, coeffs)
}

/// Matrix of the sector lift `U^{(x) n}` restricted to the symmetric
/// subspace, in the orthonormal multi-index bases.
pub fn sym_power_matrix(u: &CMat, n: usize) -> Result<CMat> {
    let d = u.nrows();
    if u.ncols() != d {
        return Err(Error::Shape("sym_power_matrix needs a square matrix".into()));
    }
    let sector = SectorIndex::new(d, n)?;
    let dim = sector.dim();
    let mut out = CMat::zeros(dim, dim);
    let cols: Vec<Vec<C64>> = (0..d).map(|j| (0..d).map(|i| u[(i, j)]).collect()).collect();
    for (kn, nu) in sector.mis.iter().enumerate() {
        // U^{x n} E_nu = sqrt(n!/nu!) S((U e)^{x nu}), built by appends
        let mut t = SymTensor { d, n: 0, coeffs: vec![cr(1.0)] };
        for (m, &k) in nu.counts.iter().enumerate() {
            for _ in 0..k {
                t = sym_append(&t, &cols[m])?;
            }
        }
        let w = (0.5 * (ln_factorial(n) - nu.ln_factorial())).exp();
        for i in 0..dim {
            out[(i, kn)] = t.coeffs[i] * cr(w);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vec_norm;
    use rand::Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn rand_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<C64> {
        (0..d).map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect()
    }

    fn binom(a: usize, b: usize) -> usize {
        if b > a {
            return 0;
        }
        let mut num = 1u128;
        let mut den = 1u128;
        for i in 0..b {
            num *= (a - i) as u128;
            den *= (i + 1) as u128;
        }
        (num / den) as usize
    }

    #[test]
    fn enumeration_matches_examples() {
        assert_eq!(
            enumerate_multi_indices(1, 5).unwrap(),
            vec![MultiIndex::new(vec![5])]
        );
        let d2 = enumerate_multi_indices(2, 3).unwrap();
        let counts: Vec<Vec<usize>> = d2.iter().map(|m| m.counts.clone()).collect();
        assert_eq!(counts, vec![vec![0, 3], vec![1, 2], vec![2, 1], vec![3, 0]]);
        assert_eq!(enumerate_multi_indices(3, 2).unwrap().len(), 6);
    }

    #[test]
    fn cardinality_matches_binomial() {
        for d in 1..=4 {
            for n in 0..=8 {
                let mis = enumerate_multi_indices(d, n).unwrap();
                assert_eq!(mis.len(), binom(n + d - 1, d - 1), "d={d} n={n}");
                // sorted, no duplicates
                for w in mis.windows(2) {
                    assert!(w[0] < w[1]);
                }
            }
        }
    }

    #[test]
    fn size_cap_errors() {
        match sector_dim_capped(4, 60, 1000) {
            Err(Error::SizeCap { d, n, .. }) => {
                assert_eq!((d, n), (4, 60));
            }
            other => panic!("expected SizeCap, got {other:?}"),
        }
    }

    #[test]
    fn symmetrize_transposition_average() {
        // e1 x e2 -> (e1 x e2 + e2 x e1)/2
        let d = 3usize;
        let mut raw = vec![cr(0.0); 9];
        raw[0 * 3 + 1] = cr(1.0);
        let t = symmetrize(d, 2, &raw).unwrap();
        let full = embed_full(&t).unwrap();
        assert!((full[1] - cr(0.5)).norm() < 1e-15);
        assert!((full[3] - cr(0.5)).norm() < 1e-15);
        let rest: f64 = full.iter().enumerate().filter(|(i, _)| *i != 1 && *i != 3).map(|(_, v)| v.norm()).sum();
        assert!(rest < 1e-15);
    }

    #[test]
    fn symmetrize_fixes_powers_and_is_idempotent() {
        let mut r = rng(3);
        let z = rand_vec(&mut r, 3);
        let t = sym_tensor_power(&z, 3).unwrap();
        let full = embed_full(&t).unwrap();
        let t2 = symmetrize(3, 3, &full).unwrap();
        for (a, b) in t.coeffs.iter().zip(&t2.coeffs) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn symmetrize_matches_permutation_sum_oracle() {
        // random dense 3-tensor vs brute-force average over all 6 permutations
        let d = 2usize;
        let n = 3;
        let mut r = rng(11);
        let raw: Vec<C64> = (0..d.pow(3u32)).map(|_| c(r.gen::<f64>() - 0.5, r.gen::<f64>() - 0.5)).collect();
        // oracle: average over permutations of slots
        let perms: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut avg = vec![cr(0.0); raw.len()];
        for (flat, slot) in avg.iter_mut().enumerate() {
            let idx = [flat / (d * d), (flat / d) % d, flat % d];
            for p in &perms {
                let src = idx[p[0]] * d * d + idx[p[1]] * d + idx[p[2]];
                *slot += raw[src] / cr(6.0);
            }
        }
        let t = symmetrize(d, n, &raw).unwrap();
        let full = embed_full(&t).unwrap();
        for (a, b) in full.iter().zip(&avg) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn symmetrizer_is_orthogonal_projection() {
        // <S x, y> = <x, S y> and S^2 = S on random dense tensors, n <= 3
        let d = 2usize;
        for n in 1..=3 {
            let mut r = rng(100 + n as u64);
            let len = d.pow(n as u32);
            let x: Vec<C64> = (0..len).map(|_| c(r.gen::<f64>() - 0.5, r.gen::<f64>() - 0.5)).collect();
            let y: Vec<C64> = (0..len).map(|_| c(r.gen::<f64>() - 0.5, r.gen::<f64>() - 0.5)).collect();
            let sx = embed_full(&symmetrize(d, n, &x).unwrap()).unwrap();
            let sy = embed_full(&symmetrize(d, n, &y).unwrap()).unwrap();
            let lhs: C64 = sx.iter().zip(&y).map(|(a, b)| a.conj() * b).sum();
            let rhs: C64 = x.iter().zip(&sy).map(|(a, b)| a.conj() * b).sum();
            assert!((lhs - rhs).norm() < 1e-13);
            let ssx = embed_full(&symmetrize(d, n, &sx).unwrap()).unwrap();
            for (a, b) in ssx.iter().zip(&sx) {
                assert!((a - b).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn power_norm_is_multiplicative() {
        let mut r = rng(7);
        let z = rand_vec(&mut r, 3);
        let t = sym_tensor_power(&z, 4).unwrap();
        assert!((t.norm() - vec_norm(&z).powi(4)).abs() < 1e-12);
        // basis vector case
        let e1 = vec![cr(1.0), cr(0.0), cr(0.0)];
        let t = sym_tensor_power(&e1, 3).unwrap();
        let sector = SectorIndex::new(3, 3).unwrap();
        let k = sector.position(&MultiIndex::new(vec![3, 0, 0])).unwrap();
        assert!((t.coeffs[k] - cr(1.0)).norm() < 1e-15);
        assert!((t.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn polarization_formula_matches_average() {
        // S_n(u1 x u2 x u3) via the signed 2^n sum equals the direct
        // permutation average.
        let d = 2usize;
        let n = 3;
        let mut r = rng(23);
        let us: Vec<Vec<C64>> = (0..n).map(|_| rand_vec(&mut r, d)).collect();
        // polarization: 1/(2^n n!) sum_rho rho1..rhon (sum rho_j u_j)^{x n}
        let mut pol = SymTensor::zero(d, n).unwrap();
        for mask in 0..(1usize << n) {
            let mut sign = 1.0;
            let mut v = vec![cr(0.0); d];
            for (j, u) in us.iter().enumerate() {
                let rho = if mask & (1 << j) == 0 { 1.0 } else { -1.0 };
                sign *= rho;
                for m in 0..d {
                    v[m] += u[m] * cr(rho);
                }
            }
            let p = sym_tensor_power(&v, n).unwrap();
            pol.add_scaled(&p, cr(sign / (2.0f64.powi(n as i32) * 6.0)));
        }
        // direct: symmetrize the raw product tensor
        let mut raw = vec![cr(0.0); d.pow(n as u32)];
        for (flat, slot) in raw.iter_mut().enumerate() {
            let idx = [flat / (d * d), (flat / d) % d, flat % d];
            *slot = us[0][idx[0]] * us[1][idx[1]] * us[2][idx[2]];
        }
        let direct = symmetrize(d, n, &raw).unwrap();
        for (a, b) in pol.coeffs.iter().zip(&direct.coeffs) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn contract_rank_one() {
        let mut r = rng(5);
        let u = rand_vec(&mut r, 3);
        let w = rand_vec(&mut r, 3);
        let t = sym_tensor_power(&u, 3).unwrap();
        // pairing two slots leaves <w,u>^2 u
        let res = contract_partial(&t, &w, 2).unwrap();
        let wu: C64 = w.iter().zip(&u).map(|(a, b)| a.conj() * b).sum();
        for m in 0..3 {
            let sector = SectorIndex::new(3, 1).unwrap();
            let mut e = vec![0usize; 3];
            e[m] = 1;
            let k = sector.position(&MultiIndex::new(e)).unwrap();
            assert!((res.coeffs[k] - wu * wu * u[m]).norm() < 1e-13);
        }
        // pairing all slots gives the full scalar pairing <w^{x j}, T>
        let all = contract_partial(&t, &w, 3).unwrap();
        assert!((all.coeffs[0] - wu * wu * wu).norm() < 1e-13);
        let oracle = sym_tensor_power(&w, 3).unwrap().inner(&t);
        assert!((all.coeffs[0] - oracle).norm() < 1e-13);
    }

    #[test]
    fn staged_contraction_equals_one_shot() {
        let d = 2usize;
        let j = 4;
        let mut r = rng(9);
        let raw: Vec<C64> = (0..d.pow(j as u32)).map(|_| c(r.gen::<f64>() - 0.5, r.gen::<f64>() - 0.5)).collect();
        let t = symmetrize(d, j, &raw).unwrap();
        let w = rand_vec(&mut r, d);
        let one_shot = contract_partial(&t, &w, 3).unwrap();
        let staged = contract_partial(&contract_partial(&t, &w, 2).unwrap(), &w, 1).unwrap();
        for (a, b) in one_shot.coeffs.iter().zip(&staged.coeffs) {
            assert!((a - b).norm() < 1e-13);
        }
        // scalar consistency: contracting the rest against w^{r} matches the
        // full pairing
        let rest = contract_partial(&one_shot, &w, 1).unwrap();
        let full = contract_partial(&t, &w, 4).unwrap();
        assert!((rest.coeffs[0] - full.coeffs[0]).norm() < 1e-12);
    }

    #[test]
    fn contraction_antilinear_in_w() {
        let d = 2usize;
        let mut r = rng(13);
        let raw: Vec<C64> = (0..d.pow(3u32)).map(|_| c(r.gen::<f64>() - 0.5, r.gen::<f64>() - 0.5)).collect();
        let t = symmetrize(d, 3, &raw).unwrap();
        let w = rand_vec(&mut r, d);
        let alpha = c(0.3, -1.2);
        let aw: Vec<C64> = w.iter().map(|v| v * alpha).collect();
        let paired = 2;
        let lhs = contract_partial(&t, &aw, paired).unwrap();
        let rhs = contract_partial(&t, &w, paired).unwrap();
        let scale = alpha.conj().powu(paired as u32);
        for (a, b) in lhs.coeffs.iter().zip(&rhs.coeffs) {
            assert!((a - b * scale).norm() < 1e-13);
        }
    }

    #[test]
    fn conjugation_componentwise_and_pairing() {
        // componentwise on a real tensor is the identity
        let t = SymTensor::from_coeffs(2, 2, vec![cr(1.0), cr(-2.0), cr(0.5)]).unwrap();
        let ct = conj_apply(&Conjugation::Componentwise, &t).unwrap();
        for (a, b) in t.coeffs.iter().zip(&ct.coeffs) {
            assert!((a - b).norm() < 1e-15);
        }
        // involution on random tensors
        let mut r = rng(17);
        let pairing = Conjugation::ModePairing(vec![1, 0]);
        let coeffs: Vec<C64> = (0..3).map(|_| c(r.gen::<f64>() - 0.5, r.gen::<f64>() - 0.5)).collect();
        let t = SymTensor::from_coeffs(2, 2, coeffs).unwrap();
        let cct = conj_apply(&pairing, &conj_apply(&pairing, &t).unwrap()).unwrap();
        for (a, b) in t.coeffs.iter().zip(&cct.coeffs) {
            assert!((a - b).norm() < 1e-14);
        }
        // d=2, pi swaps modes: coeff at (2,0) -> conj(coeff at (0,2))
        let ct = conj_apply(&pairing, &t).unwrap();
        let sector = SectorIndex::new(2, 2).unwrap();
        let k20 = sector.position(&MultiIndex::new(vec![2, 0])).unwrap();
        let k02 = sector.position(&MultiIndex::new(vec![0, 2])).unwrap();
        assert!((ct.coeffs[k20] - t.coeffs[k02].conj()).norm() < 1e-15);
        assert!((ct.norm() - t.norm()).abs() < 1e-14);
    }

    #[test]
    fn sym_power_matrix_is_lift() {
        // compare against direct power computation on random vectors
        let mut r = rng(29);
        let d = 2usize;
        let n = 3;
        let mut u = CMat::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                u[(i, j)] = c(r.gen::<f64>() - 0.5, r.gen::<f64>() - 0.5);
            }
        }
        let lift = sym_power_matrix(&u, n).unwrap();
        let z = rand_vec(&mut r, d);
        let uz: Vec<C64> = (0..d).map(|i| (0..d).map(|j| u[(i, j)] * z[j]).sum()).collect();
        let lhs = sym_tensor_power(&uz, n).unwrap();
        let zin = sym_tensor_power(&z, n).unwrap();
        let sector = SectorIndex::new(d, n).unwrap();
        for k in 0..sector.dim() {
            let mut acc = cr(0.0);
            for l in 0..sector.dim() {
                acc += lift[(k, l)] * zin.coeffs[l];
            }
            assert!((acc - lhs.coeffs[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn mode_space_validation() {
        // valid diagonal space
        let a = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![cr(1.0), cr(2.0)]));
        let ms = ModeSpace::new(a.clone(), 1.0, Conjugation::Componentwise).unwrap();
        assert_eq!(ms.d, 2);
        // non-Hermitian rejected
        let mut bad = a.clone();
        bad[(0, 1)] = cr(0.3);
        assert!(ModeSpace::new(bad, 1.0, Conjugation::Componentwise).is_err());
        // spectrum below m0 rejected
        assert!(ModeSpace::new(a.clone(), 1.5, Conjugation::Componentwise).is_err());
        // pairing that does not commute with A rejected
        assert!(ModeSpace::new(a, 1.0, Conjugation::ModePairing(vec![1, 0])).is_err());
        // pairing with equal energies accepted
        let a2 = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![cr(2.0), cr(2.0)]));
        assert!(ModeSpace::new(a2, 1.0, Conjugation::ModePairing(vec![1, 0])).is_ok());
    }

    proptest::proptest! {
        #[test]
        fn prop_power_norm_multiplicative(parts in proptest::collection::vec(-1.0f64..1.0, 4)) {
            let z = vec![c(parts[0], parts[1]), c(parts[2], parts[3])];
            let t = sym_tensor_power(&z, 3).unwrap();
            let n = vec_norm(&z);
            proptest::prop_assert!((t.norm() - n.powi(3)).abs() < 1e-12 * (1.0 + n.powi(3)));
        }

        #[test]
        fn prop_symmetrize_idempotent_on_embeddings(parts in proptest::collection::vec(-1.0f64..1.0, 8)) {
            let raw: Vec<C64> = (0..4).map(|i| c(parts[2 * i], parts[2 * i + 1])).collect();
            let t = symmetrize(2, 2, &raw).unwrap();
            let t2 = symmetrize(2, 2, &embed_full(&t).unwrap()).unwrap();
            for (a, b) in t.coeffs.iter().zip(&t2.coeffs) {
                proptest::prop_assert!((a - b).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn exp_ita_matches_eig_route() {
        // real symmetric, so A1 holds with componentwise conjugation
        let mut m = CMat::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] = cr(((i * j) as f64 * 0.17).sin() * 0.3);
            }
        }
        let h = (&m + m.transpose()) * cr(0.5) + CMat::identity(3, 3) * cr(3.0);
        let ms = ModeSpace::new(h.clone(), 0.5, Conjugation::Componentwise).unwrap();
        let u = ms.exp_ita(0.37);
        let oracle = crate::linalg::expi_hermitian(&h, 0.37).unwrap();
        assert!(crate::linalg::max_abs(&(&u - &oracle)) < 1e-12);
    }
}
