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

//! Small dense complex linear-algebra helpers shared by all modules.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// ln(n!) via `lgamma`, stable for the sector sizes used here.
pub fn ln_factorial(n: usize) -> f64 {
    statistical_ln_gamma(n as f64 + 1.0)
}

/// Lanczos approximation of ln Gamma(x) for x > 0.
fn statistical_ln_gamma(x: f64) -> f64 {
    // g=7, n=9 coefficients.
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection, not needed for factorials but keeps the helper total
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - statistical_ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, &cval) in COEF.iter().enumerate().skip(1) {
        a += cval / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Hermitian eigendecomposition; returns ascending eigenvalues and the
/// unitary matrix of column eigenvectors.
pub fn eigh(m: &CMat) -> Result<(Vec<f64>, CMat)> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Shape(format!("eigh needs square input, got {}x{}", n, m.ncols())));
    }
    let sym = nalgebra::linalg::SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sym.eigenvalues[a].partial_cmp(&sym.eigenvalues[b]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| sym.eigenvalues[i]).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("eigh produced non-finite eigenvalues".into()));
    }
    let mut vecs = CMat::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vecs.set_column(col, &sym.eigenvectors.column(i));
    }
    Ok((vals, vecs))
}

/// `f` applied to a Hermitian matrix through its spectrum.
pub fn hermitian_map(m: &CMat, f: impl Fn(f64) -> C64) -> Result<CMat> {
    let (vals, vecs) = eigh(m)?;
    let n = m.nrows();
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let fv = f(v);
        for i in 0..n {
            scaled[(i, j)] *= fv;
        }
    }
    Ok(&scaled * vecs.adjoint())
}

/// exp(i s H) for Hermitian H.
pub fn expi_hermitian(h: &CMat, s: f64) -> Result<CMat> {
    hermitian_map(h, |v| (I * (s * v)).exp())
}

/// Nearest unitary via the polar factor `U (U^* U)^{-1/2}`.
pub fn polar_unitary(u: &CMat) -> Result<CMat> {
    let gram = u.adjoint() * u;
    let inv_sqrt = hermitian_map(&gram, |v| {
        if v <= 0.0 {
            cr(0.0)
        } else {
            cr(1.0 / v.sqrt())
        }
    })?;
    Ok(u * inv_sqrt)
}

/// Largest singular value (operator norm) of a dense matrix.
pub fn op_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let gram = m.adjoint() * m;
    match eigh(&gram) {
        Ok((vals, _)) => vals.last().copied().unwrap_or(0.0).max(0.0).sqrt(),
        Err(_) => f64::NAN,
    }
}

/// Max absolute entry.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Least-squares line fit of y against x returning (slope, intercept,
/// slope standard error).
pub fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    let dof = (x.len().max(3) - 2) as f64;
    let se = (ssr / dof / sxx).sqrt();
    (slope, intercept, se)
}
