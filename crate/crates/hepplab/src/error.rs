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

//! Error types shared across the laboratory.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A requested basis, tensor or kernel would exceed the size cap.
    #[error("size cap exceeded for (d={d}, n={n}): {size} > {cap}")]
    SizeCap { d: usize, n: usize, size: usize, cap: usize },

    /// Dimension / order mismatch between operands.
    #[error("shape error: {0}")]
    Shape(String),

    /// An interaction series violates its structural requirements.
    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    /// A grid model violates its structural requirements.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Eigensolver or other dense-linear-algebra failure.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Adaptive step size collapsed; carries the last trusted time.
    #[error("blow-up suspected at t = {last_time}: {detail}")]
    BlowupSuspected { last_time: f64, detail: String },

    /// The integrator violated a certified bound beyond tolerance.
    #[error("solver error: {0}")]
    Solver(String),

    /// A requested evaluation point lies outside the stored span.
    #[error("range error: {0}")]
    Range(String),

    /// Composite quadrature refused to certify the requested accuracy.
    #[error("quadrature error: estimate {estimate:.3e} > tol {tol:.3e}")]
    Quadrature { estimate: f64, tol: f64 },

    /// An algebraic identity check failed beyond its tolerance.
    #[error("identity violation: {what} (max deviation {max_dev:.3e})")]
    IdentityViolation { what: String, max_dev: f64 },

    /// Transport oracle deviation above `transport_tol`.
    #[error("transport mismatch: deviation {deviation:.3e} > tol {tol:.3e}")]
    TransportMismatch { deviation: f64, tol: f64 },

    /// Too few admissible points for a regression.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Config file parse failure.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Config key not recognized.
    #[error("unknown key '{key}' at line {line}")]
    UnknownKey { key: String, line: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
