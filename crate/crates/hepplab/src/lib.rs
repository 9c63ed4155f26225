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

//! A desk-scale numerical laboratory for semiclassical coherent-state
//! dynamics of self-interacting bosonic fields on truncated Fock spaces.
//!
//! The crate builds finite-mode truncations of bosonic quantum field
//! Hamiltonians `H = dGamma(A) + Wick(F_V)`, integrates the associated
//! nonlinear classical field equation and the time-dependent quadratic
//! (Bogoliubov) dynamics along its orbits, and assembles higher-order
//! coherent-state approximants whose error against exact matrix evolution
//! scales as `eps^((N+1)/2)`.
//!
//! Layer map:
//!
//! * [`tensor`] — symmetric tensor algebra over `C^d` (multi-index bases,
//!   symmetrization, partial contractions, conjugations).
//! * [`fock`] — truncated Fock space: ladder, field, Weyl, number and
//!   second-quantization operators, coherent states.
//! * [`wick`] — polynomial Wick symbols: quantization, derivatives,
//!   composition, translation, serialization.
//! * [`classical`] — mean-field flow for a general interaction series:
//!   adaptive integration, phase accumulation, lifespan bounds, the
//!   classical-action identity.
//! * [`bogoliubov`] — quadratic propagators along a trajectory, the
//!   linear/antilinear symplectic split and symbol transport.
//! * [`hepp`] — correction symbols, order-N approximants, exact reference
//!   evolution and convergence-rate studies.
//! * [`pphi2`] — momentum-grid field models: kernels, FFT nonlinearity,
//!   energy bookkeeping, phase formulas and an analytic-interaction preset.
//! * [`cli`] — batch front door: config files, experiment orchestration,
//!   report emission.

pub mod bogoliubov;
pub mod classical;
pub mod cli;
pub mod config;
pub mod error;
pub mod fock;
pub mod hepp;
pub mod linalg;
pub mod ode;
pub mod pphi2;
pub mod suites;
pub mod tensor;
pub mod wick;

pub use config::Tolerances;
pub use error::{Error, Result};
