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

//! The polynomial symbol calculus in action: the two quantization paths,
//! composition against the operator product, translation, and the
//! serialization round trip.
//!
//! ```bash
//! cargo run --release --example wick_calculus
//! ```

use hepplab::fock::{build_basis, max_dev_on_sectors};
use hepplab::linalg::{c, cr, max_abs, CMat};
use hepplab::tensor::{Conjugation, ModeSpace};
use hepplab::wick::{
    compose_symbols, eval_symbol, quantize, quantize_ladder, symbol_bra, symbol_from_json, symbol_ket,
    symbol_to_json, translate_symbol, PolySymbol,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let d = 2;
    let mut a = CMat::zeros(d, d);
    a[(0, 0)] = cr(1.0);
    a[(1, 1)] = cr(1.4);
    let ms = ModeSpace::new(a, 1.0, Conjugation::Componentwise).unwrap();
    let basis = build_basis(ms, 8).unwrap();
    let eps = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(42);

    // a random (2,1) kernel through both quantization routes
    let rows = hepplab::tensor::sector_dim(d, 1).unwrap();
    let cols = hepplab::tensor::sector_dim(d, 2).unwrap();
    let k = CMat::from_fn(rows, cols, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    let b = PolySymbol::monomial(d, 2, 1, k).unwrap();
    let sector_path = quantize(&b, eps, &basis).unwrap();
    let ladder_path = quantize_ladder(&b, eps, &basis).unwrap();
    println!("two-path quantization deviation: {:.3e}", max_abs(&(&sector_path.mat - &ladder_path.mat)));

    // composition carries the commutator correction: <u,z> o <z,u>
    let u = vec![c(0.6, -0.2), c(0.1, 0.4)];
    let bra = symbol_bra(&u).unwrap();
    let ket = symbol_ket(&u).unwrap();
    let comp = compose_symbols(&bra, &ket, eps).unwrap();
    let z = vec![c(0.2, 0.3), c(-0.4, 0.1)];
    let uz: hepplab::linalg::C64 = u.iter().zip(&z).map(|(a, b)| a.conj() * b).sum();
    let n2: f64 = u.iter().map(|v| v.norm_sqr()).sum();
    println!(
        "composed symbol at a probe point: {:.6} (expected |<u,z>|^2 + eps|u|^2 = {:.6})",
        eval_symbol(&comp, &z).unwrap().re,
        uz.norm_sqr() + eps * n2
    );
    let lhs = quantize(&comp, eps, &basis).unwrap();
    let rhs = &quantize(&bra, eps, &basis).unwrap().mat * &quantize(&ket, eps, &basis).unwrap().mat;
    println!(
        "compose vs operator product on the guard band: {:.3e}",
        max_dev_on_sectors(&lhs.mat, &rhs, &basis, basis.max_total - 2)
    );

    // translation is Taylor re-centering
    let shift = vec![c(0.3, 0.0), c(0.0, -0.2)];
    let moved = translate_symbol(&b, &shift).unwrap();
    let zs: Vec<hepplab::linalg::C64> = z.iter().zip(&shift).map(|(a, b)| a + b).collect();
    println!(
        "translation pointwise check: {:.3e}",
        (eval_symbol(&moved, &z).unwrap() - eval_symbol(&b, &zs).unwrap()).norm()
    );

    // serialization round trip is bit-stable
    let json = symbol_to_json(&b).unwrap();
    let back = symbol_from_json(&json).unwrap();
    println!(
        "serialization round trip bit-stable: {}",
        symbol_to_json(&back).unwrap() == json
    );
    println!("serialized form ({} bytes)", json.len());
}
