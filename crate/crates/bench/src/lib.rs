//! Fixtures for the criterion benchmarks in `benches/`.

use covkit::chains::{make_phi, var1_generate};
use covkit::{ChainMatrix, Var1Model};

/// VAR(1) chain with a random coefficient matrix of the usual construction.
pub fn var1_chain(p: usize, n: usize, seed: u64) -> ChainMatrix {
    let phi = make_phi(p, seed, 1.0, 0.9).expect("valid coefficient settings");
    var1_generate(&Var1Model::new(phi, seed).expect("stable"), n).expect("n >= 2")
}
