//! Shared instance generators for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use eqgram_core::solver::{EquationSystem, SubstringEquation};

/// Random single-string system with n positions and b equations.
pub fn random_system(seed: u64, n: u64, b: usize) -> EquationSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eqs = Vec::with_capacity(b);
    for _ in 0..b {
        let len = rng.gen_range(1..=n);
        let x = rng.gen_range(0..=n - len);
        let y = rng.gen_range(0..=n - len);
        eqs.push(SubstringEquation::single(x, x + len, y, y + len));
    }
    EquationSystem { lengths: vec![n], equations: eqs }
}

/// Periodic text and pattern over {a, b, c} with a few planted mismatches.
pub fn periodic_instance(seed: u64, m: usize, n: usize, mutations: usize) -> (Vec<u8>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p: Vec<u8> = (0..m).map(|i| [b'a', b'b', b'c'][i % 3]).collect();
    let mut t: Vec<u8> = (0..n).map(|i| [b'a', b'b', b'c'][i % 3]).collect();
    for _ in 0..mutations {
        let j = rng.gen_range(0..n);
        t[j] = b'a' + rng.gen_range(0..3u8);
    }
    (p, t)
}

/// Random text with planted near-copies of a random pattern.
pub fn planted_instance(seed: u64, m: usize, n: usize, k: usize) -> (Vec<u8>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p: Vec<u8> = (0..m).map(|_| b'a' + rng.gen_range(0..4u8)).collect();
    let mut t: Vec<u8> = (0..n).map(|_| b'a' + rng.gen_range(0..4u8)).collect();
    for _ in 0..3 {
        let x = rng.gen_range(0..=n - m);
        t[x..x + m].copy_from_slice(&p);
        for _ in 0..k {
            let j = rng.gen_range(0..m);
            t[x + j] = b'a' + rng.gen_range(0..4u8);
        }
    }
    (p, t)
}
