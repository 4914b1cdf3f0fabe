//! Quick wall-clock measurement tables. The statistically careful
//! benchmarks live in the criterion bench crate; this command gives a
//! one-shot overview without the criterion harness.

use std::time::Instant;

use clap::ValueEnum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use eqgram_core::pipeline::{match_full, Mode, Verify};
use eqgram_core::solver::{solve_system, EquationSystem, SubstringEquation};
use eqgram_core::RunConfig;

use crate::Failure;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchSuite {
    Solver,
    Matching,
    All,
}

pub fn run(suite: BenchSuite) -> Result<(), Failure> {
    let cfg = RunConfig::default();
    if matches!(suite, BenchSuite::Solver | BenchSuite::All) {
        println!("solver: random systems (10 per row)");
        println!("  {:<8} {:<6} {:<10} {:<10}", "n", "b", "ms/system", "grammar");
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for &(n, b) in &[(500u64, 20usize), (1000, 50), (2000, 100), (4000, 100)] {
            let mut total_ms = 0.0;
            let mut max_size = 0u64;
            for _ in 0..10 {
                let mut eqs = Vec::with_capacity(b);
                for _ in 0..b {
                    let len = rng.gen_range(1..=n);
                    let x = rng.gen_range(0..=n - len);
                    let y = rng.gen_range(0..=n - len);
                    eqs.push(SubstringEquation::single(x, x + len, y, y + len));
                }
                let sys = EquationSystem { lengths: vec![n], equations: eqs };
                let t0 = Instant::now();
                let sol = solve_system(&sys, &cfg)?;
                total_ms += t0.elapsed().as_secs_f64() * 1000.0;
                max_size = max_size.max(sol.grammar.size() as u64);
            }
            println!("  {:<8} {:<6} {:<10.2} {:<10}", n, b, total_ms / 10.0, max_size);
        }
    }
    if matches!(suite, BenchSuite::Matching | BenchSuite::All) {
        println!("matching: periodic text, m=512 k=2");
        println!("  {:<8} {:<10} {:<14} {:<8}", "n", "ms", "charAccesses", "occ");
        let m = 512usize;
        let p: Vec<u8> = (0..m).map(|i| [b'a', b'b', b'c'][i % 3]).collect();
        for exp in 12..=16 {
            let n = 1usize << exp;
            let t: Vec<u8> = (0..n).map(|i| [b'a', b'b', b'c'][i % 3]).collect();
            let t0 = Instant::now();
            let rep = match_full(&p, &t, 2, Mode::Report, Verify::Kangaroo, &cfg)?;
            let ms = t0.elapsed().as_secs_f64() * 1000.0;
            println!(
                "  {:<8} {:<10.2} {:<14} {:<8}",
                n,
                ms,
                rep.counters.char_accesses,
                rep.occurrences.len()
            );
        }
    }
    Ok(())
}
