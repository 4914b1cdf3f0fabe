//! Randomized property suites runnable from the CLI. Each property prints
//! one line; a failing property writes a counterexample file with enough
//! data to replay the instance and makes the command exit nonzero.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use clap::ValueEnum;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use eqgram_core::pillar::PillarIndex;
use eqgram_core::pipeline::{analyze_pattern, match_full, verify_analysis, Mode, Verify};
use eqgram_core::proxy::{
    build_enhanced, build_equation_system_hd, build_proxy, cores_equal_up_to_renaming,
    inference_summary, oracle_s_cores, proxy_expansions, CandidateSet,
};
use eqgram_core::solver::{
    oracle_universal_solution, partition_from_expansion, solve_multi, solve_system,
    EquationSystem, SubstringEquation,
};
use eqgram_core::strings::naive_occ_hk;
use eqgram_core::RunConfig;

use crate::Failure;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Solver,
    Pillar,
    Proxy,
    Pipeline,
    All,
}

/// A failed property: what went wrong plus a replayable instance dump.
struct Counterexample {
    detail: String,
    dump: String,
}

type PropResult = Result<String, Counterexample>;

pub fn run(suite: Suite, cfg: &RunConfig, inject_fault: bool) -> Result<(), Failure> {
    let mut props: Vec<(&str, &str, PropResult)> = Vec::new();
    if matches!(suite, Suite::Solver | Suite::All) {
        props.push(("solver", "universal-solution-exactness", solver_exactness(cfg, inject_fault)));
        props.push(("solver", "order-independence", solver_order_independence(cfg)));
        props.push(("solver", "multi-string-exactness", solver_multi_string(cfg)));
    }
    if matches!(suite, Suite::Pillar | Suite::All) {
        props.push(("pillar", "backend-equivalence", pillar_backends(cfg)));
    }
    if matches!(suite, Suite::Proxy | Suite::All) {
        props.push(("proxy", "inference-graph-laws", proxy_inference(cfg)));
        props.push(("proxy", "s-core-uniqueness", proxy_cores(cfg)));
        props.push(("proxy", "occurrence-preservation", proxy_preservation(cfg)));
    }
    if matches!(suite, Suite::Pipeline | Suite::All) {
        props.push(("pipeline", "analysis-invariants", pipeline_analysis(cfg)));
        props.push(("pipeline", "matches-naive-oracle", pipeline_end_to_end(cfg)));
    }
    let mut failed = 0usize;
    for (group, name, res) in props {
        match res {
            Ok(detail) => println!("[ok]   {group}/{name}: {detail}"),
            Err(ce) => {
                failed += 1;
                let path = format!("eqgram-counterexample-{group}-{name}.txt");
                if let Err(e) = std::fs::write(&path, &ce.dump) {
                    eprintln!("could not write {path}: {e}");
                }
                println!("[FAIL] {group}/{name}: {} (dump: {path})", ce.detail);
            }
        }
    }
    if failed > 0 {
        return Err(Failure::new(1, format!("{failed} properties failed")));
    }
    Ok(())
}

fn log_term(n: u64) -> f64 {
    (n as f64).log2() + 2.0
}

fn random_system(rng: &mut ChaCha8Rng, max_n: u64, max_b: usize) -> EquationSystem {
    let n = rng.gen_range(1..=max_n);
    let b = rng.gen_range(0..=max_b);
    let mut eqs = Vec::with_capacity(b);
    for _ in 0..b {
        let len = rng.gen_range(1..=n);
        let x = rng.gen_range(0..=n - len);
        let y = rng.gen_range(0..=n - len);
        eqs.push(SubstringEquation::single(x, x + len, y, y + len));
    }
    EquationSystem { lengths: vec![n], equations: eqs }
}

/// Serialization in the equation-file format, usable with `solve-eq`.
fn equations_text(sys: &EquationSystem) -> String {
    let mut out = String::new();
    if sys.lengths.len() == 1 {
        let _ = writeln!(out, "n {}", sys.lengths[0]);
        for e in &sys.equations {
            let _ = writeln!(out, "{} {} {} {}", e.x, e.x_end, e.y, e.y_end);
        }
    } else {
        let lens: Vec<String> = sys.lengths.iter().map(|l| l.to_string()).collect();
        let _ = writeln!(out, "lens {}", lens.join(" "));
        for e in &sys.equations {
            let _ = writeln!(out, "{} {} {} {} {} {}", e.i, e.x, e.x_end, e.j, e.y, e.y_end);
        }
    }
    out
}

fn bytes_hex(b: &[u8]) -> String {
    b.iter().map(|x| format!("{x:02x}")).collect()
}

fn instance_dump(seed: u64, k: usize, p: &[u8], t: &[u8], note: &str) -> String {
    format!("seed {seed}\nk {k}\npattern_hex {}\ntext_hex {}\n{note}\n", bytes_hex(p), bytes_hex(t))
}

fn solver_exactness(cfg: &RunConfig, inject_fault: bool) -> PropResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x01);
    let mut c_iter: f64 = 0.0;
    let mut c_size: f64 = 0.0;
    let mut c_lz: f64 = 0.0;
    for idx in 0..100 {
        let sys = random_system(&mut rng, 500, 40);
        let sol = solve_system(&sys, cfg).expect("solver failed");
        let got = partition_from_expansion(&sol.grammar, 1 << 20).expect("expansion");
        let mut want = oracle_universal_solution(&sys, cfg).expect("oracle");
        if inject_fault && idx == 0 && !want.is_empty() {
            let last = want.len() - 1;
            want[last] = want[last].wrapping_add(1);
        }
        if got != want {
            return Err(Counterexample {
                detail: format!("partition differs from the oracle on system {idx}"),
                dump: equations_text(&sys),
            });
        }
        let n = sys.lengths[0];
        let b = sys.equations.len() as u64;
        let lt = log_term(n);
        let iters = sol.counters.while_iterations as f64;
        if iters > 8.0 * b as f64 * lt {
            return Err(Counterexample {
                detail: format!("iteration bound violated on system {idx}"),
                dump: equations_text(&sys),
            });
        }
        if b > 0 {
            c_iter = c_iter.max(iters / (b as f64 * lt));
        }
        c_size = c_size.max(sol.counters.grammar_size as f64 / ((b + 1) as f64 * lt * lt * lt));
        c_lz = c_lz.max(sol.counters.lz_size as f64 / ((b + 1) as f64 * lt));
    }
    Ok(format!("100 systems, C_iter={c_iter:.3} (<=8) C_size={c_size:.3} (<=64) C_lz={c_lz:.3} (<=8)"))
}

fn solver_order_independence(cfg: &RunConfig) -> PropResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x02);
    for _ in 0..20 {
        let sys = random_system(&mut rng, 300, 25);
        let sol = solve_system(&sys, cfg).expect("solver failed");
        let base = partition_from_expansion(&sol.grammar, 1 << 20).expect("expansion");
        for _ in 0..3 {
            let mut shuffled = sys.clone();
            shuffled.equations.shuffle(&mut rng);
            let sol2 = solve_system(&shuffled, cfg).expect("solver failed");
            let got = partition_from_expansion(&sol2.grammar, 1 << 20).expect("expansion");
            if got != base {
                return Err(Counterexample {
                    detail: "equation order changed the partition".into(),
                    dump: equations_text(&shuffled),
                });
            }
        }
    }
    Ok("20 systems x 3 permutations".into())
}

fn solver_multi_string(cfg: &RunConfig) -> PropResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x03);
    for idx in 0..30 {
        let s = rng.gen_range(2..=4usize);
        let lengths: Vec<u64> = (0..s).map(|_| rng.gen_range(1..=200u64)).collect();
        let b = rng.gen_range(0..=20usize);
        let mut eqs = Vec::new();
        for _ in 0..b {
            let i = rng.gen_range(0..s);
            let j = rng.gen_range(0..s);
            let len = rng.gen_range(1..=lengths[i].min(lengths[j]));
            let x = rng.gen_range(0..=lengths[i] - len);
            let y = rng.gen_range(0..=lengths[j] - len);
            eqs.push(SubstringEquation { i, x, x_end: x + len, j, y, y_end: y + len });
        }
        let sys = EquationSystem { lengths, equations: eqs };
        let sol = solve_multi(&sys, cfg).expect("solver failed");
        let got = partition_from_expansion(&sol.grammar, 1 << 20).expect("expansion");
        let want = oracle_universal_solution(&sys, cfg).expect("oracle");
        if got != want {
            return Err(Counterexample {
                detail: format!("multi-string partition differs on system {idx}"),
                dump: equations_text(&sys),
            });
        }
    }
    Ok("30 multi-string systems".into())
}

fn pillar_backends(cfg: &RunConfig) -> PropResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x04);
    for _ in 0..25 {
        let sys = random_system(&mut rng, 512, 30);
        let n = sys.lengths[0];
        let sol = solve_system(&sys, cfg).expect("solver failed");
        let g = sol.grammar;
        let compressed = PillarIndex::preprocess(&g).expect("preprocess");
        let chars = g.expand(g.starts()[0], n).expect("expand");
        let plain = PillarIndex::plain(vec![chars]);
        let hc = compressed.handle(0).unwrap();
        let hp = plain.handle(0).unwrap();
        for q in 0..400 {
            let bad = |what: &str| {
                Err(Counterexample {
                    detail: format!("{what} differs between backends (query {q})"),
                    dump: equations_text(&sys),
                })
            };
            match rng.gen_range(0..8) {
                0..=2 => {
                    let i = rng.gen_range(0..n);
                    if compressed.p_access(hc, i).unwrap() != plain.p_access(hp, i).unwrap() {
                        return bad("access");
                    }
                }
                3..=4 => {
                    let a = rng.gen_range(0..n);
                    let b = rng.gen_range(0..n);
                    let x = compressed
                        .p_lcp(
                            compressed.p_extract(hc, a, n).unwrap(),
                            compressed.p_extract(hc, b, n).unwrap(),
                        )
                        .unwrap();
                    let y = plain
                        .p_lcp(plain.p_extract(hp, a, n).unwrap(), plain.p_extract(hp, b, n).unwrap())
                        .unwrap();
                    if x != y {
                        return bad("lcp");
                    }
                }
                5..=6 => {
                    let a = rng.gen_range(1..=n);
                    let b = rng.gen_range(1..=n);
                    let x = compressed
                        .p_lcs(
                            compressed.p_extract(hc, 0, a).unwrap(),
                            compressed.p_extract(hc, 0, b).unwrap(),
                        )
                        .unwrap();
                    let y = plain
                        .p_lcs(plain.p_extract(hp, 0, a).unwrap(), plain.p_extract(hp, 0, b).unwrap())
                        .unwrap();
                    if x != y {
                        return bad("lcs");
                    }
                }
                _ => {
                    let pl = rng.gen_range(1..=n);
                    let ps = rng.gen_range(0..=n - pl);
                    let tl = rng.gen_range(pl..=(2 * pl).min(n));
                    let ts = rng.gen_range(0..=n - tl);
                    let x = compressed
                        .p_ipm(
                            compressed.p_extract(hc, ps, ps + pl).unwrap(),
                            compressed.p_extract(hc, ts, ts + tl).unwrap(),
                        )
                        .unwrap();
                    let y = plain
                        .p_ipm(
                            plain.p_extract(hp, ps, ps + pl).unwrap(),
                            plain.p_extract(hp, ts, ts + tl).unwrap(),
                        )
                        .unwrap();
                    if x != y {
                        return bad("ipm");
                    }
                }
            }
        }
    }
    Ok("25 grammars x 400 queries, no fingerprint inconsistencies".into())
}

fn hd_instance(rng: &mut ChaCha8Rng) -> (Vec<u8>, Vec<u8>, Vec<u64>) {
    let m = rng.gen_range(1..=96usize);
    let n = m + rng.gen_range(0..=m);
    let sigma = rng.gen_range(2..=4u8);
    let p: Vec<u8> = (0..m).map(|_| b'a' + rng.gen_range(0..sigma)).collect();
    let t: Vec<u8> = (0..n).map(|_| b'a' + rng.gen_range(0..sigma)).collect();
    let last = (n - m) as u64;
    let mut set: BTreeSet<u64> = BTreeSet::from([0, last]);
    for _ in 0..rng.gen_range(0..5usize) {
        set.insert(rng.gen_range(0..=last));
    }
    (p, t, set.into_iter().collect())
}

fn proxy_inference(cfg: &RunConfig) -> PropResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x05);
    for _ in 0..150 {
        let (p, t, s) = hd_instance(&mut rng);
        let (m, n) = (p.len(), t.len());
        let enhanced = build_enhanced(&p, &t, &s, m).unwrap();
        let summary = inference_summary(m as u64, n as u64, &enhanced).unwrap();
        // Rebuild the graph explicitly and compare residue classes.
        let mut parent: Vec<usize> = (0..m + n).collect();
        fn find(parent: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while parent[r] != r {
                r = parent[r];
            }
            let mut c = x;
            while parent[c] != r {
                let nx = parent[c];
                parent[c] = r;
                c = nx;
            }
            r
        }
        for &pos in &s {
            for i in 0..m {
                let a = find(&mut parent, i);
                let b = find(&mut parent, m + pos as usize + i);
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut red = BTreeSet::new();
        for &pos in &s {
            for i in 0..m {
                if p[i] != t[pos as usize + i] {
                    let r = find(&mut parent, i);
                    red.insert(r);
                }
            }
        }
        let comps: BTreeSet<usize> = (0..m + n).map(|x| find(&mut parent, x)).collect();
        let mut bad = comps.len() as u64 != summary.g;
        for r in 0..summary.g {
            let root = find(&mut parent, m + r as usize);
            if red.contains(&root) != summary.red_residues.contains(&r) {
                bad = true;
            }
        }
        if bad {
            return Err(Counterexample {
                detail: "residue summary disagrees with the explicit graph".into(),
                dump: instance_dump(cfg.seed, 0, &p, &t, &format!("alignments {s:?}")),
            });
        }
    }
    Ok("150 instances, residue summary = explicit union-find graph".into())
}

fn proxy_cores(cfg: &RunConfig) -> PropResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x06);
    for _ in 0..100 {
        let (p, t, s) = hd_instance(&mut rng);
        let c = CandidateSet::Explicit(s.clone());
        let out = build_proxy(&p, &t, p.len(), &c, cfg).expect("proxy construction failed");
        let (texp, pexp) = proxy_expansions(&out, 1 << 16).unwrap();
        let (core_p, core_t) = oracle_s_cores(&p, &t, &s).unwrap();
        let exp: Vec<_> = texp.iter().chain(&pexp).copied().collect();
        let core: Vec<_> = core_t.iter().chain(&core_p).copied().collect();
        if !cores_equal_up_to_renaming(&exp, &core) {
            return Err(Counterexample {
                detail: "proxy strings differ from the oracle cores".into(),
                dump: instance_dump(cfg.seed, 0, &p, &t, &format!("alignments {s:?}")),
            });
        }
        let enhanced = build_enhanced(&p, &t, &s, p.len()).unwrap();
        let _ = build_equation_system_hd(p.len() as u64, t.len() as u64, &enhanced);
    }
    Ok("100 instances, proxies = oracle cores up to renaming".into())
}

fn proxy_preservation(cfg: &RunConfig) -> PropResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x07);
    for _ in 0..100 {
        let m = rng.gen_range(1..=96usize);
        let n = m + rng.gen_range(0..=m / 2);
        let sigma = rng.gen_range(2..=4u8);
        let k = rng.gen_range(1..=8usize);
        let p: Vec<u8> = (0..m).map(|_| b'a' + rng.gen_range(0..sigma)).collect();
        let mut t: Vec<u8> = (0..n).map(|_| b'a' + rng.gen_range(0..sigma)).collect();
        if rng.gen_bool(0.5) {
            let x = rng.gen_range(0..=n - m);
            t[x..x + m].copy_from_slice(&p);
        }
        let r = rng.gen_range(k..=10 * k);
        let cands: Vec<u64> = naive_occ_hk(&p, &t, r).into_iter().map(|x| x as u64).collect();
        let out =
            build_proxy(&p, &t, k, &CandidateSet::Explicit(cands), cfg).expect("proxy failed");
        let (t_sharp, p_sharp) = proxy_expansions(&out, 1 << 16).unwrap();
        if naive_occ_hk(&p_sharp, &t_sharp, k) != naive_occ_hk(&p, &t, k) {
            return Err(Counterexample {
                detail: "proxy strings changed the k-mismatch occurrence set".into(),
                dump: instance_dump(cfg.seed, k, &p, &t, &format!("filter_k {r}")),
            });
        }
    }
    Ok("100 planted instances, occurrence sets preserved".into())
}

fn pipeline_analysis(cfg: &RunConfig) -> PropResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x08);
    for _ in 0..300 {
        let m = rng.gen_range(8..=384usize);
        let p: Vec<u8> = if rng.gen_bool(0.3) {
            let q = rng.gen_range(1..=4usize);
            let seed: Vec<u8> = (0..q).map(|_| b'a' + rng.gen_range(0..3u8)).collect();
            (0..m).map(|i| seed[i % q]).collect()
        } else {
            let sigma = rng.gen_range(1..=8u8);
            (0..m).map(|_| b'a' + rng.gen_range(0..sigma)).collect()
        };
        let k = rng.gen_range(1..=(m / 8).max(1));
        let a = analyze_pattern(&p, k).expect("analysis failed");
        if verify_analysis(&p, k, &a).is_err() {
            return Err(Counterexample {
                detail: "analysis witness failed re-verification".into(),
                dump: instance_dump(cfg.seed, k, &p, &[], ""),
            });
        }
    }
    Ok("300 patterns, every witness re-verified".into())
}

fn pipeline_end_to_end(cfg: &RunConfig) -> PropResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x09);
    for idx in 0..120 {
        let m = rng.gen_range(1..=160usize);
        let n = m + rng.gen_range(0..=m / 2);
        let sigma = rng.gen_range(2..=4u8);
        let k = rng.gen_range(1..=8usize);
        let p: Vec<u8> = (0..m).map(|_| b'a' + rng.gen_range(0..sigma)).collect();
        let mut t: Vec<u8> = (0..n).map(|_| b'a' + rng.gen_range(0..sigma)).collect();
        for _ in 0..rng.gen_range(0..3usize) {
            let x = rng.gen_range(0..=n - m);
            t[x..x + m].copy_from_slice(&p);
            for _ in 0..rng.gen_range(0..=k) {
                let j = rng.gen_range(0..m);
                t[x + j] = b'a' + rng.gen_range(0..sigma);
            }
        }
        let want: Vec<u64> = naive_occ_hk(&p, &t, k).into_iter().map(|x| x as u64).collect();
        let rep = match_full(&p, &t, k, Mode::Report, Verify::Kangaroo, cfg).expect("pipeline");
        if rep.occurrences != want {
            return Err(Counterexample {
                detail: format!("report differs from the naive matcher (instance {idx})"),
                dump: instance_dump(cfg.seed, k, &p, &t, ""),
            });
        }
        if idx < 30 {
            let rep2 =
                match_full(&p, &t, k, Mode::Report, Verify::Naive, cfg).expect("pipeline");
            if rep2.occurrences != want {
                return Err(Counterexample {
                    detail: format!("verification backends disagree (instance {idx})"),
                    dump: instance_dump(cfg.seed, k, &p, &t, ""),
                });
            }
        }
    }
    Ok("120 planted instances = naive oracle, 30 backend cross-checks".into())
}
