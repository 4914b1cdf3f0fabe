//! Pattern matching with up to k mismatches, end to end: analyze the
//! pattern into breaks, repetitive regions, or an approximate period;
//! generate candidate positions by Monte-Carlo sampling; filter them by
//! exact capped counting; build proxy strings; and verify each candidate
//! over the compressed proxies by kangaroo jumping on LCE queries.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::config::{Counters, RunConfig};
use crate::error::{Error, Result};
use crate::pillar::{PillarHandle, PillarIndex};
use crate::proxy::{build_proxy, CandidateSet};
use crate::strings::{
    exact_occurrences, hamming_mismatches_capped, naive_occ_hk, rotate, rotation_index,
    smallest_period, ArithmeticProgression, MismatchInfo,
};

/// One repetitive region of the pattern: positions [start, start+len) are
/// within the mismatch budget of repeating their length-q_len prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub start: u64,
    pub len: u64,
    pub q_len: u64,
}

/// Structural classification of the pattern relative to the mismatch
/// budget k.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternAnalysis {
    /// Exactly 2k disjoint fragments of length break_len, each with period
    /// greater than m/128k.
    Breaks { starts: Vec<u64>, break_len: u64 },
    /// Disjoint repetitive regions of total length at least 3m/8.
    Regions { regions: Vec<Region> },
    /// The whole pattern is within 8k mismatches of a periodic string with
    /// period q_len at most m/128k, anchored by rotating
    /// P[q_start..q_start+q_len) by rot = q_start mod q_len.
    Periodic { q_start: u64, q_len: u64, rot: u64 },
    /// No witness found (or k out of range); callers run the naive matcher.
    Fallback,
}

fn ceil_div(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

/// Mismatches of s against the periodic extension of q anchored at s's
/// first position.
fn mismatches_vs_period(s: &[u8], q: &[u8]) -> Vec<usize> {
    (0..s.len()).filter(|&i| s[i] != q[i % q.len()]).collect()
}

/// Classifies the pattern. Requires k >= 1; with floor(m/8k) < 1 the
/// fallback signal is returned immediately.
pub fn analyze_pattern(p: &[u8], k: usize) -> Result<PatternAnalysis> {
    let m = p.len() as u64;
    if k == 0 {
        return Err(Error::input("analysis requires k >= 1"));
    }
    let k = k as u64;
    let flen = m / (8 * k);
    if flen < 1 {
        return Ok(PatternAnalysis::Fallback);
    }
    let mut breaks: Vec<u64> = Vec::new();
    let mut regions: Vec<Region> = Vec::new();
    let mut region_total = 0u64;
    let mut pos = 0u64;
    while pos + flen <= m {
        let frag = &p[pos as usize..(pos + flen) as usize];
        let q = smallest_period(frag)? as u64;
        if q * 128 * k > m {
            breaks.push(pos);
            if breaks.len() as u64 == 2 * k {
                return Ok(PatternAnalysis::Breaks { starts: breaks, break_len: flen });
            }
            pos += flen;
            continue;
        }
        // Grow a repetitive region until its mismatch count catches up
        // with the budget ceil(8k*len/m); the count can never overshoot,
        // so the stop condition is exact equality.
        let qs = &p[pos as usize..(pos + q) as usize];
        let mut len = flen;
        let mut mis = 0u64;
        let completed = loop {
            if mis == ceil_div(8 * k * len, m) {
                break true;
            }
            if pos + len == m {
                break false;
            }
            if p[(pos + len) as usize] != qs[(len % q) as usize] {
                mis += 1;
            }
            len += 1;
        };
        if completed {
            regions.push(Region { start: pos, len, q_len: q });
            region_total += len;
            if region_total * 8 >= 3 * m {
                return Ok(PatternAnalysis::Regions { regions });
            }
        }
        pos += len;
    }
    // Neither enough breaks nor enough region mass: look for a global
    // approximate period among the low-period aligned fragments.
    let mut f = 0u64;
    while f + flen <= m {
        let frag = &p[f as usize..(f + flen) as usize];
        let q = smallest_period(frag)? as u64;
        if q * 128 * k <= m {
            let rot = f % q;
            let q0 = rotate(&p[f as usize..(f + q) as usize], rot as usize);
            let delta = mismatches_vs_period(p, &q0).len() as u64;
            if delta < 8 * k {
                return Ok(PatternAnalysis::Periodic { q_start: f, q_len: q, rot });
            }
        }
        f += flen;
    }
    Ok(PatternAnalysis::Fallback)
}

/// Re-derives every invariant of an analysis witness from scratch.
pub fn verify_analysis(p: &[u8], k: usize, a: &PatternAnalysis) -> Result<()> {
    let m = p.len() as u64;
    let k = k as u64;
    let fail = |msg: String| Err(Error::contract(msg));
    match a {
        PatternAnalysis::Fallback => Ok(()),
        PatternAnalysis::Breaks { starts, break_len } => {
            if *break_len != m / (8 * k) {
                return fail(format!("break length {} != {}", break_len, m / (8 * k)));
            }
            if starts.len() as u64 != 2 * k {
                return fail(format!("{} breaks, expected {}", starts.len(), 2 * k));
            }
            let mut prev_end = 0u64;
            for &s in starts {
                if s < prev_end || s + break_len > m {
                    return fail(format!("break at {s} overlaps or overflows"));
                }
                prev_end = s + break_len;
                let q = smallest_period(&p[s as usize..(s + break_len) as usize])? as u64;
                if q * 128 * k <= m {
                    return fail(format!("break at {s} has period {q}, too small"));
                }
            }
            Ok(())
        }
        PatternAnalysis::Regions { regions } => {
            let total: u64 = regions.iter().map(|r| r.len).sum();
            if total * 8 < 3 * m {
                return fail(format!("region mass {total} below 3m/8"));
            }
            let mut prev_end = 0u64;
            for r in regions {
                if r.start < prev_end || r.start + r.len > m {
                    return fail("region overlaps or overflows".into());
                }
                prev_end = r.start + r.len;
                if r.len < m / (8 * k) {
                    return fail(format!("region length {} too small", r.len));
                }
                if r.q_len * 128 * k > m {
                    return fail(format!("region period {} too large", r.q_len));
                }
                let qs = &p[r.start as usize..(r.start + r.q_len) as usize];
                let seg = &p[r.start as usize..(r.start + r.len) as usize];
                let mis = mismatches_vs_period(seg, qs).len() as u64;
                let want = ceil_div(8 * k * r.len, m);
                if mis != want {
                    return fail(format!("region mismatches {mis} != budget {want}"));
                }
            }
            Ok(())
        }
        PatternAnalysis::Periodic { q_start, q_len, rot } => {
            if *q_len * 128 * k > m {
                return fail(format!("period {q_len} too large"));
            }
            if *rot != q_start % q_len {
                return fail(format!("rotation {rot} != {} mod {}", q_start, q_len));
            }
            let q0 = rotate(&p[*q_start as usize..(*q_start + *q_len) as usize], *rot as usize);
            let delta = mismatches_vs_period(p, &q0).len() as u64;
            if delta >= 8 * k {
                return fail(format!("distance {delta} to the periodic string not below 8k"));
            }
            Ok(())
        }
    }
}

/// Periodic-structure candidate extraction: votes the dominant rotation of
/// q among the fixed trailing blocks, extends the consistent stretch in
/// both directions, then emits either the phase-aligned progression or
/// sampled mismatch-difference positions.
#[allow(clippy::too_many_arguments)]
fn comp_structure(
    pp: &[u8],
    tp: &[u8],
    kp: usize,
    d: usize,
    q: &[u8],
    small: bool,
    rng: &mut ChaCha8Rng,
    sample_rounds: usize,
) -> Result<CandidateSet> {
    let mp = pp.len();
    let q_len = q.len();
    if tp.len() < mp || 4 * d * q_len > mp || d == 0 {
        return Ok(CandidateSet::Explicit(Vec::new()));
    }
    let base = mp - 4 * d * q_len;
    let mut votes: HashMap<usize, (usize, usize)> = HashMap::new();
    for j in 0..4 * d {
        let s = base + j * q_len;
        if let Some(a) = rotation_index(&tp[s..s + q_len], q)? {
            let e = votes.entry(a).or_insert((0, s));
            e.0 += 1;
        }
    }
    let thr = 3 * d - kp.min(3 * d);
    let Some((&a_star, &(_, y))) =
        votes.iter().filter(|(_, (c, _))| *c >= thr).max_by_key(|(_, (c, _))| *c)
    else {
        return Ok(CandidateSet::Explicit(Vec::new()));
    };
    let pred = |s: usize| {
        let t = (s as i64 - y as i64 - a_star as i64).rem_euclid(q_len as i64) as usize;
        q[t]
    };
    let budget = d + kp;
    let mut l = y;
    let mut mis = 0usize;
    while l > 0 {
        if tp[l - 1] != pred(l - 1) {
            if mis + 1 > budget {
                break;
            }
            mis += 1;
        }
        l -= 1;
    }
    let mut r = y + q_len;
    let mut mis_r = 0usize;
    while r < tp.len() {
        if tp[r] != pred(r) {
            if mis_r + 1 > budget {
                break;
            }
            mis_r += 1;
        }
        r += 1;
    }
    if r - l < mp {
        return Ok(CandidateSet::Explicit(Vec::new()));
    }
    let span = r - l - mp;
    if !small {
        let a0 = (y + a_star - l) % q_len;
        if a0 > span {
            return Ok(CandidateSet::Explicit(Vec::new()));
        }
        return Ok(CandidateSet::Progression(ArithmeticProgression {
            start: (a0 + l) as u64,
            diff: q_len as u64,
            count: ((span - a0) / q_len + 1) as u64,
        }));
    }
    let mis_p = mismatches_vs_period(pp, q);
    if mis_p.is_empty() {
        return Ok(CandidateSet::Explicit(Vec::new()));
    }
    let mis_t: Vec<usize> = (l..r).filter(|&s| tp[s] != pred(s)).collect();
    let mut out = BTreeSet::new();
    for _ in 0..sample_rounds {
        let yp = mis_p[rng.gen_range(0..mis_p.len())];
        for &yt in &mis_t {
            let yt = yt - l;
            if yt >= yp && yt - yp <= span {
                out.insert((yt - yp + l) as u64);
            }
        }
    }
    Ok(CandidateSet::Explicit(out.into_iter().collect()))
}

/// Monte-Carlo candidate generation for one text block (|T| <= 3m/2).
pub fn candidates_from_analysis(
    p: &[u8],
    t: &[u8],
    k: usize,
    a: &PatternAnalysis,
    rng: &mut ChaCha8Rng,
    cfg: &RunConfig,
) -> Result<CandidateSet> {
    let m = p.len() as u64;
    let n = t.len() as u64;
    if m > n {
        return Ok(CandidateSet::Explicit(Vec::new()));
    }
    let last = n - m;
    let rounds = ((cfg.repetition_factor as f64) * (n.max(2) as f64).log2()).ceil() as usize;
    match a {
        PatternAnalysis::Fallback => {
            Ok(CandidateSet::Explicit((0..=last).collect()))
        }
        PatternAnalysis::Breaks { starts, break_len } => {
            let mut cache: HashMap<u64, Vec<u64>> = HashMap::new();
            let mut out: BTreeSet<u64> = BTreeSet::new();
            for _ in 0..rounds {
                let beta = starts[rng.gen_range(0..starts.len())];
                let cands = cache.entry(beta).or_insert_with(|| {
                    let b = &p[beta as usize..(beta + break_len) as usize];
                    exact_occurrences(b, t)
                        .into_iter()
                        .map(|o| o as u64)
                        .filter(|&o| o >= beta && o - beta <= last)
                        .map(|o| o - beta)
                        .collect()
                });
                out.extend(cands.iter().copied());
            }
            Ok(CandidateSet::Explicit(out.into_iter().collect()))
        }
        PatternAnalysis::Regions { regions } => {
            let total: u64 = regions.iter().map(|r| r.len).sum();
            let mut out: BTreeSet<u64> = BTreeSet::new();
            for _ in 0..rounds {
                // Sample a region with probability proportional to length.
                let mut pick = rng.gen_range(0..total);
                let reg = regions
                    .iter()
                    .find(|r| {
                        if pick < r.len {
                            true
                        } else {
                            pick -= r.len;
                            false
                        }
                    })
                    .expect("weights cover the range");
                let rl = reg.len;
                let rp = &p[reg.start as usize..(reg.start + rl) as usize];
                let qs = &p[reg.start as usize..(reg.start + reg.q_len) as usize];
                let d = ceil_div(8 * (k as u64) * rl, m) as usize;
                let kp = (4 * (k as u64) * rl / m) as usize;
                // Slide segments so every region occurrence is fully inside
                // one of them.
                let step = ceil_div(rl, 2);
                let cap = 3 * rl / 2;
                let mut x = 0u64;
                loop {
                    let end = (x + cap).min(n);
                    if end - x >= rl {
                        let seg = &t[x as usize..end as usize];
                        let c = comp_structure(rp, seg, kp, d, qs, true, rng, 1)?;
                        for z in c.members() {
                            let u = x + z;
                            if u >= reg.start && u - reg.start <= last {
                                out.insert(u - reg.start);
                            }
                        }
                    }
                    if end == n {
                        break;
                    }
                    x += step;
                }
            }
            Ok(CandidateSet::Explicit(out.into_iter().collect()))
        }
        PatternAnalysis::Periodic { q_start, q_len, rot } => {
            let q0 = rotate(
                &p[*q_start as usize..(*q_start + *q_len) as usize],
                *rot as usize,
            );
            let delta = mismatches_vs_period(p, &q0).len();
            let small = delta >= 2 * k;
            let d = delta.max(2 * k);
            comp_structure(p, t, k, d, &q0, small, rng, rounds)
        }
    }
}

/// Keeps explicit candidates whose true distance is at most 10k;
/// progressions pass through unchanged.
pub fn filter_candidates(p: &[u8], t: &[u8], k: usize, c: CandidateSet) -> Result<CandidateSet> {
    match c {
        CandidateSet::Progression(_) => Ok(c),
        CandidateSet::Explicit(v) => {
            let m = p.len();
            let mut keep = Vec::new();
            for x in v {
                let w = &t[x as usize..x as usize + m];
                if hamming_mismatches_capped(p, w, 10 * k)?.is_some() {
                    keep.push(x);
                }
            }
            Ok(CandidateSet::Explicit(keep))
        }
    }
}

/// Report or decide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Report,
    Decide,
}

/// Verification backend: kangaroo jumps over the compressed proxy grammar,
/// or the same jumps over the raw strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verify {
    Kangaroo,
    Naive,
}

/// Matching outcome. In Decide mode `occurrences` holds at most one
/// witness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchReport {
    pub occurrences: Vec<u64>,
    pub mi: Option<Vec<(u64, MismatchInfo<u8>)>>,
    pub counters: Counters,
}

/// True if the window at x matches with at most k mismatches, counted by
/// iterated LCE jumps (at most k+1 of them).
fn kangaroo_accepts(
    ix: &PillarIndex,
    ph: PillarHandle,
    th: PillarHandle,
    x: u64,
    k: usize,
) -> Result<bool> {
    let m = ph.len;
    let tw = ix.p_extract(th, x, x + m)?;
    let mut i = 0u64;
    let mut cnt = 0usize;
    loop {
        let pa = ix.p_extract(ph, i, m)?;
        let ta = ix.p_extract(tw, i, m)?;
        i += ix.p_lcp(pa, ta)?;
        if i >= m {
            return Ok(cnt <= k);
        }
        cnt += 1;
        if cnt > k {
            return Ok(false);
        }
        i += 1;
    }
}

/// Matching within one block (|T| <= 3m/2): the full candidate/proxy
/// pipeline, with naive fallbacks for small or extreme parameters.
pub fn match_block(
    p: &[u8],
    t: &[u8],
    k: usize,
    mode: Mode,
    verify: Verify,
    rng: &mut ChaCha8Rng,
    cfg: &RunConfig,
) -> Result<MatchReport> {
    let m = p.len() as u64;
    let n = t.len() as u64;
    if m == 0 || m > n {
        return Err(Error::input("need 1 <= |P| <= |T|"));
    }
    if 2 * n > 3 * m {
        return Err(Error::input("block text longer than 3|P|/2"));
    }
    let last = n - m;
    let mut counters = Counters::default();
    let mut occurrences: Vec<u64>;
    if k as u64 >= m {
        occurrences = (0..=last).collect();
    } else if k == 0 {
        occurrences = exact_occurrences(p, t).into_iter().map(|x| x as u64).collect();
    } else if m < 64 || m / (8 * k as u64) < 1 {
        occurrences = naive_occ_hk(p, t, k).into_iter().map(|x| x as u64).collect();
    } else {
        let analysis = analyze_pattern(p, k)?;
        debug_assert!(verify_analysis(p, k, &analysis).is_ok());
        if matches!(analysis, PatternAnalysis::Fallback) {
            occurrences = naive_occ_hk(p, t, k).into_iter().map(|x| x as u64).collect();
        } else {
            let c = candidates_from_analysis(p, t, k, &analysis, rng, cfg)?;
            let c = filter_candidates(p, t, k, c)?;
            let ix = match verify {
                Verify::Kangaroo => {
                    let proxy = build_proxy(p, t, k, &c, cfg)?;
                    PillarIndex::preprocess(&proxy.grammar)?
                }
                Verify::Naive => PillarIndex::plain_bytes(&[t, p]),
            };
            let th = ix.handle(0)?;
            let ph = ix.handle(1)?;
            let mut members = c.members();
            members.sort_unstable();
            members.dedup();
            occurrences = Vec::new();
            for x in members {
                if x > last {
                    continue;
                }
                if kangaroo_accepts(&ix, ph, th, x, k)? {
                    occurrences.push(x);
                    if mode == Mode::Decide {
                        break;
                    }
                }
            }
            counters.absorb(&ix.counters());
        }
    }
    if mode == Mode::Decide {
        occurrences.truncate(1);
    }
    let mi = if cfg.collect_mi {
        let mut v = Vec::with_capacity(occurrences.len());
        for &x in &occurrences {
            let w = &t[x as usize..(x + m) as usize];
            let info = hamming_mismatches_capped(p, w, p.len())?.expect("cap = m");
            v.push((x, info));
        }
        Some(v)
    } else {
        None
    };
    Ok(MatchReport { occurrences, mi, counters })
}

/// Matching over a full text: covers T with overlapping segments of length
/// at most 3m/2 stepping by ceil(m/2), runs the block pipeline on each
/// with an independently derived rng, and unions the reports.
pub fn match_full(
    p: &[u8],
    t: &[u8],
    k: usize,
    mode: Mode,
    verify: Verify,
    cfg: &RunConfig,
) -> Result<MatchReport> {
    let m = p.len() as u64;
    let n = t.len() as u64;
    if m == 0 || m > n {
        return Err(Error::input("need 1 <= |P| <= |T|"));
    }
    let step = ceil_div(m, 2);
    let cap = 3 * m / 2;
    let mut all: BTreeSet<u64> = BTreeSet::new();
    let mut counters = Counters::default();
    let mut block_idx = 0u64;
    let mut x = 0u64;
    loop {
        let end = (x + cap).min(n);
        if end - x >= m {
            let seed = cfg.seed ^ block_idx.wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let seg = &t[x as usize..end as usize];
            let rep = match_block(p, seg, k, mode, verify, &mut rng, cfg)?;
            counters.absorb(&rep.counters);
            counters.while_iterations += rep.counters.while_iterations;
            for o in rep.occurrences {
                all.insert(x + o);
            }
            if mode == Mode::Decide && !all.is_empty() {
                break;
            }
        }
        if end == n {
            break;
        }
        x += step;
        block_idx += 1;
    }
    let mut occurrences: Vec<u64> = all.into_iter().collect();
    if mode == Mode::Decide {
        occurrences.truncate(1);
    }
    let mi = if cfg.collect_mi {
        let mut v = Vec::with_capacity(occurrences.len());
        for &o in &occurrences {
            let w = &t[o as usize..(o + m) as usize];
            let info = hamming_mismatches_capped(p, w, p.len())?.expect("cap = m");
            v.push((o, info));
        }
        Some(v)
    } else {
        None
    };
    Ok(MatchReport { occurrences, mi, counters })
}
