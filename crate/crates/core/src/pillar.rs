//! Access / Length / Extract / LCE / LCE^R / IPM queries over two backends:
//! plain in-memory strings, and a frozen `Xslp` queried through its hat
//! grammar with fingerprints and rank/select over pseudo-terminal starts.
//!
//! The index is immutable after construction; queries only bump atomic work
//! counters, so shared references can be queried from multiple threads.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::config::Counters;
use crate::error::{Error, Result};
use crate::grammar::{addmod, fp_base, mulmod, powmod, Ch, Production, SymbolId, Xslp};
use crate::strings::{exact_occurrences, ArithmeticProgression};

/// Immutable fragment descriptor: string `string` of the owning index,
/// positions [start, start+len).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PillarHandle {
    pub string: usize,
    pub start: u64,
    pub len: u64,
}

#[derive(Debug, Default)]
struct QueryCounters {
    char_accesses: AtomicU64,
    pillar_ops: AtomicU64,
}

enum Backend {
    Plain(Vec<Vec<Ch>>),
    Compressed {
        grammar: Xslp,
        hat: Xslp,
        starts: Vec<SymbolId>,
        /// Per original-grammar symbol: number of pseudo-terminal start
        /// positions in its expansion.
        ones: HashMap<u64, u64>,
        /// Per hat-grammar symbol: fingerprint of its reversed expansion.
        rev_fp: HashMap<u64, u64>,
    },
}

/// Read-only query structure over one or more strings.
pub struct PillarIndex {
    backend: Backend,
    counters: QueryCounters,
}

fn submod(a: u64, b: u64) -> u64 {
    const P: u64 = (1 << 61) - 1;
    ((a as u128 + P as u128 - b as u128) % P as u128) as u64
}

impl PillarIndex {
    /// Plain backend over explicit character sequences.
    pub fn plain(texts: Vec<Vec<Ch>>) -> Self {
        PillarIndex { backend: Backend::Plain(texts), counters: QueryCounters::default() }
    }

    /// Plain backend over byte strings.
    pub fn plain_bytes(texts: &[&[u8]]) -> Self {
        Self::plain(texts.iter().map(|t| t.iter().map(|&b| Ch::Byte(b)).collect()).collect())
    }

    /// Compressed backend: snapshots the grammar, builds its hat grammar,
    /// per-symbol pseudo-terminal-start counts, and reverse fingerprints.
    pub fn preprocess(g: &Xslp) -> Result<Self> {
        if g.starts().is_empty() {
            return Err(Error::input("preprocess: grammar has no start symbols"));
        }
        let grammar = g.clone();
        let hat = grammar.hat_grammar()?;
        let starts = grammar.starts().to_vec();

        let mut ones: HashMap<u64, u64> = HashMap::new();
        for sym in topo_order(&grammar, grammar.reachable())? {
            let v = match grammar.production(sym)? {
                Production::Terminal(_) => 0,
                Production::PseudoTerminal(_) => 1,
                Production::Binary(l, r) => ones[&l.0] + ones[&r.0],
            };
            ones.insert(sym.0, v);
        }

        let mut rev_fp: HashMap<u64, u64> = HashMap::new();
        for sym in topo_order(&hat, hat.reachable())? {
            let v = match hat.production(sym)? {
                Production::Terminal(_) | Production::PseudoTerminal(_) => {
                    // Length-1 or placeholder-free symbols: reverse equals
                    // forward. Hat grammars have no pseudo-terminals, but a
                    // defensive arm keeps the walk total.
                    hat.fingerprint_of(sym)?.value
                }
                Production::Binary(l, r) => {
                    let la = hat.len_of(l)?;
                    addmod(mulmod(rev_fp[&r.0], powmod(fp_base(), la)), rev_fp[&l.0])
                }
            };
            rev_fp.insert(sym.0, v);
        }

        Ok(PillarIndex {
            backend: Backend::Compressed { grammar, hat, starts, ones, rev_fp },
            counters: QueryCounters::default(),
        })
    }

    pub fn num_strings(&self) -> usize {
        match &self.backend {
            Backend::Plain(t) => t.len(),
            Backend::Compressed { starts, .. } => starts.len(),
        }
    }

    pub fn string_len(&self, s: usize) -> Result<u64> {
        match &self.backend {
            Backend::Plain(t) => t
                .get(s)
                .map(|v| v.len() as u64)
                .ok_or_else(|| Error::input(format!("no string {s}"))),
            Backend::Compressed { grammar, starts, .. } => {
                let sym = *starts.get(s).ok_or_else(|| Error::input(format!("no string {s}")))?;
                grammar.len_of(sym)
            }
        }
    }

    /// Handle covering the whole string `s`.
    pub fn handle(&self, s: usize) -> Result<PillarHandle> {
        Ok(PillarHandle { string: s, start: 0, len: self.string_len(s)? })
    }

    /// Sub-fragment [a, b) of an existing handle. O(1).
    pub fn p_extract(&self, h: PillarHandle, a: u64, b: u64) -> Result<PillarHandle> {
        if a > b || b > h.len {
            return Err(Error::input(format!("extract: bad range [{a}, {b}) on length {}", h.len)));
        }
        Ok(PillarHandle { string: h.string, start: h.start + a, len: b - a })
    }

    pub fn p_length(&self, h: PillarHandle) -> u64 {
        h.len
    }

    /// Work counters accumulated so far.
    pub fn counters(&self) -> Counters {
        Counters {
            char_accesses: self.counters.char_accesses.load(Ordering::Relaxed),
            pillar_ops: self.counters.pillar_ops.load(Ordering::Relaxed),
            ..Counters::default()
        }
    }

    fn bump(&self, accesses: u64) {
        self.counters.pillar_ops.fetch_add(1, Ordering::Relaxed);
        self.counters.char_accesses.fetch_add(accesses, Ordering::Relaxed);
    }

    fn char_at(&self, s: usize, pos: u64) -> Result<Ch> {
        match &self.backend {
            Backend::Plain(t) => t
                .get(s)
                .and_then(|v| v.get(pos as usize))
                .copied()
                .ok_or_else(|| Error::input("access out of range")),
            Backend::Compressed { hat, starts, .. } => {
                let sym = *starts.get(s).ok_or_else(|| Error::input(format!("no string {s}")))?;
                match hat.access_char(sym, pos)? {
                    Ch::Run(a) => {
                        // Offset recovery: the pseudo-terminal containing pos
                        // starts at the previous marked position.
                        let start = self.select(s, self.rank(s, pos)? - 1)?;
                        Ok(Ch::Mark(a, pos - start))
                    }
                    c => Ok(c),
                }
            }
        }
    }

    /// The i-th character of the fragment's true expansion.
    pub fn p_access(&self, h: PillarHandle, i: u64) -> Result<Ch> {
        if i >= h.len {
            return Err(Error::input(format!("access: {i} out of range (len {})", h.len)));
        }
        self.bump(1);
        self.char_at(h.string, h.start + i)
    }

    /// Number of pseudo-terminal start positions in string `s` before
    /// position `i` (i.e. ones of the marker bit string D in [0, i)).
    pub fn rank(&self, s: usize, i: u64) -> Result<u64> {
        let n = self.string_len(s)?;
        if i > n {
            return Err(Error::input(format!("rank: {i} out of range (len {n})")));
        }
        match &self.backend {
            Backend::Plain(t) => Ok(t[s][..i as usize]
                .iter()
                .filter(|c| matches!(c, Ch::Mark(_, 0)))
                .count() as u64),
            Backend::Compressed { grammar, starts, ones, .. } => {
                let mut sym = starts[s];
                let mut i = i;
                let mut acc = 0u64;
                loop {
                    if i == 0 {
                        return Ok(acc);
                    }
                    if i == grammar.len_of(sym)? {
                        return Ok(acc + ones[&sym.0]);
                    }
                    match grammar.production(sym)? {
                        Production::Terminal(_) => return Ok(acc),
                        Production::PseudoTerminal(_) => return Ok(acc + 1),
                        Production::Binary(l, r) => {
                            let ll = grammar.len_of(l)?;
                            if i <= ll {
                                sym = l;
                            } else {
                                acc += ones[&l.0];
                                i -= ll;
                                sym = r;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Position of the r-th (0-indexed) pseudo-terminal start in string `s`.
    pub fn select(&self, s: usize, r: u64) -> Result<u64> {
        match &self.backend {
            Backend::Plain(t) => t
                .get(s)
                .ok_or_else(|| Error::input(format!("no string {s}")))?
                .iter()
                .enumerate()
                .filter(|(_, c)| matches!(c, Ch::Mark(_, 0)))
                .nth(r as usize)
                .map(|(i, _)| i as u64)
                .ok_or_else(|| Error::input(format!("select: fewer than {} ones", r + 1))),
            Backend::Compressed { grammar, starts, ones, .. } => {
                let mut sym = starts[s];
                if r >= ones[&sym.0] {
                    return Err(Error::input(format!("select: fewer than {} ones", r + 1)));
                }
                let mut r = r;
                let mut pos = 0u64;
                loop {
                    match grammar.production(sym)? {
                        Production::Terminal(_) => {
                            return Err(Error::internal("select descended into a terminal"))
                        }
                        Production::PseudoTerminal(_) => return Ok(pos),
                        Production::Binary(l, rr) => {
                            if r < ones[&l.0] {
                                sym = l;
                            } else {
                                r -= ones[&l.0];
                                pos += grammar.len_of(l)?;
                                sym = rr;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Fingerprint of hat-string characters [a, b) of string `s`
    /// (compressed backend only).
    fn hat_fp_range(&self, s: usize, a: u64, b: u64) -> Result<u64> {
        match &self.backend {
            Backend::Plain(_) => Err(Error::internal("hat fingerprints on plain backend")),
            Backend::Compressed { hat, starts, .. } => {
                let fa = hat_fp_prefix(hat, starts[s], a)?;
                let fb = hat_fp_prefix(hat, starts[s], b)?;
                Ok(submod(fb, mulmod(fa, powmod(fp_base(), b - a))))
            }
        }
    }

    /// Fingerprint of the reverse of hat characters [a, b).
    fn hat_rev_fp_range(&self, s: usize, a: u64, b: u64) -> Result<u64> {
        match &self.backend {
            Backend::Plain(_) => Err(Error::internal("hat fingerprints on plain backend")),
            Backend::Compressed { hat, starts, rev_fp, .. } => {
                let fa = hat_rev_fp_suffix(hat, rev_fp, starts[s], a)?;
                let fb = hat_rev_fp_suffix(hat, rev_fp, starts[s], b)?;
                Ok(submod(fa, mulmod(fb, powmod(fp_base(), b - a))))
            }
        }
    }

    fn hat_char(&self, s: usize, pos: u64) -> Result<Ch> {
        match &self.backend {
            Backend::Plain(_) => Err(Error::internal("hat access on plain backend")),
            Backend::Compressed { hat, starts, .. } => hat.access_char(starts[s], pos),
        }
    }

    /// Longest common prefix length of the two fragments' true expansions.
    pub fn p_lcp(&self, h1: PillarHandle, h2: PillarHandle) -> Result<u64> {
        let max = h1.len.min(h2.len);
        match &self.backend {
            Backend::Plain(t) => {
                let a = &t[h1.string];
                let b = &t[h2.string];
                let mut l = 0u64;
                while l < max && a[(h1.start + l) as usize] == b[(h2.start + l) as usize] {
                    l += 1;
                }
                self.bump(2 * (l + 1).min(max.max(1)));
                Ok(l)
            }
            Backend::Compressed { .. } => {
                self.bump(1);
                if max == 0 {
                    return Ok(0);
                }
                let eq = |l: u64| -> Result<bool> {
                    Ok(self.hat_fp_range(h1.string, h1.start, h1.start + l)?
                        == self.hat_fp_range(h2.string, h2.start, h2.start + l)?)
                };
                // Binary search the longest fingerprint-equal hat prefix.
                let mut lo = 0u64; // eq holds at lo
                let mut hi = max + 1; // eq fails at hi (or hi = max+1)
                if eq(max)? {
                    lo = max;
                } else {
                    while hi - lo > 1 {
                        let mid = lo + (hi - lo) / 2;
                        if eq(mid)? {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                }
                let l = lo;
                if l < max {
                    let c1 = self.hat_char(h1.string, h1.start + l)?;
                    let c2 = self.hat_char(h2.string, h2.start + l)?;
                    if c1 == c2 {
                        return Err(Error::FingerprintInconsistency(format!(
                            "hat LCE boundary at {l} compares equal"
                        )));
                    }
                }
                if l == 0 {
                    return Ok(0);
                }
                // Matching hat fragments expand to equal true fragments
                // exactly when their first true characters agree; otherwise
                // the whole region is a placeholder run at mismatched
                // offsets and nothing matches.
                let a = self.char_at(h1.string, h1.start)?;
                let b = self.char_at(h2.string, h2.start)?;
                Ok(if a == b { l } else { 0 })
            }
        }
    }

    /// Longest common suffix length of the two fragments' true expansions.
    pub fn p_lcs(&self, h1: PillarHandle, h2: PillarHandle) -> Result<u64> {
        let max = h1.len.min(h2.len);
        let e1 = h1.start + h1.len;
        let e2 = h2.start + h2.len;
        match &self.backend {
            Backend::Plain(t) => {
                let a = &t[h1.string];
                let b = &t[h2.string];
                let mut l = 0u64;
                while l < max && a[(e1 - 1 - l) as usize] == b[(e2 - 1 - l) as usize] {
                    l += 1;
                }
                self.bump(2 * (l + 1).min(max.max(1)));
                Ok(l)
            }
            Backend::Compressed { .. } => {
                self.bump(1);
                if max == 0 {
                    return Ok(0);
                }
                let eq = |l: u64| -> Result<bool> {
                    Ok(self.hat_rev_fp_range(h1.string, e1 - l, e1)?
                        == self.hat_rev_fp_range(h2.string, e2 - l, e2)?)
                };
                let mut lo = 0u64;
                let mut hi = max + 1;
                if eq(max)? {
                    lo = max;
                } else {
                    while hi - lo > 1 {
                        let mid = lo + (hi - lo) / 2;
                        if eq(mid)? {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                }
                let l = lo;
                if l < max {
                    let c1 = self.hat_char(h1.string, e1 - 1 - l)?;
                    let c2 = self.hat_char(h2.string, e2 - 1 - l)?;
                    if c1 == c2 {
                        return Err(Error::FingerprintInconsistency(format!(
                            "hat LCS boundary at {l} compares equal"
                        )));
                    }
                }
                if l == 0 {
                    return Ok(0);
                }
                // Mirror correction: placeholder offsets are anchored from
                // the left, so a common hat suffix is a common true suffix
                // exactly when its leftmost true characters agree.
                let a = self.char_at(h1.string, e1 - l)?;
                let b = self.char_at(h2.string, e2 - l)?;
                Ok(if a == b { l } else { 0 })
            }
        }
    }

    /// All exact occurrences of exp(p) in exp(t), as one arithmetic
    /// progression. Requires t.len ≤ 2·p.len.
    pub fn p_ipm(&self, p: PillarHandle, t: PillarHandle) -> Result<ArithmeticProgression> {
        if p.len == 0 {
            return Err(Error::input("ipm: empty pattern"));
        }
        if t.len > 2 * p.len {
            return Err(Error::input(format!(
                "ipm: text fragment of length {} exceeds twice the pattern length {}",
                t.len, p.len
            )));
        }
        if t.len < p.len {
            self.bump(1);
            return Ok(ArithmeticProgression::empty());
        }
        match &self.backend {
            Backend::Plain(txts) => {
                let pw = &txts[p.string][p.start as usize..(p.start + p.len) as usize];
                let tw = &txts[t.string][t.start as usize..(t.start + t.len) as usize];
                self.bump(p.len + t.len);
                let occ: Vec<u64> =
                    exact_occurrences(pw, tw).into_iter().map(|x| x as u64).collect();
                ArithmeticProgression::from_sorted(&occ)
            }
            Backend::Compressed { hat, starts, .. } => {
                self.bump(p.len + t.len);
                let mut pw = Vec::with_capacity(p.len as usize);
                collect_range(hat, starts[p.string], p.start, p.start + p.len, &mut pw)?;
                let mut tw = Vec::with_capacity(t.len as usize);
                collect_range(hat, starts[t.string], t.start, t.start + t.len, &mut tw)?;
                let hat_occ = exact_occurrences(&pw, &tw);
                let occ: Vec<u64> = if matches!(pw[0], Ch::Run(_)) {
                    // The pattern starts mid-run, so hat occurrences only
                    // pin the placeholder block, not the offset within it;
                    // keep those whose first true characters really agree.
                    let first = self.char_at(p.string, p.start)?;
                    let mut kept = Vec::new();
                    for o in hat_occ {
                        if self.char_at(t.string, t.start + o as u64)? == first {
                            kept.push(o as u64);
                        }
                    }
                    kept
                } else {
                    hat_occ.into_iter().map(|x| x as u64).collect()
                };
                ArithmeticProgression::from_sorted(&occ)
            }
        }
    }
}

/// Characters of exp(sym)[a..b), appended to out. Pseudo-terminal cells
/// decode to their placeholder identity.
fn collect_range(g: &Xslp, sym: SymbolId, a: u64, b: u64, out: &mut Vec<Ch>) -> Result<()> {
    if a >= b {
        return Ok(());
    }
    match g.production(sym)? {
        Production::Terminal(c) => out.push(c),
        Production::PseudoTerminal(_) => out.extend((a..b).map(|i| Ch::Mark(sym, i))),
        Production::Binary(l, r) => {
            let ll = g.len_of(l)?;
            if b <= ll {
                collect_range(g, l, a, b, out)?;
            } else if a >= ll {
                collect_range(g, r, a - ll, b - ll, out)?;
            } else {
                collect_range(g, l, a, ll, out)?;
                collect_range(g, r, 0, b - ll, out)?;
            }
        }
    }
    Ok(())
}

/// Fingerprint of exp(sym)[0..i) by root-to-leaf descent over cached
/// per-symbol fingerprints.
fn hat_fp_prefix(g: &Xslp, sym: SymbolId, i: u64) -> Result<u64> {
    let mut acc = 0u64;
    let mut cur = sym;
    let mut rem = i;
    loop {
        if rem == 0 {
            return Ok(acc);
        }
        let f = g.fingerprint_of(cur)?;
        if rem == g.len_of(cur)? {
            return Ok(addmod(mulmod(acc, f.base_power), f.value));
        }
        match g.production(cur)? {
            Production::Binary(l, r) => {
                let ll = g.len_of(l)?;
                if rem <= ll {
                    cur = l;
                } else {
                    let fl = g.fingerprint_of(l)?;
                    acc = addmod(mulmod(acc, fl.base_power), fl.value);
                    rem -= ll;
                    cur = r;
                }
            }
            _ => return Err(Error::internal("prefix descent hit a leaf mid-way")),
        }
    }
}

/// Fingerprint of reverse(exp(sym)[i..len)).
fn hat_rev_fp_suffix(
    g: &Xslp,
    rev_fp: &HashMap<u64, u64>,
    sym: SymbolId,
    i: u64,
) -> Result<u64> {
    let len = g.len_of(sym)?;
    if i == len {
        return Ok(0);
    }
    if i == 0 {
        return Ok(rev_fp[&sym.0]);
    }
    match g.production(sym)? {
        Production::Binary(l, r) => {
            let ll = g.len_of(l)?;
            if i >= ll {
                hat_rev_fp_suffix(g, rev_fp, r, i - ll)
            } else {
                let left = hat_rev_fp_suffix(g, rev_fp, l, i)?;
                Ok(addmod(mulmod(rev_fp[&r.0], powmod(fp_base(), ll - i)), left))
            }
        }
        _ => Err(Error::internal("suffix descent hit a leaf mid-way")),
    }
}

/// Children-before-parents order over the given symbols.
fn topo_order(g: &Xslp, syms: Vec<SymbolId>) -> Result<Vec<SymbolId>> {
    let mut done = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(syms.len());
    for root in syms {
        let mut stack = vec![(root, false)];
        while let Some((s, expanded)) = stack.pop() {
            if done.contains(&s) {
                continue;
            }
            if expanded {
                done.insert(s);
                out.push(s);
                continue;
            }
            match g.production(s)? {
                Production::Binary(l, r) => {
                    stack.push((s, true));
                    stack.push((l, false));
                    stack.push((r, false));
                }
                _ => {
                    done.insert(s);
                    out.push(s);
                }
            }
        }
    }
    Ok(out)
}
