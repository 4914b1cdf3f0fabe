//! Systems of substring equations solved over a dynamic extended SLP.
//!
//! The state keeps one grammar whose expansion is the current candidate
//! string of length n, a delimiter index mapping positions to the
//! pseudo-terminals that start there, and a potential used by the iteration
//! accounting. Splits and substitutes rewrite pseudo-terminals everywhere at
//! once (production rewriting), and recompression keeps the skeleton above
//! the pseudo-terminal string small after updates.

use std::collections::BTreeMap;

use crate::config::{Counters, RunConfig};
use crate::error::{Error, Result};
use crate::grammar::{Ch, Production, SymbolId, Xslp};
use crate::pillar::PillarIndex;

/// One equation: string i positions [x, x_end) equal string j positions
/// [y, y_end). Single-string systems use i = j = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubstringEquation {
    pub i: usize,
    pub x: u64,
    pub x_end: u64,
    pub j: usize,
    pub y: u64,
    pub y_end: u64,
}

impl SubstringEquation {
    pub fn single(x: u64, x_end: u64, y: u64, y_end: u64) -> Self {
        SubstringEquation { i: 0, x, x_end, j: 0, y, y_end }
    }

    pub fn len(&self) -> u64 {
        self.x_end - self.x
    }
}

/// A set of substring equations over one or more strings of declared
/// lengths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquationSystem {
    pub lengths: Vec<u64>,
    pub equations: Vec<SubstringEquation>,
}

impl EquationSystem {
    pub fn single(n: u64, eqs: &[(u64, u64, u64, u64)]) -> Self {
        EquationSystem {
            lengths: vec![n],
            equations: eqs
                .iter()
                .map(|&(x, xe, y, ye)| SubstringEquation::single(x, xe, y, ye))
                .collect(),
        }
    }

    pub fn total_len(&self) -> u64 {
        self.lengths.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengths.is_empty() {
            return Err(Error::input("system declares no strings"));
        }
        for (idx, &l) in self.lengths.iter().enumerate() {
            if l == 0 {
                return Err(Error::input(format!("string {idx} has length 0")));
            }
        }
        for (k, e) in self.equations.iter().enumerate() {
            let bad = |msg: &str| Err(Error::input(format!("equation {k}: {msg}")));
            if e.i >= self.lengths.len() || e.j >= self.lengths.len() {
                return bad("string id out of range");
            }
            if e.x >= e.x_end || e.y >= e.y_end {
                return bad("empty or reversed range");
            }
            if e.x_end - e.x != e.y_end - e.y {
                return bad("sides have different lengths");
            }
            if e.x_end > self.lengths[e.i] || e.y_end > self.lengths[e.j] {
                return bad("range exceeds string length");
            }
        }
        Ok(())
    }

    /// Global positions of each string's start when the strings are laid
    /// out back to back.
    pub fn offsets(&self) -> Vec<u64> {
        let mut o = Vec::with_capacity(self.lengths.len());
        let mut acc = 0;
        for &l in &self.lengths {
            o.push(acc);
            acc += l;
        }
        o
    }
}

/// Parses the equation file format: a header line `n <N>` or
/// `lens <n0> <n1> ...`, then one equation per line as `<x> <xEnd> <y>
/// <yEnd>` or `<i> <x> <xEnd> <j> <y> <yEnd>`. `#` lines are comments.
pub fn parse_equations(text: &str) -> Result<EquationSystem> {
    let mut lengths: Option<Vec<u64>> = None;
    let mut equations = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let nums = |toks: &[&str]| -> Result<Vec<u64>> {
            toks.iter()
                .map(|t| {
                    t.parse::<u64>()
                        .map_err(|_| Error::Parse { line: lineno, msg: format!("bad number '{t}'") })
                })
                .collect()
        };
        if lengths.is_none() {
            match toks[0] {
                "n" => {
                    let v = nums(&toks[1..])?;
                    if v.len() != 1 {
                        return Err(Error::Parse { line: lineno, msg: "expected `n <N>`".into() });
                    }
                    lengths = Some(v);
                }
                "lens" => {
                    let v = nums(&toks[1..])?;
                    if v.is_empty() {
                        return Err(Error::Parse { line: lineno, msg: "expected lengths".into() });
                    }
                    lengths = Some(v);
                }
                _ => {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: "first line must be `n <N>` or `lens ...`".into(),
                    })
                }
            }
            continue;
        }
        let v = nums(&toks)?;
        let eq = match v.len() {
            4 => SubstringEquation::single(v[0], v[1], v[2], v[3]),
            6 => SubstringEquation {
                i: v[0] as usize,
                x: v[1],
                x_end: v[2],
                j: v[3] as usize,
                y: v[4],
                y_end: v[5],
            },
            _ => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected 4 or 6 numbers, got {}", v.len()),
                })
            }
        };
        equations.push(eq);
    }
    let lengths = lengths.ok_or_else(|| Error::Parse { line: 1, msg: "missing header line".into() })?;
    let sys = EquationSystem { lengths, equations };
    sys.validate()?;
    Ok(sys)
}

/// Result of solving a system: the exported grammar (one start per string)
/// and the work counters of the run.
#[derive(Debug)]
pub struct Solution {
    pub grammar: Xslp,
    pub counters: Counters,
}

/// Dynamic split/substitute state over one length-n string.
pub struct SolverState {
    grammar: Xslp,
    n: u64,
    delims: BTreeMap<u64, SymbolId>,
    phi: f64,
    pub counters: Counters,
    cadence: u32,
    max_expansion: u64,
    splits_since: u32,
    pillar: Option<PillarIndex>,
}

fn phi_term(len: u64) -> f64 {
    1.0 + (len as f64).log2()
}

impl SolverState {
    /// Fresh state: a single pseudo-terminal of length n, delimiters {0, n}.
    pub fn init(n: u64, cfg: &RunConfig) -> Result<SolverState> {
        if n == 0 {
            return Err(Error::input("state length must be positive"));
        }
        let mut grammar = Xslp::new();
        let pt = grammar.new_symbol(Production::PseudoTerminal(n))?;
        grammar.set_starts(vec![pt]);
        let mut delims = BTreeMap::new();
        delims.insert(0u64, pt);
        Ok(SolverState {
            grammar,
            n,
            delims,
            phi: phi_term(n),
            counters: Counters::default(),
            cadence: cfg.recompress_cadence.max(1),
            max_expansion: cfg.max_expansion,
            splits_since: 0,
            pillar: None,
        })
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn grammar(&self) -> &Xslp {
        &self.grammar
    }

    /// Current potential: sum of 1 + log2 of each pseudo-terminal occurrence
    /// length, over the pseudo-terminal string.
    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Recomputes the potential from the delimiter index (test hook).
    pub fn phi_from_scratch(&self) -> f64 {
        self.delims.values().map(|&s| phi_term(self.grammar.len_of(s).unwrap_or(1))).sum()
    }

    pub fn is_delimiter(&self, x: u64) -> bool {
        x == self.n || self.delims.contains_key(&x)
    }

    /// Largest delimiter ≤ x.
    pub fn find_delimiter(&self, x: u64) -> Result<u64> {
        if x > self.n {
            return Err(Error::input(format!("position {x} out of range (n = {})", self.n)));
        }
        if x == self.n {
            return Ok(self.n);
        }
        Ok(*self.delims.range(..=x).next_back().expect("0 is always a delimiter").0)
    }

    /// (largest delimiter ≤ x, pseudo-terminal owning position x). The
    /// right boundary x = n has no owning pseudo-terminal.
    pub fn locate(&self, x: u64) -> Result<(u64, Option<SymbolId>)> {
        if x > self.n {
            return Err(Error::input(format!("position {x} out of range (n = {})", self.n)));
        }
        if x == self.n {
            return Ok((self.n, None));
        }
        let (&d, &pt) = self.delims.range(..=x).next_back().expect("0 is always a delimiter");
        Ok((d, Some(pt)))
    }

    fn drop_pillar(&mut self) {
        if let Some(ix) = self.pillar.take() {
            let c = ix.counters();
            self.counters.char_accesses += c.char_accesses;
            self.counters.pillar_ops += c.pillar_ops;
        }
    }

    fn recompress_now(&mut self) -> Result<()> {
        let z = self.grammar.recompress_in_place(self.max_expansion)?;
        self.counters.lz_size = self.counters.lz_size.max(z as u64);
        self.counters.grammar_size = self.counters.grammar_size.max(self.grammar.size() as u64);
        Ok(())
    }

    /// LZ phrase count of the current pseudo-terminal string (test hook).
    pub fn lz_of_letters(&self) -> usize {
        let letters: Vec<SymbolId> = self.delims.values().copied().collect();
        crate::strings::lz77(&letters).len()
    }

    /// Makes x a delimiter by splitting its owning pseudo-terminal into two
    /// fresh ones, everywhere it occurs. No-op if x is already a delimiter.
    /// Returns whether the grammar changed.
    pub fn split_at(&mut self, x: u64) -> Result<bool> {
        if x > self.n {
            return Err(Error::input(format!("position {x} out of range (n = {})", self.n)));
        }
        if self.is_delimiter(x) {
            return Ok(false);
        }
        self.drop_pillar();
        let (d, pt) = self.locate(x)?;
        let xsym = pt.expect("interior position has an owner");
        let cut = x - d;
        let xlen = self.grammar.len_of(xsym)?;
        let y = self.grammar.new_symbol(Production::PseudoTerminal(cut))?;
        let z = self.grammar.new_symbol(Production::PseudoTerminal(xlen - cut))?;
        let b = self.grammar.new_symbol(Production::Binary(y, z))?;
        let occ: Vec<u64> =
            self.delims.iter().filter(|&(_, &s)| s == xsym).map(|(&q, _)| q).collect();
        self.grammar.rewrite_symbol(xsym, b)?;
        for q in &occ {
            self.delims.insert(*q, y);
            self.delims.insert(*q + cut, z);
        }
        self.phi += occ.len() as f64 * (phi_term(cut) + phi_term(xlen - cut) - phi_term(xlen));
        self.counters.splits += 1;
        self.splits_since += 1;
        if self.splits_since >= self.cadence {
            self.splits_since = 0;
            self.recompress_now()?;
        }
        Ok(true)
    }

    /// Replaces pseudo-terminal X everywhere by (S[x..y))^e where
    /// e = |X|/(y−x). Both x and y must be delimiters and X must not occur
    /// inside [x, y).
    pub fn substitute_sym(&mut self, xsym: SymbolId, x: u64, y: u64) -> Result<()> {
        if !matches!(self.grammar.production(xsym), Ok(Production::PseudoTerminal(_))) {
            return Err(Error::contract("substitute: symbol is not a live pseudo-terminal"));
        }
        if x >= y || y > self.n {
            return Err(Error::input(format!("substitute: bad range [{x}, {y})")));
        }
        if !self.is_delimiter(x) || !self.is_delimiter(y) {
            return Err(Error::contract("substitute: range ends must be delimiters"));
        }
        let xlen = self.grammar.len_of(xsym)?;
        let period = y - x;
        if xlen % period != 0 {
            return Err(Error::contract(format!(
                "substitute: |X| = {xlen} is not a multiple of the range length {period}"
            )));
        }
        let e = xlen / period;
        let seg: Vec<(u64, SymbolId)> =
            self.delims.range(x..y).map(|(&q, &s)| (q, s)).collect();
        if seg.iter().any(|&(_, s)| s == xsym) {
            return Err(Error::contract("substitute: X occurs inside the replacement range"));
        }
        self.drop_pillar();
        let mut rep = seg[0].1;
        for &(_, s) in &seg[1..] {
            rep = self.grammar.concat_symbols(rep, s)?;
        }
        let rep = if e > 1 { self.grammar.power(rep, e)? } else { rep };
        let occ: Vec<u64> =
            self.delims.iter().filter(|&(_, &s)| s == xsym).map(|(&q, _)| q).collect();
        self.grammar.rewrite_symbol(xsym, rep)?;
        let seg_phi: f64 =
            seg.iter().map(|&(_, s)| phi_term(self.grammar.len_of(s).unwrap())).sum();
        for &q in &occ {
            for rep_nr in 0..e {
                for &(p, s) in &seg {
                    self.delims.insert(q + rep_nr * period + (p - x), s);
                }
            }
        }
        self.phi += occ.len() as f64 * (e as f64 * seg_phi - phi_term(xlen));
        self.counters.substitutes += 1;
        self.recompress_now()?;
        Ok(())
    }

    /// Longest common prefix length of S[x..n) and S[y..n).
    pub fn lce(&mut self, x: u64, y: u64) -> Result<u64> {
        if x > self.n || y > self.n {
            return Err(Error::input("lce: position out of range"));
        }
        if x == y {
            return Ok(self.n - x);
        }
        if self.pillar.is_none() {
            self.pillar = Some(PillarIndex::preprocess(&self.grammar)?);
        }
        let ix = self.pillar.as_ref().unwrap();
        let h = ix.handle(0)?;
        let h1 = ix.p_extract(h, x, self.n)?;
        let h2 = ix.p_extract(h, y, self.n)?;
        ix.p_lcp(h1, h2)
    }

    /// Makes S[x..x_end) equal to S[y..y_end), merging exactly the position
    /// classes {x+i, y+i} and nothing else.
    pub fn set_substrings_equal(&mut self, x: u64, x_end: u64, y: u64, y_end: u64) -> Result<()> {
        if x >= x_end || y >= y_end || x_end > self.n || y_end > self.n {
            return Err(Error::input("bad equation ranges"));
        }
        if x_end - x != y_end - y {
            return Err(Error::input("equation sides have different lengths"));
        }
        if x == y {
            return Ok(());
        }
        for p in [x, x_end, y, y_end] {
            self.split_at(p)?;
        }
        let len = x_end - x;
        loop {
            let l = self.lce(x, y)?;
            if l >= len {
                break;
            }
            self.counters.while_iterations += 1;
            let mut xh = x + l;
            let mut yh = y + l;
            debug_assert!(self.is_delimiter(xh) && self.is_delimiter(yh));
            let xsym = self.locate(xh)?.1.expect("first mismatch is interior");
            let ysym = self.locate(yh)?.1.expect("first mismatch is interior");
            if self.grammar.len_of(ysym)? > self.grammar.len_of(xsym)? {
                std::mem::swap(&mut xh, &mut yh);
            }
            let xsym = self.locate(xh)?.1.unwrap();
            let ell = self.grammar.len_of(xsym)?;
            let r = self.find_delimiter(yh + ell)? - yh;
            debug_assert!(r >= 1 && r <= ell);
            let yprime = self.locate(yh + ell - 1)?.1.unwrap();
            if ell > r && xsym == yprime {
                let e = ell / r;
                self.split_at(xh + e * r)?;
            } else {
                self.split_at(xh + r)?;
            }
            let head = self.locate(xh)?.1.unwrap();
            self.substitute_sym(head, yh, yh + r)?;
        }
        Ok(())
    }

    /// Exports the grammar with one start symbol per declared string, given
    /// the string boundaries as prefix sums (first 0, last n).
    pub fn export(mut self, boundaries: &[u64]) -> Result<Solution> {
        self.drop_pillar();
        let root = self.grammar.starts()[0];
        let mut starts = Vec::with_capacity(boundaries.len().saturating_sub(1));
        for w in boundaries.windows(2) {
            starts.push(self.grammar.extract_symbol(root, w[0], w[1])?);
        }
        self.grammar.set_starts(starts);
        self.grammar.prune();
        self.counters.grammar_size = self.counters.grammar_size.max(self.grammar.size() as u64);
        Ok(Solution { grammar: self.grammar, counters: self.counters })
    }
}

/// Solves a single-string system: the exported expansion satisfies every
/// equation and merges no position classes beyond the forced ones.
pub fn solve_system(sys: &EquationSystem, cfg: &RunConfig) -> Result<Solution> {
    sys.validate()?;
    if sys.lengths.len() != 1 {
        return Err(Error::input("solve_system expects exactly one string"));
    }
    let mut st = SolverState::init(sys.lengths[0], cfg)?;
    for e in &sys.equations {
        st.set_substrings_equal(e.x, e.x_end, e.y, e.y_end)?;
    }
    st.export(&[0, sys.lengths[0]])
}

/// Solves a multi-string system by laying the strings out back to back,
/// splitting at the seams, and exporting one start per string.
pub fn solve_multi(sys: &EquationSystem, cfg: &RunConfig) -> Result<Solution> {
    sys.validate()?;
    let n = sys.total_len();
    let offsets = sys.offsets();
    let mut st = SolverState::init(n, cfg)?;
    for &o in &offsets[1..] {
        st.split_at(o)?;
    }
    for e in &sys.equations {
        st.set_substrings_equal(
            offsets[e.i] + e.x,
            offsets[e.i] + e.x_end,
            offsets[e.j] + e.y,
            offsets[e.j] + e.y_end,
        )?;
    }
    let mut boundaries = offsets;
    boundaries.push(n);
    st.export(&boundaries)
}

/// Plain union-find over array indices.
#[derive(Debug, Clone)]
pub(crate) struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    pub fn new(n: usize) -> Dsu {
        Dsu { parent: (0..n).collect() }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut c = x;
        while self.parent[c] != r {
            let next = self.parent[c];
            self.parent[c] = r;
            c = next;
        }
        r
    }

    /// Returns true if the two elements were in different classes.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Relabels a sequence so equal inputs share a label and labels appear in
/// first-occurrence order starting from 0.
pub fn canonical_labels<T: std::hash::Hash + Eq>(seq: &[T]) -> Vec<u64> {
    let mut map: std::collections::HashMap<&T, u64> = std::collections::HashMap::new();
    let mut out = Vec::with_capacity(seq.len());
    for v in seq {
        let next = map.len() as u64;
        out.push(*map.entry(v).or_insert(next));
    }
    out
}

/// Brute-force universal solution: union-find over all positions with one
/// merge per equation offset. Returns canonical class labels over the
/// global position space.
pub fn oracle_universal_solution(sys: &EquationSystem, cfg: &RunConfig) -> Result<Vec<u64>> {
    sys.validate()?;
    let n = sys.total_len();
    let offsets = sys.offsets();
    let mut work = 0u64;
    let mut dsu = Dsu::new(n as usize);
    for e in &sys.equations {
        work += e.len();
        if work > cfg.max_merged_pairs {
            return Err(Error::resource(format!(
                "oracle merge work exceeds {}",
                cfg.max_merged_pairs
            )));
        }
        for t in 0..e.len() {
            dsu.union((offsets[e.i] + e.x + t) as usize, (offsets[e.j] + e.y + t) as usize);
        }
    }
    let roots: Vec<usize> = (0..n as usize).map(|p| dsu.find(p)).collect();
    Ok(canonical_labels(&roots))
}

/// Position classes of a solution grammar: equal expansion characters
/// (across all starts, concatenated) get equal labels.
pub fn partition_from_expansion(g: &Xslp, max: u64) -> Result<Vec<u64>> {
    let mut chars: Vec<Ch> = Vec::new();
    for &s in g.starts() {
        chars.extend(g.expand(s, max)?);
    }
    Ok(canonical_labels(&chars))
}
