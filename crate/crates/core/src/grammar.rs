//! The extended SLP (`Xslp`): a grammar whose symbols are byte terminals,
//! binary non-terminals, and length-annotated pseudo-terminals standing for
//! blocks of pairwise-distinct placeholder characters.
//!
//! Symbols live in an append-only arena keyed by monotonically increasing
//! ids; ids are never reused, so pseudo-terminal identity (and with it the
//! identity of every placeholder character) survives recompression and
//! garbage collection.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::strings::{lz77, LzPhrase};

/// Opaque, never-reused identifier of a grammar symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymbolId(pub u64);

impl std::fmt::Display for SymbolId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One expansion character. `Byte` is an ordinary text byte. `Mark(A, i)` is
/// the i-th placeholder cell of pseudo-terminal A (pairwise distinct within
/// A and across pseudo-terminals). `Run(A)` is the filler character the hat
/// grammar substitutes for every cell of A except the first; it never
/// appears in true expansions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ch {
    Byte(u8),
    Mark(SymbolId, u64),
    Run(SymbolId),
}

/// Right-hand side of a symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Production {
    /// A single concrete character (bytes in source grammars; hat grammars
    /// also use `Mark`/`Run` terminals).
    Terminal(Ch),
    /// A block of `len >= 1` pairwise-distinct placeholder characters.
    PseudoTerminal(u64),
    /// Concatenation of two previously created symbols.
    Binary(SymbolId, SymbolId),
}

#[derive(Debug, Clone)]
struct SymbolEntry {
    prod: Production,
    len: u64,
    height: u32,
    fp: u64,
}

/// Fingerprint of an expansion: the polynomial hash value together with
/// base^len, so concatenations combine in O(1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fingerprint {
    pub value: u64,
    pub base_power: u64,
}

pub(crate) const FP_MOD: u128 = (1u128 << 61) - 1;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Process-wide fingerprint seed; `EQGRAM_SEED` pins it for reproducibility.
pub(crate) fn fp_seed() -> u64 {
    static SEED: once_cell::sync::Lazy<u64> = once_cell::sync::Lazy::new(|| {
        std::env::var("EQGRAM_SEED")
            .ok()
            .and_then(|v| v.parse::<u64>().ok())
            .unwrap_or(0x5EED_0F_E9_61C0DE)
    });
    *SEED
}

pub(crate) fn fp_base() -> u64 {
    static BASE: once_cell::sync::Lazy<u64> = once_cell::sync::Lazy::new(|| {
        // A random-looking base in [256, p-2], fixed per process seed.
        let r = splitmix64(fp_seed() ^ 0xBA5E) as u128 % (FP_MOD - 260) + 258;
        r as u64
    });
    *BASE
}

pub(crate) fn mulmod(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % FP_MOD) as u64
}

pub(crate) fn addmod(a: u64, b: u64) -> u64 {
    ((a as u128 + b as u128) % FP_MOD) as u64
}

pub(crate) fn powmod(mut b: u64, mut e: u64) -> u64 {
    let mut acc = 1u64;
    while e > 0 {
        if e & 1 == 1 {
            acc = mulmod(acc, b);
        }
        b = mulmod(b, b);
        e >>= 1;
    }
    acc
}

/// Maps a character into the fingerprint field, keyed by the process seed.
pub(crate) fn ch_code(c: Ch) -> u64 {
    let h = match c {
        Ch::Byte(b) => splitmix64(fp_seed() ^ 0x11 ^ ((b as u64) << 8)),
        Ch::Mark(SymbolId(a), i) => {
            splitmix64(fp_seed() ^ 0x22 ^ splitmix64(a).wrapping_add(i.wrapping_mul(0x9E37)))
        }
        Ch::Run(SymbolId(a)) => splitmix64(fp_seed() ^ 0x33 ^ splitmix64(a)),
    };
    h % (FP_MOD as u64 - 1) + 1
}

/// Extended straight-line program over an append-only symbol arena.
#[derive(Debug, Clone, Default)]
pub struct Xslp {
    table: HashMap<u64, SymbolEntry>,
    next_id: u64,
    starts: Vec<SymbolId>,
}

impl Xslp {
    pub fn new() -> Self {
        Xslp::default()
    }

    pub fn starts(&self) -> &[SymbolId] {
        &self.starts
    }

    pub fn set_starts(&mut self, starts: Vec<SymbolId>) {
        self.starts = starts;
    }

    pub fn contains(&self, id: SymbolId) -> bool {
        self.table.contains_key(&id.0)
    }

    fn entry(&self, id: SymbolId) -> Result<&SymbolEntry> {
        self.table
            .get(&id.0)
            .ok_or_else(|| Error::input(format!("unknown symbol {id}")))
    }

    pub fn production(&self, id: SymbolId) -> Result<Production> {
        Ok(self.entry(id)?.prod)
    }

    pub fn len_of(&self, id: SymbolId) -> Result<u64> {
        Ok(self.entry(id)?.len)
    }

    pub fn height_of(&self, id: SymbolId) -> Result<u32> {
        Ok(self.entry(id)?.height)
    }

    /// Cached fingerprint of the symbol's true expansion.
    pub fn fingerprint_of(&self, id: SymbolId) -> Result<Fingerprint> {
        let e = self.entry(id)?;
        Ok(Fingerprint { value: e.fp, base_power: powmod(fp_base(), e.len) })
    }

    /// Registers a new symbol; caches length, height and fingerprint.
    pub fn new_symbol(&mut self, p: Production) -> Result<SymbolId> {
        let id = SymbolId(self.next_id);
        let entry = self.make_entry(id, p)?;
        self.next_id += 1;
        self.table.insert(id.0, entry);
        Ok(id)
    }

    fn make_entry(&self, id: SymbolId, p: Production) -> Result<SymbolEntry> {
        Ok(match p {
            Production::Terminal(c) => SymbolEntry { prod: p, len: 1, height: 0, fp: ch_code(c) },
            Production::PseudoTerminal(len) => {
                if len == 0 {
                    return Err(Error::input("pseudo-terminal of length 0"));
                }
                let mut fp = 0u64;
                let base = fp_base();
                for i in 0..len {
                    fp = addmod(mulmod(fp, base), ch_code(Ch::Mark(id, i)));
                }
                SymbolEntry { prod: p, len, height: 0, fp }
            }
            Production::Binary(a, b) => {
                let ea = self.entry(a)?;
                let eb = self.entry(b)?;
                SymbolEntry {
                    prod: p,
                    len: ea.len + eb.len,
                    height: 1 + ea.height.max(eb.height),
                    fp: addmod(mulmod(ea.fp, powmod(fp_base(), eb.len)), eb.fp),
                }
            }
        })
    }

    fn mk_bin(&mut self, a: SymbolId, b: SymbolId) -> SymbolId {
        self.new_symbol(Production::Binary(a, b)).expect("children exist")
    }

    /// Concatenation with AVL-style height balancing: when the operands'
    /// heights differ by more than one, descend the taller spine and
    /// rebalance with rotations on the way back up.
    pub fn concat_symbols(&mut self, a: SymbolId, b: SymbolId) -> Result<SymbolId> {
        self.entry(a)?;
        self.entry(b)?;
        Ok(self.join(a, b))
    }

    fn join(&mut self, a: SymbolId, b: SymbolId) -> SymbolId {
        let ha = self.table[&a.0].height as i64;
        let hb = self.table[&b.0].height as i64;
        if (ha - hb).abs() <= 1 {
            return self.mk_bin(a, b);
        }
        if ha > hb {
            // a's height >= 2, so it is Binary.
            let (l, r) = match self.table[&a.0].prod {
                Production::Binary(l, r) => (l, r),
                _ => return self.mk_bin(a, b),
            };
            let r2 = self.join(r, b);
            self.balanced_bin(l, r2)
        } else {
            let (l, r) = match self.table[&b.0].prod {
                Production::Binary(l, r) => (l, r),
                _ => return self.mk_bin(a, b),
            };
            let l2 = self.join(a, l);
            self.balanced_bin(l2, r)
        }
    }

    /// Makes a binary node over (l, r), applying one AVL rotation step when
    /// their heights differ by two.
    fn balanced_bin(&mut self, l: SymbolId, r: SymbolId) -> SymbolId {
        let hl = self.table[&l.0].height as i64;
        let hr = self.table[&r.0].height as i64;
        if hr - hl > 1 {
            if let Production::Binary(rl, rr) = self.table[&r.0].prod {
                if self.table[&rl.0].height > self.table[&rr.0].height {
                    if let Production::Binary(rll, rlr) = self.table[&rl.0].prod {
                        let nl = self.balanced_bin(l, rll);
                        let nr = self.balanced_bin(rlr, rr);
                        return self.balanced_bin(nl, nr);
                    }
                }
                let nl = self.balanced_bin(l, rl);
                return self.balanced_bin(nl, rr);
            }
        } else if hl - hr > 1 {
            if let Production::Binary(ll, lr) = self.table[&l.0].prod {
                if self.table[&lr.0].height > self.table[&ll.0].height {
                    if let Production::Binary(lrl, lrr) = self.table[&lr.0].prod {
                        let nl = self.balanced_bin(ll, lrl);
                        let nr = self.balanced_bin(lrr, r);
                        return self.balanced_bin(nl, nr);
                    }
                }
                let nr = self.balanced_bin(lr, r);
                return self.balanced_bin(ll, nr);
            }
        }
        self.mk_bin(l, r)
    }

    /// Inserts a symbol expanding to exp(a)[i..j). The cut positions must
    /// not fall strictly inside a pseudo-terminal's expansion; callers split
    /// pseudo-terminals first.
    pub fn extract_symbol(&mut self, a: SymbolId, i: u64, j: u64) -> Result<SymbolId> {
        let len = self.len_of(a)?;
        if i >= j || j > len {
            return Err(Error::input(format!(
                "extract: bad range [{i}, {j}) on symbol of length {len}"
            )));
        }
        self.extract_rec(a, i, j)
    }

    fn extract_rec(&mut self, a: SymbolId, i: u64, j: u64) -> Result<SymbolId> {
        let e = self.entry(a)?;
        if i == 0 && j == e.len {
            return Ok(a);
        }
        match e.prod {
            Production::Terminal(_) => unreachable!("partial range on a length-1 symbol"),
            Production::PseudoTerminal(_) => Err(Error::contract(
                "extract: cut position falls inside a pseudo-terminal",
            )),
            Production::Binary(l, r) => {
                let ll = self.table[&l.0].len;
                if j <= ll {
                    self.extract_rec(l, i, j)
                } else if i >= ll {
                    self.extract_rec(r, i - ll, j - ll)
                } else {
                    let left = self.extract_rec(l, i, ll)?;
                    let right = self.extract_rec(r, 0, j - ll)?;
                    Ok(self.join(left, right))
                }
            }
        }
    }

    /// The pos-th character of exp(a); pseudo-terminal cells decode to their
    /// (symbol, offset) placeholder identity.
    pub fn access_char(&self, a: SymbolId, pos: u64) -> Result<Ch> {
        let mut cur = a;
        let mut pos = pos;
        if pos >= self.len_of(a)? {
            return Err(Error::input(format!("access: position {pos} out of range")));
        }
        loop {
            match self.entry(cur)?.prod {
                Production::Terminal(c) => return Ok(c),
                Production::PseudoTerminal(_) => return Ok(Ch::Mark(cur, pos)),
                Production::Binary(l, r) => {
                    let ll = self.table[&l.0].len;
                    if pos < ll {
                        cur = l;
                    } else {
                        cur = r;
                        pos -= ll;
                    }
                }
            }
        }
    }

    /// Full expansion of a symbol (test/oracle helper; bounded by `max`).
    pub fn expand(&self, a: SymbolId, max: u64) -> Result<Vec<Ch>> {
        let len = self.len_of(a)?;
        if len > max {
            return Err(Error::resource(format!("expansion of length {len} exceeds bound {max}")));
        }
        let mut out = Vec::with_capacity(len as usize);
        let mut stack = vec![a];
        while let Some(s) = stack.pop() {
            match self.entry(s)?.prod {
                Production::Terminal(c) => out.push(c),
                Production::PseudoTerminal(l) => {
                    out.extend((0..l).map(|i| Ch::Mark(s, i)));
                }
                Production::Binary(l, r) => {
                    stack.push(r);
                    stack.push(l);
                }
            }
        }
        Ok(out)
    }

    /// exp(a) read as a sequence of pseudo-terminal letters. Errors if the
    /// expansion reaches a free terminal (the grammar must be pure) or if
    /// the letter count exceeds `max`.
    pub fn pt_string(&self, a: SymbolId, max: u64) -> Result<Vec<SymbolId>> {
        let mut out = Vec::new();
        let mut stack = vec![a];
        while let Some(s) = stack.pop() {
            match self.entry(s)?.prod {
                Production::Terminal(_) => {
                    return Err(Error::contract("pt_string: grammar has a free terminal"))
                }
                Production::PseudoTerminal(_) => {
                    if out.len() as u64 == max {
                        return Err(Error::resource(
                            "pt_string: pseudo-terminal string exceeds bound",
                        ));
                    }
                    out.push(s);
                }
                Production::Binary(l, r) => {
                    stack.push(r);
                    stack.push(l);
                }
            }
        }
        Ok(out)
    }

    /// Symbols reachable from the starts.
    pub fn reachable(&self) -> Vec<SymbolId> {
        let mut seen = std::collections::HashSet::new();
        let mut stack: Vec<SymbolId> = self.starts.clone();
        let mut out = Vec::new();
        while let Some(s) = stack.pop() {
            if !seen.insert(s) {
                continue;
            }
            out.push(s);
            if let Some(e) = self.table.get(&s.0) {
                if let Production::Binary(l, r) = e.prod {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        out
    }

    /// Grammar size: reachable symbols, counting each pseudo-terminal once
    /// and not counting the placeholder characters it stands for.
    pub fn size(&self) -> usize {
        self.reachable().len()
    }

    /// Live pseudo-terminals reachable from the starts.
    pub fn pseudo_terminals(&self) -> Vec<(SymbolId, u64)> {
        self.reachable()
            .into_iter()
            .filter_map(|s| match self.table[&s.0].prod {
                Production::PseudoTerminal(l) => Some((s, l)),
                _ => None,
            })
            .collect()
    }

    /// Drops symbols not reachable from the starts. Ids stay monotone, so
    /// nothing is ever reused.
    pub fn prune(&mut self) {
        let keep: std::collections::HashSet<u64> =
            self.reachable().into_iter().map(|s| s.0).collect();
        self.table.retain(|id, _| keep.contains(id));
    }

    /// Rewrites every reference to `from` (in productions and starts) to
    /// `to`, then refreshes cached heights and fingerprints. Lengths are
    /// unchanged by construction in all callers (the replacement expands to
    /// the same length), which keeps every cached length valid.
    pub fn rewrite_symbol(&mut self, from: SymbolId, to: SymbolId) -> Result<()> {
        if from == to {
            return Ok(());
        }
        let from_len = self.len_of(from)?;
        let to_len = self.len_of(to)?;
        if from_len != to_len {
            return Err(Error::contract(
                "rewrite: replacement expansion length differs from the original",
            ));
        }
        for e in self.table.values_mut() {
            if let Production::Binary(l, r) = &mut e.prod {
                if *l == from {
                    *l = to;
                }
                if *r == from {
                    *r = to;
                }
            }
        }
        for s in &mut self.starts {
            if *s == from {
                *s = to;
            }
        }
        self.table.remove(&from.0);
        self.refresh_caches()
    }

    /// Recomputes heights and fingerprints bottom-up over the whole table
    /// (lengths are validated, not recomputed).
    pub fn refresh_caches(&mut self) -> Result<()> {
        // Topological order by repeated passes is quadratic; do a proper
        // post-order walk instead.
        let ids: Vec<u64> = self.table.keys().copied().collect();
        let mut done = std::collections::HashSet::new();
        for root in ids {
            if done.contains(&root) {
                continue;
            }
            let mut stack = vec![(root, false)];
            while let Some((id, expanded)) = stack.pop() {
                if done.contains(&id) {
                    continue;
                }
                let prod = self.table[&id].prod;
                match prod {
                    Production::Terminal(_) | Production::PseudoTerminal(_) => {
                        done.insert(id);
                    }
                    Production::Binary(l, r) => {
                        if expanded {
                            let fresh = self.make_entry(SymbolId(id), prod)?;
                            let e = self.table.get_mut(&id).unwrap();
                            if e.len != fresh.len {
                                return Err(Error::internal("cached length drifted"));
                            }
                            e.height = fresh.height;
                            e.fp = fresh.fp;
                            done.insert(id);
                        } else {
                            stack.push((id, true));
                            if !done.contains(&l.0) {
                                stack.push((l.0, false));
                            }
                            if !done.contains(&r.0) {
                                stack.push((r.0, false));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// A symbol expanding to exp(a)^e, built by binary exponentiation (one
    /// symbol per distinct floor/ceil half of the exponent).
    pub fn power(&mut self, a: SymbolId, e: u64) -> Result<SymbolId> {
        if e == 0 {
            return Err(Error::input("power: exponent must be positive"));
        }
        let mut memo: HashMap<u64, SymbolId> = HashMap::new();
        self.power_memo(a, e, &mut memo)
    }

    fn power_memo(&mut self, a: SymbolId, e: u64, memo: &mut HashMap<u64, SymbolId>) -> Result<SymbolId> {
        if e == 1 {
            return Ok(a);
        }
        if let Some(&s) = memo.get(&e) {
            return Ok(s);
        }
        let lo = self.power_memo(a, e / 2, memo)?;
        let hi = self.power_memo(a, e - e / 2, memo)?;
        let s = self.concat_symbols(lo, hi)?;
        memo.insert(e, s);
        Ok(s)
    }

    /// The hat grammar: a plain SLP over the same positions where, per
    /// pseudo-terminal A, the first placeholder cell becomes the terminal
    /// Mark(A, 0) and every later cell becomes the filler terminal Run(A).
    /// Byte terminals pass through unchanged. Symbol ids are preserved, so
    /// positions and handles carry over one to one.
    pub fn hat_grammar(&self) -> Result<Xslp> {
        let mut hat = self.clone();
        let pts = {
            let mut v: Vec<(SymbolId, u64)> = self
                .table
                .iter()
                .filter_map(|(&id, e)| match e.prod {
                    Production::PseudoTerminal(l) => Some((SymbolId(id), l)),
                    _ => None,
                })
                .collect();
            v.sort();
            v
        };
        for (a, len) in pts {
            if len == 1 {
                let e = hat.table.get_mut(&a.0).unwrap();
                e.prod = Production::Terminal(Ch::Mark(a, 0));
                e.fp = ch_code(Ch::Mark(a, 0));
            } else {
                let mark = hat.new_symbol(Production::Terminal(Ch::Mark(a, 0)))?;
                let run = hat.new_symbol(Production::Terminal(Ch::Run(a)))?;
                let tail = hat.power(run, len - 1)?;
                let fresh = hat.make_entry(a, Production::Binary(mark, tail))?;
                hat.table.insert(a.0, fresh);
            }
        }
        hat.refresh_caches()?;
        Ok(hat)
    }

    /// Rebuilds the binary skeleton above the given pseudo-terminal letter
    /// string: LZ77-parse the letters, then fold the phrases left to right
    /// with balanced concatenations (overlapping factors are realized by
    /// powering their periodic seed). Returns the new root.
    pub fn rebuild_from_letters(&mut self, sp: &[SymbolId]) -> Result<(SymbolId, usize)> {
        if sp.is_empty() {
            return Err(Error::input("rebuild: empty letter string"));
        }
        let parse = lz77(sp);
        let z = parse.len();
        // Character-position prefix sums over the letter string.
        let mut char_at = Vec::with_capacity(sp.len() + 1);
        let mut acc = 0u64;
        char_at.push(0u64);
        for &s in sp {
            acc += self.len_of(s)?;
            char_at.push(acc);
        }
        let mut cur: Option<SymbolId> = None;
        let mut letters_done = 0usize;
        for ph in &parse.phrases {
            let piece = match *ph {
                LzPhrase::Literal(sym) => {
                    letters_done += 1;
                    sym
                }
                LzPhrase::Factor { src, len } => {
                    let root = cur.ok_or_else(|| Error::internal("factor before any literal"))?;
                    let piece = if src + len <= letters_done {
                        self.extract_symbol(root, char_at[src], char_at[src + len])?
                    } else {
                        // Self-referential factor: the copied region repeats
                        // the seed sp[src..letters_done) periodically.
                        let period = letters_done - src;
                        let seed = self.extract_symbol(root, char_at[src], char_at[letters_done])?;
                        let reps = len / period;
                        let rem = len % period;
                        let mut built = if reps > 0 { Some(self.power(seed, reps as u64)?) } else { None };
                        if rem > 0 {
                            let chars = char_at[src + rem] - char_at[src];
                            let tail = self.extract_symbol(seed, 0, chars)?;
                            built = Some(match built {
                                Some(b) => self.concat_symbols(b, tail)?,
                                None => tail,
                            });
                        }
                        built.ok_or_else(|| Error::internal("empty factor"))?
                    };
                    letters_done += len;
                    piece
                }
            };
            cur = Some(match cur {
                Some(c) => self.concat_symbols(c, piece)?,
                None => piece,
            });
        }
        Ok((cur.expect("non-empty parse"), z))
    }

    /// Recompression: rebuilds each start's skeleton from its
    /// pseudo-terminal letter string so the grammar over letters becomes a
    /// balanced grammar of LZ-proportional size. Expansions and
    /// pseudo-terminal identities are preserved; unreachable symbols are
    /// pruned.
    pub fn recompress(&self, max_letters: u64) -> Result<Xslp> {
        let mut g = self.clone();
        g.recompress_in_place(max_letters)?;
        Ok(g)
    }

    pub fn recompress_in_place(&mut self, max_letters: u64) -> Result<usize> {
        let starts = self.starts.clone();
        let mut new_starts = Vec::with_capacity(starts.len());
        let mut total_z = 0usize;
        for s in starts {
            let sp = self.pt_string(s, max_letters)?;
            let (root, z) = self.rebuild_from_letters(&sp)?;
            new_starts.push(root);
            total_z += z;
        }
        self.starts = new_starts;
        self.prune();
        Ok(total_z)
    }
}

/// Serializes a grammar to the line-oriented text format:
/// `T <id> <byte>`, `P <id> <len>`, `N <id> <left> <right>`, `S <id>...`.
/// Only reachable symbols are written, children before parents.
pub fn write_grammar(g: &Xslp) -> Result<String> {
    let mut order = g.reachable();
    order.reverse(); // reachable() is a preorder from the roots; reverse it
    // so that children tend to precede parents, then fix up below.
    // Emit in dependency order with an explicit resolved set.
    let mut emitted = std::collections::HashSet::new();
    let mut lines = Vec::new();
    let mut pending = order;
    while let Some(s) = pending.pop() {
        if emitted.contains(&s) {
            continue;
        }
        match g.production(s)? {
            Production::Terminal(Ch::Byte(b)) => {
                lines.push(format!("T {} {}", s, b));
                emitted.insert(s);
            }
            Production::Terminal(_) => {
                return Err(Error::contract(
                    "grammar file format carries only byte terminals",
                ))
            }
            Production::PseudoTerminal(l) => {
                lines.push(format!("P {} {}", s, l));
                emitted.insert(s);
            }
            Production::Binary(l, r) => {
                if emitted.contains(&l) && emitted.contains(&r) {
                    lines.push(format!("N {} {} {}", s, l, r));
                    emitted.insert(s);
                } else {
                    pending.push(s);
                    if !emitted.contains(&r) {
                        pending.push(r);
                    }
                    if !emitted.contains(&l) {
                        pending.push(l);
                    }
                }
            }
        }
    }
    let starts: Vec<String> = g.starts().iter().map(|s| s.to_string()).collect();
    lines.push(format!("S {}", starts.join(" ")));
    lines.push(String::new());
    Ok(lines.join("\n"))
}

/// Parses the grammar file format. Ids in the file are preserved exactly, so
/// parse(write(g)) reproduces the same expansions including placeholder
/// identities.
pub fn parse_grammar(text: &str) -> Result<Xslp> {
    let mut g = Xslp::new();
    let mut starts = Vec::new();
    let mut saw_start = false;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = lineno + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let kind = it.next().unwrap();
        let mut num = |what: &str| -> Result<u64> {
            it.next()
                .ok_or_else(|| Error::Parse { line: lineno, msg: format!("missing {what}") })?
                .parse::<u64>()
                .map_err(|_| Error::Parse { line: lineno, msg: format!("bad {what}") })
        };
        match kind {
            "T" => {
                let id = num("id")?;
                let b = num("byte")?;
                if b > 255 {
                    return Err(Error::Parse { line: lineno, msg: "byte out of range".into() });
                }
                g.insert_with_id(id, Production::Terminal(Ch::Byte(b as u8)), lineno)?;
            }
            "P" => {
                let id = num("id")?;
                let l = num("len")?;
                g.insert_with_id(id, Production::PseudoTerminal(l), lineno)?;
            }
            "N" => {
                let id = num("id")?;
                let l = num("left id")?;
                let r = num("right id")?;
                g.insert_with_id(id, Production::Binary(SymbolId(l), SymbolId(r)), lineno)?;
            }
            "S" => {
                saw_start = true;
                for tok in line.split_whitespace().skip(1) {
                    let id: u64 = tok
                        .parse()
                        .map_err(|_| Error::Parse { line: lineno, msg: "bad start id".into() })?;
                    if !g.contains(SymbolId(id)) {
                        return Err(Error::Parse {
                            line: lineno,
                            msg: format!("start references unknown symbol {id}"),
                        });
                    }
                    starts.push(SymbolId(id));
                }
            }
            other => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("unknown record kind '{other}'"),
                })
            }
        }
    }
    if !saw_start {
        return Err(Error::Parse { line: text.lines().count().max(1), msg: "missing start line".into() });
    }
    g.set_starts(starts);
    Ok(g)
}

impl Xslp {
    fn insert_with_id(&mut self, id: u64, p: Production, lineno: usize) -> Result<()> {
        if self.table.contains_key(&id) {
            return Err(Error::Parse { line: lineno, msg: format!("duplicate symbol id {id}") });
        }
        if let Production::Binary(l, r) = p {
            if !self.contains(l) || !self.contains(r) {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "binary production references an undefined symbol".into(),
                });
            }
        }
        let entry = self.make_entry(SymbolId(id), p)?;
        self.table.insert(id, entry);
        self.next_id = self.next_id.max(id + 1);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn byte(g: &mut Xslp, b: u8) -> SymbolId {
        g.new_symbol(Production::Terminal(Ch::Byte(b))).unwrap()
    }

    fn expand_bytes(g: &Xslp, s: SymbolId) -> Vec<u8> {
        g.expand(s, 1 << 20)
            .unwrap()
            .into_iter()
            .map(|c| match c {
                Ch::Byte(b) => b,
                other => panic!("unexpected {other:?}"),
            })
            .collect()
    }

    fn literal(g: &mut Xslp, s: &[u8]) -> SymbolId {
        let mut cur = byte(g, s[0]);
        for &b in &s[1..] {
            let t = byte(g, b);
            cur = g.concat_symbols(cur, t).unwrap();
        }
        cur
    }

    #[test]
    fn new_symbol_lengths() {
        let mut g = Xslp::new();
        let a = byte(&mut g, b'a');
        assert_eq!(g.len_of(a).unwrap(), 1);
        let p = g.new_symbol(Production::PseudoTerminal(6)).unwrap();
        assert_eq!(g.len_of(p).unwrap(), 6);
        let b = g.new_symbol(Production::PseudoTerminal(4)).unwrap();
        let c = g.new_symbol(Production::Binary(p, b)).unwrap();
        assert_eq!(g.len_of(c).unwrap(), 10);
        assert!(g.new_symbol(Production::Binary(SymbolId(99), b)).is_err());
    }

    #[test]
    fn concat_and_access() {
        let mut g = Xslp::new();
        let ab = literal(&mut g, b"ab");
        let c = byte(&mut g, b'c');
        let abc = g.concat_symbols(ab, c).unwrap();
        assert_eq!(expand_bytes(&g, abc), b"abc");
        assert_eq!(g.access_char(abc, 2).unwrap(), Ch::Byte(b'c'));
        assert!(g.access_char(abc, 3).is_err());
        let p = g.new_symbol(Production::PseudoTerminal(4)).unwrap();
        assert_eq!(g.access_char(p, 2).unwrap(), Ch::Mark(p, 2));
    }

    #[test]
    fn doubling_stays_shallow() {
        let mut g = Xslp::new();
        let mut cur = byte(&mut g, b'a');
        for _ in 0..4 {
            cur = g.concat_symbols(cur, cur).unwrap();
        }
        assert_eq!(expand_bytes(&g, cur), vec![b'a'; 16]);
        // Walk the leftmost path and count distinct lengths.
        let mut lens = std::collections::HashSet::new();
        let mut s = cur;
        loop {
            lens.insert(g.len_of(s).unwrap());
            match g.production(s).unwrap() {
                Production::Binary(l, _) => s = l,
                _ => break,
            }
        }
        assert!(lens.len() <= 5, "leftmost path has {} distinct lengths", lens.len());
    }

    #[test]
    fn concat_balances_skewed_inputs() {
        let mut g = Xslp::new();
        // Build a left-leaning chain, then concatenate with a single char;
        // heights must stay logarithmic-ish via rebalancing.
        let mut cur = byte(&mut g, b'x');
        for _ in 0..64 {
            let t = byte(&mut g, b'y');
            cur = g.concat_symbols(cur, t).unwrap();
        }
        assert_eq!(g.len_of(cur).unwrap(), 65);
        assert!(g.height_of(cur).unwrap() <= 12);
    }

    #[test]
    fn extract_ranges() {
        let mut g = Xslp::new();
        let s = literal(&mut g, b"abcdefg");
        let e = g.extract_symbol(s, 2, 5).unwrap();
        assert_eq!(expand_bytes(&g, e), b"cde");
        let whole = g.extract_symbol(s, 0, 7).unwrap();
        assert_eq!(whole, s);
        assert!(g.extract_symbol(s, 3, 3).is_err());
        let p = g.new_symbol(Production::PseudoTerminal(5)).unwrap();
        let sp = g.concat_symbols(s, p).unwrap();
        assert!(matches!(g.extract_symbol(sp, 0, 9), Err(Error::Contract(_))));
        let ok = g.extract_symbol(sp, 5, 12).unwrap();
        assert_eq!(g.len_of(ok).unwrap(), 7);
    }

    #[test]
    fn fingerprints_combine() {
        let mut g = Xslp::new();
        let s = literal(&mut g, b"mississippi");
        for sym in g.reachable() {
            if let Production::Binary(a, b) = g.production(sym).unwrap() {
                let fa = g.fingerprint_of(a).unwrap();
                let fb = g.fingerprint_of(b).unwrap();
                let combined = addmod(mulmod(fa.value, fb.base_power), fb.value);
                assert_eq!(combined, g.fingerprint_of(sym).unwrap().value);
            }
        }
        let _ = s;
    }

    #[test]
    fn hat_grammar_shapes() {
        let mut g = Xslp::new();
        let p1 = g.new_symbol(Production::PseudoTerminal(1)).unwrap();
        let p2 = g.new_symbol(Production::PseudoTerminal(2)).unwrap();
        let p5 = g.new_symbol(Production::PseudoTerminal(5)).unwrap();
        let a = g.concat_symbols(p1, p2).unwrap();
        let b = g.concat_symbols(a, p5).unwrap();
        g.set_starts(vec![b]);
        let hat = g.hat_grammar().unwrap();
        let exp = hat.expand(b, 100).unwrap();
        assert_eq!(
            exp,
            vec![
                Ch::Mark(p1, 0),
                Ch::Mark(p2, 0),
                Ch::Run(p2),
                Ch::Mark(p5, 0),
                Ch::Run(p5),
                Ch::Run(p5),
                Ch::Run(p5),
                Ch::Run(p5),
            ]
        );
        // Positions map one to one.
        assert_eq!(hat.len_of(b).unwrap(), g.len_of(b).unwrap());
    }

    #[test]
    fn rebuild_compresses_repeats() {
        let mut g = Xslp::new();
        let x = g.new_symbol(Production::PseudoTerminal(3)).unwrap();
        let y = g.new_symbol(Production::PseudoTerminal(2)).unwrap();
        let xy = g.concat_symbols(x, y).unwrap();
        let mut cur = xy;
        for _ in 0..7 {
            cur = g.concat_symbols(cur, xy).unwrap();
        }
        g.set_starts(vec![cur]);
        let before = g.size();
        let before_exp = g.expand(cur, 100).unwrap();
        let z = g.recompress_in_place(1 << 20).unwrap();
        let after = g.size();
        assert!(after < before, "{after} !< {before}");
        assert_eq!(z, 3); // two literals plus one long factor
        assert_eq!(g.expand(g.starts()[0], 100).unwrap(), before_exp);
        // Pseudo-terminals survive with identity and length intact.
        let mut pts = g.pseudo_terminals();
        pts.sort();
        assert_eq!(pts, vec![(x, 3), (y, 2)]);
    }

    #[test]
    fn recompress_single_pt_is_fixpoint() {
        let mut g = Xslp::new();
        let p = g.new_symbol(Production::PseudoTerminal(9)).unwrap();
        g.set_starts(vec![p]);
        let g2 = g.recompress(1000).unwrap();
        assert_eq!(g2.size(), 1);
        assert_eq!(g2.starts(), &[p]);
    }

    #[test]
    fn random_rebuild_round_trips() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..60 {
            let mut g = Xslp::new();
            let npts = rng.gen_range(1..6usize);
            let pts: Vec<SymbolId> = (0..npts)
                .map(|_| g.new_symbol(Production::PseudoTerminal(rng.gen_range(1..5))).unwrap())
                .collect();
            let letters: Vec<SymbolId> =
                (0..rng.gen_range(1..60usize)).map(|_| pts[rng.gen_range(0..npts)]).collect();
            let mut cur = letters[0];
            for &l in &letters[1..] {
                cur = g.concat_symbols(cur, l).unwrap();
            }
            g.set_starts(vec![cur]);
            let want = g.expand(cur, 1 << 16).unwrap();
            g.recompress_in_place(1 << 16).unwrap();
            assert_eq!(g.expand(g.starts()[0], 1 << 16).unwrap(), want);
        }
    }

    #[test]
    fn file_round_trip() {
        let mut g = Xslp::new();
        let a = byte(&mut g, b'a');
        let p = g.new_symbol(Production::PseudoTerminal(4)).unwrap();
        let ap = g.concat_symbols(a, p).unwrap();
        let app = g.concat_symbols(ap, p).unwrap();
        g.set_starts(vec![app, p]);
        let text = write_grammar(&g).unwrap();
        let g2 = parse_grammar(&text).unwrap();
        assert_eq!(g2.starts().len(), 2);
        for (s1, s2) in g.starts().iter().zip(g2.starts()) {
            assert_eq!(g.expand(*s1, 1000).unwrap(), g2.expand(*s2, 1000).unwrap());
        }
        assert!(parse_grammar("T 0 300\nS 0\n").is_err());
        assert!(parse_grammar("N 0 1 2\nS 0\n").is_err());
        assert!(parse_grammar("T 0 65\n").is_err(), "missing start line");
    }

    #[test]
    fn expansion_matches_access_everywhere() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..30 {
            let mut g = Xslp::new();
            let mut syms: Vec<SymbolId> = Vec::new();
            for _ in 0..rng.gen_range(1..4usize) {
                syms.push(g.new_symbol(Production::PseudoTerminal(rng.gen_range(1..6))).unwrap());
            }
            for _ in 0..rng.gen_range(0..3usize) {
                let b = rng.gen_range(b'a'..b'd');
                syms.push(g.new_symbol(Production::Terminal(Ch::Byte(b))).unwrap());
            }
            for _ in 0..rng.gen_range(1..12usize) {
                let a = syms[rng.gen_range(0..syms.len())];
                let b = syms[rng.gen_range(0..syms.len())];
                syms.push(g.concat_symbols(a, b).unwrap());
            }
            let root = *syms.last().unwrap();
            if g.len_of(root).unwrap() > 4096 {
                continue;
            }
            let exp = g.expand(root, 4096).unwrap();
            for (i, want) in exp.iter().enumerate() {
                assert_eq!(g.access_char(root, i as u64).unwrap(), *want);
            }
        }
    }
}
