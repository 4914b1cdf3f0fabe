//! Plain-string primitives: Hamming scans, periodicity, rotations, exact
//! matching, LZ77 factorization, and the brute-force oracles used by tests.
//!
//! Everything here is generic over the character type so the same routines
//! serve raw byte strings and sentinel-bearing expansions alike. All
//! functions are pure.

use crate::error::{Error, Result};

/// Mismatch information between two equal-length strings: the sorted list of
/// positions where they differ, with both characters recorded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MismatchInfo<T> {
    /// (position, left char, right char), positions strictly increasing.
    pub entries: Vec<(usize, T, T)>,
}

impl<T> MismatchInfo<T> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
    pub fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|e| e.0)
    }
}

/// An arithmetic progression of positions: start, start+diff, ...,
/// start+(count-1)*diff. Empty iff count = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArithmeticProgression {
    pub start: u64,
    pub diff: u64,
    pub count: u64,
}

impl ArithmeticProgression {
    pub fn empty() -> Self {
        ArithmeticProgression { start: 0, diff: 1, count: 0 }
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.count).map(move |b| self.start + b * self.diff)
    }

    pub fn contains(&self, x: u64) -> bool {
        x >= self.start
            && (x - self.start) % self.diff == 0
            && (x - self.start) / self.diff < self.count
    }

    /// Builds a progression from an ascending position list, requiring the
    /// gaps to be uniform (callers rely on the periodicity of occurrence
    /// sets in short windows).
    pub fn from_sorted(positions: &[u64]) -> Result<Self> {
        match positions {
            [] => Ok(Self::empty()),
            [only] => Ok(ArithmeticProgression { start: *only, diff: 1, count: 1 }),
            [first, rest @ ..] => {
                let diff = rest[0] - first;
                if diff == 0 {
                    return Err(Error::input("duplicate positions in progression"));
                }
                let mut prev = *first;
                for &p in rest {
                    if p - prev != diff {
                        return Err(Error::input("positions do not form a progression"));
                    }
                    prev = p;
                }
                Ok(ArithmeticProgression { start: *first, diff, count: positions.len() as u64 })
            }
        }
    }
}

/// Compares `x` and `y` position by position, collecting mismatches until
/// `cap` is exceeded. Returns the full mismatch information when the
/// Hamming distance is at most `cap`, and `None` otherwise (having looked at
/// no more than cap+1 mismatches).
pub fn hamming_mismatches_capped<T: Copy + Eq>(
    x: &[T],
    y: &[T],
    cap: usize,
) -> Result<Option<MismatchInfo<T>>> {
    if x.len() != y.len() {
        return Err(Error::input(format!(
            "hamming: length mismatch {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let mut entries = Vec::new();
    for i in 0..x.len() {
        if x[i] != y[i] {
            if entries.len() == cap {
                return Ok(None);
            }
            entries.push((i, x[i], y[i]));
        }
    }
    Ok(Some(MismatchInfo { entries }))
}

/// Hamming distance by full scan.
pub fn hamming_distance<T: Eq>(x: &[T], y: &[T]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::input("hamming: length mismatch"));
    }
    Ok(x.iter().zip(y).filter(|(a, b)| a != b).count())
}

/// Prefix function (border array) of `x`: fail[i] = length of the longest
/// proper border of x[0..i].
fn prefix_function<T: Eq>(x: &[T]) -> Vec<usize> {
    let n = x.len();
    let mut fail = vec![0usize; n + 1];
    let mut k = 0usize;
    for i in 1..n {
        while k > 0 && x[i] != x[k] {
            k = fail[k];
        }
        if x[i] == x[k] {
            k += 1;
        }
        fail[i + 1] = k;
    }
    fail
}

/// Smallest period of `x`: the minimal p >= 1 with x[i] = x[i+p] for all
/// valid i. Computed from the longest border.
pub fn smallest_period<T: Eq>(x: &[T]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::input("smallest_period: empty string"));
    }
    let fail = prefix_function(x);
    Ok(x.len() - fail[x.len()])
}

/// All positions where `p` occurs exactly in `t`, ascending. Linear-time
/// matcher; returns empty when |p| > |t|.
pub fn exact_occurrences<T: Eq>(p: &[T], t: &[T]) -> Vec<usize> {
    let m = p.len();
    if m == 0 || m > t.len() {
        return Vec::new();
    }
    let fail = prefix_function(p);
    let mut out = Vec::new();
    let mut k = 0usize;
    for (i, c) in t.iter().enumerate() {
        while k > 0 && (k == m || *c != p[k]) {
            k = fail[k];
        }
        if *c == p[k] {
            k += 1;
        }
        if k == m {
            out.push(i + 1 - m);
        }
    }
    out
}

/// `rot^r(x)`: rotating once moves the last character to the front, so
/// rot^r(x)[i] = x[(i - r) mod |x|].
pub fn rotate<T: Copy>(x: &[T], r: usize) -> Vec<T> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let r = r % n;
    let mut out = Vec::with_capacity(n);
    out.extend_from_slice(&x[n - r..]);
    out.extend_from_slice(&x[..n - r]);
    out
}

/// Whether `q` is primitive: q occurs inside q·q only at offsets 0 and |q|.
pub fn is_primitive<T: Copy + Eq>(q: &[T]) -> bool {
    if q.is_empty() {
        return false;
    }
    let mut qq = Vec::with_capacity(2 * q.len());
    qq.extend_from_slice(q);
    qq.extend_from_slice(q);
    // An interior occurrence witnesses a smaller period dividing |q|.
    exact_occurrences(q, &qq[1..2 * q.len() - 1]).is_empty()
}

/// Finds the unique `a` with rot^a(q) = x, if any. `q` must be primitive;
/// implemented as an exact search for q inside x·x[0..|x|-1).
pub fn rotation_index<T: Copy + Eq>(x: &[T], q: &[T]) -> Result<Option<usize>> {
    if x.len() != q.len() {
        return Err(Error::input("rotation_index: length mismatch"));
    }
    if !is_primitive(q) {
        return Err(Error::contract("rotation_index: q is not primitive"));
    }
    let n = x.len();
    let mut xx = Vec::with_capacity(2 * n - 1);
    xx.extend_from_slice(x);
    xx.extend_from_slice(&x[..n - 1]);
    Ok(exact_occurrences(q, &xx).first().copied())
}

/// Positions in [0, |t|-|p|] where p matches the aligned window of t with at
/// most k mismatches — the brute-force oracle.
pub fn naive_occ_hk<T: Eq>(p: &[T], t: &[T], k: usize) -> Vec<usize> {
    let (m, n) = (p.len(), t.len());
    if m == 0 || m > n {
        return Vec::new();
    }
    let mut out = Vec::new();
    'outer: for i in 0..=n - m {
        let mut mism = 0usize;
        for j in 0..m {
            if p[j] != t[i + j] {
                mism += 1;
                if mism > k {
                    continue 'outer;
                }
            }
        }
        out.push(i);
    }
    out
}

/// gcd of all elements; 0 for the empty set, and gcd(0, x) = x, so a set
/// containing only zeros has gcd 0.
pub fn gcd_of_set<I: IntoIterator<Item = u64>>(s: I) -> u64 {
    let mut g = 0u64;
    for x in s {
        g = gcd(g, x);
    }
    g
}

pub fn gcd(a: u64, b: u64) -> u64 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// One phrase of an LZ77-like factorization: either a fresh literal or a
/// reference to an earlier occurrence (which may overlap the phrase itself).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LzPhrase<T> {
    Literal(T),
    Factor { src: usize, len: usize },
}

/// Greedy leftmost-longest LZ77 factorization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LzFactorization<T> {
    pub phrases: Vec<LzPhrase<T>>,
}

impl<T: Copy> LzFactorization<T> {
    /// Re-expands the factorization (overlap-aware).
    pub fn decode(&self) -> Vec<T> {
        let mut out: Vec<T> = Vec::new();
        for ph in &self.phrases {
            match *ph {
                LzPhrase::Literal(c) => out.push(c),
                LzPhrase::Factor { src, len } => {
                    for i in 0..len {
                        let c = out[src + i];
                        out.push(c);
                    }
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }
}

/// Suffix array by prefix doubling.
fn suffix_array<T: Ord>(s: &[T]) -> Vec<usize> {
    let n = s.len();
    if n == 0 {
        return Vec::new();
    }
    let mut sa: Vec<usize> = (0..n).collect();
    // Initial ranks from character order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].cmp(&s[b]));
    let mut rank = vec![0usize; n];
    let mut r = 0;
    for i in 0..n {
        if i > 0 && s[order[i]] != s[order[i - 1]] {
            r += 1;
        }
        rank[order[i]] = r;
    }
    let mut tmp = vec![0usize; n];
    let mut k = 1usize;
    while k < n {
        let key = |i: usize| (rank[i], if i + k < n { rank[i + k] + 1 } else { 0 });
        sa.sort_unstable_by_key(|&i| key(i));
        tmp[sa[0]] = 0;
        for i in 1..n {
            tmp[sa[i]] = tmp[sa[i - 1]] + usize::from(key(sa[i]) != key(sa[i - 1]));
        }
        rank.copy_from_slice(&tmp);
        if rank[sa[n - 1]] == n - 1 {
            break;
        }
        k *= 2;
    }
    sa
}

/// LCP array (Kasai): lcp[i] = lcp(suffix sa[i-1], suffix sa[i]), lcp[0]=0.
fn lcp_array<T: Eq>(s: &[T], sa: &[usize]) -> Vec<usize> {
    let n = s.len();
    let mut rank = vec![0usize; n];
    for (i, &p) in sa.iter().enumerate() {
        rank[p] = i;
    }
    let mut lcp = vec![0usize; n];
    let mut h = 0usize;
    for i in 0..n {
        if rank[i] > 0 {
            let j = sa[rank[i] - 1];
            while i + h < n && j + h < n && s[i + h] == s[j + h] {
                h += 1;
            }
            lcp[rank[i]] = h;
            h = h.saturating_sub(1);
        } else {
            h = 0;
        }
    }
    lcp
}

/// Sparse table for range-minimum over the LCP array.
struct Rmq {
    table: Vec<Vec<usize>>,
}

impl Rmq {
    fn new(v: &[usize]) -> Self {
        let n = v.len();
        let levels = if n <= 1 { 1 } else { n.ilog2() as usize + 1 };
        let mut table = Vec::with_capacity(levels);
        table.push(v.to_vec());
        for j in 1..levels {
            let half = 1usize << (j - 1);
            let prev = &table[j - 1];
            let len = n + 1 - (1 << j).min(n + 1);
            let mut row = Vec::with_capacity(len);
            for i in 0..len {
                row.push(prev[i].min(prev[i + half]));
            }
            table.push(row);
        }
        Rmq { table }
    }

    /// min over v[a..b), requires a < b.
    fn min(&self, a: usize, b: usize) -> usize {
        let j = (b - a).ilog2() as usize;
        self.table[j][a].min(self.table[j][b - (1 << j)])
    }
}

/// Greedy leftmost-longest LZ77 with self-referential factors, via the
/// longest-previous-factor table (suffix array + rank-neighbor scan).
pub fn lz77<T: Copy + Ord>(s: &[T]) -> LzFactorization<T> {
    let n = s.len();
    if n == 0 {
        return LzFactorization { phrases: Vec::new() };
    }
    let sa = suffix_array(s);
    let lcp = lcp_array(s, &sa);
    let rmq = Rmq::new(&lcp);
    let mut rank = vec![0usize; n];
    for (i, &p) in sa.iter().enumerate() {
        rank[p] = i;
    }
    // lcp between the suffixes at SA positions a < b.
    let lcp_between = |a: usize, b: usize| -> usize {
        debug_assert!(a < b);
        rmq.min(a + 1, b + 1)
    };
    // Process suffix indices from largest to smallest, maintaining a doubly
    // linked list over SA positions; the list neighbors of rank[i] are the
    // closest-ranked suffixes that start strictly before i.
    let mut prev: Vec<isize> = (0..n as isize).map(|i| i - 1).collect();
    let mut next: Vec<isize> = (1..=n as isize).collect();
    let mut lpf = vec![0usize; n];
    let mut lpf_src = vec![0usize; n];
    for i in (0..n).rev() {
        let r = rank[i];
        let left = prev[r];
        let right = next[r];
        if left >= 0 {
            let l = lcp_between(left as usize, r);
            if l > lpf[i] {
                lpf[i] = l;
                lpf_src[i] = sa[left as usize];
            }
        }
        if (right as usize) < n {
            let l = lcp_between(r, right as usize);
            if l > lpf[i] {
                lpf[i] = l;
                lpf_src[i] = sa[right as usize];
            }
        }
        // Unlink r.
        if left >= 0 {
            next[left as usize] = right;
        }
        if (right as usize) < n {
            prev[right as usize] = left;
        }
    }
    let mut phrases = Vec::new();
    let mut pos = 0usize;
    while pos < n {
        if lpf[pos] == 0 {
            phrases.push(LzPhrase::Literal(s[pos]));
            pos += 1;
        } else {
            phrases.push(LzPhrase::Factor { src: lpf_src[pos], len: lpf[pos] });
            pos += lpf[pos];
        }
    }
    LzFactorization { phrases }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capped_mismatches_basics() {
        let mi = hamming_mismatches_capped(b"abc", b"abc", 0).unwrap().unwrap();
        assert!(mi.is_empty());
        let mi = hamming_mismatches_capped(b"abc", b"axc", 1).unwrap().unwrap();
        assert_eq!(mi.entries, vec![(1, b'b', b'x')]);
        assert!(hamming_mismatches_capped(b"abc", b"xyz", 2).unwrap().is_none());
        assert!(hamming_mismatches_capped(b"ab", b"abc", 1).is_err());
    }

    #[test]
    fn periods() {
        assert_eq!(smallest_period(b"aaaa").unwrap(), 1);
        assert_eq!(smallest_period(b"abcab").unwrap(), 3);
        assert_eq!(smallest_period(b"abcd").unwrap(), 4);
        assert!(smallest_period::<u8>(&[]).is_err());
    }

    #[test]
    fn rotations() {
        assert_eq!(rotate(b"abcd", 1), b"dabc".to_vec());
        assert_eq!(rotation_index(b"ab", b"ab").unwrap(), Some(0));
        assert_eq!(rotation_index(b"ba", b"ab").unwrap(), Some(1));
        assert_eq!(rotation_index(b"aa", b"ab").unwrap(), None);
        assert!(rotation_index(b"abab", b"abab").is_err());
        // rot^a(q) = x must hold whenever an index is returned.
        let q = b"abcde";
        for a in 0..q.len() {
            let x = rotate(q, a);
            assert_eq!(rotation_index(&x, q).unwrap(), Some(a));
        }
    }

    #[test]
    fn exact_matching() {
        assert_eq!(exact_occurrences(b"ab", b"abab"), vec![0, 2]);
        assert_eq!(exact_occurrences(b"a", b"bbb"), Vec::<usize>::new());
        assert_eq!(exact_occurrences(b"abc", b"abc"), vec![0]);
        assert_eq!(exact_occurrences(b"aa", b"aaaa"), vec![0, 1, 2]);
    }

    #[test]
    fn naive_hk() {
        assert_eq!(naive_occ_hk(b"ab", b"abab", 0), vec![0, 2]);
        assert_eq!(naive_occ_hk(b"aa", b"abab", 1), vec![0, 1, 2]);
        assert_eq!(naive_occ_hk(b"abc", b"abc", 0), vec![0]);
    }

    #[test]
    fn gcds() {
        assert_eq!(gcd_of_set([0u64, 12]), 12);
        assert_eq!(gcd_of_set([0u64, 6, 9, 12]), 3);
        assert_eq!(gcd_of_set(Vec::<u64>::new()), 0);
    }

    #[test]
    fn lz_examples() {
        let f = lz77(b"abab");
        assert_eq!(
            f.phrases,
            vec![
                LzPhrase::Literal(b'a'),
                LzPhrase::Literal(b'b'),
                LzPhrase::Factor { src: 0, len: 2 }
            ]
        );
        let f = lz77(b"aaaa");
        assert_eq!(
            f.phrases,
            vec![LzPhrase::Literal(b'a'), LzPhrase::Factor { src: 0, len: 3 }]
        );
        assert!(lz77::<u8>(&[]).is_empty());
    }

    #[test]
    fn lz_round_trip_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(0..300);
            let sigma = rng.gen_range(1..5u8);
            let s: Vec<u8> = (0..n).map(|_| rng.gen_range(0..sigma)).collect();
            let f = lz77(&s);
            assert_eq!(f.decode(), s);
            // Each factor must reference a strictly earlier start.
            let mut pos = 0usize;
            for ph in &f.phrases {
                match *ph {
                    LzPhrase::Literal(_) => pos += 1,
                    LzPhrase::Factor { src, len } => {
                        assert!(src < pos);
                        pos += len;
                    }
                }
            }
        }
    }

    #[test]
    fn lz_is_greedy_longest() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let n = rng.gen_range(1..120);
            let s: Vec<u8> = (0..n).map(|_| rng.gen_range(0..3u8)).collect();
            let f = lz77(&s);
            // Hand-simulate the greedy parse with a quadratic scan.
            let mut pos = 0usize;
            for ph in &f.phrases {
                let mut best = 0usize;
                for j in 0..pos {
                    let mut l = 0usize;
                    while pos + l < n && s[j + l] == s[pos + l] {
                        l += 1;
                    }
                    best = best.max(l);
                }
                match *ph {
                    LzPhrase::Literal(c) => {
                        assert_eq!(best, 0);
                        assert_eq!(c, s[pos]);
                        pos += 1;
                    }
                    LzPhrase::Factor { len, .. } => {
                        assert_eq!(len, best);
                        pos += len;
                    }
                }
            }
            assert_eq!(pos, n);
        }
    }

    #[test]
    fn progression_helpers() {
        let ap = ArithmeticProgression::from_sorted(&[3, 7, 11]).unwrap();
        assert_eq!(ap, ArithmeticProgression { start: 3, diff: 4, count: 3 });
        assert!(ap.contains(7));
        assert!(!ap.contains(8));
        assert!(!ap.contains(15));
        assert!(ArithmeticProgression::from_sorted(&[1, 2, 4]).is_err());
        assert_eq!(ArithmeticProgression::empty().iter().count(), 0);
    }

    #[test]
    fn period_gcd_spot_checks() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut tested = 0;
        while tested < 50 {
            let m = rng.gen_range(1..40usize);
            let n = rng.gen_range(m..(2 * m + 2).min(80));
            let t: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
            let p = t[..m].to_vec();
            let occ = exact_occurrences(&p, &t);
            if !occ.contains(&(n - m)) {
                continue;
            }
            tested += 1;
            // When p occurs at both 0 and n-m and |t| <= 2|p|+1, the gcd of
            // the occurrence set is a period of t.
            let g = gcd_of_set(occ.iter().map(|&x| x as u64)) as usize;
            if g >= 1 {
                for i in 0..n - g {
                    assert_eq!(t[i], t[i + g]);
                }
            }
        }
    }
}
