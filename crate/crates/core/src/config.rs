//! Run-wide configuration knobs and operation counters.

/// Tunables shared by the solver, the proxy pipeline and the CLI.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Root seed for all randomized components (candidate sampling, block
    /// rng splitting). The `EQGRAM_SEED` environment variable overrides the
    /// default in the CLI.
    pub seed: u64,
    /// Number of independent sampling rounds per candidate-generation stage
    /// is `ceil(repetition_factor * log2(n))`.
    pub repetition_factor: u32,
    /// Recompress after every substitute and after every
    /// `recompress_cadence`-th split.
    pub recompress_cadence: u32,
    /// Upper bound on the pseudo-terminal string length that recompression
    /// will materialize.
    pub max_expansion: u64,
    /// Upper bound on union-find merge work in the brute-force
    /// universal-solution oracle.
    pub max_merged_pairs: u64,
    /// Attach per-occurrence mismatch information to match reports.
    pub collect_mi: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0xE9_61_5F_3A_11C0FFEE,
            repetition_factor: 40,
            recompress_cadence: 1,
            max_expansion: 1_000_000,
            max_merged_pairs: 1_000_000,
            collect_mi: false,
        }
    }
}

/// Work counters reported by the solver and the matching pipeline.
///
/// All fields are monotone non-decreasing within one run. They stand in for
/// query accounting: we count character accesses instead of claiming any
/// sublinear query bound.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub char_accesses: u64,
    pub pillar_ops: u64,
    pub while_iterations: u64,
    pub splits: u64,
    pub substitutes: u64,
    pub grammar_size: u64,
    pub lz_size: u64,
}

impl Counters {
    pub fn absorb(&mut self, other: &Counters) {
        self.char_accesses += other.char_accesses;
        self.pillar_ops += other.pillar_ops;
        self.while_iterations += other.while_iterations;
        self.splits += other.splits;
        self.substitutes += other.substitutes;
        self.grammar_size = self.grammar_size.max(other.grammar_size);
        self.lz_size = self.lz_size.max(other.lz_size);
    }
}
