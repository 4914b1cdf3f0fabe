//! Core library: substring-equation solving over grammar-compressed strings.
//!
//! The pieces fit together like this:
//!
//! * [`strings`] — plain-string primitives (periods, rotations, LZ77,
//!   Hamming scans) and the brute-force oracles every other module is
//!   tested against.
//! * [`grammar`] — the extended SLP (`Xslp`): terminals, binary
//!   non-terminals, and length-annotated pseudo-terminals, with balanced
//!   concatenate/extract, the hat-grammar transform, and recompression.
//! * [`solver`] — the dynamic split/substitute structure and
//!   `set_substrings_equal`, solving whole systems of substring equations
//!   into a universal solution represented as an `Xslp`.
//! * [`pillar`] — Access/LCE/LCE^R/IPM/Extract queries over either plain
//!   strings or a frozen `Xslp`.
//! * [`proxy`] — inference graphs over candidate occurrences and the
//!   proxy-string (P#, T#) construction for matching with mismatches.
//! * [`pipeline`] — pattern analysis, candidate generation, filtering and
//!   verification: pattern matching with up to k mismatches end to end.

pub mod config;
pub mod error;
pub mod grammar;
pub mod pillar;
pub mod pipeline;
pub mod proxy;
pub mod solver;
pub mod strings;

pub use config::{Counters, RunConfig};
pub use error::{Error, Result};
