//! `eqgram`: command-line front end for the substring-equation solver and
//! the k-mismatch matcher.
//!
//! Exit codes: 0 success, 1 property or verification failure, 2 usage or
//! parse error, 3 resource bound exceeded.

mod benchreport;
mod selftest;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use eqgram_core::grammar::{parse_grammar, write_grammar, Ch, Xslp};
use eqgram_core::pipeline::{match_full, Mode, Verify};
use eqgram_core::solver::{
    oracle_universal_solution, parse_equations, partition_from_expansion, solve_multi,
    solve_system, EquationSystem, Solution,
};
use eqgram_core::{Counters, Error, RunConfig};

/// A command failure carrying the process exit code.
pub struct Failure {
    pub code: u8,
    pub msg: String,
}

impl Failure {
    pub fn new(code: u8, msg: impl Into<String>) -> Failure {
        Failure { code, msg: msg.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = match &e {
            Error::Input(_) | Error::Parse { .. } => 2,
            Error::Resource(_) => 3,
            _ => 1,
        };
        Failure { code, msg: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure { code: 2, msg: e.to_string() }
    }
}

#[derive(Parser)]
#[command(name = "eqgram", version, about = "Substring-equation solving and k-mismatch matching")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Report,
    Decide,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyArg {
    Kangaroo,
    Naive,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve a substring-equation system and summarize the universal
    /// solution.
    SolveEq {
        /// Equation file: `n <len>` or `lens <l1> <l2> ...`, then one
        /// equation per line.
        equations: PathBuf,
        /// Write the solution grammar to this file.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Re-derive the partition with the brute-force oracle and compare.
        #[arg(long)]
        check: bool,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Find all occurrences of a pattern in a text with at most k
    /// mismatches.
    Pm {
        pattern: PathBuf,
        text: PathBuf,
        #[arg(short)]
        k: usize,
        #[arg(long, value_enum, default_value = "report")]
        mode: ModeArg,
        #[arg(long, value_enum, default_value = "kangaroo")]
        verify: VerifyArg,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        json: bool,
        /// Reduce every input byte modulo this alphabet size first.
        #[arg(long)]
        alphabet: Option<u8>,
    },
    /// Grammar file utilities.
    Grammar {
        #[command(subcommand)]
        cmd: GrammarCmd,
    },
    /// Run the randomized property suites.
    Selftest {
        #[arg(value_enum)]
        suite: selftest::Suite,
        #[arg(long)]
        seed: Option<u64>,
        /// Deliberately corrupt one expected answer (testing the harness).
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Wall-clock measurement tables.
    Bench {
        #[arg(value_enum)]
        suite: benchreport::BenchSuite,
    },
}

#[derive(Subcommand)]
enum GrammarCmd {
    /// Print structure and expansion previews of a grammar file.
    Inspect { file: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

/// Effective configuration: `--seed` beats `EQGRAM_SEED` beats the default.
fn base_config(seed: Option<u64>) -> RunConfig {
    let mut cfg = RunConfig::default();
    if let Ok(v) = std::env::var("EQGRAM_SEED") {
        if let Ok(s) = v.trim().parse::<u64>() {
            cfg.seed = s;
        }
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::SolveEq { equations, out, check, json, seed } => {
            cmd_solve_eq(&equations, out.as_deref(), check, json, seed)
        }
        Cmd::Pm { pattern, text, k, mode, verify, seed, json, alphabet } => {
            cmd_pm(&pattern, &text, k, mode, verify, seed, json, alphabet)
        }
        Cmd::Grammar { cmd: GrammarCmd::Inspect { file } } => cmd_inspect(&file),
        Cmd::Selftest { suite, seed, inject_fault } => {
            selftest::run(suite, &base_config(seed), inject_fault)
        }
        Cmd::Bench { suite } => benchreport::run(suite),
    }
}

fn solve(sys: &EquationSystem, cfg: &RunConfig) -> Result<Solution, Failure> {
    let sol = if sys.lengths.len() == 1 { solve_system(sys, cfg) } else { solve_multi(sys, cfg) };
    Ok(sol?)
}

fn counters_text(c: &Counters) -> String {
    format!(
        "char_accesses={} pillar_ops={} while_iterations={} splits={} substitutes={} \
         grammar_size={} lz_size={}",
        c.char_accesses,
        c.pillar_ops,
        c.while_iterations,
        c.splits,
        c.substitutes,
        c.grammar_size,
        c.lz_size
    )
}

fn counters_json(c: &Counters) -> serde_json::Value {
    serde_json::json!({
        "char_accesses": c.char_accesses,
        "pillar_ops": c.pillar_ops,
        "while_iterations": c.while_iterations,
        "splits": c.splits,
        "substitutes": c.substitutes,
        "grammar_size": c.grammar_size,
        "lz_size": c.lz_size,
    })
}

fn cmd_solve_eq(
    equations: &std::path::Path,
    out: Option<&std::path::Path>,
    check: bool,
    json: bool,
    seed: Option<u64>,
) -> Result<(), Failure> {
    let cfg = base_config(seed);
    let text = std::fs::read_to_string(equations)?;
    let sys = parse_equations(&text)?;
    let sol = solve(&sys, &cfg)?;
    let partition = partition_from_expansion(&sol.grammar, cfg.max_expansion)?;
    let classes = partition.iter().collect::<std::collections::BTreeSet<_>>().len();
    if check {
        let want = oracle_universal_solution(&sys, &cfg)?;
        if partition != want {
            return Err(Failure::new(1, "universal solution differs from the oracle partition"));
        }
    }
    if let Some(path) = out {
        std::fs::write(path, write_grammar(&sol.grammar)?)?;
    }
    if json {
        let v = serde_json::json!({
            "classes": classes,
            "strings": sys.lengths.len(),
            "total_len": sys.total_len(),
            "grammar_size": sol.grammar.size(),
            "checked": check,
            "counters": counters_json(&sol.counters),
        });
        println!("{v}");
    } else {
        println!(
            "classes={} strings={} total_len={} grammar_size={}{}",
            classes,
            sys.lengths.len(),
            sys.total_len(),
            sol.grammar.size(),
            if check { " checked=ok" } else { "" }
        );
        println!("counters: {}", counters_text(&sol.counters));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_pm(
    pattern: &std::path::Path,
    text: &std::path::Path,
    k: usize,
    mode: ModeArg,
    verify: VerifyArg,
    seed: Option<u64>,
    json: bool,
    alphabet: Option<u8>,
) -> Result<(), Failure> {
    let cfg = base_config(seed);
    let mut p = std::fs::read(pattern)?;
    let mut t = std::fs::read(text)?;
    if let Some(sigma) = alphabet {
        if sigma == 0 {
            return Err(Failure::new(2, "alphabet size must be positive"));
        }
        for b in p.iter_mut().chain(t.iter_mut()) {
            *b %= sigma;
        }
    }
    if p.is_empty() || p.len() > t.len() {
        return Err(Failure::new(2, "need 1 <= |pattern| <= |text|"));
    }
    let (m, v) = (
        match mode {
            ModeArg::Report => Mode::Report,
            ModeArg::Decide => Mode::Decide,
        },
        match verify {
            VerifyArg::Kangaroo => Verify::Kangaroo,
            VerifyArg::Naive => Verify::Naive,
        },
    );
    let rep = match_full(&p, &t, k, m, v, &cfg)?;
    if json {
        let v = serde_json::json!({
            "occurrences": rep.occurrences,
            "decided": matches!(m, Mode::Decide),
            "counters": counters_json(&rep.counters),
        });
        println!("{v}");
        return Ok(());
    }
    match m {
        Mode::Report => {
            let mut line = String::new();
            for (i, o) in rep.occurrences.iter().enumerate() {
                if i > 0 {
                    line.push(' ');
                }
                let _ = write!(line, "{o}");
            }
            println!("{line}");
        }
        Mode::Decide => match rep.occurrences.first() {
            Some(o) => println!("yes {o}"),
            None => println!("no"),
        },
    }
    println!("counters: {}", counters_text(&rep.counters));
    Ok(())
}

/// Printable form of one expanded character: bytes as themselves (escaped
/// outside the printable range), placeholder cells as `@<symbol>.<offset>`.
fn render_ch(c: Ch) -> String {
    match c {
        Ch::Byte(b) if (0x20..0x7f).contains(&b) => (b as char).to_string(),
        Ch::Byte(b) => format!("\\x{b:02x}"),
        Ch::Mark(sym, off) => format!("@{}.{}", sym.0, off),
        Ch::Run(sym) => format!("@{}.+", sym.0),
    }
}

fn cmd_inspect(file: &std::path::Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(file)?;
    let g: Xslp = parse_grammar(&text)?;
    println!(
        "symbols={} pseudo_terminals={} starts={}",
        g.size(),
        g.pseudo_terminals().len(),
        g.starts().len()
    );
    for (i, &s) in g.starts().iter().enumerate() {
        let len = g.len_of(s)?;
        let height = g.height_of(s)?;
        let preview_len = len.min(64);
        let mut preview = String::new();
        for pos in 0..preview_len {
            preview.push_str(&render_ch(g.access_char(s, pos)?));
        }
        if preview_len < len {
            preview.push_str("...");
        }
        println!("start {i}: symbol={} len={len} height={height} expansion={preview}", s.0);
    }
    Ok(())
}
