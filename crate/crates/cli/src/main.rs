//! Command-line surface for the p-adic Stirling toolkit: exact Stirling
//! numbers, `v_p(S(n,k))` single values and tables, certified
//! congruence-class trees, zero refinement, named identity verifiers, and
//! observational slope sweeps.
//!
//! Conventions:
//!
//! * the primary result goes to stdout (or `--out FILE`); diagnostics and
//!   error messages go to stderr, never mixed into machine output;
//! * JSON is canonical: keys sorted, every payload carries
//!   `"schema_version"`, and no floats appear — a valuation is an integer
//!   or the string `"inf"`, big integers are decimal strings;
//! * p-adic digit lists are base `p` with the most significant digit last
//!   (entry `i` is the coefficient of `p^i`);
//! * exit status: 0 = success / verification pass, 1 = verification failure,
//!   counterexample, or computation failure, 2 = usage error.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde_json::{json, Value};

use padic_stirling::analytic::StirlingExpSum;
use padic_stirling::padic::{require_prime, ValBound, Valuation};
use padic_stirling::stirling::{stirling_exact, stirling_mod, vp_stirling};
use padic_stirling::tree::{
    build_past_stabilization, build_tree, refine_zero, ChainReport, ClassNode, NodeStatus,
    TreeReport,
};
use padic_stirling::verify::{
    reproduce_multiplicity_remark, sweep_slopes, verify_conjecture_structure, verify_decomposition,
    verify_final_theorem, verify_gessel_lengyel, verify_lengyel_wannemacker,
    verify_tree_brute_force, VerifierReport,
};
use padic_stirling::Error;

/// Version tag of every JSON payload this binary emits.
const SCHEMA_VERSION: u64 = 1;

/// Environment variable supplying the default working precision (digits of
/// `p`) for the `tree` and `zero` verbs; `--precision` takes priority.
const ENV_PRECISION: &str = "PADIC_STIRLING_PRECISION";

/// Guard against accidental giant sweeps; the grid is meant for desk-scale
/// exploration.
const SWEEP_CELL_CAP: usize = 200;

#[derive(Parser)]
#[command(
    name = "padic-stirling",
    version,
    about = "p-adic valuations of Stirling numbers of the second kind",
    long_about = "Computes S(n,k) exactly or modulo p^m, certifies on which congruence \
                  classes of n the valuation v_p(S(n,k)) is constant, refines the p-adic \
                  zeros that drive the non-constant classes, and re-runs the identity \
                  checks the design is built on.\n\n\
                  Exit status: 0 = success/pass, 1 = failure or counterexample, 2 = usage \
                  error. Machine output goes to stdout (or --out FILE); logs go to stderr."
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,

    /// Output format (not every verb supports every format)
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Write the primary output to FILE instead of stdout
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,

    /// Working precision in digits of p for tree building and zero
    /// refinement; overrides the PADIC_STIRLING_PRECISION environment
    /// variable [default: chosen per task]
    #[arg(long, global = true, value_name = "DIGITS")]
    precision: Option<u32>,
}

#[derive(Copy, Clone, PartialEq, Eq, Debug, ValueEnum)]
enum Format {
    /// Human-readable summary
    Text,
    /// Canonical JSON (sorted keys, schema_version, no floats)
    Json,
    /// Graphviz DOT (trees only)
    Dot,
    /// Comma-separated (n, valuation) or sweep tables
    Csv,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Text => "text",
            Format::Json => "json",
            Format::Dot => "dot",
            Format::Csv => "csv",
        }
    }
}

#[derive(Subcommand)]
enum Verb {
    /// S(n, k) exactly, or modulo p^m with --mod
    Stirling {
        /// n (any size with --mod; the exact route caps n)
        n: String,
        /// k, the number of blocks
        k: u64,
        /// Compute the residue of S(n, k) modulo P^M instead of the exact value
        #[arg(long = "mod", num_args = 2, value_names = ["P", "M"])]
        modulus: Option<Vec<u64>>,
    },
    /// v_p(S(n, k)); with --to, a table over n..=END
    Valuation {
        /// The prime p
        p: u64,
        /// n (any size for a single value; tables need n in 64 bits)
        n: String,
        /// k, the number of blocks
        k: u64,
        /// Tabulate v_p(S(m, k)) for every m from n to END inclusive
        #[arg(long, value_name = "END")]
        to: Option<u64>,
    },
    /// Build and certify the constant/non-constant class tree for (p, k)
    Tree {
        /// The prime p
        p: u64,
        /// k, the number of blocks
        k: u64,
        /// Levels to expand below the root classes
        #[arg(long)]
        depth: u32,
    },
    /// Refine the p-adic zero(s) on branch n ≡ a0 to a target precision
    Zero {
        /// The prime p
        p: u64,
        /// k, the number of blocks
        k: u64,
        /// Branch: residue of n modulo p−1 (modulo 2 when p = 2)
        #[arg(long)]
        a0: u64,
        /// Digits of p to which each zero is refined
        #[arg(long)]
        prec: u32,
    },
    /// Re-run a named identity or structure check
    Verify {
        #[command(subcommand)]
        claim: Claim,
    },
    /// Measure affine-law slopes over a (p, k) grid (observational)
    Sweep {
        /// Inclusive prime range LO HI; non-primes in the range are skipped
        #[arg(long = "p-range", num_args = 2, value_names = ["LO", "HI"], required = true)]
        p_range: Vec<u64>,
        /// Inclusive k range LO HI
        #[arg(long = "k-range", num_args = 2, value_names = ["LO", "HI"], required = true)]
        k_range: Vec<u64>,
        /// Levels to keep past stabilization before reading slopes
        #[arg(long, default_value_t = 6)]
        levels: u32,
    },
}

#[derive(Subcommand)]
enum Claim {
    /// v_2(k!·S(2^n, k)) = k − 1 whenever 2^n ≥ k
    Lengwan {
        /// Largest k
        #[arg(long, default_value_t = 30)]
        kmax: u64,
        /// Largest exponent n
        #[arg(long, default_value_t = 20)]
        nmax: u32,
    },
    /// T_p(n,k) + tail = k!·S(n,k) with v_p(tail) ≥ n, exhaustively
    Decompose {
        /// The prime p
        p: u64,
        /// Largest n
        #[arg(long, default_value_t = 40)]
        nmax: u64,
        /// Largest k
        #[arg(long, default_value_t = 12)]
        kmax: u64,
    },
    /// Constancy of v_p(k!·S(a·p^n·(p−1), k)) over the (a, n) grid (odd p)
    Gesleng {
        /// The odd prime p
        p: u64,
        /// k, the number of blocks
        k: u64,
        /// Smallest multiplier a
        #[arg(long, default_value_t = 1)]
        amin: u64,
        /// Largest multiplier a
        #[arg(long, default_value_t = 5)]
        amax: u64,
        /// Smallest exponent n
        #[arg(long, default_value_t = 2)]
        nmin: u32,
        /// Largest exponent n
        #[arg(long, default_value_t = 6)]
        nmax: u32,
    },
    /// Closed-form valuation v_p(S(a + u·p^s·(p−1), k)) for a < k < p
    FinalTheorem {
        /// The prime p
        p: u64,
        /// k with k < p
        k: u64,
        /// Residue a with a < k
        a: u64,
        /// Largest exponent s
        #[arg(long, default_value_t = 8)]
        smax: u32,
    },
    /// Settled split shape: p−1 constant children sharing the parent's floor
    /// plus one active child, with bounded valuation gaps
    Structure {
        /// The prime p
        p: u64,
        /// k (any k for p = 2; k < p for odd p)
        k: u64,
        /// Levels to expand
        #[arg(long, default_value_t = 10)]
        depth: u32,
    },
    /// Double zero of c·a^x − 2c·(ab)^x + c·b^x: multiplicity 2 by the
    /// derivative method and by the descent slope, agreeing
    Remark {
        /// The prime p
        p: u64,
        /// First base residue, ≡ 1 mod p (mod 4 when p = 2)
        a: u64,
        /// Second base residue, ≡ 1 mod p (mod 4 when p = 2)
        b: u64,
        /// Digits of the zero to certify
        #[arg(long, default_value_t = 10)]
        depth: u32,
    },
    /// Tree classification vs exhaustive valuations for all n ≤ p^EXP
    BruteForce {
        /// The prime p
        p: u64,
        /// k, the number of blocks
        k: u64,
        /// Levels to keep past stabilization
        #[arg(long, default_value_t = 6)]
        levels: u32,
        /// Exhaustive range bound p^EXP
        #[arg(long, value_name = "EXP", default_value_t = 7)]
        nexp: u32,
    },
}

/// Failures the front end distinguishes only by exit code.
enum CliError {
    /// Malformed request: wrong arguments, unsupported format, bad
    /// environment configuration. Exit 2.
    Usage(String),
    /// The library refused or failed the computation. Exit 2 for domain
    /// violations (they are argument problems), 1 otherwise.
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        CliError::Lib(err)
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn unsupported(verb: &str, format: Format) -> CliError {
    usage(format!(
        "the {verb} verb does not support --format {}",
        format.name()
    ))
}

/// What a verb produced: the rendered output plus the pass/fail verdict
/// that decides between exit 0 and exit 1.
struct Outcome {
    output: String,
    pass: bool,
}

impl Outcome {
    fn ok(output: String) -> Self {
        Outcome { output, pass: true }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            if let Err(err) = emit(cli.out.as_deref(), &outcome.output) {
                eprintln!("error: cannot write output: {err}");
                return ExitCode::from(1);
            }
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Lib(err)) => {
            eprintln!("error: {err}");
            match err {
                Error::NotPrime(_) | Error::Domain(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let precision = resolve_precision(cli.precision)?;
    match &cli.verb {
        Verb::Stirling { n, k, modulus } => do_stirling(n, *k, modulus.as_deref(), cli.format),
        Verb::Valuation { p, n, k, to } => do_valuation(*p, n, *k, *to, cli.format),
        Verb::Tree { p, k, depth } => do_tree(*p, *k, *depth, precision, cli.format),
        Verb::Zero { p, k, a0, prec } => do_zero(*p, *k, *a0, *prec, precision, cli.format),
        Verb::Verify { claim } => do_verify(claim, cli.format),
        Verb::Sweep {
            p_range,
            k_range,
            levels,
        } => do_sweep(p_range, k_range, *levels, cli.format),
    }
}

/// Flag beats environment; absent means "let the library choose".
fn resolve_precision(flag: Option<u32>) -> Result<Option<u32>, CliError> {
    if let Some(w) = flag {
        if w == 0 {
            return Err(usage("--precision must be at least 1"));
        }
        return Ok(Some(w));
    }
    match std::env::var(ENV_PRECISION) {
        Ok(raw) => match raw.trim().parse::<u32>() {
            Ok(w) if w >= 1 => Ok(Some(w)),
            _ => Err(usage(format!(
                "{ENV_PRECISION} must be a positive integer (got {raw:?})"
            ))),
        },
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(err) => Err(usage(format!("{ENV_PRECISION}: {err}"))),
    }
}

fn emit(out: Option<&Path>, payload: &str) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, payload),
        None => std::io::stdout().write_all(payload.as_bytes()),
    }
}

// ---------------------------------------------------------------------------
// Verb handlers
// ---------------------------------------------------------------------------

fn do_stirling(
    n: &str,
    k: u64,
    modulus: Option<&[u64]>,
    format: Format,
) -> Result<Outcome, CliError> {
    let n_big = parse_biguint(n, "n")?;
    let (value, mod_json) = match modulus {
        Some(pm) => {
            let p = pm[0];
            let m = u32::try_from(pm[1]).map_err(|_| usage("--mod exponent M is too large"))?;
            let residue = stirling_mod(&n_big, k, p, m)?;
            (residue, Some(json!({ "m": m, "p": p })))
        }
        None => {
            let n_small = n_big.to_u64().ok_or_else(|| {
                usage("the exact route needs n to fit in 64 bits; use --mod P M for huge n")
            })?;
            (stirling_exact(n_small, k)?, None)
        }
    };
    match format {
        Format::Text => Ok(Outcome::ok(format!("{value}\n"))),
        Format::Json => {
            let mut payload = json!({
                "schema_version": SCHEMA_VERSION,
                "verb": "stirling",
                "invocation": invocation(),
                "n": n_big.to_string(),
                "k": k,
                "value": value.to_string(),
            });
            if let Some(m) = mod_json {
                payload["mod"] = m;
            }
            Ok(Outcome::ok(render_json(&payload)))
        }
        other => Err(unsupported("stirling", other)),
    }
}

fn do_valuation(
    p: u64,
    n: &str,
    k: u64,
    to: Option<u64>,
    format: Format,
) -> Result<Outcome, CliError> {
    let n_big = parse_biguint(n, "n")?;
    let Some(end) = to else {
        let v = vp_stirling(p, &n_big, k)?;
        return match format {
            Format::Text => Ok(Outcome::ok(format!("{v}\n"))),
            Format::Json => Ok(Outcome::ok(render_json(&json!({
                "schema_version": SCHEMA_VERSION,
                "verb": "valuation",
                "invocation": invocation(),
                "p": p,
                "n": n_big.to_string(),
                "k": k,
                "v": valuation_json(v),
            })))),
            Format::Csv => Ok(Outcome::ok(format!("n,valuation\n{n_big},{v}\n"))),
            Format::Dot => Err(unsupported("valuation", Format::Dot)),
        };
    };
    let start = n_big
        .to_u64()
        .ok_or_else(|| usage("table mode needs the starting n to fit in 64 bits"))?;
    if end < start {
        return Err(usage(format!("--to {end} is below the starting n = {start}")));
    }
    let mut rows = Vec::with_capacity((end - start + 1) as usize);
    for m in start..=end {
        rows.push((m, vp_stirling(p, &BigUint::from(m), k)?));
    }
    match format {
        Format::Text => {
            let mut s = format!("v_{p}(S(n, {k})) for {start} ≤ n ≤ {end}\n");
            for (m, v) in &rows {
                writeln!(s, "{m} {v}").expect("string write");
            }
            Ok(Outcome::ok(s))
        }
        Format::Csv => {
            let mut s = String::from("n,valuation\n");
            for (m, v) in &rows {
                writeln!(s, "{m},{v}").expect("string write");
            }
            Ok(Outcome::ok(s))
        }
        Format::Json => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|(m, v)| json!({ "n": m, "v": valuation_json(*v) }))
                .collect();
            Ok(Outcome::ok(render_json(&json!({
                "schema_version": SCHEMA_VERSION,
                "verb": "valuation",
                "invocation": invocation(),
                "p": p,
                "k": k,
                "rows": rows,
            }))))
        }
        Format::Dot => Err(unsupported("valuation", Format::Dot)),
    }
}

fn do_tree(
    p: u64,
    k: u64,
    depth: u32,
    precision: Option<u32>,
    format: Format,
) -> Result<Outcome, CliError> {
    let report = build_tree(p, k, depth, precision)?;
    match format {
        Format::Text => Ok(Outcome::ok(tree_text(&report))),
        Format::Json => Ok(Outcome::ok(render_json(&tree_json(&report)))),
        Format::Dot => Ok(Outcome::ok(tree_dot(&report))),
        Format::Csv => Err(usage(
            "the tree verb does not support --format csv; use `valuation --to` for (n, v) tables",
        )),
    }
}

fn do_zero(
    p: u64,
    k: u64,
    a0: u64,
    prec: u32,
    precision: Option<u32>,
    format: Format,
) -> Result<Outcome, CliError> {
    require_prime(p)?;
    let step = if p == 2 { 2 } else { p - 1 };
    if a0 >= step {
        return Err(usage(format!(
            "a0 must lie in 0..{step} (the branch is the residue of n modulo {step})"
        )));
    }
    if prec == 0 {
        return Err(usage("--prec must be at least 1"));
    }
    let tree = build_past_stabilization(p, k, 6, precision)?;
    let chains: Vec<&ChainReport> = tree.chains.iter().filter(|c| c.a0 == a0).collect();
    let mut zeros = Vec::new();
    for chain in &chains {
        let f = StirlingExpSum::new(p, k, a0, 48)?;
        let x0 = refine_zero(&f, chain, prec)?;
        zeros.push((*chain, x0));
    }
    let found = !zeros.is_empty();
    match format {
        Format::Text => {
            let mut s = format!("zero p={p} k={k} branch a0={a0}\n");
            if !found {
                writeln!(
                    s,
                    "no active chain on this branch: every class is constant-certified \
                     (the tree has mu={} active chains in total)",
                    tree.mu
                )
                .expect("string write");
            }
            for (chain, x0) in &zeros {
                writeln!(
                    s,
                    "x0 digits (base {p}, most significant last): {:?}",
                    padic_digits(x0.prime(), x0.residue(), x0.precision())
                )
                .expect("string write");
                writeln!(s, "  residue: {} mod {p}^{}", x0.residue(), x0.precision())
                    .expect("string write");
                writeln!(
                    s,
                    "  slope l = {}, multiplicity = {}",
                    display_opt(chain.l),
                    display_opt(chain.l_multiplicity)
                )
                .expect("string write");
            }
            Ok(Outcome {
                output: s,
                pass: found,
            })
        }
        Format::Json => {
            let zeros: Vec<Value> = zeros
                .iter()
                .map(|(chain, x0)| {
                    json!({
                        "digits": padic_digits(x0.prime(), x0.residue(), x0.precision()),
                        "precision": x0.precision(),
                        "residue": x0.residue().to_string(),
                        "l": option_json(chain.l),
                        "l_multiplicity": option_json(chain.l_multiplicity),
                    })
                })
                .collect();
            Ok(Outcome {
                output: render_json(&json!({
                    "schema_version": SCHEMA_VERSION,
                    "verb": "zero",
                    "invocation": invocation(),
                    "p": p,
                    "k": k,
                    "a0": a0,
                    "mu": tree.mu,
                    "zeros": zeros,
                })),
                pass: found,
            })
        }
        other => Err(unsupported("zero", other)),
    }
}

fn do_verify(claim: &Claim, format: Format) -> Result<Outcome, CliError> {
    let (name, report) = run_claim(claim)?;
    match format {
        Format::Text => Ok(Outcome {
            output: verify_text(&report),
            pass: report.pass,
        }),
        Format::Json => {
            let mut payload =
                serde_json::to_value(&report).expect("verifier reports are serializable");
            let object = payload
                .as_object_mut()
                .expect("verifier reports serialize to objects");
            object.insert("schema_version".into(), json!(SCHEMA_VERSION));
            object.insert("verb".into(), json!("verify"));
            object.insert("claim_id".into(), json!(name));
            object.insert("invocation".into(), invocation());
            Ok(Outcome {
                output: render_json(&payload),
                pass: report.pass,
            })
        }
        other => Err(unsupported("verify", other)),
    }
}

fn run_claim(claim: &Claim) -> Result<(&'static str, VerifierReport), CliError> {
    match claim {
        Claim::Lengwan { kmax, nmax } => Ok(("lengwan", verify_lengyel_wannemacker(*kmax, *nmax)?)),
        Claim::Decompose { p, nmax, kmax } => {
            Ok(("decompose", verify_decomposition(*p, *nmax, *kmax)?))
        }
        Claim::Gesleng {
            p,
            k,
            amin,
            amax,
            nmin,
            nmax,
        } => {
            if amin > amax || nmin > nmax {
                return Err(usage("gesleng needs amin ≤ amax and nmin ≤ nmax"));
            }
            Ok((
                "gesleng",
                verify_gessel_lengyel(*p, *k, *amin..=*amax, *nmin..=*nmax)?,
            ))
        }
        Claim::FinalTheorem { p, k, a, smax } => Ok((
            "final-theorem",
            verify_final_theorem(*p, *k, *a, *smax)?,
        )),
        Claim::Structure { p, k, depth } => Ok((
            "structure",
            verify_conjecture_structure(*p, *k, *depth)?,
        )),
        Claim::Remark { p, a, b, depth } => Ok((
            "remark",
            reproduce_multiplicity_remark(*p, *a, *b, *depth)?,
        )),
        Claim::BruteForce {
            p,
            k,
            levels,
            nexp,
        } => Ok((
            "brute-force",
            verify_tree_brute_force(*p, *k, *levels, *nexp)?,
        )),
    }
}

fn do_sweep(
    p_range: &[u64],
    k_range: &[u64],
    levels: u32,
    format: Format,
) -> Result<Outcome, CliError> {
    let (p_lo, p_hi) = (p_range[0], p_range[1]);
    let (k_lo, k_hi) = (k_range[0], k_range[1]);
    if p_lo > p_hi {
        return Err(usage(format!("--p-range {p_lo} {p_hi} is empty")));
    }
    if k_lo > k_hi || k_lo == 0 {
        return Err(usage(format!(
            "--k-range {k_lo} {k_hi} must be a nonempty range of k ≥ 1"
        )));
    }
    if levels == 0 {
        return Err(usage("--levels must be at least 1"));
    }
    let primes: Vec<u64> = (p_lo..=p_hi).filter(|&q| require_prime(q).is_ok()).collect();
    if primes.is_empty() {
        return Err(usage(format!("no primes in --p-range {p_lo} {p_hi}")));
    }
    let cells: Vec<(u64, u64)> = primes
        .iter()
        .flat_map(|&p| (k_lo..=k_hi).map(move |k| (p, k)))
        .collect();
    if cells.len() > SWEEP_CELL_CAP {
        return Err(usage(format!(
            "the grid has {} cells; narrow the ranges to at most {SWEEP_CELL_CAP}",
            cells.len()
        )));
    }
    eprintln!(
        "sweeping {} cells ({} primes × {} values of k), {levels} levels past stabilization",
        cells.len(),
        primes.len(),
        k_hi - k_lo + 1
    );
    let results = sweep_slopes(&cells, levels);
    match format {
        Format::Text => {
            let mut s = String::new();
            for cell in &results {
                match &cell.error {
                    Some(err) => writeln!(s, "p={} k={} error: {err}", cell.p, cell.k),
                    None => writeln!(
                        s,
                        "p={} k={} mu={} slopes={:?} max_slope={}",
                        cell.p,
                        cell.k,
                        display_opt(cell.mu),
                        cell.slopes,
                        display_opt(cell.max_slope)
                    ),
                }
                .expect("string write");
            }
            Ok(Outcome::ok(s))
        }
        Format::Json => Ok(Outcome::ok(render_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "verb": "sweep",
            "invocation": invocation(),
            "levels": levels,
            "cells": serde_json::to_value(&results).expect("sweep cells are serializable"),
        })))),
        Format::Csv => {
            let mut s = String::from("p,k,mu,max_slope,slopes,error\n");
            for cell in &results {
                let slopes = cell
                    .slopes
                    .iter()
                    .map(|l| l.to_string())
                    .collect::<Vec<_>>()
                    .join(";");
                writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    cell.p,
                    cell.k,
                    display_opt(cell.mu),
                    display_opt(cell.max_slope),
                    slopes,
                    csv_escape(cell.error.as_deref().unwrap_or(""))
                )
                .expect("string write");
            }
            Ok(Outcome::ok(s))
        }
        Format::Dot => Err(unsupported("sweep", Format::Dot)),
    }
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

/// Canonical JSON: `serde_json` maps are ordered, so identical values always
/// serialize to identical bytes; a trailing newline terminates the stream.
fn render_json(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("canonical JSON");
    s.push('\n');
    s
}

/// The argument vector, for the reproducibility record in JSON payloads.
fn invocation() -> Value {
    Value::from(std::env::args().skip(1).collect::<Vec<String>>())
}

fn parse_biguint(s: &str, what: &str) -> Result<BigUint, CliError> {
    s.parse::<BigUint>()
        .map_err(|_| usage(format!("{what} must be a nonnegative decimal integer, got {s:?}")))
}

fn valuation_json(v: Valuation) -> Value {
    match v {
        Valuation::Finite(x) => Value::from(x),
        Valuation::Infinite => Value::from("inf"),
    }
}

fn option_json<T: Into<Value>>(opt: Option<T>) -> Value {
    opt.map(Into::into).unwrap_or(Value::Null)
}

fn display_opt<T: std::fmt::Display>(opt: Option<T>) -> String {
    match opt {
        Some(v) => v.to_string(),
        None => "none".into(),
    }
}

/// Digits of `residue` base `p`, most significant digit last: entry `i` is
/// the coefficient of `p^i`, and the list length is the precision.
fn padic_digits(p: u64, residue: &BigUint, precision: u32) -> Vec<u64> {
    let base = BigUint::from(p);
    let mut rest = residue.clone();
    (0..precision)
        .map(|_| {
            let digit = (&rest % &base).to_u64().expect("digit below p fits in u64");
            rest /= &base;
            digit
        })
        .collect()
}

fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn tree_text(t: &TreeReport) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "tree p={} k={} depth={} precision={} digits",
        t.p, t.k, t.depth, t.precision
    )
    .expect("string write");
    writeln!(
        s,
        "nodes={} mu={} stabilization_level={} m0_observed={}",
        t.node_count(),
        t.mu,
        display_opt(t.stabilization_level),
        display_opt(t.m0_observed)
    )
    .expect("string write");
    for chain in &t.chains {
        writeln!(
            s,
            "chain a0={}: alpha={} l={} l_multiplicity={} methods_agree={}",
            chain.a0,
            display_opt(chain.alpha),
            display_opt(chain.l),
            display_opt(chain.l_multiplicity),
            chain.methods_agree
        )
        .expect("string write");
        writeln!(
            s,
            "  x0 digits (base {}, most significant last): {:?}",
            t.p,
            padic_digits(chain.x0.prime(), chain.x0.residue(), chain.x0.precision())
        )
        .expect("string write");
        for level in &chain.levels {
            writeln!(
                s,
                "  m={:<3} n_modulus={:<24} least_valuation={}",
                level.m, level.n_modulus, level.least_valuation
            )
            .expect("string write");
        }
    }
    for note in &t.notes {
        writeln!(s, "note: {note}").expect("string write");
    }
    s
}

fn tree_json(t: &TreeReport) -> Value {
    let chains: Vec<Value> = t.chains.iter().map(chain_json).collect();
    json!({
        "schema_version": SCHEMA_VERSION,
        "verb": "tree",
        "invocation": invocation(),
        "p": t.p,
        "k": t.k,
        "depth": t.depth,
        "precision": t.precision,
        "mu": t.mu,
        "stabilization_level": option_json(t.stabilization_level),
        "m0_observed": option_json(t.m0_observed),
        "chains": chains,
    })
}

fn chain_json(chain: &ChainReport) -> Value {
    let levels: Vec<Value> = chain
        .levels
        .iter()
        .map(|level| {
            json!({
                "m": level.m,
                "n_modulus": level.n_modulus.to_string(),
                "least_valuation": level.least_valuation,
                "status": "active",
            })
        })
        .collect();
    json!({
        "a0": chain.a0,
        "alpha": option_json(chain.alpha),
        "l": option_json(chain.l),
        "x0_digits": padic_digits(chain.x0.prime(), chain.x0.residue(), chain.x0.precision()),
        "levels": levels,
    })
}

/// Graphviz DOT: one node per class, labeled `[a] mod d : t` where
/// `n ≡ a (mod d)` is the class and `t` its certified valuation (for
/// constant classes, drawn as boxes) or center reading (for active classes,
/// drawn as ellipses).
fn tree_dot(t: &TreeReport) -> String {
    let mut s = String::new();
    s.push_str("digraph class_tree {\n");
    writeln!(
        s,
        "  graph [ordering=out, fontname=\"monospace\"]; // v_{}(S(n, {})), depth {}",
        t.p, t.k, t.depth
    )
    .expect("string write");
    s.push_str("  node [fontname=\"monospace\"];\n");
    let mut next_id = 0usize;
    for root in &t.roots {
        dot_node(t.p, root, None, &mut next_id, &mut s);
    }
    s.push_str("}\n");
    s
}

fn dot_node(p: u64, node: &ClassNode, parent: Option<usize>, next_id: &mut usize, out: &mut String) {
    let id = *next_id;
    *next_id += 1;
    let (a, d) = node.n_class(p);
    let t = match node.status {
        NodeStatus::ConstantCertified => match node.t {
            ValBound::Exact(v) => v.to_string(),
            ValBound::AtLeast(v) => format!(">={v}"),
        },
        _ => format!("{}", node.t),
    };
    let shape = match node.status {
        NodeStatus::ConstantCertified => "box",
        NodeStatus::Active | NodeStatus::DepthExhausted => "ellipse",
    };
    writeln!(out, "  n{id} [label=\"[{a}] mod {d} : {t}\", shape={shape}];")
        .expect("string write");
    if let Some(pid) = parent {
        writeln!(out, "  n{pid} -> n{id};").expect("string write");
    }
    for child in &node.children {
        dot_node(p, child, Some(id), next_id, out);
    }
}

fn verify_text(report: &VerifierReport) -> String {
    let mut s = String::new();
    writeln!(s, "claim: {}", report.claim).expect("string write");
    writeln!(s, "params: {}", report.params).expect("string write");
    writeln!(s, "result: {}", if report.pass { "PASS" } else { "FAIL" }).expect("string write");
    writeln!(s, "checked: {}", report.checked).expect("string write");
    writeln!(s, "runtime_ms: {}", report.runtime_ms).expect("string write");
    if let Some(counterexample) = &report.counterexample {
        writeln!(s, "counterexample: {counterexample}").expect("string write");
    }
    if !report.derived.is_empty() {
        s.push_str("derived:\n");
        for (key, value) in &report.derived {
            writeln!(s, "  {key}: {value}").expect("string write");
        }
    }
    if !report.notes.is_empty() {
        s.push_str("notes:\n");
        for note in &report.notes {
            writeln!(s, "  - {note}").expect("string write");
        }
    }
    s
}
