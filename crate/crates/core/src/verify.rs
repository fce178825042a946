//! One-command reproductions of the quantitative identities and conjectured
//! structures the rest of the crate is built around, each returning a
//! [`VerifierReport`].
//!
//! Every pass/fail decision here reduces to exact integer arithmetic:
//! valuations are read from big-integer residues, never from truncated
//! analytic approximations. Derived constants that have no closed formula
//! (such as the measured `τ_p(k)` offset) are reported as observations, not
//! asserted.

use serde::Serialize;
use std::collections::BTreeMap;
use std::ops::RangeInclusive;
use std::time::Instant;

use num_bigint::{BigInt, BigUint};
use num_rational::Ratio;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analytic::{multiplicity_at_zero, ExpSum, Multiplicity, StirlingExpSum};
use crate::error::{Error, Result};
use crate::padic::{pow_p, require_prime, vp_factorial, Ball, PadicInt, ValBound, Valuation};
use crate::stirling::{
    decompose_check, period_length, stirling_mod, valuation_table, vp_stirling, ModEvaluator,
};
use crate::tree::{
    build_past_stabilization, build_tree, descend_zero, slope_at_zero, valuation_of_residue,
    ClassNode, NodeStatus, TreeReport,
};

/// Pass/fail record of one identity checked over a parameter range.
///
/// When `pass` is false a counterexample is always present, phrased so it
/// can be re-checked by exact arithmetic alone. `derived` carries measured
/// constants; `notes` carries observational results that are deliberately
/// not part of the pass/fail decision.
#[derive(Debug, Clone, Serialize)]
pub struct VerifierReport {
    pub claim: String,
    pub params: String,
    pub pass: bool,
    /// Number of grid points checked.
    pub checked: u64,
    pub counterexample: Option<String>,
    pub derived: BTreeMap<String, String>,
    pub notes: Vec<String>,
    pub runtime_ms: u128,
}

impl VerifierReport {
    pub fn new(claim: impl Into<String>, params: impl Into<String>) -> Self {
        VerifierReport {
            claim: claim.into(),
            params: params.into(),
            pass: false,
            checked: 0,
            counterexample: None,
            derived: BTreeMap::new(),
            notes: Vec::new(),
            runtime_ms: 0,
        }
    }

    /// Records a failure with a re-checkable counterexample, keeping the
    /// first one encountered.
    pub fn fail(&mut self, counterexample: String) {
        self.pass = false;
        if self.counterexample.is_none() {
            self.counterexample = Some(counterexample);
        }
    }
}

fn finite(v: Valuation, what: &str) -> Result<i64> {
    match v {
        Valuation::Finite(x) => Ok(x),
        Valuation::Infinite => Err(Error::Domain(format!("{what} is zero (infinite valuation)"))),
    }
}

/// `v_2(k!·S(2^n, k)) = k − 1` whenever `2^n ≥ k`.
///
/// Sweeps all `1 ≤ k ≤ k_max` and `0 ≤ n ≤ n_max` with `2^n ≥ k`, reading
/// `S(2^n, k)` modulo `2^{k+8}` so the expected valuation is comfortably
/// inside the window.
pub fn verify_lengyel_wannemacker(k_max: u64, n_max: u32) -> Result<VerifierReport> {
    if k_max < 1 || n_max < 1 {
        return Err(Error::Domain("k_max and n_max must be at least 1".into()));
    }
    let start = Instant::now();
    let mut report = VerifierReport::new(
        "v_2(k!·S(2^n, k)) = k − 1 for 2^n ≥ k",
        format!("1 ≤ k ≤ {k_max}, 0 ≤ n ≤ {n_max}"),
    );
    report.pass = true;
    for k in 1..=k_max {
        let vkf = u32::try_from(vp_factorial(2, k)?)
            .map_err(|_| Error::Resource("v_2(k!) out of range".into()))?;
        // S is read modulo 2^m so that k!·S is pinned modulo 2^{k+8}.
        let m = (k as u32 + 8) - vkf;
        for n in 0..=n_max {
            let nn = BigUint::one() << n;
            if nn < BigUint::from(k) {
                continue;
            }
            let residue = stirling_mod(&nn, k, 2, m)?;
            let v = match valuation_of_residue(2, m, &residue) {
                ValBound::Exact(v) => vkf as u64 + v as u64,
                ValBound::AtLeast(b) => {
                    report.fail(format!(
                        "k={k}, n={n}: v_2(S(2^n,k)) ≥ {b} not readable at modulus 2^{m}"
                    ));
                    continue;
                }
            };
            if v != k - 1 {
                report.fail(format!(
                    "k={k}, n={n}: v_2(k!·S(2^{n},{k})) = {v}, expected {}",
                    k - 1
                ));
            }
            report.checked += 1;
        }
    }
    report.runtime_ms = start.elapsed().as_millis();
    Ok(report)
}

/// Exhaustive check of the decomposition `T_p(n,k) + tail = k!·S(n,k)` with
/// `v_p(tail) ≥ n`, over `1 ≤ n ≤ n_max`, `1 ≤ k ≤ k_max`.
///
/// Both sides are computed as exact big integers, so a failure here is a
/// concrete integer counterexample.
pub fn verify_decomposition(p: u64, n_max: u64, k_max: u64) -> Result<VerifierReport> {
    require_prime(p)?;
    if n_max < 1 || k_max < 1 {
        return Err(Error::Domain("n_max and k_max must be at least 1".into()));
    }
    let start = Instant::now();
    let mut report = VerifierReport::new(
        "T_p(n,k) + tail = k!·S(n,k) with v_p(tail) ≥ n",
        format!("p = {p}, 1 ≤ n ≤ {n_max}, 1 ≤ k ≤ {k_max}"),
    );
    report.pass = true;
    for n in 1..=n_max {
        for k in 1..=n.min(k_max) {
            let d = decompose_check(n, k, p)?;
            if !d.identity_holds {
                report.fail(format!(
                    "n={n}, k={k}: T_p + tail = {} ≠ k!·S = {}",
                    &d.t_p + &d.tail,
                    d.kfact_stirling
                ));
            } else if !d.tail_bound_holds {
                report.fail(format!(
                    "n={n}, k={k}: v_p(tail) = {} < n",
                    d.tail_valuation
                ));
            }
            report.checked += 1;
        }
    }
    report.runtime_ms = start.elapsed().as_millis();
    Ok(report)
}

/// Grid constancy of `v_p(k!·S(a·p^n·(p−1), k))` with the measured offset
/// `τ_p(k) = constant − ⌊(k−1)/(p−1)⌋`.
///
/// The identity's stated applicability excludes `k/p` an odd integer; those
/// cases are still run, but only observationally: the grid outcome is
/// recorded in the notes and does not affect the verdict.
pub fn verify_gessel_lengyel(
    p: u64,
    k: u64,
    a_range: RangeInclusive<u64>,
    n_range: RangeInclusive<u32>,
) -> Result<VerifierReport> {
    require_prime(p)?;
    if p == 2 {
        return Err(Error::Domain(
            "the grid-constancy identity is stated for odd primes".into(),
        ));
    }
    if k < 1 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    if a_range.is_empty() || n_range.is_empty() {
        return Err(Error::Domain("empty grid".into()));
    }
    if *a_range.start() < 1 {
        return Err(Error::Domain("a must be at least 1".into()));
    }
    let start = Instant::now();
    let excluded = k % p == 0 && (k / p) % 2 == 1;
    let mut report = VerifierReport::new(
        "v_p(k!·S(a·p^n·(p−1), k)) = ⌊(k−1)/(p−1)⌋ + τ_p(k), constant over the grid",
        format!(
            "p = {p}, k = {k}, a ∈ [{}, {}], n ∈ [{}, {}]",
            a_range.start(),
            a_range.end(),
            n_range.start(),
            n_range.end()
        ),
    );
    let floor_term = (k - 1) / (p - 1);
    let vkf = vp_factorial(p, k)?;
    report
        .derived
        .insert("floor((k-1)/(p-1))".into(), floor_term.to_string());

    let mut vals: Vec<(u64, u32, i64)> = Vec::new();
    let mut skipped = 0u64;
    for a in a_range.clone() {
        for n in n_range.clone() {
            let big_n = BigUint::from(a) * pow_p(p, n) * BigUint::from(p - 1);
            if big_n < BigUint::from(k) {
                skipped += 1;
                continue;
            }
            let v = finite(vp_stirling(p, &big_n, k)?, "S(a·p^n·(p−1), k)")?;
            vals.push((a, n, vkf as i64 + v));
            report.checked += 1;
        }
    }
    if skipped > 0 {
        report
            .notes
            .push(format!("{skipped} grid points skipped (argument below k)"));
    }
    if vals.is_empty() {
        return Err(Error::Domain("grid contains no usable points".into()));
    }

    let first = vals[0].2;
    let constant = vals.iter().all(|&(_, _, v)| v == first);
    let mut verdict = true;
    let mut problem: Option<String> = None;
    if !constant {
        let bad = vals.iter().find(|&&(_, _, v)| v != first).unwrap();
        problem = Some(format!(
            "grid not constant: a={}, n={} gives {}, but a={}, n={} gives {}",
            vals[0].0, vals[0].1, first, bad.0, bad.1, bad.2
        ));
        verdict = false;
    } else {
        let tau = first - floor_term as i64;
        report.derived.insert("constant_valuation".into(), first.to_string());
        report.derived.insert("tau".into(), tau.to_string());
        if tau < 0 {
            problem = Some(format!("measured τ_p(k) = {tau} is negative"));
            verdict = false;
        } else if k % (p - 1) == 0 && tau != 0 {
            problem = Some(format!(
                "k = {k} is a multiple of p−1 = {} but measured τ_p(k) = {tau} ≠ 0",
                p - 1
            ));
            verdict = false;
        }
    }

    if excluded {
        report.pass = true;
        report.notes.push(format!(
            "excluded case (k/p = {} is an odd integer): observational only, verdict not asserted; \
             grid outcome: {}",
            k / p,
            match &problem {
                None => "consistent with the identity".to_string(),
                Some(msg) => msg.clone(),
            }
        ));
        report.derived.insert("excluded_case".into(), "true".into());
    } else {
        report.pass = verdict;
        if let Some(msg) = problem {
            report.fail(msg);
        }
    }
    report.runtime_ms = start.elapsed().as_millis();
    Ok(report)
}

/// The closed-form valuation law for `a < k < p`: with `m0` taken from the
/// classification tree,
/// `v_p(S(a + u·p^s·(p−1), k)) = v_p(S(a + p^{m0−1}·(p−1), k)) + s − m0 + 1`
/// for every unit `u` coprime to `p` and `m0 − 1 ≤ s ≤ s_max`; equivalently,
/// the chain through `n = a` has slope 1.
pub fn verify_final_theorem(p: u64, k: u64, a: u64, s_max: u32) -> Result<VerifierReport> {
    require_prime(p)?;
    if !(a < k && k < p) {
        return Err(Error::Domain(format!(
            "requires a < k < p (got a = {a}, k = {k}, p = {p})"
        )));
    }
    let start = Instant::now();
    let mut report = VerifierReport::new(
        "v_p(S(a + u·p^s·(p−1), k)) = v_p(S(a + p^{m0−1}·(p−1), k)) + s − m0 + 1",
        format!("p = {p}, k = {k}, a = {a}, s ≤ {s_max}"),
    );
    let tree = build_past_stabilization(p, k, 6, None)?;
    let m0 = tree
        .m0_observed
        .ok_or_else(|| Error::NotStabilized("tree did not stabilize".into()))?;
    report.derived.insert("m0_observed".into(), m0.to_string());

    // The chain through n = a: branch a0 = a (a < p−1 here), zero at x = 0
    // since S(a, k) = 0 for a < k.
    let chain = tree
        .chains
        .iter()
        .find(|c| c.a0 == a && c.x0.residue().is_zero())
        .ok_or_else(|| {
            Error::Inconsistent(format!("no active chain through n = {a} (a0 = {a}, x0 = 0)"))
        })?;
    let l = chain.multiplicity()?;
    report.derived.insert("l".into(), l.to_string());
    report.pass = true;
    if l != 1 {
        report.fail(format!("chain through n = {a} has slope {l}, expected 1"));
    }

    // Derivative witness: the branch function has nonzero derivative at the
    // zero, which is what makes the slope 1.
    let f = StirlingExpSum::new(p, k, a, 64)?;
    let d1 = f.sum().derivative(1, &PadicInt::zero(p, 48)?)?;
    match d1.valuation() {
        ValBound::Exact(v) => {
            report
                .derived
                .insert("v_p(f'(0))".into(), v.to_string());
        }
        ValBound::AtLeast(b) => {
            report
                .notes
                .push(format!("f'(0) only bounded below by {b} at this precision"));
        }
    }

    let step = BigUint::from(p - 1);
    let n_ref = BigUint::from(a) + pow_p(p, m0 - 1) * &step;
    let v_ref = finite(vp_stirling(p, &n_ref, k)?, "reference Stirling number")?;
    report.derived.insert("v_ref".into(), v_ref.to_string());
    for u in 1..=4u64 {
        if u % p == 0 {
            continue;
        }
        for s in (m0 - 1)..=s_max.max(m0 - 1) {
            let n = BigUint::from(a) + BigUint::from(u) * pow_p(p, s) * &step;
            let v = finite(vp_stirling(p, &n, k)?, "probed Stirling number")?;
            let expect = v_ref + s as i64 - (m0 as i64 - 1);
            if v != expect {
                report.fail(format!(
                    "u = {u}, s = {s}: v_{p}(S({n}, {k})) = {v}, expected {expect}"
                ));
            }
            report.checked += 1;
        }
    }
    report.runtime_ms = start.elapsed().as_millis();
    Ok(report)
}

/// The conjectured split law: at every settled level, each essentially
/// non-constant class splits into `p − 1` constant classes sharing the
/// parent's least valuation and exactly one non-constant class whose least
/// valuation is strictly larger, with the growth gap below `k − ⌊k/p⌋`.
pub fn verify_conjecture_structure(p: u64, k: u64, depth: u32) -> Result<VerifierReport> {
    require_prime(p)?;
    if p != 2 && k >= p {
        return Err(Error::Domain(format!(
            "the odd-prime split law is stated for k < p (got k = {k}, p = {p})"
        )));
    }
    let start = Instant::now();
    let mut report = VerifierReport::new(
        if p == 2 {
            "each non-constant class mod 2^m splits into one constant and one \
             non-constant class mod 2^{m+1}"
        } else {
            "each non-constant class mod L_{p^m} splits into p−1 constant and one \
             non-constant class mod L_{p^{m+1}}"
        },
        format!("p = {p}, k = {k}, depth = {depth}"),
    );
    let tree = build_tree(p, k, depth, None)?;
    report.derived.insert("mu".into(), tree.mu.to_string());
    let s_star = match tree.stabilization_level {
        Some(s) => s,
        None => {
            report.fail(format!(
                "tree did not settle within depth {depth}; deepen the exploration"
            ));
            report.notes.push("depth exhausted before stabilization".into());
            report.runtime_ms = start.elapsed().as_millis();
            return Ok(report);
        }
    };
    report
        .derived
        .insert("stabilization_level".into(), s_star.to_string());
    if let Some(m0) = tree.m0_observed {
        report.derived.insert("m0_observed".into(), m0.to_string());
    }
    report.pass = true;
    if tree.mu == 0 {
        report
            .notes
            .push("no non-constant classes: every class certified constant".into());
    }

    // Active counts settle to μ.
    for ls in &tree.level_stats {
        if ls.level >= s_star && ls.active_count != tree.mu {
            report.fail(format!(
                "level {}: {} active classes, expected μ = {}",
                ls.level, ls.active_count, tree.mu
            ));
        }
        report.checked += 1;
    }

    // Every settled split has the conjectured shape, with one shared
    // constant valuation.
    for split in &tree.splits {
        if split.parent_level < s_star {
            continue;
        }
        if !split.is_settled_shape(p) {
            report.fail(format!(
                "split at a0 = {}, level {}: {} constant / {} active children, \
                 expected {} / 1",
                split.a0,
                split.parent_level,
                split.constant_count,
                split.active_count,
                p - 1
            ));
        }
        if !split.constants_share_t() {
            report.fail(format!(
                "split at a0 = {}, level {}: constant children disagree on the \
                 valuation: {:?}",
                split.a0, split.parent_level, split.constant_ts
            ));
        }
        report.checked += 1;
    }

    // Least valuations grow strictly along every chain, with the gap inside
    // (0, k − ⌊k/p⌋).
    let gap_cap = (k - k / p) as i64;
    for chain in &tree.chains {
        for w in chain.levels.windows(2) {
            let d = w[1].least_valuation as i64 - w[0].least_valuation as i64;
            if d <= 0 || d >= gap_cap {
                report.fail(format!(
                    "chain a0 = {}: least valuation moves by {d} from level {} to {}, \
                     outside (0, {gap_cap})",
                    chain.a0, w[0].level, w[1].level
                ));
            }
            report.checked += 1;
        }
    }

    // Cross-check the class moduli against the closed-form period lengths
    // (they coincide exactly when 2 ≤ k < p).
    if p != 2 && k >= 2 {
        for (m, _, n_modulus) in tree.translation_table() {
            let period = period_length(p, k, m)?;
            if period != n_modulus {
                report.fail(format!(
                    "level index m = {m}: period length {period} differs from the \
                     tree's class modulus {n_modulus}"
                ));
            }
            report.checked += 1;
        }
    }

    report.runtime_ms = start.elapsed().as_millis();
    Ok(report)
}

/// The double-zero example: `f(x) = (a²)^x + (b²)^x − 2(ab)^x` vanishes to
/// order exactly 2 at `x = 0`, read four independent ways: value and first
/// derivative vanish, the least non-vanishing derivative order is 2, the
/// max-valuation descent homes in on 0, and the valuations of `f(p^s)`
/// advance by 2 per level — the last re-checked by plain modular
/// exponentiation.
pub fn reproduce_multiplicity_remark(p: u64, a: u64, b: u64, depth: u32) -> Result<VerifierReport> {
    require_prime(p)?;
    if a == b {
        return Err(Error::Domain("degenerate case a = b".into()));
    }
    let unit_modulus = if p == 2 { 4 } else { p };
    if a % unit_modulus != 1 || b % unit_modulus != 1 {
        return Err(Error::Domain(format!(
            "a and b must be ≡ 1 (mod {unit_modulus}) (got a = {a}, b = {b})"
        )));
    }
    if depth < 4 {
        return Err(Error::Domain("depth must be at least 4".into()));
    }
    let start = Instant::now();
    let mut report = VerifierReport::new(
        "(a²)^x + (b²)^x − 2(ab)^x has a zero of multiplicity exactly 2 at x = 0",
        format!("p = {p}, a = {a}, b = {b}, depth = {depth}"),
    );
    let prec = (2 * depth + 32).max(64);
    let f = ExpSum::new(
        p,
        vec![
            (
                Ratio::from_integer(BigInt::one()),
                PadicInt::from_u64(p, prec, a * a)?,
            ),
            (
                Ratio::from_integer(BigInt::one()),
                PadicInt::from_u64(p, prec, b * b)?,
            ),
            (
                Ratio::from_integer(BigInt::from(-2)),
                PadicInt::from_u64(p, prec, a * b)?,
            ),
        ],
    )?;
    report.pass = true;

    // f(0) = 1 + 1 − 2 = 0 and f'(0) = 2·log(ab) − 2·log(ab) = 0.
    let zero = PadicInt::zero(p, prec)?;
    if let ValBound::Exact(v) = f.eval(&zero)?.valuation() {
        report.fail(format!("f(0) has finite valuation {v}, expected a zero"));
    }
    if let ValBound::Exact(v) = f.derivative(1, &zero)?.valuation() {
        report.fail(format!("f'(0) has finite valuation {v}, expected a zero"));
    }
    report.checked += 2;

    // Least non-vanishing derivative order.
    match multiplicity_at_zero(&f, &PadicInt::zero(p, depth)?, 3)? {
        Multiplicity::Exact(2) => {}
        other => report.fail(format!(
            "least non-vanishing derivative order reads {other:?}, expected exactly 2"
        )),
    }
    report.checked += 1;

    // Ball descent: the max-valuation child is the zero's ball every time.
    let descended = descend_zero(&f, &Ball::whole(p)?, depth)?;
    if !descended.residue().is_zero() {
        report.fail(format!(
            "descent landed on {} mod p^{depth}, expected 0",
            descended.residue()
        ));
    }
    report.checked += 1;

    // Slope by probing x = p^s, series route.
    let s_lo = 3u32;
    let s_hi = 8u32;
    let l_probe = slope_at_zero(&f, &PadicInt::zero(p, s_hi + 2)?, s_lo, s_hi)?;
    if l_probe != 2 {
        report.fail(format!("probe slope is {l_probe}, expected 2"));
    }
    report.derived.insert("l".into(), l_probe.to_string());
    report.checked += 1;

    // Independent re-check by plain modular exponentiation.
    let w = 2 * s_hi + 24;
    let modulus = pow_p(p, w);
    let mut prev: Option<i64> = None;
    for s in s_lo..=s_hi {
        let x = pow_p(p, s);
        let t1 = BigUint::from(a * a).modpow(&x, &modulus);
        let t2 = BigUint::from(b * b).modpow(&x, &modulus);
        let t3 = (BigUint::from(2u32) * BigUint::from(a * b).modpow(&x, &modulus)) % &modulus;
        let sum = (t1 + t2 + (&modulus - t3)) % &modulus;
        let v = match valuation_of_residue(p, w, &sum) {
            ValBound::Exact(v) => v as i64,
            ValBound::AtLeast(bnd) => {
                report.fail(format!(
                    "modular re-check at s = {s}: residue vanished mod p^{bnd}"
                ));
                continue;
            }
        };
        if let Some(pv) = prev {
            if v - pv != 2 {
                report.fail(format!(
                    "modular re-check: v_p(f(p^{s})) − v_p(f(p^{})) = {} ≠ 2",
                    s - 1,
                    v - pv
                ));
            }
            report.checked += 1;
        }
        prev = Some(v);
    }
    report
        .notes
        .push("with only two distinct bases the multiplicity could never exceed 2".into());
    report.runtime_ms = start.elapsed().as_millis();
    Ok(report)
}

/// Soundness probes for one constant-certified class: random points of the
/// class — including arguments on the order of `p^30`, far beyond anything
/// enumerable — must all show exactly the certified valuation.
pub fn probe_constant_class(
    tree: &TreeReport,
    node: &ClassNode,
    samples: u32,
    seed: u64,
) -> Result<VerifierReport> {
    if node.status != NodeStatus::ConstantCertified {
        return Err(Error::Domain(
            "probing requires a constant-certified class".into(),
        ));
    }
    let t = match node.t {
        ValBound::Exact(t) => t,
        ValBound::AtLeast(_) => {
            return Err(Error::Inconsistent(
                "constant-certified node without exact valuation".into(),
            ))
        }
    };
    let start = Instant::now();
    let p = tree.p;
    let mut report = VerifierReport::new(
        "certified constant class: every probed point has exactly the certified valuation",
        format!(
            "p = {p}, k = {k}, a0 = {a0}, x ≡ {x} (mod p^{m}), t = {t}, {samples} probes",
            k = tree.k,
            a0 = node.a0,
            x = node.x_residue,
            m = node.level
        ),
    );
    let w = t + 16;
    let eval = ModEvaluator::new(p, tree.k, w)?;
    let f = StirlingExpSum::new(p, tree.k, node.a0, 8)?;
    let step = pow_p(p, node.level);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    report.pass = true;
    for i in 0..samples {
        // Random point of the class, with up to 30 extra digits.
        let extra = if i == 0 {
            30
        } else {
            rng.gen_range(0..=30u32)
        };
        let mut r = BigUint::zero();
        for _ in 0..extra {
            r = r * p + BigUint::from(rng.gen_range(0..p));
        }
        let x = &node.x_residue + &step * r;
        let n = f.x_to_n(&x);
        match valuation_of_residue(p, w, &eval.t_p(&n)) {
            ValBound::Exact(v) if v == t => {}
            other => {
                report.fail(format!(
                    "x = {x}: valuation reads {other:?}, certificate says exactly {t}"
                ));
            }
        }
        report.checked += 1;
    }
    report.runtime_ms = start.elapsed().as_millis();
    Ok(report)
}

/// Exhaustive cross-validation of a whole tree against the brute-force
/// valuation table: every `n` up to `p^n_exponent` is classified by the
/// tree, and the table value must match the classification — exactly `t −
/// v_p(k!)` on certified classes once `n` clears the exception threshold,
/// and strictly above the chain's last recorded floor on non-constant
/// leaves.
pub fn verify_tree_brute_force(
    p: u64,
    k: u64,
    levels_past: u32,
    n_exponent: u32,
) -> Result<VerifierReport> {
    require_prime(p)?;
    let start = Instant::now();
    let mut report = VerifierReport::new(
        "tree classification agrees with exhaustive valuation computation",
        format!("p = {p}, k = {k}, n ≤ p^{n_exponent}"),
    );
    let tree = build_past_stabilization(p, k, levels_past, None)?;
    let vkf = vp_factorial(p, k)?;
    let n_end = p
        .checked_pow(n_exponent)
        .ok_or_else(|| Error::Resource("p^n_exponent overflows u64".into()))?;
    let table = valuation_table(p, k, k.max(1), n_end, 96)?;
    report.pass = true;
    let mut exceptions = 0u64;
    for (n, bound) in table {
        let node = tree
            .classify_n(&BigUint::from(n))
            .ok_or_else(|| Error::Inconsistent(format!("n = {n} not classified")))?;
        match node.status {
            NodeStatus::ConstantCertified => {
                let t = match node.t {
                    ValBound::Exact(t) => t as u64,
                    ValBound::AtLeast(_) => unreachable!("certified node carries exact t"),
                };
                if n <= t {
                    // Below the threshold the partial sum does not pin the
                    // Stirling valuation; these are the documented
                    // exceptional points.
                    exceptions += 1;
                    continue;
                }
                match bound {
                    ValBound::Exact(v) if v as u64 == t - vkf => {}
                    other => report.fail(format!(
                        "n = {n}: table says {other:?}, certified class says exactly {}",
                        t - vkf
                    )),
                }
            }
            NodeStatus::Active | NodeStatus::DepthExhausted => {
                let chain = tree
                    .chains
                    .iter()
                    .find(|c| c.a0 == node.a0 && c.x0.residue() == &node.x_residue)
                    .ok_or_else(|| {
                        Error::Inconsistent(format!(
                            "non-constant leaf without a chain record (n = {n})"
                        ))
                    })?;
                let floor = chain
                    .levels
                    .last()
                    .map(|r| r.least_valuation as u64)
                    .unwrap_or(0);
                if n <= floor {
                    exceptions += 1;
                    continue;
                }
                // Any point of the leaf class lies strictly above the last
                // recorded least valuation of the chain.
                match bound {
                    ValBound::Exact(v) if v as u64 + vkf <= floor => {
                        report.fail(format!(
                            "n = {n}: valuation {v} + v_p(k!) = {} does not exceed the \
                             chain floor {floor}",
                            v as u64 + vkf
                        ));
                    }
                    _ => {}
                }
            }
        }
        report.checked += 1;
    }
    report
        .derived
        .insert("exceptions".into(), exceptions.to_string());
    report.derived.insert("mu".into(), tree.mu.to_string());
    if exceptions > 0 {
        report.notes.push(format!(
            "{exceptions} points below their class threshold were exempt, as the \
             translation between the partial sums and S(n, k) requires n > t"
        ));
    }
    report.runtime_ms = start.elapsed().as_millis();
    Ok(report)
}

/// One cell of a slope sweep over `(p, k)`.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeCell {
    pub p: u64,
    pub k: u64,
    pub mu: Option<usize>,
    /// Slopes of the surviving chains, in chain order.
    pub slopes: Vec<u32>,
    pub max_slope: Option<u32>,
    pub error: Option<String>,
}

/// Sweeps classification trees over the given `(p, k)` cells in parallel and
/// logs every chain slope — a search tool for slopes exceeding 1, which are
/// recorded but never asserted against.
pub fn sweep_slopes(cells: &[(u64, u64)], levels_past: u32) -> Vec<SlopeCell> {
    let mut out: Vec<SlopeCell> = cells
        .par_iter()
        .map(|&(p, k)| match build_past_stabilization(p, k, levels_past, None) {
            Ok(tree) => {
                let slopes: Vec<u32> = tree.chains.iter().filter_map(|c| c.l).collect();
                SlopeCell {
                    p,
                    k,
                    mu: Some(tree.mu),
                    max_slope: slopes.iter().max().copied(),
                    slopes,
                    error: None,
                }
            }
            Err(e) => SlopeCell {
                p,
                k,
                mu: None,
                slopes: Vec::new(),
                max_slope: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    out.sort_by_key(|c| (c.p, c.k));
    out
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lengyel_wannemacker_small_sweep_passes() {
        let report = verify_lengyel_wannemacker(8, 6).unwrap();
        assert!(report.pass, "{:?}", report.counterexample);
        // k = 5, n = 3 is in range: v_2(120·1050) = 4.
        assert!(report.checked >= 20);
    }

    #[test]
    fn decomposition_small_sweep_passes() {
        for p in [2, 3, 5] {
            let report = verify_decomposition(p, 12, 6).unwrap();
            assert!(report.pass, "p = {p}: {:?}", report.counterexample);
            assert_eq!(report.checked, 57);
        }
    }

    #[test]
    fn gessel_lengyel_tau_zero_when_k_multiple_of_p_minus_1() {
        let report = verify_gessel_lengyel(3, 2, 1..=5, 2..=6).unwrap();
        assert!(report.pass, "{:?}", report.counterexample);
        assert_eq!(report.derived.get("tau").map(String::as_str), Some("0"));

        let report = verify_gessel_lengyel(5, 4, 1..=4, 2..=5).unwrap();
        assert!(report.pass, "{:?}", report.counterexample);
        assert_eq!(report.derived.get("tau").map(String::as_str), Some("0"));
    }

    #[test]
    fn gessel_lengyel_measures_tau_for_k5_p3() {
        let report = verify_gessel_lengyel(3, 5, 1..=5, 2..=6).unwrap();
        assert!(report.pass, "{:?}", report.counterexample);
        assert!(report.derived.contains_key("tau"));
    }

    #[test]
    fn gessel_lengyel_excluded_case_is_observational() {
        // k/p = 3/3 = 1, odd: must run without asserting.
        let report = verify_gessel_lengyel(3, 3, 1..=3, 2..=4).unwrap();
        assert!(report.pass);
        assert_eq!(
            report.derived.get("excluded_case").map(String::as_str),
            Some("true")
        );
    }

    #[test]
    fn final_theorem_seven_three_two() {
        let report = verify_final_theorem(7, 3, 2, 6).unwrap();
        assert!(report.pass, "{:?}", report.counterexample);
        assert_eq!(report.derived.get("l").map(String::as_str), Some("1"));
        assert!(report.checked >= 10);
    }

    #[test]
    fn final_theorem_rejects_bad_preconditions() {
        assert!(verify_final_theorem(7, 3, 3, 6).is_err()); // a = k
        assert!(verify_final_theorem(7, 7, 2, 6).is_err()); // k = p
    }

    #[test]
    fn conjecture_structure_p2_k5() {
        let report = verify_conjecture_structure(2, 5, 12).unwrap();
        assert!(report.pass, "{:?}", report.counterexample);
        assert_eq!(report.derived.get("mu").map(String::as_str), Some("2"));
    }

    #[test]
    fn conjecture_structure_odd_cells() {
        for (p, k, mu) in [(5u64, 3u64, "3"), (11, 4, "4")] {
            let report = verify_conjecture_structure(p, k, 6).unwrap();
            assert!(report.pass, "({p},{k}): {:?}", report.counterexample);
            assert_eq!(report.derived.get("mu").map(String::as_str), Some(mu));
        }
    }

    #[test]
    fn conjecture_structure_rejects_k_at_least_p() {
        assert!(verify_conjecture_structure(5, 5, 6).is_err());
    }

    #[test]
    fn remark_double_zero_both_cells() {
        for (p, a, b) in [(3u64, 4u64, 7u64), (5, 6, 11)] {
            let report = reproduce_multiplicity_remark(p, a, b, 10).unwrap();
            assert!(report.pass, "({p},{a},{b}): {:?}", report.counterexample);
            assert_eq!(report.derived.get("l").map(String::as_str), Some("2"));
        }
    }

    #[test]
    fn remark_rejects_degenerate_input() {
        assert!(reproduce_multiplicity_remark(3, 4, 4, 10).is_err());
        assert!(reproduce_multiplicity_remark(3, 4, 5, 10).is_err()); // 5 ≢ 1 mod 3
    }

    #[test]
    fn probes_confirm_a_certified_class() {
        let tree = build_past_stabilization(2, 5, 6, None).unwrap();
        // First constant child found under the a0 = 0 root.
        let node = tree.roots[0]
            .children
            .iter()
            .flat_map(|c| c.children.iter().chain(std::iter::once(c)))
            .find(|c| c.status == NodeStatus::ConstantCertified)
            .expect("some constant class");
        let report = probe_constant_class(&tree, node, 40, 0xfeed).unwrap();
        assert!(report.pass, "{:?}", report.counterexample);
        assert_eq!(report.checked, 40);
    }

    #[test]
    fn brute_force_agreement_small_cell() {
        let report = verify_tree_brute_force(3, 4, 5, 7).unwrap();
        assert!(report.pass, "{:?}", report.counterexample);
        assert!(report.checked > 2000);
    }

    #[test]
    fn sweep_reports_unit_slopes_for_known_cells() {
        let cells = [(5u64, 3u64), (7, 3), (7, 5)];
        let out = sweep_slopes(&cells, 6);
        assert_eq!(out.len(), 3);
        for cell in &out {
            assert!(cell.error.is_none(), "{:?}", cell.error);
            assert_eq!(cell.max_slope, Some(1));
        }
    }
}
