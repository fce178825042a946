//! Exact and modular computation of Stirling numbers of the second kind
//! `S(n,k)`, of `k!·S(n,k)`, of the partial sums `T_p(n,k)` over indices
//! coprime to p, and of the period structure of `S(n,k) mod p^m`.
//!
//! Two computation paths are kept deliberately independent so each can serve
//! as an oracle for the other:
//!
//! * the exact path uses the triangular recurrence
//!   `S(n+1, k+1) = S(n, k) + (k+1)·S(n, k+1)` with row reuse;
//! * the modular path evaluates the closed form
//!   `k!·S(n,k) = Σ_{j=1}^{k} (−1)^{k−j}·C(k,j)·j^n` by modular
//!   exponentiation at an inflated modulus `p^(m + v_p(k!))` and divides by
//!   `k!` exactly afterwards — `1/k!` is not a p-adic unit when `p ≤ k`, so
//!   dividing first and reducing later would be unsound.
//!
//! Huge exponents (tree probes use `n ~ p^40`) are reduced modulo the unit
//! group exponent `λ(p^w)` before the modular exponentiation.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::padic::{
    pow_p, require_prime, vp_bigint_unchecked, vp_factorial, ValBound, Valuation,
};
use crate::verify::VerifierReport;

/// Size cap for the exact recurrence path (`n` at most this).
pub const EXACT_CAP_N: u64 = 4096;

// ---------------------------------------------------------------------------
// Small exact combinatorics
// ---------------------------------------------------------------------------

/// `k!` as a big integer.
pub fn factorial(k: u64) -> BigUint {
    let mut acc = BigUint::one();
    for i in 2..=k {
        acc *= i;
    }
    acc
}

/// The full binomial row `C(k, 0), …, C(k, k)`.
pub fn binomial_row(k: u64) -> Vec<BigUint> {
    let mut row = Vec::with_capacity(k as usize + 1);
    let mut c = BigUint::one();
    row.push(c.clone());
    for j in 0..k {
        // C(k, j+1) = C(k, j) · (k − j) / (j + 1), exactly divisible
        c = c * (k - j) / (j + 1);
        row.push(c.clone());
    }
    row
}

/// Sign `(−1)^{k−j}` as a boolean: `true` means negative.
fn term_is_negative(k: u64, j: u64) -> bool {
    (k - j) % 2 == 1
}

// ---------------------------------------------------------------------------
// Exact Stirling numbers
// ---------------------------------------------------------------------------

/// `S(n,k)` exactly, by the triangular recurrence.
///
/// `S(n,k) = 0` for `k > n`; `S(n,1) = S(n,n) = 1`. Errors with a resource
/// cap beyond [`EXACT_CAP_N`]; the modular path has no such limit.
pub fn stirling_exact(n: u64, k: u64) -> Result<BigUint> {
    if n < 1 || k < 1 {
        return Err(Error::Domain(format!(
            "stirling_exact requires n, k ≥ 1 (got n={n}, k={k})"
        )));
    }
    if n > EXACT_CAP_N {
        return Err(Error::Resource(format!(
            "stirling_exact capped at n ≤ {EXACT_CAP_N} (got n={n}); use the modular path"
        )));
    }
    if k > n {
        return Ok(BigUint::zero());
    }
    // row[j] holds S(i, j) for the current i; only columns ≤ k matter.
    let kk = k as usize;
    let mut row: Vec<BigUint> = vec![BigUint::zero(); kk + 1];
    row[1] = BigUint::one(); // S(1, 1) = 1
    for _i in 1..n {
        // S(i+1, j) = S(i, j−1) + j·S(i, j); descend so row[j−1] is still old.
        for j in (1..=kk).rev() {
            let mut v = std::mem::take(&mut row[j]);
            v *= j as u64;
            v += &row[j - 1];
            row[j] = v;
        }
    }
    Ok(row.swap_remove(kk))
}

/// `S(n,k)` by the closed form `(1/k!)·Σ (−1)^{k−j}·C(k,j)·j^n`, exactly.
///
/// Independent of [`stirling_exact`]; used as a cross-check oracle.
pub fn stirling_closed_form(n: u64, k: u64) -> Result<BigUint> {
    if n < 1 || k < 1 {
        return Err(Error::Domain(format!(
            "stirling_closed_form requires n, k ≥ 1 (got n={n}, k={k})"
        )));
    }
    if n > EXACT_CAP_N {
        return Err(Error::Resource(format!(
            "stirling_closed_form capped at n ≤ {EXACT_CAP_N} (got n={n})"
        )));
    }
    let binoms = binomial_row(k);
    let mut sum = BigInt::zero();
    for j in 1..=k {
        let term = BigInt::from(binoms[j as usize].clone() * BigUint::from(j).pow(n as u32));
        if term_is_negative(k, j) {
            sum -= term;
        } else {
            sum += term;
        }
    }
    let kfact = BigInt::from(factorial(k));
    let (q, r) = sum.div_rem(&kfact);
    if !r.is_zero() || q.is_negative() {
        return Err(Error::Inconsistent(format!(
            "closed form for S({n},{k}) did not divide by k! to a non-negative integer"
        )));
    }
    Ok(q.to_biguint().expect("checked non-negative"))
}

/// Number of surjections from an `n`-set onto a `k`-set by brute-force
/// enumeration of all `k^n` functions. Equals `k!·S(n,k)`.
///
/// Deliberately naive — it is the independent oracle for small cases.
pub fn surjection_count_brute(n: u64, k: u64) -> Result<u64> {
    if n < 1 || k < 1 || n > 9 || k > n {
        return Err(Error::Domain(format!(
            "surjection brute force needs 1 ≤ k ≤ n ≤ 9 (got n={n}, k={k})"
        )));
    }
    let n = n as usize;
    let k = k as usize;
    let full: u32 = (1u32 << k) - 1;
    let mut count = 0u64;
    let mut digits = vec![0usize; n];
    loop {
        let mut mask = 0u32;
        for &d in &digits {
            mask |= 1 << d;
        }
        if mask == full {
            count += 1;
        }
        // odometer increment in base k
        let mut pos = 0;
        loop {
            if pos == n {
                return Ok(count);
            }
            digits[pos] += 1;
            if digits[pos] < k {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// Modular machinery
// ---------------------------------------------------------------------------

/// Exponent of the unit group `(ℤ/p^w)^×` (the Carmichael function λ):
/// `(p−1)·p^{w−1}` for odd p; `1, 2, 2^{w−2}` for `p = 2`, `w = 1, 2, ≥3`.
pub fn carmichael_lambda_pw(p: u64, w: u32) -> Result<BigUint> {
    require_prime(p)?;
    if w == 0 {
        return Err(Error::Domain("λ(p^0) is not used; w ≥ 1 required".into()));
    }
    if p == 2 {
        return Ok(match w {
            1 => BigUint::one(),
            2 => BigUint::from(2u32),
            _ => pow_p(2, w - 2),
        });
    }
    Ok(BigUint::from(p - 1) * pow_p(p, w - 1))
}

/// Reusable evaluator of `k!·S(n,k)`, `T_p(n,k)` and the Eq.-style tail,
/// all modulo `p^w`, with exponent reduction for huge `n`.
///
/// Precomputes the binomial row, modulus and `λ(p^w)` once; evaluation is
/// then `O(k)` modular exponentiations per point.
#[derive(Debug, Clone)]
pub struct ModEvaluator {
    p: u64,
    k: u64,
    w: u32,
    modulus: BigUint,
    lambda: BigUint,
    binoms: Vec<BigUint>,
}

impl ModEvaluator {
    pub fn new(p: u64, k: u64, w: u32) -> Result<Self> {
        require_prime(p)?;
        if k < 1 || w < 1 {
            return Err(Error::Domain(format!(
                "ModEvaluator requires k ≥ 1 and w ≥ 1 (got k={k}, w={w})"
            )));
        }
        Ok(ModEvaluator {
            p,
            k,
            w,
            modulus: pow_p(p, w),
            lambda: carmichael_lambda_pw(p, w)?,
            binoms: binomial_row(k),
        })
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    /// Working precision `w` (digits of the modulus).
    pub fn precision(&self) -> u32 {
        self.w
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    /// `j^n mod p^w`, reducing the exponent mod `λ(p^w)` when `p ∤ j`.
    ///
    /// For `p | j` the power vanishes mod `p^w` as soon as `n ≥ w`.
    pub fn pow_reduced(&self, j: u64, n: &BigUint) -> BigUint {
        let j_big = BigUint::from(j);
        if j % self.p == 0 {
            if n >= &BigUint::from(self.w) {
                return BigUint::zero();
            }
            return j_big.modpow(n, &self.modulus);
        }
        let e = n % &self.lambda;
        j_big.modpow(&e, &self.modulus)
    }

    fn sum_over(&self, n: &BigUint, keep: impl Fn(u64) -> bool) -> BigUint {
        let mut acc = BigUint::zero();
        for j in 1..=self.k {
            if !keep(j) {
                continue;
            }
            let term = (&self.binoms[j as usize] * self.pow_reduced(j, n)) % &self.modulus;
            if term_is_negative(self.k, j) {
                if acc >= term {
                    acc -= term;
                } else {
                    acc = &self.modulus - term + acc;
                }
            } else {
                acc = (acc + term) % &self.modulus;
            }
        }
        acc
    }

    /// `k!·S(n,k) mod p^w` (the full closed-form sum).
    pub fn kfact_stirling(&self, n: &BigUint) -> BigUint {
        self.sum_over(n, |_| true)
    }

    /// `T_p(n,k) mod p^w` (sum restricted to `p ∤ j`).
    pub fn t_p(&self, n: &BigUint) -> BigUint {
        let p = self.p;
        self.sum_over(n, |j| j % p != 0)
    }

    /// The tail `Σ_{p | j} (−1)^{k−j}·C(k,j)·j^n mod p^w`.
    pub fn tail(&self, n: &BigUint) -> BigUint {
        let p = self.p;
        self.sum_over(n, |j| j % p == 0)
    }
}

/// `S(n,k) mod p^m`, via the closed form at inflated precision.
///
/// Computes `k!·S(n,k) mod p^(m + v_p(k!))`, checks the residue is divisible
/// by `p^{v_p(k!)}` (it must be — failure means the working modulus could
/// not certify the division), divides exactly, and multiplies by the inverse
/// of the unit part of `k!`.
pub fn stirling_mod(n: &BigUint, k: u64, p: u64, m: u32) -> Result<BigUint> {
    require_prime(p)?;
    if n.is_zero() || k < 1 || m < 1 {
        return Err(Error::Domain(format!(
            "stirling_mod requires n, k, m ≥ 1 (got n={n}, k={k}, m={m})"
        )));
    }
    let vkf = vp_factorial(p, k)?;
    let vkf_u32 = u32::try_from(vkf)
        .map_err(|_| Error::Resource(format!("v_p(k!) = {vkf} exceeds supported precision")))?;
    let w = m + vkf_u32;
    let eval = ModEvaluator::new(p, k, w)?;
    let raw = eval.kfact_stirling(n);
    let shift = pow_p(p, vkf_u32);
    let (q, r) = raw.div_rem(&shift);
    if !r.is_zero() {
        return Err(Error::Precision(format!(
            "k!·S({n},{k}) mod {p}^{w} is not divisible by {p}^{vkf}; cannot certify the division"
        )));
    }
    // q ≡ unit(k!)·S(n,k) mod p^m, where unit(k!) = k!/p^{v_p(k!)}.
    let target = pow_p(p, m);
    let unit = (factorial(k) / &shift) % &target;
    let unit_inv = crate::padic::mod_inverse(&unit, &target)
        .expect("unit part of k! is invertible modulo p^m");
    Ok((q % &target) * unit_inv % &target)
}

/// Convenience wrapper of [`stirling_mod`] for machine-sized `n`.
pub fn stirling_mod_u64(n: u64, k: u64, p: u64, m: u32) -> Result<BigUint> {
    stirling_mod(&BigUint::from(n), k, p, m)
}

/// The valuation of `S(n,k)` read from residues, growing the working
/// precision until the result is certified.
///
/// Returns `Valuation::Infinite` exactly when `k > n` (the only zeros).
pub fn vp_stirling(p: u64, n: &BigUint, k: u64) -> Result<Valuation> {
    require_prime(p)?;
    if n < &BigUint::from(k) {
        return Ok(Valuation::Infinite);
    }
    let mut m = 32u32;
    loop {
        let residue = stirling_mod(n, k, p, m)?;
        if !residue.is_zero() {
            match vp_bigint_unchecked(p, &BigInt::from(residue)) {
                Valuation::Finite(v) => return Ok(Valuation::Finite(v)),
                Valuation::Infinite => unreachable!("nonzero residue"),
            }
        }
        m *= 2;
        if m > 4096 {
            return Err(Error::Precision(format!(
                "v_{p}(S({n},{k})) not readable at precision ≤ 4096"
            )));
        }
    }
}

/// Valuations `v_p(S(n,k))` for all `n` in `[n_start, n_end]`, computed
/// incrementally at working modulus `p^w` (one modular multiplication per
/// `j ≤ k` per step). This is the brute-force classification oracle.
///
/// Each entry is an exact valuation, or `AtLeast(w − v_p(k!))` when the
/// inflated residue vanished.
pub fn valuation_table(
    p: u64,
    k: u64,
    n_start: u64,
    n_end: u64,
    w: u32,
) -> Result<Vec<(u64, ValBound)>> {
    require_prime(p)?;
    if k < 1 || n_start < 1 || n_end < n_start {
        return Err(Error::Domain(format!(
            "valuation_table requires 1 ≤ n_start ≤ n_end and k ≥ 1 \
             (got n_start={n_start}, n_end={n_end}, k={k})"
        )));
    }
    let vkf = u32::try_from(vp_factorial(p, k)?)
        .map_err(|_| Error::Resource("v_p(k!) exceeds supported precision".into()))?;
    if w <= vkf {
        return Err(Error::Precision(format!(
            "working precision {w} does not even cover v_p(k!) = {vkf}"
        )));
    }
    let modulus = pow_p(p, w);
    let binoms = binomial_row(k);
    // pows[j] = j^n mod p^w, advanced by one multiplication per step.
    let mut pows: Vec<BigUint> = (0..=k)
        .map(|j| BigUint::from(j).modpow(&BigUint::from(n_start), &modulus))
        .collect();
    let mut out = Vec::with_capacity((n_end - n_start + 1) as usize);
    for n in n_start..=n_end {
        let mut acc = BigUint::zero();
        for j in 1..=k {
            let term = (&binoms[j as usize] * &pows[j as usize]) % &modulus;
            if term_is_negative(k, j) {
                if acc >= term {
                    acc -= term;
                } else {
                    acc = &modulus - term + acc;
                }
            } else {
                acc = (acc + term) % &modulus;
            }
        }
        // acc ≡ k!·S(n,k); subtract v_p(k!) to get the valuation of S.
        let bound = if acc.is_zero() {
            ValBound::AtLeast(w - vkf)
        } else {
            match vp_bigint_unchecked(p, &BigInt::from(acc)) {
                Valuation::Finite(v) => {
                    let v = v as u32;
                    if n >= k && v < vkf {
                        return Err(Error::Inconsistent(format!(
                            "v_p(k!·S({n},{k})) = {v} below v_p(k!) = {vkf}"
                        )));
                    }
                    if n < k {
                        // S(n,k) = 0 exactly; the sum itself must vanish.
                        return Err(Error::Inconsistent(format!(
                            "closed-form sum nonzero for n={n} < k={k}"
                        )));
                    }
                    ValBound::Exact(v - vkf)
                }
                Valuation::Infinite => unreachable!("nonzero residue"),
            }
        };
        out.push((n, bound));
        for (j, pw) in pows.iter_mut().enumerate() {
            *pw = &*pw * j as u64 % &modulus;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Partial sums T_p and the decomposition
// ---------------------------------------------------------------------------

/// `T_p(n,k) = Σ_{j=1, p∤j}^{k} (−1)^{k−j}·C(k,j)·j^n`, exactly.
pub fn t_p_exact(n: u64, k: u64, p: u64) -> Result<BigInt> {
    require_prime(p)?;
    if n < 1 || k < 1 {
        return Err(Error::Domain(format!(
            "t_p_exact requires n, k ≥ 1 (got n={n}, k={k})"
        )));
    }
    if n > EXACT_CAP_N {
        return Err(Error::Resource(format!(
            "t_p_exact capped at n ≤ {EXACT_CAP_N} (got n={n}); use t_p_mod"
        )));
    }
    let binoms = binomial_row(k);
    let mut sum = BigInt::zero();
    for j in 1..=k {
        if j % p == 0 {
            continue;
        }
        let term = BigInt::from(binoms[j as usize].clone() * BigUint::from(j).pow(n as u32));
        if term_is_negative(k, j) {
            sum -= term;
        } else {
            sum += term;
        }
    }
    Ok(sum)
}

/// `T_p(n,k) mod p^m` for arbitrary-size `n`.
pub fn t_p_mod(n: &BigUint, k: u64, p: u64, m: u32) -> Result<BigUint> {
    let eval = ModEvaluator::new(p, k, m)?;
    Ok(eval.t_p(n))
}

/// Outcome of checking the decomposition
/// `k!·S(n,k) = T_p(n,k) + Σ_{p|j} (−1)^{k−j}·C(k,j)·j^n` with tail
/// valuation at least `n`.
#[derive(Debug, Clone)]
pub struct DecomposeReport {
    pub n: u64,
    pub k: u64,
    pub p: u64,
    pub t_p: BigInt,
    pub tail: BigInt,
    pub kfact_stirling: BigInt,
    pub tail_valuation: Valuation,
    /// `T_p + tail == k!·S(n,k)` exactly.
    pub identity_holds: bool,
    /// `v_p(tail) ≥ n`.
    pub tail_bound_holds: bool,
}

impl DecomposeReport {
    pub fn holds(&self) -> bool {
        self.identity_holds && self.tail_bound_holds
    }
}

/// Exact check of the decomposition of `k!·S(n,k)` into `T_p` plus the
/// `p`-divisible tail. A failed assertion here is a bug, so the report
/// carries the evidence rather than hiding it in an error.
pub fn decompose_check(n: u64, k: u64, p: u64) -> Result<DecomposeReport> {
    let t_p = t_p_exact(n, k, p)?;
    let binoms = binomial_row(k);
    let mut tail = BigInt::zero();
    for j in 1..=k {
        if j % p != 0 {
            continue;
        }
        let term = BigInt::from(binoms[j as usize].clone() * BigUint::from(j).pow(n as u32));
        if term_is_negative(k, j) {
            tail -= term;
        } else {
            tail += term;
        }
    }
    let kfact_stirling = BigInt::from(factorial(k) * stirling_exact(n, k)?);
    let tail_valuation = vp_bigint_unchecked(p, &tail);
    let identity_holds = &t_p + &tail == kfact_stirling;
    let tail_bound_holds = tail_valuation >= Valuation::Finite(n as i64);
    Ok(DecomposeReport {
        n,
        k,
        p,
        t_p,
        tail,
        kfact_stirling,
        tail_valuation,
        identity_holds,
        tail_bound_holds,
    })
}

// ---------------------------------------------------------------------------
// Periodicity
// ---------------------------------------------------------------------------

/// Smallest `e ≥ 0` with `p^e ≥ k`.
pub fn ceil_log_p(p: u64, k: u64) -> u32 {
    let mut e = 0u32;
    let mut pw = BigUint::one();
    let k_big = BigUint::from(k);
    while pw < k_big {
        pw *= p;
        e += 1;
    }
    e
}

/// The period `L_{p^m} = (p−1)·p^(⌈log_p k⌉ + m − 2)` of
/// `S(n,k) mod p^m`, for odd `p`.
///
/// The exponent is clamped at 0: for `k = 1, m = 1` the formula's exponent
/// is −1, but any `L` is a period of the constant sequence `S(n,1) = 1`,
/// so the clamped value stays meaningful.
pub fn period_length(p: u64, k: u64, m: u32) -> Result<BigUint> {
    require_prime(p)?;
    if p == 2 {
        return Err(Error::Domain(
            "the period formula is stated for odd p; p = 2 uses plain 2^m class moduli".into(),
        ));
    }
    if k < 1 || m < 1 {
        return Err(Error::Domain(format!(
            "period_length requires k, m ≥ 1 (got k={k}, m={m})"
        )));
    }
    let raw = ceil_log_p(p, k) as i64 + m as i64 - 2;
    let e = raw.max(0) as u32;
    Ok(BigUint::from(p - 1) * pow_p(p, e))
}

/// Checks `S(n + L, k) ≡ S(n, k) mod p^m` over a witness range of `n`.
///
/// The range starts at `n = k + m + v_p(k!)`, past the point where the
/// `p`-divisible tail of the closed form is invisible mod the working
/// modulus (its valuation is ≥ n), which is where the ultimate periodicity
/// has provably set in.
pub fn verify_period(p: u64, k: u64, m: u32, witness_range: u64) -> Result<VerifierReport> {
    let start = std::time::Instant::now();
    let mut report = VerifierReport::new(
        "period",
        format!("p={p} k={k} m={m} witness_range={witness_range}"),
    );
    let l = period_length(p, k, m)?;
    report
        .derived
        .insert("L".into(), l.to_string());
    let vkf = vp_factorial(p, k)?;
    let offset = m as u64 + vkf;
    let mut checked = 0u64;
    let mut pass = true;
    for n in (k + offset)..=(k + offset + witness_range) {
        let n_big = BigUint::from(n);
        let shifted = &n_big + &l;
        let lhs = stirling_mod(&shifted, k, p, m)?;
        let rhs = stirling_mod(&n_big, k, p, m)?;
        checked += 1;
        if lhs != rhs {
            pass = false;
            report.counterexample = Some(format!(
                "S({shifted},{k}) ≡ {lhs} but S({n},{k}) ≡ {rhs} (mod {p}^{m})"
            ));
            break;
        }
    }
    report.pass = pass;
    report.checked = checked;
    report.runtime_ms = start.elapsed().as_millis();
    Ok(report)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
