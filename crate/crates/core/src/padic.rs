//! Exact p-adic valuations and precision-tracked arithmetic on truncated
//! p-adic integers.
//!
//! Three ideas carry the whole module:
//!
//! * [`Valuation`] is the exponent of p in a nonzero rational, with a genuine
//!   `+∞` for zero, totally ordered with infinity maximal.
//! * [`PadicInt`] is a p-adic integer known modulo `p^N` with its precision
//!   `N` carried explicitly. Arithmetic propagates precision pessimistically
//!   (`min` of the operands) and a residue of 0 never pretends to be an exact
//!   zero: its valuation is reported only as the bound "≥ N"
//!   ([`ValBound::AtLeast`]).
//! * [`Ball`] is a closed ball `{x : v_p(x − c) ≥ M}`, i.e. one congruence
//!   class mod `p^M`; splitting a ball into its `p` children is the descent
//!   step every tree construction uses.
//!
//! Everything here is immutable after construction and safe to share across
//! threads.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Zero};
use std::fmt;

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Primality
// ---------------------------------------------------------------------------

/// Deterministic Miller–Rabin primality test, valid for all `u64`.
///
/// Uses the known-sufficient witness set {2, 3, 5, 7, 11, 13, 17, 19, 23,
/// 29, 31, 37} for the 64-bit range.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for small in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == small {
            return true;
        }
        if n % small == 0 {
            return false;
        }
    }
    // n - 1 = d * 2^s with d odd
    let mut d = n - 1;
    let s = d.trailing_zeros();
    d >>= s;
    let n_big = BigUint::from(n);
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = BigUint::from(a).modpow(&BigUint::from(d), &n_big);
        let one = BigUint::one();
        let minus_one = &n_big - 1u32;
        if x == one || x == minus_one {
            continue 'witness;
        }
        for _ in 1..s {
            x = (&x * &x) % &n_big;
            if x == minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Checks that `p` is prime, as a `Result` for use in constructors.
pub fn require_prime(p: u64) -> Result<()> {
    if is_prime_u64(p) {
        Ok(())
    } else {
        Err(Error::NotPrime(p))
    }
}

// ---------------------------------------------------------------------------
// Valuation
// ---------------------------------------------------------------------------

/// The p-adic valuation of a rational number: an integer, or `+∞` for zero.
///
/// The derived order puts every finite value below `Infinite`, and orders
/// finite values as integers, so `min`/`max` behave as the ultrametric
/// expects. The p-adic norm is `p^(−v)`; it is derived from this type where
/// needed and never stored separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Valuation {
    /// Valuation of a nonzero rational.
    Finite(i64),
    /// Valuation of zero.
    Infinite,
}

impl Valuation {
    /// The finite value, if any.
    pub fn finite(self) -> Option<i64> {
        match self {
            Valuation::Finite(v) => Some(v),
            Valuation::Infinite => None,
        }
    }

    /// True for the valuation of zero.
    pub fn is_infinite(self) -> bool {
        matches!(self, Valuation::Infinite)
    }

    /// Valuation of a product: sum, with `∞` absorbing.
    pub fn plus(self, other: Valuation) -> Valuation {
        match (self, other) {
            (Valuation::Finite(a), Valuation::Finite(b)) => Valuation::Finite(a + b),
            _ => Valuation::Infinite,
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(v) => write!(f, "{v}"),
            Valuation::Infinite => write!(f, "inf"),
        }
    }
}

/// What a truncated residue can tell us about a valuation.
///
/// A nonzero residue mod `p^N` pins the valuation exactly; a zero residue
/// only certifies "at least N". Distinguishing the two is what keeps exact
/// zeros and precision underflow from being confused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValBound {
    /// The valuation is exactly this (observed from a nonzero residue).
    Exact(u32),
    /// All digits up to the precision vanished; the valuation is ≥ this.
    AtLeast(u32),
}

impl ValBound {
    /// A sound lower bound in both cases.
    pub fn lower(self) -> u32 {
        match self {
            ValBound::Exact(v) | ValBound::AtLeast(v) => v,
        }
    }

    /// The exact value, if certified.
    pub fn exact(self) -> Option<u32> {
        match self {
            ValBound::Exact(v) => Some(v),
            ValBound::AtLeast(_) => None,
        }
    }
}

impl fmt::Display for ValBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValBound::Exact(v) => write!(f, "{v}"),
            ValBound::AtLeast(v) => write!(f, ">={v}"),
        }
    }
}

// ---------------------------------------------------------------------------
// Valuations of integers, rationals, factorials
// ---------------------------------------------------------------------------

/// p-adic valuation of a big integer (`∞` for zero).
pub fn vp_bigint(p: u64, x: &BigInt) -> Result<Valuation> {
    require_prime(p)?;
    Ok(vp_bigint_unchecked(p, x))
}

pub(crate) fn vp_bigint_unchecked(p: u64, x: &BigInt) -> Valuation {
    if x.is_zero() {
        return Valuation::Infinite;
    }
    let mut n = x.magnitude().clone();
    if p == 2 {
        return Valuation::Finite(n.trailing_zeros().unwrap_or(0) as i64);
    }
    let p_big = BigUint::from(p);
    let mut v = 0i64;
    loop {
        let (q, r) = n.div_rem(&p_big);
        if !r.is_zero() {
            return Valuation::Finite(v);
        }
        v += 1;
        n = q;
    }
}

/// p-adic valuation of a `u64` (`∞` for zero).
pub fn vp_u64(p: u64, x: u64) -> Result<Valuation> {
    vp_bigint(p, &BigInt::from(x))
}

/// p-adic valuation of a rational number.
///
/// Returns `t` with `x = (a/b)·p^t`, `p ∤ ab`; `+∞` iff `x = 0`.
pub fn vp_rational(p: u64, x: &Ratio<BigInt>) -> Result<Valuation> {
    require_prime(p)?;
    if x.is_zero() {
        return Ok(Valuation::Infinite);
    }
    let vn = vp_bigint_unchecked(p, x.numer());
    let vd = vp_bigint_unchecked(p, x.denom());
    match (vn, vd) {
        (Valuation::Finite(a), Valuation::Finite(b)) => Ok(Valuation::Finite(a - b)),
        _ => unreachable!("nonzero rational has finite numerator and denominator valuations"),
    }
}

/// `v_p(k!)` by Legendre's formula: `Σ_{i≥1} ⌊k/p^i⌋`.
pub fn vp_factorial(p: u64, k: u64) -> Result<u64> {
    require_prime(p)?;
    let mut total = 0u64;
    let mut q = k / p;
    while q > 0 {
        total += q;
        q /= p;
    }
    Ok(total)
}

/// `p^e` as a big unsigned integer.
pub fn pow_p(p: u64, e: u32) -> BigUint {
    BigUint::from(p).pow(e)
}

/// Modular inverse of `a` modulo `m`, if it exists.
pub(crate) fn mod_inverse(a: &BigUint, m: &BigUint) -> Option<BigUint> {
    let a = BigInt::from(a.clone());
    let m_int = BigInt::from(m.clone());
    let ext = a.extended_gcd(&m_int);
    if !ext.gcd.is_one() {
        return None;
    }
    let inv = ext.x.mod_floor(&m_int);
    Some(inv.to_biguint().expect("mod_floor of positive modulus is non-negative"))
}

/// Reduces a signed integer into `[0, m)`.
pub(crate) fn reduce_mod(x: &BigInt, m: &BigUint) -> BigUint {
    let m_int = BigInt::from(m.clone());
    x.mod_floor(&m_int)
        .to_biguint()
        .expect("mod_floor of positive modulus is non-negative")
}

// ---------------------------------------------------------------------------
// PadicInt
// ---------------------------------------------------------------------------

/// Default working precision (p-adic digits) used when callers do not choose
/// their own. All desk-scale targets fit well inside 64 digits.
pub const DEFAULT_PRECISION: u32 = 64;

/// A p-adic integer known modulo `p^N`, with the precision `N` explicit.
///
/// The residue is always reduced into `[0, p^N)`. The valuation is *known*
/// (equal to the residue's valuation) exactly when the residue is nonzero;
/// a zero residue only certifies "valuation ≥ N".
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PadicInt {
    prime: u64,
    precision: u32,
    residue: BigUint,
}

impl PadicInt {
    /// Builds a p-adic approximation of `value` at `precision` digits.
    pub fn new(prime: u64, precision: u32, value: &BigInt) -> Result<Self> {
        require_prime(prime)?;
        if precision == 0 {
            return Err(Error::Domain("precision must be at least 1".into()));
        }
        let modulus = pow_p(prime, precision);
        Ok(PadicInt {
            prime,
            precision,
            residue: reduce_mod(value, &modulus),
        })
    }

    /// Convenience constructor from an unsigned machine integer.
    pub fn from_u64(prime: u64, precision: u32, value: u64) -> Result<Self> {
        Self::new(prime, precision, &BigInt::from(value))
    }

    /// Builds directly from an already-reduced residue (internal fast path).
    pub(crate) fn from_residue(prime: u64, precision: u32, residue: BigUint) -> Self {
        debug_assert!(residue < pow_p(prime, precision));
        PadicInt {
            prime,
            precision,
            residue,
        }
    }

    /// The approximation of 0.
    pub fn zero(prime: u64, precision: u32) -> Result<Self> {
        Self::new(prime, precision, &BigInt::zero())
    }

    /// The approximation of 1.
    pub fn one(prime: u64, precision: u32) -> Result<Self> {
        Self::new(prime, precision, &BigInt::one())
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    /// Residue in `[0, p^N)`.
    pub fn residue(&self) -> &BigUint {
        &self.residue
    }

    /// `p^N`, the modulus this value is known by.
    pub fn modulus(&self) -> BigUint {
        pow_p(self.prime, self.precision)
    }

    /// What the residue certifies about the valuation.
    pub fn valuation(&self) -> ValBound {
        if self.residue.is_zero() {
            return ValBound::AtLeast(self.precision);
        }
        match vp_bigint_unchecked(self.prime, &BigInt::from(self.residue.clone())) {
            Valuation::Finite(v) => ValBound::Exact(v as u32),
            Valuation::Infinite => unreachable!("nonzero residue"),
        }
    }

    /// True when the valuation is certified 0 (a p-adic unit).
    pub fn is_unit(&self) -> bool {
        !(&self.residue % self.prime).is_zero()
    }

    fn check_same_prime(&self, other: &PadicInt) -> Result<()> {
        if self.prime != other.prime {
            return Err(Error::MixedPrimes(self.prime, other.prime));
        }
        Ok(())
    }

    /// Sum, at precision `min(N_a, N_b)`.
    pub fn try_add(&self, other: &PadicInt) -> Result<PadicInt> {
        self.check_same_prime(other)?;
        let precision = self.precision.min(other.precision);
        let modulus = pow_p(self.prime, precision);
        let residue = (&self.residue + &other.residue) % &modulus;
        Ok(PadicInt::from_residue(self.prime, precision, residue))
    }

    /// Difference, at precision `min(N_a, N_b)`.
    pub fn try_sub(&self, other: &PadicInt) -> Result<PadicInt> {
        self.check_same_prime(other)?;
        let precision = self.precision.min(other.precision);
        let modulus = pow_p(self.prime, precision);
        let a = &self.residue % &modulus;
        let b = &other.residue % &modulus;
        let residue = if a >= b { a - b } else { &modulus - b + a };
        Ok(PadicInt::from_residue(self.prime, precision, residue))
    }

    /// Product, at precision `min(N_a, N_b)`.
    pub fn try_mul(&self, other: &PadicInt) -> Result<PadicInt> {
        self.check_same_prime(other)?;
        let precision = self.precision.min(other.precision);
        let modulus = pow_p(self.prime, precision);
        let residue = (&self.residue * &other.residue) % &modulus;
        Ok(PadicInt::from_residue(self.prime, precision, residue))
    }

    /// Additive inverse, at the same precision.
    pub fn neg(&self) -> PadicInt {
        if self.residue.is_zero() {
            return self.clone();
        }
        let modulus = self.modulus();
        PadicInt::from_residue(self.prime, self.precision, &modulus - &self.residue)
    }

    /// Multiplicative inverse; requires a certified unit (`v_p = 0`).
    pub fn invert(&self) -> Result<PadicInt> {
        if !self.is_unit() {
            return Err(Error::NotInvertible {
                prime: self.prime,
                precision: self.precision,
                residue: self.residue.to_string(),
            });
        }
        let modulus = self.modulus();
        let inv = mod_inverse(&self.residue, &modulus)
            .expect("unit residue is invertible modulo a prime power");
        Ok(PadicInt::from_residue(self.prime, self.precision, inv))
    }

    /// `self^e` for a natural exponent, at the same precision.
    ///
    /// This is exact modular exponentiation of the residue; it agrees with
    /// the analytic power function on natural exponents wherever both apply.
    pub fn pow_nat(&self, e: &BigUint) -> PadicInt {
        let modulus = self.modulus();
        let residue = self.residue.modpow(e, &modulus);
        PadicInt::from_residue(self.prime, self.precision, residue)
    }

    /// Drops precision to `new_precision` (≤ current). Growing precision is
    /// impossible without recomputation from exact inputs, so it is an error.
    pub fn truncate(&self, new_precision: u32) -> Result<PadicInt> {
        if new_precision == 0 || new_precision > self.precision {
            return Err(Error::Precision(format!(
                "cannot change precision {} to {}; recompute from exact inputs to grow",
                self.precision, new_precision
            )));
        }
        let modulus = pow_p(self.prime, new_precision);
        Ok(PadicInt::from_residue(
            self.prime,
            new_precision,
            &self.residue % &modulus,
        ))
    }

    /// Divides by `p^e` exactly; fails unless the residue is divisible.
    /// The result is known at precision `N − e`.
    pub fn divide_exact_pow(&self, e: u32) -> Result<PadicInt> {
        if e == 0 {
            return Ok(self.clone());
        }
        if e >= self.precision {
            return Err(Error::Precision(format!(
                "dividing by p^{e} leaves no certified digits (precision {})",
                self.precision
            )));
        }
        let pe = pow_p(self.prime, e);
        let (q, r) = self.residue.div_rem(&pe);
        if !r.is_zero() {
            return Err(Error::Precision(format!(
                "residue {} is not divisible by {}^{e}",
                self.residue, self.prime
            )));
        }
        Ok(PadicInt::from_residue(self.prime, self.precision - e, q))
    }
}

impl fmt::Display for PadicInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (mod {}^{})",
            self.residue, self.prime, self.precision
        )
    }
}

/// The four arithmetic operations of the dispatcher interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    /// Inverts `a`; `b` only participates in the same-prime check.
    Invert,
}

/// Dispatcher form of the arithmetic: `op(a, b)` with pessimistic precision.
pub fn padic_arith(op: ArithOp, a: &PadicInt, b: &PadicInt) -> Result<PadicInt> {
    match op {
        ArithOp::Add => a.try_add(b),
        ArithOp::Sub => a.try_sub(b),
        ArithOp::Mul => a.try_mul(b),
        ArithOp::Invert => {
            a.check_same_prime(b)?;
            a.invert()
        }
    }
}

// ---------------------------------------------------------------------------
// Ball
// ---------------------------------------------------------------------------

/// A closed p-adic ball `{x : v_p(x − center) ≥ M}`.
///
/// Its integer points form exactly one congruence class mod `p^M`; `M = 0`
/// is the whole of `ℤ_p`. Two balls of the same prime are always disjoint
/// or nested.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ball {
    prime: u64,
    radius_exponent: u32,
    center: BigUint,
}

impl Ball {
    /// Ball of radius exponent `M` around `center` (reduced mod `p^M`).
    pub fn new(prime: u64, center: &BigInt, radius_exponent: u32) -> Result<Self> {
        require_prime(prime)?;
        let modulus = pow_p(prime, radius_exponent);
        Ok(Ball {
            prime,
            radius_exponent,
            center: reduce_mod(center, &modulus),
        })
    }

    /// The whole of `ℤ_p`.
    pub fn whole(prime: u64) -> Result<Self> {
        Self::new(prime, &BigInt::zero(), 0)
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    /// The radius exponent `M`; the class modulus is `p^M`.
    pub fn radius_exponent(&self) -> u32 {
        self.radius_exponent
    }

    /// Center, reduced into `[0, p^M)`.
    pub fn center(&self) -> &BigUint {
        &self.center
    }

    /// `p^M`.
    pub fn modulus(&self) -> BigUint {
        pow_p(self.prime, self.radius_exponent)
    }

    /// The `p` disjoint balls of radius exponent `M+1` partitioning this one.
    ///
    /// Child `i` has center `center + i·p^M`, already reduced mod `p^{M+1}`.
    pub fn children(&self) -> Vec<Ball> {
        let step = self.modulus();
        (0..self.prime)
            .map(|i| Ball {
                prime: self.prime,
                radius_exponent: self.radius_exponent + 1,
                center: &self.center + &step * i,
            })
            .collect()
    }

    /// Whether the integer `x` lies in the ball.
    pub fn contains_int(&self, x: &BigInt) -> bool {
        reduce_mod(x, &self.modulus()) == self.center
    }

    /// Whether `other` is contained in this ball (same prime required).
    pub fn contains_ball(&self, other: &Ball) -> bool {
        self.prime == other.prime
            && self.radius_exponent <= other.radius_exponent
            && (&other.center % self.modulus()) == self.center
    }

    /// Disjoint-or-nested dichotomy: true when the balls share no point.
    pub fn is_disjoint(&self, other: &Ball) -> bool {
        self.prime == other.prime && !self.contains_ball(other) && !other.contains_ball(self)
    }
}

impl fmt::Display for Ball {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] mod {}^{}",
            self.center, self.prime, self.radius_exponent
        )
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
