//! The locally analytic engine: powers `u^x` of principal units for p-adic
//! exponents, the p-adic logarithm, finite exponential sums
//! `f(x) = Σ c_i·u_i^x`, their derivatives, and zero multiplicity.
//!
//! A *principal unit* is `u ≡ 1 (mod p)` for odd `p` and `u ≡ 1 (mod 4)`
//! for `p = 2`. For such `u` the binomial series
//!
//! ```text
//! u^x = (1 + p·b)^x = Σ_{j≥0} (x)_j · b^j · p^j / j!      (odd p)
//! ```
//!
//! converges for every p-adic integer `x` because the `j`-th term has
//! valuation at least `j − v_p(j!) ≥ j·(p−2)/(p−1)`. For `p = 2` the same
//! series is run with `b = (u−1)/4`, whose terms have valuation at least
//! `2j − v_2(j!) ≥ j+1`; this is why the mod-4 condition is part of the
//! principal-unit definition here.
//!
//! Precision is tracked honestly: `u^x` is certified modulo
//! `p^min(N_u, N_x + v_p(u−1))` — the exponent side contributes
//! `v_p(u^{x−x′} − 1) = v_p(u−1) + v_p(x−x′)` (lifting the exponent), the
//! base side contributes `N_u` — and the series is truncated only once the
//! remaining terms provably vanish at that modulus.

use num_bigint::{BigInt, BigUint};
use num_rational::Ratio;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::padic::{
    pow_p, reduce_mod, require_prime, vp_rational, PadicInt, ValBound, Valuation,
};
use crate::stirling;

/// Guaranteed valuation of `u − 1` for a principal unit: 1 for odd p, 2 for
/// `p = 2` (the mod-4 normalization).
pub fn principal_delta(p: u64) -> u32 {
    if p == 2 {
        2
    } else {
        1
    }
}

/// Checks that `u` is a principal unit and returns the certified lower
/// bound on `v_p(u − 1)` (exact valuation when readable, else the
/// precision).
fn principal_unit_delta(u: &PadicInt) -> Result<u32> {
    let p = u.prime();
    let delta = principal_delta(p);
    if u.precision() < delta {
        return Err(Error::Precision(format!(
            "principal-unit check needs at least {delta} digits, base has {}",
            u.precision()
        )));
    }
    let rem = u.residue() % pow_p(p, delta);
    if !rem.is_one() {
        return Err(Error::Domain(format!(
            "base {} is not a principal unit (must be ≡ 1 mod {}^{delta})",
            u,
            u.prime()
        )));
    }
    let one = PadicInt::one(p, u.precision())?;
    Ok(u.try_sub(&one)?.valuation().lower())
}

// ---------------------------------------------------------------------------
// u^x and log
// ---------------------------------------------------------------------------

/// `u^x` for a principal unit `u` and any p-adic integer exponent `x`,
/// by the convergent binomial series.
///
/// Agrees with exact modular exponentiation whenever `x` is a natural
/// number. The result's precision is `min(N_u, N_x + v_p(u−1))`.
pub fn padic_pow(u: &PadicInt, x: &PadicInt) -> Result<PadicInt> {
    if u.prime() != x.prime() {
        return Err(Error::MixedPrimes(u.prime(), x.prime()));
    }
    let p = u.prime();
    let delta_u = principal_unit_delta(u)?;
    let delta = principal_delta(p);
    let precision = u
        .precision()
        .min(x.precision().saturating_add(delta_u))
        .max(1);
    let modulus = pow_p(p, precision);

    // b = (u − 1) / p^delta, exactly divisible by construction.
    let b = (u.residue() - 1u32) / pow_p(p, delta);

    // Series bound: term j has valuation ≥ j·delta − v_p(j!). For odd p
    // that is ≥ j(p−2)/(p−1), so j ≥ precision·(p−1)/(p−2) suffices; for
    // p = 2 it is ≥ j+1, so j ≥ precision suffices. (Also the hard cap of
    // 4·precision terms, which these bounds stay under.)
    let max_j: u64 = if p == 2 {
        precision as u64
    } else {
        (precision as u64) * (p - 1) / (p - 2) + 1
    };

    let x_lift = x.residue().clone();
    let mut sum = BigUint::one(); // j = 0 term
    let mut poch = BigUint::one(); // (x)_j = x(x−1)…(x−j+1) mod p^precision
    let mut bpow = BigUint::one(); // b^j mod p^precision
    let mut v_fact = 0u64; // v_p(j!)
    let mut unit_fact = BigUint::one(); // j! / p^{v_p(j!)} mod p^precision
    for j in 1..=max_j {
        // advance the Pochhammer factor: multiply by (x − (j−1))
        let shift = BigInt::from(x_lift.clone()) - BigInt::from(j - 1);
        poch = poch * reduce_mod(&shift, &modulus) % &modulus;
        bpow = bpow * &b % &modulus;
        // advance j! split into p-power and unit part
        let mut jj = j;
        while jj % p == 0 {
            v_fact += 1;
            jj /= p;
        }
        unit_fact = unit_fact * jj % &modulus;
        // term valuation from the explicit p-power alone
        let p_exponent = (j * delta as u64).saturating_sub(v_fact);
        if p_exponent >= precision as u64 {
            continue;
        }
        let unit_inv = crate::padic::mod_inverse(&unit_fact, &modulus)
            .expect("unit part of j! is invertible");
        let term = &poch * &bpow % &modulus * pow_p(p, p_exponent as u32) % &modulus * unit_inv
            % &modulus;
        sum = (sum + term) % &modulus;
    }
    Ok(PadicInt::from_residue(p, precision, sum))
}

/// `u^x` at the precision [`padic_pow`] certifies, by exact residue
/// exponentiation.
///
/// Sound for an arbitrary p-adic exponent, not just naturals: replacing
/// `x` by its residue `x mod p^{N_x}` changes the power by a factor
/// `u^{p^{N_x}·t}`, and `v_p(u^{p^{N_x}·t} − 1) ≥ N_x + v_p(u−1)`, which is
/// at or above the certified precision `min(N_u, N_x + v_p(u−1))`. The two
/// routes therefore agree on every certified digit; this one costs a single
/// modular exponentiation instead of a series with per-term inversions.
fn pow_principal_fast(u: &PadicInt, x: &PadicInt) -> Result<PadicInt> {
    if u.prime() != x.prime() {
        return Err(Error::MixedPrimes(u.prime(), x.prime()));
    }
    let p = u.prime();
    let delta_u = principal_unit_delta(u)?;
    let precision = u
        .precision()
        .min(x.precision().saturating_add(delta_u))
        .max(1);
    let modulus = pow_p(p, precision);
    let residue = u.residue().modpow(x.residue(), &modulus);
    Ok(PadicInt::from_residue(p, precision, residue))
}

/// The p-adic logarithm `log a = Σ_{j≥1} (−1)^{j−1}·(a−1)^j / j` of a
/// principal unit.
///
/// Within the principal units, `log a = 0` exactly when `a = 1` (the only
/// root of unity there). The result carries the precision of `a`.
pub fn padic_log(a: &PadicInt) -> Result<PadicInt> {
    let p = a.prime();
    let delta_a = principal_unit_delta(a)?;
    let precision = a.precision();
    let one = PadicInt::one(p, precision)?;
    let z = a.try_sub(&one)?;
    if z.residue().is_zero() {
        return PadicInt::zero(p, precision);
    }
    // Guard digits cover the divisions by p^{v_p(j)}.
    let mut guard = 1u32;
    loop {
        // j ≤ p^guard must hold for every j the loop touches; grow until safe.
        let bound = (precision as u64 + 1) / (delta_a as u64).max(1) + guard as u64 + 4;
        if pow_p(p, guard) > BigUint::from(bound) {
            break;
        }
        guard += 1;
    }
    let work = precision + guard;
    let modulus = pow_p(p, work);
    let z_lift = z.residue().clone();
    let mut zpow = BigUint::one();
    let mut acc = BigUint::zero();
    let mut j = 0u64;
    loop {
        j += 1;
        // stop once j·v(z) − v_p(j) ≥ precision for this and all later terms;
        // j·v(z) − log_p(j) is increasing in j, so the first hit is final
        let mut vj = 0u32;
        let mut jj = j;
        while jj % p == 0 {
            vj += 1;
            jj /= p;
        }
        if (j * delta_a as u64).saturating_sub(vj as u64) >= precision as u64 {
            break;
        }
        zpow = if j == 1 {
            z_lift.clone() % &modulus
        } else {
            zpow * &z_lift % &modulus
        };
        // term = z^j / j = (z^j / p^{v_p(j)}) · (j / p^{v_p(j)})^{−1}
        let shifted = &zpow / pow_p(p, vj); // exactly divisible: v(z^j) ≥ j ≥ v_p(j)
        if !(&shifted * pow_p(p, vj)).eq(&zpow) {
            return Err(Error::Precision(format!(
                "log series term {j} not exactly divisible by p^{vj}"
            )));
        }
        let unit_inv =
            crate::padic::mod_inverse(&BigUint::from(jj), &modulus).expect("p∤jj is a unit");
        let term = shifted * unit_inv % &modulus;
        if j % 2 == 1 {
            acc = (acc + term) % &modulus;
        } else {
            acc = if acc >= term {
                acc - term
            } else {
                &modulus - term + acc
            };
        }
        // zpow for j == 1 was taken modulo the work modulus above; keep going
    }
    let target = pow_p(p, precision);
    Ok(PadicInt::from_residue(p, precision, acc % target))
}

// ---------------------------------------------------------------------------
// Exponential sums
// ---------------------------------------------------------------------------

/// One term `c·u^x` of an exponential sum: a nonzero rational coefficient
/// whose denominator is coprime to `p`, and a principal-unit base.
#[derive(Debug, Clone)]
pub struct ExpTerm {
    pub coeff: Ratio<BigInt>,
    pub base: PadicInt,
}

/// A finite combination `f(x) = Σ c_i·u_i^x` of p-adic exponentials —
/// the locally analytic function object everything else evaluates.
///
/// Construction validates the regime the local theory needs: nonzero
/// coefficients with `p`-integral denominators, pairwise distinct
/// principal-unit bases (for `p = 2` the mod-4 normalization already rules
/// out base ratios ≡ −1). Logarithms of the bases are precomputed once.
#[derive(Debug, Clone)]
pub struct ExpSum {
    prime: u64,
    terms: Vec<ExpTerm>,
    logs: Vec<PadicInt>,
    c_min: u32,
    delta_sharp: u32,
}

impl ExpSum {
    pub fn new(prime: u64, terms: Vec<(Ratio<BigInt>, PadicInt)>) -> Result<Self> {
        require_prime(prime)?;
        if terms.is_empty() {
            return Err(Error::Domain("an exponential sum needs at least one term".into()));
        }
        let mut c_min = u32::MAX;
        let mut delta_sharp = u32::MAX;
        let mut built = Vec::with_capacity(terms.len());
        let mut logs = Vec::with_capacity(terms.len());
        for (coeff, base) in terms {
            if coeff.is_zero() {
                return Err(Error::Domain("zero coefficient in exponential sum".into()));
            }
            if base.prime() != prime {
                return Err(Error::MixedPrimes(prime, base.prime()));
            }
            let vden = crate::padic::vp_bigint_unchecked(prime, coeff.denom());
            if vden != Valuation::Finite(0) {
                return Err(Error::Domain(format!(
                    "coefficient {coeff} has a denominator divisible by {prime}; \
                     only p-integral coefficients are supported"
                )));
            }
            let vc = match vp_rational(prime, &coeff)? {
                Valuation::Finite(v) => v as u32,
                Valuation::Infinite => unreachable!("nonzero coefficient"),
            };
            c_min = c_min.min(vc);
            delta_sharp = delta_sharp.min(principal_unit_delta(&base)?);
            logs.push(padic_log(&base)?);
            built.push(ExpTerm { coeff, base });
        }
        // pairwise distinct bases, compared at the smaller precision
        for i in 0..built.len() {
            for j in (i + 1)..built.len() {
                let (a, b) = (&built[i].base, &built[j].base);
                let n = a.precision().min(b.precision());
                if a.truncate(n)? == b.truncate(n)? {
                    return Err(Error::Domain(format!(
                        "bases {a} and {b} are indistinguishable at precision {n}"
                    )));
                }
            }
        }
        Ok(ExpSum {
            prime,
            terms: built,
            logs,
            c_min,
            delta_sharp,
        })
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    pub fn terms(&self) -> &[ExpTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `min_i v_p(c_i)` — the coefficient floor in every valuation bound.
    pub fn c_min(&self) -> u32 {
        self.c_min
    }

    /// Certified `min_i v_p(u_i − 1)`; at least 1 (odd p) or 2 (p = 2).
    pub fn delta_sharp(&self) -> u32 {
        self.delta_sharp
    }

    /// Precomputed `log u_i` for term `i`.
    pub fn log_of_base(&self, i: usize) -> &PadicInt {
        &self.logs[i]
    }

    fn coeff_mod(&self, i: usize, precision: u32) -> PadicInt {
        let modulus = pow_p(self.prime, precision);
        let num = reduce_mod(self.terms[i].coeff.numer(), &modulus);
        let den = reduce_mod(self.terms[i].coeff.denom(), &modulus);
        let den_inv =
            crate::padic::mod_inverse(&den, &modulus).expect("denominator coprime to p");
        PadicInt::from_residue(self.prime, precision, num * den_inv % modulus)
    }

    /// `f(x) = Σ c_i·u_i^x` via the analytic power series.
    ///
    /// The residue may be 0 with only a bound on the valuation when the
    /// terms cancel; that is reported through the result's precision, never
    /// resolved silently.
    pub fn eval(&self, x: &PadicInt) -> Result<PadicInt> {
        self.derivative(0, x)
    }

    /// `f^{(order)}(x) = Σ c_i·u_i^x·(log u_i)^order`.
    pub fn derivative(&self, order: u32, x: &PadicInt) -> Result<PadicInt> {
        let mut acc: Option<PadicInt> = None;
        for (i, term) in self.terms.iter().enumerate() {
            let mut value = pow_principal_fast(&term.base, x)?;
            for _ in 0..order {
                value = value.try_mul(&self.logs[i])?;
            }
            let c = self.coeff_mod(i, value.precision());
            let contrib = c.try_mul(&value)?;
            acc = Some(match acc {
                None => contrib,
                Some(prev) => prev.try_add(&contrib)?,
            });
        }
        Ok(acc.expect("at least one term"))
    }

    /// All derivatives `f^{(0)}(x), …, f^{(max_order)}(x)` in one pass,
    /// computing each base power only once.
    pub fn derivative_profile(&self, x: &PadicInt, max_order: u32) -> Result<Vec<PadicInt>> {
        let mut factors = Vec::with_capacity(self.terms.len());
        for (i, term) in self.terms.iter().enumerate() {
            let value = pow_principal_fast(&term.base, x)?;
            let c = self.coeff_mod(i, value.precision());
            factors.push(c.try_mul(&value)?);
        }
        let mut out = Vec::with_capacity(max_order as usize + 1);
        for order in 0..=max_order {
            let mut acc: Option<PadicInt> = None;
            for factor in &factors {
                acc = Some(match acc {
                    None => factor.clone(),
                    Some(prev) => prev.try_add(factor)?,
                });
            }
            out.push(acc.expect("at least one term"));
            if order < max_order {
                for (i, factor) in factors.iter_mut().enumerate() {
                    *factor = factor.try_mul(&self.logs[i])?;
                }
            }
        }
        Ok(out)
    }

    /// `f(x)` for a natural-number exponent by exact modular powering —
    /// an independent route used to cross-check the series.
    pub fn eval_nat(&self, x: &BigUint) -> Result<PadicInt> {
        let mut acc: Option<PadicInt> = None;
        for (i, term) in self.terms.iter().enumerate() {
            let value = term.base.pow_nat(x);
            let c = self.coeff_mod(i, value.precision());
            let contrib = c.try_mul(&value)?;
            acc = Some(match acc {
                None => contrib,
                Some(prev) => prev.try_add(&contrib)?,
            });
        }
        Ok(acc.expect("at least one term"))
    }
}

/// Free-function form of [`ExpSum::eval`].
pub fn expsum_eval(f: &ExpSum, x: &PadicInt) -> Result<PadicInt> {
    f.eval(x)
}

/// Free-function form of [`ExpSum::derivative`].
pub fn expsum_derivative(f: &ExpSum, order: u32, x: &PadicInt) -> Result<PadicInt> {
    f.derivative(order, x)
}

// ---------------------------------------------------------------------------
// The Stirling exponential sums
// ---------------------------------------------------------------------------

/// The exponential sum behind the partial Stirling sums: with the variable
/// change `n = a0 + x·(p−1)` (odd p) or `n = a0 + 2x` (p = 2),
///
/// ```text
/// T_p(a0 + x·(p−1), k) = Σ_{p∤j, j≤k} (−1)^{k−j}·C(k,j)·j^{a0} · (j^{p−1})^x
/// ```
///
/// so the coefficients are `(−1)^{k−j}·C(k,j)·j^{a0}` and the bases are
/// `j^{p−1}` (resp. `j²`), all principal units. The outer residue `a0` runs
/// over `{0,…,p−2}` for odd p and `{0,1}` for `p = 2`, absorbing the factor
/// that restores series convergence for `p = 2`.
#[derive(Debug, Clone)]
pub struct StirlingExpSum {
    p: u64,
    k: u64,
    a0: u64,
    sum: ExpSum,
}

impl StirlingExpSum {
    pub fn new(p: u64, k: u64, a0: u64, precision: u32) -> Result<Self> {
        require_prime(p)?;
        if k < 1 {
            return Err(Error::Domain("k ≥ 1 required".into()));
        }
        let a0_max = if p == 2 { 1 } else { p - 2 };
        if a0 > a0_max {
            return Err(Error::Domain(format!(
                "a0 = {a0} outside the outer residue range 0..={a0_max} for p = {p}"
            )));
        }
        let binoms = stirling::binomial_row(k);
        let base_exp = if p == 2 { 2 } else { (p - 1) as u32 };
        let mut terms = Vec::new();
        for j in 1..=k {
            if j % p == 0 {
                continue;
            }
            let mut coeff = BigInt::from(binoms[j as usize].clone())
                * BigInt::from(j).pow(a0 as u32);
            if (k - j) % 2 == 1 {
                coeff = -coeff;
            }
            let base = PadicInt::new(p, precision, &BigInt::from(j))?.pow_nat(&BigUint::from(
                base_exp,
            ));
            terms.push((Ratio::from_integer(coeff), base));
        }
        let sum = ExpSum::new(p, terms)?;
        Ok(StirlingExpSum { p, k, a0, sum })
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn a0(&self) -> u64 {
        self.a0
    }

    pub fn sum(&self) -> &ExpSum {
        &self.sum
    }

    /// The precision the bases were constructed at.
    pub fn precision(&self) -> u32 {
        self.sum.terms()[0].base.precision()
    }

    /// Step of the variable change: `p−1` for odd p, 2 for `p = 2`.
    pub fn n_step(&self) -> u64 {
        if self.p == 2 {
            2
        } else {
            self.p - 1
        }
    }

    /// The `n` corresponding to an x-space point: `a0 + x·step`.
    pub fn x_to_n(&self, x: &BigUint) -> BigUint {
        x * self.n_step() + self.a0
    }

    /// Exact `T_p(a0 + x·step, k) mod p^w` by modular arithmetic — the
    /// integer-side route, independent of the analytic series.
    pub fn eval_nat_exact(&self, x: &BigUint, w: u32) -> Result<BigUint> {
        let n = self.x_to_n(x);
        if n.is_zero() {
            // T_p(0, k) is the empty-exponent sum Σ (−1)^{k−j}·C(k,j) over
            // p∤j; evaluate directly rather than through t_p_mod's n ≥ 1.
            let eval = stirling::ModEvaluator::new(self.p, self.k, w)?;
            return Ok(eval.t_p(&BigUint::zero()));
        }
        stirling::t_p_mod(&n, self.k, self.p, w)
    }
}

// ---------------------------------------------------------------------------
// Multiplicity
// ---------------------------------------------------------------------------

/// Multiplicity of a zero: the least derivative order that does not vanish.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Multiplicity {
    Exact(u32),
    /// Every derivative of order `< bound` vanished at working precision.
    AtLeast(u32),
}

/// Least `i < max_order` with `f^{(i)}(x0)` certifiably nonzero.
///
/// The local theory guarantees `l` is below the number of terms (a
/// Vandermonde matrix in the distinct `log u_i` would otherwise be
/// singular), so if `max_order` covers all terms and every derivative still
/// reads 0, the working precision — not the function — is at fault, and
/// that is reported as a precision error rather than a multiplicity.
pub fn multiplicity_at_zero(
    f: &ExpSum,
    x0: &PadicInt,
    max_order: u32,
) -> Result<Multiplicity> {
    // `x0` approximates the zero to `p^-T`, `T = x0.precision()`.  Replacing
    // the true zero by `x0` perturbs the order-`i` derivative by a Taylor
    // remainder of valuation ≥ T − O(1), so readings at or above `T` are
    // indistinguishable from 0 at this resolution, while the first genuinely
    // non-vanishing derivative shows a valuation well below `T` once the
    // caller supplies enough digits of the zero.
    let threshold = x0.precision();
    for i in 0..max_order {
        let d = f.derivative(i, x0)?;
        if let ValBound::Exact(v) = d.valuation() {
            if v < threshold {
                return Ok(Multiplicity::Exact(i));
            }
        }
    }
    if max_order as usize >= f.len() {
        return Err(Error::Precision(format!(
            "all derivatives up to order {} vanish at resolution {}, but the \
             multiplicity must be below the term count {}; refine the zero or \
             raise the working precision",
            max_order,
            threshold,
            f.len()
        )));
    }
    Ok(Multiplicity::AtLeast(max_order))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
