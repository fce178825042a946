//! Error type shared by every module of the crate.
//!
//! The taxonomy mirrors the failure modes that matter in exact p-adic work:
//! domain violations (bad primes, non-units), precision exhaustion (a result
//! exists but cannot be certified at the working precision), resource caps on
//! exact big-integer paths, and structural findings (an expansion that does
//! not have the expected constant/non-constant shape, a slope that has not
//! stabilized yet). Precision problems are always loud errors, never guesses.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// A parameter that must be prime is not.
    #[error("not a prime: {0}")]
    NotPrime(u64),

    /// Two p-adic values with different primes were combined.
    #[error("mixed primes: {0} and {1}")]
    MixedPrimes(u64, u64),

    /// Inversion of a non-unit (valuation > 0, or valuation unreadable).
    #[error("not invertible mod {prime}^{precision}: residue {residue}")]
    NotInvertible {
        prime: u64,
        precision: u32,
        residue: String,
    },

    /// Argument outside an operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The working precision cannot certify the requested result.
    #[error("precision exhausted: {0}")]
    Precision(String),

    /// An exact computation exceeded its configured size cap.
    #[error("resource cap exceeded: {0}")]
    Resource(String),

    /// Two independent methods disagree, or an internal exactness assertion
    /// failed; always a bug or a falsified expectation, never ignorable.
    #[error("consistency failure: {0}")]
    Inconsistent(String),

    /// A slope/affine-law read was attempted before the data stabilized.
    #[error("not stabilized: {0}")]
    NotStabilized(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
