//! p-adic valuations of Stirling numbers of the second kind.
//!
//! The crate computes `v_p(S(n,k))` exactly, at any scale of `n`, and
//! explains the values structurally: the sequence `n ↦ v_p(S(n,k))` is
//! governed by a p-adic locally analytic function (a finite sum of
//! exponentials `Σ c_j·u_j^x`), and the congruence classes of `n` split into
//! finitely many classes on which the valuation is constant plus finitely
//! many "active" chains along which it grows affinely, one digit of a p-adic
//! zero per level.
//!
//! Module map:
//!
//! * [`padic`] — valuations, precision-tracked arithmetic mod `p^N`, balls;
//! * [`stirling`] — exact/modular `S(n,k)`, partial sums `T_p(n,k)`, the
//!   closed-form decomposition, periods of `S(n,k) mod p^m`;
//! * [`analytic`] — analytic powers `u^x`, the p-adic logarithm, exponential
//!   sums and their derivatives, zero multiplicity;
//! * [`tree`] — the certified constant/non-constant congruence-class tree,
//!   zero refinement, slopes, and the translation back to statements about
//!   `v_p(S(n,k))`;
//! * [`verify`] — one-command reproductions of the identities the design is
//!   checked against;
//! * [`error`] — the shared error taxonomy.
//!
//! Everything is exact: valuations are integers (or a genuine `+∞`),
//! residues are big integers, and any result that cannot be certified at
//! the working precision is a loud error, never a guess.
//!
//! # Example
//!
//! ```
//! use num_bigint::BigUint;
//! use padic_stirling::stirling::vp_stirling;
//! use padic_stirling::tree::{build_past_stabilization, to_stirling_statements};
//!
//! // v_2(S(2^40, 5)) — exact, via residues, no big powers materialized.
//! let n = BigUint::from(1u64) << 40;
//! assert_eq!(vp_stirling(2, &n, 5).unwrap().finite(), Some(1));
//!
//! // The certified landscape of v_2(S(n, 5)).
//! let tree = build_past_stabilization(2, 5, 10, None).unwrap();
//! assert_eq!(tree.mu, 2);                      // two 2-adic zeros
//! for chain in &tree.chains {
//!     assert_eq!(chain.l, Some(1));            // both of multiplicity 1
//! }
//! let statements = to_stirling_statements(&tree).unwrap();
//! // e.g. "v_2(S(n,5)) = 1 for every n ≡ 0 (mod 8) with n > 4" — and its kin.
//! assert!(!statements.statements.is_empty());
//! ```

pub mod analytic;
pub mod error;
pub mod padic;
pub mod stirling;
pub mod tree;
pub mod verify;

pub use error::{Error, Result};
