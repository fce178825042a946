//! Randomized invariants: the algebraic laws the exact types must satisfy
//! on arbitrary inputs — the ultrametric inequality, multiplicativity of the
//! valuation, pessimistic precision propagation, ball partitions, the
//! analytic power/log homomorphisms, lifting the exponent, and agreement of
//! every Stirling computation route. Deterministic example-level checks live
//! next to the implementations; this target stresses the same laws at
//! random.

use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint};
use num_rational::Ratio;
use num_traits::{One, Zero};
use proptest::prelude::*;

use padic_stirling::analytic::{padic_log, padic_pow, principal_delta};
use padic_stirling::padic::{
    pow_p, vp_bigint, vp_factorial, vp_rational, Ball, PadicInt, ValBound, Valuation,
};
use padic_stirling::stirling::{
    decompose_check, stirling_exact, stirling_mod_u64, vp_stirling,
};
use padic_stirling::tree::{build_past_stabilization, NodeStatus, TreeReport};
use padic_stirling::verify::probe_constant_class;

fn small_prime() -> impl Strategy<Value = u64> {
    prop_oneof![Just(2u64), Just(3), Just(5), Just(7), Just(11)]
}

fn odd_prime() -> impl Strategy<Value = u64> {
    prop_oneof![Just(3u64), Just(5), Just(7), Just(11)]
}

fn rational() -> impl Strategy<Value = Ratio<BigInt>> {
    (-50_000i64..=50_000, 1i64..=50_000)
        .prop_map(|(n, d)| Ratio::new(BigInt::from(n), BigInt::from(d)))
}

/// Principal unit `1 + p^e·w` (`w` a unit), as a `PadicInt` at `prec`.
fn principal_unit(p: u64, prec: u32, e: u32, seed: u64) -> PadicInt {
    let mut w = BigUint::zero();
    let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1);
    for _ in 1..prec {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        w = w * p + BigUint::from((state >> 33) % p);
    }
    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    w = w * p + BigUint::from(1 + (state >> 33) % (p - 1));
    let residue = (BigUint::one() + pow_p(p, e) * w) % pow_p(p, prec);
    PadicInt::new(p, prec, &BigInt::from(residue)).expect("valid prime and precision")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// v_p(x+y) ≥ min(v_p(x), v_p(y)), with equality when the two
    /// valuations differ.
    #[test]
    fn ultrametric_inequality(p in small_prime(), x in rational(), y in rational()) {
        let vx = vp_rational(p, &x).unwrap();
        let vy = vp_rational(p, &y).unwrap();
        let vsum = vp_rational(p, &(&x + &y)).unwrap();
        let floor = vx.min(vy);
        prop_assert!(vsum >= floor, "v({x}+{y}) = {vsum:?} < min = {floor:?}");
        if vx != vy {
            prop_assert_eq!(vsum, floor);
        }
    }

    /// v_p(x·y) = v_p(x) + v_p(y), with +∞ absorbing.
    #[test]
    fn valuation_is_multiplicative(p in small_prime(), x in rational(), y in rational()) {
        let vx = vp_rational(p, &x).unwrap();
        let vy = vp_rational(p, &y).unwrap();
        let vprod = vp_rational(p, &(&x * &y)).unwrap();
        prop_assert_eq!(vprod, vx.plus(vy));
    }

    /// The same exact integer expression computed through `PadicInt`
    /// arithmetic at two different precisions agrees modulo `p^min(N1,N2)`.
    #[test]
    fn precision_soundness(
        p in small_prime(),
        a in -1_000_000i64..=1_000_000,
        b in -1_000_000i64..=1_000_000,
        n1 in 4u32..=40,
        n2 in 4u32..=40,
    ) {
        let x1 = PadicInt::new(p, n1, &BigInt::from(a)).unwrap();
        let y1 = PadicInt::new(p, n1, &BigInt::from(b)).unwrap();
        let r1 = x1.try_mul(&y1).unwrap().try_add(&x1).unwrap();
        let x2 = PadicInt::new(p, n2, &BigInt::from(a)).unwrap();
        let y2 = PadicInt::new(p, n2, &BigInt::from(b)).unwrap();
        let r2 = x2.try_mul(&y2).unwrap().try_add(&x2).unwrap();
        let n = n1.min(n2);
        let r1n = r1.truncate(n).unwrap();
        let r2n = r2.truncate(n).unwrap();
        prop_assert_eq!(r1n.residue(), r2n.residue());
        // And both agree with the exact integer reduced directly.
        let exact = BigInt::from(a) * BigInt::from(b) + BigInt::from(a);
        let direct = PadicInt::new(p, n, &exact).unwrap();
        prop_assert_eq!(r1n.residue(), direct.residue());
    }

    /// `vp_factorial` agrees with the valuation of the exact factorial.
    #[test]
    fn factorial_valuation_matches_exact(p in small_prime(), k in 0u64..=200) {
        let mut f = BigUint::one();
        for j in 1..=k {
            f *= j;
        }
        let direct = vp_bigint(p, &BigInt::from(f)).unwrap();
        prop_assert_eq!(direct, Valuation::Finite(vp_factorial(p, k).unwrap() as i64));
    }

    /// A ball's `p` children partition it: pairwise disjoint, each inside
    /// the parent, and every integer of the parent lies in exactly one.
    #[test]
    fn ball_children_partition(
        p in small_prime(),
        center in 0i64..=10_000,
        radius in 0u32..=6,
        probe in 0i64..=1_000_000,
    ) {
        let ball = Ball::new(p, &BigInt::from(center), radius).unwrap();
        let children = ball.children();
        prop_assert_eq!(children.len(), p as usize);
        for (i, c) in children.iter().enumerate() {
            prop_assert!(ball.contains_ball(c));
            for d in &children[i + 1..] {
                prop_assert!(c.is_disjoint(d));
            }
        }
        // A probe congruent to the parent's center lies in exactly one child.
        let step = BigInt::from(pow_p(p, radius));
        let point = BigInt::from(center) + BigInt::from(probe) * step;
        prop_assert!(ball.contains_int(&point));
        let hits = children.iter().filter(|c| c.contains_int(&point)).count();
        prop_assert_eq!(hits, 1);
    }

    /// The analytic power agrees with exact modular exponentiation on
    /// natural exponents.
    #[test]
    fn analytic_power_matches_integer_power(
        p in small_prime(),
        e_shift in 0u32..=2,
        seed in any::<u64>(),
        exponent in 0u64..=1_000_000,
    ) {
        let prec = 32;
        let u = principal_unit(p, prec, principal_delta(p) + e_shift, seed);
        let x = PadicInt::new(p, prec, &BigInt::from(exponent)).unwrap();
        let analytic = padic_pow(&u, &x).unwrap();
        let exact = u.pow_nat(&BigUint::from(exponent));
        let n = analytic.precision().min(exact.precision());
        let lhs = analytic.truncate(n).unwrap();
        let rhs = exact.truncate(n).unwrap();
        prop_assert_eq!(lhs.residue(), rhs.residue());
    }

    /// log(u·v) = log u + log v and u^{x+y} = u^x·u^y on random inputs.
    #[test]
    fn log_and_power_homomorphisms(
        p in small_prime(),
        seed_u in any::<u64>(),
        seed_v in any::<u64>(),
        xv in 0u64..=u64::MAX,
        yv in 0u64..=u64::MAX,
    ) {
        let prec = 32;
        let delta = principal_delta(p);
        let u = principal_unit(p, prec, delta, seed_u);
        let v = principal_unit(p, prec, delta + 1, seed_v);
        let lhs = padic_log(&u.try_mul(&v).unwrap()).unwrap();
        let rhs = padic_log(&u).unwrap().try_add(&padic_log(&v).unwrap()).unwrap();
        prop_assert_eq!(lhs.residue(), rhs.residue());

        let x = PadicInt::new(p, prec, &BigInt::from(xv)).unwrap();
        let y = PadicInt::new(p, prec, &BigInt::from(yv)).unwrap();
        let both = padic_pow(&u, &x.try_add(&y).unwrap()).unwrap();
        let split = padic_pow(&u, &x).unwrap().try_mul(&padic_pow(&u, &y).unwrap()).unwrap();
        prop_assert_eq!(both.residue(), split.residue());
    }

    /// Lifting the exponent at random units, read off integer arithmetic:
    /// v_p(u^{p^s} − 1) = v_p(u − 1) + s for odd p.
    #[test]
    fn lifting_the_exponent(
        p in odd_prime(),
        e_shift in 0u32..=2,
        seed in any::<u64>(),
        s in 1u32..=6,
    ) {
        let prec = 32;
        let e = principal_delta(p) + e_shift;
        let u = principal_unit(p, prec, e, seed);
        let modulus = pow_p(p, prec);
        let powed = u.residue().modpow(&pow_p(p, s), &modulus);
        let diff = BigInt::from(powed) - BigInt::one();
        let v = vp_bigint(p, &diff).unwrap();
        prop_assert_eq!(v, Valuation::Finite((e + s) as i64));
    }

    /// Modular and exact Stirling computations agree on random cells.
    #[test]
    fn stirling_routes_agree(
        p in prop_oneof![Just(2u64), Just(3), Just(5), Just(7)],
        n in 1u64..=60,
        k_frac in 0.0f64..=1.0,
        m in 1u32..=6,
    ) {
        let k = 1 + ((n - 1) as f64 * k_frac) as u64;
        let exact = stirling_exact(n, k).unwrap();
        let reduced = stirling_mod_u64(n, k, p, m).unwrap();
        prop_assert_eq!(&exact % pow_p(p, m), reduced);
    }

    /// The closed-form decomposition holds at random points.
    #[test]
    fn decomposition_holds(
        p in prop_oneof![Just(2u64), Just(3), Just(5)],
        n in 1u64..=40,
        k in 1u64..=12,
    ) {
        let rep = decompose_check(n, k, p).unwrap();
        prop_assert!(rep.holds(), "p={p}, n={n}, k={k}");
    }
}

// ---------------------------------------------------------------------------
// Tree-statement soundness at random points
// ---------------------------------------------------------------------------

fn sample_trees() -> &'static Vec<TreeReport> {
    static TREES: OnceLock<Vec<TreeReport>> = OnceLock::new();
    TREES.get_or_init(|| {
        [(2u64, 5u64), (3, 4)]
            .iter()
            .map(|&(p, k)| build_past_stabilization(p, k, 6, None).unwrap())
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Classifying a random `n` through the tree predicts `v_p(S(n,k))`:
    /// exactly `t − v_p(k!)` on certified classes (past the class
    /// threshold), strictly above the recorded floor on active chains.
    #[test]
    fn classification_predicts_direct_valuation(which in 0usize..2, n in 1u64..=500_000) {
        let tree = &sample_trees()[which];
        let vkf = vp_factorial(tree.p, tree.k).unwrap();
        let node = tree.classify_n(&BigUint::from(n)).expect("every n classifies");
        let direct = vp_stirling(tree.p, &BigUint::from(n), tree.k).unwrap();
        match node.status {
            NodeStatus::ConstantCertified => {
                let t = match node.t {
                    ValBound::Exact(t) => t as u64,
                    ValBound::AtLeast(_) => unreachable!("certified classes carry exact t"),
                };
                if n > t {
                    prop_assert_eq!(direct, Valuation::Finite((t - vkf) as i64));
                }
            }
            _ => {
                let chain = tree
                    .chains
                    .iter()
                    .find(|c| c.a0 == node.a0 && c.x0.residue() == &node.x_residue)
                    .expect("active leaf has a chain record");
                let floor = chain.levels.last().map(|l| l.least_valuation).unwrap_or(0) as i64;
                if n as i64 > floor {
                    match direct {
                        Valuation::Finite(v) => {
                            prop_assert!(v + vkf as i64 > floor, "n={n}: v={v} under floor {floor}");
                        }
                        Valuation::Infinite => prop_assert!(n < tree.k),
                    }
                }
            }
        }
    }
}

/// Certified constant classes stay constant under random probing — 200
/// probes per tree, with arguments up to ~p^30.
#[test]
fn constant_classes_survive_200_probes() {
    for (cell, tree) in sample_trees().iter().enumerate() {
        let mut constant_nodes = Vec::new();
        fn collect<'t>(
            node: &'t padic_stirling::tree::ClassNode,
            out: &mut Vec<&'t padic_stirling::tree::ClassNode>,
        ) {
            if node.status == NodeStatus::ConstantCertified {
                out.push(node);
            }
            for c in &node.children {
                collect(c, out);
            }
        }
        for root in &tree.roots {
            collect(root, &mut constant_nodes);
        }
        assert!(!constant_nodes.is_empty());
        let per_node = (200 / constant_nodes.len() as u32) + 1;
        let mut probes = 0u64;
        for (i, node) in constant_nodes.iter().enumerate() {
            let report = probe_constant_class(tree, node, per_node, 0xC0FFEE + i as u64)
                .unwrap_or_else(|e| panic!("p={}, k={}: {e}", tree.p, tree.k));
            assert!(
                report.pass,
                "cell {cell}: {:?}",
                report.counterexample
            );
            probes += report.checked;
        }
        assert!(probes >= 200, "only {probes} probes");
    }
}
