//! The constant/non-constant classification tree for valuations of the
//! partial sums `T_p(n, k)`.
//!
//! Fix a prime `p` and `k ≥ 1`, and fix a residue `a0` of `n` modulo the
//! step (`p−1` for odd `p`, 2 for `p = 2`).  Writing `n = a0 + step·x`, the
//! function `x ↦ T_p(n, k)` extends to an analytic function on `ℤ_p`
//! (an exponential sum, [`StirlingExpSum`]).  This module classifies the
//! congruence classes of `x` modulo powers of `p`:
//!
//! * a class is **constant-certified** when every point of the class provably
//!   has the same valuation `t`;
//! * otherwise the class is split into its `p` subclasses and the process
//!   recurses, producing a tree.
//!
//! Past a stabilization level the tree settles into a fixed shape: each
//! active (non-constant) node splits into `p − 1` constant children sharing
//! the parent's least valuation and exactly one active child with strictly
//! larger least valuation.  Each surviving active chain converges to a
//! `p`-adic zero `x0` of the exponential sum, and the least valuations grow
//! along the chain by an affine law `t(m) = α + l·(m − m0)` whose slope `l`
//! equals the multiplicity of the zero.
//!
//! Certification is two-tiered:
//!
//! 1. **Lifting-the-exponent tier** — on a class of level `M`, moving the
//!    argument within the class perturbs every term `c_j·u_j^x` by valuation
//!    at least `M + δ_p` above the coefficient floor `c_min`
//!    (`δ_p = 1` for odd `p`, 2 for `p = 2`).  If the valuation `t` at the
//!    center satisfies `t < M + δ_p + c_min` it is pinned on the whole class.
//! 2. **Taylor tier** — when tier 1 is inconclusive, bound the variation by
//!    the Taylor expansion at the center: for `x = c + h`, `v_p(h) ≥ M`,
//!    `f(x) − f(c) = Σ_{i≥1} f^{(i)}(c)/i!·h^i`.  Derivative valuations are
//!    read off the analytic engine for `i ≤ I`, and the tail `i > I` is
//!    bounded by `c_min + i·(δ# + M) − v_p(i!)` where
//!    `δ# = min_j v_p(u_j − 1)`.  If `t` is below the combined bound, the
//!    class is constant.  This tier certifies classes whose uniform
//!    valuation is far above the tier-1 ceiling (which happens routinely,
//!    e.g. for `p = 2` and `k = 16`).

use std::fmt;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

use crate::analytic::{multiplicity_at_zero, principal_delta, ExpSum, Multiplicity, StirlingExpSum};
use crate::error::{Error, Result};
use crate::padic::{pow_p, vp_factorial, Ball, PadicInt, ValBound, Valuation};
use crate::stirling::ModEvaluator;

/// Default number of derivative orders inspected by the Taylor tier.
pub const DEFAULT_TAYLOR_ORDERS: u32 = 6;

/// A stabilization level is only trusted when the settled shape persists for
/// this many further levels (which is also what a slope estimate needs).
pub const STABLE_WINDOW: u32 = 4;

/// Safety margin added on top of the first clean level when reporting the
/// affine-law threshold `m0`.
pub const M0_SAFETY_MARGIN: u32 = 2;

/// Hard ceiling on automatic precision retries.
const MAX_PRECISION: u32 = 4096;

/// Status of a node of the classification tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStatus {
    /// Every point of the class has the same valuation (field `t` of the node).
    ConstantCertified,
    /// The class could not be certified and has been split into children.
    Active,
    /// The class could not be certified and sits at the depth limit.
    DepthExhausted,
}

impl fmt::Display for NodeStatus {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeStatus::ConstantCertified => write!(out, "constant"),
            NodeStatus::Active => write!(out, "active"),
            NodeStatus::DepthExhausted => write!(out, "depth-exhausted"),
        }
    }
}

/// Which certificate established constancy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertMethod {
    /// Tier 1: `t < M + δ_p + c_min`.
    Lte,
    /// Tier 2: `t` below the Taylor variation bound at the center.
    Taylor,
}

impl fmt::Display for CertMethod {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CertMethod::Lte => write!(out, "lte"),
            CertMethod::Taylor => write!(out, "taylor"),
        }
    }
}

/// Outcome of a constancy check on a single class.
#[derive(Debug, Clone)]
pub enum Certification {
    /// The valuation is `t` everywhere on the class.
    Constant { t: u32, method: CertMethod },
    /// Constancy could not be established at this level; `center_valuation`
    /// is the (possibly truncated) reading at the class center.
    Inconclusive { center_valuation: ValBound },
}

impl Certification {
    pub fn is_constant(&self) -> bool {
        matches!(self, Certification::Constant { .. })
    }
}

/// One node of the classification tree: the class `x ≡ x_residue (mod p^level)`
/// inside the branch `n ≡ a0 (mod step)`.
#[derive(Debug, Clone)]
pub struct ClassNode {
    /// Residue of `n` modulo the step (`p−1` or 2).
    pub a0: u64,
    /// Level `M`: the class is taken modulo `p^M` in the variable `x`.
    pub level: u32,
    /// Representative `x` residue, reduced modulo `p^level`.
    pub x_residue: BigUint,
    pub status: NodeStatus,
    /// For constant nodes the certified valuation (always `Exact`); for
    /// active nodes the valuation reading at the class center.
    pub t: ValBound,
    /// Which tier certified the node (constant nodes only).
    pub method: Option<CertMethod>,
    /// The `p` subclasses, in increasing order of the added digit; empty for
    /// leaves.
    pub children: Vec<ClassNode>,
}

impl ClassNode {
    /// The class of `n` represented by this node: `n ≡ n_residue (mod n_modulus)`.
    pub fn n_class(&self, p: u64) -> (BigUint, BigUint) {
        let step = step_for(p);
        let modulus = BigUint::from(step) * pow_p(p, self.level);
        let residue = BigUint::from(self.a0) + BigUint::from(step) * &self.x_residue;
        (residue, modulus)
    }
}

fn step_for(p: u64) -> u64 {
    if p == 2 {
        2
    } else {
        p - 1
    }
}

/// Certified valuation of a residue known modulo `p^w`.
pub(crate) fn valuation_of_residue(p: u64, w: u32, residue: &BigUint) -> ValBound {
    if residue.is_zero() {
        return ValBound::AtLeast(w);
    }
    match crate::padic::vp_bigint_unchecked(p, &num_bigint::BigInt::from(residue.clone())) {
        Valuation::Finite(v) => ValBound::Exact(v as u32),
        Valuation::Infinite => unreachable!("nonzero residue"),
    }
}

/// How one expanded node split into its `p` children.
#[derive(Debug, Clone)]
pub struct SplitShape {
    pub a0: u64,
    /// Level of the parent that was expanded.
    pub parent_level: u32,
    pub parent_x_residue: BigUint,
    pub constant_count: usize,
    pub active_count: usize,
    /// Certified valuations of the constant children.
    pub constant_ts: Vec<u32>,
    /// Center readings of the children left active.
    pub active_centers: Vec<ValBound>,
}

impl SplitShape {
    /// The settled shape: `p − 1` constant children and exactly one active one.
    pub fn is_settled_shape(&self, p: u64) -> bool {
        self.constant_count == (p - 1) as usize && self.active_count == 1
    }

    /// All constant children certified with one common valuation.
    pub fn constants_share_t(&self) -> bool {
        self.constant_ts.windows(2).all(|w| w[0] == w[1])
    }

    /// Least certified valuation among the constant children, i.e. the least
    /// valuation attained on the parent class (away from deeper zeros).
    pub fn least_valuation(&self) -> Option<u32> {
        self.constant_ts.iter().copied().min()
    }
}

/// Number of classes left unresolved at a given level.
#[derive(Debug, Clone, Copy)]
pub struct LevelStats {
    pub level: u32,
    pub active_count: usize,
}

/// One level record along a surviving active chain.
#[derive(Debug, Clone)]
pub struct ChainLevel {
    /// Level `M` of the active node in the variable `x`.
    pub level: u32,
    /// The corresponding class index `m` for `n`: the class is
    /// `n mod step·p^{m−1}` with `m = level + 1`.
    pub m: u32,
    /// Modulus of the `n`-class.
    pub n_modulus: BigUint,
    /// `x` residue of the active node, modulo `p^level`.
    pub x_residue: BigUint,
    /// Least valuation attained on the node's class: the common floor of its
    /// constant children.
    pub least_valuation: u32,
}

/// A surviving active chain: the trace of one `p`-adic zero of the
/// exponential sum.
#[derive(Debug, Clone)]
pub struct ChainReport {
    pub a0: u64,
    /// Approximation of the zero the chain converges to, known modulo
    /// `p^depth`.
    pub x0: PadicInt,
    /// Affine-law offset: `least_valuation(m) = alpha + l·(m − m0_observed)`
    /// for `m ≥ m0_observed`.  Present when the slope is resolved.
    pub alpha: Option<i64>,
    /// Slope read from consecutive least-valuation differences.
    pub l: Option<u32>,
    /// Slope read independently as the multiplicity of the zero (least
    /// non-vanishing derivative order at `x0`).
    pub l_multiplicity: Option<u32>,
    /// Both slope readings are present and equal.
    pub methods_agree: bool,
    pub levels: Vec<ChainLevel>,
    pub notes: Vec<String>,
}

impl ChainReport {
    /// The agreed multiplicity of the chain's zero.
    ///
    /// Errors when the two independent readings (valuation-growth slope and
    /// least non-vanishing derivative) are missing or disagree.
    pub fn multiplicity(&self) -> Result<u32> {
        match (self.l, self.l_multiplicity) {
            (Some(a), Some(b)) if a == b => Ok(a),
            (Some(a), Some(b)) => Err(Error::Inconsistent(format!(
                "slope {a} from valuation growth disagrees with multiplicity {b} \
                 from derivatives (a0 = {})",
                self.a0
            ))),
            _ => Err(Error::NotStabilized(format!(
                "multiplicity unresolved for chain a0 = {}: slope {:?}, derivative reading {:?}",
                self.a0, self.l, self.l_multiplicity
            ))),
        }
    }
}

/// Result of building the classification tree for one `(p, k)`.
#[derive(Debug, Clone)]
pub struct TreeReport {
    pub p: u64,
    pub k: u64,
    /// Levels expanded below the roots.
    pub depth: u32,
    /// Working precision (digits of `p`) used by the analytic engine.
    pub precision: u32,
    /// Number of active chains at the bottom, i.e. the number of `p`-adic
    /// zeros (with multiplicity counted once each) across all branches.
    pub mu: usize,
    /// First level from which the shape is settled (active counts constant
    /// and every split of the settled form), verified for at least
    /// [`STABLE_WINDOW`] further levels; `None` when the window did not fit.
    pub stabilization_level: Option<u32>,
    /// Conservative affine-law threshold: `stabilization_level + 1 +`
    /// [`M0_SAFETY_MARGIN`].
    pub m0_observed: Option<u32>,
    pub chains: Vec<ChainReport>,
    pub level_stats: Vec<LevelStats>,
    pub splits: Vec<SplitShape>,
    /// One root per residue `a0`, indexed by `a0`.
    pub roots: Vec<ClassNode>,
    pub notes: Vec<String>,
}

impl TreeReport {
    /// Step of the variable change (`p−1` for odd `p`, 2 for `p = 2`).
    pub fn step(&self) -> u64 {
        step_for(self.p)
    }

    /// Walks the tree to the deepest node whose class contains `n`.
    ///
    /// Returns `None` when `k = 1` handling produced no roots (not the case
    /// for built trees) — otherwise every `n` lands in exactly one leaf.
    pub fn classify_n(&self, n: &BigUint) -> Option<&ClassNode> {
        let step = BigUint::from(self.step());
        let a0 = (n % &step).to_u64().expect("step fits in u64");
        let mut node = self.roots.get(a0 as usize)?;
        debug_assert_eq!(node.a0, a0);
        let x = (n - BigUint::from(a0)) / &step;
        loop {
            if node.children.is_empty() {
                return Some(node);
            }
            let child_modulus = pow_p(self.p, node.level + 1);
            let x_red = &x % &child_modulus;
            let next = node
                .children
                .iter()
                .find(|c| c.x_residue == x_red)
                .expect("children cover all residues");
            node = next;
        }
    }

    /// The `n`-class moduli per chain-level index `m`: rows
    /// `(m, x modulus p^{m−1}, n modulus step·p^{m−1})`.
    pub fn translation_table(&self) -> Vec<(u32, BigUint, BigUint)> {
        (1..=self.depth)
            .map(|m| {
                let xm = pow_p(self.p, m - 1);
                let nm = BigUint::from(self.step()) * &xm;
                (m, xm, nm)
            })
            .collect()
    }

    fn count_nodes(node: &ClassNode) -> usize {
        1 + node.children.iter().map(Self::count_nodes).sum::<usize>()
    }

    /// Total number of nodes in all branches.
    pub fn node_count(&self) -> usize {
        self.roots.iter().map(Self::count_nodes).sum()
    }
}

/// Evaluation context for one branch `a0`: the exponential sum plus a shared
/// modular evaluator for exact integer reads.
pub(crate) struct TreeContext {
    f: StirlingExpSum,
    eval: ModEvaluator,
    w: u32,
    taylor_orders: u32,
}

impl TreeContext {
    fn create(p: u64, k: u64, a0: u64, w: u32, taylor_orders: u32) -> Result<Self> {
        let f = StirlingExpSum::new(p, k, a0, w)?;
        let eval = ModEvaluator::new(p, k, w)?;
        Ok(TreeContext {
            f,
            eval,
            w,
            taylor_orders,
        })
    }

    fn from_sum(f: StirlingExpSum, taylor_orders: u32) -> Result<Self> {
        let w = f.precision();
        let eval = ModEvaluator::new(f.prime(), f.k(), w)?;
        Ok(TreeContext {
            f,
            eval,
            w,
            taylor_orders,
        })
    }

    fn p(&self) -> u64 {
        self.f.prime()
    }

    /// Valuation of the branch function at integer `x ≥ 0`, read exactly
    /// modulo `p^w` through the modular route (no series truncation).
    fn center_valuation(&self, x: &BigUint) -> ValBound {
        let n = self.f.x_to_n(x);
        valuation_of_residue(self.p(), self.w, &self.eval.t_p(&n))
    }

    /// Taylor variation bound at the class `x ≡ center (mod p^level)`:
    /// a `B` such that `v_p(f(x) − f(center)) ≥ B` on the whole class.
    /// Returns a lower bound as `i64` (may be non-positive, in which case it
    /// certifies nothing).
    fn taylor_bound(&self, center: &BigUint, level: u32) -> Result<i64> {
        let p = self.p();
        let orders = self.taylor_orders.min(self.w);
        let c = PadicInt::from_residue(p, self.w, center % self.eval.modulus());
        let profile = self.f.sum().derivative_profile(&c, orders)?;
        let c_min = self.f.sum().c_min() as i64;
        let delta_sharp = self.f.sum().delta_sharp() as i64;
        let m = level as i64;
        let i_max = orders as i64;
        // Tail over orders i > I: each term of the Taylor series has
        // valuation ≥ c_min + i·(δ# + M) − v_p(i!) ≥ c_min + i·(δ# + M) −
        // (i−1)/(p−1), increasing in i, so the infimum is at i = I + 1.
        let tail_penalty = if p == 2 {
            i_max // ceil(I / (p−1)) with p = 2
        } else {
            (i_max + (p as i64 - 2)) / (p as i64 - 1)
        };
        let mut bound = c_min + (i_max + 1) * (delta_sharp + m) - tail_penalty;
        for i in 1..=orders {
            let vi = profile[i as usize].valuation().lower() as i64;
            let term = vi - vp_factorial(p, i as u64)? as i64 + i as i64 * m;
            bound = bound.min(term);
        }
        Ok(bound)
    }

    /// Two-tier constancy check of the class `x ≡ x_residue (mod p^level)`.
    fn certify(&self, x_residue: &BigUint, level: u32) -> Result<Certification> {
        let t = self.center_valuation(x_residue);
        let tv = match t {
            ValBound::Exact(v) => v,
            ValBound::AtLeast(_) => {
                return Ok(Certification::Inconclusive {
                    center_valuation: t,
                })
            }
        };
        let tier1 = level as u64 + principal_delta(self.p()) as u64 + self.f.sum().c_min() as u64;
        if (tv as u64) < tier1 {
            return Ok(Certification::Constant {
                t: tv,
                method: CertMethod::Lte,
            });
        }
        let bound = self.taylor_bound(x_residue, level)?;
        if (tv as i64) < bound {
            return Ok(Certification::Constant {
                t: tv,
                method: CertMethod::Taylor,
            });
        }
        Ok(Certification::Inconclusive {
            center_valuation: t,
        })
    }

    /// Splits an active node into its `p` children and certifies each.
    fn expand(&self, node: &ClassNode) -> Result<(Vec<ClassNode>, SplitShape)> {
        if node.status == NodeStatus::ConstantCertified {
            return Err(Error::Domain(format!(
                "cannot expand a constant-certified class (a0 = {}, level {})",
                node.a0, node.level
            )));
        }
        let p = self.p();
        let step = pow_p(p, node.level);
        let child_level = node.level + 1;
        let mut children = Vec::with_capacity(p as usize);
        let mut constant_ts = Vec::new();
        let mut active_centers = Vec::new();
        for digit in 0..p {
            let x_res = &node.x_residue + &step * BigUint::from(digit);
            let child = match self.certify(&x_res, child_level)? {
                Certification::Constant { t, method } => ClassNode {
                    a0: node.a0,
                    level: child_level,
                    x_residue: x_res,
                    status: NodeStatus::ConstantCertified,
                    t: ValBound::Exact(t),
                    method: Some(method),
                    children: Vec::new(),
                },
                Certification::Inconclusive { center_valuation } => ClassNode {
                    a0: node.a0,
                    level: child_level,
                    x_residue: x_res,
                    status: NodeStatus::Active,
                    t: center_valuation,
                    method: None,
                    children: Vec::new(),
                },
            };
            match child.status {
                NodeStatus::ConstantCertified => {
                    if let ValBound::Exact(t) = child.t {
                        constant_ts.push(t);
                    }
                }
                _ => active_centers.push(child.t),
            }
            children.push(child);
        }
        let shape = SplitShape {
            a0: node.a0,
            parent_level: node.level,
            parent_x_residue: node.x_residue.clone(),
            constant_count: constant_ts.len(),
            active_count: active_centers.len(),
            constant_ts,
            active_centers,
        };
        Ok((children, shape))
    }

    fn grow(&self, node: &mut ClassNode, depth: u32, splits: &mut Vec<SplitShape>) -> Result<()> {
        if node.status != NodeStatus::Active {
            return Ok(());
        }
        if node.level >= depth {
            node.status = NodeStatus::DepthExhausted;
            return Ok(());
        }
        let (children, shape) = self.expand(node)?;
        splits.push(shape);
        node.children = children;
        for child in &mut node.children {
            self.grow(child, depth, splits)?;
        }
        Ok(())
    }
}

/// Standalone two-tier constancy check of the class described by `ball`
/// (a ball in the variable `x`) for the branch function `f`.
pub fn certify_constant(f: &StirlingExpSum, ball: &Ball, taylor_orders: u32) -> Result<Certification> {
    if ball.prime() != f.prime() {
        return Err(Error::MixedPrimes(f.prime(), ball.prime()));
    }
    let ctx = TreeContext::from_sum(f.clone(), taylor_orders)?;
    ctx.certify(ball.center(), ball.radius_exponent())
}

/// Splits a non-constant node into its `p` subclasses, certifying each.
/// Returns the children together with the shape of the split.
pub fn expand_node(
    f: &StirlingExpSum,
    node: &ClassNode,
    taylor_orders: u32,
) -> Result<(Vec<ClassNode>, SplitShape)> {
    let ctx = TreeContext::from_sum(f.clone(), taylor_orders)?;
    ctx.expand(node)
}

fn default_precision_for(depth: u32) -> u32 {
    (3 * depth + 48).max(72)
}

/// Builds the full classification tree for `(p, k)` down to `depth` levels.
///
/// `precision` overrides the working precision (digits of `p`); by default
/// it grows with the depth and is raised automatically (and the build
/// retried) if a certification step runs out of digits.
pub fn build_tree(p: u64, k: u64, depth: u32, precision: Option<u32>) -> Result<TreeReport> {
    crate::padic::require_prime(p)?;
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    if depth == 0 {
        return Err(Error::Domain("depth must be at least 1".into()));
    }
    let mut w = precision.unwrap_or_else(|| default_precision_for(depth));
    loop {
        match build_once(p, k, depth, w, DEFAULT_TAYLOR_ORDERS) {
            Ok(report) => return Ok(report),
            Err(Error::Precision(msg)) if w < MAX_PRECISION => {
                let _ = msg;
                w = (w * 2).min(MAX_PRECISION);
            }
            Err(e) => return Err(e),
        }
    }
}

fn build_once(p: u64, k: u64, depth: u32, w: u32, taylor_orders: u32) -> Result<TreeReport> {
    let step = step_for(p);
    let mut roots = Vec::with_capacity(step as usize);
    let mut splits = Vec::new();
    let mut contexts = Vec::with_capacity(step as usize);
    for a0 in 0..step {
        let ctx = TreeContext::create(p, k, a0, w, taylor_orders)?;
        let mut root = match ctx.certify(&BigUint::zero(), 0)? {
            Certification::Constant { t, method } => ClassNode {
                a0,
                level: 0,
                x_residue: BigUint::zero(),
                status: NodeStatus::ConstantCertified,
                t: ValBound::Exact(t),
                method: Some(method),
                children: Vec::new(),
            },
            Certification::Inconclusive { center_valuation } => ClassNode {
                a0,
                level: 0,
                x_residue: BigUint::zero(),
                status: NodeStatus::Active,
                t: center_valuation,
                method: None,
                children: Vec::new(),
            },
        };
        ctx.grow(&mut root, depth, &mut splits)?;
        roots.push(root);
        contexts.push(ctx);
    }
    splits.sort_by_key(|s| (s.parent_level, s.a0));

    // Active counts per level (depth-exhausted leaves count as active).
    let mut counts = vec![0usize; depth as usize + 1];
    fn count_active(node: &ClassNode, counts: &mut [usize]) {
        if node.status != NodeStatus::ConstantCertified {
            counts[node.level as usize] += 1;
        }
        for c in &node.children {
            count_active(c, counts);
        }
    }
    for root in &roots {
        count_active(root, &mut counts);
    }
    let level_stats: Vec<LevelStats> = counts
        .iter()
        .enumerate()
        .map(|(level, &active_count)| LevelStats {
            level: level as u32,
            active_count,
        })
        .collect();
    let mu = counts[depth as usize];

    // Stabilization: counts settled to the final value, and every split from
    // that level onward of the settled (p−1 constants, 1 active) shape.
    let counts_from = {
        let mut s = depth;
        while s > 0 && counts[s as usize - 1] == mu {
            s -= 1;
        }
        s
    };
    let shape_from = splits
        .iter()
        .filter(|s| !s.is_settled_shape(p))
        .map(|s| s.parent_level + 1)
        .max()
        .unwrap_or(0);
    let settled_from = counts_from.max(shape_from);
    // μ = 0 means every class is certified constant: the tree is a finished
    // proof and no deeper level can alter it, so no observation window is
    // needed.  Otherwise the settled shape must persist for the window.
    let stabilized = mu == 0 || settled_from + STABLE_WINDOW <= depth;
    let stabilization_level = if stabilized { Some(settled_from) } else { None };
    let m0_observed = stabilization_level.map(|s| s + 1 + M0_SAFETY_MARGIN);

    let mut notes = Vec::new();
    if !stabilized {
        notes.push(format!(
            "shape not yet settled for {STABLE_WINDOW} consecutive levels at depth {depth} \
             (first candidate level {settled_from}); deepen the tree"
        ));
    }

    // Chains: follow each active node at the stabilization level downward.
    let mut chains = Vec::new();
    if let Some(s_star) = stabilization_level {
        let mut starts: Vec<&ClassNode> = Vec::new();
        fn collect_at<'a>(node: &'a ClassNode, level: u32, out: &mut Vec<&'a ClassNode>) {
            if node.level == level {
                if node.status != NodeStatus::ConstantCertified {
                    out.push(node);
                }
                return;
            }
            for c in &node.children {
                collect_at(c, level, out);
            }
        }
        for root in &roots {
            collect_at(root, s_star, &mut starts);
        }
        for start in starts {
            let ctx = &contexts[start.a0 as usize];
            chains.push(follow_chain(ctx, start, depth, m0_observed)?);
        }
        chains.sort_by_key(|c| (c.a0, c.x0.residue().clone()));
    }

    Ok(TreeReport {
        p,
        k,
        depth,
        precision: w,
        mu,
        stabilization_level,
        m0_observed,
        chains,
        level_stats,
        splits,
        roots,
        notes,
    })
}

fn follow_chain(
    ctx: &TreeContext,
    start: &ClassNode,
    depth: u32,
    m0_observed: Option<u32>,
) -> Result<ChainReport> {
    let p = ctx.p();
    let step = BigUint::from(step_for(p));
    let mut node = start;
    let mut levels = Vec::new();
    let mut notes = Vec::new();
    loop {
        if node.children.is_empty() {
            break;
        }
        let mut least: Option<u32> = None;
        let mut next_active: Option<&ClassNode> = None;
        for child in &node.children {
            match child.status {
                NodeStatus::ConstantCertified => {
                    if let ValBound::Exact(t) = child.t {
                        least = Some(least.map_or(t, |m| m.min(t)));
                    }
                }
                _ => {
                    if next_active.is_some() {
                        return Err(Error::Inconsistent(format!(
                            "chain at a0 = {} level {} has multiple active children \
                             past stabilization",
                            node.a0, node.level
                        )));
                    }
                    next_active = Some(child);
                }
            }
        }
        let least = least.ok_or_else(|| {
            Error::Inconsistent(format!(
                "chain at a0 = {} level {} has no constant children past stabilization",
                node.a0, node.level
            ))
        })?;
        levels.push(ChainLevel {
            level: node.level,
            m: node.level + 1,
            n_modulus: &step * pow_p(p, node.level),
            x_residue: node.x_residue.clone(),
            least_valuation: least,
        });
        node = next_active.ok_or_else(|| {
            Error::Inconsistent(format!(
                "chain at a0 = {} level {} has no active child past stabilization",
                node.a0, node.level
            ))
        })?;
    }

    let x0 = PadicInt::from_residue(p, depth, node.x_residue.clone());

    // Slope from consecutive least-valuation differences.
    let diffs: Vec<i64> = levels
        .windows(2)
        .map(|w| w[1].least_valuation as i64 - w[0].least_valuation as i64)
        .collect();
    let l = if !diffs.is_empty() && diffs.iter().all(|&d| d == diffs[0]) {
        if diffs[0] < 1 {
            return Err(Error::Inconsistent(format!(
                "least valuation fails to grow along the chain at a0 = {} (step {})",
                start.a0, diffs[0]
            )));
        }
        Some(diffs[0] as u32)
    } else {
        if !diffs.is_empty() {
            notes.push(format!(
                "least-valuation differences not yet constant: {diffs:?}"
            ));
        }
        None
    };

    // Slope as the multiplicity of the zero: least non-vanishing derivative
    // order at a refinement of x0.  The zero has to be resolved to more
    // digits than the derivative valuations in play, so descend somewhat
    // deeper than the tree went before reading.
    let l_multiplicity = match l {
        Some(l_hint) => read_chain_multiplicity(ctx, &x0, &levels, l_hint, &mut notes),
        None => {
            notes.push("multiplicity reading skipped: slope not yet constant".to_string());
            None
        }
    };
    let methods_agree = match (l, l_multiplicity) {
        (Some(a), Some(b)) => a == b,
        _ => false,
    };

    // Affine offset α at m0: least_valuation(m) = α + l·(m − m0).
    let alpha = match (l, m0_observed) {
        (Some(l), Some(m0)) => levels.first().map(|first| {
            first.least_valuation as i64 + l as i64 * (m0 as i64 - first.m as i64)
        }),
        _ => None,
    };

    Ok(ChainReport {
        a0: start.a0,
        x0,
        alpha,
        l,
        l_multiplicity,
        methods_agree,
        levels,
        notes,
    })
}

/// Slope `l` of the affine law from a chain's least valuations.
///
/// Requires the chain to be explored for at least 4 levels; the consecutive
/// least-valuation differences must agree, and their common value is `l`.
pub fn slope_estimate(chain: &ChainReport) -> Result<u32> {
    if chain.levels.len() < 4 {
        return Err(Error::NotStabilized(format!(
            "chain at a0 = {} explored for only {} levels; need at least 4",
            chain.a0,
            chain.levels.len()
        )));
    }
    let vals: Vec<i64> = chain
        .levels
        .iter()
        .map(|r| r.least_valuation as i64)
        .collect();
    slope_from_probe_valuations(&vals)
}

/// Refines the chain's zero a little past the tree depth and reads off the
/// multiplicity as the least non-vanishing derivative order there.
///
/// Resolution matters: with the zero known to `T` digits, derivative orders
/// below the multiplicity evaluate to Taylor remainders of valuation about
/// `T`, while the order-`l` derivative has a fixed valuation on the order of
/// the chain's least valuations.  Descending to
/// `T ≥ last least valuation + 16` separates the two scales.
fn read_chain_multiplicity(
    ctx: &TreeContext,
    x0: &PadicInt,
    levels: &[ChainLevel],
    l_hint: u32,
    notes: &mut Vec<String>,
) -> Option<u32> {
    let p = ctx.p();
    let depth = x0.precision();
    let last_least = levels.last().map(|r| r.least_valuation).unwrap_or(0);
    let target = depth.max(last_least + 16);
    let x_refined = if target > depth {
        let w2_est =
            last_least as i64 + l_hint.max(1) as i64 * (target as i64 - depth as i64 + 8) + 48;
        let w2 = (w2_est.max(ctx.w as i64) as u32).min(MAX_PRECISION);
        let refined = ModEvaluator::new(p, ctx.f.k(), w2).and_then(|eval| {
            let mut read = |x: &BigUint| -> Result<ValBound> {
                Ok(valuation_of_residue(p, w2, &eval.t_p(&ctx.f.x_to_n(x))))
            };
            descend_max(p, x0.residue().clone(), depth, target, &mut read)
        });
        match refined {
            Ok(x) => PadicInt::from_residue(p, target, x),
            Err(e) => {
                notes.push(format!("zero refinement for the multiplicity failed: {e}"));
                x0.clone()
            }
        }
    } else {
        x0.clone()
    };
    let max_order = ctx.f.sum().len() as u32;
    match multiplicity_at_zero(ctx.f.sum(), &x_refined, max_order) {
        Ok(Multiplicity::Exact(m)) => Some(m),
        Ok(Multiplicity::AtLeast(b)) => {
            notes.push(format!(
                "derivative reading only bounds the multiplicity below by {b}"
            ));
            None
        }
        Err(e) => {
            notes.push(format!("derivative multiplicity reading failed: {e}"));
            None
        }
    }
}

/// Builds the tree deep enough that the settled shape is observed for
/// `levels_past` levels past the stabilization level.
pub fn build_past_stabilization(
    p: u64,
    k: u64,
    levels_past: u32,
    precision: Option<u32>,
) -> Result<TreeReport> {
    let want = levels_past.max(STABLE_WINDOW);
    let mut depth = want + 4;
    loop {
        let report = build_tree(p, k, depth, precision)?;
        match report.stabilization_level {
            Some(s) => {
                if depth >= s + want {
                    return Ok(report);
                }
                depth = s + want;
            }
            None => {
                depth += 4;
                if depth > 64 {
                    return Err(Error::NotStabilized(format!(
                        "tree for p = {p}, k = {k} did not settle within 64 levels"
                    )));
                }
            }
        }
    }
}

/// Max-valuation descent: starting from `x ≡ start (mod p^level)`, repeatedly
/// selects the child residue on which the function valuation is strictly
/// largest, until `target` digits of the zero are pinned down.
fn descend_max(
    p: u64,
    mut x: BigUint,
    mut level: u32,
    target: u32,
    eval: &mut dyn FnMut(&BigUint) -> Result<ValBound>,
) -> Result<BigUint> {
    while level < target {
        let step = pow_p(p, level);
        let mut readings = Vec::with_capacity(p as usize);
        for digit in 0..p {
            let candidate = &x + &step * BigUint::from(digit);
            readings.push((candidate.clone(), eval(&candidate)?));
        }
        let max_lower = readings.iter().map(|(_, v)| v.lower()).max().unwrap();
        let mut best: Vec<&(BigUint, ValBound)> = readings
            .iter()
            .filter(|(_, v)| v.lower() == max_lower)
            .collect();
        if best.len() != 1 {
            return Err(Error::Precision(format!(
                "descent ambiguous at level {level}: {} children share the top \
                 valuation reading {max_lower}; raise the working precision",
                best.len()
            )));
        }
        let (chosen, _) = best.pop().unwrap();
        x = chosen.clone();
        level += 1;
    }
    Ok(x)
}

/// Refines a chain's zero to `target_precision` digits by max-valuation
/// descent with exact modular reads.
pub fn refine_zero(
    f: &StirlingExpSum,
    chain: &ChainReport,
    target_precision: u32,
) -> Result<PadicInt> {
    let p = f.prime();
    if p != chain.x0.prime() {
        return Err(Error::MixedPrimes(p, chain.x0.prime()));
    }
    let known = chain.x0.precision();
    if target_precision <= known {
        return chain.x0.truncate(target_precision);
    }
    // Working precision: along the descent the valuation at the best child
    // grows like α + l·m, so leave headroom beyond the final value.
    let l_guess = chain.l.unwrap_or_else(|| f.k().min(64) as u32) as i64;
    let base = chain
        .levels
        .last()
        .map(|r| r.least_valuation as i64)
        .unwrap_or(0);
    let w2_est = base + l_guess * (target_precision as i64) + 48;
    let w2 = (w2_est.max(72) as u32).min(MAX_PRECISION);
    let eval = ModEvaluator::new(p, f.k(), w2)?;
    let mut read = |x: &BigUint| -> Result<ValBound> {
        Ok(valuation_of_residue(p, w2, &eval.t_p(&f.x_to_n(x))))
    };
    let x = descend_max(
        p,
        chain.x0.residue().clone(),
        known,
        target_precision,
        &mut read,
    )?;
    Ok(PadicInt::from_residue(p, target_precision, x))
}

/// Max-valuation descent for a general exponential sum, starting from a ball
/// in the variable `x` and reading values through the exact evaluator at
/// non-negative integer points.
pub fn descend_zero(f: &ExpSum, start: &Ball, target_precision: u32) -> Result<PadicInt> {
    let p = start.prime();
    if p != f.prime() {
        return Err(Error::MixedPrimes(f.prime(), p));
    }
    let mut read = |x: &BigUint| -> Result<ValBound> { Ok(f.eval_nat(x)?.valuation()) };
    let x = descend_max(
        p,
        start.center().clone(),
        start.radius_exponent(),
        target_precision,
        &mut read,
    )?;
    Ok(PadicInt::from_residue(p, target_precision, x))
}

/// Reads the slope of the valuation law near a zero by probing: for
/// `s = s_lo, …, s_hi` evaluates the function at `x0 + p^s` and requires the
/// valuations to advance by a constant step `l` per level.
pub fn slope_at_zero_stirling(
    f: &StirlingExpSum,
    x0: &PadicInt,
    s_lo: u32,
    s_hi: u32,
    precision: u32,
) -> Result<u32> {
    let p = f.prime();
    if p != x0.prime() {
        return Err(Error::MixedPrimes(p, x0.prime()));
    }
    if s_hi >= x0.precision() {
        return Err(Error::Domain(format!(
            "probe offset p^{s_hi} is below the resolution of x0 (known to {} digits)",
            x0.precision()
        )));
    }
    if s_lo >= s_hi {
        return Err(Error::Domain("need at least two probe levels".into()));
    }
    let eval = ModEvaluator::new(p, f.k(), precision)?;
    let mut vals = Vec::new();
    for s in s_lo..=s_hi {
        let x = x0.residue() + pow_p(p, s);
        match valuation_of_residue(p, precision, &eval.t_p(&f.x_to_n(&x))) {
            ValBound::Exact(v) => vals.push(v as i64),
            ValBound::AtLeast(_) => {
                return Err(Error::Precision(format!(
                    "probe at s = {s} vanished modulo p^{precision}; raise the precision"
                )))
            }
        }
    }
    slope_from_probe_valuations(&vals)
}

/// Probe-based slope reading for a general exponential sum (series route).
pub fn slope_at_zero(f: &ExpSum, x0: &PadicInt, s_lo: u32, s_hi: u32) -> Result<u32> {
    if f.prime() != x0.prime() {
        return Err(Error::MixedPrimes(f.prime(), x0.prime()));
    }
    if s_hi >= x0.precision() {
        return Err(Error::Domain(format!(
            "probe offset p^{s_hi} is below the resolution of x0 (known to {} digits)",
            x0.precision()
        )));
    }
    if s_lo >= s_hi {
        return Err(Error::Domain("need at least two probe levels".into()));
    }
    let p = f.prime();
    let mut vals = Vec::new();
    for s in s_lo..=s_hi {
        let x = x0.residue() + pow_p(p, s);
        let value = f.eval_nat(&x)?;
        match value.valuation() {
            ValBound::Exact(v) => vals.push(v as i64),
            ValBound::AtLeast(b) => {
                return Err(Error::Precision(format!(
                    "probe at s = {s} only bounded below by {b}; raise the precision"
                )))
            }
        }
    }
    slope_from_probe_valuations(&vals)
}

fn slope_from_probe_valuations(vals: &[i64]) -> Result<u32> {
    let diffs: Vec<i64> = vals.windows(2).map(|w| w[1] - w[0]).collect();
    if diffs.is_empty() {
        return Err(Error::Domain("need at least two probe levels".into()));
    }
    if !diffs.iter().all(|&d| d == diffs[0]) {
        return Err(Error::NotStabilized(format!(
            "probe valuations {vals:?} do not advance by a constant step"
        )));
    }
    if diffs[0] < 1 {
        return Err(Error::Inconsistent(format!(
            "probe valuations {vals:?} do not grow toward the zero"
        )));
    }
    Ok(diffs[0] as u32)
}

/// A statement about `v_p(S(n, k))` on one congruence class of `n`.
#[derive(Debug, Clone)]
pub enum StatementStatus {
    /// `v_p(S(n, k)) = valuation` for every `n ≥ k` in the class.
    Constant { valuation: u64 },
    /// `v_p(S(n, k)) = valuation` for every `n` in the class with
    /// `n > exception_threshold` (small `n` may differ because the partial
    /// sum only matches `k!·S(n, k)` up to an error of valuation ≥ `n`).
    AlmostConstant {
        valuation: u64,
        exception_threshold: u64,
    },
    /// The class is essentially non-constant: it hosts a zero of the branch
    /// function, so the valuation grows without bound along a subsequence.
    NonConstant { alpha: Option<i64>, l: Option<u32> },
}

/// One classified congruence class of `n`.
#[derive(Debug, Clone)]
pub struct StirlingStatement {
    pub n_residue: BigUint,
    pub n_modulus: BigUint,
    pub status: StatementStatus,
}

/// The tree's findings, translated from the partial sums `T_p` back to the
/// Stirling numbers `S(n, k)` themselves.
#[derive(Debug, Clone)]
pub struct StirlingStatements {
    pub p: u64,
    pub k: u64,
    /// The global shift between the two scales: `v_p(k!)`.
    pub vp_k_factorial: u64,
    pub statements: Vec<StirlingStatement>,
    pub notes: Vec<String>,
}

/// Translates a tree report into statements about `v_p(S(n, k))`.
///
/// On a constant class of the partial sum with valuation `t`, the identity
/// `k!·S(n, k) = T_p(n, k) + O(p^n)` pins `v_p(k!·S(n, k)) = t` for all
/// `n > t` in the class, hence `v_p(S(n, k)) = t − v_p(k!)`.  When `p > k`
/// the partial sum is exactly `k!·S(n, k)` and there are no exceptional `n`.
pub fn to_stirling_statements(report: &TreeReport) -> Result<StirlingStatements> {
    let p = report.p;
    let k = report.k;
    let vkf = vp_factorial(p, k)?;
    let mut notes = Vec::new();
    if k == 1 {
        notes.push(
            "k = 1: S(n, 1) = 1 for all n ≥ 1, so v_p(S(n, 1)) = 0 and the tree adds nothing"
                .to_string(),
        );
        return Ok(StirlingStatements {
            p,
            k,
            vp_k_factorial: vkf,
            statements: Vec::new(),
            notes,
        });
    }
    let exact = p > k; // partial sum equals k!·S(n,k) exactly, no tail
    let mut statements = Vec::new();
    fn walk(
        node: &ClassNode,
        p: u64,
        vkf: u64,
        exact: bool,
        statements: &mut Vec<StirlingStatement>,
    ) -> Result<()> {
        match node.status {
            NodeStatus::ConstantCertified => {
                let t = match node.t {
                    ValBound::Exact(t) => t as u64,
                    ValBound::AtLeast(_) => {
                        return Err(Error::Inconsistent(
                            "constant-certified node without exact valuation".into(),
                        ))
                    }
                };
                if t < vkf {
                    return Err(Error::Inconsistent(format!(
                        "certified valuation {t} below v_p(k!) = {vkf}"
                    )));
                }
                let (n_residue, n_modulus) = node.n_class(p);
                let status = if exact {
                    StatementStatus::Constant {
                        valuation: t - vkf,
                    }
                } else {
                    StatementStatus::AlmostConstant {
                        valuation: t - vkf,
                        exception_threshold: t,
                    }
                };
                statements.push(StirlingStatement {
                    n_residue,
                    n_modulus,
                    status,
                });
            }
            NodeStatus::Active => {
                for child in &node.children {
                    walk(child, p, vkf, exact, statements)?;
                }
            }
            NodeStatus::DepthExhausted => {} // handled through the chains
        }
        Ok(())
    }
    for root in &report.roots {
        walk(root, p, vkf, exact, &mut statements)?;
    }
    for chain in &report.chains {
        let step = BigUint::from(report.step());
        let n_modulus = &step * chain.x0.modulus();
        let n_residue = BigUint::from(chain.a0) + &step * chain.x0.residue();
        statements.push(StirlingStatement {
            n_residue,
            n_modulus,
            status: StatementStatus::NonConstant {
                alpha: chain.alpha.map(|a| a - vkf as i64),
                l: chain.l,
            },
        });
    }
    if report.stabilization_level.is_none() {
        notes.push("tree not stabilized: non-constant classes are provisional".to_string());
    }
    if !exact {
        notes.push(format!(
            "p ≤ k: each constant class is valid for n above its exception threshold \
             (tail of the partial-sum identity has valuation ≥ n, v_p(k!) = {vkf})"
        ));
    }
    Ok(StirlingStatements {
        p,
        k,
        vp_k_factorial: vkf,
        statements,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::{FromPrimitive, One};

    fn node_is_constant_with(report: &TreeReport, n: u64, t_expected: u64) -> bool {
        let node = report.classify_n(&BigUint::from(n)).unwrap();
        node.status == NodeStatus::ConstantCertified
            && matches!(node.t, ValBound::Exact(t) if t as u64 == t_expected)
    }

    #[test]
    fn k1_tree_is_all_constant() {
        // T_p(n, 1) = 1 identically, so every root certifies with t = 0.
        for p in [2u64, 3, 7] {
            let report = build_tree(p, 1, 3, None).unwrap();
            assert_eq!(report.mu, 0, "p = {p}");
            assert_eq!(report.stabilization_level, Some(0));
            for root in &report.roots {
                assert_eq!(root.status, NodeStatus::ConstantCertified);
                assert!(matches!(root.t, ValBound::Exact(0)));
            }
        }
    }

    #[test]
    fn k2_p2_root_certifies_t1() {
        // T_2(n, 2) = −2·1^n = −2: constant valuation 1 on both branches,
        // i.e. v_2(S(n, 2)) = 0 for n > 1 after removing v_2(2!) = 1.
        let report = build_tree(2, 2, 3, None).unwrap();
        assert_eq!(report.mu, 0);
        for root in &report.roots {
            assert_eq!(root.status, NodeStatus::ConstantCertified);
            assert!(matches!(root.t, ValBound::Exact(1)));
            assert_eq!(root.method, Some(CertMethod::Lte));
        }
        let st = to_stirling_statements(&report).unwrap();
        assert_eq!(st.vp_k_factorial, 1);
        assert_eq!(st.statements.len(), 2);
        for s in &st.statements {
            match s.status {
                StatementStatus::AlmostConstant {
                    valuation,
                    exception_threshold,
                } => {
                    assert_eq!(valuation, 0);
                    assert_eq!(exception_threshold, 1);
                }
                _ => panic!("expected almost-constant statement"),
            }
        }
    }

    #[test]
    fn certify_follows_seven_three_example() {
        // Branch a0 = 1 of (p, k) = (7, 3): the whole branch contains the
        // exact zero n = 1, so level 0 cannot certify; the subclass
        // x ≡ 1 (mod 7) (containing n = 7, t = v_7(3!·S(7, 3)) = 1)
        // certifies at level 1 since 1 < 1 + 1 + 0.
        let f = StirlingExpSum::new(7, 3, 1, 64).unwrap();
        let whole =
            certify_constant(&f, &Ball::whole(7).unwrap(), DEFAULT_TAYLOR_ORDERS).unwrap();
        assert!(!whole.is_constant());
        let ball = Ball::new(7, &num_bigint::BigInt::one(), 1).unwrap();
        match certify_constant(&f, &ball, DEFAULT_TAYLOR_ORDERS).unwrap() {
            Certification::Constant { t, method } => {
                assert_eq!(t, 1);
                assert_eq!(method, CertMethod::Lte);
            }
            other => panic!("expected constant certificate, got {other:?}"),
        }
    }

    #[test]
    fn expand_constant_node_is_an_error() {
        let report = build_tree(2, 2, 2, None).unwrap();
        let f = StirlingExpSum::new(2, 2, 0, report.precision).unwrap();
        let err = expand_node(&f, &report.roots[0], DEFAULT_TAYLOR_ORDERS).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn p2_k5_structure_matches_known_values() {
        // (p, k) = (2, 5): μ = 2 zeros, stabilization at the root level,
        // and the constant classes certify t = 4 on the branch away from the
        // zeros, matching v_2(S(n, 5)) = 1 for n ≡ 0 (mod 4), n > 4
        // (v_2(5!) = 3).
        let report = build_past_stabilization(2, 5, 6, None).unwrap();
        assert_eq!(report.mu, 2);
        assert_eq!(report.stabilization_level, Some(0));
        assert_eq!(report.m0_observed, Some(3));
        assert_eq!(report.chains.len(), 2);
        for chain in &report.chains {
            assert_eq!(chain.l, Some(1));
            assert_eq!(chain.l_multiplicity, Some(1));
            assert!(chain.methods_agree);
            assert_eq!(chain.multiplicity().unwrap(), 1);
        }
        // n = 8 ≡ 0 (mod 4): S(8, 5) = 1050 = 2·3·5²·7, v_2 = 1, so the
        // partial-sum valuation is 1 + 3 = 4.
        assert!(node_is_constant_with(&report, 8, 4));
    }

    #[test]
    fn odd_prime_cells_settle_with_unit_slopes() {
        // Known structure: (5, 3) μ = 3, (7, 3) μ = 2, (7, 5) μ = 4,
        // (11, 4) μ = 4, all with slope 1 everywhere.
        for (p, k, mu) in [(5u64, 3u64, 3usize), (7, 3, 2), (7, 5, 4), (11, 4, 4)] {
            let report = build_past_stabilization(p, k, 6, None).unwrap();
            assert_eq!(report.mu, mu, "(p, k) = ({p}, {k})");
            assert!(report.stabilization_level.is_some());
            assert_eq!(report.chains.len(), mu);
            for chain in &report.chains {
                assert_eq!(chain.multiplicity().unwrap(), 1, "(p, k) = ({p}, {k})");
                assert!(chain.alpha.is_some());
            }
            for split in &report.splits {
                if split.parent_level >= report.stabilization_level.unwrap() {
                    assert!(split.is_settled_shape(p));
                    assert!(split.constants_share_t());
                }
            }
        }
    }

    #[test]
    fn chain_least_valuations_follow_affine_law() {
        let report = build_past_stabilization(5, 3, 8, None).unwrap();
        let m0 = report.m0_observed.unwrap() as i64;
        for chain in &report.chains {
            let l = chain.l.unwrap() as i64;
            let alpha = chain.alpha.unwrap();
            for record in &chain.levels {
                assert_eq!(
                    record.least_valuation as i64,
                    alpha + l * (record.m as i64 - m0),
                    "a0 = {}",
                    chain.a0
                );
            }
        }
    }

    #[test]
    fn refine_zero_digits_are_stable() {
        // Deeper refinement must extend, not revise, the shallower digits,
        // and must agree with the tree's own chain residues.
        let report = build_past_stabilization(2, 5, 6, None).unwrap();
        let chain = &report.chains[0];
        let f = StirlingExpSum::new(2, 5, chain.a0, report.precision).unwrap();
        let z16 = refine_zero(&f, chain, 16).unwrap();
        let z24 = refine_zero(&f, chain, 24).unwrap();
        assert_eq!(z24.truncate(16).unwrap().residue(), z16.residue());
        let tree_res = chain
            .x0
            .truncate(chain.levels.last().unwrap().level + 1)
            .unwrap();
        assert_eq!(
            z16.truncate(tree_res.precision()).unwrap().residue(),
            tree_res.residue()
        );
    }

    #[test]
    fn probe_slope_matches_chain_slope() {
        let report = build_past_stabilization(7, 5, 6, None).unwrap();
        for chain in &report.chains {
            let f = StirlingExpSum::new(7, 5, chain.a0, report.precision).unwrap();
            let z = refine_zero(&f, chain, 14).unwrap();
            let l = slope_at_zero_stirling(&f, &z, 6, 10, 96).unwrap();
            assert_eq!(l, chain.l.unwrap());
        }
    }

    #[test]
    fn classify_covers_all_residues() {
        let report = build_past_stabilization(3, 4, 5, None).unwrap();
        let modulus = 2 * 3u64.pow(4);
        for r in 0..modulus {
            let node = report.classify_n(&BigUint::from_u64(r).unwrap()).unwrap();
            // The walk must land on a leaf of the class containing r.
            let (n_res, n_mod) = node.n_class(3);
            assert_eq!(BigUint::from(r) % &n_mod, n_res);
        }
    }

    #[test]
    fn statements_shift_by_vp_k_factorial() {
        let report = build_past_stabilization(2, 5, 6, None).unwrap();
        let st = to_stirling_statements(&report).unwrap();
        assert_eq!(st.vp_k_factorial, 3);
        // Every certified class must carry a consistent S-valuation; spot
        // check n = 8 → v_2(S(8,5)) = 1.
        let node = report.classify_n(&BigUint::from(8u32)).unwrap();
        let (n_res, n_mod) = node.n_class(2);
        let found = st
            .statements
            .iter()
            .find(|s| s.n_residue == n_res && s.n_modulus == n_mod)
            .expect("class of n = 8 present");
        match found.status {
            StatementStatus::AlmostConstant {
                valuation,
                exception_threshold,
            } => {
                assert_eq!(valuation, 1);
                assert!(exception_threshold < 8);
            }
            _ => panic!("expected almost-constant class"),
        }
    }

    #[test]
    fn taylor_tier_certifies_high_uniform_valuations() {
        // (p, k) = (2, 16): branches carry uniform partial-sum valuation far
        // above the tier-1 ceiling; without the Taylor tier the tree would
        // never settle.
        let report = build_past_stabilization(2, 16, 6, None).unwrap();
        assert_eq!(report.mu, 6);
        assert!(report
            .splits
            .iter()
            .flat_map(|s| s.constant_ts.iter())
            .any(|&t| t > 10));
        let taylor_used = report.splits.is_empty()
            || count_methods(&report.roots, CertMethod::Taylor) > 0;
        assert!(taylor_used, "expected at least one Taylor certificate");
    }

    fn count_methods(nodes: &[ClassNode], which: CertMethod) -> usize {
        nodes
            .iter()
            .map(|n| {
                let own = usize::from(n.method == Some(which));
                own + count_methods(&n.children, which)
            })
            .sum()
    }

    #[test]
    fn translation_table_moduli() {
        let report = build_tree(3, 4, 4, None).unwrap();
        let table = report.translation_table();
        assert_eq!(table.len(), 4);
        let (m, xm, nm) = &table[2];
        assert_eq!(*m, 3);
        assert_eq!(*xm, BigUint::from(9u32));
        assert_eq!(*nm, BigUint::from(18u32));
    }
}
