//! Finite clopen approximations of effectively closed classes.
//!
//! A [`ClopenClass`] of depth `d` is a set of length-`d` strings. It is stored as
//! a normalized binary trie in which a fully populated cylinder collapses to a
//! single `Full` leaf, so measures, densities and extendibility queries cost
//! time proportional to the trie rather than to the number of members.

use std::fmt::Write as _;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::bits::BitString;
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::schedule::Schedule;

/// Largest supported depth. Interior trie counts stay below `2^MAX_DEPTH` and
/// fit in `u128`; only a full class at the maximal depth needs a wider count.
pub const MAX_DEPTH: usize = 128;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Node {
    Empty,
    Full,
    Branch(Box<Branch>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Branch {
    count: u128,
    kids: [Node; 2],
}

fn pow2_big(k: usize) -> BigUint {
    BigUint::one() << k
}

impl Node {
    fn count_big(&self, level: usize, depth: usize) -> BigUint {
        match self {
            Node::Empty => BigUint::zero(),
            Node::Full => pow2_big(depth - level),
            Node::Branch(b) => BigUint::from(b.count),
        }
    }

    /// Member count below a node; callers never ask for a full root at depth 128.
    fn count(&self, level: usize, depth: usize) -> u128 {
        match self {
            Node::Empty => 0,
            Node::Full => 1u128 << (depth - level),
            Node::Branch(b) => b.count,
        }
    }

    fn join(k0: Node, k1: Node, level: usize, depth: usize) -> Node {
        match (&k0, &k1) {
            (Node::Empty, Node::Empty) => Node::Empty,
            (Node::Full, Node::Full) => Node::Full,
            _ => {
                let count = k0.count(level + 1, depth) + k1.count(level + 1, depth);
                Node::Branch(Box::new(Branch { count, kids: [k0, k1] }))
            }
        }
    }

    fn split(self) -> [Node; 2] {
        match self {
            Node::Empty => [Node::Empty, Node::Empty],
            Node::Full => [Node::Full, Node::Full],
            Node::Branch(b) => b.kids,
        }
    }

    fn kid(&self, bit: bool) -> Node {
        match self {
            Node::Branch(b) => b.kids[bit as usize].clone(),
            other => other.clone(),
        }
    }
}

/// Set all of `[path]` to `fill` (Full or Empty).
fn assign(node: Node, path: &BitString, i: usize, depth: usize, fill: &Node) -> Node {
    if i == path.len() {
        return fill.clone();
    }
    if node == *fill {
        return node;
    }
    let [mut k0, mut k1] = node.split();
    if path.bit(i) {
        k1 = assign(k1, path, i + 1, depth, fill);
    } else {
        k0 = assign(k0, path, i + 1, depth, fill);
    }
    Node::join(k0, k1, i, depth)
}

fn combine(a: &Node, b: &Node, level: usize, depth: usize, op: SetOp) -> Node {
    match (op, a, b) {
        (SetOp::Difference, Node::Empty, _) | (SetOp::Difference, _, Node::Full) => Node::Empty,
        (SetOp::Difference, x, Node::Empty) => x.clone(),
        (SetOp::Intersection, Node::Empty, _) | (SetOp::Intersection, _, Node::Empty) => {
            Node::Empty
        }
        (SetOp::Intersection, Node::Full, x) | (SetOp::Intersection, x, Node::Full) => x.clone(),
        (SetOp::Union, Node::Full, _) | (SetOp::Union, _, Node::Full) => Node::Full,
        (SetOp::Union, Node::Empty, x) | (SetOp::Union, x, Node::Empty) => x.clone(),
        _ => {
            let k0 = combine(&a.kid(false), &b.kid(false), level + 1, depth, op);
            let k1 = combine(&a.kid(true), &b.kid(true), level + 1, depth, op);
            Node::join(k0, k1, level, depth)
        }
    }
}

#[derive(Clone, Copy)]
enum SetOp {
    Union,
    Intersection,
    Difference,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ClopenClass {
    depth: usize,
    root: Node,
}

impl ClopenClass {
    pub fn empty(depth: usize) -> Result<Self> {
        check_depth(depth)?;
        Ok(ClopenClass {
            depth,
            root: Node::Empty,
        })
    }

    pub fn full(depth: usize) -> Result<Self> {
        check_depth(depth)?;
        Ok(ClopenClass {
            depth,
            root: Node::Full,
        })
    }

    /// Builds a class from its length-`depth` members, rejecting wrong lengths
    /// and duplicates.
    pub fn from_members<I>(depth: usize, members: I) -> Result<Self>
    where
        I: IntoIterator<Item = BitString>,
    {
        let mut class = ClopenClass::empty(depth)?;
        for (k, m) in members.into_iter().enumerate() {
            if m.len() != depth {
                return Err(Error::parse(k + 1, "wrong-length member"));
            }
            if class.contains(&m) {
                return Err(Error::parse(k + 1, "duplicate member"));
            }
            class.insert_cylinder(&m)?;
        }
        Ok(class)
    }

    /// Union of the cylinders `[σ]`, each `σ` of length at most `depth`.
    pub fn from_cylinders<'a, I>(depth: usize, cylinders: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a BitString>,
    {
        let mut class = ClopenClass::empty(depth)?;
        for c in cylinders {
            class.insert_cylinder(c)?;
        }
        Ok(class)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    fn check_len(&self, sigma: &BitString) -> Result<()> {
        if sigma.len() > self.depth {
            Err(Error::TooDeep {
                len: sigma.len(),
                depth: self.depth,
            })
        } else {
            Ok(())
        }
    }

    pub fn insert_cylinder(&mut self, sigma: &BitString) -> Result<()> {
        self.check_len(sigma)?;
        let root = std::mem::replace(&mut self.root, Node::Empty);
        self.root = assign(root, sigma, 0, self.depth, &Node::Full);
        Ok(())
    }

    /// Removes `[σ]` from the class.
    pub fn remove_cylinder(&mut self, sigma: &BitString) -> Result<()> {
        self.check_len(sigma)?;
        let root = std::mem::replace(&mut self.root, Node::Empty);
        self.root = assign(root, sigma, 0, self.depth, &Node::Empty);
        Ok(())
    }

    pub fn member_count(&self) -> BigUint {
        self.root.count_big(0, self.depth)
    }

    pub fn is_empty(&self) -> bool {
        self.root == Node::Empty
    }

    /// Lebesgue measure `|members| · 2^-depth`.
    pub fn measure(&self) -> Dyadic {
        Dyadic::new(self.member_count(), self.depth as u32)
    }

    pub fn contains(&self, member: &BitString) -> bool {
        member.len() == self.depth && self.is_extendible(member).unwrap_or(false)
    }

    /// The trie node for `[σ]`, or the Full/Empty leaf covering it.
    fn node_at(&self, sigma: &BitString) -> Result<&Node> {
        self.check_len(sigma)?;
        let mut node = &self.root;
        for b in sigma.iter() {
            match node {
                Node::Branch(br) => node = &br.kids[b as usize],
                leaf => return Ok(leaf),
            }
        }
        Ok(node)
    }

    /// Number of members having `σ` as a prefix.
    pub fn count_extending(&self, sigma: &BitString) -> Result<BigUint> {
        Ok(self.node_at(sigma)?.count_big(sigma.len(), self.depth))
    }

    pub fn is_extendible(&self, sigma: &BitString) -> Result<bool> {
        Ok(*self.node_at(sigma)? != Node::Empty)
    }

    /// `μ([σ] ∩ C) · 2^|σ|`.
    pub fn density(&self, sigma: &BitString) -> Result<Dyadic> {
        let count = self.count_extending(sigma)?;
        Ok(Dyadic::new(count, (self.depth - sigma.len()) as u32))
    }

    /// Number of strings of length `target` extending `σ` that are extendible.
    pub fn count_extendible_extensions(&self, sigma: &BitString, target: usize) -> Result<BigUint> {
        if target < sigma.len() || target > self.depth {
            return Err(Error::TooDeep {
                len: target,
                depth: self.depth,
            });
        }
        fn walk(node: &Node, level: usize, target: usize) -> BigUint {
            match node {
                Node::Empty => BigUint::zero(),
                _ if level == target => BigUint::one(),
                Node::Full => pow2_big(target - level),
                Node::Branch(b) => {
                    walk(&b.kids[0], level + 1, target) + walk(&b.kids[1], level + 1, target)
                }
            }
        }
        Ok(walk(self.node_at(sigma)?, sigma.len(), target))
    }

    /// Strings of length `len` whose cylinder meets the class without being
    /// contained in it, in lexicographic order. Every other extendible string of
    /// that length has density 1.
    pub fn partial_nodes_at(&self, len: usize) -> Vec<BitString> {
        let mut out = Vec::new();
        fn walk(node: &Node, path: &mut BitString, len: usize, out: &mut Vec<BitString>) {
            if let Node::Branch(b) = node {
                if path.len() == len {
                    out.push(path.clone());
                    return;
                }
                for bit in [false, true] {
                    path.push(bit);
                    walk(&b.kids[bit as usize], path, len, out);
                    pop(path);
                }
            }
        }
        if len <= self.depth {
            walk(&self.root, &mut BitString::empty(), len, &mut out);
        }
        out
    }

    /// Whether some extendible string of length `len` lies inside a full cylinder.
    pub fn has_full_cylinder_within(&self, len: usize) -> bool {
        fn walk(node: &Node, level: usize, len: usize) -> bool {
            match node {
                Node::Empty => false,
                Node::Full => level <= len,
                Node::Branch(b) => {
                    level < len && (walk(&b.kids[0], level + 1, len) || walk(&b.kids[1], level + 1, len))
                }
            }
        }
        walk(&self.root, 0, len)
    }

    /// All extendible strings of length `len`, in lexicographic order. The
    /// output is exponential in `len` for dense classes.
    pub fn extendible_at(&self, len: usize) -> Vec<BitString> {
        let mut out = Vec::new();
        let mut cursor = if len <= self.depth {
            self.least_extendible_from(&BitString::zeros(len))
        } else {
            None
        };
        while let Some(s) = cursor {
            cursor = s.successor().and_then(|n| self.least_extendible_from(&n));
            out.push(s);
        }
        out
    }

    /// The lexicographically least extendible string of length `|lo|` that is `≥ lo`.
    pub fn least_extendible_from(&self, lo: &BitString) -> Option<BitString> {
        if lo.len() > self.depth {
            return None;
        }
        fn search(node: &Node, path: &mut BitString, lo: &BitString, tight: bool) -> bool {
            let level = path.len();
            match node {
                Node::Empty => false,
                _ if level == lo.len() => true,
                Node::Full => {
                    for i in level..lo.len() {
                        path.push(tight && lo.bit(i));
                    }
                    true
                }
                Node::Branch(b) => {
                    let first = if tight { lo.bit(level) } else { false };
                    path.push(first);
                    if search(&b.kids[first as usize], path, lo, tight) {
                        return true;
                    }
                    pop(path);
                    if !first {
                        path.push(true);
                        if search(&b.kids[1], path, lo, false) {
                            return true;
                        }
                        pop(path);
                    }
                    false
                }
            }
        }
        let mut path = BitString::empty();
        search(&self.root, &mut path, lo, true).then_some(path)
    }

    /// The first `k` members extending `σ` in lexicographic order, as a class of
    /// the same depth.
    pub fn first_members_under(&self, sigma: &BitString, k: &BigUint) -> Result<ClopenClass> {
        self.check_len(sigma)?;
        let mut node = self.root.clone();
        for b in sigma.iter() {
            node = node.kid(b);
        }
        fn take(node: &Node, level: usize, depth: usize, k: &BigUint) -> Node {
            if *k >= node.count_big(level, depth) {
                return node.clone();
            }
            if k.is_zero() {
                return Node::Empty;
            }
            let k0 = node.kid(false);
            let k1 = node.kid(true);
            let left = k0.count_big(level + 1, depth);
            if *k <= left {
                Node::join(take(&k0, level + 1, depth, k), Node::Empty, level, depth)
            } else {
                let rest = k - &left;
                Node::join(k0, take(&k1, level + 1, depth, &rest), level, depth)
            }
        }
        let sub = take(&node, sigma.len(), self.depth, k);
        let mut root = sub;
        for i in (0..sigma.len()).rev() {
            root = if sigma.bit(i) {
                Node::join(Node::Empty, root, i, self.depth)
            } else {
                Node::join(root, Node::Empty, i, self.depth)
            };
        }
        Ok(ClopenClass {
            depth: self.depth,
            root,
        })
    }

    /// The prefix-free set of maximal cylinders making up the class, in lex order.
    pub fn cylinders(&self) -> Vec<BitString> {
        let mut out = Vec::new();
        fn walk(node: &Node, path: &mut BitString, out: &mut Vec<BitString>) {
            match node {
                Node::Empty => {}
                Node::Full => out.push(path.clone()),
                Node::Branch(b) => {
                    for bit in [false, true] {
                        path.push(bit);
                        walk(&b.kids[bit as usize], path, out);
                        pop(path);
                    }
                }
            }
        }
        walk(&self.root, &mut BitString::empty(), &mut out);
        out
    }

    /// Members in lexicographic order. Exponential for dense deep classes.
    pub fn members(&self) -> Vec<BitString> {
        self.extendible_at(self.depth)
    }

    fn same_depth(&self, other: &ClopenClass) -> Result<()> {
        if self.depth != other.depth {
            return Err(Error::Invariant(format!(
                "class depths differ ({} vs {})",
                self.depth, other.depth
            )));
        }
        Ok(())
    }

    fn combined(&self, other: &ClopenClass, op: SetOp) -> Result<ClopenClass> {
        self.same_depth(other)?;
        Ok(ClopenClass {
            depth: self.depth,
            root: combine(&self.root, &other.root, 0, self.depth, op),
        })
    }

    pub fn union(&self, other: &ClopenClass) -> Result<ClopenClass> {
        self.combined(other, SetOp::Union)
    }

    pub fn intersection(&self, other: &ClopenClass) -> Result<ClopenClass> {
        self.combined(other, SetOp::Intersection)
    }

    pub fn difference(&self, other: &ClopenClass) -> Result<ClopenClass> {
        self.combined(other, SetOp::Difference)
    }

    pub fn is_subset(&self, other: &ClopenClass) -> bool {
        self.depth == other.depth
            && combine(&self.root, &other.root, 0, self.depth, SetOp::Difference) == Node::Empty
    }

    /// The same set of infinite sequences described at a larger depth.
    pub fn refine(&self, depth: usize) -> Result<ClopenClass> {
        check_depth(depth)?;
        if depth < self.depth {
            return Err(Error::TooDeep {
                len: self.depth,
                depth,
            });
        }
        ClopenClass::from_cylinders(depth, &self.cylinders())
    }
}

fn pop(path: &mut BitString) {
    let len = path.len();
    *path = path.prefix(len - 1);
}

fn check_depth(depth: usize) -> Result<()> {
    if depth > MAX_DEPTH {
        Err(Error::DepthLimit(depth))
    } else {
        Ok(())
    }
}

/// Renders the class file format: `depth d`, then the maximal cylinders in
/// lex order. A full-length cylinder is written as the member itself; a
/// shorter one as its prefix followed by `*` (`-*` for the full class).
pub fn render_class(class: &ClopenClass) -> String {
    let mut out = format!("depth {}\n", class.depth);
    for c in class.cylinders() {
        if c.len() == class.depth {
            let _ = writeln!(out, "{}", c.to_token());
        } else {
            let _ = writeln!(out, "{}*", c.to_token());
        }
    }
    out
}

/// Parses the class file format, reporting 1-based line numbers. Members and
/// `prefix*` cylinders may be mixed but must not overlap.
pub fn parse_class(text: &str) -> Result<ClopenClass> {
    let mut lines = text.lines().enumerate();
    let depth = loop {
        match lines.next() {
            None => return Err(Error::parse(1, "missing depth header")),
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((i, l)) => {
                let rest = l
                    .trim()
                    .strip_prefix("depth")
                    .ok_or_else(|| Error::parse(i + 1, "expected \"depth d\""))?;
                let depth: usize = rest
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(i + 1, "invalid depth"))?;
                if depth > MAX_DEPTH {
                    return Err(Error::parse(i + 1, "depth exceeds 128"));
                }
                break depth;
            }
        }
    };
    let mut class = ClopenClass::empty(depth)?;
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (word, cylinder) = match line.strip_suffix('*') {
            Some(prefix) => (prefix, true),
            None => (line, false),
        };
        let sigma =
            BitString::parse(word).map_err(|_| Error::parse(i + 1, "invalid member string"))?;
        if sigma.len() > depth || (!cylinder && sigma.len() != depth) {
            return Err(Error::parse(i + 1, "wrong-length member"));
        }
        if !class.count_extending(&sigma)?.is_zero() {
            return Err(Error::parse(i + 1, "duplicate member"));
        }
        class.insert_cylinder(&sigma)?;
    }
    Ok(class)
}

/// A Π⁰₁-style approximation: equal-depth stages, each contained in the previous one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ApproxSequence {
    stages: Vec<ClopenClass>,
}

impl ApproxSequence {
    pub fn new(stages: Vec<ClopenClass>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::NotShrinking(0));
        }
        for (s, pair) in stages.windows(2).enumerate() {
            if !pair[1].is_subset(&pair[0]) {
                return Err(Error::NotShrinking(s + 1));
            }
        }
        Ok(ApproxSequence { stages })
    }

    pub fn single(class: ClopenClass) -> Self {
        ApproxSequence {
            stages: vec![class],
        }
    }

    pub fn stages(&self) -> &[ClopenClass] {
        &self.stages
    }

    /// Stage `s`, saturating at the last stage.
    pub fn stage(&self, s: usize) -> &ClopenClass {
        &self.stages[s.min(self.stages.len() - 1)]
    }

    pub fn last_index(&self) -> usize {
        self.stages.len() - 1
    }

    pub fn final_class(&self) -> &ClopenClass {
        self.stages.last().expect("non-empty")
    }

    pub fn depth(&self) -> usize {
        self.stages[0].depth()
    }
}

/// First failure of the extension property.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtensionFailure {
    pub level: usize,
    pub node: BitString,
    pub extensions: BigUint,
    pub required: BigUint,
}

/// First failure of the density property.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DensityFailure {
    pub level: usize,
    pub node: BitString,
    pub density: Dyadic,
    pub threshold: Dyadic,
}

fn level_bounds(sched: &Schedule, levels: usize, depth: usize) -> Result<Vec<usize>> {
    let bounds: Vec<usize> = (0..=levels)
        .map(|i| sched.code_len(i).map(|l| l as usize))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::Schedule(format!("schedule has fewer than {levels} blocks")))?;
    if bounds[levels] > depth {
        return Err(Error::TooDeep {
            len: bounds[levels],
            depth,
        });
    }
    Ok(bounds)
}

/// Checks that every extendible string of length `L(i)`, `i < levels`, has at
/// least `2^m(i)` extendible extensions of length `L(i+1)`. Returns the least
/// failure in (level, lexicographic) order.
pub fn verify_extension_property(
    class: &ClopenClass,
    sched: &Schedule,
    levels: usize,
) -> Result<Option<ExtensionFailure>> {
    let bounds = level_bounds(sched, levels, class.depth())?;
    for i in 0..levels {
        let required = pow2_big(sched.m(i).expect("bounded above") as usize);
        // strings inside a full cylinder have all 2^l(i) >= 2^m(i) extensions
        for node in class.partial_nodes_at(bounds[i]) {
            let extensions = class.count_extendible_extensions(&node, bounds[i + 1])?;
            if extensions < required {
                return Ok(Some(ExtensionFailure {
                    level: i,
                    node,
                    extensions,
                    required,
                }));
            }
        }
    }
    Ok(None)
}

/// Checks that every extendible string of length `L(i)`, `i < levels`, has
/// density at least `2^(m(i) - l(i))`.
pub fn verify_density_property(
    class: &ClopenClass,
    sched: &Schedule,
    levels: usize,
) -> Result<Option<DensityFailure>> {
    let bounds = level_bounds(sched, levels, class.depth())?;
    for (i, &bound) in bounds.iter().enumerate().take(levels) {
        let threshold = Dyadic::pow2(-(sched.overhead(i).expect("bounded above") as i64));
        for node in class.partial_nodes_at(bound) {
            let density = class.density(&node)?;
            if density < threshold {
                return Ok(Some(DensityFailure {
                    level: i,
                    node,
                    density,
                    threshold,
                }));
            }
        }
    }
    Ok(None)
}

/// One action of the pruning construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActRecord {
    pub level: usize,
    pub node: BitString,
    /// Measure of `[σ] ∩ (P − Q)` enumerated into `Q` by this action.
    pub removed: Dyadic,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PruneOutcome {
    pub pstar: ClopenClass,
    pub q: ClopenClass,
    pub trace: Vec<ActRecord>,
}

impl PruneOutcome {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("step,level,node,removed\n");
        for (k, act) in self.trace.iter().enumerate() {
            let _ = writeln!(out, "{k},{},{},{}", act.level, act.node.to_token(), act.removed);
        }
        out
    }
}

/// Removes from `P` every region where the density at a block boundary is too
/// low, yielding `P* = P − Q` with the extension property for the first
/// `levels` blocks.
///
/// A string `σ` of length `L(n)` requires attention when it is extendible in
/// `P − Q` and its `(P − Q)`-density is at most `2^(m(n) − l(n))`. The
/// construction repeatedly acts on the least such string (shorter first, then
/// lexicographic) by moving `[σ] ∩ (P − Q)` into `Q`, until nothing requires
/// attention.
pub fn prune(p: &ClopenClass, sched: &Schedule, levels: usize) -> Result<PruneOutcome> {
    let bounds = level_bounds(sched, levels, p.depth())?;
    let budget = sched.convergence_margin(levels, &p.measure())?;
    if !budget.within {
        return Err(Error::BudgetExhausted {
            partial_sum: budget.partial_sum,
            measure: p.measure(),
        });
    }
    let depth = p.depth();
    let overheads: Vec<u64> = (0..levels).map(|i| sched.overhead(i).expect("bounded")).collect();

    // count(σ) · 2^(|σ| - d) <= 2^-g  <=>  count <= 2^(d - |σ| - g)
    let needs_attention = |class: &ClopenClass, level: usize, node: &BitString| -> bool {
        let count = class.count_extending(node).expect("within depth");
        let e = depth as i64 - bounds[level] as i64 - overheads[level] as i64;
        !count.is_zero() && e >= 0 && count <= pow2_big(e as usize)
    };

    let mut current = p.clone();
    let mut trace = Vec::new();
    let mut act = |class: &mut ClopenClass, level: usize, node: &BitString| {
        let count = class.count_extending(node).expect("within depth");
        class.remove_cylinder(node).expect("within depth");
        trace.push(ActRecord {
            level,
            node: node.clone(),
            removed: Dyadic::new(count, depth as u32),
        });
    };

    for n in 0..levels {
        // Strings inside a full cylinder have density 1 > 2^-g and cannot require
        // attention; g >= 1 holds because the budget check passed.
        for node in current.partial_nodes_at(bounds[n]) {
            if !needs_attention(&current, n, &node) {
                continue;
            }
            act(&mut current, n, &node);
            // Acting lowers only the densities of ancestors, all of which precede
            // `node` in the scan order; settle them shortest first.
            let mut last = node;
            loop {
                let ancestor = (0..n)
                    .filter(|&j| bounds[j] < last.len())
                    .map(|j| (j, last.prefix(bounds[j])))
                    .find(|(j, a)| needs_attention(&current, *j, a));
                match ancestor {
                    Some((j, a)) => {
                        act(&mut current, j, &a);
                        last = a;
                    }
                    None => break,
                }
            }
        }
    }

    let q = p.difference(&current)?;
    Ok(PruneOutcome {
        pstar: current,
        q,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(s: &str) -> BitString {
        BitString::from(s)
    }

    fn class(depth: usize, members: &[&str]) -> ClopenClass {
        ClopenClass::from_members(depth, members.iter().map(|m| bs(m))).unwrap()
    }

    fn d(s: &str) -> Dyadic {
        s.parse().unwrap()
    }

    #[test]
    fn measure_examples() {
        assert_eq!(ClopenClass::full(3).unwrap().measure(), Dyadic::one());
        assert_eq!(ClopenClass::empty(3).unwrap().measure(), Dyadic::zero());
        assert_eq!(class(3, &["000", "001", "010"]).measure(), d("3/8"));
    }

    #[test]
    fn extendibility_examples() {
        let full = ClopenClass::full(3).unwrap();
        assert!(full.is_extendible(&bs("01")).unwrap());
        let c = class(3, &["000", "001"]);
        assert!(!c.is_extendible(&bs("1")).unwrap());
        assert!(c.is_extendible(&bs("00")).unwrap());
        assert!(matches!(
            c.is_extendible(&bs("0000")),
            Err(Error::TooDeep { len: 4, depth: 3 })
        ));
        let err = c.density(&bs("0000")).unwrap_err().to_string();
        assert!(err.starts_with("string deeper than class approximation"), "{err}");
    }

    #[test]
    fn density_examples() {
        let full = ClopenClass::full(4).unwrap();
        for s in ["", "1", "0110"] {
            assert_eq!(full.density(&bs(s)).unwrap(), Dyadic::one());
        }
        let c = class(2, &["00", "01"]);
        assert_eq!(c.density(&bs("0")).unwrap(), Dyadic::one());
        assert_eq!(c.density(&bs("1")).unwrap(), Dyadic::zero());
        // [1] ∩ C = {100}: one of the four length-3 extensions of 1
        let c = class(3, &["000", "001", "100"]);
        assert_eq!(c.density(&bs("1")).unwrap(), d("1/4"));
    }

    #[test]
    fn density_matches_enumeration() {
        let c = class(4, &["0000", "0011", "0100", "0101", "1110"]);
        for len in 0..=4 {
            for idx in 0..(1u128 << len) {
                let sigma = BitString::from_index(idx, len);
                let hits = c.members().iter().filter(|m| sigma.is_prefix_of(m)).count() as u64;
                let expected = Dyadic::from(hits).mul_pow2(len as i64 - 4);
                assert_eq!(c.density(&sigma).unwrap(), expected, "{sigma:?}");
            }
        }
    }

    #[test]
    fn set_operations() {
        let a = class(3, &["000", "001", "010", "111"]);
        let b = class(3, &["001", "010", "011"]);
        assert_eq!(a.intersection(&b).unwrap(), class(3, &["001", "010"]));
        assert_eq!(a.difference(&b).unwrap(), class(3, &["000", "111"]));
        assert_eq!(
            a.union(&b).unwrap(),
            class(3, &["000", "001", "010", "011", "111"])
        );
        assert!(class(3, &["001"]).is_subset(&a));
        assert!(!b.is_subset(&a));
        assert_eq!(a.cylinders(), vec![bs("00"), bs("010"), bs("111")]);
    }

    #[test]
    fn leftmost_search_and_prefix_take() {
        let c = class(3, &["001", "010", "110"]);
        assert_eq!(c.least_extendible_from(&bs("000")), Some(bs("001")));
        assert_eq!(c.least_extendible_from(&bs("011")), Some(bs("110")));
        assert_eq!(c.least_extendible_from(&bs("111")), None);
        assert_eq!(c.least_extendible_from(&bs("1")), Some(bs("1")));
        let full = ClopenClass::full(4).unwrap();
        assert_eq!(
            full.first_members_under(&bs("1"), &3u32.into()).unwrap(),
            class(4, &["1000", "1001", "1010"])
        );
        assert_eq!(c.first_members_under(&BitString::empty(), &2u32.into()).unwrap(), class(3, &["001", "010"]));
    }

    #[test]
    fn class_file_round_trip_and_errors() {
        let c = class(3, &["010", "000"]);
        let text = render_class(&c);
        assert_eq!(text, "depth 3\n000\n010\n");
        assert_eq!(parse_class(&text).unwrap(), c);
        let err = parse_class("depth 3\n000\n01\n").unwrap_err();
        assert_eq!(err.to_string(), "wrong-length member at line 3");
        let err = parse_class("depth 2\n00\n00\n").unwrap_err();
        assert_eq!(err.to_string(), "duplicate member at line 3");
        let err = parse_class("depth 3\n0*\n010\n").unwrap_err();
        assert_eq!(err.to_string(), "duplicate member at line 3");

        let mixed = class(3, &["000", "001", "010", "110"]);
        assert_eq!(render_class(&mixed), "depth 3\n00*\n010\n110\n");
        assert_eq!(parse_class("depth 3\n00*\n010\n110\n").unwrap(), mixed);
        let deep = ClopenClass::full(128).unwrap();
        assert_eq!(render_class(&deep), "depth 128\n-*\n");
        assert_eq!(parse_class(&render_class(&deep)).unwrap(), deep);
    }

    #[test]
    fn approximations_must_shrink() {
        let a = class(2, &["00", "01", "10"]);
        let b = class(2, &["00", "10"]);
        assert!(ApproxSequence::new(vec![a.clone(), b.clone()]).is_ok());
        assert!(matches!(
            ApproxSequence::new(vec![b, a]),
            Err(Error::NotShrinking(1))
        ));
    }

    fn custom(m: &[u64], l: &[u64]) -> Schedule {
        Schedule::custom(m.to_vec(), l.to_vec()).unwrap()
    }

    #[test]
    fn extension_property_examples() {
        let full = ClopenClass::full(6).unwrap();
        assert_eq!(
            verify_extension_property(&full, &custom(&[1, 1], &[3, 3]), 2).unwrap(),
            None
        );
        let c = class(2, &["00", "01", "10"]);
        let fail = verify_extension_property(&c, &custom(&[2], &[2]), 1)
            .unwrap()
            .unwrap();
        assert_eq!(fail.node, BitString::empty());
        assert_eq!((fail.extensions, fail.required), (3u32.into(), 4u32.into()));
    }

    #[test]
    fn density_property_examples() {
        let full = ClopenClass::full(6).unwrap();
        assert_eq!(
            verify_density_property(&full, &custom(&[1, 1], &[3, 3]), 2).unwrap(),
            None
        );
        let c = class(3, &["000", "001", "010", "011", "100"]);
        assert_eq!(c.density(&bs("1")).unwrap(), d("1/4"));
        assert!(c.density(&bs("1")).unwrap() >= Dyadic::pow2(1 - 3));
        assert!(c.density(&bs("1")).unwrap() < Dyadic::pow2(1 - 2));
        // with one level only λ sits on a block boundary: density 5/8 clears both 1/4 and 1/2
        assert_eq!(verify_density_property(&c, &custom(&[1], &[3]), 1).unwrap(), None);
        assert_eq!(verify_density_property(&c, &custom(&[1], &[2]), 1).unwrap(), None);
        // [0] plus one string under 1: λ clears 1/2 but the boundary string 10 does not
        let thin = class(4, &["0000", "0001", "0010", "0011", "0100", "0101", "0110", "0111", "1000"]);
        let fail = verify_density_property(&thin, &custom(&[1, 1], &[2, 2]), 2)
            .unwrap()
            .unwrap();
        assert_eq!((fail.level, fail.node.clone()), (1, bs("10")));
        assert_eq!(fail.density, d("1/4"));
        assert_eq!(fail.threshold, d("1/2"));
    }

    #[test]
    fn prune_full_class_needs_no_action() {
        let p = ClopenClass::full(2).unwrap();
        let out = prune(&p, &custom(&[1], &[2]), 1).unwrap();
        assert!(out.trace.is_empty());
        assert!(out.q.is_empty());
        assert_eq!(out.pstar, p);
    }

    #[test]
    fn prune_full_depth_six() {
        let p = ClopenClass::full(6).unwrap();
        let sched = custom(&[1, 1], &[3, 3]);
        let out = prune(&p, &sched, 2).unwrap();
        assert!(!out.pstar.is_empty());
        // brute force: every extendible string at lengths 0 and 3 has at least
        // two extendible extensions three bits further
        for (len, ext) in [(0usize, 3usize), (3, 6)] {
            for s in out.pstar.extendible_at(len) {
                let n = out
                    .pstar
                    .extendible_at(ext)
                    .into_iter()
                    .filter(|t| s.is_prefix_of(t))
                    .count();
                assert!(n >= 2, "{s:?} has {n}");
            }
        }
    }

    #[test]
    fn prune_rejects_exhausted_budget() {
        let p = class(3, &["000", "001", "010", "011"]);
        let err = prune(&p, &custom(&[1, 1], &[2, 1]), 1).unwrap_err();
        assert!(err.to_string().starts_with("measure budget exhausted"), "{err}");
        let p = class(3, &["000"]);
        let err = prune(&p, &custom(&[1], &[3]), 1).unwrap_err();
        assert!(matches!(err, Error::BudgetExhausted { .. }));
    }
}
