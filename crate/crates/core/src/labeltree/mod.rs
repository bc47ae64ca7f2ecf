//! Level-structured trees of binary strings, their labellings, and the two
//! deciders for full labelability: exhaustive labelling search and splice
//! reduction to a full binary tree.
//!
//! Conventions: the root `λ` is level 0. For `t >= 1` the level-`t` nodes are
//! the strings of length `u[t-1]`, and labels on them have subjects of length
//! `t`. The root carries the empty subject implicitly. The height of a tree is
//! `u.len()`.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use crate::bits::BitString;
use crate::error::{Error, Result};

pub mod labelling;
pub mod search;
pub mod splice;
pub mod sweep;

pub use labelling::{validate_labelling, Labelling, LabellingReport, Violation};
pub use search::is_fully_labelable_bruteforce;
pub use splice::{
    labelling_from_reduction, measure_condition_check, splice, splice_reduce, MeasureCheck,
    SpliceStep,
};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct UTree {
    u: Vec<usize>,
    /// `levels[t]`: the level-`t` nodes in lexicographic order.
    levels: Vec<Vec<BitString>>,
}

impl UTree {
    /// Builds a tree from its level lengths and node set; `λ` must be present.
    pub fn new<I>(u: Vec<usize>, nodes: I) -> Result<UTree>
    where
        I: IntoIterator<Item = BitString>,
    {
        if u.first() == Some(&0) {
            return Err(Error::InvalidTree("level lengths must be positive".into()));
        }
        if u.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidTree("level lengths must increase strictly".into()));
        }
        let mut sets = vec![BTreeSet::new(); u.len() + 1];
        for node in nodes {
            let level = if node.is_empty() {
                0
            } else {
                1 + u.iter().position(|&len| len == node.len()).ok_or_else(|| {
                    Error::InvalidTree(format!("node {node} has length {} not in u", node.len()))
                })?
            };
            if !sets[level].insert(node.clone()) {
                return Err(Error::InvalidTree(format!("node {} listed twice", node.to_token())));
            }
        }
        if sets[0].is_empty() {
            return Err(Error::InvalidTree("tree must contain the empty string".into()));
        }
        let levels: Vec<Vec<BitString>> = sets.into_iter().map(|s| s.into_iter().collect()).collect();
        for t in 1..levels.len() {
            let parent_len = if t == 1 { 0 } else { u[t - 2] };
            for node in &levels[t] {
                if levels[t - 1].binary_search(&node.prefix(parent_len)).is_err() {
                    return Err(Error::InvalidTree(format!(
                        "node {node} has no parent {}",
                        node.prefix(parent_len).to_token()
                    )));
                }
            }
        }
        Ok(UTree { u, levels })
    }

    /// The full binary tree of height `u.len()`: each node's two children append
    /// the gap-width codes of 0 and 1.
    pub fn full_binary(u: Vec<usize>) -> Result<UTree> {
        let shape = Shape::full_binary(u.len());
        UTree::from_shape_with_u(&shape, u)
    }

    pub fn u(&self) -> &[usize] {
        &self.u
    }

    pub fn height(&self) -> usize {
        self.u.len()
    }

    /// String length of level-`t` nodes.
    pub fn level_len(&self, t: usize) -> usize {
        if t == 0 {
            0
        } else {
            self.u[t - 1]
        }
    }

    pub fn level(&self, t: usize) -> &[BitString] {
        &self.levels[t]
    }

    pub fn levels(&self) -> &[Vec<BitString>] {
        &self.levels
    }

    pub fn node_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &BitString> {
        self.levels.iter().flatten()
    }

    /// Level index of `node`, if it is in the tree.
    pub fn level_of(&self, node: &BitString) -> Option<usize> {
        let t = if node.is_empty() {
            0
        } else {
            1 + self.u.iter().position(|&len| len == node.len())?
        };
        self.levels[t].binary_search(node).is_ok().then_some(t)
    }

    pub fn contains(&self, node: &BitString) -> bool {
        self.level_of(node).is_some()
    }

    /// Children of a level-`t` node, in lexicographic order.
    pub fn children_at(&self, t: usize, node: &BitString) -> &[BitString] {
        if t >= self.height() {
            return &[];
        }
        let next = &self.levels[t + 1];
        let start = next.partition_point(|c| c < node);
        let end = start + next[start..].partition_point(|c| node.is_prefix_of(c));
        &next[start..end]
    }

    pub fn children(&self, node: &BitString) -> &[BitString] {
        match self.level_of(node) {
            Some(t) => self.children_at(t, node),
            None => &[],
        }
    }

    pub fn parent(&self, node: &BitString) -> Option<BitString> {
        let t = self.level_of(node)?;
        (t > 0).then(|| node.prefix(self.level_len(t - 1)))
    }

    pub fn shape(&self) -> Shape {
        self.shape_below(0, &BitString::empty())
    }

    fn shape_below(&self, t: usize, node: &BitString) -> Shape {
        Shape::new(
            self.children_at(t, node)
                .iter()
                .map(|c| self.shape_below(t + 1, c))
                .collect(),
        )
    }

    /// Poset isomorphism with the full binary tree of this height.
    pub fn is_full_binary(&self) -> bool {
        self.shape() == Shape::full_binary(self.height())
    }

    /// A concrete tree with the given shape and the least level lengths that
    /// fit it: each gap is `max(1, ceil(log2(max children)))`.
    pub fn from_shape(shape: &Shape, height: usize) -> Result<UTree> {
        if shape.depth() > height {
            return Err(Error::InvalidTree(format!(
                "shape of depth {} exceeds height {height}",
                shape.depth()
            )));
        }
        let mut widest = vec![0usize; height];
        shape.max_children_per_level(0, &mut widest);
        let mut u = Vec::with_capacity(height);
        let mut len = 0;
        for w in widest {
            len += bits_for(w).max(1);
            u.push(len);
        }
        UTree::from_shape_with_u(shape, u)
    }

    /// A concrete tree with the given shape and level lengths; the `j`-th child
    /// (in canonical order) of a node appends the binary code of `j`.
    pub fn from_shape_with_u(shape: &Shape, u: Vec<usize>) -> Result<UTree> {
        let mut nodes = Vec::new();
        fn place(
            shape: &Shape,
            node: BitString,
            t: usize,
            u: &[usize],
            nodes: &mut Vec<BitString>,
        ) -> Result<()> {
            if !shape.children().is_empty() {
                if t >= u.len() {
                    return Err(Error::InvalidTree("shape deeper than u".into()));
                }
                let gap = u[t] - node.len();
                if gap < 128 && shape.children().len() as u128 > 1u128 << gap {
                    return Err(Error::InvalidTree(format!(
                        "{} children do not fit in a gap of {gap} bits",
                        shape.children().len()
                    )));
                }
                for (j, child) in shape.children().iter().enumerate() {
                    let addr = node.concat(&BitString::from_index(j as u128, gap));
                    place(child, addr, t + 1, u, nodes)?;
                }
            }
            nodes.push(node);
            Ok(())
        }
        place(shape, BitString::empty(), 0, &u, &mut nodes)?;
        UTree::new(u, nodes)
    }
}

/// Bits needed to give `n` children distinct codes.
pub(crate) fn bits_for(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// Canonical form of an unordered rooted tree: children sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Shape(Vec<Shape>);

impl Shape {
    pub fn new(mut children: Vec<Shape>) -> Shape {
        children.sort();
        Shape(children)
    }

    pub fn leaf() -> Shape {
        Shape(Vec::new())
    }

    pub fn full_binary(height: usize) -> Shape {
        (0..height).fold(Shape::leaf(), |s, _| Shape(vec![s.clone(), s]))
    }

    pub fn children(&self) -> &[Shape] {
        &self.0
    }

    /// Length of the longest root-to-leaf chain.
    pub fn depth(&self) -> usize {
        self.0.iter().map(|c| c.depth() + 1).max().unwrap_or(0)
    }

    pub fn size(&self) -> usize {
        1 + self.0.iter().map(Shape::size).sum::<usize>()
    }

    /// Number of nodes at each depth, root first.
    pub fn level_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::new();
        fn walk(s: &Shape, d: usize, sizes: &mut Vec<usize>) {
            if sizes.len() <= d {
                sizes.push(0);
            }
            sizes[d] += 1;
            for c in &s.0 {
                walk(c, d + 1, sizes);
            }
        }
        walk(self, 0, &mut sizes);
        sizes
    }

    fn max_children_per_level(&self, d: usize, widest: &mut [usize]) {
        if d < widest.len() {
            widest[d] = widest[d].max(self.0.len());
        }
        for c in &self.0 {
            c.max_children_per_level(d + 1, widest);
        }
    }

    /// Parses the bracket notation written by `Display`, e.g. `(()(()))`.
    pub fn parse(text: &str) -> Result<Shape> {
        let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
        fn node(chars: &[char], pos: &mut usize) -> Result<Shape> {
            if chars.get(*pos) != Some(&'(') {
                return Err(Error::parse(1, format!("expected '(' at offset {pos}")));
            }
            *pos += 1;
            let mut kids = Vec::new();
            while chars.get(*pos) == Some(&'(') {
                kids.push(node(chars, pos)?);
            }
            if chars.get(*pos) != Some(&')') {
                return Err(Error::parse(1, format!("expected ')' at offset {pos}")));
            }
            *pos += 1;
            Ok(Shape::new(kids))
        }
        let mut pos = 0;
        let shape = node(&chars, &mut pos)?;
        if pos != chars.len() {
            return Err(Error::parse(1, "trailing characters after shape"));
        }
        Ok(shape)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for c in &self.0 {
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

/// Tree file format: `u: u0 u1 ...`, then one node per line (`-` for `λ`).
/// Lines starting with `#` are comments.
pub fn render_tree(tree: &UTree) -> String {
    let u: Vec<String> = tree.u.iter().map(usize::to_string).collect();
    let mut out = format!("u: {}\n", u.join(" "));
    for node in tree.nodes() {
        let _ = writeln!(out, "{}", node.to_token());
    }
    out
}

pub fn parse_tree(text: &str) -> Result<UTree> {
    let mut u = None;
    let mut nodes = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if u.is_none() {
            let rest = line
                .strip_prefix("u:")
                .ok_or_else(|| Error::parse(i + 1, "expected \"u: u0 u1 ...\""))?;
            let lens = rest
                .split_whitespace()
                .map(|v| v.parse::<usize>().map_err(|_| Error::parse(i + 1, "invalid level length")))
                .collect::<Result<Vec<_>>>()?;
            u = Some(lens);
            continue;
        }
        let node = BitString::parse(line).map_err(|_| Error::parse(i + 1, "invalid node string"))?;
        nodes.push(node);
    }
    let u = u.ok_or_else(|| Error::parse(1, "missing \"u:\" header"))?;
    UTree::new(u, nodes)
}
