//! Partial labellings `node -> x_σ` and the five admissibility conditions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use crate::bits::BitString;
use crate::error::{Error, Result};

use super::UTree;

/// Label assignments in the order given. Well-formed labellings have each
/// node at most once; repeats are kept so that validation can report them.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Labelling {
    entries: Vec<(BitString, BitString)>,
}

impl Labelling {
    pub fn new() -> Self {
        Labelling::default()
    }

    pub fn from_pairs<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (BitString, BitString)>,
    {
        Labelling {
            entries: pairs.into_iter().collect(),
        }
    }

    pub fn insert(&mut self, node: BitString, subject: BitString) {
        self.entries.push((node, subject));
    }

    /// The subject on `node` (the first one, if repeated).
    pub fn get(&self, node: &BitString) -> Option<&BitString> {
        self.entries.iter().find(|(n, _)| n == node).map(|(_, s)| s)
    }

    pub fn entries(&self) -> &[(BitString, BitString)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Node-to-subject map; later repeats of a node are ignored.
    pub fn as_map(&self) -> BTreeMap<BitString, BitString> {
        let mut map = BTreeMap::new();
        for (n, s) in &self.entries {
            map.entry(n.clone()).or_insert_with(|| s.clone());
        }
        map
    }

    /// Distinct subjects in use.
    pub fn subjects(&self) -> BTreeSet<BitString> {
        self.entries.iter().map(|(_, s)| s.clone()).collect()
    }

    /// Whether every nonempty subject of length at most `height` is used.
    pub fn covers_all_subjects(&self, height: usize) -> bool {
        let subjects = self.subjects();
        (1..=height).all(|len| {
            (0..1u128 << len).all(|i| subjects.contains(&BitString::from_index(i, len)))
        })
    }

    /// Lines `node → subject`, sorted by node.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (n, s) in self.as_map() {
            let _ = writeln!(out, "{} → {}", n.to_token(), s.to_token());
        }
        out
    }

    /// Parses `node → subject` lines (`->` accepted); `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Labelling> {
        let mut out = Labelling::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (node, subject) = line
                .split_once('→')
                .or_else(|| line.split_once("->"))
                .ok_or_else(|| Error::parse(i + 1, "expected \"node → subject\""))?;
            let node = BitString::parse(node).map_err(|_| Error::parse(i + 1, "invalid node string"))?;
            let subject =
                BitString::parse(subject).map_err(|_| Error::parse(i + 1, "invalid subject string"))?;
            out.insert(node, subject);
        }
        Ok(out)
    }
}

/// A failed admissibility condition (numbered 1 to 5) with its witness.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub condition: u8,
    pub node: BitString,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "condition ({}) fails at {}: {}",
            self.condition,
            self.node.to_token(),
            self.detail
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabellingReport {
    pub violation: Option<Violation>,
    pub advisories: Vec<String>,
    /// Every subject of length `1..=height` appears.
    pub complete: bool,
}

impl LabellingReport {
    pub fn is_valid(&self) -> bool {
        self.violation.is_none()
    }

    pub fn is_full(&self) -> bool {
        self.is_valid() && self.complete
    }
}

/// Checks conditions (1)-(5) in order and reports the first failure:
///
/// 1. only nodes at the levels `u_i` carry labels (the root does not);
/// 2. a level-`t` label has a subject of length `t`;
/// 3. if `x_σ` is used then so is every `x_ρ` with `0 < |ρ| <= |σ|`;
/// 4. no node carries two labels;
/// 5. the level-`j` ancestor of a node labelled `x_σ` is labelled `x_{σ↾j}`.
///
/// Labels on strings outside the tree are an input error. A subject used on
/// several nodes is permitted and reported as an advisory.
pub fn validate_labelling(tree: &UTree, labelling: &Labelling) -> Result<LabellingReport> {
    for (node, _) in labelling.entries() {
        if !tree.contains(node) {
            return Err(Error::InvalidTree(format!(
                "labelled node {} is not in the tree",
                node.to_token()
            )));
        }
    }
    let violation = first_violation(tree, labelling);
    let map = labelling.as_map();
    let mut uses: BTreeMap<&BitString, usize> = BTreeMap::new();
    for s in map.values() {
        *uses.entry(s).or_default() += 1;
    }
    let advisories = uses
        .into_iter()
        .filter(|&(_, n)| n > 1)
        .map(|(s, n)| format!("duplicate subject x_{} on {n} nodes", s.to_token()))
        .collect();
    Ok(LabellingReport {
        violation,
        advisories,
        complete: labelling.covers_all_subjects(tree.height()),
    })
}

fn first_violation(tree: &UTree, labelling: &Labelling) -> Option<Violation> {
    let fail = |condition, node: &BitString, detail: String| Violation {
        condition,
        node: node.clone(),
        detail,
    };
    // (1)
    for (node, _) in labelling.entries() {
        if node.is_empty() {
            return Some(fail(1, node, "the root is not at a labelled level".into()));
        }
    }
    // (2)
    for (node, subject) in labelling.entries() {
        let t = tree.level_of(node).expect("checked membership");
        if subject.len() != t {
            return Some(fail(
                2,
                node,
                format!("level {t} carries subject {} of length {}", subject.to_token(), subject.len()),
            ));
        }
    }
    // (3)
    let subjects = labelling.subjects();
    let longest = subjects.iter().map(BitString::len).max().unwrap_or(0);
    for len in 1..=longest {
        for i in 0..1u128 << len {
            let rho = BitString::from_index(i, len);
            if !subjects.contains(&rho) {
                let witness = labelling
                    .entries()
                    .iter()
                    .find(|(_, s)| s.len() >= len)
                    .map(|(n, _)| n.clone())
                    .expect("a subject this long exists");
                return Some(fail(3, &witness, format!("label x_{rho} is missing")));
            }
        }
    }
    // (4)
    let mut seen = BTreeSet::new();
    for (node, _) in labelling.entries() {
        if !seen.insert(node) {
            return Some(fail(4, node, "node carries two labels".into()));
        }
    }
    // (5)
    let map = labelling.as_map();
    for (node, subject) in &map {
        let t = subject.len();
        for j in 1..t {
            let ancestor = node.prefix(tree.level_len(j));
            let expected = subject.prefix(j);
            match map.get(&ancestor) {
                Some(s) if *s == expected => {}
                found => {
                    let found = found.map_or("no label".to_string(), |s| format!("x_{s}"));
                    return Some(fail(
                        5,
                        node,
                        format!("ancestor {ancestor} has {found}, expected x_{expected}"),
                    ));
                }
            }
        }
    }
    None
}

/// The labelling of a full binary tree in which each node carries its own
/// path: the lexicographically smaller child of a node appends 0.
pub fn binary_labelling(tree: &UTree) -> Result<Labelling> {
    if !tree.is_full_binary() {
        return Err(Error::InvalidTree("tree is not a full binary tree".into()));
    }
    let mut out = Labelling::new();
    fn walk(tree: &UTree, t: usize, node: &BitString, subject: &BitString, out: &mut Labelling) {
        for (b, child) in tree.children_at(t, node).iter().enumerate() {
            let s = subject.child(b == 1);
            out.insert(child.clone(), s.clone());
            walk(tree, t + 1, child, &s, out);
        }
    }
    walk(tree, 0, &BitString::empty(), &BitString::empty(), &mut out);
    Ok(out)
}
