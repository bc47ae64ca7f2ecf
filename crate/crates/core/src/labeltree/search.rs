//! Exhaustive search for a full labelling.
//!
//! All nodes carrying one subject `σ` at level `t` form a group. A full
//! labelling exists iff, starting from the root group, every group can pick
//! two disjoint nonempty sets of children to carry `σ0` and `σ1`, recursively
//! up to the top level. The search tries every assignment of each pooled child
//! to {unlabelled, `σ0`, `σ1`}, memoized on (level, group).

use std::collections::HashMap;

use crate::bits::BitString;
use crate::error::{Error, Result};

use super::labelling::Labelling;
use super::UTree;

pub const ORACLE_MAX_HEIGHT: usize = 4;
pub const ORACLE_MAX_LEVEL: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleVerdict {
    pub labelable: bool,
    pub witness: Option<Labelling>,
}

struct Search<'a> {
    tree: &'a UTree,
    height: usize,
    /// `kids[t][i]`: indices of the level-(t+1) children of node `i` at level `t`.
    kids: Vec<Vec<Vec<usize>>>,
    /// `tops[t][i]`: number of top-level nodes below node `i` at level `t`.
    tops: Vec<Vec<usize>>,
    memo: HashMap<(usize, u32), Option<(u32, u32)>>,
}

impl<'a> Search<'a> {
    fn new(tree: &'a UTree) -> Self {
        let height = tree.height();
        let mut kids: Vec<Vec<Vec<usize>>> = Vec::with_capacity(height);
        for t in 0..height {
            let next = tree.level(t + 1);
            kids.push(
                tree.level(t)
                    .iter()
                    .map(|node| {
                        tree.children_at(t, node)
                            .iter()
                            .map(|c| next.binary_search(c).expect("child at next level"))
                            .collect()
                    })
                    .collect(),
            );
        }
        let mut tops = vec![Vec::new(); height + 1];
        tops[height] = vec![1; tree.level(height).len()];
        for t in (0..height).rev() {
            tops[t] = kids[t]
                .iter()
                .map(|ks: &Vec<usize>| ks.iter().map(|&c| tops[t + 1][c]).sum())
                .collect();
        }
        Search {
            tree,
            height,
            kids,
            tops,
            memo: HashMap::new(),
        }
    }

    fn tops_in(&self, t: usize, mask: u32) -> usize {
        members(mask).map(|i| self.tops[t][i]).sum()
    }

    /// Whether the group `mask` at level `t` can carry a full subtree of
    /// subjects; on success the memo records the two child groups.
    fn feasible(&mut self, t: usize, mask: u32) -> bool {
        if t == self.height {
            return true;
        }
        if let Some(choice) = self.memo.get(&(t, mask)) {
            return choice.is_some();
        }
        let pool: Vec<usize> = members(mask)
            .flat_map(|i| self.kids[t][i].iter().copied())
            .collect();
        let mut assign = vec![0u8; pool.len()];
        let choice = self.assign(t, &pool, &mut assign, 0);
        self.memo.insert((t, mask), choice);
        choice.is_some()
    }

    fn assign(&mut self, t: usize, pool: &[usize], assign: &mut [u8], k: usize) -> Option<(u32, u32)> {
        if k == pool.len() {
            let (mut a, mut b) = (0u32, 0u32);
            for (&node, &side) in pool.iter().zip(assign.iter()) {
                match side {
                    1 => a |= 1 << node,
                    2 => b |= 1 << node,
                    _ => {}
                }
            }
            if a == 0 || b == 0 {
                return None;
            }
            // a subject at level t+1 needs 2^(height-t-1) top-level nodes above it
            let need = 1usize << (self.height - t - 1);
            if self.tops_in(t + 1, a) < need || self.tops_in(t + 1, b) < need {
                return None;
            }
            return (self.feasible(t + 1, a) && self.feasible(t + 1, b)).then_some((a, b));
        }
        let any_a = assign[..k].contains(&1);
        for side in 0..3u8 {
            // σ0 and σ1 are interchangeable: the first labelled child takes σ0
            if side == 2 && !any_a {
                continue;
            }
            assign[k] = side;
            if let Some(found) = self.assign(t, pool, assign, k + 1) {
                return Some(found);
            }
        }
        assign[k] = 0;
        None
    }

    fn witness(&self, t: usize, mask: u32, subject: &BitString, out: &mut Labelling) {
        if t == self.height {
            return;
        }
        let (a, b) = self.memo[&(t, mask)].expect("feasible group");
        for (group, bit) in [(a, false), (b, true)] {
            let s = subject.child(bit);
            for i in members(group) {
                out.insert(self.tree.level(t + 1)[i].clone(), s.clone());
            }
            self.witness(t + 1, group, &s, out);
        }
    }
}

fn members(mask: u32) -> impl Iterator<Item = usize> {
    (0..32).filter(move |i| mask >> i & 1 == 1)
}

/// Decides full labelability by exhaustive search and returns a witness.
/// Limited to height 4 and at most 12 nodes per level.
pub fn is_fully_labelable_bruteforce(tree: &UTree) -> Result<OracleVerdict> {
    if tree.height() > ORACLE_MAX_HEIGHT {
        return Err(Error::TooLarge(format!(
            "height {} exceeds {ORACLE_MAX_HEIGHT}",
            tree.height()
        )));
    }
    if let Some(t) = tree.levels().iter().position(|l| l.len() > ORACLE_MAX_LEVEL) {
        return Err(Error::TooLarge(format!(
            "level {t} has {} nodes, more than {ORACLE_MAX_LEVEL}",
            tree.level(t).len()
        )));
    }
    let mut search = Search::new(tree);
    if !search.feasible(0, 1) {
        return Ok(OracleVerdict {
            labelable: false,
            witness: None,
        });
    }
    let mut witness = Labelling::new();
    search.witness(0, 1, &BitString::empty(), &mut witness);
    Ok(OracleVerdict {
        labelable: true,
        witness: Some(witness),
    })
}
