//! Splicing sibling nodes, deciding reducibility to a full binary tree, and
//! recovering a full labelling from a reduction.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::bits::BitString;
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};

use super::labelling::{binary_labelling, Labelling};
use super::{bits_for, UTree};

/// One splice: `first` and `second` were merged into `survivor`, the
/// lexicographically smaller of the two. Addresses refer to the tree as it
/// stood just before the step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpliceStep {
    pub level: usize,
    pub first: BitString,
    pub second: BitString,
    pub survivor: BitString,
}

#[derive(Clone, Debug)]
pub struct Spliced {
    pub tree: UTree,
    pub labelling: Option<Labelling>,
    /// Old address to new address for every node of the input tree.
    pub node_map: BTreeMap<BitString, BitString>,
}

/// Inserts `delta` zero bits after the level-`t` prefix of every node deeper
/// than level `t`, making room for `2^delta` times as many children per node.
fn widen(tree: &UTree, t: usize, delta: usize) -> Result<(UTree, BTreeMap<BitString, BitString>)> {
    let cut = tree.level_len(t);
    let mut map = BTreeMap::new();
    for node in tree.nodes() {
        let moved = if node.len() > cut {
            node.prefix(cut)
                .concat(&BitString::zeros(delta))
                .concat(&node.suffix_from(cut))
        } else {
            node.clone()
        };
        map.insert(node.clone(), moved);
    }
    let u = tree
        .u()
        .iter()
        .enumerate()
        .map(|(j, &len)| if j >= t { len + delta } else { len })
        .collect();
    let widened = UTree::new(u, map.values().cloned())?;
    Ok((widened, map))
}

fn relabel(labelling: &Labelling, map: &BTreeMap<BitString, BitString>) -> Labelling {
    Labelling::from_pairs(
        labelling
            .entries()
            .iter()
            .map(|(n, s)| (map.get(n).cloned().unwrap_or_else(|| n.clone()), s.clone())),
    )
}

/// Merges the siblings `n1` and `n2`. The lexicographically smaller one
/// survives and keeps its children's addresses; the other's children move to
/// the survivor's free child codes in increasing order, carrying their
/// subtrees. If the codes run out, all deeper levels are widened first.
/// Labels follow their nodes; two siblings with different labels conflict.
pub fn splice(
    tree: &UTree,
    labelling: Option<&Labelling>,
    n1: &BitString,
    n2: &BitString,
) -> Result<Spliced> {
    if n1 == n2 {
        return Err(Error::NoSibling(n1.clone()));
    }
    let not_siblings = || Error::NotSiblings {
        first: n1.clone(),
        second: n2.clone(),
    };
    let t = tree.level_of(n1).ok_or_else(not_siblings)?;
    if t == 0 || tree.level_of(n2) != Some(t) || tree.parent(n1) != tree.parent(n2) {
        return Err(not_siblings());
    }
    let (s, o) = if n1 < n2 { (n1, n2) } else { (n2, n1) };
    if let Some(l) = labelling {
        if let (Some(a), Some(b)) = (l.get(s), l.get(o)) {
            if a != b {
                return Err(Error::LabelConflict {
                    first: a.clone(),
                    second: b.clone(),
                });
            }
        }
    }

    let mut current = tree.clone();
    let mut map: BTreeMap<BitString, BitString> =
        tree.nodes().map(|n| (n.clone(), n.clone())).collect();
    let (mut s, mut o) = (s.clone(), o.clone());
    if t < tree.height() {
        let gap = current.level_len(t + 1) - current.level_len(t);
        let needed = current.children_at(t, &s).len() + current.children_at(t, &o).len();
        if bits_for(needed) > gap {
            let (widened, wmap) = widen(&current, t, bits_for(needed) - gap)?;
            for v in map.values_mut() {
                *v = wmap[v].clone();
            }
            s = wmap[&s].clone();
            o = wmap[&o].clone();
            current = widened;
        }
    }

    let mut step: BTreeMap<BitString, BitString> = BTreeMap::new();
    if t < current.height() {
        let node_len = current.level_len(t);
        let child_len = current.level_len(t + 1);
        let gap = child_len - node_len;
        let used: BTreeSet<u128> = current
            .children_at(t, &s)
            .iter()
            .map(|c| c.suffix_from(node_len).to_index())
            .collect();
        let movers = current.children_at(t, &o).to_vec();
        let free = (0u128..).filter(|c| !used.contains(c)).take(movers.len());
        let targets: HashMap<BitString, BitString> = movers
            .iter()
            .cloned()
            .zip(free.map(|code| s.concat(&BitString::from_index(code, gap))))
            .collect();
        for node in current.nodes() {
            let moved = if o.is_prefix_of(node) && node.len() >= child_len {
                targets[&node.prefix(child_len)].concat(&node.suffix_from(child_len))
            } else {
                node.clone()
            };
            step.insert(node.clone(), moved);
        }
    } else {
        step = current.nodes().map(|n| (n.clone(), n.clone())).collect();
    }
    step.insert(o.clone(), s.clone());

    let spliced = UTree::new(
        current.u().to_vec(),
        step.values().cloned().collect::<BTreeSet<_>>(),
    )?;
    for v in map.values_mut() {
        *v = step[v].clone();
    }
    let labelling = labelling.map(|l| {
        let moved = relabel(l, &map);
        let mut seen = BTreeSet::new();
        Labelling::from_pairs(
            moved
                .entries()
                .iter()
                .filter(|(n, _)| seen.insert(n.clone()))
                .cloned(),
        )
    });
    Ok(Spliced {
        tree: spliced,
        labelling,
        node_map: map,
    })
}

#[derive(Clone, Debug)]
pub struct Reduction {
    pub reducible: bool,
    pub steps: Vec<SpliceStep>,
    /// The full binary tree reached, when reducible.
    pub result: Option<UTree>,
}

/// A split of one pool into two halves, or `None` when none works.
type Split = Option<(Vec<usize>, Vec<usize>)>;

/// Partition planner over node indices.
struct Planner {
    height: usize,
    kids: Vec<Vec<Vec<usize>>>,
    /// `below[t][i][j]`: nodes at level `t + j` under node `i` of level `t`.
    below: Vec<Vec<Vec<usize>>>,
    memo: HashMap<(usize, Vec<usize>), Split>,
}

/// Pools larger than this are not partitioned exhaustively.
pub const MAX_POOL: usize = 22;

impl Planner {
    fn new(tree: &UTree) -> Self {
        let height = tree.height();
        let kids: Vec<Vec<Vec<usize>>> = (0..height)
            .map(|t| {
                tree.level(t)
                    .iter()
                    .map(|n| {
                        tree.children_at(t, n)
                            .iter()
                            .map(|c| tree.level(t + 1).binary_search(c).expect("child"))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let mut below: Vec<Vec<Vec<usize>>> = vec![Vec::new(); height + 1];
        below[height] = vec![vec![1]; tree.level(height).len()];
        for t in (0..height).rev() {
            below[t] = kids[t]
                .iter()
                .map(|ks| {
                    let mut counts = vec![0; height - t + 1];
                    counts[0] = 1;
                    for &c in ks {
                        for (j, &n) in below[t + 1][c].iter().enumerate() {
                            counts[j + 1] += n;
                        }
                    }
                    counts
                })
                .collect();
        }
        Planner {
            height,
            kids,
            below,
            memo: HashMap::new(),
        }
    }

    /// Whether a block at level `t` has at least `2^j` nodes `j` levels up.
    fn dense_enough(&self, t: usize, block: &[usize]) -> bool {
        (0..=self.height - t).all(|j| {
            block.iter().map(|&i| self.below[t][i][j]).sum::<usize>() >= 1 << j
        })
    }

    fn plan(&mut self, t: usize, group: Vec<usize>) -> Result<bool> {
        if t == self.height {
            return Ok(true);
        }
        let key = (t, group);
        if let Some(p) = self.memo.get(&key) {
            return Ok(p.is_some());
        }
        let pool: Vec<usize> = key.1.iter().flat_map(|&i| self.kids[t][i].iter().copied()).collect();
        let found = self.partition(t, &pool)?;
        let ok = found.is_some();
        self.memo.insert(key, found);
        Ok(ok)
    }

    /// Splits the whole pool into two nonempty blocks that can each be reduced.
    /// Balanced splits (by top-level node count) are tried first.
    fn partition(&mut self, t: usize, pool: &[usize]) -> Result<Split> {
        let n = pool.len();
        if n < 2 {
            return Ok(None);
        }
        if n > MAX_POOL {
            return Err(Error::TooLarge(format!("{n} children to partition at level {}", t + 1)));
        }
        let top = |i: usize| self.below[t + 1][i][self.height - t - 1];
        let total: usize = pool.iter().map(|&i| top(i)).sum();
        // the first pool member always sits in block A
        let mut candidates: Vec<(usize, u64)> = (0u64..1 << (n - 1))
            .map(|rest| (rest << 1) | 1)
            .filter(|&mask| mask != (1u64 << n) - 1)
            .map(|mask| {
                let a: usize = (0..n).filter(|k| mask >> k & 1 == 1).map(|k| top(pool[k])).sum();
                (a.abs_diff(total - a), mask)
            })
            .collect();
        candidates.sort_unstable();
        for (_, mask) in candidates {
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for (k, &i) in pool.iter().enumerate() {
                if mask >> k & 1 == 1 {
                    a.push(i);
                } else {
                    b.push(i);
                }
            }
            a.sort_unstable();
            b.sort_unstable();
            if !self.dense_enough(t + 1, &a) || !self.dense_enough(t + 1, &b) {
                continue;
            }
            if self.plan(t + 1, a.clone())? && self.plan(t + 1, b.clone())? {
                return Ok(Some((a, b)));
            }
        }
        Ok(None)
    }
}

/// Decides whether splices can turn the tree into a copy of the full binary
/// tree of its height, and if so returns such a sequence of splices.
///
/// Each level-`t` group of nodes destined to become one node has its pooled
/// children split into exactly two blocks, one per child in the binary tree;
/// every child is used, so the number of splices is always
/// `|T| - (2^(k+1) - 1)`.
pub fn splice_reduce(tree: &UTree) -> Result<Reduction> {
    let mut planner = Planner::new(tree);
    if !planner.plan(0, vec![0])? {
        return Ok(Reduction {
            reducible: false,
            steps: Vec::new(),
            result: None,
        });
    }
    let mut current = tree.clone();
    let mut image: BTreeMap<BitString, BitString> =
        tree.nodes().map(|n| (n.clone(), n.clone())).collect();
    let mut steps = Vec::new();
    let mut work = vec![(0usize, vec![0usize])];
    while let Some((t, group)) = work.pop() {
        if t == planner.height {
            continue;
        }
        let (a, b) = planner.memo[&(t, group)].clone().expect("planned");
        for block in [b, a] {
            let originals: Vec<BitString> = block.iter().map(|&i| tree.level(t + 1)[i].clone()).collect();
            loop {
                let addrs: BTreeSet<BitString> = originals.iter().map(|n| image[n].clone()).collect();
                let mut it = addrs.into_iter();
                let (Some(x), Some(y)) = (it.next(), it.next()) else { break };
                let out = splice(&current, None, &x, &y)?;
                steps.push(SpliceStep {
                    level: t + 1,
                    first: x.clone(),
                    second: y,
                    survivor: x,
                });
                for v in image.values_mut() {
                    *v = out.node_map[v].clone();
                }
                current = out.tree;
            }
            work.push((t + 1, block));
        }
    }
    let expected = tree.node_count() + 1 - (1usize << (tree.height() + 1));
    if steps.len() != expected || !current.is_full_binary() {
        return Err(Error::Invariant(format!(
            "reduction took {} splices (expected {expected}) and reached shape {}",
            steps.len(),
            current.shape()
        )));
    }
    Ok(Reduction {
        reducible: true,
        steps,
        result: Some(current),
    })
}

/// Replays a reduction, labels the resulting full binary tree by paths, and
/// pulls the labels back to the original nodes.
pub fn labelling_from_reduction(tree: &UTree, steps: &[SpliceStep]) -> Result<Labelling> {
    let mut current = tree.clone();
    let mut image: BTreeMap<BitString, BitString> =
        tree.nodes().map(|n| (n.clone(), n.clone())).collect();
    for (k, step) in steps.iter().enumerate() {
        let invalid = |reason: String| Error::InvalidSteps { step: k, reason };
        let out = splice(&current, None, &step.first, &step.second).map_err(|e| invalid(e.to_string()))?;
        let survivor = step.first.clone().min(step.second.clone());
        if step.survivor != survivor {
            return Err(invalid(format!("survivor should be {survivor}")));
        }
        for v in image.values_mut() {
            *v = out.node_map[v].clone();
        }
        current = out.tree;
    }
    if !current.is_full_binary() {
        return Err(Error::InvalidSteps {
            step: steps.len(),
            reason: format!("result has shape {}, not a full binary tree", current.shape()),
        });
    }
    let binary = binary_labelling(&current)?.as_map();
    Ok(Labelling::from_pairs(tree.nodes().filter(|n| !n.is_empty()).map(|n| {
        (n.clone(), binary[&image[n]].clone())
    })))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeasureCheck {
    pub sum: Dyadic,
    pub measure: Dyadic,
    pub satisfied: bool,
}

/// `sum = Σ_{i<k} 2^(i - u_i)` against the measure `|level k| · 2^(-u_{k-1})`
/// of the top level.
pub fn measure_condition_check(tree: &UTree) -> MeasureCheck {
    let k = tree.height();
    let sum: Dyadic = tree
        .u()
        .iter()
        .enumerate()
        .map(|(i, &u)| Dyadic::pow2(i as i64 - u as i64))
        .sum();
    let measure = Dyadic::new(tree.level(k).len() as u64, tree.level_len(k) as u32);
    let satisfied = sum < measure;
    MeasureCheck {
        sum,
        measure,
        satisfied,
    }
}

#[cfg(test)]
mod tests {
    use super::super::labelling::validate_labelling;
    use super::super::Shape;
    use super::*;

    fn bs(s: &str) -> BitString {
        BitString::from(s)
    }

    fn tree(shape: &str, height: usize) -> UTree {
        UTree::from_shape(&Shape::parse(shape).unwrap(), height).unwrap()
    }

    #[test]
    fn splicing_a_cherry_gives_a_path() {
        let t = UTree::full_binary(vec![1]).unwrap();
        let out = splice(&t, None, &bs("0"), &bs("1")).unwrap();
        assert_eq!(out.tree.shape(), Shape::parse("(())").unwrap());
        assert_eq!(out.node_map[&bs("1")], bs("0"));
    }

    #[test]
    fn splice_errors() {
        let path = tree("((()))", 2);
        let child = path.level(1)[0].clone();
        assert!(matches!(splice(&path, None, &child, &child), Err(Error::NoSibling(_))));
        let t = UTree::full_binary(vec![1, 2]).unwrap();
        assert!(matches!(
            splice(&t, None, &bs("00"), &bs("10")),
            Err(Error::NotSiblings { .. })
        ));
        assert!(matches!(
            splice(&t, None, &bs("0"), &bs("01")),
            Err(Error::NotSiblings { .. })
        ));
        let l = binary_labelling(&t).unwrap();
        assert!(matches!(
            splice(&t, Some(&l), &bs("0"), &bs("1")),
            Err(Error::LabelConflict { .. })
        ));
    }

    #[test]
    fn splice_readdresses_and_widens() {
        // u = (2, 3): three level-1 nodes with two children each
        let t = UTree::new(
            vec![2, 3],
            ["-", "00", "01", "10", "000", "001", "010", "011", "100", "101"].map(bs),
        )
        .unwrap();
        let out = splice(&t, None, &bs("01"), &bs("00")).unwrap();
        assert_eq!(out.tree.u(), &[2, 4]);
        assert_eq!(out.tree.children(&bs("00")), &[bs("0000"), bs("0001"), bs("0010"), bs("0011")]);
        assert_eq!(out.node_map[&bs("010")], bs("0010"));
        assert_eq!(out.node_map[&bs("100")], bs("1000"));
        assert_eq!(out.tree.node_count(), t.node_count() - 1);
        // the merged upward set is the union of both
        assert_eq!(out.tree.shape(), Shape::parse("((()()()())(()()))").unwrap());
    }

    #[test]
    fn labels_follow_nodes() {
        let t = UTree::new(vec![1, 3], ["-", "0", "1", "000", "100", "101"].map(bs)).unwrap();
        let l = Labelling::from_pairs([(bs("000"), bs("00"))]);
        let out = splice(&t, Some(&l), &bs("0"), &bs("1")).unwrap();
        let moved = out.labelling.unwrap();
        assert_eq!(moved.get(&bs("000")), Some(&bs("00")));
        let l = Labelling::from_pairs([(bs("100"), bs("01"))]);
        let out = splice(&t, Some(&l), &bs("0"), &bs("1")).unwrap();
        assert_eq!(out.labelling.unwrap().get(&bs("001")), Some(&bs("01")));
    }

    #[test]
    fn full_binary_needs_no_splices() {
        let t = UTree::full_binary(vec![1, 2, 3]).unwrap();
        let r = splice_reduce(&t).unwrap();
        assert!(r.reducible);
        assert!(r.steps.is_empty());
        let l = labelling_from_reduction(&t, &[]).unwrap();
        assert_eq!(l.as_map(), binary_labelling(&t).unwrap().as_map());
    }

    #[test]
    fn eight_chains_reduce_in_six_splices_per_level() {
        let t = tree(&format!("({})", "((()))".repeat(8)), 3);
        let r = splice_reduce(&t).unwrap();
        assert!(r.reducible);
        // 8 -> 2 at level 1, then 4 -> 2 twice at level 2: |T| - 15 = 25 - 15
        assert_eq!(r.steps.len(), 10);
        assert_eq!(r.steps.iter().filter(|s| s.level == 1).count(), 6);
        let l = labelling_from_reduction(&t, &r.steps).unwrap();
        let report = validate_labelling(&t, &l).unwrap();
        assert!(report.is_full());
        let level2: BTreeSet<BitString> = t.level(2).iter().map(|n| l.get(n).unwrap().clone()).collect();
        assert_eq!(level2.len(), 4);
        let level3: BTreeSet<BitString> = t.level(3).iter().map(|n| l.get(n).unwrap().clone()).collect();
        assert_eq!(level3.len(), 8);
    }

    #[test]
    fn invalid_steps_are_rejected() {
        let t = tree("(()()())", 1);
        let bad = [SpliceStep {
            level: 1,
            first: bs("00"),
            second: bs("00"),
            survivor: bs("00"),
        }];
        assert!(matches!(
            labelling_from_reduction(&t, &bad),
            Err(Error::InvalidSteps { step: 0, .. })
        ));
        assert!(matches!(
            labelling_from_reduction(&t, &[]),
            Err(Error::InvalidSteps { step: 0, .. })
        ));
    }

    #[test]
    fn measure_condition_examples() {
        let seven = UTree::new(
            vec![2, 4],
            ["-", "00", "01", "10", "0000", "0001", "0010", "0100", "0101", "1000", "1001"].map(bs),
        )
        .unwrap();
        let c = measure_condition_check(&seven);
        assert_eq!(c.sum, "3/8".parse().unwrap());
        assert_eq!(c.measure, "7/16".parse().unwrap());
        assert!(c.satisfied);
        for k in 1..=4 {
            let full = UTree::full_binary((1..=k).collect()).unwrap();
            let c = measure_condition_check(&full);
            assert_eq!(c.sum, Dyadic::new(k as u64, 1));
            assert_eq!(c.measure, Dyadic::one());
            assert_eq!(c.satisfied, k == 1);
        }
        let bare = tree("(()())", 2);
        let c = measure_condition_check(&bare);
        assert_eq!(c.measure, Dyadic::zero());
        assert!(!c.satisfied);
    }
}
