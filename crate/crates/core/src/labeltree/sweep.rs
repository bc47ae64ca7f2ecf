//! Bounded equivalence sweep between the two labelability deciders.
//!
//! Instances are canonical tree shapes: every shape within a small per-level
//! bound, then seeded random shapes up to the full bound until enough distinct
//! instances exist. Each shape is realized with the least level lengths that
//! fit it.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::instances::seeded_rng;

use super::search::is_fully_labelable_bruteforce;
use super::splice::{measure_condition_check, splice_reduce};
use super::{render_tree, Shape, UTree};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepConfig {
    /// Heights `1..=max_height` are swept.
    pub max_height: usize,
    /// Upper bound on nodes per level.
    pub per_level: usize,
    /// Random instances are added until at least this many exist.
    pub min_instances: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            max_height: 3,
            per_level: 10,
            min_instances: 5000,
            seed: 0x5eed,
        }
    }
}

/// Per-level bound under which all shapes of height `h` are enumerated.
pub fn exhaustive_bound(height: usize, per_level: usize) -> usize {
    let cap = match height {
        0..=2 => 10,
        3 => 5,
        _ => 3,
    };
    per_level.min(cap)
}

/// Child counts per level: `levels[t][i]` children for node `i` of level `t`.
type Layout = Vec<Vec<usize>>;

fn layout_shape(layout: &Layout) -> Shape {
    fn build(layout: &Layout, t: usize, i: usize, offsets: &[Vec<usize>]) -> Shape {
        if t == layout.len() {
            return Shape::leaf();
        }
        let start = offsets[t][i];
        Shape::new(
            (start..start + layout[t][i])
                .map(|c| build(layout, t + 1, c, offsets))
                .collect(),
        )
    }
    let offsets: Vec<Vec<usize>> = layout
        .iter()
        .map(|counts| {
            counts
                .iter()
                .scan(0, |acc, &n| {
                    let start = *acc;
                    *acc += n;
                    Some(start)
                })
                .collect()
        })
        .collect();
    build(layout, 0, 0, &offsets)
}

/// Tuples of `slots` non-negative counts with sum at most `bound`.
fn compositions(slots: usize, bound: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    fn rec(slots: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == slots {
            out.push(cur.clone());
            return;
        }
        for n in 0..=left {
            cur.push(n);
            rec(slots, left - n, cur, out);
            cur.pop();
        }
    }
    rec(slots, bound, &mut Vec::new(), &mut out);
    out
}

/// All shapes of depth at most `height` with at most `per_level` nodes on
/// each level, in canonical order.
pub fn enumerate_shapes(height: usize, per_level: usize) -> Vec<Shape> {
    let mut layouts: Vec<Layout> = vec![Vec::new()];
    let mut width = vec![1usize];
    for _ in 0..height {
        let mut next = Vec::new();
        let mut next_width = Vec::new();
        let mut seen = HashSet::new();
        for (layout, &w) in layouts.iter().zip(&width) {
            for comp in compositions(w, per_level) {
                let mut grown = layout.clone();
                let total = comp.iter().sum();
                grown.push(comp);
                // prune isomorphic partial trees early; the frontier is the last level
                if seen.insert(layout_shape(&grown)) {
                    next.push(grown);
                    next_width.push(total);
                }
            }
        }
        layouts = next;
        width = next_width;
    }
    let mut shapes: Vec<Shape> = layouts.iter().map(layout_shape).collect();
    shapes.sort();
    shapes.dedup();
    shapes
}

/// A random shape of depth at most `height`: each level gets between 1 and
/// `per_level` nodes attached to uniformly chosen parents.
pub fn random_shape<R: Rng>(rng: &mut R, height: usize, per_level: usize) -> Shape {
    let mut layout: Layout = Vec::new();
    let mut width = 1usize;
    for _ in 0..height {
        if width == 0 {
            layout.push(Vec::new());
            continue;
        }
        let count = rng.gen_range(1..=per_level.max(1));
        let mut counts = vec![0usize; width];
        for _ in 0..count {
            counts[rng.gen_range(0..width)] += 1;
        }
        layout.push(counts);
        width = count;
    }
    layout_shape(&layout)
}

/// The sweep instance list: exhaustive shapes per height, then random fill at
/// the largest height. Distinct as (height, shape) pairs.
pub fn sweep_instances(config: &SweepConfig) -> Vec<(usize, Shape)> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for h in 1..=config.max_height {
        for shape in enumerate_shapes(h, exhaustive_bound(h, config.per_level)) {
            if seen.insert((h, shape.clone())) {
                out.push((h, shape));
            }
        }
    }
    if config.max_height == 0 {
        return out;
    }
    let mut rng = seeded_rng(config.seed);
    let attempts = 200 * config.min_instances.max(1);
    for _ in 0..attempts {
        if out.len() >= config.min_instances {
            break;
        }
        let shape = random_shape(&mut rng, config.max_height, config.per_level);
        if seen.insert((config.max_height, shape.clone())) {
            out.push((config.max_height, shape));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepRow {
    pub instance_hash: String,
    pub height: usize,
    pub shape: Shape,
    pub labelable: bool,
    pub reducible: bool,
    pub condition_satisfied: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// Rows where the two deciders disagree.
    pub fn disagreements(&self) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.labelable != r.reducible).collect()
    }

    /// Rows satisfying the measure condition that are not labelable.
    pub fn condition_counterexamples(&self) -> Vec<&SweepRow> {
        self.rows
            .iter()
            .filter(|r| r.condition_satisfied && !r.labelable)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("instance_hash,labelable,reducible,condition_satisfied\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.instance_hash, r.labelable, r.reducible, r.condition_satisfied
            );
        }
        out
    }
}

/// First 16 hex digits of the SHA-256 of the tree file text.
pub fn instance_hash(tree: &UTree) -> String {
    let digest = Sha256::digest(render_tree(tree).as_bytes());
    digest[..8].iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Runs both deciders and the measure check on one tree.
pub fn check_tree(tree: &UTree, shape: Shape) -> Result<SweepRow> {
    let labelable = is_fully_labelable_bruteforce(tree)?.labelable;
    let reducible = splice_reduce(tree)?.reducible;
    Ok(SweepRow {
        instance_hash: instance_hash(tree),
        height: tree.height(),
        shape,
        labelable,
        reducible,
        condition_satisfied: measure_condition_check(tree).satisfied,
    })
}

/// Checks the given trees in parallel; rows keep the input order.
pub fn sweep_trees(trees: &[UTree]) -> Result<SweepReport> {
    let rows = trees
        .par_iter()
        .map(|t| check_tree(t, t.shape()))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport { rows })
}

pub fn sweep(config: &SweepConfig) -> Result<SweepReport> {
    if config.per_level > super::search::ORACLE_MAX_LEVEL {
        return Err(Error::TooLarge(format!(
            "{} nodes per level exceeds the oracle limit",
            config.per_level
        )));
    }
    let instances = sweep_instances(config);
    let rows = instances
        .into_par_iter()
        .map(|(h, shape)| {
            let tree = UTree::from_shape(&shape, h)?;
            check_tree(&tree, shape)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport { rows })
}
