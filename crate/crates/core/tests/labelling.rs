use std::collections::BTreeSet;
use std::path::PathBuf;

use kgcode_core::instances::seeded_rng;
use kgcode_core::labeltree::sweep::random_shape;
use kgcode_core::labeltree::{
    is_fully_labelable_bruteforce, labelling_from_reduction, parse_tree, splice_reduce,
    validate_labelling, Shape, UTree,
};
use kgcode_core::BitString;
use proptest::prelude::*;
use rand::seq::index::sample;
use rand::Rng;

/// A realization of `shape` with random level gaps (at least what the widest
/// node needs, plus up to two bits) and random distinct child codes.
fn random_realization<R: Rng>(rng: &mut R, shape: &Shape, height: usize) -> UTree {
    let mut widest = vec![0usize; height];
    fn widths(s: &Shape, t: usize, out: &mut [usize]) {
        if t < out.len() {
            out[t] = out[t].max(s.children().len());
            for c in s.children() {
                widths(c, t + 1, out);
            }
        }
    }
    widths(shape, 0, &mut widest);
    let mut u = Vec::new();
    let mut len = 0;
    for w in widest {
        let need = (usize::BITS - w.saturating_sub(1).leading_zeros()) as usize;
        len += need.max(1) + rng.gen_range(0..=2);
        u.push(len);
    }
    let mut nodes = Vec::new();
    fn place<R: Rng>(rng: &mut R, s: &Shape, node: BitString, t: usize, u: &[usize], out: &mut Vec<BitString>) {
        if !s.children().is_empty() {
            let gap = u[t] - node.len();
            let codes = sample(rng, 1 << gap, s.children().len());
            for (c, code) in s.children().iter().zip(codes.iter()) {
                place(rng, c, node.concat(&BitString::from_index(code as u128, gap)), t + 1, u, out);
            }
        }
        out.push(node);
    }
    place(rng, shape, BitString::empty(), 0, &u, &mut nodes);
    UTree::new(u, nodes).unwrap()
}

fn labelable(tree: &UTree) -> bool {
    is_fully_labelable_bruteforce(tree).unwrap().labelable
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn verdicts_ignore_addresses(seed: u64, height in 1usize..=3, width in 1usize..=8) {
        let mut rng = seeded_rng(seed);
        let shape = random_shape(&mut rng, height, width);
        let canonical = UTree::from_shape(&shape, height).unwrap();
        let moved = random_realization(&mut rng, &shape, height);
        prop_assert_eq!(moved.shape(), shape);
        prop_assert_eq!(labelable(&moved), labelable(&canonical));
        prop_assert_eq!(
            splice_reduce(&moved).unwrap().reducible,
            splice_reduce(&canonical).unwrap().reducible
        );
    }

    #[test]
    fn deciders_agree_on_addressed_trees(seed: u64, height in 1usize..=3, width in 1usize..=9) {
        let mut rng = seeded_rng(seed);
        let shape = random_shape(&mut rng, height, width);
        let tree = random_realization(&mut rng, &shape, height);
        prop_assert_eq!(labelable(&tree), splice_reduce(&tree).unwrap().reducible);
    }

    #[test]
    fn labelability_is_monotone(seed: u64, height in 1usize..=3, width in 2usize..=8, cuts in 1usize..4) {
        let mut rng = seeded_rng(seed);
        let shape = random_shape(&mut rng, height, width);
        let big = random_realization(&mut rng, &shape, height);
        // drop a few random subtrees
        let mut kept: BTreeSet<BitString> = big.nodes().cloned().collect();
        for _ in 0..cuts {
            let candidates: Vec<&BitString> = kept.iter().filter(|n| !n.is_empty()).collect();
            if candidates.is_empty() {
                break;
            }
            let cut = candidates[rng.gen_range(0..candidates.len())].clone();
            kept.retain(|n| !cut.is_prefix_of(n));
        }
        let small = UTree::new(big.u().to_vec(), kept).unwrap();
        if labelable(&small) {
            prop_assert!(labelable(&big));
        }
    }

    #[test]
    fn reductions_yield_full_labellings(seed: u64, height in 1usize..=3, width in 2usize..=8) {
        let mut rng = seeded_rng(seed);
        let shape = random_shape(&mut rng, height, width);
        let tree = random_realization(&mut rng, &shape, height);
        let reduction = splice_reduce(&tree).unwrap();
        if reduction.reducible {
            let expected = (1usize << (height + 1)) - 1;
            prop_assert_eq!(reduction.steps.len(), tree.node_count() - expected);
            prop_assert!(reduction.result.unwrap().is_full_binary());
            let l = labelling_from_reduction(&tree, &reduction.steps).unwrap();
            let report = validate_labelling(&tree, &l).unwrap();
            prop_assert!(report.is_full(), "{:?}", report);
        }
    }

    #[test]
    fn oracle_witnesses_are_full(seed: u64, height in 1usize..=3, width in 2usize..=8) {
        let mut rng = seeded_rng(seed);
        let shape = random_shape(&mut rng, height, width);
        let tree = random_realization(&mut rng, &shape, height);
        if let Some(w) = is_fully_labelable_bruteforce(&tree).unwrap().witness {
            prop_assert!(validate_labelling(&tree, &w).unwrap().is_full());
        }
    }
}

fn fixture(name: &str) -> UTree {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "fixtures", "trees", name]
        .iter()
        .collect();
    parse_tree(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn labelable_fixture_trees() {
    for name in ["a", "b", "c", "d", "e", "f", "g", "h"] {
        let tree = fixture(&format!("labelable-{name}.tree"));
        assert_eq!(tree.height(), 3);
        assert!(labelable(&tree), "labelable-{name}");
        let reduction = splice_reduce(&tree).unwrap();
        assert!(reduction.reducible, "labelable-{name}");
        let l = labelling_from_reduction(&tree, &reduction.steps).unwrap();
        assert!(validate_labelling(&tree, &l).unwrap().is_full(), "labelable-{name}");
    }
}

#[test]
fn unlabelable_fixture_trees() {
    for name in ["a", "b", "c", "d"] {
        let tree = fixture(&format!("unlabelable-{name}.tree"));
        assert_eq!(tree.height(), 3);
        assert!(!labelable(&tree), "unlabelable-{name}");
        assert!(!splice_reduce(&tree).unwrap().reducible, "unlabelable-{name}");
    }
}

#[test]
fn first_fixture_tree_is_the_full_binary_tree() {
    let tree = fixture("labelable-a.tree");
    assert!(tree.is_full_binary());
    assert!(splice_reduce(&tree).unwrap().steps.is_empty());
}

#[test]
fn eight_chains_split_into_four_subject_pairs() {
    let tree = fixture("labelable-c.tree");
    let reduction = splice_reduce(&tree).unwrap();
    assert_eq!(reduction.steps.iter().filter(|s| s.level == 1).count(), 6);
    let l = labelling_from_reduction(&tree, &reduction.steps).unwrap();
    // every chain is labelled all the way up, so the four length-2 subjects
    // sit on distinct chains
    let level2: Vec<BitString> = tree.level(2).to_vec();
    let subjects: BTreeSet<BitString> = level2.iter().filter_map(|n| l.get(n).cloned()).collect();
    assert_eq!(subjects.len(), 4);
    assert!(subjects.iter().all(|s| s.len() == 2));
}

#[test]
fn small_example_trees() {
    assert!(!labelable(&fixture("single-path.tree")));
    assert!(!labelable(&fixture("unbalanced-pair.tree")));
    assert!(!labelable(&fixture("empty-top.tree")));
    assert!(labelable(&fixture("seven-of-sixteen.tree")));
}
