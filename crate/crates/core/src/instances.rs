//! Seeded random instances. The same seed always yields the same instances.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bits::BitString;
use crate::clopen::{ApproxSequence, ClopenClass};
use crate::dyadic::Dyadic;
use crate::error::Result;
use crate::schedule::{Preset, Schedule};

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_bits<R: Rng>(rng: &mut R, len: usize) -> BitString {
    BitString::from_bits((0..len).map(|_| rng.gen()).collect())
}

/// A class of the given depth obtained from the full class by random edits,
/// skipping any edit that would bring the measure to `floor` or below. An edit
/// either removes a random cylinder or thins one down to a single narrower
/// cylinder inside it, which leaves low-density regions behind.
pub fn random_class<R: Rng>(rng: &mut R, depth: usize, floor: &Dyadic) -> Result<ClopenClass> {
    let mut class = ClopenClass::full(depth)?;
    if depth == 0 {
        return Ok(class);
    }
    let attempts = rng.gen_range(0..=3 * depth);
    for _ in 0..attempts {
        let len = rng.gen_range(1..=depth);
        let sigma = random_bits(rng, len);
        let mut next = class.clone();
        next.remove_cylinder(&sigma)?;
        if len < depth && rng.gen_bool(0.5) {
            let extra = rng.gen_range(1..=depth - len);
            let tau = sigma.concat(&random_bits(rng, extra));
            let keep = class.intersection(&ClopenClass::from_cylinders(depth, [&tau])?)?;
            next = next.union(&keep)?;
        }
        if next.measure() > *floor {
            class = next;
        }
    }
    Ok(class)
}

/// Deepest class used by the coding corpus.
pub const CORPUS_MAX_DEPTH: usize = 24;

#[derive(Clone, Debug)]
pub struct CodingInstance {
    pub preset: Preset,
    pub levels: usize,
    pub class: ClopenClass,
    pub source: BitString,
}

impl CodingInstance {
    pub fn schedule(&self) -> Schedule {
        Schedule::preset(self.preset)
    }
}

/// Block counts used for each preset in the corpus: 4 Kučera blocks reach
/// depth 19, 3 Gács blocks reach depth 16.
pub fn corpus_levels(preset: Preset) -> usize {
    match preset {
        Preset::Kucera => 4,
        _ => 3,
    }
}

/// `count` coding instances alternating between the Kučera and Gács presets.
/// Each class has depth in `[L(n), 24]` and measure above the pruning budget.
pub fn coding_corpus(seed: u64, count: usize) -> Result<Vec<CodingInstance>> {
    let mut rng = seeded_rng(seed);
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let preset = if k % 2 == 0 { Preset::Kucera } else { Preset::Gacs };
        let sched = Schedule::preset(preset);
        let levels = corpus_levels(preset);
        let min_depth = sched.code_len(levels).expect("preset is unbounded") as usize;
        let depth = rng.gen_range(min_depth..=CORPUS_MAX_DEPTH);
        let budget = sched.convergence_margin(levels, &Dyadic::one())?.partial_sum;
        let class = random_class(&mut rng, depth, &budget)?;
        let source = random_bits(&mut rng, sched.source_len(levels).expect("unbounded") as usize);
        out.push(CodingInstance {
            preset,
            levels,
            class,
            source,
        });
    }
    Ok(out)
}

/// A shrinking approximation whose final leftmost path is a random string:
/// stage 0 is full, stage 1 removes random cylinders that avoid the path, and
/// the last stage also removes everything lexicographically left of the path.
pub fn leftmost_path_sequence<R: Rng>(rng: &mut R, depth: usize) -> Result<(BitString, ApproxSequence)> {
    let path = random_bits(rng, depth);
    let full = ClopenClass::full(depth)?;
    let mut thinned = full.clone();
    for _ in 0..rng.gen_range(0..=depth) {
        let len = rng.gen_range(1..=depth.max(1));
        let sigma = random_bits(rng, len.min(depth));
        if !sigma.is_prefix_of(&path) {
            thinned.remove_cylinder(&sigma)?;
        }
    }
    // everything left of the path: σ0 for every prefix σ with σ1 on the path
    let mut last = thinned.clone();
    for i in 0..depth {
        if path.bit(i) {
            last.remove_cylinder(&path.prefix(i).child(false))?;
        }
    }
    Ok((path, ApproxSequence::new(vec![full, thinned, last])?))
}
