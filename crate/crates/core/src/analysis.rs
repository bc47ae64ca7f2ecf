//! The negative direction: when the overheads `g(i)` have a divergent sum,
//! a class whose leftmost path looks random must have a prefix of low
//! density. Everything here is a finite run of that argument with exact
//! measures.
//!
//! Truncation `C^[≤r]` enumerates `C` one string at a time in lexicographic
//! order and stops at the last stage whose measure is still at most `r`.

use std::fmt::Write as _;

use num_bigint::BigUint;
use rayon::prelude::*;

use crate::bits::BitString;
use crate::clopen::{ApproxSequence, ClopenClass};
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};

fn check_len(p: &ClopenClass, i: usize) -> Result<()> {
    if i > p.depth() {
        return Err(Error::TooDeep {
            len: i,
            depth: p.depth(),
        });
    }
    Ok(())
}

/// The lexicographically least `P`-extendible string of length `i`.
pub fn leftmost_extendible(p: &ClopenClass, i: usize) -> Result<BitString> {
    check_len(p, i)?;
    p.least_extendible_from(&BitString::zeros(i))
        .ok_or(Error::EmptyClass)
}

/// `U_i`: the leftmost extendible string of length `i` and every string of
/// that length to its left.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeftSet {
    /// The strings of `U_i`, as a class of depth `i`.
    pub set: ClopenClass,
    pub pivot: BitString,
    /// `μ(P ∩ U_i)`, computed from the intersection.
    pub mass: Dyadic,
    /// `μ(P ∩ U_i) = 2^-i`: the pivot's cylinder lies entirely inside `P`.
    pub at_boundary: bool,
}

/// Strings of length `|pivot|` that are `≤ pivot`, as a class of that depth.
fn strings_up_to(pivot: &BitString) -> Result<ClopenClass> {
    let mut cylinders: Vec<BitString> = (0..pivot.len())
        .filter(|&j| pivot.bit(j))
        .map(|j| pivot.prefix(j).child(false))
        .collect();
    cylinders.push(pivot.clone());
    ClopenClass::from_cylinders(pivot.len(), cylinders.iter())
}

pub fn left_sets(p: &ClopenClass, i: usize) -> Result<LeftSet> {
    let pivot = leftmost_extendible(p, i)?;
    let set = strings_up_to(&pivot)?;
    let mass = p.intersection(&set.refine(p.depth())?)?.measure();
    let bound = Dyadic::pow2(-(i as i64));
    if mass > bound {
        return Err(Error::Invariant(format!(
            "left set of length {i} carries mass {mass} > {bound}"
        )));
    }
    Ok(LeftSet {
        set,
        pivot,
        at_boundary: mass == bound,
        mass,
    })
}

/// `C^[≤r]` restricted to `[σ]`, with `C` enumerated in lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Truncation {
    pub threshold: Dyadic,
}

impl Truncation {
    pub fn new(threshold: Dyadic) -> Self {
        Truncation { threshold }
    }

    /// The longest lexicographic initial segment of `C ∩ [σ]` with measure at
    /// most the threshold.
    pub fn apply(&self, c: &ClopenClass, sigma: &BitString) -> Result<ClopenClass> {
        let k = self.threshold.floor_scaled(c.depth() as u32);
        c.first_members_under(sigma, &k)
    }
}

/// `1 - 2^(-g-1)`.
fn shrink_factor(g: u64) -> Dyadic {
    let e = g as u32 + 1;
    Dyadic::new((BigUint::from(1u32) << e) - 1u32, e)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VtLevel {
    pub t: usize,
    pub len: usize,
    /// `V_t` as a class of depth `n_t`.
    pub v: ClopenClass,
    pub measure: Dyadic,
    /// `∏_{i<t} (1 - 2^(-g(i)-1))`.
    pub product_bound: Dyadic,
}

/// A prefix of the leftmost path at which it leaves the `V` chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VtWitness {
    pub t: usize,
    pub sigma: BitString,
    pub density: Dyadic,
    pub threshold: Dyadic,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VtRun {
    pub levels: Vec<VtLevel>,
    pub path: BitString,
    /// Greatest `t` with `path↾n_t ∈ V_t`.
    pub last_inside: usize,
    /// Present when the path leaves the chain before `t_max`.
    pub witness: Option<VtWitness>,
}

impl VtRun {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,n,measure,product_bound,path_inside\n");
        for l in &self.levels {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                l.t,
                l.len,
                l.measure,
                l.product_bound,
                l.t <= self.last_inside
            );
        }
        out
    }
}

/// The left sets `U_{n_t}` for `t = 0..=t_max` of a staged class: the union
/// over all nonempty stages, since later stages only move the pivot right.
pub fn left_set_chain(p: &ApproxSequence, lens: &[usize]) -> Result<Vec<ClopenClass>> {
    lens.iter()
        .map(|&n| {
            let mut acc = ClopenClass::empty(n)?;
            for stage in p.stages().iter().filter(|s| !s.is_empty()) {
                acc = acc.union(&left_sets(stage, n)?.set)?;
            }
            Ok(acc)
        })
        .collect()
}

/// Builds `V_0 ⊇ V_1 ⊇ … ⊇ V_{t_max}`: `V_0` is every string of length
/// `n_0`, and for `σ ∈ V_t`
///
/// `V_{t+1} ∩ [σ] = (U_{n_{t+1}} ∩ [σ])^[≤ 2^-|σ| (1 - 2^(-g(t)-1))]`
///
/// with `U` the left sets of `P`. Then follows the leftmost path of the final
/// stage of `P` down the chain and, if it drops out at some `t < t_max`,
/// reports its length-`n_t` prefix with its `P`-density.
///
/// Work is proportional to the number of strings in the `V_t`.
pub fn vt_construction(
    p: &ApproxSequence,
    g: &[u64],
    lens: &[usize],
    t_max: usize,
) -> Result<VtRun> {
    if lens.len() <= t_max || g.len() < t_max {
        return Err(Error::Invariant(format!(
            "{} level lengths and {} overheads given for t_max = {t_max}",
            lens.len(),
            g.len()
        )));
    }
    for t in 0..t_max {
        if lens[t + 1] as u64 <= lens[t] as u64 + g[t] {
            return Err(Error::LevelSpacing(t));
        }
    }
    check_len(p.final_class(), lens[t_max])?;
    let path = leftmost_extendible(p.final_class(), p.depth())?;
    let u = left_set_chain(p, &lens[..=t_max])?;

    let v0 = ClopenClass::full(lens[0])?;
    let mut levels = vec![VtLevel {
        t: 0,
        len: lens[0],
        measure: v0.measure(),
        v: v0,
        product_bound: Dyadic::one(),
    }];
    for t in 0..t_max {
        let factor = shrink_factor(g[t]);
        let prev = &levels[t];
        let mut members = Vec::new();
        for sigma in prev.v.members() {
            let cap = Truncation::new(Dyadic::pow2(-(sigma.len() as i64)) * factor.clone());
            members.extend(cap.apply(&u[t + 1], &sigma)?.members());
        }
        let v = ClopenClass::from_members(lens[t + 1], members)?;
        levels.push(VtLevel {
            t: t + 1,
            len: lens[t + 1],
            measure: v.measure(),
            v,
            product_bound: &prev.product_bound * &factor,
        });
    }

    let last_inside = (0..=t_max)
        .take_while(|&t| levels[t].v.contains(&path.prefix(lens[t])))
        .last()
        .expect("V_0 holds every string");
    let witness = if last_inside < t_max {
        let sigma = path.prefix(lens[last_inside]);
        Some(VtWitness {
            t: last_inside,
            density: p.final_class().density(&sigma)?,
            threshold: Dyadic::pow2(-(g[last_inside] as i64)),
            sigma,
        })
    } else {
        None
    };
    Ok(VtRun {
        levels,
        path,
        last_inside,
        witness,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThresholdRow {
    pub level: usize,
    /// Least density over extendible strings of length `L_level`; `None`
    /// when there are none.
    pub min_density: Option<Dyadic>,
    pub threshold: Dyadic,
}

impl ThresholdRow {
    pub fn pass(&self) -> bool {
        self.min_density.as_ref().is_none_or(|d| *d >= self.threshold)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThresholdReport {
    pub rows: Vec<ThresholdRow>,
}

impl ThresholdReport {
    /// Levels where some extendible string falls below `2^-g`.
    pub fn failing_levels(&self) -> Vec<usize> {
        self.rows.iter().filter(|r| !r.pass()).map(|r| r.level).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,min_density,threshold,pass\n");
        for r in &self.rows {
            let min = r.min_density.as_ref().map_or("none".to_string(), Dyadic::to_string);
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.level,
                min,
                r.threshold,
                if r.pass() { "pass" } else { "fail" }
            );
        }
        out
    }
}

/// For each level `i`, the least `P`-density over `P`-extendible strings of
/// length `L_i`, beside `2^-g(i)`.
pub fn density_threshold_experiment(
    p: &ClopenClass,
    g: &[u64],
    lens: &[usize],
) -> Result<ThresholdReport> {
    if g.len() < lens.len() {
        return Err(Error::Invariant(format!(
            "{} overheads for {} levels",
            g.len(),
            lens.len()
        )));
    }
    for t in 0..lens.len().saturating_sub(1) {
        if lens[t + 1] as u64 <= lens[t] as u64 + g[t] {
            return Err(Error::LevelSpacing(t));
        }
    }
    if let Some(&deepest) = lens.last() {
        check_len(p, deepest)?;
    }
    let rows = lens
        .par_iter()
        .enumerate()
        .map(|(i, &len)| {
            // strings inside a full cylinder have density 1
            let partial = p
                .partial_nodes_at(len)
                .iter()
                .map(|s| p.density(s))
                .collect::<Result<Vec<_>>>()?;
            let min_density = match partial.into_iter().min() {
                Some(d) => Some(d),
                None if p.has_full_cylinder_within(len) => Some(Dyadic::one()),
                None => None,
            };
            Ok(ThresholdRow {
                level: i,
                min_density,
                threshold: Dyadic::pow2(-(g[i] as i64)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ThresholdReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clopen::prune;
    use crate::coder::{settle_words_staged, SlotAction};
    use crate::instances::{leftmost_path_sequence, seeded_rng};
    use crate::schedule::Schedule;

    fn bs(s: &str) -> BitString {
        BitString::from(s)
    }

    fn class(depth: usize, members: &[&str]) -> ClopenClass {
        ClopenClass::from_members(depth, members.iter().map(|m| bs(m))).unwrap()
    }

    #[test]
    fn leftmost_examples() {
        assert_eq!(leftmost_extendible(&ClopenClass::full(3).unwrap(), 2).unwrap(), bs("00"));
        assert_eq!(leftmost_extendible(&class(2, &["10", "11"]), 1).unwrap(), bs("1"));
        assert_eq!(
            leftmost_extendible(&ClopenClass::empty(2).unwrap(), 1),
            Err(Error::EmptyClass)
        );
    }

    #[test]
    fn left_set_examples() {
        let p = class(2, &["10", "11"]);
        let u1 = left_sets(&p, 1).unwrap();
        assert_eq!(u1.set.members(), vec![bs("0"), bs("1")]);
        assert_eq!(u1.mass, Dyadic::pow2(-1));
        assert!(u1.at_boundary);

        let u1 = left_sets(&ClopenClass::full(2).unwrap(), 1).unwrap();
        assert_eq!(u1.set.members(), vec![bs("0")]);
        let u0 = left_sets(&p, 0).unwrap();
        assert_eq!(u0.set.members(), vec![BitString::empty()]);
    }

    #[test]
    fn left_set_mass_by_enumeration() {
        let p = class(4, &["0110", "0111", "1000", "1101"]);
        for i in 0..=4 {
            let u = left_sets(&p, i).unwrap();
            let inside = p
                .members()
                .iter()
                .filter(|m| u.set.contains(&m.prefix(i)))
                .count();
            assert_eq!(u.mass, Dyadic::new(inside as u32, 4));
            assert!(u.mass <= Dyadic::pow2(-(i as i64)));
        }
    }

    #[test]
    fn truncation_takes_a_lex_prefix() {
        let c = class(3, &["000", "001", "011", "100", "110"]);
        let cut = Truncation::new("3/8".parse().unwrap()).apply(&c, &BitString::empty()).unwrap();
        assert_eq!(cut.members(), vec![bs("000"), bs("001"), bs("011")]);
        let cut = Truncation::new("1/4".parse().unwrap()).apply(&c, &bs("1")).unwrap();
        assert_eq!(cut.members(), vec![bs("100"), bs("110")]);
        let cut = Truncation::new("1/8".parse().unwrap()).apply(&c, &bs("01")).unwrap();
        assert_eq!(cut.members(), vec![bs("011")]);
    }

    #[test]
    fn zero_steps_gives_v0_only() {
        let p = ApproxSequence::single(ClopenClass::full(4).unwrap());
        let run = vt_construction(&p, &[], &[2], 0).unwrap();
        assert_eq!(run.levels.len(), 1);
        assert_eq!(run.levels[0].v.members().len(), 4);
        assert_eq!(run.witness, None);
    }

    #[test]
    fn spacing_is_checked() {
        let p = ApproxSequence::single(ClopenClass::full(6).unwrap());
        assert_eq!(
            vt_construction(&p, &[1, 1], &[0, 2, 3], 2),
            Err(Error::LevelSpacing(1))
        );
    }

    #[test]
    fn full_class_path_never_leaves() {
        // the leftmost path 000… always fits under the cap
        let p = ApproxSequence::single(ClopenClass::full(8).unwrap());
        let run = vt_construction(&p, &[1; 4], &[0, 2, 4, 6, 8], 4).unwrap();
        assert_eq!(run.last_inside, 4);
        assert!(run.witness.is_none());
    }

    #[test]
    fn runs_decay_and_witnesses_are_thin() {
        let mut rng = seeded_rng(11);
        let mut witnesses = 0;
        for _ in 0..20 {
            let (path, p) = leftmost_path_sequence(&mut rng, 12).unwrap();
            let run = vt_construction(&p, &[1; 6], &[0, 2, 4, 6, 8, 10, 12], 6).unwrap();
            assert_eq!(run.path, path);
            for pair in run.levels.windows(2) {
                let factor = shrink_factor(1);
                assert!(pair[1].measure <= &pair[0].measure * &factor);
                assert!(pair[1].measure <= pair[1].product_bound);
                assert!(pair[1].v.refine(12).unwrap().is_subset(&pair[0].v.refine(12).unwrap()));
            }
            if let Some(w) = run.witness {
                witnesses += 1;
                // count the members under σ directly
                let under = p
                    .final_class()
                    .members()
                    .iter()
                    .filter(|m| w.sigma.is_prefix_of(m))
                    .count();
                let density = Dyadic::new(under as u32, (12 - w.sigma.len()) as u32);
                assert_eq!(density, w.density);
                assert!(density <= Dyadic::pow2(-1));
            }
        }
        assert!(witnesses > 0);
    }

    #[test]
    fn g_zero_still_bounds_density_by_one() {
        let mut rng = seeded_rng(5);
        let (_, p) = leftmost_path_sequence(&mut rng, 8).unwrap();
        let run = vt_construction(&p, &[0; 8], &(0..=8).collect::<Vec<_>>(), 8).unwrap();
        if let Some(w) = run.witness {
            assert!(w.density <= Dyadic::one());
        }
    }

    #[test]
    fn threshold_experiment_examples() {
        let lens = [0, 2, 4, 6];
        let g = [1, 1, 1, 1];
        let full = density_threshold_experiment(&ClopenClass::full(6).unwrap(), &g, &lens).unwrap();
        assert!(full.rows.iter().all(|r| r.min_density == Some(Dyadic::one())));

        // one thin branch below 01: a single member out of 16
        let mut p = ClopenClass::full(6).unwrap();
        p.remove_cylinder(&bs("01")).unwrap();
        p.insert_cylinder(&bs("010000")).unwrap();
        let report = density_threshold_experiment(&p, &g, &lens).unwrap();
        assert_eq!(report.failing_levels(), vec![1, 2]);
        assert_eq!(report.rows[1].min_density, Some(Dyadic::pow2(-4)));
        assert_eq!(
            report.to_csv().lines().nth(2),
            Some("1,1/2^4,1/2^1,fail")
        );
    }

    #[test]
    fn pruned_class_clears_its_thresholds() {
        let sched = Schedule::kucera();
        let mut p = ClopenClass::full(13).unwrap();
        for s in ["0000", "0101", "11", "1001"] {
            p.remove_cylinder(&bs(s)).unwrap();
        }
        let out = prune(&p, &sched, 3).unwrap();
        let lens: Vec<usize> = (0..3).map(|i| sched.code_len(i).unwrap() as usize).collect();
        let g: Vec<u64> = (0..3).map(|i| sched.overhead(i).unwrap()).collect();
        let report = density_threshold_experiment(&out.pstar, &g, &lens).unwrap();
        for r in &report.rows {
            assert!(r.min_density.clone().unwrap() > r.threshold, "{r:?}");
        }
    }

    #[test]
    fn staged_tables_clear_dead_words() {
        // stage 1 kills the first words the table picked
        let sched = Schedule::kucera();
        let full = ClopenClass::full(8).unwrap();
        let mut later = full.clone();
        later.remove_cylinder(&bs("000")).unwrap();
        let seq = ApproxSequence::new(vec![full.clone(), full, later.clone()]).unwrap();
        let table = settle_words_staged(&seq, &sched, &BitString::empty()).unwrap();
        assert!(table.history.iter().any(|e| e.action == SlotAction::Clear));
        for w in table.slots.iter().flatten() {
            assert!(later.is_extendible(w).unwrap());
        }
    }
}
