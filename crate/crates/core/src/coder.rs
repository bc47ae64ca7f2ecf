//! Block coding of arbitrary sources into paths through a class with the
//! extension property, and the decoding functional that inverts it.
//!
//! For each extendible node `σ` of length `L(i)` a [`WordTable`] holds
//! `2^m(i)` distinct extendible words of length `L(i+1)`. Source block `i`,
//! read as a number `t`, selects word `t`; decoding looks the word back up.

use std::cell::Cell;
use std::collections::HashMap;
use std::fmt::Write as _;

use crate::bits::BitString;
use crate::clopen::{prune, ApproxSequence, ClopenClass, PruneOutcome};
use crate::error::{Error, Result};
use crate::schedule::Schedule;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SlotAction {
    Assign(BitString),
    Clear,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableEvent {
    pub stage: usize,
    pub slot: usize,
    pub action: SlotAction,
}

/// The words `w_j(σ)` for one node, with the history of how they settled.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WordTable {
    pub node: BitString,
    pub level: usize,
    pub slots: Vec<Option<BitString>>,
    pub history: Vec<TableEvent>,
}

impl WordTable {
    pub fn word(&self, slot: usize) -> Option<&BitString> {
        self.slots.get(slot).and_then(Option::as_ref)
    }

    pub fn is_complete(&self) -> bool {
        self.slots.iter().all(Option::is_some)
    }

    /// Slot holding `word`, if any.
    pub fn slot_of(&self, word: &BitString) -> Option<usize> {
        self.slots.iter().position(|w| w.as_ref() == Some(word))
    }
}

/// Index `i` with `L(i) = len`.
fn level_of(sched: &Schedule, len: usize) -> Option<usize> {
    let mut total = 0u64;
    for i in 0.. {
        if total == len as u64 {
            return Some(i);
        }
        if total > len as u64 {
            return None;
        }
        total += sched.l(i)?;
    }
    unreachable!()
}

fn table_shape(
    depth: usize,
    sched: &Schedule,
    sigma: &BitString,
) -> Result<(usize, usize, usize)> {
    let level = level_of(sched, sigma.len()).ok_or_else(|| {
        Error::Invariant(format!("{sigma:?} is not at a block boundary of {sched}"))
    })?;
    let m = sched.m(level).ok_or_else(|| Error::Schedule(format!("no block {level}")))?;
    let target = sigma.len() + sched.l(level).expect("m defined") as usize;
    if target > depth {
        return Err(Error::TooDeep { len: target, depth });
    }
    if m >= usize::BITS as u64 {
        return Err(Error::Schedule(format!("block {level} has {m} bits, too many slots")));
    }
    Ok((level, 1usize << m, target))
}

/// Least extendible `target`-bit extension of `σ` that is `>= lo` (same length).
fn next_word(class: &ClopenClass, sigma: &BitString, lo: &BitString) -> Option<BitString> {
    let found = class.least_extendible_from(lo)?;
    sigma.is_prefix_of(&found).then_some(found)
}

/// Runs the assignment process for `σ` against the stages of `approx`; the
/// final stage is repeated until the table stops changing.
///
/// Each stage takes the least slot that is empty (case a) or holds a word no
/// longer extendible (case b). Case (a) fills it with the least extendible
/// extension not already in the table, case (b) clears it. Because the stages
/// only shrink, every word before the greatest word ever assigned is either in
/// the table or dead, so the search resumes after that word.
pub fn settle_words_staged(
    approx: &ApproxSequence,
    sched: &Schedule,
    sigma: &BitString,
) -> Result<WordTable> {
    let (level, slots, target) = table_shape(approx.depth(), sched, sigma)?;
    let mut table = WordTable {
        node: sigma.clone(),
        level,
        slots: vec![None; slots],
        history: Vec::new(),
    };
    let mut cursor = Some(sigma.concat(&BitString::zeros(target - sigma.len())));
    let mut stage = 0usize;
    loop {
        let class = approx.stage(stage + 1);
        let pending = table.slots.iter().position(|w| match w {
            None => true,
            Some(w) => !class.is_extendible(w).expect("word within depth"),
        });
        let Some(t) = pending else {
            if stage + 1 >= approx.last_index() {
                break;
            }
            stage += 1;
            continue;
        };
        stage += 1;
        if table.slots[t].is_some() {
            table.slots[t] = None;
            table.history.push(TableEvent {
                stage,
                slot: t,
                action: SlotAction::Clear,
            });
            continue;
        }
        let Some(word) = cursor.as_ref().and_then(|lo| next_word(class, sigma, lo)) else {
            // the process terminates with the table as it stands
            let found = approx
                .final_class()
                .count_extendible_extensions(sigma, target)?;
            return Err(Error::ExtensionViolated {
                node: sigma.clone(),
                found,
                needed: (slots as u64).into(),
            });
        };
        cursor = word.successor();
        table.slots[t] = Some(word.clone());
        table.history.push(TableEvent {
            stage,
            slot: t,
            action: SlotAction::Assign(word),
        });
    }
    Ok(table)
}

/// The settled table for `σ` against a fixed class: its first `2^m(i)`
/// extendible extensions of length `L(i+1)`, in lexicographic order.
pub fn settle_words(class: &ClopenClass, sched: &Schedule, sigma: &BitString) -> Result<WordTable> {
    settle_words_staged(&ApproxSequence::single(class.clone()), sched, sigma)
}

/// A coded prefix: the source, its code, and the slot chosen in each block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodePath {
    pub source: BitString,
    pub code: BitString,
    pub slots: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decoded {
    pub source: BitString,
    /// Oracle length consulted to produce each source bit.
    pub use_profile: Vec<u64>,
}

/// Oracle access that records how far into `Y` the decoder has looked.
pub struct OracleTape<'a> {
    bits: &'a BitString,
    high_water: Cell<usize>,
}

impl<'a> OracleTape<'a> {
    pub fn new(bits: &'a BitString) -> Self {
        OracleTape {
            bits,
            high_water: Cell::new(0),
        }
    }

    /// The first `n` bits, recording the access.
    pub fn prefix(&self, n: usize) -> Result<BitString> {
        if n > self.bits.len() {
            return Err(Error::OracleTooShort {
                have: self.bits.len(),
                need: n,
            });
        }
        self.high_water.set(self.high_water.get().max(n));
        Ok(self.bits.prefix(n))
    }

    pub fn high_water(&self) -> usize {
        self.high_water.get()
    }
}

/// A class and schedule with memoized word tables.
#[derive(Clone, Debug)]
pub struct CodingSession {
    class: ClopenClass,
    sched: Schedule,
    tables: HashMap<BitString, WordTable>,
}

impl CodingSession {
    pub fn new(class: ClopenClass, sched: Schedule) -> Self {
        CodingSession {
            class,
            sched,
            tables: HashMap::new(),
        }
    }

    pub fn class(&self) -> &ClopenClass {
        &self.class
    }

    pub fn schedule(&self) -> &Schedule {
        &self.sched
    }

    pub fn table(&mut self, sigma: &BitString) -> Result<&WordTable> {
        if !self.tables.contains_key(sigma) {
            let table = settle_words(&self.class, &self.sched, sigma)?;
            self.tables.insert(sigma.clone(), table);
        }
        Ok(&self.tables[sigma])
    }

    fn block_bounds(&self, n: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        let m = (0..=n)
            .map(|i| self.sched.source_len(i).map(|v| v as usize))
            .collect::<Option<Vec<_>>>();
        let l = (0..=n)
            .map(|i| self.sched.code_len(i).map(|v| v as usize))
            .collect::<Option<Vec<_>>>();
        match (m, l) {
            (Some(m), Some(l)) => {
                if l[n] > self.class.depth() {
                    return Err(Error::TooDeep {
                        len: l[n],
                        depth: self.class.depth(),
                    });
                }
                Ok((m, l))
            }
            _ => Err(Error::Schedule(format!("schedule has fewer than {n} blocks"))),
        }
    }

    /// Builds `Y` of length `L(n)` with `Φ(Y) = X`, where `|X| = M(n)`.
    pub fn encode(&mut self, source: &BitString) -> Result<CodePath> {
        let n = self
            .sched
            .levels_for_source(source.len() as u64)
            .ok_or(Error::SourceLength { len: source.len() })?;
        let (m, _) = self.block_bounds(n)?;
        if n > 0 && self.class.is_empty() {
            return Err(Error::EmptyClass);
        }
        let mut code = BitString::empty();
        let mut slots = Vec::with_capacity(n);
        for i in 0..n {
            let t = source.suffix_from(m[i]).prefix(m[i + 1] - m[i]).to_index() as usize;
            let word = self
                .table(&code)?
                .word(t)
                .cloned()
                .ok_or_else(|| Error::Invariant(format!("slot {t} undefined at {code:?}")))?;
            code = word;
            slots.push(t);
        }
        Ok(CodePath {
            source: source.clone(),
            code,
            slots,
        })
    }

    /// Applies the decoding functional to the first `L(n)` bits of `Y`.
    pub fn decode(&mut self, oracle: &BitString, n: usize) -> Result<Decoded> {
        let (m, l) = self.block_bounds(n)?;
        let tape = OracleTape::new(oracle);
        let mut source = BitString::empty();
        let mut use_profile = Vec::with_capacity(m[n]);
        for i in 0..n {
            let sigma = tape.prefix(l[i])?;
            if !self.class.is_extendible(&sigma)? {
                return Err(Error::OutsideCodeTree { block: i });
            }
            let word = tape.prefix(l[i + 1])?;
            let j = self
                .table(&sigma)?
                .slot_of(&word)
                .ok_or(Error::OutsideCodeTree { block: i })?;
            source.extend_from(&BitString::from_index(j as u128, m[i + 1] - m[i]));
            let used = tape.high_water() as u64;
            use_profile.extend(std::iter::repeat_n(used, m[i + 1] - m[i]));
        }
        Ok(Decoded {
            source,
            use_profile,
        })
    }
}

/// Encodes `X` through `P` directly; `P` must already have the extension property.
pub fn encode(source: &BitString, class: &ClopenClass, sched: &Schedule) -> Result<CodePath> {
    CodingSession::new(class.clone(), sched.clone()).encode(source)
}

pub fn decode(oracle: &BitString, class: &ClopenClass, sched: &Schedule, n: usize) -> Result<Decoded> {
    CodingSession::new(class.clone(), sched.clone()).decode(oracle, n)
}

#[derive(Clone, Debug)]
pub struct EndToEnd {
    pub pruned: PruneOutcome,
    pub levels: usize,
    pub path: CodePath,
    pub decoded: Decoded,
}

/// Prunes `P`, encodes `X` against the result, decodes it back, and checks
/// both the recovered source and the per-bit oracle use.
pub fn end_to_end(source: &BitString, class: &ClopenClass, sched: &Schedule) -> Result<EndToEnd> {
    let levels = sched
        .levels_for_source(source.len() as u64)
        .ok_or(Error::SourceLength { len: source.len() })?;
    let pruned = prune(class, sched, levels)?;
    let mut session = CodingSession::new(pruned.pstar.clone(), sched.clone());
    let path = session.encode(source)?;
    let decoded = session.decode(&path.code, levels)?;
    if decoded.source != *source {
        return Err(Error::Invariant(format!(
            "decoded {:?} differs from source {:?}",
            decoded.source, source
        )));
    }
    for (k, &used) in decoded.use_profile.iter().enumerate() {
        if Some(used) != sched.oracle_use_bound(k as u64) {
            return Err(Error::Invariant(format!("bit {k} consulted {used} oracle bits")));
        }
    }
    Ok(EndToEnd {
        pruned,
        levels,
        path,
        decoded,
    })
}

/// Zero-pads `X` to the next block boundary `M(n)`; returns the padded source and `n`.
pub fn pad_source(source: &BitString, sched: &Schedule) -> Result<(BitString, usize)> {
    let n = sched
        .levels_covering(source.len() as u64)
        .ok_or(Error::SourceLength { len: source.len() })?;
    let target = sched.source_len(n).expect("covered") as usize;
    Ok((source.concat(&BitString::zeros(target - source.len())), n))
}

/// Code file: header lines, then the per-bit use profile as CSV.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodeFile {
    pub bits: usize,
    pub levels: usize,
    pub schedule: String,
    pub code: BitString,
    pub slots: Vec<usize>,
    pub use_profile: Vec<u64>,
}

impl CodeFile {
    pub fn render(&self) -> String {
        let slots: Vec<String> = self.slots.iter().map(usize::to_string).collect();
        let mut out = format!(
            "bits={}\nlevels={}\nschedule={}\ncode={}\nslots={}\nbit,use\n",
            self.bits,
            self.levels,
            self.schedule,
            self.code.to_token(),
            slots.join(",")
        );
        for (k, u) in self.use_profile.iter().enumerate() {
            let _ = writeln!(out, "{k},{u}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<CodeFile> {
        let mut lines = text.lines().enumerate();
        let mut header = |key: &str| -> Result<String> {
            let (i, line) = lines
                .next()
                .ok_or_else(|| Error::parse(1, format!("missing {key}= line")))?;
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix('='))
                .map(str::to_string)
                .ok_or_else(|| Error::parse(i + 1, format!("expected {key}=")))
        };
        let num = |v: String, line: usize| -> Result<usize> {
            v.trim().parse().map_err(|_| Error::parse(line, "invalid number"))
        };
        let bits = num(header("bits")?, 1)?;
        let levels = num(header("levels")?, 2)?;
        let schedule = header("schedule")?;
        let code = BitString::parse(&header("code")?).map_err(|_| Error::parse(4, "invalid code string"))?;
        let slot_text = header("slots")?;
        let slots = if slot_text.trim().is_empty() {
            Vec::new()
        } else {
            slot_text
                .split(',')
                .map(|s| num(s.to_string(), 5))
                .collect::<Result<_>>()?
        };
        let mut use_profile = Vec::new();
        for (i, line) in lines.skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let (_, u) = line
                .split_once(',')
                .ok_or_else(|| Error::parse(i + 1, "expected bit,use"))?;
            use_profile.push(u.trim().parse().map_err(|_| Error::parse(i + 1, "invalid use"))?);
        }
        Ok(CodeFile {
            bits,
            levels,
            schedule,
            code,
            slots,
            use_profile,
        })
    }
}
