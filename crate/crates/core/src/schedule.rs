//! Coding schedules: source block lengths `m(i)`, code block lengths `l(i)`,
//! their prefix sums `M(n)`, `L(n)`, and the redundancy accounting built on them.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};

/// Named schedules. All add the overhead `ceil(2 log2(i + 2))` to `m(i)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    /// `m(i) = 1`.
    Kucera,
    /// `m(i) = i + 1`.
    Gacs,
    /// `m(i) = (i + 1)^2`.
    Square,
    /// `m(i) = floor(sqrt(i + 1))`.
    Sqrt,
}

impl Preset {
    fn name(self) -> &'static str {
        match self {
            Preset::Kucera => "kucera",
            Preset::Gacs => "gacs",
            Preset::Square => "square",
            Preset::Sqrt => "sqrt",
        }
    }

    fn m(self, i: usize) -> u64 {
        let i = i as u64;
        match self {
            Preset::Kucera => 1,
            Preset::Gacs => i + 1,
            Preset::Square => (i + 1) * (i + 1),
            Preset::Sqrt => (i + 1).isqrt(),
        }
    }
}

/// `ceil(2 log2(i + 2))` in integers: the bit length of `(i + 2)^2 - 1`.
pub fn log_overhead(i: usize) -> u64 {
    let sq = (i as u64 + 2) * (i as u64 + 2);
    u64::from(u64::BITS - (sq - 1).leading_zeros())
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Kind {
    Preset(Preset),
    Custom { m: Vec<u64>, l: Vec<u64> },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Schedule {
    kind: Kind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Margin {
    pub partial_sum: Dyadic,
    pub within: bool,
}

impl Schedule {
    pub fn preset(preset: Preset) -> Self {
        Schedule {
            kind: Kind::Preset(preset),
        }
    }

    pub fn kucera() -> Self {
        Schedule::preset(Preset::Kucera)
    }

    pub fn gacs() -> Self {
        Schedule::preset(Preset::Gacs)
    }

    /// A finite schedule given block by block.
    pub fn custom(m: Vec<u64>, l: Vec<u64>) -> Result<Self> {
        if m.len() != l.len() {
            return Err(Error::Schedule(format!(
                "{} source blocks but {} code blocks",
                m.len(),
                l.len()
            )));
        }
        if m.is_empty() {
            return Err(Error::Schedule("custom schedule needs at least one block".into()));
        }
        for (index, (&mi, &li)) in m.iter().zip(&l).enumerate() {
            if mi == 0 {
                return Err(Error::Schedule(format!("block {index} has zero length")));
            }
            if li < mi {
                return Err(Error::NegativeOverhead { index, m: mi, l: li });
            }
        }
        Ok(Schedule {
            kind: Kind::Custom { m, l },
        })
    }

    /// Number of blocks, `None` for the unbounded presets.
    pub fn blocks(&self) -> Option<usize> {
        match &self.kind {
            Kind::Preset(_) => None,
            Kind::Custom { m, .. } => Some(m.len()),
        }
    }

    fn has_block(&self, i: usize) -> bool {
        self.blocks().is_none_or(|b| i < b)
    }

    pub fn m(&self, i: usize) -> Option<u64> {
        match &self.kind {
            Kind::Preset(p) => Some(p.m(i)),
            Kind::Custom { m, .. } => m.get(i).copied(),
        }
    }

    pub fn l(&self, i: usize) -> Option<u64> {
        match &self.kind {
            Kind::Preset(p) => Some(p.m(i) + log_overhead(i)),
            Kind::Custom { l, .. } => l.get(i).copied(),
        }
    }

    /// `g(i) = l(i) - m(i)`.
    pub fn overhead(&self, i: usize) -> Option<u64> {
        Some(self.l(i)? - self.m(i)?)
    }

    /// `M(n)`, the source length covered by the first `n` blocks.
    pub fn source_len(&self, n: usize) -> Option<u64> {
        (0..n).map(|i| self.m(i)).sum()
    }

    /// `L(n)`, the code length covered by the first `n` blocks.
    pub fn code_len(&self, n: usize) -> Option<u64> {
        (0..n).map(|i| self.l(i)).sum()
    }

    /// The block count `n` with `M(n) = len`, if `len` is a block boundary.
    pub fn levels_for_source(&self, len: u64) -> Option<usize> {
        let mut total = 0;
        let mut n = 0;
        loop {
            if total == len {
                return Some(n);
            }
            if total > len || !self.has_block(n) {
                return None;
            }
            total += self.m(n)?;
            n += 1;
        }
    }

    /// The least block count `n` with `M(n) >= len`.
    pub fn levels_covering(&self, len: u64) -> Option<usize> {
        let mut total = 0;
        let mut n = 0;
        while total < len {
            total += self.m(n)?;
            n += 1;
        }
        Some(n)
    }

    /// The block `s` with `M(s) <= bit < M(s + 1)`.
    pub fn block_of_bit(&self, bit: u64) -> Option<usize> {
        let mut end = 0;
        let mut s = 0;
        loop {
            end += self.m(s)?;
            if bit < end {
                return Some(s);
            }
            s += 1;
        }
    }

    /// `L(s + 1)` for the block `s` containing source bit `bit`.
    pub fn oracle_use_bound(&self, bit: u64) -> Option<u64> {
        self.code_len(self.block_of_bit(bit)? + 1)
    }

    /// Exact `sum_{i<k} 2^(m(i) - l(i))` and whether it stays below `budget`.
    pub fn convergence_margin(&self, k: usize, budget: &Dyadic) -> Result<Margin> {
        let partial_sum = (0..k)
            .map(|i| {
                self.overhead(i)
                    .map(|g| Dyadic::pow2(-(g as i64)))
                    .ok_or_else(|| Error::Schedule(format!("schedule has fewer than {k} blocks")))
            })
            .sum::<Result<Dyadic>>()?;
        let within = partial_sum < *budget;
        Ok(Margin {
            partial_sum,
            within,
        })
    }

    /// Use and redundancy for every source bit `n <= n_max` the schedule covers.
    pub fn redundancy_report(&self, n_max: u64) -> RedundancyReport {
        let mut rows = Vec::new();
        let mut partial_sums = Vec::new();
        let mut sum = Dyadic::zero();
        let (mut block, mut m_end, mut l_end) = (0usize, 0u64, 0u64);
        'bits: for n in 0..=n_max {
            while n >= m_end {
                match (self.m(block), self.l(block)) {
                    (Some(m), Some(l)) => {
                        m_end += m;
                        l_end += l;
                        sum = &sum + &Dyadic::pow2(m as i64 - l as i64);
                        partial_sums.push(sum.clone());
                        block += 1;
                    }
                    _ => break 'bits,
                }
            }
            rows.push(RedundancyRow {
                n,
                use_len: l_end,
                redundancy: l_end - n,
            });
        }
        RedundancyReport {
            schedule: self.to_string(),
            rows,
            partial_sums,
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Preset(p) => f.write_str(p.name()),
            Kind::Custom { m, l } => {
                let join = |v: &[u64]| v.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
                write!(f, "custom:m={};l={}", join(m), join(l))
            }
        }
    }
}

impl FromStr for Schedule {
    type Err = Error;

    /// `kucera`, `gacs`, `square`, `sqrt`, or `custom:m=1,2;l=3,4`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "kucera" => return Ok(Schedule::preset(Preset::Kucera)),
            "gacs" => return Ok(Schedule::preset(Preset::Gacs)),
            "square" => return Ok(Schedule::preset(Preset::Square)),
            "sqrt" => return Ok(Schedule::preset(Preset::Sqrt)),
            _ => {}
        }
        let bad = || Error::Schedule(format!("unrecognized schedule {s:?}"));
        let body = s.strip_prefix("custom:").ok_or_else(bad)?;
        let (mut m, mut l) = (None, None);
        for part in body.split(';') {
            let (key, list) = part.split_once('=').ok_or_else(bad)?;
            let values = list
                .split(',')
                .map(|v| v.trim().parse::<u64>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()?;
            match key.trim() {
                "m" => m = Some(values),
                "l" => l = Some(values),
                _ => return Err(bad()),
            }
        }
        Schedule::custom(m.ok_or_else(bad)?, l.ok_or_else(bad)?)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RedundancyRow {
    pub n: u64,
    pub use_len: u64,
    pub redundancy: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RedundancyReport {
    pub schedule: String,
    pub rows: Vec<RedundancyRow>,
    /// `sum_{i<k} 2^(m(i) - l(i))` for `k = 1, 2, ...` over the blocks reached.
    pub partial_sums: Vec<Dyadic>,
}

/// `n log2 n`, zero at `n = 0`.
pub fn bound_nlogn(n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        n as f64 * (n as f64).log2()
    }
}

/// `sqrt(n) log2 n`, zero at `n = 0`.
pub fn bound_sqrtnlogn(n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        (n as f64).sqrt() * (n as f64).log2()
    }
}

impl RedundancyReport {
    pub fn row(&self, n: u64) -> Option<&RedundancyRow> {
        self.rows.get(n as usize)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,use,redundancy,bound_nlogn,bound_sqrtnlogn\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6}",
                r.n,
                r.use_len,
                r.redundancy,
                bound_nlogn(r.n),
                bound_sqrtnlogn(r.n)
            );
        }
        out
    }
}
