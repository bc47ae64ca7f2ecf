//! Finite binary words.
//!
//! The derived ordering on [`BitString`] is the lexicographic order in which a
//! proper prefix precedes its extensions, so `BTreeSet<BitString>` iterates in
//! the order the coding constructions scan strings.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    /// The empty string.
    pub fn empty() -> Self {
        BitString { bits: Vec::new() }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        BitString { bits }
    }

    pub fn zeros(len: usize) -> Self {
        BitString {
            bits: vec![false; len],
        }
    }

    /// The `len`-bit big-endian binary expansion of `value`, i.e. the string
    /// with index `value` among the strings of length `len` in lexicographic order.
    pub fn from_index(value: u128, len: usize) -> Self {
        assert!(len >= 128 || value >> len == 0, "{value} does not fit in {len} bits");
        let bits = (0..len)
            .map(|i| {
                let shift = len - 1 - i;
                shift < 128 && (value >> shift) & 1 == 1
            })
            .collect();
        BitString { bits }
    }

    /// Index of this string among the strings of its length in lexicographic order.
    pub fn to_index(&self) -> u128 {
        assert!(self.len() <= 128, "index of a {}-bit string does not fit in u128", self.len());
        self.bits.iter().fold(0u128, |acc, &b| (acc << 1) | b as u128)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().copied()
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    pub fn extend_from(&mut self, other: &BitString) {
        self.bits.extend_from_slice(&other.bits);
    }

    pub fn child(&self, bit: bool) -> BitString {
        let mut out = self.clone();
        out.push(bit);
        out
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut out = self.clone();
        out.extend_from(other);
        out
    }

    /// The first `n` bits. Panics if `n > len`.
    pub fn prefix(&self, n: usize) -> BitString {
        BitString {
            bits: self.bits[..n].to_vec(),
        }
    }

    pub fn suffix_from(&self, n: usize) -> BitString {
        BitString {
            bits: self.bits[n..].to_vec(),
        }
    }

    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        other.bits.starts_with(&self.bits)
    }

    /// Successor among strings of the same length, `None` for `1^n`.
    pub fn successor(&self) -> Option<BitString> {
        let mut bits = self.bits.clone();
        for i in (0..bits.len()).rev() {
            if bits[i] {
                bits[i] = false;
            } else {
                bits[i] = true;
                return Some(BitString { bits });
            }
        }
        None
    }

    /// Parses an ASCII 0/1 word; `-` and the empty string denote the empty word.
    pub fn parse(text: &str) -> Result<BitString> {
        let text = text.trim();
        if text == "-" || text == "λ" {
            return Ok(BitString::empty());
        }
        text.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::parse(1, format!("invalid bit {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(BitString::from_bits)
    }

    /// Rendering used by the file formats: `-` for the empty word.
    pub fn to_token(&self) -> String {
        if self.is_empty() {
            "-".to_string()
        } else {
            self.to_string()
        }
    }
}

/// Lexicographic comparison with a proper prefix ordered before its extensions.
pub fn lex_compare(a: &BitString, b: &BitString) -> Ordering {
    a.cmp(b)
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BitString::parse(s)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            f.write_str("λ")
        } else {
            write!(f, "{self}")
        }
    }
}

impl From<&str> for BitString {
    /// Convenience for literals; panics on characters other than 0/1.
    fn from(s: &str) -> Self {
        BitString::parse(s).expect("bit string literal")
    }
}
