//! Exact non-negative dyadic rationals `numerator / 2^exponent`.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Mul};
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// A non-negative dyadic rational kept in canonical form: the numerator is odd,
/// or zero with exponent zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dyadic {
    num: BigUint,
    exp: u32,
}

impl Dyadic {
    pub fn zero() -> Self {
        Dyadic {
            num: BigUint::zero(),
            exp: 0,
        }
    }

    pub fn one() -> Self {
        Dyadic {
            num: BigUint::one(),
            exp: 0,
        }
    }

    pub fn new(num: impl Into<BigUint>, exp: u32) -> Self {
        Dyadic {
            num: num.into(),
            exp,
        }
        .normalized()
    }

    /// `2^k` for any integer `k`.
    pub fn pow2(k: i64) -> Self {
        if k >= 0 {
            Dyadic {
                num: BigUint::one() << (k as u64),
                exp: 0,
            }
        } else {
            Dyadic {
                num: BigUint::one(),
                exp: (-k) as u32,
            }
        }
    }

    fn normalized(mut self) -> Self {
        if self.num.is_zero() {
            self.exp = 0;
            return self;
        }
        let tz = self.num.trailing_zeros().unwrap_or(0).min(self.exp as u64);
        if tz > 0 {
            self.num >>= tz;
            self.exp -= tz as u32;
        }
        self
    }

    pub fn numerator(&self) -> &BigUint {
        &self.num
    }

    pub fn exponent(&self) -> u32 {
        self.exp
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// Multiplication by `2^k` without rounding.
    pub fn mul_pow2(&self, k: i64) -> Self {
        if self.is_zero() {
            return Dyadic::zero();
        }
        if k >= 0 {
            let k = k as u64;
            let drop = k.min(self.exp as u64);
            Dyadic {
                num: &self.num << (k - drop),
                exp: self.exp - drop as u32,
            }
        } else {
            Dyadic::new(self.num.clone(), self.exp + (-k) as u32)
        }
    }

    /// `self - other` if the result is non-negative.
    pub fn checked_sub(&self, other: &Dyadic) -> Option<Dyadic> {
        let e = self.exp.max(other.exp);
        let a = &self.num << (e - self.exp);
        let b = &other.num << (e - other.exp);
        if a < b {
            None
        } else {
            Some(Dyadic::new(a - b, e))
        }
    }

    /// `floor(self * 2^k)` for `k >= 0`.
    pub fn floor_scaled(&self, k: u32) -> BigUint {
        if k >= self.exp {
            &self.num << (k - self.exp)
        } else {
            &self.num >> (self.exp - k)
        }
    }

    /// Approximate value, for human-facing reports only.
    pub fn to_f64(&self) -> f64 {
        let n = self.num.to_f64().unwrap_or(f64::INFINITY);
        n * 2f64.powi(-(self.exp as i32))
    }
}

pub fn dyadic_sum<'a>(terms: impl IntoIterator<Item = &'a Dyadic>) -> Dyadic {
    terms.into_iter().cloned().sum()
}

impl Add for Dyadic {
    type Output = Dyadic;

    fn add(self, rhs: Dyadic) -> Dyadic {
        &self + &rhs
    }
}

impl Add for &Dyadic {
    type Output = Dyadic;

    fn add(self, rhs: &Dyadic) -> Dyadic {
        let e = self.exp.max(rhs.exp);
        let a = &self.num << (e - self.exp);
        let b = &rhs.num << (e - rhs.exp);
        Dyadic::new(a + b, e)
    }
}

impl Mul for &Dyadic {
    type Output = Dyadic;

    fn mul(self, rhs: &Dyadic) -> Dyadic {
        Dyadic::new(&self.num * &rhs.num, self.exp + rhs.exp)
    }
}

impl Mul for Dyadic {
    type Output = Dyadic;

    fn mul(self, rhs: Dyadic) -> Dyadic {
        &self * &rhs
    }
}

impl Sum for Dyadic {
    fn sum<I: Iterator<Item = Dyadic>>(iter: I) -> Dyadic {
        iter.fold(Dyadic::zero(), |acc, x| &acc + &x)
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let e = self.exp.max(other.exp);
        let a = &self.num << (e - self.exp);
        let b = &other.num << (e - other.exp);
        a.cmp(&b)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<u64> for Dyadic {
    fn from(n: u64) -> Self {
        Dyadic::new(n, 0)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.num, self.exp)
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for Dyadic {
    type Err = Error;

    /// Accepts `num/2^k`, `num/d` with `d` a power of two, or a bare integer.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::parse(1, format!("invalid dyadic {s:?}"));
        let s = s.trim();
        let (num, den) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), Some(d.trim())),
            None => (s, None),
        };
        let num: BigUint = num.parse().map_err(|_| bad())?;
        let exp = match den {
            None => 0,
            Some(d) => {
                if let Some(k) = d.strip_prefix("2^") {
                    k.parse::<u32>().map_err(|_| bad())?
                } else {
                    let d: u64 = d.parse().map_err(|_| bad())?;
                    if !d.is_power_of_two() {
                        return Err(bad());
                    }
                    d.trailing_zeros()
                }
            }
        };
        Ok(Dyadic::new(num, exp))
    }
}
