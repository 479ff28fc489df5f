//! Fixed-point money with micro-unit (10^-6) resolution.
//!
//! Every fee, price, cost and utility in the crate is a [`Money`]. Keeping the
//! arithmetic in integers makes utilities comparable bit-for-bit across
//! platforms, which the knapsack tie-breaking and the golden tests rely on.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use thiserror::Error;

/// Micro-units per unit of money.
pub const SCALE: i64 = 1_000_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money(i64);

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid money literal `{0}`")]
pub struct ParseMoneyError(pub String);

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn from_micros(micros: i64) -> Self {
        Money(micros)
    }

    pub const fn from_units(units: i64) -> Self {
        Money(units * SCALE)
    }

    pub const fn micros(self) -> i64 {
        self.0
    }

    /// Nearest representable amount to `value`.
    pub fn from_f64(value: f64) -> Self {
        Money((value * SCALE as f64).round() as i64)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE as f64
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    /// `self * count`, exact.
    pub fn times(self, count: u64) -> Self {
        Money(self.0 * count as i64)
    }

    /// `self * factor` rounded to the nearest micro-unit (half away from zero).
    ///
    /// Exact whenever `factor` is an integer and the product stays below 2^53
    /// micro-units, which covers integral request counts.
    pub fn scale(self, factor: f64) -> Self {
        Money((self.0 as f64 * factor).round() as i64)
    }

    /// `self * num / den` with exact rational rounding (half away from zero).
    pub fn mul_ratio(self, num: u64, den: u64) -> Self {
        assert!(den > 0, "zero denominator");
        let p = self.0 as i128 * num as i128;
        let d = den as i128;
        let q = p / d;
        let r = p % d;
        let q = if 2 * r.abs() >= d { q + p.signum() } else { q };
        Money(q as i64)
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl SubAssign for Money {
    fn sub_assign(&mut self, rhs: Money) {
        self.0 -= rhs.0;
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl Mul<u64> for Money {
    type Output = Money;
    fn mul(self, rhs: u64) -> Money {
        self.times(rhs)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

impl serde::Serialize for Money {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Money {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:06}", abs / SCALE as u64, abs % SCALE as u64)
    }
}

impl FromStr for Money {
    type Err = ParseMoneyError;

    /// Parses plain decimal literals (`12`, `-0.5`, `3.141592`). More than six
    /// fractional digits is an error rather than a silent rounding.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseMoneyError(s.to_string());
        let t = s.trim();
        let (neg, body) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t.strip_prefix('+').unwrap_or(t)),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err());
        }
        if !int_part.chars().all(|c| c.is_ascii_digit())
            || !frac_part.chars().all(|c| c.is_ascii_digit())
            || frac_part.len() > 6
        {
            return Err(err());
        }
        let units: i64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| err())?
        };
        let mut frac: i64 = 0;
        for (i, c) in frac_part.chars().enumerate() {
            frac += (c as i64 - '0' as i64) * 10i64.pow(5 - i as u32);
        }
        let micros = units
            .checked_mul(SCALE)
            .and_then(|u| u.checked_add(frac))
            .ok_or_else(err)?;
        Ok(Money(if neg { -micros } else { micros }))
    }
}
