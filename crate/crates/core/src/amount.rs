//! Resource quantities as exact binary fixed-point numbers.
//!
//! Every store is a count of `2^-16` ticks. In single-resource runs all values
//! stay whole (every operation floors to whole units); in dual-resource runs
//! trade prices land on the tick grid, so sums and differences stay exact.

use std::fmt;
use std::ops::{Add, AddAssign, Sub, SubAssign};
use std::str::FromStr;

/// Number of fractional bits in an [`Amount`].
pub const FRAC_BITS: u32 = 16;
/// Ticks per whole unit.
pub const SCALE: u64 = 1 << FRAC_BITS;

/// 10^16 / 2^16: converts a 16-bit binary fraction to 16 decimal digits.
const DECIMAL_FACTOR: u64 = 152_587_890_625;

/// A non-negative resource quantity with 16 fractional bits.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Debug)]
pub struct Amount(u64);

/// Resolution that floors apply to.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Grain {
    /// Whole units (single-resource mode).
    Unit,
    /// One tick, `2^-16` units (dual-resource mode).
    Tick,
}

impl Grain {
    pub fn ticks(self) -> u64 {
        match self {
            Grain::Unit => SCALE,
            Grain::Tick => 1,
        }
    }
}

impl Amount {
    pub const ZERO: Amount = Amount(0);
    pub const ONE: Amount = Amount(SCALE);

    pub const fn from_units(units: u64) -> Amount {
        Amount(units * SCALE)
    }

    pub const fn from_ticks(ticks: u64) -> Amount {
        Amount(ticks)
    }

    pub const fn ticks(self) -> u64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn is_whole(self) -> bool {
        self.0.is_multiple_of(SCALE)
    }

    /// Whole units, rounding down.
    pub fn units_floor(self) -> u64 {
        self.0 / SCALE
    }

    pub fn saturating_sub(self, rhs: Amount) -> Amount {
        Amount(self.0.saturating_sub(rhs.0))
    }

    pub fn checked_sub(self, rhs: Amount) -> Option<Amount> {
        self.0.checked_sub(rhs.0).map(Amount)
    }

    /// Rounds down to a multiple of the grain.
    pub fn floor_to(self, grain: Grain) -> Amount {
        let g = grain.ticks();
        Amount(self.0 / g * g)
    }

    /// `⌊self ÷ n⌋` at the given grain. Division by zero yields zero.
    pub fn div_floor(self, n: u64, grain: Grain) -> Amount {
        if n == 0 {
            return Amount::ZERO;
        }
        let g = grain.ticks();
        Amount(self.0 / g / n * g)
    }

    /// Exact rational scaling `self · num / den`, floored to the grain.
    pub fn mul_ratio_floor(self, num: u64, den: u64, grain: Grain) -> Amount {
        assert!(den > 0, "zero denominator");
        let g = grain.ticks() as u128;
        let scaled = self.0 as u128 * num as u128 / den as u128;
        let floored = scaled / g * g;
        Amount(u64::try_from(floored).expect("amount overflow"))
    }

    pub fn min(self, other: Amount) -> Amount {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE as f64
    }
}

impl Add for Amount {
    type Output = Amount;
    fn add(self, rhs: Amount) -> Amount {
        Amount(self.0.checked_add(rhs.0).expect("amount overflow"))
    }
}

impl AddAssign for Amount {
    fn add_assign(&mut self, rhs: Amount) {
        *self = *self + rhs;
    }
}

impl Sub for Amount {
    type Output = Amount;
    fn sub(self, rhs: Amount) -> Amount {
        Amount(self.0.checked_sub(rhs.0).expect("amount underflow"))
    }
}

impl SubAssign for Amount {
    fn sub_assign(&mut self, rhs: Amount) {
        *self = *self - rhs;
    }
}

impl std::iter::Sum for Amount {
    fn sum<I: Iterator<Item = Amount>>(iter: I) -> Amount {
        iter.fold(Amount::ZERO, |a, b| a + b)
    }
}

/// Exact decimal rendering: every tick count has a finite decimal expansion.
impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let whole = self.0 / SCALE;
        let frac = self.0 % SCALE;
        if frac == 0 {
            return write!(f, "{whole}");
        }
        let digits = format!("{:016}", frac * DECIMAL_FACTOR);
        write!(f, "{whole}.{}", digits.trim_end_matches('0'))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid amount {0:?}")]
pub struct ParseAmountError(pub String);

impl FromStr for Amount {
    type Err = ParseAmountError;

    fn from_str(s: &str) -> Result<Amount, ParseAmountError> {
        let err = || ParseAmountError(s.to_string());
        let (whole, frac) = match s.split_once('.') {
            Some((w, f)) => (w, f),
            None => (s, ""),
        };
        if whole.is_empty() || !whole.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let whole: u64 = whole.parse().map_err(|_| err())?;
        let mut ticks = whole.checked_mul(SCALE).ok_or_else(err)?;
        if !frac.is_empty() {
            if frac.len() > 16 || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(err());
            }
            let padded: u64 = format!("{frac:0<16}").parse().map_err(|_| err())?;
            if !padded.is_multiple_of(DECIMAL_FACTOR) {
                return Err(err());
            }
            ticks += padded / DECIMAL_FACTOR;
        }
        Ok(Amount(ticks))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whole_units_render_without_point() {
        assert_eq!(Amount::from_units(25).to_string(), "25");
        assert_eq!(Amount::ZERO.to_string(), "0");
    }

    #[test]
    fn fractions_render_exactly() {
        assert_eq!(Amount::from_ticks(SCALE / 2).to_string(), "0.5");
        assert_eq!(Amount::from_ticks(1).to_string(), "0.0000152587890625");
        assert_eq!(Amount::from_ticks(3 * SCALE + SCALE / 4).to_string(), "3.25");
    }

    #[test]
    fn parse_round_trips() {
        for t in [0, 1, 7, SCALE - 1, SCALE, 123_456_789] {
            let a = Amount::from_ticks(t);
            assert_eq!(a.to_string().parse::<Amount>().unwrap(), a);
        }
        assert!("0.1".parse::<Amount>().is_err());
        assert!("-1".parse::<Amount>().is_err());
        assert!("".parse::<Amount>().is_err());
    }

    #[test]
    fn floors_respect_grain() {
        let ten = Amount::from_units(10);
        assert_eq!(ten.div_floor(3, Grain::Unit), Amount::from_units(3));
        let third = ten.div_floor(3, Grain::Tick);
        assert!(third > Amount::from_units(3));
        assert!(third.ticks() * 3 <= ten.ticks());
        assert_eq!(ten.div_floor(0, Grain::Unit), Amount::ZERO);
    }

    #[test]
    fn ratio_scaling_floors() {
        // 10 · (1 + 1/10 · 10) = 20
        let p = Amount::from_units(10);
        assert_eq!(p.mul_ratio_floor(20, 10, Grain::Unit), Amount::from_units(20));
        assert_eq!(
            Amount::from_units(7).mul_ratio_floor(3, 2, Grain::Unit),
            Amount::from_units(10)
        );
    }
}
