use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Sub};

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{Signed, ToPrimitive, Zero};

/// Exact signed rational used throughout for deltas, recovery rates, and any
/// quantity that may legitimately go negative.
pub type Rational = BigRational;

/// Exact non-negative rational currency amount.
///
/// All arithmetic is exact: no rounding ever occurs.  Subtraction is provided
/// as [`Money::checked_sub`], which returns `None` when the result would be
/// negative, keeping the non-negativity invariant at the type boundary.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Money(Rational);

impl Money {
    pub fn zero() -> Self {
        Money(Rational::zero())
    }

    pub fn from_int(n: u64) -> Self {
        Money(Rational::from_integer(BigInt::from(n)))
    }

    /// Builds a money amount from an integer numerator/denominator pair.
    ///
    /// Panics if `den` is zero or the ratio is negative.
    pub fn from_ratio(num: i64, den: i64) -> Self {
        let r = Rational::new(BigInt::from(num), BigInt::from(den));
        Money::try_from_rational(r).expect("negative ratio for Money")
    }

    /// Converts a signed rational, returning `None` when negative.
    pub fn try_from_rational(r: Rational) -> Option<Self> {
        if r.is_negative() {
            None
        } else {
            Some(Money(r))
        }
    }

    /// Converts a signed rational, clamping negatives to zero.
    pub fn saturating_from_rational(r: Rational) -> Self {
        if r.is_negative() {
            Money::zero()
        } else {
            Money(r)
        }
    }

    pub fn rat(&self) -> &Rational {
        &self.0
    }

    pub fn into_rat(self) -> Rational {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn checked_sub(&self, other: &Money) -> Option<Money> {
        let r = &self.0 - &other.0;
        Money::try_from_rational(r)
    }

    pub fn min(self, other: Money) -> Money {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Money) -> Money {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Debug for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Money({})", self.0)
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl<'a> Add<&'a Money> for Money {
    type Output = Money;
    fn add(self, rhs: &'a Money) -> Money {
        Money(self.0 + &rhs.0)
    }
}

impl AddAssign<&Money> for Money {
    fn add_assign(&mut self, rhs: &Money) {
        self.0 += &rhs.0;
    }
}

/// Panics when the result would be negative; use `checked_sub` when the
/// invariant is not locally guaranteed.
impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        let r = self.0 - rhs.0;
        Money::try_from_rational(r).expect("Money subtraction went negative")
    }
}

impl Mul<&Rational> for &Money {
    type Output = Money;
    fn mul(self, rhs: &Rational) -> Money {
        Money::try_from_rational(&self.0 * rhs).expect("Money multiplication went negative")
    }
}

impl Div<&Money> for &Money {
    type Output = Rational;
    fn div(self, rhs: &Money) -> Rational {
        assert!(!rhs.is_zero(), "Money division by zero");
        &self.0 / &rhs.0
    }
}

/// Parses an exact rational from an integer ("3"), a decimal ("1.25"), or a
/// fraction string ("5/4").  Used by both the JSON layer and CLI arguments.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num.trim().parse().ok()?;
        let d: BigInt = den.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let negative = int_part.trim_start().starts_with('-');
        let i: BigInt = if int_part.is_empty() || int_part == "-" {
            BigInt::zero()
        } else {
            int_part.parse().ok()?
        };
        let f: BigInt = frac_part.parse().ok()?;
        let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
        let frac = Rational::new(f, scale);
        let whole = Rational::from_integer(i);
        return Some(if negative { whole - frac } else { whole + frac });
    }
    let n: BigInt = s.parse().ok()?;
    Some(Rational::from_integer(n))
}

/// Renders a rational as a short decimal approximation for human-facing output.
pub fn approx_decimal(r: &Rational) -> String {
    match r.to_f64() {
        Some(v) => format!("{v:.6}"),
        None => "?".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_integers_decimals_fractions() {
        assert_eq!(parse_rational("3").unwrap(), Rational::from_integer(3.into()));
        assert_eq!(parse_rational("1.25").unwrap(), Rational::new(5.into(), 4.into()));
        assert_eq!(parse_rational("5/4").unwrap(), Rational::new(5.into(), 4.into()));
        assert_eq!(parse_rational("-0.5").unwrap(), Rational::new((-1).into(), 2.into()));
        assert!(parse_rational("3/0").is_none());
        assert!(parse_rational("abc").is_none());
    }

    #[test]
    fn money_arithmetic_is_exact() {
        let a = Money::from_ratio(1, 3);
        let b = Money::from_ratio(1, 6);
        assert_eq!(a.clone() + b.clone(), Money::from_ratio(1, 2));
        assert_eq!(a.clone().sub(b.clone()), Money::from_ratio(1, 6));
        assert!(b.checked_sub(&a).is_none());
    }
}
