//! Exact, strictly positive table weights.
//!
//! Weights enter the system as decimal strings and are kept as exact
//! rationals throughout model construction. Grouping decisions are made by
//! *equality* of weights, and floating point would silently turn that into a
//! non-transitive relation; exact arithmetic keeps bucketing an equivalence
//! relation. Inference converts to `f64` at the boundary instead.

use std::fmt;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Errors from parsing or constructing a [`Potential`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PotentialError {
    /// The literal is not a plain decimal number (or `p/q` ratio).
    #[error("invalid potential literal {literal:?}: {reason}")]
    Invalid {
        literal: String,
        reason: &'static str,
    },
    /// Potentials must be strictly positive.
    #[error("potential must be strictly positive, got {literal:?}")]
    NonPositive { literal: String },
}

/// A strictly positive exact rational weight.
///
/// Constructed from decimal literals such as `"2"`, `"0.125"` or `"10.5"`
/// (a `"p/q"` ratio form is also accepted so that any value this library can
/// print round-trips). Display uses the exact decimal expansion whenever the
/// denominator is of the form 2^a·5^b and falls back to `p/q` otherwise.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Potential(BigRational);

impl Potential {
    /// Parses a decimal literal (or `p/q`) into an exact positive rational.
    pub fn parse(literal: &str) -> Result<Self, PotentialError> {
        let invalid = |reason| PotentialError::Invalid {
            literal: literal.to_string(),
            reason,
        };
        let value = if let Some((num, den)) = literal.split_once('/') {
            let num: BigInt = num.parse().map_err(|_| invalid("bad numerator"))?;
            let den: BigInt = den.parse().map_err(|_| invalid("bad denominator"))?;
            if den.is_zero() {
                return Err(invalid("zero denominator"));
            }
            BigRational::new(num, den)
        } else {
            let (int_part, frac_part) = match literal.split_once('.') {
                Some((i, f)) => (i, f),
                None => (literal, ""),
            };
            if int_part.is_empty() && frac_part.is_empty() {
                return Err(invalid("empty literal"));
            }
            let digits_only = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
            if !digits_only(int_part) || !digits_only(frac_part) {
                return Err(invalid("expected only decimal digits"));
            }
            let mut digits = String::with_capacity(int_part.len() + frac_part.len());
            digits.push_str(int_part);
            digits.push_str(frac_part);
            let numer: BigInt = digits
                .parse()
                .map_err(|_| invalid("expected a decimal number"))?;
            let denom = BigInt::from(10u32).pow(frac_part.len() as u32);
            BigRational::new(numer, denom)
        };
        Self::from_rational(value).map_err(|_| PotentialError::NonPositive {
            literal: literal.to_string(),
        })
    }

    /// Wraps an exact rational, rejecting non-positive values.
    pub fn from_rational(value: BigRational) -> Result<Self, PotentialError> {
        if value.is_positive() {
            Ok(Potential(value))
        } else {
            Err(PotentialError::NonPositive {
                literal: value.to_string(),
            })
        }
    }

    /// Convenience constructor from an integer numerator/denominator pair.
    pub fn from_ratio(numer: i64, denom: i64) -> Result<Self, PotentialError> {
        if denom == 0 {
            return Err(PotentialError::Invalid {
                literal: format!("{numer}/{denom}"),
                reason: "zero denominator",
            });
        }
        Self::from_rational(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    /// The underlying exact rational.
    pub fn value(&self) -> &BigRational {
        &self.0
    }

    /// Nearest floating-point value, for inference.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::MAX)
    }

    /// Exact decimal string when one exists (denominator 2^a·5^b), else `p/q`.
    pub fn decimal_string(&self) -> String {
        let numer = self.0.numer().clone();
        let denom = self.0.denom().clone();
        // Strip all factors of 2 and 5 from the denominator.
        let (two, five, ten) = (BigInt::from(2), BigInt::from(5), BigInt::from(10));
        let mut rest = denom.clone();
        let mut twos = 0u32;
        let mut fives = 0u32;
        while (&rest % &two).is_zero() {
            rest /= &two;
            twos += 1;
        }
        while (&rest % &five).is_zero() {
            rest /= &five;
            fives += 1;
        }
        if !rest.is_one() {
            return format!("{numer}/{denom}");
        }
        // Scale the fraction to denominator 10^k and print with k fractional digits.
        let k = twos.max(fives);
        let scaled = numer * ten.pow(k) / denom;
        let digits = scaled.to_string();
        if k == 0 {
            return digits;
        }
        let k = k as usize;
        let (int_digits, frac_digits) = if digits.len() > k {
            let split = digits.len() - k;
            (digits[..split].to_string(), digits[split..].to_string())
        } else {
            ("0".to_string(), format!("{digits:0>k$}"))
        };
        let frac_digits = frac_digits.trim_end_matches('0');
        if frac_digits.is_empty() {
            int_digits
        } else {
            format!("{int_digits}.{frac_digits}")
        }
    }
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.decimal_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_integers_and_decimals() {
        assert_eq!(Potential::parse("2").unwrap(), Potential::from_ratio(2, 1).unwrap());
        assert_eq!(
            Potential::parse("1.25").unwrap(),
            Potential::from_ratio(5, 4).unwrap()
        );
        assert_eq!(
            Potential::parse("0.100").unwrap(),
            Potential::from_ratio(1, 10).unwrap()
        );
        assert_eq!(
            Potential::parse("3/7").unwrap(),
            Potential::from_ratio(3, 7).unwrap()
        );
    }

    #[test]
    fn rejects_bad_literals() {
        for bad in ["", ".", "1.2.3", "1e3", "-1", "abc", "1/0", " 1"] {
            assert!(Potential::parse(bad).is_err(), "{bad:?} should not parse");
        }
        assert!(matches!(
            Potential::parse("0"),
            Err(PotentialError::NonPositive { .. })
        ));
        assert!(matches!(
            Potential::parse("0.000"),
            Err(PotentialError::NonPositive { .. })
        ));
    }

    #[test]
    fn prints_exact_decimals() {
        assert_eq!(Potential::parse("1.25").unwrap().decimal_string(), "1.25");
        assert_eq!(Potential::parse("10").unwrap().decimal_string(), "10");
        assert_eq!(Potential::parse("0.1").unwrap().decimal_string(), "0.1");
        assert_eq!(Potential::from_ratio(1, 3).unwrap().decimal_string(), "1/3");
        assert_eq!(Potential::from_ratio(7, 50).unwrap().decimal_string(), "0.14");
    }

    proptest! {
        // Any three-fractional-digit decimal (the benchmark value pool)
        // round-trips exactly through parse -> print -> parse.
        #[test]
        fn decimal_roundtrip(n in 1u64..10_000_000) {
            let literal = format!("{}.{:03}", n / 1000, n % 1000);
            let p = Potential::parse(&literal).unwrap();
            let printed = p.decimal_string();
            prop_assert_eq!(Potential::parse(&printed).unwrap(), p);
        }
    }
}
