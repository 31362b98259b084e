//! Numeric abstraction used by scoring.
//!
//! Error points and quality indices are computed over any [`Scalar`]. The
//! exact rational types are the reference; the float impls exist for callers
//! who only need approximate figures.

use std::fmt;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{FromPrimitive, Num, ToPrimitive, Zero};

/// A number usable for error points and TQI arithmetic.
pub trait Scalar:
    Num + FromPrimitive + Clone + PartialOrd + fmt::Debug + Send + Sync + 'static
{
    /// Largest integer not greater than `self`.
    fn floor(&self) -> Self;

    fn to_f64(&self) -> f64;

    /// Parses an integer (`3`), decimal (`2.5`) or fraction (`7/2`) literal.
    fn parse_literal(text: &str) -> Option<Self>;

    /// Canonical literal form; `parse_literal` inverts it.
    fn to_literal(&self) -> String;

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Fixed-point text with `places` decimals. `self` is expected to be
    /// already rounded to that many places.
    fn to_fixed(&self, places: usize) -> String {
        format!("{:.*}", places, self.to_f64())
    }
}

macro_rules! float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn floor(&self) -> Self {
                <$t>::floor(*self)
            }

            fn to_f64(&self) -> f64 {
                *self as f64
            }

            fn parse_literal(text: &str) -> Option<Self> {
                let text = text.trim();
                match text.split_once('/') {
                    Some((n, d)) => {
                        let n: $t = n.trim().parse().ok()?;
                        let d: $t = d.trim().parse().ok()?;
                        if d == 0.0 {
                            None
                        } else {
                            Some(n / d)
                        }
                    }
                    None => text.parse().ok().filter(|v: &$t| v.is_finite()),
                }
            }

            fn to_literal(&self) -> String {
                self.to_string()
            }
        }
    };
}

float_scalar!(f32);
float_scalar!(f64);

/// Parses `int`, `int.frac` or `num/den` into numerator/denominator strings
/// without going through floating point.
fn split_exact(text: &str) -> Option<(String, String)> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let (n, d) = (n.trim(), d.trim());
        if !is_integer_literal(n) || !is_integer_literal(d) {
            return None;
        }
        return Some((n.to_string(), d.to_string()));
    }
    let (int_part, frac_part) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text, ""),
    };
    if !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = int_part.trim_start_matches(['-', '+']);
    if digits.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !digits.chars().all(|c| c.is_ascii_digit()) || int_part.len() - digits.len() > 1 {
        return None;
    }
    let sign = if int_part.starts_with('-') { "-" } else { "" };
    let numer = format!("{sign}{}{frac_part}", if digits.is_empty() { "0" } else { digits });
    let denom = format!("1{}", "0".repeat(frac_part.len()));
    Some((numer, denom))
}

fn is_integer_literal(s: &str) -> bool {
    let digits = s.strip_prefix('-').or_else(|| s.strip_prefix('+')).unwrap_or(s);
    !digits.is_empty() && digits.chars().all(|c| c.is_ascii_digit())
}

impl Scalar for Ratio<i64> {
    fn floor(&self) -> Self {
        Ratio::floor(self)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn parse_literal(text: &str) -> Option<Self> {
        let (n, d) = split_exact(text)?;
        let n: i64 = n.parse().ok()?;
        let d: i64 = d.parse().ok()?;
        if d == 0 {
            return None;
        }
        Some(Ratio::new(n, d))
    }

    fn to_literal(&self) -> String {
        self.to_string()
    }

    fn to_fixed(&self, places: usize) -> String {
        fixed_from_parts(
            BigInt::from(*self.numer()),
            BigInt::from(*self.denom()),
            places,
        )
    }
}

impl Scalar for BigRational {
    fn floor(&self) -> Self {
        Ratio::floor(self)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn parse_literal(text: &str) -> Option<Self> {
        let (n, d) = split_exact(text)?;
        let n: BigInt = n.parse().ok()?;
        let d: BigInt = d.parse().ok()?;
        if d.is_zero() {
            return None;
        }
        Some(Ratio::new(n, d))
    }

    fn to_literal(&self) -> String {
        self.to_string()
    }

    fn to_fixed(&self, places: usize) -> String {
        fixed_from_parts(self.numer().clone(), self.denom().clone(), places)
    }
}

/// Decimal expansion truncated to `places` digits (callers round first).
fn fixed_from_parts(numer: BigInt, denom: BigInt, places: usize) -> String {
    let negative = (numer < BigInt::zero()) != (denom < BigInt::zero()) && !numer.is_zero();
    let numer = if numer < BigInt::zero() { -numer } else { numer };
    let denom = if denom < BigInt::zero() { -denom } else { denom };
    let scale = num_traits::pow(BigInt::from(10), places);
    let scaled = numer * &scale / denom;
    let int_part = &scaled / &scale;
    let frac_part = &scaled % &scale;
    let sign = if negative { "-" } else { "" };
    if places == 0 {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{:0>width$}", frac_part.to_string(), width = places)
    }
}

/// Serde adapters for scalar fields.
///
/// Values are written as literal strings so exact rationals survive a JSON or
/// TOML round trip. Numbers are accepted on input and read through their
/// shortest decimal form, so `2.5` becomes exactly `5/2`.
pub mod literal {
    use super::Scalar;
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;
    use std::marker::PhantomData;

    pub fn serialize<T: Scalar, S: Serializer>(value: &T, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&value.to_literal())
    }

    pub fn deserialize<'de, T: Scalar, D: Deserializer<'de>>(d: D) -> Result<T, D::Error> {
        d.deserialize_any(LiteralVisitor(PhantomData))
    }

    pub(crate) struct LiteralVisitor<T>(pub(crate) PhantomData<T>);

    impl<T: Scalar> LiteralVisitor<T> {
        fn parse<E: de::Error>(text: &str) -> Result<T, E> {
            T::parse_literal(text).ok_or_else(|| E::custom(format!("invalid number `{text}`")))
        }
    }

    impl<'de, T: Scalar> Visitor<'de> for LiteralVisitor<T> {
        type Value = T;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("a number or a numeric literal string such as \"3/2\"")
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<T, E> {
            Self::parse(&v.to_string())
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<T, E> {
            Self::parse(&v.to_string())
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<T, E> {
            Self::parse(&v.to_string())
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<T, E> {
            Self::parse(v)
        }
    }

    /// Writes the value as a plain number. Used for display values that are
    /// already rounded to a few decimals.
    pub mod number {
        use super::{LiteralVisitor, Scalar};
        use serde::{Deserializer, Serializer};
        use std::marker::PhantomData;

        pub fn serialize<T: Scalar, S: Serializer>(value: &T, s: S) -> Result<S::Ok, S::Error> {
            let f = value.to_f64();
            if f.fract() == 0.0 && f.abs() < 1e15 {
                s.serialize_i64(f as i64)
            } else {
                s.serialize_f64(f)
            }
        }

        pub fn deserialize<'de, T: Scalar, D: Deserializer<'de>>(d: D) -> Result<T, D::Error> {
            d.deserialize_any(LiteralVisitor(PhantomData))
        }
    }
}
