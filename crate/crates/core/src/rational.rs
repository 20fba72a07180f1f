//! Exact rational arithmetic and the `"num/den"` string form used in all
//! JSON interfaces.
//!
//! Every quantity in this crate (shares, chances, distances, water levels)
//! is a [`Rational`]. Nothing is ever rounded: classification of objects and
//! all axiom verdicts depend on exact comparisons at knife edges such as a
//! column summing to exactly 1.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};

/// Arbitrary-precision rational number, always kept in reduced form with a
/// positive denominator by the underlying representation.
pub type Rational = BigRational;

/// Shorthand constructor from an integer pair. Panics on zero denominator.
pub fn rat(num: i64, den: i64) -> Rational {
    assert!(den != 0, "zero denominator");
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Formats a rational as `"num/den"` in reduced form, e.g. `"3/5"`, `"0/1"`.
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses the string forms accepted by the JSON interfaces: `"3/5"`, `"-1/2"`,
/// plain integers like `"1"`, and exact decimals like `"0.6"`. Values such as
/// `"2/4"` reduce to canonical form on construction.
pub fn parse_rational(s: &str) -> Result<Rational, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty rational".into());
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num
            .trim()
            .parse()
            .map_err(|_| format!("invalid numerator {num:?}"))?;
        let d: BigInt = den
            .trim()
            .parse()
            .map_err(|_| format!("invalid denominator {den:?}"))?;
        if d.is_zero() {
            return Err(format!("zero denominator in {s:?}"));
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let int_part = if int.is_empty() || int == "-" {
            format!("{int}0")
        } else {
            int.to_string()
        };
        let whole: BigInt = int_part
            .parse()
            .map_err(|_| format!("invalid decimal {s:?}"))?;
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("invalid decimal {s:?}"));
        }
        let scale = num::pow::pow(BigInt::from(10), frac.len());
        let frac_num: BigInt = frac.parse().map_err(|_| format!("invalid decimal {s:?}"))?;
        let sign = if s.starts_with('-') {
            -BigInt::one()
        } else {
            BigInt::one()
        };
        return Ok(Rational::new(whole * &scale + sign * frac_num, scale));
    }
    let n: BigInt = s.parse().map_err(|_| format!("invalid rational {s:?}"))?;
    Ok(Rational::from_integer(n))
}

/// Exact absolute value.
pub fn rational_abs(r: &Rational) -> Rational {
    r.abs()
}

/// serde adapter: a single `Rational` as a `"num/den"` string.
pub mod rational_string {
    use super::*;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let raw = String::deserialize(d)?;
        parse_rational(&raw).map_err(de::Error::custom)
    }
}

/// serde adapter: `Vec<Rational>` as a vector of `"num/den"` strings.
pub mod rational_vec_string {
    use super::*;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(format_rational))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|s| parse_rational(s).map_err(de::Error::custom))
            .collect()
    }
}

/// serde adapter: `Option<Vec<Rational>>` as an optional string vector.
pub mod rational_opt_vec_string {
    use super::*;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<Rational>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => s.collect_seq(v.iter().map(format_rational)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Option<Vec<Rational>>, D::Error> {
        let raw = Option::<Vec<String>>::deserialize(d)?;
        raw.map(|v| {
            v.iter()
                .map(|s| parse_rational(s).map_err(de::Error::custom))
                .collect()
        })
        .transpose()
    }
}
