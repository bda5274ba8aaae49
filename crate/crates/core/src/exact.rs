//! Exact rational arithmetic helpers.
//!
//! All region geometry is carried out in arbitrary-precision rationals; floats
//! never enter a membership decision. Event times produced by the simulator
//! are `f64` and therefore dyadic rationals, so comparing an event time
//! against a rational boundary is still an exact operation. To keep the hot
//! simulation loops cheap, a rational bound is precomputed into an *envelope*:
//! the nearest `f64` on the safe side plus a flag recording whether the bound
//! is itself representable. Membership tests then reduce to one or two float
//! comparisons with no loss of exactness.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rat = BigRational;

/// `n/d` as an exact rational. Panics when `d == 0`; callers pass literals.
pub fn rat(n: i64, d: i64) -> Rat {
    assert!(d != 0, "zero denominator");
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Exact conversion of a finite `f64`. Every finite float is a dyadic
/// rational, so nothing is lost here.
pub fn rat_from_f64(x: f64) -> Rat {
    Rat::from_float(x).expect("finite float required")
}

/// Nearest `f64` to a rational (round-to-nearest up to a couple of ulp from
/// the underlying integer conversions; exactness is restored by the envelope
/// constructors below).
pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Exact comparison of an event time against a rational bound.
pub fn cmp_f64_rat(t: f64, r: &Rat) -> std::cmp::Ordering {
    debug_assert!(t.is_finite());
    rat_from_f64(t).cmp(r)
}

/// Largest `f64` that is `<= r`.
pub fn f64_at_or_below(r: &Rat) -> f64 {
    let mut c = rat_to_f64(r);
    if !c.is_finite() {
        return if c > 0.0 { f64::MAX } else { f64::MIN };
    }
    while rat_from_f64(c) > *r {
        c = c.next_down();
    }
    while c.next_up().is_finite() && rat_from_f64(c.next_up()) <= *r {
        c = c.next_up();
    }
    c
}

/// Smallest `f64` that is `>= r`.
pub fn f64_at_or_above(r: &Rat) -> f64 {
    let mut c = rat_to_f64(r);
    if !c.is_finite() {
        return if c > 0.0 { f64::MAX } else { f64::MIN };
    }
    while rat_from_f64(c) < *r {
        c = c.next_up();
    }
    while c.next_down().is_finite() && rat_from_f64(c.next_down()) >= *r {
        c = c.next_down();
    }
    c
}

/// Envelope of a rational lower bound `a`: answers `t >= a` for dyadic `t`
/// using float comparisons only.
///
/// `key` is the largest float `<= a`; any float strictly above `key` is
/// strictly above `a`, and `t == key` meets the bound exactly when `exact`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowerBound {
    pub key: f64,
    pub exact: bool,
}

impl LowerBound {
    pub fn of(a: &Rat) -> Self {
        let key = f64_at_or_below(a);
        LowerBound { key, exact: rat_from_f64(key) == *a }
    }

    pub fn neg_infinite() -> Self {
        LowerBound { key: f64::MIN, exact: false }
    }

    #[inline]
    pub fn admits(&self, t: f64) -> bool {
        t > self.key || (t == self.key && self.exact)
    }
}

/// Envelope of a rational upper bound `b`: answers `t <= b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpperBound {
    pub key: f64,
    pub exact: bool,
}

impl UpperBound {
    pub fn of(b: &Rat) -> Self {
        let key = f64_at_or_above(b);
        UpperBound { key, exact: rat_from_f64(key) == *b }
    }

    pub fn infinite() -> Self {
        UpperBound { key: f64::MAX, exact: false }
    }

    /// True for the sentinel produced by [`UpperBound::infinite`].
    pub fn is_unbounded(&self) -> bool {
        self.key == f64::MAX && !self.exact
    }

    #[inline]
    pub fn admits(&self, t: f64) -> bool {
        t < self.key || (t == self.key && self.exact)
    }
}

/// Format in lowest terms as `p/q`, or plain `p` for integers.
pub fn format_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parse `p`, `p/q`, or a signed variant of either.
pub fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    let (num_s, den_s) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), Some(d.trim())),
        None => (s, None),
    };
    let numer: BigInt = num_s
        .parse()
        .map_err(|_| Error::Parse(format!("bad rational numerator in {s:?}")))?;
    let denom: BigInt = match den_s {
        Some(d) => d
            .parse()
            .map_err(|_| Error::Parse(format!("bad rational denominator in {s:?}")))?,
        None => BigInt::one(),
    };
    if denom.is_zero() {
        return Err(Error::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(Rat::new(numer, denom))
}

/// Serde adapter: rationals as `"p/q"` strings in lowest terms.
pub mod serde_rat {
    use super::{format_rat, parse_rat, Rat};
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rat, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rat(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rat, D::Error> {
        let s = String::deserialize(d)?;
        parse_rat(&s).map_err(de::Error::custom)
    }
}

/// Serde adapter for pairs of rationals (offsets and the like).
pub mod serde_rat_pair {
    use super::{format_rat, parse_rat, Rat};
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        pair: &(Rat, Rat),
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeTuple;
        let mut t = s.serialize_tuple(2)?;
        t.serialize_element(&format_rat(&pair.0))?;
        t.serialize_element(&format_rat(&pair.1))?;
        t.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<(Rat, Rat), D::Error> {
        let v = <[String; 2]>::deserialize(d)?;
        Ok((
            parse_rat(&v[0]).map_err(de::Error::custom)?,
            parse_rat(&v[1]).map_err(de::Error::custom)?,
        ))
    }
}

/// Closest rational with the given denominator; used to turn measured speeds
/// into exact wedge parameters.
pub fn snap_to_denominator(x: f64, denom: i64) -> Rat {
    assert!(denom > 0 && x.is_finite());
    rat((x * denom as f64).round() as i64, denom)
}
