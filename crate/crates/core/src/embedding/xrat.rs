//! Extended rationals `ℚ ∪ {±∞}` with exact arithmetic.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Rational = Ratio<i128>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum XRat {
    NegInf,
    Finite(Rational),
    PosInf,
}

pub fn rat(n: i128, d: i128) -> Rational {
    Rational::new(n, d)
}

impl XRat {
    pub const INF: XRat = XRat::PosInf;

    pub fn int(n: i128) -> Self {
        XRat::Finite(Rational::from_integer(n))
    }

    pub fn frac(n: i128, d: i128) -> Self {
        XRat::Finite(rat(n, d))
    }

    pub fn zero() -> Self {
        XRat::int(0)
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, XRat::Finite(_))
    }

    pub fn finite(&self) -> Option<Rational> {
        match self {
            XRat::Finite(r) => Some(*r),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, XRat::Finite(r) if *r == Rational::from_integer(0))
    }

    pub fn neg(self) -> XRat {
        match self {
            XRat::NegInf => XRat::PosInf,
            XRat::PosInf => XRat::NegInf,
            XRat::Finite(r) => XRat::Finite(-r),
        }
    }

    pub fn add(self, other: XRat) -> Result<XRat> {
        use XRat::*;
        match (self, other) {
            (Finite(a), Finite(b)) => Ok(Finite(a + b)),
            (PosInf, NegInf) | (NegInf, PosInf) => Err(Error::UndefinedArithmetic("inf - inf")),
            (PosInf, _) | (_, PosInf) => Ok(PosInf),
            (NegInf, _) | (_, NegInf) => Ok(NegInf),
        }
    }

    pub fn sub(self, other: XRat) -> Result<XRat> {
        self.add(other.neg())
    }

    pub fn mul(self, other: XRat) -> Result<XRat> {
        use XRat::*;
        match (self, other) {
            (Finite(a), Finite(b)) => Ok(Finite(a * b)),
            _ if self.is_zero() || other.is_zero() => Err(Error::UndefinedArithmetic("0 * inf")),
            _ => {
                let positive = (self > XRat::zero()) == (other > XRat::zero());
                Ok(if positive { PosInf } else { NegInf })
            }
        }
    }

    pub fn div(self, other: XRat) -> Result<XRat> {
        use XRat::*;
        match (self, other) {
            (_, Finite(b)) if b == Rational::from_integer(0) => Err(Error::UndefinedArithmetic("division by zero")),
            (Finite(a), Finite(b)) => Ok(Finite(a / b)),
            (Finite(_), _) => Ok(XRat::zero()),
            (_, Finite(b)) => {
                let positive = (self == PosInf) == (b > Rational::from_integer(0));
                Ok(if positive { PosInf } else { NegInf })
            }
            _ => Err(Error::UndefinedArithmetic("inf / inf")),
        }
    }

    /// `1/x` for an index `x ∈ [1, ∞]` (so `1/∞ = 0`).
    pub fn recip(self) -> Result<XRat> {
        XRat::int(1).div(self)
    }

    /// Inverse of [`XRat::recip`] on `[0, 1]`: `0 ↦ ∞`.
    pub fn from_recip(x: Rational) -> XRat {
        if x == Rational::from_integer(0) {
            XRat::PosInf
        } else {
            XRat::Finite(x.recip())
        }
    }
}

impl From<Rational> for XRat {
    fn from(r: Rational) -> Self {
        XRat::Finite(r)
    }
}

impl From<i128> for XRat {
    fn from(n: i128) -> Self {
        XRat::int(n)
    }
}

impl PartialOrd for XRat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for XRat {
    fn cmp(&self, other: &Self) -> Ordering {
        use XRat::*;
        match (self, other) {
            (Finite(a), Finite(b)) => a.cmp(b),
            (NegInf, NegInf) | (PosInf, PosInf) => Ordering::Equal,
            (NegInf, _) | (_, PosInf) => Ordering::Less,
            (PosInf, _) | (_, NegInf) => Ordering::Greater,
        }
    }
}

impl fmt::Display for XRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            XRat::NegInf => write!(f, "-inf"),
            XRat::PosInf => write!(f, "inf"),
            XRat::Finite(r) => {
                if *r.denom() == 1 {
                    write!(f, "{}", r.numer())
                } else {
                    write!(f, "{}/{}", r.numer(), r.denom())
                }
            }
        }
    }
}

impl FromStr for XRat {
    type Err = Error;

    /// Accepts `a`, `a/b`, decimals such as `1.5`, and `inf`/`+inf`/`-inf`/`∞`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let bad = || Error::MalformedQuery(format!("not an extended rational: {s:?}"));
        match t {
            "inf" | "+inf" | "∞" | "+∞" | "infinity" => return Ok(XRat::PosInf),
            "-inf" | "-∞" | "-infinity" => return Ok(XRat::NegInf),
            _ => {}
        }
        if let Some((n, d)) = t.split_once('/') {
            let n: i128 = n.trim().parse().map_err(|_| bad())?;
            let d: i128 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            return Ok(XRat::frac(n, d));
        }
        if let Some((ip, fp)) = t.split_once('.') {
            if fp.is_empty() || fp.len() > 18 || !fp.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let negative = ip.starts_with('-');
            let ip_abs: i128 = ip.trim_start_matches(['-', '+']).parse().or_else(|e| if ip.trim_start_matches(['-', '+']).is_empty() { Ok(0) } else { Err(e) }).map_err(|_| bad())?;
            let den = 10i128.pow(fp.len() as u32);
            let num = ip_abs * den + fp.parse::<i128>().map_err(|_| bad())?;
            return Ok(XRat::frac(if negative { -num } else { num }, den));
        }
        t.parse::<i128>().map(XRat::int).map_err(|_| bad())
    }
}

impl Serialize for XRat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for XRat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `a ⪰ b`: `a ≥ b`, with strict inequality when `b = 0`.
pub fn succeq(a: XRat, b: XRat) -> bool {
    if b.is_zero() {
        a > b
    } else {
        a >= b
    }
}

/// Dual index `p* = p/(p-1)`, with `1* = ∞` and `∞* = 1`.
pub fn dual_index(p: XRat) -> Result<XRat> {
    if p < XRat::int(1) {
        return Err(Error::MalformedQuery(format!("index must be >= 1, got {p}")));
    }
    match p {
        XRat::PosInf => Ok(XRat::int(1)),
        XRat::Finite(r) if r == Rational::from_integer(1) => Ok(XRat::PosInf),
        XRat::Finite(r) => Ok(XRat::Finite(r / (r - Rational::from_integer(1)))),
        XRat::NegInf => unreachable!(),
    }
}
