use std::fmt;
use std::str::FromStr;

use num_traits::One;
use serde::{Deserialize, Serialize};

use super::xrat::{Rational, XRat};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceCase {
    A,
    B,
    C,
    D,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    CProb,
    AProb,
    NonlinearSource(SourceCase),
    LogProb,
    CubicProb,
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Problem::CProb => "cprob",
            Problem::AProb => "aprob",
            Problem::NonlinearSource(SourceCase::A) => "nonlinear_a",
            Problem::NonlinearSource(SourceCase::B) => "nonlinear_b",
            Problem::NonlinearSource(SourceCase::C) => "nonlinear_c",
            Problem::NonlinearSource(SourceCase::D) => "nonlinear_d",
            Problem::LogProb => "log",
            Problem::CubicProb => "cubic",
        };
        f.write_str(s)
    }
}

impl FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "cprob" | "c" | "potential" => Problem::CProb,
            "aprob" | "a" | "diffusion" => Problem::AProb,
            "nonlinear_a" => Problem::NonlinearSource(SourceCase::A),
            "nonlinear_b" => Problem::NonlinearSource(SourceCase::B),
            "nonlinear_c" => Problem::NonlinearSource(SourceCase::C),
            "nonlinear_d" => Problem::NonlinearSource(SourceCase::D),
            "log" | "logprob" => Problem::LogProb,
            "cubic" | "cubicprob" => Problem::CubicProb,
            other => return Err(Error::MalformedQuery(format!("unknown problem {other:?}"))),
        })
    }
}

/// Sobolev indices of one admissibility query.
///
/// `V = W^{s,m}`, `W = W^{t,n}`, `X = L^p`, `Y = L^q` over a domain of
/// dimension `d`. The exponents describe the growth of the nonlinear source
/// terms and are only read by the nonlinear bundles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexQuery {
    pub problem: Problem,
    pub d: XRat,
    pub p: XRat,
    pub q: XRat,
    pub s: XRat,
    pub t: XRat,
    pub m: XRat,
    pub n: XRat,
    pub gamma: XRat,
    pub kappa: XRat,
    pub gamma_hat: XRat,
    pub kappa_hat: XRat,
}

impl IndexQuery {
    /// Query with `m = n = 2` and zero exponents (`κ̂ = 1`); cubic queries
    /// default to `γ = κ = 1`.
    pub fn new(problem: Problem, d: i128, p: XRat, q: XRat, s: XRat, t: XRat) -> Self {
        let cubic = problem == Problem::CubicProb;
        IndexQuery {
            problem,
            d: XRat::int(d),
            p,
            q,
            s,
            t,
            m: XRat::int(2),
            n: XRat::int(2),
            gamma: XRat::int(cubic as i128),
            kappa: XRat::int(cubic as i128),
            gamma_hat: XRat::zero(),
            kappa_hat: XRat::int(1),
        }
    }

    pub fn with_mn(mut self, m: XRat, n: XRat) -> Self {
        self.m = m;
        self.n = n;
        self
    }

    pub fn with_exponents(mut self, gamma: XRat, kappa: XRat) -> Self {
        self.gamma = gamma;
        self.kappa = kappa;
        self
    }

    pub fn with_gradient_exponents(mut self, gamma_hat: XRat, kappa_hat: XRat) -> Self {
        self.gamma_hat = gamma_hat;
        self.kappa_hat = kappa_hat;
        self
    }

    /// Parses `key=value` pairs separated by whitespace or commas, e.g.
    /// `problem=cprob d=3 p=2 q=2 s=0 t=2`. `problem`, `d`, `p`, `q`, `s`
    /// and `t` are required.
    pub fn parse(text: &str) -> Result<Self> {
        let pairs = text
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|tok| {
                tok.split_once('=')
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .ok_or_else(|| Error::MalformedQuery(format!("expected key=value, got {tok:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_pairs(pairs)
    }

    pub fn from_pairs<K: AsRef<str>, V: AsRef<str>>(pairs: impl IntoIterator<Item = (K, V)>) -> Result<Self> {
        let mut problem = None;
        let mut case = None;
        let mut vals: std::collections::BTreeMap<String, XRat> = Default::default();
        for (k, v) in pairs {
            let (k, v) = (k.as_ref().trim(), v.as_ref().trim());
            match k {
                "problem" => problem = Some(v.parse::<Problem>()?),
                "case" => case = Some(v.to_ascii_lowercase()),
                "d" | "p" | "q" | "s" | "t" | "m" | "n" | "gamma" | "kappa" | "gamma_hat" | "kappa_hat" => {
                    if vals.insert(k.to_string(), v.parse()?).is_some() {
                        return Err(Error::MalformedQuery(format!("duplicate key {k:?}")));
                    }
                }
                other => return Err(Error::MalformedQuery(format!("unknown key {other:?}"))),
            }
        }
        let mut problem = problem.ok_or_else(|| Error::MalformedQuery("missing key \"problem\"".into()))?;
        if let Some(c) = case {
            let c = match c.as_str() {
                "a" => SourceCase::A,
                "b" => SourceCase::B,
                "c" => SourceCase::C,
                "d" => SourceCase::D,
                _ => return Err(Error::MalformedQuery(format!("unknown case {c:?}"))),
            };
            problem = Problem::NonlinearSource(c);
        }
        let req = |k: &str| vals.get(k).copied().ok_or_else(|| Error::MalformedQuery(format!("missing key {k:?}")));
        let d = req("d")?;
        let d_int = match d.finite() {
            Some(r) if r.is_integer() => *r.numer(),
            _ => return Err(Error::MalformedQuery(format!("d must be an integer, got {d}"))),
        };
        let mut out = IndexQuery::new(problem, d_int, req("p")?, req("q")?, req("s")?, req("t")?);
        let opt = |k: &str, dflt: XRat| vals.get(k).copied().unwrap_or(dflt);
        out.m = opt("m", out.m);
        out.n = opt("n", out.n);
        out.gamma = opt("gamma", out.gamma);
        out.kappa = opt("kappa", out.kappa);
        out.gamma_hat = opt("gamma_hat", out.gamma_hat);
        out.kappa_hat = opt("kappa_hat", out.kappa_hat);
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::MalformedQuery(m));
        match self.d.finite() {
            Some(r) if r.is_integer() && (1..=4).contains(r.numer()) => {}
            _ => return bad(format!("d must be one of 1, 2, 3, 4, got {}", self.d)),
        }
        for (name, v) in [("p", self.p), ("q", self.q), ("m", self.m), ("n", self.n)] {
            if v < XRat::int(1) {
                return bad(format!("{name} must lie in [1, inf], got {v}"));
            }
        }
        for (name, v) in [
            ("s", self.s),
            ("t", self.t),
            ("gamma", self.gamma),
            ("kappa", self.kappa),
            ("gamma_hat", self.gamma_hat),
            ("kappa_hat", self.kappa_hat),
        ] {
            if !v.is_finite() || v < XRat::zero() {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        Ok(())
    }

    pub(crate) fn indices(&self) -> Result<Ix> {
        self.validate()?;
        let recip = |x: XRat| x.recip().map(|r| r.finite().expect("reciprocal of an index is finite"));
        let p_r = recip(self.p)?;
        let q_r = recip(self.q)?;
        let fin = |x: XRat| x.finite().expect("validated finite");
        Ok(Ix {
            d: fin(self.d),
            s: fin(self.s),
            t: fin(self.t),
            m_r: recip(self.m)?,
            n_r: recip(self.n)?,
            p_r,
            q_r,
            ps_r: Rational::one() - p_r,
            qs_r: Rational::one() - q_r,
            gamma: fin(self.gamma),
            kappa: fin(self.kappa),
            gamma_hat: fin(self.gamma_hat),
            kappa_hat: fin(self.kappa_hat),
        })
    }
}

/// Finite rational view of a query: reciprocals of all Lebesgue indices.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Ix {
    pub d: Rational,
    pub s: Rational,
    pub t: Rational,
    pub m_r: Rational,
    pub n_r: Rational,
    pub p_r: Rational,
    pub q_r: Rational,
    /// `1/p*`.
    pub ps_r: Rational,
    /// `1/q*`.
    pub qs_r: Rational,
    pub gamma: Rational,
    pub kappa: Rational,
    pub gamma_hat: Rational,
    pub kappa_hat: Rational,
}

impl Ix {
    /// `t - d/n`.
    pub fn t_excess(&self) -> Rational {
        self.t - self.d * self.n_r
    }

    /// `s - d/m`.
    pub fn s_excess(&self) -> Rational {
        self.s - self.d * self.m_r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_query() {
        let q = IndexQuery::parse("problem=cprob d=3 p=2 q=2 s=0 t=2").unwrap();
        assert_eq!(q.problem, Problem::CProb);
        assert_eq!(q.m, XRat::int(2));
        let q = IndexQuery::parse("problem=nonlinear_a, case=c, d=1, p=inf, q=3/2, s=1, t=1, gamma=1/2").unwrap();
        assert_eq!(q.problem, Problem::NonlinearSource(SourceCase::C));
        assert_eq!(q.p, XRat::PosInf);
        assert_eq!(q.gamma, XRat::frac(1, 2));
    }

    #[test]
    fn malformed_queries() {
        for bad in [
            "problem=cprob d=5 p=2 q=2 s=0 t=2",
            "problem=cprob d=3/2 p=2 q=2 s=0 t=2",
            "problem=cprob d=3 p=1/2 q=2 s=0 t=2",
            "problem=cprob d=3 p=2 q=2 s=-1 t=2",
            "problem=cprob d=3 p=2 q=2 s=inf t=2",
            "problem=cprob d=3 p=2 q=2 s=0",
            "problem=cprob d=3 p=2 q=2 s=0 t=2 t=3",
            "problem=foo d=3 p=2 q=2 s=0 t=2",
            "problem=cprob d=3 p=2 q=2 s=0 t=2 x=1",
            "problem=cprob d=3 p=2 q=2 s=0 t",
        ] {
            assert!(matches!(IndexQuery::parse(bad), Err(Error::MalformedQuery(_))), "{bad}");
        }
    }
}
