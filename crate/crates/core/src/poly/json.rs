//! JSON encoding of polynomials.
//!
//! ```json
//! {"d":3,"n":2,"terms":[{"coeff":"3/2","exps":{"v1_1":1,"l_2":1}}]}
//! ```
//!
//! Coefficients are `"p/q"` strings in lowest terms with `q > 0`. Polynomials
//! in generator variables use `{"vars":m,"terms":[...]}` with names `X1..Xm`.

use std::collections::BTreeMap;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::monomial::Monomial;
use super::polynomial::Polynomial;
use super::var::{Var, VarUniverse, Variable, XUniverse, XVar};
use super::PolyError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub coeff: String,
    pub exps: BTreeMap<String, u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialJson {
    pub d: usize,
    pub n: usize,
    pub terms: Vec<TermJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XPolynomialJson {
    pub vars: usize,
    pub terms: Vec<TermJson>,
}

pub fn format_rational(c: &BigRational) -> String {
    format!("{}/{}", c.numer(), c.denom())
}

/// Parses `"p/q"` (or a bare integer `"p"`). Rejects `q ≤ 0` and fractions
/// not in lowest terms.
pub fn parse_rational(s: &str) -> Result<BigRational, PolyError> {
    let bad = || PolyError::Malformed(format!("bad coefficient {s:?}"));
    let (p, q) = match s.split_once('/') {
        Some((p, q)) => (
            BigInt::from_str(p.trim()).map_err(|_| bad())?,
            BigInt::from_str(q.trim()).map_err(|_| bad())?,
        ),
        None => (BigInt::from_str(s.trim()).map_err(|_| bad())?, BigInt::one()),
    };
    if !q.is_positive() {
        return Err(PolyError::Malformed(format!(
            "coefficient {s:?} needs a positive denominator"
        )));
    }
    if !p.gcd(&q).is_one() && !p.is_zero() {
        return Err(PolyError::Malformed(format!(
            "coefficient {s:?} is not in lowest terms"
        )));
    }
    Ok(BigRational::new_raw(p, q))
}

fn terms_to_json<V: Variable>(p: &Polynomial<V>) -> Vec<TermJson> {
    p.terms()
        .map(|(m, c)| TermJson {
            coeff: format_rational(c),
            exps: m.factors().iter().map(|(v, e)| (v.to_string(), *e)).collect(),
        })
        .collect()
}

fn terms_from_json<V>(universe: V::Universe, terms: &[TermJson]) -> Result<Polynomial<V>, PolyError>
where
    V: Variable + FromStr<Err = PolyError>,
{
    let parsed = terms
        .iter()
        .map(|t| {
            let c = parse_rational(&t.coeff)?;
            let factors = t
                .exps
                .iter()
                .map(|(name, e)| Ok((name.parse::<V>()?, *e)))
                .collect::<Result<Vec<_>, PolyError>>()?;
            Ok((Monomial::from_pairs(factors), c))
        })
        .collect::<Result<Vec<_>, PolyError>>()?;
    Polynomial::from_terms(universe, parsed)
}

impl Polynomial<Var> {
    pub fn to_json(&self) -> PolynomialJson {
        let u = self.universe();
        PolynomialJson {
            d: u.d(),
            n: u.n(),
            terms: terms_to_json(self),
        }
    }

    pub fn from_json(j: &PolynomialJson) -> Result<Self, PolyError> {
        terms_from_json(VarUniverse::new(j.d, j.n)?, &j.terms)
    }
}

impl Polynomial<XVar> {
    pub fn to_json(&self) -> XPolynomialJson {
        XPolynomialJson {
            vars: self.universe().count,
            terms: terms_to_json(self),
        }
    }

    pub fn from_json(j: &XPolynomialJson) -> Result<Self, PolyError> {
        terms_from_json(XUniverse { count: j.vars }, &j.terms)
    }
}

impl Serialize for Polynomial<Var> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polynomial<Var> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = PolynomialJson::deserialize(d)?;
        Self::from_json(&j).map_err(D::Error::custom)
    }
}

impl Serialize for Polynomial<XVar> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polynomial<XVar> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = XPolynomialJson::deserialize(d)?;
        Self::from_json(&j).map_err(D::Error::custom)
    }
}
