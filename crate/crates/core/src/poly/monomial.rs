use std::cmp::Ordering;
use std::fmt;

use super::var::Variable;

/// A power product stored sparsely as `(variable, exponent)` pairs sorted by
/// variable, with no zero exponents.
///
/// Monomials are totally ordered graded-lexicographically: first by total
/// degree, then by the exponent of the smallest variable, and so on.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Monomial<V> {
    factors: Vec<(V, u32)>,
}

impl<V: Variable> Monomial<V> {
    pub fn one() -> Self {
        Self {
            factors: Vec::new(),
        }
    }

    pub fn var(v: V) -> Self {
        Self {
            factors: vec![(v, 1)],
        }
    }

    /// Builds a monomial from arbitrary pairs; repeated variables are merged
    /// and zero exponents dropped.
    pub fn from_pairs<I: IntoIterator<Item = (V, u32)>>(pairs: I) -> Self {
        let mut factors: Vec<(V, u32)> = pairs.into_iter().filter(|&(_, e)| e > 0).collect();
        factors.sort_by_key(|a| a.0);
        let mut merged: Vec<(V, u32)> = Vec::with_capacity(factors.len());
        for (v, e) in factors {
            match merged.last_mut() {
                Some((last, acc)) if *last == v => *acc += e,
                _ => merged.push((v, e)),
            }
        }
        Self { factors: merged }
    }

    pub fn factors(&self) -> &[(V, u32)] {
        &self.factors
    }

    pub fn is_one(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.factors.iter().map(|&(_, e)| e).sum()
    }

    /// Degree counted only over variables satisfying `pred`.
    pub fn degree_in(&self, pred: impl Fn(&V) -> bool) -> u32 {
        self.factors
            .iter()
            .filter(|(v, _)| pred(v))
            .map(|&(_, e)| e)
            .sum()
    }

    pub fn exponent(&self, v: V) -> u32 {
        self.factors
            .binary_search_by(|(w, _)| w.cmp(&v))
            .map(|k| self.factors[k].1)
            .unwrap_or(0)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let (a, b) = (&self.factors, &other.factors);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a[i].0, a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Self { factors: out }
    }

    /// `∂/∂v` of the monomial as `(multiplier, monomial)`, or `None` when `v`
    /// does not occur.
    pub fn derivative(&self, v: V) -> Option<(u32, Self)> {
        let k = self.factors.binary_search_by(|(w, _)| w.cmp(&v)).ok()?;
        let e = self.factors[k].1;
        let mut factors = self.factors.clone();
        if e == 1 {
            factors.remove(k);
        } else {
            factors[k].1 = e - 1;
        }
        Some((e, Self { factors }))
    }

    /// The monomial with the factor on `v` removed entirely.
    pub fn without(&self, v: V) -> Self {
        Self {
            factors: self.factors.iter().copied().filter(|(w, _)| *w != v).collect(),
        }
    }

    pub fn mentions(&self, pred: impl Fn(&V) -> bool) -> bool {
        self.factors.iter().any(|(v, _)| pred(v))
    }
}

impl<V: Variable> Ord for Monomial<V> {
    fn cmp(&self, other: &Self) -> Ordering {
        let by_degree = self.degree().cmp(&other.degree());
        if by_degree != Ordering::Equal {
            return by_degree;
        }
        let (a, b) = (&self.factors, &other.factors);
        for (x, y) in a.iter().zip(b.iter()) {
            match x.0.cmp(&y.0) {
                // `self` has a positive exponent on a smaller variable where
                // `other` has zero.
                Ordering::Less => return Ordering::Greater,
                Ordering::Greater => return Ordering::Less,
                Ordering::Equal => match x.1.cmp(&y.1) {
                    Ordering::Equal => continue,
                    ord => return ord,
                },
            }
        }
        // Equal degree and a common prefix means equal factor lists.
        a.len().cmp(&b.len())
    }
}

impl<V: Variable> PartialOrd for Monomial<V> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<V: Variable> fmt::Display for Monomial<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "1");
        }
        for (k, (v, e)) in self.factors.iter().enumerate() {
            if k > 0 {
                write!(f, "*")?;
            }
            if *e == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{v}^{e}")?;
            }
        }
        Ok(())
    }
}
