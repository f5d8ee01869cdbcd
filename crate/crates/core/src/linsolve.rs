//! Exact sparse linear solves over the rationals.
//!
//! Rows are scaled to integers and eliminated fraction-free: reducing row
//! `r` against a pivot row `p` on column `c` replaces `r` by
//! `p[c]·r − r[c]·p` and then divides out the content (gcd of all entries
//! and the right-hand side). The returned solution is the basic one: free
//! columns are zero, so pivot columns are the columns not in the span of
//! earlier columns. That set does not depend on row order.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

#[derive(Clone, Debug)]
struct IntRow {
    entries: BTreeMap<usize, BigInt>,
    rhs: BigInt,
}

impl IntRow {
    fn from_rational(entries: &[(usize, BigRational)], rhs: &BigRational) -> Self {
        let lcm = entries
            .iter()
            .map(|(_, c)| c.denom().clone())
            .fold(rhs.denom().clone(), |acc, d| acc.lcm(&d));
        let scale = |c: &BigRational| (c * BigRational::from_integer(lcm.clone())).to_integer();
        let mut out = Self {
            entries: BTreeMap::new(),
            rhs: scale(rhs),
        };
        for (col, c) in entries {
            if !c.is_zero() {
                *out.entries.entry(*col).or_insert_with(BigInt::zero) += scale(c);
            }
        }
        out.entries.retain(|_, v| !v.is_zero());
        out.normalize();
        out
    }

    fn lead(&self) -> Option<(usize, &BigInt)> {
        self.entries.iter().next().map(|(c, v)| (*c, v))
    }

    fn normalize(&mut self) {
        let g = self
            .entries
            .values()
            .fold(self.rhs.abs(), |acc, v| acc.gcd(v));
        if !g.is_zero() && !g.is_one() {
            for v in self.entries.values_mut() {
                *v /= &g;
            }
            self.rhs /= &g;
        }
    }

    /// `p_lead·self − self_lead·pivot`, cancelling the pivot column.
    fn eliminate(&mut self, pivot: &IntRow, col: usize) {
        let a = self.entries[&col].clone();
        let p = pivot.entries[&col].clone();
        for v in self.entries.values_mut() {
            *v *= &p;
        }
        self.rhs *= &p;
        for (c, v) in &pivot.entries {
            let e = self.entries.entry(*c).or_insert_with(BigInt::zero);
            *e -= &a * v;
        }
        self.rhs -= &a * &pivot.rhs;
        self.entries.retain(|_, v| !v.is_zero());
        self.normalize();
    }
}

/// A linear system `A x = b` with `ncols` unknowns, fed row by row.
#[derive(Clone, Debug)]
pub struct ExactSystem {
    ncols: usize,
    pivots: BTreeMap<usize, IntRow>,
    inconsistent: bool,
}

impl ExactSystem {
    pub fn new(ncols: usize) -> Self {
        Self {
            ncols,
            pivots: BTreeMap::new(),
            inconsistent: false,
        }
    }

    /// Adds the equation `Σ entries[k].1 · x[entries[k].0] = rhs`.
    pub fn push_row(&mut self, entries: &[(usize, BigRational)], rhs: &BigRational) {
        if self.inconsistent {
            return;
        }
        debug_assert!(entries.iter().all(|(c, _)| *c < self.ncols));
        let mut row = IntRow::from_rational(entries, rhs);
        loop {
            let Some((col, _)) = row.lead() else {
                if !row.rhs.is_zero() {
                    self.inconsistent = true;
                }
                return;
            };
            match self.pivots.get(&col) {
                Some(pivot) => row.eliminate(pivot, col),
                None => {
                    self.pivots.insert(col, row);
                    return;
                }
            }
        }
    }

    pub fn is_inconsistent(&self) -> bool {
        self.inconsistent
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// The basic solution, or `None` when the system has no solution.
    pub fn solve(&self) -> Option<Vec<BigRational>> {
        if self.inconsistent {
            return None;
        }
        let mut x = vec![BigRational::zero(); self.ncols];
        for (&col, row) in self.pivots.iter().rev() {
            let mut acc = BigRational::from_integer(row.rhs.clone());
            for (&c, v) in row.entries.range(col + 1..) {
                if !x[c].is_zero() {
                    acc -= &x[c] * BigRational::from_integer(v.clone());
                }
            }
            x[col] = acc / BigRational::from_integer(row.entries[&col].clone());
        }
        Some(x)
    }
}
