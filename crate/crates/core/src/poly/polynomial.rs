use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use super::monomial::Monomial;
use super::var::{Var, VarUniverse, Variable};
use super::PolyError;

/// Sparse multivariate polynomial with exact rational coefficients.
///
/// The term map never stores a zero coefficient, so structural equality is
/// mathematical equality.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Polynomial<V: Variable = Var> {
    universe: V::Universe,
    terms: BTreeMap<Monomial<V>, BigRational>,
}

pub fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

fn rational_to_f64(c: &BigRational) -> f64 {
    c.to_f64().unwrap_or(f64::NAN)
}

impl<V: Variable> Polynomial<V> {
    pub fn zero(universe: V::Universe) -> Self {
        Self {
            universe,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(universe: V::Universe, c: BigRational) -> Self {
        let mut p = Self::zero(universe);
        if !c.is_zero() {
            p.terms.insert(Monomial::one(), c);
        }
        p
    }

    pub fn var(universe: V::Universe, v: V) -> Result<Self, PolyError> {
        Self::from_terms(universe, [(Monomial::var(v), BigRational::one())])
    }

    /// Builds a polynomial from terms in any order; like monomials are
    /// combined and zero coefficients dropped.
    pub fn from_terms<I>(universe: V::Universe, terms: I) -> Result<Self, PolyError>
    where
        I: IntoIterator<Item = (Monomial<V>, BigRational)>,
    {
        let mut p = Self::zero(universe);
        for (m, c) in terms {
            if let Some((v, _)) = m.factors().iter().find(|(v, _)| !v.belongs_to(&universe)) {
                return Err(PolyError::UnknownVariable(v.to_string()));
            }
            p.add_term(m, c);
        }
        Ok(p)
    }

    fn add_term(&mut self, m: Monomial<V>, c: BigRational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn universe(&self) -> V::Universe {
        self.universe
    }

    /// Terms in ascending monomial order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial<V>, &BigRational)> + '_ {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.is_zero()
    }

    pub fn coefficient(&self, m: &Monomial<V>) -> BigRational {
        self.terms.get(m).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Total degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::degree).max()
    }

    pub fn mentions(&self, pred: impl Fn(&V) -> bool + Copy) -> bool {
        self.terms.keys().any(|m| m.mentions(pred))
    }

    fn check_same(&self, other: &Self) -> Result<(), PolyError> {
        if self.universe == other.universe {
            Ok(())
        } else {
            Err(PolyError::UniverseMismatch {
                left: format!("{:?}", self.universe),
                right: format!("{:?}", other.universe),
            })
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, PolyError> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, PolyError> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c.clone());
        }
        Ok(out)
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self, PolyError> {
        self.check_same(other)?;
        let mut acc: HashMap<Monomial<V>, BigRational> =
            HashMap::with_capacity(self.len() * other.len());
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                *acc.entry(ma.mul(mb)).or_insert_with(BigRational::zero) += ca * cb;
            }
        }
        Ok(Self {
            universe: self.universe,
            terms: acc.into_iter().filter(|(_, c)| !c.is_zero()).collect(),
        })
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Self::zero(self.universe);
        }
        Self {
            universe: self.universe,
            terms: self.terms.iter().map(|(m, a)| (m.clone(), a * c)).collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut result = Self::constant(self.universe, BigRational::one());
        for _ in 0..e {
            result = &result * self;
        }
        result
    }

    /// Formal partial derivative with respect to `v`.
    pub fn partial_derivative(&self, v: V) -> Result<Self, PolyError> {
        if !v.belongs_to(&self.universe) {
            return Err(PolyError::UnknownVariable(v.to_string()));
        }
        let mut out = Self::zero(self.universe);
        for (m, c) in &self.terms {
            if let Some((e, dm)) = m.derivative(v) {
                out.add_term(dm, c * BigRational::from_integer(BigInt::from(e)));
            }
        }
        Ok(out)
    }

    /// Drops every term that mentions a variable matching `pred`, i.e. sets
    /// those variables to zero.
    pub fn set_zero(&self, pred: impl Fn(&V) -> bool + Copy) -> Self {
        Self {
            universe: self.universe,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| !m.mentions(pred))
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    /// Exact evaluation. `value` must assign every variable that occurs.
    pub fn eval_exact(
        &self,
        value: impl Fn(V) -> Option<BigRational>,
    ) -> Result<BigRational, PolyError> {
        let mut sum = BigRational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for &(v, e) in m.factors() {
                let x = value(v).ok_or_else(|| PolyError::MissingAssignment(v.to_string()))?;
                t *= num_traits::pow(x, e as usize);
            }
            sum += t;
        }
        Ok(sum)
    }

    /// Floating evaluation, summing terms in monomial order.
    pub fn eval_f64(&self, value: impl Fn(V) -> Option<f64>) -> Result<f64, PolyError> {
        let mut sum = 0.0;
        for (m, c) in &self.terms {
            let mut t = rational_to_f64(c);
            for &(v, e) in m.factors() {
                let x = value(v).ok_or_else(|| PolyError::MissingAssignment(v.to_string()))?;
                t *= x.powi(e as i32);
            }
            sum += t;
        }
        Ok(sum)
    }

    /// Replaces each variable `v` by the polynomial `image(v)` over another
    /// universe.
    pub fn substitute<W: Variable>(
        &self,
        target: W::Universe,
        image: impl Fn(V) -> Option<Polynomial<W>>,
    ) -> Result<Polynomial<W>, PolyError> {
        let mut powers: HashMap<(V, u32), Polynomial<W>> = HashMap::new();
        let mut bases: HashMap<V, Polynomial<W>> = HashMap::new();
        let mut out = Polynomial::<W>::zero(target);
        for (m, c) in &self.terms {
            let mut t = Polynomial::<W>::constant(target, c.clone());
            for &(v, e) in m.factors() {
                if let std::collections::hash_map::Entry::Vacant(e) = bases.entry(v) {
                    let b = image(v).ok_or_else(|| PolyError::MissingAssignment(v.to_string()))?;
                    if b.universe != target {
                        return Err(PolyError::UniverseMismatch {
                            left: format!("{target:?}"),
                            right: format!("{:?}", b.universe),
                        });
                    }
                    e.insert(b);
                }
                let pw = powers
                    .entry((v, e))
                    .or_insert_with(|| bases[&v].pow(e))
                    .clone();
                t = &t * &pw;
            }
            for (m, c) in t.terms {
                out.add_term(m, c);
            }
        }
        Ok(out)
    }
}

/// Bidegree of a polynomial on `V × W*`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Bidegree {
    /// Every term has V-degree `v` and ℓ-degree `l`.
    Homogeneous { v: u32, l: u32 },
    /// Terms of different bidegrees are mixed.
    NonHomogeneous,
    /// The zero polynomial, bihomogeneous of every bidegree.
    Zero,
}

impl Bidegree {
    pub fn of(v: u32, l: u32) -> Self {
        Bidegree::Homogeneous { v, l }
    }

    pub fn is_bihomogeneous(&self) -> bool {
        !matches!(self, Bidegree::NonHomogeneous)
    }

    /// Bidegree of a product.
    pub fn combine(self, other: Self) -> Self {
        use Bidegree::*;
        match (self, other) {
            (Zero, _) | (_, Zero) => Zero,
            (Homogeneous { v: a, l: b }, Homogeneous { v: c, l: d }) => of(a + c, b + d),
            _ => NonHomogeneous,
        }
    }

    pub fn ell_degree(&self) -> Option<u32> {
        match self {
            Bidegree::Homogeneous { l, .. } => Some(*l),
            _ => None,
        }
    }
}

fn of(v: u32, l: u32) -> Bidegree {
    Bidegree::of(v, l)
}

impl fmt::Display for Bidegree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bidegree::Homogeneous { v, l } => write!(f, "({v},{l})"),
            Bidegree::NonHomogeneous => write!(f, "non-homogeneous"),
            Bidegree::Zero => write!(f, "zero"),
        }
    }
}

fn monomial_bidegree(m: &Monomial<Var>) -> (u32, u32) {
    let l = m.degree_in(Var::is_ell);
    (m.degree() - l, l)
}

impl Polynomial<Var> {
    pub fn bidegree(&self) -> Bidegree {
        let mut degrees = self.terms.keys().map(monomial_bidegree);
        let Some(first) = degrees.next() else {
            return Bidegree::Zero;
        };
        if degrees.all(|d| d == first) {
            Bidegree::of(first.0, first.1)
        } else {
            Bidegree::NonHomogeneous
        }
    }

    /// Splits into bihomogeneous components keyed by `(degV, degL)`.
    pub fn strata(&self) -> BTreeMap<(u32, u32), Polynomial<Var>> {
        let mut out: BTreeMap<(u32, u32), Polynomial<Var>> = BTreeMap::new();
        for (m, c) in &self.terms {
            out.entry(monomial_bidegree(m))
                .or_insert_with(|| Polynomial::zero(self.universe))
                .terms
                .insert(m.clone(), c.clone());
        }
        out
    }

    /// The total derivative in ℓ: component `i` is `∂p/∂l[i]`.
    pub fn d_ell(&self) -> Vec<Polynomial<Var>> {
        self.universe
            .ell_vars()
            .map(|l| {
                self.partial_derivative(l)
                    .expect("ℓ-variables always belong to their universe")
            })
            .collect()
    }

    /// Reads off the coefficient of each `l[i]` in a polynomial that is
    /// linear homogeneous in ℓ. Fails on any term whose ℓ-degree is not 1.
    pub fn ell_coefficients(&self) -> Result<Vec<Polynomial<Var>>, PolyError> {
        let d = self.universe.d();
        let mut out = vec![Polynomial::zero(self.universe); d];
        for (m, c) in &self.terms {
            let ells: Vec<_> = m.factors().iter().filter(|(v, _)| v.is_ell()).collect();
            match ells.as_slice() {
                [(Var::L { coord }, 1)] => {
                    out[*coord as usize - 1].add_term(m.without(Var::l(*coord as usize)), c.clone())
                }
                _ => {
                    return Err(PolyError::NotLinearInEll(m.to_string()));
                }
            }
        }
        Ok(out)
    }

    pub fn mentions_ell(&self) -> bool {
        self.mentions(Var::is_ell)
    }

    pub fn compile(&self) -> CompiledPoly {
        CompiledPoly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| {
                    let factors = m
                        .factors()
                        .iter()
                        .map(|&(v, e)| {
                            let k = self.universe.index(v).expect("variable in universe");
                            (k, e as i32)
                        })
                        .collect();
                    (rational_to_f64(c), factors)
                })
                .collect(),
        }
    }
}

/// Float-evaluation form of a polynomial over a [`VarUniverse`], reading
/// variables from a dense slice laid out by [`VarUniverse::index`].
///
/// Produces bit-identical results to [`Polynomial::eval_f64`].
#[derive(Clone, Debug, PartialEq)]
pub struct CompiledPoly {
    terms: Vec<(f64, Vec<(usize, i32)>)>,
}

impl CompiledPoly {
    pub fn eval(&self, values: &[f64]) -> f64 {
        let mut sum = 0.0;
        for (c, factors) in &self.terms {
            let mut t = *c;
            for &(k, e) in factors {
                t *= values[k].powi(e);
            }
            sum += t;
        }
        sum
    }
}

/// Dense variable assignment for a [`VarUniverse`]: input vectors then ℓ.
pub fn dense_point(universe: VarUniverse, vectors: &[Vec<f64>], ell: Option<&[f64]>) -> Vec<f64> {
    let mut values = Vec::with_capacity(universe.var_count());
    for v in vectors {
        values.extend_from_slice(v);
    }
    match ell {
        Some(l) => values.extend_from_slice(l),
        None => values.resize(universe.var_count(), 0.0),
    }
    values
}

impl<V: Variable> fmt::Display for Polynomial<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().rev().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            if m.is_one() {
                write!(f, "{c}")?;
            } else if c.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{c}*{m}")?;
            }
        }
        Ok(())
    }
}

macro_rules! checked_binop {
    ($tr:ident, $method:ident, $checked:ident) => {
        /// Panics when the universes differ; use the `try_` form to get an error.
        impl<V: Variable> $tr<&Polynomial<V>> for &Polynomial<V> {
            type Output = Polynomial<V>;

            fn $method(self, rhs: &Polynomial<V>) -> Polynomial<V> {
                self.$checked(rhs).expect("polynomials over different universes")
            }
        }
    };
}

checked_binop!(Add, add, try_add);
checked_binop!(Sub, sub, try_sub);
checked_binop!(Mul, mul, try_mul);

impl<V: Variable> Neg for &Polynomial<V> {
    type Output = Polynomial<V>;

    fn neg(self) -> Polynomial<V> {
        self.scale(&-BigRational::one())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u(d: usize, n: usize) -> VarUniverse {
        VarUniverse::new(d, n).unwrap()
    }

    fn x(u: VarUniverse, v: Var) -> Polynomial {
        Polynomial::var(u, v).unwrap()
    }

    #[test]
    fn additive_inverse_is_empty() {
        let uu = u(2, 1);
        let p = &x(uu, Var::v(1, 1)) + &x(uu, Var::l(2));
        let z = &p + &(-&p);
        assert!(z.is_zero());
        assert_eq!(z.len(), 0);
    }

    #[test]
    fn product_of_variables_has_unit_coefficient() {
        let uu = u(2, 1);
        let p = &x(uu, Var::v(1, 1)) * &x(uu, Var::l(1));
        assert_eq!(p.len(), 1);
        let (m, c) = p.terms().next().unwrap();
        assert_eq!(m, &Monomial::from_pairs([(Var::v(1, 1), 1), (Var::l(1), 1)]));
        assert!(c.is_one());
    }

    #[test]
    fn difference_of_squares() {
        let uu = u(2, 1);
        let a = x(uu, Var::v(1, 1));
        let b = x(uu, Var::v(1, 2));
        let lhs = &(&a + &b) * &(&a - &b);
        let rhs = &a.pow(2) - &b.pow(2);
        assert_eq!(lhs, rhs);
        assert_eq!(lhs.len(), 2);
    }

    #[test]
    fn mismatched_universes_are_rejected() {
        let a = x(u(2, 1), Var::v(1, 1));
        let b = x(u(3, 1), Var::v(1, 1));
        assert!(matches!(a.try_add(&b), Err(PolyError::UniverseMismatch { .. })));
        assert!(a.try_mul(&b).is_err());
        assert!(Polynomial::var(u(2, 1), Var::v(2, 1)).is_err());
    }

    #[test]
    fn derivative_examples() {
        let uu = u(3, 1);
        let p = &x(uu, Var::v(1, 1)) * &x(uu, Var::l(1));
        assert_eq!(p.partial_derivative(Var::l(1)).unwrap(), x(uu, Var::v(1, 1)));

        let c = Polynomial::constant(uu, rat(5));
        assert!(c.partial_derivative(Var::l(1)).unwrap().is_zero());

        let q = &x(uu, Var::l(1)) * &x(uu, Var::l(2)).pow(2);
        let expected = (&x(uu, Var::l(1)) * &x(uu, Var::l(2))).scale(&rat(2));
        assert_eq!(q.partial_derivative(Var::l(2)).unwrap(), expected);

        assert!(p.partial_derivative(Var::l(4)).is_err());
    }

    #[test]
    fn eval_examples() {
        let uu = u(2, 1);
        let p = &x(uu, Var::v(1, 1)).pow(2) + &Polynomial::constant(uu, rat(1));
        let at = |v: Var| match v {
            Var::V { vector: 1, coord: 1 } => Some(rat(2)),
            _ => Some(rat(0)),
        };
        assert_eq!(p.eval_exact(at).unwrap(), rat(5));
        assert_eq!(Polynomial::<Var>::zero(uu).eval_exact(|_| None).unwrap(), rat(0));

        let dot = &(&x(uu, Var::v(1, 1)) * &x(uu, Var::l(1)))
            + &(&x(uu, Var::v(1, 2)) * &x(uu, Var::l(2)));
        let pt = dense_point(uu, &[vec![3.0, 4.0]], Some(&[1.0, 1.0]));
        assert_eq!(dot.compile().eval(&pt), 7.0);
        let exact = dot
            .eval_exact(|v| Some(rat(pt[uu.index(v).unwrap()] as i64)))
            .unwrap();
        assert_eq!(exact, rat(7));
        assert!(matches!(
            dot.eval_f64(|v| if v.is_ell() { None } else { Some(1.0) }),
            Err(PolyError::MissingAssignment(_))
        ));
    }

    #[test]
    fn bidegree_examples() {
        let uu = u(2, 2);
        let g = &x(uu, Var::v(1, 1)) * &x(uu, Var::v(2, 1));
        assert_eq!(g.bidegree(), Bidegree::of(2, 0));
        let p = &x(uu, Var::v(1, 1)) * &x(uu, Var::l(1));
        assert_eq!(p.bidegree(), Bidegree::of(1, 1));
        let mixed = &x(uu, Var::v(1, 1)) + &x(uu, Var::l(1));
        assert_eq!(mixed.bidegree(), Bidegree::NonHomogeneous);
        assert_eq!(Polynomial::<Var>::zero(uu).bidegree(), Bidegree::Zero);
        assert_eq!(mixed.strata().len(), 2);
    }

    #[test]
    fn d_ell_examples() {
        let uu = u(3, 2);
        let pairing = (1..=3).fold(Polynomial::zero(uu), |acc, i| {
            &acc + &(&x(uu, Var::v(2, i)) * &x(uu, Var::l(i)))
        });
        let grad = pairing.d_ell();
        for i in 1..=3 {
            assert_eq!(grad[i - 1], x(uu, Var::v(2, i)));
        }
        assert_eq!(pairing.ell_coefficients().unwrap(), grad);

        let gram = &x(uu, Var::v(1, 1)) * &x(uu, Var::v(2, 2));
        assert!(gram.d_ell().iter().all(Polynomial::is_zero));

        let sq = x(uu, Var::l(1)).pow(2);
        let grad = sq.d_ell();
        assert_eq!(grad[0], x(uu, Var::l(1)).scale(&rat(2)));
        assert!(grad[1].is_zero() && grad[2].is_zero());
        assert!(sq.ell_coefficients().is_err());
    }

    #[test]
    fn substitute_composes() {
        let uu = u(2, 1);
        let xu = super::super::XUniverse { count: 2 };
        let x1 = Polynomial::var(xu, super::super::XVar(1)).unwrap();
        let x2 = Polynomial::var(xu, super::super::XVar(2)).unwrap();
        let p = &(&x1 * &x2) + &x1.pow(2);
        let a = x(uu, Var::v(1, 1));
        let b = x(uu, Var::v(1, 2));
        let got = p
            .substitute(uu, |k| Some(if k.0 == 1 { a.clone() } else { b.clone() }))
            .unwrap();
        assert_eq!(got, &(&a * &b) + &a.pow(2));
    }
}
