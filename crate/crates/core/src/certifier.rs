//! Exact decomposition of equivariant polynomial maps.
//!
//! For `f: V → W`, the curried function `(v, ℓ) ↦ ℓ(f(v))` is invariant,
//! hence a polynomial `P(f_1, ..., f_m)` in the generators. Differentiating
//! in ℓ and setting `ℓ = 0` leaves
//! `f = Σ_j ∂_j P(f_1, ..., f_r, 0, ..., 0) · F_j` over the degree-1
//! generators. [`decompose`] carries this out and then checks the identity
//! with exact arithmetic before returning.

use std::collections::{BTreeMap, HashMap};

use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{invariance_violation, GeneratorSet, Label};
use crate::engine::Parametrization;
use crate::group::{GroupSpec, InputTuple};
use crate::linsolve::ExactSystem;
use crate::poly::{dense_point, Monomial, PolyError, Polynomial, Var, VarUniverse, XUniverse, XVar};

/// Targets whose numeric invariance violation exceeds this are reported as
/// not invariant in [`CertifyError::NoExpression`] diagnostics.
pub const INVARIANCE_THRESHOLD: f64 = 1e-6;
const DIAGNOSTIC_TRIALS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertifyError {
    #[error("no expression in the generators up to degree {degree_bound} for stratum {stratum:?}: {hint}")]
    NoExpression {
        degree_bound: u32,
        stratum: (u32, u32),
        invariance_violation: f64,
        hint: String,
    },
    #[error("certification failed; residual {residual}")]
    CertificationFailure { residual: String },
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("generator set and parametrization disagree: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

impl CertifyError {
    pub fn name(&self) -> &'static str {
        match self {
            CertifyError::NoExpression { .. } => "NoExpression",
            CertifyError::CertificationFailure { .. } => "CertificationFailure",
            CertifyError::InvalidMap(_) => "InvalidMap",
            CertifyError::Mismatch(_) => "Mismatch",
            CertifyError::Poly(_) => "PolyError",
        }
    }
}

/// A polynomial map `V → W`: `d` component polynomials in the V-block.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolyMap {
    d: usize,
    n: usize,
    components: Vec<Polynomial>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolyMap {
    d: usize,
    n: usize,
    components: Vec<Polynomial>,
}

impl<'de> Deserialize<'de> for PolyMap {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let raw = RawPolyMap::deserialize(de)?;
        let u = VarUniverse::new(raw.d, raw.n).map_err(serde::de::Error::custom)?;
        PolyMap::new(u, raw.components).map_err(serde::de::Error::custom)
    }
}

impl PolyMap {
    pub fn new(universe: VarUniverse, components: Vec<Polynomial>) -> Result<Self, CertifyError> {
        if components.len() != universe.d() {
            return Err(CertifyError::InvalidMap(format!(
                "expected {} components, got {}",
                universe.d(),
                components.len()
            )));
        }
        for (i, c) in components.iter().enumerate() {
            if c.universe() != universe {
                return Err(CertifyError::InvalidMap(format!(
                    "component {} is over {}, expected {universe}",
                    i + 1,
                    c.universe()
                )));
            }
            if c.mentions_ell() {
                return Err(CertifyError::InvalidMap(format!(
                    "component {} mentions ℓ-variables",
                    i + 1
                )));
            }
        }
        Ok(Self {
            d: universe.d(),
            n: universe.n(),
            components,
        })
    }

    pub fn zero(universe: VarUniverse) -> Self {
        Self::new(universe, vec![Polynomial::zero(universe); universe.d()]).expect("zero map is valid")
    }

    pub fn universe(&self) -> VarUniverse {
        VarUniverse::new(self.d, self.n).expect("validated on construction")
    }

    pub fn components(&self) -> &[Polynomial] {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Polynomial::is_zero)
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: &BigRational, other: &PolyMap, b: &BigRational) -> Result<PolyMap, CertifyError> {
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(x, y)| x.scale(a).try_add(&y.scale(b)))
            .collect::<Result<Vec<_>, _>>()?;
        PolyMap::new(self.universe(), components)
    }

    pub fn eval(&self, x: &InputTuple) -> Vec<f64> {
        let pt = dense_point(self.universe(), &x.vectors, None);
        self.components.iter().map(|c| c.compile().eval(&pt)).collect()
    }
}

/// `(v, ℓ) ↦ ℓ(f(v)) = Σ_i l[i]·f_i(v)`.
pub fn curry(f: &PolyMap) -> Polynomial {
    let u = f.universe();
    f.components
        .iter()
        .enumerate()
        .fold(Polynomial::zero(u), |acc, (i, c)| {
            let l = Polynomial::var(u, Var::l(i + 1)).expect("ℓ-variable in universe");
            &acc + &(&l * c)
        })
}

/// A polynomial `P(X_1, ..., X_m)` with `P(f_1, ..., f_m)` equal to the
/// target. `legend[k-1]` names the generator behind `X_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubalgebraExpression {
    pub p: Polynomial<XVar>,
    pub degree_bound: u32,
    pub legend: Vec<Label>,
}

/// `ceil(deg(target) / min generator degree)`, at least 1.
pub fn default_degree_bound(target: &Polynomial, genset: &GeneratorSet) -> u32 {
    let min_deg = genset
        .all()
        .filter_map(|g| g.poly.degree())
        .filter(|&d| d > 0)
        .min()
        .unwrap_or(1);
    target.degree().unwrap_or(0).div_ceil(min_deg).max(1)
}

/// Exponent vectors `α` over the generators with `Σ α_k·bideg(f_k) = stratum`
/// and `|α| ≤ bound`.
fn candidate_exponents(bidegrees: &[(u32, u32)], stratum: (u32, u32), bound: u32) -> Vec<Vec<u32>> {
    fn rec(
        k: usize,
        bidegrees: &[(u32, u32)],
        left: (u32, u32),
        budget: u32,
        current: &mut Vec<u32>,
        out: &mut Vec<Vec<u32>>,
    ) {
        if k == bidegrees.len() {
            if left == (0, 0) {
                out.push(current.clone());
            }
            return;
        }
        let (gv, gl) = bidegrees[k];
        if gv == 0 && gl == 0 {
            current.push(0);
            rec(k + 1, bidegrees, left, budget, current, out);
            current.pop();
            return;
        }
        let mut e = 0;
        while e <= budget && e * gv <= left.0 && e * gl <= left.1 {
            current.push(e);
            rec(k + 1, bidegrees, (left.0 - e * gv, left.1 - e * gl), budget - e, current, out);
            current.pop();
            e += 1;
        }
    }
    let mut out = Vec::new();
    rec(0, bidegrees, stratum, bound, &mut Vec::new(), &mut out);
    out
}

struct PowerCache<'a> {
    generators: Vec<&'a Polynomial>,
    powers: HashMap<(usize, u32), Polynomial>,
}

impl<'a> PowerCache<'a> {
    fn power(&mut self, k: usize, e: u32) -> Polynomial {
        if let Some(p) = self.powers.get(&(k, e)) {
            return p.clone();
        }
        let p = if e == 1 {
            self.generators[k].clone()
        } else {
            &self.power(k, e - 1) * self.generators[k]
        };
        self.powers.insert((k, e), p.clone());
        p
    }

    fn product(&mut self, alpha: &[u32], u: VarUniverse) -> Polynomial {
        let mut acc: Option<Polynomial> = None;
        for (k, &e) in alpha.iter().enumerate() {
            if e > 0 {
                let pw = self.power(k, e);
                acc = Some(match acc {
                    None => pw,
                    Some(a) => &a * &pw,
                });
            }
        }
        acc.unwrap_or_else(|| Polynomial::constant(u, BigRational::from_integer(1.into())))
    }
}

fn x_monomial(alpha: &[u32]) -> Monomial<XVar> {
    Monomial::from_pairs(alpha.iter().enumerate().map(|(k, &e)| (XVar::new(k + 1), e)))
}

/// Solves for one bihomogeneous stratum; `None` when infeasible.
fn express_stratum(
    stratum: (u32, u32),
    target: &Polynomial,
    genset: &GeneratorSet,
    bound: u32,
) -> Option<Vec<(Monomial<XVar>, BigRational)>> {
    let u = target.universe();
    let bidegrees: Vec<(u32, u32)> = genset
        .all()
        .map(|g| match g.bidegree {
            crate::poly::Bidegree::Homogeneous { v, l } => (v, l),
            _ => (0, 0),
        })
        .collect();
    let mut candidates = candidate_exponents(&bidegrees, stratum, bound);
    candidates.sort_by_cached_key(|a| x_monomial(a));

    let mut cache = PowerCache {
        generators: genset.all().map(|g| &g.poly).collect(),
        powers: HashMap::new(),
    };
    let mut rows: BTreeMap<Monomial<Var>, Vec<(usize, BigRational)>> = BTreeMap::new();
    for (col, alpha) in candidates.iter().enumerate() {
        for (m, c) in cache.product(alpha, u).terms() {
            rows.entry(m.clone()).or_default().push((col, c.clone()));
        }
    }
    for (m, _) in target.terms() {
        rows.entry(m.clone()).or_default();
    }

    let mut system = ExactSystem::new(candidates.len());
    for (m, entries) in &rows {
        system.push_row(entries, &target.coefficient(m));
        if system.is_inconsistent() {
            return None;
        }
    }
    let x = system.solve()?;
    Some(
        candidates
            .iter()
            .zip(x)
            .filter(|(_, c)| !num_traits::Zero::is_zero(c))
            .map(|(a, c)| (x_monomial(a), c))
            .collect(),
    )
}

/// Writes `target` as a polynomial in all generators (degree 0, degree 1,
/// then the dropped ones), stratum by stratum, via an exact linear solve
/// over the generator monomials of matching bidegree and total degree at
/// most `degree_bound`.
pub fn express_in_generators(
    target: &Polynomial,
    genset: &GeneratorSet,
    degree_bound: u32,
) -> Result<SubalgebraExpression, CertifyError> {
    let u = genset.spec.universe();
    if target.universe() != u {
        return Err(CertifyError::Mismatch(format!(
            "target over {}, generators over {u}",
            target.universe()
        )));
    }
    let xu = XUniverse { count: genset.len() };
    let strata: Vec<((u32, u32), Polynomial)> = target.strata().into_iter().collect();
    let solved: Vec<Result<Vec<_>, (u32, u32)>> = strata
        .par_iter()
        .map(|(s, part)| express_stratum(*s, part, genset, degree_bound).ok_or(*s))
        .collect();

    let mut terms = Vec::new();
    for r in solved {
        match r {
            Ok(t) => terms.extend(t),
            Err(stratum) => return Err(no_expression(target, genset.spec, degree_bound, stratum)),
        }
    }
    let p = Polynomial::from_terms(xu, terms)?;
    let back = p.substitute(u, |x| genset.all().nth(x.index() - 1).map(|g| g.poly.clone()))?;
    if &back != target {
        return Err(CertifyError::CertificationFailure {
            residual: back.try_sub(target)?.to_string(),
        });
    }
    Ok(SubalgebraExpression {
        p,
        degree_bound,
        legend: genset.all().map(|g| g.label.clone()).collect(),
    })
}

fn no_expression(target: &Polynomial, spec: GroupSpec, degree_bound: u32, stratum: (u32, u32)) -> CertifyError {
    let violation = invariance_violation(target, spec, DIAGNOSTIC_TRIALS, 0);
    let hint = if violation > INVARIANCE_THRESHOLD {
        format!("target is not invariant (numeric violation {violation:.3e}); no degree bound will help")
    } else {
        format!("target looks invariant (numeric violation {violation:.3e}); try a larger degree bound")
    };
    CertifyError::NoExpression {
        degree_bound,
        stratum,
        invariance_violation: violation,
        hint,
    }
}

/// `f = Σ_j p_j(f_1, ..., f_r)·F_j` with one `p_j` per basis map, each a
/// polynomial in `X_1..X_r` standing for the features.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub coefficients: Vec<Polynomial<XVar>>,
    pub param: Parametrization,
    pub degree_bound: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientJson {
    pub basis: Label,
    pub p: Polynomial<XVar>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionJson {
    pub spec: GroupSpec,
    pub degree_bound: u32,
    pub legend: BTreeMap<String, Label>,
    pub coefficients: Vec<CoefficientJson>,
    pub certified: bool,
}

impl Decomposition {
    pub fn to_json(&self) -> DecompositionJson {
        DecompositionJson {
            spec: self.param.spec,
            degree_bound: self.degree_bound,
            legend: self
                .param
                .features
                .iter()
                .enumerate()
                .map(|(k, f)| (XVar::new(k + 1).to_string(), f.label.clone()))
                .collect(),
            coefficients: self
                .param
                .basis
                .iter()
                .zip(&self.coefficients)
                .map(|(b, p)| CoefficientJson {
                    basis: b.source_label.clone(),
                    p: p.clone(),
                })
                .collect(),
            certified: true,
        }
    }

    pub fn coefficient_for(&self, label: &Label) -> Option<&Polynomial<XVar>> {
        self.param
            .basis
            .iter()
            .position(|b| &b.source_label == label)
            .map(|k| &self.coefficients[k])
    }
}

fn check_compatible(genset: &GeneratorSet, param: &Parametrization) -> Result<(), CertifyError> {
    let same = genset.spec == param.spec
        && genset.deg0.iter().map(|g| &g.label).eq(param.features.iter().map(|f| &f.label))
        && genset.deg1.iter().map(|g| &g.label).eq(param.basis.iter().map(|b| &b.source_label));
    if same {
        Ok(())
    } else {
        Err(CertifyError::Mismatch(format!(
            "parametrization for {} does not come from generators for {}",
            param.spec, genset.spec
        )))
    }
}

/// Decomposes `f` over the parametrization and certifies the result.
pub fn decompose(
    f: &PolyMap,
    genset: &GeneratorSet,
    param: &Parametrization,
    degree_bound: u32,
) -> Result<Decomposition, CertifyError> {
    check_compatible(genset, param)?;
    if f.universe() != genset.spec.universe() {
        return Err(CertifyError::Mismatch(format!(
            "map over {}, generators over {}",
            f.universe(),
            genset.spec.universe()
        )));
    }
    let expr = express_in_generators(&curry(f), genset, degree_bound)?;
    let r = genset.deg0.len();
    let s = r + genset.deg1.len();
    let features_only = XUniverse { count: r };
    let coefficients = (r + 1..=s)
        .map(|j| {
            let dp = expr.p.partial_derivative(XVar::new(j))?;
            let at_zero = dp.set_zero(|x| x.index() > r);
            Polynomial::from_terms(features_only, at_zero.terms().map(|(m, c)| (m.clone(), c.clone())))
        })
        .collect::<Result<Vec<_>, PolyError>>()?;
    let dec = Decomposition {
        coefficients,
        param: param.clone(),
        degree_bound,
    };
    let report = certify_identity(f, &dec)?;
    if !report.pass {
        return Err(CertifyError::CertificationFailure {
            residual: report.residual.components.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("; "),
        });
    }
    Ok(dec)
}

/// [`decompose`] with [`default_degree_bound`] and a freshly derived
/// parametrization.
pub fn decompose_default(f: &PolyMap, genset: &GeneratorSet) -> Result<Decomposition, CertifyError> {
    let param = crate::engine::derive(genset).map_err(|e| CertifyError::Mismatch(e.to_string()))?;
    let bound = default_degree_bound(&curry(f), genset);
    decompose(f, genset, &param, bound)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificationReport {
    pub pass: bool,
    pub residual: PolyMap,
}

/// `residual = f − Σ_j p_j(features)·F_j`, computed exactly.
pub fn certify_identity(f: &PolyMap, dec: &Decomposition) -> Result<CertificationReport, CertifyError> {
    let u = f.universe();
    let param = &dec.param;
    if param.spec.universe() != u || dec.coefficients.len() != param.basis.len() {
        return Err(CertifyError::Mismatch("decomposition does not fit the map".into()));
    }
    let features: Vec<&Polynomial> = param.features.iter().map(|g| &g.poly).collect();
    let mut residual: Vec<Polynomial> = f.components.clone();
    for (p, basis) in dec.coefficients.iter().zip(&param.basis) {
        if p.is_zero() {
            continue;
        }
        let coeff = p.substitute(u, |x| features.get(x.index() - 1).map(|&q| q.clone()))?;
        for (res, comp) in residual.iter_mut().zip(&basis.components) {
            *res = res.try_sub(&coeff.try_mul(comp)?)?;
        }
    }
    let residual = PolyMap::new(u, residual)?;
    Ok(CertificationReport {
        pass: residual.is_zero(),
        residual,
    })
}
