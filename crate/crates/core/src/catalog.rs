//! Bihomogeneous generators of the invariant ring on `V × W*` for the
//! catalog groups, already split by degree in ℓ.
//!
//! ℓ is written in dual coordinates and acted on contragrediently, so the
//! natural pairing `Σ_k v[i][k]·l[k]` is invariant for every family. The
//! degree-0 generators use the family's bilinear form:
//!
//! | family  | degree 0 in ℓ                                 | degree 1 in ℓ                           | dropped      |
//! |---------|-----------------------------------------------|-----------------------------------------|--------------|
//! | O       | `gram(i,j) = v_iᵀv_j`, i ≤ j                  | `pair(i)`                               | `ℓᵀℓ`        |
//! | SO      | as O, plus `det(S)` for d-subsets `S`         | as O, plus `crossdet(S')` for (d-1)-subsets | `ℓᵀℓ`    |
//! | Lorentz | `gram(i,j) = v_iᵀηv_j`, η = diag(-1,1,...,1)  | `pair(i)`                               | `ℓᵀηℓ`       |
//! | Sp      | `omega(i,j) = v_iᵀJv_j`, i < j                | `pair(i)`                               | none         |
//!
//! The dual form on ℓ is identically zero for Sp, so nothing is dropped there.

use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::group::{
    act_input, contragredient, mat_vec, minkowski_metric, random_vector, sample, symplectic_form,
    Family, GroupElement, GroupSpec, InputTuple,
};
use crate::metrics::scaled_error;
use crate::poly::{dense_point, rat, Bidegree, CompiledPoly, Monomial, Polynomial, Var, VarUniverse};
use crate::seed::{derive_seed, rng_for};

/// Largest `d` for which determinant generators are expanded.
pub const MAX_DET_DIM: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("determinant generators are expanded only for d <= {MAX_DET_DIM}, got d={0}")]
    DeterminantTooLarge(usize),
    #[error("unrecognised generator label {0:?}")]
    BadLabel(String),
}

impl CatalogError {
    pub fn name(&self) -> &'static str {
        match self {
            CatalogError::DeterminantTooLarge(_) => "DeterminantTooLarge",
            CatalogError::BadLabel(_) => "BadLabel",
        }
    }
}

/// Identifies a generator by kind and (1-indexed) input-vector indices.
///
/// The derived order (kind first, then indices) is the catalog order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Gram(usize, usize),
    Omega(usize, usize),
    Det(Vec<usize>),
    Pair(usize),
    CrossDet(Vec<usize>),
    DualForm,
}

fn join(ix: &[usize]) -> String {
    ix.iter().map(usize::to_string).join(",")
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Gram(i, j) => write!(f, "gram({i},{j})"),
            Label::Omega(i, j) => write!(f, "omega({i},{j})"),
            Label::Det(s) => write!(f, "det({})", join(s)),
            Label::Pair(i) => write!(f, "pair({i})"),
            Label::CrossDet(s) => write!(f, "crossdet({})", join(s)),
            Label::DualForm => write!(f, "dualform"),
        }
    }
}

impl FromStr for Label {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, CatalogError> {
        let bad = || CatalogError::BadLabel(s.to_string());
        if s == "dualform" {
            return Ok(Label::DualForm);
        }
        let (kind, rest) = s.split_once('(').ok_or_else(bad)?;
        let inner = rest.strip_suffix(')').ok_or_else(bad)?;
        let ix: Vec<usize> = if inner.is_empty() {
            Vec::new()
        } else {
            inner
                .split(',')
                .map(|t| t.trim().parse::<usize>().map_err(|_| bad()))
                .collect::<Result<_, _>>()?
        };
        match (kind, ix.as_slice()) {
            ("gram", &[i, j]) => Ok(Label::Gram(i, j)),
            ("omega", &[i, j]) => Ok(Label::Omega(i, j)),
            ("pair", &[i]) => Ok(Label::Pair(i)),
            ("det", _) => Ok(Label::Det(ix)),
            ("crossdet", _) => Ok(Label::CrossDet(ix)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub label: Label,
    pub poly: Polynomial,
    #[serde(with = "bidegree_pair")]
    pub bidegree: Bidegree,
}

mod bidegree_pair {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::poly::Bidegree;

    #[derive(Serialize, Deserialize)]
    struct Pair {
        v: u32,
        l: u32,
    }

    pub fn serialize<S: Serializer>(b: &Bidegree, s: S) -> Result<S::Ok, S::Error> {
        match b {
            Bidegree::Homogeneous { v, l } => Pair { v: *v, l: *l }.serialize(s),
            other => Err(serde::ser::Error::custom(format!("generator has bidegree {other}"))),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Bidegree, D::Error> {
        let p = Pair::deserialize(d)?;
        Ok(Bidegree::of(p.v, p.l))
    }
}

impl Generator {
    fn new(label: Label, poly: Polynomial) -> Self {
        let bidegree = poly.bidegree();
        debug_assert!(
            matches!(bidegree, Bidegree::Homogeneous { .. }),
            "{label} is not bihomogeneous"
        );
        Self {
            label,
            poly,
            bidegree,
        }
    }

    pub fn ell_degree(&self) -> u32 {
        self.bidegree.ell_degree().unwrap_or(0)
    }
}

/// Generators of the invariant ring, ordered as `f_1..f_r` (degree 0 in ℓ),
/// `f_{r+1}..f_s` (degree 1) and the higher-degree ones that are dropped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSet {
    pub spec: GroupSpec,
    pub deg0: Vec<Generator>,
    pub deg1: Vec<Generator>,
    pub discarded: Vec<Generator>,
}

impl GeneratorSet {
    pub fn discarded_count(&self) -> usize {
        self.discarded.len()
    }

    /// All generators in `X_1..X_m` order.
    pub fn all(&self) -> impl Iterator<Item = &Generator> {
        self.deg0.iter().chain(&self.deg1).chain(&self.discarded)
    }

    pub fn len(&self) -> usize {
        self.deg0.len() + self.deg1.len() + self.discarded.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

type Column = Vec<Var>;

fn vector_column(j: usize, d: usize) -> Column {
    (1..=d).map(|i| Var::v(j, i)).collect()
}

fn ell_column(d: usize) -> Column {
    (1..=d).map(Var::l).collect()
}

/// `xᵀ F y` for an integer form `F`.
fn bilinear(u: VarUniverse, x: &Column, form: &DMatrix<f64>, y: &Column) -> Polynomial {
    let mut terms = Vec::new();
    for (a, &xa) in x.iter().enumerate() {
        for (b, &yb) in y.iter().enumerate() {
            let f = form[(a, b)];
            if f != 0.0 {
                terms.push((Monomial::from_pairs([(xa, 1), (yb, 1)]), rat(f as i64)));
            }
        }
    }
    Polynomial::from_terms(u, terms).expect("catalog variables lie in the universe")
}

fn permutation_sign(p: &[usize]) -> i64 {
    let inversions = (0..p.len())
        .flat_map(|i| (i + 1..p.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| p[i] > p[j])
        .count();
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Leibniz expansion of the determinant whose columns are the given
/// variable vectors.
fn determinant(u: VarUniverse, columns: &[Column]) -> Polynomial {
    let d = columns.len();
    let terms = (0..d).permutations(d).map(|perm| {
        // row `r` takes its entry from column `perm[r]`
        let m = Monomial::from_pairs((0..d).map(|r| (columns[perm[r]][r], 1)));
        (m, rat(permutation_sign(&perm)))
    });
    Polynomial::from_terms(u, terms.collect::<Vec<_>>()).expect("catalog variables lie in the universe")
}

pub fn generators(spec: GroupSpec) -> Result<GeneratorSet, CatalogError> {
    let (d, n) = (spec.d, spec.n);
    let u = spec.universe();
    let ell = ell_column(d);
    let identity = DMatrix::<f64>::identity(d, d);

    let mut deg0 = Vec::new();
    let mut deg1 = Vec::new();
    let mut discarded = Vec::new();

    let form = match spec.family {
        Family::O | Family::SO => identity.clone(),
        Family::Lorentz => minkowski_metric(d),
        Family::Sp => symplectic_form(d),
    };
    for i in 1..=n {
        for j in i..=n {
            let (label, keep) = match spec.family {
                Family::Sp => (Label::Omega(i, j), i < j),
                _ => (Label::Gram(i, j), true),
            };
            if keep {
                let p = bilinear(u, &vector_column(i, d), &form, &vector_column(j, d));
                deg0.push(Generator::new(label, p));
            }
        }
    }
    for i in 1..=n {
        let p = bilinear(u, &vector_column(i, d), &identity, &ell);
        deg1.push(Generator::new(Label::Pair(i), p));
    }
    match spec.family {
        // η⁻¹ = η, so the dual form is the same matrix.
        Family::O | Family::SO | Family::Lorentz => {
            discarded.push(Generator::new(Label::DualForm, bilinear(u, &ell, &form, &ell)));
        }
        Family::Sp => {}
    }

    if spec.family == Family::SO {
        if d > MAX_DET_DIM {
            return Err(CatalogError::DeterminantTooLarge(d));
        }
        for subset in (1..=n).combinations(d) {
            let cols: Vec<Column> = subset.iter().map(|&j| vector_column(j, d)).collect();
            deg0.push(Generator::new(Label::Det(subset), determinant(u, &cols)));
        }
        for subset in (1..=n).combinations(d - 1) {
            let mut cols: Vec<Column> = subset.iter().map(|&j| vector_column(j, d)).collect();
            cols.push(ell.clone());
            deg1.push(Generator::new(Label::CrossDet(subset), determinant(u, &cols)));
        }
    }

    deg0.sort_by(|a, b| a.label.cmp(&b.label));
    deg1.sort_by(|a, b| a.label.cmp(&b.label));
    Ok(GeneratorSet {
        spec,
        deg0,
        deg1,
        discarded,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ItemReport {
    pub label: String,
    pub max_error: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub trials: usize,
    pub tolerance: f64,
    pub items: Vec<ItemReport>,
    pub pass: bool,
}

impl CheckReport {
    pub(crate) fn from_items(trials: usize, tolerance: f64, items: Vec<ItemReport>) -> Self {
        let pass = items.iter().all(|i| i.pass);
        Self {
            trials,
            tolerance,
            items,
            pass,
        }
    }

    pub fn max_error(&self) -> f64 {
        self.items.iter().map(|i| i.max_error).fold(0.0, f64::max)
    }
}

/// Compares `f(gX, g·ℓ)` with `f(X, ℓ)` for every generator (dropped ones
/// included) over `trials` sampled group elements and Gaussian inputs.
pub fn check_invariance(genset: &GeneratorSet, trials: usize, tol: f64, seed: u64) -> CheckReport {
    let elements: Vec<GroupElement> = (0..trials as u64)
        .map(|t| sample(genset.spec, derive_seed(seed, "invariance/group", t)))
        .collect();
    check_invariance_under(genset, &elements, tol, seed)
}

/// As [`check_invariance`], with caller-chosen group elements (one trial
/// each). Useful for negative controls such as reflections.
pub fn check_invariance_under(
    genset: &GeneratorSet,
    elements: &[GroupElement],
    tol: f64,
    seed: u64,
) -> CheckReport {
    let compiled: Vec<_> = genset.all().map(|g| g.poly.compile()).collect();
    let worst = invariance_errors(genset.spec, &compiled, elements, seed);
    let items = genset
        .all()
        .zip(worst)
        .map(|(g, e)| ItemReport {
            label: g.label.to_string(),
            max_error: e,
            pass: e <= tol,
        })
        .collect();
    CheckReport::from_items(elements.len(), tol, items)
}

fn invariance_errors(
    spec: GroupSpec,
    compiled: &[CompiledPoly],
    elements: &[GroupElement],
    seed: u64,
) -> Vec<f64> {
    let u = spec.universe();
    let mut worst = vec![0.0f64; compiled.len()];
    for (t, g) in elements.iter().enumerate() {
        let mut rng = rng_for(seed, "invariance/input", t as u64);
        let x = InputTuple::random(&spec, &mut rng);
        let l = random_vector(spec.d, &mut rng);
        let gx = act_input(g, &x).expect("sampled input has the spec's shape");
        let gl = match contragredient(g) {
            Ok(m) => mat_vec(&m, &l),
            Err(_) => vec![f64::NAN; spec.d],
        };
        let before = dense_point(u, &x.vectors, Some(&l));
        let after = dense_point(u, &gx.vectors, Some(&gl));
        for (k, c) in compiled.iter().enumerate() {
            let err = scaled_error(c.eval(&after), c.eval(&before));
            worst[k] = if err.is_nan() { f64::INFINITY } else { worst[k].max(err) };
        }
    }
    worst
}

/// Largest scaled error of `p(gX, g·ℓ)` against `p(X, ℓ)` over `trials`
/// sampled elements, for an arbitrary polynomial on `V × W*`.
pub fn invariance_violation(p: &Polynomial, spec: GroupSpec, trials: usize, seed: u64) -> f64 {
    let elements: Vec<GroupElement> = (0..trials as u64)
        .map(|t| sample(spec, derive_seed(seed, "invariance/group", t)))
        .collect();
    invariance_errors(spec, &[p.compile()], &elements, seed)[0]
}

/// Whether every generator's stored bidegree matches what
/// [`Polynomial::bidegree`] reports and is homogeneous.
pub fn all_bihomogeneous(genset: &GeneratorSet) -> bool {
    genset
        .all()
        .all(|g| g.poly.bidegree() == g.bidegree && matches!(g.bidegree, Bidegree::Homogeneous { .. }))
}
