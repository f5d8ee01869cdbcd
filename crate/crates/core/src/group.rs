//! Matrix groups acting on `V = (R^d)^n`, `W = R^d` and `W*`.

use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::VarUniverse;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GroupError {
    #[error("invalid group spec: {0}")]
    InvalidSpec(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },
    #[error("group element is numerically singular")]
    Singular,
}

impl GroupError {
    pub fn name(&self) -> &'static str {
        match self {
            GroupError::InvalidSpec(_) => "InvalidSpec",
            GroupError::DimensionMismatch { .. } => "DimensionMismatch",
            GroupError::Singular => "Singular",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    O,
    SO,
    Lorentz,
    Sp,
}

impl Family {
    pub fn is_compact(&self) -> bool {
        matches!(self, Family::O | Family::SO)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::O => "O",
            Family::SO => "SO",
            Family::Lorentz => "Lorentz",
            Family::Sp => "Sp",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Family {
    type Err = GroupError;

    fn from_str(s: &str) -> Result<Self, GroupError> {
        match s {
            "O" => Ok(Family::O),
            "SO" => Ok(Family::SO),
            "Lorentz" => Ok(Family::Lorentz),
            "Sp" => Ok(Family::Sp),
            other => Err(GroupError::InvalidSpec(format!("unknown group family {other:?}"))),
        }
    }
}

/// Which classical group acts, on how many input vectors of which dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct GroupSpec {
    pub family: Family,
    pub d: usize,
    pub n: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    family: Family,
    d: usize,
    n: usize,
}

impl TryFrom<RawSpec> for GroupSpec {
    type Error = GroupError;

    fn try_from(r: RawSpec) -> Result<Self, GroupError> {
        GroupSpec::new(r.family, r.d, r.n)
    }
}

impl GroupSpec {
    pub fn new(family: Family, d: usize, n: usize) -> Result<Self, GroupError> {
        if d == 0 || n == 0 {
            return Err(GroupError::InvalidSpec(format!("d={d}, n={n}: both must be at least 1")));
        }
        if family == Family::Lorentz && d < 2 {
            return Err(GroupError::InvalidSpec("the Lorentz group needs d >= 2".into()));
        }
        if family == Family::Sp && !d.is_multiple_of(2) {
            return Err(GroupError::InvalidSpec(format!("Sp(d) needs even d, got {d}")));
        }
        Ok(Self { family, d, n })
    }

    pub fn universe(&self) -> VarUniverse {
        VarUniverse::new(self.d, self.n).expect("validated spec")
    }

    /// Relative tolerance for numeric invariance and equivariance checks.
    pub fn default_tolerance(&self) -> f64 {
        if self.family.is_compact() {
            1e-9
        } else {
            1e-7
        }
    }

    /// Tolerance for the defining relation of sampled elements.
    pub fn membership_tolerance(&self) -> f64 {
        if self.family.is_compact() {
            1e-9
        } else {
            1e-8
        }
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}) on n={}", self.family, self.d, self.n)
    }
}

/// `diag(-1, 1, ..., 1)`.
pub fn minkowski_metric(d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| match (i == j, i) {
        (true, 0) => -1.0,
        (true, _) => 1.0,
        _ => 0.0,
    })
}

/// Block diagonal with `[[0, -1], [1, 0]]` blocks (`d` even).
pub fn symplectic_form(d: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(d, d);
    for b in 0..d / 2 {
        j[(2 * b, 2 * b + 1)] = -1.0;
        j[(2 * b + 1, 2 * b)] = 1.0;
    }
    j
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    matrix: DMatrix<f64>,
    spec: GroupSpec,
}

impl GroupElement {
    pub fn identity(spec: GroupSpec) -> Self {
        Self {
            matrix: DMatrix::identity(spec.d, spec.d),
            spec,
        }
    }

    /// Wraps an arbitrary `d×d` matrix. Membership is not checked; see
    /// [`verify_membership`].
    pub fn from_matrix(spec: GroupSpec, matrix: DMatrix<f64>) -> Result<Self, GroupError> {
        if matrix.shape() != (spec.d, spec.d) {
            return Err(GroupError::DimensionMismatch {
                expected: format!("{0}x{0}", spec.d),
                found: format!("{}x{}", matrix.nrows(), matrix.ncols()),
            });
        }
        Ok(Self { matrix, spec })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn spec(&self) -> GroupSpec {
        self.spec
    }

    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        GroupElement {
            matrix: &self.matrix * &other.matrix,
            spec: self.spec,
        }
    }

    pub fn act_vector(&self, w: &[f64]) -> Vec<f64> {
        mat_vec(&self.matrix, w)
    }
}

pub fn mat_vec(m: &DMatrix<f64>, w: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|k| m[(i, k)] * w[k]).sum())
        .collect()
}

/// Cap on the boost rapidity drawn for Lorentz samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplerConfig {
    pub max_rapidity: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { max_rapidity: 1.0 }
    }
}

pub fn sample(spec: GroupSpec, seed: u64) -> GroupElement {
    sample_with(spec, seed, &SamplerConfig::default())
}

pub fn sample_with(spec: GroupSpec, seed: u64, config: &SamplerConfig) -> GroupElement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = spec.d;
    let matrix = match spec.family {
        Family::O => haar_orthogonal(d, &mut rng),
        Family::SO => haar_rotation(d, &mut rng),
        Family::Lorentz => {
            let spatial = haar_rotation(d - 1, &mut rng);
            let mut rotation = DMatrix::identity(d, d);
            rotation.view_mut((1, 1), (d - 1, d - 1)).copy_from(&spatial);
            let phi = if config.max_rapidity > 0.0 {
                rng.random_range(-config.max_rapidity..=config.max_rapidity)
            } else {
                0.0
            };
            let mut boost = DMatrix::identity(d, d);
            boost[(0, 0)] = phi.cosh();
            boost[(1, 1)] = phi.cosh();
            boost[(0, 1)] = phi.sinh();
            boost[(1, 0)] = phi.sinh();
            rotation * boost
        }
        Family::Sp => {
            let mut s = DMatrix::zeros(d, d);
            for i in 0..d {
                for j in i..d {
                    let x: f64 = rng.random_range(-0.5..=0.5);
                    s[(i, j)] = x;
                    s[(j, i)] = x;
                }
            }
            expm(&(symplectic_form(d) * s))
        }
    };
    GroupElement { matrix, spec }
}

fn gaussian_matrix(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |_, _| rng.sample(StandardNormal))
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal pushed into `Q`.
fn haar_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let qr = gaussian_matrix(d, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn haar_rotation(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut q = haar_orthogonal(d, rng);
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q
}

const EXPM_TERMS: usize = 12;
const EXPM_SQUARINGS: u32 = 4;

/// Matrix exponential by a 12-term Taylor series on `A / 2^4`, squared back
/// four times.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let scaled = a / f64::from(1u32 << EXPM_SQUARINGS);
    let mut term = DMatrix::identity(n, n);
    let mut sum = DMatrix::identity(n, n);
    for k in 1..=EXPM_TERMS {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..EXPM_SQUARINGS {
        sum = &sum * &sum;
    }
    sum
}

/// The matrix of the contragredient action on `W*` in dual coordinates,
/// `(g⁻¹)ᵀ`.
pub fn contragredient(g: &GroupElement) -> Result<DMatrix<f64>, GroupError> {
    g.matrix
        .clone()
        .try_inverse()
        .map(|inv| inv.transpose())
        .ok_or(GroupError::Singular)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MembershipReport {
    pub max_violation: f64,
    pub pass: bool,
}

pub fn verify_membership(g: &GroupElement, tol: f64) -> MembershipReport {
    let d = g.spec.d;
    let m = &g.matrix;
    let form = match g.spec.family {
        Family::O | Family::SO => DMatrix::identity(d, d),
        Family::Lorentz => minkowski_metric(d),
        Family::Sp => symplectic_form(d),
    };
    let mut violation = (m.transpose() * &form * m - &form).amax();
    if g.spec.family == Family::SO {
        violation = violation.max((m.determinant() - 1.0).abs());
    }
    MembershipReport {
        max_violation: violation,
        pass: violation <= tol,
    }
}

/// The tuple `(v_1, ..., v_n)` of input vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputTuple {
    pub vectors: Vec<Vec<f64>>,
}

impl InputTuple {
    pub fn new(vectors: Vec<Vec<f64>>) -> Self {
        Self { vectors }
    }

    pub fn check_shape(&self, spec: &GroupSpec) -> Result<(), GroupError> {
        let ok = self.vectors.len() == spec.n && self.vectors.iter().all(|v| v.len() == spec.d);
        if ok {
            Ok(())
        } else {
            Err(GroupError::DimensionMismatch {
                expected: format!("{} vectors of length {}", spec.n, spec.d),
                found: format!(
                    "{} vectors of lengths {:?}",
                    self.vectors.len(),
                    self.vectors.iter().map(Vec::len).collect::<Vec<_>>()
                ),
            })
        }
    }

    /// Standard normal coordinates.
    pub fn random<R: Rng>(spec: &GroupSpec, rng: &mut R) -> Self {
        Self {
            vectors: (0..spec.n).map(|_| random_vector(spec.d, rng)).collect(),
        }
    }
}

pub fn random_vector<R: Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

/// Diagonal action `(v_j) ↦ (g v_j)` on a tuple of any length.
pub fn act_input(g: &GroupElement, x: &InputTuple) -> Result<InputTuple, GroupError> {
    x.check_shape(&GroupSpec { n: x.vectors.len(), ..g.spec })?;
    Ok(InputTuple {
        vectors: x.vectors.iter().map(|v| g.act_vector(v)).collect(),
    })
}
