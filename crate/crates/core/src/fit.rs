//! Equivariant regression on invariant features.
//!
//! A model predicts `Σ_j p̂_j(f_1(X), ..., f_r(X))·F_j(X)`, where the `F_j`
//! are the equivariant basis maps and each `p̂_j` is a polynomial of degree
//! at most `D` in the standardized invariant features. Fitting is ridge
//! regression on the design whose columns are `(feature monomial) × F_j`.
//! Every model in this class is equivariant by construction.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{generators, CatalogError};
use crate::engine::{derive, CompiledParametrization, EngineError, Parametrization};
use crate::group::{act_input, sample, Family, GroupError, GroupSpec, InputTuple};
use crate::metrics::euclidean_norm;
use crate::seed::{derive_seed, rng_for};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("task {task} is not available for {spec}: {reason}")]
    IncompatibleTask { task: Task, spec: String, reason: String },
    #[error("design matrix is rank deficient with lambda = 0; use a positive ridge lambda")]
    RankDeficient,
    #[error("normal equations are not positive definite; increase the ridge lambda")]
    NotPositiveDefinite,
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

impl FitError {
    pub fn name(&self) -> &'static str {
        match self {
            FitError::EmptyDataset => "EmptyDataset",
            FitError::IncompatibleTask { .. } => "IncompatibleTask",
            FitError::RankDeficient => "RankDeficient",
            FitError::NotPositiveDefinite => "NotPositiveDefinite",
            FitError::Invalid(_) => "InvalidFitInput",
            FitError::Engine(e) => e.name(),
            FitError::Catalog(e) => e.name(),
        }
    }
}

impl From<GroupError> for FitError {
    fn from(e: GroupError) -> Self {
        FitError::Engine(EngineError::Shape(e))
    }
}

/// Synthetic ground truths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    /// `y = (v₁ᵀv₁) v₂ + 2 (v₁ᵀv₂) v₁`
    WeightedGram,
    /// `y = v₁ × v₂ + 0.5 (v₁ᵀv₂) v₁`
    CrossTarget,
    /// `y = Σ_j (v_jᵀηv_j) v_j`
    LorentzSum,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::WeightedGram => "weighted-gram",
            Task::CrossTarget => "cross-target",
            Task::LorentzSum => "lorentz-sum",
        })
    }
}

impl FromStr for Task {
    type Err = FitError;

    fn from_str(s: &str) -> Result<Self, FitError> {
        match s {
            "weighted-gram" => Ok(Task::WeightedGram),
            "cross-target" => Ok(Task::CrossTarget),
            "lorentz-sum" => Ok(Task::LorentzSum),
            other => Err(FitError::Invalid(format!("unknown task {other:?}"))),
        }
    }
}

impl Task {
    pub fn check(&self, spec: &GroupSpec) -> Result<(), FitError> {
        let reason = match self {
            Task::WeightedGram if !spec.family.is_compact() => Some("needs O(d) or SO(d)"),
            Task::WeightedGram if spec.n < 2 => Some("needs n >= 2"),
            Task::CrossTarget if spec.family != Family::SO || spec.d != 3 => Some("needs SO(3)"),
            Task::CrossTarget if spec.n < 2 => Some("needs n >= 2"),
            Task::LorentzSum if spec.family != Family::Lorentz => Some("needs the Lorentz group"),
            _ => None,
        };
        match reason {
            None => Ok(()),
            Some(r) => Err(FitError::IncompatibleTask {
                task: *self,
                spec: spec.to_string(),
                reason: r.into(),
            }),
        }
    }

    /// Noise-free target for one input.
    pub fn ground_truth(&self, x: &InputTuple) -> Vec<f64> {
        let v = &x.vectors;
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
        match self {
            Task::WeightedGram => {
                let (a, b) = (dot(&v[0], &v[0]), dot(&v[0], &v[1]));
                (0..v[0].len()).map(|i| a * v[1][i] + 2.0 * b * v[0][i]).collect()
            }
            Task::CrossTarget => {
                let (p, q) = (&v[0], &v[1]);
                let cross = [
                    p[1] * q[2] - p[2] * q[1],
                    p[2] * q[0] - p[0] * q[2],
                    p[0] * q[1] - p[1] * q[0],
                ];
                let b = dot(p, q);
                (0..3).map(|i| cross[i] + 0.5 * b * p[i]).collect()
            }
            Task::LorentzSum => {
                let d = v[0].len();
                let mut y = vec![0.0; d];
                for vj in v {
                    let m = -vj[0] * vj[0] + vj[1..].iter().map(|t| t * t).sum::<f64>();
                    for i in 0..d {
                        y[i] += m * vj[i];
                    }
                }
                y
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    #[serde(rename = "X")]
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl Sample {
    pub fn input(&self) -> InputTuple {
        InputTuple::new(self.x.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub task: Option<Task>,
    pub seed: u64,
    pub noise: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDataset")]
pub struct Dataset {
    pub spec: GroupSpec,
    pub samples: Vec<Sample>,
    pub metadata: Metadata,
}

#[derive(Deserialize)]
struct RawDataset {
    spec: GroupSpec,
    samples: Vec<Sample>,
    metadata: Metadata,
}

impl TryFrom<RawDataset> for Dataset {
    type Error = FitError;

    fn try_from(r: RawDataset) -> Result<Self, FitError> {
        Dataset::new(r.spec, r.samples, r.metadata)
    }
}

impl Dataset {
    pub fn new(spec: GroupSpec, samples: Vec<Sample>, metadata: Metadata) -> Result<Self, FitError> {
        for (k, s) in samples.iter().enumerate() {
            s.input().check_shape(&spec)?;
            if s.y.len() != spec.d {
                return Err(FitError::Invalid(format!("sample {k}: target has length {}", s.y.len())));
            }
            if !s.x.iter().flatten().chain(&s.y).all(|t| t.is_finite()) {
                return Err(FitError::Invalid(format!("sample {k} has non-finite values")));
            }
        }
        Ok(Self {
            spec,
            samples,
            metadata,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Inputs i.i.d. standard normal per coordinate; Gaussian noise of scale
/// `noise` added to the targets only.
pub fn make_task(task: Task, spec: GroupSpec, count: usize, seed: u64, noise: f64) -> Result<Dataset, FitError> {
    task.check(&spec)?;
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(FitError::Invalid(format!("noise must be a finite non-negative number, got {noise}")));
    }
    let mut inputs = rng_for(seed, "task/input", 0);
    let mut noise_rng = rng_for(seed, "task/noise", 0);
    let samples = (0..count)
        .map(|_| {
            let x = InputTuple::random(&spec, &mut inputs);
            let mut y = task.ground_truth(&x);
            if noise > 0.0 {
                for t in &mut y {
                    *t += noise * noise_rng.sample::<f64, _>(StandardNormal);
                }
            }
            Sample { x: x.vectors, y }
        })
        .collect();
    Dataset::new(
        spec,
        samples,
        Metadata {
            task: Some(task),
            seed,
            noise,
        },
    )
}

/// Exponent vectors over `r` features with total degree at most `degree`,
/// ordered by degree and then reverse-lexicographically.
pub fn feature_monomials(r: usize, degree: u32) -> Vec<Vec<u32>> {
    fn rec(k: usize, r: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if k == r {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for e in (0..=left).rev() {
            cur.push(e);
            rec(k + 1, r, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for total in 0..=degree {
        rec(0, r, total, &mut Vec::new(), &mut out);
    }
    out
}

fn monomial_value(exps: &[u32], z: &[f64]) -> f64 {
    exps.iter().zip(z).fold(1.0, |acc, (&e, &x)| acc * x.powi(e as i32))
}

/// A fitted equivariant predictor.
///
/// `coefficients[j][m]` multiplies `monomials[m]` evaluated at the
/// standardized features `(f - feature_mean) / feature_scale`.
#[derive(Clone, Debug)]
pub struct EquiModel {
    pub param: Parametrization,
    pub degree: u32,
    pub ridge_lambda: f64,
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    pub monomials: Vec<Vec<u32>>,
    pub coefficients: Vec<Vec<f64>>,
    compiled: CompiledParametrization,
}

impl PartialEq for EquiModel {
    fn eq(&self, other: &Self) -> bool {
        self.param == other.param
            && self.degree == other.degree
            && self.ridge_lambda == other.ridge_lambda
            && self.feature_mean == other.feature_mean
            && self.feature_scale == other.feature_scale
            && self.monomials == other.monomials
            && self.coefficients == other.coefficients
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelJson {
    spec: GroupSpec,
    feature_labels: Vec<String>,
    basis_labels: Vec<String>,
    degree: u32,
    ridge_lambda: f64,
    feature_mean: Vec<f64>,
    feature_scale: Vec<f64>,
    monomials: Vec<Vec<u32>>,
    coefficients: Vec<Vec<f64>>,
}

impl Serialize for EquiModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ModelJson {
            spec: self.param.spec,
            feature_labels: self.param.features.iter().map(|f| f.label.to_string()).collect(),
            basis_labels: self.param.basis.iter().map(|b| b.source_label.to_string()).collect(),
            degree: self.degree,
            ridge_lambda: self.ridge_lambda,
            feature_mean: self.feature_mean.clone(),
            feature_scale: self.feature_scale.clone(),
            monomials: self.monomials.clone(),
            coefficients: self.coefficients.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for EquiModel {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let j = ModelJson::deserialize(de)?;
        let param = parametrization_for(j.spec).map_err(D::Error::custom)?;
        let features: Vec<String> = param.features.iter().map(|f| f.label.to_string()).collect();
        let basis: Vec<String> = param.basis.iter().map(|b| b.source_label.to_string()).collect();
        if features != j.feature_labels || basis != j.basis_labels {
            return Err(D::Error::custom("model labels do not match the parametrization for its spec"));
        }
        let r = features.len();
        let shapes_ok = j.feature_mean.len() == r
            && j.feature_scale.len() == r
            && j.monomials.iter().all(|m| m.len() == r)
            && j.coefficients.len() == basis.len()
            && j.coefficients.iter().all(|c| c.len() == j.monomials.len());
        if !shapes_ok {
            return Err(D::Error::custom("model arrays have inconsistent shapes"));
        }
        Ok(EquiModel::from_parts(
            param,
            j.degree,
            j.ridge_lambda,
            j.feature_mean,
            j.feature_scale,
            j.monomials,
            j.coefficients,
        ))
    }
}

pub fn parametrization_for(spec: GroupSpec) -> Result<Parametrization, FitError> {
    Ok(derive(&generators(spec)?)?)
}

impl EquiModel {
    pub fn from_parts(
        param: Parametrization,
        degree: u32,
        ridge_lambda: f64,
        feature_mean: Vec<f64>,
        feature_scale: Vec<f64>,
        monomials: Vec<Vec<u32>>,
        coefficients: Vec<Vec<f64>>,
    ) -> Self {
        let compiled = param.compile();
        Self {
            param,
            degree,
            ridge_lambda,
            feature_mean,
            feature_scale,
            monomials,
            coefficients,
            compiled,
        }
    }

    /// A model predicting zero everywhere, with unit feature scaling.
    pub fn zero(param: Parametrization, degree: u32) -> Self {
        let r = param.features.len();
        let monomials = feature_monomials(r, degree);
        let coefficients = vec![vec![0.0; monomials.len()]; param.basis.len()];
        Self::from_parts(param, degree, 0.0, vec![0.0; r], vec![1.0; r], monomials, coefficients)
    }

    fn standardized(&self, features: &[f64]) -> Vec<f64> {
        features
            .iter()
            .zip(&self.feature_mean)
            .zip(&self.feature_scale)
            .map(|((f, m), s)| (f - m) / s)
            .collect()
    }

    /// Coefficients re-expressed over monomials in the raw (unstandardized)
    /// features, aligned with `monomials`.
    pub fn raw_coefficients(&self) -> Vec<Vec<f64>> {
        let index: BTreeMap<&[u32], usize> = self
            .monomials
            .iter()
            .enumerate()
            .map(|(k, m)| (m.as_slice(), k))
            .collect();
        self.coefficients
            .iter()
            .map(|coeffs| {
                let mut out = vec![0.0; self.monomials.len()];
                for (mono, &w) in self.monomials.iter().zip(coeffs) {
                    // expand Π ((x_k - μ_k) / σ_k)^{e_k}
                    let mut terms: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
                    terms.insert(vec![0; mono.len()], w);
                    for (k, &e) in mono.iter().enumerate() {
                        let (mu, sigma) = (self.feature_mean[k], self.feature_scale[k]);
                        for _ in 0..e {
                            let mut next = BTreeMap::new();
                            for (exps, c) in terms {
                                let mut up = exps.clone();
                                up[k] += 1;
                                *next.entry(up).or_insert(0.0) += c / sigma;
                                *next.entry(exps).or_insert(0.0) -= c * mu / sigma;
                            }
                            terms = next;
                        }
                    }
                    for (exps, c) in terms {
                        out[index[exps.as_slice()]] += c;
                    }
                }
                out
            })
            .collect()
    }
}

/// Per-sample design block: `d` rows, one column per (basis map, monomial).
fn design_rows(
    compiled: &CompiledParametrization,
    monomials: &[Vec<u32>],
    z: &[f64],
    basis: &[Vec<f64>],
    d: usize,
) -> Vec<Vec<f64>> {
    let mono: Vec<f64> = monomials.iter().map(|m| monomial_value(m, z)).collect();
    (0..d)
        .map(|c| {
            let mut row = Vec::with_capacity(compiled.basis_count() * mono.len());
            for b in basis {
                for mv in &mono {
                    row.push(mv * b[c]);
                }
            }
            row
        })
        .collect()
}

pub fn fit(data: &Dataset, degree: u32, ridge_lambda: f64) -> Result<EquiModel, FitError> {
    if data.is_empty() {
        return Err(FitError::EmptyDataset);
    }
    if !(ridge_lambda >= 0.0 && ridge_lambda.is_finite()) {
        return Err(FitError::Invalid(format!("ridge lambda must be finite and >= 0, got {ridge_lambda}")));
    }
    let spec = data.spec;
    let d = spec.d;
    let param = parametrization_for(spec)?;
    let compiled = param.compile();
    let r = compiled.feature_count();

    let inputs: Vec<InputTuple> = data.samples.iter().map(Sample::input).collect();
    let features: Vec<Vec<f64>> = inputs
        .iter()
        .map(|x| compiled.eval_features(x))
        .collect::<Result<_, _>>()?;
    let count = features.len() as f64;
    let mean: Vec<f64> = (0..r)
        .map(|k| features.iter().map(|f| f[k]).sum::<f64>() / count)
        .collect();
    let scale: Vec<f64> = (0..r)
        .map(|k| {
            let var = features.iter().map(|f| (f[k] - mean[k]).powi(2)).sum::<f64>() / count;
            let sd = var.sqrt();
            if sd > 1e-12 {
                sd
            } else {
                1.0
            }
        })
        .collect();

    let mut model = EquiModel::from_parts(
        param,
        degree,
        ridge_lambda,
        mean,
        scale,
        feature_monomials(r, degree),
        Vec::new(),
    );
    let ncols = compiled.basis_count() * model.monomials.len();
    let nrows = data.len() * d;
    let mut a = DMatrix::<f64>::zeros(nrows, ncols);
    let mut y = DVector::<f64>::zeros(nrows);
    for (s, (x, f)) in inputs.iter().zip(&features).enumerate() {
        let z = model.standardized(f);
        let basis = compiled.eval_basis(x)?;
        for (c, row) in design_rows(&compiled, &model.monomials, &z, &basis, d).into_iter().enumerate() {
            for (k, v) in row.into_iter().enumerate() {
                a[(s * d + c, k)] = v;
            }
            y[s * d + c] = data.samples[s].y[c];
        }
    }

    let w = if ncols == 0 {
        DVector::zeros(0)
    } else if ridge_lambda > 0.0 {
        let mut normal = a.transpose() * &a;
        for k in 0..ncols {
            normal[(k, k)] += ridge_lambda;
        }
        let rhs = a.transpose() * &y;
        normal.cholesky().ok_or(FitError::NotPositiveDefinite)?.solve(&rhs)
    } else {
        least_squares_qr(a, &y)?
    };

    let m = model.monomials.len();
    model.coefficients = (0..compiled.basis_count())
        .map(|j| w.as_slice()[j * m..(j + 1) * m].to_vec())
        .collect();
    Ok(model)
}

fn least_squares_qr(a: DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>, FitError> {
    let (nrows, ncols) = a.shape();
    if nrows < ncols {
        return Err(FitError::RankDeficient);
    }
    let qr = a.qr();
    let r = qr.r();
    let max_diag = (0..ncols).map(|k| r[(k, k)].abs()).fold(0.0, f64::max);
    let cutoff = max_diag * (nrows.max(ncols) as f64) * f64::EPSILON;
    if max_diag == 0.0 || (0..ncols).any(|k| r[(k, k)].abs() <= cutoff) {
        return Err(FitError::RankDeficient);
    }
    let qty = qr.q().transpose() * y;
    r.solve_upper_triangular(&qty).ok_or(FitError::RankDeficient)
}

pub fn predict(model: &EquiModel, x: &InputTuple) -> Result<Vec<f64>, FitError> {
    let compiled = &model.compiled;
    let z = model.standardized(&compiled.eval_features(x)?);
    let basis = compiled.eval_basis(x)?;
    let mono: Vec<f64> = model.monomials.iter().map(|m| monomial_value(m, &z)).collect();
    let mut out = vec![0.0; model.param.spec.d];
    for (coeffs, b) in model.coefficients.iter().zip(&basis) {
        let p: f64 = coeffs.iter().zip(&mono).map(|(w, m)| w * m).sum();
        for (o, bi) in out.iter_mut().zip(b) {
            *o += p * bi;
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub group_samples: usize,
    pub points: usize,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            group_samples: 50,
            points: 20,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub max_err: f64,
    pub equivariance_violation: f64,
}

pub fn evaluate(model: &EquiModel, data: &Dataset, opts: &EvalOptions) -> Result<Metrics, FitError> {
    if data.is_empty() {
        return Err(FitError::EmptyDataset);
    }
    if data.spec != model.param.spec {
        return Err(FitError::Invalid(format!(
            "dataset is for {}, model for {}",
            data.spec, model.param.spec
        )));
    }
    let preds: Vec<Vec<f64>> = data
        .samples
        .par_iter()
        .map(|s| predict(model, &s.input()))
        .collect::<Result<_, _>>()?;
    let mut sq = 0.0;
    let mut max_err = 0.0f64;
    for (p, s) in preds.iter().zip(&data.samples) {
        for (a, b) in p.iter().zip(&s.y) {
            sq += (a - b).powi(2);
            max_err = max_err.max((a - b).abs());
        }
    }
    let mse = sq / (data.len() * data.spec.d) as f64;

    let elements: Vec<_> = (0..opts.group_samples as u64)
        .map(|t| sample(data.spec, derive_seed(opts.seed, "evaluate/group", t)))
        .collect();
    let points = data.len().min(opts.points);
    let equivariance_violation = (0..points)
        .into_par_iter()
        .map(|k| {
            let x = data.samples[k].input();
            let base = &preds[k];
            let scale = 1.0 + euclidean_norm(base);
            elements.iter().try_fold(0.0f64, |worst, g| {
                let moved = predict(model, &act_input(g, &x)?)?;
                let expected = g.act_vector(base);
                let diff: Vec<f64> = moved.iter().zip(&expected).map(|(a, b)| a - b).collect();
                Ok::<_, FitError>(worst.max(euclidean_norm(&diff) / scale))
            })
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(Metrics {
        mse,
        max_err,
        equivariance_violation,
    })
}

/// Mean squared error over all target components.
pub fn mse(model: &EquiModel, data: &Dataset) -> Result<f64, FitError> {
    evaluate(
        model,
        data,
        &EvalOptions {
            group_samples: 0,
            points: 0,
            seed: 0,
        },
    )
    .map(|m| m.mse)
}
