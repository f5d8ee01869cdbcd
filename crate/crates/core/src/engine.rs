//! Malgrange's construction: from invariant generators on `V × W*` to a
//! parametrization of equivariant maps `V → W`.
//!
//! Every equivariant polynomial map can be written as
//! `f = Σ_j p_j(f_1, ..., f_r) F_j`, where the `f_k` are the generators of
//! degree 0 in ℓ and each `F_j` is the ℓ-gradient of a generator of degree 1.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{CheckReport, Generator, GeneratorSet, ItemReport, Label};
use crate::group::{act_input, sample, GroupElement, GroupError, GroupSpec, InputTuple};
use crate::metrics::{scaled_error, scaled_vector_error};
use crate::poly::{dense_point, Bidegree, CompiledPoly, PolyError, Polynomial};
use crate::seed::{derive_seed, rng_for};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("catalog corruption in {label}: {detail}")]
    CatalogCorruption { label: String, detail: String },
    #[error(transparent)]
    Shape(#[from] GroupError),
    #[error("invalid parametrization: {0}")]
    Invalid(String),
}

impl EngineError {
    pub fn name(&self) -> &'static str {
        match self {
            EngineError::CatalogCorruption { .. } => "CatalogCorruption",
            EngineError::Shape(e) => e.name(),
            EngineError::Invalid(_) => "InvalidParametrization",
        }
    }
}

impl From<PolyError> for EngineError {
    fn from(e: PolyError) -> Self {
        EngineError::Invalid(e.to_string())
    }
}

/// One `F_j`: `d` polynomials in the V-block only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivariantBasisMap {
    pub source_label: Label,
    pub components: Vec<Polynomial>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParametrization")]
pub struct Parametrization {
    pub spec: GroupSpec,
    pub features: Vec<Generator>,
    pub basis: Vec<EquivariantBasisMap>,
}

#[derive(Deserialize)]
struct RawParametrization {
    spec: GroupSpec,
    features: Vec<Generator>,
    basis: Vec<EquivariantBasisMap>,
}

impl TryFrom<RawParametrization> for Parametrization {
    type Error = EngineError;

    fn try_from(r: RawParametrization) -> Result<Self, EngineError> {
        let p = Parametrization {
            spec: r.spec,
            features: r.features,
            basis: r.basis,
        };
        p.validate()?;
        Ok(p)
    }
}

impl Parametrization {
    /// Structural checks: universes match the spec, features are ℓ-free and
    /// bihomogeneous, basis maps have `d` ℓ-free components.
    pub fn validate(&self) -> Result<(), EngineError> {
        let u = self.spec.universe();
        for f in &self.features {
            if f.poly.universe() != u {
                return Err(EngineError::Invalid(format!("feature {} has universe {}", f.label, f.poly.universe())));
            }
            if f.poly.bidegree() != f.bidegree || f.bidegree.ell_degree() != Some(0) {
                return Err(EngineError::Invalid(format!(
                    "feature {} must be bihomogeneous of ℓ-degree 0",
                    f.label
                )));
            }
        }
        for b in &self.basis {
            if b.components.len() != self.spec.d {
                return Err(EngineError::Invalid(format!(
                    "basis map {} has {} components, expected {}",
                    b.source_label,
                    b.components.len(),
                    self.spec.d
                )));
            }
            if b.components.iter().any(|c| c.universe() != u || c.mentions_ell()) {
                return Err(EngineError::Invalid(format!(
                    "basis map {} must be ℓ-free over {u}",
                    b.source_label
                )));
            }
        }
        Ok(())
    }

    pub fn compile(&self) -> CompiledParametrization {
        CompiledParametrization {
            spec: self.spec,
            features: self.features.iter().map(|f| f.poly.compile()).collect(),
            basis: self
                .basis
                .iter()
                .map(|b| b.components.iter().map(Polynomial::compile).collect())
                .collect(),
        }
    }
}

fn check_deg1(g: &Generator) -> Result<(), EngineError> {
    if g.bidegree.ell_degree() != Some(1) || g.poly.bidegree() != g.bidegree {
        return Err(EngineError::CatalogCorruption {
            label: g.label.to_string(),
            detail: format!("expected ℓ-degree 1, found bidegree {}", g.poly.bidegree()),
        });
    }
    Ok(())
}

fn assemble(
    genset: &GeneratorSet,
    gradient: impl Fn(&Generator) -> Result<Vec<Polynomial>, EngineError>,
) -> Result<Parametrization, EngineError> {
    for f in &genset.deg0 {
        if !matches!(f.bidegree, Bidegree::Homogeneous { l: 0, .. }) {
            return Err(EngineError::CatalogCorruption {
                label: f.label.to_string(),
                detail: format!("listed with degree 0 in ℓ but has bidegree {}", f.bidegree),
            });
        }
    }
    let basis = genset
        .deg1
        .iter()
        .map(|g| {
            let components = gradient(g)?;
            if components.iter().any(Polynomial::mentions_ell) {
                return Err(EngineError::CatalogCorruption {
                    label: g.label.to_string(),
                    detail: "ℓ-gradient still depends on ℓ".into(),
                });
            }
            Ok(EquivariantBasisMap {
                source_label: g.label.clone(),
                components,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Parametrization {
        spec: genset.spec,
        features: genset.deg0.clone(),
        basis,
    })
}

/// Step 3 by differentiation: `F_j = Σ_i (∂f_j/∂l[i]) e_i`.
pub fn derive(genset: &GeneratorSet) -> Result<Parametrization, EngineError> {
    assemble(genset, |g| {
        check_deg1(g)?;
        Ok(g.poly.d_ell())
    })
}

/// Step 3 by reading off the coefficient of each `l[i]`, which agrees with
/// [`derive`] because the generators are linear in ℓ.
pub fn derive_by_coefficients(genset: &GeneratorSet) -> Result<Parametrization, EngineError> {
    assemble(genset, |g| {
        check_deg1(g)?;
        g.poly
            .ell_coefficients()
            .map_err(|e| EngineError::CatalogCorruption {
                label: g.label.to_string(),
                detail: e.to_string(),
            })
    })
}

/// Float-evaluation form of a [`Parametrization`].
#[derive(Clone, Debug)]
pub struct CompiledParametrization {
    spec: GroupSpec,
    features: Vec<CompiledPoly>,
    basis: Vec<Vec<CompiledPoly>>,
}

impl CompiledParametrization {
    pub fn spec(&self) -> GroupSpec {
        self.spec
    }

    pub fn feature_count(&self) -> usize {
        self.features.len()
    }

    pub fn basis_count(&self) -> usize {
        self.basis.len()
    }

    fn point(&self, x: &InputTuple) -> Result<Vec<f64>, EngineError> {
        x.check_shape(&self.spec)?;
        Ok(dense_point(self.spec.universe(), &x.vectors, None))
    }

    pub fn eval_features(&self, x: &InputTuple) -> Result<Vec<f64>, EngineError> {
        let pt = self.point(x)?;
        Ok(self.features.iter().map(|f| f.eval(&pt)).collect())
    }

    pub fn eval_basis(&self, x: &InputTuple) -> Result<Vec<Vec<f64>>, EngineError> {
        let pt = self.point(x)?;
        Ok(self
            .basis
            .iter()
            .map(|b| b.iter().map(|c| c.eval(&pt)).collect())
            .collect())
    }
}

pub fn eval_features(param: &Parametrization, x: &InputTuple) -> Result<Vec<f64>, EngineError> {
    param.compile().eval_features(x)
}

pub fn eval_basis(param: &Parametrization, x: &InputTuple) -> Result<Vec<Vec<f64>>, EngineError> {
    param.compile().eval_basis(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub features: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
}

/// Evaluates many inputs, in parallel, returning results in input order.
pub fn eval_batch(param: &Parametrization, xs: &[InputTuple]) -> Result<Vec<Evaluation>, EngineError> {
    let compiled = param.compile();
    xs.par_iter()
        .map(|x| {
            Ok(Evaluation {
                features: compiled.eval_features(x)?,
                basis: compiled.eval_basis(x)?,
            })
        })
        .collect()
}

fn sampled_elements(spec: GroupSpec, trials: usize, seed: u64, purpose: &str) -> Vec<GroupElement> {
    (0..trials as u64)
        .map(|t| sample(spec, derive_seed(seed, purpose, t)))
        .collect()
}

/// Checks `F_j(gX) ≈ g·F_j(X)` for every basis map.
pub fn check_equivariance(param: &Parametrization, trials: usize, tol: f64, seed: u64) -> CheckReport {
    let elements = sampled_elements(param.spec, trials, seed, "equivariance/group");
    check_equivariance_under(param, &elements, tol, seed)
}

pub fn check_equivariance_under(
    param: &Parametrization,
    elements: &[GroupElement],
    tol: f64,
    seed: u64,
) -> CheckReport {
    let compiled = param.compile();
    let mut worst = vec![0.0f64; compiled.basis_count()];
    for (t, g) in elements.iter().enumerate() {
        let mut rng = rng_for(seed, "equivariance/input", t as u64);
        let x = InputTuple::random(&param.spec, &mut rng);
        let gx = act_input(g, &x).expect("sampled input has the spec's shape");
        let before = compiled.eval_basis(&x).expect("shape checked");
        let after = compiled.eval_basis(&gx).expect("shape checked");
        for (k, (b, a)) in before.iter().zip(&after).enumerate() {
            let err = scaled_vector_error(a, &g.act_vector(b));
            worst[k] = if err.is_nan() { f64::INFINITY } else { worst[k].max(err) };
        }
    }
    let items = param
        .basis
        .iter()
        .zip(worst)
        .map(|(b, e)| ItemReport {
            label: format!("F[{}]", b.source_label),
            max_error: e,
            pass: e <= tol,
        })
        .collect();
    CheckReport::from_items(elements.len(), tol, items)
}

/// Checks `f_k(gX) ≈ f_k(X)` for every feature.
pub fn check_feature_invariance(param: &Parametrization, trials: usize, tol: f64, seed: u64) -> CheckReport {
    let compiled = param.compile();
    let elements = sampled_elements(param.spec, trials, seed, "features/group");
    let mut worst = vec![0.0f64; compiled.feature_count()];
    for (t, g) in elements.iter().enumerate() {
        let mut rng = rng_for(seed, "features/input", t as u64);
        let x = InputTuple::random(&param.spec, &mut rng);
        let gx = act_input(g, &x).expect("sampled input has the spec's shape");
        let before = compiled.eval_features(&x).expect("shape checked");
        let after = compiled.eval_features(&gx).expect("shape checked");
        for (k, (b, a)) in before.iter().zip(&after).enumerate() {
            let err = scaled_error(*a, *b);
            worst[k] = if err.is_nan() { f64::INFINITY } else { worst[k].max(err) };
        }
    }
    let items = param
        .features
        .iter()
        .zip(worst)
        .map(|(f, e)| ItemReport {
            label: f.label.to_string(),
            max_error: e,
            pass: e <= tol,
        })
        .collect();
    CheckReport::from_items(trials, tol, items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::generators;
    use crate::group::Family;
    use crate::poly::{Var, VarUniverse};

    fn param(family: Family, d: usize, n: usize) -> Parametrization {
        derive(&generators(GroupSpec::new(family, d, n).unwrap()).unwrap()).unwrap()
    }

    fn var(u: VarUniverse, v: Var) -> Polynomial {
        Polynomial::var(u, v).unwrap()
    }

    fn x(vs: &[&[f64]]) -> InputTuple {
        InputTuple::new(vs.iter().map(|v| v.to_vec()).collect())
    }

    #[test]
    fn orthogonal_basis_is_projection() {
        for n in 1..=4 {
            let p = param(Family::O, 3, n);
            let u = p.spec.universe();
            assert_eq!(p.basis.len(), n);
            for (j, b) in p.basis.iter().enumerate() {
                for (i, c) in b.components.iter().enumerate() {
                    assert_eq!(c, &var(u, Var::v(j + 1, i + 1)));
                }
            }
        }
    }

    #[test]
    fn rotation_basis_contains_cross_product() {
        let p = param(Family::SO, 3, 2);
        let u = p.spec.universe();
        let cross = p
            .basis
            .iter()
            .find(|b| b.source_label == Label::CrossDet(vec![1, 2]))
            .unwrap();
        let term = |a: (usize, usize), b: (usize, usize), c: (usize, usize), e: (usize, usize)| {
            &(&var(u, Var::v(a.0, a.1)) * &var(u, Var::v(b.0, b.1)))
                - &(&var(u, Var::v(c.0, c.1)) * &var(u, Var::v(e.0, e.1)))
        };
        assert_eq!(cross.components[0], term((1, 2), (2, 3), (1, 3), (2, 2)));
        assert_eq!(cross.components[1], term((1, 3), (2, 1), (1, 1), (2, 3)));
        assert_eq!(cross.components[2], term((1, 1), (2, 2), (1, 2), (2, 1)));
    }

    #[test]
    fn symplectic_single_vector_is_projection() {
        let p = param(Family::Sp, 2, 1);
        let u = p.spec.universe();
        assert!(p.features.is_empty());
        assert_eq!(p.basis[0].components, vec![var(u, Var::v(1, 1)), var(u, Var::v(1, 2))]);
    }

    #[test]
    fn both_derivations_agree() {
        let gs = generators(GroupSpec::new(Family::SO, 3, 3).unwrap()).unwrap();
        assert_eq!(derive(&gs).unwrap(), derive_by_coefficients(&gs).unwrap());
    }

    #[test]
    fn corrupted_catalog_is_rejected() {
        let mut gs = generators(GroupSpec::new(Family::O, 2, 1).unwrap()).unwrap();
        let bad = gs.discarded[0].clone();
        gs.deg1.push(bad);
        assert!(matches!(derive(&gs), Err(EngineError::CatalogCorruption { .. })));
        assert!(matches!(derive_by_coefficients(&gs), Err(EngineError::CatalogCorruption { .. })));
    }

    #[test]
    fn feature_values() {
        let p = param(Family::O, 2, 1);
        assert_eq!(eval_features(&p, &x(&[&[3.0, 4.0]])).unwrap(), vec![25.0]);

        let p = param(Family::SO, 3, 3);
        let e = x(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        assert_eq!(
            eval_features(&p, &e).unwrap(),
            vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0]
        );

        let p = param(Family::Sp, 2, 2);
        let e = x(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(eval_features(&p, &e).unwrap(), vec![-1.0]);
    }

    #[test]
    fn basis_values() {
        let p = param(Family::O, 3, 2);
        let input = x(&[&[0.5, -1.0, 2.0], &[3.0, 0.25, -7.0]]);
        assert_eq!(eval_basis(&p, &input).unwrap(), input.vectors);

        let p = param(Family::SO, 3, 2);
        let e = x(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        assert_eq!(eval_basis(&p, &e).unwrap()[2], vec![0.0, 0.0, 1.0]);
        let par = x(&[&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]]);
        assert_eq!(eval_basis(&p, &par).unwrap()[2], vec![0.0, 0.0, 0.0]);

        assert!(eval_basis(&p, &x(&[&[1.0, 0.0, 0.0]])).is_err());
    }

    #[test]
    fn equivariance_and_invariance_hold() {
        for (family, d, n, tol) in [
            (Family::O, 3, 3, 1e-9),
            (Family::SO, 3, 3, 1e-9),
            (Family::Lorentz, 4, 2, 1e-7),
            (Family::Sp, 4, 3, 1e-7),
        ] {
            let p = param(family, d, n);
            assert!(check_equivariance(&p, 50, tol, 1).pass, "{family}");
            assert!(check_feature_invariance(&p, 50, tol, 1).pass, "{family}");
        }
    }

    #[test]
    fn batch_preserves_order() {
        let p = param(Family::SO, 3, 2);
        let mut rng = rng_for(0, "test", 0);
        let xs: Vec<_> = (0..32).map(|_| InputTuple::random(&p.spec, &mut rng)).collect();
        let batch = eval_batch(&p, &xs).unwrap();
        for (x, e) in xs.iter().zip(&batch) {
            assert_eq!(e.features, eval_features(&p, x).unwrap());
            assert_eq!(e.basis, eval_basis(&p, x).unwrap());
        }
    }

    #[test]
    fn json_round_trip_and_validation() {
        let p = param(Family::SO, 3, 2);
        let text = serde_json::to_string(&p).unwrap();
        let back: Parametrization = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);

        let mut bad = serde_json::to_value(&p).unwrap();
        bad["basis"][0]["components"] = serde_json::json!([]);
        assert!(serde_json::from_value::<Parametrization>(bad).is_err());
    }
}
