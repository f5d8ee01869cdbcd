//! Builders shared by the certifier tests and the acceptance suite.
#![allow(dead_code)]

use equivar::certifier::PolyMap;
use equivar::engine::Parametrization;
use equivar::group::{act_input, sample, GroupSpec, InputTuple};
use equivar::metrics::scaled_vector_error;
use equivar::poly::{ratio, Monomial, Polynomial, Var, XUniverse, XVar};
use equivar::seed::{derive_seed, rng_for};
use num_rational::BigRational;
use rand::Rng;

pub fn random_rational<R: Rng>(rng: &mut R) -> BigRational {
    loop {
        let p = rng.random_range(-5i64..=5);
        if p != 0 {
            return ratio(p, rng.random_range(1i64..=4));
        }
    }
}

/// A sparse polynomial of degree at most `degree` in `X_1..X_r`.
pub fn random_coefficient<R: Rng>(r: usize, degree: u32, terms: usize, rng: &mut R) -> Polynomial<XVar> {
    let xu = XUniverse { count: r };
    let picked = (0..terms).map(|_| {
        let deg = rng.random_range(0..=degree);
        let m = if r == 0 {
            Monomial::one()
        } else {
            Monomial::from_pairs((0..deg).map(|_| (XVar::new(rng.random_range(1..=r)), 1)))
        };
        (m, random_rational(rng))
    });
    Polynomial::from_terms(xu, picked.collect::<Vec<_>>()).unwrap()
}

/// `Σ_j q_j(f_1, ..., f_r)·F_j` as an explicit polynomial map.
pub fn assemble(param: &Parametrization, qs: &[Polynomial<XVar>]) -> PolyMap {
    let u = param.spec.universe();
    let mut components = vec![Polynomial::zero(u); param.spec.d];
    for (q, basis) in qs.iter().zip(&param.basis) {
        let q_of_features = q
            .substitute(u, |x| param.features.get(x.index() - 1).map(|f| f.poly.clone()))
            .unwrap();
        for (c, b) in components.iter_mut().zip(&basis.components) {
            *c = &*c + &(&q_of_features * b);
        }
    }
    PolyMap::new(u, components).unwrap()
}

pub fn random_equivariant_map(param: &Parametrization, seed: u64) -> PolyMap {
    let mut rng = rng_for(seed, "test/equivariant-map", 0);
    let r = param.features.len();
    let qs: Vec<_> = param
        .basis
        .iter()
        .map(|_| random_coefficient(r, 2, 3, &mut rng))
        .collect();
    assemble(param, &qs)
}

/// Largest `‖f(gX) − g·f(X)‖` relative error over sampled pairs.
pub fn equivariance_violation(f: &PolyMap, spec: GroupSpec, trials: usize, seed: u64) -> f64 {
    (0..trials as u64)
        .map(|t| {
            let g = sample(spec, derive_seed(seed, "test/violation/group", t));
            let x = InputTuple::random(&spec, &mut rng_for(seed, "test/violation/input", t));
            let moved = f.eval(&act_input(&g, &x).unwrap());
            scaled_vector_error(&moved, &g.act_vector(&f.eval(&x)))
        })
        .fold(0.0, f64::max)
}

fn v(u: equivar::poly::VarUniverse, j: usize, i: usize) -> Polynomial {
    Polynomial::var(u, Var::v(j, i)).unwrap()
}

fn map(spec: GroupSpec, components: Vec<Polynomial>) -> PolyMap {
    PolyMap::new(spec.universe(), components).unwrap()
}

/// Polynomial maps that fail to be equivariant for their group.
pub fn non_equivariant_maps() -> Vec<(&'static str, GroupSpec, PolyMap)> {
    use equivar::group::Family::*;
    let s = |f, d, n| GroupSpec::new(f, d, n).unwrap();
    let mut out = Vec::new();

    let o31 = s(O, 3, 1);
    let u = o31.universe();
    out.push(("componentwise square", o31, map(o31, (1..=3).map(|i| &v(u, 1, i) * &v(u, 1, i)).collect())));
    out.push(("componentwise cube", o31, map(o31, (1..=3).map(|i| v(u, 1, i).pow(3)).collect())));
    out.push((
        "first coordinate only",
        o31,
        map(o31, vec![v(u, 1, 1), Polynomial::zero(u), Polynomial::zero(u)]),
    ));
    out.push(("coordinate swap", o31, map(o31, vec![v(u, 1, 2), v(u, 1, 1), v(u, 1, 3)])));
    let norm = (1..=3).fold(Polynomial::zero(u), |acc, i| &acc + &(&v(u, 1, i) * &v(u, 1, i)));
    out.push((
        "norm times fixed axis",
        o31,
        map(o31, vec![norm, Polynomial::zero(u), Polynomial::zero(u)]),
    ));

    let o32 = s(O, 3, 2);
    let u = o32.universe();
    out.push(("componentwise product", o32, map(o32, (1..=3).map(|i| &v(u, 1, i) * &v(u, 2, i)).collect())));
    let cross = vec![
        &(&v(u, 1, 2) * &v(u, 2, 3)) - &(&v(u, 1, 3) * &v(u, 2, 2)),
        &(&v(u, 1, 3) * &v(u, 2, 1)) - &(&v(u, 1, 1) * &v(u, 2, 3)),
        &(&v(u, 1, 1) * &v(u, 2, 2)) - &(&v(u, 1, 2) * &v(u, 2, 1)),
    ];
    out.push(("cross product under reflections", o32, map(o32, cross)));

    let so3 = s(SO, 3, 1);
    let u = so3.universe();
    out.push(("first coordinate times v1", so3, map(so3, (1..=3).map(|i| &v(u, 1, 1) * &v(u, 1, i)).collect())));

    let lor = s(Lorentz, 3, 1);
    let u = lor.universe();
    let euclid = (1..=3).fold(Polynomial::zero(u), |acc, i| &acc + &(&v(u, 1, i) * &v(u, 1, i)));
    out.push((
        "euclidean norm under boosts",
        lor,
        map(lor, (1..=3).map(|i| &euclid * &v(u, 1, i)).collect()),
    ));

    let sp = s(Sp, 2, 1);
    let u = sp.universe();
    // J v with J = [[0, -1], [1, 0]]
    out.push(("form applied to v1", sp, map(sp, vec![-&v(u, 1, 2), v(u, 1, 1)])));
    out
}
