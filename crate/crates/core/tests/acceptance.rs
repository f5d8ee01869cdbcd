//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on
//! any failure.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use equivar::catalog::{check_invariance, generators, GeneratorSet, Label};
use equivar::certifier::{certify_identity, decompose_default, CertifyError};
use equivar::engine::{check_equivariance, derive, derive_by_coefficients, eval_basis};
use equivar::fit::{evaluate, fit, make_task, EvalOptions, Task};
use equivar::group::{Family, GroupSpec, InputTuple};
use equivar::metrics::scaled_vector_error;
use equivar::poly::{rat, Polynomial, Var};
use equivar::seed::rng_for;
use num_rational::BigRational;
use num_traits::Zero;

use common::{equivariance_violation, non_equivariant_maps, random_equivariant_map};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Every catalog spec with `d` in `dims` and `1 <= n <= 6`.
fn catalog_specs(dims: std::ops::RangeInclusive<usize>) -> Vec<GroupSpec> {
    let mut out = Vec::new();
    for family in [Family::O, Family::SO, Family::Lorentz, Family::Sp] {
        for d in dims.clone() {
            for n in 1..=6 {
                if let Ok(s) = GroupSpec::new(family, d, n) {
                    out.push(s);
                }
            }
        }
    }
    out
}

fn genset(spec: GroupSpec) -> Result<GeneratorSet, String> {
    generators(spec).map_err(|e| format!("{spec}: {e}"))
}

fn generator_counts() -> Outcome {
    let mut checked = 0;
    for d in 2..=4 {
        for n in 1..=6 {
            let tri = n * (n + 1) / 2;
            let mut expected = vec![(Family::O, tri, n), (Family::SO, tri + binomial(n, d), n + binomial(n, d - 1))];
            if d % 2 == 0 {
                expected.push((Family::Sp, n * (n - 1) / 2, n));
            }
            for (family, deg0, deg1) in expected {
                let spec = GroupSpec::new(family, d, n).map_err(|e| e.to_string())?;
                let g = genset(spec)?;
                ensure(g.deg0.len() == deg0, || format!("{spec}: {} degree-0, expected {deg0}", g.deg0.len()))?;
                ensure(g.deg1.len() == deg1, || format!("{spec}: {} degree-1, expected {deg1}", g.deg1.len()))?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} generator sets match"))
}

fn invariance_suite() -> Outcome {
    let mut worst: f64 = 0.0;
    let specs = catalog_specs(2..=4);
    for &spec in &specs {
        let report = check_invariance(&genset(spec)?, 200, spec.default_tolerance(), 2024);
        ensure(report.pass, || {
            let bad = report.items.iter().find(|i| !i.pass).unwrap();
            format!("{spec}: {} error {:.3e}", bad.label, bad.max_error)
        })?;
        worst = worst.max(report.max_error() / spec.default_tolerance());
    }
    Ok(format!("{} sets, 200 trials, worst error at {:.2e} of tolerance", specs.len(), worst))
}

fn equivariance_suite() -> Outcome {
    let specs = catalog_specs(2..=4);
    let mut maps = 0;
    for &spec in &specs {
        let param = derive(&genset(spec)?).map_err(|e| e.to_string())?;
        let report = check_equivariance(&param, 100, spec.default_tolerance(), 2024);
        ensure(report.pass, || format!("{spec}: max error {:.3e}", report.max_error()))?;
        maps += param.basis.len();
        if spec.family == Family::O {
            let u = spec.universe();
            for (j, b) in param.basis.iter().enumerate() {
                let projection: Vec<Polynomial> = (1..=spec.d).map(|i| Polynomial::var(u, Var::v(j + 1, i)).unwrap()).collect();
                ensure(b.components == projection, || format!("{spec}: basis map {j} is not the projection"))?;
            }
        }
    }
    Ok(format!("{maps} basis maps over {} sets; O(d) maps are projections", specs.len()))
}

fn cross(a: &[f64], b: &[f64]) -> Vec<f64> {
    vec![a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn cross_product_identity() -> Outcome {
    let spec = GroupSpec::new(Family::SO, 3, 2).unwrap();
    let param = derive(&genset(spec)?).map_err(|e| e.to_string())?;
    let k = param
        .basis
        .iter()
        .position(|b| b.source_label == Label::CrossDet(vec![1, 2]))
        .ok_or("no crossdet(1,2) basis map")?;
    let at_basis = |v: Var| -> Option<BigRational> {
        match v {
            Var::V { vector, coord } => Some(if vector == coord { rat(1) } else { BigRational::zero() }),
            Var::L { .. } => None,
        }
    };
    let exact: Vec<BigRational> = param.basis[k]
        .components
        .iter()
        .map(|c| c.eval_exact(at_basis))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    ensure(exact == vec![rat(0), rat(0), rat(1)], || format!("F(e1, e2) = {exact:?}"))?;

    let mut worst: f64 = 0.0;
    for t in 0..100 {
        let x = InputTuple::random(&spec, &mut rng_for(4, "acceptance/cross", t));
        let got = &eval_basis(&param, &x).map_err(|e| e.to_string())?[k];
        worst = worst.max(scaled_vector_error(got, &cross(&x.vectors[0], &x.vectors[1])));
    }
    ensure(worst <= 1e-12, || format!("max relative error {worst:.3e}"))?;
    Ok(format!("exact e3 at (e1, e2); 100 random pairs within {worst:.1e}"))
}

fn certifier_round_trip() -> Outcome {
    let specs: Vec<GroupSpec> = [Family::O, Family::SO]
        .into_iter()
        .flat_map(|f| (1..=3).map(move |n| GroupSpec::new(f, 3, n).unwrap()))
        .collect();
    let start = Instant::now();
    for k in 0..20u64 {
        let spec = specs[k as usize % specs.len()];
        let g = genset(spec)?;
        let param = derive(&g).map_err(|e| e.to_string())?;
        let f = random_equivariant_map(&param, 1000 + k);
        let dec = decompose_default(&f, &g).map_err(|e| format!("map {k} over {spec}: {e}"))?;
        let report = certify_identity(&f, &dec).map_err(|e| e.to_string())?;
        ensure(report.pass && report.residual.is_zero(), || format!("map {k}: nonzero residual"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed <= Duration::from_secs(30), || format!("took {elapsed:.1?}"))?;
    Ok(format!("20 maps certified with zero residual in {elapsed:.2?}"))
}

fn negative_controls() -> Outcome {
    let maps = non_equivariant_maps();
    for (name, spec, f) in &maps {
        let violation = equivariance_violation(f, *spec, 100, 6);
        ensure(violation > 1e-3, || format!("{name}: violation only {violation:.3e}"))?;
        let g = genset(*spec)?;
        match decompose_default(f, &g) {
            Err(CertifyError::NoExpression { .. }) => {}
            other => return Err(format!("{name}: expected NoExpression, got {other:?}")),
        }
    }
    Ok(format!("{} non-equivariant maps rejected", maps.len()))
}

fn regression() -> Outcome {
    let spec = GroupSpec::new(Family::O, 3, 2).unwrap();
    let err = |e: equivar::fit::FitError| e.to_string();
    let train = make_task(Task::WeightedGram, spec, 500, 7, 0.0).map_err(err)?;
    let held_out = make_task(Task::WeightedGram, spec, 500, 8, 0.0).map_err(err)?;
    let model = fit(&train, 1, 1e-8).map_err(err)?;
    let opts = EvalOptions {
        group_samples: 100,
        points: 20,
        seed: 9,
    };
    let clean = evaluate(&model, &held_out, &opts).map_err(err)?;
    ensure(clean.mse <= 1e-10, || format!("held-out mse {:.3e}", clean.mse))?;
    ensure(clean.equivariance_violation <= 1e-9, || {
        format!("equivariance violation {:.3e}", clean.equivariance_violation)
    })?;

    let sigma = 0.01;
    let noisy_train = make_task(Task::WeightedGram, spec, 500, 7, sigma).map_err(err)?;
    let noisy_test = make_task(Task::WeightedGram, spec, 500, 8, sigma).map_err(err)?;
    let noisy = evaluate(&fit(&noisy_train, 1, 1e-8).map_err(err)?, &noisy_test, &opts).map_err(err)?;
    ensure(noisy.mse <= 3.0 * sigma * sigma, || format!("noisy held-out mse {:.3e}", noisy.mse))?;
    Ok(format!(
        "mse {:.1e}, equivariance {:.1e}; noisy mse {:.2e} (bound {:.1e})",
        clean.mse,
        clean.equivariance_violation,
        noisy.mse,
        3.0 * sigma * sigma
    ))
}

fn remark_equivalence() -> Outcome {
    let specs = catalog_specs(1..=4);
    for &spec in &specs {
        let g = genset(spec)?;
        let by_derivative = derive(&g).map_err(|e| e.to_string())?;
        let by_coefficients = derive_by_coefficients(&g).map_err(|e| e.to_string())?;
        ensure(by_derivative == by_coefficients, || format!("{spec}: derivations differ"))?;
    }
    Ok(format!("{} generator sets agree", specs.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 generator counts", generator_counts),
        ("2 generator invariance", invariance_suite),
        ("3 basis equivariance", equivariance_suite),
        ("4 cross product", cross_product_identity),
        ("5 certifier round trip", certifier_round_trip),
        ("6 negative controls", negative_controls),
        ("7 regression", regression),
        ("8 derivation equivalence", remark_equivalence),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{elapsed:.2?}]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{elapsed:.2?}]");
            }
        }
    }
    println!("acceptance: {} of 8 criteria passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
