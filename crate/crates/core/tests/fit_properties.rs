use equivar::fit::{evaluate, fit, make_task, mse, parametrization_for, predict, EquiModel, EvalOptions, Task};
use equivar::group::{Family, GroupSpec};
use equivar::seed::rng_for;
use proptest::prelude::*;
use rand::Rng;

fn spec(family: Family, d: usize, n: usize) -> GroupSpec {
    GroupSpec::new(family, d, n).unwrap()
}

#[test]
fn ridge_training_error_grows_with_lambda() {
    let data = make_task(Task::CrossTarget, spec(Family::SO, 3, 2), 150, 2, 0.3).unwrap();
    let lambdas = [0.0, 1e-6, 1e-3, 1e-1, 1.0, 10.0, 100.0, 1e4];
    let errors: Vec<f64> = lambdas.iter().map(|&l| mse(&fit(&data, 1, l).unwrap(), &data).unwrap()).collect();
    for w in errors.windows(2) {
        assert!(w[1] >= w[0] * (1.0 - 1e-12), "{errors:?}");
    }
    assert!(errors.last().unwrap() > &(errors[0] * 2.0));
}

#[test]
fn fitting_is_bitwise_deterministic() {
    let data = make_task(Task::WeightedGram, spec(Family::SO, 3, 3), 80, 9, 0.05).unwrap();
    let a = fit(&data, 2, 1e-4).unwrap();
    let b = fit(&data, 2, 1e-4).unwrap();
    let bits = |m: &EquiModel| m.coefficients.iter().flatten().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn lorentz_task_is_learned_exactly() {
    let s = spec(Family::Lorentz, 4, 2);
    let train = make_task(Task::LorentzSum, s, 200, 1, 0.0).unwrap();
    let test = make_task(Task::LorentzSum, s, 100, 2, 0.0).unwrap();
    let model = fit(&train, 1, 1e-10).unwrap();
    let m = evaluate(&model, &test, &EvalOptions::default()).unwrap();
    assert!(m.mse <= 1e-12, "{m:?}");
    assert!(m.equivariance_violation <= 1e-7, "{m:?}");
}

#[test]
fn unregularized_fit_uses_exact_least_squares() {
    let data = make_task(Task::WeightedGram, spec(Family::O, 2, 2), 40, 3, 0.0).unwrap();
    let model = fit(&data, 1, 0.0).unwrap();
    assert!(mse(&model, &data).unwrap() <= 1e-20);
    let tiny = make_task(Task::WeightedGram, spec(Family::O, 2, 2), 1, 3, 0.0).unwrap();
    assert!(fit(&tiny, 2, 0.0).is_err());
    assert!(fit(&tiny, 2, 1e-3).is_ok());
}

#[test]
fn invalid_fit_arguments() {
    let data = make_task(Task::WeightedGram, spec(Family::O, 2, 2), 10, 3, 0.0).unwrap();
    assert!(fit(&data, 1, -1.0).is_err());
    assert!(fit(&data, 1, f64::NAN).is_err());
    let empty = make_task(Task::WeightedGram, spec(Family::O, 2, 2), 0, 3, 0.0).unwrap();
    assert!(fit(&empty, 1, 1.0).is_err());
}

fn families() -> Vec<GroupSpec> {
    vec![spec(Family::O, 3, 2), spec(Family::SO, 3, 3), spec(Family::Lorentz, 3, 2), spec(Family::Sp, 4, 2)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// Any coefficients give an equivariant predictor.
    #[test]
    fn every_model_is_equivariant(which in 0usize..4, seed in any::<u64>(), degree in 0u32..=2) {
        let s = families()[which];
        let mut model = EquiModel::zero(parametrization_for(s).unwrap(), degree);
        let mut rng = rng_for(seed, "test/model", 0);
        for w in model.coefficients.iter_mut().flatten() {
            *w = rng.random_range(-1.0..1.0);
        }
        let data = zero_target_data(s, seed);
        let m = evaluate(&model, &data, &EvalOptions { group_samples: 10, points: 5, seed }).unwrap();
        prop_assert!(m.equivariance_violation <= s.default_tolerance(), "{:?}", m);
    }
}

/// Random inputs with zero targets, for families without a synthetic task.
fn zero_target_data(s: GroupSpec, seed: u64) -> equivar::fit::Dataset {
    let samples = (0..5)
        .map(|k| {
            let x = equivar::group::InputTuple::random(&s, &mut rng_for(seed, "test/inputs", k));
            equivar::fit::Sample { x: x.vectors, y: vec![0.0; s.d] }
        })
        .collect();
    equivar::fit::Dataset::new(s, samples, equivar::fit::Metadata { task: None, seed, noise: 0.0 }).unwrap()
}

#[test]
fn predict_checks_shapes() {
    let model = EquiModel::zero(parametrization_for(spec(Family::O, 3, 2)).unwrap(), 1);
    assert!(predict(&model, &equivar::group::InputTuple::new(vec![vec![0.0; 3]])).is_err());
    assert!(predict(&model, &equivar::group::InputTuple::new(vec![vec![0.0; 2]; 2])).is_err());
}
