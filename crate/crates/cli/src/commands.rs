//! One handler per subcommand.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use equivar::catalog::{check_invariance, generators, CheckReport, GeneratorSet};
use equivar::certifier::{curry, decompose, default_degree_bound, CertifyError, PolyMap};
use equivar::engine::{check_equivariance, check_feature_invariance, derive, eval_batch, Parametrization};
use equivar::fit::{evaluate, fit, make_task, mse, predict, Dataset, EquiModel, EvalOptions, Task};
use equivar::group::{Family, GroupSpec, InputTuple};

use crate::io::{read_json, to_value, Failure, Outcome};
use crate::{Command, DataArgs, SpecArgs};

pub fn run(command: &Command) -> Result<Outcome, Failure> {
    match command {
        Command::Generators(a) => cmd_generators(&a.spec),
        Command::Derive(a) => cmd_derive(&a.spec),
        Command::Eval(a) => cmd_eval(&a.param, &a.input),
        Command::Verify(a) => cmd_verify(&a.spec, a.trials, a.tol, a.seed),
        Command::Express(a) => cmd_express(&a.spec, &a.map, a.degree_bound),
        Command::Fit(a) => cmd_fit(&a.spec, &a.data, a.degree, a.lambda),
        Command::Predict(a) => cmd_predict(&a.model, &a.input),
        Command::Evaluate(a) => cmd_evaluate(&a.model, &a.data, a.trials, a.points),
    }
}

fn resolve_spec(args: &SpecArgs) -> Result<GroupSpec, Failure> {
    if let Some(path) = &args.spec {
        return read_json(path, "group spec");
    }
    match (&args.group, args.d, args.n) {
        (Some(group), Some(d), Some(n)) => {
            let family: Family = group.parse().map_err(|e: equivar::group::GroupError| Failure::usage("UsageError", e.to_string()))?;
            Ok(GroupSpec::new(family, d, n)?)
        }
        _ => Err(Failure::usage(
            "UsageError",
            "a group is required: pass --group, --d and --n, or --spec FILE",
        )),
    }
}

fn generator_set(spec: GroupSpec) -> Result<GeneratorSet, Failure> {
    Ok(generators(spec)?)
}

fn cmd_generators(args: &SpecArgs) -> Result<Outcome, Failure> {
    let genset = generator_set(resolve_spec(args)?)?;
    Ok(Outcome::new(&genset)?.note(format!(
        "{} degree-0, {} degree-1, {} discarded",
        genset.deg0.len(),
        genset.deg1.len(),
        genset.discarded_count()
    )))
}

fn cmd_derive(args: &SpecArgs) -> Result<Outcome, Failure> {
    let param = derive(&generator_set(resolve_spec(args)?)?)?;
    Ok(Outcome::new(&param)?.note(format!(
        "{} features, {} basis maps",
        param.features.len(),
        param.basis.len()
    )))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum InputFile {
    One(InputTuple),
    Many(Vec<InputTuple>),
    Bare(Vec<Vec<f64>>),
}

impl InputFile {
    fn into_inputs(self) -> (Vec<InputTuple>, bool) {
        match self {
            InputFile::One(x) => (vec![x], false),
            InputFile::Many(xs) => (xs, true),
            InputFile::Bare(vs) => (vec![InputTuple::new(vs)], false),
        }
    }
}

fn read_inputs(path: &Path) -> Result<(Vec<InputTuple>, bool), Failure> {
    Ok(read_json::<InputFile>(path, "input")?.into_inputs())
}

fn cmd_eval(param: &Path, input: &Path) -> Result<Outcome, Failure> {
    let param: Parametrization = read_json(param, "parametrization")?;
    let (inputs, batch) = read_inputs(input)?;
    let mut evals = eval_batch(&param, &inputs)?;
    if batch {
        Outcome::new(&evals)
    } else {
        Outcome::new(&evals.remove(0))
    }
}

#[derive(Serialize)]
struct VerifyRow {
    check: &'static str,
    label: String,
    max_error: f64,
    pass: bool,
}

fn cmd_verify(args: &SpecArgs, trials: usize, tol: Option<f64>, seed: u64) -> Result<Outcome, Failure> {
    let spec = resolve_spec(args)?;
    let tol = tol.unwrap_or_else(|| spec.default_tolerance());
    if tol.is_nan() || tol < 0.0 {
        return Err(Failure::usage("UsageError", format!("--tol must be non-negative, got {tol}")));
    }
    let genset = generator_set(spec)?;
    let param = derive(&genset)?;
    let reports: [(&'static str, CheckReport); 3] = [
        ("invariance", check_invariance(&genset, trials, tol, seed)),
        ("equivariance", check_equivariance(&param, trials, tol, seed)),
        ("feature-invariance", check_feature_invariance(&param, trials, tol, seed)),
    ];
    let rows: Vec<VerifyRow> = reports
        .iter()
        .flat_map(|(check, report)| {
            report.items.iter().map(move |item| VerifyRow {
                check,
                label: item.label.clone(),
                max_error: item.max_error,
                pass: item.pass,
            })
        })
        .collect();
    let pass = reports.iter().all(|(_, r)| r.pass);
    let payload = json!({
        "spec": spec,
        "trials": trials,
        "tolerance": tol,
        "seed": seed,
        "pass": pass,
        "items": rows,
    });
    if pass {
        Ok(Outcome::new(&payload)?.note(format!("{} checks passed", rows.len())))
    } else {
        let failed = rows.iter().filter(|r| !r.pass).count();
        Err(Failure::domain("VerificationFailed", format!("{failed} of {} checks failed", rows.len())).with_detail(payload))
    }
}

fn certify_failure(e: CertifyError) -> Failure {
    let detail = match &e {
        CertifyError::NoExpression {
            degree_bound,
            stratum,
            invariance_violation,
            hint,
        } => Some(json!({
            "degree_bound": degree_bound,
            "stratum": { "v": stratum.0, "l": stratum.1 },
            "invariance_violation": invariance_violation,
            "hint": hint,
        })),
        _ => None,
    };
    let failure = Failure::from(e);
    match detail {
        Some(d) => failure.with_detail(d),
        None => failure,
    }
}

fn cmd_express(args: &SpecArgs, map: &Path, bound: Option<u32>) -> Result<Outcome, Failure> {
    let spec = resolve_spec(args)?;
    let f: PolyMap = read_json(map, "map")?;
    if f.universe() != spec.universe() {
        return Err(Failure::domain(
            "Mismatch",
            format!("map is over {}, group acts on {}", f.universe(), spec.universe()),
        ));
    }
    let genset = generator_set(spec)?;
    let param = derive(&genset)?;
    let bound = bound.unwrap_or_else(|| default_degree_bound(&curry(&f), &genset));
    let dec = decompose(&f, &genset, &param, bound).map_err(certify_failure)?;
    Ok(Outcome::new(&dec.to_json())?.note(format!("certified at degree bound {bound}")))
}

/// Loads `--data` or generates a `--task` dataset for `spec`.
fn dataset(args: &DataArgs, spec: impl FnOnce() -> Result<GroupSpec, Failure>) -> Result<Dataset, Failure> {
    match (&args.data, &args.task) {
        (Some(path), None) => read_json(path, "dataset"),
        (None, Some(task)) => {
            let task: Task = task.parse().map_err(|e: equivar::fit::FitError| Failure::usage("UsageError", e.to_string()))?;
            Ok(make_task(task, spec()?, args.count, args.seed, args.noise)?)
        }
        _ => Err(Failure::usage("UsageError", "pass either --data FILE or --task NAME")),
    }
}

fn cmd_fit(spec_args: &SpecArgs, data_args: &DataArgs, degree: u32, lambda: f64) -> Result<Outcome, Failure> {
    let data = dataset(data_args, || resolve_spec(spec_args))?;
    let model = fit(&data, degree, lambda)?;
    let train_mse = mse(&model, &data)?;
    Ok(Outcome::new(&model)?.note(format!("{} samples, training mse {train_mse:.6e}", data.len())))
}

fn cmd_predict(model: &Path, input: &Path) -> Result<Outcome, Failure> {
    let model: EquiModel = read_json(model, "model")?;
    let (inputs, batch) = read_inputs(input)?;
    let mut ys = inputs
        .iter()
        .map(|x| predict(&model, x))
        .collect::<Result<Vec<_>, _>>()?;
    if batch {
        Outcome::new(&json!({ "y": ys }))
    } else {
        Outcome::new(&json!({ "y": ys.remove(0) }))
    }
}

fn cmd_evaluate(model: &Path, data_args: &DataArgs, trials: usize, points: usize) -> Result<Outcome, Failure> {
    let model: EquiModel = read_json(model, "model")?;
    let data = dataset(data_args, || Ok(model.param.spec))?;
    let opts = EvalOptions {
        group_samples: trials,
        points,
        seed: data_args.seed,
    };
    let metrics = evaluate(&model, &data, &opts)?;
    Ok(Outcome {
        payload: to_value(&metrics)?,
        diagnostics: vec![format!("{} samples", data.len())],
    })
}
