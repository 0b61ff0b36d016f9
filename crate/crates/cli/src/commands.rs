use std::collections::BTreeMap;
use std::path::Path;

use causelab::data::Dataset;
use causelab::discovery::{self, DiscoveryConfig, DiscoveryReport};
use causelab::estimation::{self, EffectEstimate, Propensity, Strata};
use causelab::graph::{self, Dag, GraphJson, NodeSet};
use causelab::kernel_stats::{self, CiConfig, CiMethod, Kernel};
use causelab::scenario::Scenario;
use causelab::scm::{Intervention, Scm};
use clap::ValueEnum;
use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::args::*;
use crate::io::{csv_bytes, emit, json_bytes, parse_json, read_csv, read_text, sibling_path, write_atomic};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

pub fn name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Dsep(_) => "dsep",
        Command::Adjust(_) => "adjust",
        Command::CountDags(_) => "count-dags",
        Command::Simulate(_) => "simulate",
        Command::Intervene(_) => "intervene",
        Command::Counterfactual(_) => "counterfactual",
        Command::Generate(_) => "generate",
        Command::Discover(_) => "discover",
        Command::Estimate(_) => "estimate",
        Command::TestCi(_) => "test-ci",
        Command::Mmd(_) => "mmd",
        Command::Hsic(_) => "hsic",
        Command::VcBound(_) => "vc-bound",
    }
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Dsep(a) => dsep(a),
        Command::Adjust(a) => adjust(a),
        Command::CountDags(a) => count_dags(a),
        Command::Simulate(a) => simulate(a),
        Command::Intervene(a) => intervene(a),
        Command::Counterfactual(a) => counterfactual(a),
        Command::Generate(a) => generate(a),
        Command::Discover(a) => discover(a),
        Command::Estimate(a) => estimate(a),
        Command::TestCi(a) => test_ci(a),
        Command::Mmd(a) => mmd(a),
        Command::Hsic(a) => hsic(a),
        Command::VcBound(a) => vc_bound(a),
    }
}

fn emit_json(out: &Output, v: &Value) -> Result<()> {
    emit(out.out.as_deref(), &json_bytes(v))
}

fn load_graph(path: &Path) -> Result<Dag> {
    let v = parse_json(path, &read_text(path)?)?;
    let raw: GraphJson = serde_json::from_value(v).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(Dag::try_from(raw)?)
}

fn load_model(path: &Path) -> Result<Scm> {
    let v = parse_json(path, &read_text(path)?)?;
    Ok(Scm::from_json_value(&v)?)
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).filter(|s| !s.is_empty()).collect()
}

fn node_set(g: &Dag, names: &[String]) -> Result<NodeSet> {
    Ok(g.node_set(&strs(names))?)
}

fn names_of(g: &Dag, s: &NodeSet) -> Vec<String> {
    s.iter().map(|i| g.name(i).to_string()).collect()
}

fn intervention(set: &[(String, f64)]) -> Intervention {
    set.iter().fold(Intervention::new(), |iv, (k, v)| iv.set(k, *v))
}

fn assignments(set: &[(String, f64)]) -> BTreeMap<String, f64> {
    set.iter().cloned().collect()
}

fn dsep(a: DsepArgs) -> Result<()> {
    let g = load_graph(&a.graph)?;
    let split = |s: &str| s.split(',').map(|x| x.trim().to_string()).collect::<Vec<_>>();
    let (sa, sb, sz) = (node_set(&g, &split(&a.a))?, node_set(&g, &split(&a.b))?, node_set(&g, &a.given)?);
    if sa.is_empty() || sb.is_empty() {
        return Err(CliError::Usage("both node sets must be non-empty".into()));
    }
    let sep = graph::d_separated(&g, &sa, &sb, &sz)?;
    emit_json(
        &a.output,
        &json!({
            "a": names_of(&g, &sa),
            "b": names_of(&g, &sb),
            "given": names_of(&g, &sz),
            "d_separated": sep,
        }),
    )
}

fn adjust(a: AdjustArgs) -> Result<()> {
    let g = load_graph(&a.graph)?;
    let (t, y) = (g.index_of(&a.treatment)?, g.index_of(&a.outcome)?);
    let found = graph::enumerate_adjustment_sets(&g, t, y, a.limit)?;
    let mut v = json!({
        "treatment": a.treatment,
        "outcome": a.outcome,
        "sets": found.sets.iter().map(|s| names_of(&g, s)).collect::<Vec<_>>(),
        "parent_adjustment_valid": found.parent_adjustment_valid,
    });
    if let Some(check) = &a.check {
        let z = node_set(&g, check)?;
        let valid = graph::is_valid_adjustment_set(&g, t, y, &z)?;
        v["checked"] = json!({ "set": names_of(&g, &z), "valid": valid });
    }
    emit_json(&a.output, &v)
}

fn count_dags(a: CountDagsArgs) -> Result<()> {
    let count = graph::count_dags(a.n)?;
    emit_json(&a.output, &json!({ "n": a.n, "count": count.to_string() }))
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let data = load_model(&a.model)?.sample(a.n, a.seed)?;
    emit(a.output.out.as_deref(), &csv_bytes(&data)?)
}

fn intervene(a: IntervenArgs) -> Result<()> {
    let scm = load_model(&a.model)?;
    let iv = intervention(&a.set);
    match &a.target {
        Some(target) => {
            let est = scm.interventional_mean(&iv, target, a.n, a.seed)?;
            emit_json(
                &a.output,
                &json!({
                    "target": target,
                    "intervention": assignments(&a.set),
                    "mean": est.mean,
                    "stderr": est.stderr,
                    "n": est.n,
                    "seed": a.seed,
                }),
            )
        }
        None => emit(a.output.out.as_deref(), &csv_bytes(&scm.intervene(&iv)?.sample(a.n, a.seed)?)?),
    }
}

fn counterfactual(a: CounterfactualArgs) -> Result<()> {
    let scm = load_model(&a.model)?;
    let evidence = assignments(&a.evidence);
    let dist = scm.counterfactual(&evidence, &intervention(&a.set), &a.target)?;
    emit_json(
        &a.output,
        &json!({
            "target": a.target,
            "evidence": evidence,
            "intervention": assignments(&a.set),
            "atoms": dist.atoms.iter().map(|&(v, p)| json!({ "value": v, "prob": p })).collect::<Vec<_>>(),
            "mean": dist.mean(),
            "point": dist.point(),
        }),
    )
}

fn generate(a: GenerateArgs) -> Result<()> {
    let scenario = Scenario::from_name(&a.scenario).map_err(|e| CliError::Usage(e.to_string()))?;
    let (data, truth) = scenario.generate(a.n, a.seed)?;
    write_atomic(&a.out, &csv_bytes(&data)?)?;
    write_atomic(&sibling_path(&a.out, "truth"), &json_bytes(&truth))?;
    write_atomic(&sibling_path(&a.out, "model"), &json_bytes(&scenario.scm().to_json_value()))
}

fn require_seed(seed: Option<u64>, why: &str) -> Result<u64> {
    seed.ok_or_else(|| CliError::Usage(format!("--seed is required for {why}")))
}

fn discover(a: DiscoverArgs) -> Result<()> {
    let data = read_csv(&a.data)?;
    if data.n_cols() == 0 || data.n_rows() == 0 {
        return Err(CliError::Input(format!("{}: no data rows", a.data.display())));
    }
    let stochastic = a.method == DiscoverMethod::Anm || a.ci == CiKind::KernelResidual;
    let seed = if stochastic { require_seed(a.seed, "anm and kernel-residual tests")? } else { a.seed.unwrap_or(0) };
    let cfg = DiscoveryConfig {
        ci_method: a.ci.into(),
        alpha: a.alpha,
        max_cond: a.max_cond,
        score: a.score_model.map(Into::into),
        search: a.search.into(),
        perms: a.perms,
        seed,
    };
    cfg.validate()?;
    let v = match a.method {
        DiscoverMethod::Pc | DiscoverMethod::Sgs => {
            let skeleton = if a.method == DiscoverMethod::Pc {
                discovery::pc_skeleton(&data, &cfg)?
            } else {
                discovery::sgs_skeleton(&data, &cfg)?
            };
            let orientation = discovery::orient(&skeleton)?;
            let report = DiscoveryReport { skeleton, orientation, alpha: cfg.alpha, seed };
            let mut v = report.to_json_value();
            v["method"] = json!(if a.method == DiscoverMethod::Pc { "pc" } else { "sgs" });
            v
        }
        DiscoverMethod::Score => {
            let found = discovery::score_search(&data, &cfg)?;
            json!({
                "method": "score",
                "dag": found.dag.to_json_value(),
                "cpdag": graph::cpdag_of(&found.dag).to_json_value(),
                "score": found.score,
                "graphs_scored": found.graphs_scored,
                "search": cfg.search,
                "model": cfg.score.map_or(json!("auto"), |m| json!(m)),
            })
        }
        DiscoverMethod::Anm => {
            let names = data.names();
            let cause = a.cause.clone().or_else(|| names.first().map(|s| s.to_string()));
            let effect = a.effect.clone().or_else(|| names.get(1).map(|s| s.to_string()));
            let (Some(x), Some(y)) = (cause, effect) else {
                return Err(CliError::Usage("anm needs two columns; pass --cause and --effect".into()));
            };
            let verdict = discovery::anm_direction(&data, &x, &y, &cfg)?;
            json!({
                "method": "anm",
                "cause": x,
                "effect": y,
                "direction": verdict.direction,
                "p_forward": verdict.p_forward,
                "p_backward": verdict.p_backward,
                "margin": verdict.margin,
                "alpha": cfg.alpha,
                "perms": cfg.perms,
                "seed": seed,
            })
        }
    };
    emit_json(&a.output, &v)
}

fn need<'a>(v: &'a Option<String>, flag: &str, method: &str) -> Result<&'a str> {
    v.as_deref().ok_or_else(|| CliError::Usage(format!("method {method} requires --{flag}")))
}

fn need_num(v: Option<f64>, flag: &str, method: &str) -> Result<f64> {
    v.ok_or_else(|| CliError::Usage(format!("method {method} requires --{flag}")))
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let data = read_csv(&a.data)?;
    if a.method == EstimateMethod::HalfSibling {
        return half_sibling(&a, &data);
    }
    let y = a.y.as_str();
    let z = strs(&a.z);
    let estimator = |d: &Dataset| -> causelab::error::Result<EffectEstimate> {
        let t = a.t.as_deref().unwrap_or_default();
        match a.method {
            EstimateMethod::Rct => estimation::ate_rct(d, y, t),
            EstimateMethod::Regression => estimation::ate_regression_adjustment(d, y, t, &z, a.regressor.into()),
            EstimateMethod::Matching => estimation::ate_nn_matching(d, y, t, &z),
            EstimateMethod::Stratified => {
                let covariates: Vec<String> = z.iter().map(|s| s.to_string()).collect();
                let strata = match a.bins {
                    Some(bins) => Strata::PropensityBins { covariates, bins },
                    None => Strata::Covariates(covariates),
                };
                estimation::ate_stratified(d, y, t, &strata)
            }
            EstimateMethod::Ipw => {
                let p = match &a.propensity_column {
                    Some(c) => Propensity::Exact(d.values(c)?.to_vec()),
                    None => Propensity::Fitted(z.iter().map(|s| s.to_string()).collect()),
                };
                estimation::ate_ipw(d, y, t, &p, a.clip)
            }
            EstimateMethod::FrontDoor => estimation::ate_front_door(d, y, t, a.mediator.as_deref().unwrap_or_default()),
            EstimateMethod::Iv2sls => estimation::ate_iv_2sls(d, y, t, a.instrument.as_deref().unwrap_or_default()),
            EstimateMethod::Rdd => estimation::ate_rdd(
                d,
                y,
                a.score.as_deref().unwrap_or_default(),
                a.cutoff.unwrap_or_default(),
                a.epsilon.unwrap_or_default(),
            ),
            EstimateMethod::HalfSibling => unreachable!("handled above"),
        }
    };
    let method = a.method.to_possible_value().expect("named").get_name().to_string();
    match a.method {
        EstimateMethod::Rdd => {
            need(&a.score, "score", &method)?;
            need_num(a.cutoff, "cutoff", &method)?;
            need_num(a.epsilon, "epsilon", &method)?;
        }
        _ => {
            need(&a.t, "t", &method)?;
        }
    }
    match a.method {
        EstimateMethod::Regression | EstimateMethod::Matching | EstimateMethod::Stratified if z.is_empty() => {
            return Err(CliError::Usage(format!("method {method} requires --z")));
        }
        EstimateMethod::FrontDoor => {
            need(&a.mediator, "mediator", &method)?;
        }
        EstimateMethod::Iv2sls => {
            need(&a.instrument, "instrument", &method)?;
        }
        _ => {}
    }
    let mut est = estimator(&data)?;
    if let Some(reps) = a.bootstrap {
        let seed = require_seed(a.seed, "--bootstrap")?;
        est.stderr = Some(estimation::bootstrap_stderr(&data, reps, seed, estimator)?);
        est.seed = Some(seed);
    }
    emit_json(&a.output, &est.to_json_value())
}

fn half_sibling(a: &EstimateArgs, data: &Dataset) -> Result<()> {
    if a.siblings.is_empty() {
        return Err(CliError::Usage("method half-sibling requires --siblings".into()));
    }
    if a.bootstrap.is_some() {
        return Err(CliError::Usage("--bootstrap does not apply to half-sibling".into()));
    }
    let siblings: DMatrix<f64> = data.matrix(&strs(&a.siblings))?;
    let signal = estimation::half_sibling_regress(data.values(&a.y)?, &siblings, a.regressor.into())?;
    let regressor: estimation::Regressor = a.regressor.into();
    emit_json(
        &a.output,
        &json!({
            "estimator": "half-sibling",
            "target": a.y,
            "siblings": a.siblings,
            "regressor": regressor,
            "n": signal.len(),
            "signal": signal,
        }),
    )
}

fn test_ci(a: TestCiArgs) -> Result<()> {
    let data = read_csv(&a.data)?;
    let method: CiMethod = a.method.into();
    let seed = match method {
        CiMethod::KernelResidual => require_seed(a.seed, "kernel-residual")?,
        CiMethod::PartialCorrelation => a.seed.unwrap_or(0),
    };
    let z = strs(&a.z);
    let cfg = CiConfig { alpha: a.alpha, max_cond: z.len(), perms: a.perms, seed, ridge: None };
    let res = kernel_stats::ci_test(method, &data, &a.a, &a.b, &z, &cfg)?;
    emit_json(
        &a.output,
        &json!({
            "a": a.a,
            "b": a.b,
            "given": z,
            "test": res.test,
            "statistic": res.statistic,
            "p_value": res.p_value,
            "alpha": a.alpha,
            "independent": !res.rejects(a.alpha),
            "seed": seed,
        }),
    )
}

fn mmd(a: MmdArgs) -> Result<()> {
    let (first, second) = (read_csv(&a.first)?, read_csv(&a.second)?);
    let cols: Vec<String> = if a.columns.is_empty() {
        first.names().into_iter().map(String::from).collect()
    } else {
        a.columns.clone()
    };
    let cols = strs(&cols);
    let (xs, ys) = (first.matrix(&cols)?, second.matrix(&cols)?);
    let bandwidth = match a.bandwidth {
        Some(b) => b,
        None => {
            let pooled = DMatrix::from_fn(xs.nrows() + ys.nrows(), xs.ncols(), |r, c| {
                if r < xs.nrows() {
                    xs[(r, c)]
                } else {
                    ys[(r - xs.nrows(), c)]
                }
            });
            kernel_stats::median_heuristic(&pooled)
        }
    };
    let res = kernel_stats::mmd(&Kernel::gaussian(bandwidth)?, &xs, &ys, a.perms, a.seed)?;
    emit_json(
        &a.output,
        &json!({
            "columns": cols,
            "bandwidth": bandwidth,
            "statistic": res.statistic,
            "unbiased": res.unbiased,
            "p_value": res.p_value,
            "permutations": res.permutations,
            "seed": res.seed,
        }),
    )
}

fn hsic(a: HsicArgs) -> Result<()> {
    let data = read_csv(&a.data)?;
    let (xs, ys) = (data.matrix(&strs(&a.x))?, data.matrix(&strs(&a.y))?);
    let (kx, ky) = (Kernel::gaussian_median(&xs), Kernel::gaussian_median(&ys));
    let res = kernel_stats::hsic_test(&kx, &ky, &xs, &ys, a.perms, a.seed)?;
    emit_json(
        &a.output,
        &json!({
            "x": a.x,
            "y": a.y,
            "statistic": res.statistic,
            "p_value": res.p_value,
            "alpha": a.alpha,
            "independent": !res.rejects(a.alpha),
            "permutations": a.perms,
            "seed": a.seed,
        }),
    )
}

fn vc_bound(a: VcBoundArgs) -> Result<()> {
    let bound = kernel_stats::vc_bound(a.r_emp, a.h, a.m, a.delta)?;
    emit_json(
        &a.output,
        &json!({ "r_emp": a.r_emp, "h": a.h, "m": a.m, "delta": a.delta, "bound": bound }),
    )
}
