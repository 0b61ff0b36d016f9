use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_causelab"));
    c.env_remove("CAUSELAB_THREADS");
    c
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn causelab")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn validate(schema: &str, v: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{schema}.schema.json"));
    let schema: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    let compiled = jsonschema::JSONSchema::compile(&schema).expect("schema compiles");
    let msgs: Vec<String> = match compiled.validate(v) {
        Ok(()) => Vec::new(),
        Err(errors) => errors.map(|e| format!("{e} at {}", e.instance_path)).collect(),
    };
    assert!(msgs.is_empty(), "{v} violates schema: {msgs:?}");
}

/// Runs a JSON-producing subcommand, requires exit 0 and checks the schema.
fn json(schema: &str, args: &[&str]) -> Value {
    let out = run(args);
    assert_eq!(code(&out), 0, "{args:?}: {}", stderr(&out));
    let v: Value = serde_json::from_slice(&out.stdout).expect("stdout is JSON");
    validate(schema, &v);
    v
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("{v} is not a number"))
}

struct Scenario {
    dir: TempDir,
}

impl Scenario {
    fn generate(name: &str, n: usize, seed: u64) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("data.csv");
        let out = run(&["generate", name, "--n", &n.to_string(), "--seed", &seed.to_string(), "--out", &s(&csv)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        Scenario { dir }
    }

    fn csv(&self) -> String {
        s(&self.dir.path().join("data.csv"))
    }

    fn model(&self) -> String {
        s(&self.dir.path().join("data.model.json"))
    }

    fn truth(&self) -> Value {
        serde_json::from_str(&fs::read_to_string(self.dir.path().join("data.truth.json")).unwrap()).unwrap()
    }
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

#[test]
fn count_dags_exact() {
    assert_eq!(json("count-dags", &["count-dags", "5"])["count"], "29281");
    assert_eq!(json("count-dags", &["count-dags", "10"])["count"], "4175098976430598143");
    assert_eq!(json("count-dags", &["count-dags", "1"])["count"], "1");
    assert_eq!(code(&run(&["count-dags", "0"])), 2);
}

#[test]
fn dsep_chain_and_collider() {
    let chain = json("dsep", &["dsep", "--graph", &fixture("chain.json"), "X", "Z", "--given", "Y"]);
    assert_eq!(chain["d_separated"], true);
    let open = json("dsep", &["dsep", "--graph", &fixture("chain.json"), "X", "Z"]);
    assert_eq!(open["d_separated"], false);
    let collider = json("dsep", &["dsep", "--graph", &fixture("collider.json"), "X", "Z", "--given", "Y"]);
    assert_eq!(collider["d_separated"], false);
    let marginal = json("dsep", &["dsep", "--graph", &fixture("collider.json"), "X", "Z"]);
    assert_eq!(marginal["d_separated"], true);
}

#[test]
fn malformed_inputs_exit_2() {
    let out = run(&["dsep", "--graph", &fixture("malformed.json"), "X", "Y"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
    let out = run(&["dsep", "--graph", &fixture("unknown_key.json"), "X", "X"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("extra"), "{}", stderr(&out));
    let out = run(&["dsep", "--graph", &fixture("chain.json"), "X", "Q"]);
    assert_eq!(code(&out), 2);
    let out = run(&["dsep", "--graph", &fixture("nonexistent.json"), "X", "Y"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn adjustment_sets_on_fig8_graph() {
    let v = json(
        "adjust",
        &["adjust", "--graph", &fixture("fig8.json"), "--treatment", "T", "--outcome", "Y", "--check", "X1,X3"],
    );
    let sets: Vec<Vec<String>> = serde_json::from_value(v["sets"].clone()).unwrap();
    assert_eq!(sets, vec![vec!["X1"], vec!["X2"], vec!["X1", "X2"]]);
    assert_eq!(v["checked"]["valid"], false);
    assert_eq!(v["parent_adjustment_valid"], true);
}

#[test]
fn counterfactual_and_interventional_mean() {
    let model = fixture("example3.json");
    validate("model", &serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap());
    let cf = json(
        "counterfactual",
        &["counterfactual", "--model", &model, "--evidence", "X=2", "--evidence", "Y=6.5", "--set", "X=1", "--target", "Y"],
    );
    assert_eq!(num(&cf["point"]), 3.5);
    assert_eq!(cf["atoms"].as_array().unwrap().len(), 1);
    let iv = json(
        "intervene",
        &["intervene", "--model", &model, "--set", "X=1", "--n", "10000", "--seed", "7", "--target", "Y"],
    );
    assert!((num(&iv["mean"]) - 3.0).abs() < 0.05, "{iv}");
}

#[test]
fn simulate_and_intervene_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.csv");
    let r = run(&["simulate", "--model", &fixture("example3.json"), "--n", "50", "--seed", "1", "--out", &s(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next(), Some("X,Y"));
    assert_eq!(text.lines().count(), 51);
    let r = run(&["intervene", "--model", &fixture("example3.json"), "--set", "X=1", "--n", "20", "--seed", "1"]);
    let text = String::from_utf8(r.stdout).unwrap();
    assert!(text.lines().skip(1).all(|l| l.starts_with("1,")), "{text}");
}

#[test]
fn seed_is_required_for_stochastic_commands() {
    let r = run(&["simulate", "--model", &fixture("example3.json"), "--n", "5"]);
    assert_eq!(code(&r), 2);
    let sc = Scenario::generate("anm-nonlinear", 200, 1);
    let r = run(&["discover", "--data", &sc.csv(), "--method", "anm"]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("--seed"));
}

#[test]
fn generate_every_scenario_validates() {
    for name in [
        "genes-confounded",
        "simpson-reversal",
        "faithfulness-violation",
        "frontdoor",
        "iv-linear",
        "halfsibling",
        "anm-nonlinear",
        "collider",
        "confounded-linear",
    ] {
        let sc = Scenario::generate(name, 20, 3);
        let truth = sc.truth();
        validate("truth", &truth);
        assert_eq!(truth["scenario"], name);
        let model: Value = serde_json::from_str(&fs::read_to_string(sc.model()).unwrap()).unwrap();
        validate("model", &model);
        let header = fs::read_to_string(sc.csv()).unwrap().lines().next().unwrap().to_string();
        for h in truth["hidden"].as_array().unwrap() {
            assert!(!header.split(',').any(|c| c == h.as_str().unwrap()), "{name}: hidden column in {header}");
        }
    }
}

#[test]
fn generate_is_bit_reproducible_and_handles_empty() {
    let a = Scenario::generate("iv-linear", 500, 11);
    let b = Scenario::generate("iv-linear", 500, 11);
    let c = Scenario::generate("iv-linear", 500, 12);
    assert_eq!(fs::read(a.csv()).unwrap(), fs::read(b.csv()).unwrap());
    assert_ne!(fs::read(a.csv()).unwrap(), fs::read(c.csv()).unwrap());
    let empty = Scenario::generate("simpson-reversal", 0, 1);
    assert_eq!(fs::read_to_string(empty.csv()).unwrap(), "Z,T,Y\n");
    let r = run(&["generate", "no-such-scenario", "--n", "5", "--seed", "1", "--out", "x.csv"]);
    assert_eq!(code(&r), 2);
}

#[test]
fn simpson_generator_reverses_sign() {
    let sc = Scenario::generate("simpson-reversal", 20_000, 5);
    let d = sc.csv();
    let naive = json("estimate", &["estimate", "--data", &d, "--method", "rct", "--y", "Y", "--t", "T"]);
    let strat = json("estimate", &["estimate", "--data", &d, "--method", "stratified", "--y", "Y", "--t", "T", "--z", "Z"]);
    assert!(num(&naive["ate"]) < 0.0, "{naive}");
    for (_, v) in strat["cate"].as_object().unwrap() {
        assert!(num(v) > 0.0, "{strat}");
    }
}

#[test]
fn gene_knockouts_via_intervene() {
    let sc = Scenario::generate("genes-confounded", 10, 1);
    let model = sc.model();
    let mean = |set: &str| {
        let args = ["intervene", "--model", &model, "--set", set, "--n", "20000", "--seed", "3", "--target", "P"];
        num(&json("intervene", &args)["mean"])
    };
    // Setting B leaves P at its observational mean of 3.
    let untouched = mean("B=0");
    let knocked = mean("A=0");
    assert!((untouched - 3.0).abs() < 0.05, "{untouched}");
    assert!((knocked - untouched + 3.0).abs() < 0.1, "{knocked}");
}

#[test]
fn discover_collider_and_anm() {
    let sc = Scenario::generate("collider", 2000, 4);
    let report = json("discover-constraint", &["discover", "--data", &sc.csv(), "--method", "pc"]);
    assert_eq!(report["cpdag"], sc.truth()["cpdag"]);
    let sgs = json("discover-constraint", &["discover", "--data", &sc.csv(), "--method", "sgs"]);
    assert_eq!(sgs["cpdag"], report["cpdag"]);
    let score = json(
        "discover-score",
        &["discover", "--data", &sc.csv(), "--method", "score", "--search", "exhaustive", "--score-model", "linear-gaussian"],
    );
    assert_eq!(score["cpdag"], report["cpdag"]);

    let anm = Scenario::generate("anm-nonlinear", 500, 2);
    let v = json("discover-anm", &["discover", "--data", &anm.csv(), "--method", "anm", "--seed", "1", "--perms", "200"]);
    assert_eq!(v["direction"], "forward");
}

#[test]
fn discover_rejects_empty_csv() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    assert_eq!(code(&run(&["discover", "--data", &s(&empty), "--method", "pc"])), 2);
    fs::write(&empty, "A,B\n").unwrap();
    assert_eq!(code(&run(&["discover", "--data", &s(&empty), "--method", "pc"])), 2);
    fs::write(&empty, "A,B\n1,x\n").unwrap();
    let r = run(&["discover", "--data", &s(&empty), "--method", "pc"]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("line 2"), "{}", stderr(&r));
}

#[test]
fn estimate_instrument_and_front_door() {
    let iv = Scenario::generate("iv-linear", 20_000, 6);
    let v = json("estimate", &["estimate", "--data", &iv.csv(), "--method", "2sls", "--y", "Y", "--t", "T", "--instrument", "I"]);
    assert!((num(&v["ate"]) - 2.0).abs() < 0.05, "{v}");
    let r = run(&["estimate", "--data", &iv.csv(), "--method", "2sls", "--y", "Y", "--t", "T"]);
    assert_eq!(code(&r), 2);
    let err = stderr(&r);
    assert!(err.contains("--instrument") && err.contains("Usage:"), "{err}");

    let fd = Scenario::generate("frontdoor", 50_000, 7);
    let v = json("estimate", &["estimate", "--data", &fd.csv(), "--method", "front-door", "--y", "Y", "--t", "T", "--mediator", "M"]);
    assert!((num(&v["ate"]) - num(&fd.truth()["ate"])).abs() < 0.05, "{v}");
}

#[test]
fn estimator_sweep_on_confounded_generator() {
    let sc = Scenario::generate("confounded-linear", 10_000, 8);
    let d = sc.csv();
    let base = ["estimate", "--data", d.as_str(), "--y", "Y", "--t", "T"];
    let with = |extra: &[&str]| {
        let args: Vec<&str> = base.iter().copied().chain(extra.iter().copied()).collect();
        num(&json("estimate", &args)["ate"])
    };
    for extra in [
        &["--method", "regression", "--z", "Z"][..],
        &["--method", "matching", "--z", "Z"],
        &["--method", "stratified", "--z", "W"],
        &["--method", "ipw", "--z", "W"],
    ] {
        let ate = with(extra);
        assert!((ate - 1.0).abs() < 0.05, "{extra:?}: {ate}");
    }
    let naive = with(&["--method", "rct"]);
    assert!((naive - num(&sc.truth()["naive"])).abs() < 0.05, "{naive}");
}

#[test]
fn precondition_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.csv");
    fs::write(&p, "Z,T,Y\n0,0,1\n0,0,2\n1,1,3\n1,1,4\n").unwrap();
    let r = run(&["estimate", "--data", &s(&p), "--method", "stratified", "--y", "Y", "--t", "T", "--z", "Z"]);
    assert_eq!(code(&r), 3, "{}", stderr(&r));
    fs::write(&p, "I,T,Y\n0,0,1\n1,0,2\n0,1,3\n1,1,4\n0,0,1\n1,1,4\n").unwrap();
    let r = run(&["estimate", "--data", &s(&p), "--method", "2sls", "--y", "Y", "--t", "T", "--instrument", "I"]);
    assert_eq!(code(&r), 3, "{}", stderr(&r));
    assert!(stderr(&r).contains("weak instrument"), "{}", stderr(&r));
    let r = run(&["estimate", "--data", &s(&p), "--method", "rct", "--y", "Y", "--t", "I"]);
    assert_eq!(code(&r), 0);
}

#[test]
fn half_sibling_recovers_signal() {
    let sc = Scenario::generate("halfsibling", 2000, 9);
    let sibs = (1..=10).map(|j| format!("X{j}")).collect::<Vec<_>>().join(",");
    let v = json(
        "half-sibling",
        &["estimate", "--data", &sc.csv(), "--method", "half-sibling", "--y", "Y", "--siblings", &sibs],
    );
    let signal: Vec<f64> = serde_json::from_value(v["signal"].clone()).unwrap();
    let text = fs::read_to_string(sc.csv()).unwrap();
    let truth: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(signal.len(), truth.len());
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ms, mt) = (mean(&signal), mean(&truth));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in signal.iter().zip(&truth) {
        sxy += (a - ms) * (b - mt);
        sxx += (a - ms) * (a - ms);
        syy += (b - mt) * (b - mt);
    }
    assert!(sxy / (sxx * syy).sqrt() >= 0.95);
}

#[test]
fn kernel_and_ci_commands() {
    let col = Scenario::generate("collider", 1000, 10);
    let m = json("test-ci", &["test-ci", "--data", &col.csv(), "--a", "X", "--b", "Z"]);
    assert_eq!(m["independent"], true);
    let c = json("test-ci", &["test-ci", "--data", &col.csv(), "--a", "X", "--b", "Z", "--z", "Y"]);
    assert_eq!(c["independent"], false);
    let r = run(&["test-ci", "--data", &col.csv(), "--a", "X", "--b", "Z", "--method", "kernel-residual"]);
    assert_eq!(code(&r), 2);

    let anm = Scenario::generate("anm-nonlinear", 300, 11);
    let h = json("hsic", &["hsic", "--data", &anm.csv(), "--x", "X", "--y", "Y", "--perms", "100", "--seed", "1"]);
    assert_eq!(h["independent"], false);

    let other = Scenario::generate("anm-nonlinear", 300, 12);
    let same = json("mmd", &["mmd", "--first", &anm.csv(), "--second", &other.csv(), "--perms", "100", "--seed", "1"]);
    assert!(num(&same["p_value"]) > 0.01, "{same}");
    let diff = json(
        "mmd",
        &["mmd", "--first", &anm.csv(), "--second", &col.csv(), "--columns", "X", "--perms", "100", "--seed", "1"],
    );
    assert!(num(&diff["p_value"]) < 0.05, "{diff}");
}

#[test]
fn vc_bound_values_and_errors() {
    let v = json("vc-bound", &["vc-bound", "--r-emp", "0.1", "--h", "10", "--m", "1000", "--delta", "0.05"]);
    let expected = 0.1 + ((10.0 * ((200.0f64).ln() + 1.0) + (80.0f64).ln()) / 1000.0).sqrt();
    assert!((num(&v["bound"]) - expected).abs() < 1e-12);
    assert_eq!(code(&run(&["vc-bound", "--r-emp", "0.1", "--h", "10", "--m", "5", "--delta", "0.05"])), 2);
}

fn file_bytes(args: &[&str], out: &Path) -> Vec<u8> {
    let mut full: Vec<&str> = args.to_vec();
    let o = s(out);
    full.extend(["--out", &o]);
    let r = run(&full);
    assert_eq!(code(&r), 0, "{args:?}: {}", stderr(&r));
    fs::read(out).unwrap()
}

#[test]
fn seeded_outputs_are_byte_identical() {
    let sc = Scenario::generate("confounded-linear", 800, 13);
    let anm = Scenario::generate("anm-nonlinear", 200, 14);
    let dir = tempfile::tempdir().unwrap();
    let (d, a) = (sc.csv(), anm.csv());
    let cases: Vec<Vec<&str>> = vec![
        vec!["simulate", "--model", "MODEL", "--n", "100", "--seed", "5"],
        vec!["estimate", "--data", &d, "--method", "ipw", "--y", "Y", "--t", "T", "--z", "W", "--bootstrap", "20", "--seed", "3"],
        vec!["estimate", "--data", &d, "--method", "matching", "--y", "Y", "--t", "T", "--z", "Z"],
        vec!["discover", "--data", &a, "--method", "anm", "--seed", "2", "--perms", "50"],
        vec!["hsic", "--data", &a, "--x", "X", "--y", "Y", "--perms", "50", "--seed", "4"],
        vec!["mmd", "--first", &a, "--second", &d, "--columns", "Y", "--perms", "50", "--seed", "4"],
        vec!["test-ci", "--data", &d, "--a", "T", "--b", "Y", "--z", "Z", "--method", "kernel-residual", "--perms", "50", "--seed", "1"],
    ];
    let model = fixture("example3.json");
    for (i, case) in cases.iter().enumerate() {
        let args: Vec<&str> = case.iter().map(|&x| if x == "MODEL" { model.as_str() } else { x }).collect();
        let first = file_bytes(&args, &dir.path().join(format!("{i}a")));
        let second = file_bytes(&args, &dir.path().join(format!("{i}b")));
        assert_eq!(first, second, "{args:?}");
        assert!(!first.is_empty());
    }
}

#[test]
fn thread_count_does_not_change_output() {
    let sc = Scenario::generate("confounded-linear", 2000, 15);
    let d = sc.csv();
    let args = ["estimate", "--data", &d, "--method", "ipw", "--y", "Y", "--t", "T", "--z", "W", "--bootstrap", "30", "--seed", "3"];
    let with_threads = |t: &str| {
        let out = bin().args(args).env("CAUSELAB_THREADS", t).output().unwrap();
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        out.stdout
    };
    assert_eq!(with_threads("1"), with_threads("4"));
    let bad = bin().args(["count-dags", "3"]).env("CAUSELAB_THREADS", "zero").output().unwrap();
    assert_eq!(code(&bad), 2);
}

#[test]
fn unwritable_output_exits_1_without_partial_file() {
    let dir = tempfile::tempdir().unwrap();
    let target: PathBuf = dir.path().join("missing").join("out.json");
    let r = run(&["count-dags", "4", "--out", &s(&target)]);
    assert_eq!(code(&r), 1);
    assert!(!target.exists());
    let ok = dir.path().join("out.json");
    assert_eq!(code(&run(&["count-dags", "4", "--out", &s(&ok)])), 0);
    let entries: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(entries, vec![std::ffi::OsString::from("out.json")]);
}
