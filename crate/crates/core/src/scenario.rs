//! Synthetic data generators with known ground truth.
//!
//! Each scenario is an [`Scm`] plus the quantities it was built to exhibit.
//! Hidden variables are sampled but dropped from the emitted dataset.

use std::f64::consts::PI;

use serde_json::{json, Value};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::cpdag_of;
use crate::scm::{Expr, NoiseSpec, Scm, Variable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    GenesConfounded,
    SimpsonReversal,
    FaithfulnessViolation,
    Frontdoor,
    IvLinear,
    Halfsibling,
    AnmNonlinear,
    Collider,
    ConfoundedLinear,
}

/// Number of sibling series in the half-sibling scenario.
pub const SIBLINGS: usize = 10;

fn root(name: &str, noise: NoiseSpec) -> Variable {
    Variable::new(name, &[], Expr::noise(), noise)
}

fn v(name: &str) -> Expr {
    Expr::var(name)
}

fn c(x: f64) -> Expr {
    Expr::c(x)
}

/// Binary variable equal to 1 with probability `p` (an expression in the
/// parents valued in `[0, 1]`).
fn bernoulli(name: &str, parents: &[&str], p: Expr) -> Variable {
    Variable::new(name, parents, (p - Expr::noise()).ge(0.0), NoiseSpec::uniform(0.0, 1.0))
        .with_domain(vec![0.0, 1.0])
}

fn build(vars: Vec<Variable>) -> Scm {
    Scm::new(vars).expect("scenario models are well formed")
}

/// `X1 := U1`, `X2 := alpha X1 + U2`, `X3 := beta X1 + gamma X2 + U3` with
/// standard normal noise.
pub fn faithfulness_scm(alpha: f64, beta: f64, gamma: f64) -> Scm {
    build(vec![
        root("X1", NoiseSpec::standard_normal()),
        Variable::new("X2", &["X1"], c(alpha) * v("X1") + Expr::noise(), NoiseSpec::standard_normal()),
        Variable::new(
            "X3",
            &["X1", "X2"],
            c(beta) * v("X1") + c(gamma) * v("X2") + Expr::noise(),
            NoiseSpec::standard_normal(),
        ),
    ])
}

/// `X ~ N(0, 1)`, `Y := X + U` with `U ~ N(0, 1)`.
pub fn linear_gaussian_pair() -> Scm {
    build(vec![
        root("X", NoiseSpec::standard_normal()),
        Variable::new("Y", &["X"], v("X") + Expr::noise(), NoiseSpec::standard_normal()),
    ])
}

/// Target `Y = S + f(Q)` observed next to siblings `X_j = c_j Q + noise`;
/// `f` is `2 Q` or `2 tanh(2 Q)`.
pub fn halfsibling_scm(nonlinear: bool) -> Scm {
    let mut vars = vec![root("Q", NoiseSpec::standard_normal()), root("S", NoiseSpec::standard_normal())];
    let f = if nonlinear {
        c(2.0) * (c(2.0) * v("Q")).tanh()
    } else {
        c(2.0) * v("Q")
    };
    vars.push(Variable::new("Y", &["S", "Q"], v("S") + f + Expr::noise(), NoiseSpec::dirac(0.0)));
    for j in 1..=SIBLINGS {
        let coef = 0.5 + 0.1 * j as f64;
        vars.push(Variable::new(
            &format!("X{j}"),
            &["Q"],
            c(coef) * v("Q") + Expr::noise(),
            NoiseSpec::gaussian(0.0, 0.01),
        ));
    }
    build(vars)
}

impl Scenario {
    pub const ALL: [Scenario; 9] = [
        Scenario::GenesConfounded,
        Scenario::SimpsonReversal,
        Scenario::FaithfulnessViolation,
        Scenario::Frontdoor,
        Scenario::IvLinear,
        Scenario::Halfsibling,
        Scenario::AnmNonlinear,
        Scenario::Collider,
        Scenario::ConfoundedLinear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::GenesConfounded => "genes-confounded",
            Scenario::SimpsonReversal => "simpson-reversal",
            Scenario::FaithfulnessViolation => "faithfulness-violation",
            Scenario::Frontdoor => "frontdoor",
            Scenario::IvLinear => "iv-linear",
            Scenario::Halfsibling => "halfsibling",
            Scenario::AnmNonlinear => "anm-nonlinear",
            Scenario::Collider => "collider",
            Scenario::ConfoundedLinear => "confounded-linear",
        }
    }

    pub fn from_name(name: &str) -> Result<Scenario> {
        Scenario::ALL.into_iter().find(|s| s.name() == name).ok_or_else(|| {
            let known: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
            Error::InvalidArgument(format!("unknown scenario `{name}` (known: {})", known.join(", ")))
        })
    }

    pub fn scm(self) -> Scm {
        match self {
            Scenario::GenesConfounded => build(vec![
                root("C", NoiseSpec::gaussian(2.0, 1.0)),
                Variable::new("A", &["C"], c(1.0) + v("C") + Expr::noise(), NoiseSpec::standard_normal()),
                Variable::new("B", &["C"], c(1.0) + v("C") + Expr::noise(), NoiseSpec::standard_normal()),
                Variable::new("P", &["A"], v("A") + Expr::noise(), NoiseSpec::standard_normal()),
            ]),
            Scenario::SimpsonReversal => build(vec![
                bernoulli("Z", &[], c(0.5)),
                bernoulli("T", &["Z"], c(0.1) + c(0.8) * v("Z")),
                bernoulli("Y", &["T", "Z"], c(0.5) + c(0.1) * v("T") - c(0.4) * v("Z")),
            ]),
            Scenario::FaithfulnessViolation => faithfulness_scm(1.0, -1.0, 1.0),
            Scenario::Frontdoor => build(vec![
                bernoulli("H", &[], c(0.5)),
                bernoulli("T", &["H"], c(0.2) + c(0.6) * v("H")),
                bernoulli("M", &["T"], c(0.1) + c(0.7) * v("T")),
                bernoulli("Y", &["M", "H"], c(0.1) + c(0.5) * v("M") + c(0.3) * v("H")),
            ]),
            Scenario::IvLinear => build(vec![
                root("I", NoiseSpec::standard_normal()),
                root("H", NoiseSpec::standard_normal()),
                Variable::new("T", &["I", "H"], v("I") + v("H") + Expr::noise(), NoiseSpec::standard_normal()),
                Variable::new("Y", &["H", "T"], v("H") + c(2.0) * v("T") + Expr::noise(), NoiseSpec::standard_normal()),
            ]),
            Scenario::Halfsibling => halfsibling_scm(false),
            Scenario::AnmNonlinear => build(vec![
                root("X", NoiseSpec::uniform(-1.0, 1.0)),
                Variable::new("Y", &["X"], v("X").cube() + v("X") + Expr::noise(), NoiseSpec::uniform(-0.2, 0.2)),
            ]),
            Scenario::Collider => build(vec![
                root("X", NoiseSpec::standard_normal()),
                Variable::new("Y", &["X", "Z"], v("X") + v("Z") + Expr::noise(), NoiseSpec::standard_normal()),
                root("Z", NoiseSpec::standard_normal()),
            ]),
            Scenario::ConfoundedLinear => build(vec![
                root("Z", NoiseSpec::gaussian(0.0, 0.09)),
                Variable::new("W", &["Z"], v("Z").ge(0.0) + Expr::noise(), NoiseSpec::dirac(0.0))
                    .with_domain(vec![0.0, 1.0]),
                bernoulli("T", &["W"], c(0.2) + c(0.6) * v("W")),
                Variable::new(
                    "Y",
                    &["T", "Z"],
                    v("T") + c(2.0) * v("Z") + Expr::noise(),
                    NoiseSpec::gaussian(0.0, 0.25),
                ),
            ]),
        }
    }

    /// Variables sampled but withheld from the dataset.
    pub fn hidden(self) -> &'static [&'static str] {
        match self {
            Scenario::Frontdoor | Scenario::IvLinear => &["H"],
            Scenario::Halfsibling => &["Q"],
            _ => &[],
        }
    }

    /// Quantities the generator was constructed to exhibit.
    pub fn ground_truth(self) -> Value {
        let scm = self.scm();
        let graph = serde_json::to_value(scm.induced_graph().to_json_value()).expect("graph json");
        let mut truth = match self {
            Scenario::GenesConfounded => json!({
                "knockout_shift": {"A": -3.0, "B": 0.0},
                "phenotype": "P",
            }),
            Scenario::SimpsonReversal => json!({
                "ate": 0.1,
                "naive": 0.1 - 0.4 * 0.8,
                "treatment": "T", "outcome": "Y", "adjustment": ["Z"],
            }),
            Scenario::FaithfulnessViolation => json!({
                "alpha": 1.0, "beta": -1.0, "gamma": 1.0,
                "unfaithful_independence": ["X1", "X3"],
            }),
            Scenario::Frontdoor => json!({
                "ate": 0.5 * 0.7,
                "treatment": "T", "mediator": "M", "outcome": "Y",
            }),
            Scenario::IvLinear => json!({
                "ate": 2.0,
                "naive": 7.0 / 3.0,
                "treatment": "T", "instrument": "I", "outcome": "Y",
            }),
            Scenario::Halfsibling => json!({
                "signal": "S", "target": "Y",
                "siblings": (1..=SIBLINGS).map(|j| format!("X{j}")).collect::<Vec<_>>(),
            }),
            Scenario::AnmNonlinear => json!({"direction": "forward", "cause": "X", "effect": "Y"}),
            Scenario::Collider => json!({
                "cpdag": serde_json::to_value(cpdag_of(scm.induced_graph()).to_json_value()).expect("cpdag json"),
            }),
            Scenario::ConfoundedLinear => json!({
                "ate": 1.0,
                "naive": 1.0 + 4.8 * 0.3 / (2.0 * PI).sqrt(),
                "treatment": "T", "outcome": "Y", "adjustment": ["Z"],
                "propensity": {"W=0": 0.2, "W=1": 0.8},
            }),
        };
        let obj = truth.as_object_mut().expect("object");
        obj.insert("scenario".into(), json!(self.name()));
        obj.insert("graph".into(), graph);
        obj.insert("hidden".into(), json!(self.hidden()));
        truth
    }

    /// Samples `n` rows and returns the observed columns with the ground
    /// truth (including `n` and `seed`).
    pub fn generate(self, n: usize, seed: u64) -> Result<(Dataset, Value)> {
        let full = self.scm().sample(n, seed)?;
        let hidden = self.hidden();
        let keep: Vec<&str> = full.names().into_iter().filter(|c| !hidden.contains(c)).collect();
        let data = full.select(&keep)?;
        let mut truth = self.ground_truth();
        let obj = truth.as_object_mut().expect("object");
        obj.insert("n".into(), json!(n));
        obj.insert("seed".into(), json!(seed));
        Ok((data, truth))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::mean;
    use crate::scm::Intervention;

    #[test]
    fn names_round_trip() {
        for s in Scenario::ALL {
            assert_eq!(Scenario::from_name(s.name()).unwrap(), s);
        }
        assert!(Scenario::from_name("nope").is_err());
    }

    #[test]
    fn generation_is_reproducible_and_hides_latents() {
        for s in Scenario::ALL {
            let (a, truth) = s.generate(50, 7).unwrap();
            let (b, _) = s.generate(50, 7).unwrap();
            assert_eq!(a, b);
            for h in s.hidden() {
                assert!(a.index_of(h).is_err());
            }
            assert_eq!(truth["scenario"], s.name());
            let (empty, _) = s.generate(0, 7).unwrap();
            assert_eq!(empty.n_rows(), 0);
        }
    }

    #[test]
    fn simpson_reverses_sign() {
        let (d, truth) = Scenario::SimpsonReversal.generate(20_000, 1).unwrap();
        let (t, y, z) = (d.values("T").unwrap(), d.values("Y").unwrap(), d.values("Z").unwrap());
        let contrast = |keep: &dyn Fn(usize) -> bool| {
            let pick = |arm: f64| {
                let v: Vec<f64> = (0..d.n_rows()).filter(|&r| keep(r) && t[r] == arm).map(|r| y[r]).collect();
                mean(&v)
            };
            pick(1.0) - pick(0.0)
        };
        let naive = contrast(&|_| true);
        assert!(naive < 0.0 && (naive - truth["naive"].as_f64().unwrap()).abs() < 0.03);
        for stratum in [0.0, 1.0] {
            assert!(contrast(&|r| z[r] == stratum) > 0.0);
        }
    }

    #[test]
    fn gene_knockouts() {
        let scm = Scenario::GenesConfounded.scm();
        let base = scm.interventional_mean(&Intervention::new(), "P", 20_000, 1).unwrap().mean;
        let ka = Intervention::new().set("A", 0.0);
        let kb = Intervention::new().set("B", 0.0);
        let a = scm.interventional_mean(&ka, "P", 20_000, 1).unwrap().mean;
        let b = scm.interventional_mean(&kb, "P", 20_000, 1).unwrap().mean;
        assert!((a - base + 3.0).abs() < 0.1, "{a} {base}");
        assert!((b - base).abs() < 0.1);
    }

    #[test]
    fn confounded_flag_is_sign_of_z() {
        let (d, _) = Scenario::ConfoundedLinear.generate(200, 2).unwrap();
        let (z, w) = (d.values("Z").unwrap(), d.values("W").unwrap());
        assert!((0..200).all(|r| w[r] == f64::from(u8::from(z[r] >= 0.0))));
        assert!(d.column("W").unwrap().is_discrete());
    }
}
