//! Treatment-effect estimators for observational data.
//!
//! Binary treatments are columns with values in `{0, 1}`. Every estimator
//! returns an [`EffectEstimate`] whose diagnostics include the group sizes
//! `m0`, `m1`.

mod hidden;
mod propensity;

pub use hidden::{ate_front_door, ate_iv_2sls, ate_rdd, half_sibling_regress, WEAK_INSTRUMENT_T};
pub use propensity::{ate_ipw, fit_propensity, Propensity, PropensityModel, DEFAULT_CLIP};

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel_stats::{Kernel, KernelRidge};
use crate::linalg::{mean, standardize, variance, Ols};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regressor {
    Linear,
    /// Gaussian kernel with median-heuristic bandwidth on standardized inputs.
    KernelRidge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectEstimate {
    pub estimator: String,
    pub ate: f64,
    pub stderr: Option<f64>,
    /// Per covariate pattern, e.g. `"Z=1"`.
    pub cate: Option<BTreeMap<String, f64>>,
    pub diagnostics: BTreeMap<String, Value>,
    pub seed: Option<u64>,
}

impl EffectEstimate {
    fn new(estimator: &str, ate: f64) -> Self {
        EffectEstimate {
            estimator: estimator.into(),
            ate,
            stderr: None,
            cate: None,
            diagnostics: BTreeMap::new(),
            seed: None,
        }
    }

    fn diag(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.diagnostics.insert(key.into(), v.into());
        self
    }

    pub fn to_json_value(&self) -> Value {
        let mut v = json!({
            "estimator": self.estimator,
            "ate": self.ate,
            "diagnostics": self.diagnostics,
        });
        let obj = v.as_object_mut().expect("object");
        if let Some(s) = self.stderr {
            obj.insert("stderr".into(), json!(s));
        }
        if let Some(c) = &self.cate {
            obj.insert("cate".into(), json!(c));
        }
        if let Some(s) = self.seed {
            obj.insert("seed".into(), json!(s));
        }
        v
    }

    pub fn to_json(&self) -> String {
        crate::json::to_string(&self.to_json_value())
    }
}

/// Treated and control row indices.
pub(crate) struct Groups {
    pub treated: Vec<usize>,
    pub control: Vec<usize>,
}

pub(crate) fn groups(t: &[f64]) -> Result<Groups> {
    let (treated, control): (Vec<usize>, Vec<usize>) = (0..t.len()).partition(|&r| t[r] == 1.0);
    if treated.is_empty() || control.is_empty() {
        return Err(Error::EmptyGroup(format!(
            "{} treated and {} control units",
            treated.len(),
            control.len()
        )));
    }
    Ok(Groups { treated, control })
}

fn mean_at(y: &[f64], rows: &[usize]) -> f64 {
    rows.iter().map(|&r| y[r]).sum::<f64>() / rows.len() as f64
}

fn var_at(y: &[f64], rows: &[usize]) -> f64 {
    if rows.len() < 2 {
        return 0.0;
    }
    let v: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
    variance(&v)
}

fn standardized_columns(data: &Dataset, z: &[&str]) -> Result<Vec<Vec<f64>>> {
    z.iter().map(|c| data.values(c).map(standardize)).collect()
}

fn pattern_key(data: &Dataset, z: &[&str], r: usize) -> Result<String> {
    let parts: Vec<String> = z
        .iter()
        .map(|c| Ok(format!("{c}={}", crate::data::format_number(data.values(c)?[r]))))
        .collect::<Result<_>>()?;
    Ok(parts.join(","))
}

/// Difference of group means.
pub fn ate_rct(data: &Dataset, y: &str, t: &str) -> Result<EffectEstimate> {
    let (yv, tv) = (data.values(y)?, data.binary(t)?);
    let g = groups(tv)?;
    let (m1, m0) = (g.treated.len() as f64, g.control.len() as f64);
    let mut est = EffectEstimate::new("rct", mean_at(yv, &g.treated) - mean_at(yv, &g.control))
        .diag("m0", g.control.len())
        .diag("m1", g.treated.len());
    est.stderr = Some((var_at(yv, &g.treated) / m1 + var_at(yv, &g.control) / m0).sqrt());
    Ok(est)
}

fn with_intercept(zs: &[Vec<f64>], rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), zs.len() + 1, |i, c| if c == 0 { 1.0 } else { zs[c - 1][rows[i]] })
}

/// Outcome model fitted on one treatment arm.
enum ArmModel {
    Linear(Ols),
    Kernel(KernelRidge),
    Constant(f64),
}

impl ArmModel {
    fn fit(regressor: Regressor, zs: &[Vec<f64>], y: &[f64], rows: &[usize]) -> Result<ArmModel> {
        let yr: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
        if zs.is_empty() {
            return Ok(ArmModel::Constant(mean(&yr)));
        }
        Ok(match regressor {
            Regressor::Linear => ArmModel::Linear(Ols::fit(&with_intercept(zs, rows), &yr)?),
            Regressor::KernelRidge => {
                let x = DMatrix::from_fn(rows.len(), zs.len(), |i, c| zs[c][rows[i]]);
                ArmModel::Kernel(KernelRidge::fit(Kernel::gaussian_median(&x), &x, &yr, None)?)
            }
        })
    }

    fn predict(&self, zs: &[Vec<f64>], rows: &[usize]) -> Result<Vec<f64>> {
        Ok(match self {
            ArmModel::Constant(c) => vec![*c; rows.len()],
            ArmModel::Linear(fit) => fit.predict(&with_intercept(zs, rows)).iter().copied().collect(),
            ArmModel::Kernel(fit) => fit.predict(&DMatrix::from_fn(rows.len(), zs.len(), |i, c| zs[c][rows[i]]))?,
        })
    }
}

/// Fits the outcome on `z` separately in each arm and imputes every unit's
/// missing potential outcome; the ATE is the mean imputed contrast.
pub fn ate_regression_adjustment(
    data: &Dataset,
    y: &str,
    t: &str,
    z: &[&str],
    regressor: Regressor,
) -> Result<EffectEstimate> {
    let (yv, tv) = (data.values(y)?, data.binary(t)?);
    let g = groups(tv)?;
    let zs = match regressor {
        Regressor::Linear => z.iter().map(|c| data.values(c).map(<[f64]>::to_vec)).collect::<Result<Vec<_>>>()?,
        Regressor::KernelRidge => standardized_columns(data, z)?,
    };
    let f1 = ArmModel::fit(regressor, &zs, yv, &g.treated)?;
    let f0 = ArmModel::fit(regressor, &zs, yv, &g.control)?;
    // Contrasts y_i - f0(z_i) for treated units and f1(z_i) - y_i for controls.
    let mut contrast = vec![0.0; yv.len()];
    for (r, p) in g.treated.iter().zip(f0.predict(&zs, &g.treated)?) {
        contrast[*r] = yv[*r] - p;
    }
    for (r, p) in g.control.iter().zip(f1.predict(&zs, &g.control)?) {
        contrast[*r] = p - yv[*r];
    }
    let n = yv.len() as f64;
    let att = mean_at(&contrast, &g.treated);
    let atc = mean_at(&contrast, &g.control);
    let name = match regressor {
        Regressor::Linear => "regression-adjustment-linear",
        Regressor::KernelRidge => "regression-adjustment-kernel-ridge",
    };
    let mut est = EffectEstimate::new(name, contrast.iter().sum::<f64>() / n)
        .diag("m0", g.control.len())
        .diag("m1", g.treated.len())
        .diag("att", att)
        .diag("atc", atc);
    if !z.is_empty() && z.iter().all(|c| data.column(c).map(|c| c.is_discrete()).unwrap_or(false)) {
        let all: Vec<usize> = (0..yv.len()).collect();
        let (p1, p0) = (f1.predict(&zs, &all)?, f0.predict(&zs, &all)?);
        let mut acc: BTreeMap<String, (f64, f64)> = BTreeMap::new();
        for r in all {
            let e = acc.entry(pattern_key(data, z, r)?).or_insert((0.0, 0.0));
            e.0 += p1[r] - p0[r];
            e.1 += 1.0;
        }
        est.cate = Some(acc.into_iter().map(|(k, (s, c))| (k, s / c)).collect());
    }
    Ok(est)
}

/// One-to-one nearest-neighbour matching on standardized covariates
/// (Euclidean distance, ties to the lowest row index).
pub fn ate_nn_matching(data: &Dataset, y: &str, t: &str, z: &[&str]) -> Result<EffectEstimate> {
    let (yv, tv) = (data.values(y)?, data.binary(t)?);
    let g = groups(tv)?;
    let zs = standardized_columns(data, z)?;
    let dist = |a: usize, b: usize| zs.iter().map(|c| (c[a] - c[b]).powi(2)).sum::<f64>();
    let nearest = |i: usize, pool: &[usize]| -> usize {
        let mut best = (f64::INFINITY, usize::MAX);
        for &j in pool {
            let d = dist(i, j);
            if d < best.0 {
                best = (d, j);
            }
        }
        best.1
    };
    // Collected before summing so the result does not depend on scheduling.
    let treated_diffs: Vec<f64> = g.treated.par_iter().map(|&i| yv[i] - yv[nearest(i, &g.control)]).collect();
    let control_diffs: Vec<f64> = g.control.par_iter().map(|&i| yv[nearest(i, &g.treated)] - yv[i]).collect();
    let (treated_sum, control_sum) = (treated_diffs.iter().sum::<f64>(), control_diffs.iter().sum::<f64>());
    let (m1, m0) = (g.treated.len() as f64, g.control.len() as f64);
    Ok(EffectEstimate::new("nn-matching", (treated_sum + control_sum) / (m1 + m0))
        .diag("m0", g.control.len())
        .diag("m1", g.treated.len())
        .diag("att", treated_sum / m1)
        .diag("atc", control_sum / m0))
}

/// How to form strata.
#[derive(Debug, Clone, PartialEq)]
pub enum Strata {
    /// One stratum per distinct value pattern of these columns.
    Covariates(Vec<String>),
    /// Quantile bins of a fitted propensity score on these covariates.
    PropensityBins { covariates: Vec<String>, bins: usize },
}

/// Stratum-size weighted average of within-stratum mean differences.
/// Strata missing either arm are dropped and reported.
pub fn ate_stratified(data: &Dataset, y: &str, t: &str, strata: &Strata) -> Result<EffectEstimate> {
    let (yv, tv) = (data.values(y)?, data.binary(t)?);
    let g = groups(tv)?;
    let labels: Vec<String> = match strata {
        Strata::Covariates(cols) => {
            let z: Vec<&str> = cols.iter().map(String::as_str).collect();
            if z.is_empty() {
                vec![String::new(); yv.len()]
            } else {
                (0..yv.len()).map(|r| pattern_key(data, &z, r)).collect::<Result<_>>()?
            }
        }
        Strata::PropensityBins { covariates, bins } => {
            if *bins == 0 {
                return Err(Error::InvalidArgument("need at least one propensity bin".into()));
            }
            let z: Vec<&str> = covariates.iter().map(String::as_str).collect();
            let s = fit_propensity(data, t, &z)?.predict(data)?;
            let mut sorted = s.clone();
            sorted.sort_by(f64::total_cmp);
            let cuts: Vec<f64> = (1..*bins).map(|k| sorted[k * sorted.len() / bins]).collect();
            s.iter().map(|v| format!("bin{}", cuts.iter().filter(|&&c| *v >= c).count())).collect()
        }
    };
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (r, l) in labels.iter().enumerate() {
        members.entry(l.as_str()).or_default().push(r);
    }
    let (mut num, mut den, mut dropped, mut kept) = (0.0, 0.0, Vec::new(), 0usize);
    let mut var_num = 0.0;
    let mut cate = BTreeMap::new();
    for (label, rows) in &members {
        let (tr, co): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| tv[r] == 1.0);
        if tr.is_empty() || co.is_empty() {
            dropped.push(label.to_string());
            continue;
        }
        let tau = mean_at(yv, &tr) - mean_at(yv, &co);
        let mk = rows.len() as f64;
        num += mk * tau;
        den += mk;
        var_num += mk * mk * (var_at(yv, &tr) / tr.len() as f64 + var_at(yv, &co) / co.len() as f64);
        kept += 1;
        cate.insert(label.to_string(), tau);
    }
    if kept == 0 {
        return Err(Error::OverlapViolation("every stratum lacks a treated or a control unit".into()));
    }
    let mut est = EffectEstimate::new("stratified", num / den)
        .diag("m0", g.control.len())
        .diag("m1", g.treated.len())
        .diag("strata_used", kept)
        .diag("strata_dropped", json!(dropped));
    est.stderr = Some(var_num.sqrt() / den);
    if let Strata::Covariates(c) = strata {
        if !c.is_empty() {
            est.cate = Some(cate);
        }
    }
    Ok(est)
}

/// Bootstrap standard error of any estimator: `reps` resamples of the rows,
/// replicate `r` drawn from its own random stream.
pub fn bootstrap_stderr(
    data: &Dataset,
    reps: usize,
    seed: u64,
    estimator: impl Fn(&Dataset) -> Result<EffectEstimate> + Sync,
) -> Result<f64> {
    use rand::Rng;
    if reps < 2 {
        return Err(Error::InvalidArgument("bootstrap needs at least two replicates".into()));
    }
    let n = data.n_rows();
    let ates: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(seed, rng::BOOTSTRAP_STREAM + r as u64);
            let rows: Vec<usize> = (0..n).map(|_| g.gen_range(0..n)).collect();
            estimator(&data.take_rows(&rows)).map(|e| e.ate)
        })
        .collect::<Result<_>>()?;
    Ok(variance(&ates).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Column;
    use crate::scenario::Scenario;

    fn toy() -> Dataset {
        Dataset::new(vec![
            Column::binary("T", vec![1.0, 0.0, 1.0, 0.0]).unwrap(),
            Column::real("Y", vec![5.0, 2.0, 5.0, 2.0]).unwrap(),
            Column::real("Z", vec![0.0, 0.0, 1.0, 1.0]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn constant_groups_give_exact_difference() {
        let d = toy();
        assert_eq!(ate_rct(&d, "Y", "T").unwrap().ate, 3.0);
        assert_eq!(ate_nn_matching(&d, "Y", "T", &["Z"]).unwrap().ate, 3.0);
        assert_eq!(ate_stratified(&d, "Y", "T", &Strata::Covariates(vec![])).unwrap().ate, 3.0);
    }

    #[test]
    fn empty_group_is_an_error() {
        let d = toy().filter_rows(|r| r % 2 == 0);
        assert!(matches!(ate_rct(&d, "Y", "T"), Err(Error::EmptyGroup(_))));
        assert!(ate_nn_matching(&d, "Y", "T", &["Z"]).is_err());
    }

    #[test]
    fn confounded_generator_estimators() {
        let (d, truth) = Scenario::ConfoundedLinear.generate(10_000, 11).unwrap();
        let naive = ate_rct(&d, "Y", "T").unwrap().ate;
        assert!((naive - truth["naive"].as_f64().unwrap()).abs() < 0.05, "{naive}");
        let reg = ate_regression_adjustment(&d, "Y", "T", &["Z"], Regressor::Linear).unwrap();
        assert!((reg.ate - 1.0).abs() < 0.05, "{}", reg.ate);
        let nn = ate_nn_matching(&d, "Y", "T", &["Z"]).unwrap();
        assert!((nn.ate - 1.0).abs() < 0.1, "{}", nn.ate);
        let st = ate_stratified(&d, "Y", "T", &Strata::Covariates(vec!["W".into()])).unwrap();
        assert!((st.ate - 1.0).abs() < 0.05, "{}", st.ate);
        assert_eq!(st.diagnostics["strata_used"], 2);
    }

    #[test]
    fn zero_effect_and_simpson() {
        let (d, truth) = Scenario::SimpsonReversal.generate(20_000, 3).unwrap();
        let naive = ate_rct(&d, "Y", "T").unwrap().ate;
        let adj = ate_regression_adjustment(&d, "Y", "T", &["Z"], Regressor::Linear).unwrap();
        assert!(naive < 0.0 && adj.ate > 0.0);
        assert!((adj.ate - truth["ate"].as_f64().unwrap()).abs() < 0.05);
        let cate = adj.cate.unwrap();
        assert_eq!(cate.keys().collect::<Vec<_>>(), ["Z=0", "Z=1"]);
        let zero = d.map_column("Y", |_| 0.0).unwrap();
        let z = ate_regression_adjustment(&zero, "Y", "T", &["Z"], Regressor::Linear).unwrap();
        assert!(z.ate.abs() < 1e-12);
    }

    #[test]
    fn kernel_regressor_on_small_sample() {
        let (d, _) = Scenario::ConfoundedLinear.generate(1500, 4).unwrap();
        let k = ate_regression_adjustment(&d, "Y", "T", &["Z"], Regressor::KernelRidge).unwrap();
        assert!((k.ate - 1.0).abs() < 0.1, "{}", k.ate);
    }

    #[test]
    fn duplicated_rows_do_not_change_matching() {
        let (d, _) = Scenario::ConfoundedLinear.generate(400, 5).unwrap();
        let rows: Vec<usize> = (0..400).chain(0..400).collect();
        let a = ate_nn_matching(&d, "Y", "T", &["Z"]).unwrap().ate;
        let b = ate_nn_matching(&d.take_rows(&rows), "Y", "T", &["Z"]).unwrap().ate;
        assert!((a - b).abs() < 1e-12, "{a} {b}");
    }

    #[test]
    fn stratification_drops_one_armed_strata() {
        let d = Dataset::new(vec![
            Column::binary("T", vec![1.0, 0.0, 1.0, 1.0]).unwrap(),
            Column::real("Y", vec![3.0, 1.0, 9.0, 9.0]).unwrap(),
            Column::binary("Z", vec![0.0, 0.0, 1.0, 1.0]).unwrap(),
        ])
        .unwrap();
        let e = ate_stratified(&d, "Y", "T", &Strata::Covariates(vec!["Z".into()])).unwrap();
        assert_eq!(e.ate, 2.0);
        assert_eq!(e.diagnostics["strata_dropped"], json!(["Z=1"]));
        let only = d.filter_rows(|r| r >= 2).map_column("T", |_| 1.0).unwrap();
        assert!(ate_stratified(&only, "Y", "T", &Strata::Covariates(vec!["Z".into()])).is_err());
    }

    #[test]
    fn bootstrap_is_reproducible() {
        let (d, _) = Scenario::ConfoundedLinear.generate(500, 6).unwrap();
        let f = |x: &Dataset| ate_rct(x, "Y", "T");
        let a = bootstrap_stderr(&d, 50, 1, f).unwrap();
        assert_eq!(a, bootstrap_stderr(&d, 50, 1, f).unwrap());
        let analytic = ate_rct(&d, "Y", "T").unwrap().stderr.unwrap();
        assert!((a / analytic - 1.0).abs() < 0.3);
    }

    #[test]
    fn json_has_required_keys() {
        let e = ate_rct(&toy(), "Y", "T").unwrap();
        let v: Value = serde_json::from_str(&e.to_json()).unwrap();
        assert_eq!(v["estimator"], "rct");
        assert_eq!(v["diagnostics"]["m1"], 2);
    }
}
