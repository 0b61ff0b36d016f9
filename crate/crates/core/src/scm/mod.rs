//! Structural causal models: mechanisms as expression trees plus
//! independent noise terms.
//!
//! Sampling draws all noise first, one ChaCha stream per variable (stream id
//! = variable index), then evaluates mechanisms in topological order. The
//! reduced form consumes exactly the same draws, so both produce identical
//! rows for the same seed.

mod counterfactual;
mod expr;
mod json;
mod noise;

pub use counterfactual::CounterfactualDist;
pub use expr::{Expr, Table, TableInput};
pub(crate) use expr::values_match;
pub use noise::NoiseSpec;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::data::{Column, ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::graph::{Dag, NodeSet};
use crate::rng;
use expr::CExpr;

/// One structural assignment `X := f(PA_X, U_X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub parents: Vec<String>,
    pub expr: Expr,
    pub noise: NoiseSpec,
    /// Finite value set for discrete variables.
    pub domain: Option<Vec<f64>>,
    additive: bool,
}

impl Variable {
    pub fn new(name: &str, parents: &[&str], expr: Expr, noise: NoiseSpec) -> Self {
        let additive = expr.is_additive_in_noise();
        Variable {
            name: name.to_string(),
            parents: parents.iter().map(|p| p.to_string()).collect(),
            expr,
            noise,
            domain: None,
            additive,
        }
    }

    pub fn with_domain(mut self, domain: Vec<f64>) -> Self {
        self.domain = Some(domain);
        self
    }

    /// Overrides the additive-noise flag; validated when the model is built.
    pub fn with_additive_flag(mut self, additive: bool) -> Self {
        self.additive = additive;
        self
    }

    pub fn is_additive(&self) -> bool {
        self.additive
    }

    fn column_kind(&self) -> ColumnKind {
        match &self.domain {
            Some(d) if d.iter().all(|&v| v == 0.0 || v == 1.0) => ColumnKind::Binary,
            Some(d) if d.iter().all(|v| v.fract() == 0.0) => ColumnKind::Categorical,
            _ => ColumnKind::Real,
        }
    }
}

/// Atomic interventions `do(X := x, ...)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Intervention(BTreeMap<String, f64>);

impl Intervention {
    pub fn new() -> Self {
        Intervention(BTreeMap::new())
    }

    pub fn set(mut self, var: &str, value: f64) -> Self {
        self.0.insert(var.to_string(), value);
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn get(&self, var: &str) -> Option<f64> {
        self.0.get(var).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

#[derive(Debug, Clone)]
pub struct Scm {
    vars: Vec<Variable>,
    compiled: Vec<CExpr>,
    graph: Dag,
    order: Vec<usize>,
    index: HashMap<String, usize>,
}

impl PartialEq for Scm {
    fn eq(&self, other: &Self) -> bool {
        self.vars == other.vars
    }
}

impl Scm {
    pub fn new(vars: Vec<Variable>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, v) in vars.iter().enumerate() {
            if index.insert(v.name.clone(), i).is_some() {
                return Err(Error::DuplicateName(v.name.clone()));
            }
        }
        let lookup = |n: &str| index.get(n).copied().ok_or_else(|| Error::UnknownVariable(n.to_string()));
        let mut edges = Vec::new();
        for (i, v) in vars.iter().enumerate() {
            for p in &v.parents {
                edges.push((lookup(p)?, i));
            }
        }
        let graph = Dag::new(vars.iter().map(|v| v.name.clone()), edges)?;

        let mut compiled = Vec::with_capacity(vars.len());
        for v in &vars {
            v.noise.validate().map_err(|e| Error::InvalidArgument(format!("noise of `{}`: {e}", v.name)))?;
            if let Some(r) = v.expr.references().into_iter().find(|r| !v.parents.contains(r)) {
                return Err(Error::InvalidArgument(format!(
                    "mechanism of `{}` references `{r}`, which is not a declared parent",
                    v.name
                )));
            }
            if v.additive && !v.expr.is_additive_in_noise() {
                return Err(Error::InvalidArgument(format!(
                    "`{}` is flagged additive but its mechanism is not g(parents) + noise",
                    v.name
                )));
            }
            if let Some(d) = &v.domain {
                if d.is_empty() || d.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidArgument(format!("`{}` has an empty or non-finite domain", v.name)));
                }
            }
            compiled.push(v.expr.compile(&|n| lookup(n))?);
        }
        let order = graph.topological_order();
        Ok(Scm {
            vars,
            compiled,
            graph,
            order,
            index,
        })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn names(&self) -> &[String] {
        self.graph.names()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index.get(name).copied().ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Graph with an edge from each declared parent to its child.
    pub fn induced_graph(&self) -> &Dag {
        &self.graph
    }

    pub(crate) fn compiled(&self, i: usize) -> &CExpr {
        &self.compiled[i]
    }

    pub(crate) fn order(&self) -> &[usize] {
        &self.order
    }

    /// Noise draws laid out `[variable][row]`.
    pub fn draw_noise(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        (0..self.n_vars())
            .map(|i| {
                let mut r = rng::stream(seed, i as u64);
                (0..n).map(|_| self.vars[i].noise.sample(&mut r)).collect()
            })
            .collect()
    }

    /// Evaluates every variable for one full noise assignment.
    pub fn evaluate(&self, noise: &[f64]) -> Result<Vec<f64>> {
        if noise.len() != self.n_vars() {
            return Err(Error::InvalidArgument(format!(
                "noise row has {} entries, model has {} variables",
                noise.len(),
                self.n_vars()
            )));
        }
        let mut vals = vec![0.0; self.n_vars()];
        for &i in &self.order {
            vals[i] = self.compiled[i].eval_slice(&vals, noise[i])?;
        }
        Ok(vals)
    }

    fn dataset_from_rows(&self, columns: Vec<Vec<f64>>) -> Result<Dataset> {
        let cols = self
            .vars
            .iter()
            .zip(columns)
            .map(|(v, values)| Column::new(v.name.clone(), v.column_kind(), values))
            .collect::<Result<_>>()?;
        Dataset::new(cols)
    }

    /// Ancestral sampling of `n` i.i.d. rows.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        let noise = self.draw_noise(n, seed);
        let p = self.n_vars();
        let mut columns = vec![Vec::with_capacity(n); p];
        let mut row_noise = vec![0.0; p];
        for r in 0..n {
            for i in 0..p {
                row_noise[i] = noise[i][r];
            }
            let vals = self.evaluate(&row_noise)?;
            for i in 0..p {
                columns[i].push(vals[i]);
            }
        }
        self.dataset_from_rows(columns)
    }

    fn eval_reduced(&self, i: usize, noise: &[f64]) -> Result<f64> {
        self.compiled[i].eval(&|p| self.eval_reduced(p, noise), noise[i])
    }

    /// Samples through the reduced form: every variable is computed as a
    /// function of the noise terms alone by recursive substitution.
    pub fn reduced_form_sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        let noise = self.draw_noise(n, seed);
        let p = self.n_vars();
        let mut columns = vec![Vec::with_capacity(n); p];
        let mut row_noise = vec![0.0; p];
        for r in 0..n {
            for i in 0..p {
                row_noise[i] = noise[i][r];
            }
            for (i, col) in columns.iter_mut().enumerate() {
                col.push(self.eval_reduced(i, &row_noise)?);
            }
        }
        self.dataset_from_rows(columns)
    }

    fn check_value(&self, i: usize, value: f64) -> Result<()> {
        if let Some(d) = &self.vars[i].domain {
            if !d.iter().any(|&x| expr::values_match(x, value)) {
                return Err(Error::InvalidArgument(format!(
                    "value {value} outside the domain of `{}`",
                    self.vars[i].name
                )));
            }
        }
        Ok(())
    }

    /// Replaces each targeted mechanism by a constant with no parents.
    pub fn intervene(&self, iv: &Intervention) -> Result<Scm> {
        let mut vars = self.vars.clone();
        for (name, value) in iv.iter() {
            let i = self.index_of(name)?;
            self.check_value(i, value)?;
            let v = &mut vars[i];
            v.parents.clear();
            v.expr = Expr::Const(value);
            v.additive = false;
        }
        Scm::new(vars)
    }

    /// Soft intervention: swaps the noise distribution of one variable.
    pub fn with_noise(&self, var: &str, noise: NoiseSpec) -> Result<Scm> {
        let i = self.index_of(var)?;
        let mut vars = self.vars.clone();
        vars[i].noise = noise;
        Scm::new(vars)
    }

    /// Monte-Carlo estimate of `E[target | do(iv)]`.
    pub fn interventional_mean(&self, iv: &Intervention, target: &str, n: usize, seed: u64) -> Result<MeanEstimate> {
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one sample".into()));
        }
        let data = self.intervene(iv)?.sample(n, seed)?;
        let ys = data.values(target)?;
        Ok(mean_estimate(ys))
    }

    /// Individual treatment effect `Y(1) - Y(0)` with every noise term fixed.
    pub fn ite(&self, noise: &[f64], treatment: &str, target: &str) -> Result<f64> {
        let t = self.index_of(treatment)?;
        let y = self.index_of(target)?;
        match &self.vars[t].domain {
            Some(d) if d.len() == 2 && d.contains(&0.0) && d.contains(&1.0) => {}
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "treatment `{treatment}` must have binary domain {{0, 1}}"
                )))
            }
        }
        let arm = |v: f64| -> Result<f64> {
            let m = self.intervene(&Intervention::new().set(treatment, v))?;
            Ok(m.evaluate(noise)?[y])
        };
        Ok(arm(1.0)? - arm(0.0)?)
    }

    /// Nodes targeted by an intervention, for graph surgery.
    pub fn targets(&self, iv: &Intervention) -> Result<NodeSet> {
        iv.iter().map(|(n, _)| self.index_of(n)).collect()
    }
}

pub(crate) fn mean_estimate(ys: &[f64]) -> MeanEstimate {
    let n = ys.len();
    let mean = ys.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    MeanEstimate {
        mean,
        stderr: (var / n as f64).sqrt(),
        n,
    }
}
