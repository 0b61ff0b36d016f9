//! Counterfactuals by abduction, action and prediction.
//!
//! Abduction conditions the joint noise distribution on the evidence.
//! Finite noise terms are enumerated exactly. A continuous noise term must
//! belong to an observed variable whose mechanism can be solved for its noise
//! given the parents, which turns its posterior into a point mass; continuous
//! terms that influence neither the evidence nor the target are left at an
//! arbitrary support point. Anything else is not abducible.

use std::collections::BTreeMap;

use serde::Serialize;

use super::expr::values_match;
use super::{Intervention, Scm};
use crate::error::{Error, Result};
use crate::graph::NodeSet;

const MAX_BRANCHES: usize = 1 << 20;

/// Finite distribution over counterfactual target values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterfactualDist {
    /// `(value, probability)` sorted by value.
    pub atoms: Vec<(f64, f64)>,
}

impl CounterfactualDist {
    fn from_weighted(mut pts: Vec<(f64, f64)>) -> Self {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pts.iter().map(|p| p.1).sum();
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        for (v, w) in pts {
            match atoms.last_mut() {
                Some(last) if values_match(last.0, v) => last.1 += w / total,
                _ => atoms.push((v, w / total)),
            }
        }
        CounterfactualDist { atoms }
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|(v, p)| v * p).sum()
    }

    /// The value when the distribution is a single point.
    pub fn point(&self) -> Option<f64> {
        match self.atoms.as_slice() {
            [(v, _)] => Some(*v),
            _ => None,
        }
    }

    pub fn prob(&self, value: f64) -> f64 {
        self.atoms.iter().filter(|(v, _)| values_match(*v, value)).map(|a| a.1).sum()
    }
}

impl Scm {
    /// Distribution of `target` in the world where `iv` had been applied,
    /// given that `evidence` was observed in the actual world.
    pub fn counterfactual(
        &self,
        evidence: &BTreeMap<String, f64>,
        iv: &Intervention,
        target: &str,
    ) -> Result<CounterfactualDist> {
        let y = self.index_of(target)?;
        let n = self.n_vars();
        let mut observed: Vec<Option<f64>> = vec![None; n];
        for (name, &v) in evidence {
            observed[self.index_of(name)?] = Some(v);
        }
        let acted = self.intervene(iv)?;

        let g = self.induced_graph();
        let mut sinks: Vec<usize> = (0..n).filter(|&i| observed[i].is_some()).collect();
        sinks.push(y);
        let relevant = g.ancestors(&NodeSet::from_iter(sinks));

        let atoms: Vec<Option<Vec<(f64, f64)>>> = self.vars.iter().map(|v| v.noise.atoms()).collect();
        for i in 0..n {
            if atoms[i].is_none() && observed[i].is_none() && relevant.contains(i) {
                return Err(Error::NonAbducible(self.vars[i].name.clone()));
            }
        }
        let finite: Vec<usize> = (0..n).filter(|&i| atoms[i].is_some()).collect();
        let mut branches: usize = 1;
        for &i in &finite {
            branches = branches.saturating_mul(atoms[i].as_ref().unwrap().len());
        }
        if branches > MAX_BRANCHES {
            return Err(Error::LimitExceeded {
                what: "noise configurations",
                size: branches,
                limit: MAX_BRANCHES,
            });
        }

        let mut results = Vec::new();
        let mut digits = vec![0usize; finite.len()];
        let mut u = vec![0.0; n];
        let mut vals = vec![0.0; n];
        for _ in 0..branches {
            let mut weight = 1.0;
            for (k, &i) in finite.iter().enumerate() {
                let (a, p) = atoms[i].as_ref().unwrap()[digits[k]];
                u[i] = a;
                weight *= p;
            }
            if weight > 0.0 {
                weight *= self.abduce_branch(&observed, &atoms, &mut u, &mut vals)?;
            }
            if weight > 0.0 {
                results.push((acted.evaluate(&u)?[y], weight));
            }
            for (k, &i) in finite.iter().enumerate() {
                digits[k] += 1;
                if digits[k] < atoms[i].as_ref().unwrap().len() {
                    break;
                }
                digits[k] = 0;
            }
        }
        if results.is_empty() {
            return Err(Error::InconsistentEvidence(
                "the evidence has probability zero under the model".into(),
            ));
        }
        Ok(CounterfactualDist::from_weighted(results))
    }

    /// Fills the continuous noise terms of one branch. Returns the density
    /// factor of the branch, zero when it contradicts the evidence.
    fn abduce_branch(
        &self,
        observed: &[Option<f64>],
        atoms: &[Option<Vec<(f64, f64)>>],
        u: &mut [f64],
        vals: &mut [f64],
    ) -> Result<f64> {
        let mut weight = 1.0;
        for &i in self.order() {
            let mech = self.compiled(i);
            if atoms[i].is_none() {
                let noise = &self.vars[i].noise;
                match observed[i] {
                    Some(x) => {
                        let solve = |t: f64| mech.invert_noise(vals, t);
                        let ui = solve(x).ok_or_else(|| Error::NonAbducible(self.vars[i].name.clone()))?;
                        let h = 1e-6 * (1.0 + x.abs());
                        let jac = match (solve(x + h), solve(x - h)) {
                            (Some(a), Some(b)) => (a - b).abs() / (2.0 * h),
                            (Some(a), None) => (a - ui).abs() / h,
                            (None, Some(b)) => (ui - b).abs() / h,
                            (None, None) => 1.0,
                        };
                        u[i] = ui;
                        weight *= noise.density(ui) * jac;
                    }
                    None => u[i] = noise.representative(),
                }
            }
            vals[i] = mech.eval_slice(vals, u[i])?;
            if let Some(x) = observed[i] {
                if !values_match(vals[i], x) {
                    return Ok(0.0);
                }
            }
            if weight == 0.0 {
                return Ok(0.0);
            }
        }
        Ok(weight)
    }
}
