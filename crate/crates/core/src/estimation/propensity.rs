use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{groups, EffectEstimate};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{mean, variance};

/// Default clipping of propensities to `[eps, 1 - eps]`.
pub const DEFAULT_CLIP: f64 = 0.01;

const MAX_ITER: usize = 100;
/// Standardized coefficients beyond this magnitude indicate separation.
const SEPARATION_COEF: f64 = 30.0;

/// Logistic model `s(z) = sigmoid(intercept + coef . z)` on the original
/// covariate scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityModel {
    pub covariates: Vec<String>,
    pub intercept: f64,
    pub coef: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_likelihood(x: &DMatrix<f64>, t: &[f64], beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    eta.iter()
        .zip(t)
        .map(|(&e, &ti)| {
            // log(1 + exp(e)) computed stably.
            let softplus = if e > 0.0 { e + (-e).exp().ln_1p() } else { e.exp().ln_1p() };
            ti * e - softplus
        })
        .sum()
}

impl PropensityModel {
    pub fn predict(&self, data: &Dataset) -> Result<Vec<f64>> {
        let cols: Vec<&[f64]> = self.covariates.iter().map(|c| data.values(c)).collect::<Result<_>>()?;
        Ok((0..data.n_rows())
            .map(|r| sigmoid(self.intercept + cols.iter().zip(&self.coef).map(|(c, b)| c[r] * b).sum::<f64>()))
            .collect())
    }
}

/// Logistic maximum likelihood by Newton steps, halved until the likelihood
/// improves. Covariates are standardized internally.
pub fn fit_propensity(data: &Dataset, t: &str, z: &[&str]) -> Result<PropensityModel> {
    let tv = data.binary(t)?;
    groups(tv)?;
    let m = tv.len();
    let mut centers = Vec::with_capacity(z.len());
    let mut scales = Vec::with_capacity(z.len());
    let mut cols = Vec::with_capacity(z.len());
    for c in z {
        let v = data.values(c)?;
        let sd = variance(v).sqrt();
        if !(sd > 0.0) {
            return Err(Error::Singular(format!("covariate `{c}` is constant")));
        }
        centers.push(mean(v));
        scales.push(sd);
        cols.push(v);
    }
    let x = DMatrix::from_fn(m, z.len() + 1, |r, c| {
        if c == 0 {
            1.0
        } else {
            (cols[c - 1][r] - centers[c - 1]) / scales[c - 1]
        }
    });
    let mut beta = DVector::zeros(z.len() + 1);
    let mut ll = log_likelihood(&x, tv, &beta);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITER {
        iterations += 1;
        let p: Vec<f64> = (&x * &beta).iter().map(|&e| sigmoid(e)).collect();
        let grad = x.transpose() * DVector::from_iterator(m, tv.iter().zip(&p).map(|(t, p)| t - p));
        let w = DMatrix::from_fn(m, z.len() + 1, |r, c| x[(r, c)] * p[r] * (1.0 - p[r]));
        let hess = x.transpose() * w;
        let step = match hess.cholesky() {
            Some(ch) => ch.solve(&grad),
            None => return Err(Error::Separation),
        };
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = &beta + &step * scale;
            let cl = log_likelihood(&x, tv, &cand);
            if cl >= ll {
                beta = cand;
                let gain = cl - ll;
                ll = cl;
                accepted = true;
                if step.amax() * scale < 1e-10 || gain < 1e-12 * m as f64 {
                    converged = true;
                }
                break;
            }
            scale *= 0.5;
        }
        if beta.iter().skip(1).any(|b| b.abs() > SEPARATION_COEF) {
            return Err(Error::Separation);
        }
        if !accepted || converged {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Separation);
    }
    let coef: Vec<f64> = (0..z.len()).map(|k| beta[k + 1] / scales[k]).collect();
    let intercept = beta[0] - coef.iter().zip(&centers).map(|(b, c)| b * c).sum::<f64>();
    Ok(PropensityModel {
        covariates: z.iter().map(|s| s.to_string()).collect(),
        intercept,
        coef,
        iterations,
        converged,
    })
}

/// Source of the propensity scores used for weighting.
#[derive(Debug, Clone, PartialEq)]
pub enum Propensity {
    /// Logistic regression of the treatment on these covariates.
    Fitted(Vec<String>),
    /// Known per-row scores.
    Exact(Vec<f64>),
}

/// Inverse probability weighting with self-normalized (Hajek) weights
/// `1 / s(z)` for treated and `1 / (1 - s(z))` for control units.
pub fn ate_ipw(data: &Dataset, y: &str, t: &str, propensity: &Propensity, clip: f64) -> Result<EffectEstimate> {
    if !(clip >= 0.0 && clip < 0.5) {
        return Err(Error::InvalidArgument(format!("clipping level {clip} outside [0, 0.5)")));
    }
    let (yv, tv) = (data.values(y)?, data.binary(t)?);
    let g = groups(tv)?;
    let (raw, mode) = match propensity {
        Propensity::Fitted(z) => {
            let z: Vec<&str> = z.iter().map(String::as_str).collect();
            (fit_propensity(data, t, &z)?.predict(data)?, "fitted")
        }
        Propensity::Exact(s) => {
            if s.len() != yv.len() {
                return Err(Error::InvalidArgument("one propensity per row required".into()));
            }
            if s.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidArgument("propensities must lie in [0, 1]".into()));
            }
            (s.clone(), "exact")
        }
    };
    let mut clipped = 0usize;
    let s: Vec<f64> = raw
        .iter()
        .map(|&p| {
            let c = p.clamp(clip, 1.0 - clip);
            if c != p {
                clipped += 1;
            }
            c
        })
        .collect();
    if s.iter().any(|&p| p <= 0.0 || p >= 1.0) {
        return Err(Error::Positivity("propensity of 0 or 1 with clipping disabled".into()));
    }
    let (mut w1, mut s1, mut w0, mut s0) = (0.0, 0.0, 0.0, 0.0);
    for &r in &g.treated {
        w1 += 1.0 / s[r];
        s1 += yv[r] / s[r];
    }
    for &r in &g.control {
        w0 += 1.0 / (1.0 - s[r]);
        s0 += yv[r] / (1.0 - s[r]);
    }
    let n = yv.len() as f64;
    let fold = |acc: (f64, f64), v: f64| (acc.0.min(v), acc.1.max(v));
    let (lo, hi) = s.iter().copied().fold((f64::INFINITY, f64::NEG_INFINITY), fold);
    Ok(EffectEstimate::new("ipw", s1 / w1 - s0 / w0)
        .diag("m0", g.control.len())
        .diag("m1", g.treated.len())
        .diag("propensity", mode)
        .diag("clip", clip)
        .diag("clipped", clipped)
        .diag("min_propensity", lo)
        .diag("max_propensity", hi)
        .diag("horvitz_thompson", (s1 - s0) / n))
}
