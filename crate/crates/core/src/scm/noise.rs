use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distribution of one exogenous noise term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NoiseSpec {
    Finite { support: Vec<f64>, probs: Vec<f64> },
    Gaussian { mean: f64, variance: f64 },
    Uniform { lo: f64, hi: f64 },
    Dirac { point: f64 },
}

impl NoiseSpec {
    pub fn standard_normal() -> Self {
        NoiseSpec::Gaussian { mean: 0.0, variance: 1.0 }
    }

    pub fn gaussian(mean: f64, variance: f64) -> Self {
        NoiseSpec::Gaussian { mean, variance }
    }

    pub fn uniform(lo: f64, hi: f64) -> Self {
        NoiseSpec::Uniform { lo, hi }
    }

    pub fn dirac(point: f64) -> Self {
        NoiseSpec::Dirac { point }
    }

    pub fn finite(support: Vec<f64>, probs: Vec<f64>) -> Self {
        NoiseSpec::Finite { support, probs }
    }

    /// `P(U = 1) = p`, `P(U = 0) = 1 - p`.
    pub fn bernoulli(p: f64) -> Self {
        NoiseSpec::Finite {
            support: vec![0.0, 1.0],
            probs: vec![1.0 - p, p],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseSpec::Finite { support, probs } => {
                if support.is_empty() || support.len() != probs.len() {
                    return Err(Error::InvalidArgument("finite noise needs one probability per support point".into()));
                }
                if probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                    return Err(Error::InvalidArgument("noise probabilities must lie in [0, 1]".into()));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidArgument(format!("noise probabilities sum to {total}, not 1")));
                }
                Ok(())
            }
            NoiseSpec::Gaussian { mean, variance } => {
                if !mean.is_finite() || !variance.is_finite() || *variance < 0.0 {
                    return Err(Error::InvalidArgument("gaussian noise needs finite mean and variance >= 0".into()));
                }
                Ok(())
            }
            NoiseSpec::Uniform { lo, hi } => {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::InvalidArgument("uniform noise needs lo < hi".into()));
                }
                Ok(())
            }
            NoiseSpec::Dirac { point } => {
                if !point.is_finite() {
                    return Err(Error::InvalidArgument("dirac point must be finite".into()));
                }
                Ok(())
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseSpec::Finite { support, probs } => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (x, p) in support.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *x;
                    }
                }
                *support.last().unwrap()
            }
            NoiseSpec::Gaussian { mean, variance } => {
                if *variance == 0.0 {
                    *mean
                } else {
                    Normal::new(*mean, variance.sqrt()).unwrap().sample(rng)
                }
            }
            NoiseSpec::Uniform { lo, hi } => rng.gen_range(*lo..*hi),
            NoiseSpec::Dirac { point } => *point,
        }
    }

    /// Finite atoms `(value, probability)` when the distribution is discrete.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            NoiseSpec::Finite { support, probs } => Some(support.iter().copied().zip(probs.iter().copied()).collect()),
            NoiseSpec::Dirac { point } => Some(vec![(*point, 1.0)]),
            NoiseSpec::Gaussian { mean, variance } if *variance == 0.0 => Some(vec![(*mean, 1.0)]),
            _ => None,
        }
    }

    /// Density of a continuous distribution at `u`.
    pub(crate) fn density(&self, u: f64) -> f64 {
        match self {
            NoiseSpec::Gaussian { mean, variance } if *variance > 0.0 => {
                let z = (u - mean) / variance.sqrt();
                (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
            }
            NoiseSpec::Uniform { lo, hi } if *lo <= u && u <= *hi => 1.0 / (hi - lo),
            _ => 0.0,
        }
    }

    /// A point inside the support, used where the draw is irrelevant.
    pub(crate) fn representative(&self) -> f64 {
        match self {
            NoiseSpec::Finite { support, .. } => support[0],
            NoiseSpec::Gaussian { mean, .. } => *mean,
            NoiseSpec::Uniform { lo, hi } => 0.5 * (lo + hi),
            NoiseSpec::Dirac { point } => *point,
        }
    }

    /// Whether `u` lies in the support of a continuous distribution.
    pub fn supports(&self, u: f64) -> bool {
        match self {
            NoiseSpec::Gaussian { .. } => u.is_finite(),
            NoiseSpec::Uniform { lo, hi } => *lo <= u && u <= *hi,
            _ => self
                .atoms()
                .is_some_and(|a| a.iter().any(|&(x, p)| p > 0.0 && super::expr::values_match(x, u))),
        }
    }
}
