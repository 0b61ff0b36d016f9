use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{column, hsic_test, CiTestResult, Kernel, KernelRidge, DEFAULT_PERMUTATIONS};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{correlation, design, standardize, Ols};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CiMethod {
    /// Fisher-z test on the partial correlation.
    PartialCorrelation,
    /// HSIC between kernel-ridge residuals of both variables on the
    /// conditioning set.
    KernelResidual,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiConfig {
    pub alpha: f64,
    pub max_cond: usize,
    pub perms: usize,
    pub seed: u64,
    /// Kernel-ridge regularizer; `None` means `1e-3 * m`.
    pub ridge: Option<f64>,
}

impl Default for CiConfig {
    fn default() -> Self {
        CiConfig {
            alpha: 0.05,
            max_cond: 4,
            perms: DEFAULT_PERMUTATIONS,
            seed: 0,
            ridge: None,
        }
    }
}

fn residuals_linear(data: &Dataset, target: &str, z: &[&str]) -> Result<Vec<f64>> {
    let cols: Vec<&[f64]> = z.iter().map(|n| data.values(n)).collect::<Result<_>>()?;
    let fit = Ols::fit(&design(data.n_rows(), &cols), data.values(target)?)?;
    Ok(fit.residuals.iter().copied().collect())
}

/// Partial correlation of `a` and `b` given `z`, via regression residuals.
pub fn partial_correlation(data: &Dataset, a: &str, b: &str, z: &[&str]) -> Result<f64> {
    let ra = residuals_linear(data, a, z)?;
    let rb = residuals_linear(data, b, z)?;
    let r = correlation(&ra, &rb);
    if !r.is_finite() {
        return Err(Error::Singular(format!("`{a}` or `{b}` is constant given the conditioning set")));
    }
    Ok(r)
}

pub fn ci_test(method: CiMethod, data: &Dataset, a: &str, b: &str, z: &[&str], cfg: &CiConfig) -> Result<CiTestResult> {
    if z.len() > cfg.max_cond {
        return Err(Error::LimitExceeded {
            what: "conditioning set size",
            size: z.len(),
            limit: cfg.max_cond,
        });
    }
    if z.contains(&a) || z.contains(&b) {
        return Err(Error::OverlappingSets("tested variables and conditioning set".into()));
    }
    let n = data.n_rows();
    match method {
        CiMethod::PartialCorrelation => {
            let dof = n as f64 - z.len() as f64 - 3.0;
            if dof <= 0.0 {
                return Err(Error::InsufficientData(format!(
                    "{n} rows cannot support conditioning on {} variables",
                    z.len()
                )));
            }
            let r = if a == b { 1.0 } else { partial_correlation(data, a, b, z)? };
            let (stat, p) = if r.abs() >= 1.0 {
                (f64::INFINITY, 0.0)
            } else {
                let zstat = 0.5 * ((1.0 + r) / (1.0 - r)).ln() * dof.sqrt();
                let normal = Normal::new(0.0, 1.0).expect("standard normal");
                (zstat, 2.0 * (1.0 - normal.cdf(zstat.abs())))
            };
            Ok(CiTestResult {
                test: "partial-correlation".into(),
                statistic: stat,
                p_value: p.clamp(0.0, 1.0),
                cond_size: z.len(),
            })
        }
        CiMethod::KernelResidual => {
            let resid = |target: &str| -> Result<Vec<f64>> {
                let y = standardize(data.values(target)?);
                if z.is_empty() {
                    return Ok(y);
                }
                let zs: Vec<Vec<f64>> = z.iter().map(|c| data.values(c).map(standardize)).collect::<Result<_>>()?;
                let zm = nalgebra::DMatrix::from_fn(n, zs.len(), |r, c| zs[c][r]);
                let fit = KernelRidge::fit(Kernel::gaussian_median(&zm), &zm, &y, cfg.ridge)?;
                Ok(fit.residuals(&y))
            };
            let ra = column(&resid(a)?);
            let rb = if a == b { ra.clone() } else { column(&resid(b)?) };
            let mut res = hsic_test(
                &Kernel::gaussian_median(&ra),
                &Kernel::gaussian_median(&rb),
                &ra,
                &rb,
                cfg.perms,
                cfg.seed,
            )?;
            res.test = "kernel-residual".into();
            res.cond_size = z.len();
            Ok(res)
        }
    }
}
