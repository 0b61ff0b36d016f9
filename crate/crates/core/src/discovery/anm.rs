use serde::{Deserialize, Serialize};

use super::DiscoveryConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel_stats::{column, hsic_test, Kernel, KernelRidge};
use crate::linalg::{standardize, variance};

/// Minimum sample size for the residual independence tests.
pub const MIN_ANM_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnmDirection {
    Forward,
    Backward,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnmVerdict {
    pub direction: AnmDirection,
    /// HSIC p-value of input vs residual for the model `y = f(x) + u`.
    pub p_forward: f64,
    /// Same for `x = g(y) + v`.
    pub p_backward: f64,
    /// `p_forward - p_backward`.
    pub margin: f64,
}

/// p-value of the residual test for `output = f(input) + noise`.
fn residual_p_value(input: &[f64], output: &[f64], cfg: &DiscoveryConfig) -> Result<f64> {
    let xs = column(&standardize(input));
    let y = standardize(output);
    let fit = KernelRidge::fit(Kernel::gaussian_median(&xs), &xs, &y, None)?;
    let r = column(&fit.residuals(&y));
    Ok(hsic_test(&Kernel::gaussian_median(&xs), &Kernel::gaussian_median(&r), &xs, &r, cfg.perms, cfg.seed)?.p_value)
}

/// Fits additive noise models in both directions and keeps a direction when
/// only its residuals look independent of the input at level `cfg.alpha`.
pub fn anm_direction(data: &Dataset, x: &str, y: &str, cfg: &DiscoveryConfig) -> Result<AnmVerdict> {
    cfg.validate()?;
    if x == y {
        return Err(Error::OverlappingSets("cause and effect candidates coincide".into()));
    }
    let (xv, yv) = (data.values(x)?, data.values(y)?);
    if xv.len() < MIN_ANM_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "additive noise test needs at least {MIN_ANM_SAMPLES} rows, got {}",
            xv.len()
        )));
    }
    for (name, v) in [(x, xv), (y, yv)] {
        if !(variance(v) > 0.0) {
            return Err(Error::Degenerate(format!("column `{name}` is constant")));
        }
    }
    let p_forward = residual_p_value(xv, yv, cfg)?;
    let p_backward = residual_p_value(yv, xv, cfg)?;
    let (fwd, bwd) = (p_forward > cfg.alpha, p_backward > cfg.alpha);
    let direction = match (fwd, bwd) {
        (true, false) => AnmDirection::Forward,
        (false, true) => AnmDirection::Backward,
        _ => AnmDirection::Undecided,
    };
    Ok(AnmVerdict {
        direction,
        p_forward,
        p_backward,
        margin: p_forward - p_backward,
    })
}
