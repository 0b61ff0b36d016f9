//! Positive-definite kernels, RKHS mean embeddings and kernel tests.
//!
//! Samples are matrices with one observation per row. Gaussian bandwidths
//! default to the median heuristic (median pairwise Euclidean distance).

mod ci;
mod ridge;
mod permutation;

pub use ci::{ci_test, partial_correlation, CiConfig, CiMethod};
pub use ridge::KernelRidge;
pub use permutation::{hsic, hsic_test, mmd, CiTestResult, EmbeddingDistance, DEFAULT_PERMUTATIONS};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Practical cap on the number of rows entering a dense Gram matrix.
pub const MAX_GRAM_ROWS: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Kernel {
    /// `exp(-|x - x'|^2 / (2 bandwidth^2))`
    Gaussian { bandwidth: f64 },
    /// `(<x, x'> + offset)^degree`
    Polynomial { degree: u32, offset: f64 },
    Linear,
}

impl Kernel {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {bandwidth}")));
        }
        Ok(Kernel::Gaussian { bandwidth })
    }

    pub fn polynomial(degree: u32, offset: f64) -> Result<Self> {
        if degree < 1 || !(offset >= 0.0) {
            return Err(Error::InvalidArgument("polynomial kernel needs degree >= 1 and offset >= 0".into()));
        }
        Ok(Kernel::Polynomial { degree, offset })
    }

    /// Gaussian kernel with the median-heuristic bandwidth of `xs`.
    pub fn gaussian_median(xs: &DMatrix<f64>) -> Self {
        Kernel::Gaussian {
            bandwidth: median_heuristic(xs),
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Kernel::Gaussian { bandwidth } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * bandwidth * bandwidth)).exp()
            }
            Kernel::Polynomial { degree, offset } => (dot(x, y) + offset).powi(degree as i32),
            Kernel::Linear => dot(x, y),
        }
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub(crate) fn rows(xs: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..xs.nrows()).map(|r| xs.row(r).iter().copied().collect()).collect()
}

/// Single-column sample matrix.
pub fn column(values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(values.len(), 1, values)
}

/// Median of pairwise distances; 1 when all points coincide.
pub fn median_heuristic(xs: &DMatrix<f64>) -> f64 {
    let pts = rows(xs);
    let mut d = Vec::with_capacity(pts.len() * pts.len().saturating_sub(1) / 2);
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            d.push(pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    if *m > 0.0 {
        *m
    } else {
        1.0
    }
}

fn check_rows(xs: &DMatrix<f64>) -> Result<()> {
    if xs.nrows() == 0 {
        return Err(Error::InsufficientData("empty sample".into()));
    }
    if xs.nrows() > MAX_GRAM_ROWS {
        return Err(Error::LimitExceeded {
            what: "Gram matrix rows",
            size: xs.nrows(),
            limit: MAX_GRAM_ROWS,
        });
    }
    Ok(())
}

/// `G[i][j] = k(x_i, x_j)`.
pub fn gram(k: &Kernel, xs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_rows(xs)?;
    let pts = rows(xs);
    let m = pts.len();
    let mut g = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = k.eval(&pts[i], &pts[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// `G[i][j] = k(x_i, y_j)`.
pub fn cross_gram(k: &Kernel, xs: &DMatrix<f64>, ys: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_rows(xs)?;
    check_rows(ys)?;
    if xs.ncols() != ys.ncols() {
        return Err(Error::InvalidArgument("samples have different dimensions".into()));
    }
    let (a, b) = (rows(xs), rows(ys));
    Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| k.eval(&a[i], &b[j])))
}

/// `<mu(X), f>` for `f = sum_j coeffs[j] k(anchors_j, .)`.
pub fn mean_map_apply(k: &Kernel, xs: &DMatrix<f64>, anchors: &DMatrix<f64>, coeffs: &[f64]) -> Result<f64> {
    if anchors.nrows() != coeffs.len() {
        return Err(Error::InvalidArgument("one coefficient per anchor required".into()));
    }
    if coeffs.is_empty() {
        return Ok(0.0);
    }
    let g = cross_gram(k, anchors, xs)?;
    let m = xs.nrows() as f64;
    Ok((0..g.nrows()).map(|j| coeffs[j] * g.row(j).sum() / m).sum())
}

/// Right-hand side of the VC generalization bound:
/// `r_emp + sqrt((h (ln(2m/h) + 1) + ln(4/delta)) / m)`.
pub fn vc_bound(r_emp: f64, h: u64, m: u64, delta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r_emp) {
        return Err(Error::InvalidArgument(format!("empirical risk {r_emp} outside [0, 1]")));
    }
    if h < 1 || m <= h {
        return Err(Error::InvalidArgument(format!("need m > h >= 1, got h = {h}, m = {m}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta {delta} outside (0, 1)")));
    }
    let (h, m) = (h as f64, m as f64);
    let capacity = h * ((2.0 * m / h).ln() + 1.0) + (4.0 / delta).ln();
    Ok(r_emp + (capacity / m).sqrt())
}
