//! Small dense least-squares helpers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with `n - 1` denominator.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Returns `(x - mean) / sd`; constant columns are only centered.
pub fn standardize(xs: &[f64]) -> Vec<f64> {
    let m = mean(xs);
    let sd = if xs.len() > 1 { variance(xs).sqrt() } else { 0.0 };
    let s = if sd > 0.0 { sd } else { 1.0 };
    xs.iter().map(|x| (x - m) / s).collect()
}

/// Design matrix `[1, cols...]`.
pub fn design(n: usize, cols: &[&[f64]]) -> DMatrix<f64> {
    DMatrix::from_fn(n, cols.len() + 1, |r, c| if c == 0 { 1.0 } else { cols[c - 1][r] })
}

/// Ordinary least-squares fit.
#[derive(Debug, Clone)]
pub struct Ols {
    pub coef: DVector<f64>,
    pub residuals: DVector<f64>,
    xtx_inv: DMatrix<f64>,
}

impl Ols {
    pub fn fit(x: &DMatrix<f64>, y: &[f64]) -> Result<Ols> {
        let (n, p) = x.shape();
        if n != y.len() {
            return Err(Error::InvalidArgument("design and response lengths differ".into()));
        }
        if n < p {
            return Err(Error::InsufficientData(format!("{n} rows for {p} coefficients")));
        }
        let xtx = x.transpose() * x;
        let scale = xtx.diagonal().max().max(1e-300);
        let svd = xtx.clone().svd(true, true);
        if svd.singular_values.min() <= 1e-12 * scale {
            return Err(Error::Singular("design matrix is rank deficient".into()));
        }
        let xtx_inv = svd
            .pseudo_inverse(0.0)
            .map_err(|e| Error::Singular(e.to_string()))?;
        let yv = DVector::from_column_slice(y);
        let coef = &xtx_inv * (x.transpose() * &yv);
        let residuals = yv - x * &coef;
        Ok(Ols {
            coef,
            residuals,
            xtx_inv,
        })
    }

    pub fn rss(&self) -> f64 {
        self.residuals.norm_squared()
    }

    /// Classical standard errors, `sigma^2 = RSS / (n - p)`.
    pub fn std_errors(&self) -> DVector<f64> {
        let n = self.residuals.len();
        let p = self.coef.len();
        let sigma2 = self.rss() / (n.saturating_sub(p).max(1)) as f64;
        self.xtx_inv.diagonal().map(|d| (sigma2 * d).sqrt())
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        x * &self.coef
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_fit() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 + 3.0 * x).collect();
        let fit = Ols::fit(&design(4, &[&xs]), &ys).unwrap();
        assert!((fit.coef[0] - 2.0).abs() < 1e-12 && (fit.coef[1] - 3.0).abs() < 1e-12);
        assert!(fit.rss() < 1e-20);
    }

    #[test]
    fn collinear_design_is_singular() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.0, 4.0, 6.0, 8.0];
        assert!(matches!(Ols::fit(&design(4, &[&a, &b]), &a), Err(Error::Singular(_))));
    }

    #[test]
    fn summary_statistics() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(variance(&[1.0, 2.0, 3.0]), 1.0);
        assert!((correlation(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert_eq!(standardize(&[5.0, 5.0]), vec![0.0, 0.0]);
    }
}
