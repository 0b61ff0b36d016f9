use nalgebra::{DMatrix, DVector};

use super::{cross_gram, gram, Kernel};
use crate::error::{Error, Result};

/// Kernel ridge regression `f(x) = mean(y) + sum_i alpha_i k(x_i, x)`.
#[derive(Debug, Clone)]
pub struct KernelRidge {
    kernel: Kernel,
    train: DMatrix<f64>,
    alpha: DVector<f64>,
    offset: f64,
    fitted: DVector<f64>,
}

impl KernelRidge {
    /// Fits with regularizer `lambda`; `None` uses `1e-3 * m`.
    pub fn fit(kernel: Kernel, xs: &DMatrix<f64>, y: &[f64], lambda: Option<f64>) -> Result<KernelRidge> {
        let m = xs.nrows();
        if m != y.len() {
            return Err(Error::InvalidArgument("inputs and targets differ in length".into()));
        }
        let lambda = lambda.unwrap_or(1e-3 * m as f64);
        if !(lambda > 0.0) {
            return Err(Error::InvalidArgument("ridge regularizer must be positive".into()));
        }
        let k = gram(&kernel, xs)?;
        let offset = y.iter().sum::<f64>() / m as f64;
        let yc = DVector::from_iterator(m, y.iter().map(|v| v - offset));
        let reg = &k + DMatrix::identity(m, m) * lambda;
        let chol = reg
            .cholesky()
            .ok_or_else(|| Error::Singular("regularized Gram matrix not positive definite".into()))?;
        let alpha = chol.solve(&yc);
        let fitted = (&k * &alpha).add_scalar(offset);
        Ok(KernelRidge {
            kernel,
            train: xs.clone(),
            alpha,
            offset,
            fitted,
        })
    }

    pub fn fitted(&self) -> &DVector<f64> {
        &self.fitted
    }

    pub fn residuals(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(self.fitted.iter()).map(|(a, b)| a - b).collect()
    }

    pub fn predict(&self, xs: &DMatrix<f64>) -> Result<Vec<f64>> {
        let g = cross_gram(&self.kernel, xs, &self.train)?;
        Ok((g * &self.alpha).iter().map(|v| v + self.offset).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::super::column;
    use super::*;

    #[test]
    fn recovers_smooth_function() {
        let xs: Vec<f64> = (0..200).map(|i| -2.0 + 4.0 * i as f64 / 199.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let fit = KernelRidge::fit(Kernel::gaussian(0.5).unwrap(), &column(&xs), &ys, Some(1e-4)).unwrap();
        let pred = fit.predict(&column(&[0.3, 1.1])).unwrap();
        assert!((pred[0] - 0.3f64.sin()).abs() < 1e-2);
        assert!((pred[1] - 1.1f64.sin()).abs() < 1e-2);
        let max_res = fit.residuals(&ys).iter().fold(0.0f64, |a, r| a.max(r.abs()));
        assert!(max_res < 1e-2);
    }
}
