use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::{gram, Kernel};
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_PERMUTATIONS: usize = 500;

/// Minimum paired sample size for an HSIC test.
pub const MIN_HSIC_SAMPLES: usize = 20;

/// Squared RKHS distance between two empirical mean embeddings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingDistance {
    /// Biased (V-statistic) estimate; always >= 0 up to rounding.
    pub statistic: f64,
    /// Unbiased (U-statistic) estimate; may be slightly negative.
    pub unbiased: f64,
    pub p_value: f64,
    pub permutations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CiTestResult {
    pub test: String,
    pub statistic: f64,
    pub p_value: f64,
    pub cond_size: usize,
}

impl CiTestResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// `(1 + #{s >= observed}) / (1 + count)`.
pub(crate) fn permutation_p_value(observed: f64, stats: &[f64]) -> f64 {
    let tol = 1e-12 * observed.abs().max(1e-300);
    let hits = stats.iter().filter(|&&s| s >= observed - tol).count();
    (1 + hits) as f64 / (1 + stats.len()) as f64
}

fn flat(g: &DMatrix<f64>) -> Vec<f64> {
    let m = g.nrows();
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            out.push(g[(i, j)]);
        }
    }
    out
}

/// Permutation two-sample test on the biased MMD; the pooled sample is
/// relabelled by each permutation.
pub fn mmd(k: &Kernel, xs: &DMatrix<f64>, ys: &DMatrix<f64>, perms: usize, seed: u64) -> Result<EmbeddingDistance> {
    let (m, n) = (xs.nrows(), ys.nrows());
    if m == 0 || n == 0 {
        return Err(Error::InsufficientData("both samples must be nonempty".into()));
    }
    if xs.ncols() != ys.ncols() {
        return Err(Error::InvalidArgument("samples have different dimensions".into()));
    }
    let pooled = DMatrix::from_fn(m + n, xs.ncols(), |r, c| if r < m { xs[(r, c)] } else { ys[(r - m, c)] });
    let g = flat(&gram(k, &pooled)?);
    let size = m + n;
    let stat = |label: &dyn Fn(usize) -> usize| -> f64 {
        let w = |i: usize| if label(i) < m { 1.0 / m as f64 } else { -1.0 / n as f64 };
        let ws: Vec<f64> = (0..size).map(w).collect();
        let mut total = 0.0;
        for i in 0..size {
            let row = &g[i * size..(i + 1) * size];
            total += ws[i] * row.iter().zip(&ws).map(|(a, b)| a * b).sum::<f64>();
        }
        total
    };
    let observed = stat(&|i| i).max(0.0);

    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for i in 0..size {
        for j in 0..size {
            let v = g[i * size + j];
            match (i < m, j < m) {
                (true, true) if i != j => sxx += v,
                (false, false) if i != j => syy += v,
                (true, false) => sxy += v,
                _ => {}
            }
        }
    }
    let unbiased = if m > 1 && n > 1 {
        sxx / (m * (m - 1)) as f64 + syy / (n * (n - 1)) as f64 - 2.0 * sxy / (m * n) as f64
    } else {
        f64::NAN
    };

    let perms_list = rng::permutations(seed, size, perms);
    let stats: Vec<f64> = perms_list.par_iter().map(|p| stat(&|i| p[i])).collect();
    Ok(EmbeddingDistance {
        statistic: observed,
        unbiased,
        p_value: permutation_p_value(observed, &stats),
        permutations: perms,
        seed,
    })
}

fn centered(g: &DMatrix<f64>) -> Vec<f64> {
    let m = g.nrows();
    let row_means: Vec<f64> = (0..m).map(|i| g.row(i).sum() / m as f64).collect();
    let grand = row_means.iter().sum::<f64>() / m as f64;
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            // g is symmetric, so column means equal row means.
            out.push(g[(i, j)] - row_means[i] - row_means[j] + grand);
        }
    }
    out
}

fn check_pair(xs: &DMatrix<f64>, ys: &DMatrix<f64>) -> Result<()> {
    if xs.nrows() != ys.nrows() {
        return Err(Error::InvalidArgument("paired samples must have equal length".into()));
    }
    if xs.nrows() < MIN_HSIC_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "HSIC needs at least {MIN_HSIC_SAMPLES} pairs, got {}",
            xs.nrows()
        )));
    }
    Ok(())
}

/// `trace(K H L H) / m^2`.
pub fn hsic(kx: &Kernel, ky: &Kernel, xs: &DMatrix<f64>, ys: &DMatrix<f64>) -> Result<f64> {
    check_pair(xs, ys)?;
    let kc = centered(&gram(kx, xs)?);
    let l = flat(&gram(ky, ys)?);
    let m = xs.nrows() as f64;
    Ok(kc.iter().zip(&l).map(|(a, b)| a * b).sum::<f64>() / (m * m))
}

/// HSIC independence test with a p-value from permuting the `ys` pairing.
pub fn hsic_test(
    kx: &Kernel,
    ky: &Kernel,
    xs: &DMatrix<f64>,
    ys: &DMatrix<f64>,
    perms: usize,
    seed: u64,
) -> Result<CiTestResult> {
    check_pair(xs, ys)?;
    let m = xs.nrows();
    let kc = centered(&gram(kx, xs)?);
    let l = flat(&gram(ky, ys)?);
    let norm = (m * m) as f64;
    // Diagonal plus twice the upper triangle.
    let stat = |p: &[usize]| -> f64 {
        let (mut diag, mut upper) = (0.0, 0.0);
        for (i, &pi) in p.iter().enumerate() {
            let (ki, li) = (&kc[i * m..(i + 1) * m], &l[pi * m..(pi + 1) * m]);
            diag += ki[i] * li[pi];
            upper += ki[i + 1..].iter().zip(&p[i + 1..]).map(|(k, &pj)| k * li[pj]).sum::<f64>();
        }
        (diag + 2.0 * upper) / norm
    };
    let identity: Vec<usize> = (0..m).collect();
    let observed = stat(&identity);
    let perms_list = rng::permutations(seed, m, perms);
    let stats: Vec<f64> = perms_list.par_iter().map(|p| stat(p)).collect();
    Ok(CiTestResult {
        test: "hsic".into(),
        statistic: observed,
        p_value: permutation_p_value(observed, &stats),
        cond_size: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::super::column;
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normals(m: usize, shift: f64, seed: u64, id: u64) -> Vec<f64> {
        let mut r = rng::stream(seed, id);
        (0..m).map(|_| shift + r.sample::<f64, _>(StandardNormal)).collect()
    }

    #[test]
    fn mmd_identity_and_symmetry() {
        let x = column(&normals(60, 0.0, 1, 0));
        let y = column(&normals(50, 0.5, 1, 1));
        let k = Kernel::gaussian(1.0).unwrap();
        let same = mmd(&k, &x, &x, 50, 3).unwrap();
        assert!(same.statistic.abs() < 1e-12);
        let a = mmd(&k, &x, &y, 50, 3).unwrap();
        let b = mmd(&k, &y, &x, 50, 3).unwrap();
        assert!((a.statistic - b.statistic).abs() < 1e-12);
        assert!((a.unbiased - b.unbiased).abs() < 1e-12);
        assert!(a.p_value > 0.0 && a.p_value <= 1.0);
    }

    #[test]
    fn mmd_detects_mean_shift() {
        let x = column(&normals(200, 0.0, 2, 0));
        let y = column(&normals(200, 1.0, 2, 1));
        let pooled = column(&[normals(200, 0.0, 2, 0), normals(200, 1.0, 2, 1)].concat());
        let k = Kernel::gaussian_median(&pooled);
        let r = mmd(&k, &x, &y, 200, 5).unwrap();
        assert!(r.p_value < 0.01);
    }

    #[test]
    fn hsic_detects_quadratic_dependence() {
        let mut r = rng::stream(4, 0);
        let xv: Vec<f64> = (0..200).map(|_| r.gen_range(-1.0..1.0)).collect();
        let yv: Vec<f64> = xv.iter().map(|x| x * x + 0.05 * r.sample::<f64, _>(StandardNormal)).collect();
        let (x, y) = (column(&xv), column(&yv));
        let res = hsic_test(&Kernel::gaussian_median(&x), &Kernel::gaussian_median(&y), &x, &y, 200, 1).unwrap();
        assert!(res.p_value < 0.01);
    }

    #[test]
    fn hsic_constant_and_small_samples() {
        let x = column(&normals(30, 0.0, 5, 0));
        let y = column(&[2.0; 30]);
        let k = Kernel::gaussian(1.0).unwrap();
        assert!(hsic(&k, &k, &x, &y).unwrap().abs() < 1e-12);
        let small = column(&normals(10, 0.0, 5, 0));
        assert!(matches!(hsic_test(&k, &k, &small, &small, 10, 1), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn hsic_matches_trace_formula() {
        let x = column(&normals(25, 0.0, 6, 0));
        let y = column(&normals(25, 0.0, 6, 1));
        let k = Kernel::gaussian(0.8).unwrap();
        let (kg, lg) = (gram(&k, &x).unwrap(), gram(&k, &y).unwrap());
        let h = DMatrix::<f64>::identity(25, 25) - DMatrix::from_element(25, 25, 1.0 / 25.0);
        let direct = (&kg * &h * &lg * &h).trace() / 625.0;
        assert!((hsic(&k, &k, &x, &y).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn tests_are_deterministic_given_seed() {
        let x = column(&normals(40, 0.0, 7, 0));
        let y = column(&normals(40, 0.0, 7, 1));
        let k = Kernel::gaussian(1.0).unwrap();
        let a = hsic_test(&k, &k, &x, &y, 100, 9).unwrap();
        let b = hsic_test(&k, &k, &x, &y, 100, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn p_value_formula() {
        assert_eq!(permutation_p_value(1.0, &[0.5, 2.0, 1.0]), 0.75);
        assert_eq!(permutation_p_value(1.0, &[]), 1.0);
    }
}
