use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};

use super::Dag;
use crate::error::{Error, Result};

/// Number of labeled DAGs on `n` nodes.
///
/// Uses the recursion over the size `k` of the set of source nodes:
/// `a(n) = Σ_{k=1..n} (-1)^{k+1} C(n,k) 2^{k(n-k)} a(n-k)`, `a(0) = 1`.
pub fn count_dags(n: usize) -> Result<BigUint> {
    if n == 0 {
        return Err(Error::InvalidArgument("count_dags needs n >= 1".into()));
    }
    let mut a: Vec<BigInt> = vec![BigInt::one()];
    for m in 1..=n {
        let mut total = BigInt::zero();
        let mut binom = BigInt::one();
        for k in 1..=m {
            binom = binom * BigInt::from(m - k + 1) / BigInt::from(k);
            let term = &binom * (BigInt::one() << (k * (m - k))) * &a[m - k];
            if k % 2 == 1 {
                total += term;
            } else {
                total -= term;
            }
        }
        a.push(total);
    }
    Ok(a[n].to_biguint().expect("DAG counts are positive"))
}

/// Every DAG over `names`, by brute force over the three states of each
/// node pair. Practical up to five nodes.
pub fn all_dags(names: &[String]) -> Vec<Dag> {
    let n = names.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let total = 3usize.pow(pairs.len() as u32);
    let mut out = Vec::new();
    let mut edges = Vec::with_capacity(pairs.len());
    for code in 0..total {
        edges.clear();
        let mut c = code;
        for &(a, b) in &pairs {
            match c % 3 {
                1 => edges.push((a, b)),
                2 => edges.push((b, a)),
                _ => {}
            }
            c /= 3;
        }
        if let Ok(g) = Dag::new(names.iter().cloned(), edges.iter().copied()) {
            out.push(g);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_counts() {
        assert_eq!(count_dags(1).unwrap(), BigUint::from(1u32));
        assert_eq!(count_dags(2).unwrap(), BigUint::from(3u32));
        assert_eq!(count_dags(3).unwrap(), BigUint::from(25u32));
        assert_eq!(count_dags(5).unwrap(), BigUint::from(29281u32));
        assert_eq!(
            count_dags(10).unwrap().to_string(),
            "4175098976430598143"
        );
        assert!(count_dags(0).is_err());
    }

    #[test]
    fn recursion_matches_exhaustive_generation() {
        for n in 1..=5 {
            let names: Vec<String> = (0..n).map(|i| format!("V{i}")).collect();
            assert_eq!(BigUint::from(all_dags(&names).len()), count_dags(n).unwrap(), "n={n}");
        }
    }

    #[test]
    fn large_n_needs_big_integers() {
        let c = count_dags(20).unwrap();
        assert!(c.bits() > 64);
    }
}
