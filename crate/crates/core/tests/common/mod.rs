#![allow(dead_code)]

use causelab::graph::Dag;
use causelab::scm::{Expr, NoiseSpec, Scm, Variable};
use proptest::prelude::*;

pub const NAMES: [&str; 6] = ["A", "B", "C", "D", "E", "F"];

pub fn names(n: usize) -> Vec<String> {
    NAMES[..n].iter().map(|s| s.to_string()).collect()
}

/// DAG from an edge mask over a topological order.
pub fn dag_from(n: usize, order: &[usize], mask: &[bool]) -> Dag {
    let mut edges = Vec::new();
    let mut k = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            if mask[k] {
                edges.push((order[i], order[j]));
            }
            k += 1;
        }
    }
    Dag::new(names(n), edges).expect("acyclic by construction")
}

pub fn dag_with(n: usize) -> impl Strategy<Value = Dag> {
    let pairs = n * n.saturating_sub(1) / 2;
    (Just((0..n).collect::<Vec<_>>()).prop_shuffle(), proptest::collection::vec(any::<bool>(), pairs))
        .prop_map(move |(order, mask)| dag_from(n, &order, &mask))
}

pub fn dag(min_n: usize, max_n: usize) -> impl Strategy<Value = Dag> {
    (min_n..=max_n).prop_flat_map(dag_with)
}

/// `X_i := sum_j w_ij X_j + U_i` over `g` with Gaussian noise.
pub fn linear_scm(g: &Dag, weights: &[f64]) -> Scm {
    let vars = (0..g.n())
        .map(|i| {
            let parents: Vec<&str> = g.parents(i).iter().map(|&p| g.name(p)).collect();
            let expr = g
                .parents(i)
                .iter()
                .enumerate()
                .fold(Expr::noise(), |e, (k, &p)| e + Expr::c(weights[(i * 7 + k) % weights.len()]) * Expr::var(g.name(p)));
            Variable::new(g.name(i), &parents, expr, NoiseSpec::gaussian(0.0, 1.0))
        })
        .collect();
    Scm::new(vars).expect("valid scm")
}

pub fn subsets(items: &[usize]) -> Vec<Vec<usize>> {
    (0..1usize << items.len())
        .map(|mask| items.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, &v)| v).collect())
        .collect()
}
