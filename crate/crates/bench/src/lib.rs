//! Criterion benchmarks over the main causelab entry points.

use std::hint::black_box;

use causelab::cgm::DiscreteCgm;
use causelab::discovery::{self, DiscoveryConfig, DsepOracle};
use causelab::estimation::{self, Propensity};
use causelab::graph::{self, Dag, NodeSet};
use causelab::kernel_stats::{self, column, Kernel};
use causelab::rng;
use causelab::scenario::Scenario;
use causelab::scm::Intervention;
use criterion::{BenchmarkId, Criterion};

fn fig8() -> Dag {
    Dag::from_names(
        &["X1", "X2", "X3", "T", "Y"],
        &[("X1", "T"), ("X1", "X2"), ("T", "Y"), ("T", "X3"), ("X2", "Y"), ("X2", "X3"), ("X3", "Y")],
    )
    .expect("valid graph")
}

/// Layered DAG: node `i` has parents `i - 1` and `i - 3` when they exist.
fn ladder(n: usize) -> Dag {
    let names: Vec<String> = (0..n).map(|i| format!("V{i}")).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for back in [1, 3] {
            if i >= back {
                edges.push((i - back, i));
            }
        }
    }
    Dag::new(names, edges).expect("acyclic")
}

pub fn graph(c: &mut Criterion) {
    let mut g = c.benchmark_group("graph");
    for n in [5, 10, 20] {
        g.bench_with_input(BenchmarkId::new("count_dags", n), &n, |b, &n| b.iter(|| graph::count_dags(black_box(n))));
    }
    let big = ladder(200);
    let (a, bset, z) = (NodeSet::singleton(0), NodeSet::singleton(199), NodeSet::singleton(100));
    g.bench_function("d_separated_200", |b| b.iter(|| graph::d_separated(&big, &a, &bset, &z)));
    let g8 = fig8();
    g.bench_function("adjustment_sets_fig8", |b| b.iter(|| graph::enumerate_adjustment_sets(&g8, 3, 4, 12)));
    g.finish();
}

pub fn cgm(c: &mut Criterion) {
    let mut g = c.benchmark_group("cgm");
    let model = DiscreteCgm::random(fig8(), &[2, 3, 2, 2, 3], &mut rng::stream(1, 0)).expect("model");
    let iv = Intervention::new().set("T", 1.0);
    g.bench_function("truncated_factorization", |b| b.iter(|| model.truncated_factorization(&iv)));
    let z = NodeSet::singleton(0);
    g.bench_function("adjustment_formula", |b| b.iter(|| model.adjustment_formula(3, 4, &z)));
    g.finish();
}

pub fn discovery(c: &mut Criterion) {
    let mut g = c.benchmark_group("discovery");
    let truth = ladder(8);
    g.bench_function("pc_oracle_8", |b| {
        b.iter(|| {
            let skel = discovery::pc_skeleton_with(&DsepOracle::new(&truth), 8).expect("skeleton");
            discovery::orient(&skel)
        })
    });
    let (data, _) = Scenario::Collider.generate(5000, 1).expect("data");
    let cfg = DiscoveryConfig::default();
    g.bench_function("pc_partial_correlation_5000", |b| b.iter(|| discovery::pc(&data, &cfg)));
    let (pair, _) = Scenario::AnmNonlinear.generate(300, 2).expect("data");
    let anm_cfg = DiscoveryConfig { perms: 100, ..DiscoveryConfig::default() };
    g.sample_size(10);
    g.bench_function("anm_300", |b| b.iter(|| discovery::anm_direction(&pair, "X", "Y", &anm_cfg)));
    g.finish();
}

pub fn kernels(c: &mut Criterion) {
    let mut g = c.benchmark_group("kernel_stats");
    g.sample_size(10);
    for m in [100, 400] {
        let (d, _) = Scenario::AnmNonlinear.generate(m, 3).expect("data");
        let (x, y) = (column(d.values("X").expect("X")), column(d.values("Y").expect("Y")));
        let (kx, ky) = (Kernel::gaussian_median(&x), Kernel::gaussian_median(&y));
        g.bench_with_input(BenchmarkId::new("hsic_test_100_perms", m), &m, |b, _| {
            b.iter(|| kernel_stats::hsic_test(&kx, &ky, &x, &y, 100, 1))
        });
        g.bench_with_input(BenchmarkId::new("mmd_100_perms", m), &m, |b, _| {
            b.iter(|| kernel_stats::mmd(&kx, &x, &y, 100, 1))
        });
    }
    g.finish();
}

pub fn estimation(c: &mut Criterion) {
    let mut g = c.benchmark_group("estimation");
    let (d, _) = Scenario::ConfoundedLinear.generate(10_000, 4).expect("data");
    let s: Vec<f64> = d.values("W").expect("W").iter().map(|w| 0.2 + 0.6 * w).collect();
    let exact = Propensity::Exact(s);
    g.bench_function("regression_10000", |b| {
        b.iter(|| estimation::ate_regression_adjustment(&d, "Y", "T", &["Z"], estimation::Regressor::Linear))
    });
    g.bench_function("ipw_exact_10000", |b| b.iter(|| estimation::ate_ipw(&d, "Y", "T", &exact, 0.01)));
    g.bench_function("propensity_fit_10000", |b| b.iter(|| estimation::fit_propensity(&d, "T", &["W"])));
    g.sample_size(10);
    g.bench_function("nn_matching_10000", |b| b.iter(|| estimation::ate_nn_matching(&d, "Y", "T", &["Z"])));
    let (iv, _) = Scenario::IvLinear.generate(10_000, 5).expect("data");
    g.bench_function("iv_2sls_10000", |b| b.iter(|| estimation::ate_iv_2sls(&iv, "Y", "T", "I")));
    g.finish();
}

pub fn benchmarks(c: &mut Criterion) {
    graph(c);
    cgm(c);
    discovery(c);
    kernels(c);
    estimation(c);
}
