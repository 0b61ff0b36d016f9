//! Causal structure learning.
//!
//! Constraint-based search (SGS, PC-stable) runs against any
//! [`IndependenceOracle`]: statistical tests on a [`Dataset`] or exact
//! d-separation in a known [`Dag`]. Conditioning sets are tried in order of
//! size, then lexicographically by variable index, so results are
//! deterministic.

mod anm;
mod score;

pub use anm::{anm_direction, AnmDirection, AnmVerdict};
pub use score::{bic_score, score_search, ScoreModel, SearchMode, SearchResult};

use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{d_separated, Cpdag, Dag, NodeSet, Pdag};
use crate::kernel_stats::{ci_test, CiConfig, CiMethod};

/// Node cap for the exponential SGS search.
pub const SGS_LIMIT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscoveryConfig {
    pub ci_method: CiMethod,
    pub alpha: f64,
    pub max_cond: usize,
    /// `None` picks multinomial for all-discrete data and linear-Gaussian
    /// for all-real data.
    pub score: Option<ScoreModel>,
    pub search: SearchMode,
    pub perms: usize,
    pub seed: u64,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        DiscoveryConfig {
            ci_method: CiMethod::PartialCorrelation,
            alpha: 0.05,
            max_cond: 4,
            score: None,
            search: SearchMode::Greedy,
            perms: crate::kernel_stats::DEFAULT_PERMUTATIONS,
            seed: 0,
        }
    }
}

impl DiscoveryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        Ok(())
    }

    fn ci_config(&self) -> CiConfig {
        CiConfig {
            alpha: self.alpha,
            max_cond: self.max_cond,
            perms: self.perms,
            seed: self.seed,
            ridge: None,
        }
    }
}

/// Answers conditional-independence queries over variables `0..n`.
pub trait IndependenceOracle {
    fn names(&self) -> Vec<String>;
    fn independent(&self, a: usize, b: usize, z: &[usize]) -> Result<bool>;
    /// Number of queries answered so far.
    fn tests_performed(&self) -> usize;
}

/// Statistical tests on observed data.
pub struct DataOracle<'a> {
    data: &'a Dataset,
    method: CiMethod,
    cfg: CiConfig,
    count: Cell<usize>,
}

impl<'a> DataOracle<'a> {
    pub fn new(data: &'a Dataset, cfg: &DiscoveryConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(DataOracle {
            data,
            method: cfg.ci_method,
            cfg: cfg.ci_config(),
            count: Cell::new(0),
        })
    }
}

impl IndependenceOracle for DataOracle<'_> {
    fn names(&self) -> Vec<String> {
        self.data.names().into_iter().map(String::from).collect()
    }

    fn independent(&self, a: usize, b: usize, z: &[usize]) -> Result<bool> {
        self.count.set(self.count.get() + 1);
        let names = self.data.names();
        let zn: Vec<&str> = z.iter().map(|&i| names[i]).collect();
        let res = ci_test(self.method, self.data, names[a], names[b], &zn, &self.cfg)?;
        Ok(!res.rejects(self.cfg.alpha))
    }

    fn tests_performed(&self) -> usize {
        self.count.get()
    }
}

/// Exact d-separation in a known graph.
pub struct DsepOracle<'a> {
    g: &'a Dag,
    count: Cell<usize>,
}

impl<'a> DsepOracle<'a> {
    pub fn new(g: &'a Dag) -> Self {
        DsepOracle { g, count: Cell::new(0) }
    }
}

impl IndependenceOracle for DsepOracle<'_> {
    fn names(&self) -> Vec<String> {
        self.g.names().to_vec()
    }

    fn independent(&self, a: usize, b: usize, z: &[usize]) -> Result<bool> {
        self.count.set(self.count.get() + 1);
        d_separated(self.g, &NodeSet::singleton(a), &NodeSet::singleton(b), &z.iter().copied().collect())
    }

    fn tests_performed(&self) -> usize {
        self.count.get()
    }
}

/// Undirected skeleton with the separating set recorded for every removed
/// pair `(a, b)`, `a < b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub names: Vec<String>,
    pub edges: BTreeSet<(usize, usize)>,
    pub sepsets: BTreeMap<(usize, usize), NodeSet>,
    pub tests_performed: usize,
}

fn subsets_of_size(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    crate::graph::combinations(items, k, &mut |c| out.push(c.to_vec()));
    out
}

/// Exhaustive search: `a - b` is removed as soon as any subset of the other
/// variables (up to `max_cond` elements) separates them.
pub fn sgs_skeleton_with(oracle: &dyn IndependenceOracle, max_cond: usize) -> Result<Skeleton> {
    let names = oracle.names();
    let n = names.len();
    if n > SGS_LIMIT {
        return Err(Error::LimitExceeded {
            what: "SGS variable count",
            size: n,
            limit: SGS_LIMIT,
        });
    }
    let mut edges = BTreeSet::new();
    let mut sepsets = BTreeMap::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let others: Vec<usize> = (0..n).filter(|&v| v != a && v != b).collect();
            let mut found = None;
            'search: for k in 0..=others.len().min(max_cond) {
                for w in subsets_of_size(&others, k) {
                    if oracle.independent(a, b, &w)? {
                        found = Some(w);
                        break 'search;
                    }
                }
            }
            match found {
                Some(w) => {
                    sepsets.insert((a, b), w.into_iter().collect());
                }
                None => {
                    edges.insert((a, b));
                }
            }
        }
    }
    Ok(Skeleton {
        names,
        edges,
        sepsets,
        tests_performed: oracle.tests_performed(),
    })
}

/// PC-stable: at level `l`, conditioning sets of size `l` are drawn from the
/// adjacencies as they stood at the start of the level.
pub fn pc_skeleton_with(oracle: &dyn IndependenceOracle, max_cond: usize) -> Result<Skeleton> {
    let names = oracle.names();
    let n = names.len();
    let mut adj: Vec<BTreeSet<usize>> = (0..n).map(|a| (0..n).filter(|&b| b != a).collect()).collect();
    let mut sepsets = BTreeMap::new();
    for level in 0..=max_cond {
        let snapshot = adj.clone();
        if !(0..n).any(|a| snapshot[a].len() > level) {
            break;
        }
        for a in 0..n {
            for b in (a + 1)..n {
                if !adj[a].contains(&b) {
                    continue;
                }
                let mut candidates: Vec<Vec<usize>> = Vec::new();
                for (x, y) in [(a, b), (b, a)] {
                    let pool: Vec<usize> = snapshot[x].iter().copied().filter(|&v| v != y).collect();
                    if pool.len() >= level {
                        candidates.extend(subsets_of_size(&pool, level));
                    }
                }
                candidates.sort();
                candidates.dedup();
                for w in candidates {
                    if oracle.independent(a, b, &w)? {
                        adj[a].remove(&b);
                        adj[b].remove(&a);
                        sepsets.insert((a, b), w.into_iter().collect());
                        break;
                    }
                }
            }
        }
    }
    let edges = (0..n)
        .flat_map(|a| adj[a].iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
        .collect();
    Ok(Skeleton {
        names,
        edges,
        sepsets,
        tests_performed: oracle.tests_performed(),
    })
}

pub fn sgs_skeleton(data: &Dataset, cfg: &DiscoveryConfig) -> Result<Skeleton> {
    sgs_skeleton_with(&DataOracle::new(data, cfg)?, cfg.max_cond)
}

pub fn pc_skeleton(data: &Dataset, cfg: &DiscoveryConfig) -> Result<Skeleton> {
    pc_skeleton_with(&DataOracle::new(data, cfg)?, cfg.max_cond)
}

/// Result of orienting a skeleton.
#[derive(Debug, Clone, PartialEq)]
pub struct Orientation {
    pub cpdag: Cpdag,
    /// Colliders `(a, c, b)` with `a < b` detected from the separating sets.
    pub v_structures: Vec<(usize, usize, usize)>,
    /// Collider orientations dropped because an earlier one already
    /// pointed the other way.
    pub conflicts: usize,
}

/// Orients colliders `a -> c <- b` for non-adjacent `a, b` whose separating
/// set omits `c`, then applies the Meek rules. On conflicting colliders the
/// first one found (in index order) wins.
pub fn orient(skel: &Skeleton) -> Result<Orientation> {
    let n = skel.names.len();
    let adjacent = |a: usize, b: usize| skel.edges.contains(&(a.min(b), a.max(b)));
    let mut p = Pdag::from_skeleton(n, &skel.edges);
    let mut v_structures = Vec::new();
    let mut conflicts = 0;
    for a in 0..n {
        for b in (a + 1)..n {
            if adjacent(a, b) {
                continue;
            }
            let sep = match skel.sepsets.get(&(a, b)) {
                Some(s) => s,
                None => {
                    return Err(Error::InvalidArgument(format!(
                        "no separating set recorded for non-adjacent pair ({}, {})",
                        skel.names[a], skel.names[b]
                    )))
                }
            };
            for c in 0..n {
                if c == a || c == b || !adjacent(a, c) || !adjacent(b, c) || sep.contains(c) {
                    continue;
                }
                v_structures.push((a, c, b));
                for x in [a, b] {
                    if p.is_directed(c, x) {
                        conflicts += 1;
                        log::warn!(
                            "orientation conflict on {} - {}: keeping {} -> {}",
                            skel.names[x],
                            skel.names[c],
                            skel.names[c],
                            skel.names[x]
                        );
                    } else if p.is_undirected(x, c) {
                        p.orient(x, c);
                    }
                }
            }
        }
    }
    p.close();
    Ok(Orientation {
        cpdag: p.into_cpdag(&skel.names)?,
        v_structures,
        conflicts,
    })
}

/// Skeleton, orientation and test bookkeeping of one discovery run.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryReport {
    pub skeleton: Skeleton,
    pub orientation: Orientation,
    pub alpha: f64,
    pub seed: u64,
}

impl DiscoveryReport {
    pub fn to_json_value(&self) -> Value {
        let name = |i: usize| self.skeleton.names[i].clone();
        json!({
            "skeleton": self.skeleton.edges.iter().map(|&(a, b)| [name(a), name(b)]).collect::<Vec<_>>(),
            "v_structures": self
                .orientation
                .v_structures
                .iter()
                .map(|&(a, c, b)| [name(a), name(c), name(b)])
                .collect::<Vec<_>>(),
            "cpdag": serde_json::to_value(self.orientation.cpdag.to_json_value()).expect("cpdag json"),
            "tests_performed": self.skeleton.tests_performed,
            "orientation_conflicts": self.orientation.conflicts,
            "alpha": self.alpha,
            "seed": self.seed,
        })
    }
}

/// PC skeleton on data followed by orientation.
pub fn pc(data: &Dataset, cfg: &DiscoveryConfig) -> Result<DiscoveryReport> {
    let skeleton = pc_skeleton(data, cfg)?;
    let orientation = orient(&skeleton)?;
    Ok(DiscoveryReport {
        skeleton,
        orientation,
        alpha: cfg.alpha,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{all_dags, cpdag_of};
    use crate::scm::{Expr, NoiseSpec, Scm, Variable};

    fn linear(edges: &[(&str, &str, f64)], n: usize, seed: u64) -> Dataset {
        let names = ["X", "Y", "Z"];
        let vars = names
            .iter()
            .map(|&v| {
                let parents: Vec<&str> = edges.iter().filter(|e| e.1 == v).map(|e| e.0).collect();
                let expr = edges
                    .iter()
                    .filter(|e| e.1 == v)
                    .fold(Expr::noise(), |acc, e| acc + Expr::c(e.2) * Expr::var(e.0));
                Variable::new(v, &parents, expr, NoiseSpec::standard_normal())
            })
            .collect();
        Scm::new(vars).unwrap().sample(n, seed).unwrap()
    }

    #[test]
    fn collider_skeleton_and_orientation() {
        let d = linear(&[("X", "Y", 1.0), ("Z", "Y", 1.0)], 5000, 1);
        let cfg = DiscoveryConfig::default();
        let sgs = sgs_skeleton(&d, &cfg).unwrap();
        assert_eq!(sgs.edges, BTreeSet::from([(0, 1), (1, 2)]));
        assert_eq!(sgs.sepsets[&(0, 2)], NodeSet::new());
        let pc = pc_skeleton(&d, &cfg).unwrap();
        assert_eq!(pc.edges, sgs.edges);
        let o = orient(&pc).unwrap();
        assert_eq!(o.cpdag.directed(), &BTreeSet::from([(0, 1), (2, 1)]));
        assert!(o.cpdag.undirected().is_empty());
    }

    #[test]
    fn chain_stays_undirected() {
        let d = linear(&[("X", "Y", 1.0), ("Y", "Z", 1.0)], 5000, 2);
        let r = pc(&d, &DiscoveryConfig::default()).unwrap();
        assert_eq!(r.skeleton.edges, BTreeSet::from([(0, 1), (1, 2)]));
        assert_eq!(r.skeleton.sepsets[&(0, 2)], NodeSet::singleton(1));
        assert!(r.orientation.cpdag.directed().is_empty());
        assert_eq!(r.orientation.cpdag.undirected().len(), 2);
    }

    #[test]
    fn independent_columns_give_empty_skeleton() {
        let d = linear(&[], 2000, 3);
        let s = sgs_skeleton(&d, &DiscoveryConfig::default()).unwrap();
        assert!(s.edges.is_empty());
        let single = d.select(&["X"]).unwrap();
        assert!(pc_skeleton(&single, &DiscoveryConfig::default()).unwrap().edges.is_empty());
    }

    #[test]
    fn oracle_pc_recovers_cpdag_on_four_nodes() {
        let names: Vec<String> = ["A", "B", "C", "D"].iter().map(|s| s.to_string()).collect();
        for g in all_dags(&names) {
            let pc = pc_skeleton_with(&DsepOracle::new(&g), 4).unwrap();
            let sgs = sgs_skeleton_with(&DsepOracle::new(&g), 4).unwrap();
            assert_eq!(pc.edges, sgs.edges);
            assert_eq!(orient(&pc).unwrap().cpdag, cpdag_of(&g));
            assert_eq!(orient(&sgs).unwrap().cpdag, cpdag_of(&g));
        }
    }

    #[test]
    fn conflicting_colliders_keep_first() {
        // Skeleton A - B - C - D with sepsets that imply colliders at B
        // (A, C) and at C (B, D): B - C is claimed both ways.
        let skel = Skeleton {
            names: ["A", "B", "C", "D"].iter().map(|s| s.to_string()).collect(),
            edges: BTreeSet::from([(0, 1), (1, 2), (2, 3)]),
            sepsets: BTreeMap::from([
                ((0, 2), NodeSet::new()),
                ((0, 3), NodeSet::new()),
                ((1, 3), NodeSet::new()),
            ]),
            tests_performed: 0,
        };
        let o = orient(&skel).unwrap();
        assert_eq!(o.conflicts, 1);
        assert!(o.cpdag.directed().contains(&(2, 1)));
    }

    #[test]
    fn report_json_shape() {
        let d = linear(&[("X", "Y", 1.0), ("Z", "Y", 1.0)], 1000, 4);
        let r = pc(&d, &DiscoveryConfig::default()).unwrap();
        let v = r.to_json_value();
        for key in ["skeleton", "v_structures", "cpdag", "tests_performed", "alpha", "seed"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["v_structures"], json!([["X", "Y", "Z"]]));
    }

    #[test]
    fn config_validation() {
        let cfg = DiscoveryConfig {
            alpha: 1.0,
            ..DiscoveryConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
