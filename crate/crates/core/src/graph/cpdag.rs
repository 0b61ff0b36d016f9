use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::Dag;
use crate::error::{Error, Result};

/// Undirected edge set (pairs with `a < b`) and v-structures `(a, c, b)`
/// meaning `a → c ← b` with `a < b` non-adjacent.
pub type SkeletonAndVStructures = (BTreeSet<(usize, usize)>, BTreeSet<(usize, usize, usize)>);

pub fn skeleton_and_vstructures(g: &Dag) -> SkeletonAndVStructures {
    let skeleton = g.edges().into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
    let mut vs = BTreeSet::new();
    for c in 0..g.n() {
        let pa = g.parents(c);
        for (i, &a) in pa.iter().enumerate() {
            for &b in &pa[i + 1..] {
                if !g.adjacent(a, b) {
                    vs.insert((a, c, b));
                }
            }
        }
    }
    (skeleton, vs)
}

/// Same skeleton and same v-structures. Graphs must be over the same node
/// names; node order may differ.
pub fn markov_equivalent(g1: &Dag, g2: &Dag) -> Result<bool> {
    let a: BTreeSet<&String> = g1.names().iter().collect();
    let b: BTreeSet<&String> = g2.names().iter().collect();
    if a != b || g1.n() != g2.n() {
        return Err(Error::InvalidArgument("graphs are over different node sets".into()));
    }
    let remap: Vec<usize> = g2.names().iter().map(|n| g1.index_of(n).unwrap()).collect();
    let g2 = Dag::new(
        g1.names().iter().cloned(),
        g2.edges().into_iter().map(|(x, y)| (remap[x], remap[y])),
    )?;
    Ok(skeleton_and_vstructures(g1) == skeleton_and_vstructures(&g2))
}

/// Partially directed graph representing a Markov equivalence class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cpdag {
    names: Vec<String>,
    directed: BTreeSet<(usize, usize)>,
    undirected: BTreeSet<(usize, usize)>,
}

impl Cpdag {
    /// Undirected pairs are normalized to `(min, max)`.
    pub fn new<S: Into<String>>(
        names: impl IntoIterator<Item = S>,
        directed: impl IntoIterator<Item = (usize, usize)>,
        undirected: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let directed: BTreeSet<(usize, usize)> = directed.into_iter().collect();
        let undirected: BTreeSet<(usize, usize)> =
            undirected.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        // Acyclicity and index checks for the directed part.
        Dag::new(names.iter().cloned(), directed.iter().copied())?;
        for &(a, b) in &undirected {
            let n = names.len();
            if a >= n || b >= n {
                return Err(Error::InvalidIndex { index: a.max(b), n });
            }
            if a == b {
                return Err(Error::SelfLoop(names[a].clone()));
            }
            if directed.contains(&(a, b)) || directed.contains(&(b, a)) {
                return Err(Error::InvalidArgument(format!(
                    "edge {}-{} is both directed and undirected",
                    names[a], names[b]
                )));
            }
        }
        Ok(Cpdag {
            names,
            directed,
            undirected,
        })
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn directed(&self) -> &BTreeSet<(usize, usize)> {
        &self.directed
    }

    pub fn undirected(&self) -> &BTreeSet<(usize, usize)> {
        &self.undirected
    }

    pub fn is_fully_directed(&self) -> bool {
        self.undirected.is_empty()
    }

    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        self.directed
            .iter()
            .map(|&(a, b)| (a.min(b), a.max(b)))
            .chain(self.undirected.iter().copied())
            .collect()
    }

    pub fn to_json_value(&self) -> CpdagJson {
        let name = |i: usize| self.names[i].clone();
        CpdagJson {
            edges: self.directed.iter().map(|&(a, b)| [name(a), name(b)]).collect(),
            nodes: self.names.clone(),
            undirected_edges: self.undirected.iter().map(|&(a, b)| [name(a), name(b)]).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_json_value()).expect("cpdag json")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: CpdagJson = serde_json::from_str(s)?;
        let index: HashMap<&str, usize> = raw.nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let lookup = |s: &String| index.get(s.as_str()).copied().ok_or_else(|| Error::UnknownVariable(s.clone()));
        let pairs = |v: &[[String; 2]]| -> Result<Vec<(usize, usize)>> {
            v.iter().map(|[a, b]| Ok((lookup(a)?, lookup(b)?))).collect()
        };
        Cpdag::new(raw.nodes.iter().cloned(), pairs(&raw.edges)?, pairs(&raw.undirected_edges)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CpdagJson {
    pub edges: Vec<[String; 2]>,
    pub nodes: Vec<String>,
    pub undirected_edges: Vec<[String; 2]>,
}

/// Dense working form for orientation rules.
pub(crate) struct Pdag {
    n: usize,
    dir: Vec<Vec<bool>>,
    und: Vec<Vec<bool>>,
}

impl Pdag {
    pub(crate) fn from_skeleton(n: usize, skeleton: &BTreeSet<(usize, usize)>) -> Self {
        let mut und = vec![vec![false; n]; n];
        for &(a, b) in skeleton {
            und[a][b] = true;
            und[b][a] = true;
        }
        Pdag {
            n,
            dir: vec![vec![false; n]; n],
            und,
        }
    }

    fn from_cpdag(c: &Cpdag) -> Self {
        let mut p = Pdag::from_skeleton(c.n(), &c.undirected);
        for &(a, b) in &c.directed {
            p.dir[a][b] = true;
        }
        p
    }

    pub(crate) fn adjacent(&self, a: usize, b: usize) -> bool {
        self.dir[a][b] || self.dir[b][a] || self.und[a][b]
    }

    pub(crate) fn is_undirected(&self, a: usize, b: usize) -> bool {
        self.und[a][b]
    }

    pub(crate) fn is_directed(&self, a: usize, b: usize) -> bool {
        self.dir[a][b]
    }

    /// Orients `a - b` as `a → b`. Returns false when the edge is not
    /// currently undirected.
    pub(crate) fn orient(&mut self, a: usize, b: usize) -> bool {
        if !self.und[a][b] {
            return false;
        }
        self.und[a][b] = false;
        self.und[b][a] = false;
        self.dir[a][b] = true;
        true
    }

    /// Applies the four Meek rules until none fires.
    pub(crate) fn close(&mut self) {
        let n = self.n;
        loop {
            let mut changed = false;
            for a in 0..n {
                for b in 0..n {
                    if a != b && self.und[a][b] && self.meek_forces(a, b) {
                        self.orient(a, b);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }

    fn meek_forces(&self, a: usize, b: usize) -> bool {
        let n = self.n;
        // R1: c → a − b, c and b non-adjacent.
        if (0..n).any(|c| self.dir[c][a] && !self.adjacent(c, b)) {
            return true;
        }
        // R2: a → c → b with a − b.
        if (0..n).any(|c| self.dir[a][c] && self.dir[c][b]) {
            return true;
        }
        // R3: a − c → b, a − d → b, c and d non-adjacent.
        for c in 0..n {
            if !(self.und[a][c] && self.dir[c][b]) {
                continue;
            }
            for d in c + 1..n {
                if self.und[a][d] && self.dir[d][b] && !self.adjacent(c, d) {
                    return true;
                }
            }
        }
        // R4: a − d, a adjacent to c, c → d → b, c and b non-adjacent.
        for d in 0..n {
            if !(self.und[a][d] && self.dir[d][b]) {
                continue;
            }
            for c in 0..n {
                if c != a && c != b && self.dir[c][d] && self.adjacent(a, c) && !self.adjacent(c, b) {
                    return true;
                }
            }
        }
        false
    }

    pub(crate) fn into_cpdag(self, names: &[String]) -> Result<Cpdag> {
        let mut directed = Vec::new();
        let mut undirected = Vec::new();
        for a in 0..self.n {
            for b in 0..self.n {
                if self.dir[a][b] {
                    directed.push((a, b));
                }
                if a < b && self.und[a][b] {
                    undirected.push((a, b));
                }
            }
        }
        Cpdag::new(names.iter().cloned(), directed, undirected)
    }
}

/// Closes a partially directed graph under the Meek orientation rules.
pub fn meek_closure(c: &Cpdag) -> Result<Cpdag> {
    let mut p = Pdag::from_cpdag(c);
    p.close();
    p.into_cpdag(&c.names)
}

/// The CPDAG of the Markov equivalence class of `g`: v-structures oriented,
/// then closed under the Meek rules.
pub fn cpdag_of(g: &Dag) -> Cpdag {
    let (skeleton, vs) = skeleton_and_vstructures(g);
    let mut p = Pdag::from_skeleton(g.n(), &skeleton);
    for &(a, c, b) in &vs {
        p.orient(a, c);
        p.orient(b, c);
    }
    p.close();
    p.into_cpdag(g.names()).expect("orientations agree with a DAG")
}
