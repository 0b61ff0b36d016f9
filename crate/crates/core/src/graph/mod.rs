//! Directed acyclic graphs over named variables.
//!
//! Nodes are addressed by index internally and by name in serialized form.
//! Every collection returned from this module is ordered deterministically.

mod adjust;
mod count;
mod cpdag;
mod dsep;

pub use adjust::{enumerate_adjustment_sets, is_valid_adjustment_set, AdjustmentSets};
pub use count::{all_dags, count_dags};
pub use cpdag::{cpdag_of, markov_equivalent, meek_closure, skeleton_and_vstructures, Cpdag, CpdagJson};
pub(crate) use cpdag::Pdag;
pub use dsep::{d_separated, implied_independences, Independence};

use std::collections::{BTreeSet, BinaryHeap, HashMap, VecDeque};
use std::cmp::Reverse;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on node count for exhaustive independence enumeration.
pub const DEFAULT_INDEPENDENCE_LIMIT: usize = 8;
/// Default cap on node count for exhaustive adjustment-set enumeration.
pub const DEFAULT_ADJUSTMENT_LIMIT: usize = 12;

/// A set of node indices, always iterated in ascending order.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeSet(BTreeSet<usize>);

impl NodeSet {
    pub fn new() -> Self {
        NodeSet(BTreeSet::new())
    }

    pub fn singleton(i: usize) -> Self {
        NodeSet(BTreeSet::from([i]))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.contains(&i)
    }

    pub fn insert(&mut self, i: usize) -> bool {
        self.0.insert(i)
    }

    pub fn remove(&mut self, i: usize) -> bool {
        self.0.remove(&i)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.0.iter().copied().collect()
    }

    pub fn is_disjoint(&self, other: &NodeSet) -> bool {
        self.0.is_disjoint(&other.0)
    }

    pub fn is_subset(&self, other: &NodeSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn union(&self, other: &NodeSet) -> NodeSet {
        NodeSet(self.0.union(&other.0).copied().collect())
    }

    /// Ordering used when listing sets: by size, then lexicographically.
    pub fn size_lex_cmp(&self, other: &NodeSet) -> std::cmp::Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.to_vec().cmp(&other.to_vec()))
    }

    /// All subsets of `items` in size-then-lexicographic order.
    pub fn subsets_of(items: &[usize]) -> Vec<NodeSet> {
        let mut out = Vec::with_capacity(1 << items.len());
        for k in 0..=items.len() {
            combinations(items, k, &mut |c| out.push(c.iter().copied().collect()));
        }
        out
    }
}

impl FromIterator<usize> for NodeSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        NodeSet(iter.into_iter().collect())
    }
}

impl<const N: usize> From<[usize; N]> for NodeSet {
    fn from(a: [usize; N]) -> Self {
        a.into_iter().collect()
    }
}

impl fmt::Display for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// Calls `f` with every `k`-combination of `items`, in lexicographic order.
pub(crate) fn combinations(items: &[usize], k: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..items.len() {
            if items.len() - i < k - cur.len() {
                break;
            }
            cur.push(items[i]);
            rec(items, k, i + 1, cur, f);
            cur.pop();
        }
    }
    let mut cur = Vec::with_capacity(k);
    rec(items, k, 0, &mut cur, f);
}

/// A directed acyclic graph. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    names: Vec<String>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl Dag {
    /// Builds a DAG, rejecting self-loops, duplicate edges, duplicate names
    /// and directed cycles.
    pub fn new<S: Into<String>>(
        names: impl IntoIterator<Item = S>,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let mut seen = HashMap::new();
        for (i, name) in names.iter().enumerate() {
            if seen.insert(name.as_str(), i).is_some() {
                return Err(Error::DuplicateName(name.clone()));
            }
        }
        let n = names.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            for idx in [a, b] {
                if idx >= n {
                    return Err(Error::InvalidIndex { index: idx, n });
                }
            }
            if a == b {
                return Err(Error::SelfLoop(names[a].clone()));
            }
            if !set.insert((a, b)) {
                return Err(Error::DuplicateEdge(names[a].clone(), names[b].clone()));
            }
            parents[b].push(a);
            children[a].push(b);
        }
        parents.iter_mut().for_each(|p| p.sort_unstable());
        children.iter_mut().for_each(|c| c.sort_unstable());
        let dag = Dag {
            names,
            parents,
            children,
        };
        if dag.kahn_order().len() != n {
            return Err(Error::Cycle);
        }
        Ok(dag)
    }

    /// Builds a DAG from node names and name-addressed edges.
    pub fn from_names(names: &[&str], edges: &[(&str, &str)]) -> Result<Self> {
        let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let lookup = |s: &str| index.get(s).copied().ok_or_else(|| Error::UnknownVariable(s.to_string()));
        let mut idx_edges = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            idx_edges.push((lookup(a)?, lookup(b)?));
        }
        Dag::new(names.iter().copied(), idx_edges)
    }

    /// The graph with no edges over `names`.
    pub fn empty<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        Dag::new(names, std::iter::empty())
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Resolves a list of names to a node set.
    pub fn node_set(&self, names: &[&str]) -> Result<NodeSet> {
        names.iter().map(|n| self.index_of(n)).collect()
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.children[a].binary_search(&b).is_ok()
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.has_edge(a, b) || self.has_edge(b, a)
    }

    pub fn edge_count(&self) -> usize {
        self.children.iter().map(Vec::len).sum()
    }

    /// Edges sorted by (parent, child).
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (a, ch) in self.children.iter().enumerate() {
            out.extend(ch.iter().map(|&b| (a, b)));
        }
        out
    }

    pub fn check_index(&self, i: usize) -> Result<()> {
        if i < self.n() {
            Ok(())
        } else {
            Err(Error::InvalidIndex { index: i, n: self.n() })
        }
    }

    pub fn check_set(&self, s: &NodeSet) -> Result<()> {
        s.iter().try_for_each(|i| self.check_index(i))
    }

    /// Nodes reachable from `from` along directed edges, including `from` itself.
    pub fn descendants(&self, from: &NodeSet) -> NodeSet {
        self.reach(from, |i| &self.children[i])
    }

    /// Nodes with a directed path into `to`, including `to` itself.
    pub fn ancestors(&self, to: &NodeSet) -> NodeSet {
        self.reach(to, |i| &self.parents[i])
    }

    fn reach<'a>(&'a self, start: &NodeSet, next: impl Fn(usize) -> &'a [usize]) -> NodeSet {
        let mut seen = vec![false; self.n()];
        let mut queue: VecDeque<usize> = start.iter().collect();
        for i in start.iter() {
            seen[i] = true;
        }
        while let Some(v) = queue.pop_front() {
            for &w in next(v) {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        (0..self.n()).filter(|&i| seen[i]).collect()
    }

    fn kahn_order(&self) -> Vec<usize> {
        let n = self.n();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut heap: BinaryHeap<Reverse<usize>> =
            (0..n).filter(|&i| indeg[i] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(v)) = heap.pop() {
            order.push(v);
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    heap.push(Reverse(c));
                }
            }
        }
        order
    }

    /// Parents before children; ties broken by smallest node index first.
    pub fn topological_order(&self) -> Vec<usize> {
        self.kahn_order()
    }

    /// Graph surgery: removes every edge pointing into `targets`.
    pub fn remove_incoming(&self, targets: &NodeSet) -> Dag {
        let edges = self.edges().into_iter().filter(|&(_, b)| !targets.contains(b));
        Dag::new(self.names.iter().cloned(), edges).expect("subgraph of a DAG is a DAG")
    }

    /// Removes the listed edges.
    pub fn without_edges(&self, removed: &[(usize, usize)]) -> Dag {
        let edges = self.edges().into_iter().filter(|e| !removed.contains(e));
        Dag::new(self.names.iter().cloned(), edges).expect("subgraph of a DAG is a DAG")
    }

    pub fn to_json_value(&self) -> GraphJson {
        GraphJson {
            edges: self
                .edges()
                .into_iter()
                .map(|(a, b)| [self.names[a].clone(), self.names[b].clone()])
                .collect(),
            nodes: self.names.clone(),
        }
    }

    /// Serializes as `{"edges": [[parent, child], ...], "nodes": [...]}`
    /// with keys sorted and edges ordered by (parent, child) index.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_json_value()).expect("graph json")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: GraphJson = serde_json::from_str(s)?;
        Dag::try_from(raw)
    }
}

/// Wire form of a graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphJson {
    pub edges: Vec<[String; 2]>,
    pub nodes: Vec<String>,
}

impl TryFrom<GraphJson> for Dag {
    type Error = Error;

    fn try_from(raw: GraphJson) -> Result<Self> {
        let names: Vec<&str> = raw.nodes.iter().map(String::as_str).collect();
        let edges: Vec<(&str, &str)> = raw.edges.iter().map(|[a, b]| (a.as_str(), b.as_str())).collect();
        Dag::from_names(&names, &edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_cycles_and_bad_edges() {
        assert!(matches!(
            Dag::from_names(&["A", "B"], &[("A", "B"), ("B", "A")]),
            Err(Error::Cycle)
        ));
        assert!(matches!(Dag::from_names(&["A"], &[("A", "A")]), Err(Error::SelfLoop(_))));
        assert!(matches!(
            Dag::from_names(&["A", "B"], &[("A", "B"), ("A", "B")]),
            Err(Error::DuplicateEdge(..))
        ));
        assert!(matches!(Dag::from_names(&["A", "A"], &[]), Err(Error::DuplicateName(_))));
        assert!(matches!(Dag::new(["A"], [(0, 3)]), Err(Error::InvalidIndex { .. })));
    }

    #[test]
    fn topological_order_examples() {
        let g = Dag::from_names(&["X1", "X2", "X3"], &[("X1", "X2"), ("X1", "X3"), ("X2", "X3")]).unwrap();
        assert_eq!(g.topological_order(), vec![0, 1, 2]);
        let e = Dag::empty(["a", "b", "c"]).unwrap();
        assert_eq!(e.topological_order(), vec![0, 1, 2]);
        let r = Dag::from_names(&["a", "b", "c"], &[("c", "a"), ("b", "a")]).unwrap();
        assert_eq!(r.topological_order(), vec![1, 2, 0]);
    }

    #[test]
    fn json_round_trip_is_byte_stable() {
        let g = Dag::from_names(&["X", "Y", "Z"], &[("Z", "Y"), ("X", "Y")]).unwrap();
        let s = g.to_json();
        assert_eq!(s, r#"{"edges":[["X","Y"],["Z","Y"]],"nodes":["X","Y","Z"]}"#);
        let back = Dag::from_json(&s).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.to_json(), s);
    }

    #[test]
    fn json_rejects_unknown_keys() {
        assert!(Dag::from_json(r#"{"nodes":["A"],"edges":[],"extra":1}"#).is_err());
    }

    #[test]
    fn surgery_removes_incoming_edges() {
        let g = Dag::from_names(&["X1", "X2", "X3"], &[("X1", "X2"), ("X1", "X3"), ("X2", "X3")]).unwrap();
        let g2 = g.remove_incoming(&NodeSet::singleton(1));
        assert_eq!(g2.edges(), vec![(0, 2), (1, 2)]);
        assert_eq!(g.remove_incoming(&NodeSet::singleton(0)), g);
    }

    #[test]
    fn subsets_are_size_then_lex() {
        let s = NodeSet::subsets_of(&[1, 2, 3]);
        let v: Vec<Vec<usize>> = s.iter().map(NodeSet::to_vec).collect();
        assert_eq!(
            v,
            vec![vec![], vec![1], vec![2], vec![3], vec![1, 2], vec![1, 3], vec![2, 3], vec![1, 2, 3]]
        );
    }
}
