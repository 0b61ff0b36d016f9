use std::collections::VecDeque;

use super::{Dag, NodeSet};
use crate::error::{Error, Result};

/// `a ⊥ b | given` holds in every distribution Markovian to the graph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Independence {
    pub a: usize,
    pub b: usize,
    pub given: NodeSet,
}

/// Reachability ("Bayes-ball") d-separation test, linear in the number of edges.
pub fn d_separated(g: &Dag, a: &NodeSet, b: &NodeSet, z: &NodeSet) -> Result<bool> {
    g.check_set(a)?;
    g.check_set(b)?;
    g.check_set(z)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("d-separation query needs nonempty A and B".into()));
    }
    if !a.is_disjoint(b) || !a.is_disjoint(z) || !b.is_disjoint(z) {
        return Err(Error::OverlappingSets(format!("A={a} B={b} Z={z}")));
    }
    let reached = reachable(g, a, z);
    Ok(b.iter().all(|v| !reached[v]))
}

/// Nodes connected to `source` by a path that is active given `z`.
pub(crate) fn reachable(g: &Dag, source: &NodeSet, z: &NodeSet) -> Vec<bool> {
    let n = g.n();
    let in_z: Vec<bool> = (0..n).map(|i| z.contains(i)).collect();
    // Colliders are open when they are in Z or have a descendant in Z.
    let z_anc = g.ancestors(z);
    let mut opens_collider = vec![false; n];
    for i in z_anc.iter() {
        opens_collider[i] = true;
    }

    // visited[v][0]: arrived from a child (moving up), [1]: from a parent (moving down).
    let mut visited = vec![[false; 2]; n];
    let mut reached = vec![false; n];
    let mut queue: VecDeque<(usize, usize)> = source.iter().map(|v| (v, 0)).collect();
    while let Some((v, dir)) = queue.pop_front() {
        if visited[v][dir] {
            continue;
        }
        visited[v][dir] = true;
        if !in_z[v] {
            reached[v] = true;
        }
        if dir == 0 {
            if !in_z[v] {
                queue.extend(g.parents(v).iter().map(|&p| (p, 0)));
                queue.extend(g.children(v).iter().map(|&c| (c, 1)));
            }
        } else {
            if !in_z[v] {
                queue.extend(g.children(v).iter().map(|&c| (c, 1)));
            }
            if opens_collider[v] {
                queue.extend(g.parents(v).iter().map(|&p| (p, 0)));
            }
        }
    }
    reached
}

/// Every singleton-pair d-separation `a ⊥ b | Z` over all `Z ⊆ V∖{a,b}`.
///
/// Pairs are listed with `a < b`, conditioning sets in size-then-lexicographic
/// order.
pub fn implied_independences(g: &Dag, limit: usize) -> Result<Vec<Independence>> {
    let n = g.n();
    if n > limit {
        return Err(Error::LimitExceeded {
            what: "node count for independence enumeration",
            size: n,
            limit,
        });
    }
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let rest: Vec<usize> = (0..n).filter(|&v| v != a && v != b).collect();
            for z in NodeSet::subsets_of(&rest) {
                if d_separated(g, &NodeSet::singleton(a), &NodeSet::singleton(b), &z)? {
                    out.push(Independence { a, b, given: z });
                }
            }
        }
    }
    Ok(out)
}
