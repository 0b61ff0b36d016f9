use super::dsep::reachable;
use super::{Dag, NodeSet};
use crate::error::{Error, Result};

/// Valid adjustment sets for `t → y`, sorted by size then lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjustmentSets {
    pub sets: Vec<NodeSet>,
    /// Whether `Pa(t)` is among `sets`.
    pub parent_adjustment_valid: bool,
}

/// Nodes other than `t` lying on some directed path from `t` to `y`.
fn causal_nodes(g: &Dag, t: usize, y: usize) -> NodeSet {
    let de = g.descendants(&NodeSet::singleton(t));
    let an = g.ancestors(&NodeSet::singleton(y));
    de.iter().filter(|&v| v != t && an.contains(v)).collect()
}

/// Generalized adjustment criterion for a singleton treatment.
///
/// (i) `z` holds no descendant of a node (other than `t`) on a directed path
/// from `t` to `y`; (ii) `z` blocks every non-directed path from `t` to `y`,
/// checked as d-separation in the graph with the first edge of every directed
/// `t → y` path removed.
pub fn is_valid_adjustment_set(g: &Dag, t: usize, y: usize, z: &NodeSet) -> Result<bool> {
    g.check_index(t)?;
    g.check_index(y)?;
    g.check_set(z)?;
    if t == y {
        return Err(Error::InvalidArgument("treatment and outcome must differ".into()));
    }
    if z.contains(t) || z.contains(y) {
        return Err(Error::OverlappingSets("adjustment set contains treatment or outcome".into()));
    }
    let cn = causal_nodes(g, t, y);
    let forbidden = g.descendants(&cn);
    if !z.is_disjoint(&forbidden) {
        return Ok(false);
    }
    let first_edges: Vec<(usize, usize)> = g.children(t).iter().filter(|&&c| cn.contains(c)).map(|&c| (t, c)).collect();
    let backdoor = g.without_edges(&first_edges);
    Ok(!reachable(&backdoor, &NodeSet::singleton(t), z)[y])
}

/// Every valid adjustment set over `V ∖ {t, y}`.
pub fn enumerate_adjustment_sets(g: &Dag, t: usize, y: usize, limit: usize) -> Result<AdjustmentSets> {
    if g.n() > limit {
        return Err(Error::LimitExceeded {
            what: "node count for adjustment-set enumeration",
            size: g.n(),
            limit,
        });
    }
    g.check_index(t)?;
    g.check_index(y)?;
    let rest: Vec<usize> = (0..g.n()).filter(|&v| v != t && v != y).collect();
    let mut sets = Vec::new();
    for z in NodeSet::subsets_of(&rest) {
        if is_valid_adjustment_set(g, t, y, &z)? {
            sets.push(z);
        }
    }
    let pa: NodeSet = g.parents(t).iter().copied().collect();
    let parent_adjustment_valid = !pa.contains(y) && sets.contains(&pa);
    Ok(AdjustmentSets {
        sets,
        parent_adjustment_valid,
    })
}
