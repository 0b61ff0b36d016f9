//! Exact discrete causal graphical models.
//!
//! Every query enumerates the full joint, so the total state space is capped
//! (default `2^22` configurations). Variables are addressed by index in the
//! underlying [`Dag`]; values by their position in the variable's domain.

mod factor;
mod json;

pub use factor::Factor;

use rand::Rng;

use crate::data::{Column, ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::graph::{is_valid_adjustment_set, Dag, NodeSet};
use crate::rng;
use crate::scm::{values_match, Intervention, Scm};
use factor::{for_each_config, strides};

pub const DEFAULT_STATE_LIMIT: usize = 1 << 22;

/// Conditional table `p(child | parents)`, one row per parent configuration
/// in lexicographic order of parent domain positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    child: usize,
    parents: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

impl Cpt {
    pub fn child(&self) -> usize {
        self.child
    }

    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCgm {
    dag: Dag,
    domains: Vec<Vec<f64>>,
    cpts: Vec<Cpt>,
    limit: usize,
}

impl DiscreteCgm {
    /// `rows[i]` holds the CPT of node `i` over its parents in the order of
    /// `dag.parents(i)`.
    pub fn new(dag: Dag, domains: Vec<Vec<f64>>, rows: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let n = dag.n();
        if domains.len() != n || rows.len() != n {
            return Err(Error::InvalidArgument(format!("need a domain and a CPT for each of the {n} nodes")));
        }
        for (i, d) in domains.iter().enumerate() {
            if d.is_empty() || d.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("`{}` needs a non-empty finite domain", dag.name(i))));
            }
            for (a, x) in d.iter().enumerate() {
                if d[..a].iter().any(|y| values_match(*x, *y)) {
                    return Err(Error::InvalidArgument(format!("duplicate value {x} in domain of `{}`", dag.name(i))));
                }
            }
        }
        let mut cpts = Vec::with_capacity(n);
        for (i, table) in rows.into_iter().enumerate() {
            let parents = dag.parents(i).to_vec();
            let expected: usize = parents.iter().map(|&p| domains[p].len()).product();
            if table.len() != expected {
                return Err(Error::InvalidArgument(format!(
                    "CPT of `{}` has {} rows, expected {expected}",
                    dag.name(i),
                    table.len()
                )));
            }
            for row in &table {
                if row.len() != domains[i].len() || row.iter().any(|&p| !(p >= 0.0)) {
                    return Err(Error::InvalidArgument(format!(
                        "CPT row of `{}` must hold {} non-negative probabilities",
                        dag.name(i),
                        domains[i].len()
                    )));
                }
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidArgument(format!(
                        "CPT row of `{}` sums to {total}, not 1",
                        dag.name(i)
                    )));
                }
            }
            cpts.push(Cpt {
                child: i,
                parents,
                rows: table,
            });
        }
        Ok(DiscreteCgm {
            dag,
            domains,
            cpts,
            limit: DEFAULT_STATE_LIMIT,
        })
    }

    /// CPT rows drawn uniformly from the probability simplex; domain of node
    /// `i` is `0 .. cards[i]`.
    pub fn random<R: Rng + ?Sized>(dag: Dag, cards: &[usize], rng: &mut R) -> Result<Self> {
        if cards.len() != dag.n() || cards.contains(&0) {
            return Err(Error::InvalidArgument("need a positive cardinality per node".into()));
        }
        let domains: Vec<Vec<f64>> = cards.iter().map(|&c| (0..c).map(|v| v as f64).collect()).collect();
        let rows = (0..dag.n())
            .map(|i| {
                let n_rows: usize = dag.parents(i).iter().map(|&p| cards[p]).product();
                (0..n_rows).map(|_| random_simplex(cards[i], rng)).collect()
            })
            .collect();
        DiscreteCgm::new(dag, domains, rows)
    }

    /// Maximum-likelihood CPTs from the dataset columns named like the graph
    /// nodes; domains are the observed values in ascending order.
    pub fn fit_counts(dag: Dag, data: &Dataset) -> Result<Self> {
        let cols: Vec<&[f64]> = dag.names().iter().map(|n| data.values(n)).collect::<Result<_>>()?;
        if data.n_rows() == 0 {
            return Err(Error::InsufficientData("cannot fit a CGM to an empty dataset".into()));
        }
        let domains: Vec<Vec<f64>> = cols
            .iter()
            .map(|c| {
                let mut d = c.to_vec();
                d.sort_by(f64::total_cmp);
                d.dedup();
                d
            })
            .collect();
        let pos = |i: usize, v: f64| domains[i].binary_search_by(|x| x.total_cmp(&v)).expect("observed value");
        let mut rows = Vec::with_capacity(dag.n());
        for i in 0..dag.n() {
            let parents = dag.parents(i);
            let pc: Vec<usize> = parents.iter().map(|&p| domains[p].len()).collect();
            let n_rows: usize = pc.iter().product();
            let mut counts = vec![vec![0.0; domains[i].len()]; n_rows];
            for r in 0..data.n_rows() {
                let flat = parents.iter().zip(&pc).fold(0, |acc, (&p, &c)| acc * c + pos(p, cols[p][r]));
                counts[flat][pos(i, cols[i][r])] += 1.0;
            }
            for (flat, row) in counts.iter_mut().enumerate() {
                let total: f64 = row.iter().sum();
                if total == 0.0 {
                    return Err(Error::Positivity(format!(
                        "no rows for parent configuration {flat} of `{}`",
                        dag.name(i)
                    )));
                }
                row.iter_mut().for_each(|v| *v /= total);
            }
            rows.push(counts);
        }
        DiscreteCgm::new(dag, domains, rows)
    }

    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = limit;
        self
    }

    /// Copy with node `i`'s CPT replaced.
    pub fn with_cpt(&self, i: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        self.dag.check_index(i)?;
        let mut all: Vec<Vec<Vec<f64>>> = self.cpts.iter().map(|c| c.rows.clone()).collect();
        all[i] = rows;
        Ok(DiscreteCgm::new(self.dag.clone(), self.domains.clone(), all)?.with_limit(self.limit))
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn n(&self) -> usize {
        self.dag.n()
    }

    pub fn domains(&self) -> &[Vec<f64>] {
        &self.domains
    }

    pub fn domain(&self, i: usize) -> &[f64] {
        &self.domains[i]
    }

    pub fn cpt(&self, i: usize) -> &Cpt {
        &self.cpts[i]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.dag.index_of(name)
    }

    fn cards(&self) -> Vec<usize> {
        self.domains.iter().map(Vec::len).collect()
    }

    /// Position of `value` in the domain of node `i`.
    pub fn value_position(&self, i: usize, value: f64) -> Result<usize> {
        self.dag.check_index(i)?;
        self.domains[i].iter().position(|&d| values_match(d, value)).ok_or_else(|| {
            Error::InvalidArgument(format!("value {value} outside the domain of `{}`", self.dag.name(i)))
        })
    }

    fn check_state_space(&self) -> Result<()> {
        let mut size: usize = 1;
        for d in &self.domains {
            size = size.saturating_mul(d.len());
        }
        if size > self.limit {
            return Err(Error::LimitExceeded {
                what: "joint state space",
                size,
                limit: self.limit,
            });
        }
        Ok(())
    }

    fn row_index(&self, i: usize, config: &[usize]) -> usize {
        let cpt = &self.cpts[i];
        cpt.parents.iter().fold(0, |acc, &p| acc * self.domains[p].len() + config[p])
    }

    /// Product of CPTs, with `fixed[i] = Some(pos)` replacing node `i`'s
    /// factor by a point mass.
    fn product(&self, fixed: &[Option<usize>]) -> Result<Factor> {
        self.check_state_space()?;
        let cards = self.cards();
        let mut values = vec![0.0; cards.iter().product()];
        for_each_config(&cards, |config, flat| {
            let mut p = 1.0;
            for i in 0..config.len() {
                p *= match fixed[i] {
                    Some(v) => (config[i] == v) as u8 as f64,
                    None => self.cpts[i].rows[self.row_index(i, config)][config[i]],
                };
                if p == 0.0 {
                    break;
                }
            }
            values[flat] = p;
        });
        Factor::new((0..self.n()).collect(), cards, values)
    }

    /// Joint distribution as the product of all conditionals.
    pub fn joint(&self) -> Result<Factor> {
        self.product(&vec![None; self.n()])
    }

    /// Marginal joint of `vars` (in the given order).
    pub fn marginal(&self, vars: &[usize]) -> Result<Factor> {
        for &v in vars {
            self.dag.check_index(v)?;
        }
        self.joint()?.marginalize(vars)
    }

    /// `p(query | given)` over the domain of `query`.
    pub fn condition(&self, query: usize, given: &[(usize, f64)]) -> Result<Vec<f64>> {
        self.dag.check_index(query)?;
        let evidence: Vec<(usize, usize)> = given
            .iter()
            .map(|&(v, x)| Ok((v, self.value_position(v, x)?)))
            .collect::<Result<_>>()?;
        let joint = self.joint()?;
        let mut out = vec![0.0; self.domains[query].len()];
        for_each_config(joint.cards(), |config, flat| {
            if evidence.iter().all(|&(v, x)| config[v] == x) {
                out[config[query]] += joint.values()[flat];
            }
        });
        let total: f64 = out.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroProbability(self.describe(&evidence)));
        }
        Ok(out.into_iter().map(|p| p / total).collect())
    }

    fn describe(&self, assignment: &[(usize, usize)]) -> String {
        let parts: Vec<String> = assignment
            .iter()
            .map(|&(v, x)| format!("{}={}", self.dag.name(v), self.domains[v][x]))
            .collect();
        if parts.is_empty() {
            "{}".to_string()
        } else {
            format!("{{{}}}", parts.join(", "))
        }
    }

    fn fixed_positions(&self, iv: &Intervention) -> Result<Vec<Option<usize>>> {
        let mut fixed = vec![None; self.n()];
        for (name, value) in iv.iter() {
            let i = self.index_of(name)?;
            fixed[i] = Some(self.value_position(i, value)?);
        }
        Ok(fixed)
    }

    /// Interventional joint: point masses at the intervened values times the
    /// untouched conditionals.
    pub fn truncated_factorization(&self, iv: &Intervention) -> Result<Factor> {
        self.product(&self.fixed_positions(iv)?)
    }

    /// `p(query | do(iv))`.
    pub fn interventional(&self, query: usize, iv: &Intervention) -> Result<Vec<f64>> {
        self.dag.check_index(query)?;
        Ok(self.truncated_factorization(iv)?.marginalize(&[query])?.values().to_vec())
    }

    /// `p(y | do(t))` for every value of `t` computed by the truncated
    /// factorization; rows indexed by the domain position of `t`.
    pub fn do_table(&self, t: usize, y: usize) -> Result<Vec<Vec<f64>>> {
        self.dag.check_index(t)?;
        let name = self.dag.name(t).to_string();
        self.domains[t]
            .iter()
            .map(|&v| self.interventional(y, &Intervention::new().set(&name, v)))
            .collect()
    }

    /// `Σ_z p(z) p(y | t, z)` for every value of `t`; rows indexed by the
    /// domain position of `t`.
    pub fn adjustment_formula(&self, t: usize, y: usize, z: &NodeSet) -> Result<Vec<Vec<f64>>> {
        self.dag.check_index(t)?;
        self.dag.check_index(y)?;
        self.dag.check_set(z)?;
        if t == y || z.contains(t) || z.contains(y) {
            return Err(Error::OverlappingSets("treatment, outcome and adjustment set".into()));
        }
        let mut scope = vec![t, y];
        scope.extend(z.iter());
        let m = self.marginal(&scope)?;
        let (ct, cy) = (self.domains[t].len(), self.domains[y].len());
        let zc: Vec<usize> = z.iter().map(|v| self.domains[v].len()).collect();
        let zs = strides(&zc);
        let nz: usize = zc.iter().product();
        let block = nz;
        let at = |ti: usize, yi: usize, zf: usize| m.values()[(ti * cy + yi) * block + zf];
        let mut out = vec![vec![0.0; cy]; ct];
        let z_vars = z.to_vec();
        let mut zconf = vec![0usize; zc.len()];
        for zf in 0..nz {
            let mut rem = zf;
            for (k, s) in zs.iter().enumerate() {
                zconf[k] = rem / s;
                rem %= s;
            }
            let pz: f64 = (0..ct).flat_map(|ti| (0..cy).map(move |yi| (ti, yi))).map(|(ti, yi)| at(ti, yi, zf)).sum();
            if pz <= 0.0 {
                continue;
            }
            for (ti, row) in out.iter_mut().enumerate() {
                let ptz: f64 = (0..cy).map(|yi| at(ti, yi, zf)).sum();
                if ptz <= 0.0 {
                    let mut stratum: Vec<(usize, usize)> = z_vars.iter().copied().zip(zconf.iter().copied()).collect();
                    stratum.push((t, ti));
                    return Err(Error::OverlapViolation(self.describe(&stratum)));
                }
                for (yi, cell) in row.iter_mut().enumerate() {
                    *cell += pz * at(ti, yi, zf) / ptz;
                }
            }
        }
        Ok(out)
    }

    /// `Σ_m p(m | t) Σ_t' p(t') p(y | m, t')`, using only the observational
    /// margin over `(t, mediator, y)`.
    pub fn front_door_formula(&self, t: usize, mediator: usize, y: usize) -> Result<Vec<Vec<f64>>> {
        let g = &self.dag;
        for v in [t, mediator, y] {
            g.check_index(v)?;
        }
        if t == mediator || t == y || mediator == y {
            return Err(Error::OverlappingSets("treatment, mediator and outcome".into()));
        }
        check_front_door_shape(g, t, mediator, y)?;
        let m = self.marginal(&[t, mediator, y])?;
        let (ct, cm, cy) = (self.domains[t].len(), self.domains[mediator].len(), self.domains[y].len());
        let at = |ti: usize, mi: usize, yi: usize| m.values()[(ti * cm + mi) * cy + yi];
        let p_tm = |ti: usize, mi: usize| (0..cy).map(|yi| at(ti, mi, yi)).sum::<f64>();
        let p_t: Vec<f64> = (0..ct).map(|ti| (0..cm).map(|mi| p_tm(ti, mi)).sum()).collect();
        for ti in 0..ct {
            for mi in 0..cm {
                if p_tm(ti, mi) <= 0.0 {
                    return Err(Error::Positivity(format!(
                        "p({}, {}) = 0",
                        self.describe(&[(t, ti)]),
                        self.describe(&[(mediator, mi)])
                    )));
                }
            }
        }
        let mut out = vec![vec![0.0; cy]; ct];
        for (ti, row) in out.iter_mut().enumerate() {
            for mi in 0..cm {
                let pm_t = p_tm(ti, mi) / p_t[ti];
                for (yi, cell) in row.iter_mut().enumerate() {
                    let inner: f64 = (0..ct).map(|tp| p_t[tp] * at(tp, mi, yi) / p_tm(tp, mi)).sum();
                    *cell += pm_t * inner;
                }
            }
        }
        Ok(out)
    }

    /// Conditional mutual information `I(a; b | z)` in nats.
    pub fn cmi(&self, a: usize, b: usize, z: &NodeSet) -> Result<f64> {
        self.dag.check_index(a)?;
        self.dag.check_index(b)?;
        self.dag.check_set(z)?;
        if z.contains(a) || z.contains(b) {
            return Ok(0.0);
        }
        let zv = z.to_vec();
        let nz: usize = zv.iter().map(|&v| self.domains[v].len()).product();
        if a == b {
            let mut scope = vec![a];
            scope.extend(&zv);
            let m = self.marginal(&scope)?;
            let ca = self.domains[a].len();
            let mut h = 0.0;
            for zf in 0..nz {
                let pz: f64 = (0..ca).map(|ai| m.values()[ai * nz + zf]).sum();
                for ai in 0..ca {
                    let p = m.values()[ai * nz + zf];
                    if p > 0.0 {
                        h -= p * (p / pz).ln();
                    }
                }
            }
            return Ok(h);
        }
        let mut scope = vec![a, b];
        scope.extend(&zv);
        let m = self.marginal(&scope)?;
        let (ca, cb) = (self.domains[a].len(), self.domains[b].len());
        let at = |ai: usize, bi: usize, zf: usize| m.values()[(ai * cb + bi) * nz + zf];
        let mut total = 0.0;
        for zf in 0..nz {
            let pz: f64 = (0..ca).map(|ai| (0..cb).map(|bi| at(ai, bi, zf)).sum::<f64>()).sum();
            if pz <= 0.0 {
                continue;
            }
            for ai in 0..ca {
                let paz: f64 = (0..cb).map(|bi| at(ai, bi, zf)).sum();
                for bi in 0..cb {
                    let p = at(ai, bi, zf);
                    if p > 0.0 {
                        let pbz: f64 = (0..ca).map(|aj| at(aj, bi, zf)).sum();
                        total += p * (p * pz / (paz * pbz)).ln();
                    }
                }
            }
        }
        Ok(total.max(0.0))
    }

    /// The causal factorization: one factor per node with scope
    /// `(parents..., child)`.
    pub fn causal_factors(&self) -> Vec<Factor> {
        self.cpts
            .iter()
            .map(|c| {
                let mut scope = c.parents.clone();
                scope.push(c.child);
                let cards = scope.iter().map(|&v| self.domains[v].len()).collect();
                Factor::new(scope, cards, c.rows.concat()).expect("cpt shape")
            })
            .collect()
    }

    /// Chain-rule factors `p(X_{order[k]} | X_{order[k+1]}, ...)` for a
    /// variable ordering; their product is the joint whatever the ordering.
    pub fn entangled_factors(&self, order: &[usize]) -> Result<Vec<Factor>> {
        let mut sorted = order.to_vec();
        sorted.sort_unstable();
        if sorted != (0..self.n()).collect::<Vec<_>>() {
            return Err(Error::InvalidArgument("ordering must list every node once".into()));
        }
        let joint = self.joint()?;
        (0..order.len())
            .map(|k| {
                let mut scope = order[k + 1..].to_vec();
                scope.push(order[k]);
                let m = joint.marginalize(&scope)?;
                let c = *m.cards().last().unwrap();
                let mut values = m.values().to_vec();
                for chunk in values.chunks_mut(c) {
                    let s: f64 = chunk.iter().sum();
                    if s > 0.0 {
                        chunk.iter_mut().for_each(|p| *p /= s);
                    }
                }
                Factor::new(scope, m.cards().to_vec(), values)
            })
            .collect()
    }

    /// Ancestral sampling; node `i` draws from stream `i`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        let order = self.dag.topological_order();
        let mut streams: Vec<_> = (0..self.n()).map(|i| rng::stream(seed, i as u64)).collect();
        let mut pos = vec![vec![0usize; n]; self.n()];
        let mut config = vec![0usize; self.n()];
        for r in 0..n {
            for &i in &order {
                let row = &self.cpts[i].rows[self.row_index(i, &config)];
                let u: f64 = streams[i].gen();
                let mut acc = 0.0;
                let mut pick = row.len() - 1;
                for (k, p) in row.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        pick = k;
                        break;
                    }
                }
                config[i] = pick;
                pos[i][r] = pick;
            }
        }
        let cols = (0..self.n())
            .map(|i| {
                let d = &self.domains[i];
                let kind = if d.iter().all(|&v| v == 0.0 || v == 1.0) {
                    ColumnKind::Binary
                } else if d.iter().all(|v| v.fract() == 0.0) {
                    ColumnKind::Categorical
                } else {
                    ColumnKind::Real
                };
                Column::new(self.dag.name(i), kind, pos[i].iter().map(|&k| d[k]).collect())
            })
            .collect::<Result<_>>()?;
        Dataset::new(cols)
    }

    /// Exact push-forward of a finite-noise SCM whose variables all declare
    /// a domain.
    pub fn from_scm(scm: &Scm) -> Result<Self> {
        let vars = scm.variables();
        let mut domains = Vec::with_capacity(vars.len());
        let mut atoms = Vec::with_capacity(vars.len());
        for v in vars {
            domains.push(
                v.domain
                    .clone()
                    .ok_or_else(|| Error::Unsupported(format!("`{}` has no finite domain", v.name)))?,
            );
            atoms.push(
                v.noise
                    .atoms()
                    .ok_or_else(|| Error::Unsupported(format!("`{}` has continuous noise", v.name)))?,
            );
        }
        let dag = scm.induced_graph().clone();
        let mut rows = Vec::with_capacity(vars.len());
        let mut vals = vec![0.0; vars.len()];
        for i in 0..vars.len() {
            let parents = dag.parents(i).to_vec();
            let pc: Vec<usize> = parents.iter().map(|&p| domains[p].len()).collect();
            let mut table = Vec::new();
            let mut err = None;
            for_each_config(&pc, |config, _| {
                for (k, &p) in parents.iter().enumerate() {
                    vals[p] = domains[p][config[k]];
                }
                let mut row = vec![0.0; domains[i].len()];
                for &(u, w) in &atoms[i] {
                    let x = match scm.compiled(i).eval_slice(&vals, u) {
                        Ok(x) => x,
                        Err(e) => {
                            err.get_or_insert(e);
                            return;
                        }
                    };
                    match domains[i].iter().position(|&d| values_match(d, x)) {
                        Some(k) => row[k] += w,
                        None => {
                            err.get_or_insert(Error::InvalidArgument(format!(
                                "mechanism of `{}` produces {x}, outside its domain",
                                vars[i].name
                            )));
                            return;
                        }
                    }
                }
                table.push(row);
            });
            if let Some(e) = err {
                return Err(e);
            }
            rows.push(table);
        }
        DiscreteCgm::new(dag, domains, rows)
    }
}

/// Every directed path from `t` to `y` passes through the mediator, nothing
/// but `t` confounds `t -> mediator`, and `t` blocks every back-door path
/// from the mediator to `y`.
fn check_front_door_shape(g: &Dag, t: usize, mediator: usize, y: usize) -> Result<()> {
    let cut = g.without_edges(
        &g.parents(mediator).iter().map(|&p| (p, mediator)).collect::<Vec<_>>(),
    );
    let bypass = cut.descendants(&NodeSet::singleton(t)).contains(y);
    let name = |v: usize| g.name(v).to_string();
    if bypass {
        return Err(Error::Unsupported(format!(
            "a directed path from `{}` to `{}` avoids `{}`",
            name(t),
            name(y),
            name(mediator)
        )));
    }
    if !g.has_edge(t, mediator) || !is_valid_adjustment_set(g, t, mediator, &NodeSet::new())? {
        return Err(Error::Unsupported(format!(
            "`{}` -> `{}` is not unconfounded",
            name(t),
            name(mediator)
        )));
    }
    if !is_valid_adjustment_set(g, mediator, y, &NodeSet::singleton(t))? {
        return Err(Error::Unsupported(format!(
            "`{}` does not block the back-door paths from `{}` to `{}`",
            name(t),
            name(mediator),
            name(y)
        )));
    }
    Ok(())
}

fn random_simplex<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}
