use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::DiscoveryConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{all_dags, Dag};
use crate::linalg::{design, Ols};

/// Node cap for exhaustive search (29281 DAGs on five nodes).
pub const EXHAUSTIVE_LIMIT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreModel {
    /// Categorical conditionals, for all-discrete data.
    Multinomial,
    /// Linear regression on the parents with Gaussian residuals.
    LinearGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    Exhaustive,
    /// Hill climbing from the empty graph over single-edge additions,
    /// deletions and reversals.
    Greedy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub dag: Dag,
    pub score: f64,
    pub graphs_scored: usize,
}

fn pick_model(data: &Dataset, model: Option<ScoreModel>) -> Result<ScoreModel> {
    if let Some(m) = model {
        return Ok(m);
    }
    let discrete = data.columns().iter().filter(|c| c.is_discrete()).count();
    if discrete == data.n_cols() {
        Ok(ScoreModel::Multinomial)
    } else if discrete == 0 {
        Ok(ScoreModel::LinearGaussian)
    } else {
        Err(Error::Unsupported("BIC over mixed discrete and real columns".into()))
    }
}

/// Per-node BIC terms with a cache keyed by `(node, parent set)`.
struct LocalScorer<'a> {
    data: &'a Dataset,
    model: ScoreModel,
    /// Per column: value codes `0..card` and the cardinality.
    codes: Vec<(Vec<usize>, usize)>,
    cache: HashMap<(usize, Vec<usize>), f64>,
}

impl<'a> LocalScorer<'a> {
    fn new(data: &'a Dataset, model: ScoreModel) -> Result<Self> {
        if data.n_rows() == 0 {
            return Err(Error::InsufficientData("cannot score an empty dataset".into()));
        }
        let codes = match model {
            ScoreModel::Multinomial => {
                if let Some(c) = data.columns().iter().find(|c| !c.is_discrete()) {
                    return Err(Error::Unsupported(format!("multinomial score on real column `{}`", c.name)));
                }
                (0..data.n_cols())
                    .map(|i| {
                        let col = data.col(i);
                        let mut levels = col.to_vec();
                        levels.sort_by(f64::total_cmp);
                        levels.dedup();
                        let codes = col
                            .iter()
                            .map(|v| levels.binary_search_by(|l| l.total_cmp(v)).expect("level present"))
                            .collect();
                        (codes, levels.len())
                    })
                    .collect()
            }
            ScoreModel::LinearGaussian => Vec::new(),
        };
        Ok(LocalScorer {
            data,
            model,
            codes,
            cache: HashMap::new(),
        })
    }

    fn local(&mut self, node: usize, parents: &[usize]) -> Result<f64> {
        let key = (node, parents.to_vec());
        if let Some(&s) = self.cache.get(&key) {
            return Ok(s);
        }
        let m = self.data.n_rows() as f64;
        let (ll, k) = match self.model {
            ScoreModel::Multinomial => {
                let (child, r) = &self.codes[node];
                let mut counts: HashMap<Vec<usize>, Vec<f64>> = HashMap::new();
                for (row, &c) in child.iter().enumerate() {
                    let cfg: Vec<usize> = parents.iter().map(|&p| self.codes[p].0[row]).collect();
                    counts.entry(cfg).or_insert_with(|| vec![0.0; *r])[c] += 1.0;
                }
                let ll: f64 = counts
                    .values()
                    .map(|nk| {
                        let nj: f64 = nk.iter().sum();
                        nk.iter().filter(|&&c| c > 0.0).map(|&c| c * (c / nj).ln()).sum::<f64>()
                    })
                    .sum();
                let q: usize = parents.iter().map(|&p| self.codes[p].1).product();
                (ll, ((r - 1) * q) as f64)
            }
            ScoreModel::LinearGaussian => {
                let cols: Vec<&[f64]> = parents.iter().map(|&p| self.data.col(p)).collect();
                let fit = Ols::fit(&design(self.data.n_rows(), &cols), self.data.col(node))?;
                let sigma2 = fit.rss() / m;
                if !(sigma2 > 0.0) {
                    return Err(Error::Degenerate(format!(
                        "`{}` is an exact linear function of its parents",
                        self.data.names()[node]
                    )));
                }
                (-0.5 * m * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0), (parents.len() + 2) as f64)
            }
        };
        let s = ll - 0.5 * k * m.ln();
        self.cache.insert(key, s);
        Ok(s)
    }

    fn score(&mut self, g: &Dag) -> Result<f64> {
        (0..g.n()).map(|i| self.local(i, g.parents(i))).sum()
    }
}

/// `log p(D | G, theta_mle) - (k / 2) log m`, with the model picked from the
/// column kinds when `model` is `None`.
pub fn bic_score(data: &Dataset, g: &Dag, model: Option<ScoreModel>) -> Result<f64> {
    check_names(data, g)?;
    LocalScorer::new(data, pick_model(data, model)?)?.score(g)
}

fn check_names(data: &Dataset, g: &Dag) -> Result<()> {
    if data.names() != g.names().iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::InvalidArgument("graph nodes must match the dataset columns in order".into()));
    }
    Ok(())
}

fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Lower is preferred among tied scores.
fn tie_key(g: &Dag) -> (usize, Vec<(usize, usize)>) {
    let mut e = g.edges();
    e.sort_unstable();
    (e.len(), e)
}

pub fn score_search(data: &Dataset, cfg: &DiscoveryConfig) -> Result<SearchResult> {
    cfg.validate()?;
    let mut scorer = LocalScorer::new(data, pick_model(data, cfg.score)?)?;
    let names: Vec<String> = data.names().into_iter().map(String::from).collect();
    match cfg.search {
        SearchMode::Exhaustive => {
            if names.len() > EXHAUSTIVE_LIMIT {
                return Err(Error::LimitExceeded {
                    what: "exhaustive search node count",
                    size: names.len(),
                    limit: EXHAUSTIVE_LIMIT,
                });
            }
            let mut best: Option<(f64, Dag)> = None;
            let mut scored = 0;
            for g in all_dags(&names) {
                let s = scorer.score(&g)?;
                scored += 1;
                let better = match &best {
                    None => true,
                    Some((bs, bg)) => {
                        if ties(s, *bs) {
                            tie_key(&g) < tie_key(bg)
                        } else {
                            s > *bs
                        }
                    }
                };
                if better {
                    best = Some((s, g));
                }
            }
            let (score, dag) = best.expect("at least the empty graph");
            Ok(SearchResult {
                dag,
                score,
                graphs_scored: scored,
            })
        }
        SearchMode::Greedy => {
            let n = names.len();
            let mut edges: Vec<(usize, usize)> = Vec::new();
            let mut current = Dag::empty(names.clone())?;
            let mut score = scorer.score(&current)?;
            let mut scored = 1;
            loop {
                let mut best: Option<(f64, Vec<(usize, usize)>, Dag)> = None;
                for a in 0..n {
                    for b in 0..n {
                        if a == b {
                            continue;
                        }
                        let candidate: Vec<(usize, usize)> = if current.has_edge(a, b) {
                            // Deletion, then reversal.
                            let del: Vec<_> = edges.iter().copied().filter(|&e| e != (a, b)).collect();
                            for cand in [del.clone(), [del, vec![(b, a)]].concat()] {
                                consider(&mut scorer, &names, cand, &mut best, &mut scored)?;
                            }
                            continue;
                        } else if current.has_edge(b, a) {
                            continue;
                        } else {
                            [edges.clone(), vec![(a, b)]].concat()
                        };
                        consider(&mut scorer, &names, candidate, &mut best, &mut scored)?;
                    }
                }
                match best {
                    Some((s, e, g)) if s > score && !ties(s, score) => {
                        score = s;
                        edges = e;
                        current = g;
                    }
                    _ => break,
                }
            }
            Ok(SearchResult {
                dag: current,
                score,
                graphs_scored: scored,
            })
        }
    }
}

type Best = Option<(f64, Vec<(usize, usize)>, Dag)>;

fn consider(
    scorer: &mut LocalScorer,
    names: &[String],
    edges: Vec<(usize, usize)>,
    best: &mut Best,
    scored: &mut usize,
) -> Result<()> {
    let g = match Dag::new(names.iter().cloned(), edges.iter().copied()) {
        Ok(g) => g,
        Err(Error::Cycle) => return Ok(()),
        Err(e) => return Err(e),
    };
    let s = scorer.score(&g)?;
    *scored += 1;
    if best.as_ref().map_or(true, |(bs, _, _)| s > *bs) {
        *best = Some((s, edges, g));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Column;
    use crate::graph::{cpdag_of, markov_equivalent};
    use crate::scm::{Expr, NoiseSpec, Scm, Variable};

    fn binary_collider(n: usize, seed: u64) -> Dataset {
        let y = Expr::var("X").ge(0.5) * Expr::c(0.6) + Expr::var("Z").ge(0.5) * Expr::c(0.3);
        Scm::new(vec![
            Variable::new("X", &[], Expr::noise(), NoiseSpec::bernoulli(0.5)).with_domain(vec![0.0, 1.0]),
            Variable::new("Y", &["X", "Z"], (y + Expr::noise()).ge(0.95), NoiseSpec::uniform(0.0, 1.0))
                .with_domain(vec![0.0, 1.0]),
            Variable::new("Z", &[], Expr::noise(), NoiseSpec::bernoulli(0.5)).with_domain(vec![0.0, 1.0]),
        ])
        .unwrap()
        .sample(n, seed)
        .unwrap()
    }

    fn gaussian_chain(n: usize, seed: u64) -> Dataset {
        Scm::new(vec![
            Variable::new("X", &[], Expr::noise(), NoiseSpec::standard_normal()),
            Variable::new("Y", &["X"], Expr::var("X") + Expr::noise(), NoiseSpec::standard_normal()),
            Variable::new("Z", &["Y"], Expr::var("Y") + Expr::noise(), NoiseSpec::standard_normal()),
        ])
        .unwrap()
        .sample(n, seed)
        .unwrap()
    }

    #[test]
    fn empty_graph_binary_closed_form() {
        let a = vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0];
        let b = vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let d = Dataset::new(vec![Column::binary("A", a).unwrap(), Column::binary("B", b).unwrap()]).unwrap();
        let g = Dag::empty(["A", "B"]).unwrap();
        let m = 8.0_f64;
        let bern = |p: f64| m * (p * p.ln() + (1.0 - p) * (1.0 - p).ln());
        let expected = bern(5.0 / 8.0) + bern(2.0 / 8.0) - m.ln();
        let got = bic_score(&d, &g, None).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn likelihood_is_monotone_in_edges() {
        let d = binary_collider(500, 1);
        let m = 500.0_f64;
        let empty = Dag::empty(["X", "Y", "Z"]).unwrap();
        let one = Dag::new(["X", "Y", "Z"], [(0, 1)]).unwrap();
        // Add back the penalty to compare likelihood terms.
        let ll_empty = bic_score(&d, &empty, None).unwrap() + 1.5 * m.ln();
        let ll_one = bic_score(&d, &one, None).unwrap() + 2.0 * m.ln();
        assert!(ll_one >= ll_empty - 1e-9);
    }

    #[test]
    fn markov_equivalent_graphs_score_equally() {
        let d = binary_collider(2000, 2);
        let names: Vec<String> = ["X", "Y", "Z"].iter().map(|s| s.to_string()).collect();
        let dags = all_dags(&names);
        for g1 in &dags {
            for g2 in &dags {
                if markov_equivalent(g1, g2).unwrap() {
                    let (s1, s2) = (bic_score(&d, g1, None).unwrap(), bic_score(&d, g2, None).unwrap());
                    assert!((s1 - s2).abs() < 1e-6, "{s1} {s2}");
                }
            }
        }
    }

    #[test]
    fn chain_class_beats_empty_and_complete() {
        let d = gaussian_chain(10_000, 3);
        let names = ["X", "Y", "Z"];
        let chain = bic_score(&d, &Dag::new(names, [(0, 1), (1, 2)]).unwrap(), None).unwrap();
        let empty = bic_score(&d, &Dag::empty(names).unwrap(), None).unwrap();
        let full = bic_score(&d, &Dag::new(names, [(0, 1), (1, 2), (0, 2)]).unwrap(), None).unwrap();
        assert!(chain > empty && chain > full);
    }

    #[test]
    fn exhaustive_finds_collider() {
        let d = binary_collider(5000, 4);
        let cfg = DiscoveryConfig {
            search: SearchMode::Exhaustive,
            ..DiscoveryConfig::default()
        };
        let r = score_search(&d, &cfg).unwrap();
        assert_eq!(r.graphs_scored, 25);
        let truth = Dag::new(["X", "Y", "Z"], [(0, 1), (2, 1)]).unwrap();
        assert_eq!(cpdag_of(&r.dag), cpdag_of(&truth));
    }

    #[test]
    fn greedy_finds_collider_and_noise_gives_empty() {
        let truth = Dag::new(["X", "Y", "Z"], [(0, 1), (2, 1)]).unwrap();
        let r = score_search(&binary_collider(5000, 5), &DiscoveryConfig::default()).unwrap();
        assert_eq!(cpdag_of(&r.dag), cpdag_of(&truth));
        let noise = Scm::new(
            ["A", "B", "C"]
                .iter()
                .map(|v| Variable::new(*v, &[], Expr::noise(), NoiseSpec::standard_normal()))
                .collect(),
        )
        .unwrap()
        .sample(5000, 6)
        .unwrap();
        for search in [SearchMode::Greedy, SearchMode::Exhaustive] {
            let cfg = DiscoveryConfig {
                search,
                ..DiscoveryConfig::default()
            };
            assert_eq!(score_search(&noise, &cfg).unwrap().dag.edge_count(), 0);
        }
    }

    #[test]
    fn model_selection_errors() {
        let d = Dataset::new(vec![
            Column::binary("A", vec![0.0, 1.0]).unwrap(),
            Column::real("B", vec![0.5, 1.5]).unwrap(),
        ])
        .unwrap();
        let g = Dag::empty(["A", "B"]).unwrap();
        assert!(matches!(bic_score(&d, &g, None), Err(Error::Unsupported(_))));
        assert!(bic_score(&d, &g, Some(ScoreModel::Multinomial)).is_err());
        let wrong = Dag::empty(["B", "A"]).unwrap();
        assert!(bic_score(&d, &wrong, Some(ScoreModel::LinearGaussian)).is_err());
    }
}
