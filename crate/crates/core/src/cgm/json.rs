//! `{"dag": <graph>, "nodes": {name: {"domain": [...], "cpt": [{"given":
//! [parent values...], "probs": [...]}, ...]}}}` with CPT rows in
//! lexicographic order of parent tuples.

use serde_json::{json, Map, Value};

use super::DiscreteCgm;
use crate::error::{Error, Result};
use crate::graph::{Dag, GraphJson};

impl DiscreteCgm {
    pub fn to_json_value(&self) -> Value {
        let mut nodes = Map::new();
        for i in 0..self.n() {
            let cpt = &self.cpts[i];
            let pc: Vec<usize> = cpt.parents.iter().map(|&p| self.domains[p].len()).collect();
            let mut rows = Vec::with_capacity(cpt.rows.len());
            super::factor::for_each_config(&pc, |config, flat| {
                let given: Vec<f64> = cpt.parents.iter().zip(config).map(|(&p, &k)| self.domains[p][k]).collect();
                rows.push(json!({"given": given, "probs": cpt.rows[flat]}));
            });
            nodes.insert(
                self.dag.name(i).to_string(),
                json!({"domain": self.domains[i], "cpt": rows}),
            );
        }
        json!({
            "dag": serde_json::to_value(self.dag.to_json_value()).expect("graph json"),
            "nodes": nodes,
        })
    }

    pub fn to_json(&self) -> String {
        crate::json::to_string(&self.to_json_value())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text)?;
        let top = v.as_object().ok_or_else(|| Error::Parse("CGM must be a JSON object".into()))?;
        if let Some(k) = top.keys().find(|k| *k != "dag" && *k != "nodes") {
            return Err(Error::Parse(format!("unknown key `{k}` in CGM")));
        }
        let raw: GraphJson = serde_json::from_value(top.get("dag").cloned().unwrap_or(Value::Null))?;
        let dag = Dag::try_from(raw)?;
        let nodes = top
            .get("nodes")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::Parse("CGM needs a `nodes` object".into()))?;
        if nodes.len() != dag.n() {
            return Err(Error::Parse("`nodes` must describe every node of the graph exactly once".into()));
        }
        let mut domains = Vec::with_capacity(dag.n());
        let mut raw_rows = Vec::with_capacity(dag.n());
        for name in dag.names() {
            let node = nodes
                .get(name)
                .and_then(Value::as_object)
                .ok_or_else(|| Error::Parse(format!("missing node `{name}`")))?;
            if let Some(k) = node.keys().find(|k| *k != "domain" && *k != "cpt") {
                return Err(Error::Parse(format!("unknown key `{k}` in node `{name}`")));
            }
            let domain: Vec<f64> = serde_json::from_value(node.get("domain").cloned().unwrap_or(Value::Null))?;
            let rows: Vec<CptRow> = serde_json::from_value(node.get("cpt").cloned().unwrap_or(Value::Null))?;
            domains.push(domain);
            raw_rows.push(rows);
        }
        let mut tables = Vec::with_capacity(dag.n());
        for (i, rows) in raw_rows.into_iter().enumerate() {
            let parents = dag.parents(i);
            let pc: Vec<usize> = parents.iter().map(|&p| domains[p].len()).collect();
            let n_rows: usize = pc.iter().product();
            let mut table: Vec<Option<Vec<f64>>> = vec![None; n_rows];
            for row in rows {
                if row.given.len() != parents.len() {
                    return Err(Error::Parse(format!("CPT row of `{}` has the wrong parent arity", dag.name(i))));
                }
                let mut flat = 0;
                for (k, (&p, &v)) in parents.iter().zip(&row.given).enumerate() {
                    let pos = domains[p]
                        .iter()
                        .position(|&d| crate::scm::values_match(d, v))
                        .ok_or_else(|| Error::Parse(format!("parent value {v} outside the domain of `{}`", dag.name(p))))?;
                    flat = flat * pc[k] + pos;
                }
                if table[flat].replace(row.probs).is_some() {
                    return Err(Error::Parse(format!("duplicate CPT row in `{}`", dag.name(i))));
                }
            }
            let table = table
                .into_iter()
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::Parse(format!("CPT of `{}` misses a parent configuration", dag.name(i))))?;
            tables.push(table);
        }
        DiscreteCgm::new(dag, domains, tables)
    }
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct CptRow {
    given: Vec<f64>,
    probs: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn round_trip_is_exact() {
        let g = Dag::from_names(&["A", "B", "C"], &[("A", "C"), ("B", "C")]).unwrap();
        let m = DiscreteCgm::random(g, &[2, 3, 2], &mut rng::stream(1, 0)).unwrap();
        let text = m.to_json();
        let back = DiscreteCgm::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn rejects_incomplete_tables() {
        let text = r#"{"dag":{"nodes":["A","B"],"edges":[["A","B"]]},
            "nodes":{"A":{"domain":[0,1],"cpt":[{"given":[],"probs":[0.5,0.5]}]},
                     "B":{"domain":[0,1],"cpt":[{"given":[0],"probs":[0.5,0.5]}]}}}"#;
        assert!(DiscreteCgm::from_json(text).is_err());
        let full = text.replace(
            r#"{"given":[0],"probs":[0.5,0.5]}"#,
            r#"{"given":[0],"probs":[0.5,0.5]},{"given":[1],"probs":[0.25,0.75]}"#,
        );
        let m = DiscreteCgm::from_json(&full).unwrap();
        assert_eq!(m.cpt(1).rows()[1], vec![0.25, 0.75]);
    }
}
