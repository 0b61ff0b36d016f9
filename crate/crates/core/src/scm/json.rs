use serde_json::{json, Map, Value};

use super::{Expr, NoiseSpec, Scm, Variable};
use crate::error::{Error, Result};

impl Scm {
    pub fn to_json_value(&self) -> Value {
        let vars: Vec<Value> = self
            .vars
            .iter()
            .map(|v| {
                let mut obj = Map::new();
                obj.insert("name".into(), json!(v.name));
                obj.insert("parents".into(), json!(v.parents));
                obj.insert("expr".into(), v.expr.to_json());
                obj.insert("noise".into(), serde_json::to_value(&v.noise).expect("noise serializes"));
                obj.insert("additive".into(), json!(v.additive));
                if let Some(d) = &v.domain {
                    obj.insert("domain".into(), json!(d));
                }
                Value::Object(obj)
            })
            .collect();
        json!({ "variables": vars })
    }

    pub fn to_json(&self) -> String {
        crate::json::to_string(&self.to_json_value())
    }

    pub fn from_json(text: &str) -> Result<Scm> {
        Scm::from_json_value(&serde_json::from_str(text)?)
    }

    pub fn from_json_value(v: &Value) -> Result<Scm> {
        let top = v.as_object().ok_or_else(|| Error::Parse("model must be a JSON object".into()))?;
        if let Some(k) = top.keys().find(|k| *k != "variables") {
            return Err(Error::Parse(format!("unknown key `{k}` in model")));
        }
        let list = top
            .get("variables")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("model needs a `variables` array".into()))?;
        let vars = list.iter().map(parse_variable).collect::<Result<_>>()?;
        Scm::new(vars)
    }
}

fn parse_variable(v: &Value) -> Result<Variable> {
    let obj = v.as_object().ok_or_else(|| Error::Parse("variable must be an object".into()))?;
    const KEYS: [&str; 6] = ["name", "parents", "expr", "noise", "domain", "additive"];
    if let Some(k) = obj.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(Error::Parse(format!("unknown key `{k}` in variable")));
    }
    let name = obj
        .get("name")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Parse("variable needs a string `name`".into()))?;
    let field = |k: &str| obj.get(k).ok_or_else(|| Error::Parse(format!("variable `{name}` has no `{k}`")));
    let parents: Vec<String> = match obj.get("parents") {
        Some(p) => serde_json::from_value(p.clone())?,
        None => Vec::new(),
    };
    let expr = Expr::from_json(field("expr")?)?;
    let noise: NoiseSpec = serde_json::from_value(field("noise")?.clone())?;
    let parent_refs: Vec<&str> = parents.iter().map(String::as_str).collect();
    let mut var = Variable::new(name, &parent_refs, expr, noise);
    if let Some(d) = obj.get("domain") {
        var = var.with_domain(serde_json::from_value(d.clone())?);
    }
    if let Some(a) = obj.get("additive") {
        let flag = a
            .as_bool()
            .ok_or_else(|| Error::Parse(format!("`additive` of `{name}` must be a boolean")))?;
        var = var.with_additive_flag(flag);
    }
    Ok(var)
}
