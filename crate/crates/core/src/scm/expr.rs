//! Mechanism expressions.
//!
//! JSON grammar (prefix notation):
//!
//! ```text
//! expr  := number                         constant
//!        | "Name"                         value of parent `Name`
//!        | ["noise"]                      the variable's own noise term
//!        | ["+", expr, expr] | ["-", expr, expr] | ["*", expr, expr]
//!        | ["pow", expr, expr]
//!        | ["tanh", expr] | ["cube", expr] | ["sign", expr]
//!        | ["ge", expr, number]           1 if expr >= number else 0
//!        | {"table": {"inputs": [ref, ...], "domains": [[number, ...], ...],
//!                     "values": [number, ...]}}
//! ref   := "Name" | ["noise"]
//! ```
//!
//! Table values are laid out row-major over the product of the input
//! domains, first input most significant.

use std::collections::BTreeSet;
use std::ops;

use serde_json::{json, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(String),
    Noise,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Tanh(Box<Expr>),
    Cube(Box<Expr>),
    Sign(Box<Expr>),
    Indicator { arg: Box<Expr>, threshold: f64 },
    Table(Table),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableInput {
    Var(String),
    Noise,
}

/// Finite lookup table over discrete parent and noise values.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    inputs: Vec<TableInput>,
    domains: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl Table {
    pub fn new(inputs: Vec<TableInput>, domains: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if inputs.len() != domains.len() {
            return Err(Error::InvalidArgument("table needs one domain per input".into()));
        }
        let size: usize = domains.iter().map(Vec::len).product();
        if size != values.len() {
            return Err(Error::InvalidArgument(format!(
                "table has {} values but its domain product has {size} cells",
                values.len()
            )));
        }
        if domains.iter().any(Vec::is_empty) {
            return Err(Error::InvalidArgument("table input with empty domain".into()));
        }
        Ok(Table { inputs, domains, values })
    }

    pub fn inputs(&self) -> &[TableInput] {
        &self.inputs
    }

    pub fn domains(&self) -> &[Vec<f64>] {
        &self.domains
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl Expr {
    pub fn c(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn noise() -> Expr {
        Expr::Noise
    }

    pub fn pow(self, exponent: Expr) -> Expr {
        Expr::Pow(Box::new(self), Box::new(exponent))
    }

    pub fn tanh(self) -> Expr {
        Expr::Tanh(Box::new(self))
    }

    pub fn cube(self) -> Expr {
        Expr::Cube(Box::new(self))
    }

    pub fn sign(self) -> Expr {
        Expr::Sign(Box::new(self))
    }

    /// `1` when `self >= threshold`, else `0`.
    pub fn ge(self, threshold: f64) -> Expr {
        Expr::Indicator {
            arg: Box::new(self),
            threshold,
        }
    }

    /// Names of every referenced variable.
    pub fn references(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| match e {
            Expr::Var(n) => {
                out.insert(n.clone());
            }
            Expr::Table(t) => {
                for i in &t.inputs {
                    if let TableInput::Var(n) = i {
                        out.insert(n.clone());
                    }
                }
            }
            _ => {}
        });
        out
    }

    /// Number of places the noise term occurs.
    pub fn noise_occurrences(&self) -> usize {
        let mut count = 0;
        self.visit(&mut |e| match e {
            Expr::Noise => count += 1,
            Expr::Table(t) => count += t.inputs.iter().filter(|i| matches!(i, TableInput::Noise)).count(),
            _ => {}
        });
        count
    }

    /// `g(parents) + noise` with `g` noise-free.
    pub fn is_additive_in_noise(&self) -> bool {
        match self {
            Expr::Add(a, b) => {
                (matches!(**b, Expr::Noise) && a.noise_occurrences() == 0)
                    || (matches!(**a, Expr::Noise) && b.noise_occurrences() == 0)
            }
            _ => false,
        }
    }

    fn visit(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Pow(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::Tanh(a) | Expr::Cube(a) | Expr::Sign(a) => a.visit(f),
            Expr::Indicator { arg, .. } => arg.visit(f),
            Expr::Const(_) | Expr::Var(_) | Expr::Noise | Expr::Table(_) => {}
        }
    }

    pub(crate) fn compile(&self, resolve: &dyn Fn(&str) -> Result<usize>) -> Result<CExpr> {
        let bin = |a: &Expr, b: &Expr| -> Result<(Box<CExpr>, Box<CExpr>)> {
            Ok((Box::new(a.compile(resolve)?), Box::new(b.compile(resolve)?)))
        };
        Ok(match self {
            Expr::Const(v) => CExpr::Const(*v),
            Expr::Var(n) => CExpr::Var(resolve(n)?),
            Expr::Noise => CExpr::Noise,
            Expr::Add(a, b) => {
                let (a, b) = bin(a, b)?;
                CExpr::Add(a, b)
            }
            Expr::Sub(a, b) => {
                let (a, b) = bin(a, b)?;
                CExpr::Sub(a, b)
            }
            Expr::Mul(a, b) => {
                let (a, b) = bin(a, b)?;
                CExpr::Mul(a, b)
            }
            Expr::Pow(a, b) => {
                let (a, b) = bin(a, b)?;
                CExpr::Pow(a, b)
            }
            Expr::Tanh(a) => CExpr::Tanh(Box::new(a.compile(resolve)?)),
            Expr::Cube(a) => CExpr::Cube(Box::new(a.compile(resolve)?)),
            Expr::Sign(a) => CExpr::Sign(Box::new(a.compile(resolve)?)),
            Expr::Indicator { arg, threshold } => CExpr::Indicator(Box::new(arg.compile(resolve)?), *threshold),
            Expr::Table(t) => {
                let inputs = t
                    .inputs
                    .iter()
                    .map(|i| match i {
                        TableInput::Var(n) => resolve(n).map(CRef::Var),
                        TableInput::Noise => Ok(CRef::Noise),
                    })
                    .collect::<Result<_>>()?;
                let mut strides = vec![1; t.domains.len()];
                for k in (0..t.domains.len().saturating_sub(1)).rev() {
                    strides[k] = strides[k + 1] * t.domains[k + 1].len();
                }
                CExpr::Table(Box::new(CTable {
                    inputs,
                    domains: t.domains.clone(),
                    strides,
                    values: t.values.clone(),
                }))
            }
        })
    }

    pub fn to_json(&self) -> Value {
        let un = |op: &str, a: &Expr| json!([op, a.to_json()]);
        let bin = |op: &str, a: &Expr, b: &Expr| json!([op, a.to_json(), b.to_json()]);
        match self {
            Expr::Const(v) => json!(v),
            Expr::Var(n) => json!(n),
            Expr::Noise => json!(["noise"]),
            Expr::Add(a, b) => bin("+", a, b),
            Expr::Sub(a, b) => bin("-", a, b),
            Expr::Mul(a, b) => bin("*", a, b),
            Expr::Pow(a, b) => bin("pow", a, b),
            Expr::Tanh(a) => un("tanh", a),
            Expr::Cube(a) => un("cube", a),
            Expr::Sign(a) => un("sign", a),
            Expr::Indicator { arg, threshold } => json!(["ge", arg.to_json(), threshold]),
            Expr::Table(t) => json!({"table": {
                "domains": t.domains,
                "inputs": t.inputs.iter().map(|i| match i {
                    TableInput::Var(n) => json!(n),
                    TableInput::Noise => json!(["noise"]),
                }).collect::<Vec<_>>(),
                "values": t.values,
            }}),
        }
    }

    pub fn from_json(v: &Value) -> Result<Expr> {
        let bad = |msg: &str| Error::Parse(format!("expression {v}: {msg}"));
        match v {
            Value::Number(n) => Ok(Expr::Const(n.as_f64().ok_or_else(|| bad("not a finite number"))?)),
            Value::String(s) => Ok(Expr::Var(s.clone())),
            Value::Array(items) => {
                let op = items.first().and_then(Value::as_str).ok_or_else(|| bad("missing operator"))?;
                let args = &items[1..];
                let arg = |k: usize| -> Result<Box<Expr>> {
                    args.get(k).map(Expr::from_json).transpose()?.map(Box::new).ok_or_else(|| bad("missing operand"))
                };
                let arity = |want: usize| -> Result<()> {
                    if args.len() == want {
                        Ok(())
                    } else {
                        Err(bad(&format!("`{op}` takes {want} operands")))
                    }
                };
                match op {
                    "noise" => arity(0).map(|_| Expr::Noise),
                    "+" | "-" | "*" | "pow" => {
                        arity(2)?;
                        let (a, b) = (arg(0)?, arg(1)?);
                        Ok(match op {
                            "+" => Expr::Add(a, b),
                            "-" => Expr::Sub(a, b),
                            "*" => Expr::Mul(a, b),
                            _ => Expr::Pow(a, b),
                        })
                    }
                    "tanh" | "cube" | "sign" => {
                        arity(1)?;
                        let a = arg(0)?;
                        Ok(match op {
                            "tanh" => Expr::Tanh(a),
                            "cube" => Expr::Cube(a),
                            _ => Expr::Sign(a),
                        })
                    }
                    "ge" => {
                        arity(2)?;
                        let threshold = args[1].as_f64().ok_or_else(|| bad("`ge` threshold must be a number"))?;
                        Ok(Expr::Indicator { arg: arg(0)?, threshold })
                    }
                    other => Err(bad(&format!("unknown operator `{other}`"))),
                }
            }
            Value::Object(map) => {
                let t = map.get("table").ok_or_else(|| bad("object expressions must be tables"))?;
                if map.len() != 1 {
                    return Err(bad("unexpected keys next to `table`"));
                }
                let obj = t.as_object().ok_or_else(|| bad("table must be an object"))?;
                if let Some(k) = obj.keys().find(|k| !["inputs", "domains", "values"].contains(&k.as_str())) {
                    return Err(bad(&format!("unknown table key `{k}`")));
                }
                let inputs = obj
                    .get("inputs")
                    .and_then(Value::as_array)
                    .ok_or_else(|| bad("table.inputs"))?
                    .iter()
                    .map(|i| match Expr::from_json(i)? {
                        Expr::Var(n) => Ok(TableInput::Var(n)),
                        Expr::Noise => Ok(TableInput::Noise),
                        _ => Err(bad("table inputs must be variable names or [\"noise\"]")),
                    })
                    .collect::<Result<_>>()?;
                let domains: Vec<Vec<f64>> =
                    serde_json::from_value(obj.get("domains").cloned().ok_or_else(|| bad("table.domains"))?)?;
                let values: Vec<f64> =
                    serde_json::from_value(obj.get("values").cloned().ok_or_else(|| bad("table.values"))?)?;
                Ok(Expr::Table(Table::new(inputs, domains, values)?))
            }
            _ => Err(bad("unsupported JSON value")),
        }
    }
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(rhs))
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::Sub(Box::new(self), Box::new(rhs))
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(rhs))
    }
}

impl From<f64> for Expr {
    fn from(v: f64) -> Expr {
        Expr::Const(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum CRef {
    Var(usize),
    Noise,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CTable {
    inputs: Vec<CRef>,
    domains: Vec<Vec<f64>>,
    strides: Vec<usize>,
    values: Vec<f64>,
}

/// Expression with variable references resolved to indices.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum CExpr {
    Const(f64),
    Var(usize),
    Noise,
    Add(Box<CExpr>, Box<CExpr>),
    Sub(Box<CExpr>, Box<CExpr>),
    Mul(Box<CExpr>, Box<CExpr>),
    Pow(Box<CExpr>, Box<CExpr>),
    Tanh(Box<CExpr>),
    Cube(Box<CExpr>),
    Sign(Box<CExpr>),
    Indicator(Box<CExpr>, f64),
    Table(Box<CTable>),
}

const MATCH_TOL: f64 = 1e-9;

fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= MATCH_TOL * (1.0 + a.abs().max(b.abs()))
}

impl CExpr {
    /// Evaluates with parent values looked up through `var`.
    pub(crate) fn eval(&self, var: &dyn Fn(usize) -> Result<f64>, noise: f64) -> Result<f64> {
        Ok(match self {
            CExpr::Const(v) => *v,
            CExpr::Var(i) => var(*i)?,
            CExpr::Noise => noise,
            CExpr::Add(a, b) => a.eval(var, noise)? + b.eval(var, noise)?,
            CExpr::Sub(a, b) => a.eval(var, noise)? - b.eval(var, noise)?,
            CExpr::Mul(a, b) => a.eval(var, noise)? * b.eval(var, noise)?,
            CExpr::Pow(a, b) => a.eval(var, noise)?.powf(b.eval(var, noise)?),
            CExpr::Tanh(a) => a.eval(var, noise)?.tanh(),
            CExpr::Cube(a) => a.eval(var, noise)?.powi(3),
            CExpr::Sign(a) => {
                let x = a.eval(var, noise)?;
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            CExpr::Indicator(a, t) => {
                if a.eval(var, noise)? >= *t {
                    1.0
                } else {
                    0.0
                }
            }
            CExpr::Table(t) => {
                let mut idx = 0;
                for (k, input) in t.inputs.iter().enumerate() {
                    let x = match input {
                        CRef::Var(i) => var(*i)?,
                        CRef::Noise => noise,
                    };
                    let pos = t.domains[k].iter().position(|&d| approx_eq(d, x)).ok_or_else(|| {
                        Error::InvalidArgument(format!("table input value {x} outside its declared domain"))
                    })?;
                    idx += pos * t.strides[k];
                }
                t.values[idx]
            }
        })
    }

    pub(crate) fn eval_slice(&self, values: &[f64], noise: f64) -> Result<f64> {
        self.eval(&|i| Ok(values[i]), noise)
    }

    pub(crate) fn has_noise(&self) -> bool {
        match self {
            CExpr::Noise => true,
            CExpr::Const(_) | CExpr::Var(_) => false,
            CExpr::Add(a, b) | CExpr::Sub(a, b) | CExpr::Mul(a, b) | CExpr::Pow(a, b) => a.has_noise() || b.has_noise(),
            CExpr::Tanh(a) | CExpr::Cube(a) | CExpr::Sign(a) | CExpr::Indicator(a, _) => a.has_noise(),
            CExpr::Table(t) => t.inputs.contains(&CRef::Noise),
        }
    }

    /// Solves `self(parents, u) = target` for `u` when the noise occurs once
    /// along a chain of invertible operations. `None` otherwise.
    pub(crate) fn invert_noise(&self, values: &[f64], target: f64) -> Option<f64> {
        let eval = |e: &CExpr| e.eval_slice(values, 0.0).ok();
        match self {
            CExpr::Noise => Some(target),
            CExpr::Add(a, b) => match (a.has_noise(), b.has_noise()) {
                (true, false) => a.invert_noise(values, target - eval(b)?),
                (false, true) => b.invert_noise(values, target - eval(a)?),
                _ => None,
            },
            CExpr::Sub(a, b) => match (a.has_noise(), b.has_noise()) {
                (true, false) => a.invert_noise(values, target + eval(b)?),
                (false, true) => b.invert_noise(values, eval(a)? - target),
                _ => None,
            },
            CExpr::Mul(a, b) => {
                let (s, o) = match (a.has_noise(), b.has_noise()) {
                    (true, false) => (a, b),
                    (false, true) => (b, a),
                    _ => return None,
                };
                let k = eval(o)?;
                if k == 0.0 {
                    None
                } else {
                    s.invert_noise(values, target / k)
                }
            }
            CExpr::Pow(a, b) if a.has_noise() && !b.has_noise() => {
                let p = eval(b)?;
                let odd = p.fract() == 0.0 && (p as i64) % 2 != 0;
                if odd {
                    a.invert_noise(values, target.signum() * target.abs().powf(1.0 / p))
                } else {
                    None
                }
            }
            CExpr::Cube(a) => a.invert_noise(values, target.cbrt()),
            CExpr::Tanh(a) if target.abs() < 1.0 => a.invert_noise(values, target.atanh()),
            _ => None,
        }
    }
}

pub(crate) fn values_match(a: f64, b: f64) -> bool {
    approx_eq(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn compile(e: &Expr) -> CExpr {
        e.compile(&|n| Ok(n.trim_start_matches('X').parse().unwrap())).unwrap()
    }

    #[test]
    fn evaluates_operators() {
        let e = (Expr::c(3.0) * Expr::var("X0") + Expr::noise()).tanh().ge(0.5);
        let c = compile(&e);
        assert_eq!(c.eval_slice(&[1.0], 0.0).unwrap(), 1.0);
        assert_eq!(c.eval_slice(&[-1.0], 0.0).unwrap(), 0.0);
        let p = compile(&Expr::var("X0").pow(Expr::c(2.0)).cube().sign());
        assert_eq!(p.eval_slice(&[-2.0], 0.0).unwrap(), 1.0);
    }

    #[test]
    fn table_lookup_and_domain_errors() {
        let t = Table::new(
            vec![TableInput::Var("X0".into()), TableInput::Noise],
            vec![vec![0.0, 1.0], vec![0.0, 1.0]],
            vec![0.0, 1.0, 1.0, 0.0],
        )
        .unwrap();
        let c = compile(&Expr::Table(t));
        assert_eq!(c.eval_slice(&[1.0], 1.0).unwrap(), 0.0);
        assert_eq!(c.eval_slice(&[0.0], 1.0).unwrap(), 1.0);
        assert!(c.eval_slice(&[2.0], 1.0).is_err());
        assert!(Table::new(vec![TableInput::Noise], vec![vec![0.0]], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn inversion() {
        let e = compile(&(Expr::c(3.0) * Expr::var("X0") + Expr::noise()));
        assert_eq!(e.invert_noise(&[2.0], 6.5), Some(0.5));
        let m = compile(&(Expr::var("X0") * Expr::noise().cube()));
        let u = m.invert_noise(&[2.0], 16.0).unwrap();
        assert!((u - 2.0).abs() < 1e-12);
        let s = compile(&(Expr::var("X0") - Expr::noise()));
        assert_eq!(s.invert_noise(&[1.0], -1.0), Some(2.0));
        assert!(compile(&Expr::noise().sign()).invert_noise(&[], 1.0).is_none());
        assert!(compile(&(Expr::noise() * Expr::noise())).invert_noise(&[], 1.0).is_none());
        assert!(compile(&(Expr::var("X0") * Expr::noise())).invert_noise(&[0.0], 1.0).is_none());
    }

    #[test]
    fn additive_detection() {
        assert!((Expr::c(3.0) * Expr::var("X") + Expr::noise()).is_additive_in_noise());
        assert!(!(Expr::var("X") * Expr::noise()).is_additive_in_noise());
        assert!(!(Expr::noise() + Expr::noise()).is_additive_in_noise());
    }

    #[test]
    fn json_round_trip() {
        let e = ((Expr::c(3.0) * Expr::var("X")).tanh() + Expr::noise()).ge(0.25) - Expr::var("Y").pow(Expr::c(2.0));
        let v = e.to_json();
        assert_eq!(Expr::from_json(&v).unwrap(), e);
        let t = Expr::Table(
            Table::new(vec![TableInput::Noise], vec![vec![0.0, 1.0]], vec![5.0, 6.0]).unwrap(),
        );
        assert_eq!(Expr::from_json(&t.to_json()).unwrap(), t);
        assert!(Expr::from_json(&json!(["frobnicate", 1])).is_err());
        assert!(Expr::from_json(&json!(["+", 1])).is_err());
    }
}
