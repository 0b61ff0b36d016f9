//! Immutable columnar datasets and the CSV dialect used for ingestion.
//!
//! CSV: comma separated, header row required, `.` as decimal point, no
//! quoting of numeric fields, UTF-8.

use std::collections::HashMap;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Real,
    Binary,
    Categorical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    values: Vec<f64>,
}

impl Column {
    pub fn new(name: impl Into<String>, kind: ColumnKind, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        for &v in &values {
            let ok = match kind {
                ColumnKind::Real => v.is_finite(),
                ColumnKind::Binary => v == 0.0 || v == 1.0,
                ColumnKind::Categorical => v.is_finite() && v.fract() == 0.0,
            };
            if !ok {
                return Err(Error::InvalidArgument(format!("column `{name}`: value {v} invalid for {kind:?}")));
            }
        }
        Ok(Column { name, kind, values })
    }

    pub fn real(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        Column::new(name, ColumnKind::Real, values)
    }

    pub fn binary(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        Column::new(name, ColumnKind::Binary, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_discrete(&self) -> bool {
        self.kind != ColumnKind::Real
    }
}

/// Table of observations with equal-length typed columns and no missing values.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    index: HashMap<String, usize>,
    rows: usize,
}

impl Dataset {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.values.len());
        let mut index = HashMap::new();
        for (i, c) in columns.iter().enumerate() {
            if c.values.len() != rows {
                return Err(Error::InvalidArgument(format!(
                    "column `{}` has {} rows, expected {rows}",
                    c.name,
                    c.values.len()
                )));
            }
            if index.insert(c.name.clone(), i).is_some() {
                return Err(Error::DuplicateName(c.name.clone()));
            }
        }
        Ok(Dataset { columns, index, rows })
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index.get(name).copied().ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        Ok(&self.columns[self.index_of(name)?])
    }

    pub fn values(&self, name: &str) -> Result<&[f64]> {
        Ok(self.column(name)?.values())
    }

    pub fn col(&self, i: usize) -> &[f64] {
        &self.columns[i].values
    }

    /// Values of a column that must be binary.
    pub fn binary(&self, name: &str) -> Result<&[f64]> {
        let c = self.column(name)?;
        if c.kind != ColumnKind::Binary && !c.values.iter().all(|&v| v == 0.0 || v == 1.0) {
            return Err(Error::InvalidArgument(format!("column `{name}` is not binary")));
        }
        Ok(c.values())
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c.values[r]).collect()
    }

    /// Rows × selected columns.
    pub fn matrix(&self, names: &[&str]) -> Result<DMatrix<f64>> {
        let cols: Vec<&[f64]> = names.iter().map(|n| self.values(n)).collect::<Result<_>>()?;
        Ok(DMatrix::from_fn(self.rows, cols.len(), |r, c| cols[c][r]))
    }

    pub fn select(&self, names: &[&str]) -> Result<Dataset> {
        let cols = names.iter().map(|n| self.column(n).cloned()).collect::<Result<_>>()?;
        Dataset::new(cols)
    }

    pub fn filter_rows(&self, keep: impl Fn(usize) -> bool) -> Dataset {
        let rows: Vec<usize> = (0..self.rows).filter(|&r| keep(r)).collect();
        self.take_rows(&rows)
    }

    /// Rows at the given indices, in order; indices may repeat.
    pub fn take_rows(&self, rows: &[usize]) -> Dataset {
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                kind: c.kind,
                values: rows.iter().map(|&r| c.values[r]).collect(),
            })
            .collect();
        Dataset::new(columns).expect("row subset keeps shape")
    }

    /// Returns a copy with one column's values transformed.
    pub fn map_column(&self, name: &str, f: impl Fn(f64) -> f64) -> Result<Dataset> {
        let i = self.index_of(name)?;
        let mut cols = self.columns.clone();
        let c = &cols[i];
        cols[i] = Column::new(c.name.clone(), ColumnKind::Real, c.values.iter().map(|&v| f(v)).collect())?;
        Dataset::new(cols)
    }

    pub fn from_csv<R: Read>(reader: R) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        if headers.is_empty() || headers.iter().all(String::is_empty) {
            return Err(Error::Parse("CSV has no header row".into()));
        }
        let mut values: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            for (j, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Parse(format!("line {}: column `{}`: `{field}` is not a number", line + 2, headers[j]))
                })?;
                values[j].push(v);
            }
        }
        let columns = headers
            .into_iter()
            .zip(values)
            .map(|(name, vals)| {
                let kind = if !vals.is_empty() && vals.iter().all(|&v| v == 0.0 || v == 1.0) {
                    ColumnKind::Binary
                } else {
                    ColumnKind::Real
                };
                Column::new(name, kind, vals)
            })
            .collect::<Result<_>>()?;
        Dataset::new(columns)
    }

    /// Writes the dataset; reals use the shortest representation that
    /// round-trips exactly.
    pub fn to_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().from_writer(writer);
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        let mut buf = Vec::with_capacity(self.columns.len());
        for r in 0..self.rows {
            buf.clear();
            buf.extend(self.columns.iter().map(|c| format_number(c.values[r])));
            w.write_record(&buf)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let d = Dataset::new(vec![
            Column::binary("t", vec![0.0, 1.0, 1.0]).unwrap(),
            Column::real("y", vec![0.1, -2.5, 1.0 / 3.0]).unwrap(),
        ])
        .unwrap();
        let mut buf = Vec::new();
        d.to_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,y\n0,0.1\n"));
        let back = Dataset::from_csv(&buf[..]).unwrap();
        assert_eq!(back.values("y").unwrap(), d.values("y").unwrap());
        assert_eq!(back.column("t").unwrap().kind, ColumnKind::Binary);
    }

    #[test]
    fn header_only_csv_has_zero_rows() {
        let d = Dataset::from_csv("a,b\n".as_bytes()).unwrap();
        assert_eq!(d.n_rows(), 0);
        assert_eq!(d.names(), vec!["a", "b"]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Dataset::from_csv("".as_bytes()).is_err());
        assert!(Dataset::from_csv("a\nfoo\n".as_bytes()).is_err());
        assert!(Column::binary("t", vec![0.5]).is_err());
        assert!(Dataset::new(vec![
            Column::real("a", vec![1.0]).unwrap(),
            Column::real("b", vec![]).unwrap()
        ])
        .is_err());
    }
}
