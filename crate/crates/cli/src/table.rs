//! Tabular experiment output and its CSV / JSON encodings.
//!
//! CSV: one header row, then one row per grid point. Floats carry 12
//! significant digits; `nan` marks undefined values.
//!
//! JSON: `{"experiment": ..., "columns": [...], "rows": [[...], ...]}` with
//! `null` in place of `nan`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl Cell {
    fn to_text(&self) -> String {
        match *self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_g12(v),
            Cell::Bool(v) => v.to_string(),
        }
    }

    fn to_json(&self) -> Value {
        match *self {
            Cell::Int(v) => Value::from(v),
            Cell::Float(v) => serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number),
            Cell::Bool(v) => Value::Bool(v),
        }
    }
}

/// `%.12g`: 12 significant digits, trailing zeros dropped, exponent form
/// outside `[1e-4, 1e12)`.
pub fn format_g12(v: f64) -> String {
    const DIGITS: i32 = 12;
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if !(-4..DIGITS).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub experiment: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonTable {
    experiment: String,
    columns: Vec<String>,
    rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(experiment: &str, columns: Vec<&'static str>) -> Self {
        Self {
            experiment: experiment.to_string(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|&c| c == name)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::to_text)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    pub fn to_json(&self) -> String {
        let t = JsonTable {
            experiment: self.experiment.clone(),
            columns: self.columns.iter().map(|c| c.to_string()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(Cell::to_json).collect())
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&t).expect("serializable");
        s.push('\n');
        s
    }

    pub fn encode(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

/// A data file read back: column names and numeric cells (`NaN` for
/// `nan`/`null`, booleans as 0/1).
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ParsedTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

fn parse_text_cell(s: &str) -> Result<f64, String> {
    match s {
        "true" => Ok(1.0),
        "false" => Ok(0.0),
        _ => s.parse::<f64>().map_err(|_| format!("bad cell '{s}'")),
    }
}

pub fn parse_csv(text: &str) -> Result<ParsedTable, String> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let columns: Vec<String> = r
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        rows.push(rec.iter().map(parse_text_cell).collect::<Result<Vec<_>, _>>()?);
    }
    Ok(ParsedTable { columns, rows })
}

pub fn parse_json(text: &str) -> Result<ParsedTable, String> {
    let t: JsonTable = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let rows = t
        .rows
        .iter()
        .map(|r| {
            if r.len() != t.columns.len() {
                return Err(format!("row has {} cells for {} columns", r.len(), t.columns.len()));
            }
            r.iter()
                .map(|v| match v {
                    Value::Null => Ok(f64::NAN),
                    Value::Bool(b) => Ok(f64::from(u8::from(*b))),
                    Value::Number(n) => n.as_f64().ok_or_else(|| format!("bad number {n}")),
                    other => Err(format!("unexpected cell {other}")),
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    Ok(ParsedTable {
        columns: t.columns,
        rows,
    })
}

pub fn parse(text: &str, format: Format) -> Result<ParsedTable, String> {
    match format {
        Format::Csv => parse_csv(text),
        Format::Json => parse_json(text),
    }
}
