//! Tabular output as CSV or JSON lines.

use std::io::Write;
use std::str::FromStr;

use serde_json::{Map, Value};

use super::{DivergenceRow, SweepResult};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    JsonLines,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "jsonlines" | "jsonl" => Ok(Format::JsonLines),
            _ => Err(format!("unknown format `{s}`, expected csv or jsonlines")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Str(String),
    Int(u64),
    Float(f64),
    /// Integer list, `;`-separated in CSV.
    List(Vec<u64>),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Str(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => fmt_sig(*x),
            Cell::List(v) => v.iter().map(u64::to_string).collect::<Vec<_>>().join(";"),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Str(s) => Value::String(s.clone()),
            Cell::Int(i) => Value::from(*i),
            // Round-trip through the 9-digit text so both formats agree.
            Cell::Float(x) => fmt_sig(*x)
                .parse::<f64>()
                .ok()
                .and_then(serde_json::Number::from_f64)
                .map_or(Value::Null, Value::Number),
            Cell::List(v) => Value::from(v.clone()),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Float)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(headers: Vec<&'static str>) -> Self {
        Table { headers, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn write(&self, format: Format, out: &mut dyn Write) -> Result<()> {
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(out);
                let io = |e: csv::Error| Error::Io(e.to_string());
                w.write_record(&self.headers).map_err(io)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::csv)).map_err(io)?;
                }
                w.flush()?;
            }
            Format::JsonLines => {
                for row in &self.rows {
                    let obj: Map<String, Value> = self
                        .headers
                        .iter()
                        .zip(row)
                        .map(|(h, c)| (h.to_string(), c.json()))
                        .collect();
                    serde_json::to_writer(&mut *out, &obj).map_err(|e| Error::Io(e.to_string()))?;
                    out.write_all(b"\n")?;
                }
            }
        }
        Ok(())
    }

    pub fn to_string(&self, format: Format) -> String {
        let mut buf = Vec::new();
        self.write(format, &mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8 output")
    }
}

/// `%.9g`: nine significant digits, trailing zeros dropped, exponent form
/// outside `1e-5 <= |x| < 1e9`.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn sweep_table(result: &SweepResult) -> Table {
    let mut t = Table::new(vec![
        "scheme",
        "num_learners",
        "cycle_budget_s",
        "seed",
        "max_staleness",
        "avg_staleness",
        "taus",
        "batches",
        "status",
    ]);
    for r in &result.rows {
        t.push(vec![
            Cell::Str(r.scheme.to_string()),
            Cell::Int(r.num_learners as u64),
            Cell::Float(r.cycle_budget_s),
            Cell::Int(r.seed),
            r.max_staleness.into(),
            r.avg_staleness.into(),
            Cell::List(r.taus.clone()),
            Cell::List(r.batches.clone()),
            Cell::Str(r.status.clone()),
        ]);
    }
    t
}

pub fn divergence_table(rows: &[DivergenceRow]) -> Table {
    let mut t = Table::new(vec!["scheme", "seed", "cycle", "divergence", "global_loss", "max_staleness"]);
    for r in rows {
        t.push(vec![
            Cell::Str(r.scheme.to_string()),
            Cell::Int(r.seed),
            Cell::Int(r.cycle as u64),
            Cell::Float(r.divergence),
            Cell::Float(r.global_loss),
            Cell::Float(r.max_staleness),
        ]);
    }
    t
}
