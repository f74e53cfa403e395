//! Deterministic CSV/JSON writers.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::config::Format;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// 17 significant digits; `-0` prints as `0`.
pub fn fmt_num(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => fmt_num(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) if x.is_finite() => json!(if *x == 0.0 { 0.0 } else { *x }),
            Cell::Num(x) => json!(x.to_string()),
            Cell::Int(n) => json!(n),
            Cell::Text(s) => json!(s),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

/// Stamp carried by every emitted file.
#[derive(Clone, Debug)]
pub struct Provenance {
    pub config_sha256: String,
}

impl Provenance {
    pub fn comment(&self) -> String {
        format!("# gausstopo {VERSION} config_sha256={}", self.config_sha256)
    }

    fn insert_into(&self, obj: &mut Map<String, Value>) {
        obj.insert("generator".into(), json!(format!("gausstopo {VERSION}")));
        obj.insert("config_sha256".into(), json!(self.config_sha256));
    }
}

pub fn csv_string(table: &Table, prov: &Provenance) -> String {
    let mut out = prov.comment();
    out.push('\n');
    out.push_str(&table.columns.join(","));
    out.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(Cell::csv).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn table_json(table: &Table, prov: &Provenance) -> Value {
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|row| Value::Object(table.columns.iter().zip(row).map(|(c, v)| (c.to_string(), v.json())).collect()))
        .collect();
    let mut obj = Map::new();
    prov.insert_into(&mut obj);
    obj.insert("columns".into(), json!(table.columns));
    obj.insert("rows".into(), Value::Array(rows));
    Value::Object(obj)
}

pub fn stamped(mut value: Value, prov: &Provenance) -> Value {
    if let Value::Object(obj) = &mut value {
        prov.insert_into(obj);
    }
    value
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, text)?;
    Ok(path)
}

pub fn write_json(dir: &Path, name: &str, value: &Value) -> io::Result<PathBuf> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    text.push('\n');
    write_text(dir, name, &text)
}

/// Writes `stem.csv` or `stem.json` depending on the configured format.
pub fn write_table(dir: &Path, stem: &str, table: &Table, prov: &Provenance, format: Format) -> io::Result<PathBuf> {
    match format {
        Format::Csv => write_text(dir, &format!("{stem}.csv"), &csv_string(table, prov)),
        Format::Json => write_json(dir, &format!("{stem}.json"), &table_json(table, prov)),
    }
}
