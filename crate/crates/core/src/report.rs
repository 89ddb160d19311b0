//! Result tables and their JSON/CSV forms.
//!
//! Every column carries a unit; CSV headers read `name [unit]`. Numbers are
//! written in shortest round-trip form so re-reading a file reproduces the
//! original values exactly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Version tag written into every structured output.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    /// `"1"` for dimensionless quantities.
    pub unit: String,
}

impl Column {
    pub fn new(name: &str, unit: &str) -> Self {
        Self {
            name: name.into(),
            unit: unit.into(),
        }
    }

    pub fn header(&self) -> String {
        format!("{} [{}]", self.name, self.unit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
    Missing,
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            _ => None,
        }
    }

    fn to_field(&self) -> String {
        match self {
            Cell::Num(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }

    fn from_field(s: &str) -> Self {
        if s.is_empty() {
            Cell::Missing
        } else if let Ok(v) = s.parse::<f64>() {
            Cell::Num(v)
        } else {
            Cell::Text(s.to_string())
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Num(f64::from(v))
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Num(v as f64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Missing, Into::into)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub schema_version: u32,
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: Vec<Column>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            name: name.into(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<impl Iterator<Item = &Cell>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(move |r| &r[i]))
    }

    /// Keeps only the named columns, in the given order.
    pub fn select(&self, name: &str, columns: &[&str]) -> Result<Table> {
        let idx = columns
            .iter()
            .map(|c| {
                self.column_index(c)
                    .ok_or_else(|| Error::param("column", format!("no column `{c}` in `{}`", self.name)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Table {
            schema_version: self.schema_version,
            name: name.into(),
            columns: idx.iter().map(|&i| self.columns[i].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| idx.iter().map(|&i| r[i].clone()).collect())
                .collect(),
        })
    }

    /// Keeps rows whose `column` equals `value`.
    pub fn filter_text(&self, column: &str, value: &str) -> Table {
        let mut out = Table::new(&self.name, self.columns.clone());
        if let Some(i) = self.column_index(column) {
            out.rows = self
                .rows
                .iter()
                .filter(|r| matches!(&r[i], Cell::Text(s) if s == value))
                .cloned()
                .collect();
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Parse {
            path: format!("<{}>", self.name).into(),
            reason: e.to_string(),
        };
        w.write_record(self.columns.iter().map(Column::header))
            .map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::to_field)).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Parse {
            path: format!("<{}>", self.name).into(),
            reason: e.to_string(),
        })?;
        Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
    }

    pub fn from_csv(name: &str, text: &str) -> Result<Table> {
        let parse_err = |reason: String| Error::Parse {
            path: format!("<{name}>").into(),
            reason,
        };
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let columns = r
            .headers()
            .map_err(|e| parse_err(e.to_string()))?
            .iter()
            .map(|h| {
                let (name, unit) = h
                    .strip_suffix(']')
                    .and_then(|h| h.rsplit_once(" ["))
                    .ok_or_else(|| parse_err(format!("header `{h}` lacks a unit")))?;
                Ok(Column::new(name, unit))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut table = Table::new(name, columns);
        for rec in r.records() {
            let rec = rec.map_err(|e| parse_err(e.to_string()))?;
            table.rows.push(rec.iter().map(Cell::from_field).collect());
        }
        Ok(table)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse {
            path: format!("<{}>", self.name).into(),
            reason: e.to_string(),
        })
    }

    pub fn from_json(text: &str) -> Result<Table> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            path: "<json>".into(),
            reason: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    Json,
    Csv,
    #[default]
    Both,
}

/// Writes each table as `<name>.json` and/or `<name>.csv` under `dir`.
pub fn emit_results(tables: &[Table], dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
    if tables.is_empty() {
        return Err(Error::Empty("no tables to emit"));
    }
    if let Some(t) = tables.iter().find(|t| t.rows.is_empty()) {
        return Err(Error::Empty(if t.columns.is_empty() {
            "table without columns"
        } else {
            "table without rows"
        }));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for t in tables {
        if matches!(format, Format::Json | Format::Both) {
            written.push(write_file(&dir.join(format!("{}.json", t.name)), &t.to_json()?)?);
        }
        if matches!(format, Format::Csv | Format::Both) {
            written.push(write_file(&dir.join(format!("{}.csv", t.name)), &t.to_csv()?)?);
        }
    }
    Ok(written)
}

/// Writes `contents` to `path`, creating parent directories.
pub fn write_file(path: &Path, contents: &str) -> Result<PathBuf> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

/// Pretty JSON for any serialisable value.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Parse {
        path: "<json>".into(),
        reason: e.to_string(),
    })
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => {
            let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("table");
            Table::from_csv(name, &text)
        }
        _ => Table::from_json(&text),
    }
}
