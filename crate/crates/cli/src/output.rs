//! Tables and their CSV/JSON encodings. Floats are written with 12
//! significant digits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Serialize, Serializer};

use crate::config::Format;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Num(f64),
    Int(u64),
    Bool(bool),
    Empty,
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Num(v) => fmt12(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Cell::Text(t) => s.serialize_str(t),
            // Non-finite values become null.
            Cell::Num(v) if !v.is_finite() => s.serialize_none(),
            Cell::Num(v) => s.serialize_f64(fmt12(*v).parse().expect("formatted float parses")),
            Cell::Int(v) => s.serialize_u64(*v),
            Cell::Bool(b) => s.serialize_bool(*b),
            Cell::Empty => s.serialize_none(),
        }
    }
}

/// `v` rounded to 12 significant digits, fixed notation for moderate
/// exponents and scientific otherwise, trailing zeros dropped.
pub fn fmt12(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let s = format!("{v:.11e}");
    let (mantissa, exp) = s.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if v < 0.0 { "-" } else { "" };
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let trim = |d: &str| d.trim_end_matches('0').to_string();
    let body = if (-5..12).contains(&exp) {
        if exp >= 0 {
            let (int, frac) = digits.split_at(exp as usize + 1);
            let frac = trim(frac);
            if frac.is_empty() {
                int.to_string()
            } else {
                format!("{int}.{frac}")
            }
        } else {
            format!("0.{}{}", "0".repeat((-exp - 1) as usize), trim(&digits))
        }
    } else {
        let frac = trim(&digits[1..]);
        if frac.is_empty() {
            format!("{}e{exp}", &digits[..1])
        } else {
            format!("{}.{frac}e{exp}", &digits[..1])
        }
    };
    format!("{sign}{body}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        // RFC 4180 line endings.
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(w);
        out.write_record(&self.columns)?;
        for row in &self.rows {
            out.write_record(row.iter().map(Cell::text))?;
        }
        out.flush()?;
        Ok(())
    }
}

struct Row<'a>(&'a [&'static str], &'a [Cell]);

impl Serialize for Row<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in self.0.iter().zip(self.1) {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}

impl Serialize for Table {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.rows.len()))?;
        for row in &self.rows {
            seq.serialize_element(&Row(&self.columns, row))?;
        }
        seq.end()
    }
}

/// Where a run writes: the main table at `path`, extra tables and the
/// metadata next to it.
#[derive(Debug, Clone)]
pub struct Destination {
    pub path: PathBuf,
    pub format: Format,
}

impl Destination {
    /// Creates the main file up front so an unwritable path fails before any
    /// computation.
    pub fn open(path: PathBuf, format: Format) -> Result<Self, CliError> {
        File::create(&path).map_err(|e| CliError::Output { path: path.clone(), source: e })?;
        Ok(Self { path, format })
    }

    /// `report.csv` -> `report.<tag>.<ext>`.
    pub fn sibling(&self, tag: &str, ext: &str) -> PathBuf {
        let stem = self.path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        self.path.with_file_name(format!("{stem}.{tag}.{ext}"))
    }

    pub fn meta_path(&self) -> PathBuf {
        self.sibling("meta", "json")
    }

    pub fn write_table(&self, path: &Path, table: &Table) -> Result<(), CliError> {
        let err = |e: std::io::Error| CliError::Output { path: path.to_path_buf(), source: e };
        let file = File::create(path).map_err(err)?;
        let mut w = BufWriter::new(file);
        match self.format {
            Format::Csv => table.write_csv(&mut w).map_err(|e| err(e.into()))?,
            Format::Json => {
                serde_json::to_writer_pretty(&mut w, table).map_err(|e| err(e.into()))?;
                w.write_all(b"\n").map_err(err)?;
            }
        }
        w.flush().map_err(err)
    }

    pub fn write_json(&self, path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
        let err = |e: std::io::Error| CliError::Output { path: path.to_path_buf(), source: e };
        let mut text = serde_json::to_string_pretty(value).map_err(|e| err(e.into()))?;
        text.push('\n');
        std::fs::write(path, text).map_err(err)
    }
}
