//! Row sinks: RFC-4180 CSV or a JSON document with the same values.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rmf_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Str(String),
    U64(u64),
    F64(f64),
    Bool(bool),
    Empty,
}

impl Cell {
    pub fn text(&self) -> String {
        match self {
            Cell::Str(s) => s.clone(),
            Cell::U64(v) => v.to_string(),
            Cell::F64(v) => float_text(*v),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> serde_json::Value {
        use serde_json::Value;
        match self {
            Cell::Str(s) => Value::String(s.clone()),
            Cell::U64(v) => Value::from(*v),
            Cell::F64(v) => match serde_json::Number::from_f64(*v) {
                Some(n) => Value::Number(n),
                None => Value::String(float_text(*v)),
            },
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Str(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Str(s)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::U64(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F64(v)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn float_text(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(io::Error::other(format!("{other:?}"))),
    }
}

enum Inner {
    Csv(csv::Writer<Box<dyn Write>>),
    Json { w: BufWriter<Box<dyn Write>>, first: bool },
}

pub struct Sink {
    inner: Inner,
    columns: Vec<&'static str>,
}

impl Sink {
    pub fn open(format: Format, out: Option<&Path>, columns: &[&'static str]) -> Result<Self> {
        let target: Box<dyn Write> = match out {
            Some(p) => Box::new(File::create(p)?),
            None => Box::new(io::stdout().lock()),
        };
        let inner = match format {
            Format::Csv => {
                let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(target);
                w.write_record(columns).map_err(csv_err)?;
                Inner::Csv(w)
            }
            Format::Json => {
                let mut w = BufWriter::new(target);
                let cols = serde_json::to_string(columns).map_err(io::Error::other)?;
                write!(w, "{{\"columns\":{cols},\"rows\":[")?;
                Inner::Json { w, first: true }
            }
        };
        Ok(Self { inner, columns: columns.to_vec() })
    }

    pub fn row(&mut self, cells: Vec<Cell>) -> Result<()> {
        assert_eq!(cells.len(), self.columns.len(), "row width");
        match &mut self.inner {
            Inner::Csv(w) => {
                w.write_record(cells.iter().map(Cell::text)).map_err(csv_err)?;
            }
            Inner::Json { w, first } => {
                let mut obj = serde_json::Map::new();
                for (c, v) in self.columns.iter().zip(&cells) {
                    obj.insert((*c).to_string(), v.json());
                }
                // Keep column order rather than the map's sorted order.
                let body: Vec<String> =
                    self.columns.iter().map(|c| format!("{}:{}", serde_json::Value::from(*c), obj[*c])).collect();
                let sep = if *first { "\n" } else { ",\n" };
                *first = false;
                write!(w, "{sep}{{{}}}", body.join(","))?;
            }
        }
        Ok(())
    }

    pub fn finish(self) -> Result<()> {
        match self.inner {
            Inner::Csv(mut w) => w.flush()?,
            Inner::Json { mut w, .. } => {
                writeln!(w, "\n]}}")?;
                w.flush()?;
            }
        }
        Ok(())
    }
}
