//! Tables and reports rendered as CSV or JSON.
//!
//! Floats are written with 17 significant digits in CSV and in shortest
//! round-trip form in JSON. Complex cells span two CSV columns (`re_X`,
//! `im_X`) and one JSON `[re, im]` pair.

use std::io::Write;

use nhtopo::linalg::{c64, ComplexMatrix};
use serde_json::{json, Map, Value};

use crate::error::Result;
use crate::settings::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    Complex(c64),
    Empty,
}

impl Cell {
    fn csv(&self) -> Vec<String> {
        match self {
            Self::Float(x) => vec![float(*x)],
            Self::Int(n) => vec![n.to_string()],
            Self::Bool(b) => vec![b.to_string()],
            Self::Text(s) => vec![s.clone()],
            Self::Complex(z) => vec![float(z.re), float(z.im)],
            Self::Empty => vec![String::new()],
        }
    }

    fn json(&self) -> Value {
        match self {
            Self::Float(x) => json!(x),
            Self::Int(n) => json!(n),
            Self::Bool(b) => json!(b),
            Self::Text(s) => json!(s),
            Self::Complex(z) => complex(*z),
            Self::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Self::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Self::Int(n as i64)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(value: Option<T>) -> Self {
        value.map_or(Self::Empty, Into::into)
    }
}

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn complex(z: c64) -> Value {
    json!([z.re, z.im])
}

pub fn matrix(m: &ComplexMatrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| complex(m[(i, j)])).collect()))
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Column {
    pub name: &'static str,
    pub complex: bool,
}

pub const fn col(name: &'static str) -> Column {
    Column { name, complex: false }
}

pub const fn complex_col(name: &'static str) -> Column {
    Column { name, complex: true }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
    /// Scalars that describe the whole table, written after the rows.
    pub summary: Vec<(&'static str, Cell)>,
}

impl Table {
    pub fn new(columns: &[Column]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
            summary: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn header(&self) -> Vec<String> {
        self.columns
            .iter()
            .flat_map(|c| {
                if c.complex {
                    vec![format!("re_{}", c.name), format!("im_{}", c.name)]
                } else {
                    vec![c.name.to_string()]
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    Table(Table),
    Report(Value),
}

impl Output {
    pub fn write(&self, format: Format, sink: &mut dyn Write) -> Result<()> {
        match (self, format) {
            (Self::Table(t), Format::Csv) => write_table_csv(t, sink),
            (Self::Table(t), Format::Json) => {
                let rows: Vec<Value> = t
                    .rows
                    .iter()
                    .map(|r| Value::Array(r.iter().map(Cell::json).collect()))
                    .collect();
                let mut doc = Map::new();
                doc.insert("columns".into(), json!(t.columns.iter().map(|c| c.name).collect::<Vec<_>>()));
                doc.insert("rows".into(), Value::Array(rows));
                if !t.summary.is_empty() {
                    let summary = t.summary.iter().map(|(k, v)| (k.to_string(), v.json())).collect();
                    doc.insert("summary".into(), Value::Object(summary));
                }
                write_json(&Value::Object(doc), sink)
            }
            (Self::Report(v), Format::Json) => write_json(v, sink),
            (Self::Report(v), Format::Csv) => {
                let mut table = Table::new(&[col("field"), col("value")]);
                let mut fields = Vec::new();
                flatten(v, String::new(), &mut fields);
                for (field, value) in fields {
                    table.push(vec![Cell::Text(field), value]);
                }
                write_table_csv(&table, sink)
            }
        }
    }
}

fn write_json(value: &Value, sink: &mut dyn Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut *sink, value).map_err(std::io::Error::from)?;
    writeln!(sink)?;
    Ok(())
}

fn write_table_csv(table: &Table, sink: &mut dyn Write) -> Result<()> {
    {
        let mut w = csv::Writer::from_writer(&mut *sink);
        let csv_err = |e: csv::Error| std::io::Error::other(e.to_string());
        w.write_record(table.header()).map_err(csv_err)?;
        for row in &table.rows {
            let fields = table.columns.iter().zip(row).flat_map(|(c, cell)| match cell {
                Cell::Empty if c.complex => vec![String::new(); 2],
                other => other.csv(),
            });
            w.write_record(fields).map_err(csv_err)?;
        }
        w.flush()?;
    }
    for (key, value) in &table.summary {
        writeln!(sink, "# {key} = {}", value.csv().join(" "))?;
    }
    Ok(())
}

/// Dotted paths to every scalar of a JSON tree, arrays indexed from zero.
fn flatten(value: &Value, path: String, out: &mut Vec<(String, Cell)>) {
    let join = |key: &str| if path.is_empty() { key.to_string() } else { format!("{path}.{key}") };
    match value {
        Value::Object(map) => map.iter().for_each(|(k, v)| flatten(v, join(k), out)),
        Value::Array(items) => items
            .iter()
            .enumerate()
            .for_each(|(i, v)| flatten(v, join(&i.to_string()), out)),
        Value::Null => out.push((path, Cell::Empty)),
        Value::Bool(b) => out.push((path, Cell::Bool(*b))),
        Value::Number(n) => out.push((
            path,
            match n.as_i64() {
                Some(i) => Cell::Int(i),
                None => Cell::Float(n.as_f64().unwrap_or(f64::NAN)),
            },
        )),
        Value::String(s) => out.push((path, Cell::Text(s.clone()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn render(output: &Output, format: Format) -> String {
        let mut buf = Vec::new();
        output.write(format, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn complex_columns_expand_in_csv() {
        let mut t = Table::new(&[col("U"), complex_col("E"), col("note")]);
        t.push(vec![Cell::Float(0.5), Cell::Complex(c64::new(1.0, -0.25)), Cell::Text("a, b".into())]);
        t.push(vec![Cell::Float(-1.0), Cell::Empty, Cell::Empty]);
        t.summary.push(("count", Cell::Int(2)));
        let text = render(&Output::Table(t.clone()), Format::Csv);
        assert_eq!(
            text,
            "U,re_E,im_E,note\n\
             5.0000000000000000e-1,1.0000000000000000e0,-2.5000000000000000e-1,\"a, b\"\n\
             -1.0000000000000000e0,,,\n# count = 2\n"
        );
        let json: Value = serde_json::from_str(&render(&Output::Table(t), Format::Json)).unwrap();
        assert_eq!(json["columns"], json!(["U", "E", "note"]));
        assert_eq!(json["rows"][0][1], json!([1.0, -0.25]));
        assert_eq!(json["rows"][1][1], Value::Null);
        assert_eq!(json["summary"]["count"], json!(2));
    }

    #[test]
    fn reports_flatten_to_field_value_rows() {
        let report = Output::Report(json!({"a": {"b": [1, 2.5]}, "c": null, "d": "x"}));
        assert_eq!(
            render(&report, Format::Csv),
            "field,value\na.b.0,1\na.b.1,2.5000000000000000e0\nc,\nd,x\n"
        );
    }
}
