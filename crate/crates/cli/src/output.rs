//! Table and JSON rendering. Tables use 12 significant digits in scientific notation.

use num_complex::Complex64;
use serde_json::{json, Map, Value};

#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Complex(Complex64),
    Int(usize),
    Bool(bool),
    Text(String),
    Missing,
    Raw(Value),
}

impl Cell {
    fn table(&self) -> String {
        match self {
            Cell::Num(x) => sci(*x),
            Cell::Complex(z) => format!("{} {} {}i", sci(z.re), if z.im < 0.0 { '-' } else { '+' }, sci(z.im.abs())),
            Cell::Int(k) => k.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Missing => "-".into(),
            Cell::Raw(v) => raw_table(v),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => json!(x),
            Cell::Complex(z) => json!([z.re, z.im]),
            Cell::Int(k) => json!(k),
            Cell::Bool(b) => json!(b),
            Cell::Text(s) => json!(s),
            Cell::Missing => Value::Null,
            Cell::Raw(v) => v.clone(),
        }
    }
}

pub fn sci(x: f64) -> String {
    format!("{x:.11e}")
}

fn raw_table(v: &Value) -> String {
    match v {
        Value::Number(n) => n.as_f64().map_or_else(|| n.to_string(), sci),
        Value::Array(items) => {
            let parts: Vec<String> = items.iter().map(raw_table).collect();
            format!("[{}]", parts.join(", "))
        }
        Value::Null => "-".into(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Complex64> for Cell {
    fn from(z: Complex64) -> Self {
        Cell::Complex(z)
    }
}

impl From<usize> for Cell {
    fn from(k: usize) -> Self {
        Cell::Int(k)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.into())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Missing, Cell::Num)
    }
}

#[derive(Debug, Clone)]
enum Body {
    Record(Vec<(String, Cell)>),
    Table { columns: Vec<String>, rows: Vec<Vec<Cell>> },
}

#[derive(Debug, Clone)]
pub struct Section {
    title: String,
    body: Body,
}

impl Section {
    pub fn record(title: impl Into<String>) -> Self {
        Self { title: title.into(), body: Body::Record(Vec::new()) }
    }

    pub fn table(title: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            title: title.into(),
            body: Body::Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() },
        }
    }

    pub fn put(&mut self, key: &str, value: impl Into<Cell>) -> &mut Self {
        if let Body::Record(rows) = &mut self.body {
            rows.push((key.into(), value.into()));
        }
        self
    }

    pub fn row(&mut self, cells: Vec<Cell>) -> &mut Self {
        if let Body::Table { rows, .. } = &mut self.body {
            rows.push(cells);
        }
        self
    }

    fn json(&self) -> Value {
        match &self.body {
            Body::Record(rows) => {
                let mut m = Map::new();
                for (k, v) in rows {
                    m.insert(k.clone(), v.json());
                }
                Value::Object(m)
            }
            Body::Table { columns, rows } => Value::Array(
                rows.iter()
                    .map(|r| {
                        let mut m = Map::new();
                        for (k, v) in columns.iter().zip(r) {
                            m.insert(k.clone(), v.json());
                        }
                        Value::Object(m)
                    })
                    .collect(),
            ),
        }
    }

    fn render_table(&self, out: &mut String) {
        out.push_str(&format!("== {} ==\n", self.title));
        match &self.body {
            Body::Record(rows) => {
                let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
                for (k, v) in rows {
                    out.push_str(&format!("{k:<width$}  {}\n", v.table()));
                }
            }
            Body::Table { columns, rows } => {
                let cells: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(Cell::table).collect()).collect();
                let widths: Vec<usize> = columns
                    .iter()
                    .enumerate()
                    .map(|(j, c)| cells.iter().map(|r| r.get(j).map_or(0, |s| s.len())).max().unwrap_or(0).max(c.len()))
                    .collect();
                let line = |items: Vec<&str>| {
                    let parts: Vec<String> = items.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
                    parts.join("  ").trim_end().to_string() + "\n"
                };
                out.push_str(&line(columns.iter().map(String::as_str).collect()));
                for r in &cells {
                    out.push_str(&line(r.iter().map(String::as_str).collect()));
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Table,
    Json,
}

pub fn render(sections: &[Section], format: Format) -> String {
    match format {
        Format::Table => {
            let mut out = String::new();
            for (k, s) in sections.iter().enumerate() {
                if k > 0 {
                    out.push('\n');
                }
                s.render_table(&mut out);
            }
            out
        }
        Format::Json => {
            let value = match sections {
                [one] => one.json(),
                many => {
                    let mut m = Map::new();
                    for s in many {
                        m.insert(s.title.clone(), s.json());
                    }
                    Value::Object(m)
                }
            };
            serde_json::to_string_pretty(&value).expect("json values serialize") + "\n"
        }
    }
}
