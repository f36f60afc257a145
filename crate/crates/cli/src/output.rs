use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use torus_trace::format::sig17;
use torus_trace::Result;

/// Pretty JSON with every float in 17 significant digits.
pub fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let value = serde_json::to_value(v)?;
    let mut s = String::new();
    write_value(&mut s, &value, 0);
    s.push('\n');
    Ok(s)
}

fn write_value(s: &mut String, v: &Value, depth: usize) {
    let pad = |s: &mut String, d: usize| s.push_str(&"  ".repeat(d));
    match v {
        Value::Null => s.push_str("null"),
        Value::Bool(b) => s.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => write!(s, "{i}").unwrap(),
            (_, Some(u)) => write!(s, "{u}").unwrap(),
            _ => s.push_str(&sig17(n.as_f64().unwrap())),
        },
        Value::String(t) => s.push_str(&Value::String(t.clone()).to_string()),
        Value::Array(a) if a.is_empty() => s.push_str("[]"),
        Value::Array(a) => {
            s.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                pad(s, depth + 1);
                write_value(s, x, depth + 1);
                s.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            pad(s, depth);
            s.push(']');
        }
        Value::Object(o) if o.is_empty() => s.push_str("{}"),
        Value::Object(o) => {
            s.push_str("{\n");
            for (i, (k, x)) in o.iter().enumerate() {
                pad(s, depth + 1);
                write!(s, "{}: ", Value::String(k.clone())).unwrap();
                write_value(s, x, depth + 1);
                s.push_str(if i + 1 < o.len() { ",\n" } else { "\n" });
            }
            pad(s, depth);
            s.push('}');
        }
    }
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, v: &T) -> Result<()> {
    std::fs::write(dir.join(name), to_json(v)?)?;
    Ok(())
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

/// CSV builder; floats go through `sig17`.
pub struct Csv {
    buf: String,
}

pub enum Cell {
    F(f64),
    I(i64),
    S(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::I(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::I(x)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::S(x.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::F)
    }
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { buf: header.join(",") + "\n" }
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        let parts: Vec<String> = cells
            .into_iter()
            .map(|c| match c {
                Cell::F(x) => sig17(x),
                Cell::I(i) => i.to_string(),
                Cell::S(s) => s,
                Cell::Empty => String::new(),
            })
            .collect();
        self.buf.push_str(&parts.join(","));
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}
