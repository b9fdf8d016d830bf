//! Number formatting and JSON/CSV emission.

use std::io::{self, Write};

use num_complex::Complex64;
use obe_steady::CMat;
use serde::Serialize;
use serde_json::{json, Value};

pub const SCHEMA_VERSION: u64 = 1;

/// Shortest fixed or scientific form carrying 17 significant digits.
pub fn fmt17(v: f64) -> String {
    if v == 0.0 {
        return "0.0".to_string();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".to_string()
        } else if v > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    let sci = format!("{v:.16e}");
    let exp: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    if (-5..17).contains(&exp) {
        let s = format!("{:.*}", (16 - exp) as usize, v);
        if s.contains('.') {
            s
        } else {
            s + ".0"
        }
    } else {
        sci
    }
}

struct Fmt17;

impl serde_json::ser::Formatter for Fmt17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt17(value).as_bytes())
    }
}

/// Compact JSON with 17-digit floats and a trailing newline.
pub fn to_json(v: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Fmt17);
    v.serialize(&mut ser).expect("serializing a JSON value cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON output is UTF-8")
}

/// `null` for non-finite values.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

pub fn opt_num(v: Option<f64>) -> Value {
    v.map_or(Value::Null, num)
}

/// `{"re": [[...]], "im": [[...]]}`, row-major.
pub fn matrix(m: &CMat) -> Value {
    let part = |f: fn(&Complex64) -> f64| -> Value {
        Value::Array(
            (0..m.nrows())
                .map(|r| Value::Array((0..m.ncols()).map(|c| num(f(&m[(r, c)]))).collect()))
                .collect(),
        )
    };
    json!({ "re": part(|z| z.re), "im": part(|z| z.im) })
}

pub fn vector(v: &[Complex64]) -> Value {
    json!({
        "re": v.iter().map(|z| num(z.re)).collect::<Vec<_>>(),
        "im": v.iter().map(|z| num(z.im)).collect::<Vec<_>>(),
    })
}

/// RFC-4180 text from a header and rows of preformatted fields.
pub fn to_csv(header: &[&str], rows: &[Vec<String>]) -> io::Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

/// Rows `block,row,col,re,im` for one matrix block.
pub fn matrix_rows(name: &str, m: &CMat, rows: &mut Vec<Vec<String>>) {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let z = m[(r, c)];
            rows.push(vec![
                name.to_string(),
                r.to_string(),
                c.to_string(),
                fmt17(z.re),
                fmt17(z.im),
            ]);
        }
    }
}

/// Row `name,,,value,` for a scalar.
pub fn scalar_row(name: &str, v: Option<f64>, rows: &mut Vec<Vec<String>>) {
    let s = v.map_or(String::new(), fmt17);
    rows.push(vec![name.to_string(), String::new(), String::new(), s, String::new()]);
}
