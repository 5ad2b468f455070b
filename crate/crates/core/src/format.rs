//! JSON algebra files and number formatting.
//!
//! ```json
//! {"dim": 3, "scalars": "rational", "brackets": [[1, 2, [[3, "1"]]]]}
//! ```
//! Indices are 1-based, each entry `[i, j, [[k, c], ...]]` needs `i < j`, and
//! `c` is a decimal or `"p/q"` string.

use std::collections::BTreeSet;

use serde_json::{json, Map, Value};

use crate::bracket::{is_lie, validate_jacobi, Bracket, Scalar, ScalarKind};
use crate::error::{Error, Result};
use crate::field::{format_f64, format_rational, parse_rational, Field, Rational};
use crate::linalg::Mat;

fn schema(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        location: location.into(),
        message: message.into(),
    }
}

fn index(v: &Value, dim: usize, at: &str) -> Result<usize> {
    let i = v
        .as_u64()
        .ok_or_else(|| schema(at, "expected a positive integer index"))?;
    if i == 0 || i as usize > dim {
        return Err(schema(at, format!("index {i} outside 1..={dim}")));
    }
    Ok(i as usize - 1)
}

enum Parsed {
    Exact(Rational),
    Float(f64),
}

fn constant(v: &Value, exact: bool, at: &str) -> Result<Parsed> {
    let text = match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        _ => return Err(schema(at, "expected a decimal or \"p/q\" string")),
    };
    if exact {
        parse_rational(&text)
            .map(Parsed::Exact)
            .map_err(|e| schema(at, e.to_string()))
    } else {
        match text.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(Parsed::Float(x)),
            _ => parse_rational(&text)
                .map(|q| Parsed::Float(Field::to_f64(&q)))
                .map_err(|e| schema(at, e.to_string())),
        }
    }
}

/// Parses an algebra file. JSON syntax errors report line and column;
/// schema errors report the JSON pointer of the offending field.
pub fn load_algebra(text: &str) -> Result<Bracket> {
    let root: Value = serde_json::from_str(text)
        .map_err(|e| schema(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
    algebra_from_value(&root)
}

pub fn algebra_from_value(root: &Value) -> Result<Bracket> {
    let obj = root
        .as_object()
        .ok_or_else(|| schema("/", "expected an object"))?;
    for key in obj.keys() {
        if !matches!(key.as_str(), "dim" | "scalars" | "brackets" | "name") {
            return Err(schema(format!("/{key}"), "unknown field"));
        }
    }
    let dim = obj
        .get("dim")
        .ok_or_else(|| schema("/dim", "missing"))?
        .as_u64()
        .filter(|&d| d >= 1)
        .ok_or_else(|| schema("/dim", "expected a positive integer"))? as usize;
    let exact = match obj.get("scalars").map(|v| v.as_str()) {
        None | Some(Some("rational")) => true,
        Some(Some("float")) => false,
        _ => return Err(schema("/scalars", "expected \"rational\" or \"float\"")),
    };
    let entries = obj
        .get("brackets")
        .ok_or_else(|| schema("/brackets", "missing"))?
        .as_array()
        .ok_or_else(|| schema("/brackets", "expected an array"))?;
    let mut seen = BTreeSet::new();
    let mut exact_terms = Vec::new();
    let mut float_terms = Vec::new();
    for (e, entry) in entries.iter().enumerate() {
        let at = format!("/brackets/{e}");
        let parts = entry
            .as_array()
            .filter(|a| a.len() == 3)
            .ok_or_else(|| schema(&at, "expected [i, j, [[k, c], ...]]"))?;
        let i = index(&parts[0], dim, &format!("{at}/0"))?;
        let j = index(&parts[1], dim, &format!("{at}/1"))?;
        if i >= j {
            return Err(schema(&at, format!("entries need i < j, got i = {}, j = {}", i + 1, j + 1)));
        }
        let targets = parts[2]
            .as_array()
            .ok_or_else(|| schema(format!("{at}/2"), "expected an array of [k, c]"))?;
        for (t, target) in targets.iter().enumerate() {
            let tat = format!("{at}/2/{t}");
            let pair = target
                .as_array()
                .filter(|a| a.len() == 2)
                .ok_or_else(|| schema(&tat, "expected [k, c]"))?;
            let k = index(&pair[0], dim, &format!("{tat}/0"))?;
            if !seen.insert((i, j, k)) {
                return Err(schema(&tat, format!("duplicate constant c_{{{}{}}}^{}", i + 1, j + 1, k + 1)));
            }
            match constant(&pair[1], exact, &format!("{tat}/1"))? {
                Parsed::Exact(q) => exact_terms.push((i, j, k, q)),
                Parsed::Float(x) => float_terms.push((i, j, k, x)),
            }
        }
    }
    let b = if exact {
        Bracket::from_rational_terms(dim, exact_terms)?
    } else {
        Bracket::from_float_terms(dim, float_terms)?
    };
    if !is_lie(&b) {
        return Err(Error::NotLie {
            residual: validate_jacobi(&b),
        });
    }
    Ok(b)
}

fn scalar_string(s: &Scalar) -> String {
    match s {
        Scalar::Rational(q) => format_rational(q),
        Scalar::Float(x) => format_f64(*x),
    }
}

pub fn algebra_to_value(b: &Bracket) -> Value {
    let mut entries: Vec<Value> = Vec::new();
    let mut current: Option<(usize, usize)> = None;
    let mut targets: Vec<Value> = Vec::new();
    for (t, s) in b.constants() {
        if current != Some((t.i, t.j)) {
            if let Some((i, j)) = current {
                entries.push(json!([i + 1, j + 1, std::mem::take(&mut targets)]));
            }
            current = Some((t.i, t.j));
        }
        targets.push(json!([t.k + 1, scalar_string(s)]));
    }
    if let Some((i, j)) = current {
        entries.push(json!([i + 1, j + 1, targets]));
    }
    let mut obj = Map::new();
    obj.insert("dim".into(), json!(b.dim()));
    obj.insert(
        "scalars".into(),
        json!(match b.kind() {
            ScalarKind::Rational => "rational",
            ScalarKind::Float => "float",
        }),
    );
    obj.insert("brackets".into(), Value::Array(entries));
    Value::Object(obj)
}

pub fn save_algebra(b: &Bracket) -> String {
    serde_json::to_string_pretty(&algebra_to_value(b)).expect("serializable")
}

/// A diagonal given as a JSON array of numbers or numeric strings.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse(format!("vector: {e}")))?;
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Parse("expected a JSON array".into()))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| match x {
            Value::Number(n) => n.as_f64().ok_or_else(|| Error::Parse(format!("entry {i}"))),
            Value::String(s) => match s.parse::<f64>() {
                Ok(v) => Ok(v),
                Err(_) => parse_rational(s).map(|q| Field::to_f64(&q)),
            },
            _ => Err(Error::Parse(format!("entry {i} is not a number"))),
        })
        .collect()
}

/// A matrix given as a JSON array of rows.
pub fn parse_matrix(text: &str) -> Result<Mat> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse(format!("matrix: {e}")))?;
    let rows = v
        .as_array()
        .ok_or_else(|| Error::Parse("expected an array of rows".into()))?;
    let parsed: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| parse_vector(&r.to_string()))
        .collect::<Result<_>>()?;
    let n = parsed.len();
    if parsed.iter().any(|r| r.len() != n) {
        return Err(Error::Parse("matrix must be square".into()));
    }
    Ok(Mat::from_fn(n, n, |i, j| parsed[i][j]))
}

pub fn num(x: f64) -> Value {
    Value::String(format_f64(x))
}

pub fn rational(q: &Rational) -> Value {
    Value::String(format_rational(q))
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|x| num(*x)).collect())
}

pub fn rationals(xs: &[Rational]) -> Value {
    Value::Array(xs.iter().map(rational).collect())
}

/// Row-major.
pub fn matrix(m: &Mat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| num(m[(i, j)])).collect()))
            .collect(),
    )
}
