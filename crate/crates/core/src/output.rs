//! CSV and JSON encoders for result records.
//!
//! Floats are written with 9 significant digits (`%.9g`) in both formats, so a
//! CSV file and its JSON twin decode to identical values.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::Value;

/// `%.9g`: 9 significant digits, trailing zeros trimmed, scientific notation
/// outside `1e-4 <= |x| < 1e9`.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("LowerExp output has an exponent");
    let exp: i32 = exp.parse().expect("LowerExp exponent is an integer");
    if !(-4..9).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        let decimals = (8 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rounds a float to what [`fmt_sig9`] prints.
pub fn round_sig9(x: f64) -> f64 {
    if x.is_finite() {
        fmt_sig9(x).parse().expect("fmt_sig9 output parses")
    } else {
        x
    }
}

/// Writes records as CSV: one header row, one line per record, LF endings.
///
/// The record type must serialize to a flat JSON object; nested values are
/// rejected.
pub fn write_csv<W: Write, T: Serialize>(mut w: W, records: &[T]) -> io::Result<()> {
    let rows: Vec<Value> = records
        .iter()
        .map(|r| serde_json::to_value(r).map_err(io::Error::other))
        .collect::<io::Result<_>>()?;
    let Some(Value::Object(first)) = rows.first() else {
        return Ok(());
    };
    let header: Vec<&String> = first.keys().collect();
    writeln!(w, "{}", header.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(","))?;
    for row in &rows {
        let Value::Object(obj) = row else {
            return Err(io::Error::other("record is not an object"));
        };
        let cells = header
            .iter()
            .map(|key| cell(obj.get(key.as_str()).unwrap_or(&Value::Null)))
            .collect::<io::Result<Vec<_>>>()?;
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

fn cell(v: &Value) -> io::Result<String> {
    Ok(match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => match (n.as_u64(), n.as_i64(), n.as_f64()) {
            (Some(u), _, _) => u.to_string(),
            (_, Some(i), _) => i.to_string(),
            (_, _, Some(f)) => fmt_sig9(f),
            _ => n.to_string(),
        },
        Value::String(s) => s.clone(),
        _ => return Err(io::Error::other("nested value in CSV record")),
    })
}

/// Serializes to pretty JSON with every float rounded by [`round_sig9`].
pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_floats(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round_sig9).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}
