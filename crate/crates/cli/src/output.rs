use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use remest::numfmt::round_sig;
use serde::Serialize;
use serde_json::Value;

use crate::CliError;

/// JSON number rounded to 12 significant digits; non-finite values become
/// the strings `"inf"`, `"-inf"` or `"nan"`.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        serde_json::Number::from_f64(round_sig(x))
            .map(Value::Number)
            .unwrap_or(Value::Null)
    } else {
        Value::String(remest::numfmt::sig(x))
    }
}

/// Serializes `v` and rounds every floating-point number in it.
pub fn rounded<T: Serialize>(v: &T) -> Value {
    fn walk(v: Value) -> Value {
        match v {
            Value::Number(n) if n.is_f64() => num(n.as_f64().expect("f64 number")),
            Value::Array(items) => Value::Array(items.into_iter().map(walk).collect()),
            Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, walk(v))).collect()),
            other => other,
        }
    }
    walk(serde_json::to_value(v).expect("report types serialize"))
}

pub fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

/// Writes through `f` to `path`, or to stdout when `path` is `None`.
pub fn emit<F>(path: Option<&Path>, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let io_err = |source| CliError::Io {
        path: path.map_or_else(|| "<stdout>".into(), |p| p.display().to_string()),
        source,
    };
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).map_err(io_err)?);
            f(&mut w).and_then(|_| w.flush()).map_err(io_err)
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w).and_then(|_| w.flush()).map_err(io_err)
        }
    }
}
