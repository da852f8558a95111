//! JSON run configuration. Every field is optional; command-line flags take
//! precedence over values read here.

use std::fmt::Display;
use std::path::Path;

use serde_json::{Map, Value};

use crate::CliError;

const KNOWN_FIELDS: &[&str] = &[
    "T",
    "N1",
    "N2",
    "lambda",
    "gamma",
    "c1",
    "c2",
    "seed",
    "episodes",
    "density",
    "density_table",
    "L",
    "noise",
    "power",
    "out",
    "summary",
    "workers",
    "beta1",
    "beta2",
    "null_shift",
    "grid_fallback",
    "axis",
    "fixed",
    "max",
];

/// Grid points and density values of a tabulated source.
pub type DensityTable = (Vec<f64>, Vec<f64>);

#[derive(Debug, Default)]
pub struct RunConfig {
    fields: Map<String, Value>,
}

fn bad(field: &str, reason: impl Display) -> CliError {
    CliError::Invalid {
        field: field.to_string(),
        reason: reason.to_string(),
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| bad("config", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let value: Value = serde_json::from_str(text).map_err(|e| bad("config", e))?;
        let Value::Object(fields) = value else {
            return Err(bad("config", "top level must be a JSON object"));
        };
        if let Some(unknown) = fields.keys().find(|k| !KNOWN_FIELDS.contains(&k.as_str())) {
            return Err(bad(unknown, "unknown config field"));
        }
        Ok(RunConfig { fields })
    }

    fn get(&self, field: &str) -> Option<&Value> {
        self.fields.get(field).filter(|v| !v.is_null())
    }

    pub fn f64(&self, field: &str) -> Result<Option<f64>, CliError> {
        self.get(field)
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| bad(field, format!("expected a number, got {v}")))
            })
            .transpose()
    }

    pub fn u64(&self, field: &str) -> Result<Option<u64>, CliError> {
        self.get(field)
            .map(|v| {
                v.as_u64()
                    .ok_or_else(|| bad(field, format!("expected a nonnegative integer, got {v}")))
            })
            .transpose()
    }

    pub fn usize(&self, field: &str) -> Result<Option<usize>, CliError> {
        self.u64(field)?
            .map(|v| usize::try_from(v).map_err(|_| bad(field, "value too large")))
            .transpose()
    }

    pub fn string(&self, field: &str) -> Result<Option<String>, CliError> {
        self.get(field)
            .map(|v| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| bad(field, format!("expected a string, got {v}")))
            })
            .transpose()
    }

    pub fn bool(&self, field: &str) -> Result<Option<bool>, CliError> {
        self.get(field)
            .map(|v| {
                v.as_bool()
                    .ok_or_else(|| bad(field, format!("expected true or false, got {v}")))
            })
            .transpose()
    }

    pub fn usize_list(&self, field: &str) -> Result<Option<Vec<usize>>, CliError> {
        let Some(v) = self.get(field) else {
            return Ok(None);
        };
        let items = v
            .as_array()
            .ok_or_else(|| bad(field, format!("expected an array of integers, got {v}")))?;
        items
            .iter()
            .map(|x| {
                x.as_u64()
                    .and_then(|x| usize::try_from(x).ok())
                    .ok_or_else(|| bad(field, format!("expected a nonnegative integer, got {x}")))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    /// `[[x, pdf], ...]` pairs for a tabulated density.
    pub fn table(&self, field: &str) -> Result<Option<DensityTable>, CliError> {
        let Some(v) = self.get(field) else {
            return Ok(None);
        };
        let rows = v
            .as_array()
            .ok_or_else(|| bad(field, "expected an array of [x, pdf] pairs"))?;
        let mut xs = Vec::with_capacity(rows.len());
        let mut pdf = Vec::with_capacity(rows.len());
        for row in rows {
            match row.as_array().map(|r| r.as_slice()) {
                Some([x, p]) => match (x.as_f64(), p.as_f64()) {
                    (Some(x), Some(p)) => {
                        xs.push(x);
                        pdf.push(p);
                    }
                    _ => return Err(bad(field, format!("non-numeric entry {row}"))),
                },
                _ => return Err(bad(field, format!("expected [x, pdf], got {row}"))),
            }
        }
        Ok(Some((xs, pdf)))
    }
}

/// Flag value if given, else config value, else `default`.
pub fn pick<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}
