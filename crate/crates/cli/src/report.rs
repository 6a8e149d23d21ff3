//! Result rows and their CSV / JSON-lines encodings.

use std::io::{BufRead, Write};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CliError, Result};

pub const CSV_HEADER: [&str; 6] = ["scenario", "mode", "key", "value", "seed", "config_digest"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Jsonl,
}

/// Numeric output. Non-finite values are written as the literals
/// `inf`, `-inf` and `nan`.
#[derive(Debug, Clone, Copy)]
pub struct Value(pub f64);

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits() || (self.0.is_nan() && other.0.is_nan())
    }
}

fn literal(v: f64) -> Option<&'static str> {
    if v.is_nan() {
        Some("nan")
    } else if v == f64::INFINITY {
        Some("inf")
    } else if v == f64::NEG_INFINITY {
        Some("-inf")
    } else {
        None
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match literal(self.0) {
            Some(s) => f.write_str(s),
            None => write!(f, "{}", self.0),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match literal(self.0) {
            Some(l) => s.serialize_str(l),
            None => s.serialize_f64(self.0),
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => Ok(Value(v)),
            Raw::Text(t) => match t.as_str() {
                "nan" => Ok(Value(f64::NAN)),
                "inf" => Ok(Value(f64::INFINITY)),
                "-inf" => Ok(Value(f64::NEG_INFINITY)),
                _ => Err(serde::de::Error::custom(format!("bad numeric literal `{t}`"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub scenario: String,
    pub mode: String,
    pub key: String,
    pub value: Value,
    pub seed: Option<u64>,
    pub config_digest: String,
}

pub fn write_rows<W: Write>(rows: &[Row], format: Format, out: W) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CSV_HEADER).map_err(csv_error)?;
            for r in rows {
                let seed = r.seed.map(|s| s.to_string()).unwrap_or_default();
                let value = r.value.to_string();
                w.write_record([
                    r.scenario.as_str(),
                    &r.mode,
                    &r.key,
                    &value,
                    &seed,
                    &r.config_digest,
                ])
                .map_err(csv_error)?;
            }
            w.flush()?;
        }
        Format::Jsonl => {
            let mut out = std::io::BufWriter::new(out);
            for r in rows {
                serde_json::to_writer(&mut out, r).map_err(|e| CliError::Write(e.into()))?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

/// Reads rows written in JSON-lines format.
pub fn read_jsonl<R: BufRead>(input: R) -> std::result::Result<Vec<Row>, serde_json::Error> {
    input
        .lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| serde_json::from_str(&l.map_err(serde_json::Error::io)?))
        .collect()
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Write(std::io::Error::other(e))
}
