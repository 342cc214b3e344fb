//! Number formatting, metadata, and the CSV/JSON writers shared by commands.

use std::io::Write;

use anyhow::Result;
use serde_json::{json, Map, Value};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const GIT_HASH: &str = env!("UOHT_GIT_HASH");

/// `x` with 12 significant digits, shortest form, independent of locale.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..12).contains(&exp) {
        trim_zeros(format!("{:.*}", (11 - exp) as usize, x))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Rounds every float in `v` to 12 significant digits.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64");
            num(x).parse::<f64>().ok().map_or(Value::Null, |r| json!(r))
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

/// Provenance recorded with every result.
#[derive(Clone, Debug, Default)]
pub struct Metadata {
    pub fields: Vec<(&'static str, String)>,
}

impl Metadata {
    pub fn new(command: &str) -> Self {
        Metadata {
            fields: vec![
                ("command", command.to_string()),
                ("version", VERSION.to_string()),
                ("git_hash", GIT_HASH.to_string()),
            ],
        }
    }

    pub fn with(mut self, key: &'static str, value: impl ToString) -> Self {
        self.fields.push((key, value.to_string()));
        self
    }

    fn to_json(&self) -> Value {
        let map: Map<String, Value> = self
            .fields
            .iter()
            .map(|(k, v)| (k.to_string(), Value::String(v.clone())))
            .collect();
        Value::Object(map)
    }
}

/// Writes `body` plus a `metadata` member as pretty JSON.
pub fn write_json(out: &mut dyn Write, mut body: Value, meta: &Metadata) -> Result<()> {
    if let Value::Object(o) = &mut body {
        o.insert("metadata".into(), meta.to_json());
    }
    serde_json::to_writer_pretty(&mut *out, &round_json(body))?;
    writeln!(out)?;
    Ok(())
}

/// CSV with `# key: value` metadata lines before the header.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, out: &mut dyn Write, meta: &Metadata) -> Result<()> {
        for (k, v) in &meta.fields {
            writeln!(out, "# {k}: {v}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}
