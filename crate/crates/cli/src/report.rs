//! Flat key/value reports rendered as text or JSON lines.
//!
//! The first output line is a header carrying the wall-clock timestamp; the
//! body that follows depends only on the inputs.

use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Default)]
pub struct Report {
    entries: Vec<(String, Value)>,
}

impl Report {
    pub fn num(&mut self, key: impl Into<String>, v: f64) -> &mut Self {
        let value = serde_json::Number::from_f64(v)
            .map(Value::Number)
            .unwrap_or(Value::Null);
        self.entries.push((key.into(), value));
        self
    }

    pub fn int(&mut self, key: impl Into<String>, v: u64) -> &mut Self {
        self.entries.push((key.into(), Value::from(v)));
        self
    }

    pub fn text(&mut self, key: impl Into<String>, v: impl Into<String>) -> &mut Self {
        self.entries.push((key.into(), Value::String(v.into())));
        self
    }

    pub fn flag(&mut self, key: impl Into<String>, v: bool) -> &mut Self {
        self.entries.push((key.into(), Value::Bool(v)));
        self
    }

    pub fn body(&self, format: Format) -> String {
        match format {
            Format::Text => {
                let mut out = String::new();
                for (k, v) in &self.entries {
                    let v = match v {
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    out.push_str(&format!("{k} = {v}\n"));
                }
                out
            }
            Format::Json => {
                let map: Map<String, Value> = self.entries.iter().cloned().collect();
                format!("{}\n", Value::Object(map))
            }
        }
    }

    pub fn render(&self, format: Format, generated_at: u64) -> String {
        let header = match format {
            Format::Text => format!("generated_at_unix={generated_at}\n"),
            Format::Json => format!("{{\"generated_at_unix\":{generated_at}}}\n"),
        };
        header + &self.body(format)
    }
}
