//! Rendering of command results as text, JSON or CSV.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use crate::args::Format;
use crate::error::CliResult;

pub const CSV_HEADER: [&str; 4] = ["label", "probability", "count", "frequency"];

/// One CSV row: an outcome, region or check.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Row {
    pub label: String,
    pub probability: Option<f64>,
    pub count: Option<u64>,
    pub frequency: Option<f64>,
}

impl Row {
    pub fn new(label: impl Into<String>) -> Self {
        Row { label: label.into(), ..Row::default() }
    }

    pub fn probability(mut self, p: f64) -> Self {
        self.probability = Some(p);
        self
    }

    pub fn sampled(mut self, count: u64, trials: u64) -> Self {
        self.count = Some(count);
        self.frequency = Some(if trials == 0 { 0.0 } else { count as f64 / trials as f64 });
        self
    }
}

/// Everything a command produces, independent of the output format.
#[derive(Clone, Debug, PartialEq)]
pub struct Emission {
    pub scenario: String,
    pub anchor: &'static str,
    pub parameters: Value,
    pub analytic: Value,
    pub sampled: Option<Value>,
    pub text: Vec<String>,
    pub rows: Vec<Row>,
    pub warnings: Vec<String>,
    /// Failed invariant checks (verify only).
    pub failures: usize,
}

impl Emission {
    pub fn new(scenario: impl Into<String>, anchor: &'static str, parameters: impl Serialize) -> Self {
        Emission {
            scenario: scenario.into(),
            anchor,
            parameters: serde_json::to_value(parameters).expect("parameters serialize"),
            analytic: Value::Null,
            sampled: None,
            text: Vec::new(),
            rows: Vec::new(),
            warnings: Vec::new(),
            failures: 0,
        }
    }

    pub fn to_json(&self, timestamp: Option<u64>) -> Value {
        let mut results = json!({ "analytic": self.analytic });
        if let Some(s) = &self.sampled {
            results["sampled"] = s.clone();
        }
        let mut out = json!({
            "scenario": self.scenario,
            "paper_anchor": self.anchor,
            "parameters": self.parameters,
            "results": results,
        });
        if let Some(t) = timestamp {
            out["timestamp"] = json!(t);
        }
        out
    }

    pub fn render(&self, format: Format, deterministic: bool) -> CliResult<String> {
        let timestamp = (!deterministic).then(unix_time);
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.to_json(timestamp))
                    .expect("JSON values serialize");
                s.push('\n');
                Ok(s)
            }
            Format::Csv => self.to_csv(),
            Format::Text => Ok(self.to_text(timestamp)),
        }
    }

    fn to_text(&self, timestamp: Option<u64>) -> String {
        let mut out = format!("scenario: {}\nanchor:   {}\n", self.scenario, self.anchor);
        if let Some(t) = timestamp {
            out.push_str(&format!("time:     {t}\n"));
        }
        out.push('\n');
        for line in &self.text {
            out.push_str(line);
            out.push('\n');
        }
        out
    }

    fn to_csv(&self) -> CliResult<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| std::io::Error::other(e.to_string());
        w.write_record(CSV_HEADER).map_err(io)?;
        let opt = |x: Option<String>| x.unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.label.clone(),
                opt(r.probability.map(|p| p.to_string())),
                opt(r.count.map(|c| c.to_string())),
                opt(r.frequency.map(|f| f.to_string())),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("CSV of UTF-8 fields is UTF-8"))
    }
}

fn unix_time() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Fixed-width probability for text tables.
pub fn prob(p: f64) -> String {
    format!("{p:.6}")
}
