//! Run reports: a flat, ordered set of fields written as JSON or two-line CSV.
//!
//! Reports hold only values that are fixed by the inputs and flags, so two
//! identical invocations produce byte-identical files. Wall-clock timings go
//! to the human summary instead.

use std::path::Path;

use serde_json::{Map, Value};

#[derive(Debug, Default)]
pub struct Report {
    fields: Map<String, Value>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        let mut r = Report::default();
        r.set("command", command);
        r
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.fields.insert(key.to_owned(), value.into());
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.fields).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let header: Vec<String> = self.fields.keys().map(|k| csv_field(k)).collect();
        let values: Vec<String> = self
            .fields
            .values()
            .map(|v| match v {
                Value::Null => String::new(),
                Value::String(s) => csv_field(s),
                other => other.to_string(),
            })
            .collect();
        format!("{}\n{}\n", header.join(","), values.join(","))
    }

    /// JSON for a `.json` path, CSV otherwise.
    pub fn render_for(&self, path: &Path) -> String {
        let json = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if json {
            self.to_json()
        } else {
            self.to_csv()
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}
