use std::collections::BTreeMap;

use ergodic_towers::{Error, Exact, QuadNumber};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::Format;

/// A command's result: exact quantities, audit verdicts, one data table and
/// free-form JSON details.
#[derive(Debug, Clone)]
pub struct Report {
    command: &'static str,
    values: BTreeMap<String, Exact>,
    audits: BTreeMap<String, bool>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    details: Value,
    error: Option<Value>,
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

/// `exact,decimal` cells for a table row.
pub fn cells(q: &QuadNumber) -> [String; 2] {
    let e = Exact::from(q);
    [e.exact, e.decimal]
}

impl Report {
    pub fn new(command: &'static str, header: &[&str]) -> Self {
        Report {
            command,
            values: BTreeMap::new(),
            audits: BTreeMap::new(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
            details: Value::Null,
            error: None,
        }
    }

    pub fn failure(command: &'static str, e: &Error, audit: bool) -> Self {
        let mut r = Report::new(command, &["error", "reason"]);
        let kind = if audit { "audit" } else { "configuration" };
        r.rows.push(vec![kind.to_string(), e.to_string().replace(',', ";")]);
        r.error = Some(json!({ "kind": kind, "reason": e.to_string() }));
        r
    }

    pub fn value(&mut self, name: &str, q: &QuadNumber) -> &mut Self {
        self.values.insert(name.to_string(), Exact::from(q));
        self
    }

    pub fn exact(&mut self, name: &str, e: Exact) -> &mut Self {
        self.values.insert(name.to_string(), e);
        self
    }

    pub fn audit(&mut self, name: &str, passed: bool) -> &mut Self {
        self.audits.insert(name.to_string(), passed);
        self
    }

    pub fn row(&mut self, row: Vec<String>) -> &mut Self {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
        self
    }

    pub fn details<T: Serialize>(&mut self, d: &T) -> &mut Self {
        self.details = serde_json::to_value(d).expect("details serialize");
        self
    }

    pub fn ok(&self) -> bool {
        self.error.is_none() && self.audits.values().all(|&a| a)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.json(),
            Format::Csv => self.csv(),
        }
    }

    fn json(&self) -> String {
        let table: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                Value::Object(
                    self.header
                        .iter()
                        .cloned()
                        .zip(r.iter().map(|c| Value::String(c.clone())))
                        .collect(),
                )
            })
            .collect();
        let mut out = json!({
            "command": self.command,
            "ok": self.ok(),
            "audits": self.audits,
            "values": self.values,
            "table": table,
        });
        if !self.details.is_null() {
            out["details"] = self.details.clone();
        }
        if let Some(e) = &self.error {
            out["error"] = e.clone();
        }
        to_json(&out)
    }

    /// The data table, then a `quantity,exact,decimal` table and an
    /// `audit,passed` table, separated by blank lines.
    fn csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        if !self.values.is_empty() {
            out.push_str("\nquantity,exact,decimal\n");
            for (k, v) in &self.values {
                out.push_str(&format!("{k},{},{}\n", v.exact, v.decimal));
            }
        }
        out.push_str("\naudit,passed\n");
        for (k, v) in &self.audits {
            out.push_str(&format!("{k},{v}\n"));
        }
        out.push_str(&format!("ok,{}\n", self.ok()));
        out
    }
}
