//! Deterministic structured reports: sorted-key JSON, rationals as exact
//! strings, floats at 15 significant digits. Byte-identical output for
//! identical inputs and flags is part of the contract, so worker counts are
//! kept out of the echoed arguments.

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use parrep_core::rat::{format_rat, Rat};

pub const REPORT_SCHEMA: u32 = 1;

/// 15 significant digits in scientific notation, as a string: exact control
/// of the byte form, immune to formatter drift.
pub fn fnum(x: f64) -> Value {
    if x.is_nan() {
        Value::String("nan".into())
    } else if x.is_infinite() {
        Value::String(if x > 0.0 { "inf" } else { "-inf" }.into())
    } else {
        Value::String(format!("{:.14e}", x))
    }
}

pub fn frat(r: &Rat) -> Value {
    Value::String(format_rat(r))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    format!("{:x}", h.finalize())
}

pub struct Report {
    command: String,
    args: Map<String, Value>,
    input: Map<String, Value>,
    results: Map<String, Value>,
    checks: Vec<Value>,
    failed: bool,
}

impl Report {
    pub fn new(command: &str) -> Report {
        Report {
            command: command.to_string(),
            args: Map::new(),
            input: Map::new(),
            results: Map::new(),
            checks: Vec::new(),
            failed: false,
        }
    }

    pub fn arg(&mut self, key: &str, value: impl Into<Value>) {
        self.args.insert(key.to_string(), value.into());
    }

    pub fn input(&mut self, key: &str, value: impl Into<Value>) {
        self.input.insert(key.to_string(), value.into());
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.results.insert(key.to_string(), value.into());
    }

    /// Records an asserted invariant; any failure flips the exit code.
    pub fn check(&mut self, name: &str, pass: bool, detail: String) {
        let mut m = Map::new();
        m.insert("name".into(), Value::String(name.into()));
        m.insert(
            "status".into(),
            Value::String(if pass { "pass" } else { "fail" }.into()),
        );
        m.insert("detail".into(), Value::String(detail));
        self.checks.push(Value::Object(m));
        if !pass {
            self.failed = true;
        }
    }

    /// Records an observation that is reported but never asserted.
    pub fn observe(&mut self, name: &str, detail: String) {
        let mut m = Map::new();
        m.insert("name".into(), Value::String(name.into()));
        m.insert("status".into(), Value::String("reported".into()));
        m.insert("detail".into(), Value::String(detail));
        self.checks.push(Value::Object(m));
    }

    pub fn failed(&self) -> bool {
        self.failed
    }

    pub fn render(&self) -> String {
        let mut root = Map::new();
        root.insert(
            "schema_version".into(),
            Value::Number(REPORT_SCHEMA.into()),
        );
        root.insert("command".into(), Value::String(self.command.clone()));
        root.insert("args".into(), Value::Object(self.args.clone()));
        root.insert("input".into(), Value::Object(self.input.clone()));
        root.insert("results".into(), Value::Object(self.results.clone()));
        root.insert("checks".into(), Value::Array(self.checks.clone()));
        let mut s = serde_json::to_string_pretty(&Value::Object(root)).expect("report serializes");
        s.push('\n');
        s
    }
}
