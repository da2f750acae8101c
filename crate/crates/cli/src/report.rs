//! Report assembly. Keys are emitted in sorted order, so identical inputs give
//! identical bytes apart from `wall_clock_ms`.

use std::time::Instant;

use serde::Serialize;
use serde_json::{Map, Value};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub struct Report {
    command: &'static str,
    config: Value,
    results: Map<String, Value>,
    checks: Vec<(String, bool)>,
    start: Instant,
}

impl Report {
    pub fn new(command: &'static str, config: Value) -> Self {
        Report {
            command,
            config,
            results: Map::new(),
            checks: Vec::new(),
            start: Instant::now(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).expect("report values serialize");
        self.results.insert(key.to_string(), value);
    }

    pub fn check(&mut self, name: &str, passed: bool) {
        self.checks.push((name.to_string(), passed));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }

    fn elapsed_ms(&self) -> f64 {
        (self.start.elapsed().as_secs_f64() * 1e6).round() / 1e3
    }

    fn checks_object(&self) -> Value {
        Value::Object(
            self.checks
                .iter()
                .map(|(k, v)| (k.clone(), Value::Bool(*v)))
                .collect(),
        )
    }

    pub fn to_json(&self) -> String {
        let mut top = Map::new();
        top.insert("command".into(), self.command.into());
        top.insert("version".into(), VERSION.into());
        top.insert("config".into(), self.config.clone());
        top.insert("results".into(), Value::Object(self.results.clone()));
        top.insert("checks".into(), self.checks_object());
        top.insert("pass".into(), self.passed().into());
        top.insert("wall_clock_ms".into(), self.elapsed_ms().into());
        let mut line = Value::Object(top).to_string();
        line.push('\n');
        line
    }

    /// A CSV table framed by `#` comment lines carrying the same metadata as
    /// the JSON form.
    pub fn to_csv(&self, header: &[&str], rows: &[Vec<String>]) -> String {
        let mut out = String::new();
        out += &format!(
            "# command={}\n# version={VERSION}\n# config={}\n",
            self.command, self.config
        );
        out += &header.join(",");
        out.push('\n');
        for row in rows {
            out += &row.join(",");
            out.push('\n');
        }
        out += &format!(
            "# checks={}\n# pass={}\n",
            self.checks_object(),
            self.passed()
        );
        out += &format!("# wall_clock_ms={}\n", self.elapsed_ms());
        out
    }
}
