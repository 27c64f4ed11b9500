//! Sweep records shared by every experiment, with stable JSON and CSV
//! encodings. Nothing time- or host-dependent is stored, so a rerun with
//! the same configuration writes identical bytes.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::grid::GridSpec;

/// Version stamped into every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    /// No samples: nothing to check.
    VacuousPass,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self != Verdict::Fail
    }
}

/// One named pass/fail comparison `value <= bound` (or `>=` when `at_least`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub at_least: bool,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Check { name: name.into(), value, bound, at_least: false, pass: value <= bound }
    }

    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Check { name: name.into(), value, bound, at_least: true, pass: value >= bound }
    }

    /// A boolean condition recorded as 1 ≥ 1 or 0 ≥ 1.
    pub fn holds(name: &str, ok: bool) -> Self {
        Check::at_least(name, if ok { 1.0 } else { 0.0 }, 1.0)
    }
}

/// One sample row: a label, the seed that regenerates it, and ordered
/// named values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub label: String,
    pub seed: Option<u64>,
    pub values: Map<String, Value>,
}

impl Record {
    pub fn new(label: impl Into<String>, seed: Option<u64>) -> Self {
        Record { label: label.into(), seed, values: Map::new() }
    }

    pub fn with(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.values.insert(key.into(), v.into());
        self
    }

    pub fn num(&self, key: &str) -> Option<f64> {
        self.values.get(key).and_then(Value::as_f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimate: String,
    pub version: String,
    pub config_hash: String,
    pub grids: Vec<GridSpec>,
    pub parameters: Map<String, Value>,
    pub records: Vec<Record>,
    pub summary: Map<String, Value>,
    pub checks: Vec<Check>,
    pub verdict: Verdict,
}

impl EstimateReport {
    pub fn new(estimate: &str) -> Self {
        EstimateReport {
            estimate: estimate.into(),
            version: VERSION.into(),
            config_hash: String::new(),
            grids: Vec::new(),
            parameters: Map::new(),
            records: Vec::new(),
            summary: Map::new(),
            checks: Vec::new(),
            verdict: Verdict::VacuousPass,
        }
    }

    pub fn param(&mut self, key: &str, v: impl Into<Value>) {
        self.parameters.insert(key.into(), v.into());
    }

    pub fn note(&mut self, key: &str, v: impl Into<Value>) {
        self.summary.insert(key.into(), v.into());
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    /// Pass iff every check passes; vacuous when there are no records.
    pub fn finish(&mut self) {
        self.verdict = if self.records.is_empty() {
            Verdict::VacuousPass
        } else if self.checks.iter().all(|c| c.pass) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
    }

    /// Largest value of `key` over the records.
    pub fn max_of(&self, key: &str) -> Option<f64> {
        self.records.iter().filter_map(|r| r.num(key)).reduce(f64::max)
    }

    pub fn min_of(&self, key: &str) -> Option<f64> {
        self.records.iter().filter_map(|r| r.num(key)).reduce(f64::min)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// CSV of the records: label, seed, then the keys of the first record.
    pub fn to_csv(&self) -> String {
        let keys: Vec<String> = self.records.first().map(|r| r.values.keys().cloned().collect()).unwrap_or_default();
        let mut out = String::from("label,seed");
        for k in &keys {
            out.push(',');
            out.push_str(k);
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&csv_field(&r.label));
            out.push(',');
            if let Some(s) = r.seed {
                out.push_str(&s.to_string());
            }
            for k in &keys {
                out.push(',');
                match r.values.get(k) {
                    Some(Value::String(s)) => out.push_str(&csv_field(s)),
                    Some(v) => out.push_str(&v.to_string()),
                    None => {}
                }
            }
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// FNV-1a digest of complex samples, for provenance fields.
pub fn data_hash(data: &[num_complex::Complex64]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for z in data {
        for b in z.re.to_le_bytes().iter().chain(z.im.to_le_bytes().iter()) {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

/// Per-sample seed derived from a base seed and an index.
pub fn sample_seed(base: u64, index: u64) -> u64 {
    base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// max/min of positive values; 1 for fewer than two.
pub fn spread(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if values.len() < 2 {
        1.0
    } else {
        max / min
    }
}
