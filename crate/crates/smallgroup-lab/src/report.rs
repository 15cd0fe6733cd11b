//! Report records, exact-value encoding and deterministic rendering.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;
use serde_json::{Map, Value};

pub const TOOL_NAME: &str = "smallgroup-lab";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const RNG_ALGORITHM: &str = "ChaCha8Rng";
pub const RNG_SEEDING: &str = "seed_from_u64";

/// Equation labels a check may cite.
pub const PAPER_TAGS: [&str; 23] = [
    "Aszorz", "Ainv", "Amon", "Bszorz", "Binv", "Bmon", "BAof", "korl", "psidef", "ee", "halmos", "ginverze",
    "ffff", "rezid", "tsor", "Dmon", "De", "suru", "szorzas", "inv", "mmertek", "frakC", "kitolt",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

/// A rational as decimal strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Exact {
    pub num: String,
    pub den: String,
}

impl From<&BigRational> for Exact {
    fn from(q: &BigRational) -> Self {
        Exact { num: q.numer().to_string(), den: q.denom().to_string() }
    }
}

impl Exact {
    pub fn int(n: impl Into<BigInt>) -> Self {
        Exact { num: n.into().to_string(), den: "1".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub paper_tag: &'static str,
    pub status: Status,
    pub witness: Value,
    pub values: BTreeMap<String, Exact>,
}

impl Check {
    pub fn new(name: impl Into<String>, paper_tag: &'static str, passed: bool) -> Self {
        assert!(PAPER_TAGS.contains(&paper_tag), "undocumented tag {paper_tag}");
        Check {
            name: name.into(),
            paper_tag,
            status: if passed { Status::Pass } else { Status::Fail },
            witness: Value::Null,
            values: BTreeMap::new(),
        }
    }

    pub fn witness(mut self, w: impl Serialize) -> Self {
        self.witness = serde_json::to_value(w).expect("witness serializes");
        self
    }

    /// Records the witness only when the check failed.
    pub fn witness_on_fail(self, w: impl Serialize) -> Self {
        if self.passed() {
            self
        } else {
            self.witness(w)
        }
    }

    pub fn value(mut self, key: &str, v: Exact) -> Self {
        self.values.insert(key.to_string(), v);
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ErrorInfo {
    pub kind: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub status: Status,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub tool: BTreeMap<&'static str, &'static str>,
    pub scenario: Value,
    pub rng: Value,
    pub results: Value,
    pub checks: Vec<Check>,
    pub error: Option<ErrorInfo>,
    pub summary: Summary,
}

/// Rebuilds every object with its keys in sorted order.
pub fn canonical(v: &Value) -> Value {
    match v {
        Value::Object(m) => {
            let sorted: BTreeMap<&String, Value> = m.iter().map(|(k, v)| (k, canonical(v))).collect();
            let mut out = Map::new();
            for (k, v) in sorted {
                out.insert(k.clone(), v);
            }
            Value::Object(out)
        }
        Value::Array(a) => Value::Array(a.iter().map(canonical).collect()),
        other => other.clone(),
    }
}

impl Report {
    pub fn new(scenario: Value, seed: u64, results: Value, checks: Vec<Check>, error: Option<ErrorInfo>) -> Self {
        let passed = checks.iter().filter(|c| c.passed()).count();
        let failed = checks.len() - passed;
        let status = if failed == 0 && error.is_none() { Status::Pass } else { Status::Fail };
        let tool = BTreeMap::from([("name", TOOL_NAME), ("version", TOOL_VERSION)]);
        let rng = serde_json::json!({ "algorithm": RNG_ALGORITHM, "seeding": RNG_SEEDING, "seed": seed });
        Report { tool, scenario, rng, results, checks, error, summary: Summary { total: passed + failed, passed, failed, status } }
    }

    pub fn passed(&self) -> bool {
        self.summary.status == Status::Pass
    }

    pub fn to_value(&self) -> Value {
        canonical(&serde_json::to_value(self).expect("report serializes"))
    }

    /// Pretty JSON with sorted keys and a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value()).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_table(&self) -> String {
        let kind = self.scenario.get("kind").and_then(Value::as_str).unwrap_or("?");
        let mut out = format!("{TOOL_NAME} {TOOL_VERSION}  scenario {kind}  seed {}\n", self.rng["seed"]);
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.checks {
            let status = if c.passed() { "PASS" } else { "FAIL" };
            let mut line = format!("{status}  {:<8}  {:<width$}", c.paper_tag, c.name);
            if !c.witness.is_null() {
                line.push_str(&format!("  witness {}", c.witness));
            }
            for (k, v) in &c.values {
                line.push_str(&format!("  {k}={}/{}", v.num, v.den));
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        if let Some(e) = &self.error {
            out.push_str(&format!("ERROR {}: {}\n", e.kind, e.message));
        }
        let s = &self.summary;
        let status = if s.status == Status::Pass { "PASS" } else { "FAIL" };
        out.push_str(&format!("{status}  {} checks, {} passed, {} failed\n", s.total, s.passed, s.failed));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_are_sorted() {
        let v = serde_json::json!({"b": 1, "a": {"d": 2, "c": [ {"z": 0, "y": 1} ]}});
        let s = serde_json::to_string(&canonical(&v)).unwrap();
        assert_eq!(s, r#"{"a":{"c":[{"y":1,"z":0}],"d":2},"b":1}"#);
    }

    #[test]
    fn summary_counts() {
        let checks = vec![Check::new("x", "korl", true), Check::new("y", "ffff", false).witness([1, 2])];
        let r = Report::new(Value::Null, 3, Value::Null, checks, None);
        assert_eq!((r.summary.total, r.summary.failed), (2, 1));
        assert!(!r.passed());
        assert!(r.to_table().contains("FAIL  ffff"));
    }

    #[test]
    fn exact_encoding() {
        let q = BigRational::new(BigInt::from(-6), BigInt::from(8));
        assert_eq!(Exact::from(&q), Exact { num: "-3".into(), den: "4".into() });
    }

    #[test]
    #[should_panic]
    fn unknown_tag_panics() {
        Check::new("x", "made-up", true);
    }
}
