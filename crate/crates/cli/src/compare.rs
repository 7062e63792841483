//! Checks a report against a reference file of expected values.
//!
//! A reference is a list of checks. Each names a value in the report by JSON
//! pointer and says how it must relate to the expected value.

use std::fmt;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    /// `|actual - expected| <= abs_tol + rel_tol * |expected|`
    #[default]
    Close,
    /// `actual <= expected + abs_tol`
    Le,
    /// `actual >= expected - abs_tol`
    Ge,
    /// Exact JSON equality; for booleans, strings, integers and lists.
    Eq,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub name: String,
    /// JSON pointer into the report, e.g. `/run/final_energy`.
    pub path: String,
    pub expected: Value,
    #[serde(default)]
    pub abs_tol: f64,
    #[serde(default)]
    pub rel_tol: f64,
    #[serde(default)]
    pub cmp: Relation,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reference {
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub checks: Vec<Check>,
}

impl Reference {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        for c in &r.checks {
            if !c.path.is_empty() && !c.path.starts_with('/') {
                bail!(
                    "check {:?}: path must be a JSON pointer starting with '/'",
                    c.name
                );
            }
            if !(c.abs_tol >= 0.0 && c.rel_tol >= 0.0) {
                bail!("check {:?}: tolerances must be non-negative", c.name);
            }
            if c.cmp != Relation::Eq && !c.expected.is_number() {
                bail!(
                    "check {:?}: {:?} needs a numeric expected value",
                    c.name,
                    c.cmp
                );
            }
        }
        Ok(r)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub actual: Value,
    pub expected: Value,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "ok  " } else { "FAIL" };
        write!(f, "{tag} {:<32} {}", self.name, self.detail)
    }
}

fn evaluate(check: &Check, report: &Value) -> CheckResult {
    let actual = report.pointer(&check.path).cloned().unwrap_or(Value::Null);
    let (passed, detail) = match (check.cmp, actual.as_f64(), check.expected.as_f64()) {
        (Relation::Eq, _, _) => (
            actual == check.expected,
            format!("{actual} == {}", check.expected),
        ),
        (_, None, _) => (false, format!("{} is not a number ({actual})", check.path)),
        (rel, Some(a), Some(e)) => {
            let tol = check.abs_tol + check.rel_tol * e.abs();
            match rel {
                Relation::Close => {
                    let d = (a - e).abs();
                    (
                        d <= tol,
                        format!("{a} vs {e}: |diff| = {d:.3e} (tol {tol:.3e})"),
                    )
                }
                Relation::Le => (a <= e + tol, format!("{a} <= {e} (+{tol:.3e})")),
                Relation::Ge => (a >= e - tol, format!("{a} >= {e} (-{tol:.3e})")),
                Relation::Eq => unreachable!(),
            }
        }
        (_, Some(_), None) => (false, "expected value is not a number".into()),
    };
    CheckResult {
        name: check.name.clone(),
        passed,
        actual,
        expected: check.expected.clone(),
        detail,
    }
}

pub fn compare(report: &Value, reference: &Reference) -> Vec<CheckResult> {
    reference
        .checks
        .iter()
        .map(|c| evaluate(c, report))
        .collect()
}

/// Reads `report` and `reference` files and prints one line per check.
/// Returns whether every check passed.
pub fn run(report: &std::path::Path, reference: &std::path::Path) -> anyhow::Result<bool> {
    let report_text = std::fs::read_to_string(report)
        .with_context(|| format!("cannot read {}", report.display()))?;
    let report: Value = serde_json::from_str(&report_text)
        .with_context(|| format!("invalid report {}", report.display()))?;
    let ref_text = std::fs::read_to_string(reference)
        .with_context(|| format!("cannot read {}", reference.display()))?;
    let refs = Reference::parse(&ref_text)
        .with_context(|| format!("invalid reference {}", reference.display()))?;
    if refs.checks.is_empty() {
        log::warn!("reference {} has no checks", reference.display());
    }
    let results = compare(&report, &refs);
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} checks, {} failed", results.len(), failed);
    Ok(failed == 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn check(path: &str, expected: Value, cmp: Relation) -> Check {
        Check {
            name: path.into(),
            path: path.into(),
            expected,
            abs_tol: 0.01,
            rel_tol: 0.0,
            cmp,
        }
    }

    #[test]
    fn relations() {
        let report = json!({"run": {"e": 22.19, "ok": true, "k": [7, 8]}});
        let cases = [
            (check("/run/e", json!(22.195), Relation::Close), true),
            (check("/run/e", json!(22.1), Relation::Close), false),
            (check("/run/e", json!(22.0), Relation::Le), false),
            (check("/run/e", json!(22.0), Relation::Ge), true),
            (check("/run/ok", json!(true), Relation::Eq), true),
            (check("/run/k", json!([7]), Relation::Eq), false),
            (check("/run/missing", json!(1.0), Relation::Close), false),
        ];
        for (c, want) in cases {
            assert_eq!(evaluate(&c, &report).passed, want, "{c:?}");
        }
    }

    #[test]
    fn nan_never_passes() {
        let report = json!({"x": null});
        assert!(!evaluate(&check("/x", json!(0.0), Relation::Le), &report).passed);
    }

    #[test]
    fn reference_validation() {
        assert!(
            Reference::parse(r#"{"checks": [{"name": "a", "path": "x", "expected": 1}]}"#).is_err()
        );
        assert!(Reference::parse(
            r#"{"checks": [{"name": "a", "path": "/x", "expected": "s", "cmp": "le"}]}"#
        )
        .is_err());
        assert!(Reference::parse(r#"{"checks": [], "extra": 1}"#).is_err());
        assert_eq!(Reference::parse("{}").unwrap().checks.len(), 0);
    }
}
