//! The structured document written by `analyze` and `check`.

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::catalogue::{ExpectedVerdicts, Fixture};
use crate::checks::{CheckConfig, CheckContext, CheckOutcome, Status};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecEcho {
    pub name: String,
    pub kind: String,
    pub description: String,
    pub dsl: Option<String>,
    pub parameters: BTreeMap<String, f64>,
    pub dimension: usize,
    pub domain: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub sphere_samples: usize,
    pub confirmation_samples: usize,
    pub strategy: String,
    pub config: CheckConfig,
    /// Seconds since the epoch; absent in deterministic mode.
    pub generated_unix: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub first_failure: Option<String>,
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub spec: SpecEcho,
    pub expected: ExpectedVerdicts,
    pub run: RunInfo,
    pub outcomes: Vec<CheckOutcome>,
    pub summary: Summary,
}

impl AnalysisReport {
    pub fn assemble(command: &str, ctx: &CheckContext, outcomes: Vec<CheckOutcome>, deterministic: bool) -> Self {
        let entry = &ctx.entry;
        let (kind, domain) = match &entry.fixture {
            Fixture::Lagrangian(s) => ("lagrangian", Some(s.domain().describe(s.dimension()))),
            Fixture::Field(_) => ("metric_field", None),
        };
        let failed: Vec<&CheckOutcome> = outcomes.iter().filter(|o| o.status == Status::Fail).collect();
        let summary = Summary {
            passed: outcomes.iter().filter(|o| o.status == Status::Pass).count(),
            failed: failed.len(),
            skipped: outcomes.iter().filter(|o| o.status == Status::Skipped).count(),
            first_failure: failed.first().map(|o| format!("{}: {}", o.property, o.verdict)),
            exit_code: if failed.is_empty() { 0 } else { 1 },
        };
        let generated_unix = if deterministic {
            None
        } else {
            SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs())
        };
        AnalysisReport {
            spec: SpecEcho {
                name: entry.name.clone(),
                kind: kind.into(),
                description: entry.description.clone(),
                dsl: entry.dsl_text(),
                parameters: entry.parameters(),
                dimension: entry.dimension(),
                domain,
            },
            expected: entry.expected.clone(),
            run: RunInfo {
                tool: "lmlab".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: command.into(),
                seed: ctx.seed(),
                sphere_samples: ctx.sample_count(),
                confirmation_samples: 4 * ctx.sample_count(),
                strategy: ctx.strategy().to_string(),
                config: ctx.config.clone(),
                generated_unix,
            },
            outcomes,
            summary,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.summary.exit_code
    }

    pub fn outcome(&self, property: &str) -> Option<&CheckOutcome> {
        self.outcomes.iter().find(|o| o.property == property)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| crate::LabError::Io(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalogue::get;
    use crate::checks::run_property;

    #[test]
    fn deterministic_reports_are_identical() {
        let config = CheckConfig {
            pairs: 500,
            round_trips: 50,
            ..CheckConfig::default()
        };
        let make = || {
            let ctx = CheckContext::new(get("minkowski2").unwrap(), config.clone());
            let out = run_property(&ctx, "cs").unwrap();
            AnalysisReport::assemble("check", &ctx, out, true).to_json().unwrap()
        };
        let a = make();
        assert_eq!(a, make());
        assert!(a.contains("\"generated_unix\": null"));
    }

    #[test]
    fn failures_set_the_exit_code() {
        let ctx = CheckContext::new(get("randers4").unwrap(), CheckConfig { validity_samples: 200, ..CheckConfig::default() });
        let r = AnalysisReport::assemble("check", &ctx, run_property(&ctx, "validity").unwrap(), false);
        assert_eq!(r.exit_code(), 1);
        assert_eq!(r.summary.first_failure.as_deref(), Some("validity: DOMAIN_WITNESS"));
        assert!(r.run.generated_unix.is_some());
        assert_eq!(r.spec.kind, "lagrangian");
    }
}
