//! Scan reports and their JSON and text renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::{DateTime, SecondsFormat, SubsecRound, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::risk::{dedupe, Finding, RuleId, Severity};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported report schema {0}")]
    Schema(u32),
    #[error("stats disagree with findings for {0}")]
    Stats(RuleId),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ReportInput {
    pub kind: String,
    /// A file path, or a probe subject for `check` runs.
    pub path: String,
}

impl ReportInput {
    pub fn new(kind: impl Into<String>, path: impl Into<String>) -> Self {
        ReportInput {
            kind: kind.into(),
            path: path.into(),
        }
    }
}

/// Findings are deduplicated and sorted on construction and `stats` always
/// lists every rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub tool_version: String,
    pub inputs: Vec<ReportInput>,
    pub findings: Vec<Finding>,
    pub stats: BTreeMap<RuleId, usize>,
    /// Differs between runs unless injected.
    #[serde(with = "rfc3339_seconds")]
    pub generated_at: DateTime<Utc>,
}

mod rfc3339_seconds {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::Secs, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&s)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

fn count_by_rule(findings: &[Finding]) -> BTreeMap<RuleId, usize> {
    let mut stats: BTreeMap<RuleId, usize> = RuleId::ALL.into_iter().map(|r| (r, 0)).collect();
    for f in findings {
        *stats.entry(f.rule_id).or_default() += 1;
    }
    stats
}

impl Report {
    pub fn new(inputs: Vec<ReportInput>, findings: Vec<Finding>, generated_at: DateTime<Utc>) -> Self {
        let findings = dedupe(findings);
        Report {
            schema: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            inputs,
            stats: count_by_rule(&findings),
            findings,
            generated_at: generated_at.trunc_subsecs(0),
        }
    }

    pub fn max_severity(&self) -> Option<Severity> {
        self.findings.iter().map(|f| f.severity).max()
    }

    /// Parses `render_json` output, checking the schema and stats.
    pub fn from_json(bytes: &[u8]) -> Result<Self, ReportError> {
        let report: Report = serde_json::from_slice(bytes)?;
        if report.schema != SCHEMA_VERSION {
            return Err(ReportError::Schema(report.schema));
        }
        let expected = count_by_rule(&report.findings);
        for rule in RuleId::ALL {
            if report.stats.get(&rule) != expected.get(&rule) {
                return Err(ReportError::Stats(rule));
            }
        }
        Ok(report)
    }
}

/// Pretty-printed JSON with keys sorted at every level, newline terminated.
pub fn render_json(report: &Report) -> Vec<u8> {
    let value = serde_json::to_value(report).expect("report serializes");
    let mut out = serde_json::to_vec_pretty(&value).expect("value serializes");
    out.push(b'\n');
    out
}

/// One line per finding followed by a stats footer.
pub fn render_text(report: &Report) -> String {
    let mut out = String::new();
    for f in &report.findings {
        let _ = writeln!(
            out,
            "{} {} {} — {} (ref: {})",
            f.severity.as_str().to_ascii_uppercase(),
            f.rule_id,
            f.subject,
            f.rationale,
            f.catalog_ref
        );
    }
    if !report.findings.is_empty() {
        out.push('\n');
    }
    let by_severity: Vec<String> = Severity::ALL
        .into_iter()
        .map(|s| format!("{s} {}", report.findings.iter().filter(|f| f.severity == s).count()))
        .collect();
    let _ = writeln!(
        out,
        "{} findings ({}) at {}",
        report.findings.len(),
        by_severity.join(", "),
        report.generated_at.to_rfc3339_opts(SecondsFormat::Secs, true)
    );
    for (rule, n) in &report.stats {
        let _ = writeln!(out, "  {rule}: {n}");
    }
    out
}

/// 1 when any finding is at or above `fail_on`, else 0.
pub fn exit_code(findings: &[Finding], fail_on: Severity) -> i32 {
    i32::from(findings.iter().any(|f| f.severity >= fail_on))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::EvidenceRef;
    use chrono::TimeZone;

    fn at() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2025, 6, 1, 12, 0, 0).unwrap()
    }

    fn finding(rule: RuleId, sev: Severity, subject: &str) -> Finding {
        Finding::new(rule, sev, subject, EvidenceRef::new("t", "e"), "because")
    }

    #[test]
    fn empty_report() {
        let r = Report::new(vec![], vec![], at());
        let v: serde_json::Value = serde_json::from_slice(&render_json(&r)).unwrap();
        assert_eq!(v["findings"], serde_json::json!([]));
        assert_eq!(v["schema"], 1);
        let stats = v["stats"].as_object().unwrap();
        assert_eq!(stats.len(), RuleId::ALL.len());
        assert!(stats.values().all(|n| n == 0));
    }

    #[test]
    fn identical_renders() {
        let r = Report::new(
            vec![ReportInput::new("podfile", "Podfile")],
            vec![finding(RuleId::ConfusionPod, Severity::High, "X")],
            at(),
        );
        assert_eq!(render_json(&r), render_json(&r.clone()));
        assert_eq!(render_text(&r), render_text(&r));
    }

    #[test]
    fn text_lists_critical_first() {
        let r = Report::new(
            vec![],
            vec![
                finding(RuleId::PinMissing, Severity::Low, "A"),
                finding(RuleId::HijackOwnerDomain, Severity::Critical, "B"),
            ],
            at(),
        );
        let text = render_text(&r);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "CRITICAL HIJACK_OWNER_DOMAIN B — because (ref: hijack-owner-domain)");
        assert!(lines[1].starts_with("LOW PIN_MISSING A"));
        assert!(text.contains("2 findings (critical 1, high 0, medium 0, low 1, info 0)"));
    }

    #[test]
    fn round_trip_and_stats_check() {
        let r = Report::new(vec![], vec![finding(RuleId::GoHijack, Severity::High, "m")], at());
        let json = render_json(&r);
        assert_eq!(Report::from_json(&json).unwrap(), r);

        let mut v: serde_json::Value = serde_json::from_slice(&json).unwrap();
        v["stats"]["GO_HIJACK"] = 0.into();
        assert!(matches!(
            Report::from_json(&serde_json::to_vec(&v).unwrap()),
            Err(ReportError::Stats(RuleId::GoHijack))
        ));
    }

    #[test]
    fn exit_codes() {
        let fs = [finding(RuleId::PinMissing, Severity::Low, "A")];
        assert_eq!(exit_code(&fs, Severity::High), 0);
        assert_eq!(exit_code(&fs, Severity::Low), 1);
        assert_eq!(exit_code(&[], Severity::Info), 0);
    }
}
