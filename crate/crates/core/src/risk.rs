//! Rule-tagged findings built from bundle scans, manifests, the spec index
//! and probe evidence.
//!
//! Rules fall into four attack classes plus pinning hygiene: dependency
//! confusion (`CONFUSION_*`), owner email domain takeover, source URL
//! takeover (domain or GitHub namespace), `PIN_MISSING`, and Go module
//! takeover (`GO_HIJACK`).

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::BundleScan;
use crate::manifest::{github_coordinates, go_host, LocationKind, Manifest, ManifestKind, VersionString};
use crate::probes::{
    github_repo_from_url, registrable_domain, url_host, valid_github_image, valid_github_namespace, Availability, GitHubState, PodOwner,
    ProbeRequest, ProbeResults,
};
use crate::resolution::{
    analyze_podfile, confusion_report_for_bundle, lockfile_private_unregistered, Classification,
    ResolutionError, ResolutionVerdict,
};
use crate::specindex::{PodRecord, PodVersionSpec, SpecIndex};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RiskError {
    #[error("no probe result for {0}")]
    MissingProbe(ProbeRequest),
    #[error(transparent)]
    Resolution(#[from] ResolutionError),
    #[error("unknown severity {0:?}")]
    UnknownSeverity(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RuleId {
    ConfusionPod,
    ConfusionPodManifest,
    ConfusionNpm,
    HijackOwnerDomain,
    HijackSourceDomain,
    HijackGithubNamespace,
    PinMissing,
    GoHijack,
}

impl RuleId {
    pub const ALL: [RuleId; 8] = [
        RuleId::ConfusionPod,
        RuleId::ConfusionPodManifest,
        RuleId::ConfusionNpm,
        RuleId::HijackOwnerDomain,
        RuleId::HijackSourceDomain,
        RuleId::HijackGithubNamespace,
        RuleId::PinMissing,
        RuleId::GoHijack,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::ConfusionPod => "CONFUSION_POD",
            RuleId::ConfusionPodManifest => "CONFUSION_POD_MANIFEST",
            RuleId::ConfusionNpm => "CONFUSION_NPM",
            RuleId::HijackOwnerDomain => "HIJACK_OWNER_DOMAIN",
            RuleId::HijackSourceDomain => "HIJACK_SOURCE_DOMAIN",
            RuleId::HijackGithubNamespace => "HIJACK_GITHUB_NAMESPACE",
            RuleId::PinMissing => "PIN_MISSING",
            RuleId::GoHijack => "GO_HIJACK",
        }
    }

    /// Anchor of the rule's entry in the README rule catalog.
    pub fn catalog_ref(self) -> &'static str {
        match self {
            RuleId::ConfusionPod => "confusion-pod",
            RuleId::ConfusionPodManifest => "confusion-pod-manifest",
            RuleId::ConfusionNpm => "confusion-npm",
            RuleId::HijackOwnerDomain => "hijack-owner-domain",
            RuleId::HijackSourceDomain => "hijack-source-domain",
            RuleId::HijackGithubNamespace => "hijack-github-namespace",
            RuleId::PinMissing => "pin-missing",
            RuleId::GoHijack => "go-hijack",
        }
    }

    pub fn is_confusion(self) -> bool {
        matches!(self, RuleId::ConfusionPod | RuleId::ConfusionPodManifest | RuleId::ConfusionNpm)
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordered so that `Critical` is the greatest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Low,
    Medium,
    High,
    Critical,
}

impl Severity {
    pub const ALL: [Severity; 5] = [
        Severity::Critical,
        Severity::High,
        Severity::Medium,
        Severity::Low,
        Severity::Info,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Info => "info",
            Severity::Low => "low",
            Severity::Medium => "medium",
            Severity::High => "high",
            Severity::Critical => "critical",
        }
    }

    /// One level down, bottoming out at `Info`.
    pub fn reduced(self) -> Self {
        match self {
            Severity::Critical => Severity::High,
            Severity::High => Severity::Medium,
            Severity::Medium => Severity::Low,
            Severity::Low | Severity::Info => Severity::Info,
        }
    }

    /// One level up, topping out at `Critical`.
    pub fn raised(self) -> Self {
        match self {
            Severity::Info => Severity::Low,
            Severity::Low => Severity::Medium,
            Severity::Medium => Severity::High,
            Severity::High | Severity::Critical => Severity::Critical,
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Severity {
    type Err = RiskError;

    fn from_str(s: &str) -> Result<Self, RiskError> {
        Severity::ALL
            .into_iter()
            .find(|sev| sev.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| RiskError::UnknownSeverity(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EvidenceRef {
    pub source: String,
    pub detail: String,
}

impl EvidenceRef {
    pub fn new(source: impl Into<String>, detail: impl Into<String>) -> Self {
        EvidenceRef {
            source: source.into(),
            detail: detail.into(),
        }
    }

    fn from_availability(a: &Availability) -> Vec<EvidenceRef> {
        a.evidence()
            .iter()
            .map(|e| EvidenceRef::new(e.probe.clone(), e.observation.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub rule_id: RuleId,
    pub severity: Severity,
    pub subject: String,
    /// Never empty.
    pub evidence: Vec<EvidenceRef>,
    pub mitigated_by: Option<String>,
    pub requires_manual_verification: bool,
    pub catalog_ref: String,
    pub rationale: String,
    pub attacker_version_needed: Option<VersionString>,
    pub has_prepare_command: bool,
}

impl Finding {
    pub fn new(
        rule_id: RuleId,
        severity: Severity,
        subject: impl Into<String>,
        first_evidence: EvidenceRef,
        rationale: impl Into<String>,
    ) -> Self {
        Finding {
            rule_id,
            severity,
            subject: subject.into(),
            evidence: vec![first_evidence],
            mitigated_by: None,
            requires_manual_verification: rule_id == RuleId::HijackGithubNamespace,
            catalog_ref: rule_id.catalog_ref().to_string(),
            rationale: rationale.into(),
            attacker_version_needed: None,
            has_prepare_command: false,
        }
    }

    fn with_evidence(mut self, more: impl IntoIterator<Item = EvidenceRef>) -> Self {
        self.evidence.extend(more);
        self
    }

    pub fn key(&self) -> (RuleId, &str) {
        (self.rule_id, &self.subject)
    }
}

/// Sort key: critical first, then subject, then rule.
pub fn severity_order(f: &Finding) -> (Reverse<Severity>, &str, RuleId) {
    (Reverse(f.severity), f.subject.as_str(), f.rule_id)
}

/// Merges findings sharing `(rule_id, subject)` and sorts the result.
/// Merged findings keep the highest severity, the union of evidence, and a
/// mitigation only when every merged finding had one.
pub fn dedupe(findings: Vec<Finding>) -> Vec<Finding> {
    let mut merged: BTreeMap<(RuleId, String), Finding> = BTreeMap::new();
    for f in findings {
        match merged.get_mut(&(f.rule_id, f.subject.clone())) {
            None => {
                merged.insert((f.rule_id, f.subject.clone()), f);
            }
            Some(existing) => {
                if f.severity > existing.severity {
                    existing.severity = f.severity;
                    existing.rationale = f.rationale.clone();
                }
                for e in f.evidence {
                    if !existing.evidence.contains(&e) {
                        existing.evidence.push(e);
                    }
                }
                if f.mitigated_by.is_none() {
                    existing.mitigated_by = None;
                }
                existing.requires_manual_verification |= f.requires_manual_verification;
                existing.has_prepare_command |= f.has_prepare_command;
                if existing.attacker_version_needed.is_none() {
                    existing.attacker_version_needed = f.attacker_version_needed;
                }
            }
        }
    }
    let mut out: Vec<Finding> = merged.into_values().collect();
    out.sort_by(|a, b| severity_order(a).cmp(&severity_order(b)));
    out
}

/// Base severity per rule. Escalations and mitigations move one level from
/// the base.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeverityPolicy {
    base: BTreeMap<RuleId, Severity>,
}

impl Default for SeverityPolicy {
    fn default() -> Self {
        let base = RuleId::ALL
            .into_iter()
            .map(|rule| {
                let sev = match rule {
                    RuleId::HijackOwnerDomain => Severity::Critical,
                    RuleId::PinMissing => Severity::Low,
                    _ => Severity::High,
                };
                (rule, sev)
            })
            .collect();
        SeverityPolicy { base }
    }
}

impl SeverityPolicy {
    pub fn with(mut self, rule: RuleId, severity: Severity) -> Self {
        self.base.insert(rule, severity);
        self
    }

    pub fn base(&self, rule: RuleId) -> Severity {
        self.base[&rule]
    }
}

const PIN_MITIGATION: &str = "commit/archive hash on all versions";

const PREPARE_COMMAND_NOTE: &str = "trunk has rejected new pods containing a prepare_command since \
     May 2025, so a newly published pod cannot run install-time shell code that way";

/// Evaluators sharing a severity policy and an allowlist of known internal
/// names that suppresses `CONFUSION_*` findings.
#[derive(Debug, Clone, Default)]
pub struct RiskEngine {
    pub policy: SeverityPolicy,
    pub private_names: BTreeSet<String>,
}

fn root_name(name: &str) -> &str {
    name.split('/').next().unwrap_or(name)
}

impl RiskEngine {
    pub fn new(policy: SeverityPolicy) -> Self {
        RiskEngine {
            policy,
            private_names: BTreeSet::new(),
        }
    }

    /// Reads a newline-delimited allowlist; blank lines and `#` comments
    /// are ignored.
    pub fn with_private_names_text(mut self, text: &str) -> Self {
        self.private_names.extend(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_string),
        );
        self
    }

    pub fn is_private(&self, name: &str) -> bool {
        self.private_names.contains(name) || self.private_names.contains(root_name(name))
    }

    /// Escalates a confusion finding when trunk confirms the name is free.
    fn trunk_escalation(&self, f: &mut Finding, pod: &str, probes: Option<&ProbeResults>) {
        let Some(a) = probes.and_then(|p| p.pod_name(pod)) else { return };
        f.evidence.extend(EvidenceRef::from_availability(a));
        if a.is_available() {
            f.severity = f.severity.raised();
            f.rationale.push_str("; trunk confirms the name is unclaimed");
        }
    }

    /// `CONFUSION_POD` for CocoaPods frameworks no public pod provides and
    /// `CONFUSION_NPM` for embedded npm names the registry reports free.
    /// Without probes only index-based findings are produced.
    pub fn evaluate_bundle(
        &self,
        scan: &BundleScan,
        index: &SpecIndex,
        probes: Option<&ProbeResults>,
    ) -> Vec<Finding> {
        let mut out = Vec::new();
        for v in confusion_report_for_bundle(scan, index) {
            if v.classification != Classification::UnregisteredConfusable || self.is_private(&v.dependency) {
                continue;
            }
            let framework = scan.framework(&v.dependency);
            let location = framework.map_or(String::new(), |f| f.plist_path.clone());
            let identifier = framework
                .and_then(|f| f.bundle_identifier.clone())
                .unwrap_or_default();
            let mut f = Finding::new(
                RuleId::ConfusionPod,
                self.policy.base(RuleId::ConfusionPod),
                &v.dependency,
                EvidenceRef::new("bundle", format!("{location}: CFBundleIdentifier {identifier}")),
                format!("{}; {PREPARE_COMMAND_NOTE}", v.rationale),
            )
            .with_evidence([EvidenceRef::new(
                "spec-index",
                format!("no public pod provides framework {}", v.dependency),
            )]);
            f.attacker_version_needed = v.attacker_version_needed;
            self.trunk_escalation(&mut f, &v.dependency, probes);
            out.push(f);
        }

        if let Some(probes) = probes {
            for npm in &scan.npm_names {
                if self.is_private(&npm.package_name) {
                    continue;
                }
                let Some(a) = probes.npm(&npm.package_name) else { continue };
                if !a.is_available() {
                    continue;
                }
                out.push(
                    Finding::new(
                        RuleId::ConfusionNpm,
                        self.policy.base(RuleId::ConfusionNpm),
                        &npm.package_name,
                        EvidenceRef::new("bundle", npm.source_path.clone()),
                        format!(
                            "npm package {} ships in the bundle but the name is unregistered on npm",
                            npm.package_name
                        ),
                    )
                    .with_evidence(EvidenceRef::from_availability(a)),
                );
            }
        }
        dedupe(out)
    }

    fn manifest_confusion(
        &self,
        verdicts: Vec<ResolutionVerdict>,
        severity_for: impl Fn(Classification) -> Option<Severity>,
        source: &str,
        probes: Option<&ProbeResults>,
    ) -> Vec<Finding> {
        let mut out = Vec::new();
        for v in verdicts {
            let Some(severity) = severity_for(v.classification) else { continue };
            if self.is_private(&v.dependency) {
                continue;
            }
            let mut f = Finding::new(
                RuleId::ConfusionPodManifest,
                severity,
                &v.dependency,
                EvidenceRef::new(source, format!("{}: {}", v.dependency, v.classification.as_str())),
                v.rationale,
            );
            f.attacker_version_needed = v.attacker_version_needed;
            if v.classification == Classification::UnregisteredConfusable {
                self.trunk_escalation(&mut f, root_name(&v.dependency), probes);
            }
            out.push(f);
        }
        out
    }

    /// Index-based findings for any manifest kind, plus `GO_HIJACK` for
    /// go.mod when probes are supplied.
    pub fn evaluate_manifest(
        &self,
        manifest: &Manifest,
        index: &SpecIndex,
        probes: Option<&ProbeResults>,
    ) -> Result<Vec<Finding>, RiskError> {
        let base = self.policy.base(RuleId::ConfusionPodManifest);
        let findings = match manifest.kind {
            ManifestKind::Podfile => self.manifest_confusion(
                analyze_podfile(manifest, index)?,
                |c| match c {
                    Classification::UnregisteredConfusable => Some(base),
                    Classification::ShadowableMultisource => Some(Severity::Info),
                    _ => None,
                },
                "Podfile",
                probes,
            ),
            ManifestKind::PodfileLock => self.manifest_confusion(
                lockfile_private_unregistered(manifest, index)?,
                |c| (c == Classification::UnregisteredConfusable).then(|| base.reduced()),
                "Podfile.lock",
                probes,
            ),
            ManifestKind::GoMod => match probes {
                Some(p) => self.evaluate_go_manifest(manifest, p)?,
                None => Vec::new(),
            },
            ManifestKind::CartfileResolved | ManifestKind::PackageResolved => Vec::new(),
        };
        Ok(dedupe(findings))
    }

    /// Owner email domain, source domain and GitHub namespace takeover for
    /// one pod, plus `PIN_MISSING` for unpinned versions behind a takeover.
    pub fn evaluate_pod_hijack(
        &self,
        record: &PodRecord,
        owners: &[PodOwner],
        probes: &ProbeResults,
    ) -> Result<Vec<Finding>, RiskError> {
        let mut out = Vec::new();

        for owner in owners {
            let a = probes
                .domain(&owner.email_domain)
                .ok_or_else(|| RiskError::MissingProbe(ProbeRequest::Domain(owner.email_domain.clone())))?;
            if !a.is_available() {
                continue;
            }
            out.push(
                Finding::new(
                    RuleId::HijackOwnerDomain,
                    self.policy.base(RuleId::HijackOwnerDomain),
                    &record.name,
                    EvidenceRef::new("trunk", format!("owner {} <{}>", owner.owner_name, owner.email)),
                    format!(
                        "owner email domain {} is registrable; trunk sessions are confirmed by an \
                         email link alone, so its registrant can take over the pod",
                        owner.email_domain
                    ),
                )
                .with_evidence(EvidenceRef::from_availability(a)),
            );
        }

        for (location, versions) in source_locations(record) {
            let (rule, subject, evidence, what) = match &location {
                SourceLocation::GitHub { namespace, image } => {
                    let status = probes.github(namespace, image).ok_or_else(|| {
                        RiskError::MissingProbe(ProbeRequest::GitHubRepo {
                            namespace: namespace.clone(),
                            image: image.clone(),
                        })
                    })?;
                    if !status.is_hijack_candidate() {
                        continue;
                    }
                    let detail = match (&status.state, &status.redirect_target) {
                        (GitHubState::Redirected, Some(t)) => format!(
                            "{namespace}/{image} redirects to {t} ({} stars)",
                            status.stars.unwrap_or_default()
                        ),
                        _ => format!("github user or organization {namespace} does not exist"),
                    };
                    (
                        RuleId::HijackGithubNamespace,
                        format!("{}:github.com/{namespace}/{image}", record.name),
                        vec![EvidenceRef::new("github", detail)],
                        format!(
                            "namespace {namespace} can possibly be registered again; whether GitHub \
                             retired {namespace}/{image} needs a manual registration attempt"
                        ),
                    )
                }
                SourceLocation::Domain(domain) => {
                    let a = probes
                        .domain(domain)
                        .ok_or_else(|| RiskError::MissingProbe(ProbeRequest::Domain(domain.clone())))?;
                    if !a.is_available() {
                        continue;
                    }
                    (
                        RuleId::HijackSourceDomain,
                        format!("{}:{domain}", record.name),
                        EvidenceRef::from_availability(a),
                        format!("source domain {domain} is registrable; its registrant can serve the sources"),
                    )
                }
            };

            let list = |vs: &[&PodVersionSpec]| vs.iter().map(|v| v.version.as_str()).collect::<Vec<_>>().join(", ");
            let unpinned: Vec<&PodVersionSpec> = versions.iter().copied().filter(|v| !v.is_pinned()).collect();
            let prepare = versions.iter().any(|v| v.has_prepare_command);
            let mut rationale = format!("{what}; affects versions {}", list(&versions));
            if prepare {
                rationale.push_str("; a prepare_command runs the fetched code's shell at install time");
            }

            let mut f = Finding::new(rule, self.policy.base(rule), subject, EvidenceRef::new(
                "spec-index",
                format!("{} {} source {}", record.name, list(&versions), versions[0].source_url),
            ), rationale)
            .with_evidence(evidence);
            f.has_prepare_command = prepare;
            if unpinned.is_empty() {
                f.severity = f.severity.reduced();
                f.mitigated_by = Some(PIN_MITIGATION.to_string());
            }
            out.push(f);

            if !unpinned.is_empty() {
                let mut pin = Finding::new(
                    RuleId::PinMissing,
                    self.policy.base(RuleId::PinMissing),
                    &record.name,
                    EvidenceRef::new("spec-index", format!("{} {} has no commit or archive hash", record.name, unpinned[0].version)),
                    format!(
                        "versions {} fetch from a takeover-prone location without a commit or archive hash",
                        list(&unpinned)
                    ),
                )
                .with_evidence(unpinned[1..].iter().map(|v| {
                    EvidenceRef::new("spec-index", format!("{} {} has no commit or archive hash", record.name, v.version))
                }));
                pin.has_prepare_command = unpinned.iter().any(|v| v.has_prepare_command);
                out.push(pin);
            }
        }
        Ok(dedupe(out))
    }

    /// `GO_HIJACK` for required modules whose host domain is registrable or
    /// whose GitHub owner is gone. Replaced modules are judged by their
    /// replacement; local replacements are skipped.
    pub fn evaluate_go_manifest(&self, manifest: &Manifest, probes: &ProbeResults) -> Result<Vec<Finding>, RiskError> {
        if manifest.kind != ManifestKind::GoMod {
            return Err(ResolutionError::WrongManifestKind {
                expected: ManifestKind::GoMod.as_str(),
                found: manifest.kind.as_str(),
            }
            .into());
        }
        let mut out = Vec::new();
        for entry in &manifest.entries {
            let Some(target) = go_target(entry) else { continue };
            let origin = EvidenceRef::new(
                "go.mod",
                match &entry.pinned_revision {
                    Some(v) if target == entry.name => format!("require {} {v}", entry.name),
                    _ => format!("require {} (replaced by {target})", entry.name),
                },
            );
            let severity = self.policy.base(RuleId::GoHijack);
            let Some(location) = go_location(&target) else { continue };
            match location {
                SourceLocation::GitHub { namespace: ns, image } => {
                    let status = probes.github(&ns, &image).ok_or_else(|| {
                        RiskError::MissingProbe(ProbeRequest::GitHubRepo {
                            namespace: ns.clone(),
                            image: image.clone(),
                        })
                    })?;
                    if status.state == GitHubState::UserMissing {
                        let mut f = Finding::new(
                            RuleId::GoHijack,
                            severity,
                            &target,
                            origin,
                            format!(
                                "github user or organization {ns} does not exist; if GitHub has not \
                                 retired {ns}/{image}, registering it serves this module"
                            ),
                        )
                        .with_evidence([EvidenceRef::new("github", format!("{ns}: user_missing"))]);
                        f.requires_manual_verification = true;
                        out.push(f);
                    }
                }
                SourceLocation::Domain(domain) => {
                    let a = probes
                        .domain(&domain)
                        .ok_or_else(|| RiskError::MissingProbe(ProbeRequest::Domain(domain.clone())))?;
                    if a.is_available() {
                        out.push(
                            Finding::new(
                                RuleId::GoHijack,
                                severity,
                                &target,
                                origin,
                                format!(
                                    "module host domain {domain} is registrable; its registrant can serve the module"
                                ),
                            )
                            .with_evidence(EvidenceRef::from_availability(a)),
                        );
                    }
                }
            }
        }
        Ok(dedupe(out))
    }
}

/// Module path a go.mod entry is actually fetched from, `None` for local
/// replacements.
fn go_target(entry: &crate::manifest::DependencyEntry) -> Option<String> {
    match &entry.explicit_location {
        Some(loc) if loc.kind == LocationKind::LocalPath => None,
        Some(loc) => Some(loc.value.split('@').next().unwrap_or(&loc.value).to_string()),
        None => Some(entry.name.clone()),
    }
}

/// Takeover-relevant location of a module path. Paths under github.com
/// with an impossible owner name, and hosts that are not registrable
/// domains, have none.
fn go_location(target: &str) -> Option<SourceLocation> {
    let host = go_host(target);
    if host.eq_ignore_ascii_case("github.com") {
        let (namespace, image) = github_coordinates(target)?;
        return (valid_github_namespace(&namespace) && valid_github_image(&image))
            .then_some(SourceLocation::GitHub { namespace, image });
    }
    registrable_domain(host).ok().map(SourceLocation::Domain)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum SourceLocation {
    GitHub { namespace: String, image: String },
    Domain(String),
}

impl SourceLocation {
    fn request(&self) -> ProbeRequest {
        match self {
            SourceLocation::GitHub { namespace, image } => ProbeRequest::GitHubRepo {
                namespace: namespace.clone(),
                image: image.clone(),
            },
            SourceLocation::Domain(d) => ProbeRequest::Domain(d.clone()),
        }
    }
}

fn source_location(url: &str) -> Option<SourceLocation> {
    if let Some((namespace, image)) = github_repo_from_url(url) {
        return Some(SourceLocation::GitHub { namespace, image });
    }
    let host = url_host(url)?;
    if host == "github.com" || host.ends_with(".github.com") {
        return None;
    }
    registrable_domain(&host).ok().map(SourceLocation::Domain)
}

/// Versions grouped by the takeover-relevant part of their source URL.
fn source_locations(record: &PodRecord) -> BTreeMap<SourceLocation, Vec<&PodVersionSpec>> {
    let mut groups: BTreeMap<SourceLocation, Vec<&PodVersionSpec>> = BTreeMap::new();
    for v in &record.versions {
        if let Some(loc) = source_location(&v.source_url) {
            groups.entry(loc).or_default().push(v);
        }
    }
    groups
}

/// Probes [`RiskEngine::evaluate_pod_hijack`] needs for `record` once its
/// owners are known.
pub fn probes_for_pod(record: &PodRecord, owners: &[PodOwner]) -> Vec<ProbeRequest> {
    let mut reqs: BTreeSet<ProbeRequest> = owners
        .iter()
        .map(|o| ProbeRequest::Domain(o.email_domain.clone()))
        .collect();
    reqs.extend(source_locations(record).keys().map(SourceLocation::request));
    reqs.into_iter().collect()
}

/// Probes that can add evidence to [`RiskEngine::evaluate_bundle`].
pub fn probes_for_bundle(scan: &BundleScan, index: &SpecIndex) -> Vec<ProbeRequest> {
    let mut reqs: BTreeSet<ProbeRequest> = confusion_report_for_bundle(scan, index)
        .into_iter()
        .filter(|v| v.classification == Classification::UnregisteredConfusable)
        .map(|v| ProbeRequest::PodName(v.dependency))
        .collect();
    reqs.extend(scan.npm_names.iter().map(|n| ProbeRequest::Npm(n.package_name.clone())));
    reqs.into_iter().collect()
}

/// Probes that can add evidence to [`RiskEngine::evaluate_manifest`].
pub fn probes_for_manifest(manifest: &Manifest, index: &SpecIndex) -> Result<Vec<ProbeRequest>, RiskError> {
    let mut reqs = BTreeSet::new();
    match manifest.kind {
        ManifestKind::Podfile | ManifestKind::PodfileLock => {
            let verdicts = if manifest.kind == ManifestKind::Podfile {
                analyze_podfile(manifest, index)?
            } else {
                lockfile_private_unregistered(manifest, index)?
            };
            reqs.extend(
                verdicts
                    .into_iter()
                    .filter(|v| v.classification == Classification::UnregisteredConfusable)
                    .map(|v| ProbeRequest::PodName(root_name(&v.dependency).to_string())),
            );
        }
        ManifestKind::GoMod => {
            let locations = manifest.entries.iter().filter_map(go_target).filter_map(|t| go_location(&t));
            reqs.extend(locations.map(|l| l.request()));
        }
        ManifestKind::CartfileResolved | ManifestKind::PackageResolved => {}
    }
    Ok(reqs.into_iter().collect())
}

pub fn evaluate_bundle(scan: &BundleScan, index: &SpecIndex, probes: Option<&ProbeResults>) -> Vec<Finding> {
    RiskEngine::default().evaluate_bundle(scan, index, probes)
}

pub fn evaluate_manifest(
    manifest: &Manifest,
    index: &SpecIndex,
    probes: Option<&ProbeResults>,
) -> Result<Vec<Finding>, RiskError> {
    RiskEngine::default().evaluate_manifest(manifest, index, probes)
}

pub fn evaluate_pod_hijack(
    record: &PodRecord,
    owners: &[PodOwner],
    probes: &ProbeResults,
) -> Result<Vec<Finding>, RiskError> {
    RiskEngine::default().evaluate_pod_hijack(record, owners, probes)
}

pub fn evaluate_go_manifest(manifest: &Manifest, probes: &ProbeResults) -> Result<Vec<Finding>, RiskError> {
    RiskEngine::default().evaluate_go_manifest(manifest, probes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn finding(rule: RuleId, sev: Severity, subject: &str, detail: &str) -> Finding {
        Finding::new(rule, sev, subject, EvidenceRef::new("t", detail), "r")
    }

    #[test]
    fn severity_ladder() {
        assert!(Severity::Critical > Severity::High && Severity::Low > Severity::Info);
        assert_eq!(Severity::Info.reduced(), Severity::Info);
        assert_eq!(Severity::Critical.raised(), Severity::Critical);
        assert_eq!("HIGH".parse::<Severity>().unwrap(), Severity::High);
        assert!("severe".parse::<Severity>().is_err());
    }

    #[test]
    fn dedupe_empty() {
        assert!(dedupe(Vec::new()).is_empty());
    }

    #[test]
    fn dedupe_merges_pair() {
        let a = finding(RuleId::ConfusionPod, Severity::High, "X", "a");
        let b = finding(RuleId::ConfusionPod, Severity::Critical, "X", "b");
        let out = dedupe(vec![a, b]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].severity, Severity::Critical);
        assert_eq!(out[0].evidence.len(), 2);
    }

    #[test]
    fn ordering_puts_critical_first() {
        let out = dedupe(vec![
            finding(RuleId::PinMissing, Severity::Low, "A", "x"),
            finding(RuleId::HijackOwnerDomain, Severity::Critical, "Z", "x"),
            finding(RuleId::ConfusionPod, Severity::High, "B", "x"),
        ]);
        let sevs: Vec<Severity> = out.iter().map(|f| f.severity).collect();
        assert_eq!(sevs, [Severity::Critical, Severity::High, Severity::Low]);
    }

    #[test]
    fn github_namespace_findings_need_manual_verification() {
        let f = finding(RuleId::HijackGithubNamespace, Severity::High, "x", "y");
        assert!(f.requires_manual_verification);
        assert_eq!(f.catalog_ref, "hijack-github-namespace");
    }

    #[test]
    fn source_locations_skip_github_host() {
        assert_eq!(
            source_location("https://github.com/a/b.git"),
            Some(SourceLocation::GitHub { namespace: "a".into(), image: "b".into() })
        );
        assert_eq!(source_location("https://gist.github.com/x"), None);
        assert_eq!(
            source_location("https://git.abandoned-example.test/x.git"),
            Some(SourceLocation::Domain("abandoned-example.test".into()))
        );
    }

    #[test]
    fn allowlist_parsing() {
        let e = RiskEngine::default().with_private_names_text("# internal\nCorpAuth\n\n corp-bridge \n");
        assert!(e.is_private("CorpAuth/Core"));
        assert!(e.is_private("corp-bridge"));
        assert!(!e.is_private("Alamofire"));
    }
}
