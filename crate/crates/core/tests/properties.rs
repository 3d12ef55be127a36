//! Property tests for invariants that hold across all inputs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use chrono::{TimeZone, Utc};
use proptest::prelude::*;

use depsentry::bundle::scan_bundle;
use depsentry::manifest::{parse_podfile, satisfies_all, Operator, Requirement, VersionString};
use depsentry::probes::{Availability, AvailabilityState, Evidence, ProbeOutcome, ProbeRequest, ProbeResults};
use depsentry::report::{render_json, Report};
use depsentry::resolution::{analyze_podfile, attacker_target_version, Classification};
use depsentry::risk::{dedupe, evaluate_bundle, probes_for_bundle, EvidenceRef, Finding, RuleId, Severity};
use depsentry::specindex::{build_index, load_index, save_index, PodRecord, PodVersionSpec, SpecIndex};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn at() -> chrono::DateTime<Utc> {
    Utc.with_ymd_and_hms(2025, 6, 1, 0, 0, 0).unwrap()
}

fn version() -> impl Strategy<Value = VersionString> {
    (prop::collection::vec(0u64..5, 1..=4), prop::option::weighted(0.15, "(-beta|-rc1|a)"))
        .prop_map(|(core, suffix)| {
            let text: Vec<String> = core.iter().map(u64::to_string).collect();
            VersionString::parse(&format!("{}{}", text.join("."), suffix.unwrap_or_default())).unwrap()
        })
}

fn requirement() -> impl Strategy<Value = Requirement> {
    let op = prop_oneof![
        Just(Operator::Exact),
        Just(Operator::Gt),
        Just(Operator::Gte),
        Just(Operator::Lt),
        Just(Operator::Lte),
        Just(Operator::Pessimistic),
        Just(Operator::Any),
    ];
    (op, prop::collection::vec(0u64..5, 2..=4)).prop_map(|(op, core)| match op {
        Operator::Any => Requirement::any(),
        op => Requirement::new(op, Some(VersionString::from_components(&core))).unwrap(),
    })
}

fn severity() -> impl Strategy<Value = Severity> {
    prop::sample::select(Severity::ALL.to_vec())
}

fn finding() -> impl Strategy<Value = Finding> {
    (prop::sample::select(RuleId::ALL.to_vec()), severity(), "[A-C]", "[a-c]{1,3}")
        .prop_map(|(rule, sev, subject, detail)| {
            Finding::new(rule, sev, subject, EvidenceRef::new("prop", detail), "generated")
        })
}

const NAMES: [&str; 6] = ["Alpha", "Beta", "Gamma", "Delta", "Epsilon", "Zeta"];

fn podfile_text(order: u8, pods: &[(usize, Option<&str>)]) -> String {
    let mut text = String::new();
    match order {
        0 => text.push_str("source 'https://cdn.cocoapods.org/'\nsource 'https://git.corp.test/specs.git'\n"),
        1 => text.push_str("source 'https://git.corp.test/specs.git'\nsource 'https://cdn.cocoapods.org/'\n"),
        _ => {}
    }
    text.push_str("target 'App' do\n");
    for (i, req) in pods {
        match req {
            Some(r) => text.push_str(&format!("  pod '{}', '{r}'\n", NAMES[*i])),
            None => text.push_str(&format!("  pod '{}'\n", NAMES[*i])),
        }
    }
    text.push_str("end\n");
    text
}

fn index_with(names: &BTreeSet<usize>) -> SpecIndex {
    let records = names
        .iter()
        .map(|&i| PodRecord::new(NAMES[i], vec![PodVersionSpec::git("1.0.0", "https://github.com/o/r.git")]));
    SpecIndex::from_records(records, at(), "digest")
}

fn pod_record() -> impl Strategy<Value = PodRecord> {
    let spec = (version(), any::<bool>(), any::<bool>(), prop::option::of("[A-Z][a-z]{2,6}"), any::<bool>())
        .prop_map(|(v, git, pinned, module, prepare)| {
            let mut spec = if git {
                let mut s = PodVersionSpec::git(v.as_str(), "https://github.com/acme/lib.git");
                if pinned {
                    s.git_commit = Some("a".repeat(40));
                }
                s
            } else {
                let mut s = PodVersionSpec::http(v.as_str(), "https://dl.acme.test/lib.zip");
                if pinned {
                    s.archive_sha = Some("b".repeat(64));
                }
                s
            };
            spec.module_name = module;
            spec.has_prepare_command = prepare;
            spec
        });
    ("[A-Z][A-Za-z0-9]{1,10}", prop::collection::vec(spec, 1..5)).prop_map(|(name, specs)| PodRecord::new(name, specs))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn version_order_is_total(a in version(), b in version(), c in version()) {
        use std::cmp::Ordering;
        prop_assert_eq!(a.cmp(&b), b.cmp(&a).reverse());
        prop_assert_eq!(a.cmp(&a), Ordering::Equal);
        if a <= b && b <= c {
            prop_assert!(a <= c);
        }
    }

    #[test]
    fn attacker_version_satisfies_requirements(reqs in prop::collection::vec(requirement(), 0..4)) {
        if let Ok(v) = attacker_target_version(&reqs) {
            prop_assert!(satisfies_all(&v, &reqs), "{} fails {:?}", v, reqs);
        }
    }

    #[test]
    fn attacker_version_exists_for_single_lower_bounds(req in requirement()) {
        // A lone requirement that does not cap the version is always satisfiable.
        if matches!(req.op, Operator::Any | Operator::Gt | Operator::Gte | Operator::Pessimistic | Operator::Exact) {
            let v = attacker_target_version(std::slice::from_ref(&req));
            prop_assert!(v.is_ok(), "{:?}", req);
        }
    }

    #[test]
    fn registering_pods_never_adds_confusion(
        order in 0u8..3,
        pods in prop::collection::vec((0usize..NAMES.len(), prop::option::of(prop::sample::select(vec!["~> 1.2", ">= 2.0", "1.4.2", "< 3"]))), 1..6),
        small in prop::collection::btree_set(0usize..NAMES.len(), 0..NAMES.len()),
        extra in prop::collection::btree_set(0usize..NAMES.len(), 0..NAMES.len()),
    ) {
        let manifest = parse_podfile(&podfile_text(order, &pods));
        let large: BTreeSet<usize> = small.union(&extra).copied().collect();
        let confusable = |index: &SpecIndex| -> BTreeSet<String> {
            analyze_podfile(&manifest, index)
                .unwrap()
                .into_iter()
                .filter(|v| v.classification == Classification::UnregisteredConfusable)
                .map(|v| v.dependency)
                .collect()
        };
        let before = confusable(&index_with(&small));
        let after = confusable(&index_with(&large));
        prop_assert!(after.is_subset(&before), "{:?} not within {:?}", after, before);
    }

    #[test]
    fn available_requires_not_found_evidence(
        claimed in prop::sample::select(vec![AvailabilityState::Available, AvailabilityState::Registered, AvailabilityState::Indeterminate]),
        flags in prop::collection::vec(any::<bool>(), 0..4),
    ) {
        let evidence: Vec<Evidence> = flags
            .iter()
            .map(|&nf| if nf { Evidence::not_found("p", "404", at()) } else { Evidence::observed("p", "timeout", at()) })
            .collect();
        let a = Availability::conclude("x.test", claimed, evidence, at());
        if a.is_available() {
            prop_assert!(a.evidence().iter().any(|e| e.authoritative_not_found));
        }
        if claimed != AvailabilityState::Available {
            prop_assert_eq!(a.state(), claimed);
        }
    }

    #[test]
    fn dedupe_is_idempotent_and_sorted(findings in prop::collection::vec(finding(), 0..20)) {
        let once = dedupe(findings.clone());
        prop_assert_eq!(dedupe(once.clone()), once.clone());
        let keys: BTreeSet<_> = once.iter().map(|f| (f.rule_id, f.subject.clone())).collect();
        prop_assert_eq!(keys.len(), once.len());
        for pair in once.windows(2) {
            prop_assert!(pair[0].severity >= pair[1].severity);
        }
        for f in &once {
            let max = findings.iter().filter(|g| g.key() == f.key()).map(|g| g.severity).max();
            prop_assert_eq!(Some(f.severity), max);
        }
    }

    #[test]
    fn report_stats_match_and_json_round_trips(findings in prop::collection::vec(finding(), 0..20)) {
        let report = Report::new(vec![], findings, at());
        let mut counts: BTreeMap<RuleId, usize> = BTreeMap::new();
        for f in &report.findings {
            *counts.entry(f.rule_id).or_default() += 1;
        }
        for rule in RuleId::ALL {
            prop_assert_eq!(report.stats[&rule], counts.get(&rule).copied().unwrap_or(0));
        }
        let json = render_json(&report);
        let back = Report::from_json(&json).unwrap();
        prop_assert_eq!(&back, &report);
        prop_assert_eq!(render_json(&back), json);
    }

    #[test]
    fn index_survives_save_and_load(records in prop::collection::vec(pod_record(), 0..8)) {
        let index = SpecIndex::from_records(records, at(), "d1g3st");
        prop_assert!(index.inversion_holds());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.csix");
        save_index(&index, &path).unwrap();
        prop_assert_eq!(load_index(&path).unwrap(), index);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn online_findings_extend_offline(states in prop::collection::vec(0u8..3, 16)) {
        let scan = scan_bundle(&fixtures().join("bundles/app5/Payload/Demo.app")).unwrap();
        let index = build_index(&fixtures().join("specs/public")).unwrap();
        let mut probes = ProbeResults::new();
        for (i, request) in probes_for_bundle(&scan, &index).into_iter().enumerate() {
            let subject = request.to_string();
            let availability = match states[i % states.len()] {
                0 => Availability::conclude(&subject, AvailabilityState::Available, vec![Evidence::not_found("p", "404", at())], at()),
                1 => Availability::conclude(&subject, AvailabilityState::Registered, vec![Evidence::observed("p", "200", at())], at()),
                _ => Availability::conclude(&subject, AvailabilityState::Indeterminate, vec![Evidence::observed("p", "timeout", at())], at()),
            };
            probes.insert(request.clone(), ProbeOutcome::Availability(availability));
            prop_assert!(matches!(request, ProbeRequest::Npm(_) | ProbeRequest::PodName(_)));
        }
        let offline = evaluate_bundle(&scan, &index, None);
        let online = evaluate_bundle(&scan, &index, Some(&probes));
        for f in &offline {
            let matched = online.iter().find(|g| g.key() == f.key());
            prop_assert!(matched.is_some_and(|g| g.severity >= f.severity), "{:?} lost online", f.key());
        }
    }
}
