use std::collections::BTreeSet;

use cisurvey_core::analysis::{
    analyze, emit_report, tests_document, AnalysisOptions, TestsDocument, REPORT_FILES, REPORT_SCHEMA,
};
use cisurvey_core::demographics::default_bank;
use cisurvey_core::flowspace::{enumerate_flows, partition_by_sender_attribute, smart_home_space, Slot};
use cisurvey_core::questionnaire::{build_survey, SurveyDefinition, DEFAULT_OVERVIEW};
use cisurvey_core::responses::filter_attention;
use cisurvey_core::simulate::{simulate_responses, NormModel};
use proptest::prelude::*;
use serde_json::Value;

fn surveys() -> Vec<SurveyDefinition> {
    let space = smart_home_space();
    partition_by_sender_attribute(&enumerate_flows(&space))
        .iter()
        .map(|s| build_survey(&space, s, 1, &default_bank(), DEFAULT_OVERVIEW).unwrap())
        .collect()
}

fn model(sd: f64) -> NormModel {
    let mut m = NormModel::default()
        .with_effect(Slot::TransmissionPrinciple, "if {subject} has given consent", 1.0)
        .with_effect(Slot::Recipient, "government intelligence agencies", -0.8);
    m.respondent_sd = sd;
    m.answer_sd = sd;
    m.inattentive_probability = 0.1;
    m
}

fn keys(v: &Value) -> BTreeSet<String> {
    v.as_object().unwrap().keys().cloned().collect()
}

fn required(schema: &Value) -> BTreeSet<String> {
    schema["required"].as_array().unwrap().iter().map(|k| k.as_str().unwrap().to_string()).collect()
}

/// Structural conformance: every object carries exactly the schema's keys,
/// enumerations hold and p-values lie in [0, 1].
fn conforms(doc: &Value, schema: &Value) {
    assert_eq!(keys(doc), required(schema));
    assert_eq!(doc["schema_version"], schema["properties"]["schema_version"]["const"]);
    let item = &schema["properties"]["comparisons"]["items"];
    let methods = item["properties"]["method"]["enum"].as_array().unwrap();
    for c in doc["comparisons"].as_array().unwrap() {
        assert_eq!(keys(c), required(item));
        assert!(methods.contains(&c["method"]));
        let p = c["p_value"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
}

#[test]
fn bundle_matches_schema_and_is_reproducible() {
    let space = smart_home_space();
    let defs = surveys();
    let data = filter_attention(simulate_responses(&model(0.5), &space, &defs, 300, 8).unwrap());
    let report = analyze(&data, &space, &AnalysisOptions::default(), 0).unwrap();
    let schema: Value = serde_json::from_str(REPORT_SCHEMA).unwrap();

    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    emit_report(&space, &report, a.path()).unwrap();
    emit_report(&space, &report, b.path()).unwrap();
    for name in REPORT_FILES {
        let x = std::fs::read(a.path().join(name)).unwrap();
        assert_eq!(x, std::fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    for name in ["tests_tp.json", "tests_recipient.json"] {
        let text = std::fs::read_to_string(a.path().join(name)).unwrap();
        let value: Value = serde_json::from_str(&text).unwrap();
        conforms(&value, &schema);
        let typed: TestsDocument = serde_json::from_str(&text).unwrap();
        assert!(typed.comparisons.iter().all(|c| c.threshold == typed.threshold));
    }
    let summary = std::fs::read_to_string(a.path().join("summary.md")).unwrap();
    assert!(summary.contains(&format!("- retained: {}", data.retained.len())));
    assert!(summary.contains("highest \"if its owner has given consent\""));
    assert!(summary.contains("lowest \"government intelligence agencies\""));
}

#[test]
fn empty_family_is_noted() {
    let space = smart_home_space();
    let defs = surveys();
    let data = filter_attention(simulate_responses(&model(0.5), &space, &defs, 48, 2).unwrap());
    let mut report = analyze(&data, &space, &AnalysisOptions::default(), 0).unwrap();
    report.recipient_family.comparisons.clear();
    report.recipient_family.m = 0;
    let doc = tests_document(&report.recipient_family, &report.options);
    assert_eq!(doc.note.as_deref(), Some("no comparisons"));
    let dir = tempfile::tempdir().unwrap();
    emit_report(&space, &report, dir.path()).unwrap();
    let summary = std::fs::read_to_string(dir.path().join("summary.md")).unwrap();
    assert!(summary.contains("No comparisons."));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Marginals are count-weighted averages of the cells, every table pools the
    /// same answers, and rows/columns come out in descending marginal order.
    #[test]
    fn table_invariants(seed in 0u64..1000, n in 1usize..120) {
        let space = smart_home_space();
        let defs = surveys();
        let data = filter_attention(simulate_responses(&model(0.7), &space, &defs, n, seed).unwrap());
        prop_assume!(!data.retained.is_empty());
        let (rt, sa) = cisurvey_core::analysis::acceptability_tables(&data, &space).unwrap();
        let answers: usize = data.retained.iter().map(|r| r.answers.len()).sum();
        let sum: f64 = data.retained.iter().flat_map(|r| r.answers.values()).map(|l| f64::from(l.value())).sum();
        for t in [&rt, &sa] {
            let count: usize = t.non_empty_cells().map(|c| c.count).sum();
            prop_assert_eq!(count, answers);
            let total: f64 = t.non_empty_cells().map(|c| c.mean * c.count as f64).sum();
            prop_assert!((total - sum).abs() < 1e-6);
            for (i, m) in t.row_marginals.iter().enumerate() {
                let cells: Vec<_> = t.cells[i].iter().flatten().collect();
                let c: usize = cells.iter().map(|c| c.count).sum();
                let s: f64 = cells.iter().map(|c| c.mean * c.count as f64).sum();
                prop_assert_eq!(c, m.count);
                prop_assert!((s / c as f64 - m.mean).abs() < 1e-9);
            }
            prop_assert!(t.row_marginals.windows(2).all(|w| w[0].mean >= w[1].mean));
            prop_assert!(t.column_marginals.windows(2).all(|w| w[0].mean >= w[1].mean));
            prop_assert!(t.non_empty_cells().all(|c| (-2.0..=2.0).contains(&c.mean)));
        }
    }
}
