use std::collections::BTreeMap;

use cisurvey_core::analysis::acceptability_tables;
use cisurvey_core::demographics::default_bank;
use cisurvey_core::flowspace::{enumerate_flows, partition_by_sender_attribute, smart_home_space, Slot};
use cisurvey_core::questionnaire::{build_survey, SurveyDefinition, DEFAULT_OVERVIEW};
use cisurvey_core::responses::{filter_attention, parse_csv, write_csv, SurveyIndex};
use cisurvey_core::simulate::{likert_bin, simulate_responses, NormModel};

fn surveys() -> Vec<SurveyDefinition> {
    let space = smart_home_space();
    partition_by_sender_attribute(&enumerate_flows(&space))
        .iter()
        .map(|s| build_survey(&space, s, 4, &default_bank(), DEFAULT_OVERVIEW).unwrap())
        .collect()
}

#[test]
fn attention_failures_are_binomial() {
    let space = smart_home_space();
    let model = NormModel { inattentive_probability: 269.0 / 2000.0, ..Default::default() };
    let recs = simulate_responses(&model, &space, &surveys(), 2000, 2024).unwrap();
    let failed = recs.iter().filter(|r| !r.passed_attention()).count() as f64;
    let p = model.inattentive_probability;
    let (mean, sd) = (2000.0 * p, (2000.0 * p * (1.0 - p)).sqrt());
    assert!((failed - mean).abs() <= 3.0 * sd, "{failed} vs {mean} +- {sd:.2}");
    assert_eq!(filter_attention(recs).retained.len() as f64, 2000.0 - failed);
}

#[test]
fn output_round_trips_and_validates() {
    let space = smart_home_space();
    let defs = surveys();
    let model = NormModel {
        respondent_sd: 1.0,
        answer_sd: 1.0,
        inattentive_probability: 0.2,
        ..Default::default()
    };
    let recs = simulate_responses(&model, &space, &defs, 150, 6).unwrap();
    assert!(recs.windows(2).all(|w| w[0].respondent_id < w[1].respondent_id));
    let index = SurveyIndex::new(defs.clone());
    assert!(recs.iter().all(|r| index.validate(r).is_ok()));
    let mut bytes = Vec::new();
    write_csv(&mut bytes, &recs).unwrap();
    let back: Vec<_> = parse_csv(bytes.as_slice()).unwrap().into_iter().map(|r| r.unwrap()).collect();
    assert_eq!(back, recs);
    assert_eq!(simulate_responses(&model, &space, &defs, 150, 6).unwrap(), recs);
    assert_ne!(simulate_responses(&model, &space, &defs, 150, 7).unwrap(), recs);
}

#[test]
fn noise_free_marginals_are_quantized_effects() {
    let space = smart_home_space();
    let effects = [
        ("if {subject} has given consent", 1.2),
        ("if the information is used for advertising", -1.7),
        ("if the information is anonymous", 0.4),
        ("if {subject} is notified", 0.6),
    ];
    let mut model = NormModel::default();
    for (tp, e) in effects {
        model = model.with_effect(Slot::TransmissionPrinciple, tp, e);
    }
    let data = filter_attention(simulate_responses(&model, &space, &surveys(), 96, 1).unwrap());
    let (rt, _) = acceptability_tables(&data, &space).unwrap();
    let marginal: BTreeMap<&str, f64> = rt
        .columns
        .iter()
        .zip(&rt.column_marginals)
        .map(|(c, m)| (c.as_str(), m.mean))
        .collect();
    for (tp, e) in effects {
        // Closed form: every answer to the principle is round-half-toward-zero of the effect.
        let expected = match e {
            1.2 => 1.0,
            -1.7 => -2.0,
            0.4 => 0.0,
            0.6 => 1.0,
            _ => unreachable!(),
        };
        assert_eq!(f64::from(likert_bin(e).value()), expected);
        assert_eq!(marginal[tp], expected, "{tp}");
    }
    assert_eq!(marginal["null"], 0.0);
}
