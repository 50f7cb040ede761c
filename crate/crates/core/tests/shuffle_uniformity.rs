use std::collections::BTreeMap;

use cisurvey_core::demographics::default_bank;
use cisurvey_core::flowspace::{enumerate_flows, load_parameter_space, partition_by_sender_attribute};
use cisurvey_core::questionnaire::{build_survey, RowKind, DEFAULT_OVERVIEW};

const SEEDS: u64 = 12_000;

/// Upper 0.1% point of chi-square with `df` degrees of freedom (Wilson-Hilferty).
fn chi2_critical(df: f64) -> f64 {
    let z = 3.090_232;
    let a = 2.0 / (9.0 * df);
    df * (1.0 - a + z * a.sqrt()).powi(3)
}

fn chi2(counts: &[u64], total: u64) -> f64 {
    let expected = total as f64 / counts.len() as f64;
    counts.iter().map(|c| (*c as f64 - expected).powi(2) / expected).sum()
}

fn five_row_set() -> (cisurvey_core::flowspace::ParameterSpace, cisurvey_core::flowspace::FlowSet) {
    let space = load_parameter_space(
        r#"{
          "senders": ["a lamp"],
          "recipients": ["its manufacturer", "{subject}'s doctor"],
          "attributes": ["{subject}'s habits"],
          "transmission_principles": [
            {"text": "if a", "null": false}, {"text": "if b", "null": false},
            {"text": "if c", "null": false}, {"text": "if d", "null": false},
            {"text": "if e", "null": false}, {"text": "null", "null": true}
          ],
          "exclusions": [{"slots": {"recipient": "{subject}'s doctor", "transmission_principle": "if a"}},
                         {"slots": {"recipient": "{subject}'s doctor", "transmission_principle": "if b"}},
                         {"slots": {"recipient": "{subject}'s doctor", "transmission_principle": "if c"}}]
        }"#,
    )
    .unwrap();
    let set = partition_by_sender_attribute(&enumerate_flows(&space)).remove(0);
    (space, set)
}

#[test]
fn row_orders_are_uniform_permutations() {
    let (space, set) = five_row_set();
    let mut perms: BTreeMap<Vec<String>, u64> = BTreeMap::new();
    let mut first_matrix: BTreeMap<String, u64> = BTreeMap::new();
    for seed in 0..SEEDS {
        let def = build_survey(&space, &set, seed, &default_bank(), DEFAULT_OVERVIEW).unwrap();
        let five = def
            .matrices
            .iter()
            .find(|m| m.flow_ids().count() == 5)
            .unwrap();
        let order: Vec<String> = five
            .rows
            .iter()
            .filter(|r| r.kind == RowKind::Flow)
            .map(|r| r.label.clone())
            .collect();
        *perms.entry(order).or_default() += 1;
        *first_matrix.entry(def.matrices[1].fixed.values().cloned().collect::<Vec<_>>().join("|")).or_default() += 1;
    }
    assert_eq!(perms.len(), 120, "every permutation of five rows occurs");
    let counts: Vec<u64> = perms.values().copied().collect();
    let stat = chi2(&counts, SEEDS);
    assert!(stat < chi2_critical(119.0), "chi-square {stat:.1} over 119 df");

    // Recipient matrices are shuffled too: either may come second.
    let counts: Vec<u64> = first_matrix.values().copied().collect();
    assert_eq!(counts.len(), 2);
    assert!(chi2(&counts, SEEDS) < chi2_critical(1.0));
}

#[test]
fn attention_placement_is_uniform() {
    let (space, set) = five_row_set();
    // Three matrices: null (2 rows), five-row and two-row recipient matrices.
    let mut by_matrix = [0u64; 3];
    let mut positions_in_five = [0u64; 6];
    for seed in 0..SEEDS {
        let def = build_survey(&space, &set, seed, &default_bank(), DEFAULT_OVERVIEW).unwrap();
        let (i, m) = def.matrices.iter().enumerate().find(|(_, m)| m.has_attention_check()).unwrap();
        let kind = match m.flow_ids().count() {
            5 => 1,
            _ if i == 0 => 0,
            _ => 2,
        };
        by_matrix[kind] += 1;
        if kind == 1 {
            let pos = m.rows.iter().position(|r| r.kind == RowKind::Attention).unwrap();
            positions_in_five[pos] += 1;
        }
    }
    assert!(chi2(&by_matrix, SEEDS) < chi2_critical(2.0), "{by_matrix:?}");
    let n: u64 = positions_in_five.iter().sum();
    assert!(chi2(&positions_in_five, n) < chi2_critical(5.0), "{positions_in_five:?}");
}
