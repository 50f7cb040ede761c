//! Synthetic respondents drawn from a latent-norm model.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demographics::{Ownership, OWNERSHIP_QUESTION_ID};
use crate::derive_seed;
use crate::flowspace::{enumerate_flows, FlowId, InformationFlow, ParameterSpace, Slot};
use crate::likert::Likert;
use crate::questionnaire::{AssignmentMode, AssignmentPlan, SurveyDefinition};
use crate::responses::ResponseRecord;

/// First `started_at` of simulated respondents (2020-01-01T00:00:00Z).
pub const SIM_EPOCH: i64 = 1_577_836_800;

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("invalid norm model: {0}")]
    Model(String),
    #[error("norm model JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("norm model refers to unknown {slot} value {value:?}")]
    UnknownValue { slot: Slot, value: String },
    #[error("no survey definitions to assign")]
    NoSurveys,
    #[error("survey {survey_id} does not match set {set_id}: {reason}")]
    SetMismatch {
        survey_id: String,
        set_id: String,
        reason: String,
    },
}

/// Additive term applied when every listed slot takes the listed value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interaction {
    pub slots: BTreeMap<Slot, String>,
    pub effect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormModel {
    pub baseline: f64,
    /// Per-slot additive effects keyed by parameter value (raw or rendered).
    pub effects: BTreeMap<Slot, BTreeMap<String, f64>>,
    pub interactions: Vec<Interaction>,
    /// Standard deviation of the per-respondent offset.
    pub respondent_sd: f64,
    /// Standard deviation of the per-answer jitter.
    pub answer_sd: f64,
    /// Extra latent score for device owners, per transmission principle.
    pub owner_shift: BTreeMap<String, f64>,
    pub inattentive_probability: f64,
    pub owner_fraction: f64,
    pub unknown_ownership_fraction: f64,
}

impl Default for NormModel {
    fn default() -> Self {
        NormModel {
            baseline: 0.0,
            effects: BTreeMap::new(),
            interactions: Vec::new(),
            respondent_sd: 0.0,
            answer_sd: 0.0,
            owner_shift: BTreeMap::new(),
            inattentive_probability: 0.0,
            owner_fraction: 0.36,
            unknown_ownership_fraction: 0.02,
        }
    }
}

impl NormModel {
    pub fn from_json(document: &str) -> Result<Self, SimulateError> {
        let model: NormModel = serde_json::from_str(document)?;
        model.check()?;
        Ok(model)
    }

    pub fn with_effect(mut self, slot: Slot, value: &str, effect: f64) -> Self {
        self.effects.entry(slot).or_default().insert(value.to_string(), effect);
        self
    }

    fn check(&self) -> Result<(), SimulateError> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(SimulateError::Model(format!("{name} must be finite")))
            }
        };
        finite("baseline", self.baseline)?;
        for (name, sd) in [("respondent_sd", self.respondent_sd), ("answer_sd", self.answer_sd)] {
            finite(name, sd)?;
            if sd < 0.0 {
                return Err(SimulateError::Model(format!("{name} must be >= 0")));
            }
        }
        for (name, p) in [
            ("inattentive_probability", self.inattentive_probability),
            ("owner_fraction", self.owner_fraction),
            ("unknown_ownership_fraction", self.unknown_ownership_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimulateError::Model(format!("{name} must be in [0, 1]")));
            }
        }
        if self.owner_fraction + self.unknown_ownership_fraction > 1.0 {
            return Err(SimulateError::Model(
                "owner_fraction + unknown_ownership_fraction exceeds 1".into(),
            ));
        }
        let all_effects = self
            .effects
            .values()
            .flat_map(|m| m.values())
            .chain(self.owner_shift.values())
            .chain(self.interactions.iter().map(|i| &i.effect));
        for e in all_effects {
            finite("effect", *e)?;
        }
        if self.interactions.iter().any(|i| i.slots.is_empty()) {
            return Err(SimulateError::Model("interaction without slots".into()));
        }
        Ok(())
    }

    /// Noise-free latent score of one flow for a non-owner.
    pub fn mean_score(&self, space: &ParameterSpace, flow: &InformationFlow) -> f64 {
        let mut score = self.baseline;
        for (slot, values) in &self.effects {
            for (value, effect) in values {
                if matches(space, *slot, value, flow) {
                    score += effect;
                }
            }
        }
        for i in &self.interactions {
            if i.slots.iter().all(|(slot, v)| matches(space, *slot, v, flow)) {
                score += i.effect;
            }
        }
        score
    }

    pub fn owner_shift_for(&self, space: &ParameterSpace, flow: &InformationFlow) -> f64 {
        self.owner_shift
            .iter()
            .filter(|(v, _)| matches(space, Slot::TransmissionPrinciple, v, flow))
            .map(|(_, s)| s)
            .sum()
    }

    fn check_against(&self, space: &ParameterSpace) -> Result<(), SimulateError> {
        let known = |slot: Slot, value: &str| {
            space.resolve(slot, value).map(|_| ()).ok_or_else(|| SimulateError::UnknownValue {
                slot,
                value: value.to_string(),
            })
        };
        for (slot, values) in &self.effects {
            for v in values.keys() {
                known(*slot, v)?;
            }
        }
        for i in &self.interactions {
            for (slot, v) in &i.slots {
                known(*slot, v)?;
            }
        }
        for v in self.owner_shift.keys() {
            known(Slot::TransmissionPrinciple, v)?;
        }
        Ok(())
    }
}

fn matches(space: &ParameterSpace, slot: Slot, value: &str, flow: &InformationFlow) -> bool {
    space.resolve(slot, value) == Some(flow.value(slot))
}

/// Nearest Likert value, thresholds at -1.5, -0.5, 0.5 and 1.5 (ties toward 0).
pub fn likert_bin(latent: f64) -> Likert {
    let v = if latent < -1.5 {
        -2
    } else if latent < -0.5 {
        -1
    } else if latent <= 0.5 {
        0
    } else if latent <= 1.5 {
        1
    } else {
        2
    };
    Likert::from_value(v).expect("in range")
}

pub fn respondent_id(index: usize) -> String {
    format!("sim-{index:06}")
}

fn respondent_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(&[
        b"respondent",
        &seed.to_le_bytes(),
        &(index as u64).to_le_bytes(),
    ]))
}

/// Per-survey flows, checked against the space and grouped by set.
struct Assignable<'a> {
    by_set: BTreeMap<String, Vec<(&'a SurveyDefinition, Vec<&'a InformationFlow>)>>,
}

fn index_surveys<'a>(
    space: &ParameterSpace,
    catalog: &'a BTreeMap<FlowId, InformationFlow>,
    surveys: &'a [SurveyDefinition],
) -> Result<Assignable<'a>, SimulateError> {
    let _ = space;
    let mut by_set: BTreeMap<String, Vec<(&SurveyDefinition, Vec<&InformationFlow>)>> = BTreeMap::new();
    for def in surveys {
        let mismatch = |reason: String| SimulateError::SetMismatch {
            survey_id: def.survey_id.clone(),
            set_id: def.set_id.clone(),
            reason,
        };
        let mut flows = Vec::new();
        for id in def.flow_ids() {
            flows.push(
                catalog
                    .get(id)
                    .ok_or_else(|| mismatch(format!("flow {id} is not in the parameter space")))?,
            );
        }
        let first = flows.first().ok_or_else(|| mismatch("survey has no flows".into()))?;
        if flows
            .iter()
            .any(|f| f.sender != first.sender || f.attribute != first.attribute || f.subject != first.subject)
        {
            return Err(mismatch("flows span several sender/attribute sets".into()));
        }
        if let Some((other, other_flows)) = by_set.get(&def.set_id).and_then(|v| v.first()) {
            let mut a: Vec<_> = flows.iter().map(|f| &f.flow_id).collect();
            let mut b: Vec<_> = other_flows.iter().map(|f| &f.flow_id).collect();
            a.sort();
            b.sort();
            if a != b {
                return Err(mismatch(format!("flows differ from survey {}", other.survey_id)));
            }
        }
        by_set.entry(def.set_id.clone()).or_default().push((def, flows));
    }
    if by_set.is_empty() {
        return Err(SimulateError::NoSurveys);
    }
    Ok(Assignable { by_set })
}

/// Draw `n` respondents. Sets are balanced-assigned; when several surveys
/// share a set, one is chosen uniformly. Output is sorted by respondent id.
pub fn simulate_responses(
    model: &NormModel,
    space: &ParameterSpace,
    surveys: &[SurveyDefinition],
    n: usize,
    seed: u64,
) -> Result<Vec<ResponseRecord>, SimulateError> {
    model.check()?;
    model.check_against(space)?;
    let catalog: BTreeMap<FlowId, InformationFlow> = enumerate_flows(space)
        .into_iter()
        .map(|f| (f.flow_id.clone(), f))
        .collect();
    let assignable = index_surveys(space, &catalog, surveys)?;
    let mut plan = AssignmentPlan::new(assignable.by_set.keys().cloned(), AssignmentMode::Balanced);
    let mut assign_rng = ChaCha8Rng::seed_from_u64(derive_seed(&[b"assign", &seed.to_le_bytes()]));
    let respondent_noise = Normal::new(0.0, model.respondent_sd).expect("checked sd");
    let answer_noise = Normal::new(0.0, model.answer_sd).expect("checked sd");

    let mut out = Vec::with_capacity(n);
    for index in 0..n {
        let set_id = plan.assign(&mut assign_rng).expect("plan is non-empty");
        let candidates = &assignable.by_set[&set_id];
        let mut rng = respondent_rng(seed, index);
        let (def, flows) = candidates.choose(&mut rng).expect("non-empty");

        let ownership = {
            let u: f64 = rng.random();
            if u < model.owner_fraction {
                Ownership::Owner
            } else if u < model.owner_fraction + model.unknown_ownership_fraction {
                Ownership::Unknown
            } else {
                Ownership::NonOwner
            }
        };
        let inattentive = rng.random_bool(model.inattentive_probability);
        let offset = respondent_noise.sample(&mut rng);

        let mut answers = BTreeMap::new();
        for flow in flows {
            let answer = if inattentive {
                *Likert::COLUMNS.choose(&mut rng).expect("non-empty")
            } else {
                let mut latent = model.mean_score(space, flow) + offset + answer_noise.sample(&mut rng);
                if ownership == Ownership::Owner {
                    latent += model.owner_shift_for(space, flow);
                }
                likert_bin(latent)
            };
            answers.insert(flow.flow_id.clone(), answer);
        }
        let attention_answer = if inattentive {
            // Always wrong, so the failure rate equals the planted probability.
            let wrong: Vec<Likert> = Likert::COLUMNS
                .into_iter()
                .filter(|l| *l != Likert::ATTENTION_ANSWER)
                .collect();
            *wrong.choose(&mut rng).expect("non-empty")
        } else {
            Likert::ATTENTION_ANSWER
        };

        let mut demographics = BTreeMap::new();
        if def.demographic(OWNERSHIP_QUESTION_ID).is_some() {
            demographics.insert(OWNERSHIP_QUESTION_ID.to_string(), ownership.option().to_string());
        }
        let started_at = SIM_EPOCH + 60 * index as i64;
        out.push(ResponseRecord {
            respondent_id: respondent_id(index),
            survey_id: def.survey_id.clone(),
            set_id: set_id.clone(),
            started_at,
            finished_at: started_at + rng.random_range(300..1200),
            answers,
            attention_answer,
            demographics,
        });
    }
    out.sort_by(|a, b| a.respondent_id.cmp(&b.respondent_id));
    Ok(out)
}
