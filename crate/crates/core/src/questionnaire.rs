//! Question matrices, survey definitions and respondent assignment.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demographics::DemographicQuestion;
use crate::derive_seed;
use crate::flowspace::{FlowId, FlowSet, InformationFlow, ParameterSpace, Slot};
use crate::likert::Likert;

pub const SURVEY_SCHEMA_VERSION: &str = "cisurvey.survey.v1";
pub const ATTENTION_LABEL: &str = "Select 'Somewhat Acceptable'";

pub const DEFAULT_OVERVIEW: &str = "This survey is about devices in the home that connect to the \
Internet, such as thermostats, door locks and personal assistants. These devices can record \
information and send it to other people, companies or devices. Each question describes one way \
information might be recorded and sent, sometimes together with a condition under which it is \
sent. Please rate how acceptable you find each described situation. There are no right or wrong \
answers; we are interested in your opinion.";

#[derive(Debug, Error)]
pub enum SurveyError {
    #[error("flow set {set_id} has no null-principle flow for recipient {recipient:?}")]
    MissingNullFlow { set_id: String, recipient: String },
    #[error("flow set {0} is empty")]
    EmptySet(String),
    #[error("survey document is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid survey definition: {0}")]
    Invalid(String),
    #[error("assignment plan has no sets")]
    EmptyPlan,
    #[error("unknown set {0}")]
    UnknownSet(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Flow,
    Attention,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixRow {
    pub kind: RowKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow_id: Option<FlowId>,
    pub label: String,
}

impl MatrixRow {
    fn attention() -> Self {
        MatrixRow {
            kind: RowKind::Attention,
            flow_id: None,
            label: ATTENTION_LABEL.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionMatrix {
    pub matrix_id: String,
    /// Parameters held constant across the rows (shown in bold).
    pub fixed: BTreeMap<Slot, String>,
    pub rows: Vec<MatrixRow>,
    pub columns: Vec<String>,
}

impl QuestionMatrix {
    pub fn flow_ids(&self) -> impl Iterator<Item = &FlowId> {
        self.rows.iter().filter_map(|r| r.flow_id.as_ref())
    }

    pub fn has_attention_check(&self) -> bool {
        self.rows.iter().any(|r| r.kind == RowKind::Attention)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurveyDefinition {
    pub survey_id: String,
    pub set_id: String,
    pub seed: u64,
    pub schema_version: String,
    pub overview: String,
    pub matrices: Vec<QuestionMatrix>,
    pub demographics: Vec<DemographicQuestion>,
}

impl SurveyDefinition {
    /// Flow ids in presentation order.
    pub fn flow_ids(&self) -> Vec<&FlowId> {
        self.matrices.iter().flat_map(|m| m.flow_ids()).collect()
    }

    pub fn flow_id_set(&self) -> BTreeSet<&FlowId> {
        self.flow_ids().into_iter().collect()
    }

    pub fn demographic(&self, question_id: &str) -> Option<&DemographicQuestion> {
        self.demographics
            .iter()
            .find(|q| q.question_id == question_id)
    }

    /// Structural checks that hold for every well-formed definition.
    pub fn validate(&self) -> Result<(), SurveyError> {
        let invalid = |m: String| Err(SurveyError::Invalid(m));
        if self.schema_version != SURVEY_SCHEMA_VERSION {
            return invalid(format!("unsupported schema_version {:?}", self.schema_version));
        }
        if self.matrices.is_empty() {
            return invalid("no matrices".into());
        }
        let columns = Likert::column_labels();
        let mut attention = 0;
        let mut seen = BTreeSet::new();
        let mut matrix_ids = BTreeSet::new();
        for m in &self.matrices {
            if !matrix_ids.insert(&m.matrix_id) {
                return invalid(format!("duplicate matrix_id {}", m.matrix_id));
            }
            if m.columns != columns {
                return invalid(format!("matrix {} has non-standard columns", m.matrix_id));
            }
            if m.rows.is_empty() {
                return invalid(format!("matrix {} has no rows", m.matrix_id));
            }
            let here = m.rows.iter().filter(|r| r.kind == RowKind::Attention).count();
            if here > 1 {
                return invalid(format!("matrix {} has {here} attention checks", m.matrix_id));
            }
            attention += here;
            for row in &m.rows {
                match (row.kind, &row.flow_id) {
                    (RowKind::Flow, Some(id)) => {
                        if !seen.insert(id) {
                            return invalid(format!("flow {id} appears twice"));
                        }
                    }
                    (RowKind::Flow, None) => {
                        return invalid(format!("flow row without flow_id in {}", m.matrix_id))
                    }
                    (RowKind::Attention, Some(_)) => {
                        return invalid("attention row carries a flow_id".into())
                    }
                    (RowKind::Attention, None) => {}
                }
            }
        }
        if attention != 1 {
            return invalid(format!("expected exactly one attention check, found {attention}"));
        }
        if !self.matrices[0]
            .fixed
            .contains_key(&Slot::TransmissionPrinciple)
        {
            return invalid("first matrix must fix the (null) transmission principle".into());
        }
        let mut qids = BTreeSet::new();
        for q in &self.demographics {
            if !qids.insert(&q.question_id) {
                return invalid(format!("duplicate demographic question {}", q.question_id));
            }
            if q.options.is_empty() {
                return invalid(format!("demographic question {} has no options", q.question_id));
            }
        }
        Ok(())
    }

    /// Checks against the flow set the definition was built from.
    pub fn validate_against(
        &self,
        space: &ParameterSpace,
        set: &FlowSet,
    ) -> Result<(), SurveyError> {
        self.validate()?;
        if self.set_id != set.set_id {
            return Err(SurveyError::Invalid(format!(
                "definition is for {}, not {}",
                self.set_id, set.set_id
            )));
        }
        let expected: BTreeSet<&FlowId> = set.flows.iter().map(|f| &f.flow_id).collect();
        if self.flow_id_set() != expected {
            return Err(SurveyError::Invalid(
                "flow rows do not equal the assigned set".into(),
            ));
        }
        let by_id: BTreeMap<&FlowId, &InformationFlow> =
            set.flows.iter().map(|f| (&f.flow_id, f)).collect();
        let first: Vec<&InformationFlow> = self.matrices[0].flow_ids().map(|id| by_id[id]).collect();
        let nulls = set
            .flows
            .iter()
            .filter(|f| space.is_null_principle(&f.transmission_principle))
            .count();
        if first.len() != nulls
            || !first
                .iter()
                .all(|f| space.is_null_principle(&f.transmission_principle))
        {
            return Err(SurveyError::Invalid(
                "first matrix must hold exactly the null-principle flows".into(),
            ));
        }
        let mut recipients = BTreeSet::new();
        for m in &self.matrices[1..] {
            let flows: Vec<&InformationFlow> = m.flow_ids().map(|id| by_id[id]).collect();
            let r = &flows[0].recipient;
            if !flows
                .iter()
                .all(|f| &f.recipient == r && !space.is_null_principle(&f.transmission_principle))
            {
                return Err(SurveyError::Invalid(format!(
                    "matrix {} mixes recipients or includes the null principle",
                    m.matrix_id
                )));
            }
            if !recipients.insert(r.clone()) {
                return Err(SurveyError::Invalid(format!("recipient {r:?} repeated")));
            }
        }
        Ok(())
    }
}

fn matrix_id(index: usize) -> String {
    format!("m{:02}", index + 1)
}

/// Seed for all shuffles of one survey; depends only on `(set_id, seed)`.
pub fn survey_rng(set_id: &str, seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(&[b"survey", set_id.as_bytes(), &seed.to_le_bytes()]))
}

pub fn survey_id_for(set_id: &str, seed: u64) -> String {
    format!("{set_id}-s{seed}")
}

/// Build the matrix questionnaire for one flow set.
///
/// Matrix 1 holds the null-principle flows (one row per recipient). Every
/// recipient with at least one conditional flow then gets its own matrix whose
/// rows are the conditional principles. Rows are shuffled within each matrix,
/// the recipient matrices are shuffled among themselves, and a single
/// attention-check row is inserted at a uniformly chosen matrix and position.
pub fn build_survey(
    space: &ParameterSpace,
    set: &FlowSet,
    seed: u64,
    demographics: &[DemographicQuestion],
    overview: &str,
) -> Result<SurveyDefinition, SurveyError> {
    if set.flows.is_empty() {
        return Err(SurveyError::EmptySet(set.set_id.clone()));
    }
    let mut rng = survey_rng(&set.set_id, seed);
    let display = |v: &str| crate::flowspace::substitute_subject(v, &set.subject);
    let recipients = set.recipients();

    let mut null_rows = Vec::with_capacity(recipients.len());
    for recipient in &recipients {
        let flow = set
            .flows
            .iter()
            .find(|f| &f.recipient == recipient && space.is_null_principle(&f.transmission_principle))
            .ok_or_else(|| SurveyError::MissingNullFlow {
                set_id: set.set_id.clone(),
                recipient: recipient.to_string(),
            })?;
        null_rows.push(MatrixRow {
            kind: RowKind::Flow,
            flow_id: Some(flow.flow_id.clone()),
            label: display(&flow.recipient),
        });
    }
    null_rows.shuffle(&mut rng);

    let base_fixed = |extra: (Slot, String)| {
        let mut fixed = BTreeMap::new();
        fixed.insert(Slot::Sender, display(&set.sender));
        fixed.insert(Slot::Attribute, display(&set.attribute));
        fixed.insert(Slot::Subject, set.subject.clone());
        fixed.insert(extra.0, extra.1);
        fixed
    };

    let mut first = vec![QuestionMatrix {
        matrix_id: String::new(),
        fixed: base_fixed((
            Slot::TransmissionPrinciple,
            space.null_principle().to_string(),
        )),
        rows: null_rows,
        columns: Likert::column_labels(),
    }];

    let mut by_recipient = Vec::new();
    for recipient in &recipients {
        let mut rows: Vec<MatrixRow> = set
            .flows
            .iter()
            .filter(|f| &f.recipient == recipient && !space.is_null_principle(&f.transmission_principle))
            .map(|f| MatrixRow {
                kind: RowKind::Flow,
                flow_id: Some(f.flow_id.clone()),
                label: display(&f.transmission_principle),
            })
            .collect();
        if rows.is_empty() {
            continue;
        }
        rows.shuffle(&mut rng);
        by_recipient.push(QuestionMatrix {
            matrix_id: String::new(),
            fixed: base_fixed((Slot::Recipient, display(recipient))),
            rows,
            columns: Likert::column_labels(),
        });
    }
    by_recipient.shuffle(&mut rng);
    first.extend(by_recipient);
    let mut matrices = first;
    for (i, m) in matrices.iter_mut().enumerate() {
        m.matrix_id = matrix_id(i);
    }

    let target = rng.random_range(0..matrices.len());
    let position = rng.random_range(0..=matrices[target].rows.len());
    matrices[target].rows.insert(position, MatrixRow::attention());

    let def = SurveyDefinition {
        survey_id: survey_id_for(&set.set_id, seed),
        set_id: set.set_id.clone(),
        seed,
        schema_version: SURVEY_SCHEMA_VERSION.to_string(),
        overview: overview.to_string(),
        matrices,
        demographics: demographics.to_vec(),
    };
    debug_assert!(def.validate_against(space, set).is_ok());
    Ok(def)
}

/// Pretty JSON, newline-terminated.
pub fn export_survey(def: &SurveyDefinition) -> String {
    let mut s = serde_json::to_string_pretty(def).expect("definitions serialise");
    s.push('\n');
    s
}

pub fn import_survey(document: &str) -> Result<SurveyDefinition, SurveyError> {
    let def: SurveyDefinition = serde_json::from_str(document)?;
    def.validate()?;
    Ok(def)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentMode {
    /// Uniform among the least-issued sets.
    #[default]
    Balanced,
    /// Uniform over all sets.
    Uniform,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetTally {
    pub issued: u64,
    pub completed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentPlan {
    pub mode: AssignmentMode,
    tallies: BTreeMap<String, SetTally>,
    /// Respondent slot (issue order) to set id.
    assignments: Vec<String>,
}

impl AssignmentPlan {
    pub fn new<I, S>(set_ids: I, mode: AssignmentMode) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        AssignmentPlan {
            mode,
            tallies: set_ids
                .into_iter()
                .map(|s| (s.into(), SetTally::default()))
                .collect(),
            assignments: Vec::new(),
        }
    }

    pub fn tallies(&self) -> &BTreeMap<String, SetTally> {
        &self.tallies
    }

    pub fn assignments(&self) -> &[String] {
        &self.assignments
    }

    pub fn assign<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<String, SurveyError> {
        let candidates: Vec<&String> = match self.mode {
            AssignmentMode::Balanced => {
                let min = self
                    .tallies
                    .values()
                    .map(|t| t.issued)
                    .min()
                    .ok_or(SurveyError::EmptyPlan)?;
                self.tallies
                    .iter()
                    .filter(|(_, t)| t.issued == min)
                    .map(|(k, _)| k)
                    .collect()
            }
            AssignmentMode::Uniform => self.tallies.keys().collect(),
        };
        let chosen = (*candidates.choose(rng).ok_or(SurveyError::EmptyPlan)?).clone();
        self.tallies
            .get_mut(&chosen)
            .expect("candidate comes from tallies")
            .issued += 1;
        self.assignments.push(chosen.clone());
        Ok(chosen)
    }

    pub fn record_completion(&mut self, set_id: &str) -> Result<(), SurveyError> {
        let tally = self
            .tallies
            .get_mut(set_id)
            .ok_or_else(|| SurveyError::UnknownSet(set_id.to_string()))?;
        if tally.completed < tally.issued {
            tally.completed += 1;
        } else {
            // Completion without a recorded issue (e.g. after a restart).
            tally.issued += 1;
            tally.completed += 1;
        }
        Ok(())
    }
}
