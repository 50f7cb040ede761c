//! Response records: wire formats, validation against survey definitions,
//! and attention-check filtering.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flowspace::FlowId;
use crate::questionnaire::SurveyDefinition;

pub use crate::likert::{likert_value, Likert, UnknownLabel};

pub const CSV_HEADER: [&str; 8] = [
    "respondent_id",
    "survey_id",
    "set_id",
    "started_at",
    "finished_at",
    "kind",
    "key",
    "answer",
];

/// `key` column value for the attention-check row.
pub const ATTENTION_KEY: &str = "attention";

#[derive(Debug, Error)]
pub enum ResponseError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("response header must be `{expected}`, found `{0}`", expected = CSV_HEADER.join(","))]
    Header(String),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
}

/// Why a single submission was refused.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum RecordIssue {
    #[error("unknown survey {survey_id}")]
    UnknownSurvey { survey_id: String },
    #[error("set_id {got} does not match survey set {expected}")]
    SetMismatch { expected: String, got: String },
    #[error("unknown flow_id {flow_id}")]
    UnknownFlow { flow_id: String },
    #[error("{missing} flow answers missing")]
    MissingAnswers { missing: usize },
    #[error("{key} answered more than once")]
    DuplicateAnswer { key: String },
    #[error("{label:?} is not an acceptability label")]
    BadLabel { label: String },
    #[error("attention check not answered")]
    MissingAttention,
    #[error("unknown demographic question {question_id}")]
    UnknownQuestion { question_id: String },
    #[error("{option:?} is not an option of {question_id}")]
    BadOption { question_id: String, option: String },
    #[error("finished_at precedes started_at")]
    BadTimestamps,
    #[error("unknown row kind {kind:?}")]
    BadKind { kind: String },
    #[error("respondent {respondent_id} already submitted survey {survey_id}")]
    DuplicateRespondent {
        respondent_id: String,
        survey_id: String,
    },
    #[error("attention check answered incorrectly")]
    FailedAttention,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseRecord {
    pub respondent_id: String,
    pub survey_id: String,
    pub set_id: String,
    pub started_at: i64,
    pub finished_at: i64,
    pub answers: BTreeMap<FlowId, Likert>,
    pub attention_answer: Likert,
    #[serde(default)]
    pub demographics: BTreeMap<String, String>,
}

impl ResponseRecord {
    pub fn passed_attention(&self) -> bool {
        self.attention_answer == Likert::ATTENTION_ANSWER
    }
}

/// Definitions keyed by survey id.
#[derive(Debug, Clone, Default)]
pub struct SurveyIndex {
    surveys: BTreeMap<String, SurveyDefinition>,
}

impl SurveyIndex {
    pub fn new(defs: impl IntoIterator<Item = SurveyDefinition>) -> Self {
        SurveyIndex {
            surveys: defs.into_iter().map(|d| (d.survey_id.clone(), d)).collect(),
        }
    }

    pub fn get(&self, survey_id: &str) -> Option<&SurveyDefinition> {
        self.surveys.get(survey_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &SurveyDefinition> {
        self.surveys.values()
    }

    pub fn len(&self) -> usize {
        self.surveys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surveys.is_empty()
    }

    /// Check a record against its definition (complete responses only).
    pub fn validate(&self, record: &ResponseRecord) -> Result<(), RecordIssue> {
        let def = self
            .get(&record.survey_id)
            .ok_or_else(|| RecordIssue::UnknownSurvey {
                survey_id: record.survey_id.clone(),
            })?;
        if def.set_id != record.set_id {
            return Err(RecordIssue::SetMismatch {
                expected: def.set_id.clone(),
                got: record.set_id.clone(),
            });
        }
        if record.finished_at < record.started_at {
            return Err(RecordIssue::BadTimestamps);
        }
        let expected = def.flow_id_set();
        if let Some(unknown) = record.answers.keys().find(|k| !expected.contains(k)) {
            return Err(RecordIssue::UnknownFlow {
                flow_id: unknown.to_string(),
            });
        }
        if record.answers.len() != expected.len() {
            return Err(RecordIssue::MissingAnswers {
                missing: expected.len() - record.answers.len(),
            });
        }
        for (question_id, option) in &record.demographics {
            let q = def
                .demographic(question_id)
                .ok_or_else(|| RecordIssue::UnknownQuestion {
                    question_id: question_id.clone(),
                })?;
            if !q.accepts(option) {
                return Err(RecordIssue::BadOption {
                    question_id: question_id.clone(),
                    option: option.clone(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub respondent_id: String,
    pub survey_id: String,
    pub issue: RecordIssue,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ingested {
    pub records: Vec<ResponseRecord>,
    pub rejected: Vec<Rejection>,
}

/// Validate parsed records, dropping invalid ones and any repeat submission
/// of a `(respondent_id, survey_id)` pair after the first.
pub fn ingest(
    candidates: Vec<Result<ResponseRecord, Rejection>>,
    index: &SurveyIndex,
) -> Ingested {
    let mut out = Ingested::default();
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    for candidate in candidates {
        let record = match candidate {
            Ok(r) => r,
            Err(rejection) => {
                out.rejected.push(rejection);
                continue;
            }
        };
        let key = (record.respondent_id.clone(), record.survey_id.clone());
        if seen.contains(&key) {
            out.rejected.push(Rejection {
                respondent_id: key.0.clone(),
                survey_id: key.1.clone(),
                issue: RecordIssue::DuplicateRespondent {
                    respondent_id: key.0,
                    survey_id: key.1,
                },
            });
            continue;
        }
        match index.validate(&record) {
            Ok(()) => {
                seen.insert(key);
                out.records.push(record);
            }
            Err(issue) => out.rejected.push(Rejection {
                respondent_id: record.respondent_id,
                survey_id: record.survey_id,
                issue,
            }),
        }
    }
    out
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    respondent_id: String,
    survey_id: String,
    set_id: String,
    started_at: i64,
    finished_at: i64,
    kind: String,
    key: String,
    answer: String,
}

struct Block {
    head: (String, String, String, i64, i64),
    rows: Vec<CsvRow>,
}

fn assemble(block: Block) -> Result<ResponseRecord, Rejection> {
    let (respondent_id, survey_id, set_id, started_at, finished_at) = block.head;
    let reject = |issue| Rejection {
        respondent_id: respondent_id.clone(),
        survey_id: survey_id.clone(),
        issue,
    };
    let mut answers = BTreeMap::new();
    let mut attention = None;
    let mut demographics = BTreeMap::new();
    for row in block.rows {
        match row.kind.as_str() {
            "flow" => {
                let label: Likert = row
                    .answer
                    .parse()
                    .map_err(|_| reject(RecordIssue::BadLabel { label: row.answer.clone() }))?;
                if answers.insert(FlowId(row.key.clone()), label).is_some() {
                    return Err(reject(RecordIssue::DuplicateAnswer { key: row.key }));
                }
            }
            "attention" => {
                let label: Likert = row
                    .answer
                    .parse()
                    .map_err(|_| reject(RecordIssue::BadLabel { label: row.answer.clone() }))?;
                if attention.replace(label).is_some() {
                    return Err(reject(RecordIssue::DuplicateAnswer { key: ATTENTION_KEY.into() }));
                }
            }
            "demographic" => {
                if demographics.insert(row.key.clone(), row.answer).is_some() {
                    return Err(reject(RecordIssue::DuplicateAnswer { key: row.key }));
                }
            }
            other => return Err(reject(RecordIssue::BadKind { kind: other.to_string() })),
        }
    }
    let attention_answer = attention.ok_or_else(|| reject(RecordIssue::MissingAttention))?;
    Ok(ResponseRecord {
        respondent_id,
        survey_id,
        set_id,
        started_at,
        finished_at,
        answers,
        attention_answer,
        demographics,
    })
}

/// Parse the long-format response CSV. A submission is a run of consecutive
/// rows sharing respondent, survey, set and both timestamps.
pub fn parse_csv<R: Read>(reader: R) -> Result<Vec<Result<ResponseRecord, Rejection>>, ResponseError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(ResponseError::Header(header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut out = Vec::new();
    let mut current: Option<Block> = None;
    for result in rdr.deserialize::<CsvRow>() {
        let row = result.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            ResponseError::Row {
                line,
                message: e.to_string(),
            }
        })?;
        let head = (
            row.respondent_id.clone(),
            row.survey_id.clone(),
            row.set_id.clone(),
            row.started_at,
            row.finished_at,
        );
        match &mut current {
            Some(block) if block.head == head => block.rows.push(row),
            _ => {
                if let Some(done) = current.take() {
                    out.push(assemble(done));
                }
                current = Some(Block {
                    head,
                    rows: vec![row],
                });
            }
        }
    }
    if let Some(done) = current {
        out.push(assemble(done));
    }
    Ok(out)
}

/// JSON array of records. Label or shape errors fail the whole document.
pub fn parse_json(document: &str) -> Result<Vec<Result<ResponseRecord, Rejection>>, ResponseError> {
    let records: Vec<ResponseRecord> = serde_json::from_str(document)?;
    Ok(records.into_iter().map(Ok).collect())
}

/// Write the CSV header only.
pub fn write_csv_header<W: Write>(writer: W) -> Result<(), ResponseError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    w.flush()?;
    Ok(())
}

/// Rows for one record: attention first, then flows and demographics in key order.
pub fn record_rows(record: &ResponseRecord) -> Result<Vec<u8>, ResponseError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    let started = record.started_at.to_string();
    let finished = record.finished_at.to_string();
    let mut row = |kind: &str, key: &str, answer: &str| {
        w.write_record([
            record.respondent_id.as_str(),
            &record.survey_id,
            &record.set_id,
            &started,
            &finished,
            kind,
            key,
            answer,
        ])
    };
    row("attention", ATTENTION_KEY, record.attention_answer.label())?;
    for (flow, answer) in &record.answers {
        row("flow", flow.as_str(), answer.label())?;
    }
    for (q, a) in &record.demographics {
        row("demographic", q, a)?;
    }
    w.into_inner()
        .map_err(|e| ResponseError::Io(e.into_error()))
}

pub fn write_csv<W: Write>(mut writer: W, records: &[ResponseRecord]) -> Result<(), ResponseError> {
    let mut header = Vec::new();
    write_csv_header(&mut header)?;
    writer.write_all(&header)?;
    for r in records {
        writer.write_all(&record_rows(r)?)?;
    }
    writer.flush()?;
    Ok(())
}

/// Attention-filtered dataset.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CleanDataset {
    pub retained: Vec<ResponseRecord>,
    pub rejected: Vec<(ResponseRecord, RecordIssue)>,
    /// Retained completions per set.
    pub completions: BTreeMap<String, usize>,
}

impl CleanDataset {
    pub fn input_count(&self) -> usize {
        self.retained.len() + self.rejected.len()
    }
}

/// Keep exactly the records whose attention answer is "Somewhat Acceptable".
pub fn filter_attention(records: Vec<ResponseRecord>) -> CleanDataset {
    let mut clean = CleanDataset::default();
    for r in records {
        if r.passed_attention() {
            *clean.completions.entry(r.set_id.clone()).or_default() += 1;
            clean.retained.push(r);
        } else {
            clean.rejected.push((r, RecordIssue::FailedAttention));
        }
    }
    clean
}
