//! Acceptability tables, paired comparison families, significance summaries,
//! ownership deltas and the on-disk report bundle.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demographics::{Ownership, OWNERSHIP_QUESTION_ID};
use crate::flowspace::{enumerate_flows, FlowId, InformationFlow, ParameterSpace, Slot};
use crate::responses::CleanDataset;
use crate::stats::{
    bonferroni_threshold, wilcoxon_signed_rank, PairedSample, StatsError, TestResult,
    WilcoxonOptions, ZeroMethod, DEFAULT_EXACT_CUTOFF,
};

pub const REPORT_SCHEMA_VERSION: &str = "cisurvey.report.v1";
pub const DEFAULT_BASELINE_RECIPIENT: &str = "{subject}'s immediate family";
/// Comparisons with fewer effective pairs than this are flagged.
pub const LOW_N_THRESHOLD: usize = 5;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no retained responses to analyse")]
    EmptyDataset,
    #[error("response references flow {0} which is not in the parameter space")]
    UnknownFlow(String),
    #[error("baseline recipient {0:?} is not in the parameter space")]
    UnknownBaseline(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatistic {
    #[default]
    Mean,
    Median,
}

/// How paired samples are formed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    /// One comparison per sender/attribute set and varied parameter, pooling
    /// the within-respondent pairs across the other varying parameter.
    #[default]
    PerSet,
    /// One comparison per individual flow pair.
    PerFlow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub alpha: f64,
    pub baseline_recipient: String,
    pub granularity: Granularity,
    pub exact_cutoff: usize,
    pub zero_method: ZeroMethod,
    pub statistic: CellStatistic,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            alpha: 0.05,
            baseline_recipient: DEFAULT_BASELINE_RECIPIENT.to_string(),
            granularity: Granularity::PerSet,
            exact_cutoff: DEFAULT_EXACT_CUTOFF,
            zero_method: ZeroMethod::Wilcox,
            statistic: CellStatistic::Mean,
        }
    }
}

/// Flow lookup for a parameter space.
#[derive(Debug, Clone)]
pub struct FlowCatalog {
    flows: BTreeMap<FlowId, InformationFlow>,
}

impl FlowCatalog {
    pub fn new(space: &ParameterSpace) -> Self {
        FlowCatalog {
            flows: enumerate_flows(space)
                .into_iter()
                .map(|f| (f.flow_id.clone(), f))
                .collect(),
        }
    }

    pub fn get(&self, id: &FlowId) -> Option<&InformationFlow> {
        self.flows.get(id)
    }

    pub fn len(&self) -> usize {
        self.flows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flows.is_empty()
    }
}

/// One answer resolved to its flow.
struct Answer<'a> {
    respondent: &'a str,
    flow: &'a InformationFlow,
    value: i32,
}

fn resolve_answers<'a>(
    data: &'a CleanDataset,
    catalog: &'a FlowCatalog,
) -> Result<Vec<Answer<'a>>, AnalysisError> {
    if data.retained.is_empty() {
        return Err(AnalysisError::EmptyDataset);
    }
    let mut out = Vec::new();
    for record in &data.retained {
        for (id, label) in &record.answers {
            let flow = catalog
                .get(id)
                .ok_or_else(|| AnalysisError::UnknownFlow(id.to_string()))?;
            out.push(Answer {
                respondent: &record.respondent_id,
                flow,
                value: label.value(),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
struct Accumulator {
    values: Vec<i32>,
}

impl Accumulator {
    fn push(&mut self, v: i32) {
        self.values.push(v);
    }

    fn sum(&self) -> i64 {
        self.values.iter().map(|v| i64::from(*v)).sum()
    }

    fn mean(&self) -> f64 {
        self.sum() as f64 / self.values.len() as f64
    }

    fn median(&self) -> f64 {
        let mut v = self.values.clone();
        v.sort_unstable();
        let n = v.len();
        if n % 2 == 1 {
            f64::from(v[n / 2])
        } else {
            f64::from(v[n / 2 - 1] + v[n / 2]) / 2.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub mean: f64,
    pub median: f64,
    pub count: usize,
}

impl Cell {
    fn from_acc(acc: &Accumulator) -> Self {
        Cell {
            mean: acc.mean(),
            median: acc.median(),
            count: acc.values.len(),
        }
    }

    pub fn value(&self, statistic: CellStatistic) -> f64 {
        match statistic {
            CellStatistic::Mean => self.mean,
            CellStatistic::Median => self.median,
        }
    }
}

/// Two-way table of pooled Likert scores. `None` cells are combinations with
/// no answers (normally excluded flows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptabilityTable {
    pub row_slot: Slot,
    pub column_slot: Slot,
    /// Raw parameter values, sorted by descending marginal mean.
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub row_marginals: Vec<Cell>,
    pub column_marginals: Vec<Cell>,
    pub cells: Vec<Vec<Option<Cell>>>,
}

impl AcceptabilityTable {
    pub fn cell(&self, row: &str, column: &str) -> Option<&Cell> {
        let r = self.rows.iter().position(|v| v == row)?;
        let c = self.columns.iter().position(|v| v == column)?;
        self.cells[r][c].as_ref()
    }

    pub fn non_empty_cells(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter().flatten().flatten()
    }

    fn build(space: &ParameterSpace, answers: &[Answer<'_>], row_slot: Slot, column_slot: Slot) -> Self {
        let row_values = space.values(row_slot);
        let col_values = space.values(column_slot);
        let mut cells = vec![vec![Accumulator::default(); col_values.len()]; row_values.len()];
        let mut row_acc = vec![Accumulator::default(); row_values.len()];
        let mut col_acc = vec![Accumulator::default(); col_values.len()];
        for a in answers {
            let r = space
                .index_of(row_slot, a.flow.value(row_slot))
                .expect("catalog flows come from the space");
            let c = space
                .index_of(column_slot, a.flow.value(column_slot))
                .expect("catalog flows come from the space");
            cells[r][c].push(a.value);
            row_acc[r].push(a.value);
            col_acc[c].push(a.value);
        }
        let order = |accs: &[Accumulator]| {
            let mut idx: Vec<usize> = (0..accs.len()).filter(|i| !accs[*i].values.is_empty()).collect();
            // Stable: ties keep config order.
            idx.sort_by(|a, b| accs[*b].mean().total_cmp(&accs[*a].mean()));
            idx
        };
        let row_order = order(&row_acc);
        let col_order = order(&col_acc);
        AcceptabilityTable {
            row_slot,
            column_slot,
            rows: row_order.iter().map(|i| row_values[*i].clone()).collect(),
            columns: col_order.iter().map(|i| col_values[*i].clone()).collect(),
            row_marginals: row_order.iter().map(|i| Cell::from_acc(&row_acc[*i])).collect(),
            column_marginals: col_order.iter().map(|i| Cell::from_acc(&col_acc[*i])).collect(),
            cells: row_order
                .iter()
                .map(|r| {
                    col_order
                        .iter()
                        .map(|c| {
                            let acc = &cells[*r][*c];
                            (!acc.values.is_empty()).then(|| Cell::from_acc(acc))
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

/// Recipient x transmission-principle and sender x attribute tables.
pub fn acceptability_tables(
    data: &CleanDataset,
    space: &ParameterSpace,
) -> Result<(AcceptabilityTable, AcceptabilityTable), AnalysisError> {
    let catalog = FlowCatalog::new(space);
    let answers = resolve_answers(data, &catalog)?;
    Ok((
        AcceptabilityTable::build(space, &answers, Slot::Recipient, Slot::TransmissionPrinciple),
        AcceptabilityTable::build(space, &answers, Slot::Sender, Slot::Attribute),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// Conditional principle against the null principle.
    TransmissionPrinciple,
    /// Recipient against the baseline recipient.
    Recipient,
}

impl FamilyKind {
    pub fn varied_slot(self) -> Slot {
        match self {
            FamilyKind::TransmissionPrinciple => Slot::TransmissionPrinciple,
            FamilyKind::Recipient => Slot::Recipient,
        }
    }
}

/// Identifies one comparison. `baseline` and `variant` are values of the
/// varied slot; `held` is set only for per-flow granularity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ComparisonKey {
    pub sender: String,
    pub attribute: String,
    pub subject: String,
    pub baseline: String,
    pub variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub held: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub key: ComparisonKey,
    pub sample: PairedSample,
    pub respondents: usize,
    /// Respondents lacking one member of a pair (left out of the sample).
    pub incomplete_respondents: usize,
    pub result: TestResult,
    pub low_n: bool,
}

impl Comparison {
    pub fn baseline_mean(&self) -> f64 {
        let s = self.sample.pairs();
        s.iter().map(|p| f64::from(p.0)).sum::<f64>() / s.len() as f64
    }

    pub fn variant_mean(&self) -> f64 {
        let s = self.sample.pairs();
        s.iter().map(|p| f64::from(p.1)).sum::<f64>() / s.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonFamily {
    pub kind: FamilyKind,
    pub alpha: f64,
    pub m: usize,
    /// `alpha / m`, or `alpha` when the family is empty.
    pub threshold: f64,
    pub comparisons: Vec<Comparison>,
}

impl ComparisonFamily {
    pub fn significant_count(&self) -> usize {
        self.comparisons.iter().filter(|c| c.result.significant).count()
    }
}

/// Answers of one respondent within one sender/attribute/subject set,
/// keyed by (recipient index, principle index).
type Grid = BTreeMap<(usize, usize), i32>;

struct SetAnswers {
    sender: String,
    attribute: String,
    subject: String,
    /// (recipient, principle) cells that exist in the space.
    present: Vec<(usize, usize)>,
    respondents: BTreeMap<String, Grid>,
}

fn group_by_set(
    space: &ParameterSpace,
    catalog: &FlowCatalog,
    answers: &[Answer<'_>],
) -> Vec<SetAnswers> {
    let key_of = |f: &InformationFlow| {
        (
            space.index_of(Slot::Sender, &f.sender).unwrap(),
            space.index_of(Slot::Attribute, &f.attribute).unwrap(),
            space.index_of(Slot::Subject, &f.subject).unwrap(),
        )
    };
    let cell_of = |f: &InformationFlow| {
        (
            space.index_of(Slot::Recipient, &f.recipient).unwrap(),
            space
                .index_of(Slot::TransmissionPrinciple, &f.transmission_principle)
                .unwrap(),
        )
    };
    let mut sets: BTreeMap<(usize, usize, usize), SetAnswers> = BTreeMap::new();
    for flow in catalog.flows.values() {
        let entry = sets.entry(key_of(flow)).or_insert_with(|| SetAnswers {
            sender: flow.sender.clone(),
            attribute: flow.attribute.clone(),
            subject: flow.subject.clone(),
            present: Vec::new(),
            respondents: BTreeMap::new(),
        });
        entry.present.push(cell_of(flow));
    }
    for set in sets.values_mut() {
        set.present.sort_unstable();
    }
    for a in answers {
        let set = sets.get_mut(&key_of(a.flow)).expect("set exists");
        set.respondents
            .entry(a.respondent.to_string())
            .or_default()
            .insert(cell_of(a.flow), a.value);
    }
    sets.into_values().collect()
}

/// Pairs of `(baseline cell, variant cell)` to compare within one set.
struct PairSpec {
    baseline: String,
    variant: String,
    held: Option<String>,
    cells: Vec<((usize, usize), (usize, usize))>,
}

fn pair_specs(
    space: &ParameterSpace,
    set: &SetAnswers,
    kind: FamilyKind,
    baseline_recipient: usize,
    granularity: Granularity,
) -> Vec<PairSpec> {
    let has = |cell: (usize, usize)| set.present.binary_search(&cell).is_ok();
    let null_tp = space
        .index_of(Slot::TransmissionPrinciple, space.null_principle())
        .unwrap();
    let recipients = space.recipients();
    let principles = space.transmission_principles();
    let mut out = Vec::new();
    match kind {
        FamilyKind::TransmissionPrinciple => {
            for tp in (0..principles.len()).filter(|t| *t != null_tp) {
                let cells: Vec<_> = (0..recipients.len())
                    .filter(|r| has((*r, null_tp)) && has((*r, tp)))
                    .map(|r| ((r, null_tp), (r, tp)))
                    .collect();
                push_specs(&mut out, granularity, &principles[null_tp], &principles[tp], cells, |c| {
                    recipients[c.0 .0].clone()
                });
            }
        }
        FamilyKind::Recipient => {
            for r in (0..recipients.len()).filter(|r| *r != baseline_recipient) {
                let cells: Vec<_> = (0..principles.len())
                    .filter(|t| has((baseline_recipient, *t)) && has((r, *t)))
                    .map(|t| ((baseline_recipient, t), (r, t)))
                    .collect();
                push_specs(
                    &mut out,
                    granularity,
                    &recipients[baseline_recipient],
                    &recipients[r],
                    cells,
                    |c| principles[c.0 .1].clone(),
                );
            }
        }
    }
    out
}

fn push_specs(
    out: &mut Vec<PairSpec>,
    granularity: Granularity,
    baseline: &str,
    variant: &str,
    cells: Vec<((usize, usize), (usize, usize))>,
    held_label: impl Fn(&((usize, usize), (usize, usize))) -> String,
) {
    if cells.is_empty() {
        return;
    }
    match granularity {
        Granularity::PerSet => out.push(PairSpec {
            baseline: baseline.to_string(),
            variant: variant.to_string(),
            held: None,
            cells,
        }),
        Granularity::PerFlow => {
            for c in cells {
                out.push(PairSpec {
                    baseline: baseline.to_string(),
                    variant: variant.to_string(),
                    held: Some(held_label(&c)),
                    cells: vec![c],
                });
            }
        }
    }
}

fn build_family(
    space: &ParameterSpace,
    sets: &[SetAnswers],
    kind: FamilyKind,
    baseline_recipient: usize,
    options: &AnalysisOptions,
) -> Result<ComparisonFamily, AnalysisError> {
    let wilcoxon = WilcoxonOptions {
        exact_cutoff: options.exact_cutoff,
        zero_method: options.zero_method,
        threshold: options.alpha,
    };
    let mut comparisons = Vec::new();
    for set in sets {
        for spec in pair_specs(space, set, kind, baseline_recipient, options.granularity) {
            let mut sample = PairedSample::default();
            let mut respondents = 0;
            let mut incomplete = 0;
            // Both members of every pair are read from the same respondent's grid.
            for (respondent, grid) in &set.respondents {
                let mut contributed = false;
                for (base, var) in &spec.cells {
                    match (grid.get(base), grid.get(var)) {
                        (Some(x), Some(y)) => {
                            sample.push(*x, *y)?;
                            contributed = true;
                        }
                        (None, None) => {}
                        _ => {
                            incomplete += 1;
                            tracing::debug!(%respondent, variant = %spec.variant, "pair member missing");
                        }
                    }
                }
                if contributed {
                    respondents += 1;
                }
            }
            if sample.is_empty() {
                continue;
            }
            let result = wilcoxon_signed_rank(&sample, &wilcoxon)?;
            comparisons.push(Comparison {
                key: ComparisonKey {
                    sender: set.sender.clone(),
                    attribute: set.attribute.clone(),
                    subject: set.subject.clone(),
                    baseline: spec.baseline,
                    variant: spec.variant,
                    held: spec.held,
                },
                low_n: result.n_effective < LOW_N_THRESHOLD,
                sample,
                respondents,
                incomplete_respondents: incomplete,
                result,
            });
        }
    }
    let m = comparisons.len();
    let threshold = if m == 0 {
        options.alpha
    } else {
        bonferroni_threshold(options.alpha, m)?
    };
    for c in &mut comparisons {
        c.result = c.result.clone().with_threshold(threshold);
    }
    Ok(ComparisonFamily {
        kind,
        alpha: options.alpha,
        m,
        threshold,
        comparisons,
    })
}

/// Transmission-principle-vs-null and recipient-vs-baseline families, each
/// Bonferroni-corrected by its own size.
pub fn run_comparisons(
    data: &CleanDataset,
    space: &ParameterSpace,
    options: &AnalysisOptions,
) -> Result<(ComparisonFamily, ComparisonFamily), AnalysisError> {
    let baseline = space
        .resolve(Slot::Recipient, &options.baseline_recipient)
        .and_then(|v| space.index_of(Slot::Recipient, v))
        .ok_or_else(|| AnalysisError::UnknownBaseline(options.baseline_recipient.clone()))?;
    let catalog = FlowCatalog::new(space);
    let answers = resolve_answers(data, &catalog)?;
    let sets = group_by_set(space, &catalog, &answers);
    Ok((
        build_family(space, &sets, FamilyKind::TransmissionPrinciple, baseline, options)?,
        build_family(space, &sets, FamilyKind::Recipient, baseline, options)?,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceRow {
    pub family: FamilyKind,
    pub parameter: String,
    pub significant: usize,
    pub total: usize,
    pub percent: f64,
}

/// Share of significant comparisons per varied parameter value.
pub fn significance_percentages(
    space: &ParameterSpace,
    families: &[&ComparisonFamily],
) -> Vec<SignificanceRow> {
    let mut rows = Vec::new();
    for family in families {
        let slot = family.kind.varied_slot();
        let mut tally: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        for c in &family.comparisons {
            let idx = space.index_of(slot, &c.key.variant).unwrap_or(usize::MAX);
            let t = tally.entry(idx).or_default();
            t.1 += 1;
            if c.result.significant {
                t.0 += 1;
            }
        }
        for (idx, (sig, total)) in tally {
            rows.push(SignificanceRow {
                family: family.kind,
                parameter: space.values(slot)[idx].clone(),
                significant: sig,
                total,
                percent: 100.0 * sig as f64 / total as f64,
            });
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub transmission_principle: String,
    pub owners_mean: Option<f64>,
    pub non_owners_mean: Option<f64>,
    pub owners_count: usize,
    pub non_owners_count: usize,
    /// Owners minus non-owners; `None` when either group is empty.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupDelta {
    pub question_id: String,
    pub owners: usize,
    pub non_owners: usize,
    /// Respondents answering "I don't know" or not answering; left out.
    pub omitted: usize,
    pub rows: Vec<DeltaRow>,
}

/// Per-principle mean score of device owners minus non-owners.
pub fn ownership_deltas(
    data: &CleanDataset,
    space: &ParameterSpace,
) -> Result<SubgroupDelta, AnalysisError> {
    let catalog = FlowCatalog::new(space);
    if data.retained.is_empty() {
        return Err(AnalysisError::EmptyDataset);
    }
    let principles = space.transmission_principles();
    let mut owners = vec![Accumulator::default(); principles.len()];
    let mut non_owners = vec![Accumulator::default(); principles.len()];
    let (mut n_own, mut n_non, mut omitted) = (0, 0, 0);
    for record in &data.retained {
        let group = record
            .demographics
            .get(OWNERSHIP_QUESTION_ID)
            .and_then(|o| Ownership::from_option(o));
        let accs = match group {
            Some(Ownership::Owner) => {
                n_own += 1;
                &mut owners
            }
            Some(Ownership::NonOwner) => {
                n_non += 1;
                &mut non_owners
            }
            _ => {
                omitted += 1;
                continue;
            }
        };
        for (id, label) in &record.answers {
            let flow = catalog
                .get(id)
                .ok_or_else(|| AnalysisError::UnknownFlow(id.to_string()))?;
            let tp = space
                .index_of(Slot::TransmissionPrinciple, &flow.transmission_principle)
                .unwrap();
            accs[tp].push(label.value());
        }
    }
    let mean = |a: &Accumulator| (!a.values.is_empty()).then(|| a.mean());
    let rows = principles
        .iter()
        .enumerate()
        .map(|(i, tp)| {
            let o = mean(&owners[i]);
            let n = mean(&non_owners[i]);
            DeltaRow {
                transmission_principle: tp.clone(),
                owners_mean: o,
                non_owners_mean: n,
                owners_count: owners[i].values.len(),
                non_owners_count: non_owners[i].values.len(),
                delta: o.zip(n).map(|(o, n)| o - n),
            }
        })
        .collect();
    Ok(SubgroupDelta {
        question_id: OWNERSHIP_QUESTION_ID.to_string(),
        owners: n_own,
        non_owners: n_non,
        omitted,
        rows,
    })
}

/// Counts carried into the summary.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub ingested: usize,
    pub ingest_rejected: usize,
    pub attention_failed: usize,
    pub retained: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub options: AnalysisOptions,
    pub dataset: DatasetSummary,
    pub recipient_tp: AcceptabilityTable,
    pub sender_attribute: AcceptabilityTable,
    pub tp_family: ComparisonFamily,
    pub recipient_family: ComparisonFamily,
    pub significance: Vec<SignificanceRow>,
    pub ownership: SubgroupDelta,
}

/// Full pipeline after filtering.
pub fn analyze(
    data: &CleanDataset,
    space: &ParameterSpace,
    options: &AnalysisOptions,
    ingest_rejected: usize,
) -> Result<AnalysisReport, AnalysisError> {
    let (recipient_tp, sender_attribute) = acceptability_tables(data, space)?;
    let (tp_family, recipient_family) = run_comparisons(data, space, options)?;
    let significance = significance_percentages(space, &[&tp_family, &recipient_family]);
    let ownership = ownership_deltas(data, space)?;
    Ok(AnalysisReport {
        options: options.clone(),
        dataset: DatasetSummary {
            ingested: data.input_count() + ingest_rejected,
            ingest_rejected,
            attention_failed: data.rejected.len(),
            retained: data.retained.len(),
        },
        recipient_tp,
        sender_attribute,
        tp_family,
        recipient_family,
        significance,
        ownership,
    })
}

/// Bonferroni threshold truncated to one significant figure, the way such
/// thresholds are usually quoted (0.05/576 -> 0.00008).
pub fn quoted_threshold(threshold: f64) -> f64 {
    if threshold <= 0.0 || !threshold.is_finite() {
        return threshold;
    }
    let exponent = threshold.log10().floor();
    let scale = 10f64.powf(exponent);
    let digit = (threshold / scale + 1e-9).floor();
    // Round-trip through a decimal string to drop binary noise.
    format!("{:.*}", (-exponent) as usize, digit * scale)
        .parse()
        .unwrap_or(digit * scale)
}

// ---------------------------------------------------------------------------
// Report bundle

pub const FILE_RECIPIENT_TP: &str = "acceptability_recipient_tp.csv";
pub const FILE_SENDER_ATTRIBUTE: &str = "acceptability_sender_attribute.csv";
pub const FILE_TESTS_TP: &str = "tests_tp.json";
pub const FILE_TESTS_RECIPIENT: &str = "tests_recipient.json";
pub const FILE_SIGNIFICANCE: &str = "significance_percentages.csv";
pub const FILE_OWNERSHIP: &str = "ownership_deltas.csv";
pub const FILE_SUMMARY: &str = "summary.md";

pub const REPORT_FILES: [&str; 7] = [
    FILE_RECIPIENT_TP,
    FILE_SENDER_ATTRIBUTE,
    FILE_TESTS_TP,
    FILE_TESTS_RECIPIENT,
    FILE_SIGNIFICANCE,
    FILE_OWNERSHIP,
    FILE_SUMMARY,
];

/// JSON Schema for the `tests_*.json` documents.
pub const REPORT_SCHEMA: &str = include_str!("../data/report.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestsDocument {
    pub schema_version: String,
    pub family: FamilyKind,
    pub alpha: f64,
    pub m: usize,
    pub threshold: f64,
    pub threshold_quoted: f64,
    pub granularity: Granularity,
    pub zero_method: ZeroMethod,
    pub exact_cutoff: usize,
    pub note: Option<String>,
    pub comparisons: Vec<TestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestEntry {
    pub sender: String,
    pub attribute: String,
    pub subject: String,
    pub baseline: String,
    pub variant: String,
    pub held: Option<String>,
    pub n_pairs: usize,
    pub respondents: usize,
    pub incomplete_respondents: usize,
    pub n_effective: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub method: String,
    pub threshold: f64,
    pub significant: bool,
    pub low_n: bool,
    pub baseline_mean: f64,
    pub variant_mean: f64,
}

pub fn tests_document(family: &ComparisonFamily, options: &AnalysisOptions) -> TestsDocument {
    TestsDocument {
        schema_version: REPORT_SCHEMA_VERSION.to_string(),
        family: family.kind,
        alpha: family.alpha,
        m: family.m,
        threshold: family.threshold,
        threshold_quoted: quoted_threshold(family.threshold),
        granularity: options.granularity,
        zero_method: options.zero_method,
        exact_cutoff: options.exact_cutoff,
        note: family.comparisons.is_empty().then(|| "no comparisons".to_string()),
        comparisons: family
            .comparisons
            .iter()
            .map(|c| TestEntry {
                sender: c.key.sender.clone(),
                attribute: c.key.attribute.clone(),
                subject: c.key.subject.clone(),
                baseline: c.key.baseline.clone(),
                variant: c.key.variant.clone(),
                held: c.key.held.clone(),
                n_pairs: c.sample.len(),
                respondents: c.respondents,
                incomplete_respondents: c.incomplete_respondents,
                n_effective: c.result.n_effective,
                statistic: c.result.statistic,
                p_value: c.result.p_value,
                method: c.result.method.to_string(),
                threshold: c.result.corrected_threshold,
                significant: c.result.significant,
                low_n: c.low_n,
                baseline_mean: c.baseline_mean(),
                variant_mean: c.variant_mean(),
            })
            .collect(),
    }
}

fn csv_bytes(rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn fmt_value(v: f64) -> String {
    format!("{v:.6}")
}

fn table_csv(space: &ParameterSpace, table: &AcceptabilityTable, statistic: CellStatistic) -> Vec<u8> {
    let mut rows = Vec::new();
    let mut header = vec![format!("{}\\{}", table.row_slot, table.column_slot)];
    header.extend(table.columns.iter().map(|c| space.display(c)));
    header.push("row_marginal".into());
    header.push("row_count".into());
    rows.push(header);
    for (i, r) in table.rows.iter().enumerate() {
        let mut line = vec![space.display(r)];
        line.extend(table.cells[i].iter().map(|c| {
            c.as_ref()
                .map(|c| fmt_value(c.value(statistic)))
                .unwrap_or_default()
        }));
        line.push(fmt_value(table.row_marginals[i].value(statistic)));
        line.push(table.row_marginals[i].count.to_string());
        rows.push(line);
    }
    let mut footer = vec!["column_marginal".to_string()];
    footer.extend(table.column_marginals.iter().map(|c| fmt_value(c.value(statistic))));
    footer.extend([String::new(), String::new()]);
    rows.push(footer);
    let mut counts = vec!["column_count".to_string()];
    counts.extend(table.column_marginals.iter().map(|c| c.count.to_string()));
    counts.extend([String::new(), String::new()]);
    rows.push(counts);
    csv_bytes(rows)
}

fn significance_csv(space: &ParameterSpace, rows: &[SignificanceRow]) -> Vec<u8> {
    let mut out = vec![vec![
        "family".to_string(),
        "parameter".into(),
        "significant".into(),
        "total".into(),
        "percent".into(),
    ]];
    for r in rows {
        out.push(vec![
            serde_json::to_value(r.family).unwrap().as_str().unwrap().to_string(),
            space.display(&r.parameter),
            r.significant.to_string(),
            r.total.to_string(),
            format!("{:.2}", r.percent),
        ]);
    }
    csv_bytes(out)
}

fn ownership_csv(space: &ParameterSpace, d: &SubgroupDelta) -> Vec<u8> {
    let opt = |v: Option<f64>| v.map(fmt_value).unwrap_or_else(|| "missing".into());
    let mut out = vec![vec![
        "transmission_principle".to_string(),
        "owners_mean".into(),
        "non_owners_mean".into(),
        "delta".into(),
        "owners_count".into(),
        "non_owners_count".into(),
    ]];
    for r in &d.rows {
        out.push(vec![
            space.display(&r.transmission_principle),
            opt(r.owners_mean),
            opt(r.non_owners_mean),
            opt(r.delta),
            r.owners_count.to_string(),
            r.non_owners_count.to_string(),
        ]);
    }
    csv_bytes(out)
}

fn family_section(out: &mut String, space: &ParameterSpace, title: &str, f: &ComparisonFamily, sig: &[SignificanceRow]) {
    let _ = writeln!(out, "## {title}\n");
    if f.comparisons.is_empty() {
        let _ = writeln!(out, "No comparisons.\n");
        return;
    }
    let _ = writeln!(
        out,
        "m = {}, threshold = {} / {} = {:.6e} (quoted {}), significant: {}\n",
        f.m,
        f.alpha,
        f.m,
        f.threshold,
        quoted_threshold(f.threshold),
        f.significant_count()
    );
    let _ = writeln!(out, "| parameter | significant | total | percent |");
    let _ = writeln!(out, "|---|---|---|---|");
    for r in sig.iter().filter(|r| r.family == f.kind) {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {:.1}% |",
            space.display(&r.parameter),
            r.significant,
            r.total,
            r.percent
        );
    }
    let low = f.comparisons.iter().filter(|c| c.low_n).count();
    if low > 0 {
        let _ = writeln!(out, "\n{low} comparisons have fewer than {LOW_N_THRESHOLD} effective pairs (low-n).");
    }
    out.push('\n');
}

fn extremes(out: &mut String, space: &ParameterSpace, label: &str, values: &[String], marginals: &[Cell]) {
    if values.is_empty() {
        return;
    }
    let last = values.len() - 1;
    let _ = writeln!(
        out,
        "- {label}: highest \"{}\" ({:.2}), lowest \"{}\" ({:.2})",
        space.display(&values[0]),
        marginals[0].mean,
        space.display(&values[last]),
        marginals[last].mean
    );
}

pub fn summary_markdown(space: &ParameterSpace, report: &AnalysisReport) -> String {
    let mut out = String::new();
    let d = &report.dataset;
    let _ = writeln!(out, "# Acceptability analysis\n");
    let _ = writeln!(out, "## Responses\n");
    let _ = writeln!(out, "- submissions read: {}", d.ingested);
    let _ = writeln!(out, "- rejected at ingest: {}", d.ingest_rejected);
    let _ = writeln!(out, "- failed attention check: {}", d.attention_failed);
    let _ = writeln!(out, "- retained: {}\n", d.retained);

    let _ = writeln!(out, "## Average acceptability\n");
    let t = &report.recipient_tp;
    extremes(&mut out, space, "recipient", &t.rows, &t.row_marginals);
    extremes(&mut out, space, "transmission principle", &t.columns, &t.column_marginals);
    let s = &report.sender_attribute;
    extremes(&mut out, space, "sender", &s.rows, &s.row_marginals);
    extremes(&mut out, space, "attribute", &s.columns, &s.column_marginals);
    out.push('\n');

    family_section(&mut out, space, "Transmission principle vs null", &report.tp_family, &report.significance);
    family_section(
        &mut out,
        space,
        &format!("Recipient vs \"{}\"", space.display(&report.options.baseline_recipient)),
        &report.recipient_family,
        &report.significance,
    );

    let o = &report.ownership;
    let _ = writeln!(out, "## Device ownership\n");
    let _ = writeln!(
        out,
        "owners: {}, non-owners: {}, omitted: {}\n",
        o.owners, o.non_owners, o.omitted
    );
    let _ = writeln!(out, "| transmission principle | delta (owners - non-owners) |");
    let _ = writeln!(out, "|---|---|");
    for r in &o.rows {
        let delta = r.delta.map(|v| format!("{v:+.3}")).unwrap_or_else(|| "missing".into());
        let _ = writeln!(out, "| {} | {} |", space.display(&r.transmission_principle), delta);
    }
    out
}

/// Write the seven report files into `dir` (created if absent).
pub fn emit_report(space: &ParameterSpace, report: &AnalysisReport, dir: &Path) -> Result<(), AnalysisError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| AnalysisError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let json = |f: &ComparisonFamily| {
        let mut s = serde_json::to_string_pretty(&tests_document(f, &report.options)).expect("serialisable");
        s.push('\n');
        s.into_bytes()
    };
    let files: [(&str, Vec<u8>); 7] = [
        (FILE_RECIPIENT_TP, table_csv(space, &report.recipient_tp, report.options.statistic)),
        (FILE_SENDER_ATTRIBUTE, table_csv(space, &report.sender_attribute, report.options.statistic)),
        (FILE_TESTS_TP, json(&report.tp_family)),
        (FILE_TESTS_RECIPIENT, json(&report.recipient_family)),
        (FILE_SIGNIFICANCE, significance_csv(space, &report.significance)),
        (FILE_OWNERSHIP, ownership_csv(space, &report.ownership)),
        (FILE_SUMMARY, summary_markdown(space, report).into_bytes()),
    ];
    for (name, bytes) in files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(io(&path))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likert::Likert;
    use crate::responses::{filter_attention, ResponseRecord};

    fn space() -> ParameterSpace {
        crate::flowspace::smart_home_space()
    }

    fn record(id: &str, answers: Vec<(FlowId, Likert)>) -> ResponseRecord {
        ResponseRecord {
            respondent_id: id.into(),
            survey_id: "s".into(),
            set_id: "set-01".into(),
            started_at: 0,
            finished_at: 1,
            answers: answers.into_iter().collect(),
            attention_answer: Likert::SomewhatAcceptable,
            demographics: BTreeMap::new(),
        }
    }

    #[test]
    fn single_neutral_answer() {
        let space = space();
        let flow = enumerate_flows(&space).remove(0);
        let data = filter_attention(vec![record("r", vec![(flow.flow_id.clone(), Likert::Neutral)])]);
        let (rt, sa) = acceptability_tables(&data, &space).unwrap();
        assert_eq!(rt.cell(&flow.recipient, &flow.transmission_principle).unwrap().mean, 0.0);
        assert_eq!(sa.cell(&flow.sender, &flow.attribute).unwrap().mean, 0.0);
        assert_eq!(rt.non_empty_cells().count(), 1);
        assert_eq!(sa.non_empty_cells().count(), 1);
    }

    #[test]
    fn symmetric_answers_average_to_zero() {
        let space = space();
        let flow = enumerate_flows(&space).remove(0);
        let recs = Likert::COLUMNS
            .iter()
            .enumerate()
            .map(|(i, l)| record(&format!("r{i}"), vec![(flow.flow_id.clone(), *l)]))
            .collect();
        let (rt, _) = acceptability_tables(&filter_attention(recs), &space).unwrap();
        let cell = rt.cell(&flow.recipient, &flow.transmission_principle).unwrap();
        assert_eq!(cell.mean, 0.0);
        assert_eq!(cell.median, 0.0);
        assert_eq!(cell.count, 5);
    }

    #[test]
    fn empty_dataset_is_refused() {
        let space = space();
        let data = filter_attention(vec![]);
        assert!(matches!(acceptability_tables(&data, &space), Err(AnalysisError::EmptyDataset)));
        assert!(matches!(
            run_comparisons(&data, &space, &AnalysisOptions::default()),
            Err(AnalysisError::EmptyDataset)
        ));
    }

    #[test]
    fn identical_pairs_are_never_significant() {
        let space = space();
        let flows = enumerate_flows(&space);
        let set: Vec<_> = flows.iter().filter(|f| f.sender == flows[0].sender && f.attribute == flows[0].attribute).collect();
        let recs = (0..10)
            .map(|i| record(&format!("r{i}"), set.iter().map(|f| (f.flow_id.clone(), Likert::SomewhatUnacceptable)).collect()))
            .collect();
        let (tp, rec) = run_comparisons(&filter_attention(recs), &space, &AnalysisOptions::default()).unwrap();
        assert_eq!(tp.m, 12);
        assert_eq!(rec.m, 7);
        assert_eq!(tp.significant_count() + rec.significant_count(), 0);
        assert!(tp.comparisons.iter().all(|c| c.result.method == crate::stats::TestMethod::Degenerate));
    }

    #[test]
    fn per_flow_granularity_splits_comparisons() {
        let space = space();
        let flows = enumerate_flows(&space);
        let set: Vec<_> = flows.iter().filter(|f| f.sender == flows[0].sender && f.attribute == flows[0].attribute).collect();
        let recs = (0..3)
            .map(|i| record(&format!("r{i}"), set.iter().map(|f| (f.flow_id.clone(), Likert::Neutral)).collect()))
            .collect();
        let opts = AnalysisOptions { granularity: Granularity::PerFlow, ..Default::default() };
        let (tp, _) = run_comparisons(&filter_attention(recs), &space, &opts).unwrap();
        // One comparison per conditional (recipient, principle) cell of the set.
        assert_eq!(tp.m, 72);
        assert!(tp.comparisons.iter().all(|c| c.low_n));
    }

    #[test]
    fn unknown_baseline_is_reported() {
        let space = space();
        let flow = enumerate_flows(&space).remove(0);
        let data = filter_attention(vec![record("r", vec![(flow.flow_id, Likert::Neutral)])]);
        let opts = AnalysisOptions { baseline_recipient: "a stranger".into(), ..Default::default() };
        assert!(matches!(run_comparisons(&data, &space, &opts), Err(AnalysisError::UnknownBaseline(_))));
    }

    #[test]
    fn quoted_thresholds() {
        assert_eq!(quoted_threshold(0.05 / 576.0), 0.00008);
        assert_eq!(quoted_threshold(0.05 / 336.0), 0.0001);
        assert_eq!(quoted_threshold(0.05), 0.05);
    }

    #[test]
    fn ownership_groups() {
        let space = space();
        let flows = enumerate_flows(&space);
        let mut a = record("a", vec![(flows[1].flow_id.clone(), Likert::CompletelyAcceptable)]);
        a.demographics.insert(OWNERSHIP_QUESTION_ID.into(), Ownership::Owner.option().into());
        let mut b = record("b", vec![(flows[1].flow_id.clone(), Likert::Neutral)]);
        b.demographics.insert(OWNERSHIP_QUESTION_ID.into(), Ownership::NonOwner.option().into());
        let mut c = record("c", vec![(flows[1].flow_id.clone(), Likert::CompletelyUnacceptable)]);
        c.demographics.insert(OWNERSHIP_QUESTION_ID.into(), Ownership::Unknown.option().into());
        let d = ownership_deltas(&filter_attention(vec![a.clone(), b, c]), &space).unwrap();
        assert_eq!((d.owners, d.non_owners, d.omitted), (1, 1, 1));
        let row = d.rows.iter().find(|r| r.transmission_principle == flows[1].transmission_principle).unwrap();
        assert_eq!(row.delta, Some(2.0));

        let only = ownership_deltas(&filter_attention(vec![a]), &space).unwrap();
        assert!(only.rows.iter().all(|r| r.delta.is_none()));
    }
}
