use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, ValueEnum};

use cisurvey_core::analysis::{self, AnalysisOptions, CellStatistic, Granularity};
use cisurvey_core::demographics::default_bank;
use cisurvey_core::flowspace::{
    enumerate_flows, load_parameter_space, partition_by_sender_attribute, FlowSet, ParameterSpace,
};
use cisurvey_core::questionnaire::{build_survey, export_survey, import_survey, SurveyDefinition, DEFAULT_OVERVIEW};
use cisurvey_core::responses::{filter_attention, ingest, parse_csv, parse_json, write_csv, SurveyIndex};
use cisurvey_core::simulate::{simulate_responses, NormModel, SimulateError};
use cisurvey_core::stats::ZeroMethod;

use crate::manifest::RunManifest;
use crate::{Classify, Failure};

pub const CONFIG_FILE: &str = "config.json";
pub const FLOWS_FILE: &str = "flows.csv";
pub const SURVEYS_DIR: &str = "surveys";
pub const MANIFEST_FILE: &str = "manifest.json";

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).with_context(|| format!("reading {}", path.display())).runtime()
}

fn read_text(path: &Path) -> Result<String, Failure> {
    let bytes = read(path)?;
    String::from_utf8(bytes)
        .with_context(|| format!("{} is not UTF-8", path.display()))
        .data()
}

/// Sibling scratch directory that is renamed onto `target` once complete.
fn scratch_dir(target: &Path) -> PathBuf {
    let name = target.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    target.with_file_name(format!(".{name}.tmp-{}", std::process::id()))
}

fn publish_dir(scratch: &Path, target: &Path, force: bool) -> Result<(), Failure> {
    if target.exists() {
        let empty = target.is_dir() && fs::read_dir(target).map(|mut d| d.next().is_none()).unwrap_or(false);
        if !(force || empty) {
            return Err(anyhow!("{} already exists (use --force to replace it)", target.display())).runtime();
        }
        fs::remove_dir_all(target).with_context(|| format!("removing {}", target.display())).runtime()?;
    }
    fs::rename(scratch, target)
        .with_context(|| format!("moving output into {}", target.display()))
        .runtime()
}

fn write_file(dir: &Path, relative: &str, bytes: &[u8], manifest: &mut RunManifest) -> Result<(), Failure> {
    let path = dir.join(relative);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display())).runtime()?;
    }
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display())).runtime()?;
    manifest.output(relative, bytes);
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// Parameter-space configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Survey variants per flow set, seeded `seed`, `seed + 1`, ...
    #[arg(long, default_value_t = 1)]
    pub variants: u64,
    /// Replace an existing output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerateSummary {
    pub flows: usize,
    pub sets: usize,
    pub surveys: usize,
}

fn flows_csv(space: &ParameterSpace, sets: &[FlowSet]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "flow_id",
        "set_id",
        "sender",
        "recipient",
        "attribute",
        "subject",
        "transmission_principle",
        "sentence",
    ])
    .expect("in-memory write");
    for set in sets {
        for f in &set.flows {
            let render = |v: &str| cisurvey_core::flowspace::substitute_subject(v, &f.subject);
            let tp = if space.is_null_principle(&f.transmission_principle) {
                String::new()
            } else {
                render(&f.transmission_principle)
            };
            w.write_record([
                f.flow_id.as_str(),
                &set.set_id,
                &render(&f.sender),
                &render(&f.recipient),
                &render(&f.attribute),
                &f.subject,
                &tp,
                &f.sentence,
            ])
            .expect("in-memory write");
        }
    }
    w.into_inner().expect("in-memory flush")
}

pub fn generate(args: &GenerateArgs) -> Result<GenerateSummary, Failure> {
    if args.variants == 0 {
        return Err(anyhow!("--variants must be at least 1")).config();
    }
    let document = read_text(&args.config)?;
    let space = load_parameter_space(&document)
        .with_context(|| format!("invalid configuration {}", args.config.display()))
        .config()?;
    let flows = enumerate_flows(&space);
    let sets = partition_by_sender_attribute(&flows);
    let bank = default_bank();
    let mut surveys = Vec::new();
    for set in &sets {
        for k in 0..args.variants {
            let seed = args.seed.checked_add(k).ok_or_else(|| anyhow!("seed overflow")).config()?;
            surveys.push(
                build_survey(&space, set, seed, &bank, DEFAULT_OVERVIEW)
                    .with_context(|| format!("building survey for {}", set.set_id))
                    .config()?,
            );
        }
    }

    let mut manifest = RunManifest::new("generate", &args.out, Some(args.seed))
        .parameter("config", args.config.display())
        .parameter("seed", args.seed)
        .parameter("variants", args.variants);
    manifest.input(&args.config, document.as_bytes());

    let scratch = scratch_dir(&args.out);
    let _ = fs::remove_dir_all(&scratch);
    let result = (|| {
        let mut normalized = serde_json::to_string_pretty(&space.to_document()).expect("config serialises");
        normalized.push('\n');
        write_file(&scratch, CONFIG_FILE, normalized.as_bytes(), &mut manifest)?;
        write_file(&scratch, FLOWS_FILE, &flows_csv(&space, &sets), &mut manifest)?;
        for def in &surveys {
            let rel = format!("{SURVEYS_DIR}/{}.json", def.survey_id);
            write_file(&scratch, &rel, export_survey(def).as_bytes(), &mut manifest)?;
        }
        manifest
            .write(&scratch.join(MANIFEST_FILE))
            .context("writing manifest")
            .runtime()?;
        publish_dir(&scratch, &args.out, args.force)
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&scratch);
    }
    result?;
    tracing::info!(flows = flows.len(), sets = sets.len(), surveys = surveys.len(), "generated");
    Ok(GenerateSummary { flows: flows.len(), sets: sets.len(), surveys: surveys.len() })
}

/// The parameter space and survey definitions written by `generate`.
pub struct Definitions {
    pub space: ParameterSpace,
    pub surveys: Vec<SurveyDefinition>,
}

pub fn load_definitions(dir: &Path) -> Result<Definitions, Failure> {
    let config_path = dir.join(CONFIG_FILE);
    let space = load_parameter_space(&read_text(&config_path)?)
        .with_context(|| format!("invalid configuration {}", config_path.display()))
        .config()?;
    let surveys_dir = dir.join(SURVEYS_DIR);
    let mut paths: Vec<PathBuf> = fs::read_dir(&surveys_dir)
        .with_context(|| format!("reading {}", surveys_dir.display()))
        .runtime()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(anyhow!("no survey definitions in {}", surveys_dir.display())).data();
    }
    let sets: BTreeMap<String, FlowSet> = partition_by_sender_attribute(&enumerate_flows(&space))
        .into_iter()
        .map(|s| (s.set_id.clone(), s))
        .collect();
    let mut surveys = Vec::with_capacity(paths.len());
    for path in paths {
        let def = import_survey(&read_text(&path)?)
            .with_context(|| format!("invalid survey definition {}", path.display()))
            .data()?;
        let set = sets
            .get(&def.set_id)
            .ok_or_else(|| anyhow!("{}: set {} is not in the configuration", path.display(), def.set_id))
            .data()?;
        def.validate_against(&space, set)
            .with_context(|| format!("{} does not match the configuration", path.display()))
            .data()?;
        surveys.push(def);
    }
    Ok(Definitions { space, surveys })
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Norm model (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Directory written by `generate`.
    #[arg(long)]
    pub definitions: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    /// Response CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

/// Manifest location for a single-file output.
pub fn sidecar_manifest(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

pub fn simulate(args: &SimulateArgs) -> Result<usize, Failure> {
    let model_doc = read_text(&args.model)?;
    let model = NormModel::from_json(&model_doc)
        .with_context(|| format!("invalid norm model {}", args.model.display()))
        .config()?;
    let defs = load_definitions(&args.definitions)?;
    let records = if args.n == 0 {
        Vec::new()
    } else {
        match simulate_responses(&model, &defs.space, &defs.surveys, args.n, args.seed) {
            Ok(r) => r,
            Err(e @ (SimulateError::Model(_) | SimulateError::Json(_) | SimulateError::UnknownValue { .. })) => {
                return Err(e).with_context(|| format!("invalid norm model {}", args.model.display())).config();
            }
            Err(e) => return Err(e).context("simulation failed").data(),
        }
    };
    let mut bytes = Vec::new();
    write_csv(&mut bytes, &records).context("encoding responses").runtime()?;

    let mut manifest = RunManifest::new("simulate", &args.out, Some(args.seed))
        .parameter("model", args.model.display())
        .parameter("definitions", args.definitions.display())
        .parameter("n", args.n)
        .parameter("seed", args.seed);
    manifest.input(&args.model, model_doc.as_bytes());
    manifest.input(&args.definitions.join(MANIFEST_FILE), &fs::read(args.definitions.join(MANIFEST_FILE)).unwrap_or_default());
    manifest.output(&args.out.file_name().unwrap_or_default().to_string_lossy(), &bytes);

    let tmp = args.out.with_file_name(format!(
        ".{}.tmp-{}",
        args.out.file_name().unwrap_or_default().to_string_lossy(),
        std::process::id()
    ));
    fs::write(&tmp, &bytes).with_context(|| format!("writing {}", tmp.display())).runtime()?;
    fs::rename(&tmp, &args.out).with_context(|| format!("writing {}", args.out.display())).runtime()?;
    manifest.write(&sidecar_manifest(&args.out)).context("writing manifest").runtime()?;
    tracing::info!(respondents = records.len(), "simulated");
    Ok(records.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GranularityArg {
    PerSet,
    PerFlow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ZeroMethodArg {
    Wilcox,
    Pratt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatisticArg {
    Mean,
    Median,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// Response CSV (or a JSON array of response records).
    #[arg(long)]
    pub responses: PathBuf,
    #[arg(long)]
    pub definitions: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Reference recipient for the recipient comparisons.
    #[arg(long, default_value = analysis::DEFAULT_BASELINE_RECIPIENT)]
    pub baseline: String,
    #[arg(long, value_enum, default_value_t = GranularityArg::PerSet)]
    pub granularity: GranularityArg,
    #[arg(long, value_enum, default_value_t = ZeroMethodArg::Wilcox)]
    pub zero_method: ZeroMethodArg,
    /// Largest effective sample size that gets an exact p-value.
    #[arg(long, default_value_t = cisurvey_core::stats::DEFAULT_EXACT_CUTOFF)]
    pub exact_cutoff: usize,
    /// Cell statistic written to the acceptability tables.
    #[arg(long, value_enum, default_value_t = StatisticArg::Mean)]
    pub statistic: StatisticArg,
    /// Replace an existing output directory.
    #[arg(long)]
    pub force: bool,
}

impl AnalyzeArgs {
    pub fn options(&self) -> AnalysisOptions {
        AnalysisOptions {
            alpha: self.alpha,
            baseline_recipient: self.baseline.clone(),
            granularity: match self.granularity {
                GranularityArg::PerSet => Granularity::PerSet,
                GranularityArg::PerFlow => Granularity::PerFlow,
            },
            exact_cutoff: self.exact_cutoff,
            zero_method: match self.zero_method {
                ZeroMethodArg::Wilcox => ZeroMethod::Wilcox,
                ZeroMethodArg::Pratt => ZeroMethod::Pratt,
            },
            statistic: match self.statistic {
                StatisticArg::Mean => CellStatistic::Mean,
                StatisticArg::Median => CellStatistic::Median,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalyzeSummary {
    pub ingest_rejected: usize,
    pub attention_failed: usize,
    pub retained: usize,
    pub tp_m: usize,
    pub recipient_m: usize,
}

pub fn analyze(args: &AnalyzeArgs) -> Result<AnalyzeSummary, Failure> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(anyhow!("--alpha must be in (0, 1)")).config();
    }
    if args.exact_cutoff > cisurvey_core::stats::MAX_EXACT_CUTOFF {
        return Err(anyhow!("--exact-cutoff must be at most {}", cisurvey_core::stats::MAX_EXACT_CUTOFF)).config();
    }
    let defs = load_definitions(&args.definitions)?;
    let raw = read(&args.responses)?;
    let parsed = if args.responses.extension().is_some_and(|e| e == "json") {
        let text = String::from_utf8(raw.clone()).context("responses are not UTF-8").data()?;
        parse_json(&text)
    } else {
        parse_csv(raw.as_slice())
    }
    .with_context(|| format!("reading responses {}", args.responses.display()))
    .data()?;
    let index = SurveyIndex::new(defs.surveys.iter().cloned());
    let ingested = ingest(parsed, &index);
    for r in &ingested.rejected {
        tracing::warn!(respondent = %r.respondent_id, survey = %r.survey_id, issue = %r.issue, "submission rejected");
    }
    let clean = filter_attention(ingested.records);
    if clean.retained.is_empty() {
        return Err(anyhow!(
            "no responses retained ({} rejected at ingest, {} failed the attention check)",
            ingested.rejected.len(),
            clean.rejected.len()
        ))
        .data();
    }
    let options = args.options();
    let report = analysis::analyze(&clean, &defs.space, &options, ingested.rejected.len())
        .context("analysis failed")
        .data()?;

    let mut manifest = RunManifest::new("analyze", &args.out, None)
        .parameter("responses", args.responses.display())
        .parameter("definitions", args.definitions.display())
        .parameter("alpha", args.alpha)
        .parameter("baseline", &args.baseline)
        .parameter("granularity", format!("{:?}", options.granularity))
        .parameter("zero_method", format!("{:?}", options.zero_method))
        .parameter("exact_cutoff", args.exact_cutoff)
        .parameter("statistic", format!("{:?}", options.statistic));
    manifest.input(&args.responses, &raw);

    let scratch = scratch_dir(&args.out);
    let _ = fs::remove_dir_all(&scratch);
    let result = (|| {
        analysis::emit_report(&defs.space, &report, &scratch).context("writing report").runtime()?;
        for name in analysis::REPORT_FILES {
            let bytes = read(&scratch.join(name))?;
            manifest.output(name, &bytes);
        }
        manifest.write(&scratch.join(MANIFEST_FILE)).context("writing manifest").runtime()?;
        publish_dir(&scratch, &args.out, args.force)
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&scratch);
    }
    result?;
    Ok(AnalyzeSummary {
        ingest_rejected: report.dataset.ingest_rejected,
        attention_failed: report.dataset.attention_failed,
        retained: report.dataset.retained,
        tp_m: report.tp_family.m,
        recipient_m: report.recipient_family.m,
    })
}
