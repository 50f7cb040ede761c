//! Survey service: balanced assignment, definition lookup and an append-only
//! response log in the response CSV format.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use tokio::net::TcpListener;
use tokio::sync::Mutex;

use cisurvey_core::questionnaire::{AssignmentMode, AssignmentPlan, SurveyDefinition};
use cisurvey_core::responses::{parse_csv, record_rows, write_csv_header, RecordIssue, ResponseRecord, SurveyIndex};

const INDEX_HTML: &str = "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>Survey</title></head>\n<body><main id=\"runner\"><p>The survey runner bundle is served from this path.</p></main></body></html>\n";

/// Mutable service state; every change goes through the one mutex.
struct Writer {
    plan: AssignmentPlan,
    rng: ChaCha8Rng,
    log: File,
    seen: BTreeSet<(String, String)>,
}

pub struct AppState {
    index: SurveyIndex,
    by_set: BTreeMap<String, Vec<String>>,
    writer: Mutex<Writer>,
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub log: PathBuf,
    pub seed: u64,
    pub mode: AssignmentMode,
}

impl AppState {
    /// Open (or create) the response log and replay it so duplicates and
    /// completions survive a restart.
    pub fn open(surveys: Vec<SurveyDefinition>, options: &ServeOptions) -> anyhow::Result<Arc<Self>> {
        let mut by_set: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for def in &surveys {
            by_set.entry(def.set_id.clone()).or_default().push(def.survey_id.clone());
        }
        anyhow::ensure!(!by_set.is_empty(), "no survey definitions to serve");
        let mut plan = AssignmentPlan::new(by_set.keys().cloned(), options.mode);
        let mut seen = BTreeSet::new();
        if options.log.exists() && std::fs::metadata(&options.log)?.len() > 0 {
            let existing = File::open(&options.log).with_context(|| format!("opening {}", options.log.display()))?;
            for rec in parse_csv(existing).with_context(|| format!("replaying {}", options.log.display()))?
                .into_iter()
                .flatten()
            {
                if seen.insert((rec.respondent_id.clone(), rec.survey_id.clone())) && by_set.contains_key(&rec.set_id) {
                    plan.record_completion(&rec.set_id)?;
                }
            }
        } else {
            let mut f = File::create(&options.log).with_context(|| format!("creating {}", options.log.display()))?;
            write_csv_header(&mut f)?;
            f.sync_data()?;
        }
        let log = OpenOptions::new()
            .append(true)
            .open(&options.log)
            .with_context(|| format!("opening {}", options.log.display()))?;
        Ok(Arc::new(AppState {
            index: SurveyIndex::new(surveys),
            by_set,
            writer: Mutex::new(Writer {
                plan,
                rng: ChaCha8Rng::seed_from_u64(options.seed),
                log,
                seen,
            }),
        }))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/", get(|| async { Html(INDEX_HTML) }))
        .route("/healthz", get(|| async { Json(json!({"status": "ok"})) }))
        .route("/api/assignment", get(assignment))
        .route("/api/survey/{survey_id}", get(survey))
        .route("/api/response", post(response))
        .with_state(state)
}

fn error(status: StatusCode, body: serde_json::Value) -> Response {
    (status, Json(body)).into_response()
}

async fn assignment(State(state): State<Arc<AppState>>) -> Response {
    let mut w = state.writer.lock().await;
    let w = &mut *w;
    let set_id = match w.plan.assign(&mut w.rng) {
        Ok(s) => s,
        Err(e) => return error(StatusCode::SERVICE_UNAVAILABLE, json!({"reason": "no_sets", "detail": e.to_string()})),
    };
    let survey_id = state.by_set[&set_id].choose(&mut w.rng).expect("set has surveys").clone();
    let definition = state.index.get(&survey_id).expect("indexed");
    Json(json!({"survey_id": survey_id, "definition": definition})).into_response()
}

async fn survey(State(state): State<Arc<AppState>>, UrlPath(survey_id): UrlPath<String>) -> Response {
    match state.index.get(&survey_id) {
        Some(def) => Json(def).into_response(),
        None => error(StatusCode::NOT_FOUND, json!({"reason": "unknown_survey", "survey_id": survey_id})),
    }
}

async fn response(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let record: ResponseRecord = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, json!({"reason": "malformed", "detail": e.to_string()})),
    };
    if let Err(issue) = state.index.validate(&record) {
        let status = match issue {
            RecordIssue::UnknownSurvey { .. } => StatusCode::NOT_FOUND,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        return error(status, serde_json::to_value(&issue).expect("issue serialises"));
    }
    let rows = match record_rows(&record) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, json!({"reason": "unencodable", "detail": e.to_string()})),
    };
    let mut w = state.writer.lock().await;
    let key = (record.respondent_id.clone(), record.survey_id.clone());
    if w.seen.contains(&key) {
        return error(
            StatusCode::CONFLICT,
            serde_json::to_value(RecordIssue::DuplicateRespondent {
                respondent_id: record.respondent_id.clone(),
                survey_id: record.survey_id.clone(),
            })
                .expect("issue serialises"),
        );
    }
    // One write of the whole block keeps submissions contiguous in the log.
    if let Err(e) = w.log.write_all(&rows).and_then(|_| w.log.sync_data()) {
        tracing::error!(error = %e, "response log write failed");
        return error(StatusCode::INTERNAL_SERVER_ERROR, json!({"reason": "log_write_failed"}));
    }
    w.seen.insert(key);
    if let Err(e) = w.plan.record_completion(&record.set_id) {
        tracing::warn!(error = %e, "completion not tallied");
    }
    tracing::info!(respondent = %record.respondent_id, survey = %record.survey_id, "response recorded");
    (
        StatusCode::CREATED,
        Json(json!({"status": "recorded", "respondent_id": record.respondent_id, "survey_id": record.survey_id})),
    )
        .into_response()
}

/// Bind `addr` and serve until the future is dropped or ctrl-c.
pub async fn serve(surveys: Vec<SurveyDefinition>, addr: &str, options: &ServeOptions) -> anyhow::Result<()> {
    let state = AppState::open(surveys, options)?;
    let listener = TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
    tracing::info!(addr = %listener.local_addr()?, "serving");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .context("server failed")
}

/// Start on an already-bound listener in the background; returns the address.
pub async fn spawn(surveys: Vec<SurveyDefinition>, log: &Path, seed: u64) -> anyhow::Result<SocketAddr> {
    let state = AppState::open(
        surveys,
        &ServeOptions { log: log.to_path_buf(), seed, mode: AssignmentMode::Balanced },
    )?;
    let listener = TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    tokio::spawn(async move {
        let _ = axum::serve(listener, router(state)).await;
    });
    Ok(addr)
}
