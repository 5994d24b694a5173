//! Batch evaluation: load problem records, run the full pipeline under a
//! configuration, score Completion and Choice.

mod report;

pub use report::{ablate, AblationReport, AblationRow, Breakdown, Metric, Report, Row, StepStats};

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::diagram::{load_diagram, DiagramParse};
use crate::disambiguation::{rectify, HeuristicRectifier, PromptStyle, RectificationTrace, RectifyOptions};
use crate::formal::Literal;
use crate::gateway::{build_client, Backend, CannedClient, ClientError, ModelClient, ModelClientConfig};
use crate::reasoner::{
    predict_schedule, predictor_request, solve, Outcome, Schedule, SolveStatus, TheoremLibrary, DEFAULT_BUDGET,
};
use crate::text::{parse_text, ParsedProblem};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("manifest {path}: {msg}")]
    Manifest { path: PathBuf, msg: String },
    #[error("problem {id}: {msg}")]
    Record { id: String, msg: String },
    #[error("model client: {0}")]
    Client(#[from] ClientError),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemRecord {
    pub id: String,
    pub prose: String,
    pub diagram: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<f64>>,
    pub answer: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<String>,
    /// Diagram pixels per unit of length in the problem text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixels_per_unit: Option<f64>,
    /// A known-good theorem order, used to build canned predictor replies.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reference_schedule: Vec<String>,
}

impl ProblemRecord {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| HarnessError::Record { id: self.id.clone(), msg };
        if self.id.is_empty() {
            return Err(bad("empty id".into()));
        }
        if let Some(opts) = &self.options {
            if opts.len() != 4 {
                return Err(bad(format!("expected 4 options, found {}", opts.len())));
            }
            if !opts.iter().any(|o| answers_match(*o, self.answer)) {
                return Err(bad(format!("options do not contain the answer {}", self.answer)));
            }
        }
        Ok(())
    }
}

/// Numeric match used for Completion and Choice: within max(0.01, 1% of gold).
pub fn answers_match(value: f64, gold: f64) -> bool {
    (value - gold).abs() <= f64::max(1e-2, 1e-2 * gold.abs())
}

pub const TOLERANCE_NOTE: &str = "|answer - gold| <= max(0.01, 0.01*|gold|)";
pub const FALLBACK_NOTE: &str = "xoshiro256++ seeded with seed XOR first 8 bytes of sha256(problem id)";

/// Loads a manifest; diagram paths resolve against the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<Vec<ProblemRecord>, HarnessError> {
    let err = |msg: String| HarnessError::Manifest { path: path.to_path_buf(), msg };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let mut records: Vec<ProblemRecord> = serde_path_to_error::deserialize(de).map_err(|e| err(e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut seen = std::collections::BTreeSet::new();
    for r in &mut records {
        r.validate()?;
        if !seen.insert(r.id.clone()) {
            return Err(err(format!("duplicate problem id {}", r.id)));
        }
        if r.diagram.is_relative() {
            r.diagram = base.join(&r.diagram);
        }
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RectifierBackend {
    Http,
    Canned,
    Heuristic,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorBackend {
    Http,
    Canned,
    Traversal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub rectifier: RectifierBackend,
    pub predictor: PredictorBackend,
    pub disambiguation_on: bool,
    pub verifier_on: bool,
    pub predictor_on: bool,
    pub seed: u64,
    pub max_rounds: usize,
    pub budget: usize,
    pub prompt_style: PromptStyle,
    #[serde(skip)]
    pub rectifier_store: Option<PathBuf>,
    #[serde(skip)]
    pub predictor_store: Option<PathBuf>,
    #[serde(skip)]
    pub http: Option<ModelClientConfig>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Hermetic defaults: heuristic rectifier, traversal solving.
    pub fn new(seed: u64) -> RunConfig {
        RunConfig {
            rectifier: RectifierBackend::Heuristic,
            predictor: PredictorBackend::Traversal,
            disambiguation_on: true,
            verifier_on: true,
            predictor_on: true,
            seed,
            max_rounds: 3,
            budget: DEFAULT_BUDGET,
            prompt_style: PromptStyle::Specific,
            rectifier_store: None,
            predictor_store: None,
            http: None,
            out: None,
        }
    }

    fn http_config(&self) -> Result<ModelClientConfig, ClientError> {
        self.http.clone().ok_or_else(|| ClientError::Config("http backend needs --endpoint and --model".into()))
    }

    fn store(&self, path: &Option<PathBuf>, what: &str) -> Result<CannedClient, ClientError> {
        match path {
            Some(p) => CannedClient::load(p),
            None => Err(ClientError::Config(format!("{what} backend needs a reply store"))),
        }
    }

    /// Builds the model clients this configuration needs.
    pub fn clients(&self) -> Result<Clients, ClientError> {
        let rectifier: Box<dyn ModelClient> = match self.rectifier {
            RectifierBackend::Http => build_client(&self.http_config()?, None)?,
            RectifierBackend::Heuristic => Box::new(HeuristicRectifier::new()),
            RectifierBackend::Canned | RectifierBackend::Replay => Box::new(self.store(&self.rectifier_store, "rectifier")?),
        };
        let predictor: Option<Box<dyn ModelClient>> = match (self.predictor_on, self.predictor) {
            (false, _) | (_, PredictorBackend::Traversal) => None,
            (true, PredictorBackend::Http) => Some(build_client(&self.http_config()?, None)?),
            (true, PredictorBackend::Canned) => Some(Box::new(self.store(&self.predictor_store, "predictor")?)),
        };
        Ok(Clients { rectifier, predictor })
    }

    fn rectify_options(&self) -> RectifyOptions {
        RectifyOptions { max_rounds: self.max_rounds, verifier_on: self.verifier_on, style: self.prompt_style }
    }
}

pub struct Clients {
    pub rectifier: Box<dyn ModelClient>,
    pub predictor: Option<Box<dyn ModelClient>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProblemTrace {
    pub propositions: Vec<Literal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Literal>,
    pub unmatched: Vec<String>,
    pub rectification: Vec<RectificationTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Schedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<Outcome>,
    pub errors: Vec<StageError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemResult {
    pub id: String,
    pub question_type: Option<String>,
    pub shape: Option<String>,
    pub gold: f64,
    pub answer: Option<f64>,
    pub completion_hit: bool,
    pub choice_index: Option<usize>,
    pub choice_hit: bool,
    pub choice_fallback: bool,
    pub steps_used: usize,
    pub status: String,
    pub traces: ProblemTrace,
}

/// Uniform pick over four options, reproducible from the seed and problem id.
pub fn fallback_choice(seed: u64, id: &str) -> usize {
    let digest = Sha256::digest(id.as_bytes());
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed ^ u64::from_le_bytes(head));
    rng.random_range(0..4)
}

fn stage_error(trace: &mut ProblemTrace, stage: &str, message: impl ToString) {
    trace.errors.push(StageError { stage: stage.to_string(), message: message.to_string() });
}

/// Parse and (optionally) rectify, recording everything into `trace`.
fn prepare(
    rec: &ProblemRecord,
    d: &DiagramParse,
    cfg: &RunConfig,
    clients: &Clients,
    trace: &mut ProblemTrace,
) -> Option<ParsedProblem> {
    let parsed = match parse_text(&rec.prose) {
        Ok(p) => p,
        Err(e) => {
            stage_error(trace, "parse", e);
            return None;
        }
    };
    trace.unmatched = parsed.significant_unmatched().map(|s| s.text.clone()).collect();
    if !cfg.disambiguation_on {
        return Some(parsed);
    }
    match rectify(&parsed, d, clients.rectifier.as_ref(), &cfg.rectify_options()) {
        Ok((fixed, traces)) => {
            trace.rectification = traces;
            Some(fixed)
        }
        Err(e) => {
            stage_error(trace, "rectify", e);
            Some(parsed)
        }
    }
}

fn run_inner(rec: &ProblemRecord, cfg: &RunConfig, clients: &Clients, trace: &mut ProblemTrace) -> Option<Outcome> {
    let d = match load_diagram(&rec.diagram) {
        Ok(d) => d,
        Err(e) => {
            stage_error(trace, "diagram", e);
            return None;
        }
    };
    let problem = prepare(rec, &d, cfg, clients, trace)?;
    trace.propositions = problem.propositions.clone();
    trace.target = Some(problem.target.clone());
    let library = TheoremLibrary::bundled();
    let schedule = match &clients.predictor {
        Some(c) if !problem.target.term().contains_unknown() => predict_schedule(&problem, &d, library, c.as_ref()),
        _ => Schedule::traversal(),
    };
    trace.schedule = Some(schedule.clone());
    match solve(&problem, &d, &schedule, library, cfg.budget) {
        Ok(o) => Some(o),
        Err(e) => {
            stage_error(trace, "solve", e);
            None
        }
    }
}

/// Runs one problem end to end. Stage failures are recorded in the trace
/// and count as unsolved.
pub fn run_problem(rec: &ProblemRecord, cfg: &RunConfig, clients: &Clients) -> ProblemResult {
    let mut trace = ProblemTrace::default();
    let outcome = match catch_unwind(AssertUnwindSafe(|| {
        let mut t = ProblemTrace::default();
        let o = run_inner(rec, cfg, clients, &mut t);
        (o, t)
    })) {
        Ok((o, t)) => {
            trace = t;
            o
        }
        Err(_) => {
            stage_error(&mut trace, "pipeline", "panicked");
            None
        }
    };
    let answer = outcome.as_ref().and_then(|o| o.answer);
    let completion_hit = answer.is_some_and(|a| answers_match(a, rec.answer));
    let (choice_index, choice_fallback) = match &rec.options {
        None => (None, false),
        Some(opts) => match answer.and_then(|a| opts.iter().position(|o| answers_match(*o, a))) {
            Some(i) => (Some(i), false),
            None => (Some(fallback_choice(cfg.seed, &rec.id)), true),
        },
    };
    let choice_hit = match (&rec.options, choice_index) {
        (Some(opts), Some(i)) => answers_match(opts[i], rec.answer),
        _ => completion_hit,
    };
    let status = match (&outcome, trace.errors.is_empty()) {
        (Some(o), _) => match o.status {
            SolveStatus::Solved => "solved",
            SolveStatus::Unsolved => "unsolved",
            SolveStatus::Inconsistent => "inconsistent",
        },
        (None, _) => "error",
    };
    ProblemResult {
        id: rec.id.clone(),
        question_type: rec.question_type.clone(),
        shape: rec.shape.clone(),
        gold: rec.answer,
        answer,
        completion_hit,
        choice_index,
        choice_hit,
        choice_fallback,
        steps_used: outcome.as_ref().map_or(0, |o| o.steps_used),
        status: status.to_string(),
        traces: {
            trace.solve = outcome;
            trace
        },
    }
}

/// Runs every record concurrently; results come back sorted by id.
pub fn run_records(records: &[ProblemRecord], cfg: &RunConfig, clients: &Clients) -> Vec<ProblemResult> {
    let mut results: Vec<ProblemResult> = records.par_iter().map(|r| run_problem(r, cfg, clients)).collect();
    results.sort_by(|a, b| a.id.cmp(&b.id));
    results
}

pub fn run_batch(manifest: &Path, cfg: &RunConfig) -> Result<(Report, Vec<ProblemResult>), HarnessError> {
    let records = load_manifest(manifest)?;
    let clients = cfg.clients()?;
    let results = run_records(&records, cfg, &clients);
    Ok((Report::new(cfg, &results), results))
}

/// Canned predictor replies built from each record's reference schedule,
/// keyed for both the rectified and the raw parse of the problem.
pub fn build_predictor_store(records: &[ProblemRecord], max_rounds: usize) -> Result<CannedClient, HarnessError> {
    let library = TheoremLibrary::bundled();
    let heuristic = HeuristicRectifier::new();
    let mut store = CannedClient::new();
    let opts = RectifyOptions { max_rounds, ..RectifyOptions::default() };
    for rec in records.iter().filter(|r| !r.reference_schedule.is_empty()) {
        let fail = |msg: String| HarnessError::Record { id: rec.id.clone(), msg };
        let d = load_diagram(&rec.diagram).map_err(|e| fail(e.to_string()))?;
        let parsed = parse_text(&rec.prose).map_err(|e| fail(e.to_string()))?;
        let (fixed, _) = rectify(&parsed, &d, &heuristic, &opts).map_err(|e| fail(e.to_string()))?;
        let reply = rec.reference_schedule.join(", ");
        for p in [&fixed, &parsed] {
            let req = predictor_request(p, &d, library);
            store.insert(&req.system, &req.user, reply.clone());
        }
    }
    Ok(store)
}

/// Model configuration for the HTTP backend from CLI-level settings.
pub fn http_config(endpoint: &str, model: &str, api_key_env: Option<&str>) -> ModelClientConfig {
    let mut c = ModelClientConfig::http(endpoint, model);
    if let Some(env) = api_key_env {
        c.api_key_env = env.to_string();
    }
    c.backend = Backend::Http;
    c
}
