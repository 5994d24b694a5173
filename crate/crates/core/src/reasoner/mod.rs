//! Deductive solving: theorem rules applied to a state of relations and
//! equations until the goal quantity has a value.

mod algebra;
mod canon;
mod library;
mod state;

pub use algebra::{eval, solve_equation, Bindings, Equation, EquationStatus};
pub use canon::Geometry;
pub use library::{TheoremLibrary, TheoremRule};
pub use state::{DeductionState, Step, Subst};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagram::DiagramParse;
use crate::gateway::{ModelClient, ModelRequest};
use crate::text::ParsedProblem;

pub const DEFAULT_BUDGET: usize = 20;

const PREDICTOR_SYSTEM: &str = include_str!("../../data/prompts/predictor_system.txt");
const PREDICTOR_USER: &str = include_str!("../../data/prompts/predictor.txt");

#[derive(Debug, Error)]
pub enum ReasonerError {
    #[error("theorem library: {0}")]
    Library(String),
    #[error("rule {id}: {msg}")]
    BadRule { id: String, msg: String },
    #[error("inconsistent state: {0}")]
    Inconsistent(String),
    #[error("budget must be at least 1")]
    InvalidBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleSource {
    Predicted,
    Traversal,
}

/// Theorem ids or group names to try first, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub source: ScheduleSource,
    pub entries: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Schedule {
    pub fn traversal() -> Schedule {
        Schedule { source: ScheduleSource::Traversal, entries: Vec::new(), dropped: Vec::new(), note: None }
    }

    pub fn predicted<S: Into<String>>(entries: impl IntoIterator<Item = S>) -> Schedule {
        Schedule {
            source: ScheduleSource::Predicted,
            entries: entries.into_iter().map(Into::into).collect(),
            dropped: Vec::new(),
            note: None,
        }
    }
}

/// Prompt asking a model which theorems to apply.
pub fn predictor_request(problem: &ParsedProblem, d: &DiagramParse, library: &TheoremLibrary) -> ModelRequest {
    let mut theorems: Vec<String> = library.rules().iter().map(|r| format!("- {}: {}", r.id, r.description)).collect();
    for g in library.groups() {
        let members: Vec<&str> = library.resolve(g).iter().map(|r| r.id.as_str()).collect();
        theorems.push(format!("- {g}: group of {}", members.join(", ")));
    }
    let props: Vec<String> = problem.propositions.iter().map(|l| format!("- {l}")).collect();
    let rels: Vec<String> = d.relations.iter().map(|l| format!("- {l}")).collect();
    let user = PREDICTOR_USER
        .replace("{theorems}", &theorems.join("\n"))
        .replace("{propositions}", &props.join("\n"))
        .replace("{target}", &problem.target.to_string())
        .replace("{diagram}", if rels.is_empty() { "(none)" } else { "" })
        .replace("{relations}", &rels.join("\n"));
    let mut req = ModelRequest::new(PREDICTOR_SYSTEM.trim(), user);
    req.image = d.image.clone();
    req
}

/// Reads a comma or newline separated list of ids and groups; unknown names
/// are dropped.
pub fn parse_schedule_reply(reply: &str, library: &TheoremLibrary) -> Schedule {
    let mut s = Schedule::predicted(Vec::<String>::new());
    for raw in reply.split([',', '\n', ';', ' ']) {
        let tok = raw.trim_matches(|c: char| !(c.is_ascii_alphanumeric() || c == '_'));
        let tok = tok.trim_start_matches(|c: char| c.is_ascii_digit());
        if tok.is_empty() {
            continue;
        }
        if library.resolve(tok).is_empty() {
            s.dropped.push(tok.to_string());
        } else {
            s.entries.push(tok.to_string());
        }
    }
    if !s.dropped.is_empty() {
        log::warn!("schedule reply named unknown theorems: {:?}", s.dropped);
    }
    if s.entries.is_empty() {
        let mut t = Schedule::traversal();
        t.dropped = s.dropped;
        t.note = Some("empty schedule".into());
        return t;
    }
    s
}

/// Asks the predictor for a schedule; any failure falls back to traversal.
pub fn predict_schedule(
    problem: &ParsedProblem,
    d: &DiagramParse,
    library: &TheoremLibrary,
    client: &dyn ModelClient,
) -> Schedule {
    match client.complete(&predictor_request(problem, d, library)) {
        Ok(reply) => parse_schedule_reply(&reply, library),
        Err(e) => {
            log::warn!("schedule prediction failed: {e}");
            let mut t = Schedule::traversal();
            t.note = Some(e.to_string());
            t
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Solved,
    Unsolved,
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub status: SolveStatus,
    pub answer: Option<f64>,
    pub steps_used: usize,
    pub trace: Vec<Step>,
    pub bindings: std::collections::BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

struct Run<'a> {
    state: DeductionState,
    goal: Option<crate::formal::Term>,
    trace: Vec<Step>,
    library: &'a TheoremLibrary,
}

enum Flow {
    Done,
    Continue(bool),
}

impl Run<'_> {
    fn answer(&self) -> Option<f64> {
        self.goal.as_ref().and_then(|g| self.state.evaluate(g))
    }

    fn apply(&mut self, rule: &TheoremRule) -> Result<Flow, ReasonerError> {
        match self.state.apply(rule)? {
            Some(step) => {
                self.trace.push(step);
                Ok(if self.answer().is_some() { Flow::Done } else { Flow::Continue(true) })
            }
            None => Ok(Flow::Continue(false)),
        }
    }

    fn drive(&mut self, schedule: &Schedule, budget: usize) -> Result<(), ReasonerError> {
        self.state.propagate()?;
        if self.answer().is_some() {
            return Ok(());
        }
        if schedule.source == ScheduleSource::Predicted {
            for entry in &schedule.entries {
                for rule in self.library.resolve(entry) {
                    if let Flow::Done = self.apply(rule)? {
                        return Ok(());
                    }
                }
            }
        }
        for _ in 0..budget {
            let mut progress = false;
            for rule in self.library.rules() {
                match self.apply(rule)? {
                    Flow::Done => return Ok(()),
                    Flow::Continue(p) => progress |= p,
                }
            }
            if !progress {
                break;
            }
        }
        Ok(())
    }
}

/// Runs the schedule, then library traversal for up to `budget` rounds or
/// until a round derives nothing.
pub fn solve(
    problem: &ParsedProblem,
    d: &DiagramParse,
    schedule: &Schedule,
    library: &TheoremLibrary,
    budget: usize,
) -> Result<Outcome, ReasonerError> {
    if budget == 0 {
        return Err(ReasonerError::InvalidBudget);
    }
    let goal = state::goal_quantity(problem).filter(|g| !g.contains_unknown()).cloned();
    let mut run = Run { state: DeductionState::seed(problem, d), goal, trace: Vec::new(), library };
    let result = run.drive(schedule, budget);
    let answer = run.answer();
    let (status, message) = match result {
        Err(ReasonerError::Inconsistent(m)) => (SolveStatus::Inconsistent, Some(m)),
        Err(e) => return Err(e),
        Ok(()) if answer.is_some() => (SolveStatus::Solved, None),
        Ok(()) => (SolveStatus::Unsolved, None),
    };
    Ok(Outcome {
        status,
        answer: if status == SolveStatus::Solved { answer } else { None },
        steps_used: run.trace.len(),
        bindings: run.state.printed_bindings(),
        trace: run.trace,
        message,
    })
}
