use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{run_records, HarnessError, PredictorBackend, ProblemRecord, ProblemResult, RectifierBackend, RunConfig};
use super::{FALLBACK_NOTE, TOLERANCE_NOTE};

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// Hits over total; the percentage is absent for an empty batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub hits: usize,
    pub total: usize,
    pub percent: Option<f64>,
}

impl Metric {
    fn of(hits: usize, total: usize) -> Metric {
        let percent = (total > 0).then(|| round3(100.0 * hits as f64 / total as f64));
        Metric { hits, total, percent }
    }

    fn show(&self) -> String {
        match self.percent {
            Some(p) => format!("{p:.1}% ({}/{})", self.hits, self.total),
            None => "n/a (0/0)".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
}

impl StepStats {
    fn of(steps: &[usize]) -> Option<StepStats> {
        let min = *steps.iter().min()?;
        let max = *steps.iter().max()?;
        let mean = round3(steps.iter().sum::<usize>() as f64 / steps.len() as f64);
        Some(StepStats { min, max, mean })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub problems: usize,
    pub completion: Metric,
    pub choice: Metric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub id: String,
    pub question_type: Option<String>,
    pub shape: Option<String>,
    pub status: String,
    pub gold: f64,
    pub answer: Option<f64>,
    pub completion_hit: bool,
    pub choice_index: Option<usize>,
    pub choice_hit: bool,
    pub choice_fallback: bool,
    pub steps_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub seed: u64,
    pub rectifier: RectifierBackend,
    pub predictor: PredictorBackend,
    pub disambiguation_on: bool,
    pub verifier_on: bool,
    pub predictor_on: bool,
    pub max_rounds: usize,
    pub budget: usize,
    pub tolerance: String,
    pub choice_fallback: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: Header,
    pub problems: usize,
    pub completion: Metric,
    pub choice: Metric,
    /// Over solved problems.
    pub steps: Option<StepStats>,
    pub by_question_type: BTreeMap<String, Breakdown>,
    pub by_shape: BTreeMap<String, Breakdown>,
    pub rows: Vec<Row>,
}

fn breakdown<'a>(results: impl Iterator<Item = &'a ProblemResult> + Clone) -> Breakdown {
    let n = results.clone().count();
    Breakdown {
        problems: n,
        completion: Metric::of(results.clone().filter(|r| r.completion_hit).count(), n),
        choice: Metric::of(results.filter(|r| r.choice_hit).count(), n),
    }
}

fn group_by(results: &[ProblemResult], key: impl Fn(&ProblemResult) -> Option<&String>) -> BTreeMap<String, Breakdown> {
    let mut names: Vec<&String> = results.iter().filter_map(&key).collect();
    names.sort();
    names.dedup();
    names
        .into_iter()
        .map(|name| (name.clone(), breakdown(results.iter().filter(|r| key(r) == Some(name)))))
        .collect()
}

impl Report {
    pub fn new(cfg: &RunConfig, results: &[ProblemResult]) -> Report {
        let total = breakdown(results.iter());
        let solved: Vec<usize> = results.iter().filter(|r| r.status == "solved").map(|r| r.steps_used).collect();
        Report {
            config: Header {
                seed: cfg.seed,
                rectifier: cfg.rectifier,
                predictor: cfg.predictor,
                disambiguation_on: cfg.disambiguation_on,
                verifier_on: cfg.verifier_on,
                predictor_on: cfg.predictor_on,
                max_rounds: cfg.max_rounds,
                budget: cfg.budget,
                tolerance: TOLERANCE_NOTE.to_string(),
                choice_fallback: FALLBACK_NOTE.to_string(),
            },
            problems: results.len(),
            completion: total.completion,
            choice: total.choice,
            steps: StepStats::of(&solved),
            by_question_type: group_by(results, |r| r.question_type.as_ref()),
            by_shape: group_by(results, |r| r.shape.as_ref()),
            rows: results
                .iter()
                .map(|r| Row {
                    id: r.id.clone(),
                    question_type: r.question_type.clone(),
                    shape: r.shape.clone(),
                    status: r.status.clone(),
                    gold: round3(r.gold),
                    answer: r.answer.map(round3),
                    completion_hit: r.completion_hit,
                    choice_index: r.choice_index,
                    choice_hit: r.choice_hit,
                    choice_fallback: r.choice_fallback,
                    steps_used: r.steps_used,
                })
                .collect(),
        }
    }

    pub fn summary(&self) -> String {
        let c = &self.config;
        let on = |b: bool| if b { "on" } else { "off" };
        let mut s = String::new();
        let _ = writeln!(
            s,
            "seed {} | rectifier {:?} | predictor {:?} | disambiguation {} | verifier {} | prediction {}",
            c.seed,
            c.rectifier,
            c.predictor,
            on(c.disambiguation_on),
            on(c.verifier_on),
            on(c.predictor_on)
        );
        let _ = writeln!(s, "tolerance: {}", c.tolerance);
        let _ = writeln!(s, "choice fallback: {}\n", c.choice_fallback);
        let _ = writeln!(s, "problems    {}", self.problems);
        let _ = writeln!(s, "Completion  {}", self.completion.show());
        let _ = writeln!(s, "Choice      {}", self.choice.show());
        match &self.steps {
            Some(st) => {
                let _ = writeln!(s, "steps       min {} max {} mean {:.3}", st.min, st.max, st.mean);
            }
            None => {
                let _ = writeln!(s, "steps       n/a");
            }
        }
        for (title, table) in [("question type", &self.by_question_type), ("shape", &self.by_shape)] {
            let _ = writeln!(s, "\n{title:<16} {:>3}  {:<18} {:<18}", "n", "Completion", "Choice");
            for (name, b) in table {
                let _ = writeln!(s, "{name:<16} {:>3}  {:<18} {:<18}", b.problems, b.completion.show(), b.choice.show());
            }
        }
        let _ = writeln!(s, "\n{:<8} {:<13} {:>10} {:>10} {:>6} {:>7}", "id", "status", "answer", "gold", "steps", "choice");
        for r in &self.rows {
            let answer = r.answer.map_or("-".to_string(), |a| format!("{a:.3}"));
            let choice = match r.choice_index {
                Some(i) if r.choice_fallback => format!("{i}*"),
                Some(i) => i.to_string(),
                None => "-".to_string(),
            };
            let _ = writeln!(s, "{:<8} {:<13} {:>10} {:>10.3} {:>6} {:>7}", r.id, r.status, answer, r.gold, r.steps_used, choice);
        }
        s
    }

    /// Writes report.json, summary.txt and traces.json into `dir`.
    pub fn write(&self, results: &[ProblemResult], dir: &Path) -> Result<(), HarnessError> {
        let traces: Vec<serde_json::Value> = results
            .iter()
            .map(|r| serde_json::json!({ "id": r.id, "trace": r.traces }))
            .collect();
        write_file(dir, "report.json", &to_json(self))?;
        write_file(dir, "summary.txt", &self.summary())?;
        write_file(dir, "traces.json", &to_json(&traces))
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<(), HarnessError> {
    let path = dir.join(name);
    std::fs::create_dir_all(dir)
        .and_then(|_| std::fs::write(&path, body))
        .map_err(|source| HarnessError::Write { path, source })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    pub disambiguation_on: bool,
    pub verifier_on: bool,
    pub predictor_on: bool,
    pub completion: Metric,
    pub choice: Metric,
    pub steps: Option<StepStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub seed: u64,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn summary(&self) -> String {
        let mut s = format!("seed {}\n\n{:<34} {:<18} {:<18} {}\n", self.seed, "configuration", "Completion", "Choice", "steps");
        for r in &self.rows {
            let steps = r.steps.map_or("n/a".to_string(), |st| format!("{}-{} mean {:.3}", st.min, st.max, st.mean));
            let _ = writeln!(s, "{:<34} {:<18} {:<18} {steps}", r.label, r.completion.show(), r.choice.show());
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        write_file(dir, "ablation.json", &to_json(self))?;
        write_file(dir, "ablation.txt", &self.summary())
    }
}

/// The disambiguation × prediction grid plus the rectifier/verifier rows,
/// all from one base configuration.
pub fn ablate(records: &[ProblemRecord], base: &RunConfig) -> Result<AblationReport, HarnessError> {
    let grid = [
        ("disambiguation + prediction", true, true, true),
        ("disambiguation only", true, true, false),
        ("prediction only", false, true, true),
        ("neither", false, true, false),
        ("no rectifier", false, true, base.predictor_on),
        ("rectifier without verifier", true, false, base.predictor_on),
        ("rectifier + verifier", true, true, base.predictor_on),
    ];
    let mut rows = Vec::new();
    for (label, disambiguation_on, verifier_on, predictor_on) in grid {
        let cfg = RunConfig { disambiguation_on, verifier_on, predictor_on, ..base.clone() };
        let clients = cfg.clients()?;
        let results = run_records(records, &cfg, &clients);
        let report = Report::new(&cfg, &results);
        rows.push(AblationRow {
            label: label.to_string(),
            disambiguation_on,
            verifier_on,
            predictor_on,
            completion: report.completion,
            choice: report.choice,
            steps: report.steps,
        });
    }
    Ok(AblationReport { seed: base.seed, rows })
}
