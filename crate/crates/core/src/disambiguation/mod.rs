//! Placeholder resolution: detect `$` ambiguities, prompt a rectifier model,
//! and check each answer against the diagram before accepting it.

mod heuristic;
mod verify;

pub use heuristic::HeuristicRectifier;
pub use verify::{
    verify, verify_entities, verify_shape_closure, verify_vertex_geometry, ClosureOutcome, Heuristic,
    VerificationReport, Verdict, Violation,
};

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagram::{build_graph, DiagramParse};
use crate::formal::{fill_site, parse_term, placeholder_site, unknown_paths, Literal, Pred, SiteKind, Term};
use crate::gateway::{ClientError, ModelClient, ModelRequest};
use crate::text::ParsedProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AmbiguityKind {
    UnspecifiedPoints,
    UnspecifiedShapes,
    UnspecifiedAreas,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ambiguity {
    pub kind: AmbiguityKind,
    /// Index into propositions followed by the target.
    pub literal_index: usize,
    pub path: Vec<usize>,
}

fn classify(t: &Term, path: &[usize]) -> AmbiguityKind {
    let shaded = (0..path.len()).any(|k| t.at(&path[..k]).and_then(Term::pred) == Some(Pred::Shaded));
    if shaded {
        return AmbiguityKind::UnspecifiedAreas;
    }
    match placeholder_site(t, path).1 {
        SiteKind::VertexList(_) => AmbiguityKind::UnspecifiedPoints,
        SiteKind::WholeShape | SiteKind::Bare => AmbiguityKind::UnspecifiedShapes,
    }
}

/// One ambiguity per `$`, left to right within each literal, literals in order.
pub fn detect_ambiguities(problem: &ParsedProblem) -> Vec<Ambiguity> {
    let mut out = Vec::new();
    for (literal_index, lit) in problem.literals().enumerate() {
        for path in unknown_paths(lit.term()) {
            out.push(Ambiguity { kind: classify(lit.term(), &path), literal_index, path });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system: String,
    pub user: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptStyle {
    /// One template per ambiguity kind.
    #[default]
    Specific,
    /// A single kind-independent template.
    General,
}

/// Prompt templates with slots `{prose}`, `{literals}`, `{literal}`, `{term}`,
/// `{kind}`, `{shape}`, `{count}`, `{example}`, `{points}`, `{diagram}`, `{feedback}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub system: String,
    pub points: String,
    pub shapes: String,
    pub areas: String,
    pub general: String,
}

impl PromptTemplates {
    pub fn bundled() -> &'static PromptTemplates {
        static T: OnceLock<PromptTemplates> = OnceLock::new();
        T.get_or_init(|| PromptTemplates {
            system: include_str!("../../data/prompts/system.txt").to_string(),
            points: include_str!("../../data/prompts/points.txt").to_string(),
            shapes: include_str!("../../data/prompts/shapes.txt").to_string(),
            areas: include_str!("../../data/prompts/areas.txt").to_string(),
            general: include_str!("../../data/prompts/general.txt").to_string(),
        })
    }

    /// Loads `system.txt`, `points.txt`, `shapes.txt`, `areas.txt`, `general.txt`.
    pub fn from_dir(dir: &Path) -> std::io::Result<PromptTemplates> {
        let read = |name: &str| fs::read_to_string(dir.join(name));
        Ok(PromptTemplates {
            system: read("system.txt")?,
            points: read("points.txt")?,
            shapes: read("shapes.txt")?,
            areas: read("areas.txt")?,
            general: read("general.txt")?,
        })
    }

    fn for_kind(&self, kind: AmbiguityKind, style: PromptStyle) -> &str {
        match (style, kind) {
            (PromptStyle::General, _) => &self.general,
            (_, AmbiguityKind::UnspecifiedPoints) => &self.points,
            (_, AmbiguityKind::UnspecifiedShapes) => &self.shapes,
            (_, AmbiguityKind::UnspecifiedAreas) => &self.areas,
        }
    }
}

/// The node a fill replaces for this ambiguity.
fn site_term(problem: &ParsedProblem, a: &Ambiguity) -> Option<(Term, SiteKind)> {
    let lit = problem.literal(a.literal_index)?;
    let (site, kind) = placeholder_site(lit.term(), &a.path);
    Some((lit.term().at(&site)?.clone(), kind))
}

pub fn craft_prompt(
    a: &Ambiguity,
    problem: &ParsedProblem,
    d: &DiagramParse,
    templates: &PromptTemplates,
    style: PromptStyle,
    feedback: &str,
) -> PromptBundle {
    let literal = problem.literal(a.literal_index).map(|l| l.to_string()).unwrap_or_default();
    let (term, kind) = site_term(problem, a).unwrap_or((Term::Unknown, SiteKind::Bare));
    let (shape, count, example) = match kind {
        SiteKind::VertexList(pred) => {
            let count = match pred.vertex_count() {
                Some(n) => n.to_string(),
                None if pred == Pred::Circle => "1 (the center)".to_string(),
                None => "all".to_string(),
            };
            let n = pred.vertex_count().unwrap_or(1);
            let args: Vec<String> = (1..=n).map(|i| format!("P{i}")).collect();
            (pred.name().to_lowercase(), count, format!("{}({})", pred.name(), args.join(",")))
        }
        _ => ("shape".to_string(), String::new(), "Triangle(P1,P2,P3)".to_string()),
    };
    let literals: Vec<String> = problem.literals().map(|l| format!("- {l}")).collect();
    let points = d.point_names().join(", ");
    let user = templates
        .for_kind(a.kind, style)
        .replace("{prose}", problem.prose.trim())
        .replace("{literals}", &literals.join("\n"))
        .replace("{literal}", &literal)
        .replace("{term}", &term.to_string())
        .replace("{kind}", &format!("{:?}", a.kind))
        .replace("{shape}", &shape)
        .replace("{count}", &count)
        .replace("{example}", &example)
        .replace("{points}", &points)
        .replace("{diagram}", &d.to_json())
        .replace("{feedback}", feedback);
    PromptBundle { system: templates.system.trim().to_string(), user: user.trim_end().to_string(), image: d.image.clone() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub prompt: PromptBundle,
    pub model_reply: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parsed_candidate: Option<Literal>,
    pub report: VerificationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFinal {
    Resolved(Literal),
    ResidualAmbiguity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectificationTrace {
    pub ambiguity: Ambiguity,
    pub rounds: Vec<Round>,
    #[serde(rename = "final")]
    pub final_state: TraceFinal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectifyOptions {
    pub max_rounds: usize,
    pub verifier_on: bool,
    pub style: PromptStyle,
}

impl Default for RectifyOptions {
    fn default() -> Self {
        RectifyOptions { max_rounds: 3, verifier_on: true, style: PromptStyle::Specific }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RectifyError {
    #[error("max_rounds must be at least 1")]
    NoRounds,
    #[error("rectifier call for {literal} (round {round}) failed: {source}")]
    Client { literal: String, round: usize, source: ClientError },
}

/// Reads a model reply as a term: first nonblank line, code fences and a
/// trailing period removed.
fn read_reply(reply: &str) -> Result<Term, String> {
    let line = reply
        .lines()
        .map(|l| l.trim().trim_matches('`').trim())
        .find(|l| !l.is_empty())
        .ok_or_else(|| "unparseable reply: empty".to_string())?;
    let line = line.strip_suffix('.').unwrap_or(line);
    let term = parse_term(line).map_err(|e| format!("unparseable reply: {e}"))?;
    if term.contains_unknown() {
        return Err("unparseable reply: answer still contains $".to_string());
    }
    Ok(term)
}

fn fill_literal(lit: &Literal, path: &[usize], fill: &Term) -> Result<Literal, String> {
    let (site, kind) = placeholder_site(lit.term(), path);
    let replaced = lit
        .term()
        .replaced_at(&site, fill_site(kind, fill))
        .ok_or_else(|| "placeholder path no longer exists".to_string())?;
    replaced.validate().map_err(|e| format!("unparseable reply: {e}"))?;
    Literal::new(replaced).map_err(|e| format!("unparseable reply: {e}"))
}

/// Resolves every ambiguity in turn, each seeing earlier resolutions.
pub fn rectify(
    problem: &ParsedProblem,
    d: &DiagramParse,
    client: &dyn ModelClient,
    opts: &RectifyOptions,
) -> Result<(ParsedProblem, Vec<RectificationTrace>), RectifyError> {
    rectify_with(problem, d, client, opts, PromptTemplates::bundled())
}

pub fn rectify_with(
    problem: &ParsedProblem,
    d: &DiagramParse,
    client: &dyn ModelClient,
    opts: &RectifyOptions,
    templates: &PromptTemplates,
) -> Result<(ParsedProblem, Vec<RectificationTrace>), RectifyError> {
    if opts.max_rounds == 0 {
        return Err(RectifyError::NoRounds);
    }
    let g = build_graph(d);
    let mut current = problem.clone();
    let mut traces = Vec::new();
    for a in detect_ambiguities(problem) {
        let mut rounds = Vec::new();
        let mut feedback = String::new();
        let mut final_state = TraceFinal::ResidualAmbiguity;
        for round in 1..=opts.max_rounds {
            let prompt = craft_prompt(&a, &current, d, templates, opts.style, &feedback);
            let mut req = ModelRequest::new(prompt.system.clone(), prompt.user.clone());
            req.image = prompt.image.clone();
            let literal = current.literal(a.literal_index).expect("ambiguity literal exists").clone();
            let reply = client.complete(&req).map_err(|source| RectifyError::Client {
                literal: literal.to_string(),
                round,
                source,
            })?;
            let candidate = read_reply(&reply).and_then(|fill| fill_literal(&literal, &a.path, &fill));
            let (parsed_candidate, report) = match candidate {
                Err(msg) => (None, VerificationReport::rejected(vec![Violation::new(Heuristic::ReplyFormat, msg)])),
                Ok(c) if !opts.verifier_on => (Some(c), VerificationReport::accepted()),
                Ok(c) => {
                    let report = verify(c.term(), d, &g);
                    (Some(c), report)
                }
            };
            let outcome = match (&report.verdict, &report.repaired_literal, &parsed_candidate) {
                (Verdict::Repaired, Some(r), _) => Some(r.clone()),
                (Verdict::Accepted, _, Some(c)) => Some(c.clone()),
                _ => None,
            };
            if outcome.is_none() {
                let msgs: Vec<&str> = report.violations.iter().map(|v| v.message.as_str()).collect();
                feedback = format!(
                    "Your previous answer {} failed: {}. Answer again using only the listed points.",
                    reply.trim(),
                    msgs.join("; ")
                );
            }
            rounds.push(Round { prompt, model_reply: reply, parsed_candidate, report });
            if let Some(resolved) = outcome {
                current.set_literal(a.literal_index, resolved.clone());
                final_state = TraceFinal::Resolved(resolved);
                break;
            }
        }
        traces.push(RectificationTrace { ambiguity: a, rounds, final_state });
    }
    Ok((current, traces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::CannedClient;
    use crate::text::{parse_text, problem_from_literals};

    fn lit(s: &str) -> Literal {
        Literal::parse(s).unwrap()
    }

    fn square_circle() -> DiagramParse {
        DiagramParse::from_json(
            r#"{"points":[{"name":"A","x":0,"y":0},{"name":"B","x":100,"y":0},{"name":"C","x":100,"y":100},
            {"name":"D","x":0,"y":100},{"name":"O","x":50,"y":50}],
            "segments":[["A","B"],["B","C"],["C","D"],["D","A"]],
            "circles":[{"center":"O","radius":50}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn detection_examples() {
        let p = problem_from_literals(vec![lit("Equals(LengthOf(Line(A,B)),3)")], lit("Find(LengthOf(Line(A,C)))"));
        assert!(detect_ambiguities(&p).is_empty());
        let p = problem_from_literals(vec![lit("CircumscribedTo(Square($),Circle($))")], lit("Find(x)"));
        let a = detect_ambiguities(&p);
        assert_eq!(a.len(), 2);
        assert!(a.iter().all(|x| x.kind == AmbiguityKind::UnspecifiedPoints));
        assert_eq!(a[0].path, vec![0, 0]);
        let p = parse_text("Find the area of the shaded region.").unwrap();
        let a = detect_ambiguities(&p);
        assert_eq!(a.len(), 1);
        assert_eq!((a[0].kind, a[0].literal_index), (AmbiguityKind::UnspecifiedAreas, 0));
        let p = parse_text("CP is an altitude of the figure. Find x.").unwrap();
        assert_eq!(detect_ambiguities(&p)[0].kind, AmbiguityKind::UnspecifiedShapes);
    }

    #[test]
    fn prompt_contents() {
        let d = square_circle();
        let p = problem_from_literals(vec![lit("Square($)")], lit("Find(AreaOf(Shaded(Shape($))))"));
        let a = detect_ambiguities(&p);
        let t = PromptTemplates::bundled();
        let first = craft_prompt(&a[0], &p, &d, t, PromptStyle::Specific, "");
        assert!(first.user.contains("Square($)"));
        assert!(first.user.contains("4 defining points"));
        let second = craft_prompt(&a[1], &p, &d, t, PromptStyle::Specific, "");
        assert!(second.user.contains("AreaOf(Square(A,B,C,D)) - AreaOf(Circle(O))"));
        for b in [&first, &second] {
            for name in d.point_names() {
                assert!(b.user.contains(name));
            }
        }
        let general = craft_prompt(&a[0], &p, &d, t, PromptStyle::General, "");
        assert_ne!(general.user, first.user);
    }

    fn canned_for(p: &ParsedProblem, d: &DiagramParse, reply: &str) -> CannedClient {
        let mut c = CannedClient::new();
        let a = &detect_ambiguities(p)[0];
        let b = craft_prompt(a, p, d, PromptTemplates::bundled(), PromptStyle::Specific, "");
        c.insert(&b.system, &b.user, reply);
        c
    }

    #[test]
    fn resolves_square_in_one_round() {
        let d = square_circle();
        let p = problem_from_literals(vec![lit("Square($)")], lit("Find(AreaOf(Square(A,B,C,D)))"));
        let c = canned_for(&p, &d, "Square(A,B,C,D)");
        let (out, traces) = rectify(&p, &d, &c, &RectifyOptions::default()).unwrap();
        assert_eq!(out.propositions[0].to_string(), "Square(A,B,C,D)");
        assert_eq!(traces[0].rounds.len(), 1);
        assert_eq!(traces[0].final_state, TraceFinal::Resolved(lit("Square(A,B,C,D)")));
    }

    #[test]
    fn exhaustion_leaves_residual() {
        let d = square_circle();
        let p = problem_from_literals(vec![lit("Triangle($)")], lit("Find(x)"));
        struct Always;
        impl ModelClient for Always {
            fn complete(&self, _: &ModelRequest) -> Result<String, ClientError> {
                Ok("Triangle(X,Y,Z)".into())
            }
        }
        let (out, traces) = rectify(&p, &d, &Always, &RectifyOptions::default()).unwrap();
        assert_eq!(traces[0].rounds.len(), 3);
        assert_eq!(traces[0].final_state, TraceFinal::ResidualAmbiguity);
        assert_eq!(out.propositions[0].to_string(), "Triangle($)");
        let feedback = &traces[0].rounds[1].prompt.user;
        assert!(feedback.contains("Your previous answer Triangle(X,Y,Z) failed: unknown point X"));
    }

    #[test]
    fn unparseable_reply_is_a_failed_round() {
        let d = square_circle();
        let p = problem_from_literals(vec![lit("Square($)")], lit("Find(x)"));
        let c = canned_for(&p, &d, "the square ABCD");
        let err = rectify(&p, &d, &c, &RectifyOptions { max_rounds: 1, ..Default::default() }).unwrap();
        assert_eq!(err.1[0].rounds[0].report.violations[0].heuristic, Heuristic::ReplyFormat);
        assert_eq!(err.1[0].final_state, TraceFinal::ResidualAmbiguity);
    }

    #[test]
    fn client_errors_carry_round() {
        let d = square_circle();
        let p = problem_from_literals(vec![lit("Square($)")], lit("Find(x)"));
        let err = rectify(&p, &d, &CannedClient::new(), &RectifyOptions::default()).unwrap_err();
        assert!(matches!(err, RectifyError::Client { round: 1, source: ClientError::CannedMiss(_), .. }));
        assert_eq!(
            rectify(&p, &d, &CannedClient::new(), &RectifyOptions { max_rounds: 0, ..Default::default() }),
            Err(RectifyError::NoRounds)
        );
    }

    #[test]
    fn verifier_off_accepts_any_parse() {
        let d = square_circle();
        let p = problem_from_literals(vec![lit("Square($)")], lit("Find(x)"));
        let c = canned_for(&p, &d, "Square(A,C,B,D)");
        let opts = RectifyOptions { verifier_on: false, ..Default::default() };
        let (out, _) = rectify(&p, &d, &c, &opts).unwrap();
        assert_eq!(out.propositions[0].to_string(), "Square(A,C,B,D)");
        let (out, traces) = rectify(&p, &d, &c, &RectifyOptions::default()).unwrap();
        assert_eq!(out.propositions[0].to_string(), "Square(A,B,C,D)");
        assert_eq!(traces[0].rounds[0].report.verdict, Verdict::Repaired);
    }
}
