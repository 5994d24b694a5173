//! Rule-based extraction of propositions and the goal from problem prose.
//!
//! Rules are data: a regex over normalized prose plus a formal-language
//! template with capture slots. Noun phrases without point labels ("the
//! square", "the shaded region") become `$` placeholders.

mod normalize;

pub use normalize::normalize;

use std::sync::OnceLock;

use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formal::{parse_term, Literal, Pred};

const DEFAULT_RULES: &str = include_str!("../../data/text_rules.json");

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TextError {
    #[error("problem text is empty")]
    EmptyProse,
    #[error("no goal sentence found")]
    NoTargetFound,
    #[error("conflicting goals {0} and {1}")]
    ConflictingTargets(String, String),
    #[error("rule {index}: {msg}")]
    BadRule { index: usize, msg: String },
}

/// One entry of the rule file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextRule {
    pub pattern: String,
    pub template: String,
    pub priority: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleMatch {
    /// Index of the rule in file order.
    pub rule: usize,
    pub span: Span,
    pub literal: Literal,
    /// Unlabeled noun phrases that produced a `$`.
    pub placeholder_phrases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedProblem {
    pub prose: String,
    pub normalized: String,
    pub propositions: Vec<Literal>,
    pub target: Literal,
    pub matches: Vec<RuleMatch>,
    pub unmatched_spans: Vec<Span>,
}

impl ParsedProblem {
    /// Propositions followed by the target, the indexing used by ambiguity records.
    pub fn literals(&self) -> impl Iterator<Item = &Literal> {
        self.propositions.iter().chain(std::iter::once(&self.target))
    }

    pub fn literal_count(&self) -> usize {
        self.propositions.len() + 1
    }

    pub fn literal(&self, index: usize) -> Option<&Literal> {
        if index < self.propositions.len() {
            self.propositions.get(index)
        } else if index == self.propositions.len() {
            Some(&self.target)
        } else {
            None
        }
    }

    pub fn set_literal(&mut self, index: usize, lit: Literal) {
        if index < self.propositions.len() {
            self.propositions[index] = lit;
        } else {
            self.target = lit;
        }
    }

    /// Unmatched spans that hold more than whitespace and punctuation.
    pub fn significant_unmatched(&self) -> impl Iterator<Item = &Span> {
        self.unmatched_spans
            .iter()
            .filter(|s| s.text.chars().any(|c| c.is_alphanumeric()))
    }
}

#[derive(Debug)]
struct CompiledRule {
    index: usize,
    rule: TextRule,
    regex: Regex,
}

/// An ordered, immutable rule table.
#[derive(Debug)]
pub struct RuleSet {
    rules: Vec<CompiledRule>,
}

const SHAPE_WORDS: &[(&str, Pred)] = &[
    ("parallelogram", Pred::Parallelogram),
    ("quadrilateral", Pred::Quadrilateral),
    ("rectangle", Pred::Rectangle),
    ("trapezoid", Pred::Trapezoid),
    ("pentagon", Pred::Pentagon),
    ("triangle", Pred::Triangle),
    ("hexagon", Pred::Hexagon),
    ("rhombus", Pred::Rhombus),
    ("square", Pred::Square),
    ("circle", Pred::Circle),
    ("sector", Pred::Sector),
];

const REGION_WORDS: &[&str] = &["shaded region", "shaded area", "figure", "shape", "polygon"];

const MEASURE_WORDS: &[(&str, Pred)] = &[
    ("circumference", Pred::PerimeterOf),
    ("perimeter", Pred::PerimeterOf),
    ("diameter", Pred::DiameterOf),
    ("radius", Pred::RadiusOf),
    ("length", Pred::LengthOf),
    ("area", Pred::AreaOf),
];

const PTS: &str = r"\b[A-Z][A-Z0-9]*\b";
const SEG: &str = r"\b[A-Z][0-9]*[A-Z][0-9]*\b";
const VAR: &str = r"\b[a-z]\b";
const NUM: &str = r"\d+(?:\.\d+)?";

fn expr_macro() -> String {
    let token = r"(?:\d+(?:\.\d+)?(?:[a-z]\b|pi\b|sqrt\b)?|pi\b|sqrt\b|[a-z]\b)";
    let atom = format!(r"(?:\(\s*)*{token}(?:\s*\))*");
    format!(r"(?:-\s*)?{atom}(?:\s*(?:[-+*/^]\s*)?{atom})*")
}

fn alternation(words: impl Iterator<Item = &'static str>) -> String {
    words.collect::<Vec<_>>().join("|")
}

fn expand_macros(pattern: &str) -> String {
    let shape = alternation(SHAPE_WORDS.iter().map(|(w, _)| *w));
    let region = alternation(REGION_WORDS.iter().copied());
    let meas = alternation(MEASURE_WORDS.iter().map(|(w, _)| *w));
    let ent = format!(r"(?:(?:the|a|an) )?(?:{region}|{shape})(?: {PTS})?");
    pattern
        .replace("{PTS}", PTS)
        .replace("{SEG}", SEG)
        .replace("{VAR}", VAR)
        .replace("{NUM}", NUM)
        .replace("{EXPR}", &expr_macro())
        .replace("{ENT}", &ent)
        .replace("{MEAS}", &format!("(?:{meas})"))
        .replace("{SHAPE}", &format!("(?:{shape})"))
}

fn slot_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{(\d+)(?::([a-z]+))?\}").expect("slot regex"))
}

/// Splits a label such as `ABCD` or `A1B2` into point names.
fn split_points(label: &str) -> Vec<String> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"[A-Z][0-9]*").expect("point regex"));
    re.find_iter(label).map(|m| m.as_str().to_string()).collect()
}

/// Converts an entity noun phrase to a term, plus whether it produced a `$`.
fn entity_text(phrase: &str) -> Option<(String, bool)> {
    let mut rest = phrase.trim();
    for article in ["the ", "a ", "an "] {
        if let Some(r) = rest.strip_prefix(article) {
            rest = r;
            break;
        }
    }
    let (word, label) = match rest.rsplit_once(' ') {
        Some((w, l)) if l.starts_with(|c: char| c.is_ascii_uppercase()) => (w, Some(l)),
        _ => (rest, None),
    };
    let args = match label {
        Some(l) => split_points(l).join(","),
        None => "$".to_string(),
    };
    let unlabeled = label.is_none();
    if let Some((_, pred)) = SHAPE_WORDS.iter().find(|(w, _)| *w == word) {
        return Some((format!("{}({args})", pred.name()), unlabeled));
    }
    match word {
        "shaded region" | "shaded area" => Some((format!("Shaded(Shape({args}))"), unlabeled)),
        w if REGION_WORDS.contains(&w) => Some((format!("Shape({args})"), unlabeled)),
        _ => None,
    }
}

impl RuleSet {
    /// The bundled rule table.
    pub fn bundled() -> &'static RuleSet {
        static RULES: OnceLock<RuleSet> = OnceLock::new();
        RULES.get_or_init(|| RuleSet::from_json(DEFAULT_RULES).expect("bundled text rules are valid"))
    }

    pub fn from_json(text: &str) -> Result<RuleSet, TextError> {
        let rules: Vec<TextRule> =
            serde_json::from_str(text).map_err(|e| TextError::BadRule { index: 0, msg: e.to_string() })?;
        RuleSet::new(rules)
    }

    pub fn new(rules: Vec<TextRule>) -> Result<RuleSet, TextError> {
        let mut compiled = Vec::with_capacity(rules.len());
        for (index, rule) in rules.into_iter().enumerate() {
            let regex = Regex::new(&expand_macros(&rule.pattern))
                .map_err(|e| TextError::BadRule { index, msg: e.to_string() })?;
            let groups = regex.captures_len() - 1;
            for caps in slot_regex().captures_iter(&rule.template) {
                let slot: usize = caps[1].parse().unwrap_or(0);
                if slot == 0 || slot > groups {
                    return Err(TextError::BadRule { index, msg: format!("slot {{{slot}}} has no capture group") });
                }
                if let Some(conv) = caps.get(2) {
                    if !matches!(conv.as_str(), "pts" | "ent" | "meas" | "pred") {
                        return Err(TextError::BadRule { index, msg: format!("unknown slot conversion {}", conv.as_str()) });
                    }
                }
            }
            compiled.push(CompiledRule { index, rule, regex });
        }
        compiled.sort_by_key(|c| (c.rule.priority, c.index));
        Ok(RuleSet { rules: compiled })
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    fn instantiate(template: &str, caps: &Captures) -> Option<(String, Vec<String>)> {
        let mut placeholders = Vec::new();
        let mut failed = false;
        let text = slot_regex().replace_all(template, |slot: &Captures| {
            let n: usize = slot[1].parse().unwrap_or(0);
            let raw = caps.get(n).map(|m| m.as_str()).unwrap_or("");
            match slot.get(2).map(|c| c.as_str()) {
                None => raw.to_string(),
                Some("pts") => split_points(raw).join(","),
                Some("ent") => match entity_text(raw) {
                    Some((t, unlabeled)) => {
                        if unlabeled {
                            placeholders.push(raw.to_string());
                        }
                        t
                    }
                    None => {
                        failed = true;
                        String::new()
                    }
                },
                Some("meas") => match MEASURE_WORDS.iter().find(|(w, _)| *w == raw) {
                    Some((_, p)) => p.name().to_string(),
                    None => {
                        failed = true;
                        String::new()
                    }
                },
                Some(_) => match SHAPE_WORDS.iter().find(|(w, _)| *w == raw) {
                    Some((_, p)) => p.name().to_string(),
                    None => {
                        failed = true;
                        String::new()
                    }
                },
            }
        });
        (!failed).then(|| (text.into_owned(), placeholders))
    }

    pub fn parse(&self, prose: &str) -> Result<ParsedProblem, TextError> {
        if prose.trim().is_empty() {
            return Err(TextError::EmptyProse);
        }
        let normalized = normalize(prose);
        let mut consumed = vec![false; normalized.len()];
        let mut matches: Vec<RuleMatch> = Vec::new();
        for rule in &self.rules {
            let mut pos = 0;
            while pos <= normalized.len() {
                let Some(caps) = rule.regex.captures_at(&normalized, pos) else { break };
                let whole = caps.get(0).expect("group 0");
                let next = |at: usize| {
                    let mut p = at + 1;
                    while p < normalized.len() && !normalized.is_char_boundary(p) {
                        p += 1;
                    }
                    p
                };
                if whole.is_empty() || consumed[whole.start()..whole.end()].iter().any(|&c| c) {
                    pos = next(whole.start());
                    continue;
                }
                let literal = Self::instantiate(&rule.rule.template, &caps).and_then(|(text, phrases)| {
                    match parse_term(&text).and_then(Literal::new) {
                        Ok(lit) => Some((lit, phrases)),
                        Err(e) => {
                            log::warn!("rule {} produced unusable {text:?}: {e}", rule.index);
                            None
                        }
                    }
                });
                match literal {
                    Some((literal, placeholder_phrases)) => {
                        consumed[whole.start()..whole.end()].iter_mut().for_each(|c| *c = true);
                        matches.push(RuleMatch {
                            rule: rule.index,
                            span: Span { start: whole.start(), end: whole.end(), text: whole.as_str().to_string() },
                            literal,
                            placeholder_phrases,
                        });
                        pos = whole.end();
                    }
                    None => pos = next(whole.start()),
                }
            }
        }
        matches.sort_by_key(|m| m.span.start);

        let mut unmatched_spans = Vec::new();
        let mut cursor = 0;
        for m in &matches {
            if m.span.start > cursor {
                unmatched_spans.push(Span { start: cursor, end: m.span.start, text: normalized[cursor..m.span.start].to_string() });
            }
            cursor = m.span.end;
        }
        if cursor < normalized.len() {
            unmatched_spans.push(Span { start: cursor, end: normalized.len(), text: normalized[cursor..].to_string() });
        }

        let mut target: Option<Literal> = None;
        let mut propositions: Vec<Literal> = Vec::new();
        for m in &matches {
            if m.literal.is_goal() {
                match &target {
                    Some(t) if *t != m.literal => {
                        return Err(TextError::ConflictingTargets(t.to_string(), m.literal.to_string()))
                    }
                    Some(_) => {}
                    None => target = Some(m.literal.clone()),
                }
            } else if !propositions.contains(&m.literal) {
                propositions.push(m.literal.clone());
            }
        }
        let target = target.ok_or(TextError::NoTargetFound)?;
        let parsed = ParsedProblem { prose: prose.to_string(), normalized, propositions, target, matches, unmatched_spans };
        for span in parsed.significant_unmatched() {
            log::debug!("unmatched text {:?}", span.text);
        }
        Ok(parsed)
    }
}

/// Parses prose with the bundled rule table.
pub fn parse_text(prose: &str) -> Result<ParsedProblem, TextError> {
    RuleSet::bundled().parse(prose)
}

/// Builds a problem directly from formal literals, bypassing the prose rules.
pub fn problem_from_literals(propositions: Vec<Literal>, target: Literal) -> ParsedProblem {
    ParsedProblem {
        prose: String::new(),
        normalized: String::new(),
        propositions,
        target,
        matches: Vec::new(),
        unmatched_spans: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn targets(prose: &str) -> String {
        parse_text(prose).unwrap().target.to_string()
    }

    fn props(prose: &str) -> Vec<String> {
        parse_text(prose).unwrap().propositions.iter().map(|l| l.to_string()).collect()
    }

    #[test]
    fn goal_sentences() {
        assert_eq!(targets("Find the length of EH."), "Find(LengthOf(Line(E,H)))");
        assert_eq!(targets("Find the area of the shaded region."), "Find(AreaOf(Shaded(Shape($))))");
        assert_eq!(targets("Find m∠ABC."), "Find(MeasureOf(Angle(A,B,C)))");
        assert_eq!(targets("Find x."), "Find(x)");
        assert_eq!(targets("Find AB."), "Find(LengthOf(Line(A,B)))");
        assert_eq!(targets("Find the circumference of the circle."), "Find(PerimeterOf(Circle($)))");
        assert_eq!(targets("Find the area of sector OAB."), "Find(AreaOf(Sector(O,A,B)))");
        assert_eq!(
            targets("Find the ratio of EF to BC."),
            "Find(RatioOf(LengthOf(Line(E,F)),LengthOf(Line(B,C))))"
        );
    }

    #[test]
    fn altitude_of_the_figure() {
        let p = parse_text("CP is an altitude of the figure. Find x.").unwrap();
        assert_eq!(p.propositions.len(), 1);
        assert_eq!(p.propositions[0].to_string(), "IsAltitudeOf(Line(C,P),Shape($))");
        assert_eq!(p.target.to_string(), "Find(x)");
        assert_eq!(p.matches[0].placeholder_phrases, vec!["the figure".to_string()]);
    }

    #[test]
    fn assignments_and_relations() {
        assert_eq!(
            props("In triangle ABC, AB = 3, BC = 4, and AB ⊥ BC. Find AC."),
            vec![
                "Triangle(A,B,C)",
                "Equals(LengthOf(Line(A,B)),3)",
                "Equals(LengthOf(Line(B,C)),4)",
                "Perpendicular(Line(A,B),Line(B,C))"
            ]
        );
        assert_eq!(
            props("m∠AEC = 3x + 10°. Find x."),
            vec!["Equals(MeasureOf(Angle(A,E,C)),Add(Mul(3,x),10))"]
        );
        assert_eq!(props("AB = AC. Find x."), vec!["Equals(LengthOf(Line(A,B)),LengthOf(Line(A,C)))"]);
        assert_eq!(props("M is the midpoint of AB. Find x."), vec!["IsMidpointOf(M,Line(A,B))"]);
        assert_eq!(props("ABCD is a square. Find x."), vec!["Square(A,B,C,D)"]);
        assert_eq!(
            props("The square is circumscribed about the circle. Find x."),
            vec!["CircumscribedTo(Square($),Circle($))"]
        );
        assert_eq!(props("The radius of the circle is 3. Find x."), vec!["Equals(RadiusOf(Circle($)),3)"]);
        assert_eq!(
            props("△ABC ∼ △DEF. Find x."),
            vec!["Similar(Triangle(A,B,C),Triangle(D,E,F))"]
        );
        assert_eq!(props("Circle O has radius 1. Find x."), vec!["Equals(RadiusOf(Circle(O)),1)"]);
        assert_eq!(props("AB = 5√2. Find x."), vec!["Equals(LengthOf(Line(A,B)),Mul(5,Sqrt(2)))"]);
    }

    #[test]
    fn target_errors() {
        assert_eq!(parse_text("AB = 3."), Err(TextError::NoTargetFound));
        assert!(matches!(parse_text("Find AB. Find x."), Err(TextError::ConflictingTargets(_, _))));
        assert_eq!(parse_text("  "), Err(TextError::EmptyProse));
        assert!(parse_text("Find AB. Find AB.").is_ok());
    }

    #[test]
    fn coverage_reconstructs_text() {
        let p = parse_text("Lines cross somewhere. In triangle ABC, AB = 3. Find the length of AC.").unwrap();
        let mut pieces: Vec<&Span> = p.matches.iter().map(|m| &m.span).chain(&p.unmatched_spans).collect();
        pieces.sort_by_key(|s| s.start);
        let joined: String = pieces.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(joined, p.normalized);
        assert!(p.significant_unmatched().any(|s| s.text.contains("lines cross somewhere")));
    }

    #[test]
    fn bad_rules_rejected() {
        let bad = vec![TextRule { pattern: "({SEG})".into(), template: "Line({2:pts})".into(), priority: 0 }];
        assert!(matches!(RuleSet::new(bad), Err(TextError::BadRule { index: 0, .. })));
        let bad = vec![TextRule { pattern: "((".into(), template: "x".into(), priority: 0 }];
        assert!(RuleSet::new(bad).is_err());
    }

    #[test]
    fn unusable_match_is_left_unmatched() {
        // "triangle AB" has the wrong arity; the rule is skipped, not fatal.
        let p = parse_text("In triangle AB, find x.").unwrap();
        assert!(p.propositions.is_empty());
    }
}
