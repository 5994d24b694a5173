use serde::{Deserialize, Serialize};

use crate::diagram::{regular_sides, shape_matches_geometry, Closure, DiagramError, DiagramGraph, DiagramParse, Tolerances};
use crate::formal::{Literal, Pred, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Heuristic {
    EntityExistence,
    ShapeClosure,
    VertexGeometry,
    /// The reply could not be read as a fill; not one of the diagram checks.
    ReplyFormat,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub heuristic: Heuristic,
    pub message: String,
}

impl Violation {
    pub fn new(heuristic: Heuristic, message: impl Into<String>) -> Violation {
        Violation { heuristic, message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accepted,
    Repaired,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repaired_literal: Option<Literal>,
    pub violations: Vec<Violation>,
}

impl VerificationReport {
    pub fn accepted() -> VerificationReport {
        VerificationReport { verdict: Verdict::Accepted, repaired_literal: None, violations: Vec::new() }
    }

    pub fn rejected(violations: Vec<Violation>) -> VerificationReport {
        VerificationReport { verdict: Verdict::Rejected, repaired_literal: None, violations }
    }

    pub fn is_ok(&self) -> bool {
        self.verdict != Verdict::Rejected
    }
}

/// Subterms that are fully specified shapes: polygons with point vertices,
/// circles, and sectors. Placeholder-bearing subterms are skipped.
fn shapes(t: &Term) -> Vec<(Vec<usize>, Pred, Vec<&str>)> {
    let mut out = Vec::new();
    t.visit(&mut |path, node| {
        if let Term::App(pred, _) = node {
            let shape = pred.is_polygon() || matches!(pred, Pred::Circle | Pred::Sector);
            if shape && !node.contains_unknown() {
                if let Some(vs) = node.point_args() {
                    out.push((path.to_vec(), *pred, vs));
                }
            }
        }
    });
    out
}

/// Every point exists, every circle is a diagram circle, and every line joins
/// connected points.
pub fn verify_entities(candidate: &Term, d: &DiagramParse) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = Vec::new();
    for p in candidate.points() {
        if !d.has_point(p) && !seen.contains(&p) {
            out.push(Violation::new(Heuristic::EntityExistence, format!("unknown point {p}")));
            seen.push(p);
        }
    }
    let g = crate::diagram::build_graph(d);
    candidate.visit(&mut |_, node| match node {
        Term::App(Pred::Circle, args) => {
            if let Some(c) = args[0].as_point() {
                if d.has_point(c) && d.circle_at(c).is_none() {
                    out.push(Violation::new(Heuristic::EntityExistence, format!("no circle centered at {c}")));
                }
            }
        }
        Term::App(Pred::Line, args) => {
            if let (Some(a), Some(b)) = (args[0].as_point(), args[1].as_point()) {
                if d.has_point(a) && d.has_point(b) && !g.connected(a, b) {
                    out.push(Violation::new(Heuristic::EntityExistence, format!("no line joins {a} and {b}")));
                }
            }
        }
        _ => {}
    });
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClosureOutcome {
    Accepted,
    Repaired(Term),
    Rejected(Vec<Violation>),
}

/// Each polygon's vertex set must induce one simple cycle; a cycle listed in
/// the wrong order is repaired into cycle order.
pub fn verify_shape_closure(candidate: &Term, g: &DiagramGraph) -> ClosureOutcome {
    let mut repaired = candidate.clone();
    let mut changed = false;
    let mut violations = Vec::new();
    for (path, pred, vertices) in shapes(candidate) {
        if !pred.is_polygon() || vertices.len() < 3 {
            continue;
        }
        match g.closure(&vertices) {
            Closure::Cycle(order) => {
                if order.iter().map(String::as_str).ne(vertices.iter().copied()) {
                    changed = true;
                    repaired = repaired
                        .replaced_at(&path, Term::polygon(pred, &order))
                        .expect("shape path exists");
                }
            }
            Closure::Broken(msgs) => {
                for m in msgs {
                    violations.push(Violation::new(
                        Heuristic::ShapeClosure,
                        format!("{}({}): {m}", pred.name(), vertices.join(",")),
                    ));
                }
            }
        }
    }
    if !violations.is_empty() {
        ClosureOutcome::Rejected(violations)
    } else if changed {
        ClosureOutcome::Repaired(repaired)
    } else {
        ClosureOutcome::Accepted
    }
}

/// Analytic checks of every shape, plus side equality under `Regular` and
/// `Equilateral`.
pub fn verify_vertex_geometry(candidate: &Term, g: &DiagramGraph) -> Result<Vec<Violation>, DiagramError> {
    let tol = Tolerances::default();
    let mut out = Vec::new();
    for (_, pred, vertices) in shapes(candidate) {
        for m in shape_matches_geometry(pred, &vertices, g, &tol)? {
            out.push(Violation::new(Heuristic::VertexGeometry, format!("{}({}): {m}", pred.name(), vertices.join(","))));
        }
    }
    let mut modified = Vec::new();
    candidate.visit(&mut |_, node| {
        if let Term::App(Pred::Regular | Pred::Equilateral, args) = node {
            if let Some(vs) = args[0].point_args() {
                if args[0].pred().is_some_and(Pred::is_polygon) {
                    modified.push(vs);
                }
            }
        }
    });
    for vs in modified {
        for m in regular_sides(&vs, g, &tol)? {
            out.push(Violation::new(Heuristic::VertexGeometry, format!("not regular: {m}")));
        }
    }
    Ok(out)
}

/// Runs the three heuristics in order; geometry is checked on the repaired
/// form when closure reorders vertices.
pub fn verify(candidate: &Term, d: &DiagramParse, g: &DiagramGraph) -> VerificationReport {
    let entity = verify_entities(candidate, d);
    if !entity.is_empty() {
        return VerificationReport::rejected(entity);
    }
    let (checked, repaired) = match verify_shape_closure(candidate, g) {
        ClosureOutcome::Rejected(v) => return VerificationReport::rejected(v),
        ClosureOutcome::Accepted => (candidate.clone(), None),
        ClosureOutcome::Repaired(t) => (t.clone(), Some(t)),
    };
    match verify_vertex_geometry(&checked, g) {
        Err(e) => VerificationReport::rejected(vec![Violation::new(Heuristic::VertexGeometry, e.to_string())]),
        Ok(v) if !v.is_empty() => VerificationReport::rejected(v),
        Ok(_) => match repaired {
            None => VerificationReport::accepted(),
            Some(t) => match Literal::new(t) {
                Ok(lit) => VerificationReport { verdict: Verdict::Repaired, repaired_literal: Some(lit), violations: Vec::new() },
                Err(e) => VerificationReport::rejected(vec![Violation::new(Heuristic::ShapeClosure, e.to_string())]),
            },
        },
    }
}
