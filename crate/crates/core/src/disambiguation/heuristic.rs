use crate::diagram::{build_graph, distance, shape_matches_geometry, shoelace, CircleDecl, DiagramGraph, DiagramParse, Tolerances};
use crate::formal::{parse_term, Pred, Term};
use crate::gateway::{ClientError, ModelClient, ModelRequest};

/// Offline rectifier that answers from the diagram alone.
///
/// It reads the ambiguity and the diagram from the prompt, enumerates the
/// candidate shapes, and answers only when exactly one survives. Otherwise it
/// replies `$`, which the rectify loop counts as a failed round.
#[derive(Debug, Clone, Default)]
pub struct HeuristicRectifier {
    tol: Tolerances,
}

type Pt = (f64, f64);

const QUAD_KINDS: [Pred; 5] = [Pred::Square, Pred::Rectangle, Pred::Rhombus, Pred::Parallelogram, Pred::Trapezoid];

fn field<'a>(user: &'a str, prefix: &str) -> Option<&'a str> {
    user.lines().find_map(|l| l.strip_prefix(prefix)).map(str::trim)
}

fn coords(g: &DiagramGraph, vs: &[String]) -> Vec<Pt> {
    vs.iter().filter_map(|v| g.coord(v)).collect()
}

fn inside_polygon(p: Pt, poly: &[Pt]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a.1 > p.1) != (b.1 > p.1) {
            let x = a.0 + (p.1 - a.1) * (b.0 - a.0) / (b.1 - a.1);
            if p.0 < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn segment_distance(p: Pt, a: Pt, b: Pt) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) };
    distance(p, (a.0 + t * dx, a.1 + t * dy))
}

/// Strictly between `a` and `b` on the segment, relative tolerance `tol`.
fn on_open_segment(p: Pt, a: Pt, b: Pt, tol: f64) -> bool {
    let len = distance(a, b);
    len > 0.0
        && segment_distance(p, a, b) <= tol * len
        && distance(p, a) > tol * len
        && distance(p, b) > tol * len
}

#[derive(Debug, Clone)]
enum Shape {
    Polygon(Pred, Vec<String>),
    Circle(String, f64),
}

impl Shape {
    fn term(&self) -> Term {
        match self {
            Shape::Polygon(pred, vs) => Term::polygon(*pred, vs),
            Shape::Circle(c, _) => Term::app(Pred::Circle, vec![Term::point(c)]),
        }
    }
}

impl HeuristicRectifier {
    pub fn new() -> HeuristicRectifier {
        HeuristicRectifier::default()
    }

    fn passes(&self, pred: Pred, vs: &[String], g: &DiagramGraph) -> bool {
        let refs: Vec<&str> = vs.iter().map(String::as_str).collect();
        shape_matches_geometry(pred, &refs, g, &self.tol).is_ok_and(|v| v.is_empty())
    }

    /// Most specific polygon predicate the vertices satisfy.
    fn classify(&self, vs: &[String], g: &DiagramGraph) -> Pred {
        if vs.len() == 4 {
            if let Some(p) = QUAD_KINDS.iter().find(|&&p| self.passes(p, vs, g)) {
                return *p;
            }
        }
        Pred::polygon_for(vs.len())
    }

    fn polygons(&self, g: &DiagramGraph) -> Vec<Vec<String>> {
        (3..=6)
            .flat_map(|k| g.enumerate_polygons(k))
            .filter(|vs| self.passes(Pred::Shape, vs, g))
            .collect()
    }

    fn resolve_points(&self, pred: Pred, context: &[String], d: &DiagramParse, g: &DiagramGraph) -> Option<Term> {
        if pred == Pred::Circle {
            let touches = |c: &&CircleDecl| {
                context.iter().any(|p| match (g.coord(p), g.coord(&c.center)) {
                    (Some(pp), Some(cc)) => p == &c.center || (distance(pp, cc) - c.radius).abs() <= self.tol.length * c.radius,
                    _ => false,
                })
            };
            let fits: Vec<&str> = match d.circles.as_slice() {
                [only] => vec![only.center.as_str()],
                all => all.iter().filter(touches).map(|c| c.center.as_str()).collect(),
            };
            return match fits.as_slice() {
                [one] => Some(Term::app(Pred::Circle, vec![Term::point(one)])),
                _ => None,
            };
        }
        let k = pred.vertex_count()?;
        let fits: Vec<Vec<String>> = g
            .enumerate_polygons(k)
            .into_iter()
            .filter(|vs| self.passes(pred, vs, g))
            .collect();
        match fits.as_slice() {
            [one] => Some(Term::polygon(pred, one)),
            _ => None,
        }
    }

    fn resolve_shape(&self, literal: &Term, context: &[String], g: &DiagramGraph) -> Option<Term> {
        let altitude = match literal {
            Term::App(Pred::IsAltitudeOf, args) => args[0].point_args().map(|p| (p[0].to_string(), p[1].to_string())),
            _ => None,
        };
        let fits: Vec<Vec<String>> = self
            .polygons(g)
            .into_iter()
            .filter(|vs| match &altitude {
                Some((top, foot)) => {
                    let pts = coords(g, vs);
                    let Some(f) = g.coord(foot) else { return false };
                    vs.contains(top)
                        && !vs.contains(foot)
                        && (0..pts.len()).any(|i| on_open_segment(f, pts[i], pts[(i + 1) % pts.len()], self.tol.length))
                }
                None => context.iter().all(|p| vs.contains(p)),
            })
            .collect();
        match fits.as_slice() {
            [one] => Some(Term::polygon(self.classify(one, g), one)),
            _ => None,
        }
    }

    fn contains(&self, outer: &Shape, inner: &Shape, g: &DiagramGraph) -> bool {
        let slack = 1.0 + self.tol.length;
        match (outer, inner) {
            (Shape::Polygon(_, ov), Shape::Polygon(_, iv)) => {
                let (op, ip) = (coords(g, ov), coords(g, iv));
                let mut same = ov.clone();
                let mut other = iv.clone();
                same.sort();
                other.sort();
                same != other
                    && shoelace(&ip).abs() < shoelace(&op).abs()
                    && ip.iter().all(|p| {
                        inside_polygon(*p, &op)
                            || (0..op.len()).any(|i| segment_distance(*p, op[i], op[(i + 1) % op.len()]) <= 1e-9 * slack)
                    })
            }
            (Shape::Polygon(_, ov), Shape::Circle(c, r)) => {
                let op = coords(g, ov);
                let Some(cp) = g.coord(c) else { return false };
                inside_polygon(cp, &op)
                    && (0..op.len()).all(|i| segment_distance(cp, op[i], op[(i + 1) % op.len()]) * slack >= *r)
            }
            (Shape::Circle(c, r), Shape::Polygon(_, iv)) => {
                let Some(cp) = g.coord(c) else { return false };
                coords(g, iv).iter().all(|p| distance(*p, cp) <= r * slack)
            }
            (Shape::Circle(c1, r1), Shape::Circle(c2, r2)) => match (g.coord(c1), g.coord(c2)) {
                (Some(a), Some(b)) => c1 != c2 && r2 < r1 && distance(a, b) + r2 <= r1 * slack,
                _ => false,
            },
        }
    }

    fn resolve_area(&self, d: &DiagramParse, g: &DiagramGraph) -> Option<Term> {
        let mut shapes: Vec<Shape> =
            self.polygons(g).into_iter().map(|vs| Shape::Polygon(self.classify(&vs, g), vs)).collect();
        shapes.extend(d.circles.iter().map(|c| Shape::Circle(c.center.clone(), c.radius)));
        let mut pairs = Vec::new();
        for outer in &shapes {
            for inner in &shapes {
                if self.contains(outer, inner, g) {
                    pairs.push((outer, inner));
                }
            }
        }
        match pairs.as_slice() {
            [(outer, inner)] => Some(Term::app(
                Pred::Sub,
                vec![Term::app(Pred::AreaOf, vec![outer.term()]), Term::app(Pred::AreaOf, vec![inner.term()])],
            )),
            _ => None,
        }
    }

    /// Answers one ambiguity; `None` when the diagram does not single out a fill.
    pub fn answer(&self, kind: &str, term: &Term, literal: &Term, d: &DiagramParse) -> Option<Term> {
        let g = build_graph(d);
        let context: Vec<String> = literal
            .points()
            .into_iter()
            .filter(|p| !term.points().contains(p))
            .map(str::to_string)
            .collect();
        match (kind, term) {
            ("UnspecifiedAreas", _) => self.resolve_area(d, &g),
            ("UnspecifiedPoints", Term::App(pred, args)) if args.len() == 1 => self.resolve_points(*pred, &context, d, &g),
            ("UnspecifiedShapes", _) => self.resolve_shape(literal, &context, &g),
            _ => None,
        }
    }
}

impl ModelClient for HeuristicRectifier {
    fn complete(&self, req: &ModelRequest) -> Result<String, ClientError> {
        let bad = |what: &str| ClientError::InvalidRequest(format!("heuristic rectifier needs a {what} line"));
        let kind = field(&req.user, "Placeholder kind:").ok_or_else(|| bad("placeholder kind"))?;
        let term = field(&req.user, "Ambiguous term:").ok_or_else(|| bad("term"))?;
        let literal = field(&req.user, "Ambiguous literal:").ok_or_else(|| bad("literal"))?;
        let diagram = field(&req.user, "Diagram:").ok_or_else(|| bad("diagram"))?;
        let parse = |s: &str| parse_term(s).map_err(|e| ClientError::InvalidRequest(e.to_string()));
        let (term, literal) = (parse(term)?, parse(literal)?);
        let d = DiagramParse::from_json(diagram).map_err(|e| ClientError::InvalidRequest(e.to_string()))?;
        Ok(self.answer(kind, &term, &literal, &d).map(|t| t.to_string()).unwrap_or_else(|| "$".to_string()))
    }
}
