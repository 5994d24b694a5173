#![allow(dead_code)]

use std::collections::BTreeSet;
use std::f64::consts::PI;

use geoprover_core::diagram::{DiagramGraph, DiagramParse, PointDecl};
use geoprover_core::formal::{parse_term, Arity, Number, Pred, Term};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

fn random_name(rng: &mut impl Rng, upper: bool) -> String {
    let base = if upper { b'A' } else { b'a' };
    let mut s = String::new();
    s.push((base + rng.random_range(0..26u8)) as char);
    if rng.random_bool(0.3) {
        s.push((b'0' + rng.random_range(0..10u8)) as char);
    }
    s
}

pub fn random_number(rng: &mut impl Rng) -> Number {
    let v = match rng.random_range(0..4) {
        0 => rng.random_range(-1000i64..=1000) as f64,
        1 => {
            let digits = rng.random_range(1..=6);
            let den = 10f64.powi(digits);
            (rng.random_range(-1_000_000i64..=1_000_000) as f64) / den
        }
        2 => rng.random_range(-1.0..1.0) * 10f64.powi(rng.random_range(-9..15)),
        _ => rng.random_range(0.0..360.0),
    };
    Number::from_f64(v).expect("finite")
}

fn leaf(rng: &mut impl Rng) -> Term {
    match rng.random_range(0..10) {
        0..=3 => Term::Point(random_name(rng, true)),
        4..=5 => Term::Var(random_name(rng, false)),
        6..=7 => Term::Num(random_number(rng)),
        8 => Term::Pi,
        _ => Term::Unknown,
    }
}

/// A random term that satisfies the predicate table's arities.
pub fn random_term(rng: &mut impl Rng, depth: usize) -> Term {
    if depth == 0 || rng.random_bool(0.25) {
        return leaf(rng);
    }
    let pred = *Pred::ALL.choose(rng).expect("nonempty table");
    let n = match pred.arity() {
        Arity::Exact(k) => k,
        Arity::OneOf(ks) => *ks.choose(rng).expect("nonempty"),
        Arity::AtLeast(k) => k + rng.random_range(0..3),
    };
    let args = (0..n).map(|_| random_term(rng, depth - 1)).collect();
    Term::App(pred, args)
}

/// A random graph over the first `n` capital letters; every vertex is present.
pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> DiagramGraph {
    let names = letters(n);
    let mut g = DiagramGraph::default();
    for v in &names {
        g.adjacency.entry(v.clone()).or_default();
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                g.add_edge(&names[i], &names[j]);
            }
        }
    }
    g
}

/// A random graph with a hidden cycle through a random vertex subset; returns
/// the subset in shuffled order as the candidate.
pub fn planted_cycle(rng: &mut impl Rng, n: usize, chord_p: f64) -> (DiagramGraph, Vec<String>) {
    let mut g = random_graph(rng, n, chord_p);
    let mut cycle = letters(n);
    cycle.shuffle(rng);
    cycle.truncate(rng.random_range(3..=n));
    for i in 0..cycle.len() {
        g.add_edge(&cycle[i], &cycle[(i + 1) % cycle.len()]);
    }
    cycle.shuffle(rng);
    (g, cycle)
}

pub fn letters(n: usize) -> Vec<String> {
    (0..n).map(|i| ((b'A' + i as u8) as char).to_string()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleVerdict {
    Accept,
    Repair,
    Reject,
}

/// `order` walks a cycle of graph edges and the vertex set carries no chords.
pub fn is_induced_cycle(g: &DiagramGraph, order: &[&str]) -> bool {
    let n = order.len();
    if n < 3 || order.iter().collect::<BTreeSet<_>>().len() != n {
        return false;
    }
    let mut edges = 0;
    for i in 0..n {
        for j in i + 1..n {
            if g.has_edge(order[i], order[j]) {
                edges += 1;
            }
        }
    }
    edges == n && (0..n).all(|i| g.has_edge(order[i], order[(i + 1) % n]))
}

fn permutations(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, out);
        items.swap(k, i);
    }
}

/// Tries every cyclic order of the vertices.
pub fn closure_oracle(g: &DiagramGraph, vertices: &[&str]) -> OracleVerdict {
    if is_induced_cycle(g, vertices) {
        return OracleVerdict::Accept;
    }
    let mut idx: Vec<usize> = (0..vertices.len()).collect();
    let mut all = Vec::new();
    permutations(&mut idx, 0, &mut all);
    let any = all.iter().any(|perm| {
        let order: Vec<&str> = perm.iter().map(|&i| vertices[i]).collect();
        is_induced_cycle(g, &order)
    });
    if any {
        OracleVerdict::Repair
    } else {
        OracleVerdict::Reject
    }
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub diagram: DiagramParse,
    pub literal: Term,
    pub kind: Pred,
    pub vertices: Vec<String>,
    /// Vertex geometry that has metric constraints beyond being a simple polygon.
    pub metric: bool,
}

fn regular(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            (t.cos(), t.sin())
        })
        .collect()
}

type BaseShape = (&'static str, Pred, Option<Pred>, Vec<(f64, f64)>, bool);

fn base_shapes() -> Vec<BaseShape> {
    vec![
        ("triangle", Pred::Triangle, None, vec![(0.0, 0.0), (5.0, 0.0), (1.5, 3.0)], false),
        ("equilateral", Pred::Triangle, Some(Pred::Equilateral), regular(3), true),
        ("square", Pred::Square, None, vec![(0.0, 0.0), (3.0, 0.0), (3.0, 3.0), (0.0, 3.0)], true),
        ("rectangle", Pred::Rectangle, None, vec![(0.0, 0.0), (4.0, 0.0), (4.0, 2.0), (0.0, 2.0)], true),
        ("parallelogram", Pred::Parallelogram, None, vec![(0.0, 0.0), (4.0, 0.0), (5.0, 2.0), (1.0, 2.0)], true),
        ("rhombus", Pred::Rhombus, None, vec![(0.0, 0.0), (3.0, 1.0), (6.0, 0.0), (3.0, -1.0)], true),
        ("trapezoid", Pred::Trapezoid, None, vec![(0.0, 0.0), (6.0, 0.0), (4.0, 2.0), (1.0, 2.0)], false),
        ("quadrilateral", Pred::Quadrilateral, None, vec![(0.0, 0.0), (5.0, 1.0), (4.0, 4.0), (-1.0, 3.0)], false),
        ("pentagon", Pred::Pentagon, Some(Pred::Regular), regular(5), true),
        ("hexagon", Pred::Hexagon, Some(Pred::Regular), regular(6), true),
    ]
}

/// Rotation, uniform scale, optional reflection, translation.
#[derive(Debug, Clone, Copy)]
pub struct Similarity {
    pub angle: f64,
    pub scale: f64,
    pub reflect: bool,
    pub dx: f64,
    pub dy: f64,
}

impl Similarity {
    pub fn apply(&self, (x, y): (f64, f64)) -> (f64, f64) {
        let y = if self.reflect { -y } else { y };
        let (s, c) = self.angle.sin_cos();
        (self.scale * (c * x - s * y) + self.dx, self.scale * (s * x + c * y) + self.dy)
    }
}

pub const TRANSFORMS: [Similarity; 3] = [
    Similarity { angle: 0.0, scale: 100.0, reflect: false, dx: 50.0, dy: 40.0 },
    Similarity { angle: 0.7, scale: 37.5, reflect: false, dx: 400.0, dy: -20.0 },
    Similarity { angle: 2.3, scale: 220.0, reflect: true, dx: -300.0, dy: 900.0 },
];

pub fn diagram_of(names: &[String], pts: &[(f64, f64)]) -> DiagramParse {
    let n = names.len();
    DiagramParse {
        points: names.iter().zip(pts).map(|(name, &(x, y))| PointDecl { name: name.clone(), x, y }).collect(),
        segments: (0..n).map(|i| [names[i].clone(), names[(i + 1) % n].clone()]).collect(),
        ..DiagramParse::default()
    }
}

/// Ten shape kinds under three similarity transforms.
pub fn shape_fixtures() -> Vec<Fixture> {
    let mut out = Vec::new();
    for (name, kind, modifier, pts, metric) in base_shapes() {
        for (ti, t) in TRANSFORMS.iter().enumerate() {
            let names = letters(pts.len());
            let moved: Vec<(f64, f64)> = pts.iter().map(|&p| t.apply(p)).collect();
            let shape = Term::polygon(kind, &names);
            let literal = match modifier {
                Some(m) => Term::App(m, vec![shape]),
                None => Term::App(Pred::Find, vec![Term::App(Pred::AreaOf, vec![shape])]),
            };
            out.push(Fixture {
                name: format!("{name}#{ti}"),
                diagram: diagram_of(&names, &moved),
                literal,
                kind,
                vertices: names,
                metric,
            });
        }
    }
    out
}

impl Fixture {
    /// Vertex B replaced by a point the diagram lacks.
    pub fn with_unknown_point(&self) -> Term {
        let mut names = self.vertices.clone();
        names[1] = "Z".into();
        self.replace_shape(Term::polygon(self.kind, &names))
    }

    fn replace_shape(&self, shape: Term) -> Term {
        match &self.literal {
            Term::App(Pred::Find, _) => Term::App(Pred::Find, vec![Term::App(Pred::AreaOf, vec![shape])]),
            Term::App(m, _) => Term::App(*m, vec![shape]),
            other => other.clone(),
        }
    }

    /// The side between the first two vertices removed from the diagram.
    pub fn with_missing_edge(&self) -> DiagramParse {
        let mut d = self.diagram.clone();
        let (a, b) = (&self.vertices[0], &self.vertices[1]);
        d.segments.retain(|[x, y]| !((x == a && y == b) || (x == b && y == a)));
        d
    }

    /// Vertex A displaced: pushed away from the centroid for metric shapes,
    /// otherwise dropped onto the midpoint of its neighbors.
    pub fn with_moved_vertex(&self) -> DiagramParse {
        let mut d = self.diagram.clone();
        let pts: Vec<(f64, f64)> = d.points.iter().map(|p| (p.x, p.y)).collect();
        let n = pts.len();
        let target = if self.metric {
            let cx = pts.iter().map(|p| p.0).sum::<f64>() / n as f64;
            let cy = pts.iter().map(|p| p.1).sum::<f64>() / n as f64;
            (pts[0].0 + 0.3 * (pts[0].0 - cx), pts[0].1 + 0.3 * (pts[0].1 - cy))
        } else {
            ((pts[1].0 + pts[n - 1].0) / 2.0, (pts[1].1 + pts[n - 1].1) / 2.0)
        };
        d.points[0].x = target.0;
        d.points[0].y = target.1;
        d
    }
}

fn coord(d: &DiagramParse, name: &str) -> Option<(f64, f64)> {
    d.points.iter().find(|p| p.name == name).map(|p| (p.x, p.y))
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

fn angle_at(a: (f64, f64), v: (f64, f64), b: (f64, f64)) -> f64 {
    let (ux, uy) = (a.0 - v.0, a.1 - v.1);
    let (wx, wy) = (b.0 - v.0, b.1 - v.1);
    (ux * wy - uy * wx).abs().atan2(ux * wx + uy * wy).to_degrees()
}

fn vertices(d: &DiagramParse, t: &Term) -> Option<Vec<(f64, f64)>> {
    t.point_args()?.into_iter().map(|p| coord(d, p)).collect()
}

fn circle_radius(d: &DiagramParse, t: &Term) -> Option<f64> {
    let center = t.args().first()?.as_point()?;
    d.circle_at(center).map(|c| c.radius)
}

/// Value of a measured quantity computed straight from diagram coordinates,
/// in problem units.
pub fn coordinate_value(quantity: &Term, d: &DiagramParse, ppu: f64) -> Option<f64> {
    let Term::App(measure, args) = quantity else { return None };
    let entity = args.first()?;
    let kind = entity.pred()?;
    match (measure, kind) {
        (Pred::LengthOf, Pred::Line) => {
            let v = vertices(d, entity)?;
            Some(dist(v[0], v[1]) / ppu)
        }
        (Pred::MeasureOf, Pred::Angle) if entity.args().len() == 3 => {
            let v = vertices(d, entity)?;
            Some(angle_at(v[0], v[1], v[2]))
        }
        (Pred::RadiusOf, Pred::Circle) => Some(circle_radius(d, entity)? / ppu),
        (Pred::DiameterOf, Pred::Circle) => Some(2.0 * circle_radius(d, entity)? / ppu),
        (Pred::AreaOf, Pred::Circle) => Some(PI * (circle_radius(d, entity)? / ppu).powi(2)),
        (Pred::PerimeterOf, Pred::Circle) => Some(2.0 * PI * circle_radius(d, entity)? / ppu),
        (Pred::AreaOf, Pred::Sector) => {
            let v = vertices(d, entity)?;
            let r = dist(v[0], v[1]) / ppu;
            Some(r * r * angle_at(v[1], v[0], v[2]).to_radians() / 2.0)
        }
        (Pred::AreaOf, k) if k.is_polygon() => {
            let v = vertices(d, entity)?;
            let n = v.len();
            let twice: f64 = (0..n).map(|i| v[i].0 * v[(i + 1) % n].1 - v[(i + 1) % n].0 * v[i].1).sum();
            Some(twice.abs() / 2.0 / (ppu * ppu))
        }
        (Pred::PerimeterOf, k) if k.is_polygon() => {
            let v = vertices(d, entity)?;
            let n = v.len();
            Some((0..n).map(|i| dist(v[i], v[(i + 1) % n])).sum::<f64>() / ppu)
        }
        _ => None,
    }
}

/// Parses a printed binding key; variables are not checkable against coordinates.
pub fn binding_key(key: &str) -> Option<Term> {
    match parse_term(key) {
        Ok(Term::Var(_)) | Err(_) => None,
        Ok(t) => Some(t),
    }
}
