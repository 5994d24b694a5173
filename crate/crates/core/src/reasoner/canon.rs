//! Canonical forms and symmetry variants of geometric terms.

use std::collections::{BTreeMap, BTreeSet};

use crate::diagram::{angle_deg, DiagramGraph};
use crate::formal::{Pred, Term};

/// Diagram facts needed to canonicalize angles and evaluate guards.
#[derive(Debug, Clone, Default)]
pub struct Geometry {
    pub coords: BTreeMap<String, (f64, f64)>,
    lines: Vec<Vec<String>>,
    adjacency: BTreeMap<String, BTreeSet<String>>,
}

impl Geometry {
    pub fn from_graph(g: &DiagramGraph) -> Geometry {
        Geometry { coords: g.coordinates.clone(), lines: g.lines.clone(), adjacency: g.adjacency.clone() }
    }

    /// Smallest-named point on the ray from `v` through `p`.
    fn ray_rep(&self, v: &str, p: &str) -> String {
        let mut best = p.to_string();
        for line in &self.lines {
            let (Some(i), Some(j)) = (line.iter().position(|x| x == v), line.iter().position(|x| x == p)) else {
                continue;
            };
            for (k, q) in line.iter().enumerate() {
                let same_side = (k > i) == (j > i) && k != i;
                if same_side && q.as_str() < best.as_str() {
                    best = q.clone();
                }
            }
        }
        best
    }

    /// `Angle(V)` names the angle at V when exactly two rays leave V.
    fn resolve_vertex_angle(&self, v: &str) -> Option<(String, String)> {
        let rays: BTreeSet<String> = self.adjacency.get(v)?.iter().map(|n| self.ray_rep(v, n)).collect();
        let rays: Vec<String> = rays.into_iter().collect();
        match rays.as_slice() {
            [a, b] => Some((a.clone(), b.clone())),
            _ => None,
        }
    }

    pub fn coord(&self, p: &Term) -> Option<(f64, f64)> {
        p.as_point().and_then(|n| self.coords.get(n).copied())
    }

    /// Signed side of `p` relative to the directed line `a`→`b`.
    fn side(&self, p: &Term, a: &Term, b: &Term) -> Option<f64> {
        let (p, a, b) = (self.coord(p)?, self.coord(a)?, self.coord(b)?);
        let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
        let scale = ((b.0 - a.0).hypot(b.1 - a.1)) * ((p.0 - a.0).hypot(p.1 - a.1)).max(1e-12);
        Some(if cross.abs() <= 1e-9 * scale { 0.0 } else { cross.signum() })
    }

    /// Evaluates a ground guard premise.
    pub fn guard(&self, t: &Term) -> bool {
        let Term::App(pred, args) = t else { return false };
        let line = |l: &Term| match l {
            Term::App(Pred::Line, ab) => Some((ab[0].clone(), ab[1].clone())),
            _ => None,
        };
        match pred {
            Pred::SameSide | Pred::OppositeSides => {
                let Some((a, b)) = line(&args[2]) else { return false };
                match (self.side(&args[0], &a, &b), self.side(&args[1], &a, &b)) {
                    (Some(s1), Some(s2)) if s1 != 0.0 && s2 != 0.0 => (s1 == s2) == (*pred == Pred::SameSide),
                    _ => false,
                }
            }
            Pred::NotCollinear => match (self.coord(&args[0]), self.coord(&args[1]), self.coord(&args[2])) {
                (Some(a), Some(v), Some(c)) => {
                    let angle = angle_deg(a, v, c);
                    angle > 1e-6 && angle < 180.0 - 1e-6
                }
                _ => false,
            },
            _ => false,
        }
    }

    pub fn canonical(&self, t: &Term) -> Term {
        match t {
            Term::App(pred, args) => {
                let pred = *pred;
                if matches!(pred, Pred::Similar | Pred::Congruent) {
                    return match joint_variants(&args[0], &args[1]).into_iter().min() {
                        Some(v) => Term::App(pred, v.to_vec()),
                        None => t.clone(),
                    };
                }
                if pred == Pred::Angle && args.len() == 1 {
                    if let Some(v) = args[0].as_point() {
                        if let Some((a, c)) = self.resolve_vertex_angle(v) {
                            return Term::app(Pred::Angle, vec![Term::point(&a), args[0].clone(), Term::point(&c)]);
                        }
                    }
                    return t.clone();
                }
                if pred == Pred::RatioOf {
                    return self.canonical(&Term::app(Pred::Div, args.clone()));
                }
                let kids: Vec<Term> = args.iter().map(|a| self.canonical(a)).collect();
                match pred {
                    Pred::Angle if kids.len() == 3 => {
                        let v = kids[1].as_point().unwrap_or_default().to_string();
                        let rep = |k: &Term| match k.as_point() {
                            Some(p) if !v.is_empty() => Term::point(&self.ray_rep(&v, p)),
                            _ => k.clone(),
                        };
                        let (a, c) = (rep(&kids[0]), rep(&kids[2]));
                        let (a, c) = if a <= c { (a, c) } else { (c, a) };
                        Term::app(pred, vec![a, kids[1].clone(), c])
                    }
                    Pred::Add | Pred::Mul => {
                        let mut flat = Vec::new();
                        flatten(pred, &Term::App(pred, kids), &mut flat);
                        flat.sort();
                        rebuild(pred, flat)
                    }
                    _ => Term::App(pred, variants(pred, &kids).into_iter().min().unwrap_or(kids)),
                }
            }
            other => other.clone(),
        }
    }
}

fn flatten(pred: Pred, t: &Term, out: &mut Vec<Term>) {
    match t {
        Term::App(p, args) if *p == pred => args.iter().for_each(|a| flatten(pred, a, out)),
        other => out.push(other.clone()),
    }
}

fn rebuild(pred: Pred, mut items: Vec<Term>) -> Term {
    let last = items.pop().expect("nonempty operand list");
    items.into_iter().rev().fold(last, |acc, t| Term::app(pred, vec![t, acc]))
}

/// Rotations and reflections of a vertex list.
pub fn dihedral(vs: &[Term]) -> Vec<Vec<Term>> {
    let n = vs.len();
    let mut out = Vec::with_capacity(2 * n);
    for r in 0..n {
        out.push((0..n).map(|i| vs[(r + i) % n].clone()).collect());
        out.push((0..n).map(|i| vs[(r + n - i) % n].clone()).collect());
    }
    out
}

fn joint_variants(p: &Term, q: &Term) -> Vec<[Term; 2]> {
    let (Term::App(pp, pa), Term::App(qp, qa)) = (p, q) else { return Vec::new() };
    if pa.len() != qa.len() || !pp.is_polygon() || !qp.is_polygon() {
        return Vec::new();
    }
    let (da, db) = (dihedral(pa), dihedral(qa));
    let mut out = Vec::with_capacity(2 * da.len());
    for (a, b) in da.into_iter().zip(db) {
        let (a, b) = (Term::App(*pp, a), Term::App(*qp, b));
        out.push([a.clone(), b.clone()]);
        out.push([b, a]);
    }
    out
}

/// Argument lists equivalent to `args` under the predicate's symmetries.
/// Similar and Congruent are handled jointly by [`relation_variants`].
pub fn variants(pred: Pred, args: &[Term]) -> Vec<Vec<Term>> {
    let rev = || args.iter().rev().cloned().collect::<Vec<_>>();
    match pred {
        Pred::Line | Pred::Arc => vec![args.to_vec(), rev()],
        Pred::Angle if args.len() == 3 => vec![args.to_vec(), rev()],
        Pred::Sector => vec![args.to_vec(), vec![args[0].clone(), args[2].clone(), args[1].clone()]],
        p if p.is_polygon() && args.len() >= 3 => dihedral(args),
        p if p.is_symmetric_relation() && args.len() == 2 => vec![args.to_vec(), rev()],
        _ => vec![args.to_vec()],
    }
}

/// Variants of a relation's arguments; joint polygon correspondences for
/// Similar/Congruent, where the children must then match strictly.
pub fn relation_variants(pred: Pred, args: &[Term]) -> (Vec<Vec<Term>>, bool) {
    if matches!(pred, Pred::Similar | Pred::Congruent) && args.len() == 2 {
        let vs: Vec<Vec<Term>> = joint_variants(&args[0], &args[1]).into_iter().map(|v| v.to_vec()).collect();
        if !vs.is_empty() {
            return (vs, true);
        }
    }
    (variants(pred, args), false)
}
