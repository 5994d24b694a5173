//! Analytic checks that a vertex list has the geometry its predicate claims.
//!
//! All tolerances are relative (lengths), angular, or scaled by the bounding
//! box (areas), so results do not change under similarity transforms.

use crate::formal::Pred;

use super::{DiagramError, DiagramGraph};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative length tolerance.
    pub length: f64,
    /// Angular tolerance in degrees.
    pub angle_deg: f64,
    /// Area tolerance as a fraction of the bounding-box area.
    pub area: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { length: 0.02, angle_deg: 3.0, area: 1e-6 }
    }
}

type Pt = (f64, f64);

fn sub(a: Pt, b: Pt) -> Pt {
    (a.0 - b.0, a.1 - b.1)
}

fn cross(a: Pt, b: Pt) -> f64 {
    a.0 * b.1 - a.1 * b.0
}

fn dot(a: Pt, b: Pt) -> f64 {
    a.0 * b.0 + a.1 * b.1
}

fn norm(a: Pt) -> f64 {
    a.0.hypot(a.1)
}

pub(crate) fn distance(a: Pt, b: Pt) -> f64 {
    norm(sub(a, b))
}

/// Unsigned angle at `vertex` between rays to `a` and `b`, in degrees.
pub(crate) fn angle_deg(a: Pt, vertex: Pt, b: Pt) -> f64 {
    let u = sub(a, vertex);
    let v = sub(b, vertex);
    cross(u, v).abs().atan2(dot(u, v)).to_degrees()
}

/// Angle between two undirected directions, in `[0, 90]` degrees.
fn direction_gap_deg(u: Pt, v: Pt) -> f64 {
    let a = cross(u, v).abs().atan2(dot(u, v)).to_degrees();
    a.min(180.0 - a)
}

pub(crate) fn shoelace(pts: &[Pt]) -> f64 {
    let n = pts.len();
    (0..n).map(|i| cross(pts[i], pts[(i + 1) % n])).sum::<f64>() / 2.0
}

fn bbox_area(pts: &[Pt]) -> f64 {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in pts {
        x0 = x0.min(p.0);
        y0 = y0.min(p.1);
        x1 = x1.max(p.0);
        y1 = y1.max(p.1);
    }
    (x1 - x0) * (y1 - y0)
}

fn fmt_len(v: f64) -> String {
    let r = (v * 1000.0).round() / 1000.0;
    format!("{r}")
}

/// Proper crossing of segments `p1p2` and `q1q2` (touching at endpoints is not a crossing).
fn segments_cross(p1: Pt, p2: Pt, q1: Pt, q2: Pt) -> bool {
    let scale = distance(p1, p2).max(distance(q1, q2)).max(f64::MIN_POSITIVE);
    let eps = 1e-9 * scale * scale;
    let d1 = cross(sub(p2, p1), sub(q1, p1));
    let d2 = cross(sub(p2, p1), sub(q2, p1));
    let d3 = cross(sub(q2, q1), sub(p1, q1));
    let d4 = cross(sub(q2, q1), sub(p2, q1));
    ((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps)) && ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps))
}

fn sides_equal(pts: &[Pt], tol: &Tolerances, out: &mut Vec<String>) {
    let n = pts.len();
    let lens: Vec<f64> = (0..n).map(|i| distance(pts[i], pts[(i + 1) % n])).collect();
    let max = lens.iter().cloned().fold(f64::MIN, f64::max);
    let min = lens.iter().cloned().fold(f64::MAX, f64::min);
    if max > min * (1.0 + tol.length) {
        out.push(format!("side lengths {} vs {}", fmt_len(max), fmt_len(min)));
    }
}

fn right_angles(names: &[&str], pts: &[Pt], tol: &Tolerances, out: &mut Vec<String>) {
    let n = pts.len();
    for i in 0..n {
        let a = angle_deg(pts[(i + n - 1) % n], pts[i], pts[(i + 1) % n]);
        if (a - 90.0).abs() > tol.angle_deg {
            out.push(format!("angle at {} is {} degrees, expected 90", names[i], fmt_len(a)));
        }
    }
}

fn opposite_parallel(names: &[&str], pts: &[Pt], pair: usize, tol: &Tolerances) -> Result<(), String> {
    let (i, j) = (pair, pair + 2);
    let u = sub(pts[(i + 1) % 4], pts[i]);
    let v = sub(pts[(j + 1) % 4], pts[j]);
    let gap = direction_gap_deg(u, v);
    if gap > tol.angle_deg {
        Err(format!(
            "sides {}{} and {}{} are not parallel ({} degrees apart)",
            names[i],
            names[(i + 1) % 4],
            names[j],
            names[(j + 1) % 4],
            fmt_len(gap)
        ))
    } else {
        Ok(())
    }
}

fn opposite_equal(names: &[&str], pts: &[Pt], tol: &Tolerances, out: &mut Vec<String>) {
    for i in 0..2 {
        let a = distance(pts[i], pts[i + 1]);
        let b = distance(pts[i + 2], pts[(i + 3) % 4]);
        if a.max(b) > a.min(b) * (1.0 + tol.length) {
            out.push(format!(
                "opposite sides {}{} and {}{} differ: {} vs {}",
                names[i],
                names[i + 1],
                names[i + 2],
                names[(i + 3) % 4],
                fmt_len(a),
                fmt_len(b)
            ));
        }
    }
}

fn simple_polygon(names: &[&str], pts: &[Pt], tol: &Tolerances, out: &mut Vec<String>) {
    let n = pts.len();
    let before = out.len();
    for i in 0..n {
        let prev = pts[(i + n - 1) % n];
        let next = pts[(i + 1) % n];
        let a = angle_deg(prev, pts[i], next);
        if distance(prev, pts[i]) == 0.0 || distance(next, pts[i]) == 0.0 {
            out.push(format!("degenerate vertex {}: zero-length side", names[i]));
        } else if a > 180.0 - tol.angle_deg || a < tol.angle_deg {
            out.push(format!("degenerate vertex {}: straight angle", names[i]));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_cross(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]) {
                out.push(format!(
                    "self-intersecting: sides {}{} and {}{} cross",
                    names[i],
                    names[(i + 1) % n],
                    names[j],
                    names[(j + 1) % n]
                ));
            }
        }
    }
    let bbox = bbox_area(pts);
    if out.len() == before && (bbox == 0.0 || shoelace(pts).abs() <= tol.area * bbox) {
        out.push("degenerate: collinear".to_string());
    }
}

/// Checks that `vertices` realize a `kind` in the diagram's coordinates.
///
/// Returns the list of violations; empty means the shape passes.
pub fn shape_matches_geometry(
    kind: Pred,
    vertices: &[&str],
    g: &DiagramGraph,
    tol: &Tolerances,
) -> Result<Vec<String>, DiagramError> {
    let pts: Vec<Pt> = vertices
        .iter()
        .map(|v| g.coord(v).ok_or_else(|| DiagramError::MissingCoordinates(v.to_string())))
        .collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    match kind {
        Pred::Circle => {
            if vertices.len() != 1 || !g.circles.contains_key(vertices[0]) {
                out.push(format!("no circle centered at {}", vertices.join(",")));
            }
        }
        Pred::Sector => {
            match g.circles.get(vertices[0]) {
                None => out.push(format!("no circle centered at {}", vertices[0])),
                Some(&r) => {
                    for (v, p) in vertices.iter().zip(&pts).skip(1) {
                        let d = distance(*p, pts[0]);
                        if (d - r).abs() > tol.length * r {
                            out.push(format!("{v} is not on the circle centered at {}", vertices[0]));
                        }
                    }
                }
            }
        }
        Pred::Triangle => {
            if vertices.len() == 3 {
                let bbox = bbox_area(&pts);
                if bbox == 0.0 || shoelace(&pts).abs() <= tol.area * bbox {
                    out.push("degenerate: collinear".to_string());
                }
            }
        }
        Pred::Square | Pred::Rectangle | Pred::Parallelogram | Pred::Rhombus | Pred::Trapezoid => {
            simple_polygon(vertices, &pts, tol, &mut out);
            if out.is_empty() && pts.len() == 4 {
                match kind {
                    Pred::Square => {
                        sides_equal(&pts, tol, &mut out);
                        right_angles(vertices, &pts, tol, &mut out);
                    }
                    Pred::Rectangle => {
                        right_angles(vertices, &pts, tol, &mut out);
                        opposite_equal(vertices, &pts, tol, &mut out);
                    }
                    Pred::Parallelogram => {
                        for pair in 0..2 {
                            if let Err(e) = opposite_parallel(vertices, &pts, pair, tol) {
                                out.push(e);
                            }
                        }
                    }
                    Pred::Rhombus => sides_equal(&pts, tol, &mut out),
                    _ => {
                        let a = opposite_parallel(vertices, &pts, 0, tol);
                        let b = opposite_parallel(vertices, &pts, 1, tol);
                        if a.is_err() && b.is_err() {
                            out.push("no pair of opposite sides is parallel".to_string());
                        }
                    }
                }
            }
        }
        Pred::Quadrilateral | Pred::Pentagon | Pred::Hexagon | Pred::Shape => {
            simple_polygon(vertices, &pts, tol, &mut out);
        }
        _ => {}
    }
    Ok(out)
}

/// Side-equality check used for `Regular(...)` polygons.
pub(crate) fn regular_sides(vertices: &[&str], g: &DiagramGraph, tol: &Tolerances) -> Result<Vec<String>, DiagramError> {
    let pts: Vec<Pt> = vertices
        .iter()
        .map(|v| g.coord(v).ok_or_else(|| DiagramError::MissingCoordinates(v.to_string())))
        .collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    sides_equal(&pts, tol, &mut out);
    Ok(out)
}
