//! Numeric evaluation and single-unknown equation solving.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::formal::{Category, Pred, Term};

pub type Bindings = BTreeMap<Term, f64>;

const REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Equation {
    pub lhs: Term,
    pub rhs: Term,
}

impl std::fmt::Display for Equation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} = {}", self.lhs, self.rhs)
    }
}

/// Quantities that equations may refer to.
pub fn is_quantity(t: &Term) -> bool {
    match t {
        Term::Num(_) | Term::Pi | Term::Var(_) => true,
        Term::App(p, _) => matches!(p.category(), Category::Measure | Category::Arithmetic),
        _ => false,
    }
}

fn is_atom(t: &Term) -> bool {
    match t {
        Term::Var(_) => true,
        Term::App(p, _) => p.category() == Category::Measure,
        _ => false,
    }
}

fn shaded_expr(t: &Term) -> Option<&Term> {
    match t {
        Term::App(Pred::AreaOf, a) => match &a[0] {
            Term::App(Pred::Shaded, e) if e.len() == 1 => Some(&e[0]),
            _ => None,
        },
        _ => None,
    }
}

/// Value of `t` under `b`, with `extra` overriding one atom.
pub fn eval_with(t: &Term, b: &Bindings, extra: Option<(&Term, f64)>) -> Option<f64> {
    if let Some((atom, v)) = extra {
        if t == atom {
            return Some(v);
        }
    }
    let v = match t {
        Term::Num(n) => n.value(),
        Term::Pi => PI,
        Term::App(pred, args) if pred.category() == Category::Arithmetic => {
            let x = eval_with(&args[0], b, extra)?;
            let y = || eval_with(&args[1], b, extra);
            match pred {
                Pred::Add => x + y()?,
                Pred::Sub => x - y()?,
                Pred::Mul => x * y()?,
                Pred::Div => {
                    let d = y()?;
                    if d == 0.0 {
                        return None;
                    }
                    x / d
                }
                Pred::Pow => x.powf(y()?),
                _ => x.sqrt(),
            }
        }
        t if is_atom(t) => match b.get(t) {
            Some(v) => *v,
            None => return shaded_expr(t).and_then(|e| eval_with(e, b, extra)),
        },
        _ => return None,
    };
    v.is_finite().then_some(v)
}

pub fn eval(t: &Term, b: &Bindings) -> Option<f64> {
    eval_with(t, b, None)
}

/// Atoms of `t` with no value yet.
pub fn unknown_atoms(t: &Term, b: &Bindings, out: &mut BTreeSet<Term>) {
    if eval(t, b).is_some() {
        return;
    }
    match t {
        t if is_atom(t) => {
            out.insert(t.clone());
        }
        Term::App(pred, args) if pred.category() == Category::Arithmetic => {
            args.iter().for_each(|a| unknown_atoms(a, b, out));
        }
        _ => {}
    }
}

/// `Σ coef·atom + constant`.
struct Affine {
    coef: BTreeMap<Term, f64>,
    constant: f64,
}

impl Affine {
    fn constant(c: f64) -> Affine {
        Affine { coef: BTreeMap::new(), constant: c }
    }

    fn scaled(mut self, k: f64) -> Affine {
        self.coef.values_mut().for_each(|c| *c *= k);
        self.constant *= k;
        self
    }

    fn plus(mut self, other: Affine, sign: f64) -> Affine {
        for (t, c) in other.coef {
            *self.coef.entry(t).or_insert(0.0) += sign * c;
        }
        self.constant += sign * other.constant;
        self
    }

    fn as_constant(&self) -> Option<f64> {
        self.coef.values().all(|c| *c == 0.0).then_some(self.constant)
    }
}

fn affine(t: &Term, b: &Bindings) -> Option<Affine> {
    if let Some(v) = eval(t, b) {
        return Some(Affine::constant(v));
    }
    match t {
        t if is_atom(t) => Some(Affine { coef: BTreeMap::from([(t.clone(), 1.0)]), constant: 0.0 }),
        Term::App(pred, args) => {
            let x = affine(&args[0], b)?;
            match pred {
                Pred::Add => Some(x.plus(affine(&args[1], b)?, 1.0)),
                Pred::Sub => Some(x.plus(affine(&args[1], b)?, -1.0)),
                Pred::Mul => {
                    let y = affine(&args[1], b)?;
                    match (x.as_constant(), y.as_constant()) {
                        (Some(k), _) => Some(y.scaled(k)),
                        (_, Some(k)) => Some(x.scaled(k)),
                        _ => None,
                    }
                }
                Pred::Div => match affine(&args[1], b)?.as_constant() {
                    Some(k) if k != 0.0 => Some(x.scaled(1.0 / k)),
                    _ => None,
                },
                Pred::Pow => match affine(&args[1], b)?.as_constant() {
                    Some(1.0) => Some(x),
                    _ => None,
                },
                _ => None,
            }
        }
        _ => None,
    }
}

/// Admissible value ranges for an unknown, tried in order.
fn domains(atom: &Term) -> Vec<(f64, f64)> {
    match atom {
        Term::Var(_) => vec![(0.0, f64::INFINITY), (f64::NEG_INFINITY, 0.0)],
        Term::App(Pred::MeasureOf, a) if a[0].pred() == Some(Pred::Angle) => vec![(0.0, 180.0)],
        Term::App(Pred::MeasureOf, a) if a[0].pred() == Some(Pred::Arc) => vec![(0.0, 360.0)],
        _ => vec![(0.0, f64::INFINITY)],
    }
}

fn grid(lo: f64, hi: f64) -> Vec<f64> {
    if hi.is_finite() && lo.is_finite() {
        let n = 7200;
        (1..n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
    } else {
        let sign = if hi.is_finite() { -1.0 } else { 1.0 };
        let mut g: Vec<f64> = (0..=1300).map(|i| sign * 10f64.powf(-6.0 + i as f64 / 100.0)).collect();
        g.sort_by(f64::total_cmp);
        g
    }
}

/// Roots of `f` in one domain, found by sign changes on a grid and refined by bisection.
fn roots_in(f: &dyn Fn(f64) -> Option<f64>, scale: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> Vec<f64> {
    let xs = grid(lo, hi);
    let ys: Vec<Option<f64>> = xs.iter().map(|&x| f(x)).collect();
    let mut roots: Vec<f64> = Vec::new();
    let accept = |x: f64, roots: &mut Vec<f64>| {
        match f(x) {
            Some(y) if y.abs() <= REL_TOL * scale(x) => {}
            _ => return,
        }
        if !roots.iter().any(|r| (r - x).abs() <= 1e-7 * r.abs().max(1.0)) {
            roots.push(x);
        }
    };
    for i in 0..xs.len() {
        if ys[i] == Some(0.0) {
            accept(xs[i], &mut roots);
        }
        if i + 1 == xs.len() {
            break;
        }
        let (Some(ya), Some(yb)) = (ys[i], ys[i + 1]) else { continue };
        if ya.signum() == yb.signum() || ya == 0.0 || yb == 0.0 {
            continue;
        }
        let (mut a, mut b, mut fa) = (xs[i], xs[i + 1], ya);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m == a || m == b {
                break;
            }
            match f(m) {
                Some(0.0) => {
                    a = m;
                    b = m;
                    break;
                }
                Some(fm) if fm.signum() == fa.signum() => {
                    a = m;
                    fa = fm;
                }
                Some(_) => b = m,
                None => break,
            }
        }
        accept(0.5 * (a + b), &mut roots);
    }
    roots
}

fn in_domain(x: f64, (lo, hi): (f64, f64)) -> bool {
    x > lo && x < hi
}

#[derive(Debug, Clone, PartialEq)]
pub enum EquationStatus {
    Satisfied,
    Violated { lhs: f64, rhs: f64 },
    Solved(Term, f64),
    Open,
}

/// Checks a fully bound equation or solves it for its single unknown when
/// exactly one admissible root exists.
pub fn solve_equation(eq: &Equation, b: &Bindings) -> EquationStatus {
    let mut unknowns = BTreeSet::new();
    unknown_atoms(&eq.lhs, b, &mut unknowns);
    unknown_atoms(&eq.rhs, b, &mut unknowns);
    if unknowns.is_empty() {
        return match (eval(&eq.lhs, b), eval(&eq.rhs, b)) {
            (Some(l), Some(r)) if (l - r).abs() > REL_TOL * l.abs().max(r.abs()).max(1.0) => {
                EquationStatus::Violated { lhs: l, rhs: r }
            }
            _ => EquationStatus::Satisfied,
        };
    }
    if unknowns.len() != 1 {
        return EquationStatus::Open;
    }
    let atom = unknowns.into_iter().next().expect("one unknown");
    let doms = domains(&atom);
    if let (Some(l), Some(r)) = (affine(&eq.lhs, b), affine(&eq.rhs, b)) {
        let diff = l.plus(r, -1.0);
        let a = diff.coef.get(&atom).copied().unwrap_or(0.0);
        if a == 0.0 {
            return EquationStatus::Open;
        }
        let x = -diff.constant / a;
        return match doms.iter().any(|d| in_domain(x, *d)) {
            true => EquationStatus::Solved(atom, x),
            false => EquationStatus::Open,
        };
    }
    let f = |x: f64| Some(eval_with(&eq.lhs, b, Some((&atom, x)))? - eval_with(&eq.rhs, b, Some((&atom, x)))?);
    let scale = |x: f64| {
        let l = eval_with(&eq.lhs, b, Some((&atom, x))).unwrap_or(0.0);
        let r = eval_with(&eq.rhs, b, Some((&atom, x))).unwrap_or(0.0);
        l.abs().max(r.abs()).max(1.0)
    };
    for (lo, hi) in doms {
        match roots_in(&f, &scale, lo, hi).as_slice() {
            [] => continue,
            [x] => return EquationStatus::Solved(atom, *x),
            _ => return EquationStatus::Open,
        }
    }
    EquationStatus::Open
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formal::parse_term;

    fn eq(l: &str, r: &str) -> Equation {
        Equation { lhs: parse_term(l).unwrap(), rhs: parse_term(r).unwrap() }
    }

    fn solved(e: &Equation, b: &Bindings) -> f64 {
        match solve_equation(e, b) {
            EquationStatus::Solved(_, v) => v,
            other => panic!("{e}: {other:?}"),
        }
    }

    #[test]
    fn linear() {
        let b = Bindings::new();
        assert!((solved(&eq("2*x + 3", "11"), &b) - 4.0).abs() < 1e-12);
        assert!((solved(&eq("x - 5", "-8"), &b) + 3.0).abs() < 1e-12);
        assert_eq!(solve_equation(&eq("x", "x"), &b), EquationStatus::Open);
        assert_eq!(solve_equation(&eq("x + y", "3"), &b), EquationStatus::Open);
    }

    #[test]
    fn nonlinear_unique_positive() {
        let mut b = Bindings::new();
        b.insert(parse_term("LengthOf(Line(A,B))").unwrap(), 3.0);
        let e = eq("LengthOf(Line(A,C))^2", "LengthOf(Line(A,B))^2 + 16");
        assert!((solved(&e, &b) - 5.0).abs() < 1e-9);
        let e = eq("x^2", "49");
        assert!((solved(&e, &b) - 7.0).abs() < 1e-9);
    }

    #[test]
    fn ambiguous_roots_left_open() {
        let b = Bindings::new();
        assert_eq!(solve_equation(&eq("(x - 2)*(x - 3)", "0"), &b), EquationStatus::Open);
        assert_eq!(solve_equation(&eq("MeasureOf(Angle(A,B,C))", "200"), &b), EquationStatus::Open);
    }

    #[test]
    fn violated() {
        let b = Bindings::new();
        assert!(matches!(solve_equation(&eq("1 + 1", "3"), &b), EquationStatus::Violated { .. }));
        assert_eq!(solve_equation(&eq("sqrt(2)^2", "2"), &b), EquationStatus::Satisfied);
    }

    #[test]
    fn shaded_falls_back_to_expression() {
        let mut b = Bindings::new();
        b.insert(parse_term("AreaOf(Circle(O))").unwrap(), 2.0);
        let t = parse_term("AreaOf(Shaded(AreaOf(Circle(O))*3))").unwrap();
        assert_eq!(eval(&t, &b), Some(6.0));
    }
}
