//! The geometry formal language: terms, literals, the predicate table, and
//! the canonical text serialization shared by every pipeline stage.

mod parse;
mod table;
mod term;

pub use parse::parse_term;
pub use table::{Arity, Category, Pred};
pub use term::{Literal, Number, Term, EXACT_DENOMINATOR};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FormalError {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("{pred} expects {expected} argument(s), found {found}")]
    Arity { pred: Pred, expected: String, found: usize },
    #[error("unknown predicate {0}")]
    UnknownPredicate(String),
    #[error("invalid point or variable name {0:?}")]
    BadName(String),
    #[error("numeric literal is not finite")]
    NonFinite,
    #[error("{0} is not a proposition")]
    NotALiteral(String),
    #[error("term has {expected} placeholder(s) but {found} fill(s) were given")]
    CountMismatch { expected: usize, found: usize },
    #[error("fill {0} still contains a placeholder")]
    UnknownInFill(String),
}

/// Canonical serialization. Equivalent to `Display`.
pub fn print_term(t: &Term) -> String {
    t.to_string()
}

/// How a `$` leaf is filled in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteKind {
    /// `Square($)`: the placeholder is the vertex list of a named entity.
    VertexList(Pred),
    /// `Shape($)`: the whole generic shape term is replaced by an entity.
    WholeShape,
    /// A bare `$` in some argument position.
    Bare,
}

/// Locates the node a fill replaces for the `$` at `unknown_path`.
///
/// Returns the path of that node and the kind of replacement.
pub fn placeholder_site(t: &Term, unknown_path: &[usize]) -> (Vec<usize>, SiteKind) {
    if let Some((_, parent_path)) = unknown_path.split_last() {
        if let Some(Term::App(pred, args)) = t.at(parent_path) {
            if pred.category() == Category::Entity && args.len() == 1 && *pred != Pred::Shaded {
                let kind = if *pred == Pred::Shape {
                    SiteKind::WholeShape
                } else {
                    SiteKind::VertexList(*pred)
                };
                return (parent_path.to_vec(), kind);
            }
        }
    }
    (unknown_path.to_vec(), SiteKind::Bare)
}

/// Paths of every `$` leaf, left to right.
pub fn unknown_paths(t: &Term) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    t.visit(&mut |path, node| {
        if *node == Term::Unknown {
            out.push(path.to_vec());
        }
    });
    out
}

/// The term that results from filling one site.
pub fn fill_site(kind: SiteKind, fill: &Term) -> Term {
    match kind {
        SiteKind::VertexList(pred) => match fill {
            Term::App(p, args) if *p == pred || *p == Pred::Shape => Term::App(pred, args.clone()),
            other => Term::App(pred, vec![other.clone()]),
        },
        SiteKind::WholeShape | SiteKind::Bare => fill.clone(),
    }
}

/// Replaces the k-th `$` (left to right) with `fills[k]`.
///
/// A placeholder that is the sole argument of an entity predicate stands for
/// that entity's argument list, so `Square($)` filled with `Square(A,B,C,D)`
/// (or the vertex pack `Shape(A,B,C,D)`) yields `Square(A,B,C,D)`. A `Shape($)`
/// is replaced whole by the fill.
pub fn substitute_unknowns(t: &Term, fills: &[Term]) -> Result<Term, FormalError> {
    let paths = unknown_paths(t);
    if paths.len() != fills.len() {
        return Err(FormalError::CountMismatch { expected: paths.len(), found: fills.len() });
    }
    if let Some(bad) = fills.iter().find(|f| f.contains_unknown()) {
        return Err(FormalError::UnknownInFill(bad.to_string()));
    }
    let mut out = t.clone();
    for (path, fill) in paths.iter().zip(fills).rev() {
        let (site, kind) = placeholder_site(&out, path);
        let replacement = fill_site(kind, fill);
        out = out.replaced_at(&site, replacement).expect("site path exists");
    }
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn print_examples() {
        assert_eq!(print_term(&Term::Unknown), "$");
        assert_eq!(print_term(&Term::line("A", "B")), "Line(A,B)");
        let t = parse_term("Find(AreaOf(Shaded(Shape($))))").unwrap();
        assert_eq!(print_term(&t), "Find(AreaOf(Shaded(Shape($))))");
    }

    #[test]
    fn substitute_vertex_pack() {
        let t = parse_term("Square($)").unwrap();
        let pack = parse_term("Shape(A,B,C,D)").unwrap();
        assert_eq!(substitute_unknowns(&t, &[pack]).unwrap().to_string(), "Square(A,B,C,D)");
        let same = parse_term("Square(A,B,C,D)").unwrap();
        assert_eq!(substitute_unknowns(&t, &[same]).unwrap().to_string(), "Square(A,B,C,D)");
    }

    #[test]
    fn substitute_nested() {
        let t = parse_term("CircumscribedTo(Square($),Circle($))").unwrap();
        let fills = [parse_term("Square(A,B,C,D)").unwrap(), Term::point("O")];
        let r = substitute_unknowns(&t, &fills).unwrap();
        assert_eq!(r.to_string(), "CircumscribedTo(Square(A,B,C,D),Circle(O))");
        assert_eq!(r.unknown_count(), 0);
    }

    #[test]
    fn substitute_whole_shape() {
        let t = parse_term("IsAltitudeOf(Line(C,P),Shape($))").unwrap();
        let r = substitute_unknowns(&t, &[parse_term("Triangle(A,B,C)").unwrap()]).unwrap();
        assert_eq!(r.to_string(), "IsAltitudeOf(Line(C,P),Triangle(A,B,C))");
        let t = parse_term("Find(AreaOf(Shaded(Shape($))))").unwrap();
        let fill = parse_term("AreaOf(Square(A,B,C,D)) - AreaOf(Circle(O))").unwrap();
        let r = substitute_unknowns(&t, &[fill]).unwrap();
        assert_eq!(
            r.to_string(),
            "Find(AreaOf(Shaded(Sub(AreaOf(Square(A,B,C,D)),AreaOf(Circle(O))))))"
        );
    }

    #[test]
    fn substitute_counts() {
        let t = Term::line("A", "B");
        assert_eq!(substitute_unknowns(&t, &[]).unwrap(), t);
        let t = parse_term("Equals($,$)").unwrap();
        assert!(matches!(
            substitute_unknowns(&t, &[Term::int(1)]),
            Err(FormalError::CountMismatch { expected: 2, found: 1 })
        ));
        assert!(matches!(
            substitute_unknowns(&t, &[Term::int(1), Term::Unknown]),
            Err(FormalError::UnknownInFill(_))
        ));
    }

    #[test]
    fn substitute_wrong_arity_is_rejected() {
        let t = parse_term("Triangle($)").unwrap();
        assert!(matches!(
            substitute_unknowns(&t, &[Term::point("A")]),
            Err(FormalError::Arity { .. })
        ));
    }
}
