use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::table::{Category, Pred};
use super::FormalError;

/// Denominators up to this bound (dividing it exactly) are stored as exact rationals.
pub const EXACT_DENOMINATOR: i64 = 1_000_000;
const EXACT_MAGNITUDE: f64 = 1e9;
const MAX_EXACT_INT: f64 = 9_007_199_254_740_992.0;

/// A numeric literal. Short decimals are kept exact; everything else is an `f64`.
#[derive(Debug, Clone, Copy)]
pub enum Number {
    Exact(Ratio<i64>),
    Approx(f64),
}

impl Number {
    pub fn int(n: i64) -> Number {
        Number::Exact(Ratio::from_integer(n))
    }

    /// Normalizing constructor: values that have a short exact decimal form become `Exact`.
    pub fn from_f64(v: f64) -> Option<Number> {
        if !v.is_finite() {
            return None;
        }
        if v.fract() == 0.0 && v.abs() < MAX_EXACT_INT {
            return Some(Number::int(v as i64));
        }
        if v.abs() < EXACT_MAGNITUDE {
            let scaled = (v * EXACT_DENOMINATOR as f64).round();
            if scaled / EXACT_DENOMINATOR as f64 == v {
                return Some(Number::Exact(Ratio::new(scaled as i64, EXACT_DENOMINATOR)));
            }
        }
        Some(Number::Approx(v))
    }

    /// Parses an optionally signed decimal such as `-12.5`.
    pub fn from_decimal(text: &str) -> Option<Number> {
        let (neg, digits) = match text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, text),
        };
        let (int_part, frac_part) = match digits.split_once('.') {
            Some((i, f)) => (i, f),
            None => (digits, ""),
        };
        if int_part.is_empty()
            || !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
            || (digits.contains('.') && frac_part.is_empty())
        {
            return None;
        }
        let frac_trimmed = frac_part.trim_end_matches('0');
        let short_int = int_part.len() <= 9 || (frac_trimmed.is_empty() && int_part.len() <= 15);
        if frac_trimmed.len() <= 6 && short_int {
            let int: i64 = int_part.parse().ok()?;
            let frac: i64 = if frac_trimmed.is_empty() {
                0
            } else {
                frac_trimmed.parse().ok()?
            };
            let den = 10i64.pow(frac_trimmed.len() as u32);
            let mut r = Ratio::new(int * den + frac, den);
            if neg {
                r = -r;
            }
            return Some(Number::Exact(r));
        }
        let v: f64 = text.parse().ok()?;
        Number::from_f64(v)
    }

    pub fn value(&self) -> f64 {
        match self {
            Number::Exact(r) => *r.numer() as f64 / *r.denom() as f64,
            Number::Approx(v) => *v,
        }
    }

    fn key(&self) -> (u8, i64, i64, u64) {
        match self {
            Number::Exact(r) => (0, *r.numer(), *r.denom(), 0),
            Number::Approx(v) => (1, 0, 0, v.to_bits()),
        }
    }
}

impl PartialEq for Number {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Number {}

impl Hash for Number {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state)
    }
}

impl PartialOrd for Number {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Number {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Number::Exact(a), Number::Exact(b)) => a.cmp(b),
            (Number::Approx(a), Number::Approx(b)) => a.total_cmp(b),
            (Number::Exact(_), Number::Approx(_)) => Ordering::Less,
            (Number::Approx(_), Number::Exact(_)) => Ordering::Greater,
        }
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Exact(r) => {
                let (n, d) = (*r.numer(), *r.denom());
                if d == 1 {
                    return write!(f, "{n}");
                }
                // The denominator divides 10^6, so six digits are exact.
                let scaled = n * (EXACT_DENOMINATOR / d);
                let sign = if scaled < 0 { "-" } else { "" };
                let abs = scaled.unsigned_abs();
                let int = abs / EXACT_DENOMINATOR as u64;
                let frac = abs % EXACT_DENOMINATOR as u64;
                let frac = format!("{frac:06}");
                write!(f, "{sign}{int}.{}", frac.trim_end_matches('0'))
            }
            Number::Approx(v) => write!(f, "{v}"),
        }
    }
}

/// A term of the geometry formal language.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    /// A predicate applied to arguments, e.g. `Line(A,B)`.
    App(Pred, Vec<Term>),
    /// A named diagram point, e.g. `A` or `P1`.
    Point(String),
    Num(Number),
    /// A lowercase variable, e.g. `x`. Inside theorem rules these act as pattern variables.
    Var(String),
    Pi,
    /// The `$` placeholder for something the text left unspecified.
    Unknown,
}

impl Term {
    pub fn app(pred: Pred, args: Vec<Term>) -> Term {
        Term::App(pred, args)
    }

    pub fn point(name: &str) -> Term {
        Term::Point(name.to_string())
    }

    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    pub fn int(n: i64) -> Term {
        Term::Num(Number::int(n))
    }

    pub fn line(a: &str, b: &str) -> Term {
        Term::App(Pred::Line, vec![Term::point(a), Term::point(b)])
    }

    /// An entity term over point names, e.g. `polygon(Pred::Square, ["A","B","C","D"])`.
    pub fn polygon<S: AsRef<str>>(pred: Pred, vertices: &[S]) -> Term {
        Term::App(pred, vertices.iter().map(|v| Term::point(v.as_ref())).collect())
    }

    pub fn pred(&self) -> Option<Pred> {
        match self {
            Term::App(p, _) => Some(*p),
            _ => None,
        }
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::App(_, args) => args,
            _ => &[],
        }
    }

    pub fn as_point(&self) -> Option<&str> {
        match self {
            Term::Point(p) => Some(p),
            _ => None,
        }
    }

    /// Point names of an entity whose arguments are all points.
    pub fn point_args(&self) -> Option<Vec<&str>> {
        self.args().iter().map(Term::as_point).collect()
    }

    pub fn unknown_count(&self) -> usize {
        match self {
            Term::Unknown => 1,
            Term::App(_, args) => args.iter().map(Term::unknown_count).sum(),
            _ => 0,
        }
    }

    pub fn contains_unknown(&self) -> bool {
        self.unknown_count() > 0
    }

    pub fn contains_var(&self) -> bool {
        match self {
            Term::Var(_) => true,
            Term::App(_, args) => args.iter().any(Term::contains_var),
            _ => false,
        }
    }

    /// Pre-order traversal with the tree path of every node.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&[usize], &'a Term)) {
        fn go<'a>(t: &'a Term, path: &mut Vec<usize>, f: &mut impl FnMut(&[usize], &'a Term)) {
            f(path, t);
            if let Term::App(_, args) = t {
                for (i, a) in args.iter().enumerate() {
                    path.push(i);
                    go(a, path, f);
                    path.pop();
                }
            }
        }
        go(self, &mut Vec::new(), f);
    }

    /// All point names in left-to-right order, with repeats.
    pub fn points(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit(&mut |_, t| {
            if let Term::Point(p) = t {
                out.push(p.as_str());
            }
        });
        out
    }

    pub fn at(&self, path: &[usize]) -> Option<&Term> {
        let mut cur = self;
        for &i in path {
            cur = cur.args().get(i)?;
        }
        Some(cur)
    }

    /// Returns a copy with the node at `path` replaced.
    pub fn replaced_at(&self, path: &[usize], with: Term) -> Option<Term> {
        let mut out = self.clone();
        let mut cur = &mut out;
        for &i in path {
            cur = match cur {
                Term::App(_, args) => args.get_mut(i)?,
                _ => return None,
            };
        }
        *cur = with;
        Some(out)
    }

    /// Checks point names, finiteness, and arities against the predicate table.
    pub fn validate(&self) -> Result<(), FormalError> {
        match self {
            Term::App(pred, args) => {
                let placeholder = pred.category() == Category::Entity
                    && args.len() == 1
                    && args[0] == Term::Unknown;
                if !placeholder && !pred.arity().accepts(args.len()) {
                    return Err(FormalError::Arity {
                        pred: *pred,
                        expected: pred.arity().to_string(),
                        found: args.len(),
                    });
                }
                args.iter().try_for_each(Term::validate)
            }
            Term::Point(name) => {
                if is_point_name(name) {
                    Ok(())
                } else {
                    Err(FormalError::BadName(name.clone()))
                }
            }
            Term::Var(name) => {
                if is_var_name(name) {
                    Ok(())
                } else {
                    Err(FormalError::BadName(name.clone()))
                }
            }
            Term::Num(n) => {
                if n.value().is_finite() {
                    Ok(())
                } else {
                    Err(FormalError::NonFinite)
                }
            }
            Term::Pi | Term::Unknown => Ok(()),
        }
    }
}

pub(crate) fn is_point_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase())
        && chars.all(|c| c.is_ascii_uppercase() || c.is_ascii_digit())
}

pub(crate) fn is_var_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
        && name != "pi"
        && name != "sqrt"
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::App(pred, args) => {
                write!(f, "{}(", pred.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            Term::Point(p) => f.write_str(p),
            Term::Num(n) => write!(f, "{n}"),
            Term::Var(v) => f.write_str(v),
            Term::Pi => f.write_str("pi"),
            Term::Unknown => f.write_str("$"),
        }
    }
}

impl Serialize for Term {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Term {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        super::parse_term(&text).map_err(serde::de::Error::custom)
    }
}

/// A proposition: a term whose root is a relation, goal, entity declaration, or modifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal(Term);

impl Literal {
    pub fn new(term: Term) -> Result<Literal, FormalError> {
        match term.pred().map(Pred::category) {
            Some(Category::Relation | Category::Goal | Category::Entity | Category::Modifier) => {
                Ok(Literal(term))
            }
            _ => Err(FormalError::NotALiteral(term.to_string())),
        }
    }

    pub fn parse(text: &str) -> Result<Literal, FormalError> {
        Literal::new(super::parse_term(text)?)
    }

    pub fn term(&self) -> &Term {
        &self.0
    }

    pub fn into_term(self) -> Term {
        self.0
    }

    pub fn is_goal(&self) -> bool {
        self.0.pred() == Some(Pred::Find)
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl Serialize for Literal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Literal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let term = Term::deserialize(d)?;
        Literal::new(term).map_err(serde::de::Error::custom)
    }
}
