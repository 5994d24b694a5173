//! The closed predicate table of the geometry formal language.

use std::fmt;

/// What role a predicate plays in a formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    /// Geometric objects: points, lines, polygons, circles, shaded regions.
    Entity,
    /// Numeric quantities attached to entities (`LengthOf`, `AreaOf`, ...).
    Measure,
    /// Propositions relating terms (`Equals`, `Parallel`, ...).
    Relation,
    /// The problem target (`Find`).
    Goal,
    /// Qualifiers on entities (`Equilateral`, `Regular`, ...).
    Modifier,
    /// Arithmetic over numbers and measures.
    Arithmetic,
    /// Coordinate conditions used only in theorem definitions.
    Guard,
}

/// Accepted argument counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    Exact(usize),
    OneOf(&'static [usize]),
    AtLeast(usize),
}

impl Arity {
    pub fn accepts(self, n: usize) -> bool {
        match self {
            Arity::Exact(k) => n == k,
            Arity::OneOf(ks) => ks.contains(&n),
            Arity::AtLeast(k) => n >= k,
        }
    }
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arity::Exact(k) => write!(f, "{k}"),
            Arity::OneOf(ks) => {
                let parts: Vec<String> = ks.iter().map(|k| k.to_string()).collect();
                write!(f, "{}", parts.join(" or "))
            }
            Arity::AtLeast(k) => write!(f, "at least {k}"),
        }
    }
}

macro_rules! predicates {
    ($($variant:ident => $arity:expr, $cat:ident;)*) => {
        /// A predicate symbol. The set is closed: parsing any other name fails.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Pred {
            $($variant,)*
        }

        impl Pred {
            pub const ALL: &'static [Pred] = &[$(Pred::$variant,)*];

            pub fn name(self) -> &'static str {
                match self {
                    $(Pred::$variant => stringify!($variant),)*
                }
            }

            pub fn from_name(name: &str) -> Option<Pred> {
                match name {
                    $(stringify!($variant) => Some(Pred::$variant),)*
                    _ => None,
                }
            }

            pub fn arity(self) -> Arity {
                match self {
                    $(Pred::$variant => $arity,)*
                }
            }

            pub fn category(self) -> Category {
                match self {
                    $(Pred::$variant => Category::$cat,)*
                }
            }
        }
    };
}

use Arity::{AtLeast, Exact, OneOf};

predicates! {
    Point => Exact(1), Entity;
    Line => Exact(2), Entity;
    Angle => OneOf(&[1, 3]), Entity;
    Arc => OneOf(&[2, 3]), Entity;
    Circle => Exact(1), Entity;
    Triangle => Exact(3), Entity;
    Quadrilateral => Exact(4), Entity;
    Parallelogram => Exact(4), Entity;
    Rectangle => Exact(4), Entity;
    Square => Exact(4), Entity;
    Rhombus => Exact(4), Entity;
    Trapezoid => Exact(4), Entity;
    Pentagon => Exact(5), Entity;
    Hexagon => Exact(6), Entity;
    Shape => AtLeast(1), Entity;
    Shaded => AtLeast(1), Entity;
    Sector => Exact(3), Entity;

    LengthOf => Exact(1), Measure;
    MeasureOf => Exact(1), Measure;
    AreaOf => Exact(1), Measure;
    PerimeterOf => Exact(1), Measure;
    RadiusOf => Exact(1), Measure;
    DiameterOf => Exact(1), Measure;
    RatioOf => Exact(2), Measure;
    ScaleFactorOf => Exact(2), Measure;

    Equals => Exact(2), Relation;
    CircumscribedTo => Exact(2), Relation;
    InscribedIn => Exact(2), Relation;
    IsAltitudeOf => Exact(2), Relation;
    IsMidpointOf => Exact(2), Relation;
    Perpendicular => Exact(2), Relation;
    Parallel => Exact(2), Relation;
    Tangent => Exact(2), Relation;
    PointLiesOnLine => Exact(2), Relation;
    PointLiesOnCircle => Exact(2), Relation;
    Similar => Exact(2), Relation;
    Congruent => Exact(2), Relation;

    Find => Exact(1), Goal;

    Equilateral => Exact(1), Modifier;
    Isosceles => Exact(1), Modifier;
    Regular => Exact(1), Modifier;

    Add => Exact(2), Arithmetic;
    Sub => Exact(2), Arithmetic;
    Mul => Exact(2), Arithmetic;
    Div => Exact(2), Arithmetic;
    Pow => Exact(2), Arithmetic;
    Sqrt => Exact(1), Arithmetic;

    SameSide => Exact(3), Guard;
    OppositeSides => Exact(3), Guard;
    NotCollinear => Exact(3), Guard;
}

impl Pred {
    /// Closed polygons whose arguments are an ordered vertex list.
    pub fn is_polygon(self) -> bool {
        matches!(
            self,
            Pred::Triangle
                | Pred::Quadrilateral
                | Pred::Parallelogram
                | Pred::Rectangle
                | Pred::Square
                | Pred::Rhombus
                | Pred::Trapezoid
                | Pred::Pentagon
                | Pred::Hexagon
                | Pred::Shape
        )
    }

    /// Number of vertices a polygon predicate requires, if fixed.
    pub fn vertex_count(self) -> Option<usize> {
        match (self.is_polygon(), self.arity()) {
            (true, Arity::Exact(k)) => Some(k),
            _ => None,
        }
    }

    /// Relations whose two arguments may be swapped freely.
    pub fn is_symmetric_relation(self) -> bool {
        matches!(
            self,
            Pred::Equals
                | Pred::Perpendicular
                | Pred::Parallel
                | Pred::Similar
                | Pred::Congruent
        )
    }

    /// Polygon predicate for a vertex count, the most generic fitting name.
    pub fn polygon_for(n: usize) -> Pred {
        match n {
            3 => Pred::Triangle,
            4 => Pred::Quadrilateral,
            5 => Pred::Pentagon,
            6 => Pred::Hexagon,
            _ => Pred::Shape,
        }
    }
}

impl fmt::Display for Pred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
