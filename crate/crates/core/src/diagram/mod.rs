//! Diagram parses: the point/segment/circle inventory a diagram parser emits,
//! plus the graph and analytic-geometry checks built on top of it.

mod geometry;
mod graph;

pub use geometry::{shape_matches_geometry, Tolerances};
pub(crate) use geometry::{angle_deg, distance, regular_sides, shoelace};
pub use graph::{build_graph, enumerate_cycles, Closure, DiagramGraph};

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formal::Literal;

#[derive(Debug, Error)]
pub enum DiagramError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("schema error at {path}: {msg}")]
    Schema { path: String, msg: String },
    #[error("{path} references undeclared point {name}")]
    DanglingReference { path: String, name: String },
    #[error("missing coordinates for point {0}")]
    MissingCoordinates(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointDecl {
    pub name: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleDecl {
    pub center: String,
    pub radius: f64,
    #[serde(default)]
    pub on_circle: Vec<String>,
}

/// Output contract of the diagram parser.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagramParse {
    pub points: Vec<PointDecl>,
    #[serde(default)]
    pub segments: Vec<[String; 2]>,
    /// Ordered runs of points lying on one straight line.
    #[serde(default)]
    pub collinear: Vec<Vec<String>>,
    #[serde(default)]
    pub circles: Vec<CircleDecl>,
    #[serde(default)]
    pub relations: Vec<Literal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
}

impl DiagramParse {
    pub fn from_json(text: &str) -> Result<DiagramParse, DiagramError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let d: DiagramParse = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            DiagramError::Schema { path, msg: e.into_inner().to_string() }
        })?;
        d.validate()?;
        Ok(d)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("diagram serializes")
    }

    pub fn point_names(&self) -> Vec<&str> {
        self.points.iter().map(|p| p.name.as_str()).collect()
    }

    pub fn has_point(&self, name: &str) -> bool {
        self.points.iter().any(|p| p.name == name)
    }

    pub fn circle_at(&self, center: &str) -> Option<&CircleDecl> {
        self.circles.iter().find(|c| c.center == center)
    }

    pub fn validate(&self) -> Result<(), DiagramError> {
        let schema = |path: String, msg: &str| DiagramError::Schema { path, msg: msg.to_string() };
        let mut names = BTreeSet::new();
        for (i, p) in self.points.iter().enumerate() {
            if crate::formal::Term::Point(p.name.clone()).validate().is_err() {
                return Err(schema(format!("points[{i}].name"), "invalid point name"));
            }
            if !names.insert(p.name.as_str()) {
                return Err(schema(format!("points[{i}].name"), "duplicate point name"));
            }
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(schema(format!("points[{i}]"), "coordinates must be finite"));
            }
        }
        let check = |path: String, name: &str| {
            if names.contains(name) {
                Ok(())
            } else {
                Err(DiagramError::DanglingReference { path, name: name.to_string() })
            }
        };
        for (i, [a, b]) in self.segments.iter().enumerate() {
            check(format!("segments[{i}][0]"), a)?;
            check(format!("segments[{i}][1]"), b)?;
            if a == b {
                return Err(schema(format!("segments[{i}]"), "segment endpoints must be distinct"));
            }
        }
        for (i, group) in self.collinear.iter().enumerate() {
            if group.len() < 2 {
                return Err(schema(format!("collinear[{i}]"), "needs at least two points"));
            }
            let mut seen = BTreeSet::new();
            for (j, name) in group.iter().enumerate() {
                check(format!("collinear[{i}][{j}]"), name)?;
                if !seen.insert(name) {
                    return Err(schema(format!("collinear[{i}][{j}]"), "repeated point"));
                }
            }
        }
        for (i, c) in self.circles.iter().enumerate() {
            check(format!("circles[{i}].center"), &c.center)?;
            if !(c.radius > 0.0 && c.radius.is_finite()) {
                return Err(schema(format!("circles[{i}].radius"), "radius must be positive"));
            }
            for (j, name) in c.on_circle.iter().enumerate() {
                check(format!("circles[{i}].on_circle[{j}]"), name)?;
            }
        }
        for (i, rel) in self.relations.iter().enumerate() {
            for name in rel.term().points() {
                check(format!("relations[{i}]"), name)?;
            }
        }
        Ok(())
    }
}

/// Reads and validates a diagram-parse JSON file.
pub fn load_diagram(path: &Path) -> Result<DiagramParse, DiagramError> {
    let text = fs::read_to_string(path)
        .map_err(|source| DiagramError::Io { path: path.to_path_buf(), source })?;
    DiagramParse::from_json(&text)
}
