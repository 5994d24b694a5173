use std::collections::{BTreeMap, BTreeSet};

use super::DiagramParse;

/// Adjacency view of a diagram.
///
/// Besides plain segment adjacency the graph keeps the ordered collinear runs,
/// so a polygon side may pass through intermediate points of a line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagramGraph {
    pub adjacency: BTreeMap<String, BTreeSet<String>>,
    pub coordinates: BTreeMap<String, (f64, f64)>,
    pub lines: Vec<Vec<String>>,
    /// Circle center → radius.
    pub circles: BTreeMap<String, f64>,
}

/// Result of checking whether a vertex list closes into one simple cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Closure {
    /// The vertices form a cycle; this is its canonical order.
    Cycle(Vec<String>),
    Broken(Vec<String>),
}

pub fn build_graph(d: &DiagramParse) -> DiagramGraph {
    let mut g = DiagramGraph::default();
    for p in &d.points {
        g.adjacency.entry(p.name.clone()).or_default();
        g.coordinates.insert(p.name.clone(), (p.x, p.y));
    }
    for [a, b] in &d.segments {
        g.add_edge(a, b);
    }
    for group in &d.collinear {
        for pair in group.windows(2) {
            g.add_edge(&pair[0], &pair[1]);
        }
        g.lines.push(group.clone());
    }
    for c in &d.circles {
        g.circles.insert(c.center.clone(), c.radius);
    }
    g
}

impl DiagramGraph {
    /// An adjacency-only graph, mostly for tests.
    pub fn from_edges(edges: &[(&str, &str)]) -> DiagramGraph {
        let mut g = DiagramGraph::default();
        for (a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    pub fn add_edge(&mut self, a: &str, b: &str) {
        if a == b {
            return;
        }
        self.adjacency.entry(a.to_string()).or_default().insert(b.to_string());
        self.adjacency.entry(b.to_string()).or_default().insert(a.to_string());
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        self.adjacency.get(a).is_some_and(|n| n.contains(b))
    }

    pub fn neighbors(&self, a: &str) -> impl Iterator<Item = &str> {
        self.adjacency.get(a).into_iter().flatten().map(String::as_str)
    }

    pub fn contains(&self, a: &str) -> bool {
        self.adjacency.contains_key(a) || self.coordinates.contains_key(a)
    }

    pub fn coord(&self, a: &str) -> Option<(f64, f64)> {
        self.coordinates.get(a).copied()
    }

    /// `a` and `b` lie on one recorded line, at positions `(i, j)` of that run.
    fn on_common_line(&self, a: &str, b: &str) -> Option<(&[String], usize, usize)> {
        self.lines.iter().find_map(|line| {
            let i = line.iter().position(|p| p == a)?;
            let j = line.iter().position(|p| p == b)?;
            Some((line.as_slice(), i, j))
        })
    }

    /// Joined by a segment or by a collinear chain.
    pub fn connected(&self, a: &str, b: &str) -> bool {
        a != b && (self.has_edge(a, b) || self.on_common_line(a, b).is_some())
    }

    /// Whether `a`–`b` can be a polygon side when `vertices` are the polygon's corners:
    /// a direct segment, or a collinear chain with no other corner strictly inside it.
    pub fn side_adjacent(&self, a: &str, b: &str, vertices: &BTreeSet<&str>) -> bool {
        if a == b {
            return false;
        }
        if self.has_edge(a, b) {
            return true;
        }
        match self.on_common_line(a, b) {
            Some((line, i, j)) => {
                let (lo, hi) = if i < j { (i, j) } else { (j, i) };
                line[lo + 1..hi].iter().all(|p| !vertices.contains(p.as_str()))
            }
            None => false,
        }
    }

    /// Graph in which collinear chains are single edges; polygon sides are its edges.
    pub fn side_graph(&self) -> DiagramGraph {
        let mut g = self.clone();
        for line in &self.lines {
            for i in 0..line.len() {
                for j in i + 1..line.len() {
                    g.add_edge(&line[i], &line[j]);
                }
            }
        }
        g.lines.clear();
        g
    }

    /// Checks that `vertices` induce exactly one simple cycle and returns it in
    /// canonical order: starting from the first listed vertex, heading toward
    /// whichever neighbor the list mentions earlier.
    pub fn closure(&self, vertices: &[&str]) -> Closure {
        let n = vertices.len();
        let set: BTreeSet<&str> = vertices.iter().copied().collect();
        if set.len() != n {
            return Closure::Broken(vec!["repeated vertex".to_string()]);
        }
        if n < 3 {
            return Closure::Broken(vec![format!("{n} vertices cannot close a polygon")]);
        }
        let index: BTreeMap<&str, usize> = vertices.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let mut problems = Vec::new();
        let mut nbrs: Vec<Vec<usize>> = Vec::with_capacity(n);
        for &v in vertices {
            if !self.contains(v) {
                problems.push(format!("vertex {v} is not in the diagram"));
                nbrs.push(Vec::new());
                continue;
            }
            let adj: Vec<usize> = vertices
                .iter()
                .filter(|&&u| self.side_adjacent(v, u, &set))
                .map(|u| index[u])
                .collect();
            if adj.len() != 2 {
                problems.push(format!("vertex {v} has degree {} among the shape's vertices, expected 2", adj.len()));
            }
            nbrs.push(adj);
        }
        if !problems.is_empty() {
            return Closure::Broken(problems);
        }
        let mut order = vec![0usize];
        let mut prev = 0usize;
        let mut cur = nbrs[0][0].min(nbrs[0][1]);
        while cur != 0 {
            order.push(cur);
            let next = if nbrs[cur][0] == prev { nbrs[cur][1] } else { nbrs[cur][0] };
            prev = cur;
            cur = next;
            if order.len() > n {
                break;
            }
        }
        if order.len() != n {
            return Closure::Broken(vec![format!(
                "vertices split into more than one cycle ({} of {} reached)",
                order.len(),
                n
            )]);
        }
        Closure::Cycle(order.into_iter().map(|i| vertices[i].to_string()).collect())
    }

    /// Polygons with `length` corners whose sides follow the diagram, in canonical form.
    pub fn enumerate_polygons(&self, length: usize) -> Vec<Vec<String>> {
        let side = self.side_graph();
        enumerate_cycles(&side, length)
            .into_iter()
            .filter(|cycle| {
                let refs: Vec<&str> = cycle.iter().map(String::as_str).collect();
                matches!(self.closure(&refs), Closure::Cycle(_))
            })
            .collect()
    }
}

/// All simple cycles with exactly `length` vertices, each once.
///
/// Canonical form: start at the smallest vertex name, then go to the smaller
/// of its two cycle neighbors. The result is sorted.
pub fn enumerate_cycles(g: &DiagramGraph, length: usize) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    if length < 3 {
        return out;
    }
    let names: Vec<&str> = g.adjacency.keys().map(String::as_str).collect();
    for &start in &names {
        let mut path = vec![start];
        extend(g, start, length, &mut path, &mut out);
    }
    out.sort();
    out
}

fn extend<'a>(g: &'a DiagramGraph, start: &str, length: usize, path: &mut Vec<&'a str>, out: &mut Vec<Vec<String>>) {
    let last = *path.last().expect("nonempty path");
    if path.len() == length {
        if g.has_edge(last, start) && path[1] < path[length - 1] {
            out.push(path.iter().map(|s| s.to_string()).collect());
        }
        return;
    }
    for next in g.neighbors(last) {
        if next > start && !path.contains(&next) {
            path.push(next);
            extend(g, start, length, path, out);
            path.pop();
        }
    }
}
