use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::algebra::{eval, is_quantity, solve_equation, Bindings, Equation, EquationStatus};
use super::canon::{relation_variants, Geometry};
use super::library::TheoremRule;
use super::ReasonerError;
use crate::diagram::{build_graph, distance, DiagramParse};
use crate::formal::{Category, Pred, Term};
use crate::text::ParsedProblem;

pub type Subst = BTreeMap<String, Term>;

/// One productive theorem application.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub theorem: String,
    pub instantiations: Vec<BTreeMap<String, String>>,
    pub added_relations: Vec<String>,
    pub added_equations: Vec<String>,
    pub new_bindings: Vec<(String, f64)>,
}

/// Relations, equations, and solved quantities, all in canonical form.
#[derive(Debug, Clone)]
pub struct DeductionState {
    geo: Geometry,
    relations: BTreeSet<Term>,
    equations: Vec<Equation>,
    equation_set: BTreeSet<Equation>,
    open: Vec<usize>,
    bindings: Bindings,
}

#[derive(Debug, Default)]
struct Added {
    relations: Vec<Term>,
    equations: Vec<Equation>,
}

fn entity_subterms(t: &Term, out: &mut Vec<Term>) {
    t.visit(&mut |_, node| {
        if let Term::App(p, _) = node {
            let wanted = p.is_polygon() || matches!(p, Pred::Line | Pred::Circle | Pred::Sector | Pred::Shaded | Pred::Arc);
            if wanted && !node.contains_unknown() && !node.contains_var() {
                out.push(node.clone());
            }
        }
    });
}

fn substitute(t: &Term, s: &Subst) -> Term {
    match t {
        Term::Var(v) => s.get(v).cloned().unwrap_or_else(|| t.clone()),
        Term::App(p, args) => Term::App(*p, args.iter().map(|a| substitute(a, s)).collect()),
        other => other.clone(),
    }
}

fn match_pattern(p: &Term, g: &Term, s: &Subst, strict: bool, out: &mut Vec<Subst>) {
    match (p, g) {
        (Term::Var(v), _) => match s.get(v) {
            Some(x) if x == g => out.push(s.clone()),
            Some(_) => {}
            None if s.values().any(|x| x == g) => {}
            None => {
                let mut s = s.clone();
                s.insert(v.clone(), g.clone());
                out.push(s);
            }
        },
        (Term::App(pp, pa), Term::App(gp, ga)) if pp == gp && pa.len() == ga.len() => {
            let (variants, child_strict) = if strict { (vec![ga.clone()], false) } else { relation_variants(*gp, ga) };
            for v in variants {
                let mut partial = vec![s.clone()];
                for (pi, gi) in pa.iter().zip(&v) {
                    let mut next = Vec::new();
                    for s in &partial {
                        match_pattern(pi, gi, s, child_strict, &mut next);
                    }
                    partial = next;
                    if partial.is_empty() {
                        break;
                    }
                }
                out.extend(partial);
            }
        }
        (a, b) if a == b => out.push(s.clone()),
        _ => {}
    }
}

impl DeductionState {
    /// Problem literals plus facts read off the diagram. Literals that still
    /// hold a placeholder stay out of the state.
    pub fn seed(problem: &ParsedProblem, d: &DiagramParse) -> DeductionState {
        let g = build_graph(d);
        let mut state = DeductionState {
            geo: Geometry::from_graph(&g),
            relations: BTreeSet::new(),
            equations: Vec::new(),
            equation_set: BTreeSet::new(),
            open: Vec::new(),
            bindings: Bindings::new(),
        };
        let mut facts: Vec<Term> = Vec::new();
        let names = d.point_names();
        for (i, a) in names.iter().enumerate() {
            for b in &names[i + 1..] {
                if g.connected(a, b) {
                    facts.push(Term::line(a, b));
                }
            }
        }
        for line in &d.collinear {
            for i in 0..line.len() {
                for j in i + 2..line.len() {
                    for p in &line[i + 1..j] {
                        facts.push(Term::app(Pred::PointLiesOnLine, vec![Term::point(p), Term::line(&line[i], &line[j])]));
                    }
                }
            }
        }
        for c in &d.circles {
            let circle = Term::app(Pred::Circle, vec![Term::point(&c.center)]);
            facts.push(circle.clone());
            let center = g.coord(&c.center);
            for p in &d.points {
                let near = center.is_some_and(|o| (distance(o, (p.x, p.y)) - c.radius).abs() <= 5e-3 * c.radius);
                if p.name != c.center && (c.on_circle.contains(&p.name) || near) {
                    facts.push(Term::app(Pred::PointLiesOnCircle, vec![Term::point(&p.name), circle.clone()]));
                }
            }
        }
        for tri in g.enumerate_polygons(3) {
            let t = Term::polygon(Pred::Triangle, &tri);
            let guard = Term::app(Pred::NotCollinear, t.args().to_vec());
            if state.geo.guard(&guard) {
                facts.push(t);
            }
        }
        facts.extend(d.relations.iter().map(|l| l.term().clone()));
        for lit in problem.propositions.iter().chain(std::iter::once(&problem.target)) {
            if lit.term().contains_unknown() {
                continue;
            }
            entity_subterms(lit.term(), &mut facts);
            if !lit.is_goal() {
                facts.push(lit.term().clone());
            }
        }
        for f in facts {
            state.add(&f);
        }
        state
    }

    pub fn canonical(&self, t: &Term) -> Term {
        self.geo.canonical(t)
    }

    pub fn relations(&self) -> &BTreeSet<Term> {
        &self.relations
    }

    pub fn equations(&self) -> &[Equation] {
        &self.equations
    }

    pub fn bindings(&self) -> &Bindings {
        &self.bindings
    }

    pub fn evaluate(&self, t: &Term) -> Option<f64> {
        eval(&self.canonical(t), &self.bindings)
    }

    fn add(&mut self, t: &Term) -> Added {
        let mut added = Added::default();
        if t.contains_unknown() {
            return added;
        }
        let c = self.canonical(t);
        if let Term::App(Pred::Equals, args) = &c {
            if is_quantity(&args[0]) && is_quantity(&args[1]) {
                let eq = Equation { lhs: args[0].clone(), rhs: args[1].clone() };
                if self.equation_set.insert(eq.clone()) {
                    self.open.push(self.equations.len());
                    self.equations.push(eq.clone());
                    added.equations.push(eq);
                }
            }
        }
        if self.relations.insert(c.clone()) {
            added.relations.push(c);
        }
        added
    }

    /// Solves every open equation that has become determined, repeating until
    /// nothing changes.
    pub fn propagate(&mut self) -> Result<Vec<(Term, f64)>, ReasonerError> {
        let mut new = Vec::new();
        loop {
            let mut changed = false;
            let mut still_open = Vec::with_capacity(self.open.len());
            for &i in &self.open {
                let eq = &self.equations[i];
                match solve_equation(eq, &self.bindings) {
                    EquationStatus::Satisfied => {}
                    EquationStatus::Violated { lhs, rhs } => {
                        return Err(ReasonerError::Inconsistent(format!("{eq} evaluates to {lhs} = {rhs}")));
                    }
                    EquationStatus::Solved(atom, v) => {
                        self.bindings.insert(atom.clone(), v);
                        new.push((atom, v));
                        changed = true;
                    }
                    EquationStatus::Open => still_open.push(i),
                }
            }
            self.open = still_open;
            if !changed {
                return Ok(new);
            }
        }
    }

    /// Ground instantiations of a rule's premises against the current
    /// relations, deduplicated and ordered by their bindings.
    pub fn instantiations(&self, rule: &TheoremRule) -> Vec<Subst> {
        let mut by_pred: BTreeMap<Pred, Vec<&Term>> = BTreeMap::new();
        for r in &self.relations {
            if let Some(p) = r.pred() {
                by_pred.entry(p).or_default().push(r);
            }
        }
        let mut partial = vec![Subst::new()];
        for premise in &rule.premises {
            let candidates = premise.pred().and_then(|p| by_pred.get(&p)).map(Vec::as_slice).unwrap_or(&[]);
            let mut next = Vec::new();
            for s in &partial {
                for g in candidates {
                    match_pattern(premise, g, s, false, &mut next);
                }
            }
            next.sort();
            next.dedup();
            partial = next;
        }
        partial.retain(|s| rule.guards.iter().all(|g| self.geo.guard(&substitute(g, s))));
        let mut seen = BTreeSet::new();
        partial.retain(|s| {
            let mut ps: Vec<Term> = rule.premises.iter().map(|p| self.canonical(&substitute(p, s))).collect();
            let mut cs: Vec<Term> = rule.conclusions.iter().map(|c| self.canonical(&substitute(c, s))).collect();
            ps.sort();
            cs.sort();
            seen.insert((ps, cs))
        });
        partial
    }

    /// Applies every instantiation of `rule`; returns a step when anything new
    /// was derived.
    pub fn apply(&mut self, rule: &TheoremRule) -> Result<Option<Step>, ReasonerError> {
        let mut step = Step {
            theorem: rule.id.clone(),
            instantiations: Vec::new(),
            added_relations: Vec::new(),
            added_equations: Vec::new(),
            new_bindings: Vec::new(),
        };
        for s in self.instantiations(rule) {
            let mut productive = false;
            for c in &rule.conclusions {
                let added = self.add(&substitute(c, &s));
                productive |= !added.relations.is_empty() || !added.equations.is_empty();
                step.added_relations.extend(added.relations.iter().map(Term::to_string));
                step.added_equations.extend(added.equations.iter().map(Equation::to_string));
            }
            if productive {
                step.instantiations.push(s.iter().map(|(k, v)| (k.clone(), v.to_string())).collect());
            }
        }
        step.new_bindings = self.propagate()?.into_iter().map(|(t, v)| (t.to_string(), v)).collect();
        let productive = !step.added_relations.is_empty() || !step.added_equations.is_empty() || !step.new_bindings.is_empty();
        Ok(productive.then_some(step))
    }

    /// Bindings keyed by printed atom, for reports.
    pub fn printed_bindings(&self) -> BTreeMap<String, f64> {
        self.bindings.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }
}

/// Quantities a problem asks about must be measures, variables or arithmetic.
pub(crate) fn goal_quantity(problem: &ParsedProblem) -> Option<&Term> {
    let t = problem.target.term().args().first()?;
    match t.pred().map(Pred::category) {
        None | Some(Category::Measure | Category::Arithmetic) => Some(t),
        _ => None,
    }
}
