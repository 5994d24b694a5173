use std::collections::BTreeSet;
use std::sync::OnceLock;

use serde::Deserialize;

use super::ReasonerError;
use crate::formal::{parse_term, Category, Term};

const BUNDLED: &str = include_str!("../../data/theorems.json");

/// A theorem as premise patterns and conclusion templates over lowercase
/// pattern variables. Guard premises are checked against coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoremRule {
    pub id: String,
    pub description: String,
    pub group: Option<String>,
    pub premises: Vec<Term>,
    pub guards: Vec<Term>,
    pub conclusions: Vec<Term>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    rules: Vec<RuleSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleSpec {
    id: String,
    description: String,
    #[serde(default)]
    group: Option<String>,
    premises: Vec<String>,
    conclusions: Vec<String>,
}

fn vars(t: &Term, out: &mut BTreeSet<String>) {
    match t {
        Term::Var(v) => {
            out.insert(v.clone());
        }
        Term::App(_, args) => args.iter().for_each(|a| vars(a, out)),
        _ => {}
    }
}

impl TheoremRule {
    fn from_spec(spec: RuleSpec) -> Result<TheoremRule, ReasonerError> {
        let bad = |msg: String| ReasonerError::BadRule { id: spec.id.clone(), msg };
        let parse = |s: &String| parse_term(s).map_err(|e| bad(format!("{s}: {e}")));
        let mut premises = Vec::new();
        let mut guards = Vec::new();
        for p in &spec.premises {
            let t = parse(p)?;
            match t.pred() {
                Some(pred) if pred.category() == Category::Guard => guards.push(t),
                Some(_) => premises.push(t),
                None => return Err(bad(format!("premise {p} is not an application"))),
            }
        }
        if premises.is_empty() {
            return Err(bad("no premises".to_string()));
        }
        let conclusions = spec.conclusions.iter().map(parse).collect::<Result<Vec<_>, _>>()?;
        if conclusions.is_empty() {
            return Err(bad("no conclusions".to_string()));
        }
        let mut bound = BTreeSet::new();
        premises.iter().for_each(|p| vars(p, &mut bound));
        for t in guards.iter().chain(&conclusions) {
            let mut used = BTreeSet::new();
            vars(t, &mut used);
            if let Some(v) = used.difference(&bound).next() {
                return Err(bad(format!("variable {v} in {t} is not bound by a premise")));
            }
        }
        Ok(TheoremRule {
            id: spec.id,
            description: spec.description,
            group: spec.group,
            premises,
            guards,
            conclusions,
        })
    }
}

/// Theorem rules sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoremLibrary {
    rules: Vec<TheoremRule>,
}

impl TheoremLibrary {
    pub fn bundled() -> &'static TheoremLibrary {
        static LIB: OnceLock<TheoremLibrary> = OnceLock::new();
        LIB.get_or_init(|| TheoremLibrary::from_json(BUNDLED).expect("bundled theorem library is valid"))
    }

    pub fn from_json(text: &str) -> Result<TheoremLibrary, ReasonerError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: RuleFile =
            serde_path_to_error::deserialize(de).map_err(|e| ReasonerError::Library(e.to_string()))?;
        let mut rules = file.rules.into_iter().map(TheoremRule::from_spec).collect::<Result<Vec<_>, _>>()?;
        rules.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = rules.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(ReasonerError::Library(format!("duplicate rule id {}", w[0].id)));
        }
        if let Some(r) = rules.iter().find(|r| r.group.as_deref().is_some_and(|g| rules.iter().any(|x| x.id == g))) {
            return Err(ReasonerError::Library(format!("group of {} collides with a rule id", r.id)));
        }
        Ok(TheoremLibrary { rules })
    }

    pub fn rules(&self) -> &[TheoremRule] {
        &self.rules
    }

    pub fn get(&self, id: &str) -> Option<&TheoremRule> {
        self.rules.iter().find(|r| r.id == id)
    }

    pub fn groups(&self) -> BTreeSet<&str> {
        self.rules.iter().filter_map(|r| r.group.as_deref()).collect()
    }

    /// Rules named by a schedule entry: one rule id or every member of a group.
    pub fn resolve(&self, entry: &str) -> Vec<&TheoremRule> {
        match self.get(entry) {
            Some(r) => vec![r],
            None => self.rules.iter().filter(|r| r.group.as_deref() == Some(entry)).collect(),
        }
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.rules.iter().map(|r| r.id.as_str())
    }
}
