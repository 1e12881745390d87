use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::sexpr::{self, Sexpr};
use super::{literal_expr, name_at, typed_list, Domain, TypeHierarchy};
use crate::error::{LoadError, ParseError, ValidationError};
use crate::model::{Fluent, Literal, Name, State};

/// Declared objects and their types.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Objects(BTreeMap<Name, Name>);

impl Objects {
    pub fn new() -> Self {
        Objects::default()
    }

    pub fn insert(&mut self, object: Name, ty: Name) -> Option<Name> {
        self.0.insert(object, ty)
    }

    pub fn type_of(&self, object: &Name) -> Option<&Name> {
        self.0.get(object)
    }

    pub fn contains(&self, object: &Name) -> bool {
        self.0.contains_key(object)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Name, &Name)> {
        self.0.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &Name> {
        self.0.keys()
    }

    /// Objects whose type is `ty` or a subtype of it, in name order.
    pub fn of_type(&self, ty: &Name, types: &TypeHierarchy) -> Vec<Name> {
        self.0
            .iter()
            .filter(|(_, t)| types.is_subtype(t, ty))
            .map(|(o, _)| o.clone())
            .collect()
    }

    /// Parses the `a - block, b - block` form produced by `Display`.
    pub fn parse_listing(text: &str, domain: &Domain) -> Result<Self, LoadError> {
        let mut out = Objects::new();
        for (i, entry) in text.split(',').enumerate() {
            let entry = entry.trim();
            if entry.is_empty() {
                continue;
            }
            let (obj, ty) = entry.split_once(" - ").ok_or_else(|| {
                ParseError::new(
                    1,
                    i + 1,
                    format!("expected `<object> - <type>`, found {entry:?}"),
                )
            })?;
            let obj = Name::new(obj).map_err(|e| ParseError::new(1, i + 1, e.to_string()))?;
            let ty = Name::new(ty).map_err(|e| ParseError::new(1, i + 1, e.to_string()))?;
            if !domain.types.is_declared(&ty) {
                return Err(ValidationError::new(&ty, "undeclared type").into());
            }
            if out.insert(obj.clone(), ty).is_some() {
                return Err(ValidationError::new(&obj, "object listed twice").into());
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Objects {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (o, t) in &self.0 {
            if !first {
                f.write_str(", ")?;
            }
            first = false;
            write!(f, "{o} - {t}")?;
        }
        Ok(())
    }
}

impl FromIterator<(Name, Name)> for Objects {
    fn from_iter<I: IntoIterator<Item = (Name, Name)>>(iter: I) -> Self {
        Objects(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub name: Name,
    pub domain: Name,
    pub objects: Objects,
    pub init: State,
    pub goal: Option<BTreeSet<Literal>>,
}

fn section<'a>(expr: &'a Sexpr, keyword: &str) -> Option<&'a [Sexpr]> {
    let items = expr.as_list()?;
    match items.first()?.as_atom() {
        Some(k) if k.eq_ignore_ascii_case(keyword) => Some(&items[1..]),
        _ => None,
    }
}

fn fluent_from(expr: &Sexpr) -> Result<Fluent, ParseError> {
    let items = expr
        .as_list()
        .filter(|i| !i.is_empty())
        .ok_or_else(|| expr.error("expected `(<predicate> <object>*)`"))?;
    let predicate = name_at(&items[0])?;
    let args = items[1..].iter().map(name_at).collect::<Result<_, _>>()?;
    Ok(Fluent::new(predicate, args))
}

fn literal_from(expr: &Sexpr) -> Result<Literal, ParseError> {
    let (positive, atom) = literal_expr(expr)?;
    Ok(Literal::new(fluent_from(&atom)?, positive))
}

/// Parses and validates a problem against `domain`.
pub fn parse_problem(text: &str, domain: &Domain) -> Result<Problem, LoadError> {
    let root = sexpr::parse_one(text)?;
    let items = section(&root, "define").ok_or_else(|| root.error("expected `(define ...)`"))?;
    let header = items
        .first()
        .and_then(|h| section(h, "problem"))
        .filter(|b| b.len() == 1)
        .ok_or_else(|| root.error("missing `(problem <name>)`"))?;
    let name = name_at(&header[0])?;

    let mut domain_name = None;
    let mut objects = Objects::new();
    let mut init_exprs: &[Sexpr] = &[];
    let mut goal_expr = None;
    for sec in &items[1..] {
        match sec.head().as_deref() {
            Some(":domain") => {
                let body = section(sec, ":domain").unwrap();
                if body.len() != 1 {
                    return Err(sec.error("expected `(:domain <name>)`").into());
                }
                domain_name = Some((name_at(&body[0])?, sec.clone()));
            }
            Some(":objects") => {
                for (expr, ty) in typed_list(section(sec, ":objects").unwrap())? {
                    let obj = name_at(&expr)?;
                    if !domain.types.is_declared(&ty) {
                        return Err(ValidationError::new(
                            &ty,
                            format!("undeclared type of object `{obj}`"),
                        )
                        .into());
                    }
                    if objects.insert(obj.clone(), ty).is_some() {
                        return Err(ValidationError::new(&obj, "object declared twice").into());
                    }
                }
            }
            Some(":init") => init_exprs = section(sec, ":init").unwrap(),
            Some(":goal") => {
                let body = section(sec, ":goal").unwrap();
                if body.len() != 1 {
                    return Err(sec.error("expected `(:goal <formula>)`").into());
                }
                goal_expr = Some(body[0].clone());
            }
            Some(other) => {
                return Err(sec
                    .error(format!("unsupported problem section `{other}`"))
                    .into())
            }
            None => return Err(sec.error("expected a `(:section ...)` list").into()),
        }
    }

    let (domain_ref, domain_expr) =
        domain_name.ok_or_else(|| root.error("missing `(:domain <name>)`"))?;
    if domain_ref != domain.name {
        return Err(ValidationError::new(
            &domain_ref,
            format!(
                "problem `{name}` targets a different domain than `{}`",
                domain.name
            ),
        )
        .into());
    }
    let _ = domain_expr;

    let mut init = State::new();
    for expr in init_exprs {
        let fluent = fluent_from(expr)?;
        domain.check_fluent(&fluent, &objects)?;
        init.insert(fluent);
    }

    let goal = match goal_expr {
        None => None,
        Some(expr) => {
            let items = expr
                .as_list()
                .ok_or_else(|| expr.error("expected a goal formula"))?;
            let lits: Vec<&Sexpr> = if items.is_empty() {
                Vec::new()
            } else if expr.head().as_deref() == Some("and") {
                items[1..].iter().collect()
            } else {
                vec![&expr]
            };
            let mut goal = BTreeSet::new();
            for l in lits {
                let lit = literal_from(l)?;
                domain.check_fluent(&lit.fluent, &objects)?;
                goal.insert(lit);
            }
            Some(goal)
        }
    };

    Ok(Problem {
        name,
        domain: domain_ref,
        objects,
        init,
        goal,
    })
}

/// Parses canonical state text `(p a) (q)` into a validated state.
pub fn parse_state_text(
    text: &str,
    domain: &Domain,
    objects: &Objects,
) -> Result<State, LoadError> {
    let mut state = State::new();
    for expr in sexpr::parse_all(text)? {
        if expr.head().as_deref() == Some("not") {
            return Err(expr.error("states list true fluents only").into());
        }
        let fluent = fluent_from(&expr)?;
        domain.check_fluent(&fluent, objects)?;
        state.insert(fluent);
    }
    Ok(state)
}

/// Parses a single canonical fluent `(p a b)` without domain checks.
pub fn parse_fluent_text(text: &str) -> Result<Fluent, ParseError> {
    fluent_from(&sexpr::parse_one(text)?)
}

/// Parses a space-separated literal list `(p a) (not (q b))`, validated
/// against `domain` and `objects`.
pub fn parse_literals_text(
    text: &str,
    domain: &Domain,
    objects: &Objects,
) -> Result<BTreeSet<Literal>, LoadError> {
    let mut out = BTreeSet::new();
    for expr in sexpr::parse_all(text)? {
        let lit = literal_from(&expr)?;
        domain.check_fluent(&lit.fluent, objects)?;
        out.insert(lit);
    }
    Ok(out)
}
