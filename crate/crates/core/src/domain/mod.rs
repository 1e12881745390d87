//! STRIPS domain and problem definitions: parsing, validation, grounding
//! and natural-language rendering.
//!
//! The accepted language is a small PDDL subset: typed objects with single
//! inheritance, conjunctive preconditions over (possibly negated) atoms, and
//! add/delete effects. A negated effect atom is a delete.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{LoadError, ParseError, ValidationError};
use crate::model::{Fluent, Name};

mod annotations;
mod ground;
mod problem;
pub(crate) mod sexpr;

pub use annotations::{NlAnnotations, NO_PROPERTIES};
pub use ground::GroundAction;
pub use problem::{
    parse_fluent_text, parse_literals_text, parse_problem, parse_state_text, Objects, Problem,
};

use sexpr::Sexpr;

/// Root of every type hierarchy.
pub const OBJECT_TYPE: &str = "object";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    /// Variable name without the leading `?`.
    pub name: String,
    pub ty: Name,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateDecl {
    pub name: Name,
    pub params: Vec<Param>,
}

impl PredicateDecl {
    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

/// Atom over schema parameters; `args` index into the schema's parameter list.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct AtomTemplate {
    pub predicate: Name,
    pub args: Vec<usize>,
}

impl AtomTemplate {
    pub fn instantiate(&self, binding: &[Name]) -> Fluent {
        Fluent::new(
            self.predicate.clone(),
            self.args.iter().map(|&i| binding[i].clone()).collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LiteralTemplate {
    pub atom: AtomTemplate,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSchema {
    pub name: Name,
    pub params: Vec<Param>,
    pub precondition: Vec<LiteralTemplate>,
    pub add: Vec<AtomTemplate>,
    pub del: Vec<AtomTemplate>,
}

impl ActionSchema {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn param_index(&self, var: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == var)
    }
}

/// Single-inheritance type tree rooted at `object`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypeHierarchy {
    parents: BTreeMap<Name, Name>,
}

impl TypeHierarchy {
    pub fn is_declared(&self, ty: &Name) -> bool {
        ty.as_str() == OBJECT_TYPE || self.parents.contains_key(ty)
    }

    pub fn parent(&self, ty: &Name) -> Option<&Name> {
        self.parents.get(ty)
    }

    /// True if `ty` equals `ancestor` or inherits from it.
    pub fn is_subtype(&self, ty: &Name, ancestor: &Name) -> bool {
        if ancestor.as_str() == OBJECT_TYPE {
            return true;
        }
        let mut cur = Some(ty);
        // validated acyclic at parse time, but bound the walk regardless
        for _ in 0..=self.parents.len() {
            match cur {
                Some(t) if t == ancestor => return true,
                Some(t) => cur = self.parents.get(t),
                None => return false,
            }
        }
        false
    }

    pub fn types(&self) -> impl Iterator<Item = &Name> {
        self.parents.keys()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    pub name: Name,
    pub types: TypeHierarchy,
    pub predicates: BTreeMap<Name, PredicateDecl>,
    pub schemas: BTreeMap<Name, ActionSchema>,
}

impl Domain {
    pub fn schema(&self, name: &Name) -> Option<&ActionSchema> {
        self.schemas.get(name)
    }

    pub fn predicate(&self, name: &Name) -> Option<&PredicateDecl> {
        self.predicates.get(name)
    }

    /// Checks that a ground atom is declared, has the right arity and is
    /// well-typed over `objects`.
    pub fn check_fluent(&self, fluent: &Fluent, objects: &Objects) -> Result<(), ValidationError> {
        let decl = self
            .predicates
            .get(&fluent.predicate)
            .ok_or_else(|| ValidationError::new(&fluent.predicate, "predicate is not declared"))?;
        if decl.arity() != fluent.arity() {
            return Err(ValidationError::new(
                fluent,
                format!(
                    "predicate `{}` takes {} argument(s), got {}",
                    decl.name,
                    decl.arity(),
                    fluent.arity()
                ),
            ));
        }
        for (arg, param) in fluent.args.iter().zip(&decl.params) {
            let ty = objects
                .type_of(arg)
                .ok_or_else(|| ValidationError::new(arg, "object is not declared"))?;
            if !self.types.is_subtype(ty, &param.ty) {
                return Err(ValidationError::new(
                    arg,
                    format!(
                        "object of type `{ty}` cannot fill a `{}` slot of `{}`",
                        param.ty, decl.name
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Every ground fluent expressible over `objects`, in canonical order.
    pub fn all_fluents(&self, objects: &Objects) -> Vec<Fluent> {
        let mut out = Vec::new();
        for decl in self.predicates.values() {
            let candidates: Vec<Vec<Name>> = decl
                .params
                .iter()
                .map(|p| objects.of_type(&p.ty, &self.types))
                .collect();
            for combo in cartesian(&candidates) {
                out.push(Fluent::new(decl.name.clone(), combo));
            }
        }
        out.sort();
        out
    }

    /// Every type-correct grounding of every schema over `objects`.
    pub fn all_groundings(&self, objects: &Objects) -> Vec<GroundAction> {
        let mut out = Vec::new();
        for schema in self.schemas.values() {
            let candidates: Vec<Vec<Name>> = schema
                .params
                .iter()
                .map(|p| objects.of_type(&p.ty, &self.types))
                .collect();
            for combo in cartesian(&candidates) {
                out.push(GroundAction::from_schema(schema, combo));
            }
        }
        out
    }
}

fn cartesian(lists: &[Vec<Name>]) -> Vec<Vec<Name>> {
    let mut acc: Vec<Vec<Name>> = vec![Vec::new()];
    for list in lists {
        let mut next = Vec::with_capacity(acc.len() * list.len());
        for prefix in &acc {
            for item in list {
                let mut v = prefix.clone();
                v.push(item.clone());
                next.push(v);
            }
        }
        acc = next;
    }
    acc
}

pub(crate) fn name_at(expr: &Sexpr) -> Result<Name, ParseError> {
    let atom = expr
        .as_atom()
        .ok_or_else(|| expr.error("expected a name, found a list"))?;
    Name::new(atom).map_err(|e| expr.error(e.to_string()))
}

/// Parses `a b - t c - u d` style lists. Untyped entries get `object`.
/// Entries are returned as raw atoms with their type.
pub(crate) fn typed_list(items: &[Sexpr]) -> Result<Vec<(Sexpr, Name)>, ParseError> {
    let mut out = Vec::new();
    let mut pending: Vec<Sexpr> = Vec::new();
    let mut iter = items.iter();
    while let Some(item) = iter.next() {
        match item.as_atom() {
            Some("-") => {
                let ty_expr = iter
                    .next()
                    .ok_or_else(|| item.error("expected a type after `-`"))?;
                let ty = name_at(ty_expr)?;
                if pending.is_empty() {
                    return Err(item.error("type annotation without preceding names"));
                }
                out.extend(pending.drain(..).map(|e| (e, ty.clone())));
            }
            Some(_) => pending.push(item.clone()),
            None => return Err(item.error("expected a name, found a list")),
        }
    }
    let object = Name::new(OBJECT_TYPE).expect("valid");
    out.extend(pending.into_iter().map(|e| (e, object.clone())));
    Ok(out)
}

fn variable_at(expr: &Sexpr) -> Result<String, ParseError> {
    let atom = expr
        .as_atom()
        .ok_or_else(|| expr.error("expected a variable"))?;
    let var = atom.strip_prefix('?').ok_or_else(|| {
        expr.error(format!(
            "expected a variable starting with `?`, found `{atom}`"
        ))
    })?;
    Name::new(var)
        .map(|n| n.as_str().to_string())
        .map_err(|e| expr.error(e.to_string()))
}

fn params_at(items: &[Sexpr]) -> Result<Vec<Param>, ParseError> {
    let mut seen = BTreeSet::new();
    typed_list(items)?
        .into_iter()
        .map(|(expr, ty)| {
            let name = variable_at(&expr)?;
            if !seen.insert(name.clone()) {
                return Err(expr.error(format!("duplicate parameter `?{name}`")));
            }
            Ok(Param { name, ty })
        })
        .collect()
}

/// `(and l*)`, a single literal, or `()`. Returns (positive, atom-expr) pairs.
fn conjunction(expr: &Sexpr) -> Result<Vec<(bool, Sexpr)>, ParseError> {
    let items = expr
        .as_list()
        .ok_or_else(|| expr.error("expected a list"))?;
    if items.is_empty() {
        return Ok(Vec::new());
    }
    if expr.head().as_deref() == Some("and") {
        items[1..].iter().map(literal_expr).collect()
    } else {
        Ok(vec![literal_expr(expr)?])
    }
}

pub(crate) fn literal_expr(expr: &Sexpr) -> Result<(bool, Sexpr), ParseError> {
    let items = expr
        .as_list()
        .ok_or_else(|| expr.error("expected a literal"))?;
    match expr.head().as_deref() {
        Some("not") => {
            if items.len() != 2 || items[1].as_list().is_none() {
                return Err(expr.error("`not` takes exactly one atom"));
            }
            if items[1].head().as_deref() == Some("not") {
                return Err(items[1].error("nested negation is not supported"));
            }
            Ok((false, items[1].clone()))
        }
        Some("and" | "or" | "forall" | "exists" | "when" | "imply" | "=") => {
            Err(expr.error(format!(
                "`{}` is outside the supported STRIPS subset",
                expr.head().unwrap_or_default()
            )))
        }
        Some(_) => Ok((true, expr.clone())),
        None => Err(expr.error("expected a predicate name")),
    }
}

fn section_body<'a>(expr: &'a Sexpr, keyword: &str) -> Result<&'a [Sexpr], ParseError> {
    let items = expr
        .as_list()
        .ok_or_else(|| expr.error("expected a list"))?;
    match items.first().and_then(Sexpr::as_atom) {
        Some(k) if k.eq_ignore_ascii_case(keyword) => Ok(&items[1..]),
        _ => Err(expr.error(format!("expected `({keyword} ...)`"))),
    }
}

/// Parses and validates a domain definition.
pub fn parse_domain(text: &str) -> Result<Domain, LoadError> {
    let root = sexpr::parse_one(text)?;
    let items = section_body(&root, "define")?;
    let header = items
        .first()
        .ok_or_else(|| root.error("missing `(domain <name>)`"))?;
    let header_body = section_body(header, "domain")?;
    if header_body.len() != 1 {
        return Err(header.error("expected `(domain <name>)`").into());
    }
    let name = name_at(&header_body[0])?;

    let mut types = TypeHierarchy::default();
    let mut type_exprs: Vec<(Sexpr, Name)> = Vec::new();
    let mut predicates = BTreeMap::new();
    let mut schema_exprs = Vec::new();

    for section in &items[1..] {
        match section.head().as_deref() {
            Some(":requirements") => {}
            Some(":types") => {
                let body = &section.as_list().unwrap()[1..];
                type_exprs.extend(typed_list(body)?);
            }
            Some(":predicates") => {
                for decl in &section.as_list().unwrap()[1..] {
                    let parts = decl
                        .as_list()
                        .filter(|p| !p.is_empty())
                        .ok_or_else(|| decl.error("expected `(<predicate> ?var*)`"))?;
                    let pname = name_at(&parts[0])?;
                    let params = params_at(&parts[1..])?;
                    if predicates
                        .insert(
                            pname.clone(),
                            PredicateDecl {
                                name: pname.clone(),
                                params,
                            },
                        )
                        .is_some()
                    {
                        return Err(ValidationError::new(&pname, "predicate declared twice").into());
                    }
                }
            }
            Some(":action") => schema_exprs.push(section.clone()),
            Some(other) => {
                return Err(section
                    .error(format!("unsupported domain section `{other}`"))
                    .into())
            }
            None => return Err(section.error("expected a `(:section ...)` list").into()),
        }
    }

    for (expr, parent) in &type_exprs {
        let ty = name_at(expr)?;
        if ty.as_str() == OBJECT_TYPE {
            continue;
        }
        if types.parents.insert(ty.clone(), parent.clone()).is_some() {
            return Err(ValidationError::new(&ty, "type declared twice").into());
        }
    }
    for (ty, parent) in &types.parents {
        if !types.is_declared(parent) {
            return Err(
                ValidationError::new(parent, format!("undeclared parent type of `{ty}`")).into(),
            );
        }
        let mut cur = parent;
        let mut steps = 0;
        while let Some(next) = types.parents.get(cur) {
            if next == ty || steps > types.parents.len() {
                return Err(ValidationError::new(ty, "cyclic type hierarchy").into());
            }
            cur = next;
            steps += 1;
        }
    }
    for decl in predicates.values() {
        for p in &decl.params {
            if !types.is_declared(&p.ty) {
                return Err(ValidationError::new(
                    &p.ty,
                    format!("undeclared type in predicate `{}`", decl.name),
                )
                .into());
            }
        }
    }

    let mut domain = Domain {
        name,
        types,
        predicates,
        schemas: BTreeMap::new(),
    };
    for expr in &schema_exprs {
        let schema = parse_schema(expr, &domain)?;
        if domain.schemas.contains_key(&schema.name) {
            return Err(ValidationError::new(&schema.name, "action declared twice").into());
        }
        domain.schemas.insert(schema.name.clone(), schema);
    }
    Ok(domain)
}

fn parse_schema(expr: &Sexpr, domain: &Domain) -> Result<ActionSchema, LoadError> {
    let items = expr.as_list().unwrap();
    let name_expr = items
        .get(1)
        .ok_or_else(|| expr.error("missing action name"))?;
    let name = name_at(name_expr)?;
    let mut params = None;
    let mut pre_expr = None;
    let mut eff_expr = None;
    let mut rest = items[2..].iter();
    while let Some(key) = rest.next() {
        let k = key
            .as_atom()
            .ok_or_else(|| key.error("expected `:parameters`, `:precondition` or `:effect`"))?
            .to_lowercase();
        let value = rest
            .next()
            .ok_or_else(|| key.error(format!("missing value for `{k}`")))?;
        let slot = match k.as_str() {
            ":parameters" => {
                let list = value
                    .as_list()
                    .ok_or_else(|| value.error("expected a parameter list"))?;
                params = Some(params_at(list)?);
                continue;
            }
            ":precondition" => &mut pre_expr,
            ":effect" => &mut eff_expr,
            _ => return Err(key.error(format!("unsupported action key `{k}`")).into()),
        };
        if slot.replace(value.clone()).is_some() {
            return Err(key.error(format!("duplicate `{k}`")).into());
        }
    }
    let params = params.unwrap_or_default();
    for p in &params {
        if !domain.types.is_declared(&p.ty) {
            return Err(
                ValidationError::new(&p.ty, format!("undeclared type in action `{name}`")).into(),
            );
        }
    }
    let mut schema = ActionSchema {
        name: name.clone(),
        params,
        precondition: Vec::new(),
        add: Vec::new(),
        del: Vec::new(),
    };

    if let Some(pre) = pre_expr {
        for (positive, atom) in conjunction(&pre)? {
            let atom = atom_template(&atom, &schema, domain)?;
            let lit = LiteralTemplate { atom, positive };
            if !schema.precondition.contains(&lit) {
                schema.precondition.push(lit);
            }
        }
    }
    if let Some(eff) = eff_expr {
        for (positive, atom) in conjunction(&eff)? {
            let atom = atom_template(&atom, &schema, domain)?;
            let list = if positive {
                &mut schema.add
            } else {
                &mut schema.del
            };
            if !list.contains(&atom) {
                list.push(atom);
            }
        }
    }
    if let Some(both) = schema.add.iter().find(|a| schema.del.contains(a)) {
        return Err(ValidationError::new(
            &both.predicate,
            format!("action `{name}` both adds and deletes the same atom"),
        )
        .into());
    }
    Ok(schema)
}

fn atom_template(
    expr: &Sexpr,
    schema: &ActionSchema,
    domain: &Domain,
) -> Result<AtomTemplate, LoadError> {
    let items = expr.as_list().unwrap();
    let predicate = name_at(&items[0])?;
    let decl = domain.predicates.get(&predicate).ok_or_else(|| {
        ValidationError::new(
            &predicate,
            format!("undeclared predicate used in action `{}`", schema.name),
        )
    })?;
    let args = &items[1..];
    if args.len() != decl.arity() {
        return Err(ValidationError::new(
            &predicate,
            format!(
                "takes {} argument(s), action `{}` passes {}",
                decl.arity(),
                schema.name,
                args.len()
            ),
        )
        .into());
    }
    let mut indices = Vec::with_capacity(args.len());
    for (arg, slot) in args.iter().zip(&decl.params) {
        let var = variable_at(arg)?;
        let idx = schema.param_index(&var).ok_or_else(|| {
            ValidationError::new(
                format!("?{var}"),
                format!("not a parameter of action `{}`", schema.name),
            )
        })?;
        let param_ty = &schema.params[idx].ty;
        // a parameter may be narrower or wider than the slot; only
        // incompatible branches of the hierarchy are rejected
        if !domain.types.is_subtype(param_ty, &slot.ty)
            && !domain.types.is_subtype(&slot.ty, param_ty)
        {
            return Err(ValidationError::new(
                format!("?{var}"),
                format!(
                    "type `{param_ty}` is incompatible with slot type `{}` of `{predicate}` in action `{}`",
                    slot.ty, schema.name
                ),
            )
            .into());
        }
        indices.push(idx);
    }
    Ok(AtomTemplate {
        predicate,
        args: indices,
    })
}
