use std::collections::BTreeSet;
use std::fmt;

use super::{ActionSchema, Domain, Objects};
use crate::error::GroundError;
use crate::model::{Fluent, Literal, Name};

/// A schema instantiated with concrete objects.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroundAction {
    pub schema: Name,
    pub args: Vec<Name>,
    pub precondition: BTreeSet<Literal>,
    pub add: BTreeSet<Fluent>,
    pub del: BTreeSet<Fluent>,
}

impl GroundAction {
    /// Substitutes `args` into `schema` without type checks.
    ///
    /// Atoms that a substitution places in both the add and delete lists are
    /// kept only in the add list: under delete-then-add application the
    /// result is the same, and `add` and `del` stay disjoint.
    pub fn from_schema(schema: &ActionSchema, args: Vec<Name>) -> Self {
        let precondition = schema
            .precondition
            .iter()
            .map(|l| Literal::new(l.atom.instantiate(&args), l.positive))
            .collect();
        let add: BTreeSet<Fluent> = schema.add.iter().map(|a| a.instantiate(&args)).collect();
        let del = schema
            .del
            .iter()
            .map(|a| a.instantiate(&args))
            .filter(|f| !add.contains(f))
            .collect();
        GroundAction {
            schema: schema.name.clone(),
            args,
            precondition,
            add,
            del,
        }
    }

    /// Canonical term form `(stack a b)`.
    pub fn canonical(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.schema)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

impl Domain {
    /// Grounds schema `name` with `args`, type-checking each argument
    /// against `objects`.
    pub fn ground(
        &self,
        name: &Name,
        args: &[Name],
        objects: &Objects,
    ) -> Result<GroundAction, GroundError> {
        let schema = self
            .schemas
            .get(name)
            .ok_or_else(|| GroundError::UnknownSchema(name.to_string()))?;
        if schema.arity() != args.len() {
            return Err(GroundError::ArityMismatch {
                schema: name.to_string(),
                expected: schema.arity(),
                got: args.len(),
            });
        }
        for (arg, param) in args.iter().zip(&schema.params) {
            let found = objects.type_of(arg);
            if !found.is_some_and(|t| self.types.is_subtype(t, &param.ty)) {
                return Err(GroundError::TypeMismatch {
                    schema: name.to_string(),
                    object: arg.to_string(),
                    expected: param.ty.to_string(),
                    found: found.map(ToString::to_string),
                });
            }
        }
        Ok(GroundAction::from_schema(schema, args.to_vec()))
    }

    /// Grounds a term written as `(stack a b)` or `stack a b`.
    pub fn ground_term(&self, term: &str, objects: &Objects) -> Result<GroundAction, GroundError> {
        let trimmed = term.trim();
        let inner = match trimmed.strip_prefix('(') {
            Some(rest) => rest
                .strip_suffix(')')
                .ok_or_else(|| GroundError::Unrecognized {
                    text: term.to_string(),
                    reason: "unbalanced parentheses".into(),
                })?,
            None => trimmed,
        };
        let mut words = inner.split_whitespace();
        let head = words.next().ok_or_else(|| GroundError::Unrecognized {
            text: term.to_string(),
            reason: "empty action term".into(),
        })?;
        let name = Name::new(head)?;
        let args = words.map(Name::new).collect::<Result<Vec<_>, _>>()?;
        self.ground(&name, &args, objects)
    }
}
