//! Natural-language sidecar for a domain: the prompt-facing description and
//! per-schema / per-predicate phrase templates.
//!
//! Fluent templates describe a property of the fluent's first argument, so
//! `on: "on top of {y}"` renders `(on a b)` as `A: on top of b.`

use std::collections::{BTreeMap, BTreeSet};

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{Domain, GroundAction, Objects};
use crate::error::{GroundError, MissingTemplate, ValidationError};
use crate::model::{Fluent, Name, State};
use crate::template::{self, Piece};

/// Placeholder text for an object with no true fluents.
pub const NO_PROPERTIES: &str = "(no properties)";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NlAnnotations {
    pub domain: Name,
    pub description: String,
    pub action_templates: BTreeMap<Name, String>,
    pub fluent_templates: BTreeMap<Name, String>,
    #[serde(default)]
    pub zero_arity_templates: BTreeMap<Name, String>,
}

impl NlAnnotations {
    /// Parses the JSON sidecar and checks it covers `domain`.
    pub fn from_json(text: &str, domain: &Domain) -> Result<Self, ValidationError> {
        let ann: NlAnnotations = serde_json::from_str(text)
            .map_err(|e| ValidationError::new("annotations", e.to_string()))?;
        ann.validate(domain)?;
        Ok(ann)
    }

    pub fn validate(&self, domain: &Domain) -> Result<(), ValidationError> {
        if self.domain != domain.name {
            return Err(ValidationError::new(
                &self.domain,
                format!(
                    "annotations are for a different domain than `{}`",
                    domain.name
                ),
            ));
        }
        for (name, schema) in &domain.schemas {
            let tpl = self
                .action_templates
                .get(name)
                .ok_or_else(|| ValidationError::new(name, "action has no template"))?;
            let params: BTreeSet<String> = schema.params.iter().map(|p| p.name.clone()).collect();
            check_slots(name, tpl, &params)?;
            if tpl.contains(',') || tpl.contains('.') {
                return Err(ValidationError::new(
                    name,
                    "action templates must not contain `,` or `.`",
                ));
            }
        }
        for (name, decl) in &domain.predicates {
            let (tpl, table) = if decl.arity() == 0 {
                (self.zero_arity_templates.get(name), "zero_arity_templates")
            } else {
                (self.fluent_templates.get(name), "fluent_templates")
            };
            let tpl = tpl.ok_or_else(|| {
                ValidationError::new(name, format!("predicate has no entry in {table}"))
            })?;
            let params: BTreeSet<String> = decl.params.iter().map(|p| p.name.clone()).collect();
            check_slots(name, tpl, &params)?;
            if tpl.contains(',') || tpl.contains('.') || tpl.contains(':') {
                return Err(ValidationError::new(
                    name,
                    "fluent templates must not contain `,`, `.` or `:`",
                ));
            }
        }
        let stray = self
            .action_templates
            .keys()
            .filter(|k| !domain.schemas.contains_key(*k))
            .chain(
                self.fluent_templates
                    .keys()
                    .chain(self.zero_arity_templates.keys())
                    .filter(|k| !domain.predicates.contains_key(*k)),
            )
            .next();
        if let Some(name) = stray {
            return Err(ValidationError::new(
                name,
                "template for an undeclared symbol",
            ));
        }
        Ok(())
    }

    fn property(&self, fluent: &Fluent, domain: &Domain) -> Result<String, MissingTemplate> {
        let missing = || MissingTemplate(fluent.predicate.to_string());
        let tpl = self
            .fluent_templates
            .get(&fluent.predicate)
            .ok_or_else(missing)?;
        let decl = domain.predicate(&fluent.predicate).ok_or_else(missing)?;
        template::fill(tpl, |slot| {
            decl.params
                .iter()
                .position(|p| p.name == slot)
                .and_then(|i| fluent.args.get(i))
                .map(Name::as_str)
        })
        .map_err(|_| missing())
    }

    /// Object-grouped description: `A: clear, on the table. B: ...` with a
    /// trailing `World: ...` sentence for zero-arity fluents.
    pub fn render_state_nl(
        &self,
        state: &State,
        domain: &Domain,
        objects: &Objects,
    ) -> Result<String, MissingTemplate> {
        let mut groups: BTreeMap<&Name, Vec<String>> =
            objects.names().map(|o| (o, Vec::new())).collect();
        let mut world = Vec::new();
        for fluent in state.iter() {
            match fluent.args.first() {
                None => world.push(
                    self.zero_arity_templates
                        .get(&fluent.predicate)
                        .cloned()
                        .ok_or_else(|| MissingTemplate(fluent.predicate.to_string()))?,
                ),
                Some(subject) => groups
                    .entry(subject)
                    .or_default()
                    .push(self.property(fluent, domain)?),
            }
        }
        let mut sentences: Vec<String> = groups
            .into_iter()
            .map(|(object, props)| {
                let body = if props.is_empty() {
                    NO_PROPERTIES.to_string()
                } else {
                    props.join(", ")
                };
                format!("{}: {}.", object.capitalized(), body)
            })
            .collect();
        if !world.is_empty() {
            sentences.push(format!("World: {}.", world.join(", ")));
        }
        Ok(sentences.join(" "))
    }

    /// One comma-free clause such as `stack a on top of b`.
    pub fn render_action_nl(
        &self,
        action: &GroundAction,
        domain: &Domain,
    ) -> Result<String, MissingTemplate> {
        let missing = || MissingTemplate(action.schema.to_string());
        let tpl = self
            .action_templates
            .get(&action.schema)
            .ok_or_else(missing)?;
        let schema = domain.schema(&action.schema).ok_or_else(missing)?;
        template::fill(tpl, |slot| {
            schema
                .param_index(slot)
                .and_then(|i| action.args.get(i))
                .map(Name::as_str)
        })
        .map_err(|_| missing())
    }

    /// Inverse of [`render_action_nl`](Self::render_action_nl): matches a
    /// sentence against every action template (case-insensitive, trailing
    /// period optional) and grounds the unique match.
    pub fn parse_action_nl(
        &self,
        text: &str,
        domain: &Domain,
        objects: &Objects,
    ) -> Result<GroundAction, GroundError> {
        let sentence = text.trim().trim_end_matches('.').trim();
        let mut matches = Vec::new();
        for (name, tpl) in &self.action_templates {
            let Some(schema) = domain.schema(name) else {
                continue;
            };
            let Some((re, slots)) = template_regex(tpl) else {
                continue;
            };
            let Some(caps) = re.captures(sentence) else {
                continue;
            };
            let mut binding: BTreeMap<&str, String> = BTreeMap::new();
            let mut consistent = true;
            for (i, slot) in slots.iter().enumerate() {
                let value = caps[i + 1].to_lowercase();
                if let Some(prev) = binding.insert(slot.as_str(), value.clone()) {
                    consistent &= prev == value;
                }
            }
            if !consistent {
                continue;
            }
            let args: Option<Vec<Name>> = schema
                .params
                .iter()
                .map(|p| binding.get(p.name.as_str()).and_then(|v| Name::new(v).ok()))
                .collect();
            if let Some(args) = args {
                matches.push((name.clone(), args));
            }
        }
        match matches.len() {
            0 => Err(GroundError::Unrecognized {
                text: text.to_string(),
                reason: "matches no action template".into(),
            }),
            1 => {
                let (name, args) = matches.remove(0);
                domain.ground(&name, &args, objects)
            }
            _ => {
                // prefer the unique reading that type-checks
                let typed: Vec<GroundAction> = matches
                    .iter()
                    .filter_map(|(n, a)| domain.ground(n, a, objects).ok())
                    .collect();
                match typed.len() {
                    1 => Ok(typed.into_iter().next().unwrap()),
                    _ => Err(GroundError::Unrecognized {
                        text: text.to_string(),
                        reason: format!("ambiguous: matches {} action templates", matches.len()),
                    }),
                }
            }
        }
    }
}

impl NlAnnotations {
    /// `a on top of b`: the subject followed by its property. Zero-arity
    /// fluents render as their template.
    pub fn render_fluent_nl(
        &self,
        fluent: &Fluent,
        domain: &Domain,
    ) -> Result<String, MissingTemplate> {
        match fluent.args.first() {
            None => self
                .zero_arity_templates
                .get(&fluent.predicate)
                .cloned()
                .ok_or_else(|| MissingTemplate(fluent.predicate.to_string())),
            Some(subject) => Ok(format!("{subject} {}", self.property(fluent, domain)?)),
        }
    }

    /// Inverse of [`render_fluent_nl`](Self::render_fluent_nl).
    pub fn parse_fluent_nl(
        &self,
        text: &str,
        domain: &Domain,
        objects: &Objects,
    ) -> Result<Fluent, GroundError> {
        let text = text.trim().trim_end_matches('.').trim();
        if let Some(f) = self.parse_zero_arity(text) {
            return Ok(f);
        }
        let (subject, property) =
            text.split_once(char::is_whitespace)
                .ok_or_else(|| GroundError::Unrecognized {
                    text: text.to_string(),
                    reason: "expected a subject followed by a property".into(),
                })?;
        let subject = Name::new(subject)?;
        self.parse_property_nl(&subject, property, domain, objects)
    }

    /// Matches `property` (as rendered after `Subject:`) against the fluent
    /// templates with the first argument bound to `subject`.
    pub fn parse_property_nl(
        &self,
        subject: &Name,
        property: &str,
        domain: &Domain,
        objects: &Objects,
    ) -> Result<Fluent, GroundError> {
        let property = property.trim();
        let mut candidates = Vec::new();
        for (name, tpl) in &self.fluent_templates {
            let Some(decl) = domain.predicate(name) else {
                continue;
            };
            let Some((re, slots)) = template_regex(tpl) else {
                continue;
            };
            let Some(caps) = re.captures(property) else {
                continue;
            };
            let mut binding: BTreeMap<&str, String> = BTreeMap::new();
            binding.insert(decl.params[0].name.as_str(), subject.to_string());
            let mut consistent = true;
            for (i, slot) in slots.iter().enumerate() {
                let value = caps[i + 1].to_lowercase();
                if let Some(prev) = binding.insert(slot.as_str(), value.clone()) {
                    consistent &= prev == value;
                }
            }
            if !consistent {
                continue;
            }
            let args: Option<Vec<Name>> = decl
                .params
                .iter()
                .map(|p| binding.get(p.name.as_str()).and_then(|v| Name::new(v).ok()))
                .collect();
            if let Some(args) = args {
                let fluent = Fluent::new(name.clone(), args);
                if domain.check_fluent(&fluent, objects).is_ok() {
                    candidates.push(fluent);
                }
            }
        }
        match candidates.len() {
            1 => Ok(candidates.remove(0)),
            0 => Err(GroundError::Unrecognized {
                text: format!("{subject}: {property}"),
                reason: "matches no fluent template".into(),
            }),
            n => Err(GroundError::Unrecognized {
                text: format!("{subject}: {property}"),
                reason: format!("ambiguous: matches {n} fluent templates"),
            }),
        }
    }

    fn parse_zero_arity(&self, text: &str) -> Option<Fluent> {
        self.zero_arity_templates
            .iter()
            .find(|(_, tpl)| squash(tpl).eq_ignore_ascii_case(&squash(text)))
            .map(|(name, _)| Fluent::new(name.clone(), Vec::new()))
    }

    /// Inverse of [`render_state_nl`](Self::render_state_nl). Sentence order
    /// and property order are free; objects may be omitted.
    pub fn parse_state_nl(
        &self,
        text: &str,
        domain: &Domain,
        objects: &Objects,
    ) -> Result<State, GroundError> {
        let mut state = State::new();
        for sentence in text.split('.').map(str::trim).filter(|s| !s.is_empty()) {
            let (subject, body) =
                sentence
                    .split_once(':')
                    .ok_or_else(|| GroundError::Unrecognized {
                        text: sentence.to_string(),
                        reason: "expected `Object: property, property`".into(),
                    })?;
            let subject = subject.trim();
            let body = body.trim();
            if body.is_empty() || body == NO_PROPERTIES {
                continue;
            }
            if subject.eq_ignore_ascii_case("world") {
                for item in body.split(',') {
                    let f = self.parse_zero_arity(item.trim()).ok_or_else(|| {
                        GroundError::Unrecognized {
                            text: item.trim().to_string(),
                            reason: "matches no zero-arity template".into(),
                        }
                    })?;
                    state.insert(f);
                }
                continue;
            }
            let subject = Name::new(subject)?;
            if !objects.contains(&subject) {
                return Err(GroundError::Unrecognized {
                    text: sentence.to_string(),
                    reason: format!("unknown object `{subject}`"),
                });
            }
            for item in body.split(',') {
                state.insert(self.parse_property_nl(&subject, item, domain, objects)?);
            }
        }
        Ok(state)
    }
}

fn squash(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn check_slots(owner: &Name, tpl: &str, allowed: &BTreeSet<String>) -> Result<(), ValidationError> {
    let slots =
        template::placeholders(tpl).map_err(|e| ValidationError::new(owner, e.to_string()))?;
    if let Some(bad) = slots.iter().find(|s| !allowed.contains(*s)) {
        return Err(ValidationError::new(
            owner,
            format!("template placeholder `{{{bad}}}` is not a parameter"),
        ));
    }
    Ok(())
}

fn template_regex(tpl: &str) -> Option<(Regex, Vec<String>)> {
    let mut pattern = String::from("(?i)^");
    let mut slots = Vec::new();
    for piece in template::pieces(tpl.trim()).ok()? {
        match piece {
            Piece::Text(t) => {
                let mut in_space = false;
                for c in t.chars() {
                    if c.is_whitespace() {
                        if !in_space {
                            pattern.push_str(r"\s+");
                        }
                        in_space = true;
                    } else {
                        in_space = false;
                        pattern.push_str(&regex::escape(c.encode_utf8(&mut [0; 4])));
                    }
                }
            }
            Piece::Slot(s) => {
                pattern.push_str(r"([a-z][a-z0-9_-]*)");
                slots.push(s.to_string());
            }
        }
    }
    pattern.push('$');
    Some((Regex::new(&pattern).ok()?, slots))
}
