//! Domains known to the pipeline, each with its annotations and few-shot
//! examples.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::domain::{parse_domain, Domain, NlAnnotations};
use crate::error::{LoadError, ValidationError};
use crate::fixtures;
use crate::model::Name;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("{path}: {source}")]
    Domain { path: String, source: LoadError },
    #[error("{path}: {source}")]
    Annotations {
        path: String,
        source: ValidationError,
    },
    #[error("{path}: {message}")]
    Examples { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Few-shot examples keyed by prompt stage (`check`, `progress`, ...).
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
pub struct PromptExamples {
    #[serde(default)]
    pub domain: Option<Name>,
    #[serde(default)]
    pub examples: BTreeMap<String, Vec<String>>,
}

impl PromptExamples {
    pub fn for_stage(&self, stage: &str) -> &[String] {
        self.examples.get(stage).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone)]
pub struct DomainBundle {
    pub domain: Domain,
    pub annotations: NlAnnotations,
    pub examples: PromptExamples,
}

impl DomainBundle {
    pub fn from_texts(
        domain_text: &str,
        annotations_json: &str,
        examples_json: Option<&str>,
        origin: &str,
    ) -> Result<Self, RegistryError> {
        let domain = parse_domain(domain_text).map_err(|source| RegistryError::Domain {
            path: origin.to_string(),
            source,
        })?;
        let annotations =
            NlAnnotations::from_json(annotations_json, &domain).map_err(|source| {
                RegistryError::Annotations {
                    path: origin.to_string(),
                    source,
                }
            })?;
        let examples = match examples_json {
            Some(text) => PromptExamples::from_json(text).map_err(|e| RegistryError::Examples {
                path: origin.to_string(),
                message: e.to_string(),
            })?,
            None => PromptExamples::default(),
        };
        if let Some(d) = &examples.domain {
            if d != &domain.name {
                return Err(RegistryError::Examples {
                    path: origin.to_string(),
                    message: format!("examples are for `{d}`, not `{}`", domain.name),
                });
            }
        }
        Ok(DomainBundle {
            domain,
            annotations,
            examples,
        })
    }

    /// Loads `<stem>.dom`, `<stem>.annotations.json` and, if present,
    /// `<stem>.examples.json` from the same directory.
    pub fn load(
        domain_path: &Path,
        annotations_path: Option<&Path>,
    ) -> Result<Self, RegistryError> {
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|source| RegistryError::Io {
                path: p.display().to_string(),
                source,
            })
        };
        let stem = domain_path.with_extension("");
        let ann_path = annotations_path
            .map(Path::to_path_buf)
            .unwrap_or_else(|| stem.with_extension("annotations.json"));
        let ex_path = stem.with_extension("examples.json");
        let examples = if ex_path.exists() {
            Some(read(&ex_path)?)
        } else {
            None
        };
        Self::from_texts(
            &read(domain_path)?,
            &read(&ann_path)?,
            examples.as_deref(),
            &domain_path.display().to_string(),
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct Registry {
    bundles: BTreeMap<Name, DomainBundle>,
}

impl Registry {
    pub fn new() -> Self {
        Registry::default()
    }

    /// Blocksworld, Depots and Grippers.
    pub fn builtin() -> Self {
        let mut reg = Registry::new();
        for (dom, ann, ex, origin) in [
            (
                fixtures::BLOCKSWORLD_DOMAIN,
                fixtures::BLOCKSWORLD_ANNOTATIONS,
                fixtures::BLOCKSWORLD_EXAMPLES,
                "blocksworld",
            ),
            (
                fixtures::DEPOTS_DOMAIN,
                fixtures::DEPOTS_ANNOTATIONS,
                fixtures::DEPOTS_EXAMPLES,
                "depots",
            ),
            (
                fixtures::GRIPPERS_DOMAIN,
                fixtures::GRIPPERS_ANNOTATIONS,
                fixtures::GRIPPERS_EXAMPLES,
                "grippers",
            ),
        ] {
            let bundle = DomainBundle::from_texts(dom, ann, Some(ex), origin)
                .expect("bundled fixtures are valid");
            reg.insert(bundle);
        }
        reg
    }

    pub fn insert(&mut self, bundle: DomainBundle) -> Option<DomainBundle> {
        self.bundles.insert(bundle.domain.name.clone(), bundle)
    }

    pub fn get(&self, name: &Name) -> Option<&DomainBundle> {
        self.bundles.get(name)
    }

    pub fn get_str(&self, name: &str) -> Option<&DomainBundle> {
        Name::new(name).ok().and_then(|n| self.bundles.get(&n))
    }

    pub fn names(&self) -> impl Iterator<Item = &Name> {
        self.bundles.keys()
    }
}
