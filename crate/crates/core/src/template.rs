//! `{placeholder}` substitution shared by prompt and annotation templates.

use std::collections::BTreeSet;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("unclosed `{{` at byte {0}")]
    Unclosed(usize),
    #[error("no value for placeholder `{{{0}}}`")]
    Unbound(String),
}

/// A literal run or a placeholder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

/// Splits a template into literal text and `{name}` slots. A `{` that is not
/// followed by an identifier and `}` is kept as text.
pub fn pieces(template: &str) -> Result<Vec<Piece<'_>>, TemplateError> {
    let mut out = Vec::new();
    let mut rest = template;
    let mut offset = 0;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let close = after
            .find('}')
            .ok_or(TemplateError::Unclosed(offset + open))?;
        let ident = &after[..close];
        let is_ident = !ident.is_empty()
            && ident
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        if is_ident {
            if open > 0 {
                out.push(Piece::Text(&rest[..open]));
            }
            out.push(Piece::Slot(ident));
            let consumed = open + 1 + close + 1;
            rest = &rest[consumed..];
            offset += consumed;
        } else {
            out.push(Piece::Text(&rest[..open + 1]));
            rest = &rest[open + 1..];
            offset += open + 1;
        }
    }
    if !rest.is_empty() {
        out.push(Piece::Text(rest));
    }
    Ok(out)
}

pub fn placeholders(template: &str) -> Result<BTreeSet<String>, TemplateError> {
    Ok(pieces(template)?
        .into_iter()
        .filter_map(|p| match p {
            Piece::Slot(s) => Some(s.to_string()),
            Piece::Text(_) => None,
        })
        .collect())
}

/// Substitutes every slot using `lookup`.
pub fn fill<'v>(
    template: &str,
    lookup: impl Fn(&str) -> Option<&'v str>,
) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(template.len());
    for piece in pieces(template)? {
        match piece {
            Piece::Text(t) => out.push_str(t),
            Piece::Slot(s) => {
                out.push_str(lookup(s).ok_or_else(|| TemplateError::Unbound(s.to_string()))?)
            }
        }
    }
    Ok(out)
}
