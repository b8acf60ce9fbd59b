//! Prompt templates and rendering.
//!
//! A template is plain text with `{placeholder}` tokens (lowercase letters,
//! digits and `_`). `{label}` and `{label_description}` come from the
//! [`LabelSpec`]; every other placeholder names an axis of the atomic
//! configuration in snake case, e.g. `{requirement_type}` for the
//! `RequirementType` axis. Values are substituted verbatim.
//!
//! The default template, `requirement-v1`, lives in `resources/requirement-v1.prompt`.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expand::AtomicConfiguration;
use crate::resources;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpec {
    pub label: String,
    pub description: String,
}

impl LabelSpec {
    pub fn new(label: impl Into<String>, description: impl Into<String>) -> Result<Self, PromptError> {
        let spec = LabelSpec {
            label: label.into(),
            description: description.into(),
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<(), PromptError> {
        if self.label.trim().is_empty() || self.description.trim().is_empty() {
            return Err(PromptError::EmptyLabel);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    #[serde(rename = "atomicIndex")]
    pub atomic_index: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("no value for placeholder `{{{0}}}`")]
    MissingPlaceholder(String),
    #[error("malformed template at byte {offset}: {reason}")]
    MalformedTemplate { offset: usize, reason: &'static str },
    #[error("label and label description must be non-empty")]
    EmptyLabel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Placeholder(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    id: String,
    segments: Vec<Segment>,
}

pub const DEFAULT_TEMPLATE_ID: &str = "requirement-v1";

impl Template {
    pub fn parse(id: impl Into<String>, text: &str) -> Result<Self, PromptError> {
        let mut segments = Vec::new();
        let mut literal = String::new();
        let mut rest = text;
        let mut offset = 0;
        while let Some(open) = rest.find(['{', '}']) {
            if rest.as_bytes()[open] == b'}' {
                return Err(PromptError::MalformedTemplate {
                    offset: offset + open,
                    reason: "unmatched `}`",
                });
            }
            literal.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            let close = after.find('}').ok_or(PromptError::MalformedTemplate {
                offset: offset + open,
                reason: "unclosed `{`",
            })?;
            let name = &after[..close];
            let ok = !name.is_empty()
                && name.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_');
            if !ok {
                return Err(PromptError::MalformedTemplate {
                    offset: offset + open,
                    reason: "placeholder names use lowercase letters, digits and `_`",
                });
            }
            if !literal.is_empty() {
                segments.push(Segment::Literal(core::mem::take(&mut literal)));
            }
            segments.push(Segment::Placeholder(name.to_string()));
            let consumed = open + 1 + close + 1;
            offset += consumed;
            rest = &rest[consumed..];
        }
        literal.push_str(rest);
        if !literal.is_empty() {
            segments.push(Segment::Literal(literal));
        }
        Ok(Template { id: id.into(), segments })
    }

    /// The built-in requirement prompt.
    pub fn default_requirement() -> Self {
        Template::parse(DEFAULT_TEMPLATE_ID, resources::REQUIREMENT_PROMPT_V1).expect("bundled template is well formed")
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn placeholders(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Placeholder(p) => Some(p.as_str()),
            Segment::Literal(_) => None,
        })
    }

    pub fn render_with<'a>(&self, lookup: impl Fn(&str) -> Option<&'a str>) -> Result<String, PromptError> {
        let mut out = String::new();
        for s in &self.segments {
            match s {
                Segment::Literal(l) => out.push_str(l),
                Segment::Placeholder(p) => {
                    out.push_str(lookup(p).ok_or_else(|| PromptError::MissingPlaceholder(p.clone()))?)
                }
            }
        }
        Ok(out)
    }

    pub fn render(&self, atomic: &AtomicConfiguration, label: &LabelSpec) -> Result<RenderedPrompt, PromptError> {
        label.check()?;
        let mut vars: BTreeMap<String, &str> = atomic
            .axes
            .0
            .iter()
            .map(|(k, v)| (snake_case(k), v.as_str()))
            .collect();
        vars.insert("label".into(), &label.label);
        vars.insert("label_description".into(), &label.description);
        let text = self.render_with(|name| vars.get(name).copied())?;
        Ok(RenderedPrompt {
            text,
            atomic_index: atomic.index,
            label: label.label.clone(),
        })
    }
}

/// Renders with the default template.
pub fn render_prompt(atomic: &AtomicConfiguration, label: &LabelSpec) -> Result<RenderedPrompt, PromptError> {
    Template::default_requirement().render(atomic, label)
}

/// `RequirementType` -> `requirement_type`, `TopP` -> `top_p`, `LLM` -> `llm`.
pub fn snake_case(name: &str) -> String {
    let chars: Vec<char> = name.chars().collect();
    let mut out = String::with_capacity(name.len() + 4);
    for (i, &c) in chars.iter().enumerate() {
        if c.is_uppercase() && i > 0 {
            let prev = chars[i - 1];
            let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
            if prev.is_lowercase() || prev.is_ascii_digit() || (prev.is_uppercase() && next_lower) {
                out.push('_');
            }
        }
        out.extend(c.to_lowercase());
    }
    out
}
