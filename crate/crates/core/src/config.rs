//! User configurations and their validation against a [`FeatureModel`].
//!
//! On disk a configuration is a JSON document:
//!
//! ```json
//! {
//!   "model": "Synthline",
//!   "selections": ["Generator", "LLM", "GPT4o"],
//!   "values": { "Temperature": [1], "Domain": ["Healthcare", "Retail"] }
//! }
//! ```
//!
//! The root is always selected. A feature that has an entry in `values` counts as
//! selected even if it is not listed in `selections`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{AttributeKind, ConstraintKind, Decomposition, Feature, FeatureModel, Multiplicity, Optionality};

/// One attribute value as written in a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Number(f64),
    Text(String),
}

impl AttrValue {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            AttrValue::Number(n) => Some(*n),
            AttrValue::Text(t) => t.trim().parse().ok(),
        }
    }
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrValue::Number(n) => write!(f, "{n}"),
            AttrValue::Text(t) => f.write_str(t),
        }
    }
}

impl From<&str> for AttrValue {
    fn from(s: &str) -> Self {
        AttrValue::Text(s.into())
    }
}

impl From<f64> for AttrValue {
    fn from(n: f64) -> Self {
        AttrValue::Number(n)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub model: String,
    #[serde(default)]
    pub selections: BTreeSet<String>,
    #[serde(default)]
    pub values: BTreeMap<String, Vec<AttrValue>>,
}

impl Configuration {
    pub fn new(model: impl Into<String>) -> Self {
        Configuration {
            model: model.into(),
            ..Default::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configurations always serialize")
    }

    pub fn select(mut self, names: &[&str]) -> Self {
        self.selections.extend(names.iter().map(|n| n.to_string()));
        self
    }

    pub fn deselect(mut self, name: &str) -> Self {
        self.selections.remove(name);
        self.values.remove(name);
        self
    }

    pub fn with_values(mut self, name: &str, values: Vec<AttrValue>) -> Self {
        self.values.insert(name.into(), values);
        self
    }

    /// Whether `name` is selected, counting the implicit root and value-carrying features.
    pub fn is_selected(&self, model: &FeatureModel, name: &str) -> bool {
        name == model.root.name || self.selections.contains(name) || self.values.contains_key(name)
    }

    /// The sole value of a single-valued entry, if present.
    pub fn single_value(&self, name: &str) -> Option<&AttrValue> {
        match self.values.get(name).map(Vec::as_slice) {
            Some([v]) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    MandatoryMissing,
    ParentMissing,
    XorCardinality,
    OrCardinality,
    Requires,
    Excludes,
    Range,
    Multiplicity,
    UnknownName,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    #[serde(rename = "featureName")]
    pub feature: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        ValidationReport {
            valid: violations.is_empty(),
            violations,
        }
    }

    pub fn has(&self, rule: Rule) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.valid {
            return f.write_str("configuration is valid");
        }
        writeln!(f, "configuration is invalid ({} violation(s)):", self.violations.len())?;
        for v in &self.violations {
            let rule = serde_json::to_value(v.rule).ok();
            let rule = rule.as_ref().and_then(|r| r.as_str()).unwrap_or("?");
            writeln!(f, "  [{rule}] {}: {}", v.feature, v.message)?;
        }
        Ok(())
    }
}

fn violation(rule: Rule, feature: &str, message: String) -> Violation {
    Violation {
        rule,
        feature: feature.into(),
        message,
    }
}

/// Checks a (possibly partial) configuration. Never fails; problems are reported.
pub fn validate(model: &FeatureModel, config: &Configuration) -> ValidationReport {
    let mut out = Vec::new();
    if config.model != model.name {
        out.push(violation(
            Rule::UnknownName,
            &config.model,
            format!("configuration targets model `{}` but the model is `{}`", config.model, model.name),
        ));
    }

    let features = model.features();
    let known: BTreeSet<&str> = features.iter().map(|(f, _)| f.name.as_str()).collect();
    let mentioned: BTreeSet<&str> = config
        .selections
        .iter()
        .chain(config.values.keys())
        .map(String::as_str)
        .collect();
    for name in &mentioned {
        if !known.contains(name) {
            out.push(violation(Rule::UnknownName, name, format!("`{name}` is not a feature of the model")));
        }
    }

    let selected = |name: &str| config.is_selected(model, name);

    for (f, parent) in &features {
        if !selected(&f.name) {
            continue;
        }
        if let Some(p) = parent {
            if !selected(&p.name) {
                out.push(violation(
                    Rule::ParentMissing,
                    &f.name,
                    format!("`{}` is selected but its parent `{}` is not", f.name, p.name),
                ));
            }
        }
        check_children(f, &selected, &mut out);
        if let Some(values) = config.values.get(&f.name) {
            check_values(f, values, &mut out);
        }
    }

    for c in &model.constraints {
        let (l, r) = (selected(&c.lhs), selected(&c.rhs));
        match c.kind {
            ConstraintKind::Requires if l && !r => out.push(violation(
                Rule::Requires,
                &c.lhs,
                format!("`{}` requires `{}`, which is not selected", c.lhs, c.rhs),
            )),
            ConstraintKind::Excludes if l && r => out.push(violation(
                Rule::Excludes,
                &c.lhs,
                format!("`{}` excludes `{}`, but both are selected", c.lhs, c.rhs),
            )),
            _ => {}
        }
    }

    ValidationReport::from_violations(out)
}

fn check_children(f: &Feature, selected: &dyn Fn(&str) -> bool, out: &mut Vec<Violation>) {
    match f.decomposition {
        Decomposition::Leaf => {}
        Decomposition::And => {
            for c in &f.children {
                if c.optionality == Optionality::Mandatory && !selected(&c.name) {
                    out.push(violation(
                        Rule::MandatoryMissing,
                        &c.name,
                        format!("`{}` is mandatory under `{}` but not selected", c.name, f.name),
                    ));
                }
            }
        }
        Decomposition::Xor | Decomposition::Or => {
            let chosen: Vec<&str> = f
                .children
                .iter()
                .filter(|c| selected(&c.name))
                .map(|c| c.name.as_str())
                .collect();
            if f.decomposition == Decomposition::Xor && chosen.len() != 1 {
                out.push(violation(
                    Rule::XorCardinality,
                    &f.name,
                    format!(
                        "exactly one member of xor group `{}` must be selected, found {} ({})",
                        f.name,
                        chosen.len(),
                        chosen.join(", ")
                    ),
                ));
            } else if f.decomposition == Decomposition::Or && chosen.is_empty() {
                out.push(violation(
                    Rule::OrCardinality,
                    &f.name,
                    format!("at least one member of or group `{}` must be selected", f.name),
                ));
            }
        }
    }
}

fn check_values(f: &Feature, values: &[AttrValue], out: &mut Vec<Violation>) {
    let Some(attr) = &f.attribute else {
        out.push(violation(
            Rule::Range,
            &f.name,
            format!("`{}` has no attribute but values were given", f.name),
        ));
        return;
    };
    match attr.multiplicity {
        Multiplicity::Single if values.len() != 1 => out.push(violation(
            Rule::Multiplicity,
            &f.name,
            format!("`{}` takes exactly one value, found {}", f.name, values.len()),
        )),
        Multiplicity::Multiple if values.is_empty() => out.push(violation(
            Rule::Multiplicity,
            &f.name,
            format!("`{}` needs at least one value", f.name),
        )),
        _ => {}
    }
    let mut seen = BTreeSet::new();
    for v in values {
        let shown = v.to_string();
        if !seen.insert(shown.clone()) {
            out.push(violation(
                Rule::Multiplicity,
                &f.name,
                format!("value `{shown}` is listed more than once for `{}`", f.name),
            ));
        }
        match &attr.kind {
            AttributeKind::Enumeration { allowed_values } => {
                if !allowed_values.iter().any(|a| *a == shown) {
                    out.push(violation(
                        Rule::Range,
                        &f.name,
                        format!("`{shown}` is not one of {{{}}}", allowed_values.join(", ")),
                    ));
                }
            }
            AttributeKind::Number { min, max } => match v.as_number() {
                Some(n) if n >= *min && n <= *max => {}
                Some(n) => out.push(violation(
                    Rule::Range,
                    &f.name,
                    format!("{n} is outside the allowed range [{min}, {max}]"),
                )),
                None => out.push(violation(Rule::Range, &f.name, format!("`{shown}` is not a number"))),
            },
            AttributeKind::Text => {
                if shown.trim().is_empty() {
                    out.push(violation(Rule::Range, &f.name, "text values must not be blank".into()));
                }
            }
        }
    }
}
