//! Feature models: a tree of features with mandatory/optional markers,
//! and/or/xor decompositions, leaf attributes and cross-tree constraints.
//!
//! Models are usually read from the line-oriented `.fm` DSL, see [`FeatureModel::parse`]
//! and the [`dsl`] module for the grammar.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod dsl;

/// Whether a feature must be selected whenever its parent is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optionality {
    Mandatory,
    Optional,
}

/// How a feature's children are selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decomposition {
    /// Children are selected independently, according to their optionality.
    And,
    /// At least one child must be selected.
    Or,
    /// Exactly one child must be selected.
    Xor,
    /// No children.
    Leaf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Multiplicity {
    Single,
    Multiple,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AttributeKind {
    #[serde(rename = "enumeration")]
    Enumeration { allowed_values: Vec<String> },
    Number { min: f64, max: f64 },
    Text,
}

/// Value domain of a leaf feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    #[serde(flatten)]
    pub kind: AttributeKind,
    pub multiplicity: Multiplicity,
}

impl AttributeSpec {
    pub fn validate(&self) -> Result<(), String> {
        match &self.kind {
            AttributeKind::Enumeration { allowed_values } => {
                if allowed_values.is_empty() {
                    return Err("enumeration needs at least one allowed value".into());
                }
                let distinct: BTreeSet<&String> = allowed_values.iter().collect();
                if distinct.len() != allowed_values.len() {
                    return Err("enumeration lists a value twice".into());
                }
            }
            AttributeKind::Number { min, max } => {
                if !min.is_finite() || !max.is_finite() {
                    return Err("number range bounds must be finite".into());
                }
                if min > max {
                    return Err(alloc::format!("number range has min {min} > max {max}"));
                }
            }
            AttributeKind::Text => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    /// Human-readable value used when the feature is a selected member of a group.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub optionality: Optionality,
    pub decomposition: Decomposition,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<Feature>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute: Option<AttributeSpec>,
}

impl Feature {
    pub fn leaf(name: impl Into<String>, optionality: Optionality) -> Self {
        Feature {
            name: name.into(),
            label: None,
            optionality,
            decomposition: Decomposition::Leaf,
            children: Vec::new(),
            attribute: None,
        }
    }

    /// The label if present, the name otherwise.
    pub fn display_value(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.name)
    }

    pub fn is_group(&self) -> bool {
        matches!(self.decomposition, Decomposition::Or | Decomposition::Xor)
    }

    /// Pre-order traversal of this subtree, yielding each feature with its parent.
    pub fn walk<'a>(&'a self, parent: Option<&'a Feature>, out: &mut Vec<(&'a Feature, Option<&'a Feature>)>) {
        out.push((self, parent));
        for child in &self.children {
            child.walk(Some(self), out);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Requires,
    Excludes,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub lhs: String,
    pub rhs: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),
    #[error("constraint references unknown feature `{0}`")]
    UnknownConstraintFeature(String),
    #[error("constraint relates `{0}` to itself")]
    SelfConstraint(String),
    #[error("invalid attribute on `{feature}`: {reason}")]
    InvalidAttribute { feature: String, reason: String },
    #[error("invalid structure at `{feature}`: {reason}")]
    InvalidStructure { feature: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureModel {
    pub name: String,
    pub version: String,
    pub root: Feature,
    #[serde(default)]
    pub constraints: Vec<Constraint>,
}

impl FeatureModel {
    /// Builds a model and checks every structural invariant.
    pub fn new(
        name: impl Into<String>,
        version: impl Into<String>,
        root: Feature,
        constraints: Vec<Constraint>,
    ) -> Result<Self, ModelError> {
        let model = FeatureModel {
            name: name.into(),
            version: version.into(),
            root,
            constraints,
        };
        model.check()?;
        Ok(model)
    }

    pub fn parse(text: &str) -> Result<Self, ModelError> {
        dsl::parse(text)
    }

    pub fn to_dsl(&self) -> String {
        dsl::serialize(self)
    }

    /// Re-checks the invariants, e.g. after deserializing from JSON.
    pub fn check(&self) -> Result<(), ModelError> {
        let mut seen = BTreeSet::new();
        for (feature, _) in self.features() {
            if !seen.insert(feature.name.as_str()) {
                return Err(ModelError::DuplicateFeature(feature.name.clone()));
            }
            check_feature(feature)?;
        }
        for c in &self.constraints {
            for name in [&c.lhs, &c.rhs] {
                if !seen.contains(name.as_str()) {
                    return Err(ModelError::UnknownConstraintFeature(name.clone()));
                }
            }
            if c.lhs == c.rhs {
                return Err(ModelError::SelfConstraint(c.lhs.clone()));
            }
        }
        Ok(())
    }

    /// All features in pre-order, each paired with its parent.
    pub fn features(&self) -> Vec<(&Feature, Option<&Feature>)> {
        let mut out = Vec::new();
        self.root.walk(None, &mut out);
        out
    }

    pub fn feature(&self, name: &str) -> Option<&Feature> {
        self.features().into_iter().map(|(f, _)| f).find(|f| f.name == name)
    }

    pub fn parent_of(&self, name: &str) -> Option<&Feature> {
        self.features()
            .into_iter()
            .find(|(f, _)| f.name == name)
            .and_then(|(_, p)| p)
    }
}

fn check_feature(feature: &Feature) -> Result<(), ModelError> {
    let structure = |reason: &str| ModelError::InvalidStructure {
        feature: feature.name.clone(),
        reason: reason.into(),
    };
    match (feature.decomposition, feature.children.is_empty()) {
        (Decomposition::Leaf, false) => return Err(structure("leaf feature has children")),
        (Decomposition::Leaf, true) => {}
        (_, true) => return Err(structure("non-leaf feature has no children")),
        (_, false) => {}
    }
    if let Some(attr) = &feature.attribute {
        if !feature.children.is_empty() {
            return Err(structure("attributes are only allowed on leaf features"));
        }
        attr.validate().map_err(|reason| ModelError::InvalidAttribute {
            feature: feature.name.clone(),
            reason,
        })?;
    }
    if !dsl::is_identifier(&feature.name) {
        return Err(structure("feature name is not an identifier"));
    }
    Ok(())
}
