//! Bundled example inputs.

use alloc::vec::Vec;

use crate::config::Configuration;
use crate::model::FeatureModel;
use crate::prompt::LabelSpec;

/// The example feature model for requirements generation.
pub const SYNTHLINE_MODEL: &str = include_str!("../resources/synthline.fm");

/// A configuration producing 112 atomic configurations with a 1120-sample budget.
pub const REFERENCE_CONFIG: &str = include_str!("../resources/reference.config.json");

/// Six requirements-specification defect classes with their definitions.
pub const DEFECT_LABELS: &str = include_str!("../resources/defects.labels.json");

/// The default prompt template; no trailing newline.
pub const REQUIREMENT_PROMPT_V1: &str = include_str!("../resources/requirement-v1.prompt");

pub fn synthline_model() -> FeatureModel {
    FeatureModel::parse(SYNTHLINE_MODEL).expect("bundled model parses")
}

pub fn reference_configuration() -> Configuration {
    Configuration::from_json(REFERENCE_CONFIG).expect("bundled configuration parses")
}

pub fn defect_labels() -> Vec<LabelSpec> {
    serde_json::from_str(DEFECT_LABELS).expect("bundled labels parse")
}
