//! Core algorithms for feature-model driven synthetic requirements data.
//!
//! This crate is `no_std` (it needs `alloc`) and contains no IO. It covers:
//!
//! * [`model`]: the feature-model DSL, its parser and serializer.
//! * [`config`]: user configurations and their validation against a model.
//! * [`expand`]: expansion of a multi-valued configuration into atomic configurations.
//! * [`prompt`]: prompt templates and rendering of atomic configurations.
//! * [`allocation`]: even distribution of a sample budget over atomic configurations.
//! * [`sample`], [`dedup`], [`split`]: labeled datasets and operations over them.
//! * [`metrics`]: lexical, semantic and phrase-level diversity metrics.
//! * [`resources`]: the bundled example model, configuration, labels and prompt template.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod allocation;
pub mod config;
pub mod dedup;
pub mod expand;
pub mod metrics;
pub mod model;
pub mod prompt;
pub mod resources;
pub mod sample;
pub mod split;

pub use allocation::{allocate_samples, AllocationError};
pub use config::{AttrValue, Configuration, Rule, ValidationReport, Violation};
pub use dedup::{deduplicate, DedupMode};
pub use expand::{expand_atomic_configurations, Axis, AtomicConfiguration, ExpandError};
pub use model::{
    AttributeKind, AttributeSpec, Constraint, ConstraintKind, Decomposition, Feature,
    FeatureModel, ModelError, Multiplicity, Optionality,
};
pub use prompt::{render_prompt, LabelSpec, PromptError, RenderedPrompt, Template};
pub use sample::{ClassStats, DataSource, Dataset, DatasetError, SyntheticSample};
pub use split::{stratified_split, SplitError};
