#![allow(dead_code)]

use synthline_core::resources::reference_configuration;
use synthline_core::{AttrValue, Configuration};

pub fn with_subset_size(config: Configuration, n: usize) -> Configuration {
    config.with_values("SubsetSize", vec![AttrValue::Number(n as f64)])
}

/// the reference configuration narrowed to Functions/Performance x Detailed x End Users x two domains.
pub fn four_atomics(n: usize) -> Configuration {
    let mut c = reference_configuration();
    for f in [
        "UserInterfaces",
        "HardwareInterfaces",
        "LogicalDatabase",
        "DesignConstraints",
        "SystemAttributes",
        "HighLevelSpecification",
        "BusinessManagers",
        "DevelopmentTeam",
        "RegulatoryBodies",
    ] {
        c = c.deselect(f);
    }
    with_subset_size(c, n)
}

/// One atomic configuration: Functions, Healthcare.
pub fn single_atomic(n: usize) -> Configuration {
    four_atomics(n)
        .deselect("Performance")
        .with_values("Domain", vec!["Healthcare".into()])
}
