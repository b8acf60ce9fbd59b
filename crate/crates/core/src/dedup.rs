//! Removal of repeated texts.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::sample::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DedupMode {
    /// Compare texts after trimming, collapsing whitespace runs and lowercasing.
    #[default]
    Normalized,
    /// Compare texts byte for byte.
    Exact,
}

pub fn normalize_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

/// Keeps the first occurrence of each text; returns the kept dataset and how many were dropped.
pub fn deduplicate(dataset: &Dataset, mode: DedupMode) -> (Dataset, usize) {
    let mut seen = BTreeSet::new();
    let kept: Vec<_> = dataset
        .samples()
        .iter()
        .filter(|s| {
            let key = match mode {
                DedupMode::Normalized => normalize_text(&s.text),
                DedupMode::Exact => s.text.clone(),
            };
            seen.insert(key)
        })
        .cloned()
        .collect();
    let removed = dataset.len() - kept.len();
    (Dataset::from_checked(kept), removed)
}
