//! Vocabulary size and inter-sample n-gram frequency.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::tokenize::tokenize;
use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VocabularyStats {
    #[serde(rename = "vocabSize")]
    pub vocab_size: usize,
    /// Distinct tokens per sample.
    #[serde(rename = "normalizedVocabSize")]
    pub normalized: f64,
}

pub fn vocabulary_stats<'a>(texts: impl IntoIterator<Item = &'a str>) -> Result<VocabularyStats, MetricsError> {
    let mut vocab = BTreeSet::new();
    let mut samples = 0usize;
    for t in texts {
        samples += 1;
        vocab.extend(tokenize(t));
    }
    if samples == 0 {
        return Err(MetricsError::EmptyDataset);
    }
    Ok(VocabularyStats {
        vocab_size: vocab.len(),
        normalized: vocab.len() as f64 / samples as f64,
    })
}

fn check_n_values(n_values: &[usize]) -> Result<(), MetricsError> {
    if n_values.is_empty() {
        return Err(MetricsError::NoNValues);
    }
    if let Some(&bad) = n_values.iter().find(|&&n| n == 0) {
        return Err(MetricsError::InvalidN(bad));
    }
    Ok(())
}

/// Mean number of occurrences per distinct n-gram, pooled over every `n` in
/// `n_values` and every sample. N-grams never cross sample boundaries.
pub fn ingf<'a>(texts: impl IntoIterator<Item = &'a str>, n_values: &[usize]) -> Result<f64, MetricsError> {
    check_n_values(n_values)?;
    let ns: BTreeSet<usize> = n_values.iter().copied().collect();
    let mut counts: BTreeMap<Vec<String>, usize> = BTreeMap::new();
    let mut total = 0usize;
    let mut samples = 0usize;
    for t in texts {
        samples += 1;
        let tokens = tokenize(t);
        for &n in &ns {
            for gram in tokens.windows(n) {
                *counts.entry(gram.to_vec()).or_insert(0) += 1;
                total += 1;
            }
        }
    }
    if samples == 0 {
        return Err(MetricsError::EmptyDataset);
    }
    if counts.is_empty() {
        return Err(MetricsError::NoNgrams);
    }
    Ok(total as f64 / counts.len() as f64)
}
