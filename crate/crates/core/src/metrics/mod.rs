//! Corpus diversity metrics.
//!
//! * Vocabulary size: distinct tokens over the corpus; normalized by sample count.
//! * APS: mean cosine similarity over all unordered pairs of distinct samples.
//! * Intra-class APS: APS within each label, macro-averaged (the pooled mean over
//!   all same-class pairs is reported alongside).
//! * INGF: mean occurrence count per distinct token n-gram.
//! * Histogram of same-class pair similarities over [-1, 1].
//!
//! Tokens come from [`tokenize`]; embeddings from any [`Embedder`].

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod embed;
mod lexical;
mod similarity;
mod tokenize;

pub use embed::{EmbedError, Embedder, HashEmbedder, HASH_EMBEDDER_DIMENSION};
pub use lexical::{ingf, vocabulary_stats, VocabularyStats};
pub use similarity::{
    average_pairwise_similarity, cosine_similarity, intra_class_aps, similarity_histogram, EmbeddingVector,
    Histogram, HistogramBin, IntraClassAps,
};
pub use tokenize::tokenize;

use crate::sample::Dataset;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("the dataset is empty")]
    EmptyDataset,
    #[error("at least two vectors are needed, got {0}")]
    TooFewVectors(usize),
    #[error("vector {0} has zero norm")]
    ZeroVector(usize),
    #[error("vectors must share one dimension: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("embedding vectors must be non-empty")]
    EmptyVector,
    #[error("embedding vectors must be finite")]
    NonFinite,
    #[error("got {vectors} vectors for {texts} texts")]
    LengthMismatch { texts: usize, vectors: usize },
    #[error("no class has at least two samples")]
    NoClassWithPairs,
    #[error("no sample is long enough to form any requested n-gram")]
    NoNgrams,
    #[error("at least one n-gram size is required")]
    NoNValues,
    #[error("n-gram size must be at least 1, got {0}")]
    InvalidN(usize),
    #[error("the histogram needs at least one bin")]
    NoBins,
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportOptions {
    pub n_values: Vec<usize>,
    pub bin_count: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            n_values: vec![2, 3, 4],
            bin_count: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportMetadata {
    pub n_values: Vec<usize>,
    pub bin_count: usize,
    pub embedder: String,
    /// Which intra-class aggregate `intraClassApsMacro` holds.
    pub intra_class_headline: String,
    pub intra_class_aps_pooled: f64,
    /// Labels left out of the intra-class figures for having fewer than two samples.
    pub omitted_classes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DiversityReport {
    pub sample_count: usize,
    pub vocab_size: usize,
    pub normalized_vocab_size: f64,
    pub aps: f64,
    pub intra_class_aps: BTreeMap<String, f64>,
    pub intra_class_aps_macro: f64,
    pub ingf: f64,
    pub histogram: Histogram,
    pub metadata: ReportMetadata,
}

fn embed_all<E: Embedder + ?Sized>(embedder: &E, texts: &[&str]) -> Result<Vec<EmbeddingVector>, MetricsError> {
    let vectors = embedder.embed(texts)?;
    if vectors.len() != texts.len() {
        return Err(MetricsError::LengthMismatch {
            texts: texts.len(),
            vectors: vectors.len(),
        });
    }
    Ok(vectors)
}

/// APS over the embeddings of every sample in the dataset.
pub fn dataset_aps<E: Embedder + ?Sized>(dataset: &Dataset, embedder: &E) -> Result<f64, MetricsError> {
    let texts: Vec<&str> = dataset.texts().collect();
    average_pairwise_similarity(&embed_all(embedder, &texts)?)
}

pub fn dataset_intra_class_aps<E: Embedder + ?Sized>(dataset: &Dataset, embedder: &E) -> Result<IntraClassAps, MetricsError> {
    let texts: Vec<&str> = dataset.texts().collect();
    let labels: Vec<&str> = dataset.samples().iter().map(|s| s.label.as_str()).collect();
    intra_class_aps(&embed_all(embedder, &texts)?, &labels)
}

pub fn dataset_similarity_histogram<E: Embedder + ?Sized>(
    dataset: &Dataset,
    embedder: &E,
    bin_count: usize,
) -> Result<Histogram, MetricsError> {
    let texts: Vec<&str> = dataset.texts().collect();
    let labels: Vec<&str> = dataset.samples().iter().map(|s| s.label.as_str()).collect();
    similarity_histogram(&embed_all(embedder, &texts)?, &labels, bin_count)
}

/// Every metric, sharing one embedding pass.
pub fn diversity_report<E: Embedder + ?Sized>(
    dataset: &Dataset,
    embedder: &E,
    options: &ReportOptions,
) -> Result<DiversityReport, MetricsError> {
    let texts: Vec<&str> = dataset.texts().collect();
    let vocab = vocabulary_stats(texts.iter().copied())?;
    let ingf = ingf(texts.iter().copied(), &options.n_values)?;
    if options.bin_count == 0 {
        return Err(MetricsError::NoBins);
    }

    let vectors = embed_all(embedder, &texts)?;
    let labels: Vec<&str> = dataset.samples().iter().map(|s| s.label.as_str()).collect();
    let prepared = similarity::Prepared::new(&vectors)?;
    if vectors.len() < 2 {
        return Err(MetricsError::TooFewVectors(vectors.len()));
    }
    let everyone: Vec<usize> = (0..vectors.len()).collect();
    let aps = prepared.pair_sum(&everyone) / (vectors.len() * (vectors.len() - 1) / 2) as f64;
    let classes = similarity::group(&labels, vectors.len())?;
    let intra = similarity::intra_class_prepared(&prepared, &classes)?;
    let histogram = similarity::histogram_prepared(&prepared, &classes, options.bin_count)?;

    let mut n_values = options.n_values.clone();
    n_values.sort_unstable();
    n_values.dedup();
    Ok(DiversityReport {
        sample_count: dataset.len(),
        vocab_size: vocab.vocab_size,
        normalized_vocab_size: vocab.normalized,
        aps,
        intra_class_aps: intra.per_class,
        intra_class_aps_macro: intra.macro_avg,
        ingf,
        histogram,
        metadata: ReportMetadata {
            n_values,
            bin_count: options.bin_count,
            embedder: embedder.name(),
            intra_class_headline: "macro".into(),
            intra_class_aps_pooled: intra.pooled,
            omitted_classes: intra.omitted,
        },
    })
}

impl DiversityReport {
    /// Plain-text tables: vocabulary, then similarity and repetition, then per class.
    pub fn to_table(&self, dataset_name: &str) -> String {
        let w = dataset_name.chars().count().max(7);
        let mut out = String::new();
        out.push_str(&format!("{:<w$} | {:>7} | {:>11} | {:>22}\n", "Dataset", "Samples", "Vocab. Size", "Normalized Vocab. Size"));
        out.push_str(&format!(
            "{:<w$} | {:>7} | {:>11} | {:>22.2}\n\n",
            dataset_name, self.sample_count, self.vocab_size, self.normalized_vocab_size
        ));
        out.push_str(&format!("{:<w$} | {:>6} | {:>15} | {:>6}\n", "Dataset", "APS", "Intra-class APS", "INGF"));
        out.push_str(&format!(
            "{:<w$} | {:>6.3} | {:>15.3} | {:>6.3}\n\n",
            dataset_name, self.aps, self.intra_class_aps_macro, self.ingf
        ));
        let cw = self.intra_class_aps.keys().map(|k| k.chars().count()).max().unwrap_or(5).max(5);
        out.push_str(&format!("{:<cw$} | {:>15}\n", "Class", "Intra-class APS"));
        for (label, v) in &self.intra_class_aps {
            out.push_str(&format!("{label:<cw$} | {v:>15.3}\n"));
        }
        for label in &self.metadata.omitted_classes {
            out.push_str(&format!("{label:<cw$} | {:>15}\n", "n/a (<2)"));
        }
        out.push_str(&format!(
            "\nn-gram sizes {:?}; embedder {}; pooled intra-class APS {:.3}\n",
            self.metadata.n_values, self.metadata.embedder, self.metadata.intra_class_aps_pooled
        ));
        out
    }
}
