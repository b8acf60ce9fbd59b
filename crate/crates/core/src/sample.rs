//! Labeled samples with generation provenance, and datasets of them.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Column order shared by the CSV header and the JSON object keys.
pub const COLUMNS: [&str; 15] = [
    "id",
    "text",
    "label",
    "label_description",
    "requirement_type",
    "specification_level",
    "requirement_source",
    "specification_format",
    "language",
    "domain",
    "llm",
    "temperature",
    "top_p",
    "run_id",
    "created_at",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSample {
    pub id: String,
    pub text: String,
    pub label: String,
    #[serde(default)]
    pub label_description: String,
    #[serde(default)]
    pub requirement_type: String,
    #[serde(default)]
    pub specification_level: String,
    #[serde(default)]
    pub requirement_source: String,
    #[serde(default)]
    pub specification_format: String,
    #[serde(default)]
    pub language: String,
    #[serde(default)]
    pub domain: String,
    #[serde(default)]
    pub llm: String,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub top_p: Option<f64>,
    #[serde(default)]
    pub run_id: String,
    #[serde(default, with = "timestamp")]
    pub created_at: Option<DateTime<Utc>>,
}

impl SyntheticSample {
    /// A sample with only text and label, as found in external corpora.
    pub fn bare(id: impl Into<String>, text: impl Into<String>, label: impl Into<String>) -> Self {
        SyntheticSample {
            id: id.into(),
            text: text.into(),
            label: label.into(),
            label_description: String::new(),
            requirement_type: String::new(),
            specification_level: String::new(),
            requirement_source: String::new(),
            specification_format: String::new(),
            language: String::new(),
            domain: String::new(),
            llm: String::new(),
            temperature: None,
            top_p: None,
            run_id: String::new(),
            created_at: None,
        }
    }

    pub fn is_synthetic(&self) -> bool {
        !self.run_id.is_empty()
    }
}

/// RFC 3339 timestamps in UTC with millisecond precision.
pub mod timestamp {
    use alloc::string::String;
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn format(t: &DateTime<Utc>) -> String {
        t.to_rfc3339_opts(SecondsFormat::Millis, true)
    }

    pub fn parse(s: &str) -> Result<DateTime<Utc>, chrono::ParseError> {
        DateTime::parse_from_rfc3339(s).map(|t| t.with_timezone(&Utc))
    }

    pub fn serialize<S: Serializer>(t: &Option<DateTime<Utc>>, s: S) -> Result<S::Ok, S::Error> {
        match t {
            Some(t) => s.serialize_str(&format(t)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DateTime<Utc>>, D::Error> {
        match Option::<String>::deserialize(d)? {
            None => Ok(None),
            Some(s) if s.is_empty() => Ok(None),
            Some(s) => parse(&s).map(Some).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synthetic,
    Real,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatasetError {
    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),
    #[error("sample `{0}` has empty text")]
    EmptyText(String),
    #[error("sample `{0}` has an empty label")]
    EmptyLabel(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    samples: Vec<SyntheticSample>,
    source: DataSource,
}

impl Dataset {
    pub fn new(samples: Vec<SyntheticSample>) -> Result<Self, DatasetError> {
        let mut ids = BTreeSet::new();
        for s in &samples {
            if !ids.insert(s.id.as_str()) {
                return Err(DatasetError::DuplicateId(s.id.clone()));
            }
            if s.text.trim().is_empty() {
                return Err(DatasetError::EmptyText(s.id.clone()));
            }
            if s.label.trim().is_empty() {
                return Err(DatasetError::EmptyLabel(s.id.clone()));
            }
        }
        let source = infer_source(&samples);
        Ok(Dataset { samples, source })
    }

    pub fn empty() -> Self {
        Dataset {
            samples: Vec::new(),
            source: DataSource::Synthetic,
        }
    }

    /// Builds a dataset from a subset of an already checked one.
    pub(crate) fn from_checked(samples: Vec<SyntheticSample>) -> Self {
        let source = infer_source(&samples);
        Dataset { samples, source }
    }

    pub fn samples(&self) -> &[SyntheticSample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<SyntheticSample> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn source(&self) -> DataSource {
        self.source
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.samples.iter().map(|s| s.text.as_str())
    }

    pub fn class_stats(&self) -> ClassStats {
        let mut per_class = BTreeMap::new();
        for s in &self.samples {
            *per_class.entry(s.label.clone()).or_insert(0) += 1;
        }
        ClassStats {
            per_class,
            total: self.samples.len(),
        }
    }

    /// Sample indices grouped by label, in label order.
    pub fn indices_by_label(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut out: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, s) in self.samples.iter().enumerate() {
            out.entry(s.label.as_str()).or_default().push(i);
        }
        out
    }
}

fn infer_source(samples: &[SyntheticSample]) -> DataSource {
    let synthetic = samples.iter().filter(|s| s.is_synthetic()).count();
    if synthetic == samples.len() {
        DataSource::Synthetic
    } else if synthetic == 0 {
        DataSource::Real
    } else {
        DataSource::Mixed
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassStats {
    #[serde(rename = "perClass")]
    pub per_class: BTreeMap<String, usize>,
    pub total: usize,
}
