//! Cosine similarity statistics over embedding vectors.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::MetricsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, MetricsError> {
        if values.is_empty() {
            return Err(MetricsError::EmptyVector);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MetricsError::NonFinite);
        }
        Ok(EmbeddingVector(values))
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Vectors prepared for repeated cosine evaluation.
///
/// The cosine is computed as `dot(a, b) / sqrt(|a|² |b|²)`, which is exactly 1
/// for bitwise-identical vectors.
pub(crate) struct Prepared<'a> {
    vectors: &'a [EmbeddingVector],
    squared_norms: Vec<f64>,
}

impl<'a> Prepared<'a> {
    pub(crate) fn new(vectors: &'a [EmbeddingVector]) -> Result<Self, MetricsError> {
        if let Some(first) = vectors.first() {
            let dim = first.dimension();
            if let Some(bad) = vectors.iter().find(|v| v.dimension() != dim) {
                return Err(MetricsError::DimensionMismatch {
                    expected: dim,
                    found: bad.dimension(),
                });
            }
        }
        let squared_norms: Vec<f64> = vectors.iter().map(|v| dot(&v.0, &v.0)).collect();
        if let Some(i) = squared_norms.iter().position(|&n| n == 0.0) {
            return Err(MetricsError::ZeroVector(i));
        }
        Ok(Prepared { vectors, squared_norms })
    }

    pub(crate) fn cosine(&self, i: usize, j: usize) -> f64 {
        let c = dot(&self.vectors[i].0, &self.vectors[j].0) / libm::sqrt(self.squared_norms[i] * self.squared_norms[j]);
        c.clamp(-1.0, 1.0)
    }

    /// Sum of cosines over all pairs `i < j` drawn from `members`, accumulated row by row.
    pub(crate) fn pair_sum(&self, members: &[usize]) -> f64 {
        let mut total = 0.0;
        for (a, &i) in members.iter().enumerate() {
            let mut row = 0.0;
            for &j in &members[a + 1..] {
                row += self.cosine(i, j);
            }
            total += row;
        }
        total
    }

    pub(crate) fn pair_cosines(&self, members: &[usize], out: &mut Vec<f64>) {
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                out.push(self.cosine(i, j));
            }
        }
    }
}

pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, MetricsError> {
    let pair = [a.clone(), b.clone()];
    Ok(Prepared::new(&pair)?.cosine(0, 1))
}

fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Mean cosine similarity over all unordered pairs of distinct vectors.
pub fn average_pairwise_similarity(vectors: &[EmbeddingVector]) -> Result<f64, MetricsError> {
    if vectors.len() < 2 {
        return Err(MetricsError::TooFewVectors(vectors.len()));
    }
    let prepared = Prepared::new(vectors)?;
    let members: Vec<usize> = (0..vectors.len()).collect();
    Ok(prepared.pair_sum(&members) / pair_count(vectors.len()) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntraClassAps {
    #[serde(rename = "perClass")]
    pub per_class: BTreeMap<String, f64>,
    /// Unweighted mean over the reported classes.
    #[serde(rename = "macro")]
    pub macro_avg: f64,
    /// Mean over all same-class pairs pooled together.
    pub pooled: f64,
    /// Classes with fewer than two samples.
    pub omitted: Vec<String>,
}

/// Per-class APS for vectors tagged with `labels` (parallel slices).
pub fn intra_class_aps(vectors: &[EmbeddingVector], labels: &[&str]) -> Result<IntraClassAps, MetricsError> {
    let prepared = Prepared::new(vectors)?;
    intra_class_prepared(&prepared, &group(labels, vectors.len())?)
}

pub(crate) fn group<'l>(labels: &[&'l str], n: usize) -> Result<BTreeMap<&'l str, Vec<usize>>, MetricsError> {
    if labels.len() != n {
        return Err(MetricsError::LengthMismatch {
            texts: labels.len(),
            vectors: n,
        });
    }
    let mut out: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        out.entry(*l).or_default().push(i);
    }
    Ok(out)
}

pub(crate) fn intra_class_prepared(
    prepared: &Prepared<'_>,
    classes: &BTreeMap<&str, Vec<usize>>,
) -> Result<IntraClassAps, MetricsError> {
    let mut per_class = BTreeMap::new();
    let mut omitted = Vec::new();
    let (mut pooled_sum, mut pooled_pairs) = (0.0, 0usize);
    for (label, members) in classes {
        if members.len() < 2 {
            omitted.push(label.to_string());
            continue;
        }
        let sum = prepared.pair_sum(members);
        let pairs = pair_count(members.len());
        per_class.insert(label.to_string(), sum / pairs as f64);
        pooled_sum += sum;
        pooled_pairs += pairs;
    }
    if per_class.is_empty() {
        return Err(MetricsError::NoClassWithPairs);
    }
    let macro_avg = per_class.values().sum::<f64>() / per_class.len() as f64;
    Ok(IntraClassAps {
        per_class,
        macro_avg,
        pooled: pooled_sum / pooled_pairs as f64,
        omitted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    #[serde(rename = "binLower")]
    pub lower: f64,
    pub count: usize,
}

/// Equal-width bins over [-1, 1]; the last bin is closed on the right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Histogram {
    pub bins: Vec<HistogramBin>,
}

impl Histogram {
    pub fn from_values(values: &[f64], bin_count: usize) -> Result<Self, MetricsError> {
        if bin_count == 0 {
            return Err(MetricsError::NoBins);
        }
        let half = bin_count as f64 / 2.0;
        let mut bins: Vec<HistogramBin> = (0..bin_count)
            .map(|i| HistogramBin {
                lower: (2.0 * i as f64 - bin_count as f64) / bin_count as f64,
                count: 0,
            })
            .collect();
        for &v in values {
            let idx = libm::floor((v.clamp(-1.0, 1.0) + 1.0) * half) as usize;
            bins[idx.min(bin_count - 1)].count += 1;
        }
        Ok(Histogram { bins })
    }

    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    /// `bin_lower,count` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lower,count\n");
        for b in &self.bins {
            out.push_str(&alloc::format!("{},{}\n", b.lower, b.count));
        }
        out
    }
}

/// Histogram of all same-class pair similarities.
pub fn similarity_histogram(vectors: &[EmbeddingVector], labels: &[&str], bin_count: usize) -> Result<Histogram, MetricsError> {
    let prepared = Prepared::new(vectors)?;
    histogram_prepared(&prepared, &group(labels, vectors.len())?, bin_count)
}

pub(crate) fn histogram_prepared(
    prepared: &Prepared<'_>,
    classes: &BTreeMap<&str, Vec<usize>>,
    bin_count: usize,
) -> Result<Histogram, MetricsError> {
    if !classes.values().any(|m| m.len() >= 2) {
        return Err(MetricsError::NoClassWithPairs);
    }
    let mut sims = Vec::new();
    for members in classes.values() {
        prepared.pair_cosines(members, &mut sims);
    }
    Histogram::from_values(&sims, bin_count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn v(x: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn identical_vectors_give_exactly_one() {
        let vs = vec![v(&[0.3, 0.7, 0.1]); 5];
        assert_eq!(average_pairwise_similarity(&vs).unwrap(), 1.0);
    }

    #[test]
    fn orthogonal_pair_is_zero() {
        assert_eq!(average_pairwise_similarity(&[v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap(), 0.0);
    }

    #[test]
    fn three_vector_mean() {
        let r = core::f64::consts::FRAC_1_SQRT_2;
        let aps = average_pairwise_similarity(&[v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[r, r])]).unwrap();
        // pairs: 0, sqrt(2)/2, sqrt(2)/2
        assert!((aps - 0.471_404_520_791_031_7).abs() < 1e-12, "{aps}");
    }

    #[test]
    fn preconditions() {
        assert_eq!(average_pairwise_similarity(&[v(&[1.0])]), Err(MetricsError::TooFewVectors(1)));
        assert_eq!(average_pairwise_similarity(&[v(&[1.0, 0.0]), v(&[0.0, 0.0])]), Err(MetricsError::ZeroVector(1)));
        assert!(matches!(
            average_pairwise_similarity(&[v(&[1.0, 0.0]), v(&[1.0])]),
            Err(MetricsError::DimensionMismatch { .. })
        ));
        assert_eq!(EmbeddingVector::new(vec![f64::NAN]), Err(MetricsError::NonFinite));
    }

    #[test]
    fn histogram_edges() {
        let h = Histogram::from_values(&[-0.9, 0.9], 4).unwrap();
        assert_eq!(h.bins.iter().map(|b| b.count).collect::<Vec<_>>(), vec![1, 0, 0, 1]);
        assert_eq!(h.bins.iter().map(|b| b.lower).collect::<Vec<_>>(), vec![-1.0, -0.5, 0.0, 0.5]);
        let h = Histogram::from_values(&[1.0, -1.0, 0.0], 2).unwrap();
        assert_eq!(h.bins.iter().map(|b| b.count).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(h.to_csv(), "bin_lower,count\n-1,1\n0,2\n");
    }

    #[test]
    fn singleton_classes_are_omitted() {
        let vs = vec![v(&[1.0, 0.0]), v(&[1.0, 0.0]), v(&[0.0, 1.0])];
        let r = intra_class_aps(&vs, &["a", "a", "b"]).unwrap();
        assert_eq!(r.per_class.len(), 1);
        assert_eq!(r.per_class["a"], 1.0);
        assert_eq!(r.omitted, vec!["b".to_string()]);
        assert_eq!(intra_class_aps(&vs, &["a", "b", "c"]), Err(MetricsError::NoClassWithPairs));
    }
}
