use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::hash::Hasher;

use fnv::FnvHasher;
use thiserror::Error;

use super::similarity::EmbeddingVector;
use super::tokenize::tokenize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("embedding failed: {0}")]
pub struct EmbedError(pub String);

/// Turns texts into vectors of one shared dimension.
pub trait Embedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError>;

    /// Recorded in reports.
    fn name(&self) -> String;
}

/// Hashed bag of words: each token adds 1 to bucket `fnv1a64(token) % dimension`,
/// then the vector is L2-normalized. Texts without tokens map to the zero vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    dimension: usize,
}

pub const HASH_EMBEDDER_DIMENSION: usize = 256;

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder {
            dimension: HASH_EMBEDDER_DIMENSION,
        }
    }
}

impl HashEmbedder {
    pub fn with_dimension(dimension: usize) -> Self {
        assert!(dimension > 0, "dimension must be positive");
        HashEmbedder { dimension }
    }

    pub fn embed_one(&self, text: &str) -> EmbeddingVector {
        let mut v = vec![0.0; self.dimension];
        for token in tokenize(text) {
            let mut h = FnvHasher::default();
            h.write(token.as_bytes());
            v[(h.finish() % self.dimension as u64) as usize] += 1.0;
        }
        let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        EmbeddingVector::new(v).expect("finite by construction")
    }
}

impl Embedder for HashEmbedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }

    fn name(&self) -> String {
        alloc::format!("hash-bow-{}", self.dimension)
    }
}

impl<E: Embedder + ?Sized> Embedder for &E {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        (**self).embed(texts)
    }

    fn name(&self) -> String {
        (**self).name()
    }
}
