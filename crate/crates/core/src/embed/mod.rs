//! Document embeddings: tf-idf, paragraph vectors (PV-DM / PV-DBOW) trained
//! with negative sampling, and a seeded random baseline.

pub mod doc2vec;
mod random;
mod tfidf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use doc2vec::{
    infer_doc_vector, train_doc2vec, Doc2VecAlgorithm, Doc2VecModel, Doc2VecParams, Inference,
    TaggedDocument,
};
pub use random::random_embedding;
pub use tfidf::{fit_tfidf, tfidf_transform, SparseVector, TfIdfModel};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("corpus has no non-empty document")]
    EmptyCorpus,
    #[error("corpus too small: {0}")]
    CorpusTooSmall(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("model has not been trained")]
    UntrainedModel,
    #[error(transparent)]
    ModelIo(#[from] crate::model_io::ModelIoError),
}

/// Dense document embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DocVector(pub Vec<f64>);

impl DocVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn norm(&self) -> f64 {
        crate::util::norm(&self.0)
    }

    pub fn cosine(&self, other: &DocVector) -> f64 {
        crate::util::cosine(&self.0, &other.0)
    }
}

impl From<Vec<f64>> for DocVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}
