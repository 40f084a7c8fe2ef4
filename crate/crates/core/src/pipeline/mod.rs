//! End-to-end runs: ingestion, embedding plus search, classification and
//! hardware completion, each with a directory or file layout for its trained
//! artifacts. The CLI and the assistant service are thin layers over this
//! module.

mod classifier;
mod embedding;
mod hardware;
mod ingest;

use thiserror::Error;

use crate::classify::ClassifyError;
use crate::corpus::CorpusError;
use crate::embed::EmbedError;
use crate::featex::FeatureError;
use crate::hwrec::HwrecError;
use crate::model_io::ModelIoError;
use crate::search::SearchError;

pub use classifier::{
    train_classifier, Classifier, ClassifierConfig, ClassifierKind, ClassifierRun, Prediction,
    TrainedClassifier,
};
pub use embedding::{
    document_tokens, tagged_documents, train_embedding, EmbedConfig, Embedder, EmbedderKind,
    TrainedEmbedding,
};
pub use hardware::{
    config_from_names, evaluate_hwrec, hwconfigs_from_corpus, read_hwconfigs, run_hwrec,
    split_configs, train_hwrec, write_hwconfigs, HwrecConfig, HwrecModel, HwrecModelKind,
    HwrecRun,
};
pub use ingest::{ingest_corpus, IngestReport};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Hwrec(#[from] HwrecError),
    #[error(transparent)]
    ModelIo(#[from] ModelIoError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("corpus has no labeled documents")]
    NoLabels,
    #[error("unmapped component names: {0:?}")]
    UnmappedComponents(Vec<String>),
}

impl PipelineError {
    /// Whether the failure comes from the input data rather than from how
    /// the run was configured.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, PipelineError::Config(_))
    }
}

fn write_json(path: &std::path::Path, value: &impl serde::Serialize) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T, PipelineError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
