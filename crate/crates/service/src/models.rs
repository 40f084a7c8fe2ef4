//! Trained models shared read-only by every request.

use std::path::Path;

use autoeng::pipeline::{HwrecModel, PipelineError, TrainedClassifier, TrainedEmbedding};
use autoeng::{Level, Taxonomy};

/// Subdirectory written by `train-classifier`.
pub const CLASSIFIER_DIR: &str = "classifier";
/// Subdirectory written by `train-embed`.
pub const EMBEDDING_DIR: &str = "embedding";
/// File written by `train-hwrec`.
pub const HWREC_FILE: &str = "hwrec.bin";
/// Optional custom taxonomy replacing the builtin one of its level.
pub const TAXONOMY_FILE: &str = "taxonomy.json";

#[derive(Debug)]
pub struct Models {
    pub classifier: Option<TrainedClassifier>,
    pub embedding: Option<TrainedEmbedding>,
    pub hwrec: Option<HwrecModel>,
    l1: Taxonomy,
    l2: Taxonomy,
}

impl Default for Models {
    fn default() -> Self {
        Self {
            classifier: None,
            embedding: None,
            hwrec: None,
            l1: Taxonomy::builtin(Level::L1),
            l2: Taxonomy::builtin(Level::L2),
        }
    }
}

impl Models {
    pub fn new(
        classifier: Option<TrainedClassifier>,
        embedding: Option<TrainedEmbedding>,
        hwrec: Option<HwrecModel>,
    ) -> Self {
        Self {
            classifier,
            embedding,
            hwrec,
            ..Default::default()
        }
    }

    pub fn with_taxonomy(mut self, taxonomy: Taxonomy) -> Self {
        match taxonomy.level {
            Level::L1 => self.l1 = taxonomy,
            Level::L2 => self.l2 = taxonomy,
        }
        self
    }

    /// Loads whatever is present under `dir`; absent parts stay `None`.
    pub fn load_dir(dir: &Path) -> Result<Self, PipelineError> {
        let classifier = dir
            .join(CLASSIFIER_DIR)
            .is_dir()
            .then(|| TrainedClassifier::load(&dir.join(CLASSIFIER_DIR)))
            .transpose()?;
        let embedding = dir
            .join(EMBEDDING_DIR)
            .is_dir()
            .then(|| TrainedEmbedding::load(&dir.join(EMBEDDING_DIR)))
            .transpose()?;
        let hwrec = dir
            .join(HWREC_FILE)
            .is_file()
            .then(|| HwrecModel::load(&dir.join(HWREC_FILE)))
            .transpose()?;
        let mut models = Self::new(classifier, embedding, hwrec);
        if dir.join(TAXONOMY_FILE).is_file() {
            models = models.with_taxonomy(Taxonomy::load(dir.join(TAXONOMY_FILE))?);
        }
        log::info!(
            "models from {}: classifier {}, embedding {}, hwrec {}",
            dir.display(),
            models.classifier.is_some(),
            models.embedding.is_some(),
            models.hwrec.as_ref().map_or("none".to_string(), |m| m.kind().to_string()),
        );
        Ok(models)
    }

    pub fn taxonomy(&self, level: Level) -> &Taxonomy {
        match level {
            Level::L1 => &self.l1,
            Level::L2 => &self.l2,
        }
    }

    /// Level new projects get when none is requested.
    pub fn default_level(&self) -> Level {
        use autoeng::hwrec::Recommender;
        self.hwrec.as_ref().map_or(Level::L1, |m| m.level())
    }

    /// Names of the models analysis needs but does not have.
    pub fn missing(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.classifier.is_none() {
            out.push("classifier");
        }
        if self.embedding.is_none() {
            out.push("embedding");
        }
        if self.hwrec.is_none() {
            out.push("hwrec");
        }
        out
    }
}
