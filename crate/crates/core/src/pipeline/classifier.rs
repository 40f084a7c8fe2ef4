use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::embedding::{document_tokens, tagged_documents, EmbedConfig, Embedder};
use super::{read_json, write_json, PipelineError};
use crate::classify::{
    evaluate_f1, train_logreg, train_tree_ensemble, EvalReport, ForestModel, ForestParams,
    LogRegModel, LogRegParams,
};
use crate::corpus::{split_indices, CodeDocument, Corpus, SplitSpec};
use crate::embed::DocVector;
use crate::model_io::{ModelFile, ModelIoError, Persist};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Logreg,
    Forest,
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            ClassifierKind::Logreg => "logreg",
            ClassifierKind::Forest => "forest",
        })
    }
}

impl FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "logreg" | "lr" => Ok(ClassifierKind::Logreg),
            "forest" | "rf" => Ok(ClassifierKind::Forest),
            other => Err(format!("unknown classifier {other:?} (logreg, forest)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub embed: EmbedConfig,
    pub classifier: ClassifierKind,
    pub logreg: LogRegParams,
    /// Its `seed` field is ignored in favour of `seed`.
    pub forest: ForestParams,
    pub train_fraction: f64,
    /// Drives the split, the embedder and the forest.
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            embed: EmbedConfig::default(),
            classifier: ClassifierKind::Logreg,
            logreg: LogRegParams::default(),
            forest: ForestParams::default(),
            train_fraction: 0.7,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    LogReg(LogRegModel),
    Forest(ForestModel),
}

impl Classifier {
    pub fn class_names(&self) -> &[String] {
        match self {
            Classifier::LogReg(m) => &m.class_names,
            Classifier::Forest(m) => &m.class_names,
        }
    }

    pub fn predict_proba(&self, x: &DocVector) -> Result<Vec<f64>, PipelineError> {
        Ok(match self {
            Classifier::LogReg(m) => m.predict_proba(x)?,
            Classifier::Forest(m) => m.predict_proba(x)?,
        })
    }

    pub fn to_model_file(&self) -> ModelFile {
        match self {
            Classifier::LogReg(m) => m.to_model_file(),
            Classifier::Forest(m) => m.to_model_file(),
        }
    }

    pub fn from_model_file(file: ModelFile) -> Result<Self, PipelineError> {
        Ok(match file.kind.as_str() {
            LogRegModel::KIND => Classifier::LogReg(LogRegModel::from_model_file(file)?),
            ForestModel::KIND => Classifier::Forest(ForestModel::from_model_file(file)?),
            other => {
                return Err(ModelIoError::WrongKind {
                    expected: "logreg or forest".into(),
                    found: other.into(),
                }
                .into())
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    pub confidence: f64,
    pub probabilities: BTreeMap<String, f64>,
}

/// Embedder plus classifier, trained together.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedClassifier {
    pub config: ClassifierConfig,
    pub embedder: Embedder,
    pub classifier: Classifier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierRun {
    pub model: TrainedClassifier,
    /// Scores on the held-out side of the split.
    pub report: EvalReport,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

const MANIFEST: &str = "pipeline.json";
const EMBEDDER_FILE: &str = "embedder.bin";
const CLASSIFIER_FILE: &str = "classifier.bin";

/// Stratified split of the labeled documents, embedder fitted on the
/// training side only, classifier trained on the fitted training vectors and
/// scored on embeddings of the held-out documents. Unlabeled documents are
/// ignored.
pub fn train_classifier(corpus: &Corpus, config: &ClassifierConfig) -> Result<ClassifierRun, PipelineError> {
    let labeled: Vec<&CodeDocument> = corpus.iter().filter(|d| d.label.is_some()).collect();
    if labeled.is_empty() {
        return Err(PipelineError::NoLabels);
    }
    let labels: Vec<&str> = labeled.iter().map(|d| d.label.as_deref().unwrap()).collect();
    let spec = SplitSpec::new(config.train_fraction, config.seed, true)?;
    let (train_idx, test_idx) = split_indices(&labels, &spec)?;

    let docs = tagged_documents(labeled.iter().copied(), &config.embed.features)?;
    let train_docs: Vec<_> = train_idx.iter().map(|&i| docs[i].clone()).collect();
    let embedder = Embedder::fit(&config.embed, &train_docs, config.seed)?;
    let x_train = embedder.fitted_vectors(&train_docs)?;
    let y_train: Vec<&str> = train_idx.iter().map(|&i| labels[i]).collect();

    let classifier = match config.classifier {
        ClassifierKind::Logreg => Classifier::LogReg(train_logreg(&x_train, &y_train, &config.logreg)?),
        ClassifierKind::Forest => {
            let params = ForestParams {
                seed: config.seed,
                ..config.forest
            };
            Classifier::Forest(train_tree_ensemble(&x_train, &y_train, &params)?)
        }
    };
    log::info!(
        "trained {} on {} documents ({} embedding, dim {})",
        config.classifier,
        train_docs.len(),
        embedder.kind(),
        embedder.dim()
    );
    let model = TrainedClassifier {
        config: config.clone(),
        embedder,
        classifier,
    };
    let test_docs: Vec<&CodeDocument> = test_idx.iter().map(|&i| labeled[i]).collect();
    let report = model.evaluate(&test_docs)?;
    Ok(ClassifierRun {
        model,
        report,
        train_ids: train_idx.iter().map(|&i| labeled[i].id.clone()).collect(),
        test_ids: test_idx.iter().map(|&i| labeled[i].id.clone()).collect(),
    })
}

impl TrainedClassifier {
    pub fn predict_tokens<S: AsRef<str>>(&self, id: &str, tokens: &[S]) -> Result<Prediction, PipelineError> {
        let x = self.embedder.embed(id, tokens)?;
        let probs = self.classifier.predict_proba(&x)?;
        let names = self.classifier.class_names();
        let best = crate::classify::argmax(&probs);
        Ok(Prediction {
            label: names[best].clone(),
            confidence: probs[best],
            probabilities: names.iter().cloned().zip(probs).collect(),
        })
    }

    pub fn predict_document(&self, doc: &CodeDocument) -> Result<Prediction, PipelineError> {
        let tokens = document_tokens(doc, &self.config.embed.features)?;
        self.predict_tokens(&doc.id, &tokens)
    }

    /// Weighted, micro and macro F1 over the labeled documents in `docs`.
    pub fn evaluate(&self, docs: &[&CodeDocument]) -> Result<EvalReport, PipelineError> {
        let mut pred = Vec::new();
        let mut gold = Vec::new();
        for doc in docs {
            if let Some(label) = &doc.label {
                pred.push(self.predict_document(doc)?.label);
                gold.push(label.clone());
            }
        }
        if gold.is_empty() {
            return Err(PipelineError::NoLabels);
        }
        Ok(evaluate_f1(&pred, &gold, self.classifier.class_names())?)
    }

    pub fn save(&self, dir: &Path) -> Result<(), PipelineError> {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join(MANIFEST), &self.config)?;
        self.embedder.save(&dir.join(EMBEDDER_FILE))?;
        self.classifier.to_model_file().save(dir.join(CLASSIFIER_FILE))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        let config: ClassifierConfig = read_json(&dir.join(MANIFEST))?;
        let embedder = Embedder::load(&dir.join(EMBEDDER_FILE), &config.embed, config.seed)?;
        let classifier = Classifier::from_model_file(ModelFile::load(dir.join(CLASSIFIER_FILE))?)?;
        Ok(Self {
            config,
            embedder,
            classifier,
        })
    }
}
