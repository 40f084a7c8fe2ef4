use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{read_json, write_json, PipelineError};
use crate::corpus::{CodeDocument, Corpus};
use crate::embed::{
    fit_tfidf, infer_doc_vector, random_embedding, train_doc2vec, Doc2VecModel, Doc2VecParams,
    DocVector, TaggedDocument, TfIdfModel,
};
use crate::featex::{extract_features, select_features, FeatureSetSpec};
use crate::model_io::{ModelFile, ModelIoError, Persist};
use crate::search::{build_index, Neighbor, Query, SearchIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    Doc2vec,
    Tfidf,
    Random,
}

impl EmbedderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbedderKind::Doc2vec => "doc2vec",
            EmbedderKind::Tfidf => "tfidf",
            EmbedderKind::Random => "random",
        }
    }
}

impl fmt::Display for EmbedderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for EmbedderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "doc2vec" | "d2v" => Ok(EmbedderKind::Doc2vec),
            "tfidf" | "tf-idf" => Ok(EmbedderKind::Tfidf),
            "random" => Ok(EmbedderKind::Random),
            other => Err(format!("unknown embedder {other:?} (doc2vec, tfidf, random)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedConfig {
    pub features: FeatureSetSpec,
    pub embedder: EmbedderKind,
    /// Its `seed` field is ignored; runs take the seed separately.
    pub doc2vec: Doc2VecParams,
    pub random_dim: usize,
    /// Passes used to infer vectors for documents outside the training set.
    pub infer_steps: usize,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            features: "code,comments".parse().expect("valid feature set"),
            embedder: EmbedderKind::Doc2vec,
            doc2vec: Doc2VecParams::default(),
            random_dim: 50,
            infer_steps: 40,
        }
    }
}

impl EmbedConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.random_dim == 0 {
            return Err(PipelineError::Config("random_dim must be >= 1".into()));
        }
        if self.infer_steps == 0 {
            return Err(PipelineError::Config("infer_steps must be >= 1".into()));
        }
        self.doc2vec
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))
    }
}

/// Selected feature tokens of one document.
pub fn document_tokens(doc: &CodeDocument, features: &FeatureSetSpec) -> Result<Vec<String>, PipelineError> {
    Ok(select_features(&extract_features(doc), features)?)
}

pub fn tagged_documents<'a>(
    docs: impl IntoIterator<Item = &'a CodeDocument>,
    features: &FeatureSetSpec,
) -> Result<Vec<TaggedDocument>, PipelineError> {
    docs.into_iter()
        .map(|d| Ok(TaggedDocument::new(d.id.clone(), document_tokens(d, features)?)))
        .collect()
}

/// A fitted document embedder.
#[derive(Debug, Clone, PartialEq)]
pub enum Embedder {
    Doc2vec {
        model: Doc2VecModel,
        infer_steps: usize,
        seed: u64,
    },
    Tfidf(TfIdfModel),
    Random {
        dim: usize,
        seed: u64,
    },
}

const RANDOM_KIND: &str = "random-embedding";

impl Embedder {
    pub fn fit(config: &EmbedConfig, docs: &[TaggedDocument], seed: u64) -> Result<Self, PipelineError> {
        config.validate()?;
        Ok(match config.embedder {
            EmbedderKind::Doc2vec => {
                let params = Doc2VecParams {
                    seed,
                    ..config.doc2vec
                };
                Embedder::Doc2vec {
                    model: train_doc2vec(docs, &params)?,
                    infer_steps: config.infer_steps,
                    seed,
                }
            }
            EmbedderKind::Tfidf => {
                let tokens: Vec<Vec<&str>> = docs
                    .iter()
                    .map(|d| d.tokens.iter().map(String::as_str).collect())
                    .collect();
                Embedder::Tfidf(fit_tfidf(&tokens)?)
            }
            EmbedderKind::Random => Embedder::Random {
                dim: config.random_dim,
                seed,
            },
        })
    }

    pub fn kind(&self) -> EmbedderKind {
        match self {
            Embedder::Doc2vec { .. } => EmbedderKind::Doc2vec,
            Embedder::Tfidf(_) => EmbedderKind::Tfidf,
            Embedder::Random { .. } => EmbedderKind::Random,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Embedder::Doc2vec { model, .. } => model.dim(),
            Embedder::Tfidf(m) => m.vocab_size(),
            Embedder::Random { dim, .. } => *dim,
        }
    }

    /// Embeds a document the embedder was not fitted on. The random
    /// baseline keys its vector on `id` and ignores the tokens.
    pub fn embed<S: AsRef<str>>(&self, id: &str, tokens: &[S]) -> Result<DocVector, PipelineError> {
        Ok(match self {
            Embedder::Doc2vec {
                model,
                infer_steps,
                seed,
            } => infer_doc_vector(model, tokens, *infer_steps, *seed)?.vector,
            Embedder::Tfidf(m) => m.transform(tokens).to_dense(),
            Embedder::Random { dim, seed } => random_embedding(id, *dim, *seed),
        })
    }

    /// Vectors of the documents passed to [`Embedder::fit`], in the same
    /// order. Paragraph vectors are the ones learned during training.
    pub fn fitted_vectors(&self, docs: &[TaggedDocument]) -> Result<Vec<DocVector>, PipelineError> {
        match self {
            Embedder::Doc2vec { model, .. } => {
                let same = model.n_docs() == docs.len()
                    && model.doc_ids().iter().zip(docs).all(|(a, d)| *a == d.id);
                if !same {
                    return Err(PipelineError::Config(
                        "documents differ from the ones the model was trained on".into(),
                    ));
                }
                Ok((0..docs.len()).map(|i| model.doc_vector(i)).collect())
            }
            _ => docs.iter().map(|d| self.embed(&d.id, &d.tokens)).collect(),
        }
    }

    pub fn to_model_file(&self) -> ModelFile {
        match self {
            Embedder::Doc2vec { model, .. } => model.to_model_file(),
            Embedder::Tfidf(m) => m.to_model_file(),
            Embedder::Random { dim, seed } => ModelFile::new(RANDOM_KIND, json!({"dim": dim, "seed": seed})),
        }
    }

    /// Inverse of [`Embedder::to_model_file`]; inference settings come from
    /// `config` and `seed`.
    pub fn from_model_file(file: ModelFile, config: &EmbedConfig, seed: u64) -> Result<Self, PipelineError> {
        Ok(match file.kind.as_str() {
            Doc2VecModel::KIND => Embedder::Doc2vec {
                model: Doc2VecModel::from_model_file(file)?,
                infer_steps: config.infer_steps,
                seed,
            },
            TfIdfModel::KIND => Embedder::Tfidf(TfIdfModel::from_model_file(file)?),
            RANDOM_KIND => {
                #[derive(Deserialize)]
                struct Stored {
                    dim: usize,
                    seed: u64,
                }
                let s: Stored = file.params()?;
                Embedder::Random {
                    dim: s.dim,
                    seed: s.seed,
                }
            }
            other => {
                return Err(ModelIoError::WrongKind {
                    expected: "doc2vec, tfidf or random-embedding".into(),
                    found: other.into(),
                }
                .into())
            }
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        Ok(self.to_model_file().save(path)?)
    }

    pub fn load(path: &Path, config: &EmbedConfig, seed: u64) -> Result<Self, PipelineError> {
        Self::from_model_file(ModelFile::load(path)?, config, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EmbeddingManifest {
    config: EmbedConfig,
    seed: u64,
}

/// An embedder fitted on a whole corpus plus a search index over the
/// corpus documents.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedEmbedding {
    pub config: EmbedConfig,
    pub seed: u64,
    pub embedder: Embedder,
    pub index: SearchIndex,
}

const EMBED_MANIFEST: &str = "embedding.json";
const EMBEDDER_FILE: &str = "embedder.bin";
const INDEX_FILE: &str = "index.bin";

/// Fits the embedder on every document with at least one feature token and
/// indexes the fitted vectors. Documents without tokens are skipped with a
/// warning since they would only add noise to neighbour lists.
pub fn train_embedding(corpus: &Corpus, config: &EmbedConfig, seed: u64) -> Result<TrainedEmbedding, PipelineError> {
    let mut docs = tagged_documents(corpus, &config.features)?;
    docs.retain(|d| {
        if d.tokens.is_empty() {
            log::warn!("skipping {:?}: no tokens for the selected features", d.id);
        }
        !d.tokens.is_empty()
    });
    let embedder = Embedder::fit(config, &docs, seed)?;
    let vectors = embedder.fitted_vectors(&docs)?;
    let index = build_index(docs.iter().map(|d| d.id.clone()).zip(vectors))?;
    Ok(TrainedEmbedding {
        config: config.clone(),
        seed,
        embedder,
        index,
    })
}

impl TrainedEmbedding {
    /// Neighbours of an indexed document, excluding itself.
    pub fn search_id(&self, id: &str, k: usize) -> Result<Vec<Neighbor>, PipelineError> {
        Ok(self.index.query_knn(Query::Id(id), k)?)
    }

    pub fn search_tokens<S: AsRef<str>>(&self, tokens: &[S], k: usize) -> Result<Vec<Neighbor>, PipelineError> {
        let v = self.embedder.embed("query", tokens)?;
        Ok(self.index.query_knn(Query::Vector(&v), k)?)
    }

    /// Indexed documents are looked up by id; others are embedded first.
    pub fn search_document(&self, doc: &CodeDocument, k: usize) -> Result<Vec<Neighbor>, PipelineError> {
        if self.index.contains(&doc.id) {
            return self.search_id(&doc.id, k);
        }
        let tokens = document_tokens(doc, &self.config.features)?;
        let v = self.embedder.embed(&doc.id, &tokens)?;
        Ok(self.index.query_knn(Query::Vector(&v), k)?)
    }

    pub fn save(&self, dir: &Path) -> Result<(), PipelineError> {
        std::fs::create_dir_all(dir)?;
        write_json(
            &dir.join(EMBED_MANIFEST),
            &EmbeddingManifest {
                config: self.config.clone(),
                seed: self.seed,
            },
        )?;
        self.embedder.save(&dir.join(EMBEDDER_FILE))?;
        self.index.save(dir.join(INDEX_FILE))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        let m: EmbeddingManifest = read_json(&dir.join(EMBED_MANIFEST))?;
        let embedder = Embedder::load(&dir.join(EMBEDDER_FILE), &m.config, m.seed)?;
        let index = SearchIndex::load(dir.join(INDEX_FILE))?;
        Ok(Self {
            config: m.config,
            seed: m.seed,
            embedder,
            index,
        })
    }
}

