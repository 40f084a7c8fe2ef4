//! Paragraph vectors trained from scratch with negative sampling.
//!
//! Two variants are supported: PV-DM predicts each token from the mean of the
//! document vector and the surrounding context word vectors, PV-DBOW predicts
//! every token from the document vector alone. Training is single threaded
//! and driven by one seeded RNG, so a fixed seed gives a bit-identical model.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_traits::Float;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{DocVector, EmbedError};
use crate::model_io::{Matrix, ModelFile, ModelIoError, Persist};
use crate::util;

const NOISE_POWER: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Doc2VecAlgorithm {
    #[serde(rename = "pv-dm")]
    PvDm,
    #[serde(rename = "pv-dbow")]
    PvDbow,
}

impl fmt::Display for Doc2VecAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PvDm => "pv-dm",
            Self::PvDbow => "pv-dbow",
        })
    }
}

impl FromStr for Doc2VecAlgorithm {
    type Err = EmbedError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "pv-dm" | "dm" => Ok(Self::PvDm),
            "pv-dbow" | "dbow" => Ok(Self::PvDbow),
            other => Err(EmbedError::InvalidParams(format!("unknown doc2vec algorithm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Doc2VecParams {
    pub dim: usize,
    pub algorithm: Doc2VecAlgorithm,
    pub negative: usize,
    pub window: usize,
    pub min_count: usize,
    pub epochs: usize,
    /// Initial and final learning rate; decays linearly in between.
    pub learning_rate: (f64, f64),
    pub seed: u64,
}

impl Default for Doc2VecParams {
    fn default() -> Self {
        Self {
            dim: 50,
            algorithm: Doc2VecAlgorithm::PvDbow,
            negative: 5,
            window: 5,
            min_count: 2,
            epochs: 40,
            learning_rate: (0.025, 0.0001),
            seed: 0,
        }
    }
}

impl Doc2VecParams {
    pub fn validate(&self) -> Result<(), EmbedError> {
        let (start, end) = self.learning_rate;
        let problem = if self.dim == 0 {
            Some("dim must be >= 1")
        } else if self.negative == 0 {
            Some("negative must be >= 1")
        } else if self.window == 0 {
            Some("window must be >= 1")
        } else if self.min_count == 0 {
            Some("min_count must be >= 1")
        } else if !(end > 0.0 && start >= end && start.is_finite()) {
            Some("learning rate must satisfy initial >= final > 0")
        } else {
            None
        };
        match problem {
            Some(p) => Err(EmbedError::InvalidParams(p.to_string())),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedDocument {
    pub id: String,
    pub tokens: Vec<String>,
}

impl TaggedDocument {
    pub fn new(id: impl Into<String>, tokens: Vec<String>) -> Self {
        Self {
            id: id.into(),
            tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Doc2VecModel {
    params: Doc2VecParams,
    vocab: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    /// Row-major `|V| x dim`.
    word_vectors: Vec<f32>,
    /// Row-major `|D| x dim`.
    doc_vectors: Vec<f32>,
    /// Row-major `|V| x dim`, the negative-sampling output layer.
    output_vectors: Vec<f32>,
    doc_ids: Vec<String>,
    noise_cdf: Vec<f64>,
    epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub vector: DocVector,
    /// Number of input tokens found in the vocabulary. Zero means the vector
    /// is the untouched initialization.
    pub in_vocab_tokens: usize,
}

/// Negative-sampling loss `-ln s(h.o_t) - sum_n ln s(-h.o_n)` for hidden
/// vector `h`, target row `target` and noise rows `negatives` of the
/// row-major `outputs` matrix. Noise draws equal to the target are skipped.
pub fn negative_sampling_loss<F: Float>(
    h: &[F],
    outputs: &[F],
    target: usize,
    negatives: &[usize],
) -> F {
    let dim = h.len();
    let row = |i: usize| &outputs[i * dim..(i + 1) * dim];
    let mut loss = -log_sigmoid(dot(h, row(target)));
    for &n in negatives {
        if n != target {
            loss = loss - log_sigmoid(-dot(h, row(n)));
        }
    }
    loss
}

/// One stochastic step on the negative-sampling objective.
///
/// Adds the gradient of the loss with respect to `h` into `grad_h` (computed
/// with the output rows as they were before this step) and, when
/// `update_outputs` is set, moves the touched output rows by `-lr` times
/// their gradient. Returns the loss before the update.
#[allow(clippy::too_many_arguments)]
pub fn negative_sampling_step<F: Float>(
    h: &[F],
    outputs: &mut [F],
    target: usize,
    negatives: &[usize],
    lr: F,
    grad_h: &mut [F],
    update_outputs: bool,
) -> F {
    let dim = h.len();
    let mut loss = F::zero();
    let one = F::one();
    let pairs = std::iter::once((target, one)).chain(
        negatives
            .iter()
            .filter(|&&n| n != target)
            .map(|&n| (n, F::zero())),
    );
    for (row_idx, label) in pairs {
        let row = &mut outputs[row_idx * dim..(row_idx + 1) * dim];
        let score = dot(h, row);
        loss = loss
            - if label == one {
                log_sigmoid(score)
            } else {
                log_sigmoid(-score)
            };
        // d loss / d score
        let g = sigmoid(score) - label;
        for (gh, &o) in grad_h.iter_mut().zip(row.iter()) {
            *gh = *gh + g * o;
        }
        if update_outputs {
            let step = lr * g;
            for (o, &x) in row.iter_mut().zip(h) {
                *o = *o - step * x;
            }
        }
    }
    loss
}

#[inline]
fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
fn sigmoid<F: Float>(x: F) -> F {
    let one = F::one();
    if x >= F::zero() {
        one / (one + (-x).exp())
    } else {
        let e = x.exp();
        e / (one + e)
    }
}

/// `ln s(x)` without overflow for large `|x|`.
#[inline]
fn log_sigmoid<F: Float>(x: F) -> F {
    if x >= F::zero() {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn noise_cdf(counts: &[u64]) -> Vec<f64> {
    let mut acc = 0.0;
    counts
        .iter()
        .map(|&c| {
            acc += (c as f64).powf(NOISE_POWER);
            acc
        })
        .collect()
}

fn draw_noise(cdf: &[f64], rng: &mut util::Rng) -> usize {
    let total = *cdf.last().expect("non-empty vocabulary");
    let u = rng.random::<f64>() * total;
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

fn init_rows(rows: usize, dim: usize, rng: &mut util::Rng) -> Vec<f32> {
    (0..rows * dim)
        .map(|_| ((rng.random::<f64>() - 0.5) / dim as f64) as f32)
        .collect()
}

/// Frozen parts of the model needed for one example.
struct Layers<'a> {
    dim: usize,
    word_vectors: &'a mut [f32],
    output_vectors: &'a mut [f32],
    noise_cdf: &'a [f64],
}

struct Scratch {
    h: Vec<f32>,
    grad: Vec<f32>,
    negatives: Vec<usize>,
    context: Vec<usize>,
}

impl Scratch {
    fn new(dim: usize, negative: usize) -> Self {
        Self {
            h: vec![0.0; dim],
            grad: vec![0.0; dim],
            negatives: vec![0; negative],
            context: Vec::new(),
        }
    }
}

/// Trains (or, with `train_layers == false`, infers) one document vector for
/// one pass over `ids`. Returns the summed loss and the number of examples.
#[allow(clippy::too_many_arguments)]
fn doc_pass(
    algorithm: Doc2VecAlgorithm,
    window: usize,
    layers: &mut Layers<'_>,
    doc: &mut [f32],
    ids: &[usize],
    lr: f32,
    train_layers: bool,
    scratch: &mut Scratch,
    rng: &mut util::Rng,
) -> (f64, usize) {
    let dim = layers.dim;
    let mut loss = 0.0;
    for pos in 0..ids.len() {
        let target = ids[pos];
        scratch.context.clear();
        if algorithm == Doc2VecAlgorithm::PvDm {
            let reduced = window - rng.random_range(0..window);
            let lo = pos.saturating_sub(reduced);
            let hi = (pos + reduced + 1).min(ids.len());
            scratch
                .context
                .extend((lo..hi).filter(|&j| j != pos).map(|j| ids[j]));
        }
        for n in scratch.negatives.iter_mut() {
            *n = draw_noise(layers.noise_cdf, rng);
        }
        scratch.h.copy_from_slice(doc);
        for &w in &scratch.context {
            for (h, &x) in scratch.h.iter_mut().zip(&layers.word_vectors[w * dim..(w + 1) * dim]) {
                *h += x;
            }
        }
        let count = (1 + scratch.context.len()) as f32;
        if count > 1.0 {
            for h in scratch.h.iter_mut() {
                *h /= count;
            }
        }
        scratch.grad.iter_mut().for_each(|g| *g = 0.0);
        loss += negative_sampling_step(
            &scratch.h,
            layers.output_vectors,
            target,
            &scratch.negatives,
            lr,
            &mut scratch.grad,
            train_layers,
        ) as f64;
        // h is a mean, so every input receives grad / count.
        let step = lr / count;
        for (d, &g) in doc.iter_mut().zip(&scratch.grad) {
            *d -= step * g;
        }
        if train_layers {
            for &w in &scratch.context {
                let row = &mut layers.word_vectors[w * dim..(w + 1) * dim];
                for (x, &g) in row.iter_mut().zip(&scratch.grad) {
                    *x -= step * g;
                }
            }
        }
    }
    (loss, ids.len())
}

/// Trains a paragraph-vector model over `docs` in their given order.
pub fn train_doc2vec(
    docs: &[TaggedDocument],
    params: &Doc2VecParams,
) -> Result<Doc2VecModel, EmbedError> {
    params.validate()?;
    if docs.len() < 2 {
        return Err(EmbedError::CorpusTooSmall(format!(
            "need at least 2 documents, got {}",
            docs.len()
        )));
    }
    let total_tokens: usize = docs.iter().map(|d| d.tokens.len()).sum();
    if total_tokens < params.window {
        return Err(EmbedError::CorpusTooSmall(format!(
            "{total_tokens} tokens in total, fewer than window {}",
            params.window
        )));
    }

    let mut freq: HashMap<&str, u64> = HashMap::new();
    for d in docs {
        for t in &d.tokens {
            *freq.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, u64)> = freq
        .into_iter()
        .filter(|&(_, c)| c >= params.min_count as u64)
        .collect();
    if kept.is_empty() {
        return Err(EmbedError::CorpusTooSmall(format!(
            "no token occurs at least {} times",
            params.min_count
        )));
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let vocab: Vec<String> = kept.iter().map(|(t, _)| t.to_string()).collect();
    let counts: Vec<u64> = kept.iter().map(|&(_, c)| c).collect();

    let dim = params.dim;
    let mut rng = util::rng(params.seed);
    let mut model = Doc2VecModel {
        params: *params,
        index: vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect(),
        word_vectors: init_rows(vocab.len(), dim, &mut rng),
        doc_vectors: init_rows(docs.len(), dim, &mut rng),
        output_vectors: vec![0.0; vocab.len() * dim],
        noise_cdf: noise_cdf(&counts),
        doc_ids: docs.iter().map(|d| d.id.clone()).collect(),
        vocab,
        counts,
        epoch_losses: Vec::with_capacity(params.epochs),
    };
    let encoded: Vec<Vec<usize>> = docs.iter().map(|d| model.encode(&d.tokens)).collect();

    let (lr_start, lr_end) = params.learning_rate;
    let total_steps = (params.epochs * docs.len()).max(1) as f64;
    let mut scratch = Scratch::new(dim, params.negative);
    let mut layers = Layers {
        dim,
        word_vectors: &mut model.word_vectors,
        output_vectors: &mut model.output_vectors,
        noise_cdf: &model.noise_cdf,
    };
    let mut done = 0usize;
    for _ in 0..params.epochs {
        let (mut loss, mut n) = (0.0, 0usize);
        for (d, ids) in encoded.iter().enumerate() {
            let lr = lr_start - (lr_start - lr_end) * done as f64 / total_steps;
            let doc = &mut model.doc_vectors[d * dim..(d + 1) * dim];
            let (l, k) = doc_pass(
                params.algorithm,
                params.window,
                &mut layers,
                doc,
                ids,
                lr as f32,
                true,
                &mut scratch,
                &mut rng,
            );
            loss += l;
            n += k;
            done += 1;
        }
        model.epoch_losses.push(if n > 0 { loss / n as f64 } else { 0.0 });
    }
    log::debug!(
        "doc2vec trained: {} docs, vocab {}, epoch losses {:?}",
        docs.len(),
        model.vocab.len(),
        model.epoch_losses.first().zip(model.epoch_losses.last())
    );
    Ok(model)
}

/// Infers a vector for an unseen token sequence. Word and output layers stay
/// frozen; only the fresh document vector moves, for `steps` passes with the
/// model's learning-rate schedule.
pub fn infer_doc_vector<S: AsRef<str>>(
    model: &Doc2VecModel,
    tokens: &[S],
    steps: usize,
    seed: u64,
) -> Result<Inference, EmbedError> {
    if !model.is_trained() {
        return Err(EmbedError::UntrainedModel);
    }
    let dim = model.params.dim;
    let mut rng = util::rng(seed);
    let mut doc = init_rows(1, dim, &mut rng);
    let ids = model.encode(tokens);
    if ids.is_empty() {
        log::warn!(
            "none of the {} tokens is in the vocabulary; returning the initial vector",
            tokens.len()
        );
    } else if steps > 0 {
        // `doc_pass` borrows the layers mutably but leaves them untouched
        // when training is off.
        let mut words = model.word_vectors.clone();
        let mut outputs = model.output_vectors.clone();
        let mut layers = Layers {
            dim,
            word_vectors: &mut words,
            output_vectors: &mut outputs,
            noise_cdf: &model.noise_cdf,
        };
        let mut scratch = Scratch::new(dim, model.params.negative);
        let (lr_start, lr_end) = model.params.learning_rate;
        for s in 0..steps {
            let lr = lr_start - (lr_start - lr_end) * s as f64 / steps as f64;
            doc_pass(
                model.params.algorithm,
                model.params.window,
                &mut layers,
                &mut doc,
                &ids,
                lr as f32,
                false,
                &mut scratch,
                &mut rng,
            );
        }
    }
    Ok(Inference {
        vector: DocVector(doc.iter().map(|&x| x as f64).collect()),
        in_vocab_tokens: ids.len(),
    })
}

impl Doc2VecModel {
    fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens
            .iter()
            .filter_map(|t| self.index.get(t.as_ref()).copied())
            .collect()
    }

    pub fn params(&self) -> &Doc2VecParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.dim
    }

    pub fn is_trained(&self) -> bool {
        !self.vocab.is_empty()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn word_count(&self, token: &str) -> Option<u64> {
        self.index.get(token).map(|&i| self.counts[i])
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    /// Mean loss per example for each epoch of the training run. Empty for a
    /// loaded model.
    pub fn epoch_losses(&self) -> &[f64] {
        &self.epoch_losses
    }

    pub fn doc_vector(&self, i: usize) -> DocVector {
        let dim = self.params.dim;
        DocVector(self.doc_vectors[i * dim..(i + 1) * dim].iter().map(|&x| x as f64).collect())
    }

    pub fn doc_vector_by_id(&self, id: &str) -> Option<DocVector> {
        self.doc_ids.iter().position(|d| d == id).map(|i| self.doc_vector(i))
    }

    pub fn doc_vectors(&self) -> Vec<DocVector> {
        (0..self.n_docs()).map(|i| self.doc_vector(i)).collect()
    }

    pub fn word_vector(&self, token: &str) -> Option<DocVector> {
        let dim = self.params.dim;
        self.index.get(token).map(|&i| {
            DocVector(self.word_vectors[i * dim..(i + 1) * dim].iter().map(|&x| x as f64).collect())
        })
    }

    pub fn is_finite(&self) -> bool {
        self.word_vectors
            .iter()
            .chain(&self.doc_vectors)
            .chain(&self.output_vectors)
            .all(|x| x.is_finite())
    }
}

#[derive(Serialize, Deserialize)]
struct StoredHeader {
    params: Doc2VecParams,
    vocab: Vec<String>,
    counts: Vec<u64>,
    doc_ids: Vec<String>,
}

impl Persist for Doc2VecModel {
    const KIND: &'static str = "doc2vec";

    fn to_model_file(&self) -> ModelFile {
        let dim = self.params.dim;
        let header = StoredHeader {
            params: self.params,
            vocab: self.vocab.clone(),
            counts: self.counts.clone(),
            doc_ids: self.doc_ids.clone(),
        };
        ModelFile::new(Self::KIND, json!(header))
            .with_matrix(Matrix::f32("word_vectors", self.vocab.len(), dim, self.word_vectors.clone()))
            .with_matrix(Matrix::f32("doc_vectors", self.doc_ids.len(), dim, self.doc_vectors.clone()))
            .with_matrix(Matrix::f32(
                "output_vectors",
                self.vocab.len(),
                dim,
                self.output_vectors.clone(),
            ))
    }

    fn from_model_file(mut file: ModelFile) -> Result<Self, ModelIoError> {
        let h: StoredHeader = file.params()?;
        h.params
            .validate()
            .map_err(|e| ModelIoError::InvalidParams(e.to_string()))?;
        if h.vocab.len() != h.counts.len() {
            return Err(ModelIoError::InvalidParams("vocab/counts length mismatch".into()));
        }
        let (v, d, dim) = (h.vocab.len(), h.doc_ids.len(), h.params.dim);
        let word_vectors = file.take_matrix("word_vectors")?.into_f32(v, dim)?;
        let doc_vectors = file.take_matrix("doc_vectors")?.into_f32(d, dim)?;
        let output_vectors = file.take_matrix("output_vectors")?.into_f32(v, dim)?;
        Ok(Self {
            params: h.params,
            index: h.vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect(),
            noise_cdf: noise_cdf(&h.counts),
            vocab: h.vocab,
            counts: h.counts,
            word_vectors,
            doc_vectors,
            output_vectors,
            doc_ids: h.doc_ids,
            epoch_losses: Vec::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use crate::corpus::synth::{generate_synthetic_corpus, SyntheticCorpusSpec};
    use crate::featex::{extract_features, select_features, FeatureSetSpec};

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn small_corpus() -> Vec<TaggedDocument> {
        let spec = SyntheticCorpusSpec {
            n_classes: 4,
            docs_per_class: 30,
            vocab_per_class: 20,
            shared_vocab: 40,
            doc_len: 90,
            class_token_rate: 0.35,
            seed: 5,
        };
        let corpus = generate_synthetic_corpus(&spec);
        let fs: FeatureSetSpec = "code,comments".parse().unwrap();
        corpus
            .iter()
            .map(|d| {
                let b = extract_features(d);
                TaggedDocument::new(d.id.clone(), select_features(&b, &fs).unwrap())
            })
            .collect()
    }

    fn labels_of(docs: &[TaggedDocument]) -> Vec<String> {
        // ids look like syn-cXX-YYYY
        docs.iter().map(|d| d.id[4..7].to_string()).collect()
    }

    fn params(algorithm: Doc2VecAlgorithm) -> Doc2VecParams {
        Doc2VecParams {
            algorithm,
            epochs: 30,
            seed: 11,
            ..Doc2VecParams::default()
        }
    }

    fn relative_error(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    /// Central finite differences on the loss against the gradient that the
    /// training step accumulates, for both the hidden vector and the output
    /// rows.
    #[test]
    fn negative_sampling_gradient_matches_finite_differences() {
        let mut rng = util::rng(3);
        let (dim, rows) = (6, 5);
        for _ in 0..20 {
            let h: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
            let out: Vec<f64> = (0..dim * rows).map(|_| rng.random::<f64>() - 0.5).collect();
            let target = rng.random_range(0..rows);
            // Distinct noise rows: a repeated row would see its second
            // update computed against already-moved weights.
            let mut negatives: Vec<usize> = (0..rows).filter(|&r| r != target).collect();
            negatives.shuffle(&mut rng);
            negatives.truncate(3);

            let mut grad_h = vec![0.0; dim];
            let mut stepped = out.clone();
            let loss = negative_sampling_step(&h, &mut stepped, target, &negatives, 1.0, &mut grad_h, true);
            assert!((loss - negative_sampling_loss(&h, &out, target, &negatives)).abs() < 1e-12);

            let eps = 1e-5;
            for i in 0..dim {
                let (mut hp, mut hm) = (h.clone(), h.clone());
                hp[i] += eps;
                hm[i] -= eps;
                let fd = (negative_sampling_loss(&hp, &out, target, &negatives)
                    - negative_sampling_loss(&hm, &out, target, &negatives))
                    / (2.0 * eps);
                assert!(relative_error(fd, grad_h[i]) < 1e-4, "h[{i}]: {fd} vs {}", grad_h[i]);
            }
            // With lr = 1 the applied update equals the gradient.
            for i in 0..dim * rows {
                let (mut op, mut om) = (out.clone(), out.clone());
                op[i] += eps;
                om[i] -= eps;
                let fd = (negative_sampling_loss(&h, &op, target, &negatives)
                    - negative_sampling_loss(&h, &om, target, &negatives))
                    / (2.0 * eps);
                let analytic = out[i] - stepped[i];
                if fd.abs() < 1e-10 && analytic.abs() < 1e-10 {
                    continue;
                }
                assert!(relative_error(fd, analytic) < 1e-4, "out[{i}]: {fd} vs {analytic}");
            }
        }
    }

    /// PV-DM on a frozen micro-model: the doc-vector gradient is the hidden
    /// gradient divided by the number of averaged inputs.
    #[test]
    fn pv_dm_doc_gradient_matches_finite_differences() {
        let mut rng = util::rng(8);
        let (dim, rows) = (4, 6);
        let words: Vec<f64> = (0..dim * rows).map(|_| rng.random::<f64>() - 0.5).collect();
        let out: Vec<f64> = (0..dim * rows).map(|_| rng.random::<f64>() - 0.5).collect();
        let doc: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
        let context = [1usize, 3, 4];
        let (target, negatives) = (2usize, [0usize, 5, 5, 1, 3]);
        let hidden = |d: &[f64]| -> Vec<f64> {
            let n = (1 + context.len()) as f64;
            (0..dim)
                .map(|k| (d[k] + context.iter().map(|&w| words[w * dim + k]).sum::<f64>()) / n)
                .collect()
        };
        let mut grad_h = vec![0.0; dim];
        let mut scratch = out.clone();
        negative_sampling_step(&hidden(&doc), &mut scratch, target, &negatives, 0.0, &mut grad_h, false);
        let eps = 1e-5;
        for k in 0..dim {
            let (mut dp, mut dm) = (doc.clone(), doc.clone());
            dp[k] += eps;
            dm[k] -= eps;
            let fd = (negative_sampling_loss(&hidden(&dp), &out, target, &negatives)
                - negative_sampling_loss(&hidden(&dm), &out, target, &negatives))
                / (2.0 * eps);
            let analytic = grad_h[k] / (1 + context.len()) as f64;
            assert!(relative_error(fd, analytic) < 1e-4);
        }
    }

    #[test]
    fn parameter_validation() {
        assert!(Doc2VecParams::default().validate().is_ok());
        for bad in [
            Doc2VecParams { dim: 0, ..Default::default() },
            Doc2VecParams { negative: 0, ..Default::default() },
            Doc2VecParams { window: 0, ..Default::default() },
            Doc2VecParams { learning_rate: (0.001, 0.01), ..Default::default() },
            Doc2VecParams { learning_rate: (0.01, 0.0), ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(EmbedError::InvalidParams(_))));
        }
        assert_eq!("PV-DM".parse::<Doc2VecAlgorithm>().unwrap(), Doc2VecAlgorithm::PvDm);
        assert_eq!("dbow".parse::<Doc2VecAlgorithm>().unwrap(), Doc2VecAlgorithm::PvDbow);
    }

    #[test]
    fn too_small_corpora_are_rejected() {
        let p = Doc2VecParams::default();
        let one = vec![TaggedDocument::new("a", toks("x y z x y z"))];
        assert!(matches!(train_doc2vec(&one, &p), Err(EmbedError::CorpusTooSmall(_))));
        let short = vec![TaggedDocument::new("a", toks("x")), TaggedDocument::new("b", toks("x"))];
        assert!(matches!(train_doc2vec(&short, &p), Err(EmbedError::CorpusTooSmall(_))));
        let rare = vec![
            TaggedDocument::new("a", toks("p q r")),
            TaggedDocument::new("b", toks("s t u")),
        ];
        assert!(matches!(train_doc2vec(&rare, &p), Err(EmbedError::CorpusTooSmall(_))));
    }

    #[test]
    fn vocabulary_respects_min_count() {
        let docs = vec![
            TaggedDocument::new("a", toks("x x y z")),
            TaggedDocument::new("b", toks("x y w")),
        ];
        let m = train_doc2vec(&docs, &Doc2VecParams { epochs: 1, window: 2, ..Default::default() })
            .unwrap();
        assert_eq!(m.vocab(), &["x".to_string(), "y".to_string()]);
        assert_eq!(m.word_count("x"), Some(3));
        assert_eq!(m.word_count("z"), None);
    }

    #[test]
    fn same_seed_gives_bitwise_equal_models() {
        let docs = small_corpus();
        for algorithm in [Doc2VecAlgorithm::PvDm, Doc2VecAlgorithm::PvDbow] {
            let p = Doc2VecParams { epochs: 3, ..params(algorithm) };
            let a = train_doc2vec(&docs, &p).unwrap();
            let b = train_doc2vec(&docs, &p).unwrap();
            assert_eq!(a.to_bytes(), b.to_bytes());
            let c = train_doc2vec(&docs, &Doc2VecParams { seed: 12, ..p }).unwrap();
            assert_ne!(a.doc_vectors, c.doc_vectors);
        }
    }

    #[test]
    fn zero_epochs_keep_the_initialization() {
        let docs = small_corpus();
        let p = Doc2VecParams { epochs: 0, ..params(Doc2VecAlgorithm::PvDm) };
        let m = train_doc2vec(&docs, &p).unwrap();
        let mut rng = util::rng(p.seed);
        let words = init_rows(m.vocab_size(), p.dim, &mut rng);
        let init = init_rows(docs.len(), p.dim, &mut rng);
        assert_eq!(m.word_vectors, words);
        assert_eq!(m.doc_vectors, init);
        assert!(m.output_vectors.iter().all(|&x| x == 0.0));
        assert!(m.epoch_losses().is_empty());
    }

    #[test]
    fn loss_decreases_and_model_stays_finite() {
        let docs = small_corpus();
        for algorithm in [Doc2VecAlgorithm::PvDm, Doc2VecAlgorithm::PvDbow] {
            let m = train_doc2vec(&docs, &params(algorithm)).unwrap();
            let losses = m.epoch_losses();
            assert_eq!(losses.len(), 30);
            assert!(losses.last().unwrap() <= losses.first().unwrap(), "{algorithm}: {losses:?}");
            assert!(m.is_finite());
        }
    }

    #[test]
    fn intra_class_cosine_exceeds_inter_class() {
        let docs = small_corpus();
        let labels = labels_of(&docs);
        for algorithm in [Doc2VecAlgorithm::PvDm, Doc2VecAlgorithm::PvDbow] {
            let m = train_doc2vec(&docs, &params(algorithm)).unwrap();
            let vecs = m.doc_vectors();
            let (mut intra, mut ni, mut inter, mut ne) = (0.0, 0, 0.0, 0);
            for i in 0..vecs.len() {
                for j in i + 1..vecs.len() {
                    let c = vecs[i].cosine(&vecs[j]);
                    if labels[i] == labels[j] {
                        intra += c;
                        ni += 1;
                    } else {
                        inter += c;
                        ne += 1;
                    }
                }
            }
            let (intra, inter) = (intra / ni as f64, inter / ne as f64);
            assert!(intra > inter, "{algorithm}: intra {intra} inter {inter}");
        }
    }

    #[test]
    fn duplicates_are_mutual_nearest_neighbours() {
        let docs = small_corpus();
        let m = train_doc2vec(&docs, &params(Doc2VecAlgorithm::PvDbow)).unwrap();
        let vecs = m.doc_vectors();
        let nearest = |i: usize| {
            (0..vecs.len())
                .filter(|&j| j != i)
                .max_by(|&a, &b| vecs[i].cosine(&vecs[a]).total_cmp(&vecs[i].cosine(&vecs[b])))
                .unwrap()
        };
        let mut pairs = 0;
        for i in 0..docs.len() {
            for j in i + 1..docs.len() {
                if docs[i].tokens == docs[j].tokens {
                    pairs += 1;
                    assert_eq!(nearest(i), j);
                    assert_eq!(nearest(j), i);
                }
            }
        }
        assert_eq!(pairs, 4);
    }

    #[test]
    fn inference_recovers_training_documents() {
        let docs = small_corpus();
        for algorithm in [Doc2VecAlgorithm::PvDm, Doc2VecAlgorithm::PvDbow] {
            let m = train_doc2vec(&docs, &params(algorithm)).unwrap();
            let mut total = 0.0;
            for (i, d) in docs.iter().enumerate().step_by(7) {
                let inf = infer_doc_vector(&m, &d.tokens, 40, 99).unwrap();
                assert!(inf.in_vocab_tokens > 0);
                let c = inf.vector.cosine(&m.doc_vector(i));
                assert!(c >= 0.6, "{algorithm} doc {i}: cosine {c}");
                total += c;
            }
            assert!(total.is_finite());
        }
    }

    #[test]
    fn inference_edge_cases() {
        let docs = small_corpus();
        let m = train_doc2vec(&docs, &Doc2VecParams { epochs: 2, ..params(Doc2VecAlgorithm::PvDm) })
            .unwrap();
        let a = infer_doc_vector(&m, &docs[0].tokens, 10, 4).unwrap();
        let b = infer_doc_vector(&m, &docs[0].tokens, 10, 4).unwrap();
        assert_eq!(a, b);

        let init = DocVector(init_rows(1, m.dim(), &mut util::rng(4)).iter().map(|&x| x as f64).collect());
        let oov = infer_doc_vector(&m, &["never_seen_1", "never_seen_2"], 10, 4).unwrap();
        assert_eq!(oov.in_vocab_tokens, 0);
        assert_eq!(oov.vector, init);
        let zero_steps = infer_doc_vector(&m, &docs[0].tokens, 0, 4).unwrap();
        assert_eq!(zero_steps.vector, init);
    }

    #[test]
    fn save_load_gives_identical_inference() {
        let docs = small_corpus();
        let m = train_doc2vec(&docs, &Doc2VecParams { epochs: 3, ..params(Doc2VecAlgorithm::PvDm) })
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d2v.bin");
        m.save(&path).unwrap();
        let back = Doc2VecModel::load(&path).unwrap();
        assert_eq!(back.doc_vectors, m.doc_vectors);
        assert_eq!(back.vocab(), m.vocab());
        assert_eq!(
            infer_doc_vector(&back, &docs[3].tokens, 5, 1).unwrap(),
            infer_doc_vector(&m, &docs[3].tokens, 5, 1).unwrap()
        );
    }
}
