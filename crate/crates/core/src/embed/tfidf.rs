use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{DocVector, EmbedError};
use crate::model_io::{ModelFile, ModelIoError, Persist};

/// Smoothed tf-idf: `idf(t) = ln((1 + n_docs) / (1 + df(t))) + 1`.
///
/// Terms are indexed in sorted order, so the column layout depends only on
/// the vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfModel {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    doc_freq: Vec<u64>,
    idf: Vec<f64>,
    n_docs: usize,
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub dim: usize,
    pub entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn to_dense(&self) -> DocVector {
        let mut v = vec![0.0; self.dim];
        for &(i, x) in &self.entries {
            v[i] = x;
        }
        DocVector(v)
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, x)| x * x).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < self.entries.len() && j < other.entries.len() {
            let (a, x) = self.entries[i];
            let (b, y) = other.entries[j];
            match a.cmp(&b) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += x * y;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn cosine(&self, other: &SparseVector) -> f64 {
        let (na, nb) = (self.norm(), other.norm());
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            (self.dot(other) / (na * nb)).clamp(-1.0, 1.0)
        }
    }
}

impl TfIdfModel {
    fn from_doc_freq(doc_freq: BTreeMap<String, u64>, n_docs: usize) -> Self {
        let terms: Vec<String> = doc_freq.keys().cloned().collect();
        let doc_freq: Vec<u64> = doc_freq.into_values().collect();
        let idf = doc_freq
            .iter()
            .map(|&df| ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0)
            .collect();
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self {
            terms,
            index,
            doc_freq,
            idf,
            n_docs,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.terms.len()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn term_index(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn doc_freq(&self, term: &str) -> Option<u64> {
        self.term_index(term).map(|i| self.doc_freq[i])
    }

    pub fn transform<S: AsRef<str>>(&self, doc: &[S]) -> SparseVector {
        tfidf_transform(self, doc)
    }
}

/// Fits document frequencies over `docs`. Every token that appears at least
/// once enters the vocabulary.
pub fn fit_tfidf<S: AsRef<str>>(docs: &[Vec<S>]) -> Result<TfIdfModel, EmbedError> {
    if docs.iter().all(|d| d.is_empty()) {
        return Err(EmbedError::EmptyCorpus);
    }
    let mut doc_freq: BTreeMap<String, u64> = BTreeMap::new();
    for doc in docs {
        let mut seen: Vec<&str> = doc.iter().map(|t| t.as_ref()).collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *doc_freq.entry(t.to_string()).or_default() += 1;
        }
    }
    Ok(TfIdfModel::from_doc_freq(doc_freq, docs.len()))
}

/// Raw term counts times idf, L2-normalized. Out-of-vocabulary tokens are
/// ignored; a document with no known token maps to the zero vector.
pub fn tfidf_transform<S: AsRef<str>>(model: &TfIdfModel, doc: &[S]) -> SparseVector {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for t in doc {
        if let Some(i) = model.term_index(t.as_ref()) {
            *counts.entry(i).or_default() += 1.0;
        }
    }
    let mut entries: Vec<(usize, f64)> =
        counts.into_iter().map(|(i, tf)| (i, tf * model.idf[i])).collect();
    let norm = entries.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, x) in &mut entries {
            *x /= norm;
        }
    }
    SparseVector {
        dim: model.vocab_size(),
        entries,
    }
}

#[derive(Serialize, Deserialize)]
struct TfIdfParams {
    n_docs: usize,
    terms: Vec<String>,
    doc_freq: Vec<u64>,
}

impl Persist for TfIdfModel {
    const KIND: &'static str = "tfidf";

    /// idf values are recomputed from integer document frequencies on load,
    /// so a loaded model is bit-identical to the fitted one.
    fn to_model_file(&self) -> ModelFile {
        let params = TfIdfParams {
            n_docs: self.n_docs,
            terms: self.terms.clone(),
            doc_freq: self.doc_freq.clone(),
        };
        ModelFile::new(Self::KIND, json!(params))
    }

    fn from_model_file(file: ModelFile) -> Result<Self, ModelIoError> {
        let p: TfIdfParams = file.params()?;
        if p.terms.len() != p.doc_freq.len() {
            return Err(ModelIoError::InvalidParams("terms/doc_freq length mismatch".into()));
        }
        Ok(Self::from_doc_freq(p.terms.into_iter().zip(p.doc_freq).collect(), p.n_docs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn docs(raw: &[&[&str]]) -> Vec<Vec<String>> {
        raw.iter().map(|d| d.iter().map(|s| s.to_string()).collect()).collect()
    }

    #[test]
    fn hand_computed_idf() {
        let m = fit_tfidf(&docs(&[&["a", "b"], &["a"]])).unwrap();
        assert_eq!(m.doc_freq("a"), Some(2));
        assert_eq!(m.doc_freq("b"), Some(1));
        let ia = m.term_index("a").unwrap();
        let ib = m.term_index("b").unwrap();
        assert!((m.idf()[ia] - 1.0).abs() < 1e-12);
        // ln(3/2) + 1
        assert!((m.idf()[ib] - 1.405_465_108_108_164_4).abs() < 1e-12);
        for i in 0..m.vocab_size() {
            assert!(m.idf()[i] > 0.0);
        }
    }

    #[test]
    fn single_document_has_unit_idf() {
        let m = fit_tfidf(&docs(&[&["x", "y", "x"]])).unwrap();
        assert!(m.idf().iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert!(matches!(fit_tfidf::<String>(&[]), Err(EmbedError::EmptyCorpus)));
        assert!(matches!(fit_tfidf::<String>(&[vec![], vec![]]), Err(EmbedError::EmptyCorpus)));
    }

    #[test]
    fn transform_cases() {
        let m = fit_tfidf(&docs(&[&["a", "b"], &["a"]])).unwrap();
        let empty = m.transform::<&str>(&[]);
        assert!(empty.entries.is_empty());
        assert_eq!(empty.to_dense().0, vec![0.0, 0.0]);

        let one = m.transform(&["b", "zzz"]);
        assert_eq!(one.entries.len(), 1);
        assert!((one.norm() - 1.0).abs() < 1e-15);

        let v = m.transform(&["a", "b"]).to_dense().0;
        let idf_b = (1.5f64).ln() + 1.0;
        let n = (1.0 + idf_b * idf_b).sqrt();
        assert!((v[0] - 1.0 / n).abs() < 1e-12);
        assert!((v[1] - idf_b / n).abs() < 1e-12);
    }

    #[test]
    fn persistence_round_trip() {
        let m = fit_tfidf(&docs(&[&["a", "b"], &["a", "c", "c"]])).unwrap();
        let back = TfIdfModel::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.transform(&["c", "a"]), m.transform(&["c", "a"]));
    }

    proptest! {
        #[test]
        fn disjoint_vocabularies_have_zero_cosine(
            a in prop::collection::vec("[a-e]{1,3}", 1..10),
            b in prop::collection::vec("[v-z]{1,3}", 1..10),
        ) {
            let corpus = vec![a.clone(), b.clone()];
            let m = fit_tfidf(&corpus).unwrap();
            prop_assert_eq!(m.transform(&a).cosine(&m.transform(&b)), 0.0);
        }
    }
}
