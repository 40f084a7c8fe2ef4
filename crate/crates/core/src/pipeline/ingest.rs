use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_components, Corpus, Taxonomy};
use crate::featex::{apply_family_label, extract_features};

/// Summary of a corpus after ingestion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub n_docs: usize,
    pub labeled: usize,
    pub family_labels_assigned: usize,
    pub label_counts: BTreeMap<String, usize>,
    /// Documents whose code channel is empty; they pollute search results.
    pub empty_code: Vec<String>,
    pub with_hardware: usize,
    /// Raw component names missing from the taxonomy, with occurrence counts.
    pub unmapped_components: BTreeMap<String, usize>,
}

/// Fills SCL labels from `FAMILY:` lines and audits labels, code and
/// hardware lists. Returns the relabeled corpus.
pub fn ingest_corpus(corpus: Corpus, taxonomy: &Taxonomy) -> (Corpus, IngestReport) {
    let mut docs = corpus.into_docs();
    let mut report = IngestReport {
        n_docs: docs.len(),
        labeled: 0,
        family_labels_assigned: 0,
        label_counts: BTreeMap::new(),
        empty_code: Vec::new(),
        with_hardware: 0,
        unmapped_components: BTreeMap::new(),
    };
    for doc in &mut docs {
        if apply_family_label(doc) {
            report.family_labels_assigned += 1;
        }
        if let Some(label) = &doc.label {
            report.labeled += 1;
            *report.label_counts.entry(label.clone()).or_default() += 1;
        }
        if extract_features(doc).code.is_empty() {
            log::warn!("document {:?} has no code tokens", doc.id);
            report.empty_code.push(doc.id.clone());
        }
        if !doc.raw_components.is_empty() {
            let (config, unmapped) = normalize_components(&doc.raw_components, taxonomy);
            if !config.is_empty() {
                report.with_hardware += 1;
            }
            for name in unmapped {
                *report.unmapped_components.entry(name).or_default() += 1;
            }
        }
    }
    let corpus = Corpus::new(docs).expect("ingestion keeps ids and dialects intact");
    (corpus, report)
}
