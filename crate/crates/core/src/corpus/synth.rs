//! Synthetic corpora with planted class structure, used where the real
//! project datasets are not available.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{CodeDocument, Corpus, CorpusError, Dialect, HardwareConfig, Level, SourceFile};
use crate::hwrec::BayesNet;
use crate::util;

const TOKENS_PER_STATEMENT: usize = 3;
/// Every n-th statement is emitted as a line comment instead of code.
const COMMENT_EVERY: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpusSpec {
    pub n_classes: usize,
    pub docs_per_class: usize,
    pub vocab_per_class: usize,
    pub shared_vocab: usize,
    pub doc_len: usize,
    /// Share of tokens drawn from the class vocabulary; the rest come from
    /// the shared pool. Ignored (treated as 1) without a shared vocabulary.
    pub class_token_rate: f64,
    pub seed: u64,
}

impl SyntheticCorpusSpec {
    /// 12 classes x 200 documents, the size used by the acceptance suite.
    pub fn standard(seed: u64) -> Self {
        Self {
            n_classes: 12,
            docs_per_class: 200,
            vocab_per_class: 50,
            shared_vocab: 200,
            doc_len: 120,
            class_token_rate: 0.08,
            seed,
        }
    }
}

pub fn class_label(class: usize) -> String {
    format!("class_{class:02}")
}

struct Vocab {
    class_words: Vec<Vec<String>>,
    shared_words: Vec<String>,
    class_rate: f64,
}

impl Vocab {
    fn new(spec: &SyntheticCorpusSpec) -> Self {
        let class_words = (0..spec.n_classes)
            .map(|c| (0..spec.vocab_per_class).map(|j| format!("k{c:02}w{j:03}")).collect())
            .collect();
        let shared_words = (0..spec.shared_vocab).map(|j| format!("sw{j:03}")).collect();
        let class_rate = if spec.shared_vocab == 0 { 1.0 } else { spec.class_token_rate };
        Self {
            class_words,
            shared_words,
            class_rate,
        }
    }

    fn draw(&self, class: usize, rng: &mut util::Rng) -> &str {
        let pool = if rng.random::<f64>() < self.class_rate {
            &self.class_words[class]
        } else {
            &self.shared_words
        };
        &pool[rng.random_range(0..pool.len())]
    }

    fn draw_n(&self, class: usize, n: usize, rng: &mut util::Rng) -> Vec<String> {
        (0..n).map(|_| self.draw(class, rng).to_string()).collect()
    }
}

fn render_sketch(tokens: &[String]) -> String {
    let statements: Vec<&[String]> = tokens.chunks(TOKENS_PER_STATEMENT).collect();
    let half = statements.len().div_ceil(2);
    let mut text = String::new();
    for (block, range) in [("setup", 0..half), ("loop", half..statements.len())] {
        text.push_str(&format!("void {block}() {{\n"));
        for i in range {
            let stmt = statements[i];
            if i % COMMENT_EVERY == COMMENT_EVERY - 1 {
                text.push_str(&format!("  // {}\n", stmt.join(" ")));
            } else {
                match stmt {
                    [f] => text.push_str(&format!("  {f}();\n")),
                    [f, rest @ ..] => text.push_str(&format!("  {f}({});\n", rest.join(", "))),
                    [] => {}
                }
            }
        }
        text.push_str("}\n");
    }
    text
}

/// Generates an Arduino-dialect corpus in which every class has its own
/// keyword distribution mixed with a shared vocabulary. Documents are
/// interleaved by class; in every class with at least two documents the last
/// document is an exact copy of the first (different id), giving one planted
/// duplicate pair per class.
pub fn generate_synthetic_corpus(spec: &SyntheticCorpusSpec) -> Corpus {
    assert!(
        spec.n_classes >= 1
            && spec.docs_per_class >= 1
            && spec.vocab_per_class >= 1
            && spec.doc_len >= 1,
        "synthetic corpus parameters must be >= 1"
    );
    assert!(
        (0.0..=1.0).contains(&spec.class_token_rate),
        "class_token_rate must lie in [0, 1]"
    );
    let vocab = Vocab::new(spec);
    let mut rng = util::rng(spec.seed);
    let mut firsts: Vec<Option<CodeDocument>> = vec![None; spec.n_classes];
    let mut docs = Vec::with_capacity(spec.n_classes * spec.docs_per_class);
    for i in 0..spec.docs_per_class {
        for (c, first) in firsts.iter_mut().enumerate() {
            let id = format!("syn-c{c:02}-{i:04}");
            let is_twin = i + 1 == spec.docs_per_class && i > 0;
            let doc = if is_twin {
                CodeDocument {
                    id,
                    ..first.clone().expect("first document of the class exists")
                }
            } else {
                let body = vocab.draw_n(c, spec.doc_len, &mut rng);
                CodeDocument {
                    id,
                    dialect: Dialect::Arduino,
                    sources: vec![SourceFile {
                        name: "sketch.ino".into(),
                        text: render_sketch(&body),
                    }],
                    title: Some(vocab.draw_n(c, 4, &mut rng).join(" ")),
                    tags: vocab.draw_n(c, 3, &mut rng),
                    description: Some(vocab.draw_n(c, 20, &mut rng).join(" ")),
                    label: Some(class_label(c)),
                    raw_components: vec![],
                }
            };
            if i == 0 {
                *first = Some(doc.clone());
            }
            docs.push(doc);
        }
    }
    Corpus::new(docs).expect("generated ids are unique")
}

/// Known level-1 generator network used for synthetic hardware data.
///
/// Slots follow the level-1 category order (Actuators, Arduino,
/// Communications, Electronics, Human Machine Interface, Materials, Memory,
/// Power, Sensors). The controller board drives sensors and actuators,
/// sensors drive displays and communications, and so on down short chains,
/// giving sparse configurations with about two components each.
pub fn l1_generator_network() -> BayesNet {
    // (parents, P(1 | parent row)) per slot
    let spec: [(&[usize], &[f64]); 9] = [
        (&[1], &[0.02, 0.2]),  // Actuators | Arduino
        (&[], &[0.9]),         // Arduino
        (&[8], &[0.01, 0.1]),  // Communications | Sensors
        (&[4], &[0.01, 0.25]), // Electronics | HMI
        (&[8], &[0.01, 0.15]), // HMI | Sensors
        (&[], &[0.01]),        // Materials
        (&[2], &[0.01, 0.2]),  // Memory | Communications
        (&[0], &[0.01, 0.25]), // Power | Actuators
        (&[1], &[0.03, 0.35]), // Sensors | Arduino
    ];
    let names = crate::corpus::Taxonomy::builtin(Level::L1).categories().to_vec();
    let dag = crate::hwrec::Dag::new(spec.iter().map(|(p, _)| p.to_vec()).collect())
        .expect("generator graph is acyclic");
    BayesNet::new(names, dag, spec.iter().map(|(_, t)| t.to_vec()).collect())
        .expect("generator tables are valid")
}

/// Ancestral samples from `generator`, rejecting all-zero configurations.
/// The generator must have 9 (L1) or 45 (L2) variables.
pub fn generate_synthetic_hwconfigs(
    generator: &BayesNet,
    n: usize,
    seed: u64,
) -> Result<Vec<HardwareConfig>, CorpusError> {
    let level = match generator.n_vars() {
        9 => Level::L1,
        45 => Level::L2,
        other => {
            return Err(CorpusError::InvalidTaxonomy(format!(
                "generator has {other} variables; expected 9 or 45"
            )))
        }
    };
    let mut rng = util::rng(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let bits = generator.sample(&mut rng);
        if bits != 0 {
            out.push(HardwareConfig::from_bits(level, bits));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{BTreeMap, BTreeSet};

    fn words(doc: &CodeDocument) -> Vec<String> {
        doc.sources[0]
            .text
            .split(|c: char| !c.is_alphanumeric() && c != '_')
            .filter(|w| !w.is_empty())
            .map(str::to_string)
            .collect()
    }

    #[test]
    fn standard_corpus_counts() {
        let c = generate_synthetic_corpus(&SyntheticCorpusSpec {
            seed: 7,
            ..SyntheticCorpusSpec::standard(7)
        });
        assert_eq!(c.len(), 2400);
        assert_eq!(c.labels().len(), 12);
    }

    #[test]
    fn generation_is_byte_identical_per_seed() {
        let spec = SyntheticCorpusSpec {
            n_classes: 3,
            docs_per_class: 10,
            vocab_per_class: 8,
            shared_vocab: 5,
            doc_len: 30,
            class_token_rate: 0.35,
            seed: 11,
        };
        let a = generate_synthetic_corpus(&spec).to_jsonl_string();
        let b = generate_synthetic_corpus(&spec).to_jsonl_string();
        assert_eq!(a, b);
        let other = generate_synthetic_corpus(&SyntheticCorpusSpec { seed: 12, ..spec });
        assert_ne!(a, other.to_jsonl_string());
    }

    #[test]
    fn one_duplicate_pair_per_class() {
        let c = generate_synthetic_corpus(&SyntheticCorpusSpec {
            n_classes: 4,
            docs_per_class: 6,
            vocab_per_class: 10,
            shared_vocab: 10,
            doc_len: 40,
            class_token_rate: 0.35,
            seed: 3,
        });
        let mut by_text: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for d in &c {
            by_text.entry(d.sources[0].text.as_str()).or_default().push(&d.id);
        }
        let pairs: Vec<_> = by_text.values().filter(|ids| ids.len() > 1).collect();
        assert_eq!(pairs.len(), 4);
        assert!(pairs.iter().all(|ids| ids.len() == 2));
    }

    /// Bag-of-words nearest-centroid classifier: with no shared vocabulary
    /// the classes must be perfectly separable on the training data.
    #[test]
    fn disjoint_vocabularies_are_separable_by_nearest_centroid() {
        let c = generate_synthetic_corpus(&SyntheticCorpusSpec {
            n_classes: 2,
            docs_per_class: 5,
            vocab_per_class: 10,
            shared_vocab: 0,
            doc_len: 50,
            class_token_rate: 0.35,
            seed: 1,
        });
        let vocab: BTreeSet<String> = c.iter().flat_map(words).collect();
        let vocab: Vec<String> = vocab.into_iter().collect();
        let bow = |d: &CodeDocument| {
            let ws = words(d);
            vocab
                .iter()
                .map(|v| ws.iter().filter(|w| *w == v).count() as f64)
                .collect::<Vec<f64>>()
        };
        let labels = c.labels();
        let centroids: Vec<Vec<f64>> = labels
            .iter()
            .map(|l| {
                let members: Vec<Vec<f64>> =
                    c.iter().filter(|d| d.label.as_ref() == Some(l)).map(bow).collect();
                (0..vocab.len())
                    .map(|j| members.iter().map(|m| m[j]).sum::<f64>() / members.len() as f64)
                    .collect()
            })
            .collect();
        let class_vocab: Vec<BTreeSet<String>> = labels
            .iter()
            .map(|l| {
                c.iter()
                    .filter(|d| d.label.as_ref() == Some(l))
                    .flat_map(words)
                    .filter(|w| w.starts_with('k'))
                    .collect()
            })
            .collect();
        assert!(class_vocab[0].is_disjoint(&class_vocab[1]));

        for d in &c {
            let x = bow(d);
            let dist = |m: &Vec<f64>| x.iter().zip(m).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            let best = (0..labels.len())
                .min_by(|&a, &b| dist(&centroids[a]).total_cmp(&dist(&centroids[b])))
                .unwrap();
            assert_eq!(Some(&labels[best]), d.label.as_ref());
        }
    }

    #[test]
    fn sketches_have_setup_and_loop() {
        let c = generate_synthetic_corpus(&SyntheticCorpusSpec {
            n_classes: 1,
            docs_per_class: 1,
            vocab_per_class: 3,
            shared_vocab: 3,
            doc_len: 10,
            class_token_rate: 0.35,
            seed: 0,
        });
        let text = &c.docs()[0].sources[0].text;
        assert!(text.contains("void setup() {") && text.contains("void loop() {"));
    }
}
