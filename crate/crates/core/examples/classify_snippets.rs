//! End-to-end classification on the standard synthetic corpus with each
//! embedder, followed by the confusion matrix of the doc2vec run.
//!
//! cargo run --release -p autoeng --example classify_snippets

use autoeng::corpus::{generate_synthetic_corpus, SyntheticCorpusSpec};
use autoeng::pipeline::{train_classifier, ClassifierConfig, EmbedderKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate_synthetic_corpus(&SyntheticCorpusSpec::standard(1));
    let mut confusion = None;
    for kind in [EmbedderKind::Doc2vec, EmbedderKind::Tfidf, EmbedderKind::Random] {
        let mut config = ClassifierConfig {
            seed: 42,
            ..Default::default()
        };
        config.embed.embedder = kind;
        let t = std::time::Instant::now();
        let run = train_classifier(&corpus, &config)?;
        let r = &run.report;
        println!(
            "{kind:>8}: weighted F1 {:.4}  macro {:.4}  micro {:.4}  ({} test docs, {:.1?})",
            r.f1_weighted,
            r.f1_macro,
            r.f1_micro,
            r.n_test,
            t.elapsed()
        );
        if kind == EmbedderKind::Doc2vec {
            confusion = Some(r.confusion_csv());
        }
    }
    println!("\n{}", confusion.unwrap());
    Ok(())
}
