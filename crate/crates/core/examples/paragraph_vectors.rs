//! Trains PV-DBOW and PV-DM paragraph vectors on a small planted-topic
//! corpus and compares intra- and inter-class cosine similarity.

use autoeng::corpus::{generate_synthetic_corpus, SyntheticCorpusSpec};
use autoeng::embed::{infer_doc_vector, train_doc2vec, Doc2VecAlgorithm, Doc2VecParams};
use autoeng::featex::FeatureSetSpec;
use autoeng::pipeline::tagged_documents;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate_synthetic_corpus(&SyntheticCorpusSpec {
        n_classes: 4,
        docs_per_class: 40,
        vocab_per_class: 30,
        shared_vocab: 60,
        doc_len: 100,
        class_token_rate: 0.3,
        seed: 3,
    });
    let features: FeatureSetSpec = "code,comments".parse()?;
    let docs = tagged_documents(&corpus, &features)?;
    let labels: Vec<&str> = corpus.iter().map(|d| d.label.as_deref().unwrap()).collect();

    for algorithm in [Doc2VecAlgorithm::PvDbow, Doc2VecAlgorithm::PvDm] {
        let params = Doc2VecParams {
            algorithm,
            epochs: 20,
            seed: 1,
            ..Default::default()
        };
        let t = std::time::Instant::now();
        let model = train_doc2vec(&docs, &params)?;
        let losses = model.epoch_losses();
        println!(
            "{algorithm}: {} words, loss {:.3} -> {:.3} in {:.2?}",
            model.vocab_size(),
            losses[0],
            losses[losses.len() - 1],
            t.elapsed()
        );

        let (mut intra, mut inter, mut ni, mut ne) = (0.0, 0.0, 0, 0);
        for i in 0..docs.len() {
            for j in i + 1..docs.len() {
                let c = model.doc_vector(i).cosine(&model.doc_vector(j));
                if labels[i] == labels[j] {
                    intra += c;
                    ni += 1;
                } else {
                    inter += c;
                    ne += 1;
                }
            }
        }
        println!("  mean cosine intra {:.3}, inter {:.3}", intra / ni as f64, inter / ne as f64);

        let inferred = infer_doc_vector(&model, &docs[0].tokens, 40, 7)?;
        println!(
            "  re-inferred doc 0: cosine to trained vector {:.3}",
            inferred.vector.cosine(&model.doc_vector(0))
        );
    }
    Ok(())
}
