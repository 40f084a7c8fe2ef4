//! Code search over paragraph vectors: every class of the synthetic corpus
//! contains one exact duplicate, which should come back as the top hit.

use autoeng::corpus::{generate_synthetic_corpus, SyntheticCorpusSpec};
use autoeng::pipeline::{document_tokens, train_embedding, EmbedConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SyntheticCorpusSpec {
        docs_per_class: 60,
        ..SyntheticCorpusSpec::standard(2)
    };
    let corpus = generate_synthetic_corpus(&spec);
    let engine = train_embedding(&corpus, &EmbedConfig::default(), 11)?;
    println!("indexed {} documents (dim {})", engine.index.len(), engine.index.dim());

    let last = spec.docs_per_class - 1;
    for c in 0..4 {
        let query = format!("syn-c{c:02}-0000");
        let twin = format!("syn-c{c:02}-{last:04}");
        let hits = engine.search_id(&query, 3)?;
        let mark = if hits[0].id == twin { "twin" } else { "MISS" };
        println!("{query} -> {} [{mark}]", serde_json::to_string(&hits)?);
    }

    // external query: embed a fresh document by inference
    let mut doc = corpus.docs()[5].clone();
    doc.id = "outside".into();
    let tokens = document_tokens(&doc, &engine.config.features)?;
    let hits = engine.search_tokens(&tokens[..tokens.len() / 2], 3)?;
    println!("half of {:?} -> {:?}", corpus.docs()[5].id, hits.iter().map(|n| &n.id).collect::<Vec<_>>());
    Ok(())
}
