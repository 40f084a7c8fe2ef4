//! Generates the planted-topic corpus and a batch of hardware configurations
//! and writes both as JSONL.
//!
//! cargo run -p autoeng --example synthetic_corpus -- /tmp/synth

use std::path::PathBuf;

use autoeng::corpus::{
    generate_synthetic_corpus, generate_synthetic_hwconfigs, l1_generator_network, Level,
    SyntheticCorpusSpec, Taxonomy,
};
use autoeng::pipeline::write_hwconfigs;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "target/synth".into()).into();
    std::fs::create_dir_all(&out)?;

    let corpus = generate_synthetic_corpus(&SyntheticCorpusSpec::standard(1));
    corpus.save(out.join("corpus.jsonl"))?;
    println!("{} documents, {} classes", corpus.len(), corpus.labels().len());
    let first = &corpus.docs()[0];
    println!("first document {:?}:\n{}", first.id, &first.sources[0].text[..200.min(first.sources[0].text.len())]);

    let configs = generate_synthetic_hwconfigs(&l1_generator_network(), 2000, 1)?;
    let tax = Taxonomy::builtin(Level::L1);
    write_hwconfigs(&configs, &tax, std::fs::File::create(out.join("hardware.jsonl"))?)?;
    let mean = configs.iter().map(|c| c.count()).sum::<usize>() as f64 / configs.len() as f64;
    println!("{} hardware configurations, {mean:.2} components on average", configs.len());
    for c in configs.iter().take(5) {
        println!("  {:?}", c.category_names(&tax));
    }
    println!("written to {}", out.display());
    Ok(())
}
