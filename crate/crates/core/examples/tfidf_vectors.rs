//! tf-idf on a toy corpus: vocabulary, idf weights and pairwise cosines.

use autoeng::embed::fit_tfidf;

fn main() {
    let docs: Vec<Vec<&str>> = vec![
        "pinmode digitalwrite delay digitalwrite".split(' ').collect(),
        "analogread serial println delay".split(' ').collect(),
        "pinmode analogread map analogwrite".split(' ').collect(),
    ];
    let model = fit_tfidf(&docs).unwrap();
    for (term, idf) in model.terms().iter().zip(model.idf()) {
        println!("{term:>12}  idf {idf:.4}");
    }
    let vecs: Vec<_> = docs.iter().map(|d| model.transform(d)).collect();
    for i in 0..vecs.len() {
        for j in i + 1..vecs.len() {
            println!("cos(d{i}, d{j}) = {:.4}", vecs[i].cosine(&vecs[j]));
        }
    }
    // unseen words are dropped
    let q = model.transform(&["delay", "servo"]);
    println!("query entries {:?}", q.entries);
}
