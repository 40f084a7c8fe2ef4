use rand_distr::{Distribution, StandardNormal};

use super::DocVector;
use crate::util;

/// Standard-normal vector keyed by `(doc_id, seed)`; the lower-bound baseline
/// for classification.
pub fn random_embedding(doc_id: &str, dim: usize, seed: u64) -> DocVector {
    assert!(dim >= 1, "embedding dimension must be >= 1");
    let mut rng = util::rng(util::derive_seed(doc_id, seed));
    DocVector((0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
}
