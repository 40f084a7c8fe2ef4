//! Code-category classifiers over document embeddings and their evaluation.
//!
//! Multinomial logistic regression is the main model. A bagged CART forest is
//! available as a tree-ensemble baseline.

mod eval;
mod forest;
mod logreg;

use thiserror::Error;

pub use eval::{evaluate_f1, ClassScores, EvalReport};
pub use forest::{train_tree_ensemble, ForestModel, ForestParams};
pub use logreg::{logreg_objective, train_logreg, LogRegModel, LogRegParams};

use crate::embed::DocVector;

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("only one class present in the training labels")]
    SingleClass,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    ModelIo(#[from] crate::model_io::ModelIoError),
}

/// Sorted distinct labels and the index of every label in that list.
fn encode_labels<S: AsRef<str>>(y: &[S]) -> (Vec<String>, Vec<usize>) {
    let mut names: Vec<String> = y.iter().map(|s| s.as_ref().to_string()).collect();
    names.sort();
    names.dedup();
    let idx = y
        .iter()
        .map(|s| names.binary_search_by(|n| n.as_str().cmp(s.as_ref())).expect("label present"))
        .collect();
    (names, idx)
}

/// Checks shapes shared by every trainer and returns the common dimension.
fn check_training_set<S: AsRef<str>>(x: &[DocVector], y: &[S]) -> Result<usize, ClassifyError> {
    if x.len() != y.len() {
        return Err(ClassifyError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let first = x.first().ok_or(ClassifyError::EmptyInput)?;
    let dim = first.dim();
    if let Some(bad) = x.iter().find(|v| v.dim() != dim) {
        return Err(ClassifyError::DimensionMismatch {
            expected: dim,
            got: bad.dim(),
        });
    }
    let first_label = y[0].as_ref();
    if y.iter().all(|l| l.as_ref() == first_label) {
        return Err(ClassifyError::SingleClass);
    }
    Ok(dim)
}

/// Index of the largest value; the first one wins ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
