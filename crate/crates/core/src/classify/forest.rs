use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{argmax, check_training_set, encode_labels, ClassifyError};
use crate::embed::DocVector;
use crate::model_io::{ModelFile, ModelIoError, Persist};
use crate::util;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 12,
            min_samples_split: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { class } => return class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }
}

/// Bagged CART trees with Gini splits and `sqrt(dim)` candidate features per
/// split; prediction is a majority vote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<Tree>,
    pub class_names: Vec<String>,
    dim: usize,
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

struct Builder<'a> {
    x: &'a [DocVector],
    y: &'a [usize],
    n_classes: usize,
    n_candidates: usize,
    params: &'a ForestParams,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &r in rows {
            c[self.y[r]] += 1;
        }
        c
    }

    /// Best (feature, threshold, weighted child impurity) among sampled
    /// features, if any split separates the rows.
    fn best_split(&self, rows: &mut [usize], rng: &mut util::Rng) -> Option<(usize, f64, f64)> {
        let dim = self.x[0].dim();
        let mut features: Vec<usize> = (0..dim).collect();
        features.shuffle(rng);
        features.truncate(self.n_candidates);
        let total = self.counts(rows);
        let n = rows.len();
        let mut best: Option<(usize, f64, f64)> = None;
        for &f in &features {
            rows.sort_by(|&a, &b| self.x[a].0[f].total_cmp(&self.x[b].0[f]));
            let mut left = vec![0; self.n_classes];
            for i in 0..n - 1 {
                left[self.y[rows[i]]] += 1;
                let (lo, hi) = (self.x[rows[i]].0[f], self.x[rows[i + 1]].0[f]);
                if lo == hi {
                    continue;
                }
                let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
                let nl = i + 1;
                let score = (nl as f64 * gini(&left, nl) + (n - nl) as f64 * gini(&right, n - nl))
                    / n as f64;
                if best.is_none_or(|(_, _, s)| score < s) {
                    best = Some((f, lo + (hi - lo) / 2.0, score));
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: &mut [usize], depth: usize, rng: &mut util::Rng) -> usize {
        let counts = self.counts(rows);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            class: majority(&counts),
        });
        let impurity = gini(&counts, rows.len());
        if depth >= self.params.max_depth
            || rows.len() < self.params.min_samples_split.max(2)
            || impurity == 0.0
        {
            return id;
        }
        let Some((feature, threshold, score)) = self.best_split(rows, rng) else {
            return id;
        };
        if score >= impurity - 1e-12 {
            return id;
        }
        let mut l: Vec<usize> = rows.iter().copied().filter(|&r| self.x[r].0[feature] <= threshold).collect();
        let mut r: Vec<usize> = rows.iter().copied().filter(|&r| self.x[r].0[feature] > threshold).collect();
        let left = self.grow(&mut l, depth + 1, rng);
        let right = self.grow(&mut r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

pub fn train_tree_ensemble<S: AsRef<str>>(
    x: &[DocVector],
    y: &[S],
    params: &ForestParams,
) -> Result<ForestModel, ClassifyError> {
    if params.n_trees == 0 {
        return Err(ClassifyError::InvalidParams("n_trees must be >= 1".into()));
    }
    let dim = check_training_set(x, y)?;
    let (class_names, labels) = encode_labels(y);
    let n_candidates = ((dim as f64).sqrt().floor() as usize).max(1);
    let mut rng = util::rng(params.seed);
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        let mut rows: Vec<usize> = (0..x.len()).map(|_| rng.random_range(0..x.len())).collect();
        let mut b = Builder {
            x,
            y: &labels,
            n_classes: class_names.len(),
            n_candidates,
            params,
            nodes: Vec::new(),
        };
        b.grow(&mut rows, 0, &mut rng);
        trees.push(Tree { nodes: b.nodes });
    }
    Ok(ForestModel {
        trees,
        class_names,
        dim,
    })
}

impl ForestModel {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Vote shares in `class_names` order.
    pub fn predict_proba(&self, x: &DocVector) -> Result<Vec<f64>, ClassifyError> {
        if x.dim() != self.dim {
            return Err(ClassifyError::DimensionMismatch {
                expected: self.dim,
                got: x.dim(),
            });
        }
        let mut votes = vec![0.0; self.class_names.len()];
        for t in &self.trees {
            votes[t.predict(x.as_slice())] += 1.0;
        }
        let n = self.trees.len() as f64;
        Ok(votes.into_iter().map(|v| v / n).collect())
    }

    pub fn predict(&self, x: &DocVector) -> Result<&str, ClassifyError> {
        Ok(&self.class_names[argmax(&self.predict_proba(x)?)])
    }

    pub fn predict_batch(&self, xs: &[DocVector]) -> Result<Vec<String>, ClassifyError> {
        xs.iter().map(|x| self.predict(x).map(str::to_string)).collect()
    }
}

impl Persist for ForestModel {
    const KIND: &'static str = "forest";

    fn to_model_file(&self) -> ModelFile {
        ModelFile::new(Self::KIND, serde_json::to_value(self).expect("forest serializes"))
    }

    fn from_model_file(file: ModelFile) -> Result<Self, ModelIoError> {
        file.params()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor(n: usize, seed: u64) -> (Vec<DocVector>, Vec<String>) {
        let mut rng = util::rng(seed);
        let mut x = vec![];
        let mut y = vec![];
        for _ in 0..n {
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = rng.random_range(-1.0..1.0);
            x.push(DocVector(vec![a, b]));
            y.push(if (a > 0.0) != (b > 0.0) { "odd" } else { "even" }.to_string());
        }
        (x, y)
    }

    #[test]
    fn fits_xor_which_no_linear_model_can() {
        let (x, y) = xor(400, 1);
        let m = train_tree_ensemble(&x, &y, &ForestParams { n_trees: 25, max_depth: 6, ..Default::default() })
            .unwrap();
        let pred = m.predict_batch(&x).unwrap();
        let acc = pred.iter().zip(&y).filter(|(p, g)| p == g).count() as f64 / y.len() as f64;
        assert!(acc >= 0.95, "accuracy {acc}");
    }

    #[test]
    fn depth_zero_single_tree_predicts_the_majority() {
        let x: Vec<DocVector> = (0..50).map(|i| DocVector(vec![i as f64])).collect();
        let y: Vec<&str> = (0..50).map(|i| if i % 5 == 0 { "rare" } else { "common" }).collect();
        let m = train_tree_ensemble(&x, &y, &ForestParams { n_trees: 1, max_depth: 0, ..Default::default() })
            .unwrap();
        assert!(m.predict_batch(&x).unwrap().iter().all(|p| p == "common"));
    }

    #[test]
    fn same_seed_same_predictions() {
        let (x, y) = xor(200, 2);
        let p = ForestParams { n_trees: 10, max_depth: 4, seed: 7, ..Default::default() };
        let a = train_tree_ensemble(&x, &y, &p).unwrap();
        let b = train_tree_ensemble(&x, &y, &p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.predict_batch(&x).unwrap(), b.predict_batch(&x).unwrap());
    }

    #[test]
    fn rejects_single_class() {
        let x = vec![DocVector(vec![0.0]), DocVector(vec![1.0])];
        assert!(matches!(
            train_tree_ensemble(&x, &["a", "a"], &ForestParams::default()),
            Err(ClassifyError::SingleClass)
        ));
    }

    #[test]
    fn save_load_keeps_predictions() {
        let (x, y) = xor(200, 4);
        let params = ForestParams {
            n_trees: 5,
            max_depth: 4,
            ..Default::default()
        };
        let model = train_tree_ensemble(&x, &y, &params).unwrap();
        let back = ForestModel::from_bytes(&model.to_bytes()).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.to_bytes(), model.to_bytes());
    }
}
