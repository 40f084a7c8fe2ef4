use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{argmax, check_training_set, encode_labels, ClassifyError};
use crate::embed::DocVector;
use crate::model_io::{Matrix, ModelFile, ModelIoError, Persist};

/// Armijo sufficient-decrease constant.
const ARMIJO_C: f64 = 1e-4;
const MIN_STEP: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogRegParams {
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        Self {
            l2: 1e-2,
            max_iter: 500,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    /// `n_classes x dim`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub class_names: Vec<String>,
    pub l2: f64,
    /// Objective value after every accepted step, starting with the value at
    /// the zero initialization. Not persisted.
    pub loss_history: Vec<f64>,
    pub converged: bool,
}

/// Mean softmax cross-entropy plus `(l2 / 2) * |W|^2` (bias unpenalized) and
/// its gradient with respect to weights and bias.
///
/// `x` is `n x dim`, `y` holds class indices.
pub fn logreg_objective(
    weights: &Array2<f64>,
    bias: &Array1<f64>,
    x: &Array2<f64>,
    y: &[usize],
    l2: f64,
) -> (f64, Array2<f64>, Array1<f64>) {
    let n = x.nrows() as f64;
    let mut probs = x.dot(&weights.t());
    probs += &bias.view().insert_axis(Axis(0));
    let mut loss = 0.0;
    for (mut row, &label) in probs.axis_iter_mut(Axis(0)).zip(y) {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let log_z = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        loss += log_z - row[label];
        row.mapv_inplace(|v| (v - log_z).exp());
        row[label] -= 1.0;
    }
    // probs now holds (softmax - onehot)
    probs /= n;
    let grad_w = probs.t().dot(x) + &(weights * l2);
    let grad_b = probs.sum_axis(Axis(0));
    let penalty = 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    (loss / n + penalty, grad_w, grad_b)
}

fn to_matrix(x: &[DocVector], dim: usize) -> Array2<f64> {
    let mut m = Array2::zeros((x.len(), dim));
    for (mut row, v) in m.axis_iter_mut(Axis(0)).zip(x) {
        row.assign(&ArrayView1::from(v.as_slice()));
    }
    m
}

fn inf_norm(w: &Array2<f64>, b: &Array1<f64>) -> f64 {
    w.iter().chain(b.iter()).fold(0.0, |m, g| m.max(g.abs()))
}

/// Full-batch gradient descent with backtracking line search from a zero
/// start. Classes are the sorted distinct labels of `y`.
pub fn train_logreg<S: AsRef<str>>(
    x: &[DocVector],
    y: &[S],
    params: &LogRegParams,
) -> Result<LogRegModel, ClassifyError> {
    if !(params.l2 >= 0.0 && params.tol >= 0.0) {
        return Err(ClassifyError::InvalidParams("l2 and tol must be >= 0".into()));
    }
    let dim = check_training_set(x, y)?;
    let (class_names, labels) = encode_labels(y);
    let xm = to_matrix(x, dim);
    let k = class_names.len();
    let mut w = Array2::<f64>::zeros((k, dim));
    let mut b = Array1::<f64>::zeros(k);
    let (mut loss, mut gw, mut gb) = logreg_objective(&w, &b, &xm, &labels, params.l2);
    let mut history = vec![loss];
    let mut step = 1.0;
    let mut converged = false;
    for _ in 0..params.max_iter {
        let gnorm = inf_norm(&gw, &gb);
        if gnorm < params.tol {
            converged = true;
            break;
        }
        let sq = gw.iter().chain(gb.iter()).map(|g| g * g).sum::<f64>();
        // Try a slightly larger step than last time, then backtrack.
        step *= 2.0;
        let accepted = loop {
            let w_new = &w - &(&gw * step);
            let b_new = &b - &(&gb * step);
            let (l_new, gw_new, gb_new) = logreg_objective(&w_new, &b_new, &xm, &labels, params.l2);
            if l_new <= loss - ARMIJO_C * step * sq {
                w = w_new;
                b = b_new;
                loss = l_new;
                gw = gw_new;
                gb = gb_new;
                break true;
            }
            step *= 0.5;
            if step < MIN_STEP {
                break false;
            }
        };
        if !accepted {
            converged = true;
            break;
        }
        history.push(loss);
    }
    if !converged && inf_norm(&gw, &gb) < params.tol {
        converged = true;
    }
    log::debug!(
        "logreg: {} iterations, loss {loss:.6}, converged {converged}",
        history.len() - 1
    );
    Ok(LogRegModel {
        weights: w,
        bias: b,
        class_names,
        l2: params.l2,
        loss_history: history,
        converged,
    })
}

impl LogRegModel {
    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    fn check_dim(&self, x: &DocVector) -> Result<(), ClassifyError> {
        if x.dim() != self.dim() {
            return Err(ClassifyError::DimensionMismatch {
                expected: self.dim(),
                got: x.dim(),
            });
        }
        Ok(())
    }

    /// Class probabilities in `class_names` order.
    pub fn predict_proba(&self, x: &DocVector) -> Result<Vec<f64>, ClassifyError> {
        self.check_dim(x)?;
        let logits = self.weights.dot(&ArrayView1::from(x.as_slice())) + &self.bias;
        let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let exp: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
        let z: f64 = exp.iter().sum();
        Ok(exp.into_iter().map(|e| e / z).collect())
    }

    pub fn predict(&self, x: &DocVector) -> Result<&str, ClassifyError> {
        let p = self.predict_proba(x)?;
        Ok(&self.class_names[argmax(&p)])
    }

    pub fn predict_batch(&self, xs: &[DocVector]) -> Result<Vec<String>, ClassifyError> {
        xs.iter().map(|x| self.predict(x).map(str::to_string)).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct StoredHeader {
    class_names: Vec<String>,
    l2: f64,
    converged: bool,
}

impl Persist for LogRegModel {
    const KIND: &'static str = "logreg";

    fn to_model_file(&self) -> ModelFile {
        let (k, d) = self.weights.dim();
        let header = StoredHeader {
            class_names: self.class_names.clone(),
            l2: self.l2,
            converged: self.converged,
        };
        ModelFile::new(Self::KIND, json!(header))
            .with_matrix(Matrix::f64("weights", k, d, self.weights.iter().copied().collect()))
            .with_matrix(Matrix::f64("bias", k, 1, self.bias.to_vec()))
    }

    fn from_model_file(mut file: ModelFile) -> Result<Self, ModelIoError> {
        let h: StoredHeader = file.params()?;
        let k = h.class_names.len();
        let w = file.take_matrix("weights")?;
        let d = w.cols;
        let weights = Array2::from_shape_vec((k, d), w.into_f64(k, d)?)
            .map_err(|e| ModelIoError::InvalidParams(e.to_string()))?;
        let bias = Array1::from(file.take_matrix("bias")?.into_f64(k, 1)?);
        Ok(Self {
            weights,
            bias,
            class_names: h.class_names,
            l2: h.l2,
            loss_history: Vec::new(),
            converged: h.converged,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util;
    use proptest::prelude::*;
    use rand::Rng as _;
    use rand_distr::{Distribution, StandardNormal};

    fn hand_model() -> LogRegModel {
        LogRegModel {
            weights: ndarray::array![[1.0, -1.0], [-1.0, 1.0]],
            bias: ndarray::array![0.0, 0.0],
            class_names: vec!["a".into(), "b".into()],
            l2: 0.0,
            loss_history: vec![],
            converged: true,
        }
    }

    fn clusters(seed: u64, n: usize, k: usize, dim: usize, spread: f64) -> (Vec<DocVector>, Vec<String>) {
        let mut rng = util::rng(seed);
        let centers: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect::<Vec<f64>>())
            .map(|c| c.iter().map(|v| v * 3.0).collect())
            .collect();
        let mut x = vec![];
        let mut y = vec![];
        for i in 0..n {
            let c = i % k;
            x.push(DocVector(
                centers[c]
                    .iter()
                    .map(|m| m + spread * Distribution::<f64>::sample(&StandardNormal, &mut rng))
                    .collect(),
            ));
            y.push(format!("c{c}"));
        }
        (x, y)
    }

    #[test]
    fn closed_form_softmax() {
        let p = hand_model().predict_proba(&DocVector(vec![1.0, 0.0])).unwrap();
        assert!((p[0] - 0.880_797_077_977_882_3).abs() < 1e-12);
        assert!((p[1] - 0.119_202_922_022_117_7).abs() < 1e-12);
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = LogRegModel {
            weights: Array2::zeros((4, 3)),
            bias: Array1::zeros(4),
            class_names: (0..4).map(|i| i.to_string()).collect(),
            l2: 0.0,
            loss_history: vec![],
            converged: true,
        };
        let p = m.predict_proba(&DocVector(vec![5.0, -2.0, 1.0])).unwrap();
        assert!(p.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        assert!(matches!(
            m.predict_proba(&DocVector(vec![1.0])),
            Err(ClassifyError::DimensionMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn separable_clusters_are_fit_perfectly() {
        let (x, y) = clusters(1, 120, 3, 4, 0.3);
        let m = train_logreg(&x, &y, &LogRegParams::default()).unwrap();
        let pred = m.predict_batch(&x).unwrap();
        assert_eq!(pred, y);
    }

    #[test]
    fn training_errors() {
        let x = vec![DocVector(vec![1.0]), DocVector(vec![2.0])];
        assert!(matches!(
            train_logreg(&x, &["a", "a"], &LogRegParams::default()),
            Err(ClassifyError::SingleClass)
        ));
        let ragged = vec![DocVector(vec![1.0]), DocVector(vec![2.0, 3.0])];
        assert!(matches!(
            train_logreg(&ragged, &["a", "b"], &LogRegParams::default()),
            Err(ClassifyError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            train_logreg(&x, &["a"], &LogRegParams::default()),
            Err(ClassifyError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = util::rng(21);
        let (x, y) = clusters(2, 30, 3, 4, 1.0);
        let xm = to_matrix(&x, 4);
        let (_, labels) = encode_labels(&y);
        let eps = 1e-5;
        for _ in 0..20 {
            let w = Array2::from_shape_fn((3, 4), |_| rng.random::<f64>() * 2.0 - 1.0);
            let b = Array1::from_shape_fn(3, |_| rng.random::<f64>() * 2.0 - 1.0);
            let (_, gw, gb) = logreg_objective(&w, &b, &xm, &labels, 0.3);
            for idx in 0..12 {
                let (r, c) = (idx / 4, idx % 4);
                let (mut wp, mut wm) = (w.clone(), w.clone());
                wp[[r, c]] += eps;
                wm[[r, c]] -= eps;
                let fd = (logreg_objective(&wp, &b, &xm, &labels, 0.3).0
                    - logreg_objective(&wm, &b, &xm, &labels, 0.3).0)
                    / (2.0 * eps);
                let rel = (fd - gw[[r, c]]).abs() / fd.abs().max(gw[[r, c]].abs()).max(1e-8);
                assert!(rel < 1e-4, "w[{r},{c}] {fd} {}", gw[[r, c]]);
            }
            for r in 0..3 {
                let (mut bp, mut bm) = (b.clone(), b.clone());
                bp[r] += eps;
                bm[r] -= eps;
                let fd = (logreg_objective(&w, &bp, &xm, &labels, 0.3).0
                    - logreg_objective(&w, &bm, &xm, &labels, 0.3).0)
                    / (2.0 * eps);
                let rel = (fd - gb[r]).abs() / fd.abs().max(gb[r].abs()).max(1e-8);
                assert!(rel < 1e-4);
            }
        }
    }

    #[test]
    fn loss_never_increases() {
        let (x, y) = clusters(3, 90, 3, 5, 2.5);
        let m = train_logreg(&x, &y, &LogRegParams { max_iter: 200, ..Default::default() }).unwrap();
        assert!(m.loss_history.len() > 2);
        for pair in m.loss_history.windows(2) {
            assert!(pair[1] <= pair[0], "{pair:?}");
        }
    }

    #[test]
    fn training_is_deterministic_and_persists() {
        let (x, y) = clusters(4, 60, 4, 3, 1.0);
        let a = train_logreg(&x, &y, &LogRegParams::default()).unwrap();
        let b = train_logreg(&x, &y, &LogRegParams::default()).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        let back = LogRegModel::from_bytes(&a.to_bytes()).unwrap();
        assert_eq!(back.weights, a.weights);
        assert_eq!(back.bias, a.bias);
        assert_eq!(back.class_names, a.class_names);
    }

    proptest! {
        #[test]
        fn probabilities_sum_to_one(xs in prop::collection::vec(-50.0f64..50.0, 2)) {
            let p = hand_model().predict_proba(&DocVector(xs)).unwrap();
            prop_assert!(p.iter().all(|&v| v >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn shifting_all_weight_rows_changes_nothing(
            shift in prop::collection::vec(-5.0f64..5.0, 2),
            xs in prop::collection::vec(-5.0f64..5.0, 2),
        ) {
            let m = hand_model();
            let mut shifted = m.clone();
            for mut row in shifted.weights.axis_iter_mut(Axis(0)) {
                row += &ArrayView1::from(&shift[..]);
            }
            let x = DocVector(xs);
            let (p, q) = (m.predict_proba(&x).unwrap(), shifted.predict_proba(&x).unwrap());
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            prop_assert_eq!(m.predict(&x).unwrap(), shifted.predict(&x).unwrap());
        }
    }
}
