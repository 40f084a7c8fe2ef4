use std::collections::BTreeMap;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::HwrecError;
use crate::corpus::{HardwareConfig, Level};
use crate::model_io::{Matrix, ModelFile, ModelIoError, Persist};
use crate::util;

pub const MIN_TRAINING_CONFIGS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoencoderParams {
    /// Defaults to `ceil(d_in / 2)`.
    pub d_hidden: Option<usize>,
    pub l1: f64,
    pub l2: f64,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for AutoencoderParams {
    fn default() -> Self {
        Self {
            d_hidden: None,
            l1: 1e-5,
            l2: 1e-4,
            epochs: 300,
            lr: 0.05,
            batch_size: 32,
            seed: 0,
        }
    }
}

/// One-hidden-layer autoencoder over multi-hot configurations with sigmoid
/// activations on both layers.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    pub level: Level,
    /// `d_hidden x d_in`.
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// `d_in x d_hidden`.
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub l1: f64,
    pub l2: f64,
    pub seed: u64,
    /// Mean objective per epoch. Not persisted.
    pub epoch_losses: Vec<f64>,
}

/// Gradients of [`autoencoder_objective`], one per parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderGrads {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

fn sigmoid(a: &mut Array2<f64>) {
    a.mapv_inplace(util::sigmoid);
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl AutoencoderModel {
    pub fn d_in(&self) -> usize {
        self.w1.ncols()
    }

    pub fn d_hidden(&self) -> usize {
        self.w1.nrows()
    }

    fn hidden(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut h = x.dot(&self.w1.t()) + &self.b1.view().insert_axis(Axis(0));
        sigmoid(&mut h);
        h
    }

    fn decoder_logits(&self, h: &Array2<f64>) -> Array2<f64> {
        h.dot(&self.w2.t()) + &self.b2.view().insert_axis(Axis(0))
    }

    /// Reconstruction of every slot for one configuration.
    pub fn reconstruct(&self, config: &HardwareConfig) -> Result<Vec<f64>, HwrecError> {
        if config.level != self.level {
            return Err(HwrecError::LevelMismatch {
                expected: self.level,
                got: config.level,
            });
        }
        let x = Array2::from_shape_vec((1, self.d_in()), config.to_f64()).expect("row shape");
        let mut y = self.decoder_logits(&self.hidden(&x));
        sigmoid(&mut y);
        Ok(y.row(0).to_vec())
    }

    fn penalty(&self) -> f64 {
        let l1: f64 = self.w1.iter().chain(self.w2.iter()).map(|w| w.abs()).sum();
        let l2: f64 = self.w1.iter().chain(self.w2.iter()).map(|w| w * w).sum();
        self.l1 * l1 + self.l2 * l2
    }

    pub fn weight_l1_norm(&self) -> f64 {
        self.w1.iter().chain(self.w2.iter()).map(|w| w.abs()).sum()
    }
}

/// Mean binary cross-entropy over all entries of the batch plus
/// `l1 * |W|_1 + l2 * |W|_2^2` over both weight matrices, and its gradient.
/// The L1 term uses `sign(0) = 0`.
pub fn autoencoder_objective(model: &AutoencoderModel, x: &Array2<f64>) -> (f64, AutoencoderGrads) {
    let h = model.hidden(x);
    let z = model.decoder_logits(&h);
    let count = (x.nrows() * x.ncols()) as f64;
    let mut bce = 0.0;
    for (&zi, &xi) in z.iter().zip(x.iter()) {
        // -[x ln s(z) + (1-x) ln(1-s(z))] = softplus(z) - x z
        bce += softplus(zi) - xi * zi;
    }
    let mut dz2 = z.mapv(util::sigmoid) - x;
    dz2 /= count;
    let reg = |w: &Array2<f64>| w.mapv(|v| model.l1 * sign(v) + 2.0 * model.l2 * v);
    let g_w2 = dz2.t().dot(&h) + reg(&model.w2);
    let g_b2 = dz2.sum_axis(Axis(0));
    let dh = dz2.dot(&model.w2);
    let dz1 = dh * &h.mapv(|v| v * (1.0 - v));
    let g_w1 = dz1.t().dot(x) + reg(&model.w1);
    let g_b1 = dz1.sum_axis(Axis(0));
    (
        bce / count + model.penalty(),
        AutoencoderGrads {
            w1: g_w1,
            b1: g_b1,
            w2: g_w2,
            b2: g_b2,
        },
    )
}

/// Mini-batch gradient descent on [`autoencoder_objective`]. Batches are
/// reshuffled every epoch by the seeded RNG.
pub fn train_autoencoder(
    configs: &[HardwareConfig],
    params: &AutoencoderParams,
) -> Result<AutoencoderModel, HwrecError> {
    if configs.len() < MIN_TRAINING_CONFIGS {
        return Err(HwrecError::TooFewSamples(configs.len()));
    }
    let level = configs[0].level;
    if let Some(c) = configs.iter().find(|c| c.level != level) {
        return Err(HwrecError::LevelMismatch {
            expected: level,
            got: c.level,
        });
    }
    let d_in = level.n_categories();
    let d_hidden = params.d_hidden.unwrap_or(d_in.div_ceil(2));
    if d_hidden == 0 || d_hidden >= d_in {
        return Err(HwrecError::BadDims(format!("d_hidden {d_hidden} must be in [1, {d_in})")));
    }
    if params.batch_size == 0 || !(params.lr > 0.0) || params.l1 < 0.0 || params.l2 < 0.0 {
        return Err(HwrecError::BadDims("batch_size, lr must be positive; l1, l2 >= 0".into()));
    }
    let mut rng = util::rng(params.seed);
    let limit = (6.0 / (d_in + d_hidden) as f64).sqrt();
    let mut init = |r: usize, c: usize| Array2::from_shape_simple_fn((r, c), || rng.random_range(-limit..limit));
    let w1 = init(d_hidden, d_in);
    let w2 = init(d_in, d_hidden);
    let mut model = AutoencoderModel {
        level,
        w1,
        b1: Array1::zeros(d_hidden),
        w2,
        b2: Array1::zeros(d_in),
        l1: params.l1,
        l2: params.l2,
        seed: params.seed,
        epoch_losses: Vec::with_capacity(params.epochs),
    };
    let data: Vec<Vec<f64>> = configs.iter().map(HardwareConfig::to_f64).collect();
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        let (mut total, mut batches) = (0.0, 0usize);
        for chunk in order.chunks(params.batch_size) {
            let mut x = Array2::zeros((chunk.len(), d_in));
            for (mut row, &i) in x.axis_iter_mut(Axis(0)).zip(chunk) {
                row.assign(&ndarray::ArrayView1::from(&data[i][..]));
            }
            let (loss, g) = autoencoder_objective(&model, &x);
            total += loss;
            batches += 1;
            model.w1.scaled_add(-params.lr, &g.w1);
            model.b1.scaled_add(-params.lr, &g.b1);
            model.w2.scaled_add(-params.lr, &g.w2);
            model.b2.scaled_add(-params.lr, &g.b2);
        }
        model.epoch_losses.push(total / batches as f64);
    }
    Ok(model)
}

/// Reconstruction scores for the slots not set in `partial`.
pub fn ae_complete(
    model: &AutoencoderModel,
    partial: &HardwareConfig,
) -> Result<BTreeMap<usize, f64>, HwrecError> {
    let y = model.reconstruct(partial)?;
    Ok(partial.absent().map(|s| (s, y[s])).collect())
}

#[derive(Serialize, Deserialize)]
struct StoredHeader {
    level: Level,
    d_in: usize,
    d_hidden: usize,
    l1: f64,
    l2: f64,
    seed: u64,
}

impl Persist for AutoencoderModel {
    const KIND: &'static str = "autoencoder";

    fn to_model_file(&self) -> ModelFile {
        let (h, d) = (self.d_hidden(), self.d_in());
        let header = StoredHeader {
            level: self.level,
            d_in: d,
            d_hidden: h,
            l1: self.l1,
            l2: self.l2,
            seed: self.seed,
        };
        ModelFile::new(Self::KIND, json!(header))
            .with_matrix(Matrix::f64("w1", h, d, self.w1.iter().copied().collect()))
            .with_matrix(Matrix::f64("b1", h, 1, self.b1.to_vec()))
            .with_matrix(Matrix::f64("w2", d, h, self.w2.iter().copied().collect()))
            .with_matrix(Matrix::f64("b2", d, 1, self.b2.to_vec()))
    }

    fn from_model_file(mut file: ModelFile) -> Result<Self, ModelIoError> {
        let p: StoredHeader = file.params()?;
        let (h, d) = (p.d_hidden, p.d_in);
        if d != p.level.n_categories() {
            return Err(ModelIoError::InvalidParams(format!("d_in {d} does not match {}", p.level)));
        }
        let shape_err = |e: ndarray::ShapeError| ModelIoError::InvalidParams(e.to_string());
        let w1 = Array2::from_shape_vec((h, d), file.take_matrix("w1")?.into_f64(h, d)?).map_err(shape_err)?;
        let b1 = Array1::from(file.take_matrix("b1")?.into_f64(h, 1)?);
        let w2 = Array2::from_shape_vec((d, h), file.take_matrix("w2")?.into_f64(d, h)?).map_err(shape_err)?;
        let b2 = Array1::from(file.take_matrix("b2")?.into_f64(d, 1)?);
        Ok(Self {
            level: p.level,
            w1,
            b1,
            w2,
            b2,
            l1: p.l1,
            l2: p.l2,
            seed: p.seed,
            epoch_losses: Vec::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn varied_configs(n: usize, seed: u64) -> Vec<HardwareConfig> {
        let mut rng = util::rng(seed);
        (0..n)
            .map(|_| {
                // slots 0 and 8 co-occur, others independent and sparse
                let mut bits = if rng.random::<f64>() < 0.5 { 0b1_0000_0001 } else { 0 };
                for s in 1..8 {
                    if rng.random::<f64>() < 0.15 {
                        bits |= 1 << s;
                    }
                }
                HardwareConfig::from_bits(Level::L1, bits.max(2))
            })
            .collect()
    }

    fn small_params(epochs: usize) -> AutoencoderParams {
        AutoencoderParams {
            epochs,
            seed: 4,
            ..Default::default()
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let configs = varied_configs(40, 1);
        let mut model = train_autoencoder(&configs, &small_params(2)).unwrap();
        model.l1 = 1e-3;
        model.l2 = 1e-2;
        let mut rng = util::rng(2);
        let x = Array2::from_shape_fn((8, 9), |(r, c)| configs[r].to_f64()[c]);
        let eps = 1e-5;
        for _ in 0..20 {
            // random parameter point, away from the L1 kink at zero
            let mut m = model.clone();
            for w in m.w1.iter_mut().chain(m.w2.iter_mut()) {
                let mut v: f64 = rng.random_range(-1.0..1.0);
                if v.abs() < 0.01 {
                    v += 0.05;
                }
                *w = v;
            }
            m.b1.mapv_inplace(|_| rng.random_range(-1.0..1.0));
            m.b2.mapv_inplace(|_| rng.random_range(-1.0..1.0));
            let (_, g) = autoencoder_objective(&m, &x);
            let check = |analytic: f64, f: &dyn Fn(&mut AutoencoderModel, f64)| {
                let (mut p, mut q) = (m.clone(), m.clone());
                f(&mut p, eps);
                f(&mut q, -eps);
                let fd = (autoencoder_objective(&p, &x).0 - autoencoder_objective(&q, &x).0) / (2.0 * eps);
                let rel = (fd - analytic).abs() / fd.abs().max(analytic.abs()).max(1e-8);
                assert!(rel < 1e-4, "{fd} vs {analytic}");
            };
            for i in 0..m.d_hidden() {
                for j in 0..m.d_in() {
                    check(g.w1[[i, j]], &|mm, e| mm.w1[[i, j]] += e);
                    check(g.w2[[j, i]], &|mm, e| mm.w2[[j, i]] += e);
                }
                check(g.b1[i], &|mm, e| mm.b1[i] += e);
            }
            for j in 0..m.d_in() {
                check(g.b2[j], &|mm, e| mm.b2[j] += e);
            }
        }
    }

    #[test]
    fn loss_decreases_and_training_is_deterministic() {
        let configs = varied_configs(200, 3);
        let a = train_autoencoder(&configs, &small_params(30)).unwrap();
        let b = train_autoencoder(&configs, &small_params(30)).unwrap();
        assert_eq!(a, b);
        assert!(a.epoch_losses.last().unwrap() <= a.epoch_losses.first().unwrap());
        for w in a.epoch_losses[..10].windows(2) {
            assert!(w[1] <= w[0], "{:?}", &a.epoch_losses[..10]);
        }
    }

    #[test]
    fn memorizes_a_single_configuration() {
        let one = HardwareConfig::from_slots(Level::L1, &[1, 4, 8]);
        let configs = vec![one; 200];
        let m = train_autoencoder(&configs, &AutoencoderParams { d_hidden: Some(2), ..small_params(300) }).unwrap();
        let y = m.reconstruct(&one).unwrap();
        for (s, &v) in y.iter().enumerate() {
            if one.get(s) {
                assert!(v >= 0.9, "slot {s}: {v}");
            } else {
                assert!(v <= 0.1, "slot {s}: {v}");
            }
        }
    }

    #[test]
    fn completion_edge_cases() {
        let m = train_autoencoder(&varied_configs(50, 5), &small_params(5)).unwrap();
        let full = HardwareConfig::from_bits(Level::L1, 0x1ff);
        assert!(ae_complete(&m, &full).unwrap().is_empty());
        let zero = ae_complete(&m, &HardwareConfig::empty(Level::L1)).unwrap();
        let h: Vec<f64> = m.b1.iter().map(|&b| util::sigmoid(b)).collect();
        for (s, score) in zero {
            let z: f64 = m.b2[s] + (0..m.d_hidden()).map(|i| m.w2[[s, i]] * h[i]).sum::<f64>();
            assert!((score - util::sigmoid(z)).abs() < 1e-12);
        }
        assert!(matches!(
            ae_complete(&m, &HardwareConfig::empty(Level::L2)),
            Err(HwrecError::LevelMismatch { .. })
        ));
    }

    #[test]
    fn co_occurring_slot_ranks_high() {
        let m = train_autoencoder(&varied_configs(600, 6), &small_params(150)).unwrap();
        let scores = ae_complete(&m, &HardwareConfig::from_slots(Level::L1, &[0])).unwrap();
        let top = super::super::recommend_top_k(&scores, 2);
        assert!(top.iter().any(|&(s, _)| s == 8), "{top:?}");
    }

    #[test]
    fn stronger_l1_does_not_grow_weights() {
        let configs = varied_configs(300, 7);
        let weak = train_autoencoder(&configs, &AutoencoderParams { l1: 1e-3, ..small_params(100) }).unwrap();
        let strong = train_autoencoder(&configs, &AutoencoderParams { l1: 1e-2, ..small_params(100) }).unwrap();
        assert!(strong.weight_l1_norm() <= weak.weight_l1_norm());
    }

    #[test]
    fn input_validation_and_persistence() {
        let few = varied_configs(5, 1);
        assert!(matches!(train_autoencoder(&few, &small_params(1)), Err(HwrecError::TooFewSamples(5))));
        let configs = varied_configs(20, 1);
        assert!(matches!(
            train_autoencoder(&configs, &AutoencoderParams { d_hidden: Some(9), ..small_params(1) }),
            Err(HwrecError::BadDims(_))
        ));
        let m = train_autoencoder(&configs, &small_params(3)).unwrap();
        let back = AutoencoderModel::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back.w1, m.w1);
        assert_eq!(back.b2, m.b2);
        let probe = HardwareConfig::from_slots(Level::L1, &[2]);
        assert_eq!(back.reconstruct(&probe).unwrap(), m.reconstruct(&probe).unwrap());
    }
}
