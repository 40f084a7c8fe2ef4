//! Hardware recommendation: complete a partial multi-hot configuration of
//! component categories.
//!
//! Three scorers share the [`Recommender`] trait: an exact Bayesian network
//! (level 1 only, structure learning is exponential in the number of
//! variables), a shallow autoencoder, and a seeded random ranking used as the
//! baseline. [`evaluate_p_at_k`] runs the leave-one-out precision@k protocol.

mod autoencoder;
pub mod bn;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use autoencoder::{
    ae_complete, autoencoder_objective, train_autoencoder, AutoencoderGrads, AutoencoderModel,
    AutoencoderParams,
};
pub use bn::{
    bic_score, bn_conditional, fit_bn_cpts, learn_bn_structure, BayesNet, Dag, Evidence,
    DEFAULT_MAX_VARS,
};

use crate::corpus::{HardwareConfig, Level};
use crate::util;

#[derive(Debug, Error)]
pub enum HwrecError {
    #[error("{0} variables is too many for exact structure learning")]
    TooManyVariables(usize),
    #[error("no configurations given")]
    EmptyData,
    #[error("evidence has probability zero under the network")]
    ZeroProbabilityEvidence,
    #[error("need at least 10 configurations, got {0}")]
    TooFewSamples(usize),
    #[error("bad dimensions: {0}")]
    BadDims(String),
    #[error("level mismatch: expected {expected}, got {got}")]
    LevelMismatch { expected: Level, got: Level },
    #[error("configuration {0} has fewer than 2 components")]
    DegenerateConfig(usize),
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("k must be >= 1")]
    InvalidK,
    #[error(transparent)]
    ModelIo(#[from] crate::model_io::ModelIoError),
}

/// Scores candidate slots for a partial configuration. Higher is better;
/// only slots absent from the input are scored.
pub trait Recommender {
    fn name(&self) -> &str;
    fn level(&self) -> Level;
    fn score(&self, partial: &HardwareConfig) -> Result<BTreeMap<usize, f64>, HwrecError>;
}

fn check_level(expected: Level, partial: &HardwareConfig) -> Result<(), HwrecError> {
    if partial.level != expected {
        return Err(HwrecError::LevelMismatch {
            expected,
            got: partial.level,
        });
    }
    Ok(())
}

/// Uniformly random ranking of the absent slots.
///
/// Every call draws a fresh permutation from a stream keyed by the seed, the
/// partial configuration and a call counter, so a fixed sequence of calls is
/// reproducible while repeated partials still get independent rankings.
#[derive(Debug)]
pub struct RandomRecommender {
    pub level: Level,
    pub seed: u64,
    calls: AtomicU64,
}

impl RandomRecommender {
    pub fn new(level: Level, seed: u64) -> Self {
        Self {
            level,
            seed,
            calls: AtomicU64::new(0),
        }
    }
}

impl Recommender for RandomRecommender {
    fn name(&self) -> &str {
        "random"
    }

    fn level(&self) -> Level {
        self.level
    }

    fn score(&self, partial: &HardwareConfig) -> Result<BTreeMap<usize, f64>, HwrecError> {
        check_level(self.level, partial)?;
        let call = self.calls.fetch_add(1, Ordering::Relaxed);
        let key = format!("{:x}:{call}", partial.bits());
        let mut rng = util::rng(util::derive_seed(&key, self.seed));
        let mut slots: Vec<usize> = partial.absent().collect();
        slots.shuffle(&mut rng);
        let n = slots.len() as f64;
        Ok(slots
            .into_iter()
            .enumerate()
            .map(|(rank, s)| (s, 1.0 - rank as f64 / n))
            .collect())
    }
}

/// Scores each absent slot by `P(slot = 1 | present slots = 1)`. Absent
/// slots of the input are not treated as observed zeros: the partial list
/// says what is known to be there, not what is known to be missing.
#[derive(Debug, Clone, PartialEq)]
pub struct BnRecommender {
    pub net: BayesNet,
}

impl BnRecommender {
    pub fn new(net: BayesNet) -> Result<Self, HwrecError> {
        if net.n_vars() != Level::L1.n_categories() {
            return Err(HwrecError::BadDims(format!(
                "network has {} variables; level-1 configurations have 9",
                net.n_vars()
            )));
        }
        Ok(Self { net })
    }
}

impl Recommender for BnRecommender {
    fn name(&self) -> &str {
        "bayesnet"
    }

    fn level(&self) -> Level {
        Level::L1
    }

    fn score(&self, partial: &HardwareConfig) -> Result<BTreeMap<usize, f64>, HwrecError> {
        check_level(Level::L1, partial)?;
        bn_conditional(&self.net, &Evidence::present_only(partial))
    }
}

impl Recommender for AutoencoderModel {
    fn name(&self) -> &str {
        "autoencoder"
    }

    fn level(&self) -> Level {
        self.level
    }

    fn score(&self, partial: &HardwareConfig) -> Result<BTreeMap<usize, f64>, HwrecError> {
        ae_complete(self, partial)
    }
}

/// Best `k` slots by score, ties by lower slot index.
pub fn recommend_top_k(scores: &BTreeMap<usize, f64>, k: usize) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = scores.iter().map(|(&s, &v)| (s, v)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(k);
    ranked
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PAtKReport {
    pub recommender: String,
    pub k_values: Vec<usize>,
    pub p_at_k: BTreeMap<usize, f64>,
    pub n_trials: usize,
}

impl PAtKReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,p_at_k,n_trials\n");
        for k in &self.k_values {
            writeln!(out, "{k},{:.6},{}", self.p_at_k[k], self.n_trials).unwrap();
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Leave-one-out precision@k: every present slot of every configuration is
/// hidden in turn, the remaining slots are scored, and a trial hits at `k`
/// when the hidden slot ranks within the top `k`.
pub fn evaluate_p_at_k<R: Recommender + ?Sized>(
    recommender: &R,
    configs: &[HardwareConfig],
    k_values: &[usize],
) -> Result<PAtKReport, HwrecError> {
    if k_values.contains(&0) {
        return Err(HwrecError::InvalidK);
    }
    let mut hits = vec![0usize; k_values.len()];
    let mut trials = 0usize;
    for (i, config) in configs.iter().enumerate() {
        if config.count() < 2 {
            return Err(HwrecError::DegenerateConfig(i));
        }
        for hidden in config.present() {
            let mut partial = *config;
            partial.set(hidden, false);
            let scores = recommender.score(&partial)?;
            let ranked = recommend_top_k(&scores, scores.len());
            let rank = ranked
                .iter()
                .position(|&(s, _)| s == hidden)
                .expect("hidden slot is absent from the partial configuration");
            for (h, &k) in hits.iter_mut().zip(k_values) {
                if rank < k {
                    *h += 1;
                }
            }
            trials += 1;
        }
    }
    let p_at_k = k_values
        .iter()
        .zip(&hits)
        .map(|(&k, &h)| (k, if trials == 0 { 0.0 } else { h as f64 / trials as f64 }))
        .collect();
    Ok(PAtKReport {
        recommender: recommender.name().to_string(),
        k_values: k_values.to_vec(),
        p_at_k,
        n_trials: trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn top_k_rules() {
        let scores: BTreeMap<usize, f64> = [(0, 0.9), (1, 0.5), (2, 0.1)].into();
        assert_eq!(recommend_top_k(&scores, 2), vec![(0, 0.9), (1, 0.5)]);
        assert_eq!(recommend_top_k(&scores, 10).len(), 3);
        let tie: BTreeMap<usize, f64> = [(5, 0.5), (3, 0.5)].into();
        assert_eq!(recommend_top_k(&tie, 1), vec![(3, 0.5)]);
    }

    #[test]
    fn random_baseline_reaches_one_at_full_k() {
        let mut rng = util::rng(3);
        let configs: Vec<HardwareConfig> = (0..300)
            .map(|_| {
                let mut slots: Vec<usize> = (0..9).collect();
                slots.shuffle(&mut rng);
                HardwareConfig::from_slots(Level::L1, &slots[..2])
            })
            .collect();
        let r = RandomRecommender::new(Level::L1, 1);
        let report = evaluate_p_at_k(&r, &configs, &[1, 3, 5, 9]).unwrap();
        assert_eq!(report.p_at_k[&9], 1.0);
        assert_eq!(report.n_trials, 600);
        // 8 candidates per trial
        assert!((report.p_at_k[&1] - 0.125).abs() < 0.04, "{}", report.p_at_k[&1]);
        assert!(report.to_csv().starts_with("k,p_at_k,n_trials\n1,"));
    }

    #[test]
    fn degenerate_configs_are_refused() {
        let configs = [
            HardwareConfig::from_slots(Level::L1, &[0, 1]),
            HardwareConfig::from_slots(Level::L1, &[4]),
        ];
        let r = RandomRecommender::new(Level::L1, 1);
        assert!(matches!(evaluate_p_at_k(&r, &configs, &[1]), Err(HwrecError::DegenerateConfig(1))));
    }

    #[test]
    fn bn_recommender_uses_present_components() {
        // v8 depends strongly on v0
        let mut parents = vec![vec![]; 9];
        parents[8] = vec![0];
        let mut cpts = vec![vec![0.2]; 9];
        cpts[8] = vec![0.05, 0.9];
        let net = BayesNet::new(
            (0..9).map(|i| format!("c{i}")).collect(),
            Dag::new(parents).unwrap(),
            cpts,
        )
        .unwrap();
        let rec = BnRecommender::new(net).unwrap();
        let scores = rec.score(&HardwareConfig::from_slots(Level::L1, &[0])).unwrap();
        assert_eq!(recommend_top_k(&scores, 1)[0].0, 8);
        assert!(!scores.contains_key(&0));
    }

    proptest! {
        #[test]
        fn p_at_k_is_monotone(seed in any::<u64>(), n in 1usize..40) {
            let mut rng = util::rng(seed);
            let configs: Vec<HardwareConfig> = (0..n)
                .map(|_| {
                    let mut slots: Vec<usize> = (0..9).collect();
                    slots.shuffle(&mut rng);
                    let m = 2 + (seed as usize + slots[0]) % 5;
                    HardwareConfig::from_slots(Level::L1, &slots[..m])
                })
                .collect();
            let r = RandomRecommender::new(Level::L1, seed);
            let ks: Vec<usize> = (1..=9).collect();
            let report = evaluate_p_at_k(&r, &configs, &ks).unwrap();
            for w in ks.windows(2) {
                prop_assert!(report.p_at_k[&w[0]] <= report.p_at_k[&w[1]]);
            }
            prop_assert_eq!(report.p_at_k[&9], 1.0);
        }
    }
}
