//! Discrete Bayesian networks over binary category-presence variables.
//!
//! Assignments are bit masks: bit `i` is the value of variable `i`.

use std::collections::{BTreeMap, HashMap};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::HwrecError;
use crate::corpus::{HardwareConfig, Level, Taxonomy};
use crate::model_io::{ModelFile, ModelIoError, Persist};
use crate::util;

/// Default cap for exact structure learning.
pub const DEFAULT_MAX_VARS: usize = 12;
/// Most unobserved variables `bn_conditional` will enumerate over.
pub const MAX_ENUMERATED_VARS: usize = 24;

/// Parent sets per variable. Acyclic by construction when produced by
/// [`learn_bn_structure`]; checked by [`Dag::new`] otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dag {
    parents: Vec<Vec<usize>>,
}

impl Dag {
    pub fn new(parents: Vec<Vec<usize>>) -> Result<Self, HwrecError> {
        let n = parents.len();
        if n > 64 {
            return Err(HwrecError::InvalidNetwork(format!("{n} variables; at most 64 supported")));
        }
        for (v, ps) in parents.iter().enumerate() {
            for &p in ps {
                if p >= n || p == v {
                    return Err(HwrecError::InvalidNetwork(format!("bad parent {p} of variable {v}")));
                }
            }
            let mut sorted = ps.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != ps.len() {
                return Err(HwrecError::InvalidNetwork(format!("repeated parent of variable {v}")));
            }
        }
        let dag = Self { parents };
        dag.topological_order()?;
        Ok(dag)
    }

    pub fn empty(n_vars: usize) -> Self {
        Self {
            parents: vec![Vec::new(); n_vars],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.parents.len()
    }

    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub fn n_edges(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.parents[to].contains(&from)
    }

    /// Kahn's algorithm, lowest index first among ready variables.
    pub fn topological_order(&self) -> Result<Vec<usize>, HwrecError> {
        let n = self.n_vars();
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut order = Vec::with_capacity(n);
        let mut done = vec![false; n];
        while order.len() < n {
            let next = (0..n).find(|&v| !done[v] && indegree[v] == 0);
            let Some(v) = next else {
                return Err(HwrecError::InvalidNetwork("graph has a cycle".into()));
            };
            done[v] = true;
            order.push(v);
            for (c, ps) in self.parents.iter().enumerate() {
                if ps.contains(&v) {
                    indegree[c] -= 1;
                }
            }
        }
        Ok(order)
    }
}

/// Binary Bayesian network. `cpts[v][row]` is `P(v = 1 | parents)` where bit
/// `j` of `row` is the value of `parents[v][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesNet {
    variables: Vec<String>,
    dag: Dag,
    cpts: Vec<Vec<f64>>,
    order: Vec<usize>,
}

fn parent_row(parents: &[usize], assignment: u64) -> usize {
    parents
        .iter()
        .enumerate()
        .fold(0, |row, (j, &p)| row | (((assignment >> p) & 1) as usize) << j)
}

impl BayesNet {
    pub fn new(variables: Vec<String>, dag: Dag, cpts: Vec<Vec<f64>>) -> Result<Self, HwrecError> {
        let n = dag.n_vars();
        if variables.len() != n || cpts.len() != n {
            return Err(HwrecError::InvalidNetwork(format!(
                "{} names and {} tables for {n} variables",
                variables.len(),
                cpts.len()
            )));
        }
        for (v, table) in cpts.iter().enumerate() {
            if table.len() != 1 << dag.parents(v).len() {
                return Err(HwrecError::InvalidNetwork(format!("table of variable {v} has wrong size")));
            }
            if table.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(HwrecError::InvalidNetwork(format!("table of variable {v} leaves [0, 1]")));
            }
        }
        let order = dag.topological_order()?;
        Ok(Self {
            variables,
            dag,
            cpts,
            order,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn cpt(&self, v: usize) -> &[f64] {
        &self.cpts[v]
    }

    /// `P(v = 1 | parents as in assignment)`.
    pub fn prob_one(&self, v: usize, assignment: u64) -> f64 {
        self.cpts[v][parent_row(self.dag.parents(v), assignment)]
    }

    /// Probability of one full assignment.
    pub fn joint(&self, assignment: u64) -> f64 {
        (0..self.n_vars())
            .map(|v| {
                let p = self.prob_one(v, assignment);
                if assignment >> v & 1 == 1 {
                    p
                } else {
                    1.0 - p
                }
            })
            .product()
    }

    /// Ancestral sample of all variables.
    pub fn sample(&self, rng: &mut util::Rng) -> u64 {
        let mut x = 0u64;
        for &v in &self.order {
            if rng.random::<f64>() < self.prob_one(v, x) {
                x |= 1 << v;
            }
        }
        x
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.export()).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, HwrecError> {
        let e: BayesNetExport =
            serde_json::from_str(text).map_err(|e| HwrecError::InvalidNetwork(e.to_string()))?;
        Self::import(e)
    }

    fn export(&self) -> BayesNetExport {
        BayesNetExport {
            variables: self.variables.clone(),
            parents: (0..self.n_vars())
                .map(|v| self.dag.parents(v).iter().map(|&p| self.variables[p].clone()).collect())
                .collect(),
            cpts: self.cpts.clone(),
        }
    }

    fn import(e: BayesNetExport) -> Result<Self, HwrecError> {
        let index: HashMap<&str, usize> =
            e.variables.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        if index.len() != e.variables.len() {
            return Err(HwrecError::InvalidNetwork("variable names are not unique".into()));
        }
        let parents = e
            .parents
            .iter()
            .map(|ps| {
                ps.iter()
                    .map(|p| {
                        index
                            .get(p.as_str())
                            .copied()
                            .ok_or_else(|| HwrecError::InvalidNetwork(format!("unknown parent {p:?}")))
                    })
                    .collect::<Result<Vec<usize>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(e.variables, Dag::new(parents)?, e.cpts)
    }
}

/// Exported form: parents are given by name, CPT rows index parent values
/// with bit `j` for the `j`-th listed parent.
#[derive(Serialize, Deserialize)]
struct BayesNetExport {
    variables: Vec<String>,
    parents: Vec<Vec<String>>,
    cpts: Vec<Vec<f64>>,
}

impl Persist for BayesNet {
    const KIND: &'static str = "bayesnet";

    fn to_model_file(&self) -> ModelFile {
        ModelFile::new(Self::KIND, serde_json::to_value(self.export()).expect("network serializes"))
    }

    fn from_model_file(file: ModelFile) -> Result<Self, ModelIoError> {
        let e: BayesNetExport = file.params()?;
        Self::import(e).map_err(|e| ModelIoError::InvalidParams(e.to_string()))
    }
}

/// Distinct assignments with their multiplicities.
fn histogram(data: &[u64]) -> Vec<(u64, u64)> {
    let mut h: BTreeMap<u64, u64> = BTreeMap::new();
    for &x in data {
        *h.entry(x).or_default() += 1;
    }
    h.into_iter().collect()
}

fn mask_to_vec(mask: u64) -> Vec<usize> {
    (0..64).filter(|i| mask >> i & 1 == 1).collect()
}

/// BIC of one family: maximized log-likelihood minus `ln(N)/2` per free
/// parameter (one per parent configuration for a binary child).
fn family_bic(hist: &[(u64, u64)], n: usize, v: usize, parents: &[usize]) -> f64 {
    let rows = 1usize << parents.len();
    let mut ones = vec![0u64; rows];
    let mut totals = vec![0u64; rows];
    for &(x, c) in hist {
        let r = parent_row(parents, x);
        totals[r] += c;
        if x >> v & 1 == 1 {
            ones[r] += c;
        }
    }
    let mut ll = 0.0;
    for r in 0..rows {
        let (t, o) = (totals[r] as f64, ones[r] as f64);
        for c in [o, t - o] {
            if c > 0.0 {
                ll += c * (c / t).ln();
            }
        }
    }
    ll - 0.5 * (n as f64).ln() * rows as f64
}

/// BIC of a whole structure on the given data.
pub fn bic_score(dag: &Dag, data: &[u64]) -> f64 {
    let hist = histogram(data);
    (0..dag.n_vars())
        .map(|v| family_bic(&hist, data.len(), v, dag.parents(v)))
        .sum()
}

/// Exact BIC-optimal structure by dynamic programming over variable subsets:
/// best parent set of every variable within every candidate set, then best
/// sink of every subset, then the optimal ordering is read back.
pub fn learn_structure_from_bits(
    data: &[u64],
    n_vars: usize,
    max_vars: usize,
) -> Result<Dag, HwrecError> {
    if n_vars > max_vars {
        return Err(HwrecError::TooManyVariables(n_vars));
    }
    if data.is_empty() {
        return Err(HwrecError::EmptyData);
    }
    if n_vars == 0 {
        return Ok(Dag::empty(0));
    }
    let n = data.len();
    let hist = histogram(data);
    let full = (1usize << n_vars) - 1;

    // best[v][s]: best score and parent set for v with parents drawn from s
    // (s never contains v).
    let mut best_score = vec![vec![f64::NEG_INFINITY; 1 << n_vars]; n_vars];
    let mut best_set = vec![vec![0usize; 1 << n_vars]; n_vars];
    for v in 0..n_vars {
        for s in 0..=full {
            if s >> v & 1 == 1 {
                continue;
            }
            let mut score = family_bic(&hist, n, v, &mask_to_vec(s as u64));
            let mut set = s;
            // A subset scoring at least as well wins, so ties favour fewer
            // parents.
            for p in mask_to_vec(s as u64) {
                let sub = s & !(1 << p);
                if best_score[v][sub] >= score {
                    score = best_score[v][sub];
                    set = best_set[v][sub];
                }
            }
            best_score[v][s] = score;
            best_set[v][s] = set;
        }
    }

    let mut net_score = vec![f64::NEG_INFINITY; 1 << n_vars];
    let mut sink = vec![usize::MAX; 1 << n_vars];
    net_score[0] = 0.0;
    for w in 1..=full {
        for v in mask_to_vec(w as u64) {
            let rest = w & !(1 << v);
            let s = net_score[rest] + best_score[v][rest];
            if s > net_score[w] {
                net_score[w] = s;
                sink[w] = v;
            }
        }
    }

    let mut parents = vec![Vec::new(); n_vars];
    let mut w = full;
    while w != 0 {
        let v = sink[w];
        let rest = w & !(1 << v);
        parents[v] = mask_to_vec(best_set[v][rest] as u64);
        w = rest;
    }
    Dag::new(parents)
}

/// Maximum-likelihood tables with add-one smoothing: `(ones + 1) / (n + 2)`.
pub fn fit_cpts_from_bits(
    dag: &Dag,
    data: &[u64],
    variables: Vec<String>,
) -> Result<BayesNet, HwrecError> {
    if data.is_empty() {
        return Err(HwrecError::EmptyData);
    }
    let hist = histogram(data);
    let cpts = (0..dag.n_vars())
        .map(|v| {
            let rows = 1usize << dag.parents(v).len();
            let mut ones = vec![0u64; rows];
            let mut totals = vec![0u64; rows];
            for &(x, c) in &hist {
                let r = parent_row(dag.parents(v), x);
                totals[r] += c;
                if x >> v & 1 == 1 {
                    ones[r] += c;
                }
            }
            (0..rows)
                .map(|r| (ones[r] as f64 + 1.0) / (totals[r] as f64 + 2.0))
                .collect()
        })
        .collect();
    BayesNet::new(variables, dag.clone(), cpts)
}

fn check_level(configs: &[HardwareConfig]) -> Result<Level, HwrecError> {
    let level = configs.first().ok_or(HwrecError::EmptyData)?.level;
    if let Some(c) = configs.iter().find(|c| c.level != level) {
        return Err(HwrecError::LevelMismatch {
            expected: level,
            got: c.level,
        });
    }
    Ok(level)
}

pub fn learn_bn_structure(configs: &[HardwareConfig], max_vars: usize) -> Result<Dag, HwrecError> {
    let level = check_level(configs)?;
    let bits: Vec<u64> = configs.iter().map(HardwareConfig::bits).collect();
    learn_structure_from_bits(&bits, level.n_categories(), max_vars)
}

/// Fits tables for `dag` on configurations, naming variables after the
/// built-in taxonomy of their level.
pub fn fit_bn_cpts(dag: &Dag, configs: &[HardwareConfig]) -> Result<BayesNet, HwrecError> {
    let level = check_level(configs)?;
    if dag.n_vars() != level.n_categories() {
        return Err(HwrecError::BadDims(format!(
            "structure has {} variables, {level} has {}",
            dag.n_vars(),
            level.n_categories()
        )));
    }
    let bits: Vec<u64> = configs.iter().map(HardwareConfig::bits).collect();
    fit_cpts_from_bits(dag, &bits, Taxonomy::builtin(level).categories().to_vec())
}

/// Observed subset of variables: bit `i` of `mask` set means variable `i`
/// is observed with value bit `i` of `values`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Evidence {
    pub mask: u64,
    pub values: u64,
}

impl Evidence {
    pub fn new(mask: u64, values: u64) -> Self {
        Self {
            mask,
            values: values & mask,
        }
    }

    /// Present categories observed as 1; everything else unobserved.
    pub fn present_only(config: &HardwareConfig) -> Self {
        Self::new(config.bits(), config.bits())
    }
}

/// Exact `P(v = 1 | evidence)` for every unobserved variable, by summing the
/// joint over all completions of the unobserved variables.
pub fn bn_conditional(net: &BayesNet, evidence: &Evidence) -> Result<BTreeMap<usize, f64>, HwrecError> {
    let n = net.n_vars();
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let free: Vec<usize> = (0..n).filter(|&v| evidence.mask >> v & 1 == 0).collect();
    if free.len() > MAX_ENUMERATED_VARS {
        return Err(HwrecError::TooManyVariables(free.len()));
    }
    let base = evidence.values & all;
    let mut total = 0.0;
    let mut ones = vec![0.0; free.len()];
    for combo in 0u64..(1u64 << free.len()) {
        let mut x = base;
        for (j, &v) in free.iter().enumerate() {
            if combo >> j & 1 == 1 {
                x |= 1 << v;
            }
        }
        let p = net.joint(x);
        total += p;
        for (j, o) in ones.iter_mut().enumerate() {
            if combo >> j & 1 == 1 {
                *o += p;
            }
        }
    }
    if total <= 0.0 {
        return Err(HwrecError::ZeroProbabilityEvidence);
    }
    Ok(free.into_iter().zip(ones).map(|(v, o)| (v, o / total)).collect())
}
