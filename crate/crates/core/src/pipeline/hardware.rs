use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::PipelineError;
use crate::corpus::{normalize_components, split_indices, Corpus, HardwareConfig, Level, SplitSpec, Taxonomy};
use crate::hwrec::{
    evaluate_p_at_k, fit_bn_cpts, learn_bn_structure, recommend_top_k, train_autoencoder,
    AutoencoderModel, AutoencoderParams, BayesNet, BnRecommender, HwrecError, PAtKReport,
    RandomRecommender, Recommender, DEFAULT_MAX_VARS,
};
use crate::model_io::{ModelFile, ModelIoError, Persist};
use crate::util;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HwrecModelKind {
    Bn,
    Ae,
    Random,
}

impl fmt::Display for HwrecModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            HwrecModelKind::Bn => "bn",
            HwrecModelKind::Ae => "ae",
            HwrecModelKind::Random => "random",
        })
    }
}

impl FromStr for HwrecModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bn" | "bayesnet" => Ok(HwrecModelKind::Bn),
            "ae" | "autoencoder" => Ok(HwrecModelKind::Ae),
            "random" => Ok(HwrecModelKind::Random),
            other => Err(format!("unknown hardware model {other:?} (bn, ae, random)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HwrecConfig {
    pub model: HwrecModelKind,
    /// Its `seed` field is ignored in favour of `seed`.
    pub autoencoder: AutoencoderParams,
    pub max_vars: usize,
    pub train_fraction: f64,
    /// Independent runs averaged when scoring the random baseline.
    pub random_repeats: usize,
    pub seed: u64,
}

impl Default for HwrecConfig {
    fn default() -> Self {
        Self {
            model: HwrecModelKind::Bn,
            autoencoder: AutoencoderParams::default(),
            max_vars: DEFAULT_MAX_VARS,
            train_fraction: 0.7,
            random_repeats: 20,
            seed: 0,
        }
    }
}

#[derive(Debug)]
pub enum HwrecModel {
    Bn(BnRecommender),
    Ae(AutoencoderModel),
    Random(RandomRecommender),
}

const RANDOM_KIND: &str = "random-recommender";

impl HwrecModel {
    pub fn kind(&self) -> HwrecModelKind {
        match self {
            HwrecModel::Bn(_) => HwrecModelKind::Bn,
            HwrecModel::Ae(_) => HwrecModelKind::Ae,
            HwrecModel::Random(_) => HwrecModelKind::Random,
        }
    }

    fn inner(&self) -> &dyn Recommender {
        match self {
            HwrecModel::Bn(r) => r,
            HwrecModel::Ae(r) => r,
            HwrecModel::Random(r) => r,
        }
    }

    /// Best `k` absent slots for a partial configuration.
    pub fn complete(&self, partial: &HardwareConfig, k: usize) -> Result<Vec<(usize, f64)>, PipelineError> {
        if k == 0 {
            return Err(HwrecError::InvalidK.into());
        }
        Ok(recommend_top_k(&self.score(partial)?, k))
    }

    pub fn to_model_file(&self) -> ModelFile {
        match self {
            HwrecModel::Bn(r) => r.net.to_model_file(),
            HwrecModel::Ae(m) => m.to_model_file(),
            HwrecModel::Random(r) => ModelFile::new(RANDOM_KIND, json!({"level": r.level, "seed": r.seed})),
        }
    }

    pub fn from_model_file(file: ModelFile) -> Result<Self, PipelineError> {
        Ok(match file.kind.as_str() {
            BayesNet::KIND => HwrecModel::Bn(BnRecommender::new(BayesNet::from_model_file(file)?)?),
            AutoencoderModel::KIND => HwrecModel::Ae(AutoencoderModel::from_model_file(file)?),
            RANDOM_KIND => {
                #[derive(Deserialize)]
                struct Stored {
                    level: Level,
                    seed: u64,
                }
                let s: Stored = file.params()?;
                HwrecModel::Random(RandomRecommender::new(s.level, s.seed))
            }
            other => {
                return Err(ModelIoError::WrongKind {
                    expected: "bayesnet, autoencoder or random-recommender".into(),
                    found: other.into(),
                }
                .into())
            }
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        Ok(self.to_model_file().save(path)?)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        Self::from_model_file(ModelFile::load(path)?)
    }
}

impl Recommender for HwrecModel {
    fn name(&self) -> &str {
        self.inner().name()
    }

    fn level(&self) -> Level {
        self.inner().level()
    }

    fn score(&self, partial: &HardwareConfig) -> Result<BTreeMap<usize, f64>, HwrecError> {
        self.inner().score(partial)
    }
}

/// Unstratified split; configurations carry no label to stratify on.
pub fn split_configs(
    configs: &[HardwareConfig],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<HardwareConfig>, Vec<HardwareConfig>), PipelineError> {
    let keys = vec![""; configs.len()];
    let (train, test) = split_indices(&keys, &SplitSpec::new(train_fraction, seed, false)?)?;
    Ok((
        train.iter().map(|&i| configs[i]).collect(),
        test.iter().map(|&i| configs[i]).collect(),
    ))
}

pub fn train_hwrec(train: &[HardwareConfig], config: &HwrecConfig) -> Result<HwrecModel, PipelineError> {
    let level = train.first().ok_or(HwrecError::EmptyData)?.level;
    Ok(match config.model {
        HwrecModelKind::Bn => {
            let dag = learn_bn_structure(train, config.max_vars)?;
            log::info!("learned network with {} edges from {} configurations", dag.n_edges(), train.len());
            HwrecModel::Bn(BnRecommender::new(fit_bn_cpts(&dag, train)?)?)
        }
        HwrecModelKind::Ae => {
            let params = AutoencoderParams {
                seed: config.seed,
                ..config.autoencoder
            };
            HwrecModel::Ae(train_autoencoder(train, &params)?)
        }
        HwrecModelKind::Random => HwrecModel::Random(RandomRecommender::new(level, config.seed)),
    })
}

/// Leave-one-out precision@k over the test configurations with at least two
/// components (the others are skipped). The random baseline is averaged over
/// `random_repeats` independently seeded runs.
pub fn evaluate_hwrec(
    model: &HwrecModel,
    test: &[HardwareConfig],
    k_values: &[usize],
    random_repeats: usize,
) -> Result<PAtKReport, PipelineError> {
    let usable: Vec<HardwareConfig> = test.iter().filter(|c| c.count() >= 2).copied().collect();
    if usable.len() < test.len() {
        log::info!("skipping {} configurations with fewer than 2 components", test.len() - usable.len());
    }
    if usable.is_empty() {
        return Err(HwrecError::EmptyData.into());
    }
    let HwrecModel::Random(r) = model else {
        return Ok(evaluate_p_at_k(model, &usable, k_values)?);
    };
    let repeats = random_repeats.max(1);
    let mut total: BTreeMap<usize, f64> = BTreeMap::new();
    let mut report = None;
    for rep in 0..repeats {
        let seed = util::derive_seed(&format!("repeat-{rep}"), r.seed);
        let run = evaluate_p_at_k(&RandomRecommender::new(r.level, seed), &usable, k_values)?;
        for (k, p) in &run.p_at_k {
            *total.entry(*k).or_default() += p;
        }
        report = Some(run);
    }
    let mut report = report.expect("at least one repeat");
    report.p_at_k = total.into_iter().map(|(k, p)| (k, p / repeats as f64)).collect();
    Ok(report)
}

#[derive(Debug)]
pub struct HwrecRun {
    pub model: HwrecModel,
    pub report: PAtKReport,
    pub n_train: usize,
    pub n_test: usize,
}

/// Split, train and evaluate in one go.
pub fn run_hwrec(configs: &[HardwareConfig], config: &HwrecConfig, k_values: &[usize]) -> Result<HwrecRun, PipelineError> {
    let (train, test) = split_configs(configs, config.train_fraction, config.seed)?;
    let model = train_hwrec(&train, config)?;
    let report = evaluate_hwrec(&model, &test, k_values, config.random_repeats)?;
    Ok(HwrecRun {
        model,
        report,
        n_train: train.len(),
        n_test: test.len(),
    })
}

/// Builds a configuration from category names or raw component names known
/// to the taxonomy.
pub fn config_from_names<S: AsRef<str>>(names: &[S], taxonomy: &Taxonomy) -> Result<HardwareConfig, PipelineError> {
    let mut config = HardwareConfig::empty(taxonomy.level);
    let mut unknown = Vec::new();
    for name in names {
        let name = name.as_ref();
        match taxonomy.category_index(name).or_else(|| taxonomy.lookup(name)) {
            Some(i) => config.set(i, true),
            None => unknown.push(name.to_string()),
        }
    }
    if unknown.is_empty() {
        Ok(config)
    } else {
        Err(PipelineError::UnmappedComponents(unknown))
    }
}

#[derive(Serialize, Deserialize)]
struct ConfigRecord {
    components: Vec<String>,
}

/// Reads one `{"components": [..]}` record per line; blank lines are skipped.
pub fn read_hwconfigs<R: BufRead>(reader: R, taxonomy: &Taxonomy) -> Result<Vec<HardwareConfig>, PipelineError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ConfigRecord = serde_json::from_str(&line).map_err(|e| {
            PipelineError::Corpus(crate::corpus::CorpusError::MalformedRecord {
                line: i + 1,
                detail: e.to_string(),
            })
        })?;
        out.push(config_from_names(&record.components, taxonomy)?);
    }
    Ok(out)
}

/// Writes configurations as category-name records, one per line.
pub fn write_hwconfigs<W: Write>(configs: &[HardwareConfig], taxonomy: &Taxonomy, mut writer: W) -> Result<(), PipelineError> {
    for c in configs {
        let record = ConfigRecord {
            components: c.category_names(taxonomy).into_iter().map(str::to_string).collect(),
        };
        writeln!(writer, "{}", serde_json::to_string(&record)?)?;
    }
    Ok(())
}

/// Normalized hardware lists of the corpus documents that have any, with
/// counts of the raw names the taxonomy does not know.
pub fn hwconfigs_from_corpus(corpus: &Corpus, taxonomy: &Taxonomy) -> (Vec<HardwareConfig>, BTreeMap<String, usize>) {
    let mut configs = Vec::new();
    let mut unmapped = BTreeMap::new();
    for doc in corpus {
        if doc.raw_components.is_empty() {
            continue;
        }
        let (config, missing) = normalize_components(&doc.raw_components, taxonomy);
        for name in missing {
            *unmapped.entry(name).or_insert(0) += 1;
        }
        if !config.is_empty() {
            configs.push(config);
        }
    }
    (configs, unmapped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic_hwconfigs, l1_generator_network};

    fn configs(n: usize, seed: u64) -> Vec<HardwareConfig> {
        generate_synthetic_hwconfigs(&l1_generator_network(), n, seed).unwrap()
    }

    #[test]
    fn split_is_unstratified_and_complete() {
        let data = configs(100, 1);
        let (train, test) = split_configs(&data, 0.7, 3).unwrap();
        assert_eq!((train.len(), test.len()), (70, 30));
    }

    #[test]
    fn every_kind_trains_saves_and_loads() {
        let data = configs(400, 2);
        for kind in [HwrecModelKind::Bn, HwrecModelKind::Ae, HwrecModelKind::Random] {
            let config = HwrecConfig {
                model: kind,
                seed: 4,
                autoencoder: AutoencoderParams {
                    epochs: 20,
                    ..Default::default()
                },
                ..Default::default()
            };
            let run = run_hwrec(&data, &config, &[1, 3, 9]).unwrap();
            assert_eq!(run.report.p_at_k[&9], 1.0);
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("m.bin");
            run.model.save(&path).unwrap();
            let back = HwrecModel::load(&path).unwrap();
            assert_eq!(back.kind(), kind);
            assert_eq!(back.to_model_file().to_bytes(), run.model.to_model_file().to_bytes());
            let partial = HardwareConfig::from_slots(Level::L1, &[1]);
            if kind != HwrecModelKind::Random {
                assert_eq!(back.complete(&partial, 3).unwrap(), run.model.complete(&partial, 3).unwrap());
            }
        }
    }

    #[test]
    fn random_repeats_average_out() {
        let data = configs(600, 5);
        let model = HwrecModel::Random(RandomRecommender::new(Level::L1, 1));
        let report = evaluate_hwrec(&model, &data, &[1], 50).unwrap();
        let usable: Vec<_> = data.iter().filter(|c| c.count() >= 2).collect();
        // each trial of a c-component config ranks 10 - c candidates
        let trials: f64 = usable.iter().map(|c| c.count() as f64).sum();
        let expected: f64 = usable.iter().map(|c| c.count() as f64 / (10 - c.count()) as f64).sum::<f64>() / trials;
        assert!((report.p_at_k[&1] - expected).abs() < 0.02, "{} vs {expected}", report.p_at_k[&1]);
    }

    #[test]
    fn level2_bn_is_refused() {
        let data: Vec<HardwareConfig> = (0..20)
            .map(|i| HardwareConfig::from_slots(Level::L2, &[i % 45, (i + 7) % 45]))
            .collect();
        let err = train_hwrec(&data, &HwrecConfig::default()).unwrap_err();
        assert!(matches!(err, PipelineError::Hwrec(HwrecError::TooManyVariables(45))));
    }

    #[test]
    fn config_records_round_trip() {
        let tax = Taxonomy::builtin(Level::L1);
        let data = configs(20, 6);
        let mut buf = Vec::new();
        write_hwconfigs(&data, &tax, &mut buf).unwrap();
        assert_eq!(read_hwconfigs(buf.as_slice(), &tax).unwrap(), data);
        let bad = br#"{"components": ["Arduino", "warp core"]}"#;
        assert!(matches!(
            read_hwconfigs(&bad[..], &tax),
            Err(PipelineError::UnmappedComponents(names)) if names == ["warp core"]
        ));
    }
}
