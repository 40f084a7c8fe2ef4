use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CorpusError;

const BUILTIN_L1: &str = include_str!("../../data/taxonomy_l1.json");
const BUILTIN_L2: &str = include_str!("../../data/taxonomy_l2.json");

/// Taxonomy granularity: 9 functional categories or 45 refined ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    L1,
    L2,
}

impl Level {
    pub fn n_categories(self) -> usize {
        match self {
            Level::L1 => 9,
            Level::L2 => 45,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::L1 => "L1",
            Level::L2 => "L2",
        })
    }
}

impl FromStr for Level {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "L1" | "l1" => Ok(Level::L1),
            "L2" | "l2" => Ok(Level::L2),
            other => Err(CorpusError::InvalidTaxonomy(format!("unknown level {other:?}"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TaxonomyFile {
    #[serde(default = "default_version")]
    version: u32,
    level: Level,
    categories: Vec<String>,
    mapping: BTreeMap<String, String>,
}

fn default_version() -> u32 {
    1
}

/// Ordered category list plus a lookup table from normalized raw component
/// names to category indices. Slot `i` of a [`HardwareConfig`] always refers
/// to `categories[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    pub version: u32,
    pub level: Level,
    categories: Vec<String>,
    mapping: BTreeMap<String, usize>,
}

fn normalize_name(raw: &str) -> String {
    raw.trim().to_lowercase()
}

impl Taxonomy {
    /// The shipped taxonomy for `level`, including the seed mapping table.
    pub fn builtin(level: Level) -> Self {
        let text = match level {
            Level::L1 => BUILTIN_L1,
            Level::L2 => BUILTIN_L2,
        };
        Self::from_json(text).expect("shipped taxonomy files are valid")
    }

    pub fn new(
        level: Level,
        categories: Vec<String>,
        mapping: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, CorpusError> {
        if categories.len() != level.n_categories() {
            return Err(CorpusError::InvalidTaxonomy(format!(
                "level {level} needs {} categories, got {}",
                level.n_categories(),
                categories.len()
            )));
        }
        let mut tax = Self {
            version: 1,
            level,
            categories,
            mapping: BTreeMap::new(),
        };
        for (raw, category) in mapping {
            tax.add_mapping(&raw, &category)?;
        }
        Ok(tax)
    }

    pub fn from_json(text: &str) -> Result<Self, CorpusError> {
        let file: TaxonomyFile = serde_json::from_str(text)?;
        let mut tax = Self::new(file.level, file.categories, file.mapping)?;
        tax.version = file.version;
        Ok(tax)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let file = TaxonomyFile {
            version: self.version,
            level: self.level,
            categories: self.categories.clone(),
            mapping: self
                .mapping
                .iter()
                .map(|(k, &v)| (k.clone(), self.categories[v].clone()))
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("taxonomy serialization cannot fail")
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn category_index(&self, name: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == name)
    }

    /// Adds or replaces a raw-name mapping; the target must be a known category.
    pub fn add_mapping(&mut self, raw: &str, category: &str) -> Result<(), CorpusError> {
        let idx = self
            .category_index(category)
            .ok_or_else(|| CorpusError::UnknownCategory(category.to_string()))?;
        self.mapping.insert(normalize_name(raw), idx);
        Ok(())
    }

    pub fn lookup(&self, raw: &str) -> Option<usize> {
        self.mapping.get(&normalize_name(raw)).copied()
    }

    pub fn mapping_len(&self) -> usize {
        self.mapping.len()
    }

    /// Builds a config from category names.
    pub fn config_from_categories<S: AsRef<str>>(
        &self,
        names: &[S],
    ) -> Result<HardwareConfig, CorpusError> {
        let mut config = HardwareConfig::empty(self.level);
        for name in names {
            let idx = self
                .category_index(name.as_ref())
                .ok_or_else(|| CorpusError::UnknownCategory(name.as_ref().to_string()))?;
            config.set(idx, true);
        }
        Ok(config)
    }
}

/// Multi-hot presence vector over a taxonomy level (at most 45 slots, so a
/// `u64` mask suffices).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HardwareConfig {
    pub level: Level,
    bits: u64,
}

impl HardwareConfig {
    pub fn empty(level: Level) -> Self {
        Self { level, bits: 0 }
    }

    pub fn from_bits(level: Level, bits: u64) -> Self {
        let mask = (1u64 << level.n_categories()) - 1;
        Self {
            level,
            bits: bits & mask,
        }
    }

    pub fn from_slots(level: Level, slots: &[usize]) -> Self {
        let mut config = Self::empty(level);
        for &s in slots {
            config.set(s, true);
        }
        config
    }

    pub fn len(&self) -> usize {
        self.level.n_categories()
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn get(&self, slot: usize) -> bool {
        slot < self.len() && self.bits >> slot & 1 == 1
    }

    pub fn set(&mut self, slot: usize, present: bool) {
        assert!(slot < self.len(), "slot {slot} out of range for {}", self.level);
        if present {
            self.bits |= 1 << slot;
        } else {
            self.bits &= !(1 << slot);
        }
    }

    pub fn count(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn present(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.get(i))
    }

    pub fn absent(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| !self.get(i))
    }

    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.len()).map(|i| if self.get(i) { 1.0 } else { 0.0 }).collect()
    }

    pub fn category_names<'t>(&self, tax: &'t Taxonomy) -> Vec<&'t str> {
        self.present().map(|i| tax.categories()[i].as_str()).collect()
    }
}

/// Maps raw component names onto the taxonomy. Names without a mapping entry
/// are returned (in input order, deduplicated) rather than dropped.
pub fn normalize_components<S: AsRef<str>>(
    raw: &[S],
    tax: &Taxonomy,
) -> (HardwareConfig, Vec<String>) {
    let mut config = HardwareConfig::empty(tax.level);
    let mut unmapped: Vec<String> = Vec::new();
    for name in raw {
        match tax.lookup(name.as_ref()) {
            Some(idx) => config.set(idx, true),
            None => {
                let name = name.as_ref().to_string();
                if !unmapped.contains(&name) {
                    unmapped.push(name);
                }
            }
        }
    }
    (config, unmapped)
}
