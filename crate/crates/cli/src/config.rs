//! Pipeline configuration: one TOML section per stage, every field
//! defaulted, every stage seed explicit.

use lacuna_core::completion::DownsampleRule;
use lacuna_core::fingerprint::{FingerprintParams, DEFAULT_N_BITS, DEFAULT_RADIUS};
use lacuna_core::generator::{RefineConfig, SamplerConfig, DEFAULT_ORDER};
use lacuna_core::hash::derive_seed;
use lacuna_core::mapper::SpectralParams;
use lacuna_core::persistence::SeriesParams;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config does not parse: {0}")]
    Syntax(String),
    #[error("invalid config: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("unknown stage `{0}` in seed override")]
    UnknownSeedStage(String),
    #[error("seed override must look like stage=int, got `{0}`")]
    MalformedOverride(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Builtin {
    /// Two onium families whose Mapper graph holds a square lacuna.
    SquareFixture,
    /// The bundled 100-cation onium corpus.
    OniumCorpus,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    /// `SMILES<TAB>year<TAB>id` lines; relative paths resolve against the
    /// config file's directory.
    pub path: Option<PathBuf>,
    pub builtin: Option<Builtin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FingerprintSection {
    pub radius: u32,
    pub n_bits: usize,
    /// Bins of the Dice-distance histogram over [0, 1].
    pub histogram_bins: usize,
}

impl Default for FingerprintSection {
    fn default() -> Self {
        FingerprintSection {
            radius: DEFAULT_RADIUS,
            n_bits: DEFAULT_N_BITS,
            histogram_bins: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSection {
    pub n_trees: usize,
    /// Subsample size, capped at the dataset size.
    pub max_samples: usize,
}

impl Default for ForestSection {
    fn default() -> Self {
        ForestSection {
            n_trees: 100,
            max_samples: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PersistenceSection {
    pub n_cuts: usize,
    pub threshold: f64,
    pub max_degree: u8,
    pub max_scale: Option<f64>,
}

impl Default for PersistenceSection {
    fn default() -> Self {
        PersistenceSection {
            n_cuts: 10,
            threshold: 0.1,
            max_degree: 1,
            max_scale: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverSection {
    pub n_intervals: usize,
    pub overlap: f64,
}

impl Default for CoverSection {
    fn default() -> Self {
        CoverSection {
            n_intervals: 30,
            overlap: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralSection {
    pub k: usize,
    pub gamma: f64,
    pub kmeans_restarts: usize,
    pub eigen_tolerance: f64,
    pub min_gap_ratio: f64,
}

impl Default for SpectralSection {
    fn default() -> Self {
        let d = SpectralParams::default();
        SpectralSection {
            k: d.k,
            gamma: d.gamma,
            kmeans_restarts: d.kmeans_restarts,
            eigen_tolerance: d.eigen_tolerance,
            min_gap_ratio: d.min_gap_ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LacunaSection {
    /// Target edges as node-id pairs of the mapper-stage graph. Empty picks
    /// the first square lacuna.
    pub edges: Vec<[usize; 2]>,
    /// Lens interval `[lo, hi]`; absent derives it from the edge endpoints.
    pub interval: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSection {
    pub order: usize,
    pub max_placeholders: usize,
    pub placeholder_reps: usize,
    pub rounds: usize,
    pub batch: usize,
    pub elite_fraction: f64,
    pub weight: f64,
    pub samples: usize,
    pub tau: f64,
    pub temperature: f64,
    pub max_len: usize,
    pub fragment_budget: usize,
    pub max_attempts: usize,
}

impl Default for GeneratorSection {
    fn default() -> Self {
        let r = RefineConfig::default();
        let s = SamplerConfig::default();
        GeneratorSection {
            order: DEFAULT_ORDER,
            max_placeholders: 2,
            placeholder_reps: 3,
            rounds: r.rounds,
            batch: r.batch,
            elite_fraction: r.elite_fraction,
            weight: r.weight,
            samples: 2000,
            tau: 0.01,
            temperature: s.temperature,
            max_len: s.max_len,
            fragment_budget: s.fragment_budget,
            max_attempts: s.max_attempts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scorer {
    Tanimoto,
    Lens,
}

impl Scorer {
    pub fn name(self) -> &'static str {
        match self {
            Scorer::Tanimoto => "tanimoto",
            Scorer::Lens => "lens",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompleteSection {
    pub scorers: Vec<Scorer>,
    pub neighbor_range: [f64; 2],
    pub downsample: Vec<DownsampleRule>,
}

impl Default for CompleteSection {
    fn default() -> Self {
        CompleteSection {
            scorers: vec![Scorer::Tanimoto, Scorer::Lens],
            neighbor_range: [0.0, 0.6],
            downsample: vec![DownsampleRule::MaxNeighbors(300), DownsampleRule::MaxNeighbors(200)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub anomaly: u64,
    pub mapper: u64,
    pub train: u64,
    pub refine: u64,
    pub sample: u64,
}

impl Seeds {
    pub const STAGES: [&'static str; 5] = ["anomaly", "mapper", "train", "refine", "sample"];

    /// The streams used by the core square fixture for `seed`.
    pub fn derived(seed: u64) -> Self {
        Seeds {
            anomaly: derive_seed(seed, 1),
            mapper: derive_seed(seed, 2),
            refine: derive_seed(seed, 3),
            sample: derive_seed(seed, 4),
            train: derive_seed(seed, 5),
        }
    }

    pub fn set(&mut self, stage: &str, value: u64) -> Result<(), ConfigError> {
        let slot = match stage {
            "anomaly" => &mut self.anomaly,
            "mapper" => &mut self.mapper,
            "train" => &mut self.train,
            "refine" => &mut self.refine,
            "sample" => &mut self.sample,
            _ => return Err(ConfigError::UnknownSeedStage(stage.to_string())),
        };
        *slot = value;
        Ok(())
    }
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds::derived(0)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset: DatasetSection,
    pub fingerprint: FingerprintSection,
    pub forest: ForestSection,
    pub persistence: PersistenceSection,
    pub cover: CoverSection,
    pub spectral: SpectralSection,
    pub lacuna: LacunaSection,
    pub generator: GeneratorSection,
    pub complete: CompleteSection,
    pub seeds: Seeds,
}

impl PipelineConfig {
    /// Settings under which the pipeline reproduces the core square fixture
    /// for `seed`.
    pub fn square_fixture(seed: u64) -> Self {
        PipelineConfig {
            dataset: DatasetSection {
                path: None,
                builtin: Some(Builtin::SquareFixture),
            },
            cover: CoverSection {
                n_intervals: 5,
                overlap: 0.5,
            },
            spectral: SpectralSection {
                min_gap_ratio: 0.0,
                ..Default::default()
            },
            generator: GeneratorSection {
                rounds: 3,
                batch: 256,
                ..Default::default()
            },
            complete: CompleteSection {
                downsample: vec![DownsampleRule::Quantile(0.9), DownsampleRule::Quantile(0.6)],
                ..Default::default()
            },
            seeds: Seeds::derived(seed),
            ..Default::default()
        }
    }

    pub fn fingerprint_params(&self) -> FingerprintParams {
        FingerprintParams {
            radius: self.fingerprint.radius,
            n_bits: self.fingerprint.n_bits,
        }
    }

    pub fn spectral_params(&self) -> SpectralParams {
        SpectralParams {
            k: self.spectral.k,
            gamma: self.spectral.gamma,
            kmeans_restarts: self.spectral.kmeans_restarts,
            eigen_tolerance: self.spectral.eigen_tolerance,
            seed: self.seeds.mapper,
            min_gap_ratio: self.spectral.min_gap_ratio,
        }
    }

    pub fn series_params(&self) -> SeriesParams {
        SeriesParams {
            max_degree: self.persistence.max_degree,
            threshold: self.persistence.threshold,
            max_scale: self.persistence.max_scale,
        }
    }

    pub fn refine_config(&self) -> RefineConfig {
        RefineConfig {
            rounds: self.generator.rounds,
            batch: self.generator.batch,
            elite_fraction: self.generator.elite_fraction,
            weight: self.generator.weight,
        }
    }

    pub fn sampler_config(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            max_len: self.generator.max_len,
            temperature: self.generator.temperature,
            seed,
            max_attempts: self.generator.max_attempts,
            fragment_budget: self.generator.fragment_budget,
        }
    }

    pub fn neighbor_range(&self) -> (f64, f64) {
        (self.complete.neighbor_range[0], self.complete.neighbor_range[1])
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errs = Vec::new();
        let mut check = |ok: bool, msg: &str| {
            if !ok {
                errs.push(msg.to_string());
            }
        };
        check(
            self.dataset.path.is_some() != self.dataset.builtin.is_some(),
            "dataset: set exactly one of `path` and `builtin`",
        );
        check(
            self.fingerprint.n_bits >= 64 && self.fingerprint.n_bits.is_power_of_two(),
            "fingerprint.n_bits: must be a power of two >= 64",
        );
        check(
            self.fingerprint.histogram_bins >= 1,
            "fingerprint.histogram_bins: must be >= 1",
        );
        check(self.forest.n_trees >= 1, "forest.n_trees: must be >= 1");
        check(self.forest.max_samples >= 2, "forest.max_samples: must be >= 2");
        check(self.persistence.n_cuts >= 1, "persistence.n_cuts: must be >= 1");
        check(
            self.persistence.max_degree <= 1,
            "persistence.max_degree: must be 0 or 1",
        );
        check(self.persistence.threshold >= 0.0, "persistence.threshold: must be >= 0");
        check(self.cover.n_intervals >= 1, "cover.n_intervals: must be >= 1");
        check(
            (0.0..1.0).contains(&self.cover.overlap),
            "cover.overlap: must lie in [0, 1)",
        );
        check(self.spectral.k >= 1, "spectral.k: must be >= 1");
        check(self.spectral.gamma > 0.0, "spectral.gamma: must be > 0");
        check(
            self.spectral.kmeans_restarts >= 1,
            "spectral.kmeans_restarts: must be >= 1",
        );
        check(
            self.spectral.min_gap_ratio >= 0.0,
            "spectral.min_gap_ratio: must be >= 0",
        );
        if let Some([lo, hi]) = self.lacuna.interval {
            check(lo < hi, "lacuna.interval: lo must be below hi");
        }
        check(
            self.lacuna.edges.iter().all(|[u, v]| u != v),
            "lacuna.edges: an edge joins two distinct nodes",
        );
        let g = &self.generator;
        check(g.order >= 1, "generator.order: must be >= 1");
        check(g.rounds >= 1, "generator.rounds: must be >= 1");
        check(g.batch >= 1, "generator.batch: must be >= 1");
        check(
            g.elite_fraction > 0.0 && g.elite_fraction <= 1.0,
            "generator.elite_fraction: must lie in (0, 1]",
        );
        check(g.weight > 0.0, "generator.weight: must be > 0");
        check(g.tau > 0.0, "generator.tau: must be > 0");
        check(g.temperature > 0.0, "generator.temperature: must be > 0");
        check(g.max_placeholders >= 1, "generator.max_placeholders: must be >= 1");
        check(g.placeholder_reps >= 1, "generator.placeholder_reps: must be >= 1");
        check(
            !self.complete.scorers.is_empty(),
            "complete.scorers: list at least one scorer",
        );
        let [a, b] = self.complete.neighbor_range;
        check(
            0.0 <= a && a <= b && b <= 1.0,
            "complete.neighbor_range: need 0 <= lo <= hi <= 1",
        );
        check(
            self.complete
                .downsample
                .iter()
                .all(|r| !matches!(r, DownsampleRule::Quantile(q) if !(0.0..=1.0).contains(q))),
            "complete.downsample: quantiles must lie in [0, 1]",
        );
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errs))
        }
    }

    /// Applies `stage=int` overrides to the seed table.
    pub fn apply_seed_overrides(&mut self, overrides: &[String]) -> Result<(), ConfigError> {
        for o in overrides {
            let (stage, value) = o
                .split_once('=')
                .ok_or_else(|| ConfigError::MalformedOverride(o.clone()))?;
            let value: u64 = value
                .trim()
                .parse()
                .map_err(|_| ConfigError::MalformedOverride(o.clone()))?;
            self.seeds.set(stage.trim(), value)?;
        }
        Ok(())
    }
}

/// Reads, defaults and validates a config file. A relative dataset path is
/// made relative to the file's directory.
pub fn validate_config(path: &Path) -> Result<PipelineConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut cfg = PipelineConfig::from_toml(&text)?;
    if let Some(p) = &cfg.dataset.path {
        if p.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.dataset.path = Some(dir.join(p));
            }
        }
    }
    Ok(cfg)
}
