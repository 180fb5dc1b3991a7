//! Synthetic square lacuna. Two onium families (triarylsulfonium and
//! diaryliodonium) with disjoint substituent sets form two parallel chains
//! over the lens, so a middle interval pair holds four nodes joined by two
//! disjoint edges.

use crate::anomaly::{AnomalyError, IsolationForest};
use crate::chem::parse_smiles;
use crate::completion::{
    check_restoration, compute_target_interval, filter_by_score, placeholder_scaffolds, rebuild_with_candidates,
    reference_scaffolds, remove_edge_intersections, square_lacunae, CompletionError, CompletionReport, DownsampleRule,
    LacunaSpec, RepairContext, Restoration, ScoreInterval,
};
use crate::dataset::{Dataset, DatasetError};
use crate::fingerprint::{BitFingerprint, FingerprintParams};
use crate::generator::{
    refine_policy, sample_batch, train_policy, CandidateScorer, GenerationPolicy, GeneratorError, RefineConfig,
    SamplerConfig, ScoringFunction,
};
use crate::hash::derive_seed;
use crate::mapper::{build_cover, build_mapper, Cover, MapperError, MapperGraph, SpectralParams};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SULFONIUM_SUBSTITUENTS: [&str; 10] = ["", "C", "CC", "CCC", "OC", "OCC", "C(C)C", "C(C)(C)C", "SC", "OC(C)C"];
pub const IODONIUM_SUBSTITUENTS: [&str; 10] = [
    "",
    "F",
    "Cl",
    "Br",
    "C(F)(F)F",
    "C#N",
    "N(=O)=O",
    "C(=O)C",
    "C(=O)OC",
    "S(=O)(=O)C",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FixtureError {
    #[error("the Mapper graph has no square lacuna")]
    NoSquare,
    #[error("no reference scaffolds are shared by the withheld and remaining records")]
    NoScaffolds,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Anomaly(#[from] AnomalyError),
    #[error(transparent)]
    Mapper(#[from] MapperError),
    #[error(transparent)]
    Completion(#[from] CompletionError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
}

fn ring(sub: &str, digit: u32) -> String {
    if sub.is_empty() {
        format!("c{digit}ccccc{digit}")
    } else {
        format!("c{digit}ccc({sub})cc{digit}")
    }
}

/// 55 para-substituted triarylsulfonium cations followed by 55
/// para-substituted diaryliodonium cations; each family takes every
/// unordered substituent pair.
pub fn square_library() -> Vec<String> {
    let mut out = Vec::with_capacity(110);
    for (i, a) in SULFONIUM_SUBSTITUENTS.iter().enumerate() {
        for b in &SULFONIUM_SUBSTITUENTS[i..] {
            out.push(format!("{}[S+]({})c3ccccc3", ring(a, 1), ring(b, 2)));
        }
    }
    for (i, a) in IODONIUM_SUBSTITUENTS.iter().enumerate() {
        for b in &IODONIUM_SUBSTITUENTS[i..] {
            out.push(format!("{}[I+]{}", ring(a, 1), ring(b, 2)));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureConfig {
    pub seed: u64,
    pub n_intervals: usize,
    pub overlap: f64,
    pub order: usize,
    pub max_placeholders: usize,
    pub placeholder_reps: usize,
    pub refine: RefineConfig,
    pub samples: usize,
    pub tau: f64,
    pub neighbor_range: (f64, f64),
    pub downsample: Vec<DownsampleRule>,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        FixtureConfig {
            seed: 0,
            n_intervals: 5,
            overlap: 0.5,
            order: 6,
            max_placeholders: 2,
            placeholder_reps: 3,
            refine: RefineConfig {
                rounds: 3,
                batch: 256,
                elite_fraction: 0.2,
                weight: 1.0,
            },
            samples: 2000,
            tau: 0.01,
            neighbor_range: (0.0, 0.6),
            downsample: vec![DownsampleRule::Quantile(0.9), DownsampleRule::Quantile(0.6)],
        }
    }
}

/// The fixture after surgery, before any generation.
#[derive(Debug, Clone)]
pub struct SquareLacuna {
    pub dataset: Dataset,
    pub forest: IsolationForest,
    pub lens: Vec<f64>,
    pub cover: Cover,
    pub clusterer: SpectralParams,
    pub graph: MapperGraph,
    /// `[u1, u2, v1, v2]`; the target edges are `(u1, v2)` and `(u2, v1)`.
    pub square: [usize; 4],
    pub reduced: Dataset,
    pub reduced_fps: Vec<BitFingerprint>,
    pub kept: Vec<usize>,
    pub spec: LacunaSpec,
    pub interval: ScoreInterval,
    pub target: f64,
    /// Restoration of the reduced dataset with nothing added.
    pub post_surgery: Restoration,
}

impl SquareLacuna {
    pub fn build(cfg: &FixtureConfig) -> Result<Self, FixtureError> {
        let params = FingerprintParams::default();
        let dataset = Dataset::from_smiles(&square_library(), params)?;
        let fps = dataset.fingerprints();
        let forest = IsolationForest::fit_default(&fps, derive_seed(cfg.seed, 1))?;
        let lens: Vec<f64> = forest.batch_scores(&fps)?.into_iter().map(|s| s.0).collect();
        let cover = build_cover(&lens, cfg.n_intervals, cfg.overlap)?;
        // fingerprint families never pass the gap rule, so every level set splits
        let clusterer = SpectralParams {
            min_gap_ratio: 0.0,
            seed: derive_seed(cfg.seed, 2),
            ..Default::default()
        };
        let graph = build_mapper(&fps[..], &lens, &cover, &clusterer)?;
        let square = *square_lacunae(&graph).first().ok_or(FixtureError::NoSquare)?;
        let [u1, u2, v1, v2] = square;
        let (reduced, kept, spec) = remove_edge_intersections(&graph, &dataset, &[(u1, v2), (u2, v1)])?;
        let (interval, target) = compute_target_interval(&graph, &[u1, u2], &[v1, v2], &lens)?;
        let reduced_fps = reduced.fingerprints();
        let rebuilt = rebuild_with_candidates(&reduced_fps, &[], &forest, &cover, &clusterer)?;
        let origin: Vec<Option<usize>> = kept.iter().map(|&k| Some(k)).collect();
        let post_surgery = check_restoration(&graph, &rebuilt, &origin, &spec);
        Ok(SquareLacuna {
            dataset,
            forest,
            lens,
            cover,
            clusterer,
            graph,
            square,
            reduced,
            reduced_fps,
            kept,
            spec,
            interval,
            target,
            post_surgery,
        })
    }

    pub fn context(&self) -> RepairContext<'_, SpectralParams> {
        RepairContext {
            original: &self.graph,
            spec: &self.spec,
            reduced: &self.reduced_fps,
            kept: &self.kept,
            forest: &self.forest,
            cover: &self.cover,
            clusterer: &self.clusterer,
        }
    }

    /// Placeholder scaffolds built from the shared reference scaffolds, and
    /// the reference scaffold fingerprints as Tanimoto queries.
    pub fn scaffolds(&self, cfg: &FixtureConfig) -> Result<(Vec<String>, Vec<BitFingerprint>), FixtureError> {
        let refs = reference_scaffolds(&self.dataset, &self.graph, &self.square, &self.spec.removed);
        if refs.is_empty() {
            return Err(FixtureError::NoScaffolds);
        }
        let placeholders = placeholder_scaffolds(
            &refs,
            cfg.max_placeholders,
            cfg.placeholder_reps,
            derive_seed(cfg.seed, 5),
        );
        let params = self.dataset.params;
        let queries = refs
            .iter()
            .filter_map(|s| parse_smiles(&s.smiles).ok().and_then(|m| params.fingerprint(&m).ok()))
            .collect();
        Ok((placeholders, queries))
    }

    pub fn scorers(&self, queries: Vec<BitFingerprint>, tau: f64) -> Vec<(String, ScoringFunction)> {
        let params = self.dataset.params;
        vec![
            ("tanimoto".to_string(), ScoringFunction::Tanimoto { queries, params }),
            (
                "lens".to_string(),
                ScoringFunction::Lens {
                    target: self.target,
                    forest: self.forest.clone(),
                    tau,
                    params,
                },
            ),
        ]
    }

    pub fn policy(&self, order: usize) -> Result<GenerationPolicy, FixtureError> {
        let corpus: Vec<String> = self.reduced.smiles().into_iter().map(str::to_string).collect();
        Ok(train_policy(&corpus, order)?)
    }
}

/// Refines `policy` against `scorer`, then draws `cfg.samples` constrained
/// samples. Failed draws are dropped; duplicates are kept.
pub fn generate_candidates(
    policy: &GenerationPolicy,
    placeholders: &[String],
    scorer: &dyn CandidateScorer,
    cfg: &FixtureConfig,
) -> Result<Vec<String>, FixtureError> {
    let sampler = SamplerConfig {
        seed: derive_seed(cfg.seed, 3),
        ..Default::default()
    };
    let refined = refine_policy(policy, placeholders, scorer, &cfg.refine, &sampler)?;
    let sampler = SamplerConfig {
        seed: derive_seed(cfg.seed, 4),
        ..Default::default()
    };
    Ok(sample_batch(&refined.policy, placeholders, cfg.samples, &sampler)
        .into_iter()
        .filter_map(Result::ok)
        .collect())
}

/// Fingerprints of the candidates whose lens lies inside the target interval.
pub fn filter_candidates(candidates: &[String], lacuna: &SquareLacuna) -> Result<Vec<BitFingerprint>, FixtureError> {
    let params = lacuna.dataset.params;
    let fps: Vec<BitFingerprint> = candidates
        .iter()
        .filter_map(|s| parse_smiles(s).ok().and_then(|m| params.fingerprint(&m).ok()))
        .collect();
    let keep = filter_by_score(&fps, &lacuna.forest, &lacuna.interval)?;
    Ok(keep.into_iter().map(|i| fps[i].clone()).collect())
}

#[derive(Debug, Clone)]
pub struct FixtureRun {
    pub lacuna: SquareLacuna,
    pub placeholders: Vec<String>,
    /// One report per scorer, in the order tanimoto, lens.
    pub reports: Vec<(String, CompletionReport)>,
}

/// Surgery, generation with both scorers, filtering, downsampling and
/// restoration checks.
pub fn run_square_fixture(cfg: &FixtureConfig) -> Result<FixtureRun, FixtureError> {
    let lacuna = SquareLacuna::build(cfg)?;
    let (placeholders, queries) = lacuna.scaffolds(cfg)?;
    let policy = lacuna.policy(cfg.order)?;
    let ctx = lacuna.context();
    let mut reports = Vec::new();
    for (name, scorer) in lacuna.scorers(queries, cfg.tau) {
        let candidates = generate_candidates(&policy, &placeholders, &scorer, cfg)?;
        let filtered = filter_candidates(&candidates, &lacuna)?;
        let rows = ctx.evaluate_variants(&filtered, &cfg.downsample, cfg.neighbor_range)?;
        reports.push((
            name,
            CompletionReport {
                target_edges: lacuna.spec.target_edges.clone(),
                removed_per_edge: lacuna.spec.removed_per_edge.clone(),
                interval: lacuna.interval,
                rows,
            },
        ));
    }
    Ok(FixtureRun {
        lacuna,
        placeholders,
        reports,
    })
}
