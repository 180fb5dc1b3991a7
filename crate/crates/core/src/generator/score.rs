use super::policy::GenerationPolicy;
use super::postprocess::validate_candidate;
use super::sample::{sample_batch, SamplerConfig};
use super::GeneratorError;
use crate::anomaly::IsolationForest;
use crate::chem::tokenize;
use crate::fingerprint::{tanimoto_similarity, BitFingerprint, FingerprintParams};
use crate::hash::derive_seed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Scores a candidate SMILES; higher is better.
pub trait CandidateScorer: Sync {
    fn score(&self, smiles: &str) -> f64;
}

impl<F: Fn(&str) -> f64 + Sync> CandidateScorer for F {
    fn score(&self, smiles: &str) -> f64 {
        self(smiles)
    }
}

#[derive(Debug, Clone)]
pub enum ScoringFunction {
    /// Maximum Tanimoto similarity to any query.
    Tanimoto {
        queries: Vec<BitFingerprint>,
        params: FingerprintParams,
    },
    /// `exp(-|score - target| / tau)` under a fixed forest.
    Lens {
        target: f64,
        forest: IsolationForest,
        tau: f64,
        params: FingerprintParams,
    },
}

impl CandidateScorer for ScoringFunction {
    fn score(&self, smiles: &str) -> f64 {
        let Ok(mol) = validate_candidate(smiles) else {
            return 0.0;
        };
        match self {
            ScoringFunction::Tanimoto { queries, params } => {
                let Ok(fp) = params.fingerprint(&mol) else {
                    return 0.0;
                };
                queries
                    .iter()
                    .filter_map(|q| tanimoto_similarity(&fp, q).ok())
                    .fold(0.0, f64::max)
            }
            ScoringFunction::Lens {
                target,
                forest,
                tau,
                params,
            } => match params.fingerprint(&mol).map(|fp| forest.score(&fp)) {
                Ok(Ok(s)) => (-(s.0 - target).abs() / tau).exp(),
                _ => 0.0,
            },
        }
    }
}

pub fn score_candidates(candidates: &[String], scorer: &dyn CandidateScorer) -> Vec<f64> {
    candidates.par_iter().map(|c| scorer.score(c)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub rounds: usize,
    pub batch: usize,
    pub elite_fraction: f64,
    /// Count weight of each elite sequence added to the base policy.
    pub weight: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            rounds: 10,
            batch: 512,
            elite_fraction: 0.2,
            weight: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub policy: GenerationPolicy,
    /// Mean elite score per round.
    pub elite_means: Vec<f64>,
    /// Best candidates seen across rounds, descending by score.
    pub elites: Vec<(String, f64)>,
}

/// Cross-entropy refinement. Each round samples `batch` candidates from the
/// current policy, keeps the top `elite_fraction` of that round, and refits
/// the base counts plus every elite accumulated so far at weight `weight`.
pub fn refine_policy(
    policy: &GenerationPolicy,
    scaffolds: &[String],
    scorer: &dyn CandidateScorer,
    refine: &RefineConfig,
    sampler: &SamplerConfig,
) -> Result<RefineOutcome, GeneratorError> {
    if refine.rounds == 0
        || refine.batch == 0
        || refine.elite_fraction.is_nan()
        || refine.elite_fraction <= 0.0
        || refine.elite_fraction > 1.0
        || refine.weight.is_nan()
        || refine.weight <= 0.0
    {
        return Err(GeneratorError::InvalidRefineConfig);
    }
    let mut current = policy.clone();
    let mut accumulated: Vec<Vec<String>> = Vec::new();
    let mut best: Vec<(String, f64)> = Vec::new();
    let mut elite_means = Vec::with_capacity(refine.rounds);
    for round in 0..refine.rounds {
        let cfg = SamplerConfig {
            seed: derive_seed(sampler.seed, round as u64),
            ..sampler.clone()
        };
        let samples: Vec<String> = sample_batch(&current, scaffolds, refine.batch, &cfg)
            .into_iter()
            .filter_map(Result::ok)
            .collect();
        if samples.is_empty() {
            return Err(GeneratorError::NoValidSamples);
        }
        let n_elite = ((refine.elite_fraction * samples.len() as f64).ceil() as usize).max(1);
        let scores = score_candidates(&samples, scorer);
        let mut scored: Vec<(String, f64)> = samples.into_iter().zip(scores).collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(n_elite);
        elite_means.push(scored.iter().map(|e| e.1).sum::<f64>() / n_elite as f64);
        accumulated.extend(
            scored
                .iter()
                .filter_map(|(s, _)| tokenize(s).ok())
                .map(|ts| ts.tokens.into_iter().map(|t| t.text).collect()),
        );
        best.extend(scored);
        best.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        best.dedup_by(|a, b| a.0 == b.0);
        best.truncate(n_elite);
        current = policy.with_added(&accumulated, refine.weight);
    }
    Ok(RefineOutcome {
        policy: current,
        elite_means,
        elites: best,
    })
}
