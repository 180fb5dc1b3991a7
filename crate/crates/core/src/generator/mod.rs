//! Scaffold-constrained SMILES generation from an order-n token model, with
//! similarity and lens scoring and score-guided refinement.

mod policy;
mod postprocess;
mod sample;
mod score;

pub use policy::{
    train_policy, GenerationPolicy, TokenClass, TokenVocab, DEFAULT_ORDER, END, END_ID, GO, GO_ID, PLACEHOLDER,
    PLACEHOLDER_ID, UNKNOWN, UNKNOWN_ID,
};
pub use postprocess::{postprocess, validate_candidate};
pub use sample::{
    draw_next, open_positions, sample_batch, sample_scaffold_constrained, sample_unconstrained, ConstrainedSample,
    OpenKind, OpenPosition, SamplerConfig,
};
pub use score::{refine_policy, score_candidates, CandidateScorer, RefineConfig, RefineOutcome, ScoringFunction};

use crate::chem::ChemError;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeneratorError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("model order must be at least 1")]
    InvalidOrder,
    #[error("corpus entry {0} does not tokenize: {1}")]
    InvalidCorpusEntry(usize, String),
    #[error("malformed policy: {0}")]
    MalformedPolicy(String),
    #[error("sample exceeded the maximum length")]
    MaxLengthExceeded,
    #[error("an open position exceeded its fragment budget")]
    FragmentBudgetExceeded,
    #[error("no parseable sample within the attempt limit")]
    UnparseableResult,
    #[error("sample could not be repaired into valid SMILES")]
    Unrepairable,
    #[error("invalid scaffold: {0}")]
    Scaffold(#[from] ChemError),
    #[error("a refinement round produced no valid samples")]
    NoValidSamples,
    #[error("invalid refinement configuration")]
    InvalidRefineConfig,
}
