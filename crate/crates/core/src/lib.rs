//! Topology-driven detection and generative repair of lacunae in molecular
//! datasets.
//!
//! The pipeline: parse SMILES ([`chem`]), fingerprint and measure Dice
//! distances ([`fingerprint`]), score records with an isolation forest
//! ([`anomaly`]) to obtain a lens, summarize shape with Vietoris-Rips
//! persistence ([`persistence`]) and Mapper graphs ([`mapper`]), cut a lacuna
//! and verify its repair ([`completion`]) using scaffold-constrained
//! generation ([`generator`]).

pub mod anomaly;
pub mod chem;
pub mod completion;
pub mod dataset;
pub mod fingerprint;
pub mod fixture;
pub mod generator;
pub mod hash;
pub mod mapper;
pub mod persistence;
