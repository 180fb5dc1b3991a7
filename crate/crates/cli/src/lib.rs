//! Staged command-line pipeline and local HTTP service over `lacuna-core`.

pub mod config;
pub mod histogram;
pub mod pipeline;
pub mod service;
