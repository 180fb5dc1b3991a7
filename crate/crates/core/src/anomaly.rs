//! Isolation forest over fingerprint bit vectors.
//!
//! Scores follow the decision-function convention: `0.5 - 2^(-E[h]/c(psi))`,
//! so lower values are more anomalous and every value lies in (-0.5, 0.5).

use crate::fingerprint::BitFingerprint;
use crate::hash::derive_seed;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_TREES: usize = 100;
pub const DEFAULT_MAX_SUBSAMPLE: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnomalyError {
    #[error("all points are identical; nothing to split on")]
    DegenerateData,
    #[error("need at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("subsample size {psi} must be in [2, {n}]")]
    InvalidSubsample { psi: usize, n: usize },
    #[error("fingerprint width {got} does not match training width {expected}")]
    WidthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// `threshold` lies in (0, 1), so points with the bit unset go left and
    /// points with it set go right.
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        size: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationTree {
    pub nodes: Vec<Node>,
}

impl IsolationTree {
    /// Grows a tree on `points`. The result depends only on the set of points
    /// and the RNG stream, not on their order.
    pub fn build(points: &[&BitFingerprint], max_depth: usize, rng: &mut impl Rng) -> Self {
        let mut tree = IsolationTree { nodes: Vec::new() };
        tree.grow(points.to_vec(), 0, max_depth, rng);
        tree
    }

    fn grow(&mut self, points: Vec<&BitFingerprint>, depth: usize, max_depth: usize, rng: &mut impl Rng) -> u32 {
        let id = self.nodes.len() as u32;
        if depth >= max_depth || points.len() <= 1 {
            self.nodes.push(Node::Leaf {
                size: points.len() as u32,
            });
            return id;
        }
        let candidates = splittable_features(&points);
        let total: u32 = candidates.iter().map(|w| w.count_ones()).sum();
        if total == 0 {
            self.nodes.push(Node::Leaf {
                size: points.len() as u32,
            });
            return id;
        }
        let feature = nth_set_bit(&candidates, rng.random_range(0..total));
        let threshold = loop {
            let t: f64 = rng.random();
            if t > 0.0 {
                break t;
            }
        };
        let (right, left): (Vec<_>, Vec<_>) = points.into_iter().partition(|p| p.get(feature));
        self.nodes.push(Node::Leaf { size: 0 });
        let l = self.grow(left, depth + 1, max_depth, rng);
        let r = self.grow(right, depth + 1, max_depth, rng);
        self.nodes[id as usize] = Node::Split {
            feature: feature as u32,
            threshold,
            left: l,
            right: r,
        };
        id
    }

    /// Depth of the leaf reached by `x`, plus the average unbuilt subtree
    /// depth `c(size)` at that leaf.
    pub fn path_length(&self, x: &BitFingerprint) -> f64 {
        let mut node = 0usize;
        let mut depth = 0.0;
        loop {
            match self.nodes[node] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let value = if x.get(feature as usize) { 1.0 } else { 0.0 };
                    node = if value < threshold { left } else { right } as usize;
                    depth += 1.0;
                }
                Node::Leaf { size } => return depth + average_path_length(size as usize),
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Split { left, right, .. } => 1 + go(nodes, left as usize).max(go(nodes, right as usize)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }
}

/// Features that are not constant over `points`: OR minus AND.
fn splittable_features(points: &[&BitFingerprint]) -> Vec<u64> {
    let words = points[0].words().len();
    let mut any = vec![0u64; words];
    let mut all = vec![u64::MAX; words];
    for p in points {
        for (k, w) in p.words().iter().enumerate() {
            any[k] |= w;
            all[k] &= w;
        }
    }
    any.iter().zip(&all).map(|(a, b)| a & !b).collect()
}

fn nth_set_bit(words: &[u64], mut n: u32) -> usize {
    for (k, &w) in words.iter().enumerate() {
        let c = w.count_ones();
        if n < c {
            let mut w = w;
            for _ in 0..n {
                w &= w - 1;
            }
            return k * 64 + w.trailing_zeros() as usize;
        }
        n -= c;
    }
    unreachable!("bit index out of range")
}

fn harmonic(n: usize) -> f64 {
    (1..=n).map(|k| 1.0 / k as f64).sum()
}

/// Average path length of an unsuccessful BST search over `n` points:
/// `c(n) = 2 H(n-1) - 2 (n-1) / n`, with `c(1) = c(0) = 0`.
pub fn average_path_length(n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    2.0 * harmonic(n - 1) - 2.0 * (n - 1) as f64 / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct AnomalyScore(pub f64);

impl AnomalyScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForest {
    pub trees: Vec<IsolationTree>,
    pub psi: usize,
    pub n_trees: usize,
    pub seed: u64,
    pub n_bits: usize,
}

impl IsolationForest {
    pub fn fit(points: &[BitFingerprint], n_trees: usize, psi: usize, seed: u64) -> Result<Self, AnomalyError> {
        let n = points.len();
        if n < 2 {
            return Err(AnomalyError::TooFewPoints(n));
        }
        if psi < 2 || psi > n {
            return Err(AnomalyError::InvalidSubsample { psi, n });
        }
        let n_bits = points[0].n_bits();
        if let Some(p) = points.iter().find(|p| p.n_bits() != n_bits) {
            return Err(AnomalyError::WidthMismatch {
                expected: n_bits,
                got: p.n_bits(),
            });
        }
        if points.iter().all(|p| p == &points[0]) {
            return Err(AnomalyError::DegenerateData);
        }
        let max_depth = (psi as f64).log2().ceil() as usize;
        let trees = (0..n_trees)
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, t as u64));
                let members: Vec<&BitFingerprint> = sample(&mut rng, n, psi).into_iter().map(|i| &points[i]).collect();
                IsolationTree::build(&members, max_depth, &mut rng)
            })
            .collect();
        Ok(IsolationForest {
            trees,
            psi,
            n_trees,
            seed,
            n_bits,
        })
    }

    /// Fits with the default tree count and `psi = min(256, n)`.
    pub fn fit_default(points: &[BitFingerprint], seed: u64) -> Result<Self, AnomalyError> {
        Self::fit(points, DEFAULT_TREES, DEFAULT_MAX_SUBSAMPLE.min(points.len()), seed)
    }

    pub fn mean_path_length(&self, x: &BitFingerprint) -> f64 {
        self.trees.iter().map(|t| t.path_length(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn score(&self, x: &BitFingerprint) -> Result<AnomalyScore, AnomalyError> {
        if x.n_bits() != self.n_bits {
            return Err(AnomalyError::WidthMismatch {
                expected: self.n_bits,
                got: x.n_bits(),
            });
        }
        let e = self.mean_path_length(x);
        let s = 2f64.powf(-e / average_path_length(self.psi));
        Ok(AnomalyScore(0.5 - s))
    }

    pub fn batch_scores(&self, points: &[BitFingerprint]) -> Result<Vec<AnomalyScore>, AnomalyError> {
        points.iter().map(|p| self.score(p)).collect()
    }
}
