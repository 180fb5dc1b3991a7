//! Vietoris-Rips persistent homology in degrees 0 and 1.
//!
//! Degree 0 comes from Kruskal's algorithm over the sorted edge list. Degree 1
//! comes from a GF(2) reduction of the triangle boundary columns. Triangles are
//! generated lazily, grouped by their longest edge in filtration order, which
//! is a valid filtration order because every triangle then follows its faces
//! and triangles are visited in non-decreasing diameter.

use crate::fingerprint::{pairwise_distances, BitFingerprint, DistanceMatrix, FingerprintError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PersistenceError {
    #[error("distance matrix is invalid: {0}")]
    InvalidMatrix(String),
    #[error("max_degree must be 0 or 1, got {0}")]
    UnsupportedDegree(u8),
    #[error("max_scale must be positive")]
    InvalidScale,
    #[error("no finite pairs in degree {0}")]
    NoFinitePairs(u8),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("n_cuts must be at least 1")]
    InvalidCuts,
    #[error(transparent)]
    Fingerprint(#[from] FingerprintError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersistencePair {
    pub degree: u8,
    pub birth: f64,
    /// `f64::INFINITY` for features alive at `max_scale`.
    pub death: f64,
}

impl PersistencePair {
    pub fn lifespan(&self) -> f64 {
        self.death - self.birth
    }

    pub fn is_finite(&self) -> bool {
        self.death.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceDiagram {
    /// Sorted by (degree, birth, death).
    pub pairs: Vec<PersistencePair>,
    pub max_degree: u8,
    pub max_scale: f64,
}

impl PersistenceDiagram {
    pub fn degree(&self, degree: u8) -> impl Iterator<Item = &PersistencePair> {
        self.pairs.iter().filter(move |p| p.degree == degree)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("degree,birth,death\n");
        for p in &self.pairs {
            if p.is_finite() {
                let _ = writeln!(s, "{},{},{}", p.degree, p.birth, p.death);
            } else {
                let _ = writeln!(s, "{},{},inf", p.degree, p.birth);
            }
        }
        s
    }
}

fn validate(d: &DistanceMatrix) -> Result<(), PersistenceError> {
    let n = d.len();
    for i in 0..n {
        if d.get(i, i) != 0.0 {
            return Err(PersistenceError::InvalidMatrix(format!("nonzero diagonal at {i}")));
        }
        for j in (i + 1)..n {
            let v = d.get(i, j);
            if v.is_nan() || v < 0.0 {
                return Err(PersistenceError::InvalidMatrix(format!("entry ({i},{j}) = {v}")));
            }
            if v != d.get(j, i) {
                return Err(PersistenceError::InvalidMatrix(format!("asymmetric at ({i},{j})")));
            }
        }
    }
    Ok(())
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Edges with diameter ≤ `max_scale`, ordered by (length, i, j).
fn sorted_edges(d: &DistanceMatrix, max_scale: f64) -> Vec<(f64, u32, u32)> {
    let n = d.len();
    let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let w = d.get(i, j);
            if w <= max_scale {
                edges.push((w, i as u32, j as u32));
            }
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    edges
}

/// Symmetric difference of two sorted index lists.
fn add_columns(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

pub fn rips_persistence(
    d: &DistanceMatrix,
    max_degree: u8,
    max_scale: f64,
) -> Result<PersistenceDiagram, PersistenceError> {
    if max_degree > 1 {
        return Err(PersistenceError::UnsupportedDegree(max_degree));
    }
    if max_scale.is_nan() || max_scale <= 0.0 {
        return Err(PersistenceError::InvalidScale);
    }
    validate(d)?;
    let n = d.len();
    let edges = sorted_edges(d, max_scale);
    let mut pairs = Vec::new();

    let mut uf = UnionFind::new(n);
    let mut positive = vec![false; edges.len()];
    let mut components = n;
    for (e, &(w, i, j)) in edges.iter().enumerate() {
        if uf.union(i as usize, j as usize) {
            components -= 1;
            if w > 0.0 {
                pairs.push(PersistencePair {
                    degree: 0,
                    birth: 0.0,
                    death: w,
                });
            }
        } else {
            positive[e] = true;
        }
    }
    for _ in 0..components {
        pairs.push(PersistencePair {
            degree: 0,
            birth: 0.0,
            death: f64::INFINITY,
        });
    }

    if max_degree >= 1 {
        pairs.extend(degree_one(n, &edges, &positive));
    }

    pairs.sort_by(|a, b| {
        a.degree
            .cmp(&b.degree)
            .then(a.birth.total_cmp(&b.birth))
            .then(a.death.total_cmp(&b.death))
    });
    Ok(PersistenceDiagram {
        pairs,
        max_degree,
        max_scale,
    })
}

/// Computes `max_scale` as the largest entry of `d`.
pub fn rips_persistence_full(d: &DistanceMatrix, max_degree: u8) -> Result<PersistenceDiagram, PersistenceError> {
    let scale = d.max_value();
    rips_persistence(d, max_degree, if scale > 0.0 { scale } else { 1.0 })
}

fn degree_one(n: usize, edges: &[(f64, u32, u32)], positive: &[bool]) -> Vec<PersistencePair> {
    let mut index = vec![u32::MAX; n * n];
    for (e, &(_, i, j)) in edges.iter().enumerate() {
        index[i as usize * n + j as usize] = e as u32;
        index[j as usize * n + i as usize] = e as u32;
    }
    let edge_index = |a: u32, b: u32| Some(index[a as usize * n + b as usize]).filter(|&e| e != u32::MAX);

    let mut unpaired = positive.iter().filter(|&&p| p).count();
    let mut paired = vec![false; edges.len()];
    // reduced columns keyed by their pivot (largest edge index)
    let mut by_pivot: HashMap<u32, Vec<u32>> = HashMap::new();
    let mut out = Vec::new();

    for (e, &(w, i, j)) in edges.iter().enumerate() {
        if unpaired == 0 {
            break;
        }
        let e = e as u32;
        for k in 0..n as u32 {
            if k == i || k == j {
                continue;
            }
            let (Some(a), Some(b)) = (edge_index(i, k), edge_index(j, k)) else {
                continue;
            };
            if a > e || b > e {
                continue;
            }
            let mut col = vec![a.min(b), a.max(b), e];
            while let Some(&pivot) = col.last() {
                match by_pivot.get(&pivot) {
                    Some(other) => col = add_columns(&col, other),
                    None => break,
                }
            }
            if let Some(&pivot) = col.last() {
                let birth = edges[pivot as usize].0;
                if w > birth {
                    out.push(PersistencePair {
                        degree: 1,
                        birth,
                        death: w,
                    });
                }
                paired[pivot as usize] = true;
                unpaired -= 1;
                by_pivot.insert(pivot, col);
                if unpaired == 0 {
                    break;
                }
            }
        }
    }

    for (e, &(w, _, _)) in edges.iter().enumerate() {
        if positive[e] && !paired[e] {
            out.push(PersistencePair {
                degree: 1,
                birth: w,
                death: f64::INFINITY,
            });
        }
    }
    out
}

/// Finite pairs of `degree` with lifespan strictly above `threshold`.
pub fn count_above_threshold(diag: &PersistenceDiagram, degree: u8, threshold: f64) -> usize {
    diag.degree(degree)
        .filter(|p| p.is_finite() && p.lifespan() > threshold)
        .count()
}

pub fn count_infinite(diag: &PersistenceDiagram, degree: u8) -> usize {
    diag.degree(degree).filter(|p| !p.is_finite()).count()
}

pub fn max_lifespan(diag: &PersistenceDiagram, degree: u8) -> Result<f64, PersistenceError> {
    diag.degree(degree)
        .filter(|p| p.is_finite())
        .map(|p| p.lifespan())
        .reduce(f64::max)
        .ok_or(PersistenceError::NoFinitePairs(degree))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesParams {
    pub max_degree: u8,
    /// Lifespan threshold for the counts.
    pub threshold: f64,
    /// `None` uses the largest distance of each cloud.
    pub max_scale: Option<f64>,
}

impl Default for SeriesParams {
    fn default() -> Self {
        SeriesParams {
            max_degree: 1,
            threshold: 0.1,
            max_scale: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub cutoff: f64,
    pub size: usize,
    pub n_thr_h0: usize,
    pub n_thr_h1: usize,
    pub ratio_h0: f64,
    pub ratio_h1: f64,
    pub max_lifespan_h0: Option<f64>,
    pub max_lifespan_h1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeSeries {
    pub cutoffs: Vec<f64>,
    pub sizes: Vec<usize>,
    pub diagrams: Vec<PersistenceDiagram>,
    pub points: Vec<SeriesPoint>,
    pub threshold: f64,
}

impl CumulativeSeries {
    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut s = String::from("cutoff,size,n_thr_h0,n_thr_h1,ratio_h0,ratio_h1,max_lifespan_h0,max_lifespan_h1\n");
        for p in &self.points {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                p.cutoff,
                p.size,
                p.n_thr_h0,
                p.n_thr_h1,
                p.ratio_h0,
                p.ratio_h1,
                fmt(p.max_lifespan_h0),
                fmt(p.max_lifespan_h1)
            );
        }
        s
    }
}

/// Persistence of the cumulative point clouds `{x : time(x) ≤ T}` for
/// `n_cuts` cutoffs `T` evenly spaced over (t_min, t_max]; the last is t_max.
pub fn cumulative_series(
    records: &[(BitFingerprint, f64)],
    n_cuts: usize,
    params: SeriesParams,
) -> Result<CumulativeSeries, PersistenceError> {
    if records.is_empty() {
        return Err(PersistenceError::EmptyDataset);
    }
    if n_cuts == 0 {
        return Err(PersistenceError::InvalidCuts);
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[a].1.total_cmp(&records[b].1).then(a.cmp(&b)));
    let fps: Vec<BitFingerprint> = order.iter().map(|&i| records[i].0.clone()).collect();
    let times: Vec<f64> = order.iter().map(|&i| records[i].1).collect();
    let full = pairwise_distances(&fps)?;

    let (t0, t1) = (times[0], times[times.len() - 1]);
    let cutoffs: Vec<f64> = (1..=n_cuts)
        .map(|c| {
            if c == n_cuts {
                t1
            } else {
                t0 + (t1 - t0) * c as f64 / n_cuts as f64
            }
        })
        .collect();
    let sizes: Vec<usize> = cutoffs.iter().map(|&t| times.partition_point(|&x| x <= t)).collect();

    let results: Vec<(PersistenceDiagram, SeriesPoint)> = cutoffs
        .par_iter()
        .zip(&sizes)
        .map(|(&cutoff, &size)| {
            let idx: Vec<usize> = (0..size).collect();
            let sub = full.submatrix(&idx);
            let diag = match params.max_scale {
                Some(s) => rips_persistence(&sub, params.max_degree, s)?,
                None => rips_persistence_full(&sub, params.max_degree)?,
            };
            let n0 = count_above_threshold(&diag, 0, params.threshold);
            let n1 = count_above_threshold(&diag, 1, params.threshold);
            let point = SeriesPoint {
                cutoff,
                size,
                n_thr_h0: n0,
                n_thr_h1: n1,
                ratio_h0: n0 as f64 / size as f64,
                ratio_h1: n1 as f64 / size as f64,
                max_lifespan_h0: max_lifespan(&diag, 0).ok(),
                max_lifespan_h1: max_lifespan(&diag, 1).ok(),
            };
            Ok((diag, point))
        })
        .collect::<Result<_, PersistenceError>>()?;
    let (diagrams, points) = results.into_iter().unzip();
    Ok(CumulativeSeries {
        cutoffs,
        sizes,
        diagrams,
        points,
        threshold: params.threshold,
    })
}
