//! Mapper graphs: an overlapping interval cover of a scalar lens, spectral
//! clustering inside each level set, and the nerve of the resulting clusters.

mod features;
mod spectral;

pub use features::{detect_features, FeatureReport, Flare};
pub use spectral::{canonical_labels, jacobi_eigen, kmeans, laplacian_spectrum, spectral_cluster, SpectralParams};

use crate::fingerprint::BitFingerprint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapperError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("lens has {lens} values but dataset has {points}")]
    LengthMismatch { lens: usize, points: usize },
    #[error("overlap must be in [0, 1), got {0}")]
    InvalidOverlap(f64),
    #[error("need at least one interval")]
    NoIntervals,
    #[error("lens value is not finite")]
    NonFiniteLens,
    #[error("malformed graph text at line {0}")]
    Malformed(usize),
}

/// Squared distances between points of a dataset.
pub trait Metric {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn sq_dist(&self, i: usize, j: usize) -> f64;
}

/// Bit vectors as 0/1 coordinates: squared Euclidean distance is Hamming.
impl Metric for [BitFingerprint] {
    fn len(&self) -> usize {
        <[BitFingerprint]>::len(self)
    }

    fn sq_dist(&self, i: usize, j: usize) -> f64 {
        self[i].hamming(&self[j]) as f64
    }
}

impl<const D: usize> Metric for [[f64; D]] {
    fn len(&self) -> usize {
        <[[f64; D]]>::len(self)
    }

    fn sq_dist(&self, i: usize, j: usize) -> f64 {
        self[i].iter().zip(&self[j]).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

/// Clusters a level set given as dataset indices; labels are dense from 0.
pub trait Clusterer<P: Metric + ?Sized>: Sync {
    fn cluster(&self, points: &P, idx: &[usize]) -> Vec<usize>;
}

impl<P: Metric + ?Sized> Clusterer<P> for SpectralParams {
    fn cluster(&self, points: &P, idx: &[usize]) -> Vec<usize> {
        spectral_cluster(points, idx, self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cover {
    pub n_intervals: usize,
    pub overlap: f64,
    pub lo: f64,
    pub hi: f64,
    pub intervals: Vec<(f64, f64)>,
}

impl Cover {
    /// `L = (hi - lo) / (n - (n - 1) overlap)`, `start_i = lo + i L (1 - overlap)`,
    /// `end_i = start_i + L`, with the last end pinned to `hi`. A zero-width
    /// range yields the single interval `[lo, lo]`.
    pub fn from_range(lo: f64, hi: f64, n_intervals: usize, overlap: f64) -> Result<Self, MapperError> {
        if n_intervals == 0 {
            return Err(MapperError::NoIntervals);
        }
        if !(0.0..1.0).contains(&overlap) {
            return Err(MapperError::InvalidOverlap(overlap));
        }
        if !lo.is_finite() || !hi.is_finite() {
            return Err(MapperError::NonFiniteLens);
        }
        if hi <= lo {
            return Ok(Cover {
                n_intervals: 1,
                overlap,
                lo,
                hi: lo,
                intervals: vec![(lo, lo)],
            });
        }
        let n = n_intervals as f64;
        let len = (hi - lo) / (n - (n - 1.0) * overlap);
        let step = len * (1.0 - overlap);
        let mut intervals: Vec<(f64, f64)> = (0..n_intervals)
            .map(|i| {
                let start = lo + i as f64 * step;
                (start, (start + len).min(hi))
            })
            .collect();
        intervals[n_intervals - 1].1 = hi;
        Ok(Cover {
            n_intervals,
            overlap,
            lo,
            hi,
            intervals,
        })
    }

    pub fn interval_length(&self) -> f64 {
        let n = self.n_intervals as f64;
        (self.hi - self.lo) / (n - (n - 1.0) * self.overlap)
    }

    /// Closed-interval membership.
    pub fn contains(&self, interval: usize, x: f64) -> bool {
        let (s, e) = self.intervals[interval];
        s <= x && x <= e
    }

    pub fn intervals_containing(&self, x: f64) -> Vec<usize> {
        (0..self.intervals.len()).filter(|&i| self.contains(i, x)).collect()
    }
}

pub fn build_cover(lens: &[f64], n_intervals: usize, overlap: f64) -> Result<Cover, MapperError> {
    if lens.is_empty() {
        return Err(MapperError::EmptyDataset);
    }
    if lens.iter().any(|x| !x.is_finite()) {
        return Err(MapperError::NonFiniteLens);
    }
    let lo = lens.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = lens.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Cover::from_range(lo, hi, n_intervals, overlap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapperNode {
    pub id: usize,
    pub interval_index: usize,
    pub cluster_index: usize,
    /// Sorted dataset indices.
    pub members: Vec<usize>,
    pub mean_lens: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MapperEdge {
    pub u: usize,
    pub v: usize,
    pub intersection: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapperGraph {
    pub nodes: Vec<MapperNode>,
    /// Sorted by (u, v) with u < v.
    pub edges: Vec<MapperEdge>,
}

impl MapperGraph {
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        let (a, b) = (u.min(v), u.max(v));
        self.edges.binary_search_by(|e| (e.u, e.v).cmp(&(a, b))).is_ok()
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges.iter().filter(|e| e.u == node || e.v == node).count()
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.u].push(e.v);
            adj[e.v].push(e.u);
        }
        adj
    }

    /// Nodes containing the dataset index `record`.
    pub fn nodes_of(&self, record: usize) -> Vec<usize> {
        self.nodes
            .iter()
            .filter(|n| n.members.binary_search(&record).is_ok())
            .map(|n| n.id)
            .collect()
    }

    /// Links every pair of nodes that share a member.
    pub fn from_nodes(nodes: Vec<MapperNode>) -> Self {
        let mut by_record: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for node in &nodes {
            for &m in &node.members {
                by_record.entry(m).or_default().push(node.id);
            }
        }
        let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for list in by_record.values() {
            for (a, &u) in list.iter().enumerate() {
                for &v in &list[a + 1..] {
                    *counts.entry((u.min(v), u.max(v))).or_default() += 1;
                }
            }
        }
        let edges = counts
            .into_iter()
            .map(|((u, v), intersection)| MapperEdge { u, v, intersection })
            .collect();
        MapperGraph { nodes, edges }
    }

    /// Line-oriented text: a header, one `node` line per node, one `edge` line
    /// per edge. Members are written through `ids`.
    pub fn to_text(&self, ids: &[String]) -> String {
        let mut s = String::from("mapper-graph 1\n");
        let _ = writeln!(s, "nodes {}", self.nodes.len());
        for n in &self.nodes {
            let members: Vec<&str> = n.members.iter().map(|&m| ids[m].as_str()).collect();
            let _ = writeln!(
                s,
                "node {} interval={} cluster={} size={} mean_lens={} members={}",
                n.id,
                n.interval_index,
                n.cluster_index,
                n.members.len(),
                n.mean_lens,
                members.join(",")
            );
        }
        let _ = writeln!(s, "edges {}", self.edges.len());
        for e in &self.edges {
            let _ = writeln!(s, "edge {} {} {}", e.u, e.v, e.intersection);
        }
        s
    }

    /// Inverse of [`MapperGraph::to_text`]; member ids are resolved through `lookup`.
    pub fn from_text(text: &str, lookup: impl Fn(&str) -> Option<usize>) -> Result<Self, MapperError> {
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let bad = || MapperError::Malformed(ln + 1);
            let mut parts = line.split(' ');
            match parts.next() {
                Some("node") => {
                    let id = parts.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
                    let mut node = MapperNode {
                        id,
                        interval_index: 0,
                        cluster_index: 0,
                        members: Vec::new(),
                        mean_lens: 0.0,
                    };
                    for field in parts {
                        let (key, value) = field.split_once('=').ok_or_else(bad)?;
                        match key {
                            "interval" => node.interval_index = value.parse().map_err(|_| bad())?,
                            "cluster" => node.cluster_index = value.parse().map_err(|_| bad())?,
                            "mean_lens" => node.mean_lens = value.parse().map_err(|_| bad())?,
                            "size" => {}
                            "members" if value.is_empty() => {}
                            "members" => {
                                node.members = value
                                    .split(',')
                                    .map(|m| lookup(m).ok_or_else(bad))
                                    .collect::<Result<_, _>>()?;
                                node.members.sort_unstable();
                            }
                            _ => return Err(bad()),
                        }
                    }
                    nodes.push(node);
                }
                Some("edge") => {
                    let v: Vec<usize> = parts.map(|x| x.parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
                    if v.len() != 3 {
                        return Err(bad());
                    }
                    edges.push(MapperEdge {
                        u: v[0],
                        v: v[1],
                        intersection: v[2],
                    });
                }
                Some("mapper-graph") | Some("nodes") | Some("edges") | Some("") | None => {}
                Some(_) => return Err(bad()),
            }
        }
        Ok(MapperGraph { nodes, edges })
    }

    /// Graphviz DOT; node fill is bucketed into nine shades by mean lens.
    pub fn to_dot(&self) -> String {
        let lo = self.nodes.iter().map(|n| n.mean_lens).fold(f64::INFINITY, f64::min);
        let hi = self.nodes.iter().map(|n| n.mean_lens).fold(f64::NEG_INFINITY, f64::max);
        let mut s = String::from("graph mapper {\n  node [style=filled, colorscheme=ylorrd9];\n");
        for n in &self.nodes {
            let bucket = if hi > lo {
                1 + ((n.mean_lens - lo) / (hi - lo) * 8.0).round() as usize
            } else {
                5
            };
            let _ = writeln!(
                s,
                "  n{} [label=\"{}\", fillcolor={}, width={:.2}];",
                n.id,
                n.members.len(),
                bucket.min(9),
                0.3 + (n.members.len() as f64).sqrt() / 10.0
            );
        }
        for e in &self.edges {
            let _ = writeln!(s, "  n{} -- n{} [penwidth={}];", e.u, e.v, 1 + e.intersection.ilog2());
        }
        s.push_str("}\n");
        s
    }
}

pub fn build_mapper<P, C>(points: &P, lens: &[f64], cover: &Cover, clusterer: &C) -> Result<MapperGraph, MapperError>
where
    P: Metric + Sync + ?Sized,
    C: Clusterer<P>,
{
    if points.len() == 0 {
        return Err(MapperError::EmptyDataset);
    }
    if lens.len() != points.len() {
        return Err(MapperError::LengthMismatch {
            lens: lens.len(),
            points: points.len(),
        });
    }
    let per_interval: Vec<Vec<(usize, Vec<usize>)>> = (0..cover.intervals.len())
        .into_par_iter()
        .map(|interval| {
            let level: Vec<usize> = (0..lens.len()).filter(|&i| cover.contains(interval, lens[i])).collect();
            if level.is_empty() {
                return Vec::new();
            }
            let labels = clusterer.cluster(points, &level);
            let n_clusters = labels.iter().max().map_or(0, |m| m + 1);
            (0..n_clusters)
                .map(|c| {
                    let members: Vec<usize> = level
                        .iter()
                        .zip(&labels)
                        .filter(|(_, &l)| l == c)
                        .map(|(&i, _)| i)
                        .collect();
                    (c, members)
                })
                .filter(|(_, m)| !m.is_empty())
                .collect()
        })
        .collect();

    let mut nodes = Vec::new();
    for (interval, clusters) in per_interval.into_iter().enumerate() {
        for (cluster, members) in clusters {
            let mean_lens = members.iter().map(|&m| lens[m]).sum::<f64>() / members.len() as f64;
            nodes.push(MapperNode {
                id: nodes.len(),
                interval_index: interval,
                cluster_index: cluster,
                members,
                mean_lens,
            });
        }
    }
    Ok(MapperGraph::from_nodes(nodes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_interval_cover() {
        let c = build_cover(&[0.0, 1.0], 2, 0.5).unwrap();
        assert!((c.intervals[0].1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.intervals[1].0 - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.intervals[1].1, 1.0);
        let single = build_cover(&[0.0, 0.5, 1.0], 1, 0.5).unwrap();
        assert_eq!(single.intervals, vec![(0.0, 1.0)]);
    }

    #[test]
    fn thirty_intervals() {
        let c = build_cover(&[0.0, 1.0], 30, 0.5).unwrap();
        let l = 1.0 / 15.5;
        assert!((c.interval_length() - l).abs() < 1e-15);
        assert!((c.intervals[29].1 - 1.0).abs() < 1e-12);
        for w in c.intervals.windows(2) {
            assert!((w[0].1 - w[1].0 - l / 2.0).abs() < 1e-12);
        }
        for k in 1..1000 {
            let x = k as f64 / 1000.0;
            let hits = c.intervals_containing(x).len();
            assert!((1..=2).contains(&hits) || c.intervals.iter().any(|iv| iv.0 == x || iv.1 == x));
        }
    }

    #[test]
    fn cover_errors() {
        assert_eq!(build_cover(&[], 3, 0.5), Err(MapperError::EmptyDataset));
        assert_eq!(build_cover(&[0.0, 1.0], 3, 1.0), Err(MapperError::InvalidOverlap(1.0)));
        let flat = build_cover(&[0.2; 10], 5, 0.5).unwrap();
        assert_eq!(flat.intervals, vec![(0.2, 0.2)]);
    }

    #[test]
    fn identical_lens_values() {
        let pts: Vec<[f64; 2]> = (0..10).map(|i| [i as f64, 0.0]).collect();
        let lens = vec![0.5; 10];
        let cover = build_cover(&lens, 4, 0.5).unwrap();
        let params = SpectralParams {
            k: 1,
            ..Default::default()
        };
        let g = build_mapper(pts.as_slice(), &lens, &cover, &params).unwrap();
        assert_eq!(g.nodes.len(), 1);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn text_round_trip() {
        let pts: Vec<[f64; 2]> = (0..12).map(|i| [i as f64 * 0.1, (i % 3) as f64]).collect();
        let lens: Vec<f64> = pts.iter().map(|p| p[0]).collect();
        let cover = build_cover(&lens, 3, 0.4).unwrap();
        let g = build_mapper(pts.as_slice(), &lens, &cover, &SpectralParams::default()).unwrap();
        let ids: Vec<String> = (0..12).map(|i| format!("r{i}")).collect();
        let text = g.to_text(&ids);
        let back = MapperGraph::from_text(&text, |s| s[1..].parse().ok()).unwrap();
        assert_eq!(back, g);
        assert!(g.to_dot().starts_with("graph mapper {"));
    }
}
