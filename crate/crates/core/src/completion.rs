//! Lacuna surgery on a Mapper graph and verification of its generative repair.

use crate::anomaly::{AnomalyError, IsolationForest};
use crate::chem::{insert_placeholders, murcko_scaffold, parse_smiles, Scaffold};
use crate::dataset::Dataset;
use crate::fingerprint::{dice_distance, BitFingerprint};
use crate::hash::derive_seed;
use crate::mapper::{build_mapper, Clusterer, Cover, MapperError, MapperGraph};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompletionError {
    #[error("graph has no edge between nodes {0} and {1}")]
    NoSuchEdge(usize, usize),
    #[error("node {0} does not exist")]
    NoSuchNode(usize),
    #[error("empty overlap region: lowest v-side lens {lo} is not below highest u-side lens {hi}")]
    EmptyOverlapRegion { lo: f64, hi: f64 },
    #[error("node set is empty")]
    EmptyNodes,
    #[error(transparent)]
    Mapper(#[from] MapperError),
    #[error(transparent)]
    Anomaly(#[from] AnomalyError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LacunaSpec {
    /// Node-id pairs in the pre-surgery graph, `u < v`.
    pub target_edges: Vec<(usize, usize)>,
    /// Sorted indices into the pre-surgery dataset.
    pub removed: Vec<usize>,
    pub removed_ids: Vec<String>,
    /// Records removed per target edge, before taking the union.
    pub removed_per_edge: Vec<usize>,
}

/// Deletes every record in the member intersection of each target edge.
/// Returns the reduced dataset, the kept original indices (in order) and the
/// spec.
pub fn remove_edge_intersections(
    g: &MapperGraph,
    dataset: &Dataset,
    edges: &[(usize, usize)],
) -> Result<(Dataset, Vec<usize>, LacunaSpec), CompletionError> {
    let mut removed = BTreeSet::new();
    let mut per_edge = Vec::with_capacity(edges.len());
    let mut targets = Vec::with_capacity(edges.len());
    for &(a, b) in edges {
        let (u, v) = (a.min(b), a.max(b));
        if !g.has_edge(u, v) {
            return Err(CompletionError::NoSuchEdge(u, v));
        }
        let mu = &g.nodes[u].members;
        let mv: BTreeSet<usize> = g.nodes[v].members.iter().copied().collect();
        let common: Vec<usize> = mu.iter().copied().filter(|i| mv.contains(i)).collect();
        per_edge.push(common.len());
        removed.extend(common);
        targets.push((u, v));
    }
    let kept: Vec<usize> = (0..dataset.len()).filter(|i| !removed.contains(i)).collect();
    let removed: Vec<usize> = removed.into_iter().collect();
    let spec = LacunaSpec {
        target_edges: targets,
        removed_ids: removed.iter().map(|&i| dataset.records[i].id.clone()).collect(),
        removed,
        removed_per_edge: per_edge,
    };
    Ok((dataset.subset(&kept), kept, spec))
}

pub fn remove_edge_intersection(
    g: &MapperGraph,
    dataset: &Dataset,
    u: usize,
    v: usize,
) -> Result<(Dataset, Vec<usize>, LacunaSpec), CompletionError> {
    remove_edge_intersections(g, dataset, &[(u, v)])
}

/// Open interval `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreInterval {
    pub lo: f64,
    pub hi: f64,
}

impl ScoreInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    pub fn midpoint(&self) -> f64 {
        (self.lo + self.hi) / 2.0
    }
}

/// `hi` is the largest lens over u-node members, `lo` the smallest over
/// v-node members; the target is their midpoint.
pub fn compute_target_interval(
    g: &MapperGraph,
    u_nodes: &[usize],
    v_nodes: &[usize],
    lens: &[f64],
) -> Result<(ScoreInterval, f64), CompletionError> {
    let extreme = |nodes: &[usize], init: f64, pick: fn(f64, f64) -> f64| -> Result<f64, CompletionError> {
        let mut acc = init;
        let mut any = false;
        for &n in nodes {
            let node = g.nodes.get(n).ok_or(CompletionError::NoSuchNode(n))?;
            for &m in &node.members {
                acc = pick(acc, lens[m]);
                any = true;
            }
        }
        if any {
            Ok(acc)
        } else {
            Err(CompletionError::EmptyNodes)
        }
    };
    let hi = extreme(u_nodes, f64::NEG_INFINITY, f64::max)?;
    let lo = extreme(v_nodes, f64::INFINITY, f64::min)?;
    interval_from_bounds(lo, hi)
}

pub fn interval_from_bounds(lo: f64, hi: f64) -> Result<(ScoreInterval, f64), CompletionError> {
    if lo >= hi {
        return Err(CompletionError::EmptyOverlapRegion { lo, hi });
    }
    let iv = ScoreInterval { lo, hi };
    Ok((iv, iv.midpoint()))
}

/// Indices of `scores` strictly inside the interval, in order.
pub fn filter_scores(scores: &[f64], interval: &ScoreInterval) -> Vec<usize> {
    (0..scores.len()).filter(|&i| interval.contains(scores[i])).collect()
}

pub fn filter_by_score(
    candidates: &[BitFingerprint],
    forest: &IsolationForest,
    interval: &ScoreInterval,
) -> Result<Vec<usize>, CompletionError> {
    let scores: Vec<f64> = forest.batch_scores(candidates)?.into_iter().map(|s| s.0).collect();
    Ok(filter_scores(&scores, interval))
}

/// For each candidate, the number of other candidates at Dice distance within
/// the closed range.
pub fn neighbor_counts(candidates: &[BitFingerprint], range: (f64, f64)) -> Vec<usize> {
    (0..candidates.len())
        .into_par_iter()
        .map(|i| {
            candidates
                .iter()
                .enumerate()
                .filter(|&(j, c)| {
                    j != i && dice_distance(&candidates[i], c).is_ok_and(|d| range.0 <= d && d <= range.1)
                })
                .count()
        })
        .collect()
}

/// Indices of candidates with at most `max_neighbors` neighbors. Counts are
/// computed once on the input.
pub fn downsample_by_neighbors(candidates: &[BitFingerprint], max_neighbors: usize, range: (f64, f64)) -> Vec<usize> {
    neighbor_counts(candidates, range)
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c <= max_neighbors)
        .map(|(i, _)| i)
        .collect()
}

/// Minimum member-Jaccard for two nodes to be the same node across rebuilds.
pub const MATCH_THRESHOLD: f64 = 0.5;

/// For each node of `original`, the rebuilt node in the same interval with
/// the highest Jaccard over surviving original records, if it reaches
/// [`MATCH_THRESHOLD`]. `origin[i]` maps rebuilt record `i` to its original
/// index, `None` for added records.
pub fn match_nodes(original: &MapperGraph, rebuilt: &MapperGraph, origin: &[Option<usize>]) -> Vec<Option<usize>> {
    let surviving: BTreeSet<usize> = origin.iter().flatten().copied().collect();
    let mapped: Vec<BTreeSet<usize>> = rebuilt
        .nodes
        .iter()
        .map(|n| n.members.iter().filter_map(|&m| origin[m]).collect())
        .collect();
    original
        .nodes
        .iter()
        .map(|node| {
            let a: BTreeSet<usize> = node.members.iter().copied().filter(|m| surviving.contains(m)).collect();
            let mut best: Option<(f64, usize)> = None;
            for (r, b) in rebuilt.nodes.iter().zip(&mapped) {
                if r.interval_index != node.interval_index {
                    continue;
                }
                let inter = a.intersection(b).count();
                let union = a.union(b).count();
                if union == 0 {
                    continue;
                }
                let j = inter as f64 / union as f64;
                if j >= MATCH_THRESHOLD && best.is_none_or(|(bj, _)| j > bj) {
                    best = Some((j, r.id));
                }
            }
            best.map(|(_, id)| id)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Restoration {
    pub restored: Vec<(usize, usize)>,
    /// Target-edge endpoints with no matching rebuilt node.
    pub unmatched: Vec<usize>,
}

pub fn check_restoration(
    original: &MapperGraph,
    rebuilt: &MapperGraph,
    origin: &[Option<usize>],
    spec: &LacunaSpec,
) -> Restoration {
    let matches = match_nodes(original, rebuilt, origin);
    let mut restored = Vec::new();
    let mut unmatched = BTreeSet::new();
    for &(u, v) in &spec.target_edges {
        match (matches[u], matches[v]) {
            (Some(a), Some(b)) => {
                if rebuilt.has_edge(a.min(b), a.max(b)) {
                    restored.push((u, v));
                }
            }
            (mu, mv) => {
                if mu.is_none() {
                    unmatched.insert(u);
                }
                if mv.is_none() {
                    unmatched.insert(v);
                }
            }
        }
    }
    Restoration {
        restored,
        unmatched: unmatched.into_iter().collect(),
    }
}

/// Builds the Mapper graph of the reduced dataset plus `added` candidates,
/// with lens values from the fixed `forest` and the fixed `cover`.
pub fn rebuild_with_candidates<C: Clusterer<[BitFingerprint]>>(
    reduced: &[BitFingerprint],
    added: &[BitFingerprint],
    forest: &IsolationForest,
    cover: &Cover,
    clusterer: &C,
) -> Result<MapperGraph, CompletionError> {
    let points: Vec<BitFingerprint> = reduced.iter().chain(added).cloned().collect();
    let lens: Vec<f64> = forest.batch_scores(&points)?.into_iter().map(|s| s.0).collect();
    Ok(build_mapper(&points[..], &lens, cover, clusterer)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRow {
    pub variant: String,
    pub added: usize,
    pub restored: Vec<(usize, usize)>,
    pub unmatched: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionReport {
    pub target_edges: Vec<(usize, usize)>,
    pub removed_per_edge: Vec<usize>,
    pub interval: ScoreInterval,
    pub rows: Vec<VariantRow>,
}

impl CompletionReport {
    /// Plain-text restoration table.
    pub fn to_table(&self) -> String {
        let edge = |(u, v): (usize, usize)| format!("({u},{v})");
        let mut out = String::new();
        let _ = writeln!(out, "interval\t({:.6}, {:.6})", self.interval.lo, self.interval.hi);
        for (e, n) in self.target_edges.iter().zip(&self.removed_per_edge) {
            let _ = writeln!(out, "removed\t{}\t{}", edge(*e), n);
        }
        let _ = writeln!(out, "variant\tnew\trestored\tlinks");
        for r in &self.rows {
            let links: Vec<String> = r.restored.iter().map(|&e| edge(e)).collect();
            let _ = writeln!(
                out,
                "{}\t{}\t{}/{}\t{}",
                r.variant,
                r.added,
                r.restored.len(),
                self.target_edges.len(),
                if links.is_empty() {
                    "-".to_string()
                } else {
                    links.join(" ")
                }
            );
        }
        out
    }
}

/// Downsampling threshold: a fixed neighbor count, or the given quantile of
/// the candidate set's own neighbor counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DownsampleRule {
    MaxNeighbors(usize),
    Quantile(f64),
}

impl DownsampleRule {
    /// Quantiles take the lower order statistic; an empty set yields 0.
    pub fn threshold(&self, counts: &[usize]) -> usize {
        match *self {
            DownsampleRule::MaxNeighbors(n) => n,
            DownsampleRule::Quantile(q) => {
                if counts.is_empty() {
                    return 0;
                }
                let mut sorted = counts.to_vec();
                sorted.sort_unstable();
                let q = q.clamp(0.0, 1.0);
                sorted[((sorted.len() - 1) as f64 * q).floor() as usize]
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            DownsampleRule::MaxNeighbors(n) => format!("max-{n}"),
            DownsampleRule::Quantile(q) => format!("q{q}"),
        }
    }
}

/// Quadruples `[u1, u2, v1, v2]` with `u*` in interval `i`, `v*` in `i + 1`,
/// edges `(u1, v2)` and `(u2, v1)` present and `(u1, v1)`, `(u2, v2)` absent.
/// Ordered by distance of `i` from the middle of the cover; ties go to the
/// higher interval, then to higher node ids. Each unordered pair of crossing
/// edges appears once.
pub fn square_lacunae(g: &MapperGraph) -> Vec<[usize; 4]> {
    let Some(last) = g.nodes.iter().map(|n| n.interval_index).max() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for i in 0..last {
        let left: Vec<usize> = g.nodes.iter().filter(|n| n.interval_index == i).map(|n| n.id).collect();
        let right: Vec<usize> = g
            .nodes
            .iter()
            .filter(|n| n.interval_index == i + 1)
            .map(|n| n.id)
            .collect();
        for (a, &u1) in left.iter().enumerate() {
            for &u2 in &left[a + 1..] {
                for &v1 in &right {
                    for &v2 in &right {
                        if v1 != v2
                            && g.has_edge(u1, v2)
                            && g.has_edge(u2, v1)
                            && !g.has_edge(u1, v1)
                            && !g.has_edge(u2, v2)
                        {
                            out.push([u1, u2, v1, v2]);
                        }
                    }
                }
            }
        }
    }
    let mid = last as f64 / 2.0;
    out.sort_by(|a, b| {
        let da = (g.nodes[a[0]].interval_index as f64 + 0.5 - mid).abs();
        let db = (g.nodes[b[0]].interval_index as f64 + 0.5 - mid).abs();
        da.total_cmp(&db).then(b.cmp(a))
    });
    out
}

/// Murcko scaffolds present both among the removed records and among the
/// surviving members of `nodes`, sorted by SMILES.
pub fn reference_scaffolds(dataset: &Dataset, g: &MapperGraph, nodes: &[usize], removed: &[usize]) -> Vec<Scaffold> {
    let scaffold_of = |i: usize| {
        parse_smiles(&dataset.records[i].smiles)
            .ok()
            .and_then(|m| murcko_scaffold(&m).ok())
    };
    let removed_set: BTreeSet<usize> = removed.iter().copied().collect();
    let withheld: BTreeSet<String> = removed
        .iter()
        .filter_map(|&i| scaffold_of(i))
        .map(|s| s.smiles)
        .collect();
    let mut found = BTreeMap::new();
    for &n in nodes {
        for &m in &g.nodes[n].members {
            if removed_set.contains(&m) {
                continue;
            }
            if let Some(s) = scaffold_of(m) {
                if withheld.contains(&s.smiles) {
                    found.entry(s.smiles.clone()).or_insert(s);
                }
            }
        }
    }
    found.into_values().collect()
}

/// Every scaffold with `1..=max_count` branch placeholders, `reps` draws per
/// count, deduplicated and sorted.
pub fn placeholder_scaffolds(scaffolds: &[Scaffold], max_count: usize, reps: usize, seed: u64) -> Vec<String> {
    let mut out = BTreeSet::new();
    for (k, s) in scaffolds.iter().enumerate() {
        for count in 1..=max_count {
            for rep in 0..reps {
                let stream = ((k * (max_count + 1) + count) * reps.max(1) + rep) as u64;
                if let Ok(p) = insert_placeholders(s, count, derive_seed(seed, stream)) {
                    out.insert(p);
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Everything fixed across the rebuilds that evaluate one lacuna.
pub struct RepairContext<'a, C> {
    pub original: &'a MapperGraph,
    pub spec: &'a LacunaSpec,
    pub reduced: &'a [BitFingerprint],
    /// Original index of each reduced record.
    pub kept: &'a [usize],
    pub forest: &'a IsolationForest,
    pub cover: &'a Cover,
    pub clusterer: &'a C,
}

impl<C: Clusterer<[BitFingerprint]>> RepairContext<'_, C> {
    pub fn evaluate(&self, variant: &str, added: &[BitFingerprint]) -> Result<VariantRow, CompletionError> {
        let rebuilt = rebuild_with_candidates(self.reduced, added, self.forest, self.cover, self.clusterer)?;
        let origin: Vec<Option<usize>> = self
            .kept
            .iter()
            .map(|&k| Some(k))
            .chain(std::iter::repeat_n(None, added.len()))
            .collect();
        let r = check_restoration(self.original, &rebuilt, &origin, self.spec);
        Ok(VariantRow {
            variant: variant.to_string(),
            added: added.len(),
            restored: r.restored,
            unmatched: r.unmatched,
        })
    }

    /// One row for the filtered candidates, then one per downsampling rule.
    /// Neighbor counts are computed once on `filtered`.
    pub fn evaluate_variants(
        &self,
        filtered: &[BitFingerprint],
        rules: &[DownsampleRule],
        range: (f64, f64),
    ) -> Result<Vec<VariantRow>, CompletionError> {
        let mut rows = vec![self.evaluate("filtered", filtered)?];
        let counts = neighbor_counts(filtered, range);
        for rule in rules {
            let max = rule.threshold(&counts);
            let kept: Vec<BitFingerprint> = filtered
                .iter()
                .zip(&counts)
                .filter(|&(_, &c)| c <= max)
                .map(|(f, _)| f.clone())
                .collect();
            rows.push(self.evaluate(&rule.label(), &kept)?);
        }
        Ok(rows)
    }
}
