//! Spectral clustering of one level set: rbf affinity, symmetric-normalized
//! Laplacian, row-normalized eigenvector embedding, weighted k-means.

use super::Metric;
use crate::hash::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralParams {
    pub k: usize,
    pub gamma: f64,
    pub kmeans_restarts: usize,
    pub eigen_tolerance: f64,
    pub seed: u64,
    /// A k-way split is kept only when the smallest single-linkage gap between
    /// clusters exceeds this multiple of the largest minimum-spanning-tree edge
    /// inside any cluster. Zero keeps every split.
    pub min_gap_ratio: f64,
}

impl Default for SpectralParams {
    fn default() -> Self {
        SpectralParams {
            k: 2,
            gamma: 0.01,
            kmeans_restarts: 10,
            eigen_tolerance: 1e-8,
            seed: 0,
            min_gap_ratio: 2.0,
        }
    }
}

/// Eigen-decomposition of a dense symmetric matrix (row-major `n × n`) by
/// cyclic Jacobi rotations. Returns eigenvalues and column eigenvectors
/// (`vectors[row * n + col]`), sorted by descending eigenvalue.
pub fn jacobi_eigen(a: &[f64], n: usize, tolerance: f64) -> (Vec<f64>, Vec<f64>) {
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off < tolerance {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| m[b * n + b].total_cmp(&m[a * n + a]).then(a.cmp(&b)));
    let values: Vec<f64> = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        // fix the sign: largest-magnitude entry positive
        let mut pivot = 0;
        for row in 0..n {
            if v[row * n + src].abs() > v[pivot * n + src].abs() + 1e-12 {
                pivot = row;
            }
        }
        let sign = if v[pivot * n + src] < 0.0 { -1.0 } else { 1.0 };
        for row in 0..n {
            vectors[row * n + col] = sign * v[row * n + src];
        }
    }
    (values, vectors)
}

/// Groups identical points; returns representative members and multiplicities.
fn collapse<P: Metric + ?Sized>(points: &P, idx: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut reps: Vec<usize> = Vec::new();
    let mut group_of = Vec::with_capacity(idx.len());
    for &i in idx {
        match reps.iter().position(|&r| points.sq_dist(idx[r], i) == 0.0) {
            Some(g) => group_of.push(g),
            None => {
                group_of.push(reps.len());
                reps.push(group_of.len() - 1);
            }
        }
    }
    (reps, group_of)
}

/// Eigenvalues of the normalized Laplacian `I - D^-1/2 A D^-1/2`, ascending.
pub fn laplacian_spectrum<P: Metric + ?Sized>(points: &P, idx: &[usize], gamma: f64, tolerance: f64) -> Vec<f64> {
    let n = idx.len();
    let a = affinity(points, idx, gamma);
    let s = normalized(&a, &vec![1.0; n], n);
    let (values, _) = jacobi_eigen(&s, n, tolerance);
    values.iter().map(|v| 1.0 - v).collect()
}

fn affinity<P: Metric + ?Sized>(points: &P, idx: &[usize], gamma: f64) -> Vec<f64> {
    let n = idx.len();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        a[i * n + i] = 1.0;
        for j in (i + 1)..n {
            let w = (-gamma * points.sq_dist(idx[i], idx[j])).exp();
            a[i * n + j] = w;
            a[j * n + i] = w;
        }
    }
    a
}

/// `N^1/2 D^-1/2 A D^-1/2 N^1/2` with degrees `D = A N 1`, where `N` holds
/// multiplicities. For unit weights this is the usual `D^-1/2 A D^-1/2`.
fn normalized(a: &[f64], weights: &[f64], n: usize) -> Vec<f64> {
    let degree: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| a[i * n + j] * weights[j]).sum())
        .collect();
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            s[i * n + j] = (weights[i] * weights[j]).sqrt() * a[i * n + j] / (degree[i] * degree[j]).sqrt();
        }
    }
    s
}

fn sq_euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Weighted Lloyd iterations from seeded farthest-point starts; keeps the
/// lowest-inertia run. Returns labels per row.
pub fn kmeans(rows: &[Vec<f64>], weights: &[f64], k: usize, restarts: usize, seed: u64) -> Vec<usize> {
    let n = rows.len();
    let k = k.min(n);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for r in 0..restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, r as u64));
        let mut centers = vec![rows[rng.random_range(0..n)].clone()];
        while centers.len() < k {
            let far = (0..n)
                .map(|i| {
                    let d = centers
                        .iter()
                        .map(|c| sq_euclid(&rows[i], c))
                        .fold(f64::INFINITY, f64::min);
                    (d, i)
                })
                .fold((-1.0, 0), |acc, x| if x.0 > acc.0 { x } else { acc });
            centers.push(rows[far.1].clone());
        }
        let mut labels = vec![usize::MAX; n];
        for _ in 0..300 {
            let next: Vec<usize> = rows
                .iter()
                .map(|row| {
                    let mut best = 0;
                    for c in 1..centers.len() {
                        if sq_euclid(row, &centers[c]) < sq_euclid(row, &centers[best]) {
                            best = c;
                        }
                    }
                    best
                })
                .collect();
            if next == labels {
                break;
            }
            labels = next;
            for (c, center) in centers.iter_mut().enumerate() {
                let mut total = 0.0;
                let mut acc = vec![0.0; center.len()];
                for i in (0..n).filter(|&i| labels[i] == c) {
                    total += weights[i];
                    for (a, x) in acc.iter_mut().zip(&rows[i]) {
                        *a += weights[i] * x;
                    }
                }
                if total > 0.0 {
                    *center = acc.into_iter().map(|a| a / total).collect();
                }
            }
        }
        let inertia: f64 = (0..n)
            .map(|i| weights[i] * sq_euclid(&rows[i], &centers[labels[i]]))
            .sum();
        if best.as_ref().is_none_or(|(b, _)| inertia < *b) {
            best = Some((inertia, labels));
        }
    }
    best.map(|(_, l)| l).unwrap_or_default()
}

/// Renumbers labels by first appearance so equal partitions compare equal.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map: Vec<(usize, usize)> = Vec::new();
    labels
        .iter()
        .map(|&l| match map.iter().find(|(from, _)| *from == l) {
            Some(&(_, to)) => to,
            None => {
                map.push((l, map.len()));
                map.len() - 1
            }
        })
        .collect()
}

/// Smallest cross-cluster distance and largest intra-cluster MST edge, both as
/// plain (not squared) distances.
fn separation<P: Metric + ?Sized>(points: &P, idx: &[usize], labels: &[usize]) -> (f64, f64) {
    let n = idx.len();
    let dist = |i: usize, j: usize| points.sq_dist(idx[i], idx[j]).sqrt();
    let mut gap = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            if labels[i] != labels[j] {
                gap = gap.min(dist(i, j));
            }
        }
    }
    let mut spread: f64 = 0.0;
    let n_labels = labels.iter().max().map_or(0, |m| m + 1);
    for c in 0..n_labels {
        let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
        let mut in_tree = vec![false; members.len()];
        let mut best = vec![f64::INFINITY; members.len()];
        if members.is_empty() {
            continue;
        }
        best[0] = 0.0;
        for _ in 0..members.len() {
            let u = (0..members.len())
                .filter(|&v| !in_tree[v])
                .min_by(|&a, &b| best[a].total_cmp(&best[b]))
                .unwrap();
            in_tree[u] = true;
            spread = spread.max(best[u]);
            for v in 0..members.len() {
                if !in_tree[v] {
                    best[v] = best[v].min(dist(members[u], members[v]));
                }
            }
        }
    }
    (gap, spread)
}

/// Cluster labels (0-based, dense, by first appearance) for the points `idx`.
pub fn spectral_cluster<P: Metric + ?Sized>(points: &P, idx: &[usize], params: &SpectralParams) -> Vec<usize> {
    let n = idx.len();
    if n == 0 {
        return Vec::new();
    }
    if n < params.k {
        return (0..n).collect();
    }
    let (reps, group_of) = collapse(points, idx);
    let m = reps.len();
    if m == 1 || params.k <= 1 {
        return vec![0; n];
    }
    let rep_idx: Vec<usize> = reps.iter().map(|&r| idx[r]).collect();
    let mut weights = vec![0.0; m];
    for &g in &group_of {
        weights[g] += 1.0;
    }
    let k = params.k.min(m);
    let a = affinity(points, &rep_idx, params.gamma);
    let s = normalized(&a, &weights, m);
    let (_, vectors) = jacobi_eigen(&s, m, params.eigen_tolerance);
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let row: Vec<f64> = (0..k).map(|c| vectors[i * m + c] / weights[i].sqrt()).collect();
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.into_iter().map(|x| x / norm).collect()
            } else {
                row
            }
        })
        .collect();
    let rep_labels = kmeans(&rows, &weights, k, params.kmeans_restarts, params.seed);
    let labels = canonical_labels(&group_of.iter().map(|&g| rep_labels[g]).collect::<Vec<_>>());
    if params.min_gap_ratio > 0.0 && labels.iter().any(|&l| l > 0) {
        let (gap, spread) = separation(points, idx, &labels);
        if gap <= params.min_gap_ratio * spread {
            return vec![0; n];
        }
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fingerprint::BitFingerprint;

    fn blobs() -> Vec<BitFingerprint> {
        let mut pts = Vec::new();
        for i in 0..6 {
            pts.push(BitFingerprint::from_bits(128, (0..30).chain([40 + i])));
        }
        for i in 0..5 {
            pts.push(BitFingerprint::from_bits(128, (60..90).chain([100 + i])));
        }
        pts
    }

    #[test]
    fn jacobi_reconstructs() {
        let a = [4.0, 1.0, 2.0, 1.0, 3.0, 0.5, 2.0, 0.5, 1.0];
        let (vals, vecs) = jacobi_eigen(&a, 3, 1e-12);
        for i in 0..3 {
            for j in 0..3 {
                let r: f64 = (0..3).map(|k| vecs[i * 3 + k] * vals[k] * vecs[j * 3 + k]).sum();
                assert!((r - a[i * 3 + j]).abs() < 1e-9);
            }
        }
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn two_blobs_split() {
        let pts = blobs();
        let idx: Vec<usize> = (0..pts.len()).collect();
        let params = SpectralParams {
            gamma: 0.1,
            ..Default::default()
        };
        let labels = spectral_cluster(pts.as_slice(), &idx, &params);
        assert_eq!(labels, vec![0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn eigengap() {
        let pts = blobs();
        let idx: Vec<usize> = (0..pts.len()).collect();
        let spectrum = laplacian_spectrum(pts.as_slice(), &idx, 0.1, 1e-12);
        assert!(spectrum[2] >= 10.0 * spectrum[1], "{spectrum:?}");
    }

    #[test]
    fn degenerate_sizes() {
        let pts = blobs();
        let params = SpectralParams::default();
        assert_eq!(spectral_cluster(pts.as_slice(), &[3], &params), vec![0]);
        let same = vec![pts[0].clone(); 5];
        assert_eq!(spectral_cluster(same.as_slice(), &[0, 1, 2, 3, 4], &params), vec![0; 5]);
    }

    #[test]
    fn duplicates_follow_their_blob() {
        let mut pts = blobs();
        pts.push(pts[0].clone());
        pts.push(pts[7].clone());
        let idx: Vec<usize> = (0..pts.len()).collect();
        let params = SpectralParams {
            gamma: 0.1,
            ..Default::default()
        };
        let labels = spectral_cluster(pts.as_slice(), &idx, &params);
        assert_eq!(labels[11], labels[0]);
        assert_eq!(labels[12], labels[7]);
        assert_ne!(labels[0], labels[7]);
    }

    #[test]
    fn gap_rule_merges_a_continuum() {
        let line: Vec<[f64; 2]> = (0..20).map(|i| [i as f64 * 0.1, 0.0]).collect();
        let idx: Vec<usize> = (0..20).collect();
        let forced = SpectralParams {
            gamma: 1.0,
            min_gap_ratio: 0.0,
            ..Default::default()
        };
        assert_eq!(spectral_cluster(line.as_slice(), &idx, &forced).iter().max(), Some(&1));
        let gated = SpectralParams {
            min_gap_ratio: 2.0,
            ..forced
        };
        assert_eq!(spectral_cluster(line.as_slice(), &idx, &gated), vec![0; 20]);
    }
}
