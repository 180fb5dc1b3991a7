use super::MapperGraph;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flare {
    /// From the degree-1 tip inward; every node has degree ≤ 2.
    pub path: Vec<usize>,
    /// Degree ≥ 3 node the chain hangs from.
    pub anchor: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureReport {
    pub components: Vec<Vec<usize>>,
    /// Cycle rank `E - V + C`.
    pub loops: usize,
    /// One fundamental cycle per non-tree edge of a BFS spanning forest.
    pub cycles: Vec<Vec<usize>>,
    pub flares: Vec<Flare>,
}

impl FeatureReport {
    pub fn component_count(&self) -> usize {
        self.components.len()
    }
}

/// Components, cycle basis and flares. A flare must span at least
/// `min_flare_len` nodes.
pub fn detect_features(g: &MapperGraph, min_flare_len: usize) -> FeatureReport {
    let n = g.nodes.len();
    let adj = g.adjacency();

    let mut parent = vec![usize::MAX; n];
    let mut depth = vec![0usize; n];
    let mut seen = vec![false; n];
    let mut components = Vec::new();
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut comp = vec![root];
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            let mut nbrs = adj[u].clone();
            nbrs.sort_unstable();
            for v in nbrs {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = u;
                    depth[v] = depth[u] + 1;
                    comp.push(v);
                    queue.push_back(v);
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }

    let mut cycles = Vec::new();
    for e in &g.edges {
        if parent[e.v] == e.u || parent[e.u] == e.v {
            continue;
        }
        let (mut a, mut b) = (e.u, e.v);
        let mut left = vec![a];
        let mut right = vec![b];
        while a != b {
            if depth[a] >= depth[b] {
                a = parent[a];
                left.push(a);
            } else {
                b = parent[b];
                right.push(b);
            }
        }
        right.pop();
        right.reverse();
        left.extend(right);
        cycles.push(left);
    }

    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut flares = Vec::new();
    for tip in (0..n).filter(|&i| degree[i] == 1) {
        let mut path = vec![tip];
        let (mut prev, mut cur) = (tip, adj[tip][0]);
        while degree[cur] == 2 {
            path.push(cur);
            let next = if adj[cur][0] == prev { adj[cur][1] } else { adj[cur][0] };
            prev = cur;
            cur = next;
        }
        if degree[cur] >= 3 && path.len() >= min_flare_len {
            flares.push(Flare { path, anchor: cur });
        }
    }

    FeatureReport {
        loops: g.edges.len() + components.len() - n,
        components,
        cycles,
        flares,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapper::{MapperEdge, MapperNode};

    fn graph(n: usize, edges: &[(usize, usize)]) -> MapperGraph {
        let nodes = (0..n)
            .map(|id| MapperNode {
                id,
                interval_index: 0,
                cluster_index: 0,
                members: vec![id],
                mean_lens: 0.0,
            })
            .collect();
        let mut edges: Vec<MapperEdge> = edges
            .iter()
            .map(|&(u, v)| MapperEdge {
                u: u.min(v),
                v: u.max(v),
                intersection: 1,
            })
            .collect();
        edges.sort();
        MapperGraph { nodes, edges }
    }

    #[test]
    fn triangle() {
        let r = detect_features(&graph(3, &[(0, 1), (1, 2), (0, 2)]), 2);
        assert_eq!((r.component_count(), r.loops, r.flares.len()), (1, 1, 0));
        assert_eq!(r.cycles.len(), 1);
        assert_eq!(r.cycles[0].len(), 3);
    }

    #[test]
    fn path() {
        let r = detect_features(&graph(4, &[(0, 1), (1, 2), (2, 3)]), 2);
        assert_eq!((r.component_count(), r.loops, r.flares.len()), (1, 0, 0));
    }

    #[test]
    fn star_with_tail() {
        // center 0, leaves 1..=3, tail 4-5-6
        let r = detect_features(&graph(7, &[(0, 1), (0, 2), (0, 3), (0, 4), (4, 5), (5, 6)]), 2);
        assert_eq!(r.loops, 0);
        assert_eq!(
            r.flares,
            vec![Flare {
                path: vec![6, 5, 4],
                anchor: 0
            }]
        );
        let all = detect_features(&graph(7, &[(0, 1), (0, 2), (0, 3), (0, 4), (4, 5), (5, 6)]), 1);
        assert_eq!(all.flares.len(), 4);
    }

    #[test]
    fn cycle_rank_with_components() {
        let r = detect_features(&graph(7, &[(0, 1), (1, 2), (2, 0), (2, 3), (3, 0), (5, 6)]), 2);
        assert_eq!(r.component_count(), 3);
        assert_eq!(r.loops, 6 + 3 - 7);
        assert_eq!(r.cycles.len(), r.loops);
    }
}
