use super::Molecule;
use std::collections::VecDeque;

/// Smallest set of smallest rings. Candidate cycles are the shortest cycle
/// through every ring bond; an independent subset of size E - V + C is picked
/// smallest-first by GF(2) elimination over bond incidence.
pub(crate) fn smallest_rings(mol: &Molecule) -> Vec<Vec<usize>> {
    let n_bonds = mol.bonds.len();
    let rank = n_bonds + mol.component_count() - mol.atoms.len();
    if rank == 0 {
        return Vec::new();
    }

    let mut candidates: Vec<Vec<usize>> = Vec::new();
    for (bi, bond) in mol.bonds.iter().enumerate() {
        if let Some(path) = shortest_path_avoiding(mol, bond.b, bond.a, bi) {
            candidates.push(path);
        }
    }
    candidates.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| canonical(a).cmp(&canonical(b))));
    candidates.dedup_by(|a, b| canonical(a) == canonical(b));

    let words = n_bonds.div_ceil(64);
    let mut basis: Vec<(usize, Vec<u64>)> = Vec::new();
    let mut rings = Vec::new();
    for cycle in candidates {
        let mut v = vec![0u64; words];
        for k in 0..cycle.len() {
            let a = cycle[k];
            let b = cycle[(k + 1) % cycle.len()];
            let (_, bi) = mol.neighbors(a).iter().find(|(n, _)| *n == b).copied().unwrap();
            v[bi / 64] ^= 1 << (bi % 64);
        }
        for (pivot, row) in &basis {
            if v[pivot / 64] >> (pivot % 64) & 1 == 1 {
                for (x, y) in v.iter_mut().zip(row) {
                    *x ^= y;
                }
            }
        }
        if let Some(pivot) = highest_bit(&v) {
            basis.push((pivot, v));
            rings.push(cycle);
            if rings.len() == rank {
                break;
            }
        }
    }
    rings
}

fn highest_bit(v: &[u64]) -> Option<usize> {
    v.iter()
        .enumerate()
        .rev()
        .find(|(_, w)| **w != 0)
        .map(|(i, w)| i * 64 + 63 - w.leading_zeros() as usize)
}

fn canonical(cycle: &[usize]) -> Vec<usize> {
    let mut c = cycle.to_vec();
    c.sort_unstable();
    c
}

/// Shortest path from `from` to `to` without traversing bond `skip`; the
/// returned atom sequence closes into a cycle through the skipped bond.
fn shortest_path_avoiding(mol: &Molecule, from: usize, to: usize, skip: usize) -> Option<Vec<usize>> {
    let mut parent = vec![usize::MAX; mol.atoms.len()];
    let mut queue = VecDeque::new();
    parent[from] = from;
    queue.push_back(from);
    while let Some(a) = queue.pop_front() {
        if a == to {
            break;
        }
        for &(n, bi) in mol.neighbors(a) {
            if bi == skip || parent[n] != usize::MAX {
                continue;
            }
            parent[n] = a;
            queue.push_back(n);
        }
    }
    if parent[to] == usize::MAX {
        return None;
    }
    let mut path = vec![to];
    let mut cur = to;
    while cur != from {
        cur = parent[cur];
        path.push(cur);
    }
    Some(path)
}
