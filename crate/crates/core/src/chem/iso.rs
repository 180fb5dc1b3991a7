use super::Molecule;
use crate::hash::{combine, mix64};

fn atom_label(mol: &Molecule, i: usize) -> u64 {
    let a = &mol.atoms[i];
    let mut h = mix64(a.element.atomic_number() as u64);
    h = combine(h, (a.formal_charge as i64 + 8) as u64);
    h = combine(h, a.aromatic as u64);
    h = combine(h, a.total_h() as u64);
    combine(h, mol.degree(i) as u64)
}

/// Iterated neighborhood refinement; equal graphs produce equal class vectors
/// up to permutation.
fn refine(mol: &Molecule) -> Vec<u64> {
    let n = mol.atoms.len();
    let mut colors: Vec<u64> = (0..n).map(|i| atom_label(mol, i)).collect();
    for _ in 0..n.min(8) {
        let next: Vec<u64> = (0..n)
            .map(|i| {
                let mut env: Vec<u64> = mol
                    .neighbors(i)
                    .iter()
                    .map(|&(j, bi)| combine(mol.bonds[bi].order.code(), colors[j]))
                    .collect();
                env.sort_unstable();
                env.into_iter().fold(mix64(colors[i]), combine)
            })
            .collect();
        colors = next;
    }
    colors
}

pub(crate) fn isomorphic(a: &Molecule, b: &Molecule) -> bool {
    if a.atoms.len() != b.atoms.len() || a.bonds.len() != b.bonds.len() {
        return false;
    }
    let ca = refine(a);
    let cb = refine(b);
    let mut sa = ca.clone();
    let mut sb = cb.clone();
    sa.sort_unstable();
    sb.sort_unstable();
    if sa != sb {
        return false;
    }

    // BFS order over `a` so each new atom (after a component root) has a mapped neighbor
    let n = a.atoms.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(x) = queue.pop_front() {
            order.push(x);
            for &(y, _) in a.neighbors(x) {
                if !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
    }

    let mut map_ab = vec![usize::MAX; n];
    let mut map_ba = vec![usize::MAX; n];
    extend(a, b, &ca, &cb, &order, 0, &mut map_ab, &mut map_ba)
}

#[allow(clippy::too_many_arguments)]
fn extend(
    a: &Molecule,
    b: &Molecule,
    ca: &[u64],
    cb: &[u64],
    order: &[usize],
    depth: usize,
    map_ab: &mut [usize],
    map_ba: &mut [usize],
) -> bool {
    if depth == order.len() {
        return true;
    }
    let x = order[depth];
    // candidates: neighbors of an already-mapped neighbor's image, else all atoms
    let anchor = a
        .neighbors(x)
        .iter()
        .find(|(y, _)| map_ab[*y] != usize::MAX)
        .map(|(y, _)| map_ab[*y]);
    let candidates: Vec<usize> = match anchor {
        Some(img) => b.neighbors(img).iter().map(|(z, _)| *z).collect(),
        None => (0..b.atoms.len()).collect(),
    };
    for z in candidates {
        if map_ba[z] != usize::MAX || cb[z] != ca[x] {
            continue;
        }
        let consistent = a.neighbors(x).iter().all(|&(y, bi)| {
            let img = map_ab[y];
            if img == usize::MAX {
                return true;
            }
            match b.bond_between(z, img) {
                Some(bond) => bond.order == a.bonds[bi].order,
                None => false,
            }
        });
        // mapped neighbors of z must be images of neighbors of x
        let reverse = b.neighbors(z).iter().all(|&(w, _)| {
            let pre = map_ba[w];
            pre == usize::MAX || a.bond_between(x, pre).is_some()
        });
        if consistent && reverse {
            map_ab[x] = z;
            map_ba[z] = x;
            if extend(a, b, ca, cb, order, depth + 1, map_ab, map_ba) {
                return true;
            }
            map_ab[x] = usize::MAX;
            map_ba[z] = usize::MAX;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use crate::chem::parse_smiles;

    #[test]
    fn permuted_smiles_are_isomorphic() {
        let a = parse_smiles("c1ccc(cc1)[S+](c2ccccc2)C").unwrap();
        let b = parse_smiles("C[S+](c1ccccc1)c1ccccc1").unwrap();
        assert!(a.is_isomorphic_to(&b));
    }

    #[test]
    fn different_graphs() {
        let a = parse_smiles("CCCC").unwrap();
        let b = parse_smiles("CC(C)C").unwrap();
        assert!(!a.is_isomorphic_to(&b));
        let c = parse_smiles("C1CCCCC1").unwrap();
        let d = parse_smiles("c1ccccc1").unwrap();
        assert!(!c.is_isomorphic_to(&d));
        // same degree sequences, different rings
        let e = parse_smiles("C1CC1C1CC1").unwrap();
        let f = parse_smiles("C1CCCCC1").unwrap();
        assert!(!e.is_isomorphic_to(&f));
    }
}
