use super::{BondOrder, Molecule};
use std::fmt::Write as _;

/// Serializes a molecule to SMILES by depth-first traversal from the lowest
/// unvisited atom index, visiting neighbors in index order. Not canonical, but
/// deterministic for a given atom ordering.
pub fn write_smiles(mol: &Molecule) -> String {
    let n = mol.atoms.len();
    let mut order = vec![usize::MAX; n];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut is_tree = vec![false; mol.bonds.len()];
    let mut roots = Vec::new();
    let mut counter = 0;

    for root in 0..n {
        if order[root] != usize::MAX {
            continue;
        }
        roots.push(root);
        // iterative DFS with explicit neighbor cursor to keep preorder exact
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        order[root] = counter;
        counter += 1;
        while let Some(&mut (atom, ref mut cursor)) = stack.last_mut() {
            let nbrs = mol.neighbors(atom);
            if *cursor >= nbrs.len() {
                stack.pop();
                continue;
            }
            let (next, bi) = nbrs[*cursor];
            *cursor += 1;
            if order[next] == usize::MAX {
                order[next] = counter;
                counter += 1;
                is_tree[bi] = true;
                children[atom].push(next);
                stack.push((next, 0));
            }
        }
    }

    // ring closures: non-tree bonds, opened at the endpoint visited first
    let mut opens: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut closes: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (bi, bond) in mol.bonds.iter().enumerate() {
        if is_tree[bi] {
            continue;
        }
        let (first, second) = if order[bond.a] < order[bond.b] {
            (bond.a, bond.b)
        } else {
            (bond.b, bond.a)
        };
        opens[first].push(bi);
        closes[second].push(bi);
    }
    for list in opens.iter_mut().chain(closes.iter_mut()) {
        list.sort_by_key(|&bi| {
            let b = &mol.bonds[bi];
            (order[b.a].max(order[b.b]), order[b.a].min(order[b.b]))
        });
    }

    let mut out = String::new();
    let mut digit_of = vec![0u32; mol.bonds.len()];
    let mut in_use: Vec<bool> = vec![false; 100];
    for (ci, &root) in roots.iter().enumerate() {
        if ci > 0 {
            out.push('.');
        }
        emit(
            mol,
            root,
            &children,
            &opens,
            &closes,
            &mut digit_of,
            &mut in_use,
            &mut out,
        );
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn emit(
    mol: &Molecule,
    root: usize,
    children: &[Vec<usize>],
    opens: &[Vec<usize>],
    closes: &[Vec<usize>],
    digit_of: &mut [u32],
    in_use: &mut [bool],
    out: &mut String,
) {
    enum Step {
        Atom(usize, Option<usize>),
        Open,
        Close,
    }
    let mut stack = vec![Step::Atom(root, None)];
    while let Some(step) = stack.pop() {
        let (atom, parent) = match step {
            Step::Open => {
                out.push('(');
                continue;
            }
            Step::Close => {
                out.push(')');
                continue;
            }
            Step::Atom(a, p) => (a, p),
        };
        if let Some(p) = parent {
            let bond = mol.bond_between(p, atom).expect("tree bond");
            out.push_str(bond_symbol(mol, p, atom, bond.order));
        }
        write_atom(mol, atom, out);

        for &bi in &closes[atom] {
            let d = digit_of[bi];
            in_use[d as usize] = false;
            let b = &mol.bonds[bi];
            out.push_str(bond_symbol(mol, b.a, b.b, b.order));
            push_digit(out, d);
        }
        for &bi in &opens[atom] {
            let d = (1..100).find(|&d| !in_use[d]).expect("ring digits exhausted") as u32;
            in_use[d as usize] = true;
            digit_of[bi] = d;
            push_digit(out, d);
        }

        // pushed in reverse emission order: "(" child ")" ... last
        if let Some((&last, rest)) = children[atom].split_last() {
            stack.push(Step::Atom(last, Some(atom)));
            for &k in rest.iter().rev() {
                stack.push(Step::Close);
                stack.push(Step::Atom(k, Some(atom)));
                stack.push(Step::Open);
            }
        }
    }
}

fn push_digit(out: &mut String, d: u32) {
    if d < 10 {
        out.push(char::from(b'0' + d as u8));
    } else {
        let _ = write!(out, "%{d:02}");
    }
}

fn bond_symbol(mol: &Molecule, a: usize, b: usize, order: BondOrder) -> &'static str {
    let both_aromatic = mol.atoms[a].aromatic && mol.atoms[b].aromatic;
    match order {
        BondOrder::Single if both_aromatic => "-",
        BondOrder::Single => "",
        BondOrder::Aromatic if both_aromatic => "",
        BondOrder::Aromatic => ":",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
    }
}

fn write_atom(mol: &Molecule, idx: usize, out: &mut String) {
    let atom = &mol.atoms[idx];
    let symbol = atom.element.symbol();
    let bare = !atom.bracket
        && atom.formal_charge == 0
        && atom.isotope.is_none()
        && atom.element.is_organic_subset()
        && (!atom.aromatic || atom.element.can_be_aromatic());
    if bare {
        if atom.aromatic {
            out.push_str(&symbol.to_ascii_lowercase());
        } else {
            out.push_str(symbol);
        }
        return;
    }
    out.push('[');
    if let Some(iso) = atom.isotope {
        let _ = write!(out, "{iso}");
    }
    if atom.aromatic {
        out.push_str(&symbol.to_ascii_lowercase());
    } else {
        out.push_str(symbol);
    }
    match atom.total_h() {
        0 => {}
        1 => out.push('H'),
        h => {
            let _ = write!(out, "H{h}");
        }
    }
    match atom.formal_charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 0 => {
            let _ = write!(out, "+{c}");
        }
        c => {
            let _ = write!(out, "-{}", -c);
        }
    }
    out.push(']');
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn round_trip(s: &str) -> String {
        let m = parse_smiles(s).unwrap();
        let w = write_smiles(&m);
        let m2 = parse_smiles(&w).unwrap_or_else(|e| panic!("{s} -> {w}: {e}"));
        assert!(m.is_isomorphic_to(&m2), "{s} -> {w}");
        w
    }

    #[test]
    fn single_carbon() {
        assert_eq!(round_trip("C"), "C");
    }

    #[test]
    fn sulfonium() {
        assert_eq!(round_trip("C[S+](C)C"), "C[S+](C)C");
    }

    #[test]
    fn benzene_is_aromatic_six_cycle() {
        let w = round_trip("c1ccccc1");
        let m = parse_smiles(&w).unwrap();
        assert_eq!(m.atom_count(), 6);
        assert_eq!(m.ring_info.len(), 1);
        assert!(m.bonds.iter().all(|b| b.order == BondOrder::Aromatic));
        assert!(m.atoms.iter().all(|a| a.aromatic));
    }

    #[test]
    fn assorted() {
        for s in [
            "c1ccc(cc1)[S+](c2ccccc2)c3ccccc3",
            "C12C3C4C1C5C2C3C45",
            "c1ccc2ccccc2c1",
            "C[N+](C)(C)CC(=O)[O-]",
            "c1ccccc1-c1ccccc1",
            "C#N.[Na+].[Cl-]",
            "[13CH4]",
            "c1cc:c(C)cc1",
            "FC(F)(F)S(=O)(=O)[O-].c1ccc([I+]c2ccccc2)cc1",
        ] {
            round_trip(s);
        }
    }
}
