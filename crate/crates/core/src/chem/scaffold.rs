use super::tokenize::{tokenize, Token, TokenKind};
use super::{parse_smiles, write_smiles, Atom, Bond, ChemError, Molecule};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Ring systems of a molecule plus the atoms linking them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaffold {
    pub core: Molecule,
    pub smiles: String,
    /// Token offsets (into `tokenize(smiles)`) of ring atoms that can take a substituent.
    pub placeholder_positions: Vec<usize>,
}

impl Scaffold {
    pub fn from_core(core: Molecule) -> Self {
        let smiles = write_smiles(&core);
        // positions are defined against the written string, so re-read it
        let reread = parse_smiles(&smiles).expect("written scaffold must parse");
        let tokens = tokenize(&smiles).expect("written scaffold must tokenize");
        let ring = reread.ring_atoms();
        let mut placeholder_positions = Vec::new();
        let mut atom_idx = 0;
        for (ti, tok) in tokens.tokens.iter().enumerate() {
            if tok.is_atom() {
                if ring[atom_idx] && reread.free_valence(atom_idx) > 0 {
                    placeholder_positions.push(ti);
                }
                atom_idx += 1;
            }
        }
        Scaffold {
            core,
            smiles,
            placeholder_positions,
        }
    }
}

/// Murcko decomposition: repeatedly strips acyclic atoms of degree <= 1, which
/// leaves ring atoms and every atom on a path between rings.
pub fn murcko_scaffold(mol: &Molecule) -> Result<Scaffold, ChemError> {
    let ring = mol.ring_atoms();
    if !ring.iter().any(|&r| r) {
        return Err(ChemError::NoRings);
    }
    let n = mol.atoms.len();
    let mut keep = vec![true; n];
    let mut degree: Vec<usize> = (0..n).map(|i| mol.degree(i)).collect();
    let mut stack: Vec<usize> = (0..n).filter(|&i| !ring[i] && degree[i] <= 1).collect();
    while let Some(a) = stack.pop() {
        if !keep[a] {
            continue;
        }
        keep[a] = false;
        for &(nb, _) in mol.neighbors(a) {
            if keep[nb] {
                degree[nb] -= 1;
                if !ring[nb] && degree[nb] <= 1 {
                    stack.push(nb);
                }
            }
        }
    }

    let mut remap = vec![usize::MAX; n];
    let mut atoms: Vec<Atom> = Vec::new();
    for (i, atom) in mol.atoms.iter().enumerate() {
        if keep[i] {
            remap[i] = atoms.len();
            atoms.push(atom.clone());
        }
    }
    let bonds: Vec<Bond> = mol
        .bonds
        .iter()
        .filter(|b| keep[b.a] && keep[b.b])
        .map(|b| Bond {
            a: remap[b.a],
            b: remap[b.b],
            order: b.order,
        })
        .collect();
    Ok(Scaffold::from_core(Molecule::from_parts(atoms, bonds)))
}

/// Inserts `count` branch placeholders `(*)` after randomly chosen attachment
/// atoms of the scaffold. The choice is fixed by `seed`.
pub fn insert_placeholders(scaffold: &Scaffold, count: usize, seed: u64) -> Result<String, ChemError> {
    let available = scaffold.placeholder_positions.len();
    if count > available {
        return Err(ChemError::TooManyPlaceholders {
            requested: count,
            available,
        });
    }
    if count == 0 {
        return Ok(scaffold.smiles.clone());
    }
    let tokens = tokenize(&scaffold.smiles)?.tokens;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = sample(&mut rng, available, count)
        .into_iter()
        .map(|k| scaffold.placeholder_positions[k])
        .collect();
    chosen.sort_unstable();

    // a branch must follow the atom's ring-bond digits, so skip past them
    let mut insert_after = Vec::with_capacity(count);
    for &pos in &chosen {
        let mut end = pos;
        loop {
            match tokens.get(end + 1).map(|t| &t.kind) {
                Some(TokenKind::RingBond(_)) => end += 1,
                Some(TokenKind::Bond)
                    if matches!(tokens.get(end + 2).map(|t| &t.kind), Some(TokenKind::RingBond(_))) =>
                {
                    end += 2
                }
                _ => break,
            }
        }
        insert_after.push(end);
    }

    let mut out = String::with_capacity(scaffold.smiles.len() + 3 * count);
    for (i, tok) in tokens.iter().enumerate() {
        out.push_str(&tok.text);
        for _ in insert_after.iter().filter(|&&e| e == i) {
            out.push_str("(*)");
        }
    }
    Ok(out)
}

/// Removes placeholder tokens, recovering the bare scaffold string.
pub fn strip_placeholders(tokens: &[Token]) -> String {
    tokens
        .iter()
        .filter(|t| !t.is_placeholder())
        .map(|t| t.text.as_str())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scaffold_of(s: &str) -> Scaffold {
        murcko_scaffold(&parse_smiles(s).unwrap()).unwrap()
    }

    #[test]
    fn toluene_to_benzene() {
        let sc = scaffold_of("Cc1ccccc1");
        assert_eq!(sc.core.atom_count(), 6);
        assert!(sc.core.is_isomorphic_to(&parse_smiles("c1ccccc1").unwrap()));
    }

    #[test]
    fn diphenyl_methyl_sulfonium() {
        let sc = scaffold_of("c1ccccc1[S+](c2ccccc2)C");
        assert_eq!(sc.core.atom_count(), 13);
        let expected = parse_smiles("c1ccccc1[S+]c1ccccc1").unwrap();
        assert!(sc.core.is_isomorphic_to(&expected));
    }

    #[test]
    fn acyclic_has_no_scaffold() {
        assert_eq!(murcko_scaffold(&parse_smiles("CCC").unwrap()), Err(ChemError::NoRings));
    }

    #[test]
    fn linker_chain_kept() {
        let sc = scaffold_of("CCc1ccc(CCc2ccccc2)cc1");
        assert_eq!(sc.core.atom_count(), 14);
    }

    #[test]
    fn idempotent() {
        for s in [
            "c1ccc(cc1)[S+](c2ccccc2)c3ccccc3",
            "CCOc1ccc(cc1)[I+]c1ccc(C)cc1",
            "C1CC[S+](C1)CC(=O)c1ccccc1",
        ] {
            let once = scaffold_of(s);
            let twice = murcko_scaffold(&once.core).unwrap();
            assert_eq!(once.smiles, twice.smiles);
            assert!(once.core.is_isomorphic_to(&twice.core));
        }
    }

    #[test]
    fn placeholder_counts() {
        let benzene = scaffold_of("c1ccccc1");
        assert_eq!(benzene.placeholder_positions.len(), 6);
        assert_eq!(insert_placeholders(&benzene, 0, 1).unwrap(), "c1ccccc1");
        assert_eq!(
            insert_placeholders(&benzene, 7, 1),
            Err(ChemError::TooManyPlaceholders {
                requested: 7,
                available: 6
            })
        );
    }

    #[test]
    fn placeholder_insertion_enumerated() {
        // every legal single insertion for benzene, written out by hand
        let legal = [
            "c1(*)ccccc1",
            "c1c(*)cccc1",
            "c1cc(*)ccc1",
            "c1ccc(*)cc1",
            "c1cccc(*)c1",
            "c1ccccc1(*)",
        ];
        let benzene = scaffold_of("c1ccccc1");
        let out = insert_placeholders(&benzene, 1, 7).unwrap();
        assert!(legal.contains(&out.as_str()), "{out}");
        assert_eq!(out, insert_placeholders(&benzene, 1, 7).unwrap());
        let mut seen = std::collections::HashSet::new();
        for seed in 0..200 {
            seen.insert(insert_placeholders(&benzene, 1, seed).unwrap());
        }
        assert_eq!(seen.len(), 6);
        assert!(seen.iter().all(|s| legal.contains(&s.as_str())));
    }

    #[test]
    fn onium_center_without_free_valence_is_skipped() {
        // S+ with three aryl groups is saturated; it is not a ring atom anyway
        let sc = scaffold_of("c1ccc(cc1)[S+](c2ccccc2)c3ccccc3");
        let tokens = tokenize(&sc.smiles).unwrap();
        for &p in &sc.placeholder_positions {
            assert_eq!(tokens.tokens[p].text, "c");
        }
        assert_eq!(sc.placeholder_positions.len(), 15);
        let out = insert_placeholders(&sc, 3, 11).unwrap();
        let toks = tokenize(&out).unwrap();
        assert_eq!(strip_placeholders(&toks.tokens), sc.smiles);
    }
}
