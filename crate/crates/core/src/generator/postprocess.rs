use super::GeneratorError;
use crate::chem::{parse_smiles, Molecule, Token, TokenKind};
use std::collections::{BTreeMap, HashMap};

/// Parses and additionally requires every aromatic atom to sit in a ring.
pub fn validate_candidate(smiles: &str) -> Result<Molecule, GeneratorError> {
    let mol = parse_smiles(smiles).map_err(|_| GeneratorError::UnparseableResult)?;
    let ring = mol.ring_atoms();
    if mol.atoms.iter().zip(&ring).any(|(a, &r)| a.aromatic && !r) {
        return Err(GeneratorError::UnparseableResult);
    }
    Ok(mol)
}

fn ring_text(d: u32) -> String {
    if d < 10 {
        d.to_string()
    } else {
        format!("%{d:02}")
    }
}

/// Repairs a raw token sequence:
/// a single dangling ring digit is deleted, ring pairs are renumbered when a
/// digit appears more than twice, and a single unclosed branch is closed at
/// the end. Anything else that fails to parse is rejected.
pub fn postprocess(raw: &[String]) -> Result<String, GeneratorError> {
    let kinds: Vec<Option<TokenKind>> = raw.iter().map(|t| Token::from_text(t).map(|t| t.kind)).collect();
    if kinds.iter().any(Option::is_none) {
        return Err(GeneratorError::Unrepairable);
    }
    let kinds: Vec<TokenKind> = kinds.into_iter().flatten().collect();

    let mut depth = 0usize;
    for k in &kinds {
        match k {
            TokenKind::BranchOpen => depth += 1,
            TokenKind::BranchClose => {
                depth = depth.checked_sub(1).ok_or(GeneratorError::Unrepairable)?;
            }
            _ => {}
        }
    }
    if depth > 1 {
        return Err(GeneratorError::Unrepairable);
    }

    // pair ring digits left to right
    let mut open: HashMap<u32, usize> = HashMap::new();
    let mut partner: BTreeMap<usize, usize> = BTreeMap::new();
    let mut uses: HashMap<u32, usize> = HashMap::new();
    for (i, k) in kinds.iter().enumerate() {
        if let TokenKind::RingBond(d) = k {
            *uses.entry(*d).or_default() += 1;
            match open.remove(d) {
                Some(j) => {
                    partner.insert(j, i);
                }
                None => {
                    open.insert(*d, i);
                }
            }
        }
    }
    let dangling: Option<usize> = match open.len() {
        0 => None,
        1 => open.values().next().copied(),
        _ => return Err(GeneratorError::Unrepairable),
    };

    let mut out: Vec<String> = Vec::with_capacity(raw.len() + 1);
    if uses.values().any(|&c| c > 2) {
        let mut in_use: BTreeMap<usize, u32> = BTreeMap::new();
        let mut busy: Vec<u32> = Vec::new();
        for (i, (t, k)) in raw.iter().zip(&kinds).enumerate() {
            if Some(i) == dangling {
                continue;
            }
            if matches!(k, TokenKind::RingBond(_)) {
                if let Some(&close) = partner.get(&i) {
                    let d = (1..).find(|d| !busy.contains(d)).expect("unbounded range");
                    busy.push(d);
                    in_use.insert(close, d);
                    out.push(ring_text(d));
                } else {
                    let d = in_use.remove(&i).ok_or(GeneratorError::Unrepairable)?;
                    busy.retain(|&x| x != d);
                    out.push(ring_text(d));
                }
            } else {
                out.push(t.clone());
            }
        }
    } else {
        out.extend(
            raw.iter()
                .enumerate()
                .filter(|(i, _)| Some(*i) != dangling)
                .map(|(_, t)| t.clone()),
        );
    }
    if depth == 1 {
        out.push(")".to_string());
    }

    let smiles = out.concat();
    validate_candidate(&smiles).map_err(|_| GeneratorError::Unrepairable)?;
    Ok(smiles)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn dangling_digit_removed() {
        assert_eq!(postprocess(&toks(&["C", "1", "C", "C", "C"])).unwrap(), "CCCC");
    }

    #[test]
    fn unclosed_branch_closed() {
        assert_eq!(postprocess(&toks(&["C", "(", "C"])).unwrap(), "C(C)");
        assert!(postprocess(&toks(&["C", "(", "C", "(", "C"])).is_err());
        assert!(postprocess(&toks(&["C", ")", "C"])).is_err());
    }

    #[test]
    fn reused_digits_renumbered() {
        let s = postprocess(&toks(&["C", "1", "C", "C", "1", "C", "1", "C", "C", "1"])).unwrap();
        assert_eq!(s, "C1CC1C1CC1");
        let s = postprocess(&toks(&["C", "2", "C", "C", "2", "C", "2", "C", "C", "C", "2"])).unwrap();
        assert_eq!(s, "C1CC1C1CCC1");
    }

    #[test]
    fn valid_input_untouched() {
        assert_eq!(
            postprocess(&toks(&["c", "1", "c", "c", "c", "c", "c", "1"])).unwrap(),
            "c1ccccc1"
        );
    }

    #[test]
    fn aromatic_outside_ring_rejected() {
        assert!(validate_candidate("cc").is_err());
        assert!(postprocess(&toks(&["c", "c"])).is_err());
    }
}
