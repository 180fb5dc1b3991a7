use super::tokenize::{tokenize, TokenKind};
use super::{Atom, Bond, BondOrder, ChemError, Element, Molecule};
use std::collections::HashMap;

/// Parses a SMILES string into a molecular graph.
///
/// Supported: organic subset, bracket atoms (isotope, H count, charge, class),
/// branches, ring bonds including `%nn`, dot-disconnection and lowercase
/// aromatic atoms. Chirality and bond-direction marks are accepted and dropped.
pub fn parse_smiles(text: &str) -> Result<Molecule, ChemError> {
    if text.is_empty() {
        return Err(ChemError::EmptyInput);
    }
    let stream = tokenize(text)?;

    let mut atoms: Vec<Atom> = Vec::new();
    let mut bonds: Vec<Bond> = Vec::new();
    let mut prev: Option<usize> = None;
    let mut pending: Option<(BondOrder, usize)> = None;
    let mut branches: Vec<(usize, usize)> = Vec::new();
    let mut branch_needs_atom = false;
    let mut rings: HashMap<u32, (usize, Option<BondOrder>)> = HashMap::new();
    let mut pos = 0usize;

    for token in &stream.tokens {
        let here = pos;
        pos += token.text.len();
        match &token.kind {
            TokenKind::Atom => {
                let atom = if token.text.starts_with('[') {
                    parse_bracket(&token.text, here)?
                } else {
                    organic_atom(&token.text)?
                };
                let idx = atoms.len();
                atoms.push(atom);
                if let Some(p) = prev {
                    let order = match pending.take() {
                        Some((o, _)) => o,
                        None => default_order(&atoms[p], &atoms[idx]),
                    };
                    bonds.push(Bond { a: p, b: idx, order });
                } else if pending.is_some() {
                    return Err(ChemError::InvalidSyntax {
                        pos: here,
                        msg: "bond without a preceding atom",
                    });
                }
                prev = Some(idx);
                branch_needs_atom = false;
            }
            TokenKind::Bond => {
                if prev.is_none() || pending.is_some() {
                    return Err(ChemError::InvalidSyntax {
                        pos: here,
                        msg: "misplaced bond symbol",
                    });
                }
                let order = match token.text.as_str() {
                    "-" | "/" | "\\" => BondOrder::Single,
                    "=" => BondOrder::Double,
                    "#" => BondOrder::Triple,
                    ":" => BondOrder::Aromatic,
                    _ => {
                        return Err(ChemError::InvalidSyntax {
                            pos: here,
                            msg: "quadruple bonds are not supported",
                        })
                    }
                };
                pending = Some((order, here));
            }
            TokenKind::BranchOpen => {
                let Some(p) = prev else {
                    return Err(ChemError::InvalidSyntax {
                        pos: here,
                        msg: "branch without a preceding atom",
                    });
                };
                if pending.is_some() || branch_needs_atom {
                    return Err(ChemError::InvalidSyntax {
                        pos: here,
                        msg: "branch must start after an atom",
                    });
                }
                branches.push((p, here));
                branch_needs_atom = true;
            }
            TokenKind::BranchClose => {
                let Some((p, _)) = branches.pop() else {
                    return Err(ChemError::UnbalancedBranch(here));
                };
                if pending.is_some() || branch_needs_atom {
                    return Err(ChemError::InvalidSyntax {
                        pos: here,
                        msg: "empty branch or dangling bond",
                    });
                }
                prev = Some(p);
            }
            TokenKind::RingBond(n) => {
                let Some(p) = prev else {
                    return Err(ChemError::InvalidSyntax {
                        pos: here,
                        msg: "ring bond without a preceding atom",
                    });
                };
                if branch_needs_atom {
                    return Err(ChemError::InvalidSyntax {
                        pos: here,
                        msg: "ring bond directly after branch open",
                    });
                }
                let here_order = pending.take().map(|(o, _)| o);
                match rings.remove(n) {
                    None => {
                        rings.insert(*n, (p, here_order));
                    }
                    Some((open, open_order)) => {
                        if open == p {
                            return Err(ChemError::InvalidSyntax {
                                pos: here,
                                msg: "ring bond closes on its own atom",
                            });
                        }
                        if bonds
                            .iter()
                            .any(|b| (b.a == open && b.b == p) || (b.a == p && b.b == open))
                        {
                            return Err(ChemError::InvalidSyntax {
                                pos: here,
                                msg: "duplicate bond",
                            });
                        }
                        let order = match (open_order, here_order) {
                            (Some(a), Some(b)) if a != b => {
                                return Err(ChemError::InvalidSyntax {
                                    pos: here,
                                    msg: "conflicting ring bond orders",
                                })
                            }
                            (Some(a), _) | (None, Some(a)) => a,
                            (None, None) => default_order(&atoms[open], &atoms[p]),
                        };
                        bonds.push(Bond { a: open, b: p, order });
                    }
                }
            }
            TokenKind::Dot => {
                if prev.is_none() || pending.is_some() || branch_needs_atom {
                    return Err(ChemError::InvalidSyntax {
                        pos: here,
                        msg: "misplaced dot",
                    });
                }
                prev = None;
            }
            TokenKind::BranchPlaceholder | TokenKind::LinkerPlaceholder | TokenKind::ChoicePlaceholder(_) => {
                return Err(ChemError::UnknownElement(token.text.clone()));
            }
        }
    }

    if let Some((_, open_pos)) = branches.first() {
        return Err(ChemError::UnbalancedBranch(*open_pos));
    }
    if let Some(&n) = rings.keys().min() {
        return Err(ChemError::DanglingRingBond(n));
    }
    if let Some((_, p)) = pending {
        return Err(ChemError::InvalidSyntax {
            pos: p,
            msg: "trailing bond",
        });
    }
    if atoms.is_empty() || prev.is_none() {
        return Err(ChemError::InvalidSyntax {
            pos: text.len(),
            msg: "input ends without an atom",
        });
    }
    Ok(Molecule::from_parts(atoms, bonds))
}

fn default_order(a: &Atom, b: &Atom) -> BondOrder {
    if a.aromatic && b.aromatic {
        BondOrder::Aromatic
    } else {
        BondOrder::Single
    }
}

fn organic_atom(text: &str) -> Result<Atom, ChemError> {
    let aromatic = text.chars().all(|c| c.is_ascii_lowercase());
    let symbol = if aromatic {
        text.to_ascii_uppercase()
    } else {
        text.to_string()
    };
    let element = Element::from_symbol(&symbol).ok_or_else(|| ChemError::UnknownElement(text.to_string()))?;
    Ok(Atom {
        element,
        formal_charge: 0,
        aromatic,
        explicit_h: 0,
        implicit_h: 0,
        index: 0,
        bracket: false,
        isotope: None,
    })
}

fn parse_bracket(text: &str, offset: usize) -> Result<Atom, ChemError> {
    let inner = &text.as_bytes()[1..text.len() - 1];
    let err = |msg| ChemError::InvalidSyntax { pos: offset, msg };
    let mut i = 0;

    let mut isotope: Option<u32> = None;
    while i < inner.len() && inner[i].is_ascii_digit() {
        let v = isotope.unwrap_or(0) * 10 + (inner[i] - b'0') as u32;
        if v > 999 {
            return Err(err("isotope out of range"));
        }
        isotope = Some(v);
        i += 1;
    }

    if i >= inner.len() || !inner[i].is_ascii_alphabetic() {
        return Err(err("bracket atom without an element"));
    }
    let (element, aromatic, used) = bracket_symbol(&inner[i..])
        .ok_or_else(|| ChemError::UnknownElement(String::from_utf8_lossy(inner).into_owned()))?;
    i += used;

    while i < inner.len() && inner[i] == b'@' {
        i += 1;
    }
    // extended chirality classes such as @TH1 / @SP2 / @OH15
    if i > 0 && inner[i - 1] == b'@' && i + 1 < inner.len() {
        let tag = &inner[i..i + 2];
        if matches!(tag, b"TH" | b"AL" | b"SP" | b"TB" | b"OH") {
            i += 2;
            while i < inner.len() && inner[i].is_ascii_digit() {
                i += 1;
            }
        }
    }

    let mut explicit_h = 0u8;
    if i < inner.len() && inner[i] == b'H' {
        i += 1;
        explicit_h = 1;
        if i < inner.len() && inner[i].is_ascii_digit() {
            explicit_h = inner[i] - b'0';
            i += 1;
        }
    }

    let mut charge: i32 = 0;
    if i < inner.len() && (inner[i] == b'+' || inner[i] == b'-') {
        let sign = if inner[i] == b'+' { 1 } else { -1 };
        let sym = inner[i];
        i += 1;
        if i < inner.len() && inner[i].is_ascii_digit() {
            let mut mag = 0i32;
            while i < inner.len() && inner[i].is_ascii_digit() {
                mag = mag * 10 + (inner[i] - b'0') as i32;
                if mag > 99 {
                    return Err(err("charge out of range"));
                }
                i += 1;
            }
            charge = sign * mag;
        } else {
            let mut mag = 1;
            while i < inner.len() && inner[i] == sym {
                mag += 1;
                i += 1;
            }
            charge = sign * mag;
        }
    }
    if !(-4..=4).contains(&charge) {
        return Err(err("formal charge outside [-4, +4]"));
    }

    if i < inner.len() && inner[i] == b':' {
        i += 1;
        let start = i;
        while i < inner.len() && inner[i].is_ascii_digit() {
            i += 1;
        }
        if i == start {
            return Err(err("atom class without digits"));
        }
    }
    if i != inner.len() {
        return Err(err("unexpected characters in bracket atom"));
    }

    Ok(Atom {
        element,
        formal_charge: charge as i8,
        aromatic,
        explicit_h,
        implicit_h: 0,
        index: 0,
        bracket: true,
        isotope: isotope.map(|v| v as u16),
    })
}

fn bracket_symbol(s: &[u8]) -> Option<(Element, bool, usize)> {
    let first = s[0];
    if first.is_ascii_lowercase() {
        // aromatic: se, as, te or a single letter
        if s.len() >= 2 && matches!(&s[..2], b"se" | b"as" | b"te") {
            let sym = format!("{}{}", (s[0] as char).to_ascii_uppercase(), s[1] as char);
            let e = Element::from_symbol(&sym)?;
            return Some((e, true, 2));
        }
        let sym = (first as char).to_ascii_uppercase().to_string();
        let e = Element::from_symbol(&sym)?;
        return e.can_be_aromatic().then_some((e, true, 1));
    }
    if s.len() >= 2 && s[1].is_ascii_lowercase() {
        let sym = format!("{}{}", s[0] as char, s[1] as char);
        if let Some(e) = Element::from_symbol(&sym) {
            return Some((e, false, 2));
        }
    }
    let sym = (first as char).to_string();
    Element::from_symbol(&sym).map(|e| (e, false, 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trimethylsulfonium() {
        let m = parse_smiles("C[S+](C)C").unwrap();
        assert_eq!(m.atom_count(), 4);
        let s = &m.atoms[1];
        assert_eq!(s.element, Element::S);
        assert_eq!(s.formal_charge, 1);
        assert_eq!(m.bonds.len(), 3);
        assert!(m
            .bonds
            .iter()
            .all(|b| b.order == BondOrder::Single && (b.a == 1 || b.b == 1)));
        assert_eq!(m.total_charge(), 1);
    }

    #[test]
    fn errors() {
        assert_eq!(parse_smiles(""), Err(ChemError::EmptyInput));
        assert_eq!(parse_smiles("C1CC"), Err(ChemError::DanglingRingBond(1)));
        assert_eq!(parse_smiles("C(C"), Err(ChemError::UnbalancedBranch(1)));
        assert_eq!(parse_smiles("CC)"), Err(ChemError::UnbalancedBranch(2)));
        assert!(matches!(parse_smiles("[Xx]"), Err(ChemError::UnknownElement(_))));
        assert!(matches!(parse_smiles("C(*)"), Err(ChemError::UnknownElement(_))));
        assert!(matches!(parse_smiles("C(=)"), Err(ChemError::InvalidSyntax { .. })));
    }

    #[test]
    fn implicit_hydrogens() {
        let m = parse_smiles("c1ccccc1C").unwrap();
        assert_eq!(m.atoms[0].total_h(), 1);
        assert_eq!(m.atoms[5].total_h(), 0);
        assert_eq!(m.atoms[6].total_h(), 3);
        let m = parse_smiles("C=O").unwrap();
        assert_eq!(m.atoms[0].total_h(), 2);
        assert_eq!(m.atoms[1].total_h(), 0);
    }

    #[test]
    fn bracket_details() {
        let m = parse_smiles("[13CH3][N+](C)(C)C").unwrap();
        assert_eq!(m.atoms[0].isotope, Some(13));
        assert_eq!(m.atoms[0].explicit_h, 3);
        assert_eq!(m.atoms[1].formal_charge, 1);
        let m = parse_smiles("[O--]").unwrap();
        assert_eq!(m.atoms[0].formal_charge, -2);
        let m = parse_smiles("C[C@@H](N)O").unwrap();
        assert_eq!(m.atoms[1].explicit_h, 1);
        assert!(parse_smiles("[C+5]").is_err());
    }

    #[test]
    fn ring_bond_orders() {
        let m = parse_smiles("C=1CCCCC1").unwrap();
        let b = m.bond_between(0, 5).unwrap();
        assert_eq!(b.order, BondOrder::Double);
        assert!(parse_smiles("C=1CCCCC#1").is_err());
        let m = parse_smiles("C%10CC%10").unwrap();
        assert_eq!(m.bonds.len(), 3);
    }

    #[test]
    fn dot_separated() {
        let m = parse_smiles("C[S+](C)C.[Cl-]").unwrap();
        assert_eq!(m.component_count(), 2);
        assert_eq!(m.total_charge(), 0);
    }
}
