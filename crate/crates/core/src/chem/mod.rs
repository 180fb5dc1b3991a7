//! SMILES handling: tokenizing, parsing into molecular graphs, writing back out,
//! stereo stripping, Murcko scaffolds and placeholder scaffolds.

mod element;
mod iso;
mod parse;
mod rings;
mod scaffold;
mod stereo;
mod tokenize;
mod write;

pub use element::Element;
pub use parse::parse_smiles;
pub use scaffold::{insert_placeholders, murcko_scaffold, strip_placeholders, Scaffold};
pub use stereo::strip_stereo;
pub use tokenize::{tokenize, Token, TokenKind, TokenStream};
pub use write::write_smiles;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChemError {
    #[error("empty SMILES input")]
    EmptyInput,
    #[error("unbalanced branch parenthesis at byte {0}")]
    UnbalancedBranch(usize),
    #[error("ring bond {0} is never closed")]
    DanglingRingBond(u32),
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("unterminated bracket atom starting at byte {0}")]
    UnterminatedBracket(usize),
    #[error("invalid character {0:?} at byte {1}")]
    InvalidCharacter(char, usize),
    #[error("syntax error at byte {pos}: {msg}")]
    InvalidSyntax { pos: usize, msg: &'static str },
    #[error("molecule has no rings")]
    NoRings,
    #[error("requested {requested} placeholders but only {available} positions are available")]
    TooManyPlaceholders { requested: usize, available: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to an atom's valence; aromatic bonds count one and the
    /// aromatic atom adds a single extra unit on top.
    pub fn valence(self) -> u32 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub(crate) fn code(self) -> u64 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    pub formal_charge: i8,
    pub aromatic: bool,
    /// Hydrogen count written inside a bracket atom.
    pub explicit_h: u8,
    /// Hydrogens implied by the default valence of an organic-subset atom.
    pub implicit_h: u8,
    pub index: usize,
    /// Whether the atom was (or must be) written in bracket form.
    pub bracket: bool,
    pub isotope: Option<u16>,
}

impl Atom {
    pub fn total_h(&self) -> u8 {
        if self.bracket {
            self.explicit_h
        } else {
            self.implicit_h
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

/// A molecular graph. Atoms are heavy atoms only; hydrogens are counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Molecule {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    /// Smallest set of smallest rings, as atom-index cycles.
    pub ring_info: Vec<Vec<usize>>,
    #[serde(skip)]
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Molecule {
    /// Assembles a molecule from atoms and bonds, recomputing indices,
    /// implicit hydrogens and ring information.
    pub fn from_parts(mut atoms: Vec<Atom>, bonds: Vec<Bond>) -> Self {
        for (i, atom) in atoms.iter_mut().enumerate() {
            atom.index = i;
        }
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for (bi, bond) in bonds.iter().enumerate() {
            adjacency[bond.a].push((bond.b, bi));
            adjacency[bond.b].push((bond.a, bi));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let mut mol = Molecule {
            atoms,
            bonds,
            ring_info: Vec::new(),
            adjacency,
        };
        for i in 0..mol.atoms.len() {
            if !mol.atoms[i].bracket {
                mol.atoms[i].implicit_h = mol.default_implicit_h(i);
            }
        }
        mol.ring_info = rings::smallest_rings(&mol);
        mol
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Neighbors of `atom` as `(neighbor, bond index)`, sorted by neighbor.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn total_charge(&self) -> i32 {
        self.atoms.iter().map(|a| a.formal_charge as i32).sum()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency[a]
            .iter()
            .find(|(n, _)| *n == b)
            .map(|(_, bi)| &self.bonds[*bi])
    }

    /// Valence used by explicit bonds, with the aromatic bonus applied.
    pub fn bond_valence(&self, atom: usize) -> u32 {
        let mut sum: u32 = self.adjacency[atom]
            .iter()
            .map(|(_, bi)| self.bonds[*bi].order.valence())
            .sum();
        let has_aromatic = self.adjacency[atom]
            .iter()
            .any(|(_, bi)| self.bonds[*bi].order == BondOrder::Aromatic);
        if self.atoms[atom].aromatic && has_aromatic {
            sum += 1;
        }
        sum
    }

    fn default_implicit_h(&self, atom: usize) -> u8 {
        let used = self.bond_valence(atom);
        let allowed = self.atoms[atom].element.organic_valences();
        allowed
            .iter()
            .find(|&&v| v >= used)
            .map(|&v| (v - used) as u8)
            .unwrap_or(0)
    }

    /// Remaining capacity for new substituents.
    pub fn free_valence(&self, atom: usize) -> u32 {
        let a = &self.atoms[atom];
        if !a.bracket {
            return a.implicit_h as u32;
        }
        let cap = a.element.charged_valence(a.formal_charge);
        cap.saturating_sub(self.bond_valence(atom) + a.explicit_h as u32)
    }

    pub fn is_ring_atom(&self, atom: usize) -> bool {
        self.ring_info.iter().any(|r| r.contains(&atom))
    }

    pub fn ring_atoms(&self) -> Vec<bool> {
        let mut flags = vec![false; self.atoms.len()];
        for ring in &self.ring_info {
            for &a in ring {
                flags[a] = true;
            }
        }
        flags
    }

    /// Number of dot-separated (disconnected) components.
    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.atoms.len()];
        let mut count = 0;
        for start in 0..self.atoms.len() {
            if seen[start] {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(a) = stack.pop() {
                for &(n, _) in &self.adjacency[a] {
                    if !seen[n] {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
        count
    }

    /// Graph isomorphism respecting atom labels (element, charge, aromaticity,
    /// hydrogen count) and bond orders.
    pub fn is_isomorphic_to(&self, other: &Molecule) -> bool {
        iso::isomorphic(self, other)
    }
}
