//! Morgan (circular) bit fingerprints, Dice and Tanimoto measures, and dense
//! pairwise Dice distance matrices.
//!
//! Dice distance is a semimetric: it does not satisfy the triangle inequality,
//! and nothing downstream relies on it doing so.

use crate::chem::Molecule;
use crate::hash::{combine, mix64};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

pub const DEFAULT_RADIUS: u32 = 2;
pub const DEFAULT_N_BITS: usize = 2048;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FingerprintError {
    #[error("fingerprint widths differ ({0} vs {1})")]
    WidthMismatch(usize, usize),
    #[error("Dice distance is undefined for an empty fingerprint")]
    EmptyFingerprint,
    #[error("bit width must be a power of two >= 64, got {0}")]
    InvalidWidth(usize),
    #[error("no fingerprints given")]
    EmptySet,
    #[error("malformed fingerprint text")]
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitFingerprint {
    words: Vec<u64>,
    n_bits: usize,
    radius: u32,
}

impl BitFingerprint {
    pub fn zeros(n_bits: usize, radius: u32) -> Self {
        BitFingerprint {
            words: vec![0; n_bits.div_ceil(64)],
            n_bits,
            radius,
        }
    }

    /// Builds a fingerprint with the listed bits set (indices taken modulo width).
    pub fn from_bits(n_bits: usize, bits: impl IntoIterator<Item = usize>) -> Self {
        let mut fp = Self::zeros(n_bits, 0);
        for b in bits {
            fp.set(b % n_bits);
        }
        fp
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn set(&mut self, bit: usize) {
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn popcount(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_bits).filter(move |&b| self.get(b))
    }

    pub fn intersection_count(&self, other: &Self) -> u32 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum()
    }

    pub fn union_count(&self, other: &Self) -> u32 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a | b).count_ones())
            .sum()
    }

    /// Hamming distance; equals the squared Euclidean distance between the
    /// vectors viewed as 0/1 coordinates.
    pub fn hamming(&self, other: &Self) -> u32 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(self.words.len() * 16);
        for w in &self.words {
            let _ = write!(s, "{w:016x}");
        }
        s
    }

    pub fn from_hex(hex: &str, n_bits: usize, radius: u32) -> Result<Self, FingerprintError> {
        let n_words = n_bits.div_ceil(64);
        if hex.len() != n_words * 16 {
            return Err(FingerprintError::Malformed);
        }
        let words = (0..n_words)
            .map(|i| u64::from_str_radix(&hex[i * 16..(i + 1) * 16], 16))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| FingerprintError::Malformed)?;
        Ok(BitFingerprint { words, n_bits, radius })
    }

    fn check_width(&self, other: &Self) -> Result<(), FingerprintError> {
        if self.n_bits != other.n_bits {
            return Err(FingerprintError::WidthMismatch(self.n_bits, other.n_bits));
        }
        Ok(())
    }
}

fn atom_invariant(mol: &Molecule, i: usize) -> u64 {
    let a = &mol.atoms[i];
    let mut h = mix64(a.element.atomic_number() as u64);
    h = combine(h, (a.formal_charge as i64 + 16) as u64);
    h = combine(h, mol.degree(i) as u64);
    h = combine(h, a.aromatic as u64);
    combine(h, a.total_h() as u64)
}

/// Circular fingerprint: each atom starts from (element, charge, degree,
/// aromaticity, H count); every round hashes the center's previous identifier
/// with the sorted (bond order, neighbor identifier) multiset. Every
/// identifier from rounds 0..=radius is folded into the bit vector.
pub fn morgan_fingerprint(mol: &Molecule, radius: u32, n_bits: usize) -> Result<BitFingerprint, FingerprintError> {
    if n_bits < 64 || !n_bits.is_power_of_two() {
        return Err(FingerprintError::InvalidWidth(n_bits));
    }
    let mut fp = BitFingerprint::zeros(n_bits, radius);
    let n = mol.atoms.len();
    let mut ids: Vec<u64> = (0..n).map(|i| atom_invariant(mol, i)).collect();
    for &id in &ids {
        fp.set((id % n_bits as u64) as usize);
    }
    for round in 1..=radius {
        let next: Vec<u64> = (0..n)
            .map(|i| {
                let mut env: Vec<(u64, u64)> = mol
                    .neighbors(i)
                    .iter()
                    .map(|&(j, bi)| (mol.bonds[bi].order.code(), ids[j]))
                    .collect();
                env.sort_unstable();
                let seed = combine(mix64(round as u64), ids[i]);
                env.into_iter()
                    .fold(seed, |h, (order, nb)| combine(combine(h, order), nb))
            })
            .collect();
        ids = next;
        for &id in &ids {
            fp.set((id % n_bits as u64) as usize);
        }
    }
    Ok(fp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FingerprintParams {
    pub radius: u32,
    pub n_bits: usize,
}

impl Default for FingerprintParams {
    fn default() -> Self {
        FingerprintParams {
            radius: DEFAULT_RADIUS,
            n_bits: DEFAULT_N_BITS,
        }
    }
}

impl FingerprintParams {
    pub fn fingerprint(&self, mol: &Molecule) -> Result<BitFingerprint, FingerprintError> {
        morgan_fingerprint(mol, self.radius, self.n_bits)
    }
}

/// `1 - 2|a∧b| / (|a| + |b|)`.
pub fn dice_distance(a: &BitFingerprint, b: &BitFingerprint) -> Result<f64, FingerprintError> {
    a.check_width(b)?;
    let (pa, pb) = (a.popcount(), b.popcount());
    if pa == 0 || pb == 0 {
        return Err(FingerprintError::EmptyFingerprint);
    }
    let inter = a.intersection_count(b);
    Ok(1.0 - 2.0 * inter as f64 / (pa + pb) as f64)
}

/// `|a∧b| / |a∨b|`, defined as 1 for two empty vectors.
pub fn tanimoto_similarity(a: &BitFingerprint, b: &BitFingerprint) -> Result<f64, FingerprintError> {
    a.check_width(b)?;
    let union = a.union_count(b);
    if union == 0 {
        return Ok(1.0);
    }
    Ok(a.intersection_count(b) as f64 / union as f64)
}

/// Symmetric dense matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        let values = rows.into_iter().flatten().collect::<Vec<_>>();
        assert_eq!(values.len(), n * n, "distance matrix must be square");
        DistanceMatrix { n, values }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = f(i, j);
                values[i * n + j] = d;
                values[j * n + i] = d;
            }
        }
        DistanceMatrix { n, values }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Principal submatrix on the given indices, in the given order.
    pub fn submatrix(&self, idx: &[usize]) -> DistanceMatrix {
        let m = idx.len();
        let mut values = Vec::with_capacity(m * m);
        for &i in idx {
            for &j in idx {
                values.push(self.get(i, j));
            }
        }
        DistanceMatrix { n: m, values }
    }

    /// Upper-triangle entries, row-major.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * self.n.saturating_sub(1) / 2);
        for i in 0..self.n {
            out.extend_from_slice(&self.row(i)[i + 1..]);
        }
        out
    }

    /// CSV with a header row of ids; one row per point, row-major.
    pub fn to_csv(&self, ids: &[String]) -> String {
        let mut s = String::from("id");
        for id in ids {
            s.push(',');
            s.push_str(id);
        }
        s.push('\n');
        for (i, id) in ids.iter().enumerate().take(self.n) {
            s.push_str(id);
            for j in 0..self.n {
                let _ = write!(s, ",{}", self.get(i, j));
            }
            s.push('\n');
        }
        s
    }
}

pub fn pairwise_distances(set: &[BitFingerprint]) -> Result<DistanceMatrix, FingerprintError> {
    let Some(first) = set.first() else {
        return Err(FingerprintError::EmptySet);
    };
    for fp in set {
        first.check_width(fp)?;
        if fp.popcount() == 0 {
            return Err(FingerprintError::EmptyFingerprint);
        }
    }
    // errors were ruled out above
    Ok(DistanceMatrix::from_fn(set.len(), |i, j| {
        dice_distance(&set[i], &set[j]).unwrap_or(1.0)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn fp(s: &str) -> BitFingerprint {
        morgan_fingerprint(&parse_smiles(s).unwrap(), 2, 2048).unwrap()
    }

    #[test]
    fn deterministic() {
        assert_eq!(fp("c1ccc(cc1)[S+](C)C"), fp("c1ccc(cc1)[S+](C)C"));
    }

    #[test]
    fn methane_popcount() {
        let p = fp("C").popcount();
        assert!((1..=3).contains(&p), "{p}");
    }

    #[test]
    fn benzene_vs_toluene() {
        let d = dice_distance(&fp("c1ccccc1"), &fp("Cc1ccccc1")).unwrap();
        assert!(d > 0.0 && d < 1.0, "{d}");
    }

    #[test]
    fn frozen_benzene_bits() {
        // benzene has one environment per radius: three bits at most
        let b = fp("c1ccccc1");
        assert_eq!(b.popcount(), 3);
    }

    #[test]
    fn dice_cases() {
        let a = BitFingerprint::from_bits(64, [1, 2]);
        let b = BitFingerprint::from_bits(64, [2, 3]);
        let c = BitFingerprint::from_bits(64, [10, 11]);
        assert_eq!(dice_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(dice_distance(&a, &c).unwrap(), 1.0);
        assert_eq!(dice_distance(&a, &b).unwrap(), 0.5);
        let empty = BitFingerprint::zeros(64, 0);
        assert_eq!(dice_distance(&a, &empty), Err(FingerprintError::EmptyFingerprint));
        let wide = BitFingerprint::from_bits(128, [1]);
        assert_eq!(dice_distance(&a, &wide), Err(FingerprintError::WidthMismatch(64, 128)));
    }

    #[test]
    fn tanimoto_cases() {
        let a = BitFingerprint::from_bits(64, [1, 2]);
        let b = BitFingerprint::from_bits(64, [2, 3]);
        let c = BitFingerprint::from_bits(64, [10, 11]);
        assert_eq!(tanimoto_similarity(&a, &a).unwrap(), 1.0);
        assert_eq!(tanimoto_similarity(&a, &c).unwrap(), 0.0);
        assert_eq!(tanimoto_similarity(&a, &b).unwrap(), 1.0 / 3.0);
        let e = BitFingerprint::zeros(64, 0);
        assert_eq!(tanimoto_similarity(&e, &e).unwrap(), 1.0);
    }

    #[test]
    fn pairwise_small() {
        let a = BitFingerprint::from_bits(64, [1, 2]);
        let m = pairwise_distances(std::slice::from_ref(&a)).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.get(0, 0), 0.0);
        let m = pairwise_distances(&[a.clone(), a.clone()]).unwrap();
        assert!(m.upper_triangle().iter().all(|&d| d == 0.0));
        // {1,2},{1,2},{2,3}: Dice 0, 0.5, 0.5
        let b = BitFingerprint::from_bits(64, [2, 3]);
        let m = pairwise_distances(&[a.clone(), a, b]).unwrap();
        assert_eq!(m.row(0), &[0.0, 0.0, 0.5]);
        assert_eq!(m.row(1), &[0.0, 0.0, 0.5]);
        assert_eq!(m.row(2), &[0.5, 0.5, 0.0]);
        assert_eq!(pairwise_distances(&[]), Err(FingerprintError::EmptySet));
    }

    #[test]
    fn hex_round_trip() {
        let a = fp("C[S+](C)c1ccccc1");
        assert_eq!(BitFingerprint::from_hex(&a.to_hex(), 2048, 2).unwrap(), a);
    }

    #[test]
    fn invalid_width() {
        let m = parse_smiles("C").unwrap();
        assert_eq!(morgan_fingerprint(&m, 2, 100), Err(FingerprintError::InvalidWidth(100)));
    }
}
