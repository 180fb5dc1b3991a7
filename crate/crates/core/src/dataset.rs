//! Line-delimited molecule records: `SMILES<TAB>year<TAB>id`, with year and
//! id optional and `#` lines ignored.

use crate::chem::{parse_smiles, strip_stereo};
use crate::fingerprint::{BitFingerprint, FingerprintError, FingerprintParams};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("line {line}: invalid year `{text}`")]
    InvalidYear { line: usize, text: String },
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error(transparent)]
    Fingerprint(#[from] FingerprintError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    /// Stereo-stripped input string.
    pub smiles: String,
    pub year: Option<f64>,
    pub fingerprint: BitFingerprint,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub lines: usize,
    pub accepted: usize,
    pub duplicates: usize,
    /// `(1-based line, reason)` for records that failed to parse.
    pub rejected: Vec<(usize, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub params: FingerprintParams,
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn new(params: FingerprintParams) -> Self {
        Dataset {
            params,
            records: Vec::new(),
        }
    }

    /// Ids default to the zero-padded ordinal when absent.
    pub fn from_smiles<S: AsRef<str>>(items: &[S], params: FingerprintParams) -> Result<Self, DatasetError> {
        let text: String = items.iter().map(|s| format!("{}\n", s.as_ref())).collect();
        Ok(ingest(&text, params)?.0)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn fingerprints(&self) -> Vec<BitFingerprint> {
        self.records.iter().map(|r| r.fingerprint.clone()).collect()
    }

    pub fn smiles(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.smiles.as_str()).collect()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.records.iter().position(|r| r.id == id)
    }

    /// Records at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            params: self.params,
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    /// Appends records; ids must stay unique.
    pub fn extend(&mut self, records: impl IntoIterator<Item = Record>) -> Result<(), DatasetError> {
        let mut ids: HashSet<String> = self.records.iter().map(|r| r.id.clone()).collect();
        for r in records {
            if !ids.insert(r.id.clone()) {
                return Err(DatasetError::DuplicateId(r.id));
            }
            self.records.push(r);
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.smiles);
            out.push('\t');
            if let Some(y) = r.year {
                out.push_str(&y.to_string());
            }
            out.push('\t');
            out.push_str(&r.id);
            out.push('\n');
        }
        out
    }
}

/// Builds a record from a SMILES string; `None` if it does not parse.
pub fn make_record(
    id: String,
    smiles: &str,
    year: Option<f64>,
    params: &FingerprintParams,
) -> Result<Option<Record>, DatasetError> {
    let smiles = strip_stereo(smiles);
    let Ok(mol) = parse_smiles(&smiles) else {
        return Ok(None);
    };
    Ok(Some(Record {
        fingerprint: params.fingerprint(&mol)?,
        id,
        smiles,
        year,
    }))
}

/// Strips stereo marks, drops exact duplicates of the stripped string, and
/// fingerprints every record. Unparseable lines are reported, not fatal.
pub fn ingest(text: &str, params: FingerprintParams) -> Result<(Dataset, IngestReport), DatasetError> {
    let mut report = IngestReport::default();
    let mut dataset = Dataset::new(params);
    let mut seen_smiles = HashSet::new();
    let mut seen_ids = HashSet::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        report.lines += 1;
        let mut fields = line.split('\t');
        let raw = fields.next().unwrap_or("").trim();
        let year = match fields.next().map(str::trim) {
            None | Some("") => None,
            Some(t) => Some(t.parse::<f64>().map_err(|_| DatasetError::InvalidYear {
                line: n + 1,
                text: t.to_string(),
            })?),
        };
        let id = match fields.next().map(str::trim) {
            None | Some("") => format!("{:06}", dataset.len() + report.duplicates + report.rejected.len()),
            Some(t) => t.to_string(),
        };
        let stripped = strip_stereo(raw);
        if !seen_smiles.insert(stripped.clone()) {
            report.duplicates += 1;
            continue;
        }
        match make_record(id, &stripped, year, &params)? {
            Some(r) => {
                if !seen_ids.insert(r.id.clone()) {
                    return Err(DatasetError::DuplicateId(r.id));
                }
                dataset.records.push(r);
            }
            None => {
                let reason = parse_smiles(&stripped).err().map(|e| e.to_string()).unwrap_or_default();
                report.rejected.push((n + 1, reason));
            }
        }
    }
    report.accepted = dataset.len();
    Ok((dataset, report))
}

/// 100 onium-like cations used by the round-trip and pipeline examples.
pub const ONIUM_CORPUS: &str = include_str!("../data/onium_corpus.smi");

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_lines_collapse() {
        let (d, r) = ingest("CC\nCC\nCCO\n", FingerprintParams::default()).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!((r.lines, r.accepted, r.duplicates), (3, 2, 1));
    }

    #[test]
    fn stereo_is_stripped_before_dedup() {
        let (d, r) = ingest(
            "F/C=C/F\t1999\ta\nFC=CF\t2001\tb\nC[C@@H](N)O\n",
            FingerprintParams::default(),
        )
        .unwrap();
        assert_eq!(d.smiles(), vec!["FC=CF", "C[CH](N)O"]);
        assert_eq!(d.records[0].year, Some(1999.0));
        assert_eq!(d.records[0].id, "a");
        assert_eq!(r.duplicates, 1);
    }

    #[test]
    fn comments_and_rejects() {
        let (d, r) = ingest("# header\n\nC1CC\nc1ccccc1\n", FingerprintParams::default()).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(r.rejected.len(), 1);
        assert_eq!(r.rejected[0].0, 3);
    }

    #[test]
    fn bad_year_is_an_error() {
        assert!(matches!(
            ingest("CC\tlast year\n", FingerprintParams::default()),
            Err(DatasetError::InvalidYear { line: 1, .. })
        ));
    }

    #[test]
    fn text_round_trip() {
        let (d, _) = ingest("CC\t2001\tx\nCCO\t\ty\n", FingerprintParams::default()).unwrap();
        let (e, _) = ingest(&d.to_text(), FingerprintParams::default()).unwrap();
        assert_eq!(d, e);
    }
}
