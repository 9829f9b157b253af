//! Canonical data model, on-disk formats and dataset statistics.

mod analysis;
mod label;
mod partition;
mod record;
mod synth;
mod validate;

use std::collections::HashSet;
use std::io::BufRead;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

pub use analysis::{
    apply_visibility_relabel, label_counts, label_distribution, position_uniformity, UniformityTest,
};
pub use label::ManeuverLabel;
pub use partition::{partition_by_visibility, Partition, Partitions};
pub use record::{
    option_letter, AnswerOption, BaseSample, McqaInstance, OptionOrigin, Split, Variant,
};
pub use synth::{gen_synthetic_base, SynthOptions};
pub use validate::{validate_base, validate_mcqa, ValidationReport, Violation, ALPHA};

use crate::io::{read_jsonl, write_jsonl, write_jsonl_atomic};
use crate::{Error, Result};

/// A line-delimited record with a dataset-unique id.
pub trait Record: Serialize + DeserializeOwned + Clone + Send + Sync {
    fn sample_id(&self) -> &str;
    /// Ground-truth label (the correct option's provenance label for MCQA records).
    fn label(&self) -> Option<ManeuverLabel>;
}

impl Record for BaseSample {
    fn sample_id(&self) -> &str {
        &self.sample_id
    }

    fn label(&self) -> Option<ManeuverLabel> {
        Some(self.label)
    }
}

impl Record for McqaInstance {
    fn sample_id(&self) -> &str {
        &self.sample_id
    }

    fn label(&self) -> Option<ManeuverLabel> {
        self.correct_label()
    }
}

/// Immutable, ordered collection of records with unique sample ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<R> {
    records: Vec<R>,
}

pub type BaseDataset = Dataset<BaseSample>;
pub type McqaDataset = Dataset<McqaInstance>;

impl<R: Record> Dataset<R> {
    pub fn new(records: Vec<R>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert(r.sample_id()) {
                return Err(Error::DuplicateId(r.sample_id().to_string()));
            }
        }
        Ok(Self { records })
    }

    pub fn empty() -> Self {
        Self {
            records: Vec::new(),
        }
    }

    pub fn from_reader(reader: impl BufRead) -> Result<Self> {
        Self::new(read_jsonl(reader)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_jsonl_atomic(path, &self.records)
    }

    pub fn to_canonical_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &self.records).expect("writing to memory");
        buf
    }

    pub fn records(&self) -> &[R] {
        &self.records
    }

    pub fn into_records(self) -> Vec<R> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, R> {
        self.records.iter()
    }

    pub fn get(&self, sample_id: &str) -> Option<&R> {
        self.records.iter().find(|r| r.sample_id() == sample_id)
    }
}

impl<'a, R> IntoIterator for &'a Dataset<R> {
    type Item = &'a R;
    type IntoIter = std::slice::Iter<'a, R>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

/// Load a dataset of record type `R` from a line-delimited file.
pub fn load_dataset<R: Record>(path: &Path) -> Result<Dataset<R>> {
    Dataset::load(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Base,
    Mcqa,
}

impl DatasetKind {
    /// Sniff the first record: MCQA records carry `options`.
    pub fn detect(path: &Path) -> Result<Option<DatasetKind>> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let value: serde_json::Value =
                serde_json::from_str(&line).map_err(|e| Error::Parse {
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            return Ok(Some(if value.get("options").is_some() {
                DatasetKind::Mcqa
            } else {
                DatasetKind::Base
            }));
        }
        Ok(None)
    }
}
