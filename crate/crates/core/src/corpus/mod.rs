//! Corpus ingestion: distribution-labelled relations, label-space adaptation,
//! stratified splits and single-label PDTB test sets.

mod adapt;
mod discogem;
mod pdtb;
mod split;

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use adapt::{adapt_corpus, adapt_label_space, mass_sums, AdaptedCorpus};
pub use discogem::{load_discogem, read_discogem, ColumnMap};
pub use pdtb::{
    build_test_sets, load_pdtb, load_pdtb_splits, read_pdtb, PdtbRelation, PdtbScheme,
    SingleLabelInstance, SingleLabelTestSet, CROSS_FOLDS,
};
pub use split::{stratified_split, Split, SplitAssignment, SplitRatios};

use crate::distribution::LabelDistribution;
use crate::error::{Error, Result};

/// A corpus row before adaptation: sense name → annotation probability.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRelation {
    pub id: String,
    pub arg1: String,
    pub arg2: String,
    pub genre: String,
    pub raw: BTreeMap<String, f64>,
}

/// One implicit relation with per-level target distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationInstance {
    pub id: String,
    pub arg1: String,
    pub arg2: String,
    pub genre: String,
    pub source: String,
    pub targets: [LabelDistribution; 3],
    /// Majority sense index per level.
    pub majority: [usize; 3],
}

impl RelationInstance {
    pub fn new(
        id: String,
        arg1: String,
        arg2: String,
        genre: String,
        source: String,
        targets: [LabelDistribution; 3],
    ) -> Result<Self> {
        if arg1.trim().is_empty() || arg2.trim().is_empty() {
            return Err(Error::Parse {
                row: id,
                message: "missing argument text".into(),
            });
        }
        let majority = [targets[0].majority(), targets[1].majority(), targets[2].majority()];
        Ok(RelationInstance {
            id,
            arg1,
            arg2,
            genre,
            source,
            targets,
            majority,
        })
    }
}

pub fn write_instances(path: &Path, instances: &[RelationInstance]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for inst in instances {
        serde_json::to_writer(&mut out, inst)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_instances(path: &Path) -> Result<Vec<RelationInstance>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
