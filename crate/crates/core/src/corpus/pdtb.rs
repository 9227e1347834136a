use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{Level, SenseHierarchy};

pub const CROSS_FOLDS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PdtbScheme {
    /// Section 23.
    Lin,
    /// Sections 21-22.
    Ji,
    /// Twelve section-level folds.
    Cross,
}

impl FromStr for PdtbScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<PdtbScheme> {
        match s.to_ascii_lowercase().as_str() {
            "lin" => Ok(PdtbScheme::Lin),
            "ji" => Ok(PdtbScheme::Ji),
            "cross" => Ok(PdtbScheme::Cross),
            other => Err(Error::Config(format!(
                "unknown PDTB scheme {other:?}; expected lin, ji or cross"
            ))),
        }
    }
}

impl PdtbScheme {
    pub fn name(self) -> &'static str {
        match self {
            PdtbScheme::Lin => "lin",
            PdtbScheme::Ji => "ji",
            PdtbScheme::Cross => "cross",
        }
    }
}

/// A preprocessed single-label implicit relation, restricted to the adapted
/// label spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct PdtbRelation {
    pub section: u32,
    pub arg1: String,
    pub arg2: String,
    pub level1: usize,
    pub level2: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleLabelInstance {
    pub id: String,
    pub arg1: String,
    pub arg2: String,
    pub level1: usize,
    pub level2: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingleLabelTestSet {
    pub name: String,
    /// Fold number for the cross scheme.
    pub fold: Option<usize>,
    pub instances: Vec<SingleLabelInstance>,
}

fn first_listed(cell: &str) -> &str {
    cell.split(['|', ';']).next().unwrap_or("").trim()
}

/// Finds a sense of `level` in a possibly dotted label such as
/// `Contingency.Cause.Reason`.
fn match_component(hierarchy: &SenseHierarchy, level: Level, label: &str) -> Option<usize> {
    hierarchy
        .find(level, label)
        .or_else(|| label.split('.').find_map(|part| hierarchy.find(level, part)))
}

/// Reads `section, arg1, arg2, level1, level2` rows. Relations whose first
/// listed level-2 sense is outside the adapted set are dropped.
pub fn read_pdtb<R: Read>(hierarchy: &SenseHierarchy, input: R, delimiter: u8) -> Result<Vec<PdtbRelation>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let cols = ["section", "arg1", "arg2", "level1", "level2"];
    let positions: Vec<Option<usize>> = cols
        .iter()
        .map(|c| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(c)))
        .collect();
    let missing: Vec<String> = cols
        .iter()
        .zip(&positions)
        .filter(|(_, p)| p.is_none())
        .map(|(c, _)| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Schema { missing });
    }
    let pos: Vec<usize> = positions.into_iter().map(Option::unwrap).collect();

    let mut out = Vec::new();
    let mut dropped = 0usize;
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        let row = format!("line {}", row_no + 2);
        let cell = |i: usize| record.get(pos[i]).unwrap_or("").trim();
        let section_text = cell(0);
        if section_text.is_empty() {
            return Err(Error::Parse {
                row,
                message: "section field missing".into(),
            });
        }
        let section: u32 = section_text.parse().map_err(|_| Error::Parse {
            row: row.clone(),
            message: format!("bad section {section_text:?}"),
        })?;
        let (arg1, arg2) = (cell(1).to_string(), cell(2).to_string());
        if arg1.is_empty() || arg2.is_empty() {
            return Err(Error::Parse {
                row,
                message: "missing argument text".into(),
            });
        }
        let Some(level2) = match_component(hierarchy, Level::Two, first_listed(cell(4))) else {
            dropped += 1;
            continue;
        };
        let level1 = match first_listed(cell(3)) {
            "" => hierarchy.parent_index(Level::Two, level2),
            label => match_component(hierarchy, Level::One, label).ok_or_else(|| Error::Parse {
                row: row.clone(),
                message: format!("unknown level-1 sense {label:?}"),
            })?,
        };
        out.push(PdtbRelation {
            section,
            arg1,
            arg2,
            level1,
            level2,
        });
    }
    if dropped > 0 {
        info!("dropped {dropped} PDTB relations outside the adapted label set");
    }
    Ok(out)
}

pub fn load_pdtb(hierarchy: &SenseHierarchy, path: &Path, delimiter: u8) -> Result<Vec<PdtbRelation>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_pdtb(hierarchy, file, delimiter)
}

/// Test sections of cross-validation fold `k`: sections `2k` and `2k + 1`.
pub fn cross_fold_sections(fold: usize) -> [u32; 2] {
    [2 * fold as u32, 2 * fold as u32 + 1]
}

fn collect(relations: &[PdtbRelation], sections: &[u32], tag: &str) -> Vec<SingleLabelInstance> {
    relations
        .iter()
        .enumerate()
        .filter(|(_, r)| sections.contains(&r.section))
        .map(|(i, r)| SingleLabelInstance {
            id: format!("pdtb-{tag}-{:02}-{i}", r.section),
            arg1: r.arg1.clone(),
            arg2: r.arg2.clone(),
            level1: r.level1,
            level2: r.level2,
        })
        .collect()
}

pub fn build_test_sets(relations: &[PdtbRelation], scheme: PdtbScheme) -> Result<Vec<SingleLabelTestSet>> {
    if relations.is_empty() {
        return Err(Error::Input(format!(
            "no sections found for the {} scheme",
            scheme.name()
        )));
    }
    Ok(match scheme {
        PdtbScheme::Lin => vec![SingleLabelTestSet {
            name: "lin".into(),
            fold: None,
            instances: collect(relations, &[23], "lin"),
        }],
        PdtbScheme::Ji => vec![SingleLabelTestSet {
            name: "ji".into(),
            fold: None,
            instances: collect(relations, &[21, 22], "ji"),
        }],
        PdtbScheme::Cross => (0..CROSS_FOLDS)
            .map(|k| SingleLabelTestSet {
                name: format!("cross-{k:02}"),
                fold: Some(k),
                instances: collect(relations, &cross_fold_sections(k), &format!("cross{k:02}")),
            })
            .collect(),
    })
}

pub fn load_pdtb_splits(
    hierarchy: &SenseHierarchy,
    path: &Path,
    scheme: PdtbScheme,
    delimiter: u8,
) -> Result<Vec<SingleLabelTestSet>> {
    build_test_sets(&load_pdtb(hierarchy, path, delimiter)?, scheme)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "section\targ1\targ2\tlevel1\tlevel2\n\
        23\tA\tB\tContingency\tCause\n\
        21\tA\tB\tExpansion\tConjunction|Level-of-Detail\n\
        22\tA\tB\tContingency\tContingency.Cause+Belief\n\
        22\tA\tB\tComparison\tComparison.Concession.Arg2-as-denier\n\
        0\tA\tB\t\tSimilarity\n\
        5\tA\tB\tTemporal\tSynchronous\n";

    #[test]
    fn schemes() {
        let h = SenseHierarchy::canonical();
        let rel = read_pdtb(&h, SAMPLE.as_bytes(), b'\t').unwrap();
        assert_eq!(rel.len(), 5, "Cause+Belief is dropped");
        let lin = build_test_sets(&rel, PdtbScheme::Lin).unwrap();
        assert_eq!(lin.len(), 1);
        assert_eq!(lin[0].instances.len(), 1);
        let ji = build_test_sets(&rel, PdtbScheme::Ji).unwrap();
        assert_eq!(ji[0].instances.len(), 2);
        assert_eq!(ji[0].instances[0].level2, h.index_of(Level::Two, "Conjunction").unwrap());
        assert_eq!(ji[0].instances[1].level2, h.index_of(Level::Two, "Concession").unwrap());
        let cross = build_test_sets(&rel, PdtbScheme::Cross).unwrap();
        assert_eq!(cross.len(), 12);
        assert_eq!(cross[0].instances.len(), 1);
        assert_eq!(cross[0].instances[0].level1, h.index_of(Level::One, "Comparison").unwrap());
        assert_eq!(cross[2].instances.len(), 1);
        assert_eq!(cross[11].instances.len(), 2, "sections 22-23");
    }

    #[test]
    fn empty_file_is_a_scheme_error() {
        let h = SenseHierarchy::canonical();
        let rel = read_pdtb(&h, "section\targ1\targ2\tlevel1\tlevel2\n".as_bytes(), b'\t').unwrap();
        assert!(matches!(build_test_sets(&rel, PdtbScheme::Ji), Err(Error::Input(_))));
    }

    #[test]
    fn missing_section() {
        let h = SenseHierarchy::canonical();
        let data = "section\targ1\targ2\tlevel1\tlevel2\n\tA\tB\tTemporal\tSynchronous\n";
        assert!(matches!(read_pdtb(&h, data.as_bytes(), b'\t'), Err(Error::Parse { .. })));
        let no_col = "arg1\targ2\tlevel1\tlevel2\n";
        assert!(matches!(read_pdtb(&h, no_col.as_bytes(), b'\t'), Err(Error::Schema { .. })));
    }

    #[test]
    fn unknown_scheme() {
        assert!("kim".parse::<PdtbScheme>().is_err());
        assert_eq!("Ji".parse::<PdtbScheme>().unwrap(), PdtbScheme::Ji);
    }
}
