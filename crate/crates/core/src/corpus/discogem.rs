use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RawRelation;
use crate::error::{Error, Result};

/// Names the columns of a distribution-labelled corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMap {
    #[serde(default = "default_id")]
    pub id: String,
    #[serde(default = "default_arg1")]
    pub arg1: String,
    #[serde(default = "default_arg2")]
    pub arg2: String,
    /// Optional; rows get an empty genre when unset.
    #[serde(default)]
    pub genre: Option<String>,
    /// Probability columns. When unset, every column other than the id,
    /// argument and genre columns is read as a sense probability.
    #[serde(default)]
    pub senses: Option<Vec<String>>,
}

fn default_id() -> String {
    "id".into()
}
fn default_arg1() -> String {
    "arg1".into()
}
fn default_arg2() -> String {
    "arg2".into()
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            id: default_id(),
            arg1: default_arg1(),
            arg2: default_arg2(),
            genre: Some("genre".into()),
            senses: None,
        }
    }
}

pub fn load_discogem(path: &Path, columns: &ColumnMap, delimiter: u8) -> Result<Vec<RawRelation>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_discogem(file, columns, delimiter)
}

pub fn read_discogem<R: Read>(input: R, columns: &ColumnMap, delimiter: u8) -> Result<Vec<RawRelation>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let position = |name: &str| headers.iter().position(|h| h.trim() == name);

    let mut missing = Vec::new();
    let mut require = |name: &str| {
        let pos = position(name);
        if pos.is_none() {
            missing.push(name.to_string());
        }
        pos
    };
    let id_col = require(&columns.id);
    let arg1_col = require(&columns.arg1);
    let arg2_col = require(&columns.arg2);
    let genre_col = columns.genre.as_deref().map(&mut require).flatten();
    let sense_cols: Vec<(String, Option<usize>)> = match &columns.senses {
        Some(names) => names.iter().map(|n| (n.clone(), require(n))).collect(),
        None => headers
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                Some(*i) != id_col && Some(*i) != arg1_col && Some(*i) != arg2_col && Some(*i) != genre_col
            })
            .map(|(i, h)| (h.trim().to_string(), Some(i)))
            .collect(),
    };
    if !missing.is_empty() {
        return Err(Error::Schema { missing });
    }
    let (id_col, arg1_col, arg2_col) = (id_col.unwrap(), arg1_col.unwrap(), arg2_col.unwrap());

    let mut out = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        let cell = |i: usize| record.get(i).unwrap_or("").trim();
        let id = match cell(id_col) {
            "" => format!("row-{}", row_no + 1),
            id => id.to_string(),
        };
        let arg1 = cell(arg1_col).to_string();
        let arg2 = cell(arg2_col).to_string();
        if arg1.is_empty() || arg2.is_empty() {
            return Err(Error::Parse {
                row: id,
                message: "missing argument text".into(),
            });
        }
        let mut raw = BTreeMap::new();
        for (name, col) in &sense_cols {
            let text = cell(col.expect("checked above"));
            if text.is_empty() {
                return Err(Error::Parse {
                    row: id,
                    message: format!("blank probability cell in column {name}"),
                });
            }
            let value: f64 = text.parse().map_err(|_| Error::Parse {
                row: id.clone(),
                message: format!("non-numeric probability {text:?} in column {name}"),
            })?;
            if !value.is_finite() || value < 0.0 {
                return Err(Error::Parse {
                    row: id,
                    message: format!("invalid probability {value} in column {name}"),
                });
            }
            *raw.entry(name.clone()).or_insert(0.0) += value;
        }
        out.push(RawRelation {
            id,
            arg1,
            arg2,
            genre: genre_col.map(|g| cell(g).to_string()).unwrap_or_default(),
            raw,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn columns() -> ColumnMap {
        ColumnMap::default()
    }

    #[test]
    fn header_only_is_empty() {
        let data = "id,arg1,arg2,genre,Cause,Conjunction\n";
        assert!(read_discogem(data.as_bytes(), &columns(), b',').unwrap().is_empty());
    }

    #[test]
    fn reads_rows() {
        let data = "id,arg1,arg2,genre,Cause,Conjunction\n\
                    a1,It rained.,The game stopped.,literary,0.7,0.3\n";
        let rows = read_discogem(data.as_bytes(), &columns(), b',').unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].genre, "literary");
        assert_eq!(rows[0].raw["Cause"], 0.7);
    }

    #[test]
    fn blank_probability_is_a_row_error() {
        let data = "id,arg1,arg2,genre,Cause,Conjunction\nx9,a,b,political,,\n";
        let err = read_discogem(data.as_bytes(), &columns(), b',').unwrap_err();
        match err {
            Error::Parse { row, .. } => assert_eq!(row, "x9"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_names_the_row() {
        let data = "id,arg1,arg2,genre,Cause\nr7,a,b,political,lots\n";
        let err = read_discogem(data.as_bytes(), &columns(), b',').unwrap_err();
        assert!(err.to_string().contains("r7"));
    }

    #[test]
    fn missing_columns_are_listed() {
        let map = ColumnMap {
            senses: Some(vec!["Cause".into(), "Reason".into()]),
            ..columns()
        };
        let data = "id,text1,arg2,genre,Cause\n";
        match read_discogem(data.as_bytes(), &map, b',').unwrap_err() {
            Error::Schema { missing } => assert_eq!(missing, vec!["arg1", "Reason"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_argument_is_rejected() {
        let data = "id,arg1,arg2,genre,Cause\nr1,,b,political,1\n";
        assert!(matches!(
            read_discogem(data.as_bytes(), &columns(), b',').unwrap_err(),
            Error::Parse { .. }
        ));
    }

    #[test]
    fn tab_delimited() {
        let data = "id\targ1\targ2\tgenre\tCause\nr1\ta, b\tc\tpolitical\t1\n";
        let rows = read_discogem(data.as_bytes(), &columns(), b'\t').unwrap();
        assert_eq!(rows[0].arg1, "a, b");
    }
}
