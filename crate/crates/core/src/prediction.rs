use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distribution::LabelDistribution;
use crate::error::{Error, Result};
use crate::hierarchy::{Level, SenseHierarchy};

/// Model output for one instance: a distribution and a pooled label per level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub distributions: [LabelDistribution; 3],
    pub labels: [usize; 3],
}

impl Prediction {
    /// Builds a prediction whose labels are the argmax of each distribution.
    pub fn from_distributions(id: String, distributions: [LabelDistribution; 3]) -> Prediction {
        let labels = [0, 1, 2].map(|i| distributions[i].majority());
        Prediction {
            id,
            distributions,
            labels,
        }
    }

    pub fn label(&self, level: Level) -> usize {
        self.labels[level.slot()]
    }
}

#[derive(Serialize, Deserialize)]
struct PredictionRecord {
    id: String,
    level1: BTreeMap<String, f64>,
    level2: BTreeMap<String, f64>,
    level3: BTreeMap<String, f64>,
    label1: String,
    label2: String,
    label3: String,
}

/// One JSON object per line, distributions keyed by sense name. Order
/// follows `predictions`.
pub fn write_predictions(path: &Path, hierarchy: &SenseHierarchy, predictions: &[Prediction]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for p in predictions {
        let named = |level: Level| -> BTreeMap<String, f64> {
            hierarchy
                .senses(level)
                .iter()
                .map(|s| (s.name.clone(), p.distributions[level.slot()].values[s.index]))
                .collect()
        };
        let record = PredictionRecord {
            id: p.id.clone(),
            level1: named(Level::One),
            level2: named(Level::Two),
            level3: named(Level::Three),
            label1: hierarchy.name(Level::One, p.labels[0]).to_string(),
            label2: hierarchy.name(Level::Two, p.labels[1]).to_string(),
            label3: hierarchy.name(Level::Three, p.labels[2]).to_string(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_predictions(path: &Path, hierarchy: &SenseHierarchy) -> Result<Vec<Prediction>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PredictionRecord = serde_json::from_str(&line)?;
        let row = format!("{}:{}", path.display(), n + 1);
        let unnamed = |level: Level, map: &BTreeMap<String, f64>| -> Result<LabelDistribution> {
            let mut values = vec![0.0; hierarchy.size(level)];
            for (name, v) in map {
                let i = hierarchy.index_of(level, name).map_err(|_| Error::Parse {
                    row: row.clone(),
                    message: format!("unknown {level} sense {name:?}"),
                })?;
                values[i] = *v;
            }
            LabelDistribution::new(level, values)
        };
        let label = |level: Level, name: &str| hierarchy.index_of(level, name);
        out.push(Prediction {
            distributions: [
                unnamed(Level::One, &record.level1)?,
                unnamed(Level::Two, &record.level2)?,
                unnamed(Level::Three, &record.level3)?,
            ],
            labels: [
                label(Level::One, &record.label1)?,
                label(Level::Two, &record.label2)?,
                label(Level::Three, &record.label3)?,
            ],
            id: record.id,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let h = SenseHierarchy::canonical();
        let [a, b, c] = h.sizes();
        let p = Prediction::from_distributions(
            "r1".into(),
            [
                LabelDistribution::new(Level::One, vec![0.1, 0.6, 0.2, 0.1]).unwrap(),
                LabelDistribution::uniform(Level::Two, b),
                LabelDistribution::one_hot(Level::Three, c, 5),
            ],
        );
        assert_eq!(p.labels, [1, 0, 5]);
        assert_eq!(a, 4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("predictions.jsonl");
        write_predictions(&path, &h, &[p.clone()]).unwrap();
        assert_eq!(read_predictions(&path, &h).unwrap(), vec![p]);
    }
}
