use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::RelationInstance;
use crate::error::{Error, Result};

const SPLIT_HEADER: &str = "# idrr split v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Split> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::Parse {
                row: other.to_string(),
                message: "unknown split name".into(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.7,
            validation: 0.1,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::Config(format!("split ratios must be non-negative: {parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios sum to {sum}, expected 1")));
        }
        Ok(())
    }

    pub fn get(&self, split: Split) -> f64 {
        match split {
            Split::Train => self.train,
            Split::Validation => self.validation,
            Split::Test => self.test,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitAssignment {
    pub seed: u64,
    pub ratios: SplitRatios,
    pub assignment: BTreeMap<String, Split>,
}

/// Per-class split sizes. Classes with fewer than three members fill train,
/// then test, then validation; larger classes use largest-remainder rounding
/// with ties resolved in the same order.
fn class_counts(n: usize, ratios: &SplitRatios) -> [usize; 3] {
    // Indexed train, validation, test.
    let priority = [Split::Train, Split::Test, Split::Validation];
    let slot = |s: Split| match s {
        Split::Train => 0,
        Split::Validation => 1,
        Split::Test => 2,
    };
    let mut counts = [0usize; 3];
    if n < 3 {
        for split in priority.iter().take(n) {
            counts[slot(*split)] += 1;
        }
        return counts;
    }
    let exact: Vec<f64> = Split::ALL.iter().map(|s| ratios.get(*s) * n as f64).collect();
    for (c, e) in counts.iter_mut().zip(&exact) {
        *c = e.floor() as usize;
    }
    let mut remaining = n - counts.iter().sum::<usize>();
    let mut order: Vec<Split> = priority.to_vec();
    // Stable sort keeps the priority order among equal remainders.
    order.sort_by(|a, b| {
        let ra = exact[slot(*a)] - exact[slot(*a)].floor();
        let rb = exact[slot(*b)] - exact[slot(*b)].floor();
        rb.partial_cmp(&ra).expect("finite")
    });
    for split in order {
        if remaining == 0 {
            break;
        }
        counts[slot(split)] += 1;
        remaining -= 1;
    }
    counts
}

/// Stratifies on the level-2 majority label. Members of each class are sorted
/// by id and shuffled with a ChaCha8 stream seeded from `seed`, so the result
/// does not depend on input order or platform.
pub fn stratified_split(
    instances: &[RelationInstance],
    ratios: SplitRatios,
    seed: u64,
) -> Result<SplitAssignment> {
    ratios.validate()?;
    let mut seen = HashSet::new();
    let mut classes: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    for inst in instances {
        if !seen.insert(inst.id.as_str()) {
            return Err(Error::Input(format!("duplicate instance id {}", inst.id)));
        }
        classes.entry(inst.majority[1]).or_default().push(&inst.id);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = BTreeMap::new();
    for members in classes.values_mut() {
        members.sort_unstable();
        members.shuffle(&mut rng);
        let [train, validation, _] = class_counts(members.len(), &ratios);
        for (pos, id) in members.iter().enumerate() {
            let split = if pos < train {
                Split::Train
            } else if pos < train + validation {
                Split::Validation
            } else {
                Split::Test
            };
            assignment.insert(id.to_string(), split);
        }
    }
    Ok(SplitAssignment {
        seed,
        ratios,
        assignment,
    })
}

impl SplitAssignment {
    pub fn get(&self, id: &str) -> Option<Split> {
        self.assignment.get(id).copied()
    }

    pub fn select<'a>(&self, instances: &'a [RelationInstance], split: Split) -> Vec<&'a RelationInstance> {
        instances.iter().filter(|i| self.get(&i.id) == Some(split)).collect()
    }

    pub fn counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for s in self.assignment.values() {
            c[*s as usize] += 1;
        }
        c
    }

    /// Sidecar text: header, seed and ratios, then `id<TAB>split` sorted by id.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(SPLIT_HEADER);
        out.push('\n');
        out.push_str(&format!("seed\t{}\n", self.seed));
        out.push_str(&format!(
            "ratios\t{}\t{}\t{}\n",
            self.ratios.train, self.ratios.validation, self.ratios.test
        ));
        for (id, split) in &self.assignment {
            out.push_str(&format!("{id}\t{split}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<SplitAssignment> {
        let bad = |line: &str, message: &str| Error::Parse {
            row: line.to_string(),
            message: message.to_string(),
        };
        let mut lines = text.lines();
        if lines.next() != Some(SPLIT_HEADER) {
            return Err(bad("1", "missing split header"));
        }
        let seed_line = lines.next().ok_or_else(|| bad("2", "missing seed"))?;
        let seed = seed_line
            .strip_prefix("seed\t")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(seed_line, "bad seed line"))?;
        let ratio_line = lines.next().ok_or_else(|| bad("3", "missing ratios"))?;
        let parts: Vec<f64> = ratio_line
            .strip_prefix("ratios\t")
            .ok_or_else(|| bad(ratio_line, "bad ratios line"))?
            .split('\t')
            .map(|s| s.parse().map_err(|_| bad(ratio_line, "bad ratio")))
            .collect::<Result<_>>()?;
        if parts.len() != 3 {
            return Err(bad(ratio_line, "expected three ratios"));
        }
        let mut assignment = BTreeMap::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let (id, split) = line.split_once('\t').ok_or_else(|| bad(line, "expected id<TAB>split"))?;
            assignment.insert(id.to_string(), split.parse()?);
        }
        Ok(SplitAssignment {
            seed,
            ratios: SplitRatios {
                train: parts[0],
                validation: parts[1],
                test: parts[2],
            },
            assignment,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<SplitAssignment> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SplitAssignment::from_text(&text)
    }
}
