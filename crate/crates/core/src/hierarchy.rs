//! The three-level sense inventory and the maps between its levels.
//!
//! Level 1 holds the four broad classes, level 2 the adapted 14-label set
//! and level 3 the fine-grained senses, where every level-2 sense without
//! annotated children contributes a single fallback member of the same name.
//! The canonical inventory lives in `data/senses.tsv` and is compiled in.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const CANONICAL_SCHEMA: &str = include_str!("../data/senses.tsv");
const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    #[serde(rename = "level1")]
    One,
    #[serde(rename = "level2")]
    Two,
    #[serde(rename = "level3")]
    Three,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::One, Level::Two, Level::Three];

    pub fn number(self) -> u8 {
        match self {
            Level::One => 1,
            Level::Two => 2,
            Level::Three => 3,
        }
    }

    pub fn from_number(n: u8) -> Result<Level> {
        match n {
            1 => Ok(Level::One),
            2 => Ok(Level::Two),
            3 => Ok(Level::Three),
            other => Err(Error::LabelSpace(format!("no sense level {other}"))),
        }
    }

    /// Position in `[level1, level2, level3]` arrays.
    pub fn slot(self) -> usize {
        self.number() as usize - 1
    }

    fn parent(self) -> Option<Level> {
        match self {
            Level::One => None,
            Level::Two => Some(Level::One),
            Level::Three => Some(Level::Two),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "level{}", self.number())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sense {
    pub level: Level,
    pub name: String,
    pub index: usize,
    /// Index of the parent in the level above; `None` at level 1.
    pub parent: Option<usize>,
    /// Level-3 member that reuses the name of a level-2 sense without children.
    pub is_fallback: bool,
}

/// Lowercased alphanumeric key used to match sense names written with
/// different casing or separators (`Level-of-Detail`, `level_of_detail`).
pub fn normalize_name(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SenseHierarchy {
    levels: [Vec<Sense>; 3],
    lookup: [HashMap<String, usize>; 3],
}

impl SenseHierarchy {
    /// The inventory shipped with the crate.
    pub fn canonical() -> SenseHierarchy {
        SenseHierarchy::from_schema(CANONICAL_SCHEMA).expect("bundled sense schema is valid")
    }

    /// Parses the plain-text schema: one `level<TAB>name<TAB>parent<TAB>is_fallback`
    /// row per label, `#` comment lines, members listed in canonical order.
    pub fn from_schema(text: &str) -> Result<SenseHierarchy> {
        let mut rows: [Vec<(String, String, bool)>; 3] = Default::default();
        let mut version = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let mut parts = comment.trim().split('\t');
                if parts.next() == Some("version") {
                    version = parts.next().map(str::to_string);
                }
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(Error::LabelSpace(format!(
                    "schema line {}: expected 4 tab-separated fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let level: u8 = fields[0].parse().map_err(|_| {
                Error::LabelSpace(format!("schema line {}: bad level {:?}", lineno + 1, fields[0]))
            })?;
            let level = Level::from_number(level)?;
            let fallback = match fields[3] {
                "true" => true,
                "false" => false,
                other => {
                    return Err(Error::LabelSpace(format!(
                        "schema line {}: bad is_fallback {other:?}",
                        lineno + 1
                    )))
                }
            };
            rows[level.slot()].push((fields[1].to_string(), fields[2].to_string(), fallback));
        }
        match version.as_deref() {
            Some(SCHEMA_VERSION) => {}
            Some(v) => {
                return Err(Error::LabelSpace(format!("unsupported schema version {v}")));
            }
            None => return Err(Error::LabelSpace("schema has no version line".into())),
        }

        let mut hierarchy = SenseHierarchy {
            levels: Default::default(),
            lookup: Default::default(),
        };
        for level in Level::ALL {
            for (name, parent, fallback) in &rows[level.slot()] {
                let parent = match level.parent() {
                    None => {
                        if parent != "-" {
                            return Err(Error::LabelSpace(format!(
                                "level-1 sense {name} cannot have parent {parent}"
                            )));
                        }
                        None
                    }
                    Some(up) => Some(hierarchy.index_of(up, parent)?),
                };
                hierarchy.push(level, name, parent, *fallback)?;
            }
        }
        hierarchy.validate()?;
        Ok(hierarchy)
    }

    /// Builds the hierarchy from fixed level-1/level-2 inventories and a level-3
    /// space produced by [`build_level3_space`].
    pub fn with_level3(level3_names: &[&str]) -> Result<SenseHierarchy> {
        let base = SenseHierarchy::canonical();
        let level3 = build_level3_space(&base, level3_names)?;
        let mut hierarchy = SenseHierarchy {
            levels: [base.levels[0].clone(), base.levels[1].clone(), Vec::new()],
            lookup: [base.lookup[0].clone(), base.lookup[1].clone(), HashMap::new()],
        };
        for sense in level3 {
            hierarchy.push(Level::Three, &sense.name, sense.parent, sense.is_fallback)?;
        }
        hierarchy.validate()?;
        Ok(hierarchy)
    }

    fn push(&mut self, level: Level, name: &str, parent: Option<usize>, fallback: bool) -> Result<()> {
        let slot = level.slot();
        let key = normalize_name(name);
        if self.lookup[slot].contains_key(&key) {
            return Err(Error::LabelSpace(format!("duplicate {level} sense {name}")));
        }
        let index = self.levels[slot].len();
        self.lookup[slot].insert(key, index);
        self.levels[slot].push(Sense {
            level,
            name: name.to_string(),
            index,
            parent,
            is_fallback: fallback,
        });
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        if self.levels[0].len() != 4 {
            return Err(Error::LabelSpace(format!(
                "level 1 must have 4 senses, found {}",
                self.levels[0].len()
            )));
        }
        if self.levels[1].len() != 14 {
            return Err(Error::LabelSpace(format!(
                "level 2 must have 14 senses, found {}",
                self.levels[1].len()
            )));
        }
        for l2 in &self.levels[1] {
            let children: Vec<&Sense> = self.children(Level::Two, l2.index).collect();
            if children.is_empty() {
                return Err(Error::LabelSpace(format!(
                    "level-2 sense {} has no level-3 member",
                    l2.name
                )));
            }
            let fallbacks = children.iter().filter(|c| c.is_fallback).count();
            if fallbacks > 0 && (children.len() != 1 || children[0].name != l2.name) {
                return Err(Error::LabelSpace(format!(
                    "fallback for {} must be its only level-3 member and share its name",
                    l2.name
                )));
            }
        }
        Ok(())
    }

    pub fn senses(&self, level: Level) -> &[Sense] {
        &self.levels[level.slot()]
    }

    pub fn size(&self, level: Level) -> usize {
        self.levels[level.slot()].len()
    }

    pub fn sizes(&self) -> [usize; 3] {
        [self.levels[0].len(), self.levels[1].len(), self.levels[2].len()]
    }

    pub fn sense(&self, level: Level, index: usize) -> &Sense {
        &self.levels[level.slot()][index]
    }

    pub fn name(&self, level: Level, index: usize) -> &str {
        &self.levels[level.slot()][index].name
    }

    pub fn find(&self, level: Level, name: &str) -> Option<usize> {
        self.lookup[level.slot()].get(&normalize_name(name)).copied()
    }

    pub fn index_of(&self, level: Level, name: &str) -> Result<usize> {
        self.find(level, name)
            .ok_or_else(|| Error::LabelSpace(format!("unknown {level} sense {name:?}")))
    }

    pub fn children(&self, level: Level, index: usize) -> impl Iterator<Item = &Sense> {
        let child_slot = level.slot() + 1;
        self.levels
            .get(child_slot)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
            .iter()
            .filter(move |s| s.parent == Some(index))
    }

    /// Level-1 ancestor of a level-2 sense, by name.
    pub fn parent_of(&self, level2_name: &str) -> Result<&Sense> {
        let idx = self.index_of(Level::Two, level2_name)?;
        Ok(self.sense(Level::One, self.parent_index(Level::Two, idx)))
    }

    pub fn parent_index(&self, level: Level, index: usize) -> usize {
        self.levels[level.slot()][index]
            .parent
            .unwrap_or_else(|| panic!("{level} sense has no parent"))
    }

    /// Level-1 ancestor of any sense.
    pub fn level1_ancestor(&self, level: Level, index: usize) -> usize {
        match level {
            Level::One => index,
            Level::Two => self.parent_index(Level::Two, index),
            Level::Three => self.parent_index(Level::Two, self.parent_index(Level::Three, index)),
        }
    }

    pub fn is_coherent(&self, level1_name: &str, level2_name: &str) -> Result<bool> {
        let l1 = self.index_of(Level::One, level1_name)?;
        let l2 = self.index_of(Level::Two, level2_name)?;
        Ok(self.coherent(l1, l2))
    }

    pub fn coherent(&self, level1: usize, level2: usize) -> bool {
        self.parent_index(Level::Two, level2) == level1
    }

    pub fn to_schema(&self) -> String {
        let mut out = String::from("# idrr sense hierarchy\n");
        out.push_str(&format!("# version\t{SCHEMA_VERSION}\n"));
        out.push_str("# columns: level\tname\tparent\tis_fallback\n");
        for level in Level::ALL {
            for s in self.senses(level) {
                let parent = match (level.parent(), s.parent) {
                    (Some(up), Some(p)) => self.name(up, p).to_string(),
                    _ => "-".to_string(),
                };
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\n",
                    level.number(),
                    s.name,
                    parent,
                    s.is_fallback
                ));
            }
        }
        out
    }

    /// SHA-256 of the serialized schema; recorded in checkpoints and manifests.
    pub fn schema_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_schema().as_bytes()))
    }
}

/// Level-3 senses under the 14 adapted level-2 senses, plus those whose
/// level-2 parent was removed by the adaptation. Order follows the
/// canonical level-2 order.
const LEVEL3_CATALOG: &[(&str, &str, &[&str])] = &[
    ("Precedence", "Asynchronous", &[]),
    ("Succession", "Asynchronous", &[]),
    ("Reason", "Cause", &[]),
    ("Result", "Cause", &[]),
    ("NegResult", "Cause", &["Negative-Result"]),
    ("Arg1-as-Cond", "Condition", &[]),
    ("Arg2-as-Cond", "Condition", &[]),
    ("Arg1-as-NegCond", "Negative-Condition", &[]),
    ("Arg2-as-NegCond", "Negative-Condition", &[]),
    ("Arg1-as-Goal", "Purpose", &[]),
    ("Arg2-as-Goal", "Purpose", &[]),
    ("Arg1-as-Denier", "Concession", &[]),
    ("Arg2-as-Denier", "Concession", &[]),
    ("Arg1-as-Exception", "Exception", &["Arg1-as-Excpt"]),
    ("Arg2-as-Exception", "Exception", &["Arg2-as-Excpt"]),
    ("Arg1-as-Instance", "Instantiation", &[]),
    ("Arg2-as-Instance", "Instantiation", &[]),
    ("Arg1-as-Detail", "Level-of-Detail", &[]),
    ("Arg2-as-Detail", "Level-of-Detail", &[]),
    ("Arg1-as-Manner", "Manner", &[]),
    ("Arg2-as-Manner", "Manner", &[]),
    ("Arg1-as-Substitution", "Substitution", &["Arg1-as-Subst"]),
    ("Arg2-as-Substitution", "Substitution", &["Arg2-as-Subst"]),
];

fn catalog_entry(name: &str) -> Option<&'static (&'static str, &'static str, &'static [&'static str])> {
    let key = normalize_name(name);
    LEVEL3_CATALOG.iter().find(|(canonical, _, aliases)| {
        normalize_name(canonical) == key || aliases.iter().any(|a| normalize_name(a) == key)
    })
}

/// Known level-2 parent of a level-3 name, even if that parent is outside the
/// adapted set.
pub fn catalog_parent(level3_name: &str) -> Option<&'static str> {
    catalog_entry(level3_name).map(|(_, parent, _)| *parent)
}

/// Canonical spelling of a level-3 name, resolving known aliases.
pub fn catalog_name(level3_name: &str) -> Option<&'static str> {
    catalog_entry(level3_name).map(|(name, _, _)| *name)
}

/// Builds the level-3 space from the level-3 names observed in the adapted
/// corpus. Level-2 names in the input are accepted and ignored; every
/// level-2 sense without children gets one fallback member.
pub fn build_level3_space(base: &SenseHierarchy, names: &[&str]) -> Result<Vec<Sense>> {
    let mut wanted: Vec<(usize, String)> = Vec::new();
    for name in names {
        if base.find(Level::Two, name).is_some() {
            continue;
        }
        let parent = catalog_parent(name)
            .ok_or_else(|| Error::LabelSpace(format!("unknown level-3 sense {name:?}")))?;
        let parent_idx = base.find(Level::Two, parent).ok_or_else(|| {
            Error::LabelSpace(format!(
                "level-3 sense {name:?} belongs to {parent}, which is outside the adapted level-2 set"
            ))
        })?;
        let canonical = catalog_name(name).expect("catalog entry exists").to_string();
        if !wanted.iter().any(|(_, n)| *n == canonical) {
            wanted.push((parent_idx, canonical));
        }
    }

    let mut space = Vec::new();
    for l2 in base.senses(Level::Two) {
        let children: Vec<&str> = LEVEL3_CATALOG
            .iter()
            .map(|(n, _, _)| *n)
            .filter(|n| wanted.iter().any(|(p, w)| *p == l2.index && w == n))
            .collect();
        if children.is_empty() {
            space.push(Sense {
                level: Level::Three,
                name: l2.name.clone(),
                index: space.len(),
                parent: Some(l2.index),
                is_fallback: true,
            });
        } else {
            for child in children {
                space.push(Sense {
                    level: Level::Three,
                    name: child.to_string(),
                    index: space.len(),
                    parent: Some(l2.index),
                    is_fallback: false,
                });
            }
        }
    }
    Ok(space)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_sizes() {
        let h = SenseHierarchy::canonical();
        assert_eq!(h.sizes(), [4, 14, 24]);
        let names: Vec<&str> = h.senses(Level::One).iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["Temporal", "Contingency", "Comparison", "Expansion"]);
    }

    #[test]
    fn parent_examples() {
        let h = SenseHierarchy::canonical();
        assert_eq!(h.parent_of("Cause").unwrap().name, "Contingency");
        assert_eq!(h.parent_of("Asynchronous").unwrap().name, "Temporal");
        assert_eq!(h.parent_of("Similarity").unwrap().name, "Comparison");
        let err = h.parent_of("Cause+Belief").unwrap_err();
        assert!(err.to_string().contains("Cause+Belief"));
    }

    #[test]
    fn coherence_examples() {
        let h = SenseHierarchy::canonical();
        assert!(h.is_coherent("Temporal", "Asynchronous").unwrap());
        assert!(!h.is_coherent("Expansion", "Cause").unwrap());
        assert!(h.is_coherent("Comparison", "Contrast").unwrap());
        assert!(h.is_coherent("Bogus", "Contrast").is_err());
    }

    #[test]
    fn every_level2_is_coherent_with_its_parent() {
        let h = SenseHierarchy::canonical();
        for s in h.senses(Level::Two) {
            let p = h.parent_of(&s.name).unwrap();
            assert!(h.is_coherent(&p.name, &s.name).unwrap());
        }
    }

    #[test]
    fn level3_reaches_level1_in_two_hops() {
        let h = SenseHierarchy::canonical();
        for s in h.senses(Level::Three) {
            let l2 = h.parent_index(Level::Three, s.index);
            let l1 = h.parent_index(Level::Two, l2);
            assert!(l1 < 4);
            assert_eq!(h.level1_ancestor(Level::Three, s.index), l1);
        }
    }

    #[test]
    fn schema_round_trip_preserves_indices() {
        let h = SenseHierarchy::canonical();
        let again = SenseHierarchy::from_schema(&h.to_schema()).unwrap();
        assert_eq!(h, again);
        assert_eq!(h.schema_hash(), again.schema_hash());
    }

    #[test]
    fn asynchronous_contributes_two_members() {
        let base = SenseHierarchy::canonical();
        let space = build_level3_space(&base, &["Precedence", "Succession"]).unwrap();
        let under: Vec<&Sense> = space.iter().filter(|s| s.parent == Some(1)).collect();
        assert_eq!(under.len(), 2);
        assert!(under.iter().all(|s| !s.is_fallback));
        let conj = space.iter().find(|s| s.name == "Conjunction").unwrap();
        assert!(conj.is_fallback);
    }

    #[test]
    fn fallback_only_space() {
        let base = SenseHierarchy::canonical();
        let space = build_level3_space(&base, &[]).unwrap();
        assert_eq!(space.len(), 14);
        assert!(space.iter().all(|s| s.is_fallback));
        for (i, s) in space.iter().enumerate() {
            assert_eq!(s.name, base.name(Level::Two, i));
        }
    }

    #[test]
    fn level3_outside_adapted_set_is_rejected() {
        let base = SenseHierarchy::canonical();
        let err = build_level3_space(&base, &["Arg1-as-NegCond"]).unwrap_err();
        assert!(matches!(err, Error::LabelSpace(_)));
        assert!(build_level3_space(&base, &["Nonsense"]).is_err());
    }

    #[test]
    fn table_inventory_matches_bundled_schema() {
        let level3 = [
            "Precedence",
            "Succession",
            "Reason",
            "Result",
            "NegResult",
            "Arg1-as-Cond",
            "Arg2-as-Cond",
            "Arg1-as-Goal",
            "Arg2-as-Goal",
            "Arg1-as-Denier",
            "Arg2-as-Denier",
            "Arg1-as-Instance",
            "Arg2-as-Instance",
            "Arg1-as-Detail",
            "Arg2-as-Detail",
            "Arg1-as-Manner",
            "Arg2-as-Manner",
            "Arg1-as-Substitution",
            "Arg2-as-Substitution",
        ];
        let built = SenseHierarchy::with_level3(&level3).unwrap();
        assert_eq!(built, SenseHierarchy::canonical());
    }

    #[test]
    fn name_matching_ignores_case_and_separators() {
        let h = SenseHierarchy::canonical();
        assert_eq!(h.find(Level::Two, "level_of_detail"), Some(11));
        assert_eq!(h.find(Level::Three, "ARG2-as-Denier"), Some(11));
    }
}
