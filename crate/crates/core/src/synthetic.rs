//! Generated corpora for smoke runs and desk-scale checks.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{adapt_label_space, RelationInstance};
use crate::error::Result;
use crate::hierarchy::SenseHierarchy;

/// Level-3 senses used as classes, grouped by level-1 ancestor.
const CLASSES: [&[&str]; 4] = [
    &["Synchronous", "Precedence", "Succession"],
    &["Reason", "Result", "Arg2-as-Cond", "Arg2-as-Goal"],
    &["Arg1-as-Denier", "Arg2-as-Denier", "Contrast", "Similarity"],
    &[
        "Conjunction",
        "Equivalence",
        "Arg2-as-Instance",
        "Arg2-as-Detail",
        "Arg2-as-Manner",
    ],
];

const FILLER: [&str; 16] = [
    "the", "report", "said", "market", "later", "people", "city", "water", "quickly", "several", "house", "were",
    "about", "new", "day", "plan",
];

pub const PRIMARY_MASS: f64 = 0.7;
pub const SECONDARY_MASS: f64 = 0.15;

/// Number of classes produced by [`separable_corpus`].
pub fn class_count() -> usize {
    CLASSES.iter().map(|g| g.len()).sum()
}

/// A separable corpus: instance `i` belongs to class `i mod 16`. The first
/// argument is a class cue among random filler, the second a class cue and a
/// level-1 group cue. Each target puts [`PRIMARY_MASS`] on the class sense,
/// [`SECONDARY_MASS`] on a sibling class under the same level-1 sense and
/// spreads the rest evenly over every level-3 sense, so majorities are
/// unambiguous and all target entries are positive.
pub fn separable_corpus(hierarchy: &SenseHierarchy, instances: usize, seed: u64) -> Result<Vec<RelationInstance>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes: Vec<(usize, &str, &str)> = CLASSES
        .iter()
        .enumerate()
        .flat_map(|(g, group)| (0..group.len()).map(move |j| (g, group[j], group[(j + 1) % group.len()])))
        .collect();
    let level3: Vec<&str> = hierarchy
        .senses(crate::hierarchy::Level::Three)
        .iter()
        .map(|s| s.name.as_str())
        .collect();
    let rest = (1.0 - PRIMARY_MASS - SECONDARY_MASS) / level3.len() as f64;
    let mut out = Vec::with_capacity(instances);
    for i in 0..instances {
        let c = i % classes.len();
        let (group, primary, secondary) = classes[c];
        let mut raw: BTreeMap<String, f64> = level3.iter().map(|n| (n.to_string(), rest)).collect();
        *raw.entry(primary.to_string()).or_insert(0.0) += PRIMARY_MASS;
        *raw.entry(secondary.to_string()).or_insert(0.0) += SECONDARY_MASS;
        let id = format!("syn-{i:03}");
        let targets = adapt_label_space(hierarchy, &id, &raw)?;
        let mut words = |cues: &[String], n: usize| -> String {
            let mut w: Vec<String> = (0..n).map(|_| FILLER.choose(&mut rng).unwrap().to_string()).collect();
            w.extend(cues.iter().cloned());
            w.shuffle(&mut rng);
            w.join(" ")
        };
        let arg1 = words(&[format!("cue{c}a")], 2) + ".";
        let arg2 = words(&[format!("cue{c}b"), format!("group{group}")], 0) + ".";
        out.push(RelationInstance::new(id, arg1, arg2, "synthetic".into(), "synthetic".into(), targets)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::Level;

    #[test]
    fn sixty_four_instances() {
        let h = SenseHierarchy::canonical();
        let data = separable_corpus(&h, 64, 7).unwrap();
        assert_eq!(data.len(), 64);
        assert_eq!(class_count(), 16);
        let reason = h.index_of(Level::Three, "Reason").unwrap();
        assert_eq!(data[3].majority[2], reason);
        assert!(data[3].targets[0].values[1] > 0.85);
        assert!(data[3].targets.iter().all(|t| t.values.iter().all(|&v| v > 0.0)));
        let rest = (1.0 - PRIMARY_MASS - SECONDARY_MASS) / 24.0;
        assert!((data[3].targets[2].values[reason] - PRIMARY_MASS - rest).abs() < 1e-12);
        assert_eq!(separable_corpus(&h, 64, 7).unwrap(), data);
    }
}
