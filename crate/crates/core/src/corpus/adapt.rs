use std::collections::BTreeMap;

use log::warn;

use super::{RawRelation, RelationInstance};
use crate::distribution::LabelDistribution;
use crate::error::{Error, Result};
use crate::hierarchy::{Level, SenseHierarchy};

enum Target {
    Level2(usize),
    Level3(usize),
    Dropped,
}

fn resolve(hierarchy: &SenseHierarchy, name: &str) -> Target {
    // Dotted paths such as `Comparison.Concession.Arg1-as-denier` resolve by
    // their last component.
    let candidates = [Some(name), name.rsplit('.').next()];
    for candidate in candidates.into_iter().flatten() {
        if let Some(i) = hierarchy.find(Level::Three, candidate) {
            if !hierarchy.sense(Level::Three, i).is_fallback {
                return Target::Level3(i);
            }
        }
        if let Some(i) = hierarchy.find(Level::Two, candidate) {
            return Target::Level2(i);
        }
        if let Some(canonical) = crate::hierarchy::catalog_name(candidate) {
            if let Some(i) = hierarchy.find(Level::Three, canonical) {
                return Target::Level3(i);
            }
        }
    }
    Target::Dropped
}

/// Maps raw annotation mass onto the adapted label spaces.
///
/// Senses outside the adapted inventory are dropped and the remaining mass is
/// L1-normalised. Level-2 mass is the sense's own mass plus that of its
/// level-3 children; level-1 mass sums the level-2 children. At level 3,
/// fallback members copy the level-2 mass and mass annotated only at level 2
/// is shared among the children in proportion to their own mass (uniformly if
/// they have none), so all three levels stay hierarchy-consistent.
pub fn adapt_label_space(
    hierarchy: &SenseHierarchy,
    id: &str,
    raw: &BTreeMap<String, f64>,
) -> Result<[LabelDistribution; 3]> {
    let [n1, n2, n3] = hierarchy.sizes();
    let mut direct2 = vec![0.0; n2];
    let mut direct3 = vec![0.0; n3];
    for (name, &p) in raw {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::Parse {
                row: id.to_string(),
                message: format!("invalid probability {p} for {name}"),
            });
        }
        match resolve(hierarchy, name) {
            Target::Level2(i) => direct2[i] += p,
            Target::Level3(i) => direct3[i] += p,
            Target::Dropped => {}
        }
    }

    let mut mass2 = direct2.clone();
    for s in hierarchy.senses(Level::Three) {
        mass2[s.parent.expect("level-3 has parent")] += direct3[s.index];
    }
    let total: f64 = mass2.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateInstance { id: id.to_string() });
    }

    let mut mass3 = vec![0.0; n3];
    for l2 in hierarchy.senses(Level::Two) {
        let children: Vec<usize> = hierarchy.children(Level::Two, l2.index).map(|s| s.index).collect();
        if children.len() == 1 && hierarchy.sense(Level::Three, children[0]).is_fallback {
            mass3[children[0]] = mass2[l2.index];
            continue;
        }
        let child_total: f64 = children.iter().map(|&c| direct3[c]).sum();
        for &c in &children {
            let share = if child_total > 0.0 {
                direct3[c] / child_total
            } else {
                1.0 / children.len() as f64
            };
            mass3[c] = direct3[c] + direct2[l2.index] * share;
        }
    }

    let dist2: Vec<f64> = mass2.iter().map(|m| m / total).collect();
    let mut dist1 = vec![0.0; n1];
    for s in hierarchy.senses(Level::Two) {
        dist1[s.parent.expect("level-2 has parent")] += dist2[s.index];
    }
    let mass3_total: f64 = mass3.iter().sum();
    let dist3: Vec<f64> = mass3.iter().map(|m| m / mass3_total).collect();

    Ok([
        LabelDistribution::new(Level::One, dist1)?,
        LabelDistribution::new(Level::Two, dist2)?,
        LabelDistribution::new(Level::Three, dist3)?,
    ])
}

#[derive(Debug, Clone, Default)]
pub struct AdaptedCorpus {
    pub instances: Vec<RelationInstance>,
    /// Ids excluded because adaptation removed all of their mass.
    pub excluded: Vec<String>,
}

/// Adapts every row; degenerate rows are excluded and logged.
pub fn adapt_corpus(hierarchy: &SenseHierarchy, raw: &[RawRelation], source: &str) -> Result<AdaptedCorpus> {
    let mut corpus = AdaptedCorpus::default();
    for row in raw {
        match adapt_label_space(hierarchy, &row.id, &row.raw) {
            Ok(targets) => corpus.instances.push(RelationInstance::new(
                row.id.clone(),
                row.arg1.clone(),
                row.arg2.clone(),
                row.genre.clone(),
                source.to_string(),
                targets,
            )?),
            Err(Error::DegenerateInstance { id }) => {
                warn!("excluding {id}: no mass left after label-space adaptation");
                corpus.excluded.push(id);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(corpus)
}

/// Per-level sum of each sense's probability over all instances.
pub fn mass_sums(hierarchy: &SenseHierarchy, instances: &[RelationInstance]) -> [Vec<f64>; 3] {
    let mut sums = hierarchy.sizes().map(|n| vec![0.0; n]);
    for inst in instances {
        for level in Level::ALL {
            for (acc, v) in sums[level.slot()].iter_mut().zip(&inst.targets[level.slot()].values) {
                *acc += v;
            }
        }
    }
    sums
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn drops_and_renormalises() {
        let h = SenseHierarchy::canonical();
        let [d1, d2, d3] =
            adapt_label_space(&h, "x", &raw(&[("Cause", 0.6), ("Disjunction", 0.1), ("Conjunction", 0.3)]))
                .unwrap();
        let cause = h.index_of(Level::Two, "Cause").unwrap();
        let conj = h.index_of(Level::Two, "Conjunction").unwrap();
        assert!((d2.values[cause] - 0.6 / 0.9).abs() < 1e-12);
        assert!((d2.values[conj] - 0.3 / 0.9).abs() < 1e-12);
        assert_eq!(format!("{:.4}", d2.values[cause]), "0.6667");
        assert_eq!(format!("{:.4}", d2.values[conj]), "0.3333");
        assert!((d1.values[1] - 0.6 / 0.9).abs() < 1e-12);
        let conj3 = h.index_of(Level::Three, "Conjunction").unwrap();
        assert!((d3.values[conj3] - 0.3 / 0.9).abs() < 1e-12);
        // Cause mass without level-3 detail is shared evenly by its children.
        let reason = h.index_of(Level::Three, "Reason").unwrap();
        assert!((d3.values[reason] - 0.2 / 0.9).abs() < 1e-12);
    }

    #[test]
    fn in_set_distribution_unchanged() {
        let h = SenseHierarchy::canonical();
        let [_, d2, d3] = adapt_label_space(
            &h,
            "x",
            &raw(&[("Reason", 0.5), ("Arg2-as-Detail", 0.25), ("Conjunction", 0.25)]),
        )
        .unwrap();
        assert_eq!(d3.values[h.index_of(Level::Three, "Reason").unwrap()], 0.5);
        assert_eq!(d3.values[h.index_of(Level::Three, "Arg2-as-Detail").unwrap()], 0.25);
        assert_eq!(d2.values[h.index_of(Level::Two, "Level-of-Detail").unwrap()], 0.25);
    }

    #[test]
    fn dotted_names_resolve() {
        let h = SenseHierarchy::canonical();
        let [_, _, d3] = adapt_label_space(
            &h,
            "x",
            &raw(&[("Comparison.Concession.Arg1-as-denier", 1.0)]),
        )
        .unwrap();
        assert_eq!(d3.values[h.index_of(Level::Three, "Arg1-as-Denier").unwrap()], 1.0);
    }

    #[test]
    fn all_mass_dropped_is_degenerate() {
        let h = SenseHierarchy::canonical();
        let err = adapt_label_space(&h, "bad", &raw(&[("Disjunction", 1.0)])).unwrap_err();
        assert!(matches!(err, Error::DegenerateInstance { .. }));
    }

    #[test]
    fn corpus_excludes_degenerate_rows() {
        let h = SenseHierarchy::canonical();
        let rows = vec![
            RawRelation {
                id: "ok".into(),
                arg1: "a".into(),
                arg2: "b".into(),
                genre: "literary".into(),
                raw: raw(&[("Result", 1.0)]),
            },
            RawRelation {
                id: "gone".into(),
                arg1: "a".into(),
                arg2: "b".into(),
                genre: "literary".into(),
                raw: raw(&[("Arg1-as-NegCond", 1.0)]),
            },
        ];
        let corpus = adapt_corpus(&h, &rows, "discogem").unwrap();
        assert_eq!(corpus.instances.len(), 1);
        assert_eq!(corpus.excluded, vec!["gone"]);
    }
}
