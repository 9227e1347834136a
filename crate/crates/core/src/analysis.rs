//! Corpus- and prediction-level analyses: random baseline, top-k agreement
//! with single reference labels, and cross-level coherence.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::RelationInstance;
use crate::distribution::{ranking, validate, LabelDistribution};
use crate::error::{Error, Result};
use crate::hierarchy::{Level, SenseHierarchy};
use crate::metrics::{OrderedMap, SenseScore};
use crate::prediction::Prediction;

pub const DEFAULT_DRAWS: usize = 10;
pub const AGREEMENT_KS: [usize; 4] = [1, 3, 5, 10];

/// Mean target distribution per level.
pub fn marginals(instances: &[RelationInstance]) -> Result<[LabelDistribution; 3]> {
    let first = instances
        .first()
        .ok_or_else(|| Error::Input("cannot compute marginals of an empty split".into()))?;
    let mut out = first.targets.clone();
    for (slot, acc) in out.iter_mut().enumerate() {
        acc.values.iter_mut().for_each(|v| *v = 0.0);
        for inst in instances {
            for (a, v) in acc.values.iter_mut().zip(&inst.targets[slot].values) {
                *a += v;
            }
        }
        acc.values.iter_mut().for_each(|v| *v /= instances.len() as f64);
    }
    Ok(out)
}

/// Empirical frequencies of `n_draws` labels sampled from `marginal`.
pub fn sample_frequencies(marginal: &LabelDistribution, n_draws: usize, rng: &mut ChaCha8Rng) -> Result<LabelDistribution> {
    let sampler = WeightedIndex::new(&marginal.values)
        .map_err(|e| Error::InvalidDistribution(format!("{} marginal: {e}", marginal.level)))?;
    let mut counts = vec![0usize; marginal.len()];
    for _ in 0..n_draws {
        counts[sampler.sample(rng)] += 1;
    }
    Ok(LabelDistribution {
        level: marginal.level,
        values: counts.iter().map(|&c| c as f64 / n_draws as f64).collect(),
    })
}

/// For every id, draws `n_draws` labels per level from the marginals and
/// predicts their frequency vector. Same seed, same output.
pub fn random_baseline(
    marginals: &[LabelDistribution; 3],
    ids: &[String],
    n_draws: usize,
    seed: u64,
) -> Result<Vec<Prediction>> {
    if n_draws == 0 {
        return Err(Error::Config("n_draws must be at least 1".into()));
    }
    for m in marginals {
        validate(&m.values)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.iter()
        .map(|id| {
            let d = [
                sample_frequencies(&marginals[0], n_draws, &mut rng)?,
                sample_frequencies(&marginals[1], n_draws, &mut rng)?,
                sample_frequencies(&marginals[2], n_draws, &mut rng)?,
            ];
            Ok(Prediction::from_distributions(id.clone(), d))
        })
        .collect()
}

/// Whether `reference` is among the `k` most probable senses of `dist`.
/// Ranks break ties by lowest index; a sense with no mass is never counted
/// as selected.
pub fn topk_agreement(reference: usize, dist: &LabelDistribution, k: usize) -> Result<bool> {
    if reference >= dist.len() {
        return Err(Error::LabelSpace(format!(
            "reference {reference} outside a {} space of {}",
            dist.level,
            dist.len()
        )));
    }
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if dist.values[reference] <= 0.0 {
        return Ok(false);
    }
    Ok(ranking(&dist.values).iter().take(k).any(|&i| i == reference))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementRow {
    pub k: usize,
    pub count: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub level: Level,
    pub total: usize,
    pub rows: Vec<AgreementRow>,
    /// References never selected at the largest k.
    pub not_selected: usize,
}

/// Agreement counts over `(reference, distribution)` pairs for each `k`.
pub fn agreement_report(level: Level, pairs: &[(usize, &LabelDistribution)], ks: &[usize]) -> Result<AgreementReport> {
    let total = pairs.len();
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let mut count = 0;
        for (reference, dist) in pairs {
            if dist.level != level {
                return Err(Error::LabelSpace(format!("{} distribution in a {level} report", dist.level)));
            }
            count += topk_agreement(*reference, dist, k)? as usize;
        }
        rows.push(AgreementRow {
            k,
            count,
            percent: if total == 0 { 0.0 } else { 100.0 * count as f64 / total as f64 },
        });
    }
    let not_selected = total - rows.iter().map(|r| r.count).max().unwrap_or(0);
    Ok(AgreementReport {
        level,
        total,
        rows,
        not_selected,
    })
}

impl AgreementReport {
    pub fn to_text(&self) -> String {
        let mut out = format!("top-k agreement at {} ({} relations)\n", self.level, self.total);
        for r in &self.rows {
            out.push_str(&format!("top-{:<3} {:>6} ({:.1}%)\n", r.k, r.count, r.percent));
        }
        out.push_str(&format!("not selected {:>3}\n", self.not_selected));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoherenceReport {
    /// Per level-1 sense: share of its predictions paired with a level-2 child.
    pub level1: OrderedMap<SenseScore>,
    /// Per level-2 sense: share of its predictions paired with its parent.
    pub level2: OrderedMap<SenseScore>,
}

/// Cross-level coherence of aligned level-1 and level-2 predictions, as
/// percentages. A sense never predicted is `n/a`, or `-` when gold labels
/// are supplied and the sense does not occur in them.
pub fn coherence_report(
    hierarchy: &SenseHierarchy,
    pred1: &[usize],
    pred2: &[usize],
    gold: Option<(&[usize], &[usize])>,
) -> Result<CoherenceReport> {
    if pred1.len() != pred2.len() {
        return Err(Error::Shape(format!(
            "{} level-1 predictions vs {} level-2 predictions",
            pred1.len(),
            pred2.len()
        )));
    }
    let [n1, n2, _] = hierarchy.sizes();
    if pred1.iter().any(|&p| p >= n1) || pred2.iter().any(|&p| p >= n2) {
        return Err(Error::LabelSpace("prediction outside the label space".into()));
    }
    let cell = |predicted: usize, coherent: usize, in_gold: Option<bool>| match (predicted, in_gold) {
        (0, Some(false)) => SenseScore::NotPresent,
        (0, _) => SenseScore::NeverPredicted,
        (n, _) => SenseScore::Value(100.0 * coherent as f64 / n as f64),
    };
    let level1 = hierarchy
        .senses(Level::One)
        .iter()
        .map(|s| {
            let idx: Vec<usize> = (0..pred1.len()).filter(|&i| pred1[i] == s.index).collect();
            let coherent = idx.iter().filter(|&&i| hierarchy.coherent(s.index, pred2[i])).count();
            let in_gold = gold.map(|(g1, _)| g1.contains(&s.index));
            (s.name.clone(), cell(idx.len(), coherent, in_gold))
        })
        .collect();
    let level2 = hierarchy
        .senses(Level::Two)
        .iter()
        .map(|s| {
            let idx: Vec<usize> = (0..pred2.len()).filter(|&i| pred2[i] == s.index).collect();
            let coherent = idx.iter().filter(|&&i| hierarchy.coherent(pred1[i], s.index)).count();
            let in_gold = gold.map(|(_, g2)| g2.contains(&s.index));
            (s.name.clone(), cell(idx.len(), coherent, in_gold))
        })
        .collect();
    Ok(CoherenceReport {
        level1: OrderedMap(level1),
        level2: OrderedMap(level2),
    })
}

/// Mean over senses with a value; `None` when no sense was predicted.
pub fn mean_coherence(scores: &OrderedMap<SenseScore>) -> Option<f64> {
    let values: Vec<f64> = scores.0.iter().filter_map(|(_, s)| s.value()).collect();
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// CSV with one row per sense and one column per named report.
pub fn coherence_csv(reports: &[(&str, &CoherenceReport)]) -> String {
    let mut out = String::from("level,sense");
    for (name, _) in reports {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    let Some((_, first)) = reports.first() else {
        return out;
    };
    for (level, pick) in [
        ("level1", (|r: &CoherenceReport| &r.level1) as fn(&CoherenceReport) -> &OrderedMap<SenseScore>),
        ("level2", |r: &CoherenceReport| &r.level2),
    ] {
        for (i, (sense, _)) in pick(first).0.iter().enumerate() {
            out.push_str(&format!("{level},{sense}"));
            for (_, r) in reports {
                out.push_str(&format!(",{}", pick(r).0[i].1));
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_granularity_and_one_hot() {
        let h = SenseHierarchy::canonical();
        let [n1, n2, n3] = h.sizes();
        let ids: Vec<String> = (0..20).map(|i| i.to_string()).collect();
        let one_hot = [
            LabelDistribution::one_hot(Level::One, n1, 2),
            LabelDistribution::one_hot(Level::Two, n2, 5),
            LabelDistribution::one_hot(Level::Three, n3, 7),
        ];
        for p in random_baseline(&one_hot, &ids, 10, 3).unwrap() {
            assert_eq!(p.labels, [2, 5, 7]);
            assert_eq!(p.distributions[0].values[2], 1.0);
        }
        let uniform = [
            LabelDistribution::uniform(Level::One, n1),
            LabelDistribution::uniform(Level::Two, n2),
            LabelDistribution::uniform(Level::Three, n3),
        ];
        let a = random_baseline(&uniform, &ids, 10, 3).unwrap();
        for p in &a {
            for v in p.distributions.iter().flat_map(|d| &d.values) {
                assert!(((v * 10.0).round() - v * 10.0).abs() < 1e-12);
            }
        }
        assert_eq!(a, random_baseline(&uniform, &ids, 10, 3).unwrap());
        assert!(random_baseline(&uniform, &ids, 0, 3).is_err());
    }

    #[test]
    fn topk() {
        let d = LabelDistribution::new(Level::Two, vec![0.5, 0.3, 0.2, 0.0]).unwrap();
        assert!(topk_agreement(0, &d, 1).unwrap());
        assert!(!topk_agreement(2, &d, 2).unwrap());
        assert!(topk_agreement(2, &d, 4).unwrap());
        assert!(!topk_agreement(3, &d, 4).unwrap());
        assert!(topk_agreement(9, &d, 1).is_err());
        let tied = LabelDistribution::new(Level::Two, vec![0.25; 4]).unwrap();
        assert!(topk_agreement(1, &tied, 2).unwrap());
        assert!(!topk_agreement(2, &tied, 2).unwrap());
    }

    #[test]
    fn coherence_example() {
        let h = SenseHierarchy::canonical();
        let t = h.index_of(Level::One, "Temporal").unwrap();
        let asyn = h.index_of(Level::Two, "Asynchronous").unwrap();
        let cause = h.index_of(Level::Two, "Cause").unwrap();
        let r = coherence_report(&h, &[t, t], &[asyn, cause], None).unwrap();
        assert_eq!(r.level1.get("Temporal"), Some(&SenseScore::Value(50.0)));
        assert_eq!(r.level1.get("Expansion"), Some(&SenseScore::NeverPredicted));
        assert_eq!(r.level2.get("Asynchronous"), Some(&SenseScore::Value(100.0)));
        assert_eq!(r.level2.get("Cause"), Some(&SenseScore::Value(0.0)));
        assert!(coherence_report(&h, &[t], &[], None).is_err());
    }
}
