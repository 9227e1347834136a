//! Distribution and label metrics.

use std::collections::HashMap;
use std::fmt;

use serde::{Serialize, Serializer};

use crate::corpus::{RelationInstance, SingleLabelInstance};
use crate::distribution::LabelDistribution;
use crate::error::{Error, Result};
use crate::hierarchy::{Level, SenseHierarchy};
use crate::prediction::Prediction;

/// Logarithm base of the Jensen-Shannon divergence. Recorded in metrics files.
pub const JS_LOG_BASE: u32 = 2;

fn xlog(a: f64, m: f64) -> f64 {
    if a > 0.0 {
        a * (a / m).log2()
    } else {
        0.0
    }
}

/// Jensen-Shannon distance on raw vectors; callers guarantee equal length
/// and valid distributions.
pub fn js_distance_values(p: &[f64], q: &[f64]) -> f64 {
    let mut div = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        div += 0.5 * xlog(a, m) + 0.5 * xlog(b, m);
    }
    div.clamp(0.0, 1.0).sqrt()
}

/// Square root of the base-2 Jensen-Shannon divergence, in `[0, 1]`.
pub fn js_distance(p: &LabelDistribution, q: &LabelDistribution) -> Result<f64> {
    if p.level != q.level || p.len() != q.len() {
        return Err(Error::LabelSpace(format!(
            "cannot compare a {} distribution of {} senses with a {} one of {}",
            p.level,
            p.len(),
            q.level,
            q.len()
        )));
    }
    crate::distribution::validate(&p.values)?;
    crate::distribution::validate(&q.values)?;
    Ok(js_distance_values(&p.values, &q.values))
}

/// Mean JS distance per level between predictions and targets, matched by id.
pub fn mean_js(predictions: &[Prediction], targets: &[RelationInstance]) -> Result<[f64; 3]> {
    if predictions.len() != targets.len() {
        return Err(Error::Input(format!(
            "{} predictions for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if targets.is_empty() {
        return Err(Error::Input("no instances to evaluate".into()));
    }
    let by_id: HashMap<&str, &Prediction> = predictions.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut sums = [0.0; 3];
    for t in targets {
        let p = by_id
            .get(t.id.as_str())
            .ok_or_else(|| Error::Input(format!("no prediction for instance {}", t.id)))?;
        for (slot, sum) in sums.iter_mut().enumerate() {
            *sum += js_distance(&p.distributions[slot], &t.targets[slot])?;
        }
    }
    Ok(sums.map(|s| s / targets.len() as f64))
}

/// Gold rows by predicted columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn size(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn gold_support(&self, class: usize) -> usize {
        self.counts[class].iter().sum()
    }

    pub fn predicted(&self, class: usize) -> usize {
        self.counts.iter().map(|row| row[class]).sum()
    }

    /// F1 as a fraction; 0 when precision and recall are both undefined or zero.
    pub fn f1(&self, class: usize) -> f64 {
        let tp = self.counts[class][class];
        let denom = self.gold_support(class) + self.predicted(class);
        if tp == 0 || denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    }

    /// CSV with a header row of sense names; the first column names the gold sense.
    pub fn to_csv(&self, names: &[&str]) -> String {
        let mut out = String::from("gold\\predicted");
        for n in names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (name, row) in names.iter().zip(&self.counts) {
            out.push_str(name);
            for c in row {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
        out
    }
}

fn check_labels(pred: &[usize], gold: &[usize], space: usize) -> Result<()> {
    if pred.len() != gold.len() {
        return Err(Error::Shape(format!("{} predictions vs {} gold labels", pred.len(), gold.len())));
    }
    if let Some(bad) = pred.iter().chain(gold).find(|&&l| l >= space) {
        return Err(Error::LabelSpace(format!("label {bad} outside a space of {space}")));
    }
    Ok(())
}

pub fn confusion_matrix(pred: &[usize], gold: &[usize], space: usize) -> Result<ConfusionMatrix> {
    check_labels(pred, gold, space)?;
    let mut counts = vec![vec![0; space]; space];
    for (&p, &g) in pred.iter().zip(gold) {
        counts[g][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// Support-weighted mean of per-class F1, as a percentage.
pub fn weighted_f1(pred: &[usize], gold: &[usize], space: usize) -> Result<f64> {
    let cm = confusion_matrix(pred, gold, space)?;
    if gold.is_empty() {
        return Ok(0.0);
    }
    let weighted: f64 = (0..space).map(|c| cm.gold_support(c) as f64 * cm.f1(c)).sum();
    Ok(100.0 * weighted / gold.len() as f64)
}

/// A per-sense cell in a report table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SenseScore {
    Value(f64),
    /// The sense does not occur in the gold labels (rendered `-`).
    NotPresent,
    /// The sense was never predicted (rendered `n/a`).
    NeverPredicted,
}

impl SenseScore {
    pub fn value(self) -> Option<f64> {
        match self {
            SenseScore::Value(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for SenseScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SenseScore::Value(v) => write!(f, "{v:.2}"),
            SenseScore::NotPresent => f.write_str("-"),
            SenseScore::NeverPredicted => f.write_str("n/a"),
        }
    }
}

impl Serialize for SenseScore {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SenseScore::Value(v) => s.serialize_f64(*v),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

/// F1 percentage per sense. Senses absent from both gold and predicted
/// labels are [`SenseScore::NotPresent`].
pub fn per_sense_f1(pred: &[usize], gold: &[usize], space: usize) -> Result<Vec<SenseScore>> {
    let cm = confusion_matrix(pred, gold, space)?;
    Ok((0..space)
        .map(|c| {
            if cm.gold_support(c) == 0 && cm.predicted(c) == 0 {
                SenseScore::NotPresent
            } else {
                SenseScore::Value(100.0 * cm.f1(c))
            }
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct SenseEntry {
    pub sense: String,
    pub f1: SenseScore,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelReport {
    pub level: Level,
    /// Absent when gold labels are single senses rather than distributions.
    pub js_mean: Option<f64>,
    pub f1_weighted: f64,
    pub per_sense: Vec<SenseEntry>,
    #[serde(skip)]
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub count: usize,
    pub levels: Vec<LevelReport>,
}

impl EvaluationReport {
    pub fn level(&self, level: Level) -> Option<&LevelReport> {
        self.levels.iter().find(|l| l.level == level)
    }
}

fn level_report(
    hierarchy: &SenseHierarchy,
    level: Level,
    pred: &[usize],
    gold: &[usize],
    js_mean: Option<f64>,
) -> Result<LevelReport> {
    let space = hierarchy.size(level);
    let per_sense = per_sense_f1(pred, gold, space)?
        .into_iter()
        .zip(hierarchy.senses(level))
        .map(|(f1, s)| SenseEntry {
            sense: s.name.clone(),
            f1,
        })
        .collect();
    Ok(LevelReport {
        level,
        js_mean,
        f1_weighted: weighted_f1(pred, gold, space)?,
        per_sense,
        confusion: confusion_matrix(pred, gold, space)?,
    })
}

fn align<'a, T>(predictions: &'a [Prediction], gold: &[T], id: impl Fn(&T) -> &str) -> Result<Vec<&'a Prediction>> {
    let by_id: HashMap<&str, &Prediction> = predictions.iter().map(|p| (p.id.as_str(), p)).collect();
    if by_id.len() != gold.len() {
        return Err(Error::Input(format!(
            "{} predictions for {} gold instances",
            by_id.len(),
            gold.len()
        )));
    }
    gold.iter()
        .map(|g| {
            by_id
                .get(id(g))
                .copied()
                .ok_or_else(|| Error::Input(format!("no prediction for instance {}", id(g))))
        })
        .collect()
}

/// JS and F1 at all three levels against distribution targets; gold labels
/// are the target majorities.
pub fn evaluate_distributions(
    hierarchy: &SenseHierarchy,
    predictions: &[Prediction],
    targets: &[RelationInstance],
) -> Result<EvaluationReport> {
    let aligned = align(predictions, targets, |t| &t.id)?;
    let js = mean_js(predictions, targets)?;
    let levels = Level::ALL
        .iter()
        .map(|&level| {
            let pred: Vec<usize> = aligned.iter().map(|p| p.label(level)).collect();
            let gold: Vec<usize> = targets.iter().map(|t| t.majority[level.slot()]).collect();
            level_report(hierarchy, level, &pred, &gold, Some(js[level.slot()]))
        })
        .collect::<Result<_>>()?;
    Ok(EvaluationReport {
        count: targets.len(),
        levels,
    })
}

/// F1 at levels 1 and 2 against single gold labels.
pub fn evaluate_single_label(
    hierarchy: &SenseHierarchy,
    predictions: &[Prediction],
    gold: &[SingleLabelInstance],
) -> Result<EvaluationReport> {
    let aligned = align(predictions, gold, |g| &g.id)?;
    let levels = [Level::One, Level::Two]
        .iter()
        .map(|&level| {
            let pred: Vec<usize> = aligned.iter().map(|p| p.label(level)).collect();
            let gold: Vec<usize> = gold
                .iter()
                .map(|g| if level == Level::One { g.level1 } else { g.level2 })
                .collect();
            level_report(hierarchy, level, &pred, &gold, None)
        })
        .collect::<Result<_>>()?;
    Ok(EvaluationReport {
        count: gold.len(),
        levels,
    })
}

/// Mean and sample standard deviation over runs. A single run has an
/// undefined deviation, reported as 0 with `std_defined = false`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    pub std_defined: bool,
}

pub fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len();
    if n == 0 {
        return MeanStd {
            mean: f64::NAN,
            std: 0.0,
            n,
            std_defined: false,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return MeanStd {
            mean,
            std: 0.0,
            n,
            std_defined: false,
        };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    MeanStd {
        mean,
        std: var.sqrt(),
        n,
        std_defined: true,
    }
}

impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.prec$} ± {:.prec$}", self.mean, self.std, prec = f.precision().unwrap_or(3))
    }
}

/// Per-sense cell after aggregation over runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AggregateScore {
    Value(MeanStd),
    Marker(SenseScore),
}

impl Serialize for AggregateScore {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            AggregateScore::Value(v) => v.serialize(s),
            AggregateScore::Marker(m) => m.serialize(s),
        }
    }
}

/// Name-keyed entries serialized as a JSON object in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedMap<T>(pub Vec<(String, T)>);

impl<T: Serialize> Serialize for OrderedMap<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<T> OrderedMap<T> {
    pub fn get(&self, key: &str) -> Option<&T> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AggregateLevel {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub js_mean: Option<MeanStd>,
    pub f1_weighted: MeanStd,
    pub per_sense: OrderedMap<AggregateScore>,
}

/// Metrics over several runs or folds: the `metrics.json` payload.
#[derive(Debug, Clone, Serialize)]
pub struct AggregateReport {
    pub seeds: usize,
    pub aggregation: &'static str,
    pub std: &'static str,
    pub std_defined: bool,
    pub js_log_base: u32,
    pub instances: usize,
    pub levels: OrderedMap<AggregateLevel>,
}

impl AggregateReport {
    pub fn level(&self, level: Level) -> Option<&AggregateLevel> {
        self.levels.get(&level.to_string())
    }
}

/// Combines reports over the same levels into mean ± sample std. Per-sense
/// cells average the runs with a value; a sense with no value in any run
/// keeps the first run's marker.
pub fn aggregate_reports(reports: &[EvaluationReport]) -> Result<AggregateReport> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Input("no reports to aggregate".into()))?;
    let mut levels = Vec::new();
    for lr in &first.levels {
        let runs: Vec<&LevelReport> = reports
            .iter()
            .map(|r| {
                r.level(lr.level)
                    .ok_or_else(|| Error::Input(format!("report without {}", lr.level)))
            })
            .collect::<Result<_>>()?;
        let js: Option<Vec<f64>> = runs.iter().map(|r| r.js_mean).collect();
        let f1: Vec<f64> = runs.iter().map(|r| r.f1_weighted).collect();
        let per_sense = lr
            .per_sense
            .iter()
            .enumerate()
            .map(|(i, entry)| {
                let values: Vec<f64> = runs.iter().filter_map(|r| r.per_sense[i].f1.value()).collect();
                let cell = if values.is_empty() {
                    AggregateScore::Marker(entry.f1)
                } else {
                    AggregateScore::Value(mean_std(&values))
                };
                (entry.sense.clone(), cell)
            })
            .collect();
        levels.push((
            lr.level.to_string(),
            AggregateLevel {
                js_mean: js.map(|v| mean_std(&v)),
                f1_weighted: mean_std(&f1),
                per_sense: OrderedMap(per_sense),
            },
        ));
    }
    Ok(AggregateReport {
        seeds: reports.len(),
        aggregation: "mean±std",
        std: "sample",
        std_defined: reports.len() > 1,
        js_log_base: JS_LOG_BASE,
        instances: first.count,
        levels: OrderedMap(levels),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(v: &[f64]) -> LabelDistribution {
        LabelDistribution::new(Level::One, v.to_vec()).unwrap()
    }

    #[test]
    fn js_examples() {
        assert_eq!(js_distance(&d(&[0.3, 0.7]), &d(&[0.3, 0.7])).unwrap(), 0.0);
        assert!((js_distance(&d(&[1.0, 0.0]), &d(&[0.0, 1.0])).unwrap() - 1.0).abs() < 1e-12);
        let v = js_distance(&d(&[1.0, 0.0]), &d(&[0.5, 0.5])).unwrap();
        assert_eq!(format!("{v:.4}"), "0.5579");
    }

    #[test]
    fn js_level_mismatch() {
        let q = LabelDistribution::new(Level::Two, vec![0.5, 0.5]).unwrap();
        assert!(matches!(js_distance(&d(&[0.5, 0.5]), &q), Err(Error::LabelSpace(_))));
    }

    #[test]
    fn f1_examples() {
        assert_eq!(weighted_f1(&[0, 1, 2], &[0, 1, 2], 3).unwrap(), 100.0);
        let v = weighted_f1(&[0, 0, 0], &[0, 0, 1], 2).unwrap();
        assert_eq!(format!("{v:.2}"), "53.33");
        assert_eq!(weighted_f1(&[1, 0], &[0, 1], 2).unwrap(), 0.0);
        assert!(matches!(weighted_f1(&[3], &[0], 2), Err(Error::LabelSpace(_))));
    }

    #[test]
    fn per_sense_markers() {
        let scores = per_sense_f1(&[1, 0], &[0, 1], 3).unwrap();
        assert_eq!(scores, vec![SenseScore::Value(0.0), SenseScore::Value(0.0), SenseScore::NotPresent]);
        let all_a = per_sense_f1(&[0, 0], &[0, 0], 2).unwrap();
        assert_eq!(all_a[0], SenseScore::Value(100.0));
        assert_eq!(serde_json::to_string(&all_a).unwrap(), "[100.0,\"-\"]");
    }

    #[test]
    fn mean_std_examples() {
        let m = mean_std(&[50.0, 52.0, 54.0]);
        assert_eq!((m.mean, m.std, m.std_defined), (52.0, 2.0, true));
        assert_eq!(mean_std(&[0.3; 3]).std, 0.0);
        let single = mean_std(&[61.5]);
        assert_eq!((single.mean, single.std, single.std_defined), (61.5, 0.0, false));
    }

    #[test]
    fn confusion_examples() {
        let cm = confusion_matrix(&[0, 1, 1], &[0, 0, 1], 2).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 1], vec![0, 1]]);
        assert_eq!(confusion_matrix(&[], &[], 2).unwrap().counts, vec![vec![0, 0], vec![0, 0]]);
        assert_eq!(cm.to_csv(&["A", "B"]), "gold\\predicted,A,B\nA,1,1\nB,0,1\n");
    }

    fn dist(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, n).prop_filter_map("zero mass", |v| {
            let s: f64 = v.iter().sum();
            (s > 1e-6).then(|| v.into_iter().map(|x| x / s).collect())
        })
    }

    proptest! {
        #[test]
        fn js_symmetric_bounded(p in dist(6), q in dist(6)) {
            let a = js_distance_values(&p, &q);
            prop_assert!((a - js_distance_values(&q, &p)).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn weighted_is_support_mean(pairs in prop::collection::vec((0usize..5, 0usize..5), 1..30)) {
            let (pred, gold): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let w = weighted_f1(&pred, &gold, 5).unwrap();
            let per = per_sense_f1(&pred, &gold, 5).unwrap();
            let mut acc = 0.0;
            for (c, s) in per.iter().enumerate() {
                let support = gold.iter().filter(|&&g| g == c).count() as f64;
                if support > 0.0 {
                    acc += support * s.value().unwrap();
                }
            }
            prop_assert!((w - acc / gold.len() as f64).abs() < 1e-9);
            let cm = confusion_matrix(&pred, &gold, 5).unwrap();
            prop_assert_eq!(cm.total(), gold.len());
        }
    }
}
