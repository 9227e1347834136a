use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{Level, SenseHierarchy};

/// Tolerance on the total mass of a distribution.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Two probabilities closer than this are treated as tied when picking the
/// highest-scoring sense.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Probability vector over the senses of one level, in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution {
    pub level: Level,
    pub values: Vec<f64>,
}

impl LabelDistribution {
    pub fn new(level: Level, values: Vec<f64>) -> Result<Self> {
        validate(&values)?;
        Ok(LabelDistribution { level, values })
    }

    pub fn one_hot(level: Level, size: usize, index: usize) -> Self {
        let mut values = vec![0.0; size];
        values[index] = 1.0;
        LabelDistribution { level, values }
    }

    pub fn uniform(level: Level, size: usize) -> Self {
        LabelDistribution {
            level,
            values: vec![1.0 / size as f64; size],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Checks the vector length against the level's label space.
    pub fn check_against(&self, hierarchy: &SenseHierarchy) -> Result<()> {
        let expected = hierarchy.size(self.level);
        if self.values.len() != expected {
            return Err(Error::Shape(format!(
                "{} distribution has {} entries, label space has {expected}",
                self.level,
                self.values.len()
            )));
        }
        Ok(())
    }

    /// Index of the most probable sense, lowest index on ties.
    pub fn majority(&self) -> usize {
        argmax(&self.values)
    }
}

pub fn validate(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidDistribution("empty vector".into()));
    }
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() || !(0.0..=1.0 + SUM_TOLERANCE).contains(&v) {
            return Err(Error::InvalidDistribution(format!("entry {i} is {v}")));
        }
    }
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
    }
    Ok(())
}

/// Position of the maximum; earlier positions win ties within [`TIE_TOLERANCE`].
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] + TIE_TOLERANCE {
            best = i;
        }
    }
    best
}

/// Indices ordered by decreasing value, earlier positions first among ties.
pub fn ranking(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let (va, vb) = (values[a], values[b]);
        if (va - vb).abs() <= TIE_TOLERANCE {
            a.cmp(&b)
        } else {
            vb.partial_cmp(&va).expect("finite values")
        }
    });
    order
}

/// Exponentiate-and-normalize with the maximum subtracted first.
pub fn softmax(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric(format!("non-finite score in {scores:?}")));
    }
    Ok(softmax_unchecked(scores))
}

pub(crate) fn softmax_unchecked(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}
