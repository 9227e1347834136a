//! Per-head losses and their multi-task sum.
//!
//! Every loss averages over the `N` rows of a batch. Cross-entropy consumes
//! raw head scores and normalizes them itself; MAE, MSE and Huber compare
//! distributions, so [`head_loss`] applies the softmax before calling them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distribution::{self, softmax_unchecked};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Ce,
    Mae,
    Mse,
    Huber,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [LossKind::Ce, LossKind::Mae, LossKind::Mse, LossKind::Huber];

    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Ce => "ce",
            LossKind::Mae => "mae",
            LossKind::Mse => "mse",
            LossKind::Huber => "huber",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<LossKind> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown loss {s:?}; expected one of ce, mae, mse, huber")))
    }
}

fn check_shapes(pred: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<(usize, usize)> {
    if pred.is_empty() || pred.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} prediction rows vs {} target rows",
            pred.len(),
            targets.len()
        )));
    }
    let c = pred[0].len();
    for (p, t) in pred.iter().zip(targets) {
        if p.len() != c || t.len() != c || c == 0 {
            return Err(Error::Shape(format!(
                "row widths {} / {} do not match {c}",
                p.len(),
                t.len()
            )));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite prediction".into()));
        }
        distribution::validate(t)?;
    }
    Ok((pred.len(), c))
}

/// Mean over the batch of `-Σ_c y_c · ln softmax(s)_c`.
pub fn cross_entropy_loss(scores: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    let (n, _) = check_shapes(scores, targets)?;
    let mut total = 0.0;
    for (s, y) in scores.iter().zip(targets) {
        let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_norm = max + s.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total -= s.iter().zip(y).map(|(si, yi)| (si - log_norm) * yi).sum::<f64>();
    }
    Ok(total / n as f64)
}

fn elementwise(pred: &[Vec<f64>], targets: &[Vec<f64>], f: impl Fn(f64) -> f64) -> Result<f64> {
    let (n, c) = check_shapes(pred, targets)?;
    let sum: f64 = pred
        .iter()
        .zip(targets)
        .flat_map(|(p, t)| p.iter().zip(t).map(|(a, b)| f(a - b)))
        .sum();
    Ok(sum / (n * c) as f64)
}

pub fn mae_loss(pred: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    elementwise(pred, targets, f64::abs)
}

pub fn mse_loss(pred: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    elementwise(pred, targets, |d| d * d)
}

/// Huber with the threshold fixed at 1: `δ²/2` inside, `|δ| - 1/2` outside,
/// averaged over `N·C` elements.
pub fn huber_loss(pred: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    elementwise(pred, targets, |d| {
        if d.abs() < 1.0 {
            d * d / 2.0
        } else {
            (2.0 * d.abs() - 1.0) / 2.0
        }
    })
}

/// Unweighted sum of the three head losses. Terms are added largest first so
/// the result does not depend on head order.
pub fn total_loss(head_losses: [f64; 3]) -> Result<f64> {
    if head_losses.iter().any(|l| !l.is_finite()) {
        return Err(Error::Numeric(format!("non-finite head loss in {head_losses:?}")));
    }
    let mut terms = head_losses;
    terms.sort_by(|a, b| b.total_cmp(a));
    Ok(terms.iter().sum())
}

fn softmax_rows(scores: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    scores.iter().map(|s| distribution::softmax(s)).collect()
}

/// Loss of one head given raw scores.
pub fn head_loss(kind: LossKind, scores: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    match kind {
        LossKind::Ce => cross_entropy_loss(scores, targets),
        LossKind::Mae => mae_loss(&softmax_rows(scores)?, targets),
        LossKind::Mse => mse_loss(&softmax_rows(scores)?, targets),
        LossKind::Huber => huber_loss(&softmax_rows(scores)?, targets),
    }
}

/// Loss of one head and its gradient with respect to the raw scores.
pub fn head_loss_and_grad(
    kind: LossKind,
    scores: &[Vec<f64>],
    targets: &[Vec<f64>],
) -> Result<(f64, Vec<Vec<f64>>)> {
    let loss = head_loss(kind, scores, targets)?;
    let n = scores.len() as f64;
    let c = scores[0].len() as f64;
    let grads = scores
        .iter()
        .zip(targets)
        .map(|(s, y)| {
            let p = softmax_unchecked(s);
            if kind == LossKind::Ce {
                let mass: f64 = y.iter().sum();
                return p.iter().zip(y).map(|(pi, yi)| (pi * mass - yi) / n).collect();
            }
            // dL/dp, then through the softmax Jacobian.
            let dp: Vec<f64> = p
                .iter()
                .zip(y)
                .map(|(pi, yi)| {
                    let d = pi - yi;
                    let g = match kind {
                        LossKind::Mae => sign(d),
                        LossKind::Mse => 2.0 * d,
                        LossKind::Huber if d.abs() < 1.0 => d,
                        LossKind::Huber => sign(d),
                        LossKind::Ce => unreachable!(),
                    };
                    g / (n * c)
                })
                .collect();
            let dot: f64 = dp.iter().zip(&p).map(|(g, pi)| g * pi).sum();
            p.iter().zip(&dp).map(|(pi, g)| pi * (g - dot)).collect()
        })
        .collect();
    Ok((loss, grads))
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
