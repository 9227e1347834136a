use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    None,
    Linear,
    CosineAnnealing,
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScheduleKind::None => "none",
            ScheduleKind::Linear => "linear",
            ScheduleKind::CosineAnnealing => "cosine_annealing",
        })
    }
}

/// Learning rate as a function of fractional epoch `t`.
///
/// * `Linear` falls from `base_lr` to `base_lr / 2` over the first half of
///   training and then stays there.
/// * `CosineAnnealing` is `base_lr · (0.75 + 0.25 cos(2πt / P))` with period
///   `P = epochs / 2`, swinging between `base_lr` and `base_lr / 2`. With
///   `restarts`, each period instead decays along half a cosine and jumps
///   back to `base_lr` at the next period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub kind: ScheduleKind,
    pub base_lr: f64,
    pub epochs: usize,
    pub restarts: bool,
}

impl LrSchedule {
    pub fn new(kind: ScheduleKind, base_lr: f64, epochs: usize) -> LrSchedule {
        LrSchedule {
            kind,
            base_lr,
            epochs,
            restarts: false,
        }
    }

    pub fn with_restarts(mut self, restarts: bool) -> LrSchedule {
        self.restarts = restarts;
        self
    }

    fn half(&self) -> f64 {
        self.epochs as f64 / 2.0
    }

    pub fn lr_at(&self, t: f64) -> f64 {
        let base = self.base_lr;
        match self.kind {
            ScheduleKind::None => base,
            ScheduleKind::Linear => {
                let h = self.half();
                if t >= h {
                    base / 2.0
                } else {
                    base * (1.0 - 0.5 * t / h)
                }
            }
            ScheduleKind::CosineAnnealing if self.restarts => {
                let p = self.half();
                let phase = t.rem_euclid(p) / p;
                base * (0.75 + 0.25 * (PI * phase).cos())
            }
            ScheduleKind::CosineAnnealing => base * (0.75 + 0.25 * (2.0 * PI * t / self.half()).cos()),
        }
    }

    /// Learning rate for optimizer step `step` with `steps_per_epoch` steps
    /// in each epoch.
    pub fn lr_at_step(&self, step: usize, steps_per_epoch: usize) -> f64 {
        self.lr_at(step as f64 / steps_per_epoch as f64)
    }
}
