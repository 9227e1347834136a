use std::fmt::Write as _;
use std::time::Instant;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::adam::Adam;
use super::schedule::LrSchedule;
use crate::config::{ExperimentConfig, Setting};
use crate::corpus::RelationInstance;
use crate::error::{Error, Result};
use crate::hierarchy::{Level, SenseHierarchy};
use crate::losses::{head_loss_and_grad, total_loss};
use crate::metrics::{evaluate_distributions, mean_std, EvaluationReport};
use crate::model::{ModelConfig, MultiTaskModel, Parameters};
use crate::prediction::Prediction;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean total loss over the epoch's batches.
    pub train_loss: f64,
    pub head_losses: [f64; 3],
    pub validation_js: Option<[f64; 3]>,
    pub validation_f1: Option<[f64; 3]>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingLog {
    pub seed: u64,
    pub steps_per_epoch: usize,
    pub epochs: Vec<EpochRecord>,
    /// Learning rate used at every optimizer step.
    pub lr_trace: Vec<f64>,
    pub wall_clock_secs: f64,
}

impl TrainingLog {
    pub fn to_text(&self) -> String {
        let mut out = format!("seed {}  steps/epoch {}\n", self.seed, self.steps_per_epoch);
        let fmt3 = |v: &Option<[f64; 3]>, p: usize| match v {
            Some(v) => format!("{:.p$} {:.p$} {:.p$}", v[0], v[1], v[2]),
            None => "-".into(),
        };
        for e in &self.epochs {
            let _ = writeln!(
                out,
                "epoch {:>3}  loss {:.6}  heads {:.4} {:.4} {:.4}  val_js {}  val_f1 {}  lr {:.3e}  {:.2}s",
                e.epoch,
                e.train_loss,
                e.head_losses[0],
                e.head_losses[1],
                e.head_losses[2],
                fmt3(&e.validation_js, 4),
                fmt3(&e.validation_f1, 2),
                self.lr_trace[(e.epoch - 1) * self.steps_per_epoch],
                e.seconds
            );
        }
        let _ = writeln!(out, "wall clock {:.2}s", self.wall_clock_secs);
        out
    }
}

/// Per-level target rows: the annotation distributions, or one-hot majority
/// labels in the single-label setting.
pub fn training_targets(setting: Setting, instance: &RelationInstance) -> [Vec<f64>; 3] {
    [0, 1, 2].map(|slot| match setting {
        Setting::MultiLabel => instance.targets[slot].values.clone(),
        Setting::SingleLabel => {
            let mut v = vec![0.0; instance.targets[slot].len()];
            v[instance.majority[slot]] = 1.0;
            v
        }
    })
}

pub fn encode_all(model: &MultiTaskModel, instances: &[RelationInstance]) -> Result<Vec<Vec<f64>>> {
    instances.iter().map(|i| model.encode(&i.arg1, &i.arg2)).collect()
}

pub fn predict_instances(model: &MultiTaskModel, instances: &[RelationInstance]) -> Result<Vec<Prediction>> {
    let ids: Vec<String> = instances.iter().map(|i| i.id.clone()).collect();
    model.predict_embeddings(&ids, &encode_all(model, instances)?)
}

fn clip(grads: &mut Parameters, max_norm: f64) {
    let norm = grads.l2_norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Trains a fresh model for `epochs` epochs and returns the final-epoch
/// parameters. The encoder is frozen, so embeddings are computed once.
pub fn train(
    config: &ExperimentConfig,
    hierarchy: &SenseHierarchy,
    train: &[RelationInstance],
    validation: &[RelationInstance],
    seed: u64,
) -> Result<(MultiTaskModel, TrainingLog)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Training("empty training split".into()));
    }
    let started = Instant::now();
    let model_config = ModelConfig {
        seed,
        ..config.model.clone()
    };
    let mut model = MultiTaskModel::new(model_config, hierarchy)?;
    let embeddings = encode_all(&model, train)?;
    let targets: Vec<[Vec<f64>; 3]> = train.iter().map(|i| training_targets(config.setting, i)).collect();
    let val_embeddings = encode_all(&model, validation)?;
    let val_ids: Vec<String> = validation.iter().map(|i| i.id.clone()).collect();

    let schedule = LrSchedule::new(config.schedule, config.base_lr, config.epochs).with_restarts(config.cosine_restarts);
    let steps_per_epoch = train.len().div_ceil(config.batch_size);
    let mut shuffle_rng = rng_stream(seed, 1);
    let mut dropout_rng = rng_stream(seed, 2);
    let mut adam = Adam::new(model.parameters());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = TrainingLog {
        seed,
        steps_per_epoch,
        epochs: Vec::with_capacity(config.epochs),
        lr_trace: Vec::with_capacity(steps_per_epoch * config.epochs),
        wall_clock_secs: 0.0,
    };

    for epoch in 0..config.epochs {
        let epoch_start = Instant::now();
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut head_sums = [0.0; 3];
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let step = epoch * steps_per_epoch + b;
            let lr = schedule.lr_at_step(step, steps_per_epoch);
            log.lr_trace.push(lr);

            let x: Vec<Vec<f64>> = batch.iter().map(|&i| embeddings[i].clone()).collect();
            let (outputs, cache) = model.forward_train(&x, &mut dropout_rng)?;
            let mut head_losses = [0.0; 3];
            let mut score_grads: [Vec<Vec<f64>>; 3] = Default::default();
            for slot in 0..3 {
                let y: Vec<Vec<f64>> = batch.iter().map(|&i| targets[i][slot].clone()).collect();
                let (loss, grad) = head_loss_and_grad(config.loss, &outputs.scores[slot], &y)?;
                head_losses[slot] = loss;
                score_grads[slot] = grad;
            }
            let total = total_loss(head_losses).map_err(|_| {
                let ids: Vec<&str> = batch.iter().map(|&i| train[i].id.as_str()).collect();
                Error::Training(format!(
                    "non-finite loss {head_losses:?} at epoch {} batch {b} (instances {})",
                    epoch + 1,
                    ids.join(", ")
                ))
            })?;
            let mut grads = model.backward(&cache, &score_grads);
            if let Some(max_norm) = config.grad_clip {
                clip(&mut grads, max_norm);
            }
            adam.step(model.parameters_mut(), &grads, lr);
            loss_sum += total;
            for (s, l) in head_sums.iter_mut().zip(head_losses) {
                *s += l;
            }
        }

        let (validation_js, validation_f1) = if validation.is_empty() {
            (None, None)
        } else {
            let preds = model.predict_embeddings(&val_ids, &val_embeddings)?;
            let report = evaluate_distributions(hierarchy, &preds, validation)?;
            let js = Level::ALL.map(|l| report.level(l).and_then(|r| r.js_mean).unwrap_or(f64::NAN));
            let f1 = Level::ALL.map(|l| report.level(l).map(|r| r.f1_weighted).unwrap_or(f64::NAN));
            (Some(js), Some(f1))
        };
        let record = EpochRecord {
            epoch: epoch + 1,
            train_loss: loss_sum / steps_per_epoch as f64,
            head_losses: head_sums.map(|s| s / steps_per_epoch as f64),
            validation_js,
            validation_f1,
            seconds: epoch_start.elapsed().as_secs_f64(),
        };
        debug!("seed {seed} epoch {} loss {:.6}", record.epoch, record.train_loss);
        log.epochs.push(record);
    }
    log.wall_clock_secs = started.elapsed().as_secs_f64();
    info!(
        "seed {seed}: {} epochs, final loss {:.6}, {:.1}s",
        config.epochs,
        log.epochs.last().map(|e| e.train_loss).unwrap_or(f64::NAN),
        log.wall_clock_secs
    );
    Ok((model, log))
}

/// Outcome of one seed: final model, log, test predictions and their report.
pub struct SeedRun {
    pub seed: u64,
    pub model: MultiTaskModel,
    pub log: TrainingLog,
    pub predictions: Vec<Prediction>,
    pub report: EvaluationReport,
}

/// Trains once per configured seed and evaluates each final model on `test`.
/// `on_run` sees every finished run (to persist it) before the next starts.
/// The first failure aborts and names its seed.
pub fn run_seeds(
    config: &ExperimentConfig,
    hierarchy: &SenseHierarchy,
    train_split: &[RelationInstance],
    validation: &[RelationInstance],
    test: &[RelationInstance],
    mut on_run: impl FnMut(&SeedRun) -> Result<()>,
) -> Result<Vec<EvaluationReport>> {
    if config.seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let mut reports = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let wrap = |e: Error| Error::SeedFailed {
            seed,
            source: Box::new(e),
        };
        let (model, log) = train(config, hierarchy, train_split, validation, seed).map_err(wrap)?;
        let predictions = predict_instances(&model, test).map_err(wrap)?;
        let report = evaluate_distributions(hierarchy, &predictions, test).map_err(wrap)?;
        let run = SeedRun {
            seed,
            model,
            log,
            predictions,
            report,
        };
        on_run(&run).map_err(wrap)?;
        reports.push(run.report);
    }
    if reports.len() == 1 {
        info!("single seed: standard deviations are undefined and reported as 0");
    } else {
        let f1: Vec<f64> = reports.iter().filter_map(|r| r.level(Level::Two)).map(|r| r.f1_weighted).collect();
        info!("level-2 test F1 over {} seeds: {:.2}", reports.len(), mean_std(&f1));
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::LossKind;
    use crate::synthetic::separable_corpus;

    fn config(loss: LossKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::new("t", loss, 0.01);
        c.model.encoder.model_id = "tiny-hash-16".into();
        c.epochs = 1;
        c.seeds = vec![1];
        c
    }

    #[test]
    fn two_instance_smoke() {
        let h = SenseHierarchy::canonical();
        let data = separable_corpus(&h, 2, 0).unwrap();
        let (_, log) = train(&config(LossKind::Mae), &h, &data, &[], 5).unwrap();
        assert_eq!(log.epochs.len(), 1);
        assert!(log.epochs[0].train_loss.is_finite());
    }

    #[test]
    fn empty_train_split() {
        let h = SenseHierarchy::canonical();
        assert!(matches!(train(&config(LossKind::Ce), &h, &[], &[], 1), Err(Error::Training(_))));
    }

    #[test]
    fn deterministic_given_seed() {
        let h = SenseHierarchy::canonical();
        let data = separable_corpus(&h, 20, 0).unwrap();
        let mut c = config(LossKind::Ce);
        c.epochs = 2;
        c.batch_size = 4;
        let (a, la) = train(&c, &h, &data, &data[..4], 9).unwrap();
        let (b, lb) = train(&c, &h, &data, &data[..4], 9).unwrap();
        assert_eq!(a.parameters(), b.parameters());
        assert_eq!(la.lr_trace, lb.lr_trace);
        assert_eq!(la.lr_trace.len(), 10);
        let (d, _) = train(&c, &h, &data, &[], 10).unwrap();
        assert_ne!(a.parameters(), d.parameters());
    }

    #[test]
    fn failing_seed_is_named() {
        let h = SenseHierarchy::canonical();
        let mut c = config(LossKind::Ce);
        c.seeds = vec![4];
        let err = run_seeds(&c, &h, &[], &[], &[], |_| Ok(())).unwrap_err();
        assert!(matches!(err, Error::SeedFailed { seed: 4, .. }));
    }
}
