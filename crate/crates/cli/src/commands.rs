use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use idrr_core::analysis::{
    agreement_report, coherence_csv, coherence_report, marginals, random_baseline, CoherenceReport, AGREEMENT_KS,
};
use idrr_core::corpus::{load_pdtb_splits, read_instances, PdtbScheme, RelationInstance, SingleLabelTestSet, Split};
use idrr_core::metrics::{
    aggregate_reports, evaluate_distributions, evaluate_single_label, mean_std, EvaluationReport, MeanStd, OrderedMap,
};
use idrr_core::model::{load_checkpoint, save_checkpoint, Checkpoint};
use idrr_core::prediction::write_predictions;
use idrr_core::training::{run_seeds, SeedRun};
use idrr_core::{ExperimentConfig, Level, Prediction, SenseHierarchy};
use log::{info, warn};
use serde::Serialize;

use crate::data::{self, ensure_data, load_config, Prepared, CONFIG};
use crate::exit::Failure;
use crate::report::{aggregate_text, coherence_text, confusion_csv};
use crate::rundir::{run_in, Manifest, RunDir};

/// Flags shared by every verb.
pub struct Common {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub force: bool,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| Failure::config("this command needs --config PATH"))?;
        load_config(path)
    }

    /// The config with `--seed` replacing the seed list.
    fn training_config(&self) -> Result<ExperimentConfig> {
        let mut config = self.config()?;
        if let Some(seed) = self.seed {
            config.seeds = vec![seed];
        }
        config.validate()?;
        Ok(config)
    }
}

const LABELS: &str = "labels.tsv";

fn seed_dir(seed: u64) -> String {
    format!("seed-{seed}")
}

/// `--seed` overrides the split seed.
pub fn prepare(common: &Common) -> Result<()> {
    let mut config = common.config()?;
    if let Some(seed) = common.seed {
        config.split_seed = seed;
    }
    config.validate()?;
    config.check_paths()?;
    let h = SenseHierarchy::canonical();
    let mut dir = RunDir::create(&common.out, common.force, Manifest::new("prepare", h.schema_hash()))?;
    dir.manifest.seeds = vec![config.split_seed];
    run_in(dir, |d| data::prepare_into(&config, &h, d))?;
    info!("prepared data in {}", common.out.display());
    Ok(())
}

fn write_report(dir: &RunDir, prefix: &str, h: &SenseHierarchy, report: &EvaluationReport) -> Result<()> {
    dir.write_json(&format!("{prefix}metrics.json"), report)?;
    for lr in &report.levels {
        dir.write(
            &format!("{prefix}confusion_{}.csv", lr.level),
            confusion_csv(h, lr.level, &lr.confusion),
        )?;
    }
    Ok(())
}

fn persist_seed(dir: &RunDir, config: &ExperimentConfig, h: &SenseHierarchy, run: &SeedRun) -> Result<()> {
    let base = seed_dir(run.seed);
    save_checkpoint(&dir.join(&format!("{base}/checkpoint")), &run.model, h, &config.hash())?;
    write_predictions(&dir.path_for(&format!("{base}/predictions.jsonl"))?, h, &run.predictions)?;
    write_report(dir, &format!("{base}/"), h, &run.report)?;
    dir.write_json(&format!("{base}/training_log.json"), &run.log)?;
    dir.write(&format!("{base}/training_log.txt"), run.log.to_text())?;
    Ok(())
}

fn write_aggregate(dir: &RunDir, title: &str, reports: &[EvaluationReport]) -> Result<()> {
    let aggregate = aggregate_reports(reports)?;
    dir.write_json("metrics.json", &aggregate)?;
    dir.write("metrics.txt", aggregate_text(title, &aggregate))
}

fn start(common: &Common, command: &str, config: &ExperimentConfig, h: &SenseHierarchy) -> Result<RunDir> {
    let mut dir = RunDir::create(&common.out, common.force, Manifest::new(command, h.schema_hash()))?;
    dir.manifest.config_hash = Some(config.hash());
    dir.manifest.seeds = config.seeds.clone();
    for p in data::corpus_inputs(config) {
        dir.manifest.add_input(&p)?;
    }
    Ok(dir)
}

/// Trains every seed on the train split and evaluates it on the test split.
pub fn train(common: &Common, prepared: Option<&Path>) -> Result<()> {
    let config = common.training_config()?;
    if prepared.is_none() {
        config.check_paths()?;
    }
    // Fail on an unavailable encoder before any output is written.
    idrr_core::model::load_encoder(&config.model.encoder)?;
    let h = SenseHierarchy::canonical();
    let dir = start(common, "train", &config, &h)?;
    run_in(dir, |d| {
        d.write(CONFIG, config.to_toml())?;
        let data = ensure_data(&config, &h, d, prepared)?;
        let [train, validation, test] = Split::ALL.map(|s| data.part(s));
        info!(
            "{}: {} train / {} validation / {} test, seeds {:?}",
            config.name,
            train.len(),
            validation.len(),
            test.len(),
            config.seeds
        );
        let d: &RunDir = d;
        let mut persist_error = None;
        let outcome = run_seeds(&config, &h, &train, &validation, &test, |run| {
            persist_seed(d, &config, &h, run).map_err(|e| {
                let message = format!("{e:#}");
                persist_error = Some(e);
                idrr_core::Error::Training(message)
            })
        });
        if let Some(e) = persist_error {
            return Err(e);
        }
        let reports = outcome?;
        write_aggregate(d, &format!("{} on the test split", config.name), &reports)
    })?;
    info!("run written to {}", common.out.display());
    Ok(())
}

/// One row per evaluated instance and seed, used by `analyze`.
#[derive(Default)]
struct Labels {
    rows: Vec<(u64, String, [usize; 2], [usize; 2])>,
}

impl Labels {
    fn push(&mut self, seed: u64, predictions: &[Prediction], gold: impl Iterator<Item = [usize; 2]>) {
        for (p, g) in predictions.iter().zip(gold) {
            self.rows.push((seed, p.id.clone(), [p.labels[0], p.labels[1]], g));
        }
    }

    fn to_tsv(&self, h: &SenseHierarchy) -> String {
        let mut out = String::from("seed\tid\tpred1\tpred2\tgold1\tgold2\n");
        for (seed, id, p, g) in &self.rows {
            let _ = writeln!(
                out,
                "{seed}\t{id}\t{}\t{}\t{}\t{}",
                h.name(Level::One, p[0]),
                h.name(Level::Two, p[1]),
                h.name(Level::One, g[0]),
                h.name(Level::Two, g[1])
            );
        }
        out
    }

    fn from_tsv(text: &str, h: &SenseHierarchy, origin: &Path) -> Result<Labels> {
        let mut labels = Labels::default();
        for (n, line) in text.lines().enumerate().skip(1) {
            let bad = || Failure::data(format!("{}:{}: malformed label row", origin.display(), n + 1));
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 6 {
                return Err(bad().into());
            }
            let seed = f[0].parse().map_err(|_| bad())?;
            let find = |level, name: &str| h.find(level, name).ok_or_else(bad);
            labels.rows.push((
                seed,
                f[1].to_string(),
                [find(Level::One, f[2])?, find(Level::Two, f[3])?],
                [find(Level::One, f[4])?, find(Level::Two, f[5])?],
            ));
        }
        Ok(labels)
    }

    fn coherence(&self, h: &SenseHierarchy) -> Result<CoherenceReport> {
        let col = |k: usize, pred: bool| -> Vec<usize> {
            self.rows.iter().map(|r| if pred { r.2[k] } else { r.3[k] }).collect()
        };
        let (g1, g2) = (col(0, false), col(1, false));
        Ok(coherence_report(h, &col(0, true), &col(1, true), Some((&g1, &g2)))?)
    }
}

enum TestSet {
    Distributions(Vec<RelationInstance>),
    Pdtb(PdtbScheme, Vec<SingleLabelTestSet>),
}

fn resolve_test(test: &str, config: &ExperimentConfig, data: &Prepared, h: &SenseHierarchy) -> Result<(String, TestSet, Option<PathBuf>)> {
    if test == "discogem" {
        return Ok(("discogem".into(), TestSet::Distributions(data.part(Split::Test)), None));
    }
    if let Some(scheme) = test.strip_prefix("pdtb-") {
        let scheme: PdtbScheme = scheme.parse()?;
        let path = config
            .data
            .pdtb
            .clone()
            .ok_or_else(|| Failure::config("the run config has no data.pdtb file"))?;
        if !path.is_file() {
            return Err(Failure::config(format!("PDTB file {} does not exist", path.display())).into());
        }
        let sets = load_pdtb_splits(h, &path, scheme, config.data.pdtb_delimiter()?)
            .with_context(|| format!("reading {}", path.display()))?;
        return Ok((test.to_string(), TestSet::Pdtb(scheme, sets), Some(path)));
    }
    let path = PathBuf::from(test);
    if !path.is_file() {
        return Err(Failure::config(format!(
            "unknown test set {test:?}; expected discogem, pdtb-lin, pdtb-ji, pdtb-cross or an instances .jsonl file"
        ))
        .into());
    }
    let instances = read_instances(&path)?;
    for inst in &instances {
        for t in &inst.targets {
            t.check_against(h).with_context(|| format!("instance {} in {}", inst.id, path.display()))?;
        }
    }
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "custom".into());
    Ok((name, TestSet::Distributions(instances), Some(path)))
}

#[derive(Serialize)]
struct FoldSummary {
    fold: usize,
    instances: usize,
    f1_weighted: OrderedMap<MeanStd>,
}

#[derive(Serialize)]
struct CrossSummary {
    scheme: &'static str,
    folds: usize,
    seeds: usize,
    aggregation: &'static str,
    /// Per level: mean over seeds of each seed's fold-averaged weighted F1.
    f1_weighted: OrderedMap<MeanStd>,
    per_fold: Vec<FoldSummary>,
}

fn cross_text(title: &str, s: &CrossSummary) -> String {
    let fmt = |v: &MeanStd| {
        if v.std_defined {
            format!("{:.2} ± {:.2}", v.mean, v.std)
        } else {
            format!("{:.2}", v.mean)
        }
    };
    let mut out = format!("{title}\n{} folds, {} seed(s)\n\n", s.folds, s.seeds);
    let _ = writeln!(out, "{:<10} {:>10} {:>18} {:>18}", "fold", "instances", "level1 F1", "level2 F1");
    for f in &s.per_fold {
        let _ = writeln!(
            out,
            "{:<10} {:>10} {:>18} {:>18}",
            format!("{:02}", f.fold),
            f.instances,
            fmt(&f.f1_weighted.0[0].1),
            fmt(&f.f1_weighted.0[1].1)
        );
    }
    let _ = writeln!(
        out,
        "{:<10} {:>10} {:>18} {:>18}",
        "average",
        "",
        fmt(&s.f1_weighted.0[0].1),
        fmt(&s.f1_weighted.0[1].1)
    );
    out
}

fn checkpoints(run: &Path, config: &ExperimentConfig, h: &SenseHierarchy) -> Result<Vec<(u64, Checkpoint)>> {
    config
        .seeds
        .iter()
        .map(|&seed| {
            let path = run.join(seed_dir(seed)).join("checkpoint");
            let ck = load_checkpoint(&path).with_context(|| format!("checkpoint {}", path.display()))?;
            ck.check_hierarchy(h)
                .context("the checkpoint was trained under a different sense hierarchy than the test data")?;
            ck.check_run_config(&config.hash())
                .context("the checkpoint does not belong to this run's config")?;
            Ok((seed, ck))
        })
        .collect()
}

/// Evaluates every seed of a finished run on a test set, writing into
/// `<run>/eval-<name>`.
pub fn evaluate(common: &Common, test: &str) -> Result<()> {
    let run = &common.out;
    let run_manifest = Manifest::load_verified(run).with_context(|| format!("run directory {}", run.display()))?;
    if run_manifest.command != "train" {
        return Err(Failure::data(format!("{} is a {} output, not a training run", run.display(), run_manifest.command)).into());
    }
    let config = ExperimentConfig::load(&run.join(CONFIG))?;
    let data = Prepared::load(&run.join("data"))?;
    let h = data.hierarchy.clone();
    let (name, set, input) = resolve_test(test, &config, &data, &h)?;
    let models = checkpoints(run, &config, &h)?;

    let mut manifest = Manifest::new("evaluate", h.schema_hash());
    manifest.config_hash = Some(config.hash());
    manifest.seeds = config.seeds.clone();
    if let Some(p) = &input {
        manifest.add_input(p)?;
    }
    let dir = RunDir::create(&run.join(format!("eval-{name}")), common.force, manifest)?;
    run_in(dir, |d| {
        let mut labels = Labels::default();
        let title = format!("{} on {name}", config.name);
        match &set {
            TestSet::Distributions(instances) => {
                let mut reports = Vec::new();
                for (seed, ck) in &models {
                    let preds = idrr_core::training::predict_instances(&ck.model, instances)?;
                    let report = evaluate_distributions(&h, &preds, instances)?;
                    let base = seed_dir(*seed);
                    write_predictions(&d.path_for(&format!("{base}/predictions.jsonl"))?, &h, &preds)?;
                    write_report(d, &format!("{base}/"), &h, &report)?;
                    let by_id: std::collections::HashMap<&str, &RelationInstance> =
                        instances.iter().map(|i| (i.id.as_str(), i)).collect();
                    labels.push(*seed, &preds, preds.iter().map(|p| {
                        let g = by_id[p.id.as_str()];
                        [g.majority[0], g.majority[1]]
                    }));
                    reports.push(report);
                }
                write_aggregate(d, &title, &reports)?;
            }
            TestSet::Pdtb(scheme, sets) => {
                let cross = *scheme == PdtbScheme::Cross;
                let mut per_set: Vec<Vec<EvaluationReport>> = vec![Vec::new(); sets.len()];
                for (seed, ck) in &models {
                    for (k, set) in sets.iter().enumerate() {
                        if set.instances.is_empty() {
                            continue;
                        }
                        let items = set.instances.iter().map(|i| (i.id.as_str(), i.arg1.as_str(), i.arg2.as_str()));
                        let preds = ck.model.predict(items)?;
                        let report = evaluate_single_label(&h, &preds, &set.instances)?;
                        let prefix = if cross {
                            format!("fold-{k:02}/{}/", seed_dir(*seed))
                        } else {
                            format!("{}/", seed_dir(*seed))
                        };
                        write_predictions(&d.path_for(&format!("{prefix}predictions.jsonl"))?, &h, &preds)?;
                        write_report(d, &prefix, &h, &report)?;
                        labels.push(*seed, &preds, set.instances.iter().map(|i| [i.level1, i.level2]));
                        per_set[k].push(report);
                    }
                }
                if !cross {
                    if per_set[0].is_empty() {
                        return Err(Failure::data(format!("the {name} test set is empty")).into());
                    }
                    write_aggregate(d, &title, &per_set[0])?;
                } else {
                    let summary = cross_summary(d, &title, sets, &per_set, models.len())?;
                    d.write_json("metrics.json", &summary)?;
                    d.write("metrics.txt", cross_text(&title, &summary))?;
                }
            }
        }
        let coherence = labels.coherence(&h)?;
        d.write("coherence.csv", coherence_csv(&[(name.as_str(), &coherence)]))?;
        d.write("coherence.txt", coherence_text(&[(name.as_str(), &coherence)]))?;
        d.write(LABELS, labels.to_tsv(&h))
    })?;
    info!("evaluation written to {}", run.join(format!("eval-{name}")).display());
    Ok(())
}

fn cross_summary(
    d: &RunDir,
    title: &str,
    sets: &[SingleLabelTestSet],
    per_set: &[Vec<EvaluationReport>],
    seeds: usize,
) -> Result<CrossSummary> {
    let levels = [Level::One, Level::Two];
    let mut per_fold = Vec::new();
    // fold_f1[seed][level] collects each fold's score for that seed.
    let mut fold_f1 = vec![[Vec::new(), Vec::new()]; seeds];
    for (k, reports) in per_set.iter().enumerate() {
        if reports.is_empty() {
            warn!("fold {k:02} has no test instances and is left out of the average");
            continue;
        }
        let fold = sets[k].fold.unwrap_or(k);
        write_aggregate_at(d, &format!("fold-{fold:02}/"), &format!("{title}, fold {fold:02}"), reports)?;
        for (s, r) in reports.iter().enumerate() {
            for (slot, level) in levels.iter().enumerate() {
                fold_f1[s][slot].push(r.level(*level).expect("levels 1 and 2").f1_weighted);
            }
        }
        per_fold.push(FoldSummary {
            fold,
            instances: sets[k].instances.len(),
            f1_weighted: OrderedMap(
                levels
                    .iter()
                    .map(|l| {
                        let v: Vec<f64> = reports.iter().map(|r| r.level(*l).expect("level").f1_weighted).collect();
                        (l.to_string(), mean_std(&v))
                    })
                    .collect(),
            ),
        });
    }
    if per_fold.is_empty() {
        return Err(Failure::data("every cross-validation fold is empty").into());
    }
    let averaged = levels
        .iter()
        .enumerate()
        .map(|(slot, l)| {
            let per_seed: Vec<f64> = fold_f1
                .iter()
                .map(|f| f[slot].iter().sum::<f64>() / f[slot].len() as f64)
                .collect();
            (l.to_string(), mean_std(&per_seed))
        })
        .collect();
    Ok(CrossSummary {
        scheme: "cross",
        folds: per_fold.len(),
        seeds,
        aggregation: "mean±std over seeds of the fold average",
        f1_weighted: OrderedMap(averaged),
        per_fold,
    })
}

fn write_aggregate_at(dir: &RunDir, prefix: &str, title: &str, reports: &[EvaluationReport]) -> Result<()> {
    let aggregate = aggregate_reports(reports)?;
    dir.write_json(&format!("{prefix}metrics.json"), &aggregate)?;
    dir.write(&format!("{prefix}metrics.txt"), aggregate_text(title, &aggregate))
}

/// Top-k agreement against reference labels and cross-level coherence of
/// evaluated runs.
pub fn analyze(common: &Common, references: Option<&Path>, runs: &[PathBuf], level: u8) -> Result<()> {
    if references.is_none() && runs.is_empty() {
        return Err(Failure::config("analyze needs --refs TSV (with --config) and/or --run DIR").into());
    }
    let level = Level::from_number(level).map_err(|e| Failure::config(e.to_string()))?;
    let h = SenseHierarchy::canonical();
    let config = match references {
        Some(_) => {
            let c = common.config()?;
            c.check_paths()?;
            Some(c)
        }
        None => None,
    };

    let mut manifest = Manifest::new("analyze", h.schema_hash());
    if let Some(c) = &config {
        manifest.config_hash = Some(c.hash());
        for p in data::corpus_inputs(c) {
            manifest.add_input(&p)?;
        }
    }
    if let Some(r) = references {
        manifest.add_input(r).map_err(|e| Failure::data(format!("{e:#}")))?;
    }
    let dir = RunDir::create(&common.out, common.force, manifest)?;
    run_in(dir, |d| {
        if let (Some(refs), Some(config)) = (references, &config) {
            let (instances, _) = data::load_corpus(config, &h)?;
            let wanted = data::read_references(refs, &h, level)?;
            let by_id: std::collections::HashMap<&str, &RelationInstance> =
                instances.iter().map(|i| (i.id.as_str(), i)).collect();
            let missing: Vec<&str> = wanted.keys().filter(|id| !by_id.contains_key(id.as_str())).map(|s| s.as_str()).collect();
            if !missing.is_empty() {
                return Err(Failure::data(format!(
                    "{} reference ids are not in the corpus (first: {})",
                    missing.len(),
                    missing[0]
                ))
                .into());
            }
            let pairs: Vec<(usize, &idrr_core::LabelDistribution)> =
                wanted.iter().map(|(id, &r)| (r, &by_id[id.as_str()].targets[level.slot()])).collect();
            let report = agreement_report(level, &pairs, &AGREEMENT_KS)?;
            d.write_json("agreement.json", &report)?;
            d.write("agreement.txt", report.to_text())?;
        }
        let mut columns: Vec<(String, CoherenceReport)> = Vec::new();
        for run in runs {
            let mut evals: Vec<PathBuf> = fs::read_dir(run)
                .map_err(|e| Failure::data(format!("{}: {e}", run.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.join(LABELS).is_file())
                .collect();
            evals.sort();
            if evals.is_empty() {
                return Err(Failure::data(format!("{} has no evaluations; run `idrr evaluate` first", run.display())).into());
            }
            let run_name = run.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            for eval in evals {
                Manifest::load_verified(&eval)?;
                d.manifest.add_input(&eval.join(LABELS))?;
                let text = fs::read_to_string(eval.join(LABELS))?;
                let labels = Labels::from_tsv(&text, &h, &eval.join(LABELS))?;
                let name = eval.file_name().unwrap().to_string_lossy();
                let name = name.strip_prefix("eval-").unwrap_or(&name);
                columns.push((format!("{run_name}/{name}"), labels.coherence(&h)?));
            }
        }
        if !columns.is_empty() {
            let refs: Vec<(&str, &CoherenceReport)> = columns.iter().map(|(n, r)| (n.as_str(), r)).collect();
            d.write("coherence.csv", coherence_csv(&refs))?;
            d.write("coherence.txt", coherence_text(&refs))?;
        }
        Ok(())
    })
}

/// Random baseline predictions for the test split, sampled from the
/// training split's marginals, one run per seed.
pub fn baseline(common: &Common, prepared: Option<&Path>, draws: usize) -> Result<()> {
    let config = common.training_config()?;
    if prepared.is_none() {
        config.check_paths()?;
    }
    if draws == 0 {
        return Err(Failure::config("--draws must be at least 1").into());
    }
    let h = SenseHierarchy::canonical();
    let dir = start(common, "baseline", &config, &h)?;
    run_in(dir, |d| {
        d.write(CONFIG, config.to_toml())?;
        let data = ensure_data(&config, &h, d, prepared)?;
        let train = data.part(Split::Train);
        let test = data.part(Split::Test);
        let m = marginals(&train)?;
        let named: OrderedMap<OrderedMap<f64>> = OrderedMap(
            Level::ALL
                .iter()
                .map(|&l| {
                    let v = h.senses(l).iter().map(|s| (s.name.clone(), m[l.slot()].values[s.index])).collect();
                    (l.to_string(), OrderedMap(v))
                })
                .collect(),
        );
        d.write_json("marginals.json", &named)?;
        let ids: Vec<String> = test.iter().map(|i| i.id.clone()).collect();
        let mut reports = Vec::new();
        for &seed in &config.seeds {
            let preds = random_baseline(&m, &ids, draws, seed)?;
            let report = evaluate_distributions(&h, &preds, &test)?;
            let base = seed_dir(seed);
            write_predictions(&d.path_for(&format!("{base}/predictions.jsonl"))?, &h, &preds)?;
            write_report(d, &format!("{base}/"), &h, &report)?;
            reports.push(report);
        }
        write_aggregate(d, &format!("random baseline ({draws} draws) on the test split"), &reports)
    })?;
    info!("baseline written to {}", common.out.display());
    Ok(())
}
