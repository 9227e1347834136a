//! Config loading and the prepared-data directory shared by every command.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use idrr_core::corpus::{
    adapt_corpus, load_discogem, mass_sums, read_instances, stratified_split, write_instances, RelationInstance,
    Split, SplitAssignment,
};
use idrr_core::metrics::OrderedMap;
use idrr_core::synthetic::separable_corpus;
use idrr_core::{ExperimentConfig, Level, SenseHierarchy};
use log::info;
use serde::Serialize;

use crate::exit::Failure;
use crate::rundir::{Manifest, RunDir, MANIFEST};

pub const INSTANCES: &str = "instances.jsonl";
pub const SPLIT: &str = "split.tsv";
pub const SENSES: &str = "senses.tsv";
pub const CONFIG: &str = "config.toml";

/// Loads a config with data paths made absolute, so a copy stored in an
/// output directory keeps pointing at the same files.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let absolute = fs::canonicalize(path)
        .map_err(|e| Failure::config(format!("config {}: {e}", path.display())))?;
    Ok(ExperimentConfig::load(&absolute)?)
}

/// Input files of the configured corpus.
pub fn corpus_inputs(config: &ExperimentConfig) -> Vec<PathBuf> {
    config.data.discogem.iter().cloned().collect()
}

/// Reads and adapts the configured corpus. Returns the instances and the
/// ids of excluded relations.
pub fn load_corpus(config: &ExperimentConfig, h: &SenseHierarchy) -> Result<(Vec<RelationInstance>, Vec<String>)> {
    config.check_paths()?;
    if let Some(spec) = &config.data.synthetic {
        return Ok((separable_corpus(h, spec.instances, spec.seed)?, Vec::new()));
    }
    let path = config.data.discogem.as_ref().expect("check_paths guarantees a corpus");
    let raw = load_discogem(path, &config.data.columns, config.data.delimiter()?)
        .with_context(|| format!("reading {}", path.display()))?;
    let adapted = adapt_corpus(h, &raw, "discogem")?;
    info!(
        "{}: {} relations, {} kept, {} excluded",
        path.display(),
        raw.len(),
        adapted.instances.len(),
        adapted.excluded.len()
    );
    Ok((adapted.instances, adapted.excluded))
}

#[derive(Serialize)]
struct SplitStats {
    instances: usize,
    /// Majority-label counts per level and sense.
    majority: OrderedMap<OrderedMap<usize>>,
}

#[derive(Serialize)]
struct Stats {
    instances: usize,
    excluded: Vec<String>,
    /// Summed target mass per level and sense.
    mass_sums: OrderedMap<OrderedMap<f64>>,
    splits: OrderedMap<SplitStats>,
}

fn majority_counts(h: &SenseHierarchy, instances: &[&RelationInstance]) -> OrderedMap<OrderedMap<usize>> {
    OrderedMap(
        Level::ALL
            .iter()
            .map(|&level| {
                let mut counts = vec![0usize; h.size(level)];
                for inst in instances {
                    counts[inst.majority[level.slot()]] += 1;
                }
                let named = h.senses(level).iter().map(|s| (s.name.clone(), counts[s.index])).collect();
                (level.to_string(), OrderedMap(named))
            })
            .collect(),
    )
}

fn stats_text(h: &SenseHierarchy, stats: &Stats) -> String {
    let mut out = format!("{} instances, {} excluded\n\n", stats.instances, stats.excluded.len());
    let _ = writeln!(
        out,
        "{:<24} {:>10} {:>8} {:>8} {:>8}",
        "sense", "mass", "train", "val", "test"
    );
    for level in Level::ALL {
        let _ = writeln!(out, "{level}");
        let sums = stats.mass_sums.get(&level.to_string()).expect("every level");
        for s in h.senses(level) {
            let count = |split: &str| {
                stats.splits.get(split).and_then(|st| st.majority.get(&level.to_string())).and_then(|m| m.get(&s.name)).copied().unwrap_or(0)
            };
            let _ = writeln!(
                out,
                "  {:<22} {:>10.1} {:>8} {:>8} {:>8}",
                s.name,
                sums.get(&s.name).copied().unwrap_or(0.0),
                count("train"),
                count("validation"),
                count("test")
            );
        }
    }
    out
}

/// Writes adapted instances, the split, the sense schema, a copy of the
/// config and summary statistics into `dir`.
pub fn prepare_into(config: &ExperimentConfig, h: &SenseHierarchy, dir: &mut RunDir) -> Result<()> {
    dir.manifest.config_hash = Some(config.hash());
    for p in corpus_inputs(config) {
        dir.manifest.add_input(&p)?;
    }
    let (instances, excluded) = load_corpus(config, h)?;
    let split = stratified_split(&instances, config.data.ratios, config.split_seed)?;
    write_instances(&dir.join(INSTANCES), &instances)?;
    split.write(&dir.join(SPLIT))?;
    dir.write(SENSES, h.to_schema())?;
    dir.write(CONFIG, config.to_toml())?;

    let sums = mass_sums(h, &instances);
    let mass = OrderedMap(
        Level::ALL
            .iter()
            .map(|&level| {
                let named = h.senses(level).iter().map(|s| (s.name.clone(), sums[level.slot()][s.index])).collect();
                (level.to_string(), OrderedMap(named))
            })
            .collect(),
    );
    let splits = OrderedMap(
        Split::ALL
            .iter()
            .map(|&s| {
                let members = split.select(&instances, s);
                (
                    s.as_str().to_string(),
                    SplitStats {
                        instances: members.len(),
                        majority: majority_counts(h, &members),
                    },
                )
            })
            .collect(),
    );
    let stats = Stats {
        instances: instances.len(),
        excluded,
        mass_sums: mass,
        splits,
    };
    dir.write_json("stats.json", &stats)?;
    dir.write("stats.txt", stats_text(h, &stats))?;
    let [train, validation, test] = split.counts();
    info!("split {train}/{validation}/{test} with seed {}", config.split_seed);
    Ok(())
}

/// A verified prepared-data directory.
pub struct Prepared {
    pub instances: Vec<RelationInstance>,
    pub split: SplitAssignment,
    pub hierarchy: SenseHierarchy,
}

impl Prepared {
    pub fn load(dir: &Path) -> Result<Prepared> {
        Manifest::load_verified(dir).with_context(|| format!("prepared data in {}", dir.display()))?;
        let schema = fs::read_to_string(dir.join(SENSES)).with_context(|| format!("reading {}", dir.display()))?;
        let hierarchy = SenseHierarchy::from_schema(&schema)?;
        Ok(Prepared {
            instances: read_instances(&dir.join(INSTANCES))?,
            split: SplitAssignment::read(&dir.join(SPLIT))?,
            hierarchy,
        })
    }

    pub fn part(&self, split: Split) -> Vec<RelationInstance> {
        self.split.select(&self.instances, split).into_iter().cloned().collect()
    }
}

/// Places prepared data under `<run>/data`: a verified copy of `from`, or a
/// fresh preparation from the config.
pub fn ensure_data(
    config: &ExperimentConfig,
    h: &SenseHierarchy,
    run: &RunDir,
    from: Option<&Path>,
) -> Result<Prepared> {
    let target = run.join("data");
    match from {
        Some(src) => {
            let manifest = Manifest::load_verified(src).with_context(|| format!("prepared data in {}", src.display()))?;
            if manifest.hierarchy_hash != h.schema_hash() {
                return Err(idrr_core::Error::HashMismatch {
                    what: format!("sense hierarchy of {}", src.display()),
                    expected: h.schema_hash(),
                    found: manifest.hierarchy_hash,
                }
                .into());
            }
            fs::create_dir_all(&target)?;
            let mut files: Vec<String> = manifest.outputs.keys().cloned().collect();
            files.push(MANIFEST.into());
            for rel in files {
                let to = target.join(&rel);
                if let Some(parent) = to.parent() {
                    fs::create_dir_all(parent)?;
                }
                fs::copy(src.join(&rel), &to).with_context(|| format!("copying {rel} from {}", src.display()))?;
            }
        }
        None => {
            let mut dir = RunDir::create(&target, false, Manifest::new("prepare", h.schema_hash()))?;
            dir.manifest.seeds = vec![config.split_seed];
            crate::rundir::run_in(dir, |d| prepare_into(config, h, d))?;
        }
    }
    let prepared = Prepared::load(&target)?;
    if prepared.hierarchy != *h {
        return Err(Failure::data("prepared data uses a different sense hierarchy").into());
    }
    Ok(prepared)
}

/// `id<TAB>sense` reference labels.
pub fn read_references(path: &Path, h: &SenseHierarchy, level: Level) -> Result<BTreeMap<String, usize>> {
    let text = fs::read_to_string(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, sense) = line
            .split_once('\t')
            .ok_or_else(|| Failure::data(format!("{}:{}: expected id<TAB>sense", path.display(), n + 1)))?;
        let index = h
            .find(level, sense.trim())
            .ok_or_else(|| Failure::data(format!("{}:{}: unknown {level} sense {sense:?}", path.display(), n + 1)))?;
        out.insert(id.trim().to_string(), index);
    }
    Ok(out)
}
