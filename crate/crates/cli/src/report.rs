//! Aligned plain-text renderings of the JSON reports.

use std::fmt::Write as _;

use idrr_core::analysis::CoherenceReport;
use idrr_core::metrics::{AggregateReport, AggregateScore, ConfusionMatrix, MeanStd};
use idrr_core::{Level, SenseHierarchy};

fn cell(v: &MeanStd, precision: usize) -> String {
    if v.std_defined {
        format!("{:.p$} ± {:.p$}", v.mean, v.std, p = precision)
    } else {
        format!("{:.p$}", v.mean, p = precision)
    }
}

/// Headline JS and F1 per level, then per-sense F1 per level.
pub fn aggregate_text(title: &str, report: &AggregateReport) -> String {
    let mut out = format!("{title}\n");
    let _ = writeln!(
        out,
        "{} run(s), {} instances, mean ± sample std{}\n",
        report.seeds,
        report.instances,
        if report.std_defined { "" } else { " (std undefined for one run)" }
    );
    let _ = writeln!(out, "{:<8} {:>18} {:>18}", "level", "JS", "F1");
    for (name, level) in &report.levels.0 {
        let js = level.js_mean.as_ref().map(|v| cell(v, 3)).unwrap_or_else(|| "-".into());
        let _ = writeln!(out, "{:<8} {:>18} {:>18}", name, js, cell(&level.f1_weighted, 2));
    }
    for (name, level) in &report.levels.0 {
        let _ = writeln!(out, "\nper-sense F1, {name}");
        for (sense, score) in &level.per_sense.0 {
            let text = match score {
                AggregateScore::Value(v) => cell(v, 2),
                AggregateScore::Marker(m) => m.to_string(),
            };
            let _ = writeln!(out, "  {sense:<22} {text:>16}");
        }
    }
    out
}

pub fn confusion_csv(h: &SenseHierarchy, level: Level, cm: &ConfusionMatrix) -> String {
    let names: Vec<&str> = h.senses(level).iter().map(|s| s.name.as_str()).collect();
    cm.to_csv(&names)
}

/// One column per named report, senses grouped by level.
pub fn coherence_text(reports: &[(&str, &CoherenceReport)]) -> String {
    let mut out = format!("{:<8} {:<18}", "level", "sense");
    for (name, _) in reports {
        let _ = write!(out, " {name:>14}");
    }
    out.push('\n');
    let Some((_, first)) = reports.first() else {
        return out;
    };
    for (label, rows, pick) in [
        ("level1", &first.level1, 1usize),
        ("level2", &first.level2, 2usize),
    ] {
        for (i, (sense, _)) in rows.0.iter().enumerate() {
            let _ = write!(out, "{label:<8} {sense:<18}");
            for (_, r) in reports {
                let map = if pick == 1 { &r.level1 } else { &r.level2 };
                let _ = write!(out, " {:>14}", map.0[i].1.to_string());
            }
            out.push('\n');
        }
    }
    out
}
