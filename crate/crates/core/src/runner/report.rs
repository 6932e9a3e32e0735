use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::compare::{baseline_pct, SharedNeverRow, SimilarityStat, SpearmanStat};
use crate::error::{Error, Result};
use crate::pruning::RunRecord;
use crate::stats::{significance_interval, OverlapStat};

/// Writes `contents`, creating parent directories.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn pair_cells(s: &OverlapStat) -> String {
    match &s.pair {
        Some(p) => format!("{},{},{},{},{},{}", p.a.task, p.a.seed, p.a.run, p.b.task, p.b.seed, p.b.run),
        None => ",,,,,".into(),
    }
}

/// One row per stat; baselines and percentages are in percent of τ.
pub fn overlap_csv(stats: &[OverlapStat]) -> Result<String> {
    let mut out = String::from(
        "task_a,seed_a,run_a,task_b,seed_b,run_b,layer,layer_name,population,tau,x,pct,\
         baseline_pct,baseline_sigma_pct,significant_95,significant_99\n",
    );
    for s in stats {
        let b = baseline_pct(s)?;
        writeln!(
            out,
            "{},{},{},{},{},{},{:.6},{:.6},{:.6},{},{}",
            pair_cells(s),
            s.layer,
            s.layer_name,
            s.population,
            s.tau,
            s.x,
            s.pct,
            b.mean,
            b.sigma,
            s.is_significant(0.95)?,
            s.is_significant(0.99)?
        )
        .expect("writing to a String");
    }
    Ok(out)
}

pub fn emit_report(stats: &[OverlapStat], path: &Path) -> Result<()> {
    write_file(path, &overlap_csv(stats)?)
}

#[derive(Serialize)]
struct LayerSummary<'a> {
    layer: usize,
    name: &'a str,
    population: usize,
    tau: usize,
    baseline_pct: f64,
    baseline_sigma_pct: f64,
    interval_95: (u64, u64),
    significant_95: f64,
    values: Vec<f64>,
}

/// Per-layer overlap distributions (violin-plot input) with baselines.
pub fn overlap_json(stats: &[OverlapStat]) -> Result<String> {
    let mut by_layer: BTreeMap<usize, Vec<&OverlapStat>> = BTreeMap::new();
    for s in stats {
        by_layer.entry(s.layer).or_default().push(s);
    }
    let mut layers = Vec::new();
    for (layer, group) in by_layer {
        let first = group[0];
        let b = baseline_pct(first)?;
        let mut significant = 0usize;
        for s in &group {
            significant += usize::from(s.is_significant(0.95)?);
        }
        layers.push(LayerSummary {
            layer,
            name: &first.layer_name,
            population: first.population,
            tau: first.tau,
            baseline_pct: b.mean,
            baseline_sigma_pct: b.sigma,
            interval_95: significance_interval(first.population as u64, first.tau as u64, 0.95)?,
            significant_95: significant as f64 / group.len() as f64,
            values: group.iter().map(|s| s.pct).collect(),
        });
    }
    Ok(serde_json::to_string_pretty(&serde_json::json!({ "layers": layers }))? + "\n")
}

/// Held-out accuracy per training round; round 0 is the dense network.
pub fn accuracy_csv(records: &[RunRecord]) -> String {
    let mut out = String::from("task,seed,run,round,prune_percent,accuracy\n");
    for r in records {
        writeln!(out, "{},{},{},0,0,{:.6}", r.task, r.seed, r.run_id, r.dense_accuracy).expect("writing to a String");
        for (i, s) in r.steps.iter().enumerate() {
            writeln!(out, "{},{},{},{},{},{:.6}", r.task, r.seed, r.run_id, i + 1, s.prune_percent, s.accuracy)
                .expect("writing to a String");
        }
    }
    out
}

pub fn shared_never_csv(rows: &[SharedNeverRow]) -> String {
    let mut out = String::from(
        "task,seed,layer,layer_name,population,tau,runs,shared,shared_pct,shared_baseline_pct,\
         shared_baseline_sigma,never,never_pct,never_baseline_pct,never_baseline_sigma\n",
    );
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{:.6},{:.6},{:.6},{},{:.6},{:.6},{:.6}",
            r.task,
            r.seed,
            r.layer,
            r.layer_name,
            r.population,
            r.tau,
            r.runs,
            r.shared,
            r.shared_pct,
            r.shared_baseline_pct,
            r.shared_baseline.sigma,
            r.never,
            r.never_pct,
            r.never_baseline_pct,
            r.never_baseline.sigma
        )
        .expect("writing to a String");
    }
    out
}

pub fn similarity_csv(stats: &[SimilarityStat]) -> String {
    let mut out = String::from("task_a,seed_a,run_a,task_b,seed_b,run_b,l2,cka\n");
    for s in stats {
        let (a, b) = (&s.pair.a, &s.pair.b);
        writeln!(out, "{},{},{},{},{},{},{:.9},{:.9}", a.task, a.seed, a.run, b.task, b.seed, b.run, s.l2, s.cka)
            .expect("writing to a String");
    }
    out
}

pub fn spearman_csv(stats: &[SpearmanStat]) -> String {
    let mut out = String::from("task,seed,run,step,layer,rho\n");
    for s in stats {
        writeln!(out, "{},{},{},{},{},{:.6}", s.run.task, s.run.seed, s.run.run, s.step, s.layer, s.rho)
            .expect("writing to a String");
    }
    out
}
