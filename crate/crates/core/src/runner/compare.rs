use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::pruning::{LayerMask, Mask, RunRecord};
use crate::similarity::{l2_distance, linear_cka};
use crate::stats::{
    hypergeom_moments, never_covered_baseline, overlap, shared_all_baseline, spearman_masked, BaselineEstimate,
    OverlapStat, PairId, RunKey,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompareMode {
    /// Runs sharing one initialisation.
    Within,
    /// Runs from different initialisations.
    Across,
    /// Tickets of one task against tickets of another.
    CrossTask,
}

impl std::str::FromStr for CompareMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "within" => Ok(CompareMode::Within),
            "across" => Ok(CompareMode::Across),
            "cross-task" => Ok(CompareMode::CrossTask),
            other => Err(format!("unknown mode {other:?} (within|across|cross-task)")),
        }
    }
}

/// Which cross-task record pairs are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossTaskPairing {
    /// Every run of task A against every run of task B with the same seed.
    #[default]
    SameSeed,
    /// Pairs whose seeds differ.
    CrossSeed,
}

pub fn run_key(r: &RunRecord) -> RunKey {
    RunKey {
        task: r.task.clone(),
        seed: r.seed,
        run: r.run_id,
    }
}

fn sorted(records: &[RunRecord]) -> Vec<&RunRecord> {
    let mut v: Vec<&RunRecord> = records.iter().collect();
    v.sort_by_key(|r| run_key(r));
    v
}

fn pair_stats(a: &RunRecord, b: &RunRecord, step: usize) -> Result<Vec<OverlapStat>> {
    let pair = PairId {
        a: run_key(a),
        b: run_key(b),
    };
    Ok(overlap(&a.step(step)?.mask, &b.step(step)?.mask)?
        .into_iter()
        .map(|s| s.with_pair(pair.clone()))
        .collect())
}

/// Records grouped by (task, seed), each group ordered by run.
pub fn group_by_seed(records: &[RunRecord]) -> BTreeMap<(String, u64), Vec<&RunRecord>> {
    let mut groups: BTreeMap<(String, u64), Vec<&RunRecord>> = BTreeMap::new();
    for r in sorted(records) {
        groups.entry((r.task.clone(), r.seed)).or_default().push(r);
    }
    groups
}

/// Unordered pairs of runs sharing task and seed: `C(runs, 2)` per seed.
pub fn within_seed_pairs(records: &[RunRecord]) -> Result<Vec<(&RunRecord, &RunRecord)>> {
    let mut pairs = Vec::new();
    for group in group_by_seed(records).values() {
        for i in 0..group.len() {
            for j in i + 1..group.len() {
                pairs.push((group[i], group[j]));
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::Domain("within-seed comparison needs at least 2 runs per seed".into()));
    }
    Ok(pairs)
}

/// Unordered pairs of runs of one task whose seeds differ.
pub fn across_seed_pairs(records: &[RunRecord]) -> Result<Vec<(&RunRecord, &RunRecord)>> {
    let v = sorted(records);
    let mut pairs = Vec::new();
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            if v[i].task == v[j].task && v[i].seed != v[j].seed {
                pairs.push((v[i], v[j]));
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::Domain("across-seed comparison needs at least 2 seeds".into()));
    }
    Ok(pairs)
}

fn stats_for(pairs: &[(&RunRecord, &RunRecord)], step: usize) -> Result<Vec<OverlapStat>> {
    let mut out = Vec::new();
    for (a, b) in pairs {
        out.extend(pair_stats(a, b, step)?);
    }
    Ok(out)
}

/// Per-layer overlaps of all within-seed pairs at `step`.
pub fn compare_within_seed(records: &[RunRecord], step: usize) -> Result<Vec<OverlapStat>> {
    stats_for(&within_seed_pairs(records)?, step)
}

/// Per-layer overlaps of all across-seed pairs at `step`.
pub fn compare_across_seeds(records: &[RunRecord], step: usize) -> Result<Vec<OverlapStat>> {
    stats_for(&across_seed_pairs(records)?, step)
}

/// Cross-task overlaps plus the layers left out for differing shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTaskComparison {
    pub stats: Vec<OverlapStat>,
    pub skipped_layers: Vec<usize>,
}

/// Compares tickets of two tasks on the layers whose shapes agree.
pub fn compare_across_tasks(
    records_a: &[RunRecord],
    records_b: &[RunRecord],
    step: usize,
    pairing: CrossTaskPairing,
) -> Result<CrossTaskComparison> {
    let (a0, b0) = match (records_a.first(), records_b.first()) {
        (Some(a), Some(b)) => (a.step(step)?, b.step(step)?),
        _ => return Err(Error::EmptyInput("cross-task comparison without records")),
    };
    let (la, lb) = (a0.mask.layers(), b0.mask.layers());
    let (mut keep, mut skipped) = (Vec::new(), Vec::new());
    for i in 0..la.len().max(lb.len()) {
        match (la.get(i), lb.get(i)) {
            (Some(x), Some(y)) if x.dims() == y.dims() => keep.push(i),
            _ => skipped.push(i),
        }
    }
    if keep.is_empty() {
        return Err(Error::Shape("no layers of equal shape to compare".into()));
    }
    let select = |m: &Mask| -> Mask { Mask::new(keep.iter().map(|&i| m.layer(i).clone()).collect::<Vec<LayerMask>>()) };

    let mut stats = Vec::new();
    for a in sorted(records_a) {
        for b in sorted(records_b) {
            let (ka, kb) = (run_key(a), run_key(b));
            let wanted = match pairing {
                CrossTaskPairing::SameSeed => a.seed == b.seed,
                CrossTaskPairing::CrossSeed => a.seed != b.seed,
            };
            if !wanted || ka == kb || (a.task == b.task && ka > kb) {
                continue;
            }
            let pair = PairId { a: ka, b: kb };
            for mut s in overlap(&select(&a.step(step)?.mask), &select(&b.step(step)?.mask))? {
                s.layer = keep[s.layer];
                stats.push(s.with_pair(pair.clone()));
            }
        }
    }
    Ok(CrossTaskComparison {
        stats,
        skipped_layers: skipped,
    })
}

/// Hypergeometric overlap baseline for one stat, in percent of τ.
pub fn baseline_pct(stat: &OverlapStat) -> Result<BaselineEstimate> {
    let b = hypergeom_moments(stat.population as u64, stat.tau as u64)?;
    let scale = 100.0 / stat.tau as f64;
    Ok(BaselineEstimate {
        mean: b.mean * scale,
        sigma: b.sigma * scale,
        model: b.model,
    })
}

/// Weights kept by all / none of one seed's tickets, against random baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedNeverRow {
    pub task: String,
    pub seed: u64,
    pub layer: usize,
    pub layer_name: String,
    pub population: usize,
    pub tau: usize,
    pub runs: usize,
    /// Weights in every ticket.
    pub shared: usize,
    /// `100·shared/τ`.
    pub shared_pct: f64,
    pub shared_baseline: BaselineEstimate,
    pub shared_baseline_pct: f64,
    /// Weights in no ticket.
    pub never: usize,
    /// Unused coverage as a share of `min(N, k·τ)`: 0 when the tickets
    /// cover as much as they possibly can.
    pub never_pct: f64,
    pub never_baseline: BaselineEstimate,
    pub never_baseline_pct: f64,
}

fn never_pct(covered: f64, bound: f64) -> f64 {
    if bound == 0.0 {
        0.0
    } else {
        100.0 * (bound - covered) / bound
    }
}

pub fn shared_and_never_report(records: &[RunRecord], step: usize) -> Result<Vec<SharedNeverRow>> {
    let mut rows = Vec::new();
    for ((task, seed), group) in group_by_seed(records) {
        let k = group.len();
        if k < 2 {
            continue;
        }
        let masks: Vec<&Mask> = group.iter().map(|r| r.step(step).map(|s| &s.mask)).collect::<Result<_>>()?;
        for (l, layer) in masks[0].layers().iter().enumerate() {
            let per_run: Vec<&LayerMask> = masks.iter().map(|m| m.layer(l)).collect();
            let (n, tau) = (layer.len(), layer.tau());
            if tau == 0 {
                continue;
            }
            let shared = LayerMask::and_all(per_run.iter().copied()).expect("k ≥ 2").tau();
            let covered = LayerMask::or_all(per_run.iter().copied()).expect("k ≥ 2").tau();
            let bound = n.min(k * tau) as f64;
            let sb = shared_all_baseline(n as u64, tau as u64, k as u32)?;
            let nb = never_covered_baseline(n as u64, tau as u64, k as u32)?;
            rows.push(SharedNeverRow {
                task: task.clone(),
                seed,
                layer: l,
                layer_name: layer.name().to_string(),
                population: n,
                tau,
                runs: k,
                shared,
                shared_pct: 100.0 * shared as f64 / tau as f64,
                shared_baseline: sb,
                shared_baseline_pct: 100.0 * sb.mean / tau as f64,
                never: n - covered,
                never_pct: never_pct(covered as f64, bound),
                never_baseline: nb,
                never_baseline_pct: never_pct(n as f64 - nb.mean, bound),
            });
        }
    }
    Ok(rows)
}

/// Functional similarity of one ticket pair on the probe set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityStat {
    pub pair: PairId,
    pub l2: f64,
    pub cka: f64,
}

pub fn similarity_pairs(pairs: &[(&RunRecord, &RunRecord)], exec: Execution) -> Result<Vec<SimilarityStat>> {
    exec.map_slice(pairs, |(a, b)| {
        Ok(SimilarityStat {
            pair: PairId {
                a: run_key(a),
                b: run_key(b),
            },
            l2: l2_distance(&a.probe_outputs, &b.probe_outputs)?,
            cka: linear_cka(&a.probe_outputs, &b.probe_outputs)?,
        })
    })
    .into_iter()
    .collect()
}

/// Rank agreement between initial and trained magnitudes of surviving weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpearmanStat {
    pub run: RunKey,
    pub step: usize,
    pub layer: usize,
    pub rho: f64,
}

/// Layers whose tickets are too small or fully tied are left out.
pub fn spearman_report(records: &[RunRecord], step: usize) -> Result<Vec<SpearmanStat>> {
    let mut out = Vec::new();
    for r in sorted(records) {
        let s = r.step(step)?;
        for (l, mask) in s.mask.layers().iter().enumerate() {
            match spearman_masked(r.init.layer(l).data(), s.trained.layer(l).data(), mask) {
                Ok(rho) => out.push(SpearmanStat {
                    run: run_key(r),
                    step,
                    layer: l,
                    rho,
                }),
                Err(Error::Domain(_) | Error::Degenerate(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}
