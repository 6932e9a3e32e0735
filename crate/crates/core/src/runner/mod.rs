//! Experiment orchestration: plans, comparison modes and report emission.

mod compare;
mod plan;
mod report;
mod svg;

pub use compare::{
    across_seed_pairs, baseline_pct, compare_across_seeds, compare_across_tasks, compare_within_seed, group_by_seed,
    run_key, shared_and_never_report, similarity_pairs, spearman_report, within_seed_pairs, CompareMode,
    CrossTaskComparison, CrossTaskPairing, SharedNeverRow, SimilarityStat, SpearmanStat,
};
pub use plan::{run_plan, BLOB_GRAD_NOISE, DatasetSpec, ExperimentPlan, TaskSpec, CIFAR_TEST_FILE, CIFAR_TRAIN_FILES, IDX_FILES};
pub use report::{
    accuracy_csv, emit_report, overlap_csv, overlap_json, shared_never_csv, similarity_csv, spearman_csv, write_file,
};
pub use svg::{emit_svg, render_scatter};
