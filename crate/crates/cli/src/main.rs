use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use ticket_lab::io::{read_all_records, write_run_record, BlobStore};
use ticket_lab::pruning::{PruneSchedule, RunRecord};
use ticket_lab::rng::RegimeKind;
use ticket_lab::runner::{
    accuracy_csv, compare_across_seeds, compare_across_tasks, compare_within_seed, emit_report, emit_svg,
    overlap_json, run_plan, shared_and_never_report, shared_never_csv, similarity_csv, similarity_pairs,
    spearman_csv, spearman_report, within_seed_pairs, write_file, CompareMode, CrossTaskPairing, DatasetSpec,
    ExperimentPlan, TaskSpec,
};
use ticket_lab::stats::{
    hypergeom_moments, monte_carlo_oracle, never_covered_baseline_with, shared_all_baseline, significance_fraction,
    significance_interval, NeverCoveredReading, OverlapStat,
};
use ticket_lab::{Error, Execution, Result};

/// Lottery-ticket uniqueness lab.
#[derive(Parser)]
#[command(name = "ticket-lab", version)]
struct Cli {
    /// Run everything on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train, prune and store tickets for every seed × run.
    Run(RunArgs),
    /// Compare stored tickets and write overlap reports.
    Compare(CompareArgs),
    /// Print a random-mask baseline.
    Baseline(BaselineArgs),
    /// Write accuracy, Spearman and overlap reports for stored runs.
    Report(ReportArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Plan file (TOML); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of initialisations (seeds 0..N).
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    /// Comma-separated cumulative pruning percentages.
    #[arg(long)]
    schedule: Option<PruneSchedule>,
    #[arg(long)]
    regime: Option<RegimeKind>,
    /// `blobs`, `idx:<dir>` or `cifar:<dir>`.
    #[arg(long)]
    dataset: Option<String>,
    /// Standard deviation of Gaussian noise added to gradients.
    #[arg(long)]
    grad_noise: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct CompareArgs {
    /// Directory written by `run`.
    #[arg(long)]
    records: PathBuf,
    #[arg(long, default_value = "within")]
    mode: CompareMode,
    /// Pruning step (0-based); defaults to the last.
    #[arg(long)]
    step: Option<usize>,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Records of the second task for `cross-task`.
    #[arg(long)]
    other: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Pairing::SameSeed)]
    pairing: Pairing,
    /// Report directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Pairing {
    SameSeed,
    CrossSeed,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Hypergeom,
    Shared,
    Never,
    Mc,
}

#[derive(Clone, Copy, ValueEnum)]
enum Reading {
    Cumulative,
    Literal,
}

#[derive(clap::Args)]
struct BaselineArgs {
    #[arg(long, value_enum)]
    model: Model,
    /// Weights in the layer.
    #[arg(long)]
    population: u64,
    /// Ticket size.
    #[arg(long)]
    tau: u64,
    /// Number of tickets.
    #[arg(long, default_value_t = 5)]
    k: u32,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Reading::Cumulative)]
    reading: Reading,
}

#[derive(clap::Args)]
struct ReportArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    step: Option<usize>,
}

fn parse_dataset(spec: &str) -> std::result::Result<DatasetSpec, String> {
    let (kind, dir) = spec.split_once(':').unwrap_or((spec, ""));
    match (kind, dir) {
        ("blobs", "") => Ok(DatasetSpec::blobs(0)),
        ("idx", d) if !d.is_empty() => Ok(DatasetSpec::Idx {
            dir: d.into(),
            train_limit: 2000,
            test_limit: 1000,
        }),
        ("cifar", d) if !d.is_empty() => Ok(DatasetSpec::Cifar {
            dir: d.into(),
            train_limit: 2000,
            test_limit: 1000,
        }),
        _ => Err(format!("unknown dataset {spec:?} (blobs|idx:<dir>|cifar:<dir>)")),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Plan(_) | Error::Schedule(_) | Error::Toml(_) | Error::Domain(_) => 1,
        _ => 2,
    }
}

fn load_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let records = read_all_records(&BlobStore::new(dir))?;
    if records.is_empty() {
        return Err(Error::EmptyInput("no run records found"));
    }
    Ok(records)
}

fn resolve_step(records: &[RunRecord], step: Option<usize>) -> usize {
    step.unwrap_or_else(|| records[0].steps.len().saturating_sub(1))
}

fn cmd_run(args: RunArgs, exec: Execution) -> Result<()> {
    let mut plan = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            ExperimentPlan::from_toml(&text)?
        }
        None => ExperimentPlan::default(),
    };
    if let Some(n) = args.seeds {
        plan.seeds = (0..n).collect();
    }
    if let Some(r) = args.runs {
        plan.runs = r;
    }
    if let Some(s) = args.schedule {
        plan.schedule = s;
    }
    if let Some(r) = args.regime {
        plan.regime = r;
    }
    if let Some(d) = &args.dataset {
        let dataset = parse_dataset(d).map_err(Error::Plan)?;
        plan.tasks = vec![TaskSpec {
            name: d.split(':').next().unwrap_or(d).to_string(),
            dataset,
            network: None,
        }];
    }
    if args.grad_noise.is_some() || args.epochs.is_some() {
        let mut net = plan.network_for(0);
        if let Some(g) = args.grad_noise {
            net.grad_noise = g;
        }
        if let Some(e) = args.epochs {
            net.epochs = e;
        }
        plan.network = Some(net);
        for t in &mut plan.tasks {
            t.network = None;
        }
    }
    plan.validate()?;
    let records = run_plan(&plan, exec)?;
    let store = BlobStore::new(&args.out);
    for r in &records {
        write_run_record(&store, r)?;
    }
    write_file(&args.out.join("plan.toml"), &plan.to_toml()?)?;
    write_file(&args.out.join("accuracy.csv"), &accuracy_csv(&records))?;
    let masks: usize = records.iter().map(|r| r.steps.len()).sum();
    println!("{}", json!({ "records": records.len(), "masks": masks, "out": args.out }));
    Ok(())
}

fn summarize(mode: &str, step: usize, stats: &[OverlapStat], level: f64) -> Result<serde_json::Value> {
    let mean = stats.iter().map(|s| s.pct).sum::<f64>() / stats.len().max(1) as f64;
    let frac = if stats.is_empty() { None } else { Some(significance_fraction(stats, level)?) };
    Ok(json!({
        "mode": mode,
        "step": step,
        "stats": stats.len(),
        "mean_pct": mean,
        "level": level,
        "significant_fraction": frac,
    }))
}

fn write_overlaps(out: &Path, name: &str, stats: &[OverlapStat], title: &str) -> Result<()> {
    emit_report(stats, &out.join(format!("{name}.csv")))?;
    write_file(&out.join(format!("{name}.json")), &overlap_json(stats)?)?;
    emit_svg(stats, title, &out.join(format!("{name}.svg")))
}

fn cmd_compare(args: CompareArgs, exec: Execution) -> Result<()> {
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(Error::Domain(format!("level {} outside (0, 1)", args.level)));
    }
    let records = load_records(&args.records)?;
    let step = resolve_step(&records, args.step);
    let (name, stats, mut summary) = match args.mode {
        CompareMode::Within => {
            let stats = compare_within_seed(&records, step)?;
            let s = summarize("within", step, &stats, args.level)?;
            ("within", stats, s)
        }
        CompareMode::Across => {
            let stats = compare_across_seeds(&records, step)?;
            let s = summarize("across", step, &stats, args.level)?;
            ("across", stats, s)
        }
        CompareMode::CrossTask => {
            let pairing = match args.pairing {
                Pairing::SameSeed => CrossTaskPairing::SameSeed,
                Pairing::CrossSeed => CrossTaskPairing::CrossSeed,
            };
            let (a, b): (Vec<RunRecord>, Vec<RunRecord>) = match &args.other {
                Some(dir) => (records, load_records(dir)?),
                None => {
                    let first = records[0].task.clone();
                    records.into_iter().partition(|r| r.task == first)
                }
            };
            if b.is_empty() {
                return Err(Error::Plan("cross-task comparison needs a second task (--other)".into()));
            }
            let cmp = compare_across_tasks(&a, &b, step, pairing)?;
            let mut s = summarize("cross-task", step, &cmp.stats, args.level)?;
            s["skipped_layers"] = json!(cmp.skipped_layers);
            ("cross-task", cmp.stats, s)
        }
    };
    if let Some(out) = &args.out {
        write_overlaps(out, &format!("{name}-step{step}"), &stats, &format!("{name} overlap, step {step}"))?;
        if args.mode == CompareMode::Within {
            let records = load_records(&args.records)?;
            write_file(&out.join(format!("shared-never-step{step}.csv")), &shared_never_csv(&shared_and_never_report(&records, step)?))?;
            let sims = similarity_pairs(&within_seed_pairs(&records)?, exec)?;
            write_file(&out.join("similarity.csv"), &similarity_csv(&sims))?;
        }
        summary["out"] = json!(out);
    }
    println!("{summary}");
    Ok(())
}

fn cmd_baseline(args: BaselineArgs, exec: Execution) -> Result<()> {
    let value = match args.model {
        Model::Hypergeom => {
            let m = hypergeom_moments(args.population, args.tau)?;
            let (lo, hi) = significance_interval(args.population, args.tau, args.level)?;
            json!({ "model": "hypergeom", "mean": m.mean, "sigma": m.sigma, "interval": [lo, hi], "level": args.level })
        }
        Model::Shared => {
            let b = shared_all_baseline(args.population, args.tau, args.k)?;
            json!({ "model": "shared", "mean": b.mean, "sigma": b.sigma, "normal_sigma": b.to_normal_approx().sigma })
        }
        Model::Never => {
            let reading = match args.reading {
                Reading::Cumulative => NeverCoveredReading::Cumulative,
                Reading::Literal => NeverCoveredReading::Literal,
            };
            let b = never_covered_baseline_with(args.population, args.tau, args.k, reading)?;
            json!({ "model": "never", "mean": b.mean, "sigma": b.sigma, "normal_sigma": b.to_normal_approx().sigma })
        }
        Model::Mc => {
            let n = usize::try_from(args.population).map_err(|_| Error::Domain("population too large".into()))?;
            let e = monte_carlo_oracle(n, args.tau as usize, args.k as usize, args.trials, args.seed, exec)?;
            json!({ "model": "mc", "estimate": e })
        }
    };
    println!("{value}");
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let records = load_records(&args.records)?;
    let step = resolve_step(&records, args.step);
    write_file(&args.out.join("accuracy.csv"), &accuracy_csv(&records))?;
    write_file(&args.out.join(format!("spearman-step{step}.csv")), &spearman_csv(&spearman_report(&records, step)?))?;
    let mut written = vec!["accuracy", "spearman"];
    if let Ok(stats) = compare_within_seed(&records, step) {
        write_overlaps(&args.out, &format!("within-step{step}"), &stats, &format!("within overlap, step {step}"))?;
        written.push("within");
    }
    if let Ok(stats) = compare_across_seeds(&records, step) {
        write_overlaps(&args.out, &format!("across-step{step}"), &stats, &format!("across overlap, step {step}"))?;
        written.push("across");
    }
    println!("{}", json!({ "step": step, "written": written, "out": args.out }));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a, exec),
        Command::Compare(a) => cmd_compare(a, exec),
        Command::Baseline(a) => cmd_baseline(a, exec),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
