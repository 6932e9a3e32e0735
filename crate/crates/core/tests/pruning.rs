use std::sync::Arc;

use proptest::prelude::*;
use ticket_lab::io::{synth_blobs_task, weights_hash, TaskData};
use ticket_lab::nn::{init_weights, Architecture, NetworkConfig};
use ticket_lab::pruning::{iterative_lottery, large_final_mask, prune_step, PruneSchedule};
use ticket_lab::rng::{regime_free, regime_full, regime_partial, RandomStream};
use ticket_lab::runner::{run_plan, DatasetSpec, ExperimentPlan, TaskSpec};
use ticket_lab::Execution;

fn data() -> TaskData {
    synth_blobs_task("blobs", 4, 30, 20, 16, 1.0, &RandomStream::new(0, "data")).unwrap()
}

fn config() -> NetworkConfig {
    NetworkConfig {
        epochs: 2,
        grad_noise: 0.1,
        ..NetworkConfig::new(Architecture::mlp(16, &[25], 4))
    }
}

#[test]
fn standard_schedule_keeps_exact_counts_and_nests() {
    let config = config();
    let init = Arc::new(init_weights(&config, 11).unwrap());
    let schedule = PruneSchedule::standard();
    let rec = iterative_lottery(&config, Arc::clone(&init), &data(), &schedule, &regime_free(11), 0).unwrap();
    assert_eq!(rec.steps.len(), 6);
    let expected_keep = [50.0, 40.0, 20.0, 10.0, 5.0, 2.0];
    for (s, step) in rec.steps.iter().enumerate() {
        for layer in step.mask.layers() {
            let pct = 100.0 * layer.tau() as f64 / layer.len() as f64;
            let one_weight = 100.0 / layer.len() as f64;
            assert!((pct - expected_keep[s]).abs() <= one_weight, "step {s}: {pct}%");
        }
        if s > 0 {
            assert!(step.mask.is_subset_of(&rec.steps[s - 1].mask));
        }
    }
    // dense0 holds 400 weights: ⌈0.02·400⌉ = 8.
    assert_eq!(rec.steps[5].mask.layer(0).tau(), 8);
}

#[test]
fn every_round_restarts_from_init() {
    let config = config();
    let init = Arc::new(init_weights(&config, 2).unwrap());
    let rec = iterative_lottery(&config, Arc::clone(&init), &data(), &"50,80".parse().unwrap(), &regime_free(2), 1)
        .unwrap();
    assert_eq!(rec.init_hash, weights_hash(&init_weights(&config, 2).unwrap()));
    for step in &rec.steps {
        for l in 0..init.layer_count() {
            for i in 0..init.layer(l).len() {
                if !step.mask.layer(l).get(i) {
                    assert_eq!(step.trained.layer(l).data()[i].to_bits(), init.layer(l).data()[i].to_bits());
                }
            }
        }
    }
}

#[test]
fn regimes_order_run_agreement() {
    let config = config();
    let init = Arc::new(init_weights(&config, 4).unwrap());
    let schedule: PruneSchedule = "50,80".parse().unwrap();
    let d = data();
    let run = |policy, id| iterative_lottery(&config, Arc::clone(&init), &d, &schedule, &policy, id).unwrap();
    let (f0, f1) = (run(regime_full(4), 0), run(regime_full(4), 1));
    assert_eq!(f0.steps, f1.steps);
    let (p0, p1) = (run(regime_partial(4), 0), run(regime_partial(4), 1));
    assert_ne!(p0.steps[1].mask, p1.steps[1].mask);
    let (r0, r1) = (run(regime_free(4), 0), run(regime_free(4), 1));
    assert_ne!(r0.steps[1].mask, r1.steps[1].mask);
}

#[test]
fn prune_step_beyond_schedule_fails() {
    let config = config();
    let w = init_weights(&config, 0).unwrap();
    let full = w.architecture().full_mask();
    let schedule: PruneSchedule = "50".parse().unwrap();
    assert!(prune_step(&full, &w, &schedule, 1).is_err());
    assert!(large_final_mask(&w, &[0.5]).is_err());
}

#[test]
fn plan_shares_init_within_seed() {
    let plan = ExperimentPlan {
        seeds: vec![0, 1],
        runs: 2,
        network: Some(config()),
        schedule: "50,80,90".parse().unwrap(),
        tasks: vec![TaskSpec {
            name: "b".into(),
            dataset: DatasetSpec::Blobs {
                classes: 4,
                train_per_class: 20,
                test_per_class: 10,
                dims: 16,
                spread: 1.0,
                seed: 0,
            },
            network: None,
        }],
        ..Default::default()
    };
    let seq = run_plan(&plan, Execution::Sequential).unwrap();
    assert_eq!(seq.len(), 4);
    assert_eq!(seq.iter().map(|r| r.steps.len()).sum::<usize>(), 12);
    assert_eq!(seq[0].init_hash, seq[1].init_hash);
    assert!(Arc::ptr_eq(&seq[0].init, &seq[1].init));
    assert_ne!(seq[0].init_hash, seq[2].init_hash);
    let par = run_plan(&plan, Execution::Parallel).unwrap();
    assert_eq!(seq, par);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kept_count_is_ceiling(p in 0.0f64..99.9, n in 1usize..20_000) {
        let s = PruneSchedule::new(vec![p]).unwrap();
        let k = s.kept_count(0, n).unwrap();
        let exact = (100.0 - p) / 100.0 * n as f64;
        prop_assert!(k as f64 >= exact - 1e-9 && (k as f64) < exact + 1.0);
    }

    #[test]
    fn large_final_keeps_top_magnitudes(values in prop::collection::vec(-1.0f64..1.0, 4..60), keep in 0.05f64..1.0) {
        let arch = Architecture::mlp(values.len(), &[], 1);
        let mut w = ticket_lab::nn::Weights::zeros(&arch);
        w.layer_mut(0).data_mut().copy_from_slice(&values);
        let m = large_final_mask(&w, &[keep]).unwrap();
        let layer = m.layer(0);
        let min_kept = layer.kept_indices().iter().map(|&i| values[i].abs()).fold(f64::INFINITY, f64::min);
        for (i, v) in values.iter().enumerate() {
            if !layer.get(i) {
                prop_assert!(v.abs() <= min_kept);
            }
        }
    }
}
