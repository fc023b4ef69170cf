//! Cross-thread-count determinism of the experiment harness: the same seed
//! must yield byte-identical CSV, JSON, and SVG artifacts whether replicates
//! run on one thread or many.

use sparsenorm::mc::{
    rate_curve, run_experiment, write_csv, write_json, EstimatorKind, ExperimentConfig, GridSpec,
};
use sparsenorm::models::{CovFamily, SignalShape};

fn config(estimator: EstimatorKind, sparsities: Vec<usize>) -> ExperimentConfig {
    ExperimentConfig {
        experiment_id: "determinism".to_string(),
        estimator,
        grid: GridSpec {
            dims: vec![96],
            sparsities,
            sigmas: vec![0.8, 1.6],
            families: vec![CovFamily::Identity, CovFamily::Ar1 { rho_corr: 0.6 }],
            shapes: vec![SignalShape::Flat],
            norm2_targets: vec![0.0, 7.0],
        },
        replications: 40,
        seed: 2024,
    }
}

fn artifacts(config: &ExperimentConfig, threads: usize) -> (Vec<u8>, Vec<u8>) {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap();
    let summaries = pool.install(|| run_experiment(config)).unwrap();
    let mut csv = Vec::new();
    write_csv(&summaries, &mut csv).unwrap();
    let mut json = Vec::new();
    write_json(config, &summaries, &mut json).unwrap();
    (csv, json)
}

#[test]
fn known_sigma_experiment_is_thread_count_invariant() {
    let config = config(EstimatorKind::NHat, vec![3]);
    let (csv1, json1) = artifacts(&config, 1);
    let (csv4, json4) = artifacts(&config, 4);
    let (csv7, json7) = artifacts(&config, 7);
    assert_eq!(csv1, csv4);
    assert_eq!(csv1, csv7);
    assert_eq!(json1, json4);
    assert_eq!(json1, json7);
}

#[test]
fn adaptive_experiment_is_thread_count_invariant() {
    let config = config(EstimatorKind::NStarStar { eta: 0.3 }, vec![4]);
    let (csv1, json1) = artifacts(&config, 1);
    let (csv8, json8) = artifacts(&config, 8);
    assert_eq!(csv1, csv8);
    assert_eq!(json1, json8);
}

#[test]
fn rate_curve_svg_is_thread_count_invariant() {
    let config = config(EstimatorKind::NHat, vec![2, 4, 8, 16]);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| rate_curve(&config)).unwrap()
    };
    let one = run(1);
    let many = run(6);
    assert_eq!(one.svg, many.svg);
    assert!(one.svg.starts_with("<svg"), "svg payload looks wrong");
}

#[test]
fn rerun_with_same_seed_reproduces_artifacts_exactly() {
    let config = config(EstimatorKind::NTilde { rho: 30.0 }, vec![5]);
    let (csv_a, json_a) = artifacts(&config, 3);
    let (csv_b, json_b) = artifacts(&config, 3);
    assert_eq!(csv_a, csv_b);
    assert_eq!(json_a, json_b);
}
