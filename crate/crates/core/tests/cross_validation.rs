use rll_core::data::{stratified_folds, Dataset};
use rll_core::eval::{cross_validate, cross_validate_with_folds, sweep_d, sweep_k, EvalConfig, Method};
use rll_core::synth::{generate, SynthConfig};

fn quick() -> EvalConfig {
    EvalConfig {
        hidden: vec![8, 4],
        epochs: 15,
        groups_per_epoch: Some(60),
        ..EvalConfig::default()
    }
}

fn data(n: usize, separation: f64, seed: u64) -> Dataset {
    generate(&SynthConfig {
        n_examples: n,
        feature_dim: 5,
        class_separation: separation,
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

#[test]
fn raw_features_reach_the_ceiling_on_separable_data() {
    let ds = generate(&SynthConfig {
        n_examples: 100,
        feature_dim: 5,
        class_separation: 12.0,
        worker_accuracies: vec![1.0, 0.9, 0.9],
        seed: 1,
        ..SynthConfig::default()
    })
    .unwrap();
    let report = cross_validate(&ds, Method::Raw, &quick()).unwrap();
    assert!(report.mean_accuracy >= 0.98, "{}", report.mean_accuracy);
}

#[test]
fn reports_are_deterministic_and_thread_independent() {
    let ds = data(100, 3.0, 3);
    for method in Method::ALL {
        let a = cross_validate(&ds, method, &quick()).unwrap();
        let b = cross_validate(&ds, method, &quick()).unwrap();
        assert_eq!(a, b, "{method}");
        let threaded = cross_validate(&ds, method, &EvalConfig { threads: 3, ..quick() }).unwrap();
        assert_eq!(a.folds, threaded.folds, "{method}");
    }
}

#[test]
fn five_folds_of_twenty() {
    let ds = data(100, 3.0, 4);
    let report = cross_validate(&ds, Method::Mv, &quick()).unwrap();
    assert_eq!(report.folds.len(), 5);
    assert!(report.folds.iter().all(|f| f.test_size == 20));
    let mean = report.folds.iter().map(|f| f.accuracy).sum::<f64>() / 5.0;
    assert_eq!(report.mean_accuracy, mean);
}

/// Expert labels outside the evaluated fold must not influence anything.
/// Corrupting them, with the fold assignment held fixed, leaves every
/// fold's metrics unchanged.
#[test]
fn training_side_never_reads_expert_labels() {
    let ds = data(80, 3.0, 5);
    let folds = stratified_folds(&ds, 4, 0).unwrap();
    for method in Method::ALL {
        let base = cross_validate_with_folds(&ds, &folds, method, &quick()).unwrap();
        for f in 0..4 {
            let test = folds.test_indices(f);
            let mut examples = ds.examples().to_vec();
            for (i, ex) in examples.iter_mut().enumerate() {
                if !test.contains(&i) {
                    ex.expert_label = ex.expert_label.map(|y| 1 - y);
                }
            }
            let tainted = Dataset::new(examples).unwrap();
            let other = cross_validate_with_folds(&tainted, &folds, method, &quick()).unwrap();
            assert_eq!(base.folds[f], other.folds[f], "{method} fold {f}");
        }
    }
}

#[test]
fn k_sweep_isolates_failures() {
    let ds = data(60, 3.0, 6);
    let reports = sweep_k(&ds, &[5, 2, 500, 3], Method::RllBayes, &quick());
    let ks: Vec<usize> = reports.iter().map(|r| r.sweep.as_ref().unwrap().value).collect();
    assert_eq!(ks, vec![2, 3, 5, 500]);
    assert!(reports[..3].iter().all(|r| !r.is_error()));
    assert!(reports[3].is_error());
    assert_eq!(reports[1].config.k, 3);
}

#[test]
fn d_sweep_truncates_workers() {
    let ds = data(60, 3.0, 7);
    let reports = sweep_d(&ds, &[5, 1, 3], Method::Mv, &quick()).unwrap();
    let ds_: Vec<usize> = reports.iter().map(|r| r.config.d).collect();
    assert_eq!(ds_, vec![1, 3, 5]);
    let full = cross_validate(&ds, Method::Mv, &quick()).unwrap();
    assert_eq!(reports[2].folds, full.folds);
    assert!(sweep_d(&ds, &[6], Method::Mv, &quick()).is_err());
}
