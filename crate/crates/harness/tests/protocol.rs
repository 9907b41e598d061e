use trajspace::dataset::{make_split, Task, TaskSpec};
use trajspace_harness::corpus::Corpus;
use trajspace_harness::model::ModelConfig;
use trajspace_harness::protocol::{
    run_protocol, run_task, task_specs, Checkpoints, PredictorHandle, RowKind, RunOptions,
};
use trajspace_harness::report::{markdown, report, Format};
use trajspace_harness::synthetic::{corpus, SyntheticConfig};
use trajspace_harness::HarnessError;

fn small_corpus() -> Corpus {
    corpus(&SyntheticConfig {
        agents_per_scene: 24,
        ..SyntheticConfig::default()
    })
    .unwrap()
}

fn tiny_model() -> ModelConfig {
    let mut c = ModelConfig::desk();
    c.width = 16;
    c.hidden = 16;
    c.heads = 2;
    c.time_dim = 8;
    c.train.epochs = 3;
    c
}

#[test]
fn domain_adaptation_layout() {
    let c = small_corpus();
    let rows = run_task(
        Task::DomainAdaptation,
        &PredictorHandle::ConstantVelocity,
        &c,
        &RunOptions::default(),
    )
    .unwrap();
    let pairs: Vec<&str> = rows
        .iter()
        .filter(|r| r.kind == RowKind::Split)
        .map(|r| r.scene.as_str())
        .collect();
    let source_avgs: Vec<&str> = rows
        .iter()
        .filter(|r| r.kind == RowKind::SourceAverage)
        .map(|r| r.scene.as_str())
        .collect();
    assert_eq!(pairs.len(), 20);
    assert_eq!(source_avgs, ["A2*", "B2*", "C2*", "D2*", "E2*"]);
    // the 25 table cells per metric: four pairs and one mean per source
    assert_eq!(pairs.len() + source_avgs.len(), 25);
    assert_eq!(&pairs[..4], ["A2B", "A2C", "A2D", "A2E"]);
    assert!(pairs.iter().all(|p| p.as_bytes()[0] != p.as_bytes()[2]));
    let last = rows.last().unwrap();
    assert_eq!((last.kind, last.scene.as_str()), (RowKind::Average, "AVG"));
    assert_eq!(rows.len(), 26);
    assert!(rows.iter().all(|r| r.samples == 1));
}

#[test]
fn leave_one_out_rows_and_table_order() {
    let c = small_corpus();
    let rows = run_task(
        Task::Stochastic,
        &PredictorHandle::ConstantVelocity,
        &c,
        &RunOptions::default(),
    )
    .unwrap();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[5].kind, RowKind::Average);
    assert!(rows
        .iter()
        .all(|r| r.samples == 20 && r.ade >= 0.0 && r.fde >= 0.0));
    let header = markdown(&rows).unwrap().lines().next().unwrap().to_string();
    assert_eq!(
        header,
        "| Stochastic | SYN1 | SYN2 | SYN3 | SYN4 | SYN5 | AVG |"
    );
}

#[test]
fn few_shot_keeps_a_tenth() {
    let c = small_corpus();
    for spec in task_specs(Task::FewShot, &c.order, 7).unwrap() {
        let windows = c.windows(&spec);
        let full = TaskSpec {
            train_fraction: 1.0,
            ..spec.clone()
        };
        let (all, _) = make_split(&full, &windows).unwrap();
        let (kept, test) = make_split(&spec, &windows).unwrap();
        assert_eq!(kept.len(), all.len() / 10);
        let (_, full_test) = make_split(&full, &windows).unwrap();
        assert_eq!(test.len(), full_test.len());
    }
}

#[test]
fn momentary_windows_have_two_observed_frames() {
    let c = small_corpus();
    for spec in task_specs(Task::Momentary, &c.order, 0).unwrap() {
        assert_eq!(spec.t_hist, 2);
        let (train, test) = make_split(&spec, &c.windows(&spec)).unwrap();
        assert!(!train.is_empty() && !test.is_empty());
        assert!(train
            .iter()
            .chain(&test)
            .all(|w| w.hist.len() == 2 && w.fut.len() == 12));
    }
}

#[test]
fn constant_velocity_is_exact_on_straight_noise_free_walkers() {
    let c = corpus(&SyntheticConfig {
        agents_per_scene: 24,
        noise: 0.0,
        turn_share: 0.0,
        ..SyntheticConfig::default()
    })
    .unwrap();
    for task in Task::ALL {
        let rows = run_task(
            task,
            &PredictorHandle::ConstantVelocity,
            &c,
            &RunOptions::default(),
        )
        .unwrap();
        for r in rows {
            assert!(
                r.ade < 1e-9 && r.fde < 1e-9,
                "{task:?} {}: {} / {}",
                r.scene,
                r.ade,
                r.fde
            );
        }
    }
}

#[test]
fn same_seeds_same_numbers() {
    let c = small_corpus();
    let spec = task_specs(Task::Stochastic, &c.order, 0).unwrap().remove(2);
    let handle = PredictorHandle::AnchorDiffusion {
        config: tiny_model(),
        checkpoints: Checkpoints::Train,
    };
    let opts = RunOptions {
        split_seed: 3,
        sample_seed: 9,
        config_hash: "h".into(),
    };
    let a = run_protocol(&spec, &handle, &c, &opts).unwrap();
    let b = run_protocol(&spec, &handle, &c, &opts).unwrap();
    assert_eq!(a, b);
    assert_eq!(a[0].ade.to_bits(), b[0].ade.to_bits());
}

#[test]
fn saved_models_reload_to_the_same_scores() {
    let c = small_corpus();
    let spec = task_specs(Task::Deterministic, &c.order, 0)
        .unwrap()
        .remove(0);
    let dir = std::env::temp_dir().join(format!("trajspace-ckpt-{}", std::process::id()));
    let opts = RunOptions::default();
    let trained = run_protocol(
        &spec,
        &PredictorHandle::AnchorDiffusion {
            config: tiny_model(),
            checkpoints: Checkpoints::TrainAndSave(dir.clone()),
        },
        &c,
        &opts,
    )
    .unwrap();
    let loaded = run_protocol(
        &spec,
        &PredictorHandle::AnchorDiffusion {
            config: tiny_model(),
            checkpoints: Checkpoints::Load(dir.clone()),
        },
        &c,
        &opts,
    )
    .unwrap();
    std::fs::remove_dir_all(&dir).ok();
    assert_eq!(trained, loaded);
}

#[test]
fn missing_checkpoint_is_an_error() {
    let c = small_corpus();
    let spec = task_specs(Task::Stochastic, &c.order, 0).unwrap().remove(0);
    let handle = PredictorHandle::AnchorDiffusion {
        config: tiny_model(),
        checkpoints: Checkpoints::Load("/nonexistent/trajspace-models".into()),
    };
    let err = run_protocol(&spec, &handle, &c, &RunOptions::default()).unwrap_err();
    assert!(matches!(err, HarnessError::MissingCheckpoint(_)), "{err}");
}

#[test]
fn report_refuses_empty_and_writes_all_formats() {
    let dir = std::env::temp_dir().join(format!("trajspace-report-{}", std::process::id()));
    assert!(matches!(
        report(&[], Format::All, &dir),
        Err(HarnessError::EmptyResults)
    ));
    let c = small_corpus();
    let rows = run_task(
        Task::Deterministic,
        &PredictorHandle::ConstantVelocity,
        &c,
        &RunOptions::default(),
    )
    .unwrap();
    let written = report(&rows, Format::All, &dir).unwrap();
    assert_eq!(written.len(), 3);
    let csv = std::fs::read_to_string(dir.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), rows.len() + 1);
    std::fs::remove_dir_all(&dir).ok();
}
