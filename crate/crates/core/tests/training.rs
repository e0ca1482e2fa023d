//! End-to-end training loop behavior on the tiny-random model.

use std::fs;

use persuasion_core::synthetic::{pattern_corpus, PatternSpec};
use persuasion_core::trainer::{CONFIG_FILE, METRICS_FILE, REPORT_FILE};
use persuasion_core::{
    build_model, encode_batch, evaluate, load_checkpoint, lr_at_epoch, train, training_step, Adam,
    ClassWeights, TrainConfig, TrainReport, TINY_RANDOM,
};

fn smoke_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 1e-3,
        batch_size: 8,
        max_epochs: 4,
        max_length: 32,
        ..TrainConfig::default()
    }
}

#[test]
fn loss_falls_on_a_fixed_batch() {
    let corpus = pattern_corpus(&PatternSpec::new(4, 4, 3));
    let mut model = build_model(TINY_RANDOM, 0.1, 0).unwrap();
    let batch = encode_batch(model.segmenter(), &corpus.texts(), 32)
        .unwrap()
        .with_labels(&corpus.labels().unwrap())
        .unwrap();
    let mut adam = Adam::new(model.params().vars(), 1e-3).unwrap();
    let losses: Vec<f64> = (0..30)
        .map(|_| training_step(&mut model, &batch, None, &mut adam).unwrap())
        .collect();
    assert!(losses[29] < losses[0], "{losses:?}");
}

#[test]
fn identical_steps_give_identical_losses() {
    let corpus = pattern_corpus(&PatternSpec::new(4, 4, 8));
    let run = || {
        let mut model = build_model(TINY_RANDOM, 0.1, 17).unwrap();
        let batch = encode_batch(model.segmenter(), &corpus.texts(), 32)
            .unwrap()
            .with_labels(&corpus.labels().unwrap())
            .unwrap();
        let mut adam = Adam::new(model.params().vars(), 1e-3).unwrap();
        let w = ClassWeights::new(0.8, 1.3).unwrap();
        (0..5)
            .map(|_| training_step(&mut model, &batch, Some(&w), &mut adam).unwrap())
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn run_directory_and_report() {
    let train_set = pattern_corpus(&PatternSpec::new(12, 12, 1));
    let dev_set = pattern_corpus(&PatternSpec::new(4, 4, 2));
    let dir = tempfile::tempdir().unwrap();
    let config = smoke_config();
    let run = train(&train_set, &dev_set, &config, TINY_RANDOM, dir.path()).unwrap();
    let report = &run.report;

    assert!(!report.epochs.is_empty() && report.epochs.len() <= config.max_epochs);
    for (i, e) in report.epochs.iter().enumerate() {
        assert_eq!(e.epoch, i + 1);
        assert_eq!(
            e.learning_rate.to_bits(),
            lr_at_epoch(1e-3, 0.85, 2, i).to_bits()
        );
        assert!(e.train_loss.is_finite() && e.dev_loss.is_finite());
        assert!((0.0..=1.0).contains(&e.dev_micro_f1));
    }
    let best = report.best();
    assert!(report.epochs.iter().all(|e| e.dev_loss >= best.dev_loss));
    assert_eq!(report.class_weights, ClassWeights::UNIT);

    let log = fs::read_to_string(dir.path().join(METRICS_FILE)).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines.len(), report.epochs.len());
    for (line, e) in lines.iter().zip(&report.epochs) {
        assert_eq!(*line, e.to_log_line());
    }
    let saved: TrainReport =
        serde_json::from_str(&fs::read_to_string(dir.path().join(REPORT_FILE)).unwrap()).unwrap();
    assert_eq!(&saved, report);
    let config_text = fs::read_to_string(dir.path().join(CONFIG_FILE)).unwrap();
    assert_eq!(config_text, config.to_kv_string());

    // The returned model carries the best weights, as does the checkpoint.
    let eval_mem = evaluate(&run.model, &dev_set, Some(&report.class_weights), 8, 32).unwrap();
    assert_eq!(eval_mem.loss.unwrap().to_bits(), best.dev_loss.to_bits());
    let (loaded, meta) = load_checkpoint(&report.checkpoint_path).unwrap();
    assert_eq!(meta.max_length, 32);
    let eval_disk = evaluate(&loaded, &dev_set, Some(&report.class_weights), 8, 32).unwrap();
    assert_eq!(eval_disk.predictions, eval_mem.predictions);
    assert!((eval_disk.loss.unwrap() - best.dev_loss).abs() < 1e-12);
}

#[test]
fn same_seed_same_metrics_log() {
    let train_set = pattern_corpus(&PatternSpec::new(10, 6, 5));
    let dev_set = pattern_corpus(&PatternSpec::new(3, 3, 6));
    let config = TrainConfig {
        max_epochs: 2,
        ..smoke_config()
    };
    let logs: Vec<String> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            train(&train_set, &dev_set, &config, TINY_RANDOM, dir.path()).unwrap();
            fs::read_to_string(dir.path().join(METRICS_FILE)).unwrap()
        })
        .collect();
    assert_eq!(logs[0], logs[1]);
}

#[test]
fn class_weights_follow_the_switch() {
    let train_set = pattern_corpus(&PatternSpec::new(18, 2, 5));
    let dev_set = pattern_corpus(&PatternSpec::new(3, 3, 6));
    let dir = tempfile::tempdir().unwrap();
    let mut config = TrainConfig {
        max_epochs: 1,
        ..smoke_config()
    };
    let weighted = train(&train_set, &dev_set, &config, TINY_RANDOM, dir.path()).unwrap();
    assert!((weighted.report.class_weights.weight_true - 20.0 / 36.0).abs() < 1e-12);
    assert!((weighted.report.class_weights.weight_false - 5.0).abs() < 1e-12);
    config.use_class_weights = false;
    let plain = train(&train_set, &dev_set, &config, TINY_RANDOM, dir.path()).unwrap();
    assert_eq!(plain.report.class_weights, ClassWeights::UNIT);
}

#[test]
fn rejects_unlabeled_or_empty_input() {
    let labeled = pattern_corpus(&PatternSpec::new(2, 2, 0));
    let unlabeled = persuasion_core::synthetic::unlabeled(&labeled);
    let dir = tempfile::tempdir().unwrap();
    let config = smoke_config();
    assert!(train(&unlabeled, &labeled, &config, TINY_RANDOM, dir.path()).is_err());
    assert!(train(&labeled, &unlabeled, &config, TINY_RANDOM, dir.path()).is_err());
    let empty = persuasion_core::LabeledCorpus::empty();
    assert!(train(&empty, &labeled, &config, TINY_RANDOM, dir.path()).is_err());
}
