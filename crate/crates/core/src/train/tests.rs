use super::*;
use crate::data::{Class, GrayImage};
use crate::model::LayerSpec;
use alloc::vec;

fn tiny(classes: usize) -> ModelConfig {
    ModelConfig {
        input_size: 8,
        layers: vec![
            LayerSpec::Conv {
                filters: 4,
                kernel: 3,
                stride: 1,
            },
            LayerSpec::MaxPool {
                window: 2,
                stride: 2,
            },
            LayerSpec::Flatten,
            LayerSpec::Dense {
                units: 8,
                dropout: true,
            },
            LayerSpec::Dense {
                units: classes,
                dropout: false,
            },
        ],
        num_classes: classes,
        seed: 3,
        sharpen: false,
    }
}

/// 8x8 noise images whose top-left pixel alone encodes the class.
fn one_pixel_samples(per_class: usize, seed: u64) -> Vec<Sample> {
    let mut rng = Prng::new(seed);
    let mut out = Vec::new();
    for (ci, class) in [Class::C0, Class::C1].into_iter().enumerate() {
        for i in 0..per_class {
            let mut px: Vec<u8> = (0..64).map(|_| rng.below(40) as u8).collect();
            px[0] = if ci == 0 { 0 } else { 255 };
            out.push(Sample {
                image: GrayImage::new(8, 8, px).unwrap(),
                label: class,
                group_id: format!("{class}-{i}"),
                rotation: Rotation::R0,
                sharpened: false,
            });
        }
    }
    out
}

fn examples(n: usize, seed: u64) -> Vec<Example<f32>> {
    let task = TaskSpec::Pair(Class::C0, Class::C1);
    examples_for(&one_pixel_samples(n, seed), task, 8, false).unwrap()
}

fn quick() -> TrainConfig {
    TrainConfig {
        dropout_rate: 0.0,
        l2_lambda: 0.0,
        lr: 0.01,
        batch_size: 8,
        max_epochs: 30,
        seed: 11,
        ..TrainConfig::default()
    }
}

#[test]
fn frozen_model_stops_after_patience_plus_one() {
    let tc = TrainConfig {
        lr: 0.0,
        ..TrainConfig::default()
    };
    let (_, report) = train(&tiny(2), &tc, &examples(10, 1), &examples(4, 2)).unwrap();
    assert_eq!(report.epochs.len(), tc.patience_epochs + 1);
    assert_eq!(report.stop_reason, StopReason::Patience);
    assert_eq!(report.best_epoch, 1);
    let v0 = report.epochs[0].val_acc;
    assert!(report.epochs.iter().all(|e| e.val_acc == v0));
}

#[test]
fn best_epoch_weights_are_returned() {
    let (tr, val) = (examples(16, 1), examples(6, 2));
    let tc = TrainConfig {
        max_epochs: 8,
        patience_epochs: 3,
        ..quick()
    };
    let (model, report) = train(&tiny(2), &tc, &tr, &val).unwrap();
    let max = report
        .epochs
        .iter()
        .map(|e| e.val_acc)
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(report.best_val_acc, max);
    assert_eq!(report.epochs[report.best_epoch - 1].val_acc, max);
    assert_eq!(accuracy_on(&model, &val).unwrap(), max);
    assert!(report
        .epochs
        .iter()
        .all(|e| (0.0..=100.0).contains(&e.val_acc) && (0.0..=100.0).contains(&e.train_acc)));
}

#[test]
fn learns_one_pixel_rule() {
    let (model, report) = train(&tiny(2), &quick(), &examples(16, 1), &examples(8, 2)).unwrap();
    assert_eq!(report.best_val_acc, 100.0, "{}", report.to_log());
    assert_eq!(accuracy_on(&model, &examples(10, 3)).unwrap(), 100.0);
}

#[test]
fn deterministic_reports() {
    let tc = TrainConfig {
        max_epochs: 4,
        dropout_rate: 0.5,
        ..quick()
    };
    let run = || train(&tiny(2), &tc, &examples(12, 1), &examples(4, 2)).unwrap();
    let (m1, r1) = run();
    let (m2, r2) = run();
    assert_eq!(r1.to_log(), r2.to_log());
    assert_eq!(r1.summary(), r2.summary());
    assert_eq!(m1, m2);
    let other = TrainConfig {
        seed: 12,
        ..tc.clone()
    };
    let (m3, _) = train(&tiny(2), &other, &examples(12, 1), &examples(4, 2)).unwrap();
    assert_ne!(m1, m3);
}

#[test]
fn summary_keys() {
    let tc = TrainConfig {
        max_epochs: 1,
        ..quick()
    };
    let (_, r) = train(&tiny(2), &tc, &examples(4, 1), &examples(2, 2)).unwrap();
    let s = r.summary();
    for key in [
        "best_epoch=1",
        "best_val_acc=",
        "stop_reason=max_epochs",
        "lr=0.01",
        "model.input_size=8",
    ] {
        assert!(s.contains(key), "{key} missing from\n{s}");
    }
    assert_eq!(r.to_log().lines().count(), 2);
}

#[test]
fn errors() {
    let tr = examples(4, 1);
    assert!(matches!(
        train(&tiny(2), &quick(), &tr, &[]),
        Err(Error::Config(_))
    ));
    assert!(matches!(
        train(&tiny(2), &quick(), &[], &tr),
        Err(Error::Config(_))
    ));
    let exploding = TrainConfig {
        lr: 1e30,
        batch_size: 2,
        ..quick()
    };
    let err = train(&tiny(2), &exploding, &tr, &tr).unwrap_err();
    assert!(matches!(err, Error::Divergence { epoch: 1, .. }), "{err:?}");
    let mut wrong = tr.clone();
    wrong[0].target = 2;
    assert!(matches!(
        train(&tiny(2), &quick(), &wrong, &tr),
        Err(Error::Label { .. })
    ));
}

#[test]
fn rotations_quadruple_training_side_only() {
    let all = one_pixel_samples(6, 4);
    let (tr, val) = crate::data::group_split(&all, 0.34, 1).unwrap();
    let tc = TrainConfig {
        rotations: true,
        max_epochs: 1,
        ..quick()
    };
    let task = TaskSpec::Pair(Class::C0, Class::C1);
    let (_, r) = train_samples(&tiny(2), &tc, &tr, &val, task).unwrap();
    assert_eq!(r.train_size, 4 * tr.len());
    assert_eq!(r.val_size, val.len());
    // leaked group refused
    let mut leaky = val.clone();
    leaky.push(tr[0].clone());
    assert!(matches!(
        train_samples(&tiny(2), &tc, &tr, &leaky, task),
        Err(Error::Leakage(_))
    ));
    assert!(matches!(
        train_samples(&tiny(3), &tc, &tr, &val, task),
        Err(Error::Task(_))
    ));
}

#[test]
fn cross_validation_on_separable_data() {
    let samples = one_pixel_samples(15, 5);
    let task = TaskSpec::Pair(Class::C0, Class::C1);
    let tc = TrainConfig {
        patience_epochs: 4,
        ..quick()
    };
    let cv = cross_validate(&tiny(2), &tc, &samples, task, 3).unwrap();
    assert_eq!(cv.folds, vec![100.0; 3]);
    assert!((cv.mean - cv.folds.iter().sum::<f64>() / 3.0).abs() < 1e-9);
    assert_eq!(
        cross_validate(&tiny(2), &tc, &samples, task, 3).unwrap(),
        cv
    );
    assert!(matches!(
        cross_validate(&tiny(2), &tc, &samples, task, 20),
        Err(Error::Fold(_))
    ));
}

#[test]
fn search_with_budget_one() {
    let mut samples = one_pixel_samples(4, 6);
    for s in &mut samples {
        s.image = crate::data::resize_square(&s.image, 100).unwrap();
    }
    let space = SearchSpace {
        conv_layers: IntRange::fixed(1),
        use_maxpool: vec![true],
        filters: vec![IntRange::new(8, 9)],
        kernel: vec![IntRange::new(2, 3)],
        fc_layers: IntRange::fixed(1),
        fc_size: vec![IntRange::new(16, 17)],
        input_size: IntRange::fixed(100),
        max_params: 2_000_000,
    };
    let tc = TrainConfig {
        max_epochs: 1,
        ..quick()
    };
    let task = TaskSpec::Pair(Class::C0, Class::C1);
    let res = topology_search(&space, &tc, &samples, task, 1, 9, 2).unwrap();
    assert_eq!(res.len(), 1);
    res[0].config.check_search_bounds().unwrap();
    assert_eq!(res[0].folds.len(), 2);
    let res2 = topology_search(&space, &tc, &samples, task, 2, 9, 2).unwrap();
    assert!(res2[0].mean >= res2[1].mean);
}
