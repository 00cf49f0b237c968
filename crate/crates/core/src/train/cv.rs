use alloc::vec::Vec;

use super::{train_samples, TrainConfig};
use crate::data::{kfold, Sample};
use crate::error::Result;
use crate::eval::TaskSpec;
use crate::model::ModelConfig;
use crate::pipeline::filter_task;
use crate::rng::{Prng, Stream};
use rand::RngCore;

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub mean: f64,
    pub folds: Vec<f64>,
}

/// k-fold cross-validation. Each fold in turn is the validation set and
/// early-stopping monitor for a model trained on the others; its best
/// validation accuracy is recorded. Rotations, when configured, are applied
/// to the training folds only.
pub fn cross_validate(
    config: &ModelConfig,
    tc: &TrainConfig,
    samples: &[Sample],
    task: TaskSpec,
    k: usize,
) -> Result<CvResult> {
    let samples = filter_task(samples, task);
    let folds = kfold(&samples, k, tc.seed)?;
    let mut accs = Vec::with_capacity(k);
    for i in 0..k {
        let train: Vec<Sample> = folds
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .flat_map(|(_, f)| f.iter().cloned())
            .collect();
        let fold_tc = TrainConfig {
            seed: Prng::substream(tc.seed, Stream::Fold, 1 + i as u64).next_u64(),
            ..tc.clone()
        };
        let (_, report) = train_samples(config, &fold_tc, &train, &folds[i], task)?;
        accs.push(report.best_val_acc);
    }
    let mean = accs.iter().sum::<f64>() / k as f64;
    Ok(CvResult { mean, folds: accs })
}
