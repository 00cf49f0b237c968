//! Mini-batch training with early stopping, cross-validation and
//! topology search.

mod config;
mod cv;
mod search;

pub use config::{StopReason, TrainConfig};
pub use cv::{cross_validate, CvResult};
pub use search::{sample_config, topology_search, IntRange, SearchResult, SearchSpace};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::data::{augment_rotations, validate_partition, Rotation, Sample};
use crate::error::{Error, Result};
use crate::eval::TaskSpec;
use crate::model::{argmax, build_model, ForwardMode, Model, ModelConfig};
use crate::optim::{l2_accumulate, Nadam};
use crate::pipeline::{examples_for, filter_task, require_nonempty, Example};
use crate::rng::{Prng, Stream};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean cross-entropy plus the L2 penalty, as optimized.
    pub train_loss: f64,
    /// Mean cross-entropy alone.
    pub data_loss: f64,
    /// Percent correct on the training passes of this epoch (dropout active).
    pub train_acc: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub model: ModelConfig,
    pub train_size: usize,
    pub val_size: usize,
    pub epochs: Vec<EpochRecord>,
    /// 1-based index of the epoch whose weights were kept.
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub stop_reason: StopReason,
    /// Filled in by callers that own a clock; never part of the log or
    /// summary text.
    pub wall_time_secs: Option<f64>,
}

impl TrainReport {
    /// Line-oriented log, one line per epoch.
    pub fn to_log(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# train_size={} val_size={}",
            self.train_size, self.val_size
        );
        for e in &self.epochs {
            let _ = writeln!(
                out,
                "epoch={} train_loss={:.6} data_loss={:.6} train_acc={:.2} val_acc={:.2}",
                e.epoch, e.train_loss, e.data_loss, e.train_acc, e.val_acc
            );
        }
        out
    }

    /// `key=value` summary with the full configuration echoed.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "best_epoch={}", self.best_epoch);
        let _ = writeln!(out, "best_val_acc={:.2}", self.best_val_acc);
        let _ = writeln!(out, "stop_reason={}", self.stop_reason);
        let _ = writeln!(out, "epochs_run={}", self.epochs.len());
        let _ = writeln!(out, "train_size={}", self.train_size);
        let _ = writeln!(out, "val_size={}", self.val_size);
        out.push_str(&self.config.to_text());
        for line in self.model.to_text().lines() {
            let _ = writeln!(out, "model.{line}");
        }
        out
    }
}

/// Accumulated result of the forward/backward passes over part of a batch.
struct BatchSums {
    loss: f64,
    correct: usize,
    grads: Option<Vec<Tensor<f32>>>,
}

/// Data loss, whether the prediction was right, and parameter gradients.
type SampleOutcome = (f64, bool, Vec<Tensor<f32>>);

fn sample_pass(
    model: &Model<f32>,
    ex: &Example<f32>,
    rate: f64,
    dropout_index: u64,
    seed: u64,
) -> Result<SampleOutcome> {
    let mut rng = Prng::substream(seed, Stream::Dropout, dropout_index);
    let (loss, grads, probs) = model.loss_and_grads(
        &ex.input,
        ex.target,
        ForwardMode::Train {
            dropout_rate: rate,
            rng: &mut rng,
        },
    )?;
    Ok((loss as f64, argmax(probs.data()) == ex.target, grads))
}

fn threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Sums per-sample losses and gradients in sample order. Parallel passes
/// are computed a chunk at a time and folded in order, so the result is
/// bit-identical to the serial path.
fn batch_sums(
    model: &Model<f32>,
    batch: &[(u64, &Example<f32>)],
    tc: &TrainConfig,
) -> Result<BatchSums> {
    let mut sums = BatchSums {
        loss: 0.0,
        correct: 0,
        grads: None,
    };
    let width = threads().max(1);
    for chunk in batch.chunks(width) {
        let pass = |(idx, ex): &(u64, &Example<f32>)| {
            sample_pass(model, ex, tc.dropout_rate, *idx, tc.seed)
        };
        #[cfg(feature = "parallel")]
        let results: Vec<Result<SampleOutcome>> = if width > 1 {
            use rayon::prelude::*;
            chunk.par_iter().map(pass).collect()
        } else {
            chunk.iter().map(pass).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let results: Vec<Result<SampleOutcome>> = chunk.iter().map(pass).collect();
        for r in results {
            let (loss, correct, grads) = r?;
            sums.loss += loss;
            sums.correct += usize::from(correct);
            match &mut sums.grads {
                None => sums.grads = Some(grads),
                Some(acc) => {
                    for (a, g) in acc.iter_mut().zip(&grads) {
                        a.add_assign(g)?;
                    }
                }
            }
        }
    }
    Ok(sums)
}

fn predictions(model: &Model<f32>, examples: &[Example<f32>]) -> Result<Vec<usize>> {
    #[cfg(feature = "parallel")]
    if threads() > 1 {
        use rayon::prelude::*;
        return examples
            .par_iter()
            .map(|e| model.predict_class(&e.input))
            .collect();
    }
    examples
        .iter()
        .map(|e| model.predict_class(&e.input))
        .collect()
}

/// Percent of `examples` classified correctly at inference.
pub fn accuracy_on(model: &Model<f32>, examples: &[Example<f32>]) -> Result<f64> {
    require_nonempty(examples, "evaluation set")?;
    let preds = predictions(model, examples)?;
    let correct = preds
        .iter()
        .zip(examples)
        .filter(|(p, e)| **p == e.target)
        .count();
    Ok(100.0 * correct as f64 / examples.len() as f64)
}

/// Mean cross-entropy and percent correct at inference, without dropout.
pub fn loss_and_accuracy(model: &Model<f32>, examples: &[Example<f32>]) -> Result<(f64, f64)> {
    require_nonempty(examples, "evaluation set")?;
    let mut loss = 0.0;
    let mut correct = 0;
    for e in examples {
        let logits = model.forward(&e.input, ForwardMode::Infer)?.logits;
        let head = crate::layers::softmax_xent(&logits, e.target)?;
        loss += head.loss as f64;
        correct += usize::from(argmax(head.probs.data()) == e.target);
    }
    Ok((
        loss / examples.len() as f64,
        100.0 * correct as f64 / examples.len() as f64,
    ))
}

/// Trains a fresh model built from `config` on prepared examples.
///
/// Each epoch visits the training set in a seed-derived order in mini-batches
/// (the last one may be partial), then measures validation accuracy. Training
/// stops once validation accuracy has not strictly improved on the best value
/// for `patience_epochs` consecutive epochs, or at `max_epochs`; the weights
/// of the best epoch are returned.
pub fn train(
    config: &ModelConfig,
    tc: &TrainConfig,
    train_set: &[Example<f32>],
    val_set: &[Example<f32>],
) -> Result<(Model<f32>, TrainReport)> {
    train_observed(config, tc, train_set, val_set, &mut |_, _| Ok(()))
}

/// [`train`] with `observer` called after every epoch with the current
/// (not the best) weights. An observer error aborts training.
pub fn train_observed(
    config: &ModelConfig,
    tc: &TrainConfig,
    train_set: &[Example<f32>],
    val_set: &[Example<f32>],
    observer: &mut dyn FnMut(&Model<f32>, &EpochRecord) -> Result<()>,
) -> Result<(Model<f32>, TrainReport)> {
    tc.validate()?;
    require_nonempty(train_set, "training set")?;
    require_nonempty(val_set, "validation set")?;
    let mut config = config.clone();
    config.sharpen = tc.sharpen;
    let classes = config.num_classes;
    if let Some(e) = train_set
        .iter()
        .chain(val_set)
        .find(|e| e.target >= classes)
    {
        return Err(Error::Label {
            class: e.target,
            classes,
        });
    }

    let mut model: Model<f32> = build_model(&config)?;
    let weight_mask = model.weight_mask();
    let mut opt = Nadam::new(tc.nadam(), model.parameters().into_iter().map(|(_, t)| t));
    let mut best = (model.clone(), f64::NEG_INFINITY, 0usize);
    let mut epochs = Vec::new();
    let mut stale = 0;
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=tc.max_epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        Prng::substream(tc.seed, Stream::Shuffle, epoch as u64).shuffle(&mut order);
        let (mut data_loss, mut penalty_sum, mut correct) = (0.0, 0.0, 0);

        for (b, idx) in order.chunks(tc.batch_size).enumerate() {
            let batch: Vec<(u64, &Example<f32>)> = idx
                .iter()
                .enumerate()
                .map(|(j, &i)| {
                    (
                        ((epoch as u64) << 32) | (b * tc.batch_size + j) as u64,
                        &train_set[i],
                    )
                })
                .collect();
            let sums = batch_sums(&model, &batch, tc)?;
            if !sums.loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    loss: sums.loss,
                });
            }
            let mut grads = sums.grads.unwrap_or_default();
            let inv = 1.0 / batch.len() as f32;
            let mut penalty = 0.0;
            for ((g, (_, w)), is_weight) in
                grads.iter_mut().zip(model.parameters()).zip(&weight_mask)
            {
                g.scale(inv);
                if *is_weight {
                    penalty += l2_accumulate(w, tc.l2_lambda, g);
                }
            }
            let mut params = model.parameters_mut();
            opt.step(&mut params, &grads).map_err(|e| match e {
                Error::NonFinite(_) => Error::Divergence {
                    epoch,
                    loss: f64::NAN,
                },
                other => other,
            })?;
            data_loss += sums.loss;
            penalty_sum += penalty * batch.len() as f64;
            correct += sums.correct;
        }

        let n = train_set.len() as f64;
        let val_acc = accuracy_on(&model, val_set)?;
        let record = EpochRecord {
            epoch,
            train_loss: (data_loss + penalty_sum) / n,
            data_loss: data_loss / n,
            train_acc: 100.0 * correct as f64 / n,
            val_acc,
        };
        observer(&model, &record)?;
        epochs.push(record);
        if val_acc > best.1 {
            best = (model.clone(), val_acc, epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale >= tc.patience_epochs {
                stop_reason = StopReason::Patience;
                break;
            }
        }
    }

    let (model, best_val_acc, best_epoch) = best;
    let report = TrainReport {
        config: tc.clone(),
        model: config,
        train_size: train_set.len(),
        val_size: val_set.len(),
        epochs,
        best_epoch,
        best_val_acc,
        stop_reason,
        wall_time_secs: None,
    };
    Ok((model, report))
}

/// Trains on labelled samples for one task. Validates the partition,
/// augments the training side with rotations when configured and prepares
/// both sides at the model's input size.
pub fn train_samples(
    config: &ModelConfig,
    tc: &TrainConfig,
    train_set: &[Sample],
    val_set: &[Sample],
    task: TaskSpec,
) -> Result<(Model<f32>, TrainReport)> {
    if config.num_classes != task.num_classes() {
        return Err(Error::Task(format!(
            "model has {} outputs but task {task} has {} classes",
            config.num_classes,
            task.num_classes()
        )));
    }
    validate_partition(train_set, val_set, &[])?;
    let mut train_set = filter_task(train_set, task);
    if tc.rotations && train_set.iter().all(|s| s.rotation == Rotation::R0) {
        train_set = augment_rotations(&train_set)?;
    }
    let train_ex = examples_for(&train_set, task, config.input_size, tc.sharpen)?;
    let val_ex = examples_for(val_set, task, config.input_size, tc.sharpen)?;
    train(config, tc, &train_ex, &val_ex)
}

#[cfg(test)]
mod tests;
