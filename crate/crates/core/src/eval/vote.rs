use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{ConfusionMatrix, TaskSpec};
use crate::data::Class;
use crate::error::{Error, Result};

/// One rater's answers, keyed by sample id and task.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RaterSheet {
    pub rater_id: String,
    pub labels: BTreeMap<(String, TaskSpec), Class>,
}

impl RaterSheet {
    pub fn new(rater_id: impl Into<String>) -> Self {
        Self {
            rater_id: rater_id.into(),
            labels: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, sample_id: impl Into<String>, task: TaskSpec, label: Class) {
        self.labels.insert((sample_id.into(), task), label);
    }

    fn for_task(&self, task: TaskSpec) -> Result<BTreeMap<&str, Class>> {
        let mut out = BTreeMap::new();
        for ((id, t), label) in &self.labels {
            if *t != task {
                continue;
            }
            if task.index_of(*label).is_none() {
                return Err(Error::Sheet(format!(
                    "rater {} labels sample {id} as {label}, not a class of task {task}",
                    self.rater_id
                )));
            }
            out.insert(id.as_str(), *label);
        }
        Ok(out)
    }
}

/// Modal label per sample, sorted by sample id. On a tie the earliest
/// rater whose label is among the tied ones decides.
pub fn majority_vote(sheets: &[RaterSheet], task: TaskSpec) -> Result<Vec<(String, Class)>> {
    if sheets.len() < 2 {
        return Err(Error::Sheet(format!(
            "majority voting needs at least 2 raters, got {}",
            sheets.len()
        )));
    }
    let per_rater = sheets
        .iter()
        .map(|s| s.for_task(task))
        .collect::<Result<Vec<_>>>()?;
    let ids: BTreeSet<&str> = per_rater.iter().flat_map(|m| m.keys().copied()).collect();
    let mut out = Vec::with_capacity(ids.len());
    for id in ids {
        let mut votes = Vec::with_capacity(sheets.len());
        for (sheet, labels) in sheets.iter().zip(&per_rater) {
            match labels.get(id) {
                Some(l) => votes.push(*l),
                None => {
                    return Err(Error::Sheet(format!(
                        "rater {} has no {task} label for sample {id}",
                        sheet.rater_id
                    )))
                }
            }
        }
        let count = |c: Class| votes.iter().filter(|v| **v == c).count();
        let top = votes.iter().map(|v| count(*v)).max().unwrap_or(0);
        let winner = votes
            .iter()
            .copied()
            .find(|v| count(*v) == top)
            .expect("at least two votes");
        out.push((String::from(id), winner));
    }
    Ok(out)
}

/// Confusion matrix of predictions against ground truth for one task.
/// Samples whose true class is outside the task are ignored; every other
/// truth entry must have a prediction.
fn matrix_from(
    predictions: impl Fn(&str) -> Option<Class>,
    truth: &BTreeMap<String, Class>,
    task: TaskSpec,
    who: &str,
) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(task);
    for (id, t) in truth {
        let Some(ti) = task.index_of(*t) else {
            continue;
        };
        let p = predictions(id)
            .ok_or_else(|| Error::Sheet(format!("{who} has no {task} label for sample {id}")))?;
        let pi = task.index_of(p).ok_or_else(|| {
            Error::Sheet(format!(
                "{who} labels sample {id} as {p}, not a class of task {task}"
            ))
        })?;
        cm.record(pi, ti);
    }
    Ok(cm)
}

/// Confusion matrix of a single rater against the truth.
pub fn rater_matrix(
    sheet: &RaterSheet,
    truth: &BTreeMap<String, Class>,
    task: TaskSpec,
) -> Result<ConfusionMatrix> {
    let labels = sheet.for_task(task)?;
    matrix_from(|id| labels.get(id).copied(), truth, task, &sheet.rater_id)
}

/// Expert accuracies for one task: mean and best over raters, and the
/// majority vote.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertSummary {
    pub task: TaskSpec,
    pub per_rater: Vec<(String, f64)>,
    pub average: f64,
    pub best: f64,
    pub voting: ConfusionMatrix,
}

pub fn expert_summary(
    sheets: &[RaterSheet],
    truth: &BTreeMap<String, Class>,
    task: TaskSpec,
) -> Result<ExpertSummary> {
    let votes: BTreeMap<String, Class> = majority_vote(sheets, task)?.into_iter().collect();
    let voting = matrix_from(|id| votes.get(id).copied(), truth, task, "majority vote")?;
    let per_rater = sheets
        .iter()
        .map(|s| {
            Ok((
                s.rater_id.clone(),
                rater_matrix(s, truth, task)?.accuracy()?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let average = per_rater.iter().map(|(_, a)| a).sum::<f64>() / per_rater.len() as f64;
    let best = per_rater
        .iter()
        .map(|(_, a)| *a)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ExpertSummary {
        task,
        per_rater,
        average,
        best,
        voting,
    })
}
