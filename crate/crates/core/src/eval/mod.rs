//! Classification tasks, confusion matrices and the statistics built on them.

mod fixtures;
mod report;
mod stats;
mod vote;

pub use fixtures::{check_fixtures, FixtureMatrix, FixtureReport, FixtureRow, FIXTURES};
pub use report::{fixtures_report, report, summary_lines};
pub use stats::{two_proportion_test, ZTest};
pub use vote::{expert_summary, majority_vote, rater_matrix, ExpertSummary, RaterSheet};

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::data::{Class, Sample};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::pipeline::{examples_for, Example};

/// One of the four recognition tasks: all three classes, or one pair with
/// samples of the third class ignored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TaskSpec {
    ThreeClass,
    Pair(Class, Class),
}

impl TaskSpec {
    pub const ALL: [TaskSpec; 4] = [
        TaskSpec::ThreeClass,
        TaskSpec::Pair(Class::C0, Class::C01),
        TaskSpec::Pair(Class::C0, Class::C1),
        TaskSpec::Pair(Class::C01, Class::C1),
    ];

    /// Pair task with classes in canonical order.
    pub fn pair(a: Class, b: Class) -> Result<Self> {
        if a == b {
            return Err(Error::Task(format!(
                "pair classes must differ, got {a} twice"
            )));
        }
        Ok(TaskSpec::Pair(a.min(b), a.max(b)))
    }

    pub fn classes(&self) -> Vec<Class> {
        match *self {
            TaskSpec::ThreeClass => Class::ALL.to_vec(),
            TaskSpec::Pair(a, b) => vec![a, b],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.classes().len()
    }

    /// Output index of `class` within this task, `None` when it is ignored.
    pub fn index_of(&self, class: Class) -> Option<usize> {
        self.classes().iter().position(|c| *c == class)
    }

    pub fn class_at(&self, index: usize) -> Option<Class> {
        self.classes().get(index).copied()
    }

    /// Short identifier used in files and on the command line.
    pub fn key(&self) -> String {
        match *self {
            TaskSpec::ThreeClass => "3class".into(),
            TaskSpec::Pair(a, b) => format!("{a}v{b}"),
        }
    }
}

impl fmt::Display for TaskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskSpec::ThreeClass => f.write_str("3 classes"),
            TaskSpec::Pair(a, b) => write!(f, "{a} vs {b}"),
        }
    }
}

impl FromStr for TaskSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "3class" || s == "3 classes" {
            return Ok(TaskSpec::ThreeClass);
        }
        let (a, b) = s
            .split_once(" vs ")
            .or_else(|| s.split_once('v'))
            .ok_or_else(|| Error::Parse(format!("unknown task {s:?}")))?;
        let pair = TaskSpec::pair(a.parse()?, b.parse()?)?;
        Ok(pair)
    }
}

/// Counts indexed `[predicted][true]` over a task's classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    task: TaskSpec,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(task: TaskSpec) -> Self {
        let k = task.num_classes();
        Self {
            task,
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn from_counts(task: TaskSpec, counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = task.num_classes();
        if counts.len() != k || counts.iter().any(|r| r.len() != k) {
            return Err(Error::Task(format!("{task} needs a {k}x{k} matrix")));
        }
        Ok(Self { task, counts })
    }

    pub fn task(&self) -> TaskSpec {
        self.task
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn record(&mut self, predicted: usize, truth: usize) {
        self.counts[predicted][truth] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    /// Number of evaluated samples whose true class is `truth`.
    pub fn column_total(&self, truth: usize) -> u64 {
        self.counts.iter().map(|r| r[truth]).sum()
    }

    /// Percentage of correct predictions, unrounded.
    pub fn accuracy(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::EmptyMatrix);
        }
        Ok(100.0 * self.trace() as f64 / total as f64)
    }
}

/// Percentage with exactly two decimals.
pub fn format_percent(value: f64) -> String {
    format!("{value:.2}")
}

/// Confusion matrix of `model` on prepared examples whose targets are task
/// indices.
pub fn evaluate_examples(
    model: &Model<f32>,
    examples: &[Example<f32>],
    task: TaskSpec,
) -> Result<ConfusionMatrix> {
    if model.config().num_classes != task.num_classes() {
        return Err(Error::Task(format!(
            "model has {} outputs but task {task} has {} classes",
            model.config().num_classes,
            task.num_classes()
        )));
    }
    let mut cm = ConfusionMatrix::new(task);
    for ex in examples {
        cm.record(model.predict_class(&ex.input)?, ex.target);
    }
    Ok(cm)
}

/// Evaluates a trained model on test samples. Pair tasks skip samples whose
/// true class is outside the pair. Images are resized to the model input and
/// sharpened when the model was trained on sharpened data.
pub fn evaluate(
    model: &Model<f32>,
    test_set: &[Sample],
    task: TaskSpec,
) -> Result<ConfusionMatrix> {
    if model.config().num_classes != task.num_classes() {
        return Err(Error::Task(format!(
            "model has {} outputs but task {task} has {} classes",
            model.config().num_classes,
            task.num_classes()
        )));
    }
    let examples = examples_for(
        test_set,
        task,
        model.config().input_size,
        model.config().sharpen,
    )?;
    evaluate_examples(model, &examples, task)
}
