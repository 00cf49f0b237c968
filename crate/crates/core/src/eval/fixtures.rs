//! Published confusion matrices and accuracies, embedded as constants.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{format_percent, ConfusionMatrix, TaskSpec};
use crate::data::Class;
use crate::error::Result;

/// One published confusion matrix, `[predicted][true]`.
#[derive(Debug, Clone, Copy)]
pub struct FixtureMatrix {
    /// Who produced the predictions: `"Voting"` or `"CNN+T+S"`.
    pub source: &'static str,
    pub task: TaskSpec,
    pub counts: &'static [&'static [u64]],
    /// Accuracy printed in the published accuracy table for this cell.
    pub published: f64,
}

const PAIR_0_01: TaskSpec = TaskSpec::Pair(Class::C0, Class::C01);
const PAIR_0_1: TaskSpec = TaskSpec::Pair(Class::C0, Class::C1);
const PAIR_01_1: TaskSpec = TaskSpec::Pair(Class::C01, Class::C1);

pub const FIXTURES: [FixtureMatrix; 8] = [
    // expert majority vote, three classes
    FixtureMatrix {
        source: "Voting",
        task: TaskSpec::ThreeClass,
        counts: &[&[84, 6, 3], &[16, 58, 53], &[0, 36, 44]],
        published: 62.00,
    },
    // expert majority vote, pairs
    FixtureMatrix {
        source: "Voting",
        task: PAIR_0_01,
        counts: &[&[84, 6], &[16, 94]],
        published: 89.00,
    },
    FixtureMatrix {
        source: "Voting",
        task: PAIR_0_1,
        counts: &[&[84, 3], &[16, 97]],
        published: 90.50,
    },
    FixtureMatrix {
        source: "Voting",
        task: PAIR_01_1,
        counts: &[&[75, 70], &[25, 30]],
        published: 51.00,
    },
    // network trained with rotations and sharpening, three classes
    FixtureMatrix {
        source: "CNN+T+S",
        task: TaskSpec::ThreeClass,
        counts: &[&[87, 27, 19], &[10, 58, 28], &[3, 15, 53]],
        published: 66.00,
    },
    FixtureMatrix {
        source: "CNN+T+S",
        task: PAIR_0_01,
        counts: &[&[91, 14], &[9, 86]],
        published: 88.50,
    },
    FixtureMatrix {
        source: "CNN+T+S",
        task: PAIR_0_1,
        counts: &[&[90, 8], &[10, 92]],
        published: 91.00,
    },
    FixtureMatrix {
        source: "CNN+T+S",
        task: PAIR_01_1,
        counts: &[&[71, 30], &[29, 70]],
        published: 70.50,
    },
];

/// Published accuracy table rows per task: expert average, best expert,
/// voting, CNN, CNN+T, CNN+T+S.
pub const PUBLISHED_ACCURACY: [(TaskSpec, [f64; 6]); 4] = [
    (
        TaskSpec::ThreeClass,
        [60.88, 62.67, 62.00, 57.67, 59.00, 66.00],
    ),
    (PAIR_0_01, [88.17, 90.50, 89.00, 79.50, 84.00, 88.50]),
    (PAIR_0_1, [89.34, 93.00, 90.50, 88.00, 90.50, 91.00]),
    (PAIR_01_1, [50.17, 52.00, 51.00, 55.00, 56.00, 70.50]),
];

pub const PUBLISHED_COLUMNS: [&str; 6] = [
    "Average",
    "Best expert",
    "Voting",
    "CNN",
    "CNN+T",
    "CNN+T+S",
];

impl FixtureMatrix {
    pub fn matrix(&self) -> Result<ConfusionMatrix> {
        ConfusionMatrix::from_counts(self.task, self.counts.iter().map(|r| r.to_vec()).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureRow {
    pub source: &'static str,
    pub task: TaskSpec,
    pub recomputed: f64,
    pub published: f64,
}

impl FixtureRow {
    /// Agreement at the published two-decimal precision.
    pub fn agrees(&self) -> bool {
        format_percent(self.recomputed) == format_percent(self.published)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureReport {
    pub rows: Vec<FixtureRow>,
    pub warnings: Vec<String>,
}

/// Recomputes every embedded matrix's accuracy and compares it with the
/// published table. Disagreements become warnings, not errors: the matrix
/// value is reported as is.
pub fn check_fixtures() -> Result<FixtureReport> {
    let mut rows = Vec::with_capacity(FIXTURES.len());
    let mut warnings = Vec::new();
    for f in &FIXTURES {
        let row = FixtureRow {
            source: f.source,
            task: f.task,
            recomputed: f.matrix()?.accuracy()?,
            published: f.published,
        };
        if !row.agrees() {
            warnings.push(format!(
                "WARNING: {} {}: confusion matrix gives {} but the accuracy table reports {}",
                row.source,
                row.task,
                format_percent(row.recomputed),
                format_percent(row.published)
            ));
        }
        rows.push(row);
    }
    Ok(FixtureReport { rows, warnings })
}
