//! Rater sheet files: `sample_id  task  rater_id  label`, tab-separated.
//! Raters keep the order in which they first appear, which decides voting
//! ties.

use std::fs;
use std::path::Path;

use mtcnn_core::data::Class;
use mtcnn_core::eval::{RaterSheet, TaskSpec};

use crate::error::{Error, Result};

const COLUMNS: &str = "sample_id\ttask\trater_id\tlabel";

pub fn parse_raters(text: &str, origin: &Path) -> Result<Vec<RaterSheet>> {
    let mut sheets: Vec<RaterSheet> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') || line == COLUMNS {
            continue;
        }
        let err = |msg: String| Error::parse(origin, i + 1, msg);
        let fields: Vec<&str> = line.split('\t').collect();
        let [sample, task, rater, label] = fields[..] else {
            return Err(err(format!(
                "expected 4 tab-separated fields, found {}",
                fields.len()
            )));
        };
        let task: TaskSpec = task
            .parse()
            .map_err(|e: mtcnn_core::Error| err(e.to_string()))?;
        let label: Class = label
            .parse()
            .map_err(|e: mtcnn_core::Error| err(e.to_string()))?;
        if task.index_of(label).is_none() {
            return Err(err(format!("label {label} is not a class of task {task}")));
        }
        let idx = match sheets.iter().position(|s| s.rater_id == rater) {
            Some(i) => i,
            None => {
                sheets.push(RaterSheet::new(rater));
                sheets.len() - 1
            }
        };
        if sheets[idx].labels.contains_key(&(sample.to_string(), task)) {
            return Err(err(format!(
                "rater {rater} labels sample {sample} twice for {task}"
            )));
        }
        sheets[idx].insert(sample, task, label);
    }
    Ok(sheets)
}

pub fn read_raters(path: &Path) -> Result<Vec<RaterSheet>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_raters(&text, path)
}
