use alloc::format;
use alloc::string::{String, ToString};
use core::fmt::Write;

use super::fixtures::{PUBLISHED_ACCURACY, PUBLISHED_COLUMNS};
use super::{format_percent, ConfusionMatrix, FixtureReport};

const HEADER: &str = "Classification accuracy\n";

fn table_header(out: &mut String) {
    let _ = writeln!(out, "{:<24} {:<12} {:>9}", "result", "task", "accuracy");
}

/// Plain-text report: an accuracy table followed by one confusion matrix
/// per entry, predicted classes as rows and true classes as columns.
pub fn report(entries: &[(String, ConfusionMatrix)]) -> String {
    let mut out = String::from(HEADER);
    table_header(&mut out);
    for (label, cm) in entries {
        let acc = cm.accuracy().map_or_else(|_| "n/a".into(), format_percent);
        let _ = writeln!(
            out,
            "{:<24} {:<12} {:>9}",
            label,
            cm.task().to_string(),
            acc
        );
    }
    for (label, cm) in entries {
        let _ = write!(
            out,
            "\n{label}, {} (rows: predicted, columns: true)\n",
            cm.task()
        );
        let classes = cm.task().classes();
        let _ = write!(out, "{:>8}", "");
        for c in &classes {
            let _ = write!(out, "{:>8}", c.label());
        }
        out.push('\n');
        for (c, row) in classes.iter().zip(cm.counts()) {
            let _ = write!(out, "{:>8}", c.label());
            for v in row {
                let _ = write!(out, "{v:>8}");
            }
            out.push('\n');
        }
    }
    out
}

/// Machine-readable summary, one `key=value` line per entry:
/// `accuracy.<label>.<task key>=<percent>` plus the sample count.
pub fn summary_lines(entries: &[(String, ConfusionMatrix)]) -> String {
    let mut out = String::new();
    for (label, cm) in entries {
        let key = format!(
            "{}.{}",
            label.replace(char::is_whitespace, "_"),
            cm.task().key()
        );
        if let Ok(acc) = cm.accuracy() {
            let _ = writeln!(out, "accuracy.{key}={}", format_percent(acc));
        }
        let _ = writeln!(out, "samples.{key}={}", cm.total());
    }
    out
}

/// Recomputed accuracies laid out like the published tables, followed by
/// any discrepancy warnings.
pub fn fixtures_report(fixtures: &FixtureReport) -> String {
    let mut out = String::from("Recomputed from embedded confusion matrices\n");
    let _ = writeln!(
        out,
        "{:<12} {:<10} {:>11} {:>10}  status",
        "task", "source", "recomputed", "published"
    );
    for r in &fixtures.rows {
        let _ = writeln!(
            out,
            "{:<12} {:<10} {:>11} {:>10}  {}",
            r.task.to_string(),
            r.source,
            format_percent(r.recomputed),
            format_percent(r.published),
            if r.agrees() { "ok" } else { "MISMATCH" }
        );
    }
    out.push_str("\nPublished accuracy table\n");
    let _ = write!(out, "{:<12}", "task");
    for c in PUBLISHED_COLUMNS {
        let _ = write!(out, " {c:>11}");
    }
    out.push('\n');
    for (task, values) in PUBLISHED_ACCURACY {
        let _ = write!(out, "{:<12}", task.to_string());
        for v in values {
            let _ = write!(out, " {:>11}", format_percent(v));
        }
        out.push('\n');
    }
    if !fixtures.warnings.is_empty() {
        out.push('\n');
        for w in &fixtures.warnings {
            out.push_str(w);
            out.push('\n');
        }
    }
    out
}
