//! Tab-separated manifest files.
//!
//! ```text
//! # class directories: 0 -> untreated, 0.1 -> low dose, 1 -> high dose
//! #! sharpened=false
//! path    label    group_id    split
//! 0/cell001.pgm    0    0/cell001    train
//! ```
//!
//! Fields are separated by single tabs (shown as spaces above). `#` starts a comment, `#!` a `key=value` directive. Paths are relative to
//! the manifest's directory.

use std::fmt::Write;
use std::fs;
use std::path::Path;

use mtcnn_core::data::{Class, Manifest, ManifestRecord, SplitTag};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const COLUMNS: &str = "path\tlabel\tgroup_id\tsplit";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ManifestFile {
    pub manifest: Manifest,
    /// Images referenced by the manifest are already sharpened.
    pub sharpened: bool,
}

pub fn parse_manifest(text: &str, origin: &Path) -> Result<ManifestFile> {
    let mut out = ManifestFile::default();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |msg: String| Error::parse(origin, line_no, msg);
        let line = raw.trim_end_matches('\r');
        if let Some(directive) = line.strip_prefix("#!") {
            let (k, v) = directive
                .trim()
                .split_once('=')
                .ok_or_else(|| err(format!("directive {directive:?} is not key=value")))?;
            match k.trim() {
                "sharpened" => {
                    out.sharpened = v
                        .trim()
                        .parse()
                        .map_err(|_| err(format!("invalid sharpened flag {v:?}")))?
                }
                "format" => {}
                other => return Err(err(format!("unknown directive {other:?}"))),
            }
            continue;
        }
        if line.trim().is_empty() || line.starts_with('#') || line == COLUMNS {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [path, label, group_id, split] = fields[..] else {
            return Err(err(format!(
                "expected 4 tab-separated fields, found {}",
                fields.len()
            )));
        };
        let label: Class = label
            .parse()
            .map_err(|_| err(format!("unknown label {label:?} (expected 0, 0.1 or 1)")))?;
        let split: SplitTag = split
            .parse()
            .map_err(|e: mtcnn_core::Error| err(e.to_string()))?;
        if path.is_empty() || group_id.is_empty() {
            return Err(err("empty path or group id".into()));
        }
        out.manifest.records.push(ManifestRecord {
            path: path.into(),
            label,
            group_id: group_id.into(),
            split,
        });
    }
    Ok(out)
}

pub fn format_manifest(file: &ManifestFile) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# class directories: 0 -> untreated, 0.1 -> low dose, 1 -> high dose"
    );
    let _ = writeln!(out, "#! format={FORMAT_VERSION}");
    let _ = writeln!(out, "#! sharpened={}", file.sharpened);
    let _ = writeln!(out, "{COLUMNS}");
    for r in &file.manifest.records {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            r.path,
            r.label,
            r.group_id,
            r.split.as_str()
        );
    }
    out
}

pub fn read_manifest(path: &Path) -> Result<ManifestFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, path)
}

pub fn write_manifest(path: &Path, file: &ManifestFile) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, format_manifest(file)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn origin() -> &'static Path {
        Path::new("m.tsv")
    }

    #[test]
    fn round_trip() {
        let file = ManifestFile {
            manifest: Manifest {
                records: vec![
                    ManifestRecord {
                        path: "0/a.pgm".into(),
                        label: Class::C0,
                        group_id: "0/a".into(),
                        split: SplitTag::Train,
                    },
                    ManifestRecord {
                        path: "0.1/b.pgm".into(),
                        label: Class::C01,
                        group_id: "0.1/b".into(),
                        split: SplitTag::Test,
                    },
                ],
            },
            sharpened: true,
        };
        assert_eq!(
            parse_manifest(&format_manifest(&file), origin()).unwrap(),
            file
        );
    }

    #[test]
    fn errors_name_the_line() {
        let e = parse_manifest("# c\na.pgm\t0.5\tg\ttrain\n", origin()).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        assert!(e.to_string().contains("0.5"));
        let e = parse_manifest("a.pgm\t0\tg\n", origin()).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
        let e = parse_manifest("a.pgm\t0\tg\tholdout\n", origin()).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
        assert!(parse_manifest("#! colour=blue\n", origin()).is_err());
    }
}
