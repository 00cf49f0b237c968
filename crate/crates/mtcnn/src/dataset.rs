//! Manifests together with the images they reference.

use std::path::{Component, Path, PathBuf};

use mtcnn_core::data::{validate_manifest, ManifestRecord, Sample, SplitTag};
use rayon::prelude::*;

use crate::error::Result;
use crate::manifest_io::{read_manifest, ManifestFile};
use crate::pgm::load_image;

#[derive(Debug, Clone)]
pub struct Dataset {
    /// Directory the manifest's relative paths start from.
    pub dir: PathBuf,
    pub file: ManifestFile,
}

impl Dataset {
    /// Reads a manifest and checks its split invariants.
    pub fn open(path: &Path) -> Result<Self> {
        let file = read_manifest(path)?;
        validate_manifest(&file.manifest)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { dir, file })
    }

    pub fn resolve(&self, record: &ManifestRecord) -> PathBuf {
        self.dir.join(&record.path)
    }

    pub fn records(&self, splits: &[SplitTag]) -> Vec<&ManifestRecord> {
        self.file
            .manifest
            .records
            .iter()
            .filter(|r| splits.contains(&r.split))
            .collect()
    }

    /// Decodes the images of `records`, in order.
    pub fn load(&self, records: &[&ManifestRecord]) -> Result<Vec<Sample>> {
        records
            .par_iter()
            .map(|r| {
                Ok(Sample {
                    image: load_image(&self.resolve(r))?,
                    label: r.label,
                    group_id: r.group_id.clone(),
                    rotation: r.rotation(),
                    sharpened: self.file.sharpened,
                })
            })
            .collect()
    }
}

fn normalize(p: &Path) -> PathBuf {
    let abs = if p.is_absolute() {
        p.to_path_buf()
    } else {
        std::env::current_dir().unwrap_or_default().join(p)
    };
    let mut out = PathBuf::new();
    for c in abs.components() {
        match c {
            Component::ParentDir => {
                out.pop();
            }
            Component::CurDir => {}
            other => out.push(other),
        }
    }
    out
}

/// `target` written relative to `base_dir` when the two share a directory
/// below the filesystem root, otherwise as an absolute path. Separators are always `/`.
pub fn manifest_path(target: &Path, base_dir: &Path) -> String {
    let (t, b) = (normalize(target), normalize(base_dir));
    let tc: Vec<_> = t.components().collect();
    let bc: Vec<_> = b.components().collect();
    let shared = tc.iter().zip(&bc).take_while(|(x, y)| x == y).count();
    let names = |cs: &[Component]| {
        cs.iter()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
    };
    if shared == 0 || (shared == 1 && t.has_root()) {
        return names(&tc).join("/").replace("//", "/");
    }
    let mut parts = vec!["..".to_string(); bc.len() - shared];
    parts.extend(names(&tc[shared..]));
    parts.join("/")
}
