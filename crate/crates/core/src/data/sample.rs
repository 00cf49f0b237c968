//! Labelled samples, manifests and the leakage invariants between splits.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use super::image::GrayImage;
use crate::error::{Error, Result};

/// Treatment class: untreated, low and high agent concentration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Class {
    C0,
    C01,
    C1,
}

impl Class {
    pub const ALL: [Class; 3] = [Class::C0, Class::C01, Class::C1];

    /// Label as written in manifests and directory names.
    pub fn label(self) -> &'static str {
        match self {
            Class::C0 => "0",
            Class::C01 => "0.1",
            Class::C1 => "1",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Class {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "0" => Ok(Class::C0),
            "0.1" => Ok(Class::C01),
            "1" => Ok(Class::C1),
            other => Err(Error::Parse(format!("unknown class label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Rotation {
    #[default]
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    pub const ALL: [Rotation; 4] = [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270];

    pub fn quarter_turns(self) -> u8 {
        self as u8
    }

    pub fn degrees(self) -> u16 {
        self as u16 * 90
    }

    /// File-stem suffix used for rotated copies on disk, e.g. `_rot90`.
    pub fn path_suffix(self) -> &'static str {
        match self {
            Rotation::R0 => "",
            Rotation::R90 => "_rot90",
            Rotation::R180 => "_rot180",
            Rotation::R270 => "_rot270",
        }
    }

    /// Rotation encoded in a path's file stem; unsuffixed paths are originals.
    pub fn from_path(path: &str) -> Self {
        let name = path.rsplit(['/', '\\']).next().unwrap_or(path);
        let stem = name.rsplit_once('.').map_or(name, |(s, _)| s);
        [Rotation::R90, Rotation::R180, Rotation::R270]
            .into_iter()
            .find(|r| stem.ends_with(r.path_suffix()))
            .unwrap_or(Rotation::R0)
    }
}

/// One image with its bookkeeping. All rotations of a source image share
/// its `group_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: GrayImage,
    pub label: Class,
    pub group_id: String,
    pub rotation: Rotation,
    pub sharpened: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SplitTag {
    Train,
    Val,
    Test,
    Unassigned,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Val => "val",
            SplitTag::Test => "test",
            SplitTag::Unassigned => "unassigned",
        }
    }
}

impl FromStr for SplitTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitTag::Train),
            "val" => Ok(SplitTag::Val),
            "test" => Ok(SplitTag::Test),
            "unassigned" => Ok(SplitTag::Unassigned),
            other => Err(Error::Parse(format!("unknown split tag {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRecord {
    pub path: String,
    pub label: Class,
    pub group_id: String,
    pub split: SplitTag,
}

impl ManifestRecord {
    pub fn rotation(&self) -> Rotation {
        Rotation::from_path(&self.path)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    /// Lexicographic path order, which split and fold operations assume.
    pub fn sort(&mut self) {
        self.records.sort_by(|a, b| a.path.cmp(&b.path));
    }

    pub fn with_split(&self, split: SplitTag) -> Vec<&ManifestRecord> {
        self.records.iter().filter(|r| r.split == split).collect()
    }
}

/// Anything carrying a group id and a class label.
pub trait Grouped {
    fn group_id(&self) -> &str;
    fn label(&self) -> Class;
    fn rotation(&self) -> Rotation;
}

impl Grouped for Sample {
    fn group_id(&self) -> &str {
        &self.group_id
    }
    fn label(&self) -> Class {
        self.label
    }
    fn rotation(&self) -> Rotation {
        self.rotation
    }
}

impl Grouped for ManifestRecord {
    fn group_id(&self) -> &str {
        &self.group_id
    }
    fn label(&self) -> Class {
        self.label
    }
    fn rotation(&self) -> Rotation {
        ManifestRecord::rotation(self)
    }
}

fn check<'a, G: Grouped + 'a>(items: impl IntoIterator<Item = (&'a G, SplitTag)>) -> Result<()> {
    #[derive(Default)]
    struct Seen {
        label: Option<Class>,
        train: bool,
        val: bool,
        test: bool,
    }
    let mut groups: BTreeMap<&str, Seen> = BTreeMap::new();
    for (item, split) in items {
        let seen = groups.entry(item.group_id()).or_default();
        match seen.label {
            Some(l) if l != item.label() => {
                return Err(Error::Leakage(format!(
                    "group {} mixes labels {l} and {}",
                    item.group_id(),
                    item.label()
                )))
            }
            _ => seen.label = Some(item.label()),
        }
        match split {
            SplitTag::Train => seen.train = true,
            SplitTag::Val => seen.val = true,
            SplitTag::Test => {
                seen.test = true;
                if item.rotation() != Rotation::R0 {
                    return Err(Error::Leakage(format!(
                        "rotated image ({} degrees) of group {} in the test split",
                        item.rotation().degrees(),
                        item.group_id()
                    )));
                }
            }
            SplitTag::Unassigned => {}
        }
        if seen.test && (seen.train || seen.val) {
            return Err(Error::Leakage(format!(
                "group {} appears in the test split and in training/validation",
                item.group_id()
            )));
        }
        if seen.train && seen.val {
            return Err(Error::Leakage(format!(
                "group {} appears in both training and validation",
                item.group_id()
            )));
        }
    }
    Ok(())
}

/// Checks label consistency within groups, group disjointness between
/// train, validation and test, and that the test split holds originals only.
pub fn validate_manifest(m: &Manifest) -> Result<()> {
    check(m.records.iter().map(|r| (r, r.split)))
}

/// The same invariants for in-memory sample sets.
pub fn validate_partition(train: &[Sample], val: &[Sample], test: &[Sample]) -> Result<()> {
    check(
        train
            .iter()
            .map(|s| (s, SplitTag::Train))
            .chain(val.iter().map(|s| (s, SplitTag::Val)))
            .chain(test.iter().map(|s| (s, SplitTag::Test))),
    )
}
