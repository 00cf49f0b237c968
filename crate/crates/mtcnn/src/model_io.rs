//! The `MTCN` model container.
//!
//! Little-endian throughout:
//!
//! ```text
//! "MTCN"  u16 version  u32 len  header text (len bytes, UTF-8)
//! u32 tensor count
//! per tensor: u16 len  name  u8 ndims  u32 extent × ndims  f32 × product
//! u32 CRC-32 of every preceding byte
//! ```
//!
//! The header text is the model configuration in its `key=value` form plus a
//! `task=` line naming the classification task.

use std::fs;
use std::path::Path;

use mtcnn_core::eval::TaskSpec;
use mtcnn_core::model::{Model, ModelConfig};
use mtcnn_core::Tensor;

use crate::error::{Error, ModelFileError, Result};

pub const MAGIC: &[u8; 4] = b"MTCN";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub model: Model<f32>,
    pub task: TaskSpec,
}

pub fn encode(saved: &SavedModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let text = format!(
        "{}task={}\n",
        saved.model.config().to_text(),
        saved.task.key()
    );
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    let params = saved.model.parameters();
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.shape().len() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelFileError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.bytes.len())
            .ok_or(ModelFileError::Truncated)?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, ModelFileError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, ModelFileError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, ModelFileError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<SavedModel, ModelFileError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(ModelFileError::BadMagic);
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(ModelFileError::UnsupportedVersion(version));
    }
    let text_len = r.u32()? as usize;
    let text = r.take(text_len)?;
    let count = r.u32()? as usize;
    let mut raw_tensors = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let name_len = r.u16()? as usize;
        let name = r.take(name_len)?;
        let ndims = r.u8()? as usize;
        let shape = (0..ndims)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or(ModelFileError::Truncated)?;
        let data = r.take(n.checked_mul(4).ok_or(ModelFileError::Truncated)?)?;
        raw_tensors.push((name, shape, data));
    }
    let body_len = r.pos;
    let stored = r.u32()?;
    if r.pos != bytes.len() {
        return Err(ModelFileError::Malformed(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    let computed = crc32fast::hash(&bytes[..body_len]);
    if stored != computed {
        return Err(ModelFileError::Checksum { stored, computed });
    }

    let malformed = |msg: String| ModelFileError::Malformed(msg);
    let text = std::str::from_utf8(text).map_err(|_| malformed("header is not UTF-8".into()))?;
    let mut task = None;
    let mut config_text = String::new();
    for line in text.lines() {
        match line.strip_prefix("task=") {
            Some(t) => {
                task = Some(
                    t.parse::<TaskSpec>()
                        .map_err(|e| malformed(e.to_string()))?,
                )
            }
            None => {
                config_text.push_str(line);
                config_text.push('\n');
            }
        }
    }
    let task = task.ok_or_else(|| malformed("header has no task".into()))?;
    let config = ModelConfig::from_text(&config_text).map_err(|e| malformed(e.to_string()))?;
    let mut tensors = Vec::with_capacity(raw_tensors.len());
    for (name, shape, data) in raw_tensors {
        let name =
            std::str::from_utf8(name).map_err(|_| malformed("tensor name is not UTF-8".into()))?;
        let data = data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let t = Tensor::from_vec(&shape, data).map_err(|e| malformed(format!("{name}: {e}")))?;
        tensors.push((name.to_string(), t));
    }
    let model = Model::from_tensors(&config, tensors).map_err(|e| malformed(e.to_string()))?;
    if model.config().num_classes != task.num_classes() {
        return Err(malformed(format!(
            "{}-class model stored for task {task}",
            model.config().num_classes
        )));
    }
    Ok(SavedModel { model, task })
}

pub fn save_model(path: &Path, saved: &SavedModel) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, encode(saved)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<SavedModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|source| Error::ModelFile {
        path: path.into(),
        source,
    })
}
