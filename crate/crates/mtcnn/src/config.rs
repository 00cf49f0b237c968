//! Run configuration: `key=value` files with command-line overrides.

use std::fmt::Write;
use std::fs;
use std::path::{Path, PathBuf};

use mtcnn_core::eval::TaskSpec;
use mtcnn_core::model::ModelConfig;
use mtcnn_core::train::TrainConfig;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub task: TaskSpec,
    /// Input side for the canonical topology when no model config is given.
    pub input_size: usize,
    pub model_config: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub k: usize,
    pub budget: usize,
    /// 0 uses every available core.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            task: TaskSpec::ThreeClass,
            input_size: 300,
            model_config: None,
            manifest: None,
            model: None,
            out: None,
            k: 10,
            budget: 10,
            threads: 0,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .trim()
        .parse()
        .map_err(|_| format!("invalid value {value:?} for {key}"))
}

impl RunConfig {
    /// Sets one key; the message of a failure names the key and value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let key = key.trim();
        let path = || {
            Some(value.trim())
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
        };
        match key {
            "task" => {
                self.task = value
                    .trim()
                    .parse()
                    .map_err(|e: mtcnn_core::Error| e.to_string())?
            }
            "input_size" => self.input_size = parse_value(key, value)?,
            "model_config" => self.model_config = path(),
            "manifest" => self.manifest = path(),
            "model" => self.model = path(),
            "out" => self.out = path(),
            "k" => self.k = parse_value(key, value)?,
            "budget" => self.budget = parse_value(key, value)?,
            "threads" => self.threads = parse_value(key, value)?,
            _ if TrainConfig::KEYS.contains(&key) => {
                self.train.set(key, value).map_err(|e| e.to_string())?
            }
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Applies a `key=value` file on top of the current values. Blank lines
    /// and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::parse(origin, i + 1, format!("expected key=value, found {line:?}"))
            })?;
            self.set(k, v)
                .map_err(|msg| Error::parse(origin, i + 1, msg))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text, path)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.k < 2 {
            return Err(Error::Usage(format!(
                "k must be at least 2, got {}",
                self.k
            )));
        }
        if self.budget == 0 {
            return Err(Error::Usage("budget must be at least 1".into()));
        }
        Ok(())
    }

    /// The topology to train: the configured file, or the canonical network
    /// at `input_size` for the task's class count. Seed and sharpening come
    /// from the training config.
    pub fn model_config(&self) -> Result<ModelConfig> {
        let mut cfg = match &self.model_config {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                ModelConfig::from_text(&text)?
            }
            None => ModelConfig::canonical_at(self.input_size, self.task.num_classes())?,
        };
        if cfg.num_classes != self.task.num_classes() {
            return Err(Error::Usage(format!(
                "model config has {} classes but task {} has {}",
                cfg.num_classes,
                self.task,
                self.task.num_classes()
            )));
        }
        cfg.seed = self.train.seed;
        cfg.sharpen = self.train.sharpen;
        Ok(cfg)
    }

    pub fn require_manifest(&self) -> Result<&Path> {
        require(&self.manifest, "manifest")
    }

    pub fn require_model(&self) -> Result<&Path> {
        require(&self.model, "model")
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    /// Every setting as `key=value` lines.
    pub fn to_text(&self) -> String {
        let mut out = self.train.to_text();
        let _ = writeln!(out, "task={}", self.task.key());
        let _ = writeln!(out, "input_size={}", self.input_size);
        let opt = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        };
        let _ = writeln!(out, "model_config={}", opt(&self.model_config));
        let _ = writeln!(out, "manifest={}", opt(&self.manifest));
        let _ = writeln!(out, "model={}", opt(&self.model));
        let _ = writeln!(out, "k={}", self.k);
        let _ = writeln!(out, "budget={}", self.budget);
        out
    }
}

fn require<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    let p = p.as_deref().ok_or_else(|| {
        Error::Usage(format!(
            "no {key} given (set {key}= in the config file or pass --{key})"
        ))
    })?;
    if !p.exists() {
        return Err(Error::Usage(format!(
            "{key} {} does not exist",
            p.display()
        )));
    }
    Ok(p)
}
