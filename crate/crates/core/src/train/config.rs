use alloc::format;
use alloc::string::String;
use core::fmt;
use core::fmt::Write;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::optim::NadamConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub l2_lambda: f64,
    pub patience_epochs: usize,
    pub max_epochs: usize,
    /// Fraction of training groups held out for validation when a single
    /// model is trained.
    pub val_fraction: f64,
    pub seed: u64,
    pub sharpen: bool,
    pub rotations: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let nadam = NadamConfig::default();
        Self {
            lr: nadam.lr,
            beta1: nadam.beta1,
            beta2: nadam.beta2,
            epsilon: nadam.epsilon,
            batch_size: 32,
            dropout_rate: 0.5,
            l2_lambda: 0.01,
            patience_epochs: 2,
            max_epochs: 100,
            val_fraction: 0.1,
            seed: 0,
            sharpen: false,
            rotations: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Patience,
    MaxEpochs,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Patience => "patience",
            StopReason::MaxEpochs => "max_epochs",
        })
    }
}

impl FromStr for StopReason {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "patience" => Ok(StopReason::Patience),
            "max_epochs" => Ok(StopReason::MaxEpochs),
            other => Err(Error::Parse(format!("unknown stop reason {other:?}"))),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

impl TrainConfig {
    pub const KEYS: [&'static str; 13] = [
        "lr",
        "beta1",
        "beta2",
        "epsilon",
        "batch_size",
        "dropout_rate",
        "l2_lambda",
        "patience_epochs",
        "max_epochs",
        "val_fraction",
        "seed",
        "sharpen",
        "rotations",
    ];

    pub fn nadam(&self) -> NadamConfig {
        NadamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.into()));
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(&format!(
                "lr must be finite and non-negative, got {}",
                self.lr
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return bad("epsilon must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidRate(self.dropout_rate));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return bad("l2_lambda must be finite and non-negative");
        }
        if self.patience_epochs == 0 || self.max_epochs == 0 {
            return bad("patience_epochs and max_epochs must be at least 1");
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad("val_fraction must lie in (0, 1)");
        }
        Ok(())
    }

    /// Sets one field from its `key=value` spelling.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "lr" => self.lr = parse(key, value)?,
            "beta1" => self.beta1 = parse(key, value)?,
            "beta2" => self.beta2 = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "dropout_rate" => self.dropout_rate = parse(key, value)?,
            "l2_lambda" => self.l2_lambda = parse(key, value)?,
            "patience_epochs" => self.patience_epochs = parse(key, value)?,
            "max_epochs" => self.max_epochs = parse(key, value)?,
            "val_fraction" => self.val_fraction = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "sharpen" => self.sharpen = parse(key, value)?,
            "rotations" => self.rotations = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Every field as `key=value` lines, in [`TrainConfig::KEYS`] order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "lr={}", self.lr);
        let _ = writeln!(out, "beta1={}", self.beta1);
        let _ = writeln!(out, "beta2={}", self.beta2);
        let _ = writeln!(out, "epsilon={}", self.epsilon);
        let _ = writeln!(out, "batch_size={}", self.batch_size);
        let _ = writeln!(out, "dropout_rate={}", self.dropout_rate);
        let _ = writeln!(out, "l2_lambda={}", self.l2_lambda);
        let _ = writeln!(out, "patience_epochs={}", self.patience_epochs);
        let _ = writeln!(out, "max_epochs={}", self.max_epochs);
        let _ = writeln!(out, "val_fraction={}", self.val_fraction);
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "sharpen={}", self.sharpen);
        let _ = writeln!(out, "rotations={}", self.rotations);
        out
    }
}
