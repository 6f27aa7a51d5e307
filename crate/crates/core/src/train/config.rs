use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// How mini-batches are drawn from the training patches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Balance {
    /// Plain shuffled passes over the training set.
    None,
    /// Half edge, half non-edge patches per batch; the minority class is
    /// drawn with replacement.
    BalancedBatches,
}

impl FromStr for Balance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Balance::None),
            "balanced-batches" | "balanced" => Ok(Balance::BalancedBatches),
            other => Err(Error::invalid(format!("unknown balance mode {other:?}"))),
        }
    }
}

impl fmt::Display for Balance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Balance::None => "none",
            Balance::BalancedBatches => "balanced-batches",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub k: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub balance: Balance,
    pub val_fraction: f64,
    pub patience: usize,
    pub augment: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k: 16,
            lr: 1e-5,
            batch_size: 256,
            max_epochs: 200,
            seed: 0,
            balance: Balance::BalancedBatches,
            val_fraction: 0.1,
            patience: 20,
            augment: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k % 2 != 0 || !(8..=64).contains(&self.k) {
            return Err(Error::invalid(format!("k must be even and within [8, 64], got {}", self.k)));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 0.5) {
            return Err(Error::invalid(format!("val_fraction must be in (0, 0.5), got {}", self.val_fraction)));
        }
        // lr = 0 is accepted: it freezes the model, which the replay tests rely on.
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::invalid(format!("lr must be finite and >= 0, got {}", self.lr)));
        }
        if self.batch_size < 2 || (self.balance == Balance::BalancedBatches && self.batch_size % 2 != 0) {
            return Err(Error::invalid(format!(
                "batch_size must be >= 2 (and even when balancing), got {}",
                self.batch_size
            )));
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment, unset keys keep
    /// their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("config line {}: expected key = value", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "k" => cfg.k = field(key, value, n)?,
                "lr" => cfg.lr = field(key, value, n)?,
                "batch_size" => cfg.batch_size = field(key, value, n)?,
                "max_epochs" => cfg.max_epochs = field(key, value, n)?,
                "seed" => cfg.seed = field(key, value, n)?,
                "balance" => cfg.balance = value.parse()?,
                "val_fraction" => cfg.val_fraction = field(key, value, n)?,
                "patience" => cfg.patience = field(key, value, n)?,
                "augment" => cfg.augment = field(key, value, n)?,
                other => return Err(Error::invalid(format!("config line {}: unknown key {other:?}", n + 1))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn field<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("config line {}: bad value {value:?} for {key}", line + 1)))
}

impl fmt::Display for TrainConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "k = {}", self.k)?;
        writeln!(f, "lr = {}", self.lr)?;
        writeln!(f, "batch_size = {}", self.batch_size)?;
        writeln!(f, "max_epochs = {}", self.max_epochs)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "balance = {}", self.balance)?;
        writeln!(f, "val_fraction = {}", self.val_fraction)?;
        writeln!(f, "patience = {}", self.patience)?;
        writeln!(f, "augment = {}", self.augment)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        let cfg = TrainConfig::default();
        assert_eq!(TrainConfig::parse(&cfg.to_string()).unwrap(), cfg);
        assert_eq!(cfg.lr, 1e-5);
        assert_eq!(cfg.batch_size, 256);
    }

    #[test]
    fn parses_overrides_and_comments() {
        let cfg = TrainConfig::parse("# run\nlr = 0.001\nbalance = none # plain\naugment=false\n").unwrap();
        assert_eq!(cfg.lr, 1e-3);
        assert_eq!(cfg.balance, Balance::None);
        assert!(!cfg.augment);
        assert_eq!(cfg.k, 16);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(TrainConfig::parse("k = 7").is_err());
        assert!(TrainConfig::parse("k = 4").is_err());
        assert!(TrainConfig::parse("val_fraction = 0.5").is_err());
        assert!(TrainConfig::parse("lr = -1").is_err());
        assert!(TrainConfig::parse("batch_size = 5").is_err());
        assert!(TrainConfig::parse("colour = blue").is_err());
        assert!(TrainConfig::parse("lr 0.1").is_err());
    }
}
