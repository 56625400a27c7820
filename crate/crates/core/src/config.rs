//! Flat `key=value` run configuration.
//!
//! ```text
//! # comments and blank lines are ignored
//! epochs=200
//! p_a=0.5
//! clusters=auto
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{config_hash, read_to_string};
use crate::relations::RelationConfig;
use crate::trainer::{TrainConfig, CONFIG_KEYS};

/// Environment variable naming a config file used when none is given.
pub const CONFIG_ENV: &str = "TRUSTGRAPH_CONFIG";

const RELATION_KEYS: [&str; 3] = ["clusters", "kmeans_seed", "kmeans_iters"];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub relations: RelationConfig,
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let bad = || Error::Config(format!("invalid value {value:?} for {key}"));
        match key {
            "clusters" => {
                self.relations.clusters = match value {
                    "auto" => None,
                    v => Some(v.parse().map_err(|_| bad())?),
                }
            }
            "kmeans_seed" => self.relations.seed = value.parse().map_err(|_| bad())?,
            "kmeans_iters" => self.relations.kmeans_iters = value.parse().map_err(|_| bad())?,
            _ => self.train.set(key, value)?,
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        match key {
            "clusters" => Some(
                self.relations
                    .clusters
                    .map_or("auto".into(), |k| k.to_string()),
            ),
            "kmeans_seed" => Some(self.relations.seed.to_string()),
            "kmeans_iters" => Some(self.relations.kmeans_iters.to_string()),
            _ => self.train.get(key),
        }
    }

    pub fn keys() -> impl Iterator<Item = &'static str> {
        CONFIG_KEYS.into_iter().chain(RELATION_KEYS)
    }

    /// Applies every `key=value` line of `text` over the current values.
    pub fn apply_text(&mut self, text: &str, source: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::data(
                    source,
                    i as u64 + 1,
                    format!("expected key=value, got {line:?}"),
                )
            })?;
            self.set(k.trim(), v)
                .map_err(|e| Error::data(source, i as u64 + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text, Path::new("<config>"))?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut c = Self::default();
        c.apply_text(&read_to_string(path)?, path)?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.relations.clusters == Some(0) {
            return Err(Error::Config("clusters must be at least 1".into()));
        }
        if self.relations.kmeans_iters == 0 {
            return Err(Error::Config("kmeans_iters must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        for k in Self::keys() {
            writeln!(s, "{k}={}", self.get(k).unwrap()).unwrap();
        }
        s
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        Self::keys()
            .map(|k| (k.to_string(), self.get(k).unwrap()))
            .collect()
    }

    pub fn hash(&self) -> u64 {
        config_hash(&self.to_kv())
    }
}
