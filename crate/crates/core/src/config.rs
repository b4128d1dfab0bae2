//! Single TOML configuration file for the CLI and the service.
//!
//! Every section is optional; omitted keys take their defaults. Relative
//! paths are resolved against the directory holding the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detections::DEFAULT_MIN_CONFIDENCE;
use crate::quantify::{QuantifierConfig, DEFAULT_BOX_FILL_FACTOR};
use crate::recommender::RecommenderConfig;
use crate::reference::ReferenceSpec;

pub const CONFIG_ENV: &str = "NUTRIVISION_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantifierSection {
    pub box_fill_factor: f64,
}

impl Default for QuantifierSection {
    fn default() -> Self {
        Self {
            box_fill_factor: DEFAULT_BOX_FILL_FACTOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionSection {
    pub min_confidence: f64,
}

impl Default for DetectionSection {
    fn default() -> Self {
        Self {
            min_confidence: DEFAULT_MIN_CONFIDENCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoreSection {
    pub path: PathBuf,
}

impl Default for StoreSection {
    fn default() -> Self {
        Self {
            path: PathBuf::from("nutrivision-events.log"),
        }
    }
}

/// Catalog files; `None` selects the bundled data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CatalogSection {
    pub foods: Option<PathBuf>,
    pub recipes: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSection {
    pub host: String,
    pub port: u16,
}

impl Default for ServerSection {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub reference: ReferenceSpec,
    pub quantifier: QuantifierSection,
    pub detections: DetectionSection,
    pub recommender: RecommenderConfig,
    pub store: StoreSection,
    pub catalog: CatalogSection,
    pub server: ServerSection,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    /// Loads `explicit`, else the file named by `NUTRIVISION_CONFIG`, else
    /// the defaults.
    pub fn discover(explicit: Option<&Path>) -> Result<Self, ConfigError> {
        match explicit {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
                _ => Ok(Self::default()),
            },
        }
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.store.path);
        if let Some(p) = self.catalog.foods.as_mut() {
            fix(p);
        }
        if let Some(p) = self.catalog.recipes.as_mut() {
            fix(p);
        }
    }

    pub fn quantifier_config(&self) -> QuantifierConfig {
        QuantifierConfig {
            box_fill_factor: self.quantifier.box_fill_factor,
            reference: self.reference,
        }
    }

    pub fn to_toml_string(&self) -> Result<String, ConfigError> {
        toml::to_string_pretty(self).map_err(|e| ConfigError::Parse(e.to_string()))
    }
}
