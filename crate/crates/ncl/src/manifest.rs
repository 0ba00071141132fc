//! Tax model manifests: a TOML file with the full generator configuration,
//! enough to rebuild the problem exactly.

use std::path::Path;

use ncl_core::tax::{TaxConfig, TaxDims, TaxError};
use serde::{Deserialize, Serialize};

pub const FORMAT: &str = "ncl-tax";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("not a tax manifest (format `{0}`)")]
    Format(String),
    #[error("unsupported manifest version {0}")]
    Version(u32),
    #[error("recorded dimensions {recorded:?} do not match the configuration {actual:?}")]
    Dims { recorded: TaxDims, actual: TaxDims },
    #[error(transparent)]
    Invalid(#[from] TaxError),
    #[error(transparent)]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Write(#[from] toml::ser::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxManifest {
    pub format: String,
    pub version: u32,
    /// Informational; checked against `config` on load.
    pub dims: TaxDims,
    pub config: TaxConfig,
}

impl TaxManifest {
    pub fn new(config: TaxConfig) -> Self {
        TaxManifest {
            format: FORMAT.into(),
            version: VERSION,
            dims: config.dims(),
            config,
        }
    }

    pub fn to_toml(&self) -> Result<String, ManifestError> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self, ManifestError> {
        let m: TaxManifest = toml::from_str(text)?;
        if m.format != FORMAT {
            return Err(ManifestError::Format(m.format));
        }
        if m.version != VERSION {
            return Err(ManifestError::Version(m.version));
        }
        m.config.validate()?;
        let actual = m.config.dims();
        if actual != m.dims {
            return Err(ManifestError::Dims {
                recorded: m.dims,
                actual,
            });
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<(), ManifestError> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, ManifestError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}
