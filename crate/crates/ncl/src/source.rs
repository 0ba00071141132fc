//! Where problems come from: the built-in catalog, model files in the
//! modeling language, or tax manifests.

use std::path::{Path, PathBuf};

use ncl_core::catalog::{self, CatalogError};
use ncl_core::dsl::{build_problem, parse_model, DslError};
use ncl_core::tax::{build_tax_problem, TaxConfig, TaxError};
use ncl_core::Problem;

use crate::manifest::{ManifestError, TaxManifest};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
    #[error("{path}:{err}")]
    Syntax { path: PathBuf, err: DslError },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Manifest { path: PathBuf, source: ManifestError },
    #[error(transparent)]
    Tax(#[from] TaxError),
}

/// A problem ready to solve. `least_squares` marks equality systems meant to
/// be solved in the least-squares sense.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub problem: Problem,
    pub least_squares: bool,
}

/// A fresh catalog problem. The tax presets are rebuilt with `seed`.
pub fn load_named(name: &str, seed: u64) -> Result<Loaded, LoadError> {
    let entry = catalog::entry(name).map_err(|CatalogError::UnknownProblem(n)| LoadError::UnknownProblem(n))?;
    let preset = match name {
        "tax1d" => Some(TaxConfig::tax1d()),
        "tax2d" => Some(TaxConfig::tax2d()),
        _ => None,
    };
    let problem = match preset {
        Some(mut cfg) => {
            cfg.seed = seed;
            build_tax_problem(&cfg)?.renamed(name)
        }
        None => entry.build(),
    };
    Ok(Loaded {
        problem,
        least_squares: entry.has_tag("nls"),
    })
}

/// A model file: a tax manifest if the extension is `.toml`, the modeling
/// language otherwise. The problem is named after the file stem.
pub fn load_model(path: &Path) -> Result<Loaded, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    let problem = if path.extension().is_some_and(|e| e == "toml") {
        let manifest = TaxManifest::from_toml(&text).map_err(|source| LoadError::Manifest {
            path: path.to_path_buf(),
            source,
        })?;
        build_tax_problem(&manifest.config)?.renamed(name)
    } else {
        let mf = parse_model(&text).map_err(|err| LoadError::Syntax {
            path: path.to_path_buf(),
            err,
        })?;
        build_problem(&mf, name)
    };
    Ok(Loaded {
        problem,
        least_squares: false,
    })
}
