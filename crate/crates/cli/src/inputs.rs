use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ecotopics_core::preprocessing::{build_feature_table, ingest_counts_csv};
use ecotopics_core::regression::default_lambda_grid;
use ecotopics_core::{io, EnvironmentTable, FeatureConfig, ObservationCorpus};
use serde::de::DeserializeOwned;

use crate::DataArgs;

/// Parses an argument that is either inline JSON or the path of a JSON file.
pub fn json_arg<T: DeserializeOwned>(value: &str, what: &str) -> Result<T> {
    let trimmed = value.trim_start();
    let text = if trimmed.starts_with('{') || trimmed.starts_with('[') {
        value.to_string()
    } else {
        io::read_to_string(Path::new(value)).with_context(|| format!("reading {what}"))?
    };
    serde_json::from_str(&text).with_context(|| format!("parsing {what}"))
}

pub fn lambda_grid(arg: Option<&str>) -> Result<Vec<f64>> {
    let grid = match arg {
        Some(s) => json_arg::<Vec<f64>>(s, "lambda grid")?,
        None => default_lambda_grid(),
    };
    if grid.is_empty() || grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        bail!("lambda grid must be a non-empty list of non-negative numbers");
    }
    Ok(grid)
}

pub struct Data {
    pub corpus: ObservationCorpus,
    pub env: Option<EnvironmentTable>,
}

impl DataArgs {
    pub fn load(&self) -> Result<Data> {
        let corpus = ingest_counts_csv(&self.counts)
            .with_context(|| format!("loading counts from {}", self.counts.display()))?;
        let env = match &self.env {
            Some(path) => {
                let config = match &self.features {
                    Some(f) => FeatureConfig::load(f)
                        .with_context(|| format!("loading feature config {}", f.display()))?,
                    None => FeatureConfig::default(),
                };
                Some(
                    build_feature_table(path, &config)
                        .with_context(|| format!("loading environment from {}", path.display()))?,
                )
            }
            None => None,
        };
        Ok(Data { corpus, env })
    }

    pub fn load_with_env(&self) -> Result<(ObservationCorpus, EnvironmentTable)> {
        let data = self.load()?;
        match data.env {
            Some(env) => Ok((data.corpus, env)),
            None => bail!("--env is required for this command"),
        }
    }
}

/// Output directory; every file is written atomically inside it.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)
            .with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
        io::write_atomic(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }
}
