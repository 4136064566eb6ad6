//! Model files: a `TGP1` tag line followed by one JSON document.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cf::CfModel;
use crate::data::WhiteningStats;
use crate::error::{Result, TgpError};
use crate::inference::{summarize_draws, PredictiveSummary};
use crate::input::Coord;
use crate::model::{evaluate, Scratch, TgpModel};
use crate::tensor::TuckerWeights;

pub const FORMAT_TAG: &str = "TGP1";

/// A trained regression model together with its input encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub model: TgpModel,
    pub covariate_names: Vec<String>,
    /// `groups[d]` lists the covariate columns feeding dimension `d`.
    pub groups: Vec<Vec<usize>>,
    pub whitening: Option<WhiteningStats>,
    /// Posterior draws pooled over chains; empty for point estimates.
    #[serde(default)]
    pub samples: Vec<TuckerWeights>,
}

impl RegressionModel {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.groups.len() != self.model.order() {
            return Err(TgpError::mismatch(format!(
                "{} column groups for {} dimensions",
                self.groups.len(),
                self.model.order()
            )));
        }
        let ncol = self.covariate_names.len();
        if let Some(&c) = self.groups.iter().flatten().find(|&&c| c >= ncol) {
            return Err(TgpError::IndexOutOfRange { index: c, size: ncol });
        }
        if let Some(w) = &self.whitening {
            if w.input_mean.len() != ncol {
                return Err(TgpError::mismatch("whitening stats do not match the covariates"));
            }
        }
        if self.samples.iter().any(|s| !s.same_shape(&self.model.weights)) {
            return Err(TgpError::mismatch("posterior draws differ in shape from the model"));
        }
        Ok(())
    }

    /// Coordinates of a raw covariate row after whitening.
    pub fn coords(&self, row: &[f64]) -> Result<Vec<Coord>> {
        if row.len() != self.covariate_names.len() {
            return Err(TgpError::mismatch(format!(
                "row has {} covariates, model expects {}",
                row.len(),
                self.covariate_names.len()
            )));
        }
        let x: Vec<f64> = match &self.whitening {
            Some(w) => w.whiten_input(row),
            None => row.to_vec(),
        };
        Ok(self
            .groups
            .iter()
            .map(|g| Coord::real(g.iter().map(|&c| x[c]).collect()))
            .collect())
    }

    fn unwhiten(&self, y: f64) -> f64 {
        match &self.whitening {
            Some(w) => w.unwhiten_target(y),
            None => y,
        }
    }

    /// Prediction on the original target scale; the posterior mean when draws are present.
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        let feats = self.model.featurize(&self.coords(row)?)?;
        let mut scratch = Scratch::default();
        let f = if self.samples.is_empty() {
            evaluate(&self.model.weights, &feats, &mut scratch)
        } else {
            self.samples.iter().map(|w| evaluate(w, &feats, &mut scratch)).sum::<f64>() / self.samples.len() as f64
        };
        Ok(self.unwhiten(f))
    }

    /// Posterior mean with 2.5% and 97.5% percentiles, on the original target scale.
    pub fn predict_summary(&self, row: &[f64]) -> Result<PredictiveSummary> {
        if self.samples.is_empty() {
            return Err(TgpError::invalid("percentile bands need posterior draws"));
        }
        let feats = self.model.featurize(&self.coords(row)?)?;
        let mut scratch = Scratch::default();
        let draws: Vec<f64> = self
            .samples
            .iter()
            .map(|w| self.unwhiten(evaluate(w, &feats, &mut scratch)))
            .collect();
        summarize_draws(&draws)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelFile {
    Regression(RegressionModel),
    Cf(CfModel),
}

impl ModelFile {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self).map_err(|e| TgpError::Format(e.to_string()))?;
        write_atomic(path, format!("{FORMAT_TAG}\n{json}\n").as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let (tag, body) = text.split_once('\n').unwrap_or((text.as_str(), ""));
        if tag.trim_end() != FORMAT_TAG {
            return Err(TgpError::Format(format!(
                "{}: expected format tag {FORMAT_TAG}, found {:?}",
                path.display(),
                tag.chars().take(16).collect::<String>()
            )));
        }
        let file: ModelFile = serde_json::from_str(body).map_err(|e| TgpError::Parse {
            path: path.to_path_buf(),
            line: e.line() + 1,
            message: e.to_string(),
        })?;
        match &file {
            ModelFile::Regression(m) => m.validate()?,
            ModelFile::Cf(m) => m.model.validate()?,
        }
        Ok(file)
    }
}

fn io_err(path: &Path, source: std::io::Error) -> TgpError {
    TgpError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = PathBuf::from(path);
    let name = path
        .file_name()
        .ok_or_else(|| TgpError::invalid(format!("{} is not a file path", path.display())))?;
    tmp.set_file_name(format!(".{}.tmp", name.to_string_lossy()));
    let mut f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    f.write_all(bytes).map_err(|e| io_err(&tmp, e))?;
    f.sync_all().map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

/// Serializes `rows` as headered CSV and writes them atomically.
pub fn write_csv_atomic<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| TgpError::invalid(format!("{}: {e}", path.display())))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| TgpError::invalid(format!("{}: {e}", path.display())))?;
    write_atomic(path, &bytes)
}
