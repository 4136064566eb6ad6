//! Run configuration: one TOML document per run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tgp::cf::{CfConfig, CfGrid};
use tgp::data::CsvSpec;
use tgp::experiments::FeatureSpec;
use tgp::inference::{HmcConfig, SgdConfig};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds the split, the feature draws, the initial weights and the trainer.
    #[serde(default)]
    pub seed: u64,
    pub data: DataConfig,
    #[serde(default)]
    pub model: ModelConfig,
    pub train: TrainConfig,
    #[serde(default)]
    pub cf: CfSection,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// The MovieLens 100K directory with its five predefined splits.
    Movielens,
    /// A headered delimited file of covariates and one target.
    Csv,
}

/// Paths are relative to the data directory unless absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    /// `ml-100k` for MovieLens; required for CSV.
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// MovieLens split `1..=5`.
    #[serde(default = "default_split")]
    pub split: usize,
    /// CSV covariate columns.
    #[serde(default)]
    pub covariates: Vec<String>,
    /// CSV target column.
    #[serde(default)]
    pub target: Option<String>,
    /// CSV columns replaced by their natural log.
    #[serde(default)]
    pub log_columns: Vec<String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    /// CSV rows drawn without replacement before splitting; all rows when absent.
    #[serde(default)]
    pub subsample: Option<usize>,
    /// Share of CSV rows used for training.
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    /// Column groups per dimension, as covariate indices; one group per covariate when absent.
    #[serde(default)]
    pub groups: Option<Vec<Vec<usize>>>,
}

fn default_split() -> usize {
    1
}

fn default_delimiter() -> char {
    ','
}

fn default_train_fraction() -> f64 {
    0.5
}

impl DataConfig {
    pub fn path(&self) -> PathBuf {
        self.path.clone().unwrap_or_else(|| PathBuf::from("ml-100k"))
    }

    pub fn csv_spec(&self) -> Option<CsvSpec> {
        match self.source {
            DataSource::Csv => Some(CsvSpec {
                covariates: self.covariates.clone(),
                target: self.target.clone().unwrap_or_default(),
                log_columns: self.log_columns.clone(),
                delimiter: self.delimiter,
            }),
            DataSource::Movielens => None,
        }
    }

    /// Column groups, one per covariate by default.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        self.groups
            .clone()
            .unwrap_or_else(|| (0..self.covariates.len()).map(|c| vec![c]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_rank")]
    pub rank: usize,
    /// Regression only: identity factors with every core entry learned.
    #[serde(default)]
    pub full_rank: bool,
    #[serde(default = "default_one")]
    pub noise_var: f64,
    /// `σ_u²`; `1/r` when absent.
    #[serde(default)]
    pub prior_u_var: Option<f64>,
    #[serde(default = "default_one")]
    pub prior_w_var: f64,
    /// Regression only: one feature map per column group.
    #[serde(default)]
    pub features: Vec<FeatureSpec>,
}

fn default_rank() -> usize {
    5
}

fn default_one() -> f64 {
    1.0
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            rank: default_rank(),
            full_rank: false,
            noise_var: 1.0,
            prior_u_var: None,
            prior_w_var: 1.0,
            features: Vec::new(),
        }
    }
}

/// Exactly one of `sgd` and `hmc`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default)]
    pub sgd: Option<SgdConfig>,
    #[serde(default)]
    pub hmc: Option<HmcConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CfSection {
    #[serde(default = "default_true")]
    pub learn_w: bool,
    #[serde(default)]
    pub use_side: bool,
    #[serde(default = "default_one")]
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub c: f64,
    #[serde(default = "default_true")]
    pub center: bool,
    #[serde(default)]
    pub clip: bool,
    /// Pick `σ_u`, noise, steps and side weights on a validation carve before the final fit.
    #[serde(default)]
    pub tune: bool,
    #[serde(default = "default_valid_fraction")]
    pub valid_fraction: f64,
    /// Tuning grid; the variant's standard grid when absent.
    #[serde(default)]
    pub grid: Option<CfGrid>,
}

fn default_true() -> bool {
    true
}

fn default_valid_fraction() -> f64 {
    0.1
}

impl Default for CfSection {
    fn default() -> Self {
        CfSection {
            learn_w: true,
            use_side: false,
            a: 1.0,
            b: 0.0,
            c: 0.0,
            center: true,
            clip: false,
            tune: false,
            valid_fraction: default_valid_fraction(),
            grid: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Shading {
    /// Linear between the grid's minimum and maximum.
    #[default]
    Value,
    /// By the value's percentile within the grid.
    Percentile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub shading: Shading,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs/latest")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_out_dir(),
            shading: Shading::Value,
        }
    }
}

/// The selected trainer.
pub enum Trainer<'a> {
    Sgd(&'a SgdConfig),
    Hmc(&'a HmcConfig),
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let cfg = Self::parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Ok((cfg, text))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        match (&self.train.sgd, &self.train.hmc) {
            (Some(_), Some(_)) => return Err("train: give exactly one of [train.sgd] and [train.hmc], not both".into()),
            (None, None) => return Err("train: missing [train.sgd] or [train.hmc]".into()),
            _ => {}
        }
        let d = &self.data;
        match d.source {
            DataSource::Movielens => {
                if !(1..=5).contains(&d.split) {
                    return Err(format!("data.split: {} is not in 1..=5", d.split));
                }
                if self.train.hmc.is_some() {
                    return Err("train.hmc: rating models train with [train.sgd]".into());
                }
                if self.model.full_rank {
                    return Err("model.full_rank: rating models use a Tucker rank".into());
                }
            }
            DataSource::Csv => {
                if d.path.is_none() {
                    return Err("data.path: required for csv data".into());
                }
                if d.target.is_none() {
                    return Err("data.target: required for csv data".into());
                }
                if d.covariates.is_empty() {
                    return Err("data.covariates: at least one column is needed".into());
                }
                if !(d.train_fraction > 0.0 && d.train_fraction < 1.0) {
                    return Err(format!("data.train_fraction: {} is not in (0, 1)", d.train_fraction));
                }
                let dims = d.groups().len();
                if self.model.features.len() != dims {
                    return Err(format!(
                        "model.features: {} feature specs for {dims} dimensions",
                        self.model.features.len()
                    ));
                }
                if self.model.full_rank && self.train.sgd.is_some() {
                    return Err("model.full_rank: full-rank training needs [train.hmc]".into());
                }
            }
        }
        if self.model.rank < 1 {
            return Err("model.rank: must be at least 1".into());
        }
        Ok(())
    }

    pub fn trainer(&self) -> Trainer<'_> {
        match (&self.train.sgd, &self.train.hmc) {
            (Some(s), _) => Trainer::Sgd(s),
            (None, Some(h)) => Trainer::Hmc(h),
            (None, None) => unreachable!("validated: one train block"),
        }
    }

    pub fn cf_config(&self) -> CfConfig {
        CfConfig {
            rank: self.model.rank,
            learn_w: self.cf.learn_w,
            use_side: self.cf.use_side,
            a: self.cf.a,
            b: self.cf.b,
            c: self.cf.c,
            noise_var: self.model.noise_var,
            prior_u_var: self.model.prior_u_var,
            prior_w_var: self.model.prior_w_var,
            center: self.cf.center,
            clip: self.cf.clip,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
        [data]
        source = \"movielens\"
        [train.sgd]
        step_u = 1e-4
        step_w = 0.0
        minibatch = 100
        epochs = 3
    ";

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.model, ModelConfig::default());
        assert_eq!(cfg.cf, CfSection::default());
        assert_eq!(cfg.output, OutputConfig::default());
        assert_eq!(cfg.data.source, DataSource::Movielens);
        assert_eq!(cfg.data.path(), PathBuf::from("ml-100k"));
        assert_eq!(cfg.data.split, 1);
    }

    #[test]
    fn data_type_errors_point_at_the_key() {
        let bad = MINIMAL.replace("source = \"movielens\"", "source = \"movielens\"\nsplit = \"one\"");
        let e = RunConfig::parse(&bad).unwrap_err();
        assert!(e.contains("line 4") && e.contains("\"one\""), "{e}");
        let csv = "[data]\nsource = \"csv\"\n[train.sgd]\nstep_u = 0.1\nstep_w = 0.1\nminibatch = 1\nepochs = 1\n";
        assert!(RunConfig::parse(csv).unwrap_err().contains("data.path"));
    }

    #[test]
    fn exactly_one_train_block() {
        let both = format!("{MINIMAL}\n[train.hmc]\nleapfrog = 5\nstep_w = 0.1\nstep_u = [0.1]\niterations = 10\nwarmup = 5\nchains = 2\n");
        assert!(RunConfig::parse(&both).unwrap_err().contains("exactly one"));
        let none = "[data]\nsource = \"movielens\"\n[train]\n";
        assert!(RunConfig::parse(none).unwrap_err().contains("missing"));
    }

    #[test]
    fn parse_errors_name_line_and_key() {
        let bad = MINIMAL.replace("epochs = 3", "epochs = \"three\"");
        let e = RunConfig::parse(&bad).unwrap_err();
        assert!(e.contains("line 8"), "{e}");
        let unknown = format!("{MINIMAL}\n[cf]\nlern_w = true\n");
        let e = RunConfig::parse(&unknown).unwrap_err();
        assert!(e.contains("lern_w"), "{e}");
    }

    #[test]
    fn csv_feature_count_matches_groups() {
        let text = "
            [data]
            source = \"csv\"
            path = \"x.csv\"
            covariates = [\"a\", \"b\"]
            target = \"y\"
            [[model.features]]
            type = \"random_fourier\"
            features = 4
            kernel = { type = \"squared_exponential\", variance = 1.0, lengthscales = [1.0] }
            [train.sgd]
            step_u = 1e-3
            step_w = 1e-3
            minibatch = 1
            epochs = 1
        ";
        assert!(RunConfig::parse(text).unwrap_err().contains("1 feature specs for 2"));
        let grouped = text.replace("target = \"y\"", "target = \"y\"\ngroups = [[0, 1]]");
        assert!(RunConfig::parse(&grouped).is_ok());
    }
}
