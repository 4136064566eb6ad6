//! End-to-end pipelines: the MovieLens rating table with grid-tuned PMF,
//! learned-W and side-information variants, and regression on whitened
//! covariates with per-dimension feature maps.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cf::{fit_tuned, grid_search, CellResult, CfConfig, CfGrid, ReportRow};
use crate::data::{whiten_fit_apply, MovieLens, RegressionDataset};
use crate::error::{Result, TgpError};
use crate::features::{build_cholesky_features, build_nystrom, build_rff, hashed, FeatureMap};
use crate::inference::{hmc, sgd_map, ChainSet, HmcConfig, SgdConfig, TraceRow};
use crate::input::Coord;
use crate::kernels::KernelSpec;
use crate::linalg::Matrix;
use crate::model::{sample_prior, TgpModel};
use crate::persist::RegressionModel;
use crate::tensor::TuckerWeights;

/// Which training sets the grid is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuningScope {
    /// Every split is tuned on its own training set.
    #[default]
    PerSplit,
    /// Tuned once on the first split; the winning cells are reused on every split.
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CfVariant {
    /// `W = I`.
    Pmf,
    LearnW,
    LearnWSide,
}

impl CfVariant {
    pub fn name(self) -> &'static str {
        match self {
            CfVariant::Pmf => "pmf",
            CfVariant::LearnW => "learn_w",
            CfVariant::LearnWSide => "learn_w_side",
        }
    }

    pub fn config(self, rank: usize) -> CfConfig {
        let mut cfg = CfConfig::new(rank);
        cfg.learn_w = self != CfVariant::Pmf;
        cfg.use_side = self == CfVariant::LearnWSide;
        cfg
    }

    pub fn default_grid(self) -> CfGrid {
        match self {
            CfVariant::Pmf => CfGrid::pmf(),
            CfVariant::LearnW => CfGrid::learn_w(),
            CfVariant::LearnWSide => CfGrid::side(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantPlan {
    pub variant: CfVariant,
    pub grid: CfGrid,
    /// Epoch budget per grid cell.
    pub epochs: usize,
    pub eval_every: usize,
    #[serde(default)]
    pub patience: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TablePlan {
    pub rank: usize,
    pub minibatch: usize,
    /// Share of each tuning set held out for validation.
    pub valid_fraction: f64,
    #[serde(default)]
    pub scope: TuningScope,
    /// Tune the side variant over its `a`, `b`, `c` lists only, taking the
    /// remaining values from the learned-W winner on the same tuning set.
    #[serde(default)]
    pub staged_side: bool,
    pub seed: u64,
    pub variants: Vec<VariantPlan>,
}

impl TablePlan {
    /// Default grids with the given per-variant epoch budgets.
    pub fn standard(rank: usize, epochs: [usize; 3]) -> Self {
        let variants = [CfVariant::Pmf, CfVariant::LearnW, CfVariant::LearnWSide]
            .into_iter()
            .zip(epochs)
            .map(|(variant, epochs)| VariantPlan {
                variant,
                grid: variant.default_grid(),
                epochs,
                eval_every: 1,
                patience: None,
            })
            .collect();
        TablePlan {
            rank,
            minibatch: 100,
            valid_fraction: 0.1,
            scope: TuningScope::PerSplit,
            staged_side: false,
            seed: 0,
            variants,
        }
    }
}

/// The selected cell for one variant on one tuning set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TunedCell {
    /// Index of the split whose training set was tuned on.
    pub tuned_on: usize,
    pub variant: CfVariant,
    pub cell: CellResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableResult {
    pub rows: Vec<ReportRow>,
    pub tuned: Vec<TunedCell>,
}

impl TableResult {
    /// Test RMSE of `variant` per split, in split order.
    pub fn per_split(&self, variant: CfVariant) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.model_variant == variant.name())
            .map(|r| r.test_rmse)
            .collect()
    }

    pub fn mean(&self, variant: CfVariant) -> f64 {
        let v = self.per_split(variant);
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn tune(ml: &MovieLens, plan: &TablePlan, split: usize, log: &mut dyn FnMut(&str)) -> Result<Vec<TunedCell>> {
    let train = &ml.splits[split].0;
    let mut out: Vec<TunedCell> = Vec::new();
    for vp in &plan.variants {
        let cfg = vp.variant.config(plan.rank);
        let mut sgd = SgdConfig::new(0.0, 0.0, plan.minibatch, vp.epochs);
        sgd.seed = plan.seed;
        sgd.eval_every = vp.eval_every;
        sgd.patience = vp.patience;
        let grid = match (vp.variant, plan.staged_side) {
            (CfVariant::LearnWSide, true) => {
                let base = out
                    .iter()
                    .find(|t| t.variant == CfVariant::LearnW)
                    .ok_or_else(|| TgpError::invalid("staged side tuning needs a learn_w variant listed before it"))?;
                let h = base.cell.hyper;
                CfGrid {
                    sigma_u: vec![h.sigma_u],
                    noise_var: vec![h.noise_var],
                    step_u: vec![h.step_u],
                    step_w: vec![h.step_w],
                    ..vp.grid.clone()
                }
            }
            _ => vp.grid.clone(),
        };
        let side = cfg.use_side.then_some(&ml.side);
        let result = grid_search(train, side, &cfg, &sgd, &grid, plan.valid_fraction, plan.seed)?;
        log(&format!(
            "split {}: {} best cell {:?} valid RMSE {:.4} at epoch {}",
            split + 1,
            vp.variant.name(),
            result.best.hyper,
            result.best.valid_rmse,
            result.best.best_epoch
        ));
        out.push(TunedCell {
            tuned_on: split,
            variant: vp.variant,
            cell: result.best,
        });
    }
    Ok(out)
}

/// Tunes every variant, retrains each winner on the full training split and
/// reports its test RMSE.
pub fn movielens_table(ml: &MovieLens, plan: &TablePlan, log: &mut dyn FnMut(&str)) -> Result<TableResult> {
    if ml.splits.is_empty() {
        return Err(TgpError::Empty("MovieLens splits"));
    }
    if plan.variants.is_empty() {
        return Err(TgpError::Empty("table variants"));
    }
    let mut tuned: Vec<TunedCell> = Vec::new();
    let mut rows = Vec::new();
    for (s, (train, test)) in ml.splits.iter().enumerate() {
        let tuned_on = match plan.scope {
            TuningScope::PerSplit => s,
            TuningScope::Shared => 0,
        };
        if !tuned.iter().any(|t| t.tuned_on == tuned_on) {
            tuned.extend(tune(ml, plan, tuned_on, log)?);
        }
        for vp in &plan.variants {
            let best = tuned
                .iter()
                .find(|t| t.tuned_on == tuned_on && t.variant == vp.variant)
                .expect("every variant is tuned");
            let cfg = vp.variant.config(plan.rank);
            let mut sgd = SgdConfig::new(0.0, 0.0, plan.minibatch, vp.epochs);
            sgd.seed = plan.seed;
            let side = cfg.use_side.then_some(&ml.side);
            let model = fit_tuned(train, side, &cfg, &sgd, &best.cell, plan.seed)?;
            let rmse = model.rmse(test)?;
            log(&format!("split {}: {} test RMSE {rmse:.4}", s + 1, vp.variant.name()));
            rows.push(ReportRow {
                split: format!("u{}", s + 1),
                model_variant: vp.variant.name().to_string(),
                r: plan.rank,
                test_rmse: rmse,
            });
        }
    }
    Ok(TableResult { rows, tuned })
}

/// How one input dimension's feature map is built from whitened training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FeatureSpec {
    /// `features` random Fourier features of a squared exponential kernel.
    RandomFourier { kernel: KernelSpec, features: usize },
    /// Nyström features on `inducing` distinct training points drawn without replacement.
    Nystrom { kernel: KernelSpec, inducing: usize },
    /// Cholesky features over the distinct values of the group among the grid rows.
    CholeskyGrid { kernel: KernelSpec },
    /// `base` hashed into `buckets` signed outputs.
    Hashed { base: Box<FeatureSpec>, buckets: usize },
}

impl FeatureSpec {
    /// Builds the map from `rows`, the group's whitened training columns.
    /// Grid axes are taken from `grid_rows`, which include `rows`.
    pub fn build(&self, rows: &[Vec<f64>], grid_rows: &[Vec<f64>], seed: u64) -> Result<FeatureMap> {
        let dim = rows.first().map_or(0, Vec::len);
        match self {
            FeatureSpec::RandomFourier { kernel, features } => build_rff(kernel, *features, dim, seed),
            FeatureSpec::Nystrom { kernel, inducing } => {
                let mut points = distinct(rows);
                if *inducing < 1 || *inducing > points.len() {
                    return Err(TgpError::invalid(format!(
                        "{inducing} inducing points requested from {} distinct values",
                        points.len()
                    )));
                }
                points.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                points.truncate(*inducing);
                build_nystrom(kernel.clone(), points.into_iter().map(Coord::real).collect())
            }
            FeatureSpec::CholeskyGrid { kernel } => {
                let points = distinct(grid_rows).into_iter().map(Coord::real).collect();
                build_cholesky_features(points, kernel.clone())
            }
            FeatureSpec::Hashed { base, buckets } => hashed(base.build(rows, grid_rows, seed)?, *buckets, seed),
        }
    }
}

fn distinct(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut v = rows.to_vec();
    v.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    v.dedup();
    v
}

/// Posterior sampling or MAP training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trainer {
    Sgd(SgdConfig),
    Hmc(HmcConfig),
}

/// Regression on whitened covariates with one feature map per column group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionPlan {
    /// `groups[d]` lists the covariate columns feeding dimension `d`.
    pub groups: Vec<Vec<usize>>,
    pub features: Vec<FeatureSpec>,
    /// Tucker rank; `None` fixes every `U` to the identity and learns `W` only.
    pub rank: Option<usize>,
    pub noise_var: f64,
    /// `σ_u²`; `1/r` when absent.
    #[serde(default)]
    pub prior_u_var: Option<f64>,
    pub prior_w_var: f64,
    pub trainer: Trainer,
    /// Dimension `d`'s map is seeded with `seed + d`; the initial weights with `seed`.
    pub seed: u64,
}

/// A fitted regression model with its training record.
#[derive(Debug, Clone)]
pub struct RegressionFit {
    pub model: RegressionModel,
    /// Present for HMC.
    pub chains: Option<ChainSet>,
    /// SGD trace, or the first chain's HMC trace.
    pub trace: Vec<TraceRow>,
}

/// Whitens `train`, builds the feature maps and trains.
pub fn fit_regression(train: &RegressionDataset, plan: &RegressionPlan) -> Result<RegressionFit> {
    fit_regression_on_grid(train, &[], plan)
}

/// As [`fit_regression`], with grid axes also covering the raw covariate rows
/// `grid_inputs`, so that held-out rows on the same grid can be predicted.
pub fn fit_regression_on_grid(
    train: &RegressionDataset,
    grid_inputs: &[Vec<f64>],
    plan: &RegressionPlan,
) -> Result<RegressionFit> {
    if plan.groups.len() != plan.features.len() {
        return Err(TgpError::mismatch(format!(
            "{} column groups for {} feature specs",
            plan.groups.len(),
            plan.features.len()
        )));
    }
    let ncol = train.covariate_names.len();
    if let Some(&c) = plan.groups.iter().flatten().find(|&&c| c >= ncol) {
        return Err(TgpError::IndexOutOfRange { index: c, size: ncol });
    }
    let (white, _, stats) = whiten_fit_apply(train, &[])?;
    if let Some(r) = grid_inputs.iter().find(|r| r.len() != ncol) {
        return Err(TgpError::mismatch(format!("grid row has {} covariates, expected {ncol}", r.len())));
    }
    let extra: Vec<Vec<f64>> = grid_inputs.iter().map(|r| stats.whiten_input(r)).collect();
    let maps = plan
        .groups
        .iter()
        .zip(&plan.features)
        .enumerate()
        .map(|(d, (g, spec))| {
            let pick = |r: &Vec<f64>| -> Vec<f64> { g.iter().map(|&c| r[c]).collect() };
            let rows: Vec<Vec<f64>> = white.inputs.iter().map(pick).collect();
            let grid_rows: Vec<Vec<f64>> = rows.iter().cloned().chain(extra.iter().map(pick)).collect();
            spec.build(&rows, &grid_rows, plan.seed.wrapping_add(d as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<usize> = maps.iter().map(FeatureMap::output_len).collect();
    let (weights, prior_u_var) = match plan.rank {
        Some(r) => {
            let pu = plan.prior_u_var.unwrap_or(1.0 / r as f64);
            (sample_prior(&rows, r, pu, plan.prior_w_var, plan.seed)?, pu)
        }
        None => {
            let n = rows[0];
            if rows.iter().any(|&m| m != n) {
                return Err(TgpError::invalid("full rank needs the same feature count in every dimension"));
            }
            let core = sample_prior(&rows, n, 1.0, plan.prior_w_var, plan.seed)?.core;
            let weights = TuckerWeights::new(core, vec![Matrix::identity(n); rows.len()])?;
            (weights, plan.prior_u_var.unwrap_or(1.0))
        }
    };
    let model = TgpModel::new(maps, weights, plan.noise_var, prior_u_var, plan.prior_w_var)?;
    let mut reg = RegressionModel {
        model,
        covariate_names: train.covariate_names.clone(),
        groups: plan.groups.clone(),
        whitening: None,
        samples: Vec::new(),
    };
    reg.validate()?;
    let xs = white
        .inputs
        .iter()
        .map(|row| reg.coords(row))
        .collect::<Result<Vec<_>>>()?;
    let data = reg.model.observations(&xs, &white.targets)?;
    let (chains, trace) = match &plan.trainer {
        Trainer::Hmc(cfg) => {
            let mut cfg = cfg.clone();
            if plan.rank.is_none() {
                cfg.learn_u = false;
            }
            let chains = hmc(&reg.model, &data, &cfg)?;
            reg.samples = chains.iter().cloned().collect();
            if let Some(last) = reg.samples.last() {
                reg.model.weights = last.clone();
            }
            let trace = chains.trace.first().cloned().unwrap_or_default();
            (Some(chains), trace)
        }
        Trainer::Sgd(cfg) => {
            if plan.rank.is_none() {
                return Err(TgpError::invalid("full-rank training needs HMC"));
            }
            let out = sgd_map(reg.model.clone(), &data, &[], cfg)?;
            reg.model = out.model;
            (None, out.trace)
        }
    };
    reg.whitening = Some(stats);
    Ok(RegressionFit { model: reg, chains, trace })
}

/// HMC regression with one random-Fourier map per column group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RffRegressionPlan {
    /// `groups[d]` lists the covariate columns feeding dimension `d`.
    pub groups: Vec<Vec<usize>>,
    /// One squared exponential kernel per group, on whitened covariates.
    pub kernels: Vec<KernelSpec>,
    /// Features per dimension.
    pub features: usize,
    /// Tucker rank; `None` fixes every `U` to the identity and samples `W` only.
    pub rank: Option<usize>,
    pub noise_var: f64,
    /// `σ_u²`; `1/r` when absent.
    #[serde(default)]
    pub prior_u_var: Option<f64>,
    pub prior_w_var: f64,
    pub hmc: HmcConfig,
    /// Seeds the feature draws and the initial weights.
    pub seed: u64,
}

impl RffRegressionPlan {
    pub fn to_plan(&self) -> RegressionPlan {
        RegressionPlan {
            groups: self.groups.clone(),
            features: self
                .kernels
                .iter()
                .map(|k| FeatureSpec::RandomFourier {
                    kernel: k.clone(),
                    features: self.features,
                })
                .collect(),
            rank: self.rank,
            noise_var: self.noise_var,
            prior_u_var: self.prior_u_var,
            prior_w_var: self.prior_w_var,
            trainer: Trainer::Hmc(self.hmc.clone()),
            seed: self.seed,
        }
    }
}

/// Whitens `train`, builds the random Fourier maps and samples the posterior.
pub fn fit_rff_regression(train: &RegressionDataset, plan: &RffRegressionPlan) -> Result<(RegressionModel, ChainSet)> {
    let fit = fit_regression(train, &plan.to_plan())?;
    let chains = fit.chains.ok_or(TgpError::Empty("posterior draws"))?;
    Ok((fit.model, chains))
}

/// Test RMSE of posterior-mean predictions on the original target scale.
pub fn regression_rmse(model: &RegressionModel, test: &RegressionDataset) -> Result<f64> {
    let preds = test
        .inputs
        .iter()
        .map(|x| model.predict(x))
        .collect::<Result<Vec<_>>>()?;
    crate::cf::rmse(&preds, &test.targets)
}
