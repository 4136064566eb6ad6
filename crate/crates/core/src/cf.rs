//! Collaborative filtering with a two-dimensional TGP: PMF (`W = I`), learned
//! `W`, and user/item side information.
//!
//! With side information the user map is `[√a e_i ; √a·b ω₁(i)]` and the item
//! map `[√a e_j ; √a·c ω₂(j)]`, so that
//! `f(i, j) = a (U_i + b Σ_{k∈I_i} U_{n₁+k})ᵀ W (V_j + c Σ_{k∈J_j} V_{n₂+k})`.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TgpError};
use crate::features::{side_augmented, FeatureMap};
use crate::inference::{sgd_map, SgdConfig, SgdOutcome};
use crate::input::Coord;
use crate::linalg::{dot, Matrix};
use crate::model::{sample_prior, Observation, TgpModel};
use crate::tensor::DenseTensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub user: usize,
    pub item: usize,
    pub value: f64,
}

/// Observed entries of an `n_users × n_items` rating matrix, 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingsData {
    pub n_users: usize,
    pub n_items: usize,
    pub triples: Vec<Rating>,
}

impl RatingsData {
    pub fn new(n_users: usize, n_items: usize, triples: Vec<Rating>) -> Result<Self> {
        if n_users < 1 || n_items < 1 {
            return Err(TgpError::invalid("rating matrix needs at least one user and one item"));
        }
        for t in &triples {
            if t.user >= n_users {
                return Err(TgpError::IndexOutOfRange {
                    index: t.user,
                    size: n_users,
                });
            }
            if t.item >= n_items {
                return Err(TgpError::IndexOutOfRange {
                    index: t.item,
                    size: n_items,
                });
            }
            if !t.value.is_finite() {
                return Err(TgpError::invalid("non-finite rating"));
            }
        }
        Ok(RatingsData {
            n_users,
            n_items,
            triples,
        })
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.triples.iter().map(|t| t.value).sum::<f64>() / self.len() as f64
    }

    pub fn subset(&self, rows: &[usize]) -> RatingsData {
        RatingsData {
            n_users: self.n_users,
            n_items: self.n_items,
            triples: rows.iter().map(|&i| self.triples[i]).collect(),
        }
    }
}

/// Binary side vectors stored as their non-zero index sets `I_i` and `J_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideInfo {
    pub user_sets: Vec<Vec<usize>>,
    pub user_len: usize,
    pub item_sets: Vec<Vec<usize>>,
    pub item_len: usize,
}

impl SideInfo {
    pub fn new(user_sets: Vec<Vec<usize>>, user_len: usize, item_sets: Vec<Vec<usize>>, item_len: usize) -> Result<Self> {
        for (sets, len) in [(&user_sets, user_len), (&item_sets, item_len)] {
            for s in sets {
                if let Some(&k) = s.iter().find(|&&k| k >= len) {
                    return Err(TgpError::IndexOutOfRange { index: k, size: len });
                }
                let mut sorted = s.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != s.len() {
                    return Err(TgpError::invalid("side index set has repeated entries"));
                }
            }
        }
        Ok(SideInfo {
            user_sets,
            user_len,
            item_sets,
            item_len,
        })
    }

    pub fn user_vector(&self, i: usize) -> Vec<f64> {
        binary(&self.user_sets[i], self.user_len)
    }

    pub fn item_vector(&self, j: usize) -> Vec<f64> {
        binary(&self.item_sets[j], self.item_len)
    }
}

fn binary(set: &[usize], len: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    set.iter().for_each(|&k| v[k] = 1.0);
    v
}

fn default_true() -> bool {
    true
}

fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfConfig {
    pub rank: usize,
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
    #[serde(default = "default_one")]
    pub noise_var: f64,
    /// `σ_u²`; `1/r` when absent.
    #[serde(default)]
    pub prior_u_var: Option<f64>,
    #[serde(default = "default_one")]
    pub prior_w_var: f64,
    /// Model ratings minus the training mean.
    #[serde(default = "default_true")]
    pub center: bool,
    /// Clip predictions to `[1, 5]`.
    #[serde(default)]
    pub clip: bool,
}

impl CfConfig {
    pub fn new(rank: usize) -> Self {
        CfConfig {
            rank,
            learn_w: true,
            use_side: false,
            a: 1.0,
            b: 0.0,
            c: 0.0,
            noise_var: 1.0,
            prior_u_var: None,
            prior_w_var: 1.0,
            center: true,
            clip: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank < 1 {
            return Err(TgpError::invalid("rank must be at least 1"));
        }
        if !(self.a >= 0.0 && self.b >= 0.0 && self.c >= 0.0) {
            return Err(TgpError::invalid("side weights a, b, c must be non-negative"));
        }
        Ok(())
    }

    pub fn prior_u_var(&self) -> f64 {
        self.prior_u_var.unwrap_or(1.0 / self.rank as f64)
    }
}

/// Rating range used by optional clipping.
pub const RATING_RANGE: (f64, f64) = (1.0, 5.0);

/// A CF model plus the rating offset and side weights it was built with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfModel {
    pub model: TgpModel,
    pub offset: f64,
    pub n_users: usize,
    pub n_items: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub side: Option<SideInfo>,
    pub clip: bool,
}

/// Builds a two-dimensional model with parameters drawn from the prior.
///
/// Without side information the maps are identities over users and items. With
/// it, the factor matrices gain one row per side feature. When `learn_w` is
/// false the core starts at the identity.
pub fn build_cf_model(ratings: &RatingsData, side: Option<&SideInfo>, cfg: &CfConfig, seed: u64) -> Result<CfModel> {
    cfg.validate()?;
    let (n1, n2) = (ratings.n_users, ratings.n_items);
    let side = if cfg.use_side {
        let s = side.ok_or_else(|| TgpError::invalid("side information requested but not provided"))?;
        if s.user_sets.len() != n1 || s.item_sets.len() != n2 {
            return Err(TgpError::mismatch(format!(
                "side information covers {} users and {} items, ratings have {n1} and {n2}",
                s.user_sets.len(),
                s.item_sets.len()
            )));
        }
        Some(s.clone())
    } else {
        None
    };
    let maps = match &side {
        Some(s) => {
            let ra = cfg.a.sqrt();
            vec![
                side_augmented(n1, s.user_len, s.user_sets.clone(), ra, ra * cfg.b)?,
                side_augmented(n2, s.item_len, s.item_sets.clone(), ra, ra * cfg.c)?,
            ]
        }
        None => vec![FeatureMap::identity(n1), FeatureMap::identity(n2)],
    };
    let rows: Vec<usize> = maps.iter().map(FeatureMap::output_len).collect();
    let mut weights = sample_prior(&rows, cfg.rank, cfg.prior_u_var(), cfg.prior_w_var, seed)?;
    if !cfg.learn_w {
        weights.core = DenseTensor::superdiagonal(cfg.rank, 2)?;
    }
    let model = TgpModel::new(maps, weights, cfg.noise_var, cfg.prior_u_var(), cfg.prior_w_var)?;
    let (a, b, c) = if side.is_some() {
        (cfg.a, cfg.b, cfg.c)
    } else {
        (1.0, 0.0, 0.0)
    };
    Ok(CfModel {
        model,
        offset: if cfg.center { ratings.mean() } else { 0.0 },
        n_users: n1,
        n_items: n2,
        a,
        b,
        c,
        side,
        clip: cfg.clip,
    })
}

impl CfModel {
    /// Featurised ratings with the offset removed.
    pub fn observations(&self, ratings: &RatingsData) -> Result<Vec<Observation>> {
        ratings
            .triples
            .iter()
            .map(|t| {
                Ok(Observation {
                    features: self.model.featurize(&[Coord::id(t.user), Coord::id(t.item)])?,
                    target: t.value - self.offset,
                })
            })
            .collect()
    }

    fn check(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.n_users {
            return Err(TgpError::IndexOutOfRange {
                index: i,
                size: self.n_users,
            });
        }
        if j >= self.n_items {
            return Err(TgpError::IndexOutOfRange {
                index: j,
                size: self.n_items,
            });
        }
        Ok(())
    }

    fn finish(&self, f: f64) -> f64 {
        let y = f + self.offset;
        if self.clip {
            y.clamp(RATING_RANGE.0, RATING_RANGE.1)
        } else {
            y
        }
    }

    /// Predicted rating from the reparametrised bilinear form.
    pub fn predict_rating(&self, i: usize, j: usize) -> Result<f64> {
        self.check(i, j)?;
        let w = &self.model.weights;
        let (u, v) = (&w.factors[0], &w.factors[1]);
        let mut left = u.row(i).to_vec();
        let mut right = v.row(j).to_vec();
        if let Some(s) = &self.side {
            accumulate_rows(&mut left, u, self.n_users, &s.user_sets[i], self.b);
            accumulate_rows(&mut right, v, self.n_items, &s.item_sets[j], self.c);
        }
        let r = right.len();
        let core = w.core.data();
        let f: f64 = left
            .iter()
            .enumerate()
            .map(|(k, &l)| l * dot(&core[k * r..(k + 1) * r], &right))
            .sum();
        Ok(self.finish(self.a * f))
    }

    /// Predicted rating through the generic feature-map path.
    pub fn predict_generic(&self, i: usize, j: usize) -> Result<f64> {
        self.check(i, j)?;
        Ok(self.finish(self.model.predict(&[Coord::id(i), Coord::id(j)])?))
    }

    pub fn rmse(&self, test: &RatingsData) -> Result<f64> {
        let preds = test
            .triples
            .iter()
            .map(|t| self.predict_rating(t.user, t.item))
            .collect::<Result<Vec<_>>>()?;
        let targets: Vec<f64> = test.triples.iter().map(|t| t.value).collect();
        rmse(&preds, &targets)
    }
}

fn accumulate_rows(acc: &mut [f64], m: &Matrix, base: usize, set: &[usize], weight: f64) {
    if weight == 0.0 {
        return;
    }
    for &k in set {
        for (a, &x) in acc.iter_mut().zip(m.row(base + k)) {
            *a += weight * x;
        }
    }
}

/// Root mean squared error.
pub fn rmse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(TgpError::mismatch(format!(
            "{} predictions for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if predictions.is_empty() {
        return Err(TgpError::Empty("rmse input"));
    }
    let sse: f64 = predictions.iter().zip(targets).map(|(p, t)| (p - t).powi(2)).sum();
    Ok((sse / predictions.len() as f64).sqrt())
}

/// Both sides of `(μ_u + L_u u)ᵀ(μ_v + L_v v) = [u; 1]ᵀ W [v; 1]` with
/// `W = [L_uᵀL_v, L_uᵀμ_v; μ_uᵀL_v, μ_uᵀμ_v]`.
pub fn bpmf_reparam_check(
    mu_u: &[f64],
    mu_v: &[f64],
    l_u: &Matrix,
    l_v: &Matrix,
    u: &[f64],
    v: &[f64],
) -> Result<(f64, f64)> {
    let r = mu_u.len();
    let square = |m: &Matrix| m.rows() == r && m.cols() == r;
    if mu_v.len() != r || u.len() != r || v.len() != r || !square(l_u) || !square(l_v) {
        return Err(TgpError::mismatch("BPMF check needs r-vectors and r×r factors"));
    }
    let affine = |mu: &[f64], l: &Matrix, x: &[f64]| -> Vec<f64> {
        (0..r).map(|i| mu[i] + dot(l.row(i), x)).collect()
    };
    let lhs = dot(&affine(mu_u, l_u, u), &affine(mu_v, l_v, v));

    let lut = l_u.transpose();
    let top_left = lut.matmul(l_v)?;
    let mut w = Matrix::zeros(r + 1, r + 1);
    for i in 0..r {
        for j in 0..r {
            w[(i, j)] = top_left[(i, j)];
        }
        w[(i, r)] = dot(lut.row(i), mu_v);
    }
    let ltv = l_v.transpose();
    for j in 0..r {
        w[(r, j)] = dot(mu_u, ltv.row(j));
    }
    w[(r, r)] = dot(mu_u, mu_v);
    let u1: Vec<f64> = u.iter().copied().chain([1.0]).collect();
    let v1: Vec<f64> = v.iter().copied().chain([1.0]).collect();
    let rhs: f64 = (0..=r).map(|i| u1[i] * dot(w.row(i), &v1)).sum();
    Ok((lhs, rhs))
}

/// Trains `build_cf_model(train, side, cfg, seed)` with SGD.
pub fn fit_cf(
    train: &RatingsData,
    valid: Option<&RatingsData>,
    side: Option<&SideInfo>,
    cfg: &CfConfig,
    sgd: &SgdConfig,
    seed: u64,
) -> Result<(CfModel, SgdOutcome)> {
    let mut cf = build_cf_model(train, side, cfg, seed)?;
    let train_obs = cf.observations(train)?;
    let valid_obs = match valid {
        Some(v) => cf.observations(v)?,
        None => Vec::new(),
    };
    let mut sgd = sgd.clone();
    sgd.learn_w = cfg.learn_w;
    let outcome = sgd_map(cf.model.clone(), &train_obs, &valid_obs, &sgd)?;
    cf.model = outcome.model.clone();
    Ok((cf, outcome))
}

/// One point of the hyperparameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfHyper {
    /// Prior standard deviation `σ_u` of factor entries.
    pub sigma_u: f64,
    pub noise_var: f64,
    pub step_u: f64,
    pub step_w: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl CfHyper {
    /// `cfg` and `sgd` with this point's values substituted.
    pub fn apply(&self, cfg: &CfConfig, sgd: &SgdConfig) -> (CfConfig, SgdConfig) {
        let mut cfg = cfg.clone();
        cfg.prior_u_var = Some(self.sigma_u * self.sigma_u);
        cfg.noise_var = self.noise_var;
        if cfg.use_side {
            cfg.a = self.a;
            cfg.b = self.b;
            cfg.c = self.c;
        }
        let mut sgd = sgd.clone();
        sgd.step_u = self.step_u;
        sgd.step_w = self.step_w;
        (cfg, sgd)
    }
}

/// Candidate values per hyperparameter; cells are their Cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfGrid {
    pub sigma_u: Vec<f64>,
    pub noise_var: Vec<f64>,
    pub step_u: Vec<f64>,
    #[serde(default = "zero_vec")]
    pub step_w: Vec<f64>,
    #[serde(default = "one_vec")]
    pub a: Vec<f64>,
    #[serde(default = "zero_vec")]
    pub b: Vec<f64>,
    #[serde(default = "zero_vec")]
    pub c: Vec<f64>,
}

fn zero_vec() -> Vec<f64> {
    vec![0.0]
}

fn one_vec() -> Vec<f64> {
    vec![1.0]
}

impl CfGrid {
    /// Fixed `W = I`.
    pub fn pmf() -> Self {
        CfGrid {
            sigma_u: vec![0.3, 0.1, 0.03],
            noise_var: vec![1.0, 0.1, 0.01, 0.001],
            step_u: vec![1e-5, 1e-6, 1e-7],
            step_w: zero_vec(),
            a: one_vec(),
            b: zero_vec(),
            c: zero_vec(),
        }
    }

    /// Learned `W`.
    pub fn learn_w() -> Self {
        CfGrid {
            sigma_u: vec![0.3, 0.1],
            noise_var: vec![1.0, 0.75],
            step_u: vec![1e-5, 1e-6],
            step_w: vec![1e-5, 1e-6],
            a: one_vec(),
            b: zero_vec(),
            c: zero_vec(),
        }
    }

    /// Learned `W` with side information.
    pub fn side() -> Self {
        CfGrid {
            a: vec![0.25, 0.5, 0.75],
            b: vec![0.15, 0.3, 0.45],
            c: vec![0.15, 0.3, 0.45],
            ..CfGrid::learn_w()
        }
    }

    /// Grid over `a`, `b`, `c` only, other values taken from `base`.
    pub fn side_weights_around(base: &CfHyper) -> Self {
        CfGrid {
            sigma_u: vec![base.sigma_u],
            noise_var: vec![base.noise_var],
            step_u: vec![base.step_u],
            step_w: vec![base.step_w],
            ..CfGrid::side()
        }
    }

    pub fn cells(&self) -> Vec<CfHyper> {
        let mut out = Vec::new();
        for &sigma_u in &self.sigma_u {
            for &noise_var in &self.noise_var {
                for &step_u in &self.step_u {
                    for &step_w in &self.step_w {
                        for &a in &self.a {
                            for &b in &self.b {
                                for &c in &self.c {
                                    out.push(CfHyper {
                                        sigma_u,
                                        noise_var,
                                        step_u,
                                        step_w,
                                        a,
                                        b,
                                        c,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Validation outcome of one grid cell; diverged cells have infinite RMSE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellResult {
    pub hyper: CfHyper,
    pub valid_rmse: f64,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    pub cells: Vec<CellResult>,
    pub best: CellResult,
}

/// Evaluates every cell on a `valid_fraction` hold-out carved from `train`,
/// stopping each run at its best validation epoch. Cells run in parallel.
pub fn grid_search(
    train: &RatingsData,
    side: Option<&SideInfo>,
    cfg: &CfConfig,
    sgd: &SgdConfig,
    grid: &CfGrid,
    valid_fraction: f64,
    seed: u64,
) -> Result<GridResult> {
    let (fit_idx, valid_idx) = crate::data::split_indices(train.len(), 1.0 - valid_fraction, seed)?;
    let fit = train.subset(&fit_idx);
    let valid = train.subset(&valid_idx);
    let cells = grid.cells();
    if cells.is_empty() {
        return Err(TgpError::Empty("hyperparameter grid"));
    }
    let results: Vec<CellResult> = cells
        .par_iter()
        .map(|h| {
            let (c, mut s) = h.apply(cfg, sgd);
            s.keep_best = true;
            match fit_cf(&fit, Some(&valid), side, &c, &s, seed) {
                Ok((_, out)) => {
                    let v = out
                        .trace
                        .iter()
                        .find(|r| r.iteration == out.best_epoch)
                        .and_then(|r| r.valid_rmse)
                        .unwrap_or(f64::INFINITY);
                    Ok(CellResult {
                        hyper: *h,
                        valid_rmse: v,
                        best_epoch: out.best_epoch,
                    })
                }
                Err(e) if e.is_numerical() => Ok(CellResult {
                    hyper: *h,
                    valid_rmse: f64::INFINITY,
                    best_epoch: 0,
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let best = *results
        .iter()
        .min_by(|a, b| a.valid_rmse.total_cmp(&b.valid_rmse))
        .expect("grid is non-empty");
    if !best.valid_rmse.is_finite() {
        return Err(TgpError::Diverged("every grid cell diverged".into()));
    }
    Ok(GridResult { cells: results, best })
}

/// Retrains on all of `train` with the tuned cell and its best epoch count.
pub fn fit_tuned(
    train: &RatingsData,
    side: Option<&SideInfo>,
    cfg: &CfConfig,
    sgd: &SgdConfig,
    best: &CellResult,
    seed: u64,
) -> Result<CfModel> {
    let (c, mut s) = best.hyper.apply(cfg, sgd);
    s.epochs = best.best_epoch.max(1);
    s.keep_best = false;
    Ok(fit_cf(train, None, side, &c, &s, seed)?.0)
}

/// One line of the evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub split: String,
    pub model_variant: String,
    pub r: usize,
    pub test_rmse: f64,
}

/// Writes `split,model_variant,r,test_rmse` rows.
pub fn write_report_csv(path: &Path, rows: &[ReportRow]) -> Result<()> {
    crate::persist::write_csv_atomic(path, rows)
}
