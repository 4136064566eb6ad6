//! MAP estimation by minibatch stochastic gradient ascent on the log joint.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TraceRow;
use crate::error::{Result, TgpError};
use crate::model::{GradientBundle, Observation, Scratch, TgpModel};

/// Train RMSE above this multiple of its initial value aborts training.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

fn default_one() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

fn default_eval_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    /// `ε_u`, shared by every factor matrix.
    pub step_u: f64,
    /// `ε_w`.
    pub step_w: f64,
    pub minibatch: usize,
    pub epochs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub learn_w: bool,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    /// Per-epoch multiplier on both step sizes; 1 keeps them constant.
    #[serde(default = "default_one")]
    pub step_decay: f64,
    /// Return the parameters with the lowest validation RMSE seen at an evaluation.
    #[serde(default)]
    pub keep_best: bool,
    /// With `keep_best`, stop after this many evaluations without a new best.
    #[serde(default)]
    pub patience: Option<usize>,
}

impl SgdConfig {
    pub fn new(step_u: f64, step_w: f64, minibatch: usize, epochs: usize) -> Self {
        SgdConfig {
            step_u,
            step_w,
            minibatch,
            epochs,
            seed: 0,
            learn_w: true,
            eval_every: 1,
            step_decay: 1.0,
            keep_best: false,
            patience: None,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.step_u >= 0.0 && self.step_w >= 0.0) {
            return Err(TgpError::invalid("step sizes must be non-negative"));
        }
        if self.minibatch < 1 || self.minibatch > n {
            return Err(TgpError::invalid(format!(
                "minibatch size {} must lie in 1..={n}",
                self.minibatch
            )));
        }
        if !(self.step_decay > 0.0) {
            return Err(TgpError::invalid("step decay must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SgdOutcome {
    pub model: TgpModel,
    pub trace: Vec<TraceRow>,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
}

/// `θ ← θ + ε/2 · g` with per-block step sizes; W is left alone when `learn_w` is false.
pub fn ascent_step(model: &mut TgpModel, grad: &GradientBundle, step_w: f64, step_u: f64, learn_w: bool) {
    if learn_w {
        let a = 0.5 * step_w;
        for (w, g) in model.weights.core.data_mut().iter_mut().zip(grad.grad_w.data()) {
            *w += a * g;
        }
    }
    let a = 0.5 * step_u;
    for (u, g) in model.weights.factors.iter_mut().zip(&grad.grad_u) {
        for (x, gx) in u.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *x += a * gx;
        }
    }
}

/// Runs minibatch SGD from `model`'s current parameters.
///
/// Each epoch visits a seeded permutation of `train` in consecutive slices of
/// `minibatch`; when the minibatch covers all of `train` the natural order is
/// used so every step is a full-batch ascent step.
pub fn sgd_map(mut model: TgpModel, train: &[Observation], valid: &[Observation], cfg: &SgdConfig) -> Result<SgdOutcome> {
    model.validate()?;
    let n = train.len();
    if n == 0 {
        return Err(TgpError::Empty("training data"));
    }
    cfg.validate(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let scale = n as f64 / cfg.minibatch as f64;
    let mut grad = GradientBundle::zeros_like(&model.weights);
    let mut scratch = Scratch::default();

    let initial_rmse = model.rmse(train);
    let mut trace = vec![trace_row(&model, 0, train, valid)];
    let track_best = cfg.keep_best && !valid.is_empty();
    let mut best = track_best.then(|| (trace[0].valid_rmse.unwrap_or(f64::INFINITY), 0usize, model.clone()));
    let (mut step_u, mut step_w) = (cfg.step_u, cfg.step_w);
    let mut stale = 0usize;

    for epoch in 1..=cfg.epochs {
        if cfg.minibatch < n {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(cfg.minibatch) {
            let s = if chunk.len() == cfg.minibatch {
                scale
            } else {
                n as f64 / chunk.len() as f64
            };
            model.grad_log_joint_subset(train, chunk, s, &mut grad, &mut scratch)?;
            ascent_step(&mut model, &grad, step_w, step_u, cfg.learn_w);
        }
        step_u *= cfg.step_decay;
        step_w *= cfg.step_decay;

        if !model.weights.is_finite() {
            return Err(TgpError::Diverged(format!("non-finite parameters after epoch {epoch}")));
        }
        let last = epoch == cfg.epochs;
        if cfg.eval_every > 0 && (epoch % cfg.eval_every == 0 || last) {
            let row = trace_row(&model, epoch, train, valid);
            if !(row.train_rmse <= DIVERGENCE_FACTOR * initial_rmse) {
                return Err(TgpError::Diverged(format!(
                    "train RMSE {} after epoch {epoch} exceeds {DIVERGENCE_FACTOR}x the initial {initial_rmse}",
                    row.train_rmse
                )));
            }
            if let (Some(b), Some(v)) = (best.as_mut(), row.valid_rmse) {
                if v < b.0 {
                    *b = (v, epoch, model.clone());
                    stale = 0;
                } else {
                    stale += 1;
                }
            }
            trace.push(row);
            if cfg.patience.is_some_and(|p| track_best && stale >= p) {
                break;
            }
        }
    }
    Ok(match best {
        Some((_, epoch, m)) => SgdOutcome {
            model: m,
            trace,
            best_epoch: epoch,
        },
        None => SgdOutcome {
            model,
            trace,
            best_epoch: cfg.epochs,
        },
    })
}

fn trace_row(model: &TgpModel, epoch: usize, train: &[Observation], valid: &[Observation]) -> TraceRow {
    let sse = model.sse(train);
    TraceRow {
        iteration: epoch,
        train_rmse: (sse / train.len() as f64).sqrt(),
        valid_rmse: (!valid.is_empty()).then(|| model.rmse(valid)),
        log_joint: -sse / (2.0 * model.noise_var) + model.log_prior(),
        accept_rate: None,
    }
}
