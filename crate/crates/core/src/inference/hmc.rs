//! Hamiltonian Monte Carlo over the core tensor and factor matrices.
//!
//! Potential energy is the negative log joint, including the factor prior.
//! Momenta are standard normal per parameter block; each block moves with its
//! own step size.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TraceRow;
use crate::error::{Result, TgpError};
use crate::linalg::Matrix;
use crate::model::{fill_normal, GradientBundle, Observation, Scratch, TgpModel};
use crate::tensor::TuckerWeights;

fn default_true() -> bool {
    true
}

fn default_target_accept() -> f64 {
    0.65
}

/// Where each chain starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HmcInit {
    /// Fresh draw from the prior per chain.
    #[default]
    Prior,
    /// The template model's parameters.
    Template,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmcConfig {
    /// Leapfrog steps `L` per iteration.
    pub leapfrog: usize,
    pub step_w: f64,
    /// One step size shared by every factor, or one per factor.
    pub step_u: Vec<f64>,
    /// Iterations per chain, warmup included.
    pub iterations: usize,
    pub warmup: usize,
    pub chains: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub learn_w: bool,
    /// False holds every factor matrix at the template's values.
    #[serde(default = "default_true")]
    pub learn_u: bool,
    /// Dual-averaging adaptation of a global step multiplier during warmup.
    #[serde(default)]
    pub adapt: bool,
    #[serde(default = "default_target_accept")]
    pub target_accept: f64,
    #[serde(default)]
    pub init: HmcInit,
}

impl HmcConfig {
    pub fn new(leapfrog: usize, step: f64, iterations: usize, warmup: usize, chains: usize) -> Self {
        HmcConfig {
            leapfrog,
            step_w: step,
            step_u: vec![step],
            iterations,
            warmup,
            chains,
            seed: 0,
            learn_w: true,
            learn_u: true,
            adapt: false,
            target_accept: 0.65,
            init: HmcInit::Prior,
        }
    }

    pub fn validate(&self, order: usize) -> Result<()> {
        if self.leapfrog < 1 {
            return Err(TgpError::invalid("leapfrog steps must be at least 1"));
        }
        if self.chains < 1 {
            return Err(TgpError::invalid("at least one chain is required"));
        }
        if self.warmup >= self.iterations {
            return Err(TgpError::invalid("warmup must be shorter than the iteration count"));
        }
        if self.step_u.len() != 1 && self.step_u.len() != order {
            return Err(TgpError::mismatch(format!(
                "{} factor step sizes for {order} factors",
                self.step_u.len()
            )));
        }
        if !self.learn_w && !self.learn_u {
            return Err(TgpError::invalid("at least one of W and U must be sampled"));
        }
        if !(self.step_w > 0.0) || self.step_u.iter().any(|s| !(*s > 0.0)) {
            return Err(TgpError::invalid("step sizes must be positive"));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(TgpError::invalid("target acceptance must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Per-block steps; a held factor gets step zero, which leaves both it and
    /// its momentum unchanged through the leapfrog.
    pub fn block_steps(&self, order: usize) -> BlockSteps {
        let u = (0..order)
            .map(|d| if self.learn_u { self.step_u[d.min(self.step_u.len() - 1)] } else { 0.0 })
            .collect();
        BlockSteps { w: self.step_w, u }
    }
}

/// Step sizes per parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSteps {
    pub w: f64,
    pub u: Vec<f64>,
}

impl BlockSteps {
    fn scaled(&self, s: f64) -> BlockSteps {
        BlockSteps {
            w: self.w * s,
            u: self.u.iter().map(|x| x * s).collect(),
        }
    }
}

/// Post-warmup draws from every chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSet {
    pub samples: Vec<Vec<TuckerWeights>>,
    /// Post-warmup acceptance rate per chain.
    pub accept_rate: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Proposals rejected for a non-finite Hamiltonian, per chain.
    pub nonfinite: Vec<usize>,
    /// Final step multiplier per chain; 1 unless adapted.
    pub step_scale: Vec<f64>,
    pub trace: Vec<Vec<TraceRow>>,
}

impl ChainSet {
    pub fn from_samples(samples: Vec<Vec<TuckerWeights>>) -> Self {
        let c = samples.len();
        ChainSet {
            samples,
            accept_rate: vec![1.0; c],
            seeds: (0..c as u64).collect(),
            nonfinite: vec![0; c],
            step_scale: vec![1.0; c],
            trace: vec![Vec::new(); c],
        }
    }

    pub fn num_chains(&self) -> usize {
        self.samples.len()
    }

    pub fn total_draws(&self) -> usize {
        self.samples.iter().map(Vec::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TuckerWeights> {
        self.samples.iter().flatten()
    }

    /// `draws[p][c][t]`: parameter `p` of draw `t` in chain `c`, in [`TuckerWeights::to_flat`] order.
    pub fn per_parameter(&self) -> Vec<Vec<Vec<f64>>> {
        let Some(first) = self.iter().next() else {
            return Vec::new();
        };
        let p = first.param_count();
        let mut out = vec![vec![Vec::new(); self.samples.len()]; p];
        for (c, chain) in self.samples.iter().enumerate() {
            for s in chain {
                for (i, v) in s.to_flat().into_iter().enumerate() {
                    out[i][c].push(v);
                }
            }
        }
        out
    }
}

/// `½ Σ p²` over every block.
pub fn kinetic(momentum: &TuckerWeights) -> f64 {
    0.5 * momentum.sum_sq()
}

/// `−log p(y, U, W) + ½ Σ p²`.
pub fn hamiltonian(model: &TgpModel, momentum: &TuckerWeights, data: &[Observation]) -> f64 {
    -model.log_joint(data) + kinetic(momentum)
}

fn full_gradient(model: &TgpModel, data: &[Observation], grad: &mut GradientBundle, scratch: &mut Scratch) -> Result<()> {
    let scale = if data.is_empty() { 0.0 } else { 1.0 };
    model.grad_log_joint_into(data, scale, grad, scratch)
}

fn add_blocks(
    core: &mut [f64],
    factors: &mut [Matrix],
    src_core: &[f64],
    src_factors: &[Matrix],
    steps: &BlockSteps,
    coef: f64,
    learn_w: bool,
) {
    if learn_w {
        let a = coef * steps.w;
        core.iter_mut().zip(src_core).for_each(|(x, g)| *x += a * g);
    }
    for ((u, g), eps) in factors.iter_mut().zip(src_factors).zip(&steps.u) {
        let a = coef * eps;
        u.as_mut_slice().iter_mut().zip(g.as_slice()).for_each(|(x, g)| *x += a * g);
    }
}

/// `L` leapfrog steps: half momentum step, alternating full position and
/// momentum steps, and a closing half momentum step.
pub fn leapfrog(
    model: &mut TgpModel,
    momentum: &mut TuckerWeights,
    data: &[Observation],
    steps: &BlockSteps,
    l: usize,
    learn_w: bool,
) -> Result<()> {
    let mut grad = GradientBundle::zeros_like(&model.weights);
    let mut scratch = Scratch::default();
    full_gradient(model, data, &mut grad, &mut scratch)?;
    let p = momentum;
    add_blocks(p.core.data_mut(), &mut p.factors, grad.grad_w.data(), &grad.grad_u, steps, 0.5, learn_w);
    for step in 0..l {
        let w = &mut model.weights;
        add_blocks(w.core.data_mut(), &mut w.factors, p.core.data(), &p.factors, steps, 1.0, learn_w);
        full_gradient(model, data, &mut grad, &mut scratch)?;
        let coef = if step + 1 == l { 0.5 } else { 1.0 };
        add_blocks(p.core.data_mut(), &mut p.factors, grad.grad_w.data(), &grad.grad_u, steps, coef, learn_w);
    }
    Ok(())
}

fn draw_momentum(shape: &TuckerWeights, rng: &mut ChaCha8Rng, learn_w: bool) -> TuckerWeights {
    let mut p = shape.zeros_like();
    if learn_w {
        p.core.data_mut().iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
    }
    for u in &mut p.factors {
        u.as_mut_slice().iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
    }
    p
}

/// Dual-averaging state for the log step multiplier.
struct DualAveraging {
    mu: f64,
    h_bar: f64,
    log_eps: f64,
    log_eps_bar: f64,
    m: f64,
    target: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(target: f64) -> Self {
        DualAveraging {
            mu: 10f64.ln(),
            h_bar: 0.0,
            log_eps: 0.0,
            log_eps_bar: 0.0,
            m: 0.0,
            target,
        }
    }

    fn update(&mut self, accept_prob: f64) {
        self.m += 1.0;
        let w = 1.0 / (self.m + Self::T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept_prob);
        self.log_eps = self.mu - self.m.sqrt() / Self::GAMMA * self.h_bar;
        let eta = self.m.powf(-Self::KAPPA);
        self.log_eps_bar = eta * self.log_eps + (1.0 - eta) * self.log_eps_bar;
    }
}

struct ChainResult {
    samples: Vec<TuckerWeights>,
    accept_rate: f64,
    nonfinite: usize,
    step_scale: f64,
    trace: Vec<TraceRow>,
}

fn run_chain(template: &TgpModel, data: &[Observation], cfg: &HmcConfig, seed: u64) -> Result<ChainResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = template.clone();
    if cfg.init == HmcInit::Prior {
        let init_seed: u64 = rng.gen();
        if cfg.learn_w {
            fill_normal(model.weights.core.data_mut(), template.prior_w_var.sqrt(), init_seed, 0);
        }
        if cfg.learn_u {
            for (d, u) in model.weights.factors.iter_mut().enumerate() {
                fill_normal(u.as_mut_slice(), template.prior_u_var.sqrt(), init_seed, d as u64 + 1);
            }
        }
    }
    let base = cfg.block_steps(model.order());
    let mut adapt = cfg.adapt.then(|| DualAveraging::new(cfg.target_accept));
    let mut scale = 1.0;
    let mut samples = Vec::with_capacity(cfg.iterations - cfg.warmup);
    let mut trace = Vec::with_capacity(cfg.iterations);
    let (mut accepted, mut nonfinite) = (0usize, 0usize);

    for it in 0..cfg.iterations {
        let steps = base.scaled(scale);
        let mut p = draw_momentum(&model.weights, &mut rng, cfg.learn_w);
        let h0 = hamiltonian(&model, &p, data);
        let mut proposal = model.clone();
        leapfrog(&mut proposal, &mut p, data, &steps, cfg.leapfrog, cfg.learn_w)?;
        let h1 = hamiltonian(&proposal, &p, data);
        let u: f64 = rng.gen();
        let accept_prob = if h1.is_finite() && h0.is_finite() {
            (h0 - h1).exp().min(1.0)
        } else {
            nonfinite += 1;
            0.0
        };
        let accept = h1.is_finite() && u <= (h0 - h1).exp();
        if accept {
            model = proposal;
        }
        if nonfinite * 2 > it + 1 && it + 1 >= 10 {
            return Err(TgpError::Numerical(format!(
                "{nonfinite} of {} proposals had a non-finite Hamiltonian; reduce the step sizes",
                it + 1
            )));
        }
        if it < cfg.warmup {
            if let Some(da) = adapt.as_mut() {
                da.update(accept_prob);
                scale = if it + 1 == cfg.warmup {
                    da.log_eps_bar.exp()
                } else {
                    da.log_eps.exp()
                };
            }
        } else {
            accepted += accept as usize;
            samples.push(model.weights.clone());
        }
        let kept = (it + 1).saturating_sub(cfg.warmup);
        trace.push(TraceRow {
            iteration: it + 1,
            train_rmse: model.rmse(data),
            valid_rmse: None,
            log_joint: model.log_joint(data),
            accept_rate: (kept > 0).then(|| accepted as f64 / kept as f64),
        });
    }
    Ok(ChainResult {
        accept_rate: accepted as f64 / samples.len() as f64,
        samples,
        nonfinite,
        step_scale: scale,
        trace,
    })
}

/// Runs `cfg.chains` independent chains in parallel; chain `c` is seeded with `cfg.seed + c`.
pub fn hmc(template: &TgpModel, data: &[Observation], cfg: &HmcConfig) -> Result<ChainSet> {
    template.validate()?;
    cfg.validate(template.order())?;
    let seeds: Vec<u64> = (0..cfg.chains as u64).map(|c| cfg.seed.wrapping_add(c)).collect();
    let results = seeds
        .par_iter()
        .map(|&s| run_chain(template, data, cfg, s))
        .collect::<Result<Vec<_>>>()?;
    let mut set = ChainSet {
        samples: Vec::new(),
        accept_rate: Vec::new(),
        seeds,
        nonfinite: Vec::new(),
        step_scale: Vec::new(),
        trace: Vec::new(),
    };
    for r in results {
        set.samples.push(r.samples);
        set.accept_rate.push(r.accept_rate);
        set.nonfinite.push(r.nonfinite);
        set.step_scale.push(r.step_scale);
        set.trace.push(r.trace);
    }
    Ok(set)
}
