//! Posterior-predictive summaries from retained HMC draws.

use serde::Serialize;

use super::hmc::ChainSet;
use crate::error::{Result, TgpError};
use crate::features::FeatureMap;
use crate::input::Coord;
use crate::model::{evaluate, Scratch};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictiveSummary {
    pub mean: f64,
    /// 2.5th percentile.
    pub lower: f64,
    /// 97.5th percentile.
    pub upper: f64,
}

/// Linear-interpolation quantile of sorted values, `q` in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean and central 95% interval of a set of draws.
pub fn summarize_draws(draws: &[f64]) -> Result<PredictiveSummary> {
    if draws.is_empty() {
        return Err(TgpError::Empty("predictive draws"));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(PredictiveSummary {
        mean: draws.iter().sum::<f64>() / draws.len() as f64,
        lower: quantile_sorted(&sorted, 0.025),
        upper: quantile_sorted(&sorted, 0.975),
    })
}

/// `f(x)` under every retained draw.
pub fn predictive_draws(chains: &ChainSet, maps: &[FeatureMap], x: &[Coord]) -> Result<Vec<f64>> {
    if maps.len() != x.len() {
        return Err(TgpError::mismatch(format!(
            "{} coordinates for {} feature maps",
            x.len(),
            maps.len()
        )));
    }
    let features = maps.iter().zip(x).map(|(m, c)| m.apply(c)).collect::<Result<Vec<_>>>()?;
    let mut scratch = Scratch::default();
    Ok(chains.iter().map(|w| evaluate(w, &features, &mut scratch)).collect())
}

/// Pointwise posterior-predictive mean and 2.5/97.5 percentiles of `f(x)`.
pub fn posterior_predict(chains: &ChainSet, maps: &[FeatureMap], x: &[Coord]) -> Result<PredictiveSummary> {
    if chains.total_draws() == 0 {
        return Err(TgpError::Empty("chains"));
    }
    summarize_draws(&predictive_draws(chains, maps, x)?)
}
