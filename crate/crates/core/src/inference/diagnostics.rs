//! Split-R̂ and effective sample size for scalar chains.

use serde::Serialize;

use super::hmc::ChainSet;
use crate::error::{Result, TgpError};

/// Fewest retained draws per chain accepted by the chain-set diagnostics.
pub const MIN_DRAWS: usize = 10;

/// A diagnostic value, flagged when the chains have no within-chain variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostic {
    pub value: f64,
    pub degenerate: bool,
}

/// Per-parameter values plus their mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticSummary {
    pub per_param: Vec<Diagnostic>,
    pub mean: f64,
    pub std: f64,
    pub degenerate: usize,
}

impl DiagnosticSummary {
    fn from_values(per_param: Vec<Diagnostic>) -> Self {
        let n = per_param.len() as f64;
        let mean = per_param.iter().map(|d| d.value).sum::<f64>() / n;
        let var = per_param.iter().map(|d| (d.value - mean).powi(2)).sum::<f64>() / n;
        let degenerate = per_param.iter().filter(|d| d.degenerate).count();
        DiagnosticSummary {
            per_param,
            mean,
            std: var.sqrt(),
            degenerate,
        }
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_var(x: &[f64], m: f64) -> f64 {
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Mean within-chain variance `W` and between-chain variance `B` for equal-length chains.
fn within_between(chains: &[&[f64]]) -> (f64, f64, f64) {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = chains.iter().zip(&means).map(|(c, &m)| sample_var(c, m)).sum::<f64>() / chains.len() as f64;
    let grand = mean(&means);
    let b = if chains.len() > 1 {
        n * sample_var(&means, grand)
    } else {
        0.0
    };
    (w, b, n)
}

/// True when every chain holds a single repeated value; tested exactly since a
/// rounded mean can leave a tiny positive variance.
fn constant_chains(chains: &[&[f64]]) -> bool {
    chains.iter().all(|c| c.iter().all(|v| *v == c[0]))
}

fn check_chains(chains: &[Vec<f64>], min_chains: usize) -> Result<usize> {
    if chains.len() < min_chains {
        return Err(TgpError::invalid(format!("need at least {min_chains} chains")));
    }
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    if n < 4 {
        return Err(TgpError::invalid("need at least 4 draws per chain"));
    }
    Ok(n)
}

/// Split-R̂: each chain is halved and the halves are treated as separate chains.
/// Chains are truncated to the shortest length.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<Diagnostic> {
    let n = check_chains(chains, 1)?;
    let half = n / 2;
    let mut parts: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        parts.push(&c[..half]);
        parts.push(&c[n - half..n]);
    }
    let (w, b, len) = within_between(&parts);
    if constant_chains(&parts) || !(w > 0.0) {
        return Ok(Diagnostic {
            value: 1.0,
            degenerate: true,
        });
    }
    let var_plus = (len - 1.0) / len * w + b / len;
    Ok(Diagnostic {
        value: (var_plus / w).sqrt(),
        degenerate: false,
    })
}

/// Multi-chain ESS from Geyer's initial monotone sequence estimator.
/// Chains are truncated to the shortest length.
pub fn ess(chains: &[Vec<f64>]) -> Result<Diagnostic> {
    let n = check_chains(chains, 1)?;
    let parts: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let total = (n * parts.len()) as f64;
    let (w, b, len) = within_between(&parts);
    if constant_chains(&parts) || !(w > 0.0) {
        return Ok(Diagnostic {
            value: total,
            degenerate: true,
        });
    }
    let var_plus = (len - 1.0) / len * w + b / len;
    let means: Vec<f64> = parts.iter().map(|c| mean(c)).collect();
    // Biased autocovariance, averaged over chains.
    let autocov = |lag: usize| -> f64 {
        parts
            .iter()
            .zip(&means)
            .map(|(c, &m)| {
                let s: f64 = (0..n - lag).map(|t| (c[t] - m) * (c[t + lag] - m)).sum();
                s / n as f64
            })
            .sum::<f64>()
            / parts.len() as f64
    };
    let rho = |lag: usize| 1.0 - (w - autocov(lag)) / var_plus;
    let mut tau = -1.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = rho(2 * k) + rho(2 * k + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        tau += 2.0 * pair;
        prev = pair;
        k += 1;
    }
    let tau = tau.max(1.0 / total.log10().max(1.0));
    Ok(Diagnostic {
        value: total / tau,
        degenerate: false,
    })
}

fn check_set(chains: &ChainSet) -> Result<Vec<Vec<Vec<f64>>>> {
    if chains.num_chains() < 2 {
        return Err(TgpError::invalid("diagnostics need at least 2 chains"));
    }
    if chains.samples.iter().any(|c| c.len() < MIN_DRAWS) {
        return Err(TgpError::invalid(format!("diagnostics need at least {MIN_DRAWS} draws per chain")));
    }
    Ok(chains.per_parameter())
}

/// Split-R̂ per scalar parameter, summarised as mean and standard deviation.
pub fn gelman_rubin(chains: &ChainSet) -> Result<DiagnosticSummary> {
    let params = check_set(chains)?;
    let vals = params.iter().map(|p| split_rhat(p)).collect::<Result<Vec<_>>>()?;
    Ok(DiagnosticSummary::from_values(vals))
}

/// ESS per scalar parameter, summarised as mean and standard deviation.
pub fn effective_sample_size(chains: &ChainSet) -> Result<DiagnosticSummary> {
    let params = check_set(chains)?;
    let vals = params.iter().map(|p| ess(p)).collect::<Result<Vec<_>>>()?;
    Ok(DiagnosticSummary::from_values(vals))
}
