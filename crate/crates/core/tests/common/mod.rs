//! Random instances and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tgp::features::{build_rff, side_augmented};
use tgp::model::sample_prior;
use tgp::{Coord, FeatureMap, KernelSpec, Observation, TgpModel};

/// Visits every multi-index of `dims`, last index fastest.
pub fn for_each_index(dims: &[usize], mut f: impl FnMut(&[usize])) {
    let total: usize = dims.iter().product();
    let mut idx = vec![0; dims.len()];
    for _ in 0..total {
        f(&idx);
        for d in (0..dims.len()).rev() {
            idx[d] += 1;
            if idx[d] < dims[d] {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// Feature map for dimension `d`: cycles through identity, random Fourier and side-augmented maps.
pub fn map_for(d: usize, n: usize, seed: u64) -> FeatureMap {
    match d % 3 {
        0 => FeatureMap::identity(n),
        1 => build_rff(&KernelSpec::se(1.0, 0.8), n, 1, seed + d as u64).unwrap(),
        _ => {
            let side_len = 2;
            let card = n - side_len;
            let sets = (0..card).map(|i| (0..side_len).filter(|k| (i + k) % 2 == 0).collect()).collect();
            side_augmented(card, side_len, sets, 0.9, 0.6).unwrap()
        }
    }
}

fn coord_for(map: &FeatureMap, rng: &mut ChaCha8Rng) -> Coord {
    match map {
        FeatureMap::Identity { cardinality } => Coord::id(rng.gen_range(0..*cardinality)),
        FeatureMap::SideAugmented { cardinality, .. } => Coord::id(rng.gen_range(0..*cardinality)),
        _ => Coord::scalar(rng.gen_range(-2.0..2.0)),
    }
}

/// A `D`-dimensional model with `n` features per dimension and rank `r`,
/// plus `count` noisy observations of a random target.
pub fn random_instance(dims: usize, n: usize, r: usize, count: usize, seed: u64) -> (TgpModel, Vec<Vec<Coord>>, Vec<f64>) {
    let maps: Vec<FeatureMap> = (0..dims).map(|d| map_for(d, n, seed)).collect();
    let weights = sample_prior(&vec![n; dims], r, 1.0 / r as f64, 1.0, seed).unwrap();
    let model = TgpModel::new(maps, weights, 0.3, 0.7, 1.3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
    let xs: Vec<Vec<Coord>> = (0..count)
        .map(|_| model.maps.iter().map(|m| coord_for(m, &mut rng)).collect())
        .collect();
    let ys: Vec<f64> = (0..count).map(|_| rng.gen_range(-1.5..1.5)).collect();
    (model, xs, ys)
}

pub fn observations(model: &TgpModel, xs: &[Vec<Coord>], ys: &[f64]) -> Vec<Observation> {
    model.observations(xs, ys).unwrap()
}

/// `f(x)` through the full-rank tensor `θ = W ×_d U^(d)ᵀ` and `⊗_d φ_d(x)`, by explicit loops.
pub fn oracle_predict(model: &TgpModel, x: &[Coord]) -> f64 {
    let w = &model.weights;
    let phi: Vec<Vec<f64>> = model.maps.iter().zip(x).map(|(m, c)| m.apply(c).unwrap().to_dense()).collect();
    let n: Vec<usize> = phi.iter().map(Vec::len).collect();
    let r: Vec<usize> = w.core.dims().to_vec();
    let mut total = 0.0;
    for_each_index(&n, |i| {
        let mut theta = 0.0;
        for_each_index(&r, |j| {
            let mut t = w.core.get(j).unwrap();
            for d in 0..i.len() {
                t *= w.factors[d].row(i[d])[j[d]];
            }
            theta += t;
        });
        let mut k = 1.0;
        for d in 0..i.len() {
            k *= phi[d][i[d]];
        }
        total += theta * k;
    });
    total
}

/// The log joint written out term by term.
pub fn oracle_log_joint(model: &TgpModel, xs: &[Vec<Coord>], ys: &[f64]) -> f64 {
    let mut sse = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let r = y - oracle_predict(model, x);
        sse += r * r;
    }
    let mut tr = 0.0;
    for u in &model.weights.factors {
        for i in 0..u.rows() {
            for j in 0..u.cols() {
                tr += u.row(i)[j] * u.row(i)[j];
            }
        }
    }
    let ww: f64 = model.weights.core.data().iter().map(|v| v * v).sum();
    -sse / (2.0 * model.noise_var) - tr / (2.0 * model.prior_u_var) - ww / (2.0 * model.prior_w_var)
}

/// Central finite differences of the log joint, flattened like `TuckerWeights::to_flat`.
pub fn fd_gradient(model: &TgpModel, data: &[Observation], h: f64) -> Vec<f64> {
    let base = model.weights.to_flat();
    let mut out = Vec::with_capacity(base.len());
    let mut m = model.clone();
    for p in 0..base.len() {
        let mut eval = |delta: f64| {
            let mut v = base.clone();
            v[p] += delta;
            m.weights = unflatten(model, &v);
            m.log_joint(data)
        };
        let (plus, minus) = (eval(h), eval(-h));
        out.push((plus - minus) / (2.0 * h));
    }
    out
}

pub fn unflatten(model: &TgpModel, flat: &[f64]) -> tgp::TuckerWeights {
    let mut w = model.weights.clone();
    let nc = w.core.len();
    w.core.data_mut().copy_from_slice(&flat[..nc]);
    let mut at = nc;
    for u in &mut w.factors {
        let len = u.as_slice().len();
        u.as_mut_slice().copy_from_slice(&flat[at..at + len]);
        at += len;
    }
    w
}

/// Largest coordinate-wise relative error, each coordinate scaled by `max(|a|, |b|)`.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let scale = x.abs().max(y.abs());
            if scale == 0.0 {
                0.0
            } else {
                (x - y).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}
