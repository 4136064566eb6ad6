//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p tgp --test acceptance`; append criterion numbers
//! (`-- 4 5`) to run a subset. The process exits non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use common::*;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};
use tgp::cf::bpmf_reparam_check;
use tgp::data::{default_data_dir, load_csv_regression, load_movielens_100k, split, split_indices, CsvSpec};
use tgp::experiments::{
    fit_rff_regression, movielens_table, regression_rmse, CfVariant, RffRegressionPlan, TablePlan, TableResult,
    TuningScope,
};
use tgp::features::{build_cholesky_features, build_nystrom, build_rff, hash_features, identity_features};
use tgp::inference::diagnostics::ess;
use tgp::inference::{hamiltonian, hmc, leapfrog, predictive_draws, HmcConfig};
use tgp::kernels::gram;
use tgp::linalg::dot;
use tgp::model::{sample_prior, Scratch};
use tgp::tensor::reconstruct;
use tgp::{Coord, GradientBundle, KernelSpec, Matrix, TgpModel, TuckerWeights};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn data_root() -> PathBuf {
    let root = default_data_dir();
    if root.is_relative() {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(root)
    } else {
        root
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
}

// ---------------------------------------------------------------- MovieLens

static TABLE: OnceLock<Result<TableResult, String>> = OnceLock::new();

/// Tuned once on split u1 and reused on all five; the side grid covers `a`,
/// `b`, `c` around the learned-W winner.
fn movielens() -> &'static Result<TableResult, String> {
    TABLE.get_or_init(|| {
        let dir = data_root().join("ml-100k");
        let ml = load_movielens_100k(&dir).map_err(|e| format!("MovieLens unavailable: {e}"))?;
        let mut plan = TablePlan::standard(15, [30, 150, 150]);
        plan.scope = TuningScope::Shared;
        plan.staged_side = true;
        plan.variants[0].patience = Some(5);
        for v in &mut plan.variants[1..] {
            v.eval_every = 5;
            v.patience = Some(4);
        }
        movielens_table(&ml, &plan, &mut |line| eprintln!("    {line}")).map_err(|e| e.to_string())
    })
}

fn fmt_splits(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ")
}

fn c1_pmf() -> Outcome {
    let t = match movielens() {
        Ok(t) => t,
        Err(e) => return outcome(false, e.clone()),
    };
    let m = t.mean(CfVariant::Pmf);
    outcome(
        (m - 0.9395).abs() <= 0.02,
        format!("mean test RMSE {m:.4} (0.9395 ± 0.02); splits {}", fmt_splits(&t.per_split(CfVariant::Pmf))),
    )
}

fn c2_ordering() -> Outcome {
    let t = match movielens() {
        Ok(t) => t,
        Err(e) => return outcome(false, e.clone()),
    };
    let (p, w, s) = (
        t.per_split(CfVariant::Pmf),
        t.per_split(CfVariant::LearnW),
        t.per_split(CfVariant::LearnWSide),
    );
    let (mp, mw, ms) = (mean(&p), mean(&w), mean(&s));
    let w_wins = p.iter().zip(&w).filter(|(p, w)| w < p).count();
    let s_wins = w.iter().zip(&s).filter(|(w, s)| s < w).count();
    let pass = mw < mp && ms <= mw - 0.015 && w_wins >= 4 && s_wins >= 4;
    outcome(
        pass,
        format!(
            "means pmf {mp:.4} > learn_w {mw:.4} > side {ms:.4} (gap {:.4} ≥ 0.015); per-split wins {w_wins}/5 and {s_wins}/5",
            mw - ms
        ),
    )
}

fn c3_side() -> Outcome {
    let t = match movielens() {
        Ok(t) => t,
        Err(e) => return outcome(false, e.clone()),
    };
    let m = t.mean(CfVariant::LearnWSide);
    outcome(
        m <= 0.915,
        format!("mean test RMSE {m:.4} (≤ 0.915); splits {}", fmt_splits(&t.per_split(CfVariant::LearnWSide))),
    )
}

// ---------------------------------------------------------------- gradients

fn c4_gradients() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for dims in [2, 3] {
        for r in [2, 5] {
            for n in [3, 7] {
                for seed in 0..3 {
                    let (model, xs, ys) = random_instance(dims, n, r, 10, 1000 + seed);
                    let data = observations(&model, &xs, &ys);
                    let g = model.grad_log_joint(&data, 1.0).unwrap().to_flat();
                    let fd = fd_gradient(&model, &data, 1e-5);
                    worst = worst.max(max_rel_err(&g, &fd));
                    count += 1;
                }
            }
        }
    }
    outcome(worst <= 1e-5, format!("{count} instances, worst relative error {worst:.2e} (≤ 1e-5)"))
}

// ---------------------------------------------------------------- full-rank oracle

fn c5_full_rank_oracle() -> Outcome {
    let n = 3;
    let noise = 0.1;
    let maps = vec![
        build_rff(&KernelSpec::se(1.0, 0.7), n, 1, 21).unwrap(),
        build_rff(&KernelSpec::se(1.0, 0.7), n, 1, 22).unwrap(),
    ];
    let core = sample_prior(&[n, n], n, 1.0, 1.0, 5).unwrap().core;
    let weights = TuckerWeights::new(core, vec![Matrix::identity(n), Matrix::identity(n)]).unwrap();
    let model = TgpModel::new(maps.clone(), weights, noise, 1.0, 1.0).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let point = |rng: &mut ChaCha8Rng| vec![Coord::scalar(rng.gen_range(-2.0..2.0)), Coord::scalar(rng.gen_range(-2.0..2.0))];
    let xs: Vec<Vec<Coord>> = (0..50).map(|_| point(&mut rng)).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|x| {
            let (a, b) = (x[0].values[0], x[1].values[0]);
            a.sin() * b.cos() + noise.sqrt() * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    let queries: Vec<Vec<Coord>> = (0..20).map(|_| point(&mut rng)).collect();
    let data = observations(&model, &xs, &ys);

    // Conjugate posterior mean on φ₁ ⊗ φ₂, row-major like the core.
    let kron_row = |x: &[Coord]| -> Vec<f64> {
        let a = maps[0].apply(&x[0]).unwrap().to_dense();
        let b = maps[1].apply(&x[1]).unwrap().to_dense();
        a.iter().flat_map(|p| b.iter().map(move |q| p * q)).collect()
    };
    let rows: Vec<Vec<f64>> = xs.iter().map(|x| kron_row(x)).collect();
    let phi = DMatrix::from_fn(50, n * n, |i, j| rows[i][j]);
    let precision = phi.transpose() * &phi / noise + DMatrix::identity(n * n, n * n);
    let rhs = phi.transpose() * DVector::from_vec(ys.clone()) / noise;
    let post_mean = precision.cholesky().expect("posterior precision is SPD").solve(&rhs);

    let mut cfg = HmcConfig::new(20, 0.05, 3000, 500, 4);
    cfg.learn_u = false;
    cfg.adapt = true;
    cfg.seed = 9;
    let chains = hmc(&model, &data, &cfg).unwrap();

    let mut agree = 0;
    let mut worst_z: f64 = 0.0;
    for q in &queries {
        let oracle = DVector::from_vec(kron_row(q)).dot(&post_mean);
        let per_chain: Vec<Vec<f64>> = chains
            .samples
            .iter()
            .map(|c| {
                let one = tgp::inference::ChainSet::from_samples(vec![c.clone()]);
                predictive_draws(&one, &maps, q).unwrap()
            })
            .collect();
        let pooled: Vec<f64> = per_chain.iter().flatten().copied().collect();
        let mcse = (sample_var(&pooled) / ess(&per_chain).unwrap().value).sqrt();
        let z = (mean(&pooled) - oracle).abs() / mcse;
        worst_z = worst_z.max(z);
        agree += (z <= 3.0) as usize;
    }
    outcome(
        agree >= 18,
        format!("{agree}/20 query points within 3 MCSE (need 18); largest |z| {worst_z:.2}; acceptance {:.2}", mean(&chains.accept_rate)),
    )
}

// ---------------------------------------------------------------- feature maps

fn c6_exact_features() -> Outcome {
    let kernel = KernelSpec::se(1.0, 1.0);
    let pts: Vec<Coord> = (0..50).map(|i| Coord::scalar(i as f64 * 0.37)).collect();
    let k = gram(&kernel, &pts).unwrap();
    let worst = |map: &tgp::FeatureMap| {
        let phi: Vec<Vec<f64>> = pts.iter().map(|p| map.apply(p).unwrap().to_dense()).collect();
        let mut w: f64 = 0.0;
        for i in 0..50 {
            for j in 0..50 {
                w = w.max((dot(&phi[i], &phi[j]) - k.row(i)[j]).abs());
            }
        }
        w
    };
    let chol = worst(&build_cholesky_features(pts.clone(), kernel.clone()).unwrap());
    let nys = worst(&build_nystrom(kernel, pts.clone()).unwrap());
    let mut identity_exact = true;
    for i in 0..50 {
        for j in 0..50 {
            let d = dot(&identity_features(i, 50).unwrap(), &identity_features(j, 50).unwrap());
            identity_exact &= d == if i == j { 1.0 } else { 0.0 };
        }
    }
    outcome(
        chol <= 1e-8 && nys <= 1e-8 && identity_exact,
        format!("max gram error: Cholesky {chol:.1e}, Nyström {nys:.1e} (≤ 1e-8); identity exact: {identity_exact}"),
    )
}

fn c7_rff() -> Outcome {
    let spec = KernelSpec::se(1.0, 1.0);
    let x = Coord::scalar(0.0);
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for dist in [0.5, 1.0, 2.0] {
        let y = Coord::scalar(dist);
        let est = (0..50u64)
            .map(|s| {
                let map = build_rff(&spec, 1000, 1, s).unwrap();
                dot(&map.apply(&x).unwrap().to_dense(), &map.apply(&y).unwrap().to_dense())
            })
            .sum::<f64>()
            / 50.0;
        let exact = spec.eval(&x, &y).unwrap();
        worst = worst.max((est - exact).abs());
        parts.push(format!("|x−y|={dist}: {est:.4} vs {exact:.4}"));
    }
    outcome(worst <= 0.02, format!("{}; worst error {worst:.4} (≤ 0.02)", parts.join(", ")))
}

fn c8_hashing() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Vec<f64> = (0..500).map(|_| rng.sample(StandardNormal)).collect();
    let y: Vec<f64> = x.iter().map(|v| 0.6 * v + 0.8 * rng.sample::<f64, _>(StandardNormal)).collect();
    let exact = dot(&x, &y);
    let seeds = 10_000u64;
    let mut vars = Vec::new();
    let mut unbiased = true;
    let mut parts = Vec::new();
    for m in [64, 128, 256] {
        let est: Vec<f64> = (0..seeds)
            .map(|s| dot(&hash_features(&x, m, s).unwrap(), &hash_features(&y, m, s).unwrap()))
            .collect();
        let v = sample_var(&est);
        let se = (v / seeds as f64).sqrt();
        let z = (mean(&est) - exact) / se;
        unbiased &= z.abs() <= 3.0;
        vars.push(v);
        parts.push(format!("m={m}: z {z:+.2}, var {v:.1}"));
    }
    let ratios = [vars[1] / vars[0], vars[2] / vars[1]];
    let halves = ratios.iter().all(|r| (0.375..=0.625).contains(r));
    outcome(
        unbiased && halves,
        format!(
            "{}; variance ratios {:.3} {:.3} (0.5 ± 25%)",
            parts.join(", "),
            ratios[0],
            ratios[1]
        ),
    )
}

// ---------------------------------------------------------------- prior convergence

/// Kolmogorov distribution tail `P(K > λ)`.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let s: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            let sign = if k as u64 % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * k * k * lambda * lambda).exp()
        })
        .sum();
    (2.0 * s).clamp(0.0, 1.0)
}

fn c9_prior_convergence() -> Outcome {
    let r = 2000;
    let mut entries = Vec::with_capacity(5000);
    // 50 independent draws of a 10 × 10 reconstruction.
    for seed in 0..50 {
        let w = sample_prior(&[10, 10], r, 1.0 / r as f64, 1.0, 500 + seed).unwrap();
        entries.extend_from_slice(reconstruct(&w).unwrap().data());
    }
    entries.sort_by(f64::total_cmp);
    let n = entries.len() as f64;
    let normal = Normal::new(0.0, 1.0).unwrap();
    let d = entries
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = normal.cdf(v);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max);
    let p = kolmogorov_tail((n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d);
    // Tabulated critical values of the Kolmogorov distribution.
    let table = (kolmogorov_tail(1.3581) - 0.05).abs() < 1e-3 && (kolmogorov_tail(1.6276) - 0.01).abs() < 1e-3;
    assert!(table, "Kolmogorov tail disagrees with its table");
    let v = sample_var(&entries);
    outcome(
        p > 0.01 && (0.9..=1.1).contains(&v),
        format!("{} entries: KS D {d:.4}, p {p:.3} (> 0.01); variance {v:.4} ([0.9, 1.1])", entries.len()),
    )
}

// ---------------------------------------------------------------- HMC mechanics

fn random_momentum(shape: &TuckerWeights, rng: &mut ChaCha8Rng) -> TuckerWeights {
    let mut p = shape.zeros_like();
    p.core.data_mut().iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
    for u in &mut p.factors {
        u.as_mut_slice().iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
    }
    p
}

fn c10_hmc_mechanics() -> Outcome {
    let (model, xs, ys) = random_instance(2, 4, 2, 20, 31);
    let data = observations(&model, &xs, &ys);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let steps = |eps: f64| HmcConfig::new(1, eps, 2, 1, 1).block_steps(2);

    // Forward, flip, back, flip.
    let p0 = random_momentum(&model.weights, &mut rng);
    let (mut m, mut p) = (model.clone(), p0.clone());
    leapfrog(&mut m, &mut p, &data, &steps(0.01), 30, true).unwrap();
    p.scale(-1.0);
    leapfrog(&mut m, &mut p, &data, &steps(0.01), 30, true).unwrap();
    p.scale(-1.0);
    let rev = m
        .weights
        .to_flat()
        .iter()
        .zip(model.weights.to_flat())
        .chain(p.to_flat().iter().zip(p0.to_flat()))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    // Energy error over a fixed trajectory length.
    let abs_dh = |eps: f64, l: usize, seed: u64| -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = random_momentum(&model.weights, &mut rng);
        let h0 = hamiltonian(&model, &p, &data);
        let mut m = model.clone();
        leapfrog(&mut m, &mut p, &data, &steps(eps), l, true).unwrap();
        (hamiltonian(&m, &p, &data) - h0).abs()
    };
    let median = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        0.5 * (v[v.len() / 2 - 1] + v[v.len() / 2])
    };
    let coarse = median((0..50).map(|s| abs_dh(0.01, 10, s)).collect());
    let fine = median((0..50).map(|s| abs_dh(0.0025, 40, s)).collect());
    let ratio = coarse / fine;

    let mut cfg = HmcConfig::new(10, 1e-5, 210, 10, 2);
    cfg.seed = 3;
    let set = hmc(&model, &data, &cfg).unwrap();
    let acc = set.accept_rate.iter().copied().fold(1.0, f64::min);
    outcome(
        rev <= 1e-8 && ratio >= 8.0 && acc >= 0.99,
        format!("reversibility error {rev:.1e} (≤ 1e-8); median |ΔH| ratio {ratio:.1} (≥ 8); acceptance at ε=1e-5 {acc:.3} (≥ 0.99)"),
    )
}

// ---------------------------------------------------------------- complexity

fn c11_complexity() -> Outcome {
    let m0 = 1000;
    let (model, xs, ys) = random_instance(3, 8, 4, 4 * m0, 12);
    let data = observations(&model, &xs, &ys);
    let mut grad = GradientBundle::zeros_like(&model.weights);
    let mut scratch = Scratch::default();
    let mut time = |m: usize| -> Duration {
        (0..15)
            .map(|_| {
                let t = Instant::now();
                model.grad_log_joint_into(&data[..m], 1.0, &mut grad, &mut scratch).unwrap();
                t.elapsed()
            })
            .min()
            .unwrap()
    };
    time(m0);
    let t: Vec<f64> = [m0, 2 * m0, 4 * m0].iter().map(|&m| time(m).as_secs_f64()).collect();
    let ratios = [t[1] / t[0], t[2] / t[1]];
    outcome(
        ratios.iter().all(|r| (1.6..=2.6).contains(r)),
        format!(
            "t(m) {:.2} ms, t(2m) {:.2} ms, t(4m) {:.2} ms; ratios {:.2} {:.2} ([1.6, 2.6])",
            t[0] * 1e3,
            t[1] * 1e3,
            t[2] * 1e3,
            ratios[0],
            ratios[1]
        ),
    )
}

// ---------------------------------------------------------------- decomposition

fn c12_decomposition() -> Outcome {
    let maps = vec![
        build_rff(&KernelSpec::se(1.0, 0.3), 25, 1, 1).unwrap(),
        build_rff(&KernelSpec::se(1.0, 0.3), 25, 1, 2).unwrap(),
    ];
    let model = TgpModel::from_prior(maps, 5, 0.1, 8).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        for j in 0..50 {
            let x = [Coord::scalar(-2.0 + 4.0 * i as f64 / 49.0), Coord::scalar(-2.0 + 4.0 * j as f64 / 49.0)];
            let total: f64 = model.additive_components(&x).unwrap().data().iter().sum();
            worst = worst.max((total - model.predict(&x).unwrap()).abs());
        }
    }
    outcome(worst <= 1e-8, format!("2500 grid points, largest |Σ components − f| {worst:.1e} (≤ 1e-8)"))
}

// ---------------------------------------------------------------- BPMF

fn c13_bpmf() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let r = rng.gen_range(1..=8);
        let mut v = |k: usize| -> Vec<f64> { (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let (mu_u, mu_v, u, x) = (v(r), v(r), v(r), v(r));
        let l_u = Matrix::from_vec(r, r, v(r * r)).unwrap();
        let l_v = Matrix::from_vec(r, r, v(r * r)).unwrap();
        let (lhs, rhs) = bpmf_reparam_check(&mu_u, &mu_v, &l_u, &l_v, &u, &x).unwrap();
        worst = worst.max((lhs - rhs).abs());
    }
    outcome(worst <= 1e-12, format!("1000 instances, largest |lhs − rhs| {worst:.1e} (≤ 1e-12)"))
}

// ---------------------------------------------------------------- California

/// Kernel hyperparameters were fixed beforehand from the exact-GP evidence on a
/// coarse grid over the whitened training half; chain lengths follow the
/// published schedule.
fn california_plan(rank: Option<usize>, seed: u64) -> RffRegressionPlan {
    let (iterations, warmup) = if rank.is_some() { (600, 300) } else { (350, 50) };
    let mut hmc = HmcConfig::new(20, 0.01, iterations, warmup, 4);
    hmc.adapt = true;
    hmc.seed = seed;
    RffRegressionPlan {
        groups: vec![vec![0], vec![1]],
        kernels: vec![KernelSpec::se(1.0, 0.05); 2],
        features: 25,
        rank,
        noise_var: 0.25,
        prior_u_var: None,
        prior_w_var: 1.0,
        hmc,
        seed,
    }
}

fn c14_regularisation() -> Outcome {
    let spec = CsvSpec {
        covariates: vec!["longitude".into(), "latitude".into()],
        target: "median_house_value".into(),
        log_columns: vec!["median_house_value".into()],
        delimiter: ',',
    };
    let all = match load_csv_regression(&data_root().join("california/cadata.csv"), &spec) {
        Ok(d) => d,
        Err(e) => return outcome(false, format!("California data unavailable: {e}")),
    };
    let mut wins = 0;
    let mut parts = Vec::new();
    for seed in 0..3u64 {
        let (rows, _) = split_indices(all.len(), 2000.0 / all.len() as f64, seed).unwrap();
        let (train, test) = split(&all.subset(&rows), 0.5, seed).unwrap();
        let rmse = |rank| {
            let (m, _) = fit_rff_regression(&train, &california_plan(rank, seed)).unwrap();
            regression_rmse(&m, &test).unwrap()
        };
        let (low, full) = (rmse(Some(5)), rmse(None));
        wins += (low <= full) as usize;
        parts.push(format!("seed {seed}: r=5 {low:.4} vs full {full:.4}"));
    }
    outcome(wins >= 2, format!("{}; r=5 no worse in {wins}/3 (need 2)", parts.join(", ")))
}

// ---------------------------------------------------------------- driver

type Criterion = (usize, &'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 14] = [
    (1, "MovieLens PMF reproduction", c1_pmf),
    (2, "MovieLens variant ordering", c2_ordering),
    (3, "MovieLens side-information target", c3_side),
    (4, "gradient vs finite differences", c4_gradients),
    (5, "HMC vs conjugate full-rank oracle", c5_full_rank_oracle),
    (6, "exact feature maps", c6_exact_features),
    (7, "random Fourier feature quality", c7_rff),
    (8, "hashing unbiasedness and variance", c8_hashing),
    (9, "prior convergence at r=2000", c9_prior_convergence),
    (10, "HMC mechanics", c10_hmc_mechanics),
    (11, "gradient cost linear in minibatch", c11_complexity),
    (12, "additive decomposition on a grid", c12_decomposition),
    (13, "BPMF reparametrisation identity", c13_bpmf),
    (14, "California r=5 vs full rank", c14_regularisation),
];

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, run) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        failed += (!result.pass) as usize;
        println!(
            "criterion {id:>2} {} {name}: {} [{:.1}s]",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
