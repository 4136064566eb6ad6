//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use tgp::cf::{fit_cf, grid_search, CfModel, ReportRow};
use tgp::data::{default_data_dir, load_csv_regression, load_movielens_100k, load_triples, split, split_indices, CsvSpec, RegressionDataset};
use tgp::experiments::{fit_regression_on_grid, regression_rmse, CfVariant, RegressionPlan, Trainer as PlanTrainer};
use tgp::features::build_rff;
use tgp::inference::diagnostics::{ess, split_rhat};
use tgp::inference::write_trace_csv;
use tgp::model::{sample_prior, Scratch};
use tgp::persist::{ModelFile, RegressionModel};
use tgp::{Coord, GradientBundle, KernelSpec, TgpModel};

use crate::config::{DataSource, RunConfig, Shading, Trainer};
use crate::error::{CliError, CliResult};
use crate::output::{chains_csv, ensure_dir, pgm, read_chains, write_csv, write_text};

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Globals {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub data_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub quiet: bool,
}

impl Globals {
    fn say(&self, msg: &str) {
        if !self.quiet {
            println!("{msg}");
        }
    }

    fn data_dir(&self) -> PathBuf {
        self.data_dir.clone().unwrap_or_else(default_data_dir)
    }

    /// The config named by `--config` with `--seed` and `--out-dir` applied.
    fn load_config(&self) -> CliResult<Option<RunConfig>> {
        let Some(path) = &self.config else {
            return Ok(None);
        };
        let (mut cfg, _) = RunConfig::load(path)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = &self.out_dir {
            cfg.output.dir = d.clone();
        }
        Ok(Some(cfg))
    }

    fn out_dir(&self, cfg: Option<&RunConfig>) -> CliResult<PathBuf> {
        let dir = match (&self.out_dir, cfg) {
            (Some(d), _) => d.clone(),
            (None, Some(c)) => c.output.dir.clone(),
            (None, None) => PathBuf::from("."),
        };
        ensure_dir(&dir)?;
        Ok(dir)
    }
}

fn resolve(data_dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        data_dir.join(p)
    }
}

#[derive(Serialize)]
struct Metric {
    metric: &'static str,
    value: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: String,
    command: &'a str,
    seed: u64,
    data_dir: String,
    out_dir: String,
    /// The resolved configuration; rerunning `train` on it reproduces every CSV output.
    config: String,
    created_unix: u64,
}

fn version() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

fn write_manifest(dir: &Path, cfg: &RunConfig, data_dir: &Path) -> CliResult<()> {
    let config = toml::to_string(cfg).map_err(|e| CliError::Input(format!("config echo: {e}")))?;
    write_text(&dir.join("config.toml"), &config)?;
    let m = Manifest {
        version: version(),
        command: "train",
        seed: cfg.seed,
        data_dir: data_dir.display().to_string(),
        out_dir: dir.display().to_string(),
        config,
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
    };
    let json = serde_json::to_string_pretty(&m).map_err(|e| CliError::Input(format!("manifest: {e}")))?;
    write_text(&dir.join("manifest.json"), &(json + "\n"))
}

// ---------------------------------------------------------------- train

pub fn train(g: &Globals) -> CliResult<()> {
    let cfg = g
        .load_config()?
        .ok_or_else(|| CliError::Input("train needs --config".into()))?;
    let data_dir = g.data_dir();
    let dir = g.out_dir(Some(&cfg))?;
    let path = resolve(&data_dir, &cfg.data.path());
    match cfg.data.source {
        DataSource::Movielens => train_cf(g, &cfg, &path, cfg.data.split, &dir)?,
        DataSource::Csv => train_regression(g, &cfg, &path, &dir)?,
    }
    write_manifest(&dir, &cfg, &data_dir)?;
    g.say(&format!("wrote {}", dir.display()));
    Ok(())
}

fn variant(cfg: &RunConfig) -> CfVariant {
    match (cfg.cf.learn_w, cfg.cf.use_side) {
        (false, false) => CfVariant::Pmf,
        (true, false) => CfVariant::LearnW,
        (_, true) => CfVariant::LearnWSide,
    }
}

fn train_cf(g: &Globals, cfg: &RunConfig, path: &Path, k: usize, dir: &Path) -> CliResult<()> {
    let Trainer::Sgd(sgd) = cfg.trainer() else {
        return Err(CliError::Input("train.hmc: rating models train with [train.sgd]".into()));
    };
    let ml = load_movielens_100k(path)?;
    let (train, test) = &ml.splits[k - 1];
    let side = cfg.cf.use_side.then_some(&ml.side);
    let mut sgd = sgd.clone();
    sgd.seed = cfg.seed;
    let mut cf_cfg = cfg.cf_config();
    if cfg.cf.tune {
        let grid = cfg.cf.grid.clone().unwrap_or_else(|| variant(cfg).default_grid());
        let found = grid_search(train, side, &cf_cfg, &sgd, &grid, cfg.cf.valid_fraction, cfg.seed)?;
        write_csv(
            &dir.join("tuning.csv"),
            &found
                .cells
                .iter()
                .map(|c| TuningRow {
                    sigma_u: c.hyper.sigma_u,
                    noise_var: c.hyper.noise_var,
                    step_u: c.hyper.step_u,
                    step_w: c.hyper.step_w,
                    a: c.hyper.a,
                    b: c.hyper.b,
                    c: c.hyper.c,
                    valid_rmse: c.valid_rmse,
                    best_epoch: c.best_epoch,
                })
                .collect::<Vec<_>>(),
        )?;
        let (c, mut s) = found.best.hyper.apply(&cf_cfg, &sgd);
        s.epochs = found.best.best_epoch.max(1);
        s.keep_best = false;
        g.say(&format!(
            "tuned {:?}: validation RMSE {:.4} after {} epochs",
            found.best.hyper, found.best.valid_rmse, s.epochs
        ));
        cf_cfg = c;
        sgd = s;
    }
    let (model, outcome) = fit_cf(train, None, side, &cf_cfg, &sgd, cfg.seed)?;
    let test_rmse = model.rmse(test)?;
    g.say(&format!("split u{k}: {} test RMSE {test_rmse:.4}", variant(cfg).name()));
    ModelFile::Cf(model).save(&dir.join("model.tgp"))?;
    write_trace_csv(&dir.join("metrics.csv"), &outcome.trace)?;
    write_csv(
        &dir.join("report.csv"),
        &[ReportRow {
            split: format!("u{k}"),
            model_variant: variant(cfg).name().to_string(),
            r: cfg.model.rank,
            test_rmse,
        }],
    )?;
    Ok(())
}

#[derive(Serialize)]
struct TuningRow {
    sigma_u: f64,
    noise_var: f64,
    step_u: f64,
    step_w: f64,
    a: f64,
    b: f64,
    c: f64,
    valid_rmse: f64,
    best_epoch: usize,
}

fn load_regression_split(cfg: &RunConfig, path: &Path) -> CliResult<(RegressionDataset, RegressionDataset)> {
    let spec = cfg.data.csv_spec().expect("csv data");
    let mut all = load_csv_regression(path, &spec)?;
    if let Some(m) = cfg.data.subsample {
        if m < 2 || m > all.len() {
            return Err(CliError::Input(format!(
                "data.subsample: {m} rows requested from {} in {}",
                all.len(),
                path.display()
            )));
        }
        if m < all.len() {
            let (keep, _) = split_indices(all.len(), m as f64 / all.len() as f64, cfg.seed)?;
            all = all.subset(&keep);
        }
    }
    Ok(split(&all, cfg.data.train_fraction, cfg.seed)?)
}

fn train_regression(g: &Globals, cfg: &RunConfig, path: &Path, dir: &Path) -> CliResult<()> {
    let (train, test) = load_regression_split(cfg, path)?;
    let trainer = match cfg.trainer() {
        Trainer::Sgd(s) => {
            let mut s = s.clone();
            s.seed = cfg.seed;
            PlanTrainer::Sgd(s)
        }
        Trainer::Hmc(h) => {
            let mut h = h.clone();
            h.seed = cfg.seed;
            PlanTrainer::Hmc(h)
        }
    };
    let plan = RegressionPlan {
        groups: cfg.data.groups(),
        features: cfg.model.features.clone(),
        rank: (!cfg.model.full_rank).then_some(cfg.model.rank),
        noise_var: cfg.model.noise_var,
        prior_u_var: cfg.model.prior_u_var,
        prior_w_var: cfg.model.prior_w_var,
        trainer,
        seed: cfg.seed,
    };
    // Grid axes span the held-out rows too, so every test point lies on the grid.
    let fit = fit_regression_on_grid(&train, &test.inputs, &plan)?;
    let train_rmse = regression_rmse(&fit.model, &train)?;
    let test_rmse = regression_rmse(&fit.model, &test)?;
    g.say(&format!("train RMSE {train_rmse:.4}, test RMSE {test_rmse:.4}"));
    if let Some(chains) = &fit.chains {
        write_text(&dir.join("chains.csv"), &chains_csv(chains))?;
        g.say(&format!("acceptance per chain {:?}", chains.accept_rate));
    }
    ModelFile::Regression(fit.model).save(&dir.join("model.tgp"))?;
    write_trace_csv(&dir.join("metrics.csv"), &fit.trace)?;
    write_csv(
        &dir.join("summary.csv"),
        &[
            Metric {
                metric: "train_rmse",
                value: train_rmse,
            },
            Metric {
                metric: "test_rmse",
                value: test_rmse,
            },
        ],
    )
}

// ---------------------------------------------------------------- eval and predict

fn load_model(path: &Path) -> CliResult<ModelFile> {
    Ok(ModelFile::load(path)?)
}

/// The CSV columns a regression model reads: from the config when given, else the model's covariates.
fn csv_spec(g: &Globals, model: &RegressionModel, target: Option<&str>) -> CliResult<CsvSpec> {
    if let Some(cfg) = g.load_config()? {
        if let Some(mut spec) = cfg.data.csv_spec() {
            if let Some(t) = target {
                spec.target = t.to_string();
            }
            return Ok(spec);
        }
    }
    Ok(CsvSpec {
        covariates: model.covariate_names.clone(),
        target: target.unwrap_or("target").to_string(),
        log_columns: Vec::new(),
        delimiter: ',',
    })
}

#[derive(Serialize)]
struct Band {
    mean: f64,
    #[serde(rename = "p2.5")]
    lower: f64,
    #[serde(rename = "p97.5")]
    upper: f64,
}

fn bands(model: &RegressionModel, rows: &[Vec<f64>]) -> CliResult<Vec<Band>> {
    rows.iter()
        .map(|x| {
            let s = model.predict_summary(x)?;
            Ok(Band {
                mean: s.mean,
                lower: s.lower,
                upper: s.upper,
            })
        })
        .collect()
}

pub fn eval(g: &Globals, model_path: &Path, data: &Path, target: Option<&str>) -> CliResult<()> {
    let cfg = g.load_config()?;
    let dir = g.out_dir(cfg.as_ref())?;
    let (rmse, n) = match load_model(model_path)? {
        ModelFile::Cf(m) => {
            let test = load_triples(data, m.n_users, m.n_items)?;
            (m.rmse(&test)?, test.len())
        }
        ModelFile::Regression(m) => {
            let test = load_csv_regression(data, &csv_spec(g, &m, target)?)?;
            if !m.samples.is_empty() {
                write_csv(&dir.join("bands.csv"), &bands(&m, &test.inputs)?)?;
            }
            (regression_rmse(&m, &test)?, test.len())
        }
    };
    g.say(&format!("RMSE {rmse:.6} on {n} rows"));
    write_csv(
        &dir.join("eval.csv"),
        &[
            Metric { metric: "rmse", value: rmse },
            Metric {
                metric: "rows",
                value: n as f64,
            },
        ],
    )
}

#[derive(Serialize)]
struct RatingPrediction {
    user: usize,
    item: usize,
    prediction: f64,
}

#[derive(Serialize)]
struct Prediction {
    prediction: f64,
}

/// `user item` pairs, 1-based and tab-separated; further fields are ignored.
fn read_pairs(path: &Path, m: &CfModel) -> CliResult<Vec<(usize, usize)>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            let mut f = l.split('\t').map(|s| s.trim().parse::<usize>());
            match (f.next(), f.next()) {
                (Some(Ok(u)), Some(Ok(i))) if (1..=m.n_users).contains(&u) && (1..=m.n_items).contains(&i) => Ok((u, i)),
                _ => Err(CliError::Input(format!(
                    "{}:{}: expected user and item ids within 1..={} x 1..={}",
                    path.display(),
                    k + 1,
                    m.n_users,
                    m.n_items
                ))),
            }
        })
        .collect()
}

pub fn predict(g: &Globals, model_path: &Path, input: &Path, target: Option<&str>) -> CliResult<()> {
    let cfg = g.load_config()?;
    let dir = g.out_dir(cfg.as_ref())?;
    let out = dir.join("predictions.csv");
    match load_model(model_path)? {
        ModelFile::Cf(m) => {
            let rows = read_pairs(input, &m)?
                .into_iter()
                .map(|(u, i)| {
                    Ok(RatingPrediction {
                        user: u,
                        item: i,
                        prediction: m.predict_rating(u - 1, i - 1)?,
                    })
                })
                .collect::<CliResult<Vec<_>>>()?;
            write_csv(&out, &rows)?;
        }
        ModelFile::Regression(m) => {
            let spec = csv_spec(g, &m, target)?;
            let rows = read_covariates(input, &spec)?;
            if m.samples.is_empty() {
                let p = rows
                    .iter()
                    .map(|x| Ok(Prediction { prediction: m.predict(x)? }))
                    .collect::<CliResult<Vec<_>>>()?;
                write_csv(&out, &p)?;
            } else {
                write_csv(&out, &bands(&m, &rows)?)?;
            }
        }
    }
    g.say(&format!("wrote {}", out.display()));
    Ok(())
}

/// Covariate rows of a headered file; the target column is optional.
fn read_covariates(path: &Path, spec: &CsvSpec) -> CliResult<Vec<Vec<f64>>> {
    match load_csv_regression(path, spec) {
        Ok(d) => Ok(d.inputs),
        Err(_) => {
            // Retry with the first covariate standing in for the absent target.
            let mut s = spec.clone();
            s.target = spec.covariates[0].clone();
            s.log_columns.retain(|c| c != &spec.target);
            Ok(load_csv_regression(path, &s)?.inputs)
        }
    }
}

// ---------------------------------------------------------------- decompose

/// `lo:hi:n` for each of the two covariates.
pub fn parse_grid(spec: &str) -> CliResult<[(f64, f64, usize); 2]> {
    let bad = || CliError::Input(format!("grid {spec:?}: expected lo:hi:n,lo:hi:n with n ≥ 2"));
    let axes: Vec<(f64, f64, usize)> = spec
        .split(',')
        .map(|a| {
            let p: Vec<&str> = a.split(':').collect();
            if p.len() != 3 {
                return Err(bad());
            }
            let lo: f64 = p[0].trim().parse().map_err(|_| bad())?;
            let hi: f64 = p[1].trim().parse().map_err(|_| bad())?;
            let n: usize = p[2].trim().parse().map_err(|_| bad())?;
            if n < 2 || !(lo < hi) {
                return Err(bad());
            }
            Ok((lo, hi, n))
        })
        .collect::<CliResult<_>>()?;
    axes.try_into().map_err(|_| bad())
}

fn linspace((lo, hi, n): (f64, f64, usize)) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Writes one CSV and PGM per additive component plus their total.
///
/// Values are on the whitened target scale, so the components sum to the
/// total exactly. Image rows run from the largest second covariate down.
pub fn decompose(g: &Globals, model_path: &Path, grid: &str, shading: Option<Shading>, limit: usize) -> CliResult<()> {
    let cfg = g.load_config()?;
    let dir = g.out_dir(cfg.as_ref())?;
    let shading = shading.or(cfg.as_ref().map(|c| c.output.shading)).unwrap_or_default();
    let ModelFile::Regression(m) = load_model(model_path)? else {
        return Err(CliError::Input("decompose needs a regression model".into()));
    };
    if m.covariate_names.len() != 2 {
        return Err(CliError::Input(format!(
            "decompose needs a model on 2 covariates, this one has {}",
            m.covariate_names.len()
        )));
    }
    let [ax, ay] = parse_grid(grid)?;
    let (xs, ys) = (linspace(ax), linspace(ay));
    let dims = m.model.weights.core.dims().to_vec();
    let ncomp: usize = dims.iter().product();
    if ncomp > limit {
        return Err(tgp::TgpError::SizeLimit {
            requested: ncomp,
            limit,
        }
        .into());
    }
    let (w, h) = (xs.len(), ys.len());
    let mut comps = vec![vec![0.0; w * h]; ncomp];
    let mut total = vec![0.0; w * h];
    let mut points = Vec::with_capacity(w * h);
    for (row, &y) in ys.iter().rev().enumerate() {
        for (col, &x) in xs.iter().enumerate() {
            let c = m.model.additive_components_with_limit(&m.coords(&[x, y])?, limit)?;
            let at = row * w + col;
            for (k, &v) in c.data().iter().enumerate() {
                comps[k][at] = v;
            }
            total[at] = c.data().iter().sum();
            points.push((x, y));
        }
    }
    let write = |name: &str, values: &[f64]| -> CliResult<()> {
        let mut text = format!("{},{},value\n", m.covariate_names[0], m.covariate_names[1]);
        for (&(x, y), v) in points.iter().zip(values) {
            text.push_str(&format!("{x},{y},{v}\n"));
        }
        write_text(&dir.join(format!("{name}.csv")), &text)?;
        write_text(&dir.join(format!("{name}.pgm")), &pgm(values, w, h, shading))
    };
    for (k, values) in comps.iter().enumerate() {
        write(&format!("component_{}", component_label(k, &dims)), values)?;
    }
    write("total", &total)?;
    g.say(&format!("wrote {ncomp} components and the total to {}", dir.display()));
    Ok(())
}

/// 1-based multi-index of component `k`, joined by underscores.
fn component_label(mut k: usize, dims: &[usize]) -> String {
    let mut idx = vec![0; dims.len()];
    for d in (0..dims.len()).rev() {
        idx[d] = k % dims[d] + 1;
        k /= dims[d];
    }
    idx.iter().map(usize::to_string).collect::<Vec<_>>().join("_")
}

// ---------------------------------------------------------------- diagnose

#[derive(Serialize)]
struct ParamDiagnostic {
    param: String,
    rhat: f64,
    ess: f64,
}

#[derive(Serialize)]
struct DiagnosticRow {
    statistic: &'static str,
    mean: f64,
    std: f64,
    degenerate: usize,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}

pub fn diagnose(g: &Globals, chains: &Path) -> CliResult<()> {
    let cfg = g.load_config()?;
    let dir = g.out_dir(cfg.as_ref())?;
    let (names, draws) = read_chains(chains)?;
    let mut rows = Vec::with_capacity(names.len());
    let (mut rdeg, mut edeg) = (0, 0);
    for (name, p) in names.iter().zip(&draws) {
        let r = split_rhat(p)?;
        let e = ess(p)?;
        rdeg += usize::from(r.degenerate);
        edeg += usize::from(e.degenerate);
        rows.push(ParamDiagnostic {
            param: name.clone(),
            rhat: r.value,
            ess: e.value,
        });
    }
    let (rm, rs) = mean_std(&rows.iter().map(|r| r.rhat).collect::<Vec<_>>());
    let (em, es) = mean_std(&rows.iter().map(|r| r.ess).collect::<Vec<_>>());
    write_csv(&dir.join("diagnostics.csv"), &rows)?;
    write_csv(
        &dir.join("diagnostics_summary.csv"),
        &[
            DiagnosticRow {
                statistic: "rhat",
                mean: rm,
                std: rs,
                degenerate: rdeg,
            },
            DiagnosticRow {
                statistic: "ess",
                mean: em,
                std: es,
                degenerate: edeg,
            },
        ],
    )?;
    g.say(&format!(
        "{} parameters over {} chains: R-hat {rm:.4} ± {rs:.4}, ESS {em:.1} ± {es:.1}",
        names.len(),
        draws.first().map_or(0, Vec::len)
    ));
    Ok(())
}

// ---------------------------------------------------------------- bench

/// Sizes swept by `bench`; every combination is timed.
#[derive(Debug, Clone)]
pub struct BenchSweep {
    pub m: Vec<usize>,
    pub n: Vec<usize>,
    pub r: Vec<usize>,
    pub d: Vec<usize>,
    pub repeats: usize,
}

#[derive(Serialize)]
struct BenchRow {
    d: usize,
    n: usize,
    r: usize,
    m: usize,
    median_seconds: f64,
    repeats: usize,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Median wall-clock time of one minibatch gradient over random features.
pub fn bench(g: &Globals, sweep: &BenchSweep) -> CliResult<()> {
    if sweep.repeats < 1 || [&sweep.m, &sweep.n, &sweep.r, &sweep.d].iter().any(|v| v.is_empty() || v.contains(&0)) {
        return Err(CliError::Input("bench sizes and repeats must be positive".into()));
    }
    let cfg = g.load_config()?;
    let dir = g.out_dir(cfg.as_ref())?;
    let seed = g.seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(0);
    let m_max = *sweep.m.iter().max().expect("non-empty");
    let mut rows = Vec::new();
    for &d in &sweep.d {
        for &n in &sweep.n {
            for &r in &sweep.r {
                let maps = (0..d)
                    .map(|k| build_rff(&KernelSpec::se(1.0, 1.0), n, 1, seed.wrapping_add(k as u64)))
                    .collect::<Result<Vec<_>, _>>()?;
                let weights = sample_prior(&vec![n; d], r, 1.0 / r as f64, 1.0, seed)?;
                let model = TgpModel::new(maps, weights, 1.0, 1.0 / r as f64, 1.0)?;
                // Deterministic scattered inputs in [-1, 1).
                let xs: Vec<Vec<Coord>> = (0..m_max)
                    .map(|i| {
                        (0..d)
                            .map(|k| Coord::scalar(((i * 7919 + k * 104_729) % 1000) as f64 / 500.0 - 1.0))
                            .collect()
                    })
                    .collect();
                let ys: Vec<f64> = (0..m_max).map(|i| ((i * 31) % 17) as f64 / 8.5 - 1.0).collect();
                let data = model.observations(&xs, &ys)?;
                let mut grad = GradientBundle::zeros_like(&model.weights);
                let mut scratch = Scratch::default();
                for &m in &sweep.m {
                    model.grad_log_joint_into(&data[..m], 1.0, &mut grad, &mut scratch)?;
                    let times = (0..sweep.repeats)
                        .map(|_| {
                            let t = Instant::now();
                            model.grad_log_joint_into(&data[..m], 1.0, &mut grad, &mut scratch)?;
                            Ok(t.elapsed().as_secs_f64())
                        })
                        .collect::<CliResult<Vec<_>>>()?;
                    let med = median(times);
                    g.say(&format!("D={d} n={n} r={r} m={m}: {:.3} ms", med * 1e3));
                    rows.push(BenchRow {
                        d,
                        n,
                        r,
                        m,
                        median_seconds: med,
                        repeats: sweep.repeats,
                    });
                }
            }
        }
    }
    write_csv(&dir.join("bench.csv"), &rows)
}
