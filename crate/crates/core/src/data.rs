//! Dataset loading, whitening, splitting and grid construction.

use std::cmp::Ordering;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cf::{Rating, RatingsData, SideInfo};
use crate::error::{Result, TgpError};
use crate::input::Coord;

/// Environment variable naming the default dataset root.
pub const DATA_DIR_ENV: &str = "TGP_DATA_DIR";

/// `$TGP_DATA_DIR`, or `data` relative to the working directory.
pub fn default_data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV).map_or_else(|| PathBuf::from("data"), PathBuf::from)
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|source| TgpError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> TgpError {
    TgpError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Upper bounds of the first four age bins; the fifth is open-ended.
pub const AGE_BIN_EDGES: [u32; 4] = [18, 25, 35, 50];

/// The twenty occupation categories; `none` is folded into `other`.
pub const OCCUPATIONS: [&str; 20] = [
    "administrator",
    "artist",
    "doctor",
    "educator",
    "engineer",
    "entertainment",
    "executive",
    "healthcare",
    "homemaker",
    "lawyer",
    "librarian",
    "marketing",
    "other",
    "programmer",
    "retired",
    "salesman",
    "scientist",
    "student",
    "technician",
    "writer",
];

/// User side-vector length: age bins, genders, occupations.
pub const USER_SIDE_LEN: usize = 5 + 2 + 20;
/// Item side-vector length: genres without `unknown`.
pub const ITEM_SIDE_LEN: usize = 18;

pub fn age_bin(age: u32) -> usize {
    AGE_BIN_EDGES.iter().take_while(|&&edge| age >= edge).count()
}

fn occupation_index(token: &str) -> Option<usize> {
    let token = if token == "none" { "other" } else { token };
    OCCUPATIONS.iter().position(|&o| o == token)
}

/// MovieLens 100K with side information and the five distributed splits.
#[derive(Debug, Clone, PartialEq)]
pub struct MovieLens {
    pub ratings: RatingsData,
    pub side: SideInfo,
    /// `(u{k}.base, u{k}.test)` for `k = 1..=5`.
    pub splits: Vec<(RatingsData, RatingsData)>,
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, field: Option<&str>, what: &str) -> Result<T> {
    field
        .map(str::trim)
        .and_then(|f| f.parse().ok())
        .ok_or_else(|| parse_err(path, line, format!("bad or missing {what}")))
}

/// Reads tab-separated `user item rating` lines with 1-based ids.
pub fn load_triples(path: &Path, n_users: usize, n_items: usize) -> Result<RatingsData> {
    let text = read_text(path)?;
    let mut triples = Vec::new();
    for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let mut f = line.split('\t');
        let u: usize = parse_field(path, k + 1, f.next(), "user id")?;
        let i: usize = parse_field(path, k + 1, f.next(), "item id")?;
        let r: f64 = parse_field(path, k + 1, f.next(), "rating")?;
        if u < 1 || u > n_users || i < 1 || i > n_items {
            return Err(parse_err(path, k + 1, format!("id ({u}, {i}) outside 1..={n_users} x 1..={n_items}")));
        }
        triples.push(Rating {
            user: u - 1,
            item: i - 1,
            value: r,
        });
    }
    RatingsData::new(n_users, n_items, triples)
}

fn load_users(path: &Path) -> Result<Vec<Vec<usize>>> {
    let text = read_text(path)?;
    let mut users = Vec::new();
    for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split('|').collect();
        let id: usize = parse_field(path, k + 1, f.first().copied(), "user id")?;
        if id != users.len() + 1 {
            return Err(parse_err(path, k + 1, format!("expected user id {}, found {id}", users.len() + 1)));
        }
        let age: u32 = parse_field(path, k + 1, f.get(1).copied(), "age")?;
        let gender = match f.get(2).map(|g| g.trim()) {
            Some("M") => 0,
            Some("F") => 1,
            other => return Err(parse_err(path, k + 1, format!("unknown gender {other:?}"))),
        };
        let occ_token = f.get(3).map_or("", |o| o.trim());
        let occ = occupation_index(occ_token)
            .ok_or_else(|| parse_err(path, k + 1, format!("unknown occupation {occ_token:?}")))?;
        users.push(vec![age_bin(age), 5 + gender, 7 + occ]);
    }
    Ok(users)
}

fn load_items(path: &Path) -> Result<Vec<Vec<usize>>> {
    let text = read_text(path)?;
    let mut items = Vec::new();
    for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split('|').collect();
        let id: usize = parse_field(path, k + 1, f.first().copied(), "item id")?;
        if id != items.len() + 1 {
            return Err(parse_err(path, k + 1, format!("expected item id {}, found {id}", items.len() + 1)));
        }
        if f.len() < 20 {
            return Err(parse_err(path, k + 1, "fewer than 19 genre flags"));
        }
        let flags = &f[f.len() - 19..];
        let mut set = Vec::new();
        // flags[0] is the `unknown` genre.
        for (g, flag) in flags[1..].iter().enumerate() {
            match flag.trim() {
                "1" => set.push(g),
                "0" => {}
                other => return Err(parse_err(path, k + 1, format!("bad genre flag {other:?}"))),
            }
        }
        items.push(set);
    }
    Ok(items)
}

/// Loads `u.data`, `u.user`, `u.item` and `u1..u5.{base,test}` from `dir`.
pub fn load_movielens_100k(dir: &Path) -> Result<MovieLens> {
    let users = load_users(&dir.join("u.user"))?;
    let items = load_items(&dir.join("u.item"))?;
    let (n_users, n_items) = (users.len(), items.len());
    let ratings = load_triples(&dir.join("u.data"), n_users, n_items)?;
    let side = SideInfo::new(users, USER_SIDE_LEN, items, ITEM_SIDE_LEN)?;
    let splits = (1..=5)
        .map(|k| {
            Ok((
                load_triples(&dir.join(format!("u{k}.base")), n_users, n_items)?,
                load_triples(&dir.join(format!("u{k}.test")), n_users, n_items)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MovieLens { ratings, side, splits })
}

/// Covariates and targets read from a delimited file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionDataset {
    pub covariate_names: Vec<String>,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    /// Stats the data was whitened with, if any.
    pub stats: Option<WhiteningStats>,
}

impl RegressionDataset {
    pub fn new(covariate_names: Vec<String>, inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(TgpError::mismatch(format!("{} inputs but {} targets", inputs.len(), targets.len())));
        }
        if inputs.iter().any(|x| x.len() != covariate_names.len()) {
            return Err(TgpError::mismatch("input rows differ from the covariate count"));
        }
        Ok(RegressionDataset {
            covariate_names,
            inputs,
            targets,
            stats: None,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn subset(&self, rows: &[usize]) -> RegressionDataset {
        RegressionDataset {
            covariate_names: self.covariate_names.clone(),
            inputs: rows.iter().map(|&i| self.inputs[i].clone()).collect(),
            targets: rows.iter().map(|&i| self.targets[i]).collect(),
            stats: self.stats.clone(),
        }
    }
}

/// Which columns of a delimited file to read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSpec {
    pub covariates: Vec<String>,
    pub target: String,
    /// Columns replaced by their natural log before anything else.
    #[serde(default)]
    pub log_columns: Vec<String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

fn default_delimiter() -> char {
    ','
}

/// Reads the selected columns of a headered delimited file.
pub fn load_csv_regression(path: &Path, spec: &CsvSpec) -> Result<RegressionDataset> {
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(source) => TgpError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => TgpError::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("{other:?}"),
        },
    };
    let delimiter = u8::try_from(spec.delimiter)
        .map_err(|_| TgpError::invalid(format!("delimiter {:?} is not a single byte", spec.delimiter)))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(io)?;
    let headers = reader.headers().map_err(io)?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(path, 1, format!("missing column {name:?}")))
    };
    let cov_idx = spec.covariates.iter().map(|c| column(c)).collect::<Result<Vec<_>>>()?;
    let target_idx = column(&spec.target)?;
    let log_idx = spec.log_columns.iter().map(|c| column(c)).collect::<Result<Vec<_>>>()?;

    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(io)?;
        let line = k + 2;
        let value = |i: usize| -> Result<f64> {
            let cell = record.get(i).unwrap_or("");
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(path, line, format!("non-numeric cell {cell:?} in column {:?}", &headers[i])))?;
            if log_idx.contains(&i) {
                if v <= 0.0 {
                    return Err(parse_err(path, line, format!("cannot take the log of {v}")));
                }
                Ok(v.ln())
            } else {
                Ok(v)
            }
        };
        inputs.push(cov_idx.iter().map(|&i| value(i)).collect::<Result<Vec<_>>>()?);
        targets.push(value(target_idx)?);
    }
    RegressionDataset::new(spec.covariates.clone(), inputs, targets)
}

/// Per-column mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhiteningStats {
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
}

impl WhiteningStats {
    fn fit(data: &RegressionDataset) -> Result<Self> {
        if data.is_empty() {
            return Err(TgpError::Empty("whitening data"));
        }
        let n = data.len() as f64;
        let moments = |col: &dyn Fn(usize) -> f64| {
            let m = (0..data.len()).map(col).sum::<f64>() / n;
            let v = (0..data.len()).map(|i| (col(i) - m).powi(2)).sum::<f64>() / n;
            (m, v.sqrt())
        };
        let mut input_mean = Vec::new();
        let mut input_std = Vec::new();
        for c in 0..data.covariate_names.len() {
            let (m, s) = moments(&|i| data.inputs[i][c]);
            if !(s > 0.0) {
                return Err(TgpError::invalid(format!(
                    "column {:?} has zero variance",
                    data.covariate_names[c]
                )));
            }
            input_mean.push(m);
            input_std.push(s);
        }
        let (target_mean, target_std) = moments(&|i| data.targets[i]);
        if !(target_std > 0.0) {
            return Err(TgpError::invalid("target has zero variance"));
        }
        Ok(WhiteningStats {
            input_mean,
            input_std,
            target_mean,
            target_std,
        })
    }

    pub fn apply(&self, data: &RegressionDataset) -> Result<RegressionDataset> {
        if data.covariate_names.len() != self.input_mean.len() {
            return Err(TgpError::mismatch("dataset columns differ from the whitening stats"));
        }
        let inputs = data
            .inputs
            .iter()
            .map(|x| self.whiten_input(x))
            .collect();
        let targets = data.targets.iter().map(|y| (y - self.target_mean) / self.target_std).collect();
        Ok(RegressionDataset {
            covariate_names: data.covariate_names.clone(),
            inputs,
            targets,
            stats: Some(self.clone()),
        })
    }

    /// `(x_c - mean_c) / std_c` per column; the one place inputs are whitened.
    pub fn whiten_input(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.input_mean.iter().zip(&self.input_std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    /// Maps a whitened target back to the original scale.
    pub fn unwhiten_target(&self, y: f64) -> f64 {
        y * self.target_std + self.target_mean
    }
}

/// Fits whitening stats on `train` and applies them to `train` and every entry of `others`.
pub fn whiten_fit_apply(
    train: &RegressionDataset,
    others: &[&RegressionDataset],
) -> Result<(RegressionDataset, Vec<RegressionDataset>, WhiteningStats)> {
    let stats = WhiteningStats::fit(train)?;
    let t = stats.apply(train)?;
    let o = others.iter().map(|d| stats.apply(d)).collect::<Result<Vec<_>>>()?;
    Ok((t, o, stats))
}

/// Seeded random split; the first part holds `round(ratio · N)` rows.
pub fn split(data: &RegressionDataset, ratio: f64, seed: u64) -> Result<(RegressionDataset, RegressionDataset)> {
    let (a, b) = split_indices(data.len(), ratio, seed)?;
    Ok((data.subset(&a), data.subset(&b)))
}

/// Seeded partition of `0..n` into two non-empty index lists.
pub fn split_indices(n: usize, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(TgpError::invalid(format!("split ratio {ratio} must lie in (0, 1)")));
    }
    let k = (ratio * n as f64).round() as usize;
    if k == 0 || k == n {
        return Err(TgpError::invalid(format!("ratio {ratio} leaves an empty part of {n} rows")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let b = idx.split_off(k);
    Ok((idx, b))
}

/// Grid axes and the multi-index of every data row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// `axes[d]` lists the distinct values of column group `d`, ascending.
    pub axes: Vec<Vec<Vec<f64>>>,
    /// `index[row][d]` locates the row on axis `d`.
    pub index: Vec<Vec<usize>>,
}

impl GridSpec {
    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    /// Axis points as coordinates carrying both their index and their values.
    pub fn axis_coords(&self, d: usize) -> Vec<Coord> {
        self.axes[d]
            .iter()
            .enumerate()
            .map(|(i, v)| Coord::with_side(i, v.clone()))
            .collect()
    }

    /// Coordinates of row `row`, one per axis.
    pub fn row_coords(&self, row: usize) -> Vec<Coord> {
        self.index[row]
            .iter()
            .enumerate()
            .map(|(d, &i)| Coord::with_side(i, self.axes[d][i].clone()))
            .collect()
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

/// Groups `rows` columns into grid axes; `groups[d]` lists the columns of axis `d`.
pub fn build_grid(rows: &[Vec<f64>], groups: &[Vec<usize>]) -> Result<GridSpec> {
    if let Some(&c) = groups.iter().flatten().find(|&&c| rows.iter().any(|r| c >= r.len())) {
        return Err(TgpError::IndexOutOfRange {
            index: c,
            size: rows.iter().map(Vec::len).min().unwrap_or(0),
        });
    }
    let key = |r: &Vec<f64>, g: &Vec<usize>| -> Vec<f64> { g.iter().map(|&c| r[c]).collect() };
    let axes: Vec<Vec<Vec<f64>>> = groups
        .iter()
        .map(|g| {
            let mut vals: Vec<Vec<f64>> = rows.iter().map(|r| key(r, g)).collect();
            vals.sort_by(|a, b| lex_cmp(a, b));
            vals.dedup_by(|a, b| lex_cmp(a, b).is_eq());
            vals
        })
        .collect();
    let index = rows
        .iter()
        .map(|r| {
            groups
                .iter()
                .zip(&axes)
                .map(|(g, axis)| {
                    let k = key(r, g);
                    axis.binary_search_by(|p| lex_cmp(p, &k)).expect("row value is on its axis")
                })
                .collect()
        })
        .collect();
    Ok(GridSpec { axes, index })
}
