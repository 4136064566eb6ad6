//! Output formats: atomic CSV and text, plain PGM heatmaps, chain tables.

use std::fs;
use std::path::Path;

use serde::Serialize;
use tgp::inference::ChainSet;
use tgp::persist::{write_atomic, write_csv_atomic};

use crate::config::Shading;
use crate::error::{CliError, CliResult};

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    Ok(write_csv_atomic(path, rows)?)
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    Ok(write_atomic(path, text.as_bytes())?)
}

/// Grey levels in `0..=255`, one per value.
pub fn shade(values: &[f64], shading: Shading) -> Vec<u8> {
    match shading {
        Shading::Value => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            values
                .iter()
                .map(|v| if hi > lo { (255.0 * (v - lo) / (hi - lo)).round() as u8 } else { 0 })
                .collect()
        }
        Shading::Percentile => {
            let mut sorted = values.to_vec();
            sorted.sort_by(f64::total_cmp);
            let denom = (values.len().max(2) - 1) as f64;
            values
                .iter()
                .map(|v| {
                    // Fraction of the other entries strictly below `v`.
                    let below = sorted.partition_point(|s| s < v) as f64;
                    (255.0 * below / denom).round() as u8
                })
                .collect()
        }
    }
}

/// Plain `P2` image of a row-major `height × width` grid, maxval 255.
pub fn pgm(values: &[f64], width: usize, height: usize, shading: Shading) -> String {
    assert_eq!(values.len(), width * height, "grid size");
    let grey = shade(values, shading);
    let mut s = format!("P2\n{width} {height}\n255\n");
    for row in grey.chunks(width) {
        let line: Vec<String> = row.iter().map(u8::to_string).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

/// `chain,iter,p0,p1,...` with one row per post-warmup draw.
pub fn chains_csv(chains: &ChainSet) -> String {
    let params = chains.iter().next().map_or(0, |w| w.param_count());
    let mut s = String::from("chain,iter");
    for p in 0..params {
        s.push_str(&format!(",p{p}"));
    }
    s.push('\n');
    for (c, chain) in chains.samples.iter().enumerate() {
        for (t, w) in chain.iter().enumerate() {
            s.push_str(&format!("{c},{t}"));
            for v in w.to_flat() {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
    }
    s
}

/// Parameter names and `draws[p][c][t]` from a chains table.
pub fn read_chains(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<Vec<f64>>>)> {
    let bad = |line: usize, m: String| CliError::Input(format!("{}:{line}: {m}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let header = reader.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    if header.len() < 3 || &header[0] != "chain" {
        return Err(bad(1, "expected columns chain,iter,<parameters>".into()));
    }
    let names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    let mut ids: Vec<String> = Vec::new();
    let mut draws: Vec<Vec<Vec<f64>>> = vec![Vec::new(); names.len()];
    for (k, rec) in reader.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| bad(line, e.to_string()))?;
        let c = match ids.iter().position(|id| id == &rec[0]) {
            Some(c) => c,
            None => {
                ids.push(rec[0].to_string());
                draws.iter_mut().for_each(|p| p.push(Vec::new()));
                ids.len() - 1
            }
        };
        for (p, field) in rec.iter().skip(2).enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| bad(line, format!("{field:?} is not a number")))?;
            draws[p][c].push(v);
        }
    }
    if ids.len() < 2 {
        return Err(CliError::Input(format!(
            "{}: diagnostics need at least 2 chains, found {}",
            path.display(),
            ids.len()
        )));
    }
    Ok((names, draws))
}
