//! CSV and manifest writers.
//!
//! Floats are written with `{:e}`, the shortest representation that parses
//! back to the same `f64`, so files round-trip exactly and are byte-stable.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use pinch_ee::harness::SweepResult;
use pinch_ee::{EESolution, SchemeKind, UserSet};

pub const RESULTS_FILE: &str = "results.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const SOLUTION_FILE: &str = "solution.csv";
pub const POWERS_FILE: &str = "powers.csv";

pub const RESULTS_HEADER: [&str; 7] = [
    "sweep_param",
    "sweep_value",
    "scheme",
    "ee_mean",
    "ee_std",
    "trials",
    "flagged",
];

/// One data row of `results.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_param: String,
    pub sweep_value: f64,
    pub scheme: String,
    pub ee_mean: f64,
    pub ee_std: f64,
    pub trials: usize,
    pub flagged: usize,
}

fn float(v: f64) -> String {
    format!("{v:e}")
}

fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    writer
        .write_record(header)
        .and_then(|_| {
            rows.into_iter()
                .try_for_each(|row| writer.write_record(&row))
        })
        .with_context(|| format!("cannot write {}", path.display()))?;
    writer
        .flush()
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create directory {}", dir.display()))
}

/// Writes `results.csv` and `manifest.txt` into `dir`, returning their paths.
pub fn emit_results(result: &SweepResult, dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let results = dir.join(RESULTS_FILE);
    let rows = result.points.iter().flat_map(|point| {
        point.schemes.iter().map(move |stats| {
            vec![
                result.sweep_param.to_string(),
                float(point.value),
                stats.scheme.name().to_string(),
                float(stats.ee_mean),
                float(stats.ee_std),
                stats.trials.to_string(),
                stats.flagged.to_string(),
            ]
        })
    });
    write_csv(&results, &RESULTS_HEADER, rows)?;

    let manifest = dir.join(MANIFEST_FILE);
    write_manifest(&manifest, &result.spec_hash, result.master_seed)?;
    Ok(vec![results, manifest])
}

fn write_manifest(path: &Path, spec_hash: &str, master_seed: u64) -> Result<()> {
    let text = format!(
        "spec_hash = {spec_hash}\nmaster_seed = {master_seed}\nlibrary_version = {}\n",
        env!("CARGO_PKG_VERSION")
    );
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Parses a `results.csv` written by [`emit_results`].
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader =
        csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
    let header = reader.headers()?.clone();
    anyhow::ensure!(
        header.iter().eq(RESULTS_HEADER),
        "{}: unexpected header {:?}",
        path.display(),
        header
    );
    reader
        .records()
        .enumerate()
        .map(|(line, record)| {
            let record = record?;
            let field = |i: usize| &record[i];
            let parse = || -> Result<ResultRow> {
                Ok(ResultRow {
                    sweep_param: field(0).to_string(),
                    sweep_value: field(1).parse()?,
                    scheme: field(2).to_string(),
                    ee_mean: field(3).parse()?,
                    ee_std: field(4).parse()?,
                    trials: field(5).parse()?,
                    flagged: field(6).parse()?,
                })
            };
            parse().with_context(|| format!("{}: bad data row {}", path.display(), line + 1))
        })
        .collect()
}

/// Writes `solution.csv` (one row per scheme) and `powers.csv` (one row per
/// scheme and user) for a single solved instance.
pub fn emit_solution(
    users: &UserSet,
    solutions: &[(SchemeKind, EESolution)],
    spec_hash: &str,
    master_seed: u64,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let solution = dir.join(SOLUTION_FILE);
    write_csv(
        &solution,
        &[
            "scheme",
            "antenna_x_m",
            "ee_bits_per_joule",
            "sum_rate_bits_per_s_hz",
            "total_power_w",
            "trace_points",
            "flagged",
        ],
        solutions.iter().map(|(kind, s)| {
            vec![
                kind.name().to_string(),
                float(s.antenna.x_m()),
                float(s.ee_bits_per_joule),
                float(s.sum_rate_bits_per_s_hz),
                float(s.total_power_w),
                s.trace.len().to_string(),
                s.flagged.to_string(),
            ]
        }),
    )?;

    let powers = dir.join(POWERS_FILE);
    write_csv(
        &powers,
        &["scheme", "user", "x_m", "y_m", "power_cap_w", "power_w"],
        solutions.iter().flat_map(|(kind, s)| {
            users
                .positions()
                .iter()
                .zip(users.power_caps_w())
                .zip(s.allocation.powers_w())
                .enumerate()
                .map(move |(n, ((&(x, y), &cap), &p))| {
                    vec![
                        kind.name().to_string(),
                        n.to_string(),
                        float(x),
                        float(y),
                        float(cap),
                        float(p),
                    ]
                })
        }),
    )?;

    let manifest = dir.join(MANIFEST_FILE);
    write_manifest(&manifest, spec_hash, master_seed)?;
    Ok(vec![solution, powers, manifest])
}
