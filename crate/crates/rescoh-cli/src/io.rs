//! Series file reading/writing for the CLI.
//!
//! Two formats: a bare single-column file with header `value`, and the
//! two-column FRED-style `DATE,<id>` format handled by the ingestion parser.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rescoh::ingestion::parse_fred_csv;
use rescoh::timeseries::Series;

/// An `--input` argument: `path` or `name=path`; the default name is the
/// file stem.
pub struct NamedPath {
    pub name: String,
    pub path: PathBuf,
}

pub fn parse_named_path(arg: &str) -> Result<NamedPath> {
    if let Some((name, path)) = arg.split_once('=') {
        if name.is_empty() {
            bail!("empty name in input '{arg}'");
        }
        return Ok(NamedPath {
            name: name.to_string(),
            path: PathBuf::from(path),
        });
    }
    let path = PathBuf::from(arg);
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .map(|s| s.to_string())
        .with_context(|| format!("cannot derive a series name from '{arg}'"))?;
    Ok(NamedPath { name, path })
}

pub fn read_series(path: &Path) -> Result<Series> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading series file {}", path.display()))?;
    let header = text
        .lines()
        .next()
        .with_context(|| format!("{} is empty", path.display()))?;
    let columns = header.split(',').count();
    match columns {
        1 => {
            let mut values = Vec::new();
            for (i, line) in text.lines().enumerate().skip(1) {
                let line = line.trim();
                if line.is_empty() {
                    continue;
                }
                let v: f64 = line
                    .parse()
                    .with_context(|| format!("{}:{}: bad number '{line}'", path.display(), i + 1))?;
                values.push(v);
            }
            Ok(Series::new(values)?)
        }
        2 => {
            let dated = parse_fred_csv(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            let mut values = Vec::with_capacity(dated.len());
            let mut dates = Vec::with_capacity(dated.len());
            for (date, value) in dated.observations() {
                match value {
                    Some(v) => {
                        values.push(*v);
                        dates.push(*date);
                    }
                    None => bail!(
                        "{}: missing value on {date}; run `rescoh preprocess` first",
                        path.display()
                    ),
                }
            }
            Ok(Series::with_dates(values, dates)?)
        }
        n => bail!("{}: expected 1 or 2 columns, found {n}", path.display()),
    }
}

pub fn write_series(path: &Path, name: &str, series: &Series) -> Result<()> {
    let mut out = String::new();
    match series.dates() {
        Some(dates) => {
            out.push_str(&format!("DATE,{name}\n"));
            for (d, v) in dates.iter().zip(series.values()) {
                out.push_str(&format!("{d},{v}\n"));
            }
        }
        None => {
            out.push_str("value\n");
            for v in series.values() {
                out.push_str(&format!("{v}\n"));
            }
        }
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
