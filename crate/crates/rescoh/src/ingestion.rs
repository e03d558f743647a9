//! FRED-style CSV parsing, multi-series date alignment, the differencing and
//! centering preprocessing pipeline, and an optional HTTP fetch client.
//!
//! Analysis commands are offline-first: fetching is a separate, explicit
//! operation and every consumer accepts local CSV files.

use std::collections::HashMap;
use std::thread::sleep;
use std::time::Duration;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::timeseries::{center, difference, Series};

/// A dated observation series; missing values are encoded as `None`
/// (FRED writes them as "." or an empty field).
#[derive(Debug, Clone, PartialEq)]
pub struct DatedSeries {
    id: String,
    observations: Vec<(NaiveDate, Option<f64>)>,
}

impl DatedSeries {
    pub fn new(id: impl Into<String>, observations: Vec<(NaiveDate, Option<f64>)>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::InvalidInput("series id must be nonempty".into()));
        }
        if observations.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidInput(
                "observation dates must be strictly increasing".into(),
            ));
        }
        Ok(Self { id, observations })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn observations(&self) -> &[(NaiveDate, Option<f64>)] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Renders back to the two-column CSV format, missing values as ".".
    pub fn to_csv_string(&self) -> String {
        let mut out = format!("DATE,{}\n", self.id);
        for (date, value) in &self.observations {
            match value {
                Some(v) => out.push_str(&format!("{date},{v}\n")),
                None => out.push_str(&format!("{date},.\n")),
            }
        }
        out
    }
}

/// Parses a FRED-style CSV: a header row with a date column and one value
/// column, ISO dates, missing values as "." or empty.
pub fn parse_fred_csv(text: &str) -> Result<DatedSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            detail: format!("bad header: {e}"),
        })?
        .clone();
    if headers.len() != 2 {
        return Err(Error::Parse {
            line: 1,
            detail: format!("expected 2 columns (date, value), got {}", headers.len()),
        });
    }
    let id = headers[1].trim().to_string();
    let mut observations = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // header is line 1
        let record = record.map_err(|e| Error::Parse {
            line,
            detail: e.to_string(),
        })?;
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                detail: format!("expected 2 fields, got {}", record.len()),
            });
        }
        let date = record[0]
            .trim()
            .parse::<NaiveDate>()
            .map_err(|e| Error::Parse {
                line,
                detail: format!("bad date '{}': {e}", &record[0]),
            })?;
        let raw = record[1].trim();
        let value = if raw.is_empty() || raw == "." {
            None
        } else {
            Some(raw.parse::<f64>().map_err(|e| Error::Parse {
                line,
                detail: format!("bad number '{raw}': {e}"),
            })?)
        };
        observations.push((date, value));
    }
    DatedSeries::new(id, observations).map_err(|e| match e {
        Error::InvalidInput(detail) => Error::Parse { line: 1, detail },
        other => other,
    })
}

/// Restricts all series to the dates present and non-missing in every one of
/// them; returns the undated value series (input order) plus the shared dates.
pub fn align_drop_missing(series: &[DatedSeries]) -> Result<(Vec<Series>, Vec<NaiveDate>)> {
    if series.is_empty() {
        return Err(Error::InvalidInput("need at least one series".into()));
    }
    let maps: Vec<HashMap<NaiveDate, f64>> = series
        .iter()
        .map(|s| {
            s.observations
                .iter()
                .filter_map(|(d, v)| v.map(|v| (*d, v)))
                .collect()
        })
        .collect();
    let common: Vec<NaiveDate> = series[0]
        .observations
        .iter()
        .map(|(d, _)| *d)
        .filter(|d| maps.iter().all(|m| m.contains_key(d)))
        .collect();
    if common.is_empty() {
        return Err(Error::Alignment(format!(
            "no date is present and non-missing in all {} series",
            series.len()
        )));
    }
    let aligned = maps
        .iter()
        .map(|m| Series::new(common.iter().map(|d| m[d]).collect()))
        .collect::<Result<Vec<_>>>()?;
    Ok((aligned, common))
}

/// First-order differencing followed by centering at 0.
pub fn preprocess(s: &Series) -> Result<Series> {
    Ok(center(&difference(s)?))
}

/// Options for the FRED fetch client.
#[derive(Debug, Clone)]
pub struct FetchConfig {
    /// Refuse all network access when set.
    pub offline: bool,
    pub base_url: String,
    pub timeout: Duration,
    /// Pause before the single retry.
    pub retry_backoff: Duration,
}

impl Default for FetchConfig {
    fn default() -> Self {
        Self {
            offline: false,
            base_url: "https://fred.stlouisfed.org".into(),
            timeout: Duration::from_secs(30),
            retry_backoff: Duration::from_millis(500),
        }
    }
}

/// Fetches the raw CSV body for a series id over the public CSV endpoint.
/// One retry with backoff; an HTTP proxy is honored from the standard
/// environment variables. Never required by the analysis commands.
pub fn fetch_series(
    id: &str,
    start: NaiveDate,
    end: NaiveDate,
    config: &FetchConfig,
) -> Result<String> {
    if config.offline {
        return Err(Error::Offline(id.to_string()));
    }
    if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric()) {
        return Err(Error::InvalidInput(format!(
            "series id '{id}' must be alphanumeric"
        )));
    }
    let url = format!(
        "{}/graph/fredgraph.csv?id={id}&cosd={start}&coed={end}",
        config.base_url
    );
    let client = reqwest::blocking::Client::builder()
        .timeout(config.timeout)
        .build()
        .map_err(|e| Error::Http {
            id: id.to_string(),
            detail: e.to_string(),
        })?;
    let mut last_err = String::new();
    for attempt in 0..2 {
        if attempt > 0 {
            sleep(config.retry_backoff);
        }
        match client.get(&url).send() {
            Ok(resp) => {
                let status = resp.status();
                if status.is_success() {
                    return resp.text().map_err(|e| Error::Http {
                        id: id.to_string(),
                        detail: e.to_string(),
                    });
                }
                last_err = format!("status {status}");
                if status.is_client_error() {
                    break; // 4xx will not improve on retry
                }
            }
            Err(e) => last_err = e.to_string(),
        }
    }
    Err(Error::Http {
        id: id.to_string(),
        detail: last_err,
    })
}
