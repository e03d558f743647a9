//! Ordinary least squares with t-tests and stepwise AIC selection over lagged
//! covariates.
//!
//! A design is built from named inputs by taking each input at lags
//! 0..lags_per_input−1; interaction inputs are products shifted so that no
//! covariate uses future values (a lead-h product enters as its h-step lag),
//! which reproduces covariate lists like x1(t)x2(t-4), …, x1(t-3)x2(t-7).

use std::fmt::Write as _;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::lagfamily::fmt_offset;
use crate::timeseries::Series;

/// Covariate name as a product of lagged factors; rendering at extra lag ℓ
/// shifts every factor, e.g. [("x1", -1), ("x2", 0)] at ℓ=1 → "x1(t-2)x2(t-1)".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CovariateName {
    factors: Vec<(String, i64)>,
}

impl CovariateName {
    pub fn linear(name: &str) -> Self {
        Self {
            factors: vec![(name.into(), 0)],
        }
    }

    pub fn product(name_a: &str, offset_a: i64, name_b: &str, offset_b: i64) -> Self {
        Self {
            factors: vec![(name_a.into(), offset_a), (name_b.into(), offset_b)],
        }
    }

    pub fn rendered(&self, extra_lag: i64) -> String {
        let mut out = String::new();
        for (name, off) in &self.factors {
            let _ = write!(out, "{}(t{})", name, fmt_offset(off - extra_lag));
        }
        out
    }
}

/// One input series offered to the design at several lags. `offset` is the
/// number of leading response indices the series does not cover (a lag-h
/// interaction product starts |h| steps in).
#[derive(Debug, Clone)]
pub struct RegressionInput {
    pub name: CovariateName,
    values: Vec<f64>,
    offset: usize,
}

impl RegressionInput {
    pub fn linear(name: &str, series: &Series) -> Self {
        Self {
            name: CovariateName::linear(name),
            values: series.values().to_vec(),
            offset: 0,
        }
    }

    /// The causal form of the cross product X_a(t+h)·X_b(t): for h > 0 the
    /// product is shifted back h steps so only current and past values enter.
    pub fn interaction(
        name_a: &str,
        a: &Series,
        name_b: &str,
        b: &Series,
        h: i64,
    ) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::InvalidInput(format!(
                "factor lengths differ: {} vs {}",
                a.len(),
                b.len()
            )));
        }
        let start = h.unsigned_abs() as usize;
        if start >= a.len() {
            return Err(Error::InvalidInput(format!(
                "series of length {} too short for interaction lag {h}",
                a.len()
            )));
        }
        let off_a = h.min(0);
        let off_b = -h.max(0);
        let av = a.values();
        let bv = b.values();
        let values = (start..a.len())
            .map(|i| av[(i as i64 + off_a) as usize] * bv[(i as i64 + off_b) as usize])
            .collect();
        Ok(Self {
            name: CovariateName::product(name_a, off_a, name_b, off_b),
            values,
            offset: start,
        })
    }
}

/// A regression design: response plus named covariate columns on a common
/// valid window.
#[derive(Debug, Clone)]
pub struct LagDesign {
    response: Vec<f64>,
    columns: Vec<Vec<f64>>,
    names: Vec<String>,
    intercept: bool,
}

impl LagDesign {
    pub fn n(&self) -> usize {
        self.response.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn has_intercept(&self) -> bool {
        self.intercept
    }

    pub fn response_row(&self, r: usize) -> f64 {
        self.response[r]
    }

    pub fn column_value(&self, col: usize, r: usize) -> f64 {
        self.columns[col][r]
    }

    /// Sub-design keeping the covariates at `keep` (indices into `names`).
    fn subset(&self, keep: &[usize]) -> LagDesign {
        LagDesign {
            response: self.response.clone(),
            columns: keep.iter().map(|&i| self.columns[i].clone()).collect(),
            names: keep.iter().map(|&i| self.names[i].clone()).collect(),
            intercept: self.intercept,
        }
    }
}

/// Builds the design with each input at lags 0..lags_per_input−1, rows
/// truncated to the window where every lagged column exists.
pub fn build_lag_design(
    y: &Series,
    inputs: &[RegressionInput],
    lags_per_input: usize,
    intercept: bool,
) -> Result<LagDesign> {
    if inputs.is_empty() {
        return Err(Error::InvalidInput("need at least one input".into()));
    }
    if lags_per_input == 0 {
        return Err(Error::InvalidInput("lags_per_input must be ≥ 1".into()));
    }
    for input in inputs {
        if input.values.len() + input.offset != y.len() {
            return Err(Error::InvalidInput(format!(
                "input '{}' does not align with the response (len {} + offset {} != {})",
                input.name.rendered(0),
                input.values.len(),
                input.offset,
                y.len()
            )));
        }
    }
    let max_offset = inputs.iter().map(|i| i.offset).max().unwrap();
    let start = max_offset + lags_per_input - 1;
    if start >= y.len() {
        return Err(Error::InvalidInput(format!(
            "series length {} too short for lags_per_input {lags_per_input} \
             with max input offset {max_offset}",
            y.len()
        )));
    }
    let n = y.len() - start;
    let mut columns = Vec::new();
    let mut names = Vec::new();
    for input in inputs {
        for lag in 0..lags_per_input {
            let col: Vec<f64> = (0..n)
                .map(|r| input.values[start + r - input.offset - lag])
                .collect();
            columns.push(col);
            names.push(input.name.rendered(lag as i64));
        }
    }
    let mut seen = std::collections::HashSet::new();
    for name in &names {
        if !seen.insert(name) {
            return Err(Error::InvalidInput(format!(
                "duplicate covariate name '{name}'"
            )));
        }
    }
    Ok(LagDesign {
        response: y.values()[start..].to_vec(),
        columns,
        names,
        intercept,
    })
}

/// Fitted regression: per-covariate estimates and tests plus model summary.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    /// Covariate names, "Intercept" first when present.
    pub names: Vec<String>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    pub aic: f64,
    /// σ̂² = RSS/(n−p).
    pub residual_variance: f64,
    pub n: usize,
    /// Number of estimated coefficients, intercept included.
    pub p: usize,
    /// RSS ≈ 0: standard errors are undefined and reported as 0.
    pub perfect_fit: bool,
}

impl FitResult {
    /// Names of covariates significant at the given two-sided level.
    pub fn significant(&self, alpha: f64) -> Vec<&str> {
        self.names
            .iter()
            .zip(&self.p_values)
            .filter(|(_, p)| **p < alpha)
            .map(|(n, _)| n.as_str())
            .collect()
    }

    pub fn estimate_of(&self, name: &str) -> Option<(f64, f64)> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| (self.estimates[i], self.std_errors[i]))
    }

    /// Fixed-width table matching the paper's layout.
    pub fn render_table(&self) -> String {
        let name_width = self
            .names
            .iter()
            .map(|n| n.len())
            .max()
            .unwrap_or(8)
            .max(8)
            + 2;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<name_width$} {:>9} {:>9} {:>9}",
            "", "Estimate", "SE", "p-value"
        );
        for i in 0..self.names.len() {
            if self.perfect_fit {
                let _ = writeln!(
                    out,
                    "{:<name_width$} {:>9.4} {:>9} {:>9}",
                    self.names[i], self.estimates[i], "-", "-"
                );
            } else {
                let _ = writeln!(
                    out,
                    "{:<name_width$} {:>9.4} {:>9.4} {:>9.4}",
                    self.names[i], self.estimates[i], self.std_errors[i], self.p_values[i]
                );
            }
        }
        let _ = writeln!(
            out,
            "n = {}, p = {}, residual variance = {:.4}, AIC = {:.2}{}",
            self.n,
            self.p,
            self.residual_variance,
            self.aic,
            if self.perfect_fit { " (perfect fit)" } else { "" }
        );
        out
    }

    /// CSV with columns name, estimate, se, p_value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "name,estimate,se,p_value")?;
        for i in 0..self.names.len() {
            writeln!(
                w,
                "{},{},{},{}",
                self.names[i], self.estimates[i], self.std_errors[i], self.p_values[i]
            )?;
        }
        Ok(())
    }
}

/// Columns nearly dependent on earlier columns, by modified Gram-Schmidt with
/// a relative tolerance.
fn collinear_columns(design: &LagDesign) -> Vec<String> {
    let n = design.n();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut offenders = Vec::new();
    let mut all: Vec<(String, Vec<f64>)> = Vec::new();
    if design.intercept {
        all.push(("Intercept".into(), vec![1.0; n]));
    }
    for (name, col) in design.names.iter().zip(&design.columns) {
        all.push((name.clone(), col.clone()));
    }
    for (name, col) in all {
        let orig_norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut v = col;
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= dot * bi;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= 1e-8 * orig_norm.max(f64::MIN_POSITIVE) {
            offenders.push(name);
        } else {
            for vi in v.iter_mut() {
                *vi /= norm;
            }
            basis.push(v);
        }
    }
    offenders
}

fn two_sided_p(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid t distribution");
    2.0 * (1.0 - dist.cdf(t.abs()))
}

/// Least-squares fit via QR, with standard errors from the inverse
/// normal-equations diagonal and two-sided t-tests on n−p degrees of freedom.
/// AIC = n·log(RSS/n) + 2(p+1).
pub fn ols_fit(design: &LagDesign) -> Result<FitResult> {
    let n = design.n();
    let p = design.columns.len() + usize::from(design.intercept);
    if p == 0 {
        return Err(Error::InvalidInput("empty design".into()));
    }
    if n <= p {
        return Err(Error::InvalidInput(format!(
            "need n > p, got n = {n}, p = {p}"
        )));
    }
    let offenders = collinear_columns(design);
    if !offenders.is_empty() {
        return Err(Error::CollinearDesign { columns: offenders });
    }
    let mut names = Vec::with_capacity(p);
    if design.intercept {
        names.push("Intercept".to_string());
    }
    names.extend(design.names.iter().cloned());
    let x = DMatrix::from_fn(n, p, |r, c| {
        if design.intercept {
            if c == 0 {
                1.0
            } else {
                design.columns[c - 1][r]
            }
        } else {
            design.columns[c][r]
        }
    });
    let yv = DVector::from_column_slice(&design.response);
    let qr = x.clone().qr();
    let qty = qr.q().transpose() * &yv;
    let r = qr.r();
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::CollinearDesign {
            columns: vec!["<triangular solve failed>".into()],
        })?;
    let residuals = &yv - &x * &beta;
    let rss: f64 = residuals.iter().map(|v| v * v).sum();
    let total: f64 = yv.iter().map(|v| v * v).sum();
    let estimates: Vec<f64> = beta.iter().cloned().collect();
    if rss <= 1e-12 * total {
        return Ok(FitResult {
            names,
            estimates,
            std_errors: vec![0.0; p],
            t_stats: vec![f64::INFINITY; p],
            p_values: vec![0.0; p],
            aic: f64::NEG_INFINITY,
            residual_variance: 0.0,
            n,
            p,
            perfect_fit: true,
        });
    }
    let sigma2 = rss / (n - p) as f64;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::CollinearDesign {
            columns: vec!["<triangular solve failed>".into()],
        })?;
    let mut std_errors = Vec::with_capacity(p);
    for i in 0..p {
        let diag: f64 = (0..p).map(|j| r_inv[(i, j)] * r_inv[(i, j)]).sum();
        std_errors.push((sigma2 * diag).sqrt());
    }
    let t_stats: Vec<f64> = estimates
        .iter()
        .zip(&std_errors)
        .map(|(b, se)| b / se)
        .collect();
    let df = (n - p) as f64;
    let p_values: Vec<f64> = t_stats.iter().map(|t| two_sided_p(*t, df)).collect();
    let aic = n as f64 * (rss / n as f64).ln() + 2.0 * (p as f64 + 1.0);
    Ok(FitResult {
        names,
        estimates,
        std_errors,
        t_stats,
        p_values,
        aic,
        residual_variance: sigma2,
        n,
        p,
        perfect_fit: false,
    })
}

/// Bidirectional stepwise search from the full model: at each step the best
/// single-column deletion or re-addition is taken while it lowers AIC; ties
/// resolve to the earliest move in column order. The intercept, when present,
/// always stays in the model.
pub fn stepwise_aic(design: &LagDesign) -> Result<FitResult> {
    let full = ols_fit(design)?;
    let m = design.columns.len();
    let mut active: Vec<bool> = vec![true; m];
    let mut current_aic = full.aic;
    loop {
        let mut best: Option<(f64, usize, bool)> = None; // (aic, column, add?)
        for col in 0..m {
            let adding = !active[col];
            if !adding && active.iter().filter(|a| **a).count() == 1 && !design.intercept {
                continue; // keep at least one regressor when there is no intercept
            }
            let mut keep: Vec<usize> = Vec::with_capacity(m);
            for (i, a) in active.iter().enumerate() {
                if (i == col) != *a {
                    keep.push(i);
                }
            }
            let candidate = if keep.is_empty() {
                // intercept-only model
                LagDesign {
                    response: design.response.clone(),
                    columns: vec![],
                    names: vec![],
                    intercept: design.intercept,
                }
            } else {
                design.subset(&keep)
            };
            let aic = ols_fit(&candidate)?.aic;
            if aic < best.map_or(current_aic, |(b, _, _)| b) {
                best = Some((aic, col, adding));
            }
        }
        match best {
            Some((aic, col, _)) => {
                active[col] = !active[col];
                current_aic = aic;
            }
            None => break,
        }
    }
    let keep: Vec<usize> = (0..m).filter(|&i| active[i]).collect();
    if keep.is_empty() {
        return ols_fit(&LagDesign {
            response: design.response.clone(),
            columns: vec![],
            names: vec![],
            intercept: design.intercept,
        });
    }
    ols_fit(&design.subset(&keep))
}
