//! Command-line pipeline: simulate the benchmark system, preprocess FRED
//! series, scan candidate lag products, run the greedy selection, and fit the
//! stepwise regression. Exit status: 0 success, 2 usage error, 1 runtime error.

mod io;
mod render;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use rescoh::ingestion::{align_drop_missing, fetch_series, parse_fred_csv, preprocess, FetchConfig};
use rescoh::lagfamily::{
    greedy_select, scan_both, CandidateFamily, Criterion, SelectionRun, StopRule,
};
use rescoh::regression::{build_lag_design, ols_fit, stepwise_aic, FitResult, RegressionInput};
use rescoh::spectral::{FrequencyGrid, LagWindow, SpectralConfig};
use rescoh::timeseries::{simulate_quadratic_system, Series};

use io::{parse_named_path, read_series, write_series, NamedPath};
use render::render_bars;

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "rescoh", version, about = "Lag-product interaction detection for time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the benchmark system: two AR(1) inputs and a quadratic output
    Simulate(SimulateArgs),
    /// Parse FRED CSVs, align on common non-missing dates, difference and center
    Preprocess(PreprocessArgs),
    /// Evaluate RC/IS for every candidate lag product
    Scan(ScanArgs),
    /// Greedy multi-stage selection of lag products
    Select(SelectArgs),
    /// Lagged-covariate regression with optional stepwise AIC selection
    Regress(RegressArgs),
    /// Download series CSVs from the FRED endpoint
    Fetch(FetchArgs),
}

/// Options shared by the analysis commands; a `key=value` config file can
/// supply any of them, with command-line flags taking precedence.
#[derive(Args, Clone)]
struct CommonOpts {
    /// Lag-window truncation point M
    #[arg(long)]
    window: Option<usize>,
    /// Frequency-grid half count (grid has 2·half+1 points on [-pi, pi])
    #[arg(long)]
    grid_half_count: Option<usize>,
    /// Candidate lag range, e.g. "-9..9"
    #[arg(long, allow_hyphen_values = true)]
    lags: Option<String>,
    /// rc, is, or both
    #[arg(long)]
    criterion: Option<String>,
    /// Prominence threshold of the greedy stop rule
    #[arg(long)]
    stop_ratio: Option<f64>,
    /// Maximum greedy stages
    #[arg(long)]
    max_stages: Option<usize>,
    /// Lags per input offered to the regression
    #[arg(long)]
    lags_per_input: Option<usize>,
    /// RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Optional key=value config file (flags take precedence)
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum CriterionChoice {
    Rc,
    Is,
    Both,
}

impl CriterionChoice {
    fn wants(self, c: Criterion) -> bool {
        match (self, c) {
            (CriterionChoice::Both, _) => true,
            (CriterionChoice::Rc, Criterion::ResidualCoherence) => true,
            (CriterionChoice::Is, Criterion::IntegratedSpectrum) => true,
            _ => false,
        }
    }
}

/// Fully resolved run configuration; the defaults reproduce the benchmark
/// configuration (M=10, 2001-point grid, lags -9..9).
struct Settings {
    window: usize,
    grid_half_count: usize,
    lag_min: i64,
    lag_max: i64,
    criterion: CriterionChoice,
    stop_ratio: f64,
    max_stages: usize,
    lags_per_input: usize,
    seed: u64,
    out_dir: PathBuf,
}

/// Errors that are the caller's fault (bad flags/config); exit status 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsageError(msg.into()).into())
}

fn parse_lag_range(text: &str) -> Result<(i64, i64)> {
    let Some((lo, hi)) = text.split_once("..") else {
        return usage_err(format!("--lags expects \"min..max\", got '{text}'"));
    };
    let (Ok(lo), Ok(hi)) = (lo.trim().parse::<i64>(), hi.trim().parse::<i64>()) else {
        return usage_err(format!("--lags expects integers, got '{text}'"));
    };
    if lo > hi {
        return usage_err(format!("empty candidate lag range {lo}..{hi}"));
    }
    Ok((lo, hi))
}

impl CommonOpts {
    fn resolve(&self) -> Result<Settings> {
        let mut file: HashMap<String, String> = HashMap::new();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((k, v)) = line.split_once('=') else {
                    return usage_err(format!(
                        "{}:{}: expected key=value, got '{line}'",
                        path.display(),
                        i + 1
                    ));
                };
                file.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        fn pick<T: std::str::FromStr>(
            flag: Option<T>,
            file: &HashMap<String, String>,
            key: &str,
            default: T,
        ) -> Result<T> {
            if let Some(v) = flag {
                return Ok(v);
            }
            match file.get(key) {
                Some(raw) => raw
                    .parse::<T>()
                    .map_err(|_| UsageError(format!("config {key}: cannot parse '{raw}'")).into()),
                None => Ok(default),
            }
        }
        let lag_text = match (&self.lags, file.get("lags")) {
            (Some(t), _) => t.clone(),
            (None, Some(t)) => t.clone(),
            (None, None) => "-9..9".to_string(),
        };
        let (lag_min, lag_max) = parse_lag_range(&lag_text)?;
        let criterion_text = match (&self.criterion, file.get("criterion")) {
            (Some(t), _) => t.clone(),
            (None, Some(t)) => t.clone(),
            (None, None) => "both".to_string(),
        };
        let criterion = match criterion_text.to_ascii_lowercase().as_str() {
            "rc" => CriterionChoice::Rc,
            "is" => CriterionChoice::Is,
            "both" => CriterionChoice::Both,
            other => return usage_err(format!("--criterion must be rc, is, or both; got '{other}'")),
        };
        Ok(Settings {
            window: pick(self.window, &file, "window", 10)?,
            grid_half_count: pick(self.grid_half_count, &file, "grid_half_count", 1000)?,
            lag_min,
            lag_max,
            criterion,
            stop_ratio: pick(self.stop_ratio, &file, "stop_ratio", 3.0)?,
            max_stages: pick(self.max_stages, &file, "max_stages", 4)?,
            lags_per_input: pick(self.lags_per_input, &file, "lags_per_input", 4)?,
            seed: pick(self.seed, &file, "seed", 1)?,
            out_dir: self.out_dir.clone(),
        })
    }
}

impl Settings {
    fn spectral_config(&self) -> Result<SpectralConfig> {
        Ok(SpectralConfig::new(
            LagWindow::tukey_hamming(self.window)?,
            FrequencyGrid::new(self.grid_half_count)?,
        ))
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Output noise standard deviation (0 gives the deterministic formula)
    #[arg(long, default_value_t = 1.0)]
    noise_sd: f64,
    /// Retained length of the aligned series
    #[arg(long, default_value_t = 1000)]
    length: usize,
}

#[derive(Args)]
struct PreprocessArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// FRED-style CSV files ("path" or "name=path"), aligned jointly
    #[arg(long = "input", required = true)]
    inputs: Vec<String>,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Output series file
    #[arg(long)]
    y: PathBuf,
    /// Input series files ("path" or "name=path"); the first two are the
    /// product-family bases
    #[arg(long = "input", required = true)]
    inputs: Vec<String>,
    /// Lags fixed by earlier stages (comma-separated), excluded from the scan
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    fixed_lags: Vec<i64>,
    /// Use self lag products X(t)X(t-u) of the first input instead of cross
    /// products
    #[arg(long)]
    self_product: bool,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[arg(long)]
    y: PathBuf,
    #[arg(long = "input", required = true)]
    inputs: Vec<String>,
    #[arg(long)]
    self_product: bool,
}

#[derive(Args)]
struct RegressArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[arg(long)]
    y: PathBuf,
    /// Input series files; interactions are cross products of the first two
    #[arg(long = "input", required = true)]
    inputs: Vec<String>,
    /// Interaction lags selected by the scan stage (comma-separated)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    interaction_lags: Vec<i64>,
    /// Fit without an intercept
    #[arg(long)]
    no_intercept: bool,
    /// Fit the full design without stepwise selection
    #[arg(long)]
    no_stepwise: bool,
}

#[derive(Args)]
struct FetchArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// FRED series ids
    #[arg(long = "series", required = true)]
    series: Vec<String>,
    #[arg(long, default_value = "2018-01-01")]
    start: chrono::NaiveDate,
    #[arg(long, default_value = "2019-12-31")]
    end: chrono::NaiveDate,
    /// Refuse network access
    #[arg(long)]
    offline: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Preprocess(args) => cmd_preprocess(args),
        Command::Scan(args) => cmd_scan(args),
        Command::Select(args) => cmd_select(args),
        Command::Regress(args) => cmd_regress(args),
        Command::Fetch(args) => cmd_fetch(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn ensure_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let settings = args.common.resolve()?;
    if args.noise_sd < 0.0 {
        return usage_err("--noise-sd must be ≥ 0");
    }
    ensure_out_dir(&settings.out_dir)?;
    let sim = simulate_quadratic_system(settings.seed, args.noise_sd, args.length)?;
    for (name, series) in [("x1", &sim.x1), ("x2", &sim.x2), ("y", &sim.y)] {
        let path = settings.out_dir.join(format!("{name}.csv"));
        write_series(&path, name, series)?;
        println!("wrote {} ({} rows)", path.display(), series.len());
    }
    Ok(())
}

fn cmd_preprocess(args: PreprocessArgs) -> Result<()> {
    let settings = args.common.resolve()?;
    ensure_out_dir(&settings.out_dir)?;
    let named: Vec<NamedPath> = args
        .inputs
        .iter()
        .map(|a| parse_named_path(a))
        .collect::<Result<_>>()?;
    let mut dated = Vec::new();
    for np in &named {
        let text = fs::read_to_string(&np.path)
            .with_context(|| format!("reading {}", np.path.display()))?;
        dated.push(parse_fred_csv(&text)?);
    }
    let (aligned, dates) = align_drop_missing(&dated)?;
    println!("aligned {} series on {} common dates", aligned.len(), dates.len());
    for (np, series) in named.iter().zip(&aligned) {
        let with_dates = Series::with_dates(series.values().to_vec(), dates.clone())?;
        let processed = preprocess(&with_dates)?;
        let path = settings.out_dir.join(format!("{}_processed.csv", np.name));
        write_series(&path, &np.name, &processed)?;
        println!("wrote {} ({} rows)", path.display(), processed.len());
    }
    Ok(())
}

struct LoadedInputs {
    y: Series,
    inputs: Vec<(String, Series)>,
}

fn load_inputs(y: &Path, input_args: &[String]) -> Result<LoadedInputs> {
    let y_series = read_series(y)?;
    let mut inputs = Vec::new();
    for arg in input_args {
        let np = parse_named_path(arg)?;
        inputs.push((np.name, read_series(&np.path)?));
    }
    Ok(LoadedInputs {
        y: y_series,
        inputs,
    })
}

fn family_for(
    loaded: &LoadedInputs,
    settings: &Settings,
    self_product: bool,
) -> Result<CandidateFamily> {
    if self_product {
        let (name, base) = &loaded.inputs[0];
        Ok(CandidateFamily::self_lag_product(
            name,
            base.clone(),
            settings.lag_min,
            settings.lag_max,
        )?)
    } else {
        if loaded.inputs.len() < 2 {
            return usage_err("cross-product scans need at least two --input series");
        }
        let (na, a) = &loaded.inputs[0];
        let (nb, b) = &loaded.inputs[1];
        Ok(CandidateFamily::cross_product(
            na,
            a.clone(),
            nb,
            b.clone(),
            settings.lag_min,
            settings.lag_max,
        )?)
    }
}

fn named_refs(loaded: &LoadedInputs) -> Vec<(&str, &Series)> {
    loaded
        .inputs
        .iter()
        .map(|(n, s)| (n.as_str(), s))
        .collect()
}

fn cmd_scan(args: ScanArgs) -> Result<()> {
    let settings = args.common.resolve()?;
    ensure_out_dir(&settings.out_dir)?;
    let loaded = load_inputs(&args.y, &args.inputs)?;
    let fam = family_for(&loaded, &settings, args.self_product)?;
    let cfg = settings.spectral_config()?;
    let refs = named_refs(&loaded);
    let (rc, is) = scan_both(&loaded.y, &refs, &args.fixed_lags, &fam, &cfg)?;
    let mut scans = serde_json::Map::new();
    for (criterion, result) in [
        (Criterion::ResidualCoherence, &rc),
        (Criterion::IntegratedSpectrum, &is),
    ] {
        if !settings.criterion.wants(criterion) {
            continue;
        }
        let tag = match criterion {
            Criterion::ResidualCoherence => "rc",
            Criterion::IntegratedSpectrum => "is",
        };
        let csv_path = settings.out_dir.join(format!("scan_{tag}.csv"));
        let mut buf = Vec::new();
        result.write_csv(&mut buf)?;
        fs::write(&csv_path, buf)?;
        println!(
            "{}",
            render_bars(&format!("{criterion} per candidate lag"), result)
        );
        scans.insert(tag.to_string(), serde_json::to_value(result)?);
    }
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "window": settings.window,
        "grid_half_count": settings.grid_half_count,
        "lag_range": [settings.lag_min, settings.lag_max],
        "fixed_lags": args.fixed_lags,
        "scans": scans,
    });
    let json_path = settings.out_dir.join("scan.json");
    fs::write(&json_path, serde_json::to_string_pretty(&doc)?)?;
    println!("wrote {}", json_path.display());
    Ok(())
}

fn selection_summary(run: &SelectionRun) -> String {
    format!(
        "{}: selected lags {:?}; stop: {}",
        run.criterion, run.selected, run.stop_reason
    )
}

fn cmd_select(args: SelectArgs) -> Result<()> {
    let settings = args.common.resolve()?;
    ensure_out_dir(&settings.out_dir)?;
    let loaded = load_inputs(&args.y, &args.inputs)?;
    let fam = family_for(&loaded, &settings, args.self_product)?;
    let cfg = settings.spectral_config()?;
    let refs = named_refs(&loaded);
    let stop = StopRule {
        prominence_threshold: settings.stop_ratio,
        max_stages: settings.max_stages,
    };
    let mut runs = serde_json::Map::new();
    for criterion in [Criterion::ResidualCoherence, Criterion::IntegratedSpectrum] {
        if !settings.criterion.wants(criterion) {
            continue;
        }
        let run = greedy_select(&loaded.y, &refs, &fam, criterion, &stop, &cfg)?;
        for stage in &run.stages {
            let fixed = &run.selected[..(stage.stage - 1).min(run.selected.len())];
            println!(
                "{}",
                render_bars(
                    &format!("{criterion} stage {} (fixed {fixed:?})", stage.stage),
                    &stage.scan
                )
            );
        }
        println!("{}\n", selection_summary(&run));
        let tag = match criterion {
            Criterion::ResidualCoherence => "rc",
            Criterion::IntegratedSpectrum => "is",
        };
        runs.insert(tag.to_string(), serde_json::to_value(&run)?);
    }
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "window": settings.window,
        "grid_half_count": settings.grid_half_count,
        "lag_range": [settings.lag_min, settings.lag_max],
        "stop_ratio": settings.stop_ratio,
        "max_stages": settings.max_stages,
        "runs": runs,
    });
    let path = settings.out_dir.join("select.json");
    fs::write(&path, serde_json::to_string_pretty(&doc)?)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_regress(args: RegressArgs) -> Result<()> {
    let settings = args.common.resolve()?;
    ensure_out_dir(&settings.out_dir)?;
    let loaded = load_inputs(&args.y, &args.inputs)?;
    if !args.interaction_lags.is_empty() && loaded.inputs.len() < 2 {
        return usage_err("interaction terms need at least two --input series");
    }
    let mut inputs: Vec<RegressionInput> = loaded
        .inputs
        .iter()
        .map(|(n, s)| RegressionInput::linear(n, s))
        .collect();
    for &h in &args.interaction_lags {
        let (na, a) = &loaded.inputs[0];
        let (nb, b) = &loaded.inputs[1];
        inputs.push(RegressionInput::interaction(na, a, nb, b, h)?);
    }
    let design = build_lag_design(&loaded.y, &inputs, settings.lags_per_input, !args.no_intercept)?;
    let fit: FitResult = if args.no_stepwise {
        ols_fit(&design)?
    } else {
        stepwise_aic(&design)?
    };
    print!("{}", fit.render_table());
    let csv_path = settings.out_dir.join("fit.csv");
    let mut buf = Vec::new();
    fit.write_csv(&mut buf)?;
    fs::write(&csv_path, buf)?;
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "lags_per_input": settings.lags_per_input,
        "interaction_lags": args.interaction_lags,
        "stepwise": !args.no_stepwise,
        "fit": serde_json::to_value(&fit)?,
    });
    let json_path = settings.out_dir.join("fit.json");
    fs::write(&json_path, serde_json::to_string_pretty(&doc)?)?;
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}

fn cmd_fetch(args: FetchArgs) -> Result<()> {
    let settings = args.common.resolve()?;
    ensure_out_dir(&settings.out_dir)?;
    let config = FetchConfig {
        offline: args.offline,
        ..FetchConfig::default()
    };
    for id in &args.series {
        let body = fetch_series(id, args.start, args.end, &config)?;
        // validate before writing
        let parsed = parse_fred_csv(&body)?;
        let path = settings.out_dir.join(format!("{id}.csv"));
        fs::write(&path, &body)?;
        println!("wrote {} ({} observations)", path.display(), parsed.len());
    }
    Ok(())
}
