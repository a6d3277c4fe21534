use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use forest_intervals::dataset::{self, Dataset};
use forest_intervals::error::{Error, Result};
use forest_intervals::eval;
use forest_intervals::forest::{fit_forest, ForestConfig};
use forest_intervals::interval::{predict_interval, IntervalMethod};
use forest_intervals::model;
use forest_intervals::selfcheck::run_oracle_check;

/// Random forest regression with distribution-aware prediction intervals.
#[derive(Parser)]
#[command(name = "forest-intervals", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a forest on a CSV dataset and write the model to disk.
    Train(TrainArgs),
    /// Predict intervals for every row of a feature CSV using a saved model.
    Predict(PredictArgs),
    /// Train on a random split and report interval quality on the held-out part.
    Evaluate(EvaluateArgs),
    /// Evaluate a grid of miscoverage levels and methods in one pass.
    Sweep(SweepArgs),
    /// Cross-check the interval solver against its quadratic reference.
    OracleCheck(OracleCheckArgs),
}

#[derive(Args)]
struct FitOpts {
    /// Number of trees.
    #[arg(long, default_value_t = 500)]
    trees: usize,
    /// Minimum bootstrap rows in each child of a split.
    #[arg(long, default_value_t = 5)]
    min_leaf: usize,
    /// Candidate features per node; defaults to a third of the columns.
    #[arg(long)]
    max_features: Option<usize>,
    /// Seed for splitting and fitting.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

impl FitOpts {
    fn config(&self) -> ForestConfig {
        ForestConfig {
            n_trees: self.trees,
            min_leaf: self.min_leaf,
            max_features: self.max_features,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Training data CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Name of the target column.
    #[arg(long)]
    target: String,
    /// Where to write the model JSON.
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    fit: FitOpts,
}

#[derive(Args)]
struct PredictArgs {
    /// Model JSON written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Feature CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Target column to drop from the CSV, if it has one.
    #[arg(long)]
    target: Option<String>,
    /// Where to write the intervals CSV.
    #[arg(long)]
    output: PathBuf,
    /// Miscoverage level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Interval construction rule: "hdi" or "equal-tailed".
    #[arg(long, default_value = "hdi")]
    method: IntervalMethod,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Data CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Name of the target column.
    #[arg(long)]
    target: String,
    /// Where to write the report JSON.
    #[arg(long)]
    output: PathBuf,
    /// Fraction of rows held out for evaluation.
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    /// Miscoverage level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Interval construction rule: "hdi" or "equal-tailed".
    #[arg(long, default_value = "hdi")]
    method: IntervalMethod,
    #[command(flatten)]
    fit: FitOpts,
}

#[derive(Args)]
struct SweepArgs {
    /// Data CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Name of the target column.
    #[arg(long)]
    target: String,
    /// Where to write the report CSV.
    #[arg(long)]
    output: PathBuf,
    /// Fraction of rows held out for evaluation.
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    /// Levels as "start:stop:step" or a comma list like "0.3,0.2,0.1".
    #[arg(long, default_value = "0.05:0.30:0.05")]
    alphas: String,
    /// Comma list of methods.
    #[arg(long, default_value = "hdi,equal-tailed")]
    methods: String,
    #[command(flatten)]
    fit: FitOpts,
}

#[derive(Args)]
struct OracleCheckArgs {
    /// Number of randomized cases.
    #[arg(long, default_value_t = 1000)]
    cases: usize,
    /// Largest support size to draw.
    #[arg(long, default_value_t = 200)]
    max_support: usize,
    /// Seed for case generation.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            _ => {
                eprint!("{e}");
                return ExitCode::from(1);
            }
        },
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 1 for errors in how the tool was invoked, 2 for problems with the data or
/// files it was pointed at.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidAlpha(_)
        | Error::InvalidQuantileLevel(_)
        | Error::InvalidConfig(_)
        | Error::InvalidTestFraction(_) => 1,
        _ => 2,
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::OracleCheck(args) => cmd_oracle_check(args),
    }
}

/// Writes through a temporary file in the destination directory so the
/// output path never holds a partial file.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<u8> {
    let data = dataset::load_csv(&args.data, &args.target)?;
    let started = Instant::now();
    let forest = fit_forest(&data, &args.fit.config(), args.fit.seed)?;
    let elapsed = started.elapsed();
    write_atomic(&args.output, &(model::to_json(&forest)? + "\n"))?;
    println!(
        "fitted {} trees on {} rows x {} features in {:.2}s",
        forest.n_trees(),
        data.n_rows(),
        data.n_features(),
        elapsed.as_secs_f64()
    );
    println!("model written to {}", args.output.display());
    Ok(0)
}

/// Reads a CSV as a bare feature matrix, optionally dropping one named
/// column (so files that still carry their target column can be predicted
/// on directly).
fn read_feature_matrix(path: &Path, drop_column: Option<&str>) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.to_string()).collect();
    let drop_idx = match drop_column {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingTargetColumn(name.to_string()))?,
        ),
        None => None,
    };
    let mut rows = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(headers.len());
        for (col_idx, cell) in record.iter().enumerate() {
            if Some(col_idx) == drop_idx {
                continue;
            }
            let value: f64 = cell.parse().map_err(|e| Error::CsvCell {
                row: row_idx,
                column: headers.get(col_idx).cloned().unwrap_or_default(),
                message: format!("{e}: {cell:?}"),
            })?;
            row.push(value);
        }
        rows.push(row);
    }
    Ok(rows)
}

fn cmd_predict(args: PredictArgs) -> Result<u8> {
    let forest = model::load(&args.model)?;
    let rows = read_feature_matrix(&args.data, args.target.as_deref())?;
    let mut out = String::from("row,lower_raw,upper_raw,lower_std,upper_std,estimated_coverage\n");
    for (i, row) in rows.iter().enumerate() {
        let pred = predict_interval(&forest, row, args.alpha, args.method)?;
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            i,
            pred.lower_raw,
            pred.upper_raw,
            pred.standardized.lower,
            pred.standardized.upper,
            pred.standardized.estimated_coverage
        ));
    }
    write_atomic(&args.output, &out)?;
    println!(
        "wrote {} intervals to {} (alpha {}, {})",
        rows.len(),
        args.output.display(),
        args.alpha,
        args.method
    );
    Ok(0)
}

fn fit_on_split(
    data_path: &Path,
    target: &str,
    test_fraction: f64,
    fit: &FitOpts,
) -> Result<(forest_intervals::forest::Forest, Dataset)> {
    let data = dataset::load_csv(data_path, target)?;
    let (train, test) = dataset::split(&data, test_fraction, fit.seed)?;
    let forest = fit_forest(&train, &fit.config(), fit.seed)?;
    Ok((forest, test))
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<u8> {
    let (forest, test) = fit_on_split(&args.data, &args.target, args.test_fraction, &args.fit)?;
    let report = eval::evaluate(&forest, &test, args.alpha, args.method)?;
    write_atomic(
        &args.output,
        &(serde_json::to_string_pretty(&report).map_err(Error::Json)? + "\n"),
    )?;
    print_report(&report);
    println!("report written to {}", args.output.display());
    Ok(0)
}

fn print_report(r: &eval::PIQualityReport) {
    println!(
        "alpha {:.3} {}: picp {:.4}, mpiw_std {:.4}, mpiw_raw {:.4}, n_test {}",
        r.alpha, r.method, r.picp, r.mpiw_standardized, r.mpiw_raw, r.n_test
    );
}

/// Parses "start:stop:step" (inclusive of stop, within rounding) or a comma
/// list of levels.
fn parse_alpha_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |msg: String| Error::InvalidConfig(format!("alpha grid {spec:?}: {msg}"));
    let parse_one = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|e| bad(format!("{e} in {s:?}")))
    };
    let values: Vec<f64> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected start:stop:step".into()));
        }
        let (start, stop, step) = (
            parse_one(parts[0])?,
            parse_one(parts[1])?,
            parse_one(parts[2])?,
        );
        if !(step > 0.0) || !step.is_finite() {
            return Err(bad(format!("step must be positive, got {step}")));
        }
        if stop < start {
            return Err(bad(format!("stop {stop} is below start {start}")));
        }
        let mut values = Vec::new();
        let mut k = 0u32;
        loop {
            let v = start + f64::from(k) * step;
            if v > stop + step * 1e-9 {
                break;
            }
            // Snap accumulated float drift back to the decimal the user
            // wrote, so grid levels match their comma-list spellings.
            values.push((v * 1e9).round() / 1e9);
            k += 1;
        }
        values
    } else {
        spec.split(',').map(parse_one).collect::<Result<_>>()?
    };
    if values.is_empty() {
        return Err(bad("no levels given".into()));
    }
    for &v in &values {
        if !(v >= 0.0 && v < 1.0) {
            return Err(Error::InvalidAlpha(v));
        }
    }
    Ok(values)
}

fn parse_methods(spec: &str) -> Result<Vec<IntervalMethod>> {
    let methods: Vec<IntervalMethod> = spec
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<_>>()?;
    if methods.is_empty() {
        return Err(Error::InvalidConfig("no methods given".into()));
    }
    Ok(methods)
}

fn cmd_sweep(args: SweepArgs) -> Result<u8> {
    let alphas = parse_alpha_grid(&args.alphas)?;
    let methods = parse_methods(&args.methods)?;
    let (forest, test) = fit_on_split(&args.data, &args.target, args.test_fraction, &args.fit)?;
    let reports = eval::sweep(&forest, &test, &alphas, &methods)?;
    write_atomic(&args.output, &eval::reports_to_csv(&reports))?;
    for report in &reports {
        print_report(report);
    }
    println!("report written to {}", args.output.display());
    Ok(0)
}

fn cmd_oracle_check(args: OracleCheckArgs) -> Result<u8> {
    if args.max_support == 0 {
        return Err(Error::InvalidConfig("max-support must be at least 1".into()));
    }
    let report = run_oracle_check(args.cases, args.max_support, args.seed);
    print!("{report}");
    if report.is_ok() {
        Ok(0)
    } else {
        Ok(3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_grid_accepts_ranges_and_lists() {
        let grid = parse_alpha_grid("0.05:0.30:0.05").unwrap();
        assert_eq!(grid, vec![0.05, 0.10, 0.15, 0.20, 0.25, 0.30]);

        let list = parse_alpha_grid("0.3,0.2,0.1").unwrap();
        assert_eq!(list, vec![0.3, 0.2, 0.1]);
    }

    #[test]
    fn alpha_grid_rejects_malformed_specs() {
        assert!(parse_alpha_grid("0.05:0.30").is_err());
        assert!(parse_alpha_grid("0.3:0.1:0.05").is_err());
        assert!(parse_alpha_grid("0.1:0.3:0").is_err());
        assert!(parse_alpha_grid("a,b").is_err());
        assert!(parse_alpha_grid("0.5,1.5").is_err());
        assert!(parse_alpha_grid("").is_err());
    }

    #[test]
    fn methods_parse_as_a_comma_list() {
        let methods = parse_methods("hdi,equal-tailed").unwrap();
        assert_eq!(
            methods,
            vec![IntervalMethod::Hdi, IntervalMethod::EqualTailed]
        );
        assert!(parse_methods("hdi,narrowest").is_err());
    }
}
