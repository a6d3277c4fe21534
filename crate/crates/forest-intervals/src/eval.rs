use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::forest::Forest;
use crate::interval::{solve_interval, IntervalMethod, PredictionInterval};
use crate::kahan::KahanSum;
use crate::weights::query_distribution;

/// Quality summary for one interval method at one miscoverage level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PIQualityReport {
    pub alpha: f64,
    pub method: IntervalMethod,
    /// Fraction of test targets captured by their interval (endpoints
    /// count), an exact ratio of counts.
    pub picp: f64,
    /// Mean interval width in standardized target units.
    pub mpiw_standardized: f64,
    /// Mean interval width in raw target units; the standardized value
    /// rescaled by the training target standard deviation.
    pub mpiw_raw: f64,
    pub n_test: usize,
}

/// Prediction interval coverage probability: the fraction of targets that
/// fall inside their interval, endpoints inclusive.
pub fn picp(intervals: &[PredictionInterval], targets: &[f64]) -> Result<f64> {
    if intervals.is_empty() {
        return Err(Error::InvalidConfig("picp of an empty batch".into()));
    }
    if intervals.len() != targets.len() {
        return Err(Error::InvalidConfig(format!(
            "{} intervals but {} targets",
            intervals.len(),
            targets.len()
        )));
    }
    let captured = intervals
        .iter()
        .zip(targets)
        .filter(|(interval, &y)| interval.contains(y))
        .count();
    Ok(captured as f64 / targets.len() as f64)
}

/// Mean prediction interval width.
pub fn mpiw(intervals: &[PredictionInterval]) -> Result<f64> {
    if intervals.is_empty() {
        return Err(Error::InvalidConfig("mpiw of an empty batch".into()));
    }
    let mut widths = KahanSum::new();
    for interval in intervals {
        widths.add(interval.width());
    }
    Ok(widths.value() / intervals.len() as f64)
}

/// Per-row interval outcomes for a set of (alpha, method) combinations:
/// whether the standardized target was captured, and the standardized width.
/// The weighted target distribution is built once per row and shared across
/// combinations. Row results keep dataset order regardless of scheduling.
fn row_outcomes(
    forest: &Forest,
    test: &Dataset,
    combos: &[(f64, IntervalMethod)],
) -> Result<Vec<Vec<(bool, f64)>>> {
    if test.n_features() != forest.n_features() {
        return Err(Error::DimensionMismatch {
            got: test.n_features(),
            expected: forest.n_features(),
        });
    }
    let params = forest.standardization();
    (0..test.n_rows())
        .into_par_iter()
        .map(|r| {
            let sd = query_distribution(forest, test.row(r))?;
            let y_std = params.standardize(test.targets()[r]);
            combos
                .iter()
                .map(|&(alpha, method)| {
                    let interval = solve_interval(&sd, alpha, method)?;
                    Ok((interval.contains(y_std), interval.width()))
                })
                .collect()
        })
        .collect()
}

fn summarize(
    outcomes: &[Vec<(bool, f64)>],
    combo_idx: usize,
    alpha: f64,
    method: IntervalMethod,
    target_std: f64,
) -> PIQualityReport {
    let n = outcomes.len();
    let mut captured = 0usize;
    let mut widths = KahanSum::new();
    for row in outcomes {
        let (covered, width) = row[combo_idx];
        if covered {
            captured += 1;
        }
        widths.add(width);
    }
    let mpiw_standardized = widths.value() / n as f64;
    PIQualityReport {
        alpha,
        method,
        picp: captured as f64 / n as f64,
        mpiw_standardized,
        mpiw_raw: mpiw_standardized * target_std,
        n_test: n,
    }
}

/// Evaluates one interval method at one level on a held-out dataset.
/// Coverage is judged in standardized units: the test targets are mapped
/// through the forest's training standardization, never re-fit on test data.
pub fn evaluate(
    forest: &Forest,
    test: &Dataset,
    alpha: f64,
    method: IntervalMethod,
) -> Result<PIQualityReport> {
    let combos = [(alpha, method)];
    let outcomes = row_outcomes(forest, test, &combos)?;
    Ok(summarize(
        &outcomes,
        0,
        alpha,
        method,
        forest.standardization().std,
    ))
}

/// Evaluates every (alpha, method) combination, reusing each row's weighted
/// target distribution across the whole grid. Reports are ordered by alpha
/// first (in the given order), then method.
pub fn sweep(
    forest: &Forest,
    test: &Dataset,
    alphas: &[f64],
    methods: &[IntervalMethod],
) -> Result<Vec<PIQualityReport>> {
    for &alpha in alphas {
        if !(alpha >= 0.0 && alpha < 1.0) {
            return Err(Error::InvalidAlpha(alpha));
        }
    }
    let combos: Vec<(f64, IntervalMethod)> = alphas
        .iter()
        .flat_map(|&a| methods.iter().map(move |&m| (a, m)))
        .collect();
    if combos.is_empty() {
        return Ok(Vec::new());
    }
    let outcomes = row_outcomes(forest, test, &combos)?;
    let target_std = forest.standardization().std;
    Ok(combos
        .iter()
        .enumerate()
        .map(|(idx, &(alpha, method))| summarize(&outcomes, idx, alpha, method, target_std))
        .collect())
}

/// Renders reports as CSV with a header row.
pub fn reports_to_csv(reports: &[PIQualityReport]) -> String {
    let mut out = String::from("alpha,method,picp,mpiw_standardized,mpiw_raw,n_test\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.alpha, r.method, r.picp, r.mpiw_standardized, r.mpiw_raw, r.n_test
        ));
    }
    out
}
