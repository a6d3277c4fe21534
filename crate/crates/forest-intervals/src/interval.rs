use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::Forest;
use crate::weights::{query_distribution, SupportDistribution};

/// Tolerance subtracted from mass thresholds so that coverage targets hit
/// exactly (for example 0.95 assembled from weights that should sum to 0.95)
/// are not rejected over the last unit in the last place.
pub const MASS_SLACK: f64 = 1e-12;

/// A closed prediction interval for one query, in the same target units as
/// the distribution it was derived from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    pub lower: f64,
    pub upper: f64,
    /// Probability mass the interval captures under the query's weighted
    /// target distribution.
    pub estimated_coverage: f64,
    /// Miscoverage level the interval was built for.
    pub alpha: f64,
}

impl PredictionInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Whether `y` falls inside the interval; both endpoints count.
    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }
}

/// Interval construction rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalMethod {
    /// Minimum-width interval with mass at least `1 - alpha`.
    Hdi,
    /// Central interval between the `alpha/2` and `1 - alpha/2` quantiles.
    EqualTailed,
}

impl fmt::Display for IntervalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntervalMethod::Hdi => write!(f, "hdi"),
            IntervalMethod::EqualTailed => write!(f, "equal-tailed"),
        }
    }
}

impl FromStr for IntervalMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hdi" => Ok(IntervalMethod::Hdi),
            "equal-tailed" | "equal_tailed" => Ok(IntervalMethod::EqualTailed),
            other => Err(Error::InvalidConfig(format!(
                "unknown interval method {other:?}, expected \"hdi\" or \"equal-tailed\""
            ))),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    Ok(())
}

/// Smallest support point whose CDF reaches `tau` (up to `MASS_SLACK`).
/// Levels at or below 0 give the minimum; if accumulated mass never reaches
/// the level, the maximum is returned.
pub fn quantile(sd: &SupportDistribution, tau: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidQuantileLevel(tau));
    }
    Ok(sd.support()[quantile_index(sd, tau)])
}

/// Index form of `quantile`, clamped into the support.
fn quantile_index(sd: &SupportDistribution, tau: f64) -> usize {
    let threshold = tau - MASS_SLACK;
    let cumulative = &sd.cumulative()[1..];
    let idx = cumulative.partition_point(|&c| c < threshold);
    idx.min(sd.len() - 1)
}

/// Central interval from the `alpha/2` quantile to the `1 - alpha/2`
/// quantile of the weighted target distribution.
pub fn equal_tailed_interval(
    sd: &SupportDistribution,
    alpha: f64,
) -> Result<PredictionInterval> {
    check_alpha(alpha)?;
    let lo = quantile_index(sd, alpha / 2.0);
    let hi = quantile_index(sd, 1.0 - alpha / 2.0);
    debug_assert!(lo <= hi);
    Ok(PredictionInterval {
        lower: sd.support()[lo],
        upper: sd.support()[hi],
        estimated_coverage: sd.mass_of_range(lo, hi),
        alpha,
    })
}

struct MinWidthSweep {
    /// Inclusive index range of the best interval, if any range reaches the
    /// mass threshold.
    best: Option<(usize, usize)>,
    /// Total pointer increments performed; at most `2 * n`.
    advances: usize,
}

/// Two-pointer sweep for the narrowest inclusive index range whose mass
/// reaches `need`.
///
/// For each lower index `i` the optimal upper index never moves left as `i`
/// moves right (masses shrink monotonically when the range loses its left
/// atoms), so the upper pointer resumes where it stopped instead of
/// rescanning; the whole search is linear in the support size. Ties in width
/// are broken toward the smallest lower index, because later candidates must
/// beat the incumbent strictly.
fn min_width_sweep(sd: &SupportDistribution, need: f64) -> MinWidthSweep {
    let n = sd.len();
    let support = sd.support();
    let mut best: Option<(usize, usize)> = None;
    let mut best_width = f64::INFINITY;
    let mut advances = 0;
    let mut j = 0;
    for i in 0..n {
        if j < i {
            j = i;
            advances += 1;
        }
        while sd.mass_of_range(i, j) < need && j + 1 < n {
            j += 1;
            advances += 1;
        }
        if sd.mass_of_range(i, j) < need {
            // Even the full remaining tail is short on mass; dropping more
            // left atoms cannot help.
            break;
        }
        let width = support[j] - support[i];
        if width < best_width {
            best_width = width;
            best = Some((i, j));
        }
        advances += 1;
    }
    MinWidthSweep { best, advances }
}

fn interval_from_range(
    sd: &SupportDistribution,
    range: Option<(usize, usize)>,
    alpha: f64,
) -> PredictionInterval {
    match range {
        Some((i, j)) => PredictionInterval {
            lower: sd.support()[i],
            upper: sd.support()[j],
            estimated_coverage: sd.mass_of_range(i, j),
            alpha,
        },
        // The whole support cannot reach the threshold (only possible when
        // rounding leaves the total just under it); the full range is the
        // best available answer.
        None => PredictionInterval {
            lower: sd.min(),
            upper: sd.max(),
            estimated_coverage: sd.total_mass(),
            alpha,
        },
    }
}

/// Narrowest interval holding at least `1 - alpha` of the distribution's
/// mass. Both endpoints are support points; no narrower pair of endpoints
/// anywhere on the real line can hold the same mass, since shrinking an
/// endpoint past a support point drops its atom.
pub fn hdi(sd: &SupportDistribution, alpha: f64) -> Result<PredictionInterval> {
    check_alpha(alpha)?;
    let need = 1.0 - alpha - MASS_SLACK;
    let sweep = min_width_sweep(sd, need);
    debug_assert!(sweep.advances <= 2 * sd.len());
    Ok(interval_from_range(sd, sweep.best, alpha))
}

/// Reference implementation of `hdi` that rescans the candidate upper index
/// from scratch for every lower index. Quadratic, and deliberately free of
/// the pointer-reuse shortcut, so the two can be checked against each other.
/// Must return bit-identical endpoints to `hdi` for every input.
pub fn hdi_bruteforce(sd: &SupportDistribution, alpha: f64) -> Result<PredictionInterval> {
    check_alpha(alpha)?;
    let need = 1.0 - alpha - MASS_SLACK;
    let n = sd.len();
    let support = sd.support();
    let mut best: Option<(usize, usize)> = None;
    let mut best_width = f64::INFINITY;
    for i in 0..n {
        for j in i..n {
            if sd.mass_of_range(i, j) >= need {
                let width = support[j] - support[i];
                if width < best_width {
                    best_width = width;
                    best = Some((i, j));
                }
                // Larger j at this i only widens the interval.
                break;
            }
        }
    }
    Ok(interval_from_range(sd, best, alpha))
}

/// For each lower index `i`, the smallest upper index `j >= i` whose range
/// mass reaches `1 - alpha`, or `None` when no such index exists. The
/// defined entries are non-decreasing; this is the structural fact that
/// makes the linear sweep in `hdi` correct.
pub fn j_opt_profile(sd: &SupportDistribution, alpha: f64) -> Result<Vec<Option<usize>>> {
    check_alpha(alpha)?;
    let need = 1.0 - alpha - MASS_SLACK;
    let n = sd.len();
    let cumulative = sd.cumulative();
    let profile = (0..n)
        .map(|i| {
            let base = cumulative[i];
            // Same subtraction the sweep uses, so feasibility decisions are
            // bit-identical.
            let offset = cumulative[i + 1..].partition_point(|&c| c - base < need);
            if i + offset < n {
                Some(i + offset)
            } else {
                None
            }
        })
        .collect();
    Ok(profile)
}

/// Builds a prediction interval for one method.
pub fn solve_interval(
    sd: &SupportDistribution,
    alpha: f64,
    method: IntervalMethod,
) -> Result<PredictionInterval> {
    match method {
        IntervalMethod::Hdi => hdi(sd, alpha),
        IntervalMethod::EqualTailed => equal_tailed_interval(sd, alpha),
    }
}

/// A prediction interval in both standardized and raw target units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalPrediction {
    /// Interval in the standardized units the forest works in.
    pub standardized: PredictionInterval,
    pub lower_raw: f64,
    pub upper_raw: f64,
}

/// End-to-end interval prediction: forest weights for `x`, collapse to the
/// weighted target distribution, then solve for the requested interval.
/// Raw-unit endpoints are mapped back through the forest's standardization
/// parameters.
pub fn predict_interval(
    forest: &Forest,
    x: &[f64],
    alpha: f64,
    method: IntervalMethod,
) -> Result<IntervalPrediction> {
    let sd = query_distribution(forest, x)?;
    let standardized = solve_interval(&sd, alpha, method)?;
    let params = forest.standardization();
    Ok(IntervalPrediction {
        lower_raw: params.unstandardize(standardized.lower),
        upper_raw: params.unstandardize(standardized.upper),
        standardized,
    })
}
