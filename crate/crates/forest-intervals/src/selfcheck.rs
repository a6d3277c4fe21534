use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution};

use crate::interval::{hdi, hdi_bruteforce, j_opt_profile, MASS_SLACK};
use crate::weights::SupportDistribution;

/// One way a randomized cross-check can fail.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleFailure {
    /// The linear sweep and the quadratic rescan disagreed on endpoints.
    EndpointMismatch {
        case: usize,
        alpha: f64,
        support_len: usize,
        fast: (f64, f64),
        slow: (f64, f64),
    },
    /// The optimal-upper-index profile decreased somewhere.
    NonMonotoneProfile { case: usize, at: usize },
    /// An interval fell short of its mass target without being the full
    /// support range.
    InfeasibleInterval {
        case: usize,
        alpha: f64,
        coverage: f64,
    },
    /// An interval endpoint is not a support point.
    EndpointNotInSupport { case: usize, endpoint: f64 },
}

impl fmt::Display for OracleFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleFailure::EndpointMismatch {
                case,
                alpha,
                support_len,
                fast,
                slow,
            } => write!(
                f,
                "case {case}: sweep [{}, {}] != rescan [{}, {}] (alpha {alpha}, {support_len} atoms)",
                fast.0, fast.1, slow.0, slow.1
            ),
            OracleFailure::NonMonotoneProfile { case, at } => {
                write!(f, "case {case}: upper-index profile decreases at index {at}")
            }
            OracleFailure::InfeasibleInterval {
                case,
                alpha,
                coverage,
            } => write!(
                f,
                "case {case}: coverage {coverage} below target at alpha {alpha}"
            ),
            OracleFailure::EndpointNotInSupport { case, endpoint } => {
                write!(f, "case {case}: endpoint {endpoint} is not a support point")
            }
        }
    }
}

/// Outcome of a randomized cross-check run.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheckReport {
    pub cases: usize,
    pub failures: Vec<OracleFailure>,
}

impl OracleCheckReport {
    pub fn passed(&self) -> usize {
        self.cases - self.failed_cases()
    }

    /// Number of distinct cases with at least one failure.
    fn failed_cases(&self) -> usize {
        let mut cases: Vec<usize> = self
            .failures
            .iter()
            .map(|f| match f {
                OracleFailure::EndpointMismatch { case, .. }
                | OracleFailure::NonMonotoneProfile { case, .. }
                | OracleFailure::InfeasibleInterval { case, .. }
                | OracleFailure::EndpointNotInSupport { case, .. } => *case,
            })
            .collect();
        cases.dedup();
        cases.len()
    }

    pub fn is_ok(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for OracleCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}/{} cases passed", self.passed(), self.cases)?;
        for failure in self.failures.iter().take(20) {
            writeln!(f, "  {failure}")?;
        }
        if self.failures.len() > 20 {
            writeln!(f, "  ... and {} more failures", self.failures.len() - 20)?;
        }
        Ok(())
    }
}

/// Draws a random distribution: up to `max_support` distinct support points
/// and Dirichlet(1, ..., 1) weights, so weight profiles range from nearly
/// uniform to heavily concentrated.
fn random_distribution(rng: &mut ChaCha8Rng, max_support: usize) -> SupportDistribution {
    let n = rng.gen_range(1..=max_support);
    let mut support: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..100.0)).collect();
    support.sort_by(f64::total_cmp);
    support.dedup();
    let weights = if support.len() == 1 {
        vec![1.0]
    } else {
        Dirichlet::new_with_size(1.0, support.len())
            .expect("dirichlet parameters are fixed and valid")
            .sample(rng)
    };
    SupportDistribution::new(support, weights).expect("generated distribution is valid")
}

/// Runs `cases` randomized cross-checks of the interval machinery. Each case
/// draws a fresh distribution and level, then verifies that the linear sweep
/// and the quadratic rescan return bit-identical endpoints, that the
/// optimal-upper-index profile is monotone with a trailing undefined block,
/// that coverage reaches its target, and that endpoints are support points.
pub fn run_oracle_check(cases: usize, max_support: usize, seed: u64) -> OracleCheckReport {
    assert!(max_support >= 1, "max_support must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    for case in 0..cases {
        let sd = random_distribution(&mut rng, max_support);
        let alpha = rng.gen_range(0.0..=0.99);

        let fast = hdi(&sd, alpha).expect("alpha is in range");
        let slow = hdi_bruteforce(&sd, alpha).expect("alpha is in range");
        if fast.lower.to_bits() != slow.lower.to_bits()
            || fast.upper.to_bits() != slow.upper.to_bits()
        {
            failures.push(OracleFailure::EndpointMismatch {
                case,
                alpha,
                support_len: sd.len(),
                fast: (fast.lower, fast.upper),
                slow: (slow.lower, slow.upper),
            });
        }

        let profile = j_opt_profile(&sd, alpha).expect("alpha is in range");
        let defined: Vec<usize> = profile.iter().flatten().copied().collect();
        if let Some(at) = defined.windows(2).position(|w| w[0] > w[1]) {
            failures.push(OracleFailure::NonMonotoneProfile { case, at });
        }
        if defined.len() < profile.len() && profile[defined.len()..].iter().any(|e| e.is_some()) {
            failures.push(OracleFailure::NonMonotoneProfile {
                case,
                at: defined.len(),
            });
        }

        let full_range = fast.lower == sd.min() && fast.upper == sd.max();
        if fast.estimated_coverage < 1.0 - alpha - MASS_SLACK && !full_range {
            failures.push(OracleFailure::InfeasibleInterval {
                case,
                alpha,
                coverage: fast.estimated_coverage,
            });
        }

        for endpoint in [fast.lower, fast.upper] {
            if sd
                .support()
                .binary_search_by(|s| s.total_cmp(&endpoint))
                .is_err()
            {
                failures.push(OracleFailure::EndpointNotInSupport { case, endpoint });
            }
        }
    }
    OracleCheckReport { cases, failures }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thousand_cases_pass() {
        let report = run_oracle_check(1000, 50, 42);
        assert!(report.is_ok(), "{report}");
        assert_eq!(report.passed(), 1000);
    }

    #[test]
    fn runs_are_deterministic() {
        let a = run_oracle_check(50, 30, 7);
        let b = run_oracle_check(50, 30, 7);
        assert_eq!(a, b);
    }

    #[test]
    fn zero_cases_is_vacuously_ok() {
        let report = run_oracle_check(0, 10, 0);
        assert!(report.is_ok());
        assert_eq!(report.cases, 0);
    }

    #[test]
    fn report_formats_a_summary_line() {
        let report = run_oracle_check(25, 10, 1);
        let text = report.to_string();
        assert!(text.starts_with("25/25 cases passed"), "got: {text}");
    }
}
