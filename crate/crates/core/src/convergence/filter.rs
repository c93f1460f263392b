use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::Verdict;

/// A filter on `ℕ`, realized at a finite horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterSpec {
    /// Cofinite sets; convergence along it is the usual one.
    Cofinite,
    /// Sets of asymptotic density one, approximated by empirical density
    /// `≥ theta` on `1..=N`.
    Density { theta: f64 },
    /// The filter generated by an explicit base of index sets.
    Explicit { sets: Vec<Vec<usize>> },
}

impl FilterSpec {
    /// Density filter with `θ = 1 − η`.
    pub fn density(eta: f64) -> Self {
        FilterSpec::Density { theta: 1.0 - eta }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FilterSpec::Cofinite => Ok(()),
            FilterSpec::Density { theta } => {
                if *theta > 0.5 && *theta <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidFilter(format!(
                        "density threshold {theta} outside (1/2, 1]"
                    )))
                }
            }
            FilterSpec::Explicit { sets } => {
                if sets.is_empty() {
                    return Err(Error::InvalidFilter("empty family".into()));
                }
                for (i, a) in sets.iter().enumerate() {
                    if a.is_empty() {
                        return Err(Error::InvalidFilter(format!("set {i} is empty")));
                    }
                    if a.contains(&0) {
                        return Err(Error::InvalidFilter(format!(
                            "set {i} contains index 0; indices start at 1"
                        )));
                    }
                    for (j, b) in sets.iter().enumerate().skip(i + 1) {
                        if !a.iter().any(|n| b.contains(n)) {
                            return Err(Error::InvalidFilter(format!(
                                "sets {i} and {j} have empty intersection"
                            )));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// Whether the filter refines the cofinite filter on `1..=horizon`.
    /// For an explicit base this means some base set lies in `(N/2, N]`.
    pub fn is_free_at(&self, horizon: usize) -> bool {
        match self {
            FilterSpec::Cofinite => true,
            // Sets missing at most ⌊(1−θ)·N⌋ indices are members, so at
            // least one finite modification must be absorbed.
            FilterSpec::Density { theta } => horizon as f64 * (1.0 - theta) >= 1.0,
            FilterSpec::Explicit { sets } => {
                let half = horizon / 2;
                sets.iter().any(|s| s.iter().all(|&n| n > half && n <= horizon))
            }
        }
    }

    /// Decides whether the membership set `{n : severity_n ≤ 1}` belongs to
    /// the filter at the horizon `N = severity.len()`.
    pub fn decide(&self, severity: &[f64], tail_fraction: f64, band: f64) -> Verdict {
        match self {
            FilterSpec::Cofinite => cofinite_decision(severity, tail_fraction),
            FilterSpec::Density { theta } => density_decision(severity, *theta, band),
            FilterSpec::Explicit { sets } => {
                let n = severity.len();
                let inside = |s: &Vec<usize>| {
                    s.iter()
                        .filter(|&&k| k <= n)
                        .all(|&k| severity[k - 1] <= 1.0)
                };
                if sets.iter().any(|s| s.iter().any(|&k| k <= n) && inside(s)) {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                }
            }
        }
    }
}

/// Start (0-based) of the evaluated tail `(⌊(1−f)·N⌋, N]`.
pub(crate) fn tail_start(len: usize, tail_fraction: f64) -> usize {
    let start = ((1.0 - tail_fraction.clamp(0.0, 1.0)) * len as f64).floor() as usize;
    start.min(len.saturating_sub(1))
}

/// Cofinite membership at a finite horizon: every index in the tail must be
/// a member. A breach is a failure when the late half of the tail shows no
/// usable improvement over the early half, and unresolved otherwise.
pub(crate) fn cofinite_decision(severity: &[f64], tail_fraction: f64) -> Verdict {
    let len = severity.len();
    if len < 2 {
        return Verdict::Inconclusive;
    }
    let start = tail_start(len, tail_fraction);
    let tail = &severity[start..];
    if tail.iter().all(|&s| s <= 1.0) {
        return Verdict::Pass;
    }
    if tail.len() < 2 {
        return Verdict::Inconclusive;
    }
    let mid = tail.len() / 2;
    let early = tail[..mid].iter().copied().fold(0.0, f64::max);
    let late = tail[mid..].iter().copied().fold(0.0, f64::max);
    // Fail when the tail is not improving, or improving so slowly that
    // closing the remaining gap would take more than ten further halves.
    if late > 1.0 && (late >= early || late - 1.0 > 10.0 * (early - late)) {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    }
}

fn density_decision(severity: &[f64], theta: f64, band: f64) -> Verdict {
    let len = severity.len();
    if len == 0 {
        return Verdict::Inconclusive;
    }
    let members = |s: &[f64]| s.iter().filter(|&&v| v <= 1.0).count() as f64 / s.len() as f64;
    let density = members(severity);
    if density >= theta {
        return Verdict::Pass;
    }
    if density >= theta - band || len < 4 {
        return Verdict::Inconclusive;
    }
    let half = &severity[len / 2..];
    let q = half.len() / 2;
    let (early, late) = (members(&half[..q]), members(&half[q..]));
    if late > early {
        Verdict::Inconclusive
    } else {
        Verdict::Fail
    }
}

/// Smallest value `q` with `#{k : v_k ≤ q} ≥ θ·len`, i.e. the `⌈θ·len⌉`-th
/// order statistic.
pub(crate) fn upper_quantile(values: &mut [f64], theta: f64) -> f64 {
    let len = values.len();
    let rank = ((theta * len as f64).ceil() as usize).clamp(1, len);
    let (_, q, _) = values.select_nth_unstable_by(rank - 1, |a, b| a.total_cmp(b));
    *q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_family_must_intersect() {
        let bad = FilterSpec::Explicit {
            sets: vec![vec![1, 2], vec![3, 4]],
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidFilter(_))));
        let good = FilterSpec::Explicit {
            sets: vec![vec![5, 6, 7], vec![6, 7, 8]],
        };
        assert!(good.validate().is_ok());
        assert!(good.is_free_at(10));
        assert!(!good.is_free_at(20));
    }

    #[test]
    fn quantile_rank() {
        let mut v = vec![5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(upper_quantile(&mut v, 0.6), 3.0);
        assert_eq!(upper_quantile(&mut v, 1.0), 5.0);
        assert_eq!(upper_quantile(&mut v, 0.01), 1.0);
    }

    #[test]
    fn cofinite_decisions() {
        let converging: Vec<f64> = (1..=100).map(|n| 10.0 / n as f64).collect();
        assert_eq!(cofinite_decision(&converging, 0.5), Verdict::Pass);
        let slow: Vec<f64> = (1..=100).map(|n| 1000.0 / n as f64).collect();
        assert_eq!(cofinite_decision(&slow, 0.5), Verdict::Inconclusive);
        let oscillating: Vec<f64> = (1..=100).map(|n| (n % 2) as f64 * 2.0).collect();
        assert_eq!(cofinite_decision(&oscillating, 0.5), Verdict::Fail);
    }
}
