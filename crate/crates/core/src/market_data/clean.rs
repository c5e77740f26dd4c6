use alloc::vec::Vec;

use super::{Bar, DataError, Series};
use crate::math::{mad, median};

pub const SPIKE_REASON: &str = "single_bar_spike";

/// How session discontinuities are treated by [`super::mark_session_gaps`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GapPolicy {
    /// One segment per session.
    #[default]
    SplitSessions,
    /// One segment, with a marker at every session join.
    CarryForward,
    /// Bars outside the session window are discarded; the rest is joined
    /// with markers.
    DropOvernight,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CleaningPolicy {
    /// Number of reference log-returns in the rolling MAD.
    pub outlier_window: usize,
    /// Spike threshold as a multiple of the rolling MAD.
    pub outlier_threshold: f64,
    pub gap_policy: GapPolicy,
}

impl Default for CleaningPolicy {
    fn default() -> Self {
        Self {
            outlier_window: 20,
            outlier_threshold: 8.0,
            gap_policy: GapPolicy::SplitSessions,
        }
    }
}

impl CleaningPolicy {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.outlier_window < 8 {
            return Err(DataError::InvalidPolicy("outlier_window must be at least 8"));
        }
        if !(self.outlier_threshold > 0.0) || !self.outlier_threshold.is_finite() {
            return Err(DataError::InvalidPolicy("outlier_threshold must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemovedBar {
    pub bar: Bar,
    pub reason: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CleanReport {
    pub series: Series,
    pub removed: Vec<RemovedBar>,
    /// Set when the series was shorter than the outlier window and was
    /// passed through untouched.
    pub too_short: bool,
}

/// Removes single-bar spikes.
///
/// Bar `i` is a spike when its log-return deviates from the median of the
/// reference returns by more than `outlier_threshold` MADs, and the next
/// close sits within one MAD (in log terms) of the close before the spike.
/// The reference set is the `outlier_window` returns nearest to `i`,
/// preferring earlier ones, excluding the two returns the spike touches.
///
/// Detection repeats on the survivors until nothing more is flagged, which
/// makes the operation idempotent. Surviving bars are never modified.
pub fn remove_outliers(series: &Series, policy: &CleaningPolicy) -> Result<CleanReport, DataError> {
    policy.validate()?;
    if series.len() < policy.outlier_window {
        return Ok(CleanReport {
            series: series.clone(),
            removed: Vec::new(),
            too_short: true,
        });
    }
    let mut bars: Vec<Bar> = series.bars().to_vec();
    let mut removed = Vec::new();
    loop {
        let flagged = spike_indices(&bars, policy)?;
        if flagged.is_empty() {
            break;
        }
        let mut next = Vec::with_capacity(bars.len() - flagged.len());
        let mut f = flagged.iter().peekable();
        for (i, bar) in bars.into_iter().enumerate() {
            if f.peek() == Some(&&i) {
                f.next();
                removed.push(RemovedBar {
                    bar,
                    reason: SPIKE_REASON,
                });
            } else {
                next.push(bar);
            }
        }
        bars = next;
    }
    removed.sort_by_key(|r| r.bar.timestamp);
    Ok(CleanReport {
        series: series.with_bars(bars),
        removed,
        too_short: false,
    })
}

pub(crate) fn spike_indices(bars: &[Bar], policy: &CleaningPolicy) -> Result<Vec<usize>, DataError> {
    let n = bars.len();
    if n < 3 {
        return Ok(Vec::new());
    }
    if let Some(index) = bars.iter().position(|b| b.close <= 0.0) {
        return Err(DataError::NonPositiveClose { index });
    }
    // returns[j] is the log-return into bar j; returns[0] is unused.
    let mut returns = alloc::vec![0.0; n];
    for j in 1..n {
        returns[j] = libm::log(bars[j].close / bars[j - 1].close);
    }
    let mut flagged = Vec::new();
    let mut reference = Vec::with_capacity(policy.outlier_window);
    for i in 1..n - 1 {
        if let Some(&last) = flagged.last() {
            // A bar following a flagged spike is the reversion bar itself.
            if last + 1 == i {
                continue;
            }
        }
        reference.clear();
        let before = (1..i).rev();
        let after = i + 2..n;
        reference.extend(before.chain(after).take(policy.outlier_window).map(|j| returns[j]));
        if reference.is_empty() {
            continue;
        }
        let center = median(&reference);
        let spread = mad(&reference);
        let deviation = libm::fabs(returns[i] - center);
        if deviation <= policy.outlier_threshold * spread || deviation == 0.0 {
            continue;
        }
        let revert = libm::fabs(libm::log(bars[i + 1].close / bars[i - 1].close));
        if revert <= spread {
            flagged.push(i);
        }
    }
    Ok(flagged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{Timeframe, Timestamp};
    use alloc::vec;

    fn series_from_closes(closes: &[f64]) -> Series {
        let bars = closes
            .iter()
            .enumerate()
            .map(|(i, &c)| Bar::flat(Timestamp(i as i64 * 60), c, 10.0))
            .collect();
        Series::new("T", Timeframe::M1, bars).unwrap()
    }

    #[test]
    fn constant_series_with_one_spike() {
        let mut closes = vec![100.0; 40];
        closes[20] = 200.0;
        let s = series_from_closes(&closes);
        let out = remove_outliers(&s, &CleaningPolicy::default()).unwrap();
        assert_eq!(out.removed.len(), 1);
        assert_eq!(out.removed[0].bar, s.bars()[20]);
        assert_eq!(out.series.len(), 39);
        let kept: Vec<&Bar> = s.bars().iter().enumerate().filter(|(i, _)| *i != 20).map(|(_, b)| b).collect();
        assert!(out.series.bars().iter().zip(kept).all(|(a, b)| a == b));
    }

    #[test]
    fn monotone_ramp_has_no_outliers() {
        let closes: Vec<f64> = (0..100).map(|i| 100.0 + i as f64).collect();
        let s = series_from_closes(&closes);
        let out = remove_outliers(&s, &CleaningPolicy::default()).unwrap();
        assert!(out.removed.is_empty());
        assert_eq!(out.series, s);
    }

    #[test]
    fn step_change_is_not_a_spike() {
        let mut closes = vec![100.0; 30];
        closes.extend(vec![150.0; 30]);
        let s = series_from_closes(&closes);
        let out = remove_outliers(&s, &CleaningPolicy::default()).unwrap();
        assert!(out.removed.is_empty());
    }

    #[test]
    fn short_series_passes_through_with_flag() {
        let s = series_from_closes(&[100.0, 300.0, 100.0]);
        let out = remove_outliers(&s, &CleaningPolicy::default()).unwrap();
        assert!(out.too_short);
        assert!(out.removed.is_empty());
        assert_eq!(out.series, s);
    }

    #[test]
    fn policy_validation() {
        let p = CleaningPolicy {
            outlier_window: 4,
            ..CleaningPolicy::default()
        };
        assert!(p.validate().is_err());
        let p = CleaningPolicy {
            outlier_threshold: 0.0,
            ..CleaningPolicy::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn cleaning_is_idempotent() {
        let mut closes = vec![100.0; 40];
        closes[10] = 50.0;
        closes[30] = 180.0;
        let s = series_from_closes(&closes);
        let once = remove_outliers(&s, &CleaningPolicy::default()).unwrap();
        assert_eq!(once.removed.len(), 2);
        let twice = remove_outliers(&once.series, &CleaningPolicy::default()).unwrap();
        assert!(twice.removed.is_empty());
        assert_eq!(twice.series, once.series);
    }
}
