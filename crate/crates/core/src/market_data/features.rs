use alloc::collections::VecDeque;
use alloc::vec::Vec;

use super::{Bar, DataError, Series, Timestamp};

/// Features per bar: z-scored log-return, z-scored log volume, high-low
/// range as a fraction of close.
pub const FEATURE_COUNT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureRow {
    pub timestamp: Timestamp,
    pub values: [f64; FEATURE_COUNT],
    /// Raw log-return of close into this bar; the training target source.
    pub log_return: f64,
}

/// Streaming form of [`normalize`]; feeding a series bar by bar produces
/// exactly the batch output.
#[derive(Debug, Clone)]
pub struct FeatureNormalizer {
    window: usize,
    prev_close: Option<f64>,
    returns: VecDeque<f64>,
    log_volumes: VecDeque<f64>,
    seen: usize,
}

impl FeatureNormalizer {
    pub fn new(window: usize) -> Result<Self, DataError> {
        if window < 2 {
            return Err(DataError::InvalidWindow { window, len: 0 });
        }
        Ok(Self {
            window,
            prev_close: None,
            returns: VecDeque::with_capacity(window + 1),
            log_volumes: VecDeque::with_capacity(window + 1),
            seen: 0,
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Returns a row once `window` bars have been seen; the first `window`
    /// bars are warm-up.
    pub fn push(&mut self, bar: &Bar) -> Result<Option<FeatureRow>, DataError> {
        if !(bar.close > 0.0) {
            return Err(DataError::NonPositiveClose { index: self.seen });
        }
        self.seen += 1;
        let lv = libm::log1p(bar.volume);
        push_bounded(&mut self.log_volumes, lv, self.window);
        let Some(prev) = self.prev_close.replace(bar.close) else {
            return Ok(None);
        };
        let r = libm::log(bar.close / prev);
        push_bounded(&mut self.returns, r, self.window);
        if self.returns.len() < self.window {
            return Ok(None);
        }
        let range = (bar.high - bar.low) / bar.close;
        Ok(Some(FeatureRow {
            timestamp: bar.timestamp,
            values: [zscore(&self.returns, r), zscore(&self.log_volumes, lv), range],
            log_return: r,
        }))
    }

    pub fn reset(&mut self) {
        self.prev_close = None;
        self.returns.clear();
        self.log_volumes.clear();
        self.seen = 0;
    }
}

fn push_bounded(buf: &mut VecDeque<f64>, v: f64, cap: usize) {
    if buf.len() == cap {
        buf.pop_front();
    }
    buf.push_back(v);
}

/// Rolling z-score of `x` against `window`; zero when the window has no
/// dispersion.
fn zscore(window: &VecDeque<f64>, x: f64) -> f64 {
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n;
    let var = window.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = libm::sqrt(var);
    if sd == 0.0 || !sd.is_finite() {
        0.0
    } else {
        (x - mean) / sd
    }
}

/// Per-bar input features for the network. Output length is
/// `series.len() - window`.
pub fn normalize(series: &Series, window: usize) -> Result<Vec<FeatureRow>, DataError> {
    if window < 2 || series.len() <= window {
        return Err(DataError::InvalidWindow {
            window,
            len: series.len(),
        });
    }
    let mut norm = FeatureNormalizer::new(window)?;
    let mut out = Vec::with_capacity(series.len() - window);
    for (index, bar) in series.bars().iter().enumerate() {
        let row = norm.push(bar).map_err(|e| match e {
            DataError::NonPositiveClose { .. } => DataError::NonPositiveClose { index },
            other => other,
        })?;
        out.extend(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::Timeframe;
    use alloc::vec;

    fn series(closes: &[f64]) -> Series {
        let bars = closes
            .iter()
            .enumerate()
            .map(|(i, &c)| Bar::flat(Timestamp(i as i64 * 60), c, 100.0))
            .collect();
        Series::new("T", Timeframe::M1, bars).unwrap()
    }

    #[test]
    fn constant_closes_give_zero_features() {
        let rows = normalize(&series(&[50.0; 30]), 10).unwrap();
        assert_eq!(rows.len(), 20);
        for r in rows {
            assert_eq!(r.values, [0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn warmup_arithmetic() {
        let closes: Vec<f64> = (0..57).map(|i| 10.0 + (i % 7) as f64).collect();
        assert_eq!(normalize(&series(&closes), 5).unwrap().len(), 52);
        assert!(normalize(&series(&closes[..5]), 5).is_err());
        assert!(normalize(&series(&closes), 1).is_err());
    }

    #[test]
    fn rejects_non_positive_close() {
        let mut bars: Vec<Bar> = (0..10).map(|i| Bar::flat(Timestamp(i * 60), 5.0, 1.0)).collect();
        bars[7] = Bar::flat(Timestamp(7 * 60), 0.0, 1.0);
        let s = Series::new("T", Timeframe::M1, bars).unwrap();
        assert_eq!(normalize(&s, 3), Err(DataError::NonPositiveClose { index: 7 }));
    }

    #[test]
    fn streaming_matches_batch() {
        let closes: Vec<f64> = (0..40).map(|i| 100.0 + libm::sin(i as f64 * 0.4) * 3.0).collect();
        let s = series(&closes);
        let batch = normalize(&s, 8).unwrap();
        let mut n = FeatureNormalizer::new(8).unwrap();
        let streamed: Vec<FeatureRow> = s.bars().iter().filter_map(|b| n.push(b).unwrap()).collect();
        assert_eq!(batch, streamed);
        assert_eq!(vec![batch[0].timestamp], vec![s.bars()[8].timestamp]);
    }
}
