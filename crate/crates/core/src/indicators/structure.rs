use alloc::vec::Vec;

use super::IndicatorError;
use crate::market_data::{Bar, Timestamp};

pub const FIBONACCI_RATIOS: [f64; 5] = [0.236, 0.382, 0.5, 0.618, 0.786];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureKind {
    SupportResistance,
    FibonacciLevels,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevelKind {
    Support,
    Resistance,
    /// Retracement at the given ratio of the range.
    Fibonacci(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    pub kind: LevelKind,
    pub price: f64,
    /// Bar the level was taken from (the latest bar for retracements).
    pub index: usize,
    pub timestamp: Timestamp,
}

/// Support/resistance: closes that are strict extrema of the centred
/// `2·lookback + 1` window. Fibonacci: retracements of the
/// `[lowest low, highest high]` range of the last `lookback` bars, measured
/// down from the high.
pub fn structure_levels(bars: &[Bar], kind: StructureKind, lookback: usize) -> Result<Vec<Level>, IndicatorError> {
    if lookback == 0 {
        return Err(IndicatorError::InvalidPeriod("lookback must be at least 1"));
    }
    let n = bars.len();
    let mut levels = Vec::new();
    match kind {
        StructureKind::SupportResistance => {
            if n < 2 * lookback + 1 {
                return Ok(levels);
            }
            for i in lookback..n - lookback {
                let c = bars[i].close;
                let others = (i - lookback..=i + lookback).filter(|&j| j != i).map(|j| bars[j].close);
                let (mut above, mut below) = (true, true);
                for o in others {
                    above &= c > o;
                    below &= c < o;
                }
                let kind = match (above, below) {
                    (true, _) => LevelKind::Resistance,
                    (_, true) => LevelKind::Support,
                    _ => continue,
                };
                levels.push(Level {
                    kind,
                    price: c,
                    index: i,
                    timestamp: bars[i].timestamp,
                });
            }
        }
        StructureKind::FibonacciLevels => {
            let Some(last) = n.checked_sub(1) else {
                return Ok(levels);
            };
            let w = &bars[n.saturating_sub(lookback)..];
            let high = w.iter().map(|b| b.high).fold(f64::NEG_INFINITY, f64::max);
            let low = w.iter().map(|b| b.low).fold(f64::INFINITY, f64::min);
            for ratio in FIBONACCI_RATIOS {
                levels.push(Level {
                    kind: LevelKind::Fibonacci(ratio),
                    price: high - ratio * (high - low),
                    index: last,
                    timestamp: bars[last].timestamp,
                });
            }
        }
    }
    Ok(levels)
}
