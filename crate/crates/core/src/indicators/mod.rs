//! Technical indicators in fixed-period and cycle-adaptive form.
//!
//! Every line indicator returns one value per input bar; positions still
//! inside the warm-up are `None`. All of them are causal: the value at bar
//! `t` only reads bars `0..=t`.

mod adaptive;
mod forward;
mod oscillators;
mod structure;
mod trend;
mod volatility;
mod volume;

use alloc::vec::Vec;

use crate::market_data::{Bar, Timestamp};

pub use adaptive::{adapt_periods, AdaptiveRule};
pub use forward::{compute_on_prediction, forward_bars};
pub use oscillators::{cci, rsi, stochastic_kd};
pub use structure::{structure_levels, Level, LevelKind, StructureKind, FIBONACCI_RATIOS};
pub use trend::{ema_line, macd, moving_average, sma_line, MaKind};
pub use volatility::{atr, bollinger, keltner, volatility_channel, ChannelKind};
pub use volume::{mfi, obv, volume_indicator, VolumeKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IndicatorError {
    #[error("invalid period: {0}")]
    InvalidPeriod(&'static str),
    #[error("{0} needs true high/low/volume and cannot run on a predicted close-only path")]
    NeedsOhlc(&'static str),
    #[error("prediction origin does not match the last actual bar")]
    PredictionNotAnchored,
    #[error("{0} yields price levels, not an aligned line")]
    NotALine(&'static str),
    #[error("series is empty")]
    Empty,
}

/// Indicator and its periods.
#[derive(Debug, Clone, PartialEq)]
pub enum IndicatorSpec {
    Sma { period: usize },
    Ema { period: usize },
    Macd { fast: usize, slow: usize, signal: usize },
    Rsi { period: usize },
    Stochastic { lookback: usize, smooth: usize },
    Cci { period: usize },
    Atr { period: usize },
    Bollinger { period: usize, width: f64 },
    Keltner { ema_period: usize, atr_period: usize, width: f64 },
    Obv,
    Mfi { period: usize },
    SupportResistance { lookback: usize },
    FibonacciLevels { lookback: usize },
}

impl IndicatorSpec {
    pub fn macd_default() -> Self {
        IndicatorSpec::Macd {
            fast: 12,
            slow: 26,
            signal: 9,
        }
    }

    pub fn rsi_default() -> Self {
        IndicatorSpec::Rsi { period: 14 }
    }

    pub fn stochastic_default() -> Self {
        IndicatorSpec::Stochastic { lookback: 14, smooth: 3 }
    }

    pub fn bollinger_default() -> Self {
        IndicatorSpec::Bollinger { period: 20, width: 2.0 }
    }

    pub fn keltner_default() -> Self {
        IndicatorSpec::Keltner {
            ema_period: 20,
            atr_period: 10,
            width: 2.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            IndicatorSpec::Sma { .. } => "SMA",
            IndicatorSpec::Ema { .. } => "EMA",
            IndicatorSpec::Macd { .. } => "MACD",
            IndicatorSpec::Rsi { .. } => "RSI",
            IndicatorSpec::Stochastic { .. } => "StochasticKD",
            IndicatorSpec::Cci { .. } => "CCI",
            IndicatorSpec::Atr { .. } => "ATR",
            IndicatorSpec::Bollinger { .. } => "Bollinger",
            IndicatorSpec::Keltner { .. } => "Keltner",
            IndicatorSpec::Obv => "OBV",
            IndicatorSpec::Mfi { .. } => "MFI",
            IndicatorSpec::SupportResistance { .. } => "SupportResistance",
            IndicatorSpec::FibonacciLevels { .. } => "FibonacciLevels",
        }
    }

    pub fn validate(&self) -> Result<(), IndicatorError> {
        let positive = |p: usize, what| if p >= 1 { Ok(()) } else { Err(IndicatorError::InvalidPeriod(what)) };
        match *self {
            IndicatorSpec::Sma { period }
            | IndicatorSpec::Ema { period }
            | IndicatorSpec::Rsi { period }
            | IndicatorSpec::Cci { period }
            | IndicatorSpec::Atr { period }
            | IndicatorSpec::Mfi { period } => positive(period, "period must be at least 1"),
            IndicatorSpec::Macd { fast, slow, signal } => {
                positive(fast, "MACD fast must be at least 1")?;
                positive(signal, "MACD signal must be at least 1")?;
                if fast >= slow {
                    return Err(IndicatorError::InvalidPeriod("MACD fast must be below slow"));
                }
                Ok(())
            }
            IndicatorSpec::Stochastic { lookback, smooth } => {
                positive(lookback, "stochastic lookback must be at least 1")?;
                positive(smooth, "stochastic smoothing must be at least 1")
            }
            IndicatorSpec::Bollinger { period, width } => {
                positive(period, "Bollinger period must be at least 1")?;
                if !(width >= 0.0) {
                    return Err(IndicatorError::InvalidPeriod("band width must be non-negative"));
                }
                Ok(())
            }
            IndicatorSpec::Keltner {
                ema_period,
                atr_period,
                width,
            } => {
                positive(ema_period, "Keltner EMA period must be at least 1")?;
                positive(atr_period, "Keltner ATR period must be at least 1")?;
                if !(width >= 0.0) {
                    return Err(IndicatorError::InvalidPeriod("band width must be non-negative"));
                }
                Ok(())
            }
            IndicatorSpec::Obv => Ok(()),
            IndicatorSpec::SupportResistance { lookback } | IndicatorSpec::FibonacciLevels { lookback } => {
                positive(lookback, "lookback must be at least 1")
            }
        }
    }

    /// Whether the indicator reads highs, lows or volume.
    pub fn needs_ohlc(&self) -> bool {
        matches!(
            self,
            IndicatorSpec::Atr { .. } | IndicatorSpec::Keltner { .. } | IndicatorSpec::Mfi { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub name: &'static str,
    pub values: Vec<Option<f64>>,
}

impl Line {
    pub fn new(name: &'static str, values: Vec<Option<f64>>) -> Self {
        Self { name, values }
    }

    /// Length of the unavailable prefix.
    pub fn warmup(&self) -> usize {
        self.values.iter().take_while(|v| v.is_none()).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorOutput {
    pub timestamps: Vec<Timestamp>,
    pub lines: Vec<Line>,
    /// Index of the first bar built from predicted returns, if any.
    pub forward_start: Option<usize>,
}

impl IndicatorOutput {
    pub(crate) fn new(bars: &[Bar], lines: Vec<Line>) -> Self {
        Self {
            timestamps: bars.iter().map(|b| b.timestamp).collect(),
            lines,
            forward_start: None,
        }
    }

    pub fn line(&self, name: &str) -> Option<&[Option<f64>]> {
        self.lines.iter().find(|l| l.name == name).map(|l| l.values.as_slice())
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Keeps only the first `n` rows.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            timestamps: self.timestamps[..n].to_vec(),
            lines: self
                .lines
                .iter()
                .map(|l| Line::new(l.name, l.values[..n].to_vec()))
                .collect(),
            forward_start: self.forward_start.filter(|&f| f < n),
        }
    }

    /// Keeps only the last `n` rows.
    pub fn tail(&self, n: usize) -> Self {
        let start = self.len().saturating_sub(n);
        Self {
            timestamps: self.timestamps[start..].to_vec(),
            lines: self
                .lines
                .iter()
                .map(|l| Line::new(l.name, l.values[start..].to_vec()))
                .collect(),
            forward_start: self.forward_start.map(|f| f.saturating_sub(start)),
        }
    }
}

/// Evaluates any line indicator.
pub fn compute(bars: &[Bar], spec: &IndicatorSpec) -> Result<IndicatorOutput, IndicatorError> {
    spec.validate()?;
    match *spec {
        IndicatorSpec::Sma { period } => moving_average(bars, MaKind::Sma, period),
        IndicatorSpec::Ema { period } => moving_average(bars, MaKind::Ema, period),
        IndicatorSpec::Macd { fast, slow, signal } => macd(bars, fast, slow, signal),
        IndicatorSpec::Rsi { period } => rsi(bars, period),
        IndicatorSpec::Stochastic { lookback, smooth } => stochastic_kd(bars, lookback, smooth),
        IndicatorSpec::Cci { period } => cci(bars, period),
        IndicatorSpec::Atr { period } => atr(bars, period),
        IndicatorSpec::Bollinger { period, width } => bollinger(bars, period, width),
        IndicatorSpec::Keltner {
            ema_period,
            atr_period,
            width,
        } => keltner(bars, ema_period, atr_period, width),
        IndicatorSpec::Obv => Ok(obv(bars)),
        IndicatorSpec::Mfi { period } => mfi(bars, period),
        IndicatorSpec::SupportResistance { .. } | IndicatorSpec::FibonacciLevels { .. } => {
            Err(IndicatorError::NotALine(spec.name()))
        }
    }
}

pub(crate) fn closes(bars: &[Bar]) -> Vec<f64> {
    bars.iter().map(|b| b.close).collect()
}

pub(crate) fn check_period(period: usize) -> Result<(), IndicatorError> {
    if period == 0 {
        Err(IndicatorError::InvalidPeriod("period must be at least 1"))
    } else {
        Ok(())
    }
}
