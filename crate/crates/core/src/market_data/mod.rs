//! OHLCV bars and series, plus the preprocessing applied before a feed is
//! handed to the network: outlier removal, session segmentation, resampling
//! and feature normalization.

mod clean;
mod features;
mod resample;
mod session;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

pub use clean::{remove_outliers, CleanReport, CleaningPolicy, GapPolicy, RemovedBar, SPIKE_REASON};
pub use features::{normalize, FeatureNormalizer, FeatureRow, FEATURE_COUNT};
pub use resample::{resample, resample_anchored};
pub use session::{mark_session_gaps, Segment, SessionCalendar, Weekday};

pub const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DataError {
    #[error("bar {index}: {reason}")]
    InvalidBar { index: usize, reason: &'static str },
    #[error("bar {index}: timestamp not strictly after its predecessor")]
    NonIncreasingTimestamp { index: usize },
    #[error("duplicate timestamp {0}")]
    DuplicateTimestamp(i64),
    #[error("cannot resample {from} into {target}: target must be an integer multiple")]
    IncompatibleTimeframe { from: Timeframe, target: Timeframe },
    #[error("series is empty")]
    EmptySeries,
    #[error("bar {index}: close must be positive")]
    NonPositiveClose { index: usize },
    #[error("window {window} invalid for series of length {len}")]
    InvalidWindow { window: usize, len: usize },
    #[error("invalid cleaning policy: {0}")]
    InvalidPolicy(&'static str),
    #[error("invalid session calendar: {0}")]
    InvalidCalendar(&'static str),
    #[error("unknown timeframe `{0}`")]
    UnknownTimeframe(String),
}

/// UTC instant with one-second resolution, counted from the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn seconds(self) -> i64 {
        self.0
    }

    /// Days since 1970-01-01.
    pub fn day_index(self) -> i64 {
        self.0.div_euclid(SECONDS_PER_DAY)
    }

    /// Seconds since midnight UTC.
    pub fn time_of_day(self) -> u32 {
        self.0.rem_euclid(SECONDS_PER_DAY) as u32
    }

    pub fn weekday(self) -> Weekday {
        // 1970-01-01 was a Thursday.
        Weekday::from_monday_index((self.day_index() + 3).rem_euclid(7) as u8)
    }

    pub fn offset(self, seconds: i64) -> Timestamp {
        Timestamp(self.0 + seconds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Timeframe {
    M1,
    M3,
    M5,
    M15,
    D1,
}

impl Timeframe {
    pub const ALL: [Timeframe; 5] = [
        Timeframe::M1,
        Timeframe::M3,
        Timeframe::M5,
        Timeframe::M15,
        Timeframe::D1,
    ];

    pub fn seconds(self) -> i64 {
        match self {
            Timeframe::M1 => 60,
            Timeframe::M3 => 180,
            Timeframe::M5 => 300,
            Timeframe::M15 => 900,
            Timeframe::D1 => SECONDS_PER_DAY,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Timeframe::M1 => "1m",
            Timeframe::M3 => "3m",
            Timeframe::M5 => "5m",
            Timeframe::M15 => "15m",
            Timeframe::D1 => "1d",
        }
    }

    /// `Some(n)` when `target` spans exactly `n` bars of `self`.
    pub fn multiple_of(self, target: Timeframe) -> Option<i64> {
        let (s, t) = (self.seconds(), target.seconds());
        (t >= s && t % s == 0).then_some(t / s)
    }
}

impl fmt::Display for Timeframe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Timeframe {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Timeframe::ALL
            .into_iter()
            .find(|tf| tf.label() == s)
            .ok_or_else(|| DataError::UnknownTimeframe(s.into()))
    }
}

/// One OHLCV record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bar {
    pub timestamp: Timestamp,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl Bar {
    pub fn new(
        timestamp: Timestamp,
        open: f64,
        high: f64,
        low: f64,
        close: f64,
        volume: f64,
    ) -> Result<Self, DataError> {
        let bar = Bar {
            timestamp,
            open,
            high,
            low,
            close,
            volume,
        };
        bar.check().map_err(|reason| DataError::InvalidBar { index: 0, reason })?;
        Ok(bar)
    }

    /// A bar whose four prices all equal `price`.
    pub fn flat(timestamp: Timestamp, price: f64, volume: f64) -> Self {
        Bar {
            timestamp,
            open: price,
            high: price,
            low: price,
            close: price,
            volume,
        }
    }

    fn check(&self) -> Result<(), &'static str> {
        let prices = [self.open, self.high, self.low, self.close];
        if prices.iter().any(|p| !p.is_finite()) || !self.volume.is_finite() {
            return Err("non-finite field");
        }
        if self.low > self.high {
            return Err("low above high");
        }
        if self.open < self.low || self.open > self.high {
            return Err("open outside [low, high]");
        }
        if self.close < self.low || self.close > self.high {
            return Err("close outside [low, high]");
        }
        if self.volume < 0.0 {
            return Err("negative volume");
        }
        Ok(())
    }

    pub fn is_valid(&self) -> bool {
        self.check().is_ok()
    }

    /// `(high + low + close) / 3`
    pub fn typical_price(&self) -> f64 {
        (self.high + self.low + self.close) / 3.0
    }
}

/// Time-ordered bars for one symbol at one timeframe.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    symbol: String,
    timeframe: Timeframe,
    bars: Vec<Bar>,
}

impl Series {
    /// Validates every bar and requires strictly increasing timestamps.
    pub fn new(symbol: impl Into<String>, timeframe: Timeframe, bars: Vec<Bar>) -> Result<Self, DataError> {
        for (index, bar) in bars.iter().enumerate() {
            bar.check().map_err(|reason| DataError::InvalidBar { index, reason })?;
        }
        if let Some(index) = bars
            .windows(2)
            .position(|w| w[1].timestamp <= w[0].timestamp)
        {
            return Err(DataError::NonIncreasingTimestamp { index: index + 1 });
        }
        Ok(Self {
            symbol: symbol.into(),
            timeframe,
            bars,
        })
    }

    /// Sorts by timestamp first; equal timestamps are rejected.
    pub fn from_unsorted(
        symbol: impl Into<String>,
        timeframe: Timeframe,
        mut bars: Vec<Bar>,
    ) -> Result<Self, DataError> {
        bars.sort_by_key(|b| b.timestamp);
        if let Some(w) = bars.windows(2).find(|w| w[0].timestamp == w[1].timestamp) {
            return Err(DataError::DuplicateTimestamp(w[0].timestamp.0));
        }
        Self::new(symbol, timeframe, bars)
    }

    pub fn empty(symbol: impl Into<String>, timeframe: Timeframe) -> Self {
        Self {
            symbol: symbol.into(),
            timeframe,
            bars: Vec::new(),
        }
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn timeframe(&self) -> Timeframe {
        self.timeframe
    }

    pub fn bars(&self) -> &[Bar] {
        &self.bars
    }

    pub fn into_bars(self) -> Vec<Bar> {
        self.bars
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn closes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.close).collect()
    }

    pub fn total_volume(&self) -> f64 {
        self.bars.iter().map(|b| b.volume).sum()
    }

    /// Keeps the symbol and timeframe, replacing the bars. Ordering of `bars`
    /// must already hold; this is used for subsequences of a valid series.
    pub(crate) fn with_bars(&self, bars: Vec<Bar>) -> Series {
        debug_assert!(bars.windows(2).all(|w| w[0].timestamp < w[1].timestamp));
        Series {
            symbol: self.symbol.clone(),
            timeframe: self.timeframe,
            bars,
        }
    }

    /// True when every consecutive pair is exactly one timeframe apart.
    pub fn is_regular(&self) -> bool {
        let step = self.timeframe.seconds();
        self.bars
            .windows(2)
            .all(|w| w[1].timestamp.0 - w[0].timestamp.0 == step)
    }
}
