//! Numerical core for continuous-time recurrent network forecasting of
//! securities rates of change.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is a pure
//! function of its inputs (or a plain state machine advanced by explicit
//! calls), so values can be shared freely between worker threads by a
//! std-side runner.
//!
//! - [`market_data`]: OHLCV bars, cleaning, session segmentation, resampling
//!   and feature normalization.
//! - [`ctrnn`]: Euler-discretized CTRNN dynamics, truncated BPTT gradients,
//!   RMS-normalized online updates, the online trainer and the feedforward
//!   baseline.
//! - [`cycle`]: Morlet wavelet scalogram and dominant cycle estimation.
//! - [`indicators`]: fixed and cycle-adaptive technical indicators, including
//!   indicators evaluated over a predicted price path.
//! - [`selection`]: Pearson scoring and deterministic top-N basket selection.
//! - [`backtest`]: long/short basket accounting with daily reselection and
//!   report rendering.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod backtest;
pub mod ctrnn;
pub mod cycle;
pub mod indicators;
pub mod market_data;
pub mod math;
pub mod selection;

pub use backtest::{BacktestConfig, BacktestError, BacktestReport, PortfolioState};
pub use ctrnn::{NetworkError, NetworkState, Prediction, Topology, TrainConfig, Weights};
pub use cycle::{CycleEstimate, CycleError, WaveletConfig};
pub use indicators::{AdaptiveRule, IndicatorError, IndicatorOutput, IndicatorSpec};
pub use market_data::{Bar, DataError, Series, Timeframe, Timestamp};
pub use selection::{BasketSpec, CorrelationScore, SelectionError};
