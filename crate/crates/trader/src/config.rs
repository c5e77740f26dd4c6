//! Runner configuration: a JSON file mirroring [`RunnerConfig`], with
//! command-line flags applied on top.

use std::path::{Path, PathBuf};

use ctrnn_core::backtest::BacktestConfig;
use ctrnn_core::ctrnn::{Topology, TrainConfig};
use ctrnn_core::cycle::WaveletConfig;
use ctrnn_core::market_data::{CleaningPolicy, GapPolicy, SessionCalendar, FEATURE_COUNT};
use ctrnn_core::Timeframe;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Batch,
    Stream,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GapSetting {
    #[default]
    SplitSessions,
    CarryForward,
    DropOvernight,
}

impl From<GapSetting> for GapPolicy {
    fn from(g: GapSetting) -> Self {
        match g {
            GapSetting::SplitSessions => GapPolicy::SplitSessions,
            GapSetting::CarryForward => GapPolicy::CarryForward,
            GapSetting::DropOvernight => GapPolicy::DropOvernight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunnerConfig {
    pub mode: Mode,
    pub timeframe: String,
    pub horizon: usize,
    pub universe: Option<PathBuf>,
    pub basket: usize,
    pub split: usize,
    pub days: usize,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,

    pub hidden: usize,
    pub dt: f64,
    pub tau: f64,
    pub truncation_depth: usize,
    pub learning_rate: f64,
    pub adapt_decay: f64,
    pub feature_window: usize,

    pub outlier_window: usize,
    pub outlier_threshold: f64,
    pub gap_policy: GapSetting,
    /// Missing bars tolerated inside a session before a symbol is paused.
    pub max_gap_bars: usize,

    /// Bars between cycle re-estimates; 0 disables the estimate.
    pub cycle_every: usize,
    pub wavelet_window: usize,
    pub min_period: f64,
    pub max_period: f64,

    /// Predicted points drawn on charts.
    pub plotted: usize,
    pub chart_bars: usize,
    /// Correlation window in bars; defaults to one session.
    pub score_window: Option<usize>,
}

impl Default for RunnerConfig {
    fn default() -> Self {
        let wavelet = WaveletConfig::default();
        let clean = CleaningPolicy::default();
        let train = TrainConfig::default();
        Self {
            mode: Mode::Batch,
            timeframe: "5m".to_string(),
            horizon: 10,
            universe: None,
            basket: 20,
            split: 10,
            days: 41,
            seed: 0,
            workers: 1,
            out: PathBuf::from("out"),
            hidden: 16,
            dt: 0.5,
            tau: 1.0,
            truncation_depth: train.truncation_depth,
            learning_rate: train.base_rate,
            adapt_decay: train.adapt_decay,
            feature_window: 20,
            outlier_window: clean.outlier_window,
            outlier_threshold: clean.outlier_threshold,
            gap_policy: GapSetting::SplitSessions,
            max_gap_bars: 6,
            cycle_every: 10,
            wavelet_window: wavelet.window,
            min_period: wavelet.min_period,
            max_period: wavelet.max_period,
            plotted: 8,
            chart_bars: 120,
            score_window: None,
        }
    }
}

impl RunnerConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| AppError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn timeframe(&self) -> Result<Timeframe> {
        self.timeframe
            .parse()
            .map_err(|_| AppError::Usage(format!("unknown timeframe {:?}", self.timeframe)))
    }

    pub fn calendar(&self) -> SessionCalendar {
        SessionCalendar::london_cash()
    }

    pub fn topology(&self) -> Result<Topology> {
        Ok(Topology::uniform(FEATURE_COUNT, self.hidden, self.horizon, self.dt, self.tau)?)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            truncation_depth: self.truncation_depth,
            base_rate: self.learning_rate,
            adapt_decay: self.adapt_decay,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }

    pub fn wavelet(&self) -> WaveletConfig {
        WaveletConfig {
            window: self.wavelet_window,
            min_period: self.min_period,
            max_period: self.max_period,
            ..WaveletConfig::default()
        }
    }

    pub fn cleaning(&self) -> CleaningPolicy {
        CleaningPolicy {
            outlier_window: self.outlier_window,
            outlier_threshold: self.outlier_threshold,
            gap_policy: self.gap_policy.into(),
        }
    }

    /// Bars in one session at the configured timeframe.
    pub fn session_bars(&self) -> Result<usize> {
        let cal = self.calendar();
        let span = i64::from(cal.session_close() - cal.session_open());
        Ok((span / self.timeframe()?.seconds()).max(1) as usize)
    }

    pub fn score_window(&self) -> Result<usize> {
        match self.score_window {
            Some(w) => Ok(w),
            None => self.session_bars(),
        }
    }

    pub fn backtest(&self) -> Result<BacktestConfig> {
        Ok(BacktestConfig {
            days: self.days,
            basket_size: self.basket,
            split: self.split.min(self.basket),
            score_window: self.score_window()?,
            ..BacktestConfig::default()
        })
    }

    /// Checks everything that can be checked without touching data.
    pub fn validate(&self) -> Result<()> {
        self.timeframe()?;
        self.topology()?;
        self.train_config().validate()?;
        self.wavelet().validate()?;
        self.cleaning().validate().map_err(|e| AppError::Usage(e.to_string()))?;
        if self.workers == 0 {
            return Err(AppError::Usage("workers must be at least 1".into()));
        }
        if self.plotted == 0 || self.plotted > self.horizon {
            return Err(AppError::Usage("plotted points must lie within the horizon".into()));
        }
        if self.feature_window < 2 {
            return Err(AppError::Usage("feature window must be at least 2".into()));
        }
        if self.score_window()? < 3 {
            return Err(AppError::Usage("score window must be at least 3".into()));
        }
        if self.chart_bars < 3 {
            return Err(AppError::Usage("chart needs at least 3 bars".into()));
        }
        self.backtest()?.validate()?;
        Ok(())
    }
}
