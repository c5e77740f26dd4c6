//! Per-symbol online loop: clean, normalize, step and train the network,
//! re-estimate the cycle and keep enough history for charting and scoring.

use std::collections::VecDeque;

use ctrnn_core::ctrnn::{OnlineTrainer, Sample};
use ctrnn_core::cycle::{estimate_cycle, CwtPlan, CycleTracker};
use ctrnn_core::indicators::{adapt_periods, AdaptiveRule};
use ctrnn_core::market_data::{CleaningPolicy, FeatureNormalizer, GapPolicy, RemovedBar, SessionCalendar, SPIKE_REASON};
use ctrnn_core::math::{mad, median};
use ctrnn_core::{
    Bar, CycleEstimate, DataError, IndicatorSpec, Prediction, Series, Timeframe, Timestamp, Topology, TrainConfig,
    Weights,
};

use crate::chart::{build_bundle, ChartBundle};
use crate::config::RunnerConfig;
use crate::error::{AppError, Result};

/// Bars of history kept beyond the chart so indicators have settled.
const INDICATOR_LEAD: usize = 400;

/// Immutable settings shared by every symbol of a run.
#[derive(Debug, Clone)]
pub struct PipelineSettings {
    pub topology: Topology,
    pub train: TrainConfig,
    pub feature_window: usize,
    pub cleaning: CleaningPolicy,
    pub calendar: SessionCalendar,
    pub timeframe: Timeframe,
    pub max_gap_bars: usize,
    pub cycle_every: usize,
    pub plan: CwtPlan,
    pub rule: AdaptiveRule,
    pub plotted: usize,
    pub chart_bars: usize,
}

impl PipelineSettings {
    pub fn from_config(cfg: &RunnerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            topology: cfg.topology()?,
            train: cfg.train_config(),
            feature_window: cfg.feature_window,
            cleaning: cfg.cleaning(),
            calendar: cfg.calendar(),
            timeframe: cfg.timeframe()?,
            max_gap_bars: cfg.max_gap_bars,
            cycle_every: cfg.cycle_every,
            plan: CwtPlan::new(&cfg.wavelet())?,
            rule: AdaptiveRule::default(),
            plotted: cfg.plotted,
            chart_bars: cfg.chart_bars,
        })
    }

    fn history_cap(&self) -> usize {
        self.plan.config().window.max(self.chart_bars + INDICATOR_LEAD)
    }
}

/// Outcome of feeding one bar to a [`StreamCleaner`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Cleaned {
    pub accepted: Option<Bar>,
    pub removed: Option<Bar>,
}

/// Incremental single-bar spike filter. A bar is judged once the bar
/// after it has arrived, against the rolling MAD of the returns accepted
/// before it, so every decision uses only bars already seen.
#[derive(Debug, Clone)]
pub struct StreamCleaner {
    policy: CleaningPolicy,
    pending: Option<Bar>,
    last: Option<Bar>,
    reference: VecDeque<f64>,
    seen: usize,
}

impl StreamCleaner {
    pub fn new(policy: CleaningPolicy) -> Self {
        Self {
            policy,
            pending: None,
            last: None,
            reference: VecDeque::with_capacity(policy.outlier_window),
            seen: 0,
        }
    }

    pub fn push(&mut self, bar: Bar) -> Result<Cleaned, DataError> {
        if !(bar.close > 0.0) {
            return Err(DataError::NonPositiveClose { index: self.seen });
        }
        self.seen += 1;
        let Some(candidate) = self.pending.replace(bar) else {
            return Ok(Cleaned::default());
        };
        if self.is_spike(&candidate, &bar) {
            return Ok(Cleaned {
                accepted: None,
                removed: Some(candidate),
            });
        }
        self.accept(candidate);
        Ok(Cleaned {
            accepted: Some(candidate),
            removed: None,
        })
    }

    /// Accepts the bar still waiting for confirmation.
    pub fn flush(&mut self) -> Option<Bar> {
        let bar = self.pending.take()?;
        self.accept(bar);
        Some(bar)
    }

    pub fn reset(&mut self) {
        self.pending = None;
        self.last = None;
        self.reference.clear();
    }

    fn is_spike(&self, candidate: &Bar, next: &Bar) -> bool {
        let Some(prev) = self.last else { return false };
        if self.reference.len() < self.policy.outlier_window {
            return false;
        }
        let reference: Vec<f64> = self.reference.iter().copied().collect();
        let center = median(&reference);
        let spread = mad(&reference);
        let deviation = ((candidate.close / prev.close).ln() - center).abs();
        if deviation <= self.policy.outlier_threshold * spread || deviation == 0.0 {
            return false;
        }
        (next.close / prev.close).ln().abs() <= spread
    }

    fn accept(&mut self, bar: Bar) {
        if let Some(prev) = self.last {
            if self.reference.len() == self.policy.outlier_window {
                self.reference.pop_front();
            }
            self.reference.push_back((bar.close / prev.close).ln());
        }
        self.last = Some(bar);
    }
}

/// One post-warm-up bar of output.
#[derive(Debug, Clone, PartialEq)]
pub struct Emission {
    pub timestamp: Timestamp,
    pub close: f64,
    /// Log-return realized into this bar.
    pub realized: f64,
    pub prediction: Prediction,
    pub cycle_period: f64,
    pub cycle_valid: bool,
}

/// An accepted bar with the returns needed for scoring and charting.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRecord {
    /// Position in the stream of accepted bars.
    pub seq: u64,
    pub bar: Bar,
    /// The one-step return predicted for this bar on the bar before.
    pub predicted: Option<f64>,
    pub realized: Option<f64>,
    /// Summed predicted return over the horizon, made on this bar.
    pub expected_return: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditNote {
    pub timestamp: Option<Timestamp>,
    pub note: String,
}

/// Wavelet peak-power trace of the latest estimate, anchored to the
/// accepted-bar sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletTrace {
    pub first_seq: u64,
    pub values: Vec<f64>,
}

impl WaveletTrace {
    pub fn at(&self, seq: u64) -> Option<f64> {
        let i = seq.checked_sub(self.first_seq)?;
        self.values.get(usize::try_from(i).ok()?).copied()
    }
}

pub struct SymbolPipeline<'a> {
    symbol: String,
    settings: &'a PipelineSettings,
    cleaner: StreamCleaner,
    normalizer: FeatureNormalizer,
    trainer: OnlineTrainer,
    tracker: CycleTracker,
    last_estimate: Option<CycleEstimate>,
    wavelet: Option<WaveletTrace>,
    last_raw: Option<Timestamp>,
    last_prediction: Option<Prediction>,
    accepted: u64,
    history: VecDeque<HistoryRecord>,
    /// Every accepted bar, kept when a full trace is requested.
    trace: Option<Vec<HistoryRecord>>,
    removed: Vec<RemovedBar>,
    notes: Vec<AuditNote>,
}

impl<'a> SymbolPipeline<'a> {
    pub fn new(symbol: &str, settings: &'a PipelineSettings) -> Result<Self> {
        Self::with_weights(symbol, settings, Weights::init(&settings.topology, settings.train.seed))
    }

    pub fn with_weights(symbol: &str, settings: &'a PipelineSettings, weights: Weights) -> Result<Self> {
        Ok(Self {
            symbol: symbol.to_string(),
            settings,
            cleaner: StreamCleaner::new(settings.cleaning),
            normalizer: FeatureNormalizer::new(settings.feature_window)?,
            trainer: OnlineTrainer::with_weights(settings.topology.clone(), settings.train.clone(), weights)?,
            tracker: CycleTracker::default(),
            last_estimate: None,
            wavelet: None,
            last_raw: None,
            last_prediction: None,
            accepted: 0,
            history: VecDeque::with_capacity(settings.history_cap()),
            trace: None,
            removed: Vec::new(),
            notes: Vec::new(),
        })
    }

    /// Keep every accepted bar, not just the bounded recent history.
    pub fn keep_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn weights(&self) -> &Weights {
        self.trainer.weights()
    }

    pub fn updates(&self) -> u64 {
        self.trainer.updates()
    }

    pub fn removed(&self) -> &[RemovedBar] {
        &self.removed
    }

    pub fn notes(&self) -> &[AuditNote] {
        &self.notes
    }

    pub fn history(&self) -> &VecDeque<HistoryRecord> {
        &self.history
    }

    pub fn last_prediction(&self) -> Option<&Prediction> {
        self.last_prediction.as_ref()
    }

    /// The cycle used for adaptive indicators: the latest valid estimate,
    /// or an invalid one while none has been seen.
    pub fn cycle(&self) -> CycleEstimate {
        match &self.last_estimate {
            Some(_) => self.tracker.current(),
            None => CycleEstimate::invalid(),
        }
    }

    /// Feeds one raw bar. Because spikes are confirmed by the following
    /// bar, an emission concerns the bar before `bar`.
    pub fn push(&mut self, bar: Bar) -> Result<Option<Emission>> {
        let step = self.settings.timeframe.seconds();
        if let Some(prev) = self.last_raw {
            if bar.timestamp <= prev {
                return Err(AppError::Data(format!(
                    "bar at {} does not follow {}",
                    bar.timestamp.0, prev.0
                )));
            }
        }
        let cal = &self.settings.calendar;
        if self.settings.cleaning.gap_policy == GapPolicy::DropOvernight && !cal.in_session(bar.timestamp) {
            return Ok(None);
        }
        let mut flushed = None;
        if let Some(prev) = self.last_raw {
            let same_session = cal.session_key(prev) == cal.session_key(bar.timestamp);
            let missing = (bar.timestamp.0 - prev.0) / step - 1;
            if same_session && missing > self.settings.max_gap_bars as i64 {
                flushed = self.pause(bar.timestamp, missing)?;
            }
        }
        self.last_raw = Some(bar.timestamp);
        let cleaned = self.cleaner.push(bar)?;
        if let Some(spike) = cleaned.removed {
            self.removed.push(RemovedBar {
                bar: spike,
                reason: SPIKE_REASON,
            });
        }
        let emitted = match cleaned.accepted {
            Some(b) => self.process(b)?,
            None => None,
        };
        Ok(emitted.or(flushed))
    }

    /// Releases the bar held for spike confirmation at the end of a feed.
    pub fn finish(&mut self) -> Result<Option<Emission>> {
        match self.cleaner.flush() {
            Some(b) => self.process(b),
            None => Ok(None),
        }
    }

    fn pause(&mut self, at: Timestamp, missing: i64) -> Result<Option<Emission>> {
        let flushed = self.finish()?;
        self.notes.push(AuditNote {
            timestamp: Some(at),
            note: format!("paused: {missing} bars missing inside the session; warm-up restarted"),
        });
        self.cleaner.reset();
        self.normalizer.reset();
        self.trainer = OnlineTrainer::with_weights(
            self.settings.topology.clone(),
            self.settings.train.clone(),
            self.trainer.weights().clone(),
        )?;
        self.last_prediction = None;
        Ok(flushed)
    }

    fn process(&mut self, bar: Bar) -> Result<Option<Emission>> {
        let seq = self.accepted;
        self.accepted += 1;
        let row = self.normalizer.push(&bar)?;
        let mut record = HistoryRecord {
            seq,
            bar,
            predicted: None,
            realized: None,
            expected_return: None,
        };
        let step = match row {
            Some(row) => {
                let sample = Sample {
                    timestamp: row.timestamp,
                    features: row.values.to_vec(),
                    realized: row.log_return,
                };
                let out = self.trainer.push(&sample)?;
                if !out.prediction.values.iter().all(|v| v.is_finite()) {
                    return Err(AppError::Numerical(format!("non-finite prediction at {}", bar.timestamp.0)));
                }
                record.predicted = self.last_prediction.as_ref().map(|p| p.values[0]);
                record.realized = Some(row.log_return);
                record.expected_return = Some(out.prediction.cumulative_return());
                self.last_prediction = Some(out.prediction.clone());
                Some((row.log_return, out.prediction))
            }
            None => None,
        };
        self.remember(record);
        self.maybe_estimate_cycle()?;
        Ok(step.map(|(realized, prediction)| Emission {
            timestamp: bar.timestamp,
            close: bar.close,
            realized,
            prediction,
            cycle_period: self.tracker.period(),
            cycle_valid: self.last_estimate.as_ref().is_some_and(|e| e.valid),
        }))
    }

    fn remember(&mut self, record: HistoryRecord) {
        if let Some(trace) = &mut self.trace {
            trace.push(record.clone());
        }
        if self.history.len() == self.settings.history_cap() {
            self.history.pop_front();
        }
        self.history.push_back(record);
    }

    fn maybe_estimate_cycle(&mut self) -> Result<()> {
        let every = self.settings.cycle_every;
        let window = self.settings.plan.config().window;
        if every == 0 || self.accepted % every as u64 != 0 || self.history.len() < window {
            return Ok(());
        }
        let start = self.history.len() - window;
        let closes: Vec<f64> = self.history.range(start..).map(|r| r.bar.close).collect();
        let (estimate, scalogram) = estimate_cycle(&closes, &self.settings.plan)?;
        self.tracker.update(&estimate);
        self.wavelet = Some(WaveletTrace {
            first_seq: self.history[start].seq,
            values: scalogram.peak_power_trace(),
        });
        if estimate.valid || self.last_estimate.is_none() {
            self.last_estimate = Some(estimate);
        } else if let Some(last) = &mut self.last_estimate {
            last.valid = false;
        }
        Ok(())
    }

    /// Adaptive MACD and Stochastic specs for the current cycle.
    pub fn adaptive_specs(&self) -> (IndicatorSpec, IndicatorSpec) {
        let cycle = self.cycle();
        (
            adapt_periods(&IndicatorSpec::macd_default(), &cycle, &self.settings.rule),
            adapt_periods(&IndicatorSpec::stochastic_default(), &cycle, &self.settings.rule),
        )
    }

    /// Chart of the retained history and the latest prediction.
    pub fn chart(&self) -> Result<Option<ChartBundle>> {
        let Some(prediction) = &self.last_prediction else {
            return Ok(None);
        };
        let bars: Vec<Bar> = self.history.iter().map(|r| r.bar).collect();
        let series = Series::new(self.symbol.clone(), self.settings.timeframe, bars)?;
        let records: Vec<&HistoryRecord> = self.history.iter().collect();
        let (macd, stochastic) = self.adaptive_specs();
        build_bundle(
            &series,
            &records,
            prediction,
            &macd,
            &stochastic,
            self.wavelet.as_ref(),
            self.tracker.period(),
            self.settings.plotted,
            self.settings.chart_bars,
        )
        .map(Some)
    }

    /// Full accepted-bar trace, if [`SymbolPipeline::keep_trace`] was set.
    pub fn into_trace(self) -> Option<Vec<HistoryRecord>> {
        self.trace
    }
}

/// Everything one symbol produced over a finite feed.
#[derive(Debug, Clone)]
pub struct SymbolRun {
    pub symbol: String,
    pub emissions: Vec<Emission>,
    pub removed: Vec<RemovedBar>,
    pub notes: Vec<AuditNote>,
    pub chart: Option<ChartBundle>,
    /// Trailing (predicted, realized) one-step pairs for scoring.
    pub recent: Vec<(f64, f64)>,
    pub weights: Weights,
    pub updates: u64,
    pub trace: Option<Vec<HistoryRecord>>,
}

/// Drives one symbol through a whole feed.
pub fn run_symbol(series: &Series, settings: &PipelineSettings, keep_trace: bool) -> Result<SymbolRun> {
    let mut pipe = SymbolPipeline::new(series.symbol(), settings)?;
    if keep_trace {
        pipe = pipe.keep_trace();
    }
    let mut emissions = Vec::new();
    for bar in series.bars() {
        emissions.extend(pipe.push(*bar)?);
    }
    emissions.extend(pipe.finish()?);
    let chart = pipe.chart()?;
    let recent = pipe
        .history()
        .iter()
        .filter_map(|r| Some((r.predicted?, r.realized?)))
        .collect();
    Ok(SymbolRun {
        symbol: series.symbol().to_string(),
        emissions,
        removed: pipe.removed().to_vec(),
        notes: pipe.notes().to_vec(),
        chart,
        recent,
        weights: pipe.weights().clone(),
        updates: pipe.updates(),
        trace: pipe.into_trace(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> PipelineSettings {
        let cfg = RunnerConfig {
            hidden: 4,
            wavelet_window: 64,
            min_period: 8.0,
            max_period: 16.0,
            ..RunnerConfig::default()
        };
        PipelineSettings::from_config(&cfg).unwrap()
    }

    /// Bars every 5 minutes inside the London session of 2024-01-02.
    fn feed(n: usize, f: impl Fn(usize) -> f64) -> Vec<Bar> {
        let open = 1_704_182_400 + 8 * 3600;
        (0..n)
            .map(|i| Bar::flat(Timestamp(open + 300 * i as i64), f(i), 10.0 + (i % 5) as f64))
            .collect()
    }

    fn wave(i: usize) -> f64 {
        100.0 * (0.01 * (i as f64 * 0.3).sin()).exp()
    }

    fn run(bars: &[Bar], s: &PipelineSettings) -> Vec<Emission> {
        let mut p = SymbolPipeline::new("T", s).unwrap();
        let mut out: Vec<Emission> = bars.iter().filter_map(|b| p.push(*b).unwrap()).collect();
        out.extend(p.finish().unwrap());
        out
    }

    #[test]
    fn emits_once_per_post_warmup_bar() {
        let s = settings();
        let out = run(&feed(100, wave), &s);
        assert_eq!(out.len(), 100 - s.feature_window);
        assert!(out.iter().all(|e| e.prediction.values.len() == 10));
        assert!(out.windows(2).all(|w| w[0].timestamp < w[1].timestamp));
    }

    #[test]
    fn replay_is_bit_identical() {
        let s = settings();
        let bars = feed(100, wave);
        assert_eq!(run(&bars, &s), run(&bars, &s));
    }

    #[test]
    fn later_bars_do_not_change_earlier_emissions() {
        let s = settings();
        let bars = feed(120, wave);
        let mut changed = bars.clone();
        for b in &mut changed[90..] {
            *b = Bar::flat(b.timestamp, b.close * 1.5, 99.0);
        }
        let a = run(&bars, &s);
        let b = run(&changed, &s);
        // The bar at index 89 is emitted when bar 90 arrives; both feeds
        // agree up to there.
        let upto = |v: &[Emission]| v.iter().filter(|e| e.timestamp < bars[89].timestamp).cloned().collect::<Vec<_>>();
        assert_eq!(upto(&a), upto(&b));
        assert!(!upto(&a).is_empty());
    }

    #[test]
    fn spike_is_removed_in_stream() {
        let s = settings();
        // Zig-zag: two-bar moves are zero, so a lone spike reverts cleanly.
        let mut bars = feed(80, |i| 100.0 * (0.002 * (i % 2) as f64).exp());
        bars[50] = Bar::flat(bars[50].timestamp, bars[50].close * 1.5, 10.0);
        let mut p = SymbolPipeline::new("T", &s).unwrap();
        for b in &bars {
            p.push(*b).unwrap();
        }
        p.finish().unwrap();
        assert_eq!(p.removed().len(), 1);
        assert_eq!(p.removed()[0].bar, bars[50]);
    }

    #[test]
    fn session_gap_pauses_symbol() {
        let s = settings();
        let mut bars = feed(100, wave);
        bars.drain(40..50);
        let mut p = SymbolPipeline::new("T", &s).unwrap();
        let mut n = 0;
        for b in &bars {
            n += usize::from(p.push(*b).unwrap().is_some());
        }
        n += usize::from(p.finish().unwrap().is_some());
        assert_eq!(p.notes().len(), 1);
        assert!(p.notes()[0].note.contains("10 bars missing"));
        // Two warm-ups: 40 bars before the gap, 50 after.
        assert_eq!(n, (40 - s.feature_window) + (50 - s.feature_window));
    }

    #[test]
    fn cycle_is_estimated_on_cadence() {
        let s = settings();
        // Period-12 oscillation in log price.
        let out = run(&feed(200, |i| 100.0 * (0.02 * (i as f64 * std::f64::consts::TAU / 12.0).sin()).exp()), &s);
        let valid: Vec<&Emission> = out.iter().filter(|e| e.cycle_valid).collect();
        assert!(!valid.is_empty());
        assert!(valid.iter().all(|e| (10.5..=13.5).contains(&e.cycle_period)), "{:?}", valid[0].cycle_period);
    }

    #[test]
    fn out_of_order_bars_are_data_errors() {
        let s = settings();
        let bars = feed(3, wave);
        let mut p = SymbolPipeline::new("T", &s).unwrap();
        p.push(bars[1]).unwrap();
        assert_eq!(p.push(bars[0]).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn cleaner_waits_for_reference() {
        let mut c = StreamCleaner::new(CleaningPolicy::default());
        let bars = feed(5, |i| if i == 2 { 500.0 } else { 100.0 });
        let accepted: Vec<Bar> = bars.iter().filter_map(|b| c.push(*b).unwrap().accepted).collect();
        assert_eq!(accepted.len(), 4);
        assert_eq!(c.flush(), Some(bars[4]));
    }
}
