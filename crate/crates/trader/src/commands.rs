//! Subcommand implementations. Each returns a short human summary; files
//! go under the configured output directory.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use ctrnn_core::backtest::{render_report, BacktestReport, run_backtest, Forecast, Forecaster, Universe};
use ctrnn_core::ctrnn::step;
use ctrnn_core::cycle::estimate_cycle;
use ctrnn_core::indicators::compute_on_prediction;
use ctrnn_core::market_data::{mark_session_gaps, remove_outliers, resample, FeatureNormalizer};
use ctrnn_core::selection::{rank_order, score_universe, select_basket, BasketSpec, TracePair};
use ctrnn_core::{NetworkState, Prediction, Series, Timeframe};

use crate::chart::export_chart;
use crate::checkpoint::Checkpoint;
use crate::config::RunnerConfig;
use crate::csv_io::{
    format_timestamp, read_series, write_audit, write_file, write_indicators, write_notes, write_predictions,
    write_report, write_scalogram, write_scores, write_series, write_trades, write_valuation_trace,
};
use crate::error::{AppError, Result};
use crate::parallel::parallel_map;
use crate::pipeline::{run_symbol, HistoryRecord, PipelineSettings, SymbolPipeline, SymbolRun};
use crate::synthetic::{synth_universe, SynthSpec};

fn symbol_of(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| AppError::Usage(format!("cannot take a symbol from {}", path.display())))
}

/// Reads every `<SYMBOL>.csv` in `dir`, in symbol order, converted to the
/// configured timeframe.
pub fn load_universe(dir: &Path, timeframe: Timeframe) -> Result<Vec<Series>> {
    let entries = std::fs::read_dir(dir).map_err(|e| AppError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| AppError::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(AppError::Data(format!("{}: no CSV files", dir.display())));
    }
    files.iter().map(|f| load_symbol(f, timeframe)).collect()
}

fn load_symbol(path: &Path, timeframe: Timeframe) -> Result<Series> {
    let series = read_series(path, &symbol_of(path)?, None)?;
    to_timeframe(series, timeframe)
}

fn to_timeframe(series: Series, timeframe: Timeframe) -> Result<Series> {
    if series.timeframe() == timeframe {
        Ok(series)
    } else {
        Ok(resample(&series, timeframe)?)
    }
}

fn universe_dir(cfg: &RunnerConfig) -> Result<&Path> {
    cfg.universe
        .as_deref()
        .ok_or_else(|| AppError::Usage("no universe directory given (--universe or config)".into()))
}

fn load_one(cfg: &RunnerConfig, symbol: &str) -> Result<Series> {
    let path = universe_dir(cfg)?.join(format!("{symbol}.csv"));
    load_symbol(&path, cfg.timeframe()?)
}

fn run_all(universe: &[Series], settings: &PipelineSettings, workers: usize, keep_trace: bool) -> Result<Vec<SymbolRun>> {
    parallel_map(
        universe,
        workers,
        |s| s.symbol().to_string(),
        |s| run_symbol(s, settings, keep_trace),
    )
    .map_err(|f| f.error.for_symbol(&f.key))
}

pub fn ingest(cfg: &RunnerConfig, input: &Path, clean: bool) -> Result<String> {
    cfg.validate()?;
    let symbol = symbol_of(input)?;
    let series = to_timeframe(read_series(input, &symbol, None)?, cfg.timeframe()?)?;
    let dir = cfg.out.join("ingest");
    let mut summary = format!("{symbol}: {} bars at {}", series.len(), series.timeframe());
    let series = if clean {
        let report = remove_outliers(&series, &cfg.cleaning())?;
        write_audit(&dir.join(format!("{symbol}_audit.csv")), &report.removed)?;
        let _ = write!(summary, ", {} removed", report.removed.len());
        if report.too_short {
            summary.push_str(" (too short to clean)");
        }
        report.series
    } else {
        series
    };
    let segments = mark_session_gaps(&series, &cfg.calendar(), &cfg.cleaning());
    let _ = write!(summary, ", {} segment(s)", segments.len());
    write_series(&dir.join(format!("{symbol}.csv")), &series)?;
    Ok(summary)
}

pub fn train(cfg: &RunnerConfig) -> Result<String> {
    let settings = PipelineSettings::from_config(cfg)?;
    let universe = load_universe(universe_dir(cfg)?, settings.timeframe)?;
    let runs = run_all(&universe, &settings, cfg.workers, false)?;
    let mut summary = String::new();
    for run in &runs {
        let cp = Checkpoint::new(&run.symbol, &settings.topology, &run.weights, cfg.seed, run.updates, cfg.feature_window);
        cp.save(&cfg.out.join("checkpoints").join(format!("{}.json", run.symbol)))?;
        let _ = writeln!(summary, "{}: {} updates", run.symbol, run.updates);
    }
    Ok(summary)
}

/// Forward replay without learning; the prediction made on the last bar.
pub fn replay_prediction(series: &Series, cp: &Checkpoint) -> Result<Prediction> {
    let topo = cp.topology()?;
    let weights = cp.weights()?;
    let substeps = topo.substeps_per_bar()?;
    let mut norm = FeatureNormalizer::new(cp.feature_window)?;
    let mut state = NetworkState::zeros(&topo);
    let mut last = None;
    for bar in series.bars() {
        if let Some(row) = norm.push(bar)? {
            for _ in 0..substeps {
                state = step(&state, &weights, &row.values, &topo)?;
            }
            last = Some(row.timestamp);
        }
    }
    let origin = last.ok_or_else(|| AppError::Data(format!("{}: too few bars to predict", series.symbol())))?;
    let prediction = ctrnn_core::ctrnn::predict(&state, &weights, origin);
    if prediction.values.iter().any(|v| !v.is_finite()) {
        return Err(AppError::Numerical("non-finite prediction".into()));
    }
    Ok(prediction)
}

pub fn predict(cfg: &RunnerConfig, symbol: &str, checkpoint: &Path) -> Result<String> {
    cfg.validate()?;
    let cp = Checkpoint::load(checkpoint)?;
    let series = load_one(cfg, symbol)?;
    let prediction = replay_prediction(&series, &cp)?;
    let last_close = series.bars().last().expect("replay needs bars").close;
    let step = series.timeframe().seconds();
    let mut csv = String::from("step,timestamp,predicted_return,price\n");
    for (j, (r, p)) in prediction.values.iter().zip(prediction.price_path(last_close)).enumerate() {
        let ts = prediction.origin.offset(step * (j as i64 + 1));
        let _ = writeln!(csv, "{},{},{r},{p}", j + 1, format_timestamp(ts));
    }
    write_file(&cfg.out.join("predict").join(format!("{symbol}.csv")), csv.as_bytes())?;
    Ok(format!(
        "{symbol}: predicted {}-bar return {:.6} from close {last_close}",
        prediction.horizon(),
        prediction.cumulative_return()
    ))
}

/// Daily closes and per-day trace boundaries built from full pipeline
/// traces.
struct TraceForecaster {
    traces: Vec<Vec<HistoryRecord>>,
    /// `ends[s][d]`: records of symbol `s` up to the close of day `d`.
    ends: Vec<Vec<usize>>,
    window: usize,
}

impl Forecaster for TraceForecaster {
    fn forecast(&mut self, symbol: usize, day: usize, _history: &[f64]) -> Option<Forecast> {
        let seen = &self.traces[symbol][..self.ends[symbol][day]];
        let expected_return = seen.iter().rev().find_map(|r| r.expected_return)?;
        let mut pairs: Vec<(f64, f64)> = seen
            .iter()
            .rev()
            .filter_map(|r| Some((r.predicted?, r.realized?)))
            .take(self.window)
            .collect();
        pairs.reverse();
        let (predicted, realized) = pairs.into_iter().unzip();
        Some(Forecast {
            predicted,
            realized,
            expected_return,
        })
    }
}

pub fn backtest(cfg: &RunnerConfig) -> Result<String> {
    let settings = PipelineSettings::from_config(cfg)?;
    let universe = load_universe(universe_dir(cfg)?, settings.timeframe)?;
    backtest_series(cfg, &settings, &universe)
}

/// Runs every symbol through the online loop, then backtests the daily
/// closes with forecasts taken from the traces as they stood at each close.
pub fn pipeline_backtest(cfg: &RunnerConfig, settings: &PipelineSettings, series: &[Series]) -> Result<BacktestReport> {
    let bt = cfg.backtest()?;
    let symbols: Vec<String> = series.iter().map(|s| s.symbol().to_string()).collect();
    let runs = run_all(series, settings, cfg.workers, true)?;
    let (closes, mut forecaster) = daily_closes(runs, bt.score_window);
    let universe = Universe::new(symbols, closes)?;
    Ok(run_backtest(&universe, &mut forecaster, &bt)?)
}

pub fn backtest_series(cfg: &RunnerConfig, settings: &PipelineSettings, series: &[Series]) -> Result<String> {
    let report = pipeline_backtest(cfg, settings, series)?;
    let dir = cfg.out.join("backtest");
    let rendered = render_report(&report.rows);
    write_report(&dir, &rendered)?;
    write_valuation_trace(&dir.join("valuation.csv"), &report)?;
    write_trades(&dir.join("trades.csv"), &report.trades)?;
    let mut sel = String::from("day,rank,symbol,r\n");
    for (d, basket) in report.selections.iter().enumerate() {
        for e in basket {
            let _ = writeln!(sel, "{},{},{},{}", d + 1, e.rank, e.symbol, e.r);
        }
    }
    write_file(&dir.join("selections.csv"), sel.as_bytes())?;
    let notes: Vec<_> = report
        .skipped
        .iter()
        .map(|(day, n)| (n.symbol.clone(), None, format!("day {day}: {}", n.reason)))
        .collect();
    write_notes(&dir.join("skipped.csv"), &notes)?;
    Ok(rendered.table)
}

fn daily_closes(runs: Vec<SymbolRun>, window: usize) -> (Vec<Vec<f64>>, TraceForecaster) {
    let traces: Vec<Vec<HistoryRecord>> = runs.into_iter().map(|r| r.trace.unwrap_or_default()).collect();
    let days: Vec<i64> = traces
        .iter()
        .flatten()
        .map(|r| r.bar.timestamp.day_index())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut closes = Vec::with_capacity(traces.len());
    let mut ends = Vec::with_capacity(traces.len());
    for trace in &traces {
        let mut c = vec![f64::NAN; days.len()];
        let mut e = vec![0; days.len()];
        let mut i = 0;
        for (d, day) in days.iter().enumerate() {
            while i < trace.len() && trace[i].bar.timestamp.day_index() <= *day {
                c[d] = trace[i].bar.close;
                i += 1;
            }
            if trace[..i].last().map(|r| r.bar.timestamp.day_index()) != Some(*day) {
                c[d] = f64::NAN;
            }
            e[d] = i;
        }
        closes.push(c);
        ends.push(e);
    }
    (closes, TraceForecaster { traces, ends, window })
}

pub fn stream(cfg: &RunnerConfig) -> Result<String> {
    let settings = PipelineSettings::from_config(cfg)?;
    let universe = load_universe(universe_dir(cfg)?, settings.timeframe)?;
    stream_series(cfg, &settings, &universe, &cfg.out.join("stream"))
}

/// Runs every symbol through the online loop and writes predictions,
/// charts, audits and the closing scores under `dir`.
pub fn stream_series(cfg: &RunnerConfig, settings: &PipelineSettings, series: &[Series], dir: &Path) -> Result<String> {
    let runs = run_all(series, settings, cfg.workers, false)?;
    let horizon = settings.topology.horizon();
    let mut notes = Vec::new();
    for run in &runs {
        write_predictions(&dir.join("predictions").join(format!("{}.csv", run.symbol)), horizon, &run.emissions)?;
        write_audit(&dir.join("audit").join(format!("{}.csv", run.symbol)), &run.removed)?;
        if let Some(chart) = &run.chart {
            export_chart(chart, &dir.join("charts"))?;
        }
        notes.extend(run.notes.iter().map(|n| (run.symbol.clone(), n.timestamp, n.note.clone())));
    }
    let split: Vec<(Vec<f64>, Vec<f64>)> = runs.iter().map(|r| r.recent.iter().copied().unzip()).collect();
    let pairs: Vec<TracePair<'_>> = runs
        .iter()
        .zip(&split)
        .map(|(r, (p, a))| TracePair {
            symbol: &r.symbol,
            predicted: p,
            realized: a,
        })
        .collect();
    let scored = score_universe(&pairs, cfg.score_window()?)?;
    notes.extend(scored.skipped.iter().map(|n| (n.symbol.clone(), None, n.reason.clone())));
    let mut ranked = scored.scores;
    ranked.sort_by(rank_order);
    let basket = if ranked.is_empty() {
        Vec::new()
    } else {
        let universe: Vec<String> = runs.iter().map(|r| r.symbol.clone()).collect();
        select_basket(&ranked, &BasketSpec::new(universe, cfg.basket.min(ranked.len()))?)?
    };
    write_scores(&dir.join("scores.csv"), &ranked, &basket)?;
    write_notes(&dir.join("notes.csv"), &notes)?;
    let emitted: usize = runs.iter().map(|r| r.emissions.len()).sum();
    Ok(format!(
        "{} symbols, {emitted} emissions, {} scored, {} in basket",
        runs.len(),
        ranked.len(),
        basket.len()
    ))
}

pub fn chart(cfg: &RunnerConfig, symbol: &str, out: &Path) -> Result<String> {
    let settings = PipelineSettings::from_config(cfg)?;
    let series = load_one(cfg, symbol)?;
    let mut pipe = SymbolPipeline::new(symbol, &settings)?;
    for bar in series.bars() {
        pipe.push(*bar)?;
    }
    pipe.finish()?;
    let bundle = pipe
        .chart()?
        .ok_or_else(|| AppError::Data(format!("{symbol}: too few bars for a chart")))?;
    export_chart(&bundle, out)?;
    let prediction = pipe.last_prediction().expect("chart implies a prediction");
    let shown = Prediction {
        origin: prediction.origin,
        values: prediction.values[..cfg.plotted].to_vec(),
    };
    let (macd, stoch) = pipe.adaptive_specs();
    let tail = cfg.chart_bars + cfg.plotted;
    let actual = clean_tail(&pipe, &series)?;
    write_indicators(
        &out.join(format!("{symbol}_macd.csv")),
        &compute_on_prediction(&actual, &shown, &macd)?.tail(tail),
    )?;
    write_indicators(
        &out.join(format!("{symbol}_stochastic.csv")),
        &compute_on_prediction(&actual, &shown, &stoch)?.tail(tail),
    )?;
    let window = settings.plan.config().window;
    let mut files = 4;
    if actual.len() >= window {
        let (_, scalogram) = estimate_cycle(&actual.closes(), &settings.plan)?;
        let stamps: Vec<_> = actual.bars()[actual.len() - window..].iter().map(|b| b.timestamp).collect();
        write_scalogram(&out.join(format!("{symbol}_scalogram.csv")), &scalogram, &stamps)?;
        files += 1;
    }
    Ok(format!(
        "{symbol}: r={:.4}, cycle {:.2} bars, {files} files in {}",
        bundle.pearson_r,
        bundle.cycle_period,
        out.display()
    ))
}

/// The retained, cleaned history of a finished pipeline as a series.
fn clean_tail(pipe: &SymbolPipeline<'_>, series: &Series) -> Result<Series> {
    let bars = pipe.history().iter().map(|r| r.bar).collect();
    Ok(Series::new(series.symbol(), series.timeframe(), bars)?)
}

pub fn synth(cfg: &RunnerConfig, spec: &SynthSpec, dir: &Path) -> Result<String> {
    let universe = synth_universe(spec, &cfg.calendar())?;
    for s in &universe {
        write_series(&dir.join(format!("{}.csv", s.symbol())), s)?;
    }
    Ok(format!("{} symbols x {} days in {}", universe.len(), spec.days, dir.display()))
}
