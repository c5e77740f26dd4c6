//! CSV readers and writers for every file the runner touches.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! value read back parses to the identical `f64`. Missing values are empty
//! cells.

use std::fs;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, Utc};
use ctrnn_core::backtest::{BacktestReport, RenderedReport, ReportRow, Trade};
use ctrnn_core::cycle::Scalogram;
use ctrnn_core::indicators::IndicatorOutput;
use ctrnn_core::market_data::RemovedBar;
use ctrnn_core::selection::{BasketEntry, CorrelationScore};
use ctrnn_core::{Bar, Series, Timeframe, Timestamp};

use crate::error::{AppError, Result};
use crate::pipeline::Emission;

pub const BAR_HEADER: [&str; 6] = ["timestamp", "open", "high", "low", "close", "volume"];

/// ISO-8601 UTC (`2024-01-02T08:00:00Z`); offsets are converted and a bare
/// `YYYY-MM-DD HH:MM:SS` is taken as UTC.
pub fn parse_timestamp(text: &str) -> Option<Timestamp> {
    let text = text.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
        return Some(Timestamp(dt.timestamp()));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(text, fmt) {
            return Some(Timestamp(naive.and_utc().timestamp()));
        }
    }
    None
}

pub fn format_timestamp(ts: Timestamp) -> String {
    DateTime::<Utc>::from_timestamp(ts.0, 0)
        .map(|dt| dt.format("%Y-%m-%dT%H:%M:%SZ").to_string())
        .unwrap_or_else(|| ts.0.to_string())
}

pub fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn parse_opt(cell: &str) -> std::result::Result<Option<f64>, std::num::ParseFloatError> {
    if cell.is_empty() {
        Ok(None)
    } else {
        cell.parse().map(Some)
    }
}

/// Writes `contents`, creating parent directories.
pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| AppError::io(path, e))
}

fn finish(path: &Path, w: csv::Writer<Vec<u8>>) -> Result<()> {
    let bytes = w.into_inner().map_err(|e| AppError::Data(e.to_string()))?;
    write_file(path, &bytes)
}

fn csv_err(path: &Path, e: csv::Error) -> AppError {
    AppError::Data(format!("{}: {e}", path.display()))
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().flexible(true).from_writer(Vec::new())
}

macro_rules! row {
    ($w:expr, $path:expr, [$($cell:expr),* $(,)?]) => {
        $w.write_record([$(($cell).to_string()),*]).map_err(|e| csv_err($path, e))?
    };
}

/// Parsed bars in file order, with the line number of each row.
pub fn parse_bars(text: &str, origin: &str) -> Result<Vec<(u64, Bar)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| AppError::Data(format!("{origin}: {e}")))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    if names != BAR_HEADER {
        return Err(AppError::Data(format!(
            "{origin}: header must be {}, found {}",
            BAR_HEADER.join(","),
            names.join(",")
        )));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| AppError::Data(format!("{origin}: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |what: &str| AppError::Data(format!("{origin}:{line}: {what}"));
        let ts = parse_timestamp(&rec[0]).ok_or_else(|| bad("unparseable timestamp"))?;
        let mut v = [0.0; 5];
        for (i, slot) in v.iter_mut().enumerate() {
            *slot = rec[i + 1]
                .parse()
                .map_err(|_| bad(&format!("bad {} value {:?}", BAR_HEADER[i + 1], &rec[i + 1])))?;
        }
        let bar = Bar::new(ts, v[0], v[1], v[2], v[3], v[4]).map_err(|e| bad(&e.to_string()))?;
        if !(bar.low > 0.0) {
            return Err(bad("prices must be positive"));
        }
        out.push((line, bar));
    }
    Ok(out)
}

/// Smallest spacing between consecutive bars, matched to a timeframe.
pub fn infer_timeframe(bars: &[Bar]) -> Option<Timeframe> {
    let step = bars
        .windows(2)
        .map(|w| w[1].timestamp.0 - w[0].timestamp.0)
        .filter(|d| *d > 0)
        .min()?;
    Timeframe::ALL.into_iter().find(|tf| tf.seconds() == step)
}

/// Reads a bar file. Rows may arrive unsorted; duplicates and invalid bars
/// are data errors. Without `timeframe` the spacing of the file decides.
pub fn read_series(path: &Path, symbol: &str, timeframe: Option<Timeframe>) -> Result<Series> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let origin = path.display().to_string();
    let bars: Vec<Bar> = parse_bars(&text, &origin)?.into_iter().map(|(_, b)| b).collect();
    if bars.is_empty() {
        return Err(AppError::Data(format!("{origin}: no bars")));
    }
    let mut sorted = bars.clone();
    sorted.sort_by_key(|b| b.timestamp);
    let tf = match timeframe {
        Some(tf) => tf,
        None => infer_timeframe(&sorted).unwrap_or(Timeframe::M5),
    };
    Series::from_unsorted(symbol, tf, bars).map_err(|e| AppError::Data(format!("{origin}: {e}")))
}

pub fn write_series(path: &Path, series: &Series) -> Result<()> {
    let mut w = writer();
    w.write_record(BAR_HEADER).map_err(|e| csv_err(path, e))?;
    for b in series.bars() {
        row!(w, path, [format_timestamp(b.timestamp), b.open, b.high, b.low, b.close, b.volume]);
    }
    finish(path, w)
}

pub fn write_audit(path: &Path, removed: &[RemovedBar]) -> Result<()> {
    let mut w = writer();
    row!(w, path, ["timestamp", "open", "high", "low", "close", "volume", "reason"]);
    for r in removed {
        let b = r.bar;
        row!(w, path, [format_timestamp(b.timestamp), b.open, b.high, b.low, b.close, b.volume, r.reason]);
    }
    finish(path, w)
}

/// Free-form audit notes: `symbol,timestamp,note`.
pub fn write_notes(path: &Path, notes: &[(String, Option<Timestamp>, String)]) -> Result<()> {
    let mut w = writer();
    row!(w, path, ["symbol", "timestamp", "note"]);
    for (sym, ts, note) in notes {
        row!(w, path, [sym, ts.map(format_timestamp).unwrap_or_default(), note]);
    }
    finish(path, w)
}

/// One row per scale: period, scale, then one power column per timestamp.
pub fn write_scalogram(path: &Path, scalogram: &Scalogram, timestamps: &[Timestamp]) -> Result<()> {
    let mut w = writer();
    let mut header = vec!["period".to_string(), "scale".to_string()];
    header.extend(timestamps.iter().map(|t| format_timestamp(*t)));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (s, row) in scalogram.power.iter().enumerate() {
        let mut rec = vec![scalogram.periods[s].to_string(), scalogram.scales[s].to_string()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// `timestamp`, one column per line, then `predicted` (1 on rows built
/// from predicted returns).
pub fn write_indicators(path: &Path, out: &IndicatorOutput) -> Result<()> {
    let mut w = writer();
    let mut header = vec!["timestamp".to_string()];
    header.extend(out.lines.iter().map(|l| l.name.to_string()));
    header.push("predicted".into());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (i, ts) in out.timestamps.iter().enumerate() {
        let mut rec = vec![format_timestamp(*ts)];
        rec.extend(out.lines.iter().map(|l| opt(l.values[i])));
        let predicted = out.forward_start.is_some_and(|f| i >= f);
        rec.push(if predicted { "1" } else { "0" }.into());
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Every scored symbol in rank order; `selected` marks basket members.
pub fn write_scores(path: &Path, ranked: &[CorrelationScore], basket: &[BasketEntry]) -> Result<()> {
    let mut w = writer();
    row!(w, path, ["symbol", "r", "window", "rank", "selected"]);
    for (i, s) in ranked.iter().enumerate() {
        let selected = basket.iter().any(|b| b.symbol == s.symbol);
        row!(w, path, [s.symbol, s.r, s.window, i + 1, u8::from(selected)]);
    }
    finish(path, w)
}

/// Per-bar stream output: the bar, its realized return, the cycle in use
/// and every predicted step.
pub fn write_predictions(path: &Path, horizon: usize, emissions: &[Emission]) -> Result<()> {
    let mut w = writer();
    let mut header: Vec<String> = ["timestamp", "close", "realized", "cycle_period", "cycle_valid"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=horizon).map(|j| format!("pred_{j}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for e in emissions {
        let mut rec = vec![
            format_timestamp(e.timestamp),
            e.close.to_string(),
            e.realized.to_string(),
            e.cycle_period.to_string(),
            u8::from(e.cycle_valid).to_string(),
        ];
        rec.extend(e.prediction.values.iter().map(f64::to_string));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn write_valuation_trace(path: &Path, report: &BacktestReport) -> Result<()> {
    let mut w = writer();
    row!(w, path, ["day", "position", "valuation"]);
    for d in &report.trace {
        for (row, v) in report.rows.iter().zip(&d.values) {
            row!(w, path, [d.day, row.label, v]);
        }
    }
    finish(path, w)
}

pub fn write_trades(path: &Path, trades: &[Trade]) -> Result<()> {
    let mut w = writer();
    row!(w, path, ["day", "symbol", "action", "direction", "qty", "price"]);
    for t in trades {
        row!(w, path, [t.day, t.symbol, t.action.label(), t.direction.label(), t.quantity, t.price]);
    }
    finish(path, w)
}

/// Writes `report.txt` (table layout) and `report.csv` into `dir`.
pub fn write_report(dir: &Path, rendered: &RenderedReport) -> Result<()> {
    write_file(&dir.join("report.txt"), rendered.table.as_bytes())?;
    write_file(&dir.join("report.csv"), rendered.csv.as_bytes())
}

pub fn read_report(path: &Path) -> Result<Vec<ReportRow>> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    ctrnn_core::backtest::parse_report_csv(&text)
        .ok_or_else(|| AppError::Data(format!("{}: not a report CSV", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamp_formats() {
        let ts = parse_timestamp("2024-01-02T08:05:00Z").unwrap();
        assert_eq!(ts, Timestamp(1_704_182_700));
        assert_eq!(format_timestamp(ts), "2024-01-02T08:05:00Z");
        assert_eq!(parse_timestamp("2024-01-02 08:05:00"), Some(ts));
        assert_eq!(parse_timestamp("2024-01-02T09:05:00+01:00"), Some(ts));
        assert_eq!(parse_timestamp("yesterday"), None);
    }

    #[test]
    fn bad_rows_report_their_line() {
        let text = "timestamp,open,high,low,close,volume\n\
                    2024-01-02T08:00:00Z,1,2,0.5,1.5,10\n\
                    2024-01-02T08:05:00Z,1,2,0.5,abc,10\n";
        let err = parse_bars(text, "f.csv").unwrap_err();
        assert!(err.to_string().contains("f.csv:3"), "{err}");
        assert_eq!(err.exit_code(), 2);
        let inverted = "timestamp,open,high,low,close,volume\n2024-01-02T08:00:00Z,1,0.5,2,1,10\n";
        assert!(parse_bars(inverted, "g.csv").unwrap_err().to_string().contains("g.csv:2"));
        assert!(parse_bars("time,o,h,l,c,v\n", "h.csv").is_err());
    }

    #[test]
    fn series_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let bars: Vec<Bar> = (0..5)
            .map(|i| {
                let c = 100.0 + 0.1 * i as f64 + 1e-13;
                Bar::new(Timestamp(1_704_182_400 + 300 * i), c, c + 0.3, c - 0.2, c, 1234.5).unwrap()
            })
            .collect();
        let s = Series::new("X", Timeframe::M5, bars).unwrap();
        let path = dir.path().join("x.csv");
        write_series(&path, &s).unwrap();
        let back = read_series(&path, "X", None).unwrap();
        assert_eq!(back, s);
    }
}
