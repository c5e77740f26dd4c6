//! Chart bundles: actual and predicted prices with adaptive MACD,
//! Stochastic and wavelet panes, exported as CSV and static SVG.

use std::fmt::Write as _;
use std::path::Path;

use ctrnn_core::indicators::{compute_on_prediction, forward_bars};
use ctrnn_core::selection::pearson;
use ctrnn_core::{IndicatorSpec, Prediction, Series, Timestamp};

use crate::csv_io::{format_timestamp, opt, parse_opt, parse_timestamp, write_file};
use crate::error::{AppError, Result};
use crate::pipeline::{HistoryRecord, WaveletTrace};

pub const CHART_HEADER: [&str; 11] = [
    "timestamp",
    "price",
    "predicted",
    "macd",
    "macd_signal",
    "macd_hist",
    "stoch_k",
    "stoch_d",
    "wavelet",
    "predicted_return",
    "realized_return",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ChartRow {
    pub timestamp: Timestamp,
    pub price: f64,
    /// Set on rows of the predicted price path.
    pub predicted: bool,
    pub macd: Option<f64>,
    pub macd_signal: Option<f64>,
    pub macd_hist: Option<f64>,
    pub stoch_k: Option<f64>,
    pub stoch_d: Option<f64>,
    pub wavelet: Option<f64>,
    pub predicted_return: Option<f64>,
    pub realized_return: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartBundle {
    pub symbol: String,
    /// Correlation of the rows holding both a predicted and a realized return.
    pub pearson_r: f64,
    pub cycle_period: f64,
    pub rows: Vec<ChartRow>,
}

impl ChartBundle {
    pub fn actual_trace(&self) -> Vec<f64> {
        self.rows.iter().filter(|r| !r.predicted).map(|r| r.price).collect()
    }

    pub fn predicted_trace(&self) -> Vec<f64> {
        self.rows.iter().filter(|r| r.predicted).map(|r| r.price).collect()
    }

    /// The overlapping (predicted, realized) return windows.
    pub fn return_pairs(&self) -> (Vec<f64>, Vec<f64>) {
        self.rows
            .iter()
            .filter_map(|r| Some((r.predicted_return?, r.realized_return?)))
            .unzip()
    }
}

/// Correlation annotation: 0 when fewer than three pairs overlap.
pub fn annotation_r(rows: &[ChartRow]) -> f64 {
    let (p, a): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| Some((r.predicted_return?, r.realized_return?)))
        .unzip();
    pearson(&p, &a).map_or(0.0, |c| c.r)
}

/// Builds the bundle for the last `chart_bars` actual bars followed by
/// `plotted` predicted bars. `records` must align with `series`.
#[allow(clippy::too_many_arguments)]
pub fn build_bundle(
    series: &Series,
    records: &[&HistoryRecord],
    prediction: &Prediction,
    macd_spec: &IndicatorSpec,
    stoch_spec: &IndicatorSpec,
    wavelet: Option<&WaveletTrace>,
    cycle_period: f64,
    plotted: usize,
    chart_bars: usize,
) -> Result<ChartBundle> {
    if records.len() != series.len() {
        return Err(AppError::Data("chart history does not match its series".into()));
    }
    if plotted == 0 || plotted > prediction.values.len() {
        return Err(AppError::Usage(format!(
            "cannot plot {plotted} of {} predicted points",
            prediction.values.len()
        )));
    }
    let shown = Prediction {
        origin: prediction.origin,
        values: prediction.values[..plotted].to_vec(),
    };
    let macd = compute_on_prediction(series, &shown, macd_spec)?;
    let stoch = compute_on_prediction(series, &shown, stoch_spec)?;
    let forward = forward_bars(series, &shown)?;
    let line = |out: &ctrnn_core::IndicatorOutput, name: &str, i: usize| out.line(name).and_then(|l| l[i]);

    let n = series.len();
    let mut rows = Vec::with_capacity(chart_bars.min(n) + plotted);
    for i in n.saturating_sub(chart_bars)..n + plotted {
        let (timestamp, price, predicted) = if i < n {
            let b = series.bars()[i];
            (b.timestamp, b.close, false)
        } else {
            let b = forward[i - n];
            (b.timestamp, b.close, true)
        };
        let (predicted_return, realized_return, wave) = if i < n {
            let r = records[i];
            (r.predicted, r.realized, wavelet.and_then(|w| w.at(r.seq)))
        } else {
            (Some(shown.values[i - n]), None, None)
        };
        rows.push(ChartRow {
            timestamp,
            price,
            predicted,
            macd: line(&macd, "macd", i),
            macd_signal: line(&macd, "signal", i),
            macd_hist: line(&macd, "histogram", i),
            stoch_k: line(&stoch, "k", i),
            stoch_d: line(&stoch, "d", i),
            wavelet: wave,
            predicted_return,
            realized_return,
        });
    }
    Ok(ChartBundle {
        symbol: series.symbol().to_string(),
        pearson_r: annotation_r(&rows),
        cycle_period,
        rows,
    })
}

fn csv_err(e: csv::Error) -> AppError {
    AppError::Data(format!("chart csv: {e}"))
}

/// CSV of every row. The first record carries the metadata.
pub fn chart_csv(bundle: &ChartBundle) -> Result<String> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    w.write_record([
        format!("# symbol={}", bundle.symbol),
        format!("pearson_r={}", bundle.pearson_r),
        format!("cycle_period={}", bundle.cycle_period),
    ])
    .map_err(csv_err)?;
    w.write_record(CHART_HEADER).map_err(csv_err)?;
    for r in &bundle.rows {
        w.write_record([
            format_timestamp(r.timestamp),
            r.price.to_string(),
            u8::from(r.predicted).to_string(),
            opt(r.macd),
            opt(r.macd_signal),
            opt(r.macd_hist),
            opt(r.stoch_k),
            opt(r.stoch_d),
            opt(r.wavelet),
            opt(r.predicted_return),
            opt(r.realized_return),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| AppError::Data(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| AppError::Data(e.to_string()))
}

pub fn parse_chart_csv(text: &str) -> Result<ChartBundle> {
    let bad = |what: &str| AppError::Data(format!("chart csv: {what}"));
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = rdr.records();
    let meta = records.next().ok_or_else(|| bad("empty"))?.map_err(csv_err)?;
    let field = |i: usize, key: &str| -> Result<String> {
        meta.get(i)
            .and_then(|c| c.strip_prefix(key))
            .map(str::to_string)
            .ok_or_else(|| bad("malformed metadata row"))
    };
    let symbol = field(0, "# symbol=")?;
    let pearson_r: f64 = field(1, "pearson_r=")?.parse().map_err(|_| bad("pearson_r"))?;
    let cycle_period: f64 = field(2, "cycle_period=")?.parse().map_err(|_| bad("cycle_period"))?;
    let header = records.next().ok_or_else(|| bad("missing header"))?.map_err(csv_err)?;
    if header.iter().ne(CHART_HEADER) {
        return Err(bad("unexpected header"));
    }
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != CHART_HEADER.len() {
            return Err(bad("wrong column count"));
        }
        let num = |i: usize| parse_opt(&rec[i]).map_err(|_| bad(CHART_HEADER[i]));
        rows.push(ChartRow {
            timestamp: parse_timestamp(&rec[0]).ok_or_else(|| bad("timestamp"))?,
            price: num(1)?.ok_or_else(|| bad("price"))?,
            predicted: match &rec[2] {
                "0" => false,
                "1" => true,
                _ => return Err(bad("predicted flag")),
            },
            macd: num(3)?,
            macd_signal: num(4)?,
            macd_hist: num(5)?,
            stoch_k: num(6)?,
            stoch_d: num(7)?,
            wavelet: num(8)?,
            predicted_return: num(9)?,
            realized_return: num(10)?,
        });
    }
    Ok(ChartBundle {
        symbol,
        pearson_r,
        cycle_period,
        rows,
    })
}

const WIDTH: f64 = 900.0;
const PANE: f64 = 150.0;
const GAP: f64 = 30.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;

struct Pane<'a> {
    title: &'a str,
    series: Vec<(&'a str, Vec<Option<f64>>)>,
    guides: &'a [f64],
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Static four-pane rendering: price, MACD, stochastic, wavelet power.
pub fn chart_svg(bundle: &ChartBundle) -> String {
    let rows = &bundle.rows;
    let col = |f: fn(&ChartRow) -> Option<f64>| rows.iter().map(f).collect::<Vec<_>>();
    // The predicted path starts from the last actual close so the two join.
    let last_actual = rows.iter().rposition(|r| !r.predicted);
    let actual = col(|r| (!r.predicted).then_some(r.price));
    let predicted: Vec<Option<f64>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| (r.predicted || Some(i) == last_actual && rows.iter().any(|r| r.predicted)).then_some(r.price))
        .collect();
    let panes = [
        Pane {
            title: "price",
            series: vec![("#1f77b4", actual), ("#d62728", predicted)],
            guides: &[],
        },
        Pane {
            title: "MACD",
            series: vec![
                ("#1f77b4", col(|r| r.macd)),
                ("#ff7f0e", col(|r| r.macd_signal)),
                ("#7f7f7f", col(|r| r.macd_hist)),
            ],
            guides: &[0.0],
        },
        Pane {
            title: "stochastic",
            series: vec![("#1f77b4", col(|r| r.stoch_k)), ("#ff7f0e", col(|r| r.stoch_d))],
            guides: &[20.0, 80.0],
        },
        Pane {
            title: "wavelet power",
            series: vec![("#2ca02c", col(|r| r.wavelet))],
            guides: &[],
        },
    ];
    let height = TOP + panes.len() as f64 * (PANE + GAP);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{LEFT}" y="24" font-family="sans-serif" font-size="14">{} r={:.4} cycle={:.2}</text>"#,
        escape(&bundle.symbol),
        bundle.pearson_r,
        bundle.cycle_period
    );
    if let Some(i) = rows.iter().position(|r| r.predicted) {
        let x = x_at(i, rows.len());
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#bbbbbb" stroke-dasharray="4 3"/>"##,
            height - GAP
        );
    }
    for (p, pane) in panes.iter().enumerate() {
        render_pane(&mut svg, pane, TOP + p as f64 * (PANE + GAP), rows.len());
    }
    svg.push_str("</svg>\n");
    svg
}

fn x_at(i: usize, n: usize) -> f64 {
    let span = WIDTH - LEFT - RIGHT;
    if n <= 1 {
        LEFT
    } else {
        LEFT + span * i as f64 / (n - 1) as f64
    }
}

fn render_pane(svg: &mut String, pane: &Pane<'_>, top: f64, n: usize) {
    let values = pane
        .series
        .iter()
        .flat_map(|(_, v)| v.iter().flatten())
        .chain(pane.guides)
        .copied()
        .filter(|v| v.is_finite());
    let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        lo -= 1.0;
        hi += 1.0;
    }
    let y_at = |v: f64| top + PANE - (v - lo) / (hi - lo) * PANE;
    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT}" y="{top}" width="{}" height="{PANE}" fill="none" stroke="#333333"/>"##,
        WIDTH - LEFT - RIGHT
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{:.2}" font-family="sans-serif" font-size="11">{}</text>"#,
        LEFT + 4.0,
        top + 12.0,
        pane.title
    );
    for (label, v) in [(hi, top + 10.0), (lo, top + PANE)] {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{v:.2}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>"#,
            LEFT - 4.0,
            axis_label(label)
        );
    }
    for g in pane.guides {
        let y = y_at(*g);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#dddddd"/>"##,
            WIDTH - RIGHT
        );
    }
    for (colour, values) in &pane.series {
        // Gaps in a trace split it into separate polylines.
        let mut run: Vec<String> = Vec::new();
        let mut flush = |run: &mut Vec<String>| {
            if run.len() > 1 {
                let _ = writeln!(
                    svg,
                    r#"<polyline fill="none" stroke="{colour}" stroke-width="1.2" points="{}"/>"#,
                    run.join(" ")
                );
            }
            run.clear();
        };
        for (i, v) in values.iter().enumerate() {
            match v.filter(|v| v.is_finite()) {
                Some(v) => run.push(format!("{:.2},{:.2}", x_at(i, n), y_at(v))),
                None => flush(&mut run),
            }
        }
        flush(&mut run);
    }
}

fn axis_label(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e5) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

/// Writes `<symbol>.csv` and `<symbol>.svg` into `dir`.
pub fn export_chart(bundle: &ChartBundle, dir: &Path) -> Result<()> {
    write_file(&dir.join(format!("{}.csv", bundle.symbol)), chart_csv(bundle)?.as_bytes())?;
    write_file(&dir.join(format!("{}.svg", bundle.symbol)), chart_svg(bundle).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn fixture() -> ChartBundle {
        let mut rows: Vec<ChartRow> = (0..30)
            .map(|i| {
                let t = i as f64;
                ChartRow {
                    timestamp: Timestamp(1_704_182_400 + 300 * i),
                    price: 100.0 + (t * 0.4).sin(),
                    predicted: false,
                    macd: (i >= 5).then(|| (t * 0.4).cos() * 0.1),
                    macd_signal: (i >= 8).then(|| (t * 0.4 - 0.3).cos() * 0.1),
                    macd_hist: (i >= 8).then(|| 0.01 * t.sin()),
                    stoch_k: (i >= 3).then(|| 50.0 + 40.0 * (t * 0.4).sin()),
                    stoch_d: (i >= 5).then(|| 50.0 + 35.0 * (t * 0.4 - 0.2).sin()),
                    wavelet: (i >= 10).then(|| 1e-4 * (1.0 + t.cos())),
                    predicted_return: (i >= 2).then(|| 0.004 * (t * 0.4 + 0.1).cos()),
                    realized_return: (i >= 1).then(|| 0.004 * (t * 0.4).cos()),
                }
            })
            .collect();
        let last = rows.last().unwrap().clone();
        for j in 1..=8 {
            rows.push(ChartRow {
                timestamp: Timestamp(last.timestamp.0 + 300 * j),
                price: last.price * (0.001 * j as f64).exp(),
                predicted: true,
                macd: Some(0.05),
                macd_signal: Some(0.04),
                macd_hist: Some(0.01),
                stoch_k: Some(70.0),
                stoch_d: Some(65.0),
                wavelet: None,
                predicted_return: Some(0.001),
                realized_return: None,
            });
        }
        ChartBundle {
            symbol: "FIX".into(),
            pearson_r: annotation_r(&rows),
            cycle_period: 15.7,
            rows,
        }
    }

    #[test]
    fn csv_round_trip() {
        let b = fixture();
        let text = chart_csv(&b).unwrap();
        assert!(text.starts_with("# symbol=FIX,pearson_r="));
        assert_eq!(parse_chart_csv(&text).unwrap(), b);
    }

    #[test]
    fn flat_bundle_round_trips() {
        let rows = (0..12)
            .map(|i| ChartRow {
                timestamp: Timestamp(300 * i),
                price: 50.0,
                predicted: i >= 10,
                macd: Some(0.0),
                macd_signal: Some(0.0),
                macd_hist: Some(0.0),
                stoch_k: Some(50.0),
                stoch_d: Some(50.0),
                wavelet: Some(0.0),
                predicted_return: Some(0.0),
                realized_return: (i < 10).then_some(0.0),
            })
            .collect::<Vec<_>>();
        let b = ChartBundle {
            symbol: "FLAT".into(),
            pearson_r: annotation_r(&rows),
            cycle_period: 20.0,
            rows,
        };
        assert_eq!(b.pearson_r, 0.0);
        assert_eq!(parse_chart_csv(&chart_csv(&b).unwrap()).unwrap(), b);
        roxmltree::Document::parse(&chart_svg(&b)).unwrap();
    }

    #[test]
    fn annotation_matches_selection_pearson() {
        let b = fixture();
        let (p, a) = b.return_pairs();
        assert_eq!(b.pearson_r, pearson(&p, &a).unwrap().r);
        assert!((-1.0..=1.0).contains(&b.pearson_r));
        assert_eq!(b.predicted_trace().len(), 8);
    }

    #[test]
    fn svg_is_well_formed_with_four_panes() {
        let b = ChartBundle {
            symbol: "A&B<C>".into(),
            ..fixture()
        };
        let svg = chart_svg(&b);
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let texts: Vec<&str> = doc.descendants().filter_map(|n| n.text()).collect();
        for t in ["price", "MACD", "stochastic", "wavelet power"] {
            assert!(texts.contains(&t), "{t}");
        }
        assert!(texts.iter().any(|t| t.starts_with("A&B<C>")));
    }

    #[test]
    fn svg_matches_golden_file() {
        let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/chart.svg");
        let svg = chart_svg(&fixture());
        if std::env::var_os("UPDATE_GOLDEN").is_some() {
            std::fs::write(&golden, &svg).unwrap();
        }
        let expected = std::fs::read_to_string(&golden).unwrap();
        assert_eq!(svg, expected);
    }

    #[test]
    fn export_writes_both_files_and_reports_bad_dirs() {
        let dir = tempfile::tempdir().unwrap();
        export_chart(&fixture(), dir.path()).unwrap();
        assert!(dir.path().join("FIX.csv").exists() && dir.path().join("FIX.svg").exists());
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let err = export_chart(&fixture(), &blocker.join("sub")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
