use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

pub const REPORT_HEADER: [&str; 8] = [
    "Position in portfolio",
    "No. of days in test",
    "Initial capital",
    "Valuation at end",
    "ROI",
    "Peak Day",
    "Valuation at Peak",
    "Peak ROI",
];

pub const REPORT_CSV_HEADER: &str =
    "position,days,initial_capital,final_valuation,roi_pct,peak_day,peak_valuation,peak_roi_pct";

/// One sub-basket line of the summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub label: String,
    pub days: usize,
    pub initial_capital: f64,
    pub final_value: f64,
    /// 1-based day of the highest valuation, earliest on ties.
    pub peak_day: usize,
    pub peak_value: f64,
}

impl ReportRow {
    /// Label for ranks `lo..=hi`. The first sub-basket is labelled from 0.
    pub fn label_for(lo: usize, hi: usize) -> String {
        let start = if lo == 1 { 0 } else { lo };
        format!("{start} \u{2013} {hi}")
    }

    pub fn from_trace(lo: usize, hi: usize, initial_capital: f64, trace: &[f64]) -> Self {
        let mut peak_day = 0;
        let mut peak_value = f64::NEG_INFINITY;
        for (i, &v) in trace.iter().enumerate() {
            if v > peak_value {
                peak_value = v;
                peak_day = i + 1;
            }
        }
        if trace.is_empty() {
            peak_value = initial_capital;
        }
        Self {
            label: Self::label_for(lo, hi),
            days: trace.len(),
            initial_capital,
            final_value: trace.last().copied().unwrap_or(initial_capital),
            peak_day,
            peak_value,
        }
    }

    pub fn roi(&self) -> f64 {
        (self.final_value / self.initial_capital - 1.0) * 100.0
    }

    pub fn peak_roi(&self) -> f64 {
        (self.peak_value / self.initial_capital - 1.0) * 100.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedReport {
    /// Tab-separated table, two-decimal percentages.
    pub table: String,
    /// Full-precision CSV.
    pub csv: String,
}

pub fn render_report(rows: &[ReportRow]) -> RenderedReport {
    let mut table = REPORT_HEADER.join("\t");
    table.push('\n');
    let mut csv = String::from(REPORT_CSV_HEADER);
    csv.push('\n');
    for r in rows {
        let _ = writeln!(
            table,
            "{}\t{}\t{:.0}\t{:.0}\t{:.2}%\t{}\t{:.0}\t{:.2}%",
            r.label,
            r.days,
            r.initial_capital,
            r.final_value,
            r.roi(),
            r.peak_day,
            r.peak_value,
            r.peak_roi()
        );
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.label,
            r.days,
            r.initial_capital,
            r.final_value,
            r.roi(),
            r.peak_day,
            r.peak_value,
            r.peak_roi()
        );
    }
    RenderedReport { table, csv }
}

/// Report rows from the CSV written by [`render_report`].
pub fn parse_report_csv(text: &str) -> Option<Vec<ReportRow>> {
    let mut lines = text.lines();
    if lines.next()? != REPORT_CSV_HEADER {
        return None;
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 8 {
                return None;
            }
            Some(ReportRow {
                label: String::from(f[0]),
                days: f[1].parse().ok()?,
                initial_capital: f[2].parse().ok()?,
                final_value: f[3].parse().ok()?,
                peak_day: f[5].parse().ok()?,
                peak_value: f[6].parse().ok()?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_row() -> ReportRow {
        ReportRow {
            label: ReportRow::label_for(1, 10),
            days: 41,
            initial_capital: 1000.0,
            final_value: 1428.0,
            peak_day: 32,
            peak_value: 1490.0,
        }
    }

    #[test]
    fn reference_row_layout() {
        let out = render_report(&[reference_row()]);
        let mut lines = out.table.lines();
        assert_eq!(
            lines.next().unwrap(),
            "Position in portfolio\tNo. of days in test\tInitial capital\tValuation at end\tROI\tPeak Day\tValuation at Peak\tPeak ROI"
        );
        assert_eq!(lines.next().unwrap(), "0 \u{2013} 10\t41\t1000\t1428\t42.80%\t32\t1490\t49.00%");
        assert_eq!(ReportRow::label_for(11, 20), "11 \u{2013} 20");
    }

    #[test]
    fn csv_round_trip() {
        let mut row = reference_row();
        row.final_value = 1234.567_890_123_4;
        row.peak_value = 1300.000_000_000_2;
        let parsed = parse_report_csv(&render_report(&[row.clone()]).csv).unwrap();
        assert_eq!(parsed, [row]);
    }

    #[test]
    fn peak_is_earliest_maximum() {
        let row = ReportRow::from_trace(1, 10, 1000.0, &[1000.0, 1100.0, 1050.0, 1100.0, 900.0]);
        assert_eq!((row.peak_day, row.peak_value, row.final_value), (2, 1100.0, 900.0));
        assert_eq!(row.days, 5);
    }
}
