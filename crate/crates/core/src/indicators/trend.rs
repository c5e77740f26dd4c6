use alloc::vec;
use alloc::vec::Vec;

use super::{check_period, closes, IndicatorError, IndicatorOutput, Line};
use crate::market_data::Bar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaKind {
    Sma,
    Ema,
}

/// Simple moving average of `values`; `None` until `period` values exist.
pub fn sma_line(values: &[f64], period: usize) -> Vec<Option<f64>> {
    let mut out = vec![None; values.len()];
    if period == 0 || period > values.len() {
        return out;
    }
    for t in period - 1..values.len() {
        let sum: f64 = values[t + 1 - period..=t].iter().sum();
        out[t] = Some(sum / period as f64);
    }
    out
}

/// EMA with `alpha = 2/(period+1)`, seeded by the SMA of the first
/// `period` available values. Availability must be a contiguous suffix.
pub fn ema_line(values: &[Option<f64>], period: usize) -> Vec<Option<f64>> {
    let mut out = vec![None; values.len()];
    if period == 0 {
        return out;
    }
    let Some(first) = values.iter().position(Option::is_some) else {
        return out;
    };
    let seed_at = first + period - 1;
    if seed_at >= values.len() {
        return out;
    }
    let alpha = 2.0 / (period as f64 + 1.0);
    let seed: f64 = values[first..=seed_at].iter().map(|v| v.unwrap_or(0.0)).sum::<f64>() / period as f64;
    let mut prev = seed;
    out[seed_at] = Some(seed);
    for t in seed_at + 1..values.len() {
        let Some(v) = values[t] else { break };
        prev += alpha * (v - prev);
        out[t] = Some(prev);
    }
    out
}

pub fn moving_average(bars: &[Bar], kind: MaKind, period: usize) -> Result<IndicatorOutput, IndicatorError> {
    check_period(period)?;
    let c = closes(bars);
    let line = match kind {
        MaKind::Sma => Line::new("sma", sma_line(&c, period)),
        MaKind::Ema => {
            let opt: Vec<Option<f64>> = c.iter().copied().map(Some).collect();
            Line::new("ema", ema_line(&opt, period))
        }
    };
    Ok(IndicatorOutput::new(bars, vec![line]))
}

/// `macd = EMA_fast - EMA_slow`, `signal = EMA_signal(macd)`,
/// `histogram = macd - signal`.
pub fn macd(bars: &[Bar], fast: usize, slow: usize, signal: usize) -> Result<IndicatorOutput, IndicatorError> {
    check_period(fast)?;
    check_period(signal)?;
    if fast >= slow {
        return Err(IndicatorError::InvalidPeriod("MACD fast must be below slow"));
    }
    let c: Vec<Option<f64>> = bars.iter().map(|b| Some(b.close)).collect();
    let ef = ema_line(&c, fast);
    let es = ema_line(&c, slow);
    let line: Vec<Option<f64>> = ef.iter().zip(&es).map(|(f, s)| Some((*f)? - (*s)?)).collect();
    let sig = ema_line(&line, signal);
    let hist: Vec<Option<f64>> = line.iter().zip(&sig).map(|(m, s)| Some((*m)? - (*s)?)).collect();
    Ok(IndicatorOutput::new(
        bars,
        vec![Line::new("macd", line), Line::new("signal", sig), Line::new("histogram", hist)],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::Timestamp;

    fn bars(closes: &[f64]) -> Vec<Bar> {
        closes
            .iter()
            .enumerate()
            .map(|(i, &c)| Bar::flat(Timestamp(i as i64), c, 1.0))
            .collect()
    }

    #[test]
    fn sma_small_example() {
        let out = moving_average(&bars(&[1.0, 3.0, 5.0]), MaKind::Sma, 2).unwrap();
        assert_eq!(out.line("sma").unwrap(), &[None, Some(2.0), Some(4.0)]);
    }

    #[test]
    fn constant_series_averages_to_constant() {
        let b = bars(&[7.5; 30]);
        for kind in [MaKind::Sma, MaKind::Ema] {
            let out = moving_average(&b, kind, 5).unwrap();
            assert!(out.lines[0].values.iter().flatten().all(|&v| v == 7.5));
            assert_eq!(out.lines[0].warmup(), 4);
        }
        let m = macd(&b, 3, 6, 2).unwrap();
        for l in &m.lines {
            assert!(l.values.iter().flatten().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn period_longer_than_series_is_all_unavailable() {
        let out = moving_average(&bars(&[1.0, 2.0]), MaKind::Ema, 5).unwrap();
        assert!(out.lines[0].values.iter().all(Option::is_none));
        assert!(moving_average(&bars(&[1.0]), MaKind::Sma, 0).is_err());
    }

    #[test]
    fn macd_requires_fast_below_slow() {
        assert!(macd(&bars(&[1.0; 40]), 26, 12, 9).is_err());
    }

    #[test]
    fn macd_on_ramp_converges_to_lag_difference() {
        let slope = 0.5;
        let c: Vec<f64> = (0..1000).map(|t| 100.0 + slope * t as f64).collect();
        let out = macd(&bars(&c), 12, 26, 9).unwrap();
        let last = out.line("macd").unwrap()[999].unwrap();
        let expected = slope * (26.0 - 12.0) / 2.0;
        assert!((last - expected).abs() / expected < 0.02, "{last} vs {expected}");
    }
}
