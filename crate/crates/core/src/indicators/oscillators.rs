use alloc::vec;
use alloc::vec::Vec;

use super::trend::sma_line;
use super::{check_period, IndicatorError, IndicatorOutput, Line};
use crate::market_data::Bar;

fn rsi_value(avg_gain: f64, avg_loss: f64) -> f64 {
    if avg_loss == 0.0 {
        if avg_gain == 0.0 {
            50.0
        } else {
            100.0
        }
    } else {
        100.0 - 100.0 / (1.0 + avg_gain / avg_loss)
    }
}

/// Wilder RSI. The first value, at bar `period`, uses simple averages of
/// the first `period` changes; later values use Wilder smoothing.
pub fn rsi(bars: &[Bar], period: usize) -> Result<IndicatorOutput, IndicatorError> {
    check_period(period)?;
    let n = bars.len();
    let mut out = vec![None; n];
    if n > period {
        let change = |t: usize| bars[t].close - bars[t - 1].close;
        let p = period as f64;
        let mut gain = 0.0;
        let mut loss = 0.0;
        for t in 1..=period {
            let d = change(t);
            gain += d.max(0.0);
            loss += (-d).max(0.0);
        }
        gain /= p;
        loss /= p;
        out[period] = Some(rsi_value(gain, loss));
        for t in period + 1..n {
            let d = change(t);
            gain = (gain * (p - 1.0) + d.max(0.0)) / p;
            loss = (loss * (p - 1.0) + (-d).max(0.0)) / p;
            out[t] = Some(rsi_value(gain, loss));
        }
    }
    Ok(IndicatorOutput::new(bars, vec![Line::new("rsi", out)]))
}

/// Raw `%K = 100·(close - lowest low)/(highest high - lowest low)` over
/// `lookback` bars (50 when the window is flat) and `%D = SMA_smooth(%K)`.
pub fn stochastic_kd(bars: &[Bar], lookback: usize, smooth: usize) -> Result<IndicatorOutput, IndicatorError> {
    check_period(lookback)?;
    check_period(smooth)?;
    let n = bars.len();
    let mut k = vec![None; n];
    if lookback <= n {
        for t in lookback - 1..n {
            let w = &bars[t + 1 - lookback..=t];
            let hh = w.iter().map(|b| b.high).fold(f64::NEG_INFINITY, f64::max);
            let ll = w.iter().map(|b| b.low).fold(f64::INFINITY, f64::min);
            let v = if hh == ll {
                50.0
            } else {
                (100.0 * (bars[t].close - ll) / (hh - ll)).clamp(0.0, 100.0)
            };
            k[t] = Some(v);
        }
    }
    let d = smooth_available(&k, smooth);
    Ok(IndicatorOutput::new(bars, vec![Line::new("k", k), Line::new("d", d)]))
}

/// SMA over the available suffix of `values`.
fn smooth_available(values: &[Option<f64>], period: usize) -> Vec<Option<f64>> {
    let mut out = vec![None; values.len()];
    if let Some(first) = values.iter().position(Option::is_some) {
        let dense: Vec<f64> = values[first..].iter().map(|v| v.unwrap_or(0.0)).collect();
        for (o, v) in out[first..].iter_mut().zip(sma_line(&dense, period)) {
            *o = v;
        }
    }
    out
}

/// Commodity channel index with the usual 0.015 scaling; zero when the
/// typical price has no mean deviation.
pub fn cci(bars: &[Bar], period: usize) -> Result<IndicatorOutput, IndicatorError> {
    check_period(period)?;
    let tp: Vec<f64> = bars.iter().map(Bar::typical_price).collect();
    let mean = sma_line(&tp, period);
    let mut out = vec![None; bars.len()];
    for t in 0..bars.len() {
        let Some(m) = mean[t] else { continue };
        let md = tp[t + 1 - period..=t].iter().map(|v| (v - m).abs()).sum::<f64>() / period as f64;
        out[t] = Some(if md == 0.0 { 0.0 } else { (tp[t] - m) / (0.015 * md) });
    }
    Ok(IndicatorOutput::new(bars, vec![Line::new("cci", out)]))
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
    fn rsi_extremes() {
        let up: Vec<f64> = (0..30).map(|i| 10.0 + i as f64).collect();
        let out = rsi(&bars(&up), 14).unwrap();
        assert_eq!(out.lines[0].warmup(), 14);
        assert!(out.lines[0].values.iter().flatten().all(|&v| v == 100.0));
        let down: Vec<f64> = up.iter().rev().copied().collect();
        assert!(rsi(&bars(&down), 14).unwrap().lines[0].values.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn rsi_alternating_is_fifty() {
        let c: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 10.0 } else { 11.0 }).collect();
        let out = rsi(&bars(&c), 4).unwrap();
        assert_eq!(out.lines[0].values[4], Some(50.0));
    }

    #[test]
    fn stochastic_positions() {
        let mk = |h: f64, l: f64, c: f64| Bar {
            timestamp: Timestamp(0),
            open: c,
            high: h,
            low: l,
            close: c,
            volume: 1.0,
        };
        let top = [mk(12.0, 8.0, 10.0), mk(14.0, 9.0, 14.0)];
        assert_eq!(stochastic_kd(&top, 2, 1).unwrap().line("k").unwrap()[1], Some(100.0));
        let bottom = [mk(12.0, 8.0, 10.0), mk(11.0, 8.0, 8.0)];
        assert_eq!(stochastic_kd(&bottom, 2, 1).unwrap().line("k").unwrap()[1], Some(0.0));
        let mid = [mk(12.0, 8.0, 10.0), mk(11.0, 9.0, 10.0)];
        assert_eq!(stochastic_kd(&mid, 2, 1).unwrap().line("k").unwrap()[1], Some(50.0));
        let flat = bars(&[5.0; 6]);
        let out = stochastic_kd(&flat, 3, 2).unwrap();
        assert!(out.line("k").unwrap().iter().flatten().all(|&v| v == 50.0));
        assert_eq!(out.lines[1].warmup(), 3);
    }

    #[test]
    fn cci_flat_is_zero() {
        let out = cci(&bars(&[3.0; 10]), 4).unwrap();
        assert!(out.lines[0].values.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(out.lines[0].warmup(), 3);
    }
}
