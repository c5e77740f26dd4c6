use alloc::vec;
use alloc::vec::Vec;

use super::trend::{ema_line, sma_line};
use super::{check_period, closes, IndicatorError, IndicatorOutput, Line};
use crate::market_data::Bar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelKind {
    Atr,
    Bollinger,
    Keltner,
}

fn true_range(bars: &[Bar]) -> Vec<f64> {
    bars.iter()
        .enumerate()
        .map(|(t, b)| {
            let hl = b.high - b.low;
            if t == 0 {
                hl
            } else {
                let pc = bars[t - 1].close;
                hl.max((b.high - pc).abs()).max((b.low - pc).abs())
            }
        })
        .collect()
}

fn atr_values(bars: &[Bar], period: usize) -> Vec<Option<f64>> {
    let tr = true_range(bars);
    let mut out = vec![None; bars.len()];
    if period > bars.len() {
        return out;
    }
    let p = period as f64;
    let mut prev = tr[..period].iter().sum::<f64>() / p;
    out[period - 1] = Some(prev);
    for t in period..bars.len() {
        prev = (prev * (p - 1.0) + tr[t]) / p;
        out[t] = Some(prev);
    }
    out
}

/// Wilder-smoothed true range, seeded with the mean of the first `period`
/// true ranges (the first bar's true range is its high-low span).
pub fn atr(bars: &[Bar], period: usize) -> Result<IndicatorOutput, IndicatorError> {
    check_period(period)?;
    Ok(IndicatorOutput::new(bars, vec![Line::new("atr", atr_values(bars, period))]))
}

/// `SMA ± width·σ` with the population standard deviation of the same window.
pub fn bollinger(bars: &[Bar], period: usize, width: f64) -> Result<IndicatorOutput, IndicatorError> {
    check_period(period)?;
    let c = closes(bars);
    let mid = sma_line(&c, period);
    let mut upper = vec![None; c.len()];
    let mut lower = vec![None; c.len()];
    for t in 0..c.len() {
        let Some(m) = mid[t] else { continue };
        let var = c[t + 1 - period..=t].iter().map(|v| (v - m) * (v - m)).sum::<f64>() / period as f64;
        let sd = libm::sqrt(var);
        upper[t] = Some(m + width * sd);
        lower[t] = Some(m - width * sd);
    }
    Ok(IndicatorOutput::new(
        bars,
        vec![Line::new("upper", upper), Line::new("mid", mid), Line::new("lower", lower)],
    ))
}

/// `EMA ± width·ATR`.
pub fn keltner(bars: &[Bar], ema_period: usize, atr_period: usize, width: f64) -> Result<IndicatorOutput, IndicatorError> {
    check_period(ema_period)?;
    check_period(atr_period)?;
    let c: Vec<Option<f64>> = bars.iter().map(|b| Some(b.close)).collect();
    let mid = ema_line(&c, ema_period);
    let range = atr_values(bars, atr_period);
    let upper = mid.iter().zip(&range).map(|(m, a)| Some((*m)? + width * (*a)?)).collect();
    let lower = mid.iter().zip(&range).map(|(m, a)| Some((*m)? - width * (*a)?)).collect();
    Ok(IndicatorOutput::new(
        bars,
        vec![Line::new("upper", upper), Line::new("mid", mid), Line::new("lower", lower)],
    ))
}

/// Dispatch over the volatility family. `periods` is `[period]` for ATR
/// and Bollinger and `[ema_period, atr_period]` for Keltner.
pub fn volatility_channel(
    bars: &[Bar],
    kind: ChannelKind,
    periods: &[usize],
    width: f64,
) -> Result<IndicatorOutput, IndicatorError> {
    let first = *periods.first().ok_or(IndicatorError::InvalidPeriod("missing period"))?;
    match kind {
        ChannelKind::Atr => atr(bars, first),
        ChannelKind::Bollinger => bollinger(bars, first, width),
        ChannelKind::Keltner => keltner(bars, first, periods.get(1).copied().unwrap_or(first), width),
    }
}
