use alloc::vec;
use alloc::vec::Vec;

use super::{check_period, IndicatorError, IndicatorOutput, Line};
use crate::market_data::Bar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeKind {
    Obv,
    Mfi,
}

/// On-balance volume, starting at zero on the first bar; unchanged closes
/// add nothing.
pub fn obv(bars: &[Bar]) -> IndicatorOutput {
    let mut acc = 0.0;
    let values = bars
        .iter()
        .enumerate()
        .map(|(t, b)| {
            if t > 0 {
                let prev = bars[t - 1].close;
                if b.close > prev {
                    acc += b.volume;
                } else if b.close < prev {
                    acc -= b.volume;
                }
            }
            Some(acc)
        })
        .collect();
    IndicatorOutput::new(bars, vec![Line::new("obv", values)])
}

/// Money flow index over `period` typical-price flows.
pub fn mfi(bars: &[Bar], period: usize) -> Result<IndicatorOutput, IndicatorError> {
    check_period(period)?;
    let n = bars.len();
    let tp: Vec<f64> = bars.iter().map(Bar::typical_price).collect();
    // Signed raw money flow per bar: positive on a typical-price rise.
    let flow: Vec<f64> = (0..n)
        .map(|t| {
            if t == 0 {
                return 0.0;
            }
            let raw = tp[t] * bars[t].volume;
            if tp[t] > tp[t - 1] {
                raw
            } else if tp[t] < tp[t - 1] {
                -raw
            } else {
                0.0
            }
        })
        .collect();
    let mut out = vec![None; n];
    for t in period..n {
        let (mut pos, mut neg) = (0.0, 0.0);
        for &f in &flow[t + 1 - period..=t] {
            if f > 0.0 {
                pos += f;
            } else {
                neg -= f;
            }
        }
        let v = if neg == 0.0 {
            if pos == 0.0 {
                50.0
            } else {
                100.0
            }
        } else {
            100.0 - 100.0 / (1.0 + pos / neg)
        };
        out[t] = Some(v);
    }
    Ok(IndicatorOutput::new(bars, vec![Line::new("mfi", out)]))
}

pub fn volume_indicator(bars: &[Bar], kind: VolumeKind, period: usize) -> Result<IndicatorOutput, IndicatorError> {
    match kind {
        VolumeKind::Obv => Ok(obv(bars)),
        VolumeKind::Mfi => mfi(bars, period),
    }
}
