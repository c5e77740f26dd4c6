use super::IndicatorSpec;
use crate::cycle::CycleEstimate;
use crate::math::round;

/// Maps a dominant cycle period onto indicator periods.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveRule {
    pub fast_fraction: f64,
    pub slow_fraction: f64,
    pub signal_fraction: f64,
    /// RSI, SMA/EMA, CCI, ATR and band periods.
    pub lookback_fraction: f64,
    pub smooth_fraction: f64,
    pub min_smooth: usize,
    pub min_period: usize,
    pub max_period: usize,
}

impl Default for AdaptiveRule {
    fn default() -> Self {
        Self {
            fast_fraction: 0.5,
            slow_fraction: 1.0,
            signal_fraction: 0.25,
            lookback_fraction: 0.5,
            smooth_fraction: 0.1,
            min_smooth: 3,
            min_period: 2,
            max_period: 200,
        }
    }
}

impl AdaptiveRule {
    /// `round(period·fraction)` clamped to the allowed range.
    pub fn scaled(&self, period: f64, fraction: f64) -> usize {
        let raw = round(period * fraction);
        let v = if raw.is_finite() && raw > 0.0 { raw as usize } else { 0 };
        v.clamp(self.min_period, self.max_period)
    }
}

/// Re-derives the periods of `spec` from a cycle estimate. Invalid
/// estimates and indicators without a cycle-linked period leave `spec`
/// unchanged.
pub fn adapt_periods(spec: &IndicatorSpec, estimate: &CycleEstimate, rule: &AdaptiveRule) -> IndicatorSpec {
    if !estimate.valid || !(estimate.period > 0.0) {
        return spec.clone();
    }
    let p = estimate.period;
    let look = rule.scaled(p, rule.lookback_fraction);
    match *spec {
        IndicatorSpec::Macd { .. } => {
            let mut fast = rule.scaled(p, rule.fast_fraction);
            let mut slow = rule.scaled(p, rule.slow_fraction);
            if fast >= slow {
                if slow < rule.max_period {
                    slow = fast + 1;
                } else {
                    fast = slow - 1;
                }
            }
            IndicatorSpec::Macd {
                fast,
                slow,
                signal: rule.scaled(p, rule.signal_fraction),
            }
        }
        IndicatorSpec::Rsi { .. } => IndicatorSpec::Rsi { period: look },
        IndicatorSpec::Stochastic { .. } => IndicatorSpec::Stochastic {
            lookback: look,
            smooth: rule.scaled(p, rule.smooth_fraction).max(rule.min_smooth),
        },
        IndicatorSpec::Sma { .. } => IndicatorSpec::Sma { period: look },
        IndicatorSpec::Ema { .. } => IndicatorSpec::Ema { period: look },
        IndicatorSpec::Cci { .. } => IndicatorSpec::Cci { period: look },
        IndicatorSpec::Atr { .. } => IndicatorSpec::Atr { period: look },
        IndicatorSpec::Bollinger { width, .. } => IndicatorSpec::Bollinger { period: look, width },
        IndicatorSpec::Keltner { width, .. } => IndicatorSpec::Keltner {
            ema_period: look,
            atr_period: look,
            width,
        },
        IndicatorSpec::Obv
        | IndicatorSpec::Mfi { .. }
        | IndicatorSpec::SupportResistance { .. }
        | IndicatorSpec::FibonacciLevels { .. } => spec.clone(),
    }
}
