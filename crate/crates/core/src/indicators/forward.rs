use alloc::vec::Vec;

use super::{compute, IndicatorError, IndicatorOutput, IndicatorSpec};
use crate::ctrnn::Prediction;
use crate::market_data::{Bar, Series};

/// Flat zero-volume bars along the predicted price path, one timeframe
/// step apart after the prediction origin.
pub fn forward_bars(actual: &Series, prediction: &Prediction) -> Result<Vec<Bar>, IndicatorError> {
    let last = actual.bars().last().ok_or(IndicatorError::Empty)?;
    if prediction.origin != last.timestamp {
        return Err(IndicatorError::PredictionNotAnchored);
    }
    let step = actual.timeframe().seconds();
    Ok(prediction
        .price_path(last.close)
        .into_iter()
        .enumerate()
        .map(|(j, price)| Bar::flat(last.timestamp.offset(step * (j as i64 + 1)), price, 0.0))
        .collect())
}

/// Runs a close-only indicator over the actual bars followed by the
/// predicted path. Rows from `forward_start` on are predicted.
pub fn compute_on_prediction(
    actual: &Series,
    prediction: &Prediction,
    spec: &IndicatorSpec,
) -> Result<IndicatorOutput, IndicatorError> {
    if spec.needs_ohlc() {
        return Err(IndicatorError::NeedsOhlc(spec.name()));
    }
    let forward = forward_bars(actual, prediction)?;
    let mut joined = actual.bars().to_vec();
    let start = joined.len();
    joined.extend(forward);
    let mut out = compute(&joined, spec)?;
    out.forward_start = Some(start);
    Ok(out)
}
