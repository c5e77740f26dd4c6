use alloc::vec::Vec;

use super::{Bar, DataError, Series, Timeframe, Timestamp};

/// Aggregates into `target` bars on the UTC grid. Session opens on a whole
/// multiple of the target (08:00 for every intraday timeframe) line up with
/// bucket starts.
pub fn resample(series: &Series, target: Timeframe) -> Result<Series, DataError> {
    resample_anchored(series, target, 0)
}

/// Aggregates into `target` bars whose buckets start at `anchor` seconds
/// past midnight (modulo the target length).
///
/// Each output bar takes the first open, max high, min low, last close and
/// summed volume of its bucket and is stamped with the bucket start.
pub fn resample_anchored(series: &Series, target: Timeframe, anchor: i64) -> Result<Series, DataError> {
    let source = series.timeframe();
    if source.multiple_of(target).is_none() {
        return Err(DataError::IncompatibleTimeframe { from: source, target });
    }
    if series.is_empty() {
        return Err(DataError::EmptySeries);
    }
    let width = target.seconds();
    let bucket_of = |ts: Timestamp| (ts.0 - anchor).div_euclid(width);
    let mut out: Vec<Bar> = Vec::new();
    let mut current: Option<(i64, Bar)> = None;
    for bar in series.bars() {
        let key = bucket_of(bar.timestamp);
        match current.as_mut() {
            Some((k, agg)) if *k == key => {
                agg.high = agg.high.max(bar.high);
                agg.low = agg.low.min(bar.low);
                agg.close = bar.close;
                agg.volume += bar.volume;
            }
            _ => {
                if let Some((_, done)) = current.take() {
                    out.push(done);
                }
                let start = Timestamp(key * width + anchor);
                current = Some((key, Bar { timestamp: start, ..*bar }));
            }
        }
    }
    if let Some((_, done)) = current {
        out.push(done);
    }
    Series::new(series.symbol(), target, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn five_one_minute_bars_make_one_five_minute_bar() {
        let bars = (0..5)
            .map(|i| {
                let c = (i + 1) as f64;
                Bar::new(Timestamp(1_704_182_400 + i * 60), c, c + 0.5, c - 0.5, c, 10.0).unwrap()
            })
            .collect();
        let s = Series::new("T", Timeframe::M1, bars).unwrap();
        let r = resample(&s, Timeframe::M5).unwrap();
        assert_eq!(r.len(), 1);
        let b = r.bars()[0];
        assert_eq!((b.open, b.close, b.volume), (1.0, 5.0, 50.0));
        assert_eq!((b.high, b.low), (5.5, 0.5));
        assert_eq!(r.timeframe(), Timeframe::M5);
    }

    #[test]
    fn identity_resample() {
        let s = Series::new("T", Timeframe::M5, vec![Bar::flat(Timestamp(300), 1.0, 2.0)]).unwrap();
        assert_eq!(resample(&s, Timeframe::M5).unwrap(), s);
    }

    #[test]
    fn rejects_non_multiple() {
        let s = Series::new("T", Timeframe::M3, vec![Bar::flat(Timestamp(0), 1.0, 2.0)]).unwrap();
        assert!(matches!(
            resample(&s, Timeframe::M5),
            Err(DataError::IncompatibleTimeframe { .. })
        ));
        let s = Series::new("T", Timeframe::M5, vec![Bar::flat(Timestamp(0), 1.0, 2.0)]).unwrap();
        assert!(resample(&s, Timeframe::M1).is_err());
    }

    #[test]
    fn anchored_buckets_start_at_anchor() {
        let bars = (0..6).map(|i| Bar::flat(Timestamp(i * 60), 1.0, 1.0)).collect();
        let s = Series::new("T", Timeframe::M1, bars).unwrap();
        let r = resample_anchored(&s, Timeframe::M3, 60).unwrap();
        let starts: Vec<i64> = r.bars().iter().map(|b| b.timestamp.0).collect();
        assert_eq!(starts, vec![-120, 60, 240]);
    }
}
