//! Correlation scoring of predicted against realized traces and daily
//! top-N basket selection.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SelectionError {
    #[error("sequences differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least 3 points, got {0}")]
    TooShort(usize),
    #[error("non-finite value in correlation input")]
    NonFinite,
    #[error("basket of {size} needs that many scores, have {available}")]
    TooFewScores { size: usize, available: usize },
    #[error("basket size {size} invalid for a universe of {universe}")]
    InvalidBasket { size: usize, universe: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub r: f64,
    /// Set when either input had zero variance and `r` was defined as 0.
    pub degenerate: bool,
}

/// Product-moment correlation, computed in two passes.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation, SelectionError> {
    if x.len() != y.len() {
        return Err(SelectionError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(SelectionError::TooShort(x.len()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(SelectionError::NonFinite);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(Correlation { r: 0.0, degenerate: true });
    }
    let r = (sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0);
    Ok(Correlation { r, degenerate: false })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationScore {
    pub symbol: String,
    pub r: f64,
    pub window: usize,
    pub degenerate: bool,
}

/// Predicted and realized traces of one symbol, aligned index by index.
#[derive(Debug, Clone, Copy)]
pub struct TracePair<'a> {
    pub symbol: &'a str,
    pub predicted: &'a [f64],
    pub realized: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkipNote {
    pub symbol: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreOutcome {
    pub scores: Vec<CorrelationScore>,
    pub skipped: Vec<SkipNote>,
}

/// Scores the trailing `window` points of every pair. Pairs that are
/// misaligned, too short or hold non-finite values in the window are
/// skipped with a note.
pub fn score_universe(pairs: &[TracePair<'_>], window: usize) -> Result<ScoreOutcome, SelectionError> {
    if window < 3 {
        return Err(SelectionError::TooShort(window));
    }
    let mut out = ScoreOutcome::default();
    for pair in pairs {
        let skip = |reason: String| SkipNote {
            symbol: String::from(pair.symbol),
            reason,
        };
        if pair.predicted.len() != pair.realized.len() {
            out.skipped.push(skip(format!(
                "traces misaligned ({} predicted vs {} realized)",
                pair.predicted.len(),
                pair.realized.len()
            )));
            continue;
        }
        if pair.predicted.len() < window {
            out.skipped.push(skip(format!("only {} of {window} points", pair.predicted.len())));
            continue;
        }
        let start = pair.predicted.len() - window;
        match pearson(&pair.predicted[start..], &pair.realized[start..]) {
            Ok(c) => out.scores.push(CorrelationScore {
                symbol: String::from(pair.symbol),
                r: c.r,
                window,
                degenerate: c.degenerate,
            }),
            Err(SelectionError::NonFinite) => out.skipped.push(skip(String::from("missing data in window"))),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasketSpec {
    pub universe: Vec<String>,
    pub size: usize,
}

impl BasketSpec {
    pub fn new(universe: Vec<String>, size: usize) -> Result<Self, SelectionError> {
        if size == 0 || size > universe.len() {
            return Err(SelectionError::InvalidBasket {
                size,
                universe: universe.len(),
            });
        }
        Ok(Self { universe, size })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasketEntry {
    pub symbol: String,
    pub r: f64,
    /// 1-based.
    pub rank: usize,
}

/// Ordering used for ranking: higher `r` first, then symbol ascending.
pub fn rank_order(a: &CorrelationScore, b: &CorrelationScore) -> Ordering {
    b.r.total_cmp(&a.r).then_with(|| a.symbol.cmp(&b.symbol))
}

/// The `size` best-correlated symbols of the universe, ranked.
pub fn select_basket(scores: &[CorrelationScore], spec: &BasketSpec) -> Result<Vec<BasketEntry>, SelectionError> {
    let mut eligible: Vec<&CorrelationScore> = scores
        .iter()
        .filter(|s| spec.universe.iter().any(|u| *u == s.symbol))
        .collect();
    if eligible.len() < spec.size {
        return Err(SelectionError::TooFewScores {
            size: spec.size,
            available: eligible.len(),
        });
    }
    eligible.sort_by(|a, b| rank_order(a, b));
    Ok(eligible
        .into_iter()
        .take(spec.size)
        .enumerate()
        .map(|(i, s)| BasketEntry {
            symbol: s.symbol.clone(),
            r: s.r,
            rank: i + 1,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn score(sym: &str, r: f64) -> CorrelationScore {
        CorrelationScore {
            symbol: sym.to_string(),
            r,
            window: 10,
            degenerate: false,
        }
    }

    #[test]
    fn perfect_and_inverse() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(pearson(&x, &x).unwrap().r, 1.0);
        assert_eq!(pearson(&x, &neg).unwrap().r, -1.0);
    }

    #[test]
    fn small_fixture_against_closed_form() {
        // Means 2.5 and 2.75; sxy = 6.5, sxx = 5, syy = 8.75.
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 5.0]).unwrap().r;
        let expected = 6.5 / libm::sqrt(5.0 * 8.75);
        assert!((r - expected).abs() < 1e-14);
    }

    #[test]
    fn contract_violations() {
        assert!(matches!(pearson(&[1.0, 2.0], &[1.0, 2.0]), Err(SelectionError::TooShort(2))));
        assert!(matches!(
            pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0]),
            Err(SelectionError::LengthMismatch { .. })
        ));
        let flat = pearson(&[1.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(flat, Correlation { r: 0.0, degenerate: true });
    }

    #[test]
    fn scoring_skips_missing_data() {
        let good = [0.1, 0.2, 0.3, 0.4];
        let bad = [f64::NAN, 0.2, 0.3, 0.4];
        let pairs = [
            TracePair {
                symbol: "AAA",
                predicted: &good,
                realized: &good,
            },
            TracePair {
                symbol: "BBB",
                predicted: &good,
                realized: &bad,
            },
            TracePair {
                symbol: "CCC",
                predicted: &good[..2],
                realized: &good[..2],
            },
        ];
        let out = score_universe(&pairs, 4).unwrap();
        assert_eq!(out.scores.len(), 1);
        assert_eq!(out.scores[0].r, 1.0);
        assert_eq!(out.skipped.iter().map(|s| s.symbol.as_str()).collect::<Vec<_>>(), ["BBB", "CCC"]);
        // The window only sees the last three points, so an early gap is harmless.
        let out = score_universe(&pairs[1..2], 3).unwrap();
        assert!(out.skipped.is_empty() && out.scores.len() == 1);
    }

    #[test]
    fn ties_break_lexicographically() {
        let scores = vec![score("D", 0.5), score("B", 0.5), score("C", 0.5), score("A", 0.5)];
        let spec = BasketSpec::new(vec!["A".into(), "B".into(), "C".into(), "D".into()], 2).unwrap();
        let b = select_basket(&scores, &spec).unwrap();
        assert_eq!(b.iter().map(|e| e.symbol.as_str()).collect::<Vec<_>>(), ["A", "B"]);
        assert_eq!(b.iter().map(|e| e.rank).collect::<Vec<_>>(), [1, 2]);
    }

    #[test]
    fn basket_preconditions() {
        assert!(BasketSpec::new(vec!["A".into()], 2).is_err());
        let spec = BasketSpec::new(vec!["A".into(), "B".into()], 2).unwrap();
        assert!(matches!(
            select_basket(&[score("A", 0.1)], &spec),
            Err(SelectionError::TooFewScores { size: 2, available: 1 })
        ));
    }
}
