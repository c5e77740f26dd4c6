//! Imitation long/short basket portfolio with daily reselection.
//!
//! Each day every symbol is scored from its forecaster's predicted and
//! realized traces, the top of the ranking forms the basket and the basket
//! is split by rank into sub-baskets that each trade their own capital.
//! Positions live while their symbol stays in the same sub-basket and are
//! closed at the close of the day it drops out. Fills are at the daily
//! close with no costs.

mod report;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::selection::{score_universe, select_basket, BasketEntry, BasketSpec, SelectionError, SkipNote, TracePair};

pub use report::{parse_report_csv, render_report, RenderedReport, ReportRow, REPORT_CSV_HEADER, REPORT_HEADER};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BacktestError {
    #[error("invalid backtest configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("universe has {available} days, test needs {needed}")]
    InsufficientDays { needed: usize, available: usize },
    #[error("universe rows must all have the same number of days")]
    RaggedUniverse,
    #[error("no usable price for open position {symbol} on day {day}")]
    MissingPrice { symbol: String, day: usize },
    #[error(transparent)]
    Selection(#[from] SelectionError),
}

/// Daily closes per symbol; `NaN` marks a missing day.
#[derive(Debug, Clone, PartialEq)]
pub struct Universe {
    symbols: Vec<String>,
    closes: Vec<Vec<f64>>,
}

impl Universe {
    pub fn new(symbols: Vec<String>, closes: Vec<Vec<f64>>) -> Result<Self, BacktestError> {
        if symbols.len() != closes.len() {
            return Err(BacktestError::RaggedUniverse);
        }
        let days = closes.first().map_or(0, Vec::len);
        if closes.iter().any(|c| c.len() != days) {
            return Err(BacktestError::RaggedUniverse);
        }
        Ok(Self { symbols, closes })
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn closes(&self, symbol: usize) -> &[f64] {
        &self.closes[symbol]
    }

    pub fn days(&self) -> usize {
        self.closes.first().map_or(0, Vec::len)
    }

    pub fn price(&self, symbol: usize, day: usize) -> Option<f64> {
        let p = *self.closes.get(symbol)?.get(day)?;
        (p.is_finite() && p > 0.0).then_some(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub predicted: Vec<f64>,
    pub realized: Vec<f64>,
    /// Predicted cumulative return over the horizon; its sign sets direction.
    pub expected_return: f64,
}

pub trait Forecaster {
    /// Forecast for `symbol` made at the close of `day`. `history` holds that
    /// symbol's closes up to and including `day`.
    fn forecast(&mut self, symbol: usize, day: usize, history: &[f64]) -> Option<Forecast>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Direction {
    Long,
    Short,
}

impl Direction {
    pub fn from_expected_return(r: f64) -> Self {
        if r < 0.0 {
            Direction::Short
        } else {
            Direction::Long
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Direction::Long => "long",
            Direction::Short => "short",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Position {
    pub symbol: String,
    pub direction: Direction,
    pub quantity: f64,
    pub entry_price: f64,
    pub entry_day: usize,
    /// Price at which profit and loss was last booked.
    pub mark: f64,
}

impl Position {
    /// Gain since the last mark if the price is now `price`.
    pub fn pnl_to(&self, price: f64) -> f64 {
        match self.direction {
            Direction::Long => self.quantity * (price - self.mark),
            Direction::Short => self.quantity * (self.mark - price),
        }
    }

    /// Equity tied up by the position at its mark. A long ties up its
    /// market value; a short ties up its entry collateral plus any gain.
    pub fn committed(&self) -> f64 {
        match self.direction {
            Direction::Long => self.quantity * self.mark,
            Direction::Short => self.quantity * (2.0 * self.entry_price - self.mark),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioState {
    /// Total valuation as of the last mark.
    pub equity: f64,
    pub positions: Vec<Position>,
    pub day: usize,
}

impl PortfolioState {
    pub fn new(equity: f64) -> Self {
        Self {
            equity,
            positions: Vec::new(),
            day: 0,
        }
    }

    pub fn holds(&self, symbol: &str) -> bool {
        self.positions.iter().any(|p| p.symbol == symbol)
    }

    /// Equity available to open new positions.
    pub fn free_cash(&self) -> f64 {
        self.equity - self.positions.iter().map(Position::committed).sum::<f64>()
    }
}

/// Books every open position's move to `price_of(symbol)` and returns the
/// new valuation. Equity changes only by price moves, so an unchanged
/// market leaves it bit-for-bit as it was.
pub fn mark_to_market<F>(state: &mut PortfolioState, price_of: F) -> Result<f64, BacktestError>
where
    F: Fn(&str) -> Option<f64>,
{
    let mut pnl = 0.0;
    for p in &mut state.positions {
        let price = price_of(&p.symbol).ok_or_else(|| BacktestError::MissingPrice {
            symbol: p.symbol.clone(),
            day: state.day,
        })?;
        pnl += p.pnl_to(price);
        p.mark = price;
    }
    state.equity += pnl;
    Ok(state.equity)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestConfig {
    pub initial_capital: f64,
    pub days: usize,
    pub basket_size: usize,
    /// Ranks `1..=split` form the first sub-basket, the rest the second.
    pub split: usize,
    /// Trailing trace length used for correlation scoring.
    pub score_window: usize,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            initial_capital: 1000.0,
            days: 41,
            basket_size: 20,
            split: 10,
            score_window: 20,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<(), BacktestError> {
        if self.days == 0 {
            return Err(BacktestError::InvalidConfig("days must be at least 1"));
        }
        if self.basket_size == 0 {
            return Err(BacktestError::InvalidConfig("basket size must be at least 1"));
        }
        if self.split == 0 || self.split > self.basket_size {
            return Err(BacktestError::InvalidConfig("split must lie within the basket"));
        }
        if !(self.initial_capital > 0.0 && self.initial_capital.is_finite()) {
            return Err(BacktestError::InvalidConfig("initial capital must be positive"));
        }
        if self.score_window < 3 {
            return Err(BacktestError::InvalidConfig("score window must be at least 3"));
        }
        Ok(())
    }

    /// Inclusive rank ranges of the sub-baskets.
    pub fn sub_baskets(&self) -> Vec<(usize, usize)> {
        let mut out = alloc::vec![(1, self.split)];
        if self.split < self.basket_size {
            out.push((self.split + 1, self.basket_size));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TradeAction {
    Enter,
    Exit,
}

impl TradeAction {
    pub fn label(self) -> &'static str {
        match self {
            TradeAction::Enter => "enter",
            TradeAction::Exit => "exit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trade {
    /// 1-based test day.
    pub day: usize,
    pub sub_basket: usize,
    pub symbol: String,
    pub action: TradeAction,
    pub direction: Direction,
    pub quantity: f64,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailyValuation {
    /// 1-based test day.
    pub day: usize,
    /// One valuation per sub-basket after that day's trades.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport {
    pub rows: Vec<ReportRow>,
    pub trace: Vec<DailyValuation>,
    pub trades: Vec<Trade>,
    pub selections: Vec<Vec<BasketEntry>>,
    pub skipped: Vec<(usize, SkipNote)>,
    pub final_states: Vec<PortfolioState>,
}

/// Runs the last `cfg.days` days of `universe`; earlier days are warm-up.
pub fn run_backtest<F: Forecaster>(
    universe: &Universe,
    forecaster: &mut F,
    cfg: &BacktestConfig,
) -> Result<BacktestReport, BacktestError> {
    cfg.validate()?;
    if universe.days() < cfg.days {
        return Err(BacktestError::InsufficientDays {
            needed: cfg.days,
            available: universe.days(),
        });
    }
    let index: BTreeMap<&str, usize> = universe
        .symbols()
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let ranges = cfg.sub_baskets();
    let mut states: Vec<PortfolioState> = ranges.iter().map(|_| PortfolioState::new(cfg.initial_capital)).collect();
    let first_day = universe.days() - cfg.days;
    let mut report = BacktestReport {
        rows: Vec::new(),
        trace: Vec::with_capacity(cfg.days),
        trades: Vec::new(),
        selections: Vec::with_capacity(cfg.days),
        skipped: Vec::new(),
        final_states: Vec::new(),
    };

    for day in first_day..universe.days() {
        let test_day = day - first_day + 1;
        let forecasts: Vec<Option<Forecast>> = (0..universe.symbols().len())
            .map(|s| forecaster.forecast(s, day, &universe.closes(s)[..=day]))
            .collect();
        let pairs: Vec<TracePair<'_>> = forecasts
            .iter()
            .enumerate()
            .filter_map(|(s, f)| {
                f.as_ref().map(|f| TracePair {
                    symbol: &universe.symbols()[s],
                    predicted: &f.predicted,
                    realized: &f.realized,
                })
            })
            .collect();
        let scored = score_universe(&pairs, cfg.score_window)?;
        report.skipped.extend(scored.skipped.into_iter().map(|n| (test_day, n)));
        // Tradeable scores only: a symbol without a price today cannot be entered.
        let scores: Vec<_> = scored
            .scores
            .into_iter()
            .filter(|s| universe.price(index[s.symbol.as_str()], day).is_some())
            .collect();
        let basket = if scores.is_empty() {
            Vec::new()
        } else {
            let spec = BasketSpec::new(universe.symbols().to_vec(), cfg.basket_size.min(scores.len()))?;
            select_basket(&scores, &spec)?
        };

        let price_of = |sym: &str| universe.price(index[sym], day);
        let mut values = Vec::with_capacity(ranges.len());
        for (sub, (&(lo, hi), state)) in ranges.iter().zip(states.iter_mut()).enumerate() {
            state.day = test_day;
            mark_to_market(state, price_of)?;
            let members: Vec<&BasketEntry> = basket.iter().filter(|e| (lo..=hi).contains(&e.rank)).collect();
            let mut kept = Vec::with_capacity(state.positions.len());
            for pos in core::mem::take(&mut state.positions) {
                if members.iter().any(|m| m.symbol == pos.symbol) {
                    kept.push(pos);
                    continue;
                }
                let price = pos.mark;
                report.trades.push(Trade {
                    day: test_day,
                    sub_basket: sub,
                    symbol: pos.symbol.clone(),
                    action: TradeAction::Exit,
                    direction: pos.direction,
                    quantity: pos.quantity,
                    price,
                });
            }
            state.positions = kept;
            let slots = hi - lo + 1;
            for m in &members {
                if state.holds(&m.symbol) {
                    continue;
                }
                let open_slots = slots - state.positions.len();
                let price = price_of(&m.symbol).expect("basket members are priced");
                let capital = state.free_cash() / open_slots as f64;
                let quantity = capital / price;
                let direction = Direction::from_expected_return(
                    forecasts[index[m.symbol.as_str()]].as_ref().map_or(0.0, |f| f.expected_return),
                );
                report.trades.push(Trade {
                    day: test_day,
                    sub_basket: sub,
                    symbol: m.symbol.clone(),
                    action: TradeAction::Enter,
                    direction,
                    quantity,
                    price,
                });
                let pos = Position {
                    symbol: m.symbol.clone(),
                    direction,
                    quantity,
                    entry_price: price,
                    entry_day: test_day,
                    mark: price,
                };
                state.positions.push(pos);
            }
            values.push(state.equity);
        }
        report.trace.push(DailyValuation { day: test_day, values });
        report.selections.push(basket);
    }

    report.rows = ranges
        .iter()
        .enumerate()
        .map(|(sub, &(lo, hi))| {
            let trace: Vec<f64> = report.trace.iter().map(|d| d.values[sub]).collect();
            ReportRow::from_trace(lo, hi, cfg.initial_capital, &trace)
        })
        .collect();
    report.final_states = states;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    /// Scores each symbol by a fixed preference and predicts a fixed direction.
    struct Fixed {
        r: Vec<f64>,
        expected: Vec<f64>,
    }

    impl Forecaster for Fixed {
        fn forecast(&mut self, symbol: usize, _day: usize, _history: &[f64]) -> Option<Forecast> {
            let base = [1.0, 2.0, 3.0, 4.0];
            let noise = [0.0, 0.0, 0.0, 1.0 - self.r[symbol]];
            Some(Forecast {
                predicted: base.to_vec(),
                realized: base.iter().zip(noise).map(|(b, n)| b + n * 10.0 * (b % 2.0)).collect(),
                expected_return: self.expected[symbol],
            })
        }
    }

    fn cfg(days: usize, basket: usize, split: usize) -> BacktestConfig {
        BacktestConfig {
            initial_capital: 1000.0,
            days,
            basket_size: basket,
            split,
            score_window: 4,
        }
    }

    #[test]
    fn mark_to_market_examples() {
        let mut s = PortfolioState::new(1000.0);
        assert_eq!(mark_to_market(&mut s, |_| None).unwrap(), 1000.0);
        s.positions.push(Position {
            symbol: "L".to_string(),
            direction: Direction::Long,
            quantity: 10.0,
            entry_price: 100.0,
            entry_day: 1,
            mark: 100.0,
        });
        assert_eq!(s.free_cash(), 0.0);
        assert_eq!(mark_to_market(&mut s, |_| Some(110.0)).unwrap(), 1100.0);
        assert_eq!(mark_to_market(&mut s, |_| Some(110.0)).unwrap(), 1100.0);
        let mut short = PortfolioState {
            equity: 1000.0,
            positions: vec![Position {
                symbol: "S".to_string(),
                direction: Direction::Short,
                quantity: 10.0,
                entry_price: 100.0,
                entry_day: 1,
                mark: 100.0,
            }],
            day: 1,
        };
        assert_eq!(mark_to_market(&mut short, |_| Some(90.0)).unwrap(), 1100.0);
        // Collateral and the open gain both stay with the position.
        assert_eq!(short.free_cash(), 0.0);
        assert!(matches!(mark_to_market(&mut short, |_| None), Err(BacktestError::MissingPrice { .. })));
    }

    #[test]
    fn single_symbol_long_gains_ten_percent() {
        let u = Universe::new(vec!["A".to_string()], vec![vec![100.0, 104.0, 110.0]]).unwrap();
        let mut f = Fixed {
            r: vec![1.0],
            expected: vec![0.01],
        };
        let rep = run_backtest(&u, &mut f, &cfg(3, 1, 1)).unwrap();
        assert_eq!(rep.rows.len(), 1);
        assert!((rep.rows[0].final_value - 1100.0).abs() < 1e-9);
        assert_eq!(rep.trades.len(), 1);
    }

    #[test]
    fn constant_prices_keep_capital() {
        let symbols: Vec<String> = (0..6).map(|i| alloc::format!("S{i}")).collect();
        let u = Universe::new(symbols, vec![vec![50.0; 10]; 6]).unwrap();
        let mut f = Fixed {
            r: vec![0.9, 0.1, 0.5, 0.7, 0.3, 0.2],
            expected: vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0],
        };
        let rep = run_backtest(&u, &mut f, &cfg(5, 4, 2)).unwrap();
        let text = render_report(&rep.rows);
        for row in &rep.rows {
            assert_eq!(row.final_value, 1000.0);
            assert_eq!(row.roi(), 0.0);
        }
        assert!(text.table.contains("\t0.00%\t"));
    }

    #[test]
    fn drop_out_exits_and_ranks_split() {
        let symbols: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
        let u = Universe::new(symbols, vec![vec![10.0, 11.0, 12.0], vec![20.0, 19.0, 18.0], vec![5.0; 3]]).unwrap();
        struct Rotating;
        impl Forecaster for Rotating {
            fn forecast(&mut self, symbol: usize, day: usize, _h: &[f64]) -> Option<Forecast> {
                // Day 0 prefers A, later days prefer B.
                let good = if day == 0 { 0 } else { 1 };
                let realized = if symbol == good { vec![1.0, 2.0, 3.0] } else { vec![3.0, 1.0, 2.0] };
                Some(Forecast {
                    predicted: vec![1.0, 2.0, 3.0],
                    realized,
                    expected_return: -0.5,
                })
            }
        }
        let c = BacktestConfig {
            score_window: 3,
            ..cfg(3, 1, 1)
        };
        let rep = run_backtest(&u, &mut Rotating, &c).unwrap();
        let actions: Vec<(usize, &str, TradeAction)> =
            rep.trades.iter().map(|t| (t.day, t.symbol.as_str(), t.action)).collect();
        assert_eq!(
            actions,
            [(1, "A", TradeAction::Enter), (2, "A", TradeAction::Exit), (2, "B", TradeAction::Enter)]
        );
        // Short A from 10 to 11 loses 10%; short B from 19 to 18 gains.
        let after_a = 1000.0 * (2.0 * 10.0 - 11.0) / 10.0;
        let expected = after_a / 19.0 * (2.0 * 19.0 - 18.0);
        assert!((rep.rows[0].final_value - expected).abs() < 1e-9);
    }

    #[test]
    fn config_checks() {
        assert!(cfg(0, 2, 1).validate().is_err());
        assert!(cfg(1, 2, 3).validate().is_err());
        assert_eq!(cfg(1, 20, 10).sub_baskets(), vec![(1, 10), (11, 20)]);
        let u = Universe::new(vec!["A".to_string()], vec![vec![1.0; 2]]).unwrap();
        let mut f = Fixed {
            r: vec![1.0],
            expected: vec![1.0],
        };
        assert!(matches!(
            run_backtest(&u, &mut f, &cfg(3, 1, 1)),
            Err(BacktestError::InsufficientDays { .. })
        ));
    }
}
