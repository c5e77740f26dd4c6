use alloc::vec::Vec;

use super::{Bar, CleaningPolicy, DataError, GapPolicy, Series, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Weekday {
    Mon,
    Tue,
    Wed,
    Thu,
    Fri,
    Sat,
    Sun,
}

impl Weekday {
    pub(crate) fn from_monday_index(i: u8) -> Self {
        match i {
            0 => Weekday::Mon,
            1 => Weekday::Tue,
            2 => Weekday::Wed,
            3 => Weekday::Thu,
            4 => Weekday::Fri,
            5 => Weekday::Sat,
            _ => Weekday::Sun,
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

/// Daily trading window in UTC, `[session_open, session_close)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionCalendar {
    session_open: u32,
    session_close: u32,
    trading_days: u8,
}

impl SessionCalendar {
    /// `open` and `close` are seconds after midnight UTC.
    pub fn new(open: u32, close: u32, days: &[Weekday]) -> Result<Self, DataError> {
        if open >= close {
            return Err(DataError::InvalidCalendar("session_open must precede session_close"));
        }
        if close > 86_400 {
            return Err(DataError::InvalidCalendar("session_close beyond end of day"));
        }
        let trading_days = days.iter().fold(0u8, |m, d| m | d.bit());
        Ok(Self {
            session_open: open,
            session_close: close,
            trading_days,
        })
    }

    /// 08:00 to 16:30 UTC, Monday to Friday.
    pub fn london_cash() -> Self {
        use Weekday::*;
        Self::new(8 * 3600, 16 * 3600 + 1800, &[Mon, Tue, Wed, Thu, Fri]).expect("static calendar")
    }

    pub fn session_open(&self) -> u32 {
        self.session_open
    }

    pub fn session_close(&self) -> u32 {
        self.session_close
    }

    pub fn is_trading_day(&self, day: Weekday) -> bool {
        self.trading_days & day.bit() != 0
    }

    pub fn trading_days(&self) -> Vec<Weekday> {
        (0..7)
            .map(Weekday::from_monday_index)
            .filter(|d| self.is_trading_day(*d))
            .collect()
    }

    pub fn in_session(&self, ts: Timestamp) -> bool {
        let tod = ts.time_of_day();
        self.is_trading_day(ts.weekday()) && tod >= self.session_open && tod < self.session_close
    }

    /// Identifies the session (or out-of-session stretch) a bar falls in.
    pub fn session_key(&self, ts: Timestamp) -> (i64, bool) {
        (ts.day_index(), self.in_session(ts))
    }
}

/// Output of [`mark_session_gaps`]. `discontinuities` holds the index of
/// the first bar after each joined session boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub series: Series,
    pub discontinuities: Vec<usize>,
}

/// Splits or joins a series at session boundaries according to
/// `policy.gap_policy`.
pub fn mark_session_gaps(series: &Series, calendar: &SessionCalendar, policy: &CleaningPolicy) -> Vec<Segment> {
    if series.is_empty() {
        return Vec::new();
    }
    let bars: Vec<Bar> = match policy.gap_policy {
        GapPolicy::DropOvernight => series
            .bars()
            .iter()
            .copied()
            .filter(|b| calendar.in_session(b.timestamp))
            .collect(),
        _ => series.bars().to_vec(),
    };
    if bars.is_empty() {
        return Vec::new();
    }
    let boundaries: Vec<usize> = (1..bars.len())
        .filter(|&i| calendar.session_key(bars[i].timestamp) != calendar.session_key(bars[i - 1].timestamp))
        .collect();
    match policy.gap_policy {
        GapPolicy::SplitSessions => {
            let mut segments = Vec::with_capacity(boundaries.len() + 1);
            let mut start = 0;
            for end in boundaries.iter().copied().chain(core::iter::once(bars.len())) {
                segments.push(Segment {
                    series: series.with_bars(bars[start..end].to_vec()),
                    discontinuities: Vec::new(),
                });
                start = end;
            }
            segments
        }
        GapPolicy::CarryForward | GapPolicy::DropOvernight => alloc::vec![Segment {
            series: series.with_bars(bars),
            discontinuities: boundaries,
        }],
    }
}
