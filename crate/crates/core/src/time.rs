//! Intraday hour slots and the trading calendar.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use chrono::{NaiveDate, NaiveTime, Timelike};
use core::fmt;

/// One of the four intraday buckets of a trading day:
/// 09:30-10:30, 10:30-11:30, 13:00-14:00, 14:00-15:00.
///
/// Buckets are half-open `[start, end)` except the last, which is closed at
/// 15:00 so the closing print is counted exactly once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HourSlot {
    S1,
    S2,
    S3,
    S4,
}

impl HourSlot {
    pub const ALL: [HourSlot; 4] = [HourSlot::S1, HourSlot::S2, HourSlot::S3, HourSlot::S4];

    /// 1-based position within the trading day.
    pub fn index(self) -> u8 {
        match self {
            HourSlot::S1 => 1,
            HourSlot::S2 => 2,
            HourSlot::S3 => 3,
            HourSlot::S4 => 4,
        }
    }

    pub fn from_index(index: u8) -> Option<HourSlot> {
        match index {
            1 => Some(HourSlot::S1),
            2 => Some(HourSlot::S2),
            3 => Some(HourSlot::S3),
            4 => Some(HourSlot::S4),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            HourSlot::S1 => "S1",
            HourSlot::S2 => "S2",
            HourSlot::S3 => "S3",
            HourSlot::S4 => "S4",
        }
    }

    pub fn parse_label(s: &str) -> Option<HourSlot> {
        match s {
            "S1" => Some(HourSlot::S1),
            "S2" => Some(HourSlot::S2),
            "S3" => Some(HourSlot::S3),
            "S4" => Some(HourSlot::S4),
            _ => None,
        }
    }

    /// The preceding slot of the same trading day.
    pub fn prev(self) -> Option<HourSlot> {
        HourSlot::from_index(self.index() - 1)
    }
}

impl fmt::Display for HourSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

const S1_START: u32 = 9 * 3600 + 30 * 60;
const S2_START: u32 = 10 * 3600 + 30 * 60;
const S2_END: u32 = 11 * 3600 + 30 * 60;
const S3_START: u32 = 13 * 3600;
const S4_START: u32 = 14 * 3600;
const S4_END: u32 = 15 * 3600;

/// Map a time of day to its hour slot, or `None` when the time falls outside
/// the trading session (pre-open, lunch break, after close).
pub fn assign_slot(t: NaiveTime) -> Option<HourSlot> {
    let secs = t.num_seconds_from_midnight();
    if secs >= S1_START && secs < S2_START {
        Some(HourSlot::S1)
    } else if secs >= S2_START && secs < S2_END {
        Some(HourSlot::S2)
    } else if secs >= S3_START && secs < S4_START {
        Some(HourSlot::S3)
    } else if secs >= S4_START && secs < S4_END {
        Some(HourSlot::S4)
    } else if secs == S4_END && t.nanosecond() == 0 {
        // the 15:00:00 closing print belongs to S4
        Some(HourSlot::S4)
    } else {
        None
    }
}

/// A `(date, slot)` key identifying one intraday bucket of one trading day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SlotKey {
    pub date: NaiveDate,
    pub slot: HourSlot,
}

impl SlotKey {
    pub fn new(date: NaiveDate, slot: HourSlot) -> SlotKey {
        SlotKey { date, slot }
    }
}

impl fmt::Display for SlotKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.date, self.slot)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalendarError {
    Empty,
}

impl fmt::Display for CalendarError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CalendarError::Empty => f.write_str("trading calendar is empty"),
        }
    }
}

impl core::error::Error for CalendarError {}

/// The ordered set of trading dates defining the sample period.
#[derive(Debug, Clone)]
pub struct TradingCalendar {
    days: Vec<NaiveDate>,
    index: BTreeMap<NaiveDate, u32>,
}

impl TradingCalendar {
    pub fn new(mut days: Vec<NaiveDate>) -> Result<TradingCalendar, CalendarError> {
        days.sort_unstable();
        days.dedup();
        if days.is_empty() {
            return Err(CalendarError::Empty);
        }
        let index = days
            .iter()
            .enumerate()
            .map(|(i, d)| (*d, i as u32))
            .collect();
        Ok(TradingCalendar { days, index })
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.index.contains_key(&date)
    }

    pub fn day_index(&self, date: NaiveDate) -> Option<u32> {
        self.index.get(&date).copied()
    }

    pub fn days(&self) -> &[NaiveDate] {
        &self.days
    }

    /// Number of hour slots in the whole sample period.
    pub fn total_slots(&self) -> u64 {
        self.days.len() as u64 * HourSlot::ALL.len() as u64
    }

    /// Trading dates in `[from, to]`, inclusive on both ends.
    pub fn days_between(&self, from: NaiveDate, to: NaiveDate) -> &[NaiveDate] {
        let lo = self.days.partition_point(|d| *d < from);
        let hi = self.days.partition_point(|d| *d <= to);
        &self.days[lo..hi]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(h: u32, m: u32, s: u32) -> NaiveTime {
        NaiveTime::from_hms_opt(h, m, s).unwrap()
    }

    #[test]
    fn slot_boundaries() {
        assert_eq!(assign_slot(t(9, 45, 0)), Some(HourSlot::S1));
        assert_eq!(assign_slot(t(9, 30, 0)), Some(HourSlot::S1));
        assert_eq!(assign_slot(t(10, 30, 0)), Some(HourSlot::S2));
        assert_eq!(assign_slot(t(11, 29, 59)), Some(HourSlot::S2));
        assert_eq!(assign_slot(t(11, 30, 0)), None);
        assert_eq!(assign_slot(t(12, 15, 0)), None);
        assert_eq!(assign_slot(t(13, 0, 0)), Some(HourSlot::S3));
        assert_eq!(assign_slot(t(14, 0, 0)), Some(HourSlot::S4));
        assert_eq!(assign_slot(t(15, 0, 0)), Some(HourSlot::S4));
        assert_eq!(assign_slot(t(15, 0, 1)), None);
        assert_eq!(assign_slot(t(9, 15, 0)), None);
        assert_eq!(assign_slot(t(9, 25, 0)), None);
    }

    #[test]
    fn session_partition() {
        // every in-session second maps to exactly one slot, everything else to none
        for secs in 0..86_400u32 {
            let time = NaiveTime::from_num_seconds_from_midnight_opt(secs, 0).unwrap();
            let in_session = (S1_START..S2_END).contains(&secs)
                || (S3_START..=S4_END).contains(&secs);
            assert_eq!(assign_slot(time).is_some(), in_session, "at {secs}");
        }
    }

    #[test]
    fn calendar_lookup() {
        let d = |s: &str| s.parse::<NaiveDate>().unwrap();
        let cal = TradingCalendar::new(vec![
            d("2020-03-03"),
            d("2020-03-02"),
            d("2020-03-02"),
            d("2020-03-04"),
        ])
        .unwrap();
        assert_eq!(cal.len(), 3);
        assert_eq!(cal.total_slots(), 12);
        assert_eq!(cal.day_index(d("2020-03-03")), Some(1));
        assert!(!cal.contains(d("2020-03-01")));
        assert_eq!(cal.days_between(d("2020-03-03"), d("2020-03-04")).len(), 2);
        assert!(TradingCalendar::new(Vec::new()).is_err());
    }
}
