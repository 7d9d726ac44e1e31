//! Sample-cleaning rules applied after row-level validation: bot removal,
//! sparse-discussion and long-suspension stock filters, and the optional
//! index-membership churn filter.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use chrono::NaiveDate;
use core::fmt;

use crate::data::Post;
use crate::time::TradingCalendar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CleanError {
    /// The sample period contains no slots, so the sparse ratio is undefined.
    EmptySample,
}

impl fmt::Display for CleanError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CleanError::EmptySample => f.write_str("sample period contains no slots"),
        }
    }
}

impl core::error::Error for CleanError {}

/// Drop posts authored by known bot accounts, preserving order.
pub fn filter_bot_posts(posts: Vec<Post>, bot_ids: &BTreeSet<String>) -> Vec<Post> {
    posts
        .into_iter()
        .filter(|p| !bot_ids.contains(&p.author_id))
        .collect()
}

/// Stocks surviving the sparse-discussion filter.
///
/// `nonempty_slots` gives, per stock, the number of slots in the sample with
/// at least one post. A stock survives iff its share of empty slots is at
/// most 10% of `total_slots` (removal requires strictly more than 10%).
pub fn sparse_survivors(
    nonempty_slots: &BTreeMap<String, u64>,
    total_slots: u64,
) -> Result<BTreeSet<String>, CleanError> {
    if total_slots == 0 {
        return Err(CleanError::EmptySample);
    }
    Ok(nonempty_slots
        .iter()
        .filter(|(_, &nonempty)| {
            let empty = total_slots.saturating_sub(nonempty);
            // integer form of empty/total <= 0.10
            empty * 10 <= total_slots
        })
        .map(|(stock, _)| stock.clone())
        .collect())
}

/// Stocks surviving the suspension filter.
///
/// `active_days` gives, per stock, the trading dates with at least one tick.
/// A calendar day inside the stock's listed span (first to last active day)
/// with zero ticks counts as one suspension day; a stock is removed iff its
/// cumulative suspension days strictly exceed `max_suspension_days`. Stocks
/// with no active days at all are removed.
pub fn suspension_survivors(
    active_days: &BTreeMap<String, BTreeSet<NaiveDate>>,
    calendar: &TradingCalendar,
    max_suspension_days: u32,
) -> BTreeSet<String> {
    active_days
        .iter()
        .filter(|(_, days)| {
            let (Some(first), Some(last)) = (days.iter().next(), days.iter().next_back()) else {
                return false;
            };
            let span = calendar.days_between(*first, *last).len() as u64;
            let suspended = span.saturating_sub(days.len() as u64);
            suspended <= max_suspension_days as u64
        })
        .map(|(stock, _)| stock.clone())
        .collect()
}

/// Stocks surviving the index-membership churn filter ("index effect").
///
/// `membership_events` counts, per stock, how many times the stock entered or
/// left an index constituent list during the sample; more than `max_events`
/// removes the stock. Every candidate stock must have an entry (zero for no
/// events).
pub fn index_effect_survivors(
    membership_events: &BTreeMap<String, u32>,
    max_events: u32,
) -> BTreeSet<String> {
    membership_events
        .iter()
        .filter(|(_, &events)| events <= max_events)
        .map(|(stock, _)| stock.clone())
        .collect()
}
