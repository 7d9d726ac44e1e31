//! Raw event records flowing into the pipeline.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use chrono::{NaiveDate, NaiveDateTime};
use core::fmt;

/// One forum message, already validated against the trading session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Post {
    pub stock_id: String,
    pub posted_at: NaiveDateTime,
    pub author_id: String,
    pub text: String,
}

/// One executed trade.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeTick {
    pub stock_id: String,
    pub traded_at: NaiveDateTime,
    pub price: f64,
    pub volume: u64,
}

/// Shares outstanding effective from a date onward.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharesOutstanding {
    pub stock_id: String,
    pub effective_date: NaiveDate,
    pub shares: u64,
}

/// Per-stock daily control variables and float capitalization.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyFundamentals {
    pub stock_id: String,
    pub date: NaiveDate,
    pub pb: f64,
    pub market_risk_premium: f64,
    pub market_return: f64,
    pub float_cap: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SharesError {
    NonPositiveShares { stock_id: String },
    NonIncreasingDates { stock_id: String },
}

impl fmt::Display for SharesError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SharesError::NonPositiveShares { stock_id } => {
                write!(f, "shares outstanding must be positive (stock {stock_id})")
            }
            SharesError::NonIncreasingDates { stock_id } => {
                write!(
                    f,
                    "effective dates must be strictly increasing per stock (stock {stock_id})"
                )
            }
        }
    }
}

impl core::error::Error for SharesError {}

/// Per-stock schedule resolving shares outstanding on any date.
#[derive(Debug, Clone, Default)]
pub struct SharesSchedule {
    by_stock: BTreeMap<String, Vec<(NaiveDate, u64)>>,
}

impl SharesSchedule {
    /// Build from rows; rows may arrive in any order but per stock the
    /// effective dates must be strictly increasing once sorted (no duplicates).
    pub fn new(rows: Vec<SharesOutstanding>) -> Result<SharesSchedule, SharesError> {
        let mut by_stock: BTreeMap<String, Vec<(NaiveDate, u64)>> = BTreeMap::new();
        for row in rows {
            if row.shares == 0 {
                return Err(SharesError::NonPositiveShares {
                    stock_id: row.stock_id,
                });
            }
            by_stock
                .entry(row.stock_id)
                .or_default()
                .push((row.effective_date, row.shares));
        }
        for (stock_id, entries) in &mut by_stock {
            entries.sort_unstable_by_key(|(d, _)| *d);
            if entries.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(SharesError::NonIncreasingDates {
                    stock_id: stock_id.clone(),
                });
            }
        }
        Ok(SharesSchedule { by_stock })
    }

    /// Shares effective on `date`: the latest entry with effective date <= `date`.
    pub fn shares_on(&self, stock_id: &str, date: NaiveDate) -> Option<u64> {
        let entries = self.by_stock.get(stock_id)?;
        let idx = entries.partition_point(|(d, _)| *d <= date);
        if idx == 0 {
            None
        } else {
            Some(entries[idx - 1].1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn schedule_resolves_latest_effective_date() {
        let sched = SharesSchedule::new(vec![
            SharesOutstanding {
                stock_id: "600000".into(),
                effective_date: d("2020-01-01"),
                shares: 1_000,
            },
            SharesOutstanding {
                stock_id: "600000".into(),
                effective_date: d("2020-06-01"),
                shares: 2_000,
            },
        ])
        .unwrap();
        assert_eq!(sched.shares_on("600000", d("2020-03-01")), Some(1_000));
        assert_eq!(sched.shares_on("600000", d("2020-06-01")), Some(2_000));
        assert_eq!(sched.shares_on("600000", d("2019-12-31")), None);
        assert_eq!(sched.shares_on("000001", d("2020-03-01")), None);
    }

    #[test]
    fn schedule_rejects_bad_rows() {
        assert!(SharesSchedule::new(vec![SharesOutstanding {
            stock_id: "600000".into(),
            effective_date: d("2020-01-01"),
            shares: 0,
        }])
        .is_err());
        assert!(SharesSchedule::new(vec![
            SharesOutstanding {
                stock_id: "600000".into(),
                effective_date: d("2020-01-01"),
                shares: 10,
            },
            SharesOutstanding {
                stock_id: "600000".into(),
                effective_date: d("2020-01-01"),
                shares: 20,
            },
        ])
        .is_err());
    }
}
