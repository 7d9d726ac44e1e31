//! Join of the sentiment index, excess-turnover metrics, regimes, tiers, and
//! controls into regression-ready rows.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use chrono::NaiveDate;
use core::fmt;

use crate::data::DailyFundamentals;
use crate::regimes::{cap_tier, CapTier, PhaseKind, TierThresholds};
use crate::time::HourSlot;

/// Key of one panel observation.
pub type StockSlotKey = (String, NaiveDate, HourSlot);

/// Excess-turnover values of one (stock, date, slot) under the default and
/// the alternative classification thresholds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EtRecord {
    pub et_all: Option<f64>,
    pub et_inst: Option<f64>,
    pub et_retail: Option<f64>,
    pub et_inst_alt: Option<f64>,
    pub et_retail_alt: Option<f64>,
}

/// One regression-ready observation. Slots are S2-S4 only; lag k is present
/// only when the slot index exceeds k.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelRow {
    pub stock_id: String,
    pub date: NaiveDate,
    pub slot: HourSlot,
    pub et: EtRecord,
    pub s_lag1: f64,
    pub s_lag2: Option<f64>,
    pub s_lag3: Option<f64>,
    pub pb: Option<f64>,
    pub market_risk_premium: Option<f64>,
    pub market_return: Option<f64>,
    pub regime: Option<PhaseKind>,
    pub tier: Option<CapTier>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PanelError {
    InvalidCap { stock_id: String, date: NaiveDate },
}

impl fmt::Display for PanelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PanelError::InvalidCap { stock_id, date } => {
                write!(f, "invalid float cap for {stock_id} on {date}")
            }
        }
    }
}

impl core::error::Error for PanelError {}

/// Build the panel.
///
/// One row is emitted per metrics key with slot in S2-S4 whose same-day lag-1
/// sentiment exists and which carries at least one excess-turnover value;
/// optional fields stay absent when their source is missing. Inputs are maps,
/// so duplicate keys have already been rejected upstream. `regime_of`
/// resolves the market phase governing a stock on a date.
pub fn build_panel(
    sentiment: &BTreeMap<StockSlotKey, f64>,
    metrics: &BTreeMap<StockSlotKey, EtRecord>,
    fundamentals: &BTreeMap<(String, NaiveDate), DailyFundamentals>,
    tier_thresholds: &TierThresholds,
    regime_of: impl Fn(&str, NaiveDate) -> Option<PhaseKind>,
) -> Result<Vec<PanelRow>, PanelError> {
    let mut rows = Vec::new();
    for ((stock_id, date, slot), et) in metrics {
        if slot.index() < 2 {
            continue;
        }
        if et.et_all.is_none()
            && et.et_inst.is_none()
            && et.et_retail.is_none()
            && et.et_inst_alt.is_none()
            && et.et_retail_alt.is_none()
        {
            continue;
        }
        let lag = |k: u8| -> Option<f64> {
            if slot.index() <= k {
                return None;
            }
            let lag_slot = HourSlot::from_index(slot.index() - k)?;
            sentiment
                .get(&(stock_id.clone(), *date, lag_slot))
                .copied()
        };
        let Some(s_lag1) = lag(1) else {
            continue;
        };
        let (pb, mrp, mret, tier) = match fundamentals.get(&(stock_id.clone(), *date)) {
            Some(f) => {
                let tier = cap_tier(f.float_cap, tier_thresholds).map_err(|_| {
                    PanelError::InvalidCap {
                        stock_id: stock_id.clone(),
                        date: *date,
                    }
                })?;
                (
                    Some(f.pb),
                    Some(f.market_risk_premium),
                    Some(f.market_return),
                    Some(tier),
                )
            }
            None => (None, None, None, None),
        };
        rows.push(PanelRow {
            stock_id: stock_id.clone(),
            date: *date,
            slot: *slot,
            et: *et,
            s_lag1,
            s_lag2: lag(2),
            s_lag3: lag(3),
            pb,
            market_risk_premium: mrp,
            market_return: mret,
            regime: regime_of(stock_id, *date),
            tier,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn key(stock: &str, day: u32, slot: HourSlot) -> StockSlotKey {
        (
            stock.to_string(),
            NaiveDate::from_ymd_opt(2020, 1, day).unwrap(),
            slot,
        )
    }

    fn et(v: f64) -> EtRecord {
        EtRecord {
            et_all: Some(v),
            et_inst: Some(v),
            et_retail: Some(v),
            et_inst_alt: Some(v),
            et_retail_alt: Some(v),
        }
    }

    #[test]
    fn lags_follow_slot_index() {
        let mut sentiment = BTreeMap::new();
        sentiment.insert(key("A", 2, HourSlot::S1), 0.1);
        sentiment.insert(key("A", 2, HourSlot::S2), 0.2);
        sentiment.insert(key("A", 2, HourSlot::S3), 0.3);
        let mut metrics = BTreeMap::new();
        metrics.insert(key("A", 2, HourSlot::S2), et(1.0));
        metrics.insert(key("A", 2, HourSlot::S4), et(2.0));
        let rows = build_panel(
            &sentiment,
            &metrics,
            &BTreeMap::new(),
            &TierThresholds::default(),
            |_, _| Some(PhaseKind::Bull),
        )
        .unwrap();
        assert_eq!(rows.len(), 2);
        // S2 row: lag1 = S1, lags 2 and 3 undefined
        assert_eq!(rows[0].slot, HourSlot::S2);
        assert_eq!(rows[0].s_lag1, 0.1);
        assert_eq!(rows[0].s_lag2, None);
        assert_eq!(rows[0].s_lag3, None);
        // S4 row: lag1 = S3, lag2 = S2, lag3 = S1
        assert_eq!(rows[1].slot, HourSlot::S4);
        assert_eq!(rows[1].s_lag1, 0.3);
        assert_eq!(rows[1].s_lag2, Some(0.2));
        assert_eq!(rows[1].s_lag3, Some(0.1));
        assert_eq!(rows[1].regime, Some(PhaseKind::Bull));
    }

    #[test]
    fn missing_lag1_sentiment_omits_row() {
        let mut sentiment = BTreeMap::new();
        // S1 has no signal, S2 does
        sentiment.insert(key("A", 2, HourSlot::S2), 0.2);
        let mut metrics = BTreeMap::new();
        metrics.insert(key("A", 2, HourSlot::S2), et(1.0));
        metrics.insert(key("A", 2, HourSlot::S3), et(1.0));
        let rows = build_panel(
            &sentiment,
            &metrics,
            &BTreeMap::new(),
            &TierThresholds::default(),
            |_, _| None,
        )
        .unwrap();
        // the S2 row is dropped (no S1 index); the S3 row survives via S2
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].slot, HourSlot::S3);
        assert_eq!(rows[0].regime, None);
    }

    #[test]
    fn s1_metrics_never_become_rows() {
        let mut sentiment = BTreeMap::new();
        sentiment.insert(key("A", 2, HourSlot::S1), 0.1);
        let mut metrics = BTreeMap::new();
        metrics.insert(key("A", 2, HourSlot::S1), et(1.0));
        let rows = build_panel(
            &sentiment,
            &metrics,
            &BTreeMap::new(),
            &TierThresholds::default(),
            |_, _| None,
        )
        .unwrap();
        assert!(rows.is_empty());
    }

    #[test]
    fn fundamentals_fill_controls_and_tier() {
        let mut sentiment = BTreeMap::new();
        sentiment.insert(key("A", 2, HourSlot::S1), 0.1);
        let mut metrics = BTreeMap::new();
        metrics.insert(key("A", 2, HourSlot::S2), et(1.0));
        let mut fundamentals = BTreeMap::new();
        fundamentals.insert(
            ("A".to_string(), NaiveDate::from_ymd_opt(2020, 1, 2).unwrap()),
            DailyFundamentals {
                stock_id: "A".to_string(),
                date: NaiveDate::from_ymd_opt(2020, 1, 2).unwrap(),
                pb: 2.5,
                market_risk_premium: 0.001,
                market_return: 0.002,
                float_cap: 5.0e10,
            },
        );
        let rows = build_panel(
            &sentiment,
            &metrics,
            &fundamentals,
            &TierThresholds::default(),
            |_, _| None,
        )
        .unwrap();
        assert_eq!(rows[0].pb, Some(2.5));
        assert_eq!(rows[0].tier, Some(CapTier::Mid));
    }
}
