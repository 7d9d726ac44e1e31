//! Slot turnover, excess turnover against a rolling baseline, and the
//! order-size split into institutional and retail flow.

use alloc::vec::Vec;
use core::fmt;

use crate::time::{HourSlot, SlotKey};

/// Order-size investor classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum InvestorClass {
    Institutional,
    Retail,
}

/// Thresholds of the order-size heuristic: a trade is institutional when its
/// amount strictly exceeds `amount` yuan or its share count strictly exceeds
/// `shares`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyThresholds {
    pub amount: f64,
    pub shares: u64,
}

impl Default for ClassifyThresholds {
    fn default() -> Self {
        ClassifyThresholds {
            amount: 200_000.0,
            shares: 100_000,
        }
    }
}

pub fn classify_trade(price: f64, volume: u64, thresholds: &ClassifyThresholds) -> InvestorClass {
    if price * volume as f64 > thresholds.amount || volume > thresholds.shares {
        InvestorClass::Institutional
    } else {
        InvestorClass::Retail
    }
}

/// Numerator choice for the turnover ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TurnoverVariant {
    /// Value traded over shares outstanding (the default).
    ValueOverShares,
    /// Share volume over shares outstanding (classical turnover).
    VolumeOverShares,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MicroError {
    NonPositiveShares,
    InvalidWindow,
    UnsortedSeries,
}

impl fmt::Display for MicroError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MicroError::NonPositiveShares => f.write_str("shares outstanding must be positive"),
            MicroError::InvalidWindow => f.write_str("baseline window must be at least 1"),
            MicroError::UnsortedSeries => f.write_str("slot series must be strictly increasing"),
        }
    }
}

impl core::error::Error for MicroError {}

/// Turnover of one (stock, slot), split by investor class.
///
/// `total` is defined as the sum of the class components, so class additivity
/// holds exactly.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SlotTurnover {
    pub total: f64,
    pub institutional: f64,
    pub retail: f64,
}

/// Compute slot turnover from the slot's ticks. Ticks contribute in the order
/// given, which callers keep at ascending trade time for reproducibility.
pub fn slot_turnover<I>(
    ticks: I,
    shares_outstanding: u64,
    thresholds: &ClassifyThresholds,
    variant: TurnoverVariant,
) -> Result<SlotTurnover, MicroError>
where
    I: IntoIterator<Item = (f64, u64)>,
{
    if shares_outstanding == 0 {
        return Err(MicroError::NonPositiveShares);
    }
    let mut inst_sum = 0.0f64;
    let mut retail_sum = 0.0f64;
    for (price, volume) in ticks {
        let numer = match variant {
            TurnoverVariant::ValueOverShares => price * volume as f64,
            TurnoverVariant::VolumeOverShares => volume as f64,
        };
        match classify_trade(price, volume, thresholds) {
            InvestorClass::Institutional => inst_sum += numer,
            InvestorClass::Retail => retail_sum += numer,
        }
    }
    let shares = shares_outstanding as f64;
    let institutional = inst_sum / shares;
    let retail = retail_sum / shares;
    Ok(SlotTurnover {
        total: institutional + retail,
        institutional,
        retail,
    })
}

/// Baseline window for the excess-turnover ratio: up to `window` (M) prior
/// values, requiring at least `min_window` of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineConfig {
    pub window: u32,
    pub min_window: u32,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            window: 20,
            min_window: 10,
        }
    }
}

/// Excess turnover of one slot relative to its rolling baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcessTurnover {
    /// `(T - baseline_mean) / baseline_mean`; never below -1.
    pub value: f64,
    pub baseline_mean: f64,
    pub window_used: u32,
}

/// Excess turnover for `current` against `history` (most recent first).
///
/// Returns `Ok(None)` when the baseline is unavailable: fewer than
/// `min_window` history values, or a zero baseline mean.
pub fn excess_turnover(
    current: f64,
    history_recent_first: &[f64],
    config: &BaselineConfig,
) -> Result<Option<ExcessTurnover>, MicroError> {
    if config.window == 0 {
        return Err(MicroError::InvalidWindow);
    }
    let take = history_recent_first.len().min(config.window as usize);
    if (take as u32) < config.min_window.max(1) {
        return Ok(None);
    }
    let window = &history_recent_first[..take];
    let baseline_mean = window.iter().sum::<f64>() / take as f64;
    if baseline_mean <= 0.0 {
        return Ok(None);
    }
    Ok(Some(ExcessTurnover {
        value: (current - baseline_mean) / baseline_mean,
        baseline_mean,
        window_used: take as u32,
    }))
}

/// Which slots feed a slot's baseline history.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMode {
    /// Prior trading days, same slot of day (the default).
    SameSlot,
    /// The immediately preceding slots regardless of slot-of-day.
    AllSlots,
}

/// Per-slot excess turnover for the three turnover measures.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SlotExcess {
    pub total: Option<ExcessTurnover>,
    pub institutional: Option<ExcessTurnover>,
    pub retail: Option<ExcessTurnover>,
}

/// Roll the excess-turnover baseline over one stock's complete slot series.
///
/// `series` must cover every slot of the stock's span in strictly increasing
/// `SlotKey` order, with zero turnover recorded for inactive slots; gaps would
/// silently distort the baseline.
pub fn excess_series(
    series: &[(SlotKey, SlotTurnover)],
    mode: BaselineMode,
    config: &BaselineConfig,
) -> Result<Vec<(SlotKey, SlotExcess)>, MicroError> {
    if config.window == 0 {
        return Err(MicroError::InvalidWindow);
    }
    if series.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(MicroError::UnsortedSeries);
    }
    let window = config.window as usize;
    // recent-first history per measure; index 0..4 by slot for SameSlot mode,
    // a single shared history for AllSlots
    let buckets = match mode {
        BaselineMode::SameSlot => HourSlot::ALL.len(),
        BaselineMode::AllSlots => 1,
    };
    let mut totals: Vec<Vec<f64>> = alloc::vec![Vec::new(); buckets];
    let mut insts: Vec<Vec<f64>> = alloc::vec![Vec::new(); buckets];
    let mut retails: Vec<Vec<f64>> = alloc::vec![Vec::new(); buckets];

    let mut out = Vec::with_capacity(series.len());
    for (key, turnover) in series {
        let bucket = match mode {
            BaselineMode::SameSlot => (key.slot.index() - 1) as usize,
            BaselineMode::AllSlots => 0,
        };
        let excess = SlotExcess {
            total: excess_turnover(turnover.total, &totals[bucket], config)?,
            institutional: excess_turnover(turnover.institutional, &insts[bucket], config)?,
            retail: excess_turnover(turnover.retail, &retails[bucket], config)?,
        };
        out.push((*key, excess));
        push_recent(&mut totals[bucket], turnover.total, window);
        push_recent(&mut insts[bucket], turnover.institutional, window);
        push_recent(&mut retails[bucket], turnover.retail, window);
    }
    Ok(out)
}

fn push_recent(history: &mut Vec<f64>, value: f64, window: usize) {
    history.insert(0, value);
    history.truncate(window);
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    #[test]
    fn classification_examples() {
        let th = ClassifyThresholds::default();
        // amount 250_025 > 200_000
        assert_eq!(classify_trade(25.0, 10_001, &th), InvestorClass::Institutional);
        // amount 150_000, shares below both thresholds
        assert_eq!(classify_trade(3.0, 50_000, &th), InvestorClass::Retail);
        // exactly at both thresholds stays retail (strict "exceeds")
        assert_eq!(classify_trade(2.0, 100_000, &th), InvestorClass::Retail);
        assert_eq!(classify_trade(2.0, 100_001, &th), InvestorClass::Institutional);
    }

    #[test]
    fn raising_amount_threshold_never_promotes_to_institutional() {
        let low = ClassifyThresholds {
            amount: 200_000.0,
            shares: 100_000,
        };
        let high = ClassifyThresholds {
            amount: 500_000.0,
            shares: 100_000,
        };
        for (price, volume) in [(25.0, 10_001), (3.0, 50_000), (40.0, 9_000)] {
            if classify_trade(price, volume, &low) == InvestorClass::Retail {
                assert_eq!(classify_trade(price, volume, &high), InvestorClass::Retail);
            }
        }
    }

    #[test]
    fn turnover_examples() {
        let th = ClassifyThresholds::default();
        let empty = slot_turnover([], 1_000, &th, TurnoverVariant::ValueOverShares).unwrap();
        assert_eq!(empty.total, 0.0);
        assert_eq!(empty.institutional, 0.0);
        assert_eq!(empty.retail, 0.0);

        // (2*10 + 4*5) / 1000 = 0.04
        let t = slot_turnover(
            [(2.0, 10), (4.0, 5)],
            1_000,
            &th,
            TurnoverVariant::ValueOverShares,
        )
        .unwrap();
        assert_eq!(t.total, 0.04);
        assert_eq!(t.retail, 0.04);
        assert_eq!(t.institutional, 0.0);

        assert_eq!(
            slot_turnover([], 0, &th, TurnoverVariant::ValueOverShares),
            Err(MicroError::NonPositiveShares)
        );
    }

    #[test]
    fn volume_variant_uses_share_counts() {
        let th = ClassifyThresholds::default();
        let t = slot_turnover(
            [(2.0, 10), (4.0, 5)],
            1_000,
            &th,
            TurnoverVariant::VolumeOverShares,
        )
        .unwrap();
        assert_eq!(t.total, 0.015);
    }

    #[test]
    fn excess_turnover_examples() {
        let cfg = BaselineConfig {
            window: 3,
            min_window: 1,
        };
        // identity: current equals the baseline
        let et = excess_turnover(0.04, &[0.04, 0.04, 0.04], &cfg).unwrap().unwrap();
        assert_eq!(et.value, 0.0);
        // zero activity against a positive baseline floors at -1
        let et = excess_turnover(0.0, &[0.05, 0.03], &cfg).unwrap().unwrap();
        assert_eq!(et.value, -1.0);
        // hand evaluation: baseline (0.04+0.02+0.06)/3 = 0.04, (0.06-0.04)/0.04 = 0.5
        let et = excess_turnover(0.06, &[0.04, 0.02, 0.06], &cfg).unwrap().unwrap();
        assert_eq!(et.baseline_mean, 0.04);
        assert_eq!(et.value, (0.06 - 0.04) / 0.04);
        assert!((et.value - 0.5).abs() < 1e-15);
        assert_eq!(et.window_used, 3);
    }

    #[test]
    fn excess_turnover_edge_cases() {
        let cfg = BaselineConfig {
            window: 0,
            min_window: 1,
        };
        assert_eq!(
            excess_turnover(0.1, &[0.1], &cfg),
            Err(MicroError::InvalidWindow)
        );
        let cfg = BaselineConfig {
            window: 4,
            min_window: 2,
        };
        // not enough history
        assert_eq!(excess_turnover(0.1, &[0.1], &cfg).unwrap(), None);
        // zero baseline
        assert_eq!(excess_turnover(0.1, &[0.0, 0.0], &cfg).unwrap(), None);
        // only the most recent M values enter the window
        let et = excess_turnover(0.2, &[0.1, 0.1, 0.1, 0.1, 9.9], &cfg)
            .unwrap()
            .unwrap();
        assert_eq!(et.baseline_mean, 0.1);
        assert_eq!(et.value, 1.0);
        assert_eq!(et.window_used, 4);
    }

    fn key(day: u32, slot: HourSlot) -> SlotKey {
        SlotKey::new(NaiveDate::from_ymd_opt(2020, 1, day).unwrap(), slot)
    }

    fn flat(v: f64) -> SlotTurnover {
        SlotTurnover {
            total: v,
            institutional: v / 2.0,
            retail: v / 2.0,
        }
    }

    #[test]
    fn same_slot_baseline_skips_other_slots() {
        let cfg = BaselineConfig {
            window: 2,
            min_window: 1,
        };
        let series = vec![
            (key(1, HourSlot::S1), flat(0.1)),
            (key(1, HourSlot::S2), flat(0.9)),
            (key(2, HourSlot::S1), flat(0.2)),
            (key(2, HourSlot::S2), flat(0.9)),
        ];
        let out = excess_series(&series, BaselineMode::SameSlot, &cfg).unwrap();
        assert_eq!(out[0].1.total, None); // no history yet
        // day-2 S1 baseline is day-1 S1 only, not the interleaved S2 values
        let et = out[2].1.total.unwrap();
        assert_eq!(et.baseline_mean, 0.1);
        assert_eq!(et.value, (0.2 - 0.1) / 0.1);
    }

    #[test]
    fn all_slots_baseline_uses_preceding_slots() {
        let cfg = BaselineConfig {
            window: 2,
            min_window: 2,
        };
        let series = vec![
            (key(1, HourSlot::S1), flat(0.1)),
            (key(1, HourSlot::S2), flat(0.3)),
            (key(1, HourSlot::S3), flat(0.2)),
        ];
        let out = excess_series(&series, BaselineMode::AllSlots, &cfg).unwrap();
        let et = out[2].1.total.unwrap();
        assert_eq!(et.baseline_mean, 0.2);
    }

    #[test]
    fn series_must_be_sorted() {
        let cfg = BaselineConfig::default();
        let series = vec![
            (key(2, HourSlot::S1), flat(0.1)),
            (key(1, HourSlot::S1), flat(0.1)),
        ];
        assert_eq!(
            excess_series(&series, BaselineMode::SameSlot, &cfg),
            Err(MicroError::UnsortedSeries)
        );
    }
}
