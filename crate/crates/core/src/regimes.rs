//! Bull/bear phase dating from an index level series (windowed peak/trough
//! detection with alternation and minimum-phase censoring) and float-cap
//! tier labels.

use alloc::vec::Vec;
use chrono::{Days, NaiveDate};
use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeError {
    InsufficientHistory { len: usize, window: usize },
    EmptySeries,
    NonIncreasingDates,
    NonPositiveLevel,
    Undated { date: NaiveDate },
    InvalidCap,
    InvalidConfig,
}

impl fmt::Display for RegimeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegimeError::InsufficientHistory { len, window } => write!(
                f,
                "series of {len} observations is too short for window {window}"
            ),
            RegimeError::EmptySeries => f.write_str("index series is empty"),
            RegimeError::NonIncreasingDates => f.write_str("index dates must strictly increase"),
            RegimeError::NonPositiveLevel => f.write_str("index levels must be positive"),
            RegimeError::Undated { date } => write!(f, "date {date} outside the dated range"),
            RegimeError::InvalidCap => f.write_str("float cap must be a finite non-negative value"),
            RegimeError::InvalidConfig => f.write_str("window and min_phase must be at least 1"),
        }
    }
}

impl core::error::Error for RegimeError {}

/// Market index levels on strictly increasing dates.
#[derive(Debug, Clone)]
pub struct IndexSeries {
    dates: Vec<NaiveDate>,
    levels: Vec<f64>,
}

impl IndexSeries {
    pub fn new(points: Vec<(NaiveDate, f64)>) -> Result<IndexSeries, RegimeError> {
        if points.is_empty() {
            return Err(RegimeError::EmptySeries);
        }
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(RegimeError::NonIncreasingDates);
        }
        if points.iter().any(|(_, l)| !(l.is_finite() && *l > 0.0)) {
            return Err(RegimeError::NonPositiveLevel);
        }
        let (dates, levels) = points.into_iter().unzip();
        Ok(IndexSeries { dates, levels })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseKind {
    Bull,
    Bear,
}

impl PhaseKind {
    pub fn label(self) -> &'static str {
        match self {
            PhaseKind::Bull => "bull",
            PhaseKind::Bear => "bear",
        }
    }

    pub fn parse_label(s: &str) -> Option<PhaseKind> {
        match s {
            "bull" => Some(PhaseKind::Bull),
            "bear" => Some(PhaseKind::Bear),
            _ => None,
        }
    }
}

impl fmt::Display for PhaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One market phase; both endpoints are inclusive calendar dates. A turning
/// point belongs to the phase it ends, and the next phase starts the
/// following calendar day, so phases tile the dated range with no gaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegimePhase {
    pub kind: PhaseKind,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegimeConfig {
    /// Half-width of the extremum window, in trading days.
    pub window: usize,
    /// Minimum interior phase length, in trading days.
    pub min_phase: usize,
}

impl Default for RegimeConfig {
    fn default() -> Self {
        // 5 months at 21 trading days per month
        RegimeConfig {
            window: 105,
            min_phase: 105,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TurnKind {
    Peak,
    Trough,
}

#[derive(Debug, Clone, Copy)]
struct Turn {
    idx: usize,
    kind: TurnKind,
}

/// Date bull and bear phases.
///
/// Candidate turning points are ±window extrema (the earliest index of a
/// plateau); alternation keeps the higher of adjacent peaks and the lower of
/// adjacent troughs; interior phases shorter than `min_phase` are censored by
/// removing their bounding pair of turning points, shortest phase first. End
/// segments inherit the direction implied by the nearest turning point and
/// are exempt from the minimum-phase rule.
pub fn date_regimes(
    series: &IndexSeries,
    config: &RegimeConfig,
) -> Result<Vec<RegimePhase>, RegimeError> {
    if config.window == 0 || config.min_phase == 0 {
        return Err(RegimeError::InvalidConfig);
    }
    let n = series.len();
    let w = config.window;
    if n <= 2 * w {
        return Err(RegimeError::InsufficientHistory { len: n, window: w });
    }
    let levels = series.levels();

    // candidate extrema with a full window on both sides
    let mut turns: Vec<Turn> = Vec::new();
    for t in w..n - w {
        let lo = t - w;
        let hi = t + w;
        let before = &levels[lo..t];
        let after = &levels[t + 1..=hi];
        let v = levels[t];
        let peak = before.iter().all(|x| *x < v) && after.iter().all(|x| *x <= v);
        let trough = before.iter().all(|x| *x > v) && after.iter().all(|x| *x >= v);
        if peak {
            turns.push(Turn {
                idx: t,
                kind: TurnKind::Peak,
            });
        } else if trough {
            turns.push(Turn {
                idx: t,
                kind: TurnKind::Trough,
            });
        }
    }

    enforce_alternation(&mut turns, levels);

    // censor interior phases shorter than min_phase, shortest first
    loop {
        let mut shortest: Option<(usize, usize)> = None; // (phase index j, span)
        for j in 0..turns.len().saturating_sub(1) {
            let span = turns[j + 1].idx - turns[j].idx;
            if span < config.min_phase && shortest.map_or(true, |(_, s)| span < s) {
                shortest = Some((j, span));
            }
        }
        match shortest {
            Some((j, _)) => {
                // removing the bounding pair preserves alternation
                turns.drain(j..=j + 1);
                enforce_alternation(&mut turns, levels);
            }
            None => break,
        }
    }

    Ok(build_phases(series, &turns))
}

/// Keep the higher of adjacent peaks and the lower of adjacent troughs
/// (earliest wins ties) until kinds alternate.
fn enforce_alternation(turns: &mut Vec<Turn>, levels: &[f64]) {
    let mut i = 0;
    while i + 1 < turns.len() {
        if turns[i].kind != turns[i + 1].kind {
            i += 1;
            continue;
        }
        let keep_first = match turns[i].kind {
            TurnKind::Peak => levels[turns[i].idx] >= levels[turns[i + 1].idx],
            TurnKind::Trough => levels[turns[i].idx] <= levels[turns[i + 1].idx],
        };
        let drop = if keep_first { i + 1 } else { i };
        turns.remove(drop);
        i = i.saturating_sub(1);
    }
}

fn build_phases(series: &IndexSeries, turns: &[Turn]) -> Vec<RegimePhase> {
    let dates = series.dates();
    let levels = series.levels();
    let n = dates.len();
    let first = dates[0];
    let last = dates[n - 1];

    if turns.is_empty() {
        let kind = if levels[n - 1] >= levels[0] {
            PhaseKind::Bull
        } else {
            PhaseKind::Bear
        };
        return alloc::vec![RegimePhase {
            kind,
            start: first,
            end: last,
        }];
    }

    let kind_ending_at = |turn: &Turn| match turn.kind {
        TurnKind::Peak => PhaseKind::Bull,
        TurnKind::Trough => PhaseKind::Bear,
    };

    let mut phases = Vec::with_capacity(turns.len() + 1);
    let mut start = first;
    for turn in turns {
        let end = dates[turn.idx];
        phases.push(RegimePhase {
            kind: kind_ending_at(turn),
            start,
            end,
        });
        start = end + Days::new(1);
    }
    let tail_kind = match turns[turns.len() - 1].kind {
        TurnKind::Peak => PhaseKind::Bear,
        TurnKind::Trough => PhaseKind::Bull,
    };
    phases.push(RegimePhase {
        kind: tail_kind,
        start,
        end: last,
    });
    phases
}

/// Kind of the phase containing `date`; errors when outside the dated range.
pub fn label_date(date: NaiveDate, phases: &[RegimePhase]) -> Result<PhaseKind, RegimeError> {
    phases
        .iter()
        .find(|p| p.start <= date && date <= p.end)
        .map(|p| p.kind)
        .ok_or(RegimeError::Undated { date })
}

/// Float-capitalization tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CapTier {
    Small,
    Mid,
    Large,
}

impl CapTier {
    pub const ALL: [CapTier; 3] = [CapTier::Large, CapTier::Mid, CapTier::Small];

    pub fn label(self) -> &'static str {
        match self {
            CapTier::Large => "large",
            CapTier::Mid => "mid",
            CapTier::Small => "small",
        }
    }

    pub fn parse_label(s: &str) -> Option<CapTier> {
        match s {
            "large" => Some(CapTier::Large),
            "mid" => Some(CapTier::Mid),
            "small" => Some(CapTier::Small),
            _ => None,
        }
    }
}

impl fmt::Display for CapTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Tier boundaries in CNY of float capitalization: strictly above `large` is
/// large-cap, `[mid, large]` is mid-cap, below `mid` is small-cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TierThresholds {
    pub large: f64,
    pub mid: f64,
}

impl Default for TierThresholds {
    fn default() -> Self {
        TierThresholds {
            large: 1e11,
            mid: 1e10,
        }
    }
}

pub fn cap_tier(float_cap: f64, thresholds: &TierThresholds) -> Result<CapTier, RegimeError> {
    if !float_cap.is_finite() || float_cap < 0.0 {
        return Err(RegimeError::InvalidCap);
    }
    if float_cap > thresholds.large {
        Ok(CapTier::Large)
    } else if float_cap >= thresholds.mid {
        Ok(CapTier::Mid)
    } else {
        Ok(CapTier::Small)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn series_from(levels: &[f64]) -> IndexSeries {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        IndexSeries::new(
            levels
                .iter()
                .enumerate()
                .map(|(i, l)| (start + Days::new(i as u64), *l))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn strictly_increasing_series_is_one_bull_phase() {
        let levels: Vec<f64> = (1..=60).map(|i| i as f64).collect();
        let cfg = RegimeConfig {
            window: 10,
            min_phase: 10,
        };
        let phases = date_regimes(&series_from(&levels), &cfg).unwrap();
        assert_eq!(phases.len(), 1);
        assert_eq!(phases[0].kind, PhaseKind::Bull);
        assert_eq!(phases[0].start, NaiveDate::from_ymd_opt(2020, 1, 1).unwrap());
        assert_eq!(phases[0].end, NaiveDate::from_ymd_opt(2020, 2, 29).unwrap());
    }

    #[test]
    fn triangle_series_is_bull_then_bear() {
        // rise for 30, fall for 30; apex at index 30
        let levels: Vec<f64> = (0..=30)
            .map(|i| 100.0 + i as f64)
            .chain((1..30).map(|i| 130.0 - i as f64))
            .collect();
        let cfg = RegimeConfig {
            window: 10,
            min_phase: 10,
        };
        let s = series_from(&levels);
        let phases = date_regimes(&s, &cfg).unwrap();
        assert_eq!(phases.len(), 2);
        assert_eq!(phases[0].kind, PhaseKind::Bull);
        assert_eq!(phases[1].kind, PhaseKind::Bear);
        let apex = s.dates()[30];
        // the apex date belongs to the phase it ends
        assert_eq!(phases[0].end, apex);
        assert_eq!(label_date(apex, &phases).unwrap(), PhaseKind::Bull);
        assert_eq!(
            label_date(apex + Days::new(1), &phases).unwrap(),
            PhaseKind::Bear
        );
    }

    #[test]
    fn short_series_is_an_error() {
        let levels: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        let cfg = RegimeConfig {
            window: 10,
            min_phase: 10,
        };
        assert_eq!(
            date_regimes(&series_from(&levels), &cfg),
            Err(RegimeError::InsufficientHistory { len: 20, window: 10 })
        );
    }

    #[test]
    fn label_outside_range_is_undated() {
        let phases = vec![RegimePhase {
            kind: PhaseKind::Bull,
            start: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            end: NaiveDate::from_ymd_opt(2020, 6, 1).unwrap(),
        }];
        let before = NaiveDate::from_ymd_opt(2019, 12, 31).unwrap();
        assert_eq!(
            label_date(before, &phases),
            Err(RegimeError::Undated { date: before })
        );
        assert_eq!(
            label_date(NaiveDate::from_ymd_opt(2020, 3, 1).unwrap(), &phases).unwrap(),
            PhaseKind::Bull
        );
    }

    #[test]
    fn phases_tile_without_gaps() {
        let levels: Vec<f64> = (0..=30)
            .map(|i| 100.0 + i as f64)
            .chain((1..40).map(|i| 130.0 - 0.5 * i as f64))
            .collect();
        let cfg = RegimeConfig {
            window: 8,
            min_phase: 8,
        };
        let s = series_from(&levels);
        let phases = date_regimes(&s, &cfg).unwrap();
        assert_eq!(phases[0].start, s.dates()[0]);
        assert_eq!(phases.last().unwrap().end, *s.dates().last().unwrap());
        for pair in phases.windows(2) {
            assert_eq!(pair[0].end + Days::new(1), pair[1].start);
            assert_ne!(pair[0].kind, pair[1].kind);
        }
    }

    #[test]
    fn cap_tier_thresholds() {
        let th = TierThresholds::default();
        assert_eq!(cap_tier(1.5e11, &th).unwrap(), CapTier::Large);
        assert_eq!(cap_tier(5.0e10, &th).unwrap(), CapTier::Mid);
        assert_eq!(cap_tier(5.0e9, &th).unwrap(), CapTier::Small);
        // boundaries: exactly 1e11 and exactly 1e10 are both mid
        assert_eq!(cap_tier(1e11, &th).unwrap(), CapTier::Mid);
        assert_eq!(cap_tier(1e10, &th).unwrap(), CapTier::Mid);
        assert!(cap_tier(-1.0, &th).is_err());
        assert!(cap_tier(f64::NAN, &th).is_err());
    }
}
