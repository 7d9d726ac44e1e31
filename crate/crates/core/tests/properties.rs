//! Property tests for the library invariants.

use proptest::prelude::*;

use overtrade_core::lexicon::{segment, ConflictPolicy, Lexicon, LexiconSource};
use overtrade_core::micro::{
    classify_trade, excess_turnover, slot_turnover, BaselineConfig, ClassifyThresholds,
    InvestorClass, TurnoverVariant,
};
use overtrade_core::regimes::{
    cap_tier, date_regimes, label_date, CapTier, IndexSeries, RegimeConfig, TierThresholds,
};
use overtrade_core::sentiment::{aggregate_hour, score_post};

fn word_pool() -> Vec<String> {
    // mix of widths so maximum matching has real work to do, including words
    // that are prefixes of one another
    [
        "涨", "涨停", "跌", "跌停", "利好", "利好消息", "看多", "看空", "套牢", "回调", "ab",
        "abc", "a", "б", "бу", "🚀", "🚀🌕",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn arb_lexicon() -> impl Strategy<Value = Lexicon> {
    let pool = word_pool();
    let n = pool.len();
    (
        proptest::collection::vec(any::<i8>(), n),
        proptest::collection::vec(any::<bool>(), n),
    )
        .prop_map(move |(weights, enabled)| {
            let mut weighted = Vec::new();
            for i in 0..n {
                if enabled[i] {
                    weighted.push((pool[i].clone(), (weights[i] % 2).signum() as i8));
                }
            }
            // a fixed sentinel keeps the merge nonempty
            weighted.push(("牛".to_string(), 1));
            let source = LexiconSource {
                name: "prop".to_string(),
                weighted,
                negations: vec!["不".to_string(), "没有".to_string()],
            };
            Lexicon::merge(&[source], ConflictPolicy::FirstWins).unwrap().0
        })
}

proptest! {
    // joining segment() output reproduces the input byte for byte
    #[test]
    fn segmentation_round_trips(text in "\\PC{0,60}", lexicon in arb_lexicon()) {
        let tokens = segment(&text, &lexicon);
        let joined: String = tokens.concat();
        prop_assert_eq!(joined, text.clone());
        let max_chars = lexicon.max_word_chars();
        for token in segment(&text, &lexicon) {
            prop_assert!(token.chars().count() <= max_chars.max(1));
        }
    }

    // identical inputs always give identical tokens
    #[test]
    fn segmentation_is_deterministic(text in "\\PC{0,40}", lexicon in arb_lexicon()) {
        prop_assert_eq!(segment(&text, &lexicon), segment(&text, &lexicon));
    }

    // merge is associative under a fixed priority order
    #[test]
    fn merge_is_associative(
        wa in proptest::collection::vec((0usize..17, -1i8..=1), 0..8),
        wb in proptest::collection::vec((0usize..17, -1i8..=1), 0..8),
        wc in proptest::collection::vec((0usize..17, -1i8..=1), 0..8),
    ) {
        let pool = word_pool();
        let mk = |name: &str, picks: &[(usize, i8)]| LexiconSource {
            name: name.to_string(),
            weighted: picks
                .iter()
                .map(|(i, w)| (pool[*i].clone(), *w))
                .chain(std::iter::once(("牛".to_string(), 1)))
                .collect(),
            negations: vec![],
        };
        let a = mk("a", &wa);
        let b = mk("b", &wb);
        let c = mk("c", &wc);
        let left = Lexicon::merge(&[a.clone(), b.clone(), c.clone()], ConflictPolicy::FirstWins)
            .unwrap()
            .0;
        // same priority order, different grouping: entries must agree
        let (ab, _) = Lexicon::merge(&[a, b], ConflictPolicy::FirstWins).unwrap();
        let ab_source = LexiconSource {
            name: "ab".to_string(),
            weighted: ab
                .entries()
                .map(|e| (e.word.clone(), e.weight))
                .collect(),
            negations: vec![],
        };
        let right = Lexicon::merge(&[ab_source, c], ConflictPolicy::FirstWins).unwrap().0;
        let left_entries: Vec<(String, i8)> =
            left.entries().map(|e| (e.word.clone(), e.weight)).collect();
        let right_entries: Vec<(String, i8)> =
            right.entries().map(|e| (e.word.clone(), e.weight)).collect();
        prop_assert_eq!(left_entries, right_entries);
    }

    // post scores stay inside [-1, 1] and flip sign under one extra negation
    #[test]
    fn score_bounded_and_negation_parity(
        text in "\\PC{0,50}",
        lexicon in arb_lexicon(),
    ) {
        let tokens = segment(&text, &lexicon);
        if let Some(score) = score_post(&tokens, &lexicon) {
            prop_assert!(score.value >= -1.0 && score.value <= 1.0);

            let mut flipped = tokens.clone();
            flipped.push("不");
            let f = score_post(&flipped, &lexicon).unwrap();
            prop_assert_eq!(f.value, -score.value);
            prop_assert_eq!(f.sentiment_words, score.sentiment_words);
            prop_assert_eq!(f.negations, score.negations + 1);

            let mut doubled = flipped.clone();
            doubled.push("不");
            let d = score_post(&doubled, &lexicon).unwrap();
            prop_assert_eq!(d.value, score.value);
        }
    }

    // token order never changes a post score
    #[test]
    fn score_permutation_invariant(
        text in "\\PC{0,50}",
        lexicon in arb_lexicon(),
        seed in any::<u64>(),
    ) {
        let tokens = segment(&text, &lexicon);
        let mut shuffled = tokens.clone();
        // deterministic Fisher-Yates from the seed
        let mut state = seed | 1;
        for i in (1..shuffled.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (state >> 33) as usize % (i + 1);
            shuffled.swap(i, j);
        }
        prop_assert_eq!(score_post(&tokens, &lexicon), score_post(&shuffled, &lexicon));
    }

    // hourly means stay inside [-1, 1]
    #[test]
    fn hour_mean_bounded(scores in proptest::collection::vec(-1.0f64..=1.0, 1..200)) {
        let hour = aggregate_hour(&scores).unwrap();
        prop_assert!(hour.value >= -1.0 && hour.value <= 1.0);
    }

    // class components always sum to the total exactly
    #[test]
    fn turnover_class_additivity(
        ticks in proptest::collection::vec((0.01f64..1000.0, 1u64..500_000), 0..60),
        shares in 1u64..2_000_000_000,
    ) {
        let th = ClassifyThresholds::default();
        let t = slot_turnover(ticks.iter().copied(), shares, &th, TurnoverVariant::ValueOverShares)
            .unwrap();
        prop_assert_eq!(t.total, t.institutional + t.retail);
        prop_assert!(t.total >= 0.0);
    }

    // excess turnover never drops below -1 and is monotone in current T
    #[test]
    fn excess_turnover_lower_bound_and_monotonicity(
        current in 0.0f64..10.0,
        bump in 0.0001f64..5.0,
        history in proptest::collection::vec(0.0f64..10.0, 1..40),
    ) {
        let cfg = BaselineConfig { window: 20, min_window: 1 };
        if let Some(et) = excess_turnover(current, &history, &cfg).unwrap() {
            prop_assert!(et.value >= -1.0);
            let higher = excess_turnover(current + bump, &history, &cfg).unwrap().unwrap();
            prop_assert!(higher.value > et.value);
        }
    }

    // scaling all prices scales turnover and leaves ET unchanged up to fp noise
    #[test]
    fn price_scale_covariance(
        ticks in proptest::collection::vec((0.01f64..100.0, 1u64..100_000), 1..30),
        shares in 1_000u64..1_000_000,
        scale_pow in -3i32..=3,
    ) {
        // powers of two make the scaling exact, so ET equality is exact
        let c = (2.0f64).powi(scale_pow);
        let th = ClassifyThresholds { amount: f64::INFINITY, shares: u64::MAX };
        let base = slot_turnover(ticks.iter().copied(), shares, &th, TurnoverVariant::ValueOverShares).unwrap();
        let scaled = slot_turnover(
            ticks.iter().map(|(p, v)| (p * c, *v)),
            shares,
            &th,
            TurnoverVariant::ValueOverShares,
        )
        .unwrap();
        prop_assert_eq!(scaled.total, base.total * c);

        let cfg = BaselineConfig { window: 5, min_window: 1 };
        let history = [base.total * 0.5 + 0.001, base.total + 0.002];
        let scaled_history = [history[0] * c, history[1] * c];
        let et = excess_turnover(base.total, &history, &cfg).unwrap().unwrap();
        let et_scaled = excess_turnover(scaled.total, &scaled_history, &cfg).unwrap().unwrap();
        prop_assert_eq!(et.value, et_scaled.value);
    }

    // raising the amount threshold never turns a retail trade institutional
    #[test]
    fn classification_threshold_monotone(
        price in 0.01f64..1000.0,
        volume in 1u64..1_000_000,
        low in 1_000.0f64..500_000.0,
        extra in 0.0f64..500_000.0,
    ) {
        let a = ClassifyThresholds { amount: low, shares: 100_000 };
        let b = ClassifyThresholds { amount: low + extra, shares: 100_000 };
        if classify_trade(price, volume, &a) == InvestorClass::Retail {
            prop_assert_eq!(classify_trade(price, volume, &b), InvestorClass::Retail);
        }
    }

    // cap tiers are a monotone step function of float cap
    #[test]
    fn tier_monotone(a in 0.0f64..5e11, b in 0.0f64..5e11) {
        let th = TierThresholds::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(cap_tier(lo, &th).unwrap() <= cap_tier(hi, &th).unwrap());
    }

    // random walks: phases alternate, tile the range, and every reported
    // turning point is a true windowed extremum
    #[test]
    fn regime_invariants_on_random_walks(
        steps in proptest::collection::vec(-1.0f64..1.0, 130..260),
        window in 5usize..12,
    ) {
        let mut level = 100.0f64;
        let start = chrono::NaiveDate::from_ymd_opt(2018, 1, 1).unwrap();
        let mut points = Vec::with_capacity(steps.len());
        for (i, s) in steps.iter().enumerate() {
            level = (level + s).max(1.0);
            points.push((start + chrono::Days::new(i as u64), level));
        }
        let series = IndexSeries::new(points).unwrap();
        let cfg = RegimeConfig { window, min_phase: window };
        let phases = date_regimes(&series, &cfg).unwrap();

        // tiling and alternation
        prop_assert_eq!(phases[0].start, series.dates()[0]);
        prop_assert_eq!(phases.last().unwrap().end, *series.dates().last().unwrap());
        for pair in phases.windows(2) {
            prop_assert_eq!(pair[0].end + chrono::Days::new(1), pair[1].start);
            prop_assert_ne!(pair[0].kind, pair[1].kind);
        }
        // every date in range is labeled
        for date in series.dates() {
            prop_assert!(label_date(*date, &phases).is_ok());
        }
        // boundary extremality against a brute-force scan
        let levels = series.levels();
        let dates = series.dates();
        for phase in &phases[..phases.len() - 1] {
            let t = dates.iter().position(|d| *d == phase.end).unwrap();
            let lo = t.saturating_sub(window);
            let hi = (t + window).min(levels.len() - 1);
            let v = levels[t];
            let is_peak = levels[lo..=hi].iter().all(|x| *x <= v);
            let is_trough = levels[lo..=hi].iter().all(|x| *x >= v);
            match phases.iter().find(|p| p.end == phase.end).unwrap().kind {
                overtrade_core::regimes::PhaseKind::Bull => prop_assert!(is_peak),
                overtrade_core::regimes::PhaseKind::Bear => prop_assert!(is_trough),
            }
        }
    }
}

// appending data after the last turning point never relabels earlier dates
proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn regime_labels_stable_under_append(
        steps in proptest::collection::vec(-1.0f64..1.0, 150..220),
        tail in proptest::collection::vec(-1.0f64..1.0, 1..40),
        window in 5usize..10,
    ) {
        let start = chrono::NaiveDate::from_ymd_opt(2018, 1, 1).unwrap();
        let mut level = 100.0f64;
        let mut points = Vec::new();
        for (i, s) in steps.iter().enumerate() {
            level = (level + s).max(1.0);
            points.push((start + chrono::Days::new(i as u64), level));
        }
        let series = IndexSeries::new(points.clone()).unwrap();
        let cfg = RegimeConfig { window, min_phase: window };
        let before = date_regimes(&series, &cfg).unwrap();
        if before.len() < 2 {
            return Ok(());
        }
        let last_turn = before[before.len() - 2].end;

        for (j, s) in tail.iter().enumerate() {
            level = (level + s).max(1.0);
            points.push((start + chrono::Days::new((steps.len() + j) as u64), level));
        }
        let extended = IndexSeries::new(points).unwrap();
        let after = date_regimes(&extended, &cfg).unwrap();
        for date in series.dates().iter().filter(|d| **d < last_turn) {
            prop_assert_eq!(
                label_date(*date, &before).unwrap(),
                label_date(*date, &after).unwrap()
            );
        }
    }
}
