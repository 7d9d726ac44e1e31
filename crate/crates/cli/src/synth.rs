//! Seeded synthetic dataset generator.
//!
//! The generator plants a known sentiment-to-overtrading slope through the
//! raw inputs, never through derived artifacts, so a full pipeline run is a
//! genuine end-to-end recovery test. Construction:
//!
//! 1. Posts: every (stock, day, slot) gets `posts_per_slot` posts assembled
//!    from dictionary words separated by punctuation, so segmentation
//!    recovers the planted tokens exactly. Each post carries four sentiment
//!    words plus occasional negations; the slot's sentiment index `S` is
//!    computed from the written posts with the same scoring and averaging
//!    code the pipeline uses.
//! 2. Trades: for slots 2-4, each investor class's slot turnover is shaped
//!    as `B_class * (1 + alpha + beta_class * S_prev + eps)` with
//!    `eps ~ N(0, noise_sd)` and `S_prev` the previous slot's index; slot 1
//!    turnover is `B_class * (1 + eps)`. The target value traded is split
//!    into a few trades sized to classify institutional (respectively
//!    retail) under the default thresholds.
//! 3. Ancillary files: a weekday trading calendar, constant shares
//!    outstanding, stratified float caps covering all three tiers, mild
//!    control variables, and two triangle index series (one per exchange
//!    prefix) whose apex splits the sample into a bull and a bear phase.
//!
//! Fixed seed means byte-identical output files.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::{Days, NaiveDate};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use overtrade_core::lexicon::{segment, ConflictPolicy, Lexicon, LexiconSource};
use overtrade_core::micro::{classify_trade, ClassifyThresholds, InvestorClass};
use overtrade_core::sentiment::{aggregate_hour, score_post};
use overtrade_core::time::HourSlot;

use crate::config::PipelineConfig;
use crate::formats::{self, create_writer};

const POSITIVE_WORDS: [&str; 36] = [
    "涨", "涨停", "大涨", "暴涨", "飙升", "利好", "牛市", "看涨", "看多", "突破", "反弹",
    "强势", "红盘", "盈利", "增长", "翻倍", "赚钱", "获利", "上攻", "新高", "加仓", "绩优",
    "买入", "金叉", "企稳", "回暖", "井喷", "超预期", "腾飞", "领涨", "放量上涨", "主力进场",
    "高送转", "丰收", "稳赚", "抄底成功",
];
const NEGATIVE_WORDS: [&str; 36] = [
    "跌", "跌停", "大跌", "暴跌", "崩盘", "利空", "熊市", "看跌", "看空", "破位", "回调",
    "弱势", "绿盘", "亏损", "下滑", "腰斩", "套牢", "割肉", "爆仓", "下挫", "新低", "减仓",
    "绩差", "被套", "卖出", "死叉", "跳水", "退市", "低迷", "领跌", "放量下跌", "主力出货",
    "不及预期", "阴跌", "恐慌", "亏钱",
];
const NEUTRAL_WORDS: [&str; 12] = [
    "股票", "市场", "公司", "今天", "明天", "大盘", "成交量", "开盘", "收盘", "行情", "板块",
    "券商",
];
const NEGATION_WORDS: [&str; 8] = ["不", "没", "没有", "无", "非", "未", "别", "毫不"];
const SEPARATORS: [&str; 3] = ["，", "。", " "];

// per-slot base turnover levels (value traded / shares outstanding)
const BASE_TURNOVER_INST: f64 = 0.01;
const BASE_TURNOVER_RETAIL: f64 = 0.0008;

/// Paths of the generated dataset inside the output directory.
pub struct SynthPaths {
    base: PathBuf,
}

impl SynthPaths {
    pub fn new(dir: &str) -> SynthPaths {
        SynthPaths {
            base: PathBuf::from(dir),
        }
    }

    pub fn posts(&self) -> PathBuf {
        self.base.join("posts.tsv")
    }
    pub fn trades(&self) -> PathBuf {
        self.base.join("trades.tsv")
    }
    pub fn shares(&self) -> PathBuf {
        self.base.join("shares.tsv")
    }
    pub fn fundamentals(&self) -> PathBuf {
        self.base.join("fundamentals.tsv")
    }
    pub fn calendar(&self) -> PathBuf {
        self.base.join("calendar.txt")
    }
    pub fn index_sh(&self) -> PathBuf {
        self.base.join("index_sh.tsv")
    }
    pub fn index_sz(&self) -> PathBuf {
        self.base.join("index_sz.tsv")
    }
    pub fn dictionary(&self) -> PathBuf {
        self.base.join("dict.tsv")
    }
    pub fn negations(&self) -> PathBuf {
        self.base.join("negations.txt")
    }
    pub fn config(&self) -> PathBuf {
        self.base.join("synth_config.conf")
    }
}

fn weekday_calendar(start: NaiveDate, days: u32) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(days as usize);
    let mut date = start;
    while out.len() < days as usize {
        if date.format("%u").to_string().parse::<u8>().unwrap() <= 5 {
            out.push(date);
        }
        date = date + Days::new(1);
    }
    out
}

fn slot_start_minute(slot: HourSlot) -> i64 {
    match slot {
        HourSlot::S1 => 9 * 60 + 30,
        HourSlot::S2 => 10 * 60 + 30,
        HourSlot::S3 => 13 * 60,
        HourSlot::S4 => 14 * 60,
    }
}

fn build_lexicon() -> Lexicon {
    let source = LexiconSource {
        name: "synthetic".to_string(),
        weighted: POSITIVE_WORDS
            .iter()
            .map(|w| (w.to_string(), 1i8))
            .chain(NEGATIVE_WORDS.iter().map(|w| (w.to_string(), -1i8)))
            .chain(NEUTRAL_WORDS.iter().map(|w| (w.to_string(), 0i8)))
            .collect(),
        negations: NEGATION_WORDS.iter().map(|w| w.to_string()).collect(),
    };
    Lexicon::merge(&[source], ConflictPolicy::FirstWins).unwrap().0
}

/// Assemble one post around a target score in [-1, 1] and return its text.
///
/// The post holds exactly four sentiment words (`E = 4`), zero to two
/// negations, and some neutral filler, all joined by separators so forward
/// maximum matching recovers every token.
fn build_post(rng: &mut ChaCha8Rng, target: f64) -> String {
    let negations = match rng.random_range(0..100) {
        0..=74 => 0usize,
        75..=89 => 1,
        _ => 2,
    };
    // value = ((a - 2) / 2) * (-1)^n with a positive words out of four
    let effective = if negations % 2 == 1 { -target } else { target };
    let a = (((effective + 1.0) * 2.0).round() as i64).clamp(0, 4) as usize;

    let mut tokens: Vec<&str> = Vec::with_capacity(10);
    for _ in 0..a {
        tokens.push(POSITIVE_WORDS[rng.random_range(0..POSITIVE_WORDS.len())]);
    }
    for _ in 0..(4 - a) {
        tokens.push(NEGATIVE_WORDS[rng.random_range(0..NEGATIVE_WORDS.len())]);
    }
    for _ in 0..negations {
        tokens.push(NEGATION_WORDS[rng.random_range(0..NEGATION_WORDS.len())]);
    }
    let fillers = rng.random_range(1..3);
    for _ in 0..fillers {
        tokens.push(NEUTRAL_WORDS[rng.random_range(0..NEUTRAL_WORDS.len())]);
    }
    tokens.shuffle(rng);

    let mut text = String::new();
    for (i, token) in tokens.iter().enumerate() {
        if i > 0 {
            text.push_str(SEPARATORS[rng.random_range(0..SEPARATORS.len())]);
        }
        text.push_str(token);
    }
    text
}

fn write_index_triangle(
    path: &Path,
    calendar: &[NaiveDate],
    base: f64,
    peak: f64,
    tail: f64,
) -> Result<()> {
    let n = calendar.len();
    let apex = n * 55 / 100;
    let mut out = create_writer(path)?;
    writeln!(out, "{}", formats::INDEX_HEADER)?;
    for (i, date) in calendar.iter().enumerate() {
        let level = if i <= apex {
            base + (peak - base) * i as f64 / apex.max(1) as f64
        } else {
            peak - (peak - tail) * (i - apex) as f64 / (n - 1 - apex).max(1) as f64
        };
        writeln!(out, "{date}\t{level}")?;
    }
    out.flush()?;
    Ok(())
}

/// Generate the full dataset plus a ready-to-run pipeline config.
pub fn run_synth(config: &PipelineConfig) -> Result<()> {
    let synth = &config.synth;
    if synth.stocks == 0 || synth.days == 0 || synth.posts_per_slot == 0 {
        bail!("synth.stocks, synth.days, synth.posts_per_slot must be positive");
    }
    if !(synth.beta_inst.is_finite() && synth.beta_retail.is_finite() && synth.alpha.is_finite())
    {
        bail!("planted coefficients must be finite");
    }
    let paths = SynthPaths::new(&config.out_dir);
    std::fs::create_dir_all(&paths.base)
        .with_context(|| format!("creating {}", paths.base.display()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let lexicon = build_lexicon();
    let noise = Normal::new(0.0, synth.noise_sd).context("noise_sd must be positive")?;

    let calendar = weekday_calendar(NaiveDate::from_ymd_opt(2018, 1, 2).unwrap(), synth.days);
    {
        let mut out = create_writer(&paths.calendar())?;
        for date in &calendar {
            writeln!(out, "{date}")?;
        }
        out.flush()?;
    }

    // dictionary and negation list in the pipeline's input formats
    {
        let mut out = create_writer(&paths.dictionary())?;
        for w in POSITIVE_WORDS {
            writeln!(out, "{w}\t1")?;
        }
        for w in NEGATIVE_WORDS {
            writeln!(out, "{w}\t-1")?;
        }
        for w in NEUTRAL_WORDS {
            writeln!(out, "{w}\t0")?;
        }
        out.flush()?;
        let mut neg = create_writer(&paths.negations())?;
        for w in NEGATION_WORDS {
            writeln!(neg, "{w}")?;
        }
        neg.flush()?;
    }

    write_index_triangle(&paths.index_sh(), &calendar, 3000.0, 3900.0, 3200.0)?;
    write_index_triangle(&paths.index_sz(), &calendar, 10000.0, 13000.0, 10400.0)?;

    // per-stock constants
    struct StockSpec {
        id: String,
        shares: u64,
        price: f64,
        float_cap: f64,
        pb_base: f64,
    }
    let mut stocks = Vec::with_capacity(synth.stocks as usize);
    for i in 0..synth.stocks {
        let id = if i % 2 == 0 {
            format!("6{:05}", i + 1)
        } else {
            format!("0{:05}", i + 1)
        };
        let shares = rng.random_range(100_000_000u64..400_000_000);
        let price = (rng.random_range(500u64..5000) as f64) / 100.0;
        let float_cap = match i % 3 {
            0 => rng.random_range(1.2e11..4.0e11),
            1 => rng.random_range(1.2e10..9.0e10),
            _ => rng.random_range(1.0e9..9.0e9),
        };
        let pb_base = rng.random_range(0.5..15.0);
        stocks.push(StockSpec {
            id,
            shares,
            price,
            float_cap,
            pb_base,
        });
    }

    let mut posts_out = create_writer(&paths.posts())?;
    writeln!(posts_out, "{}", formats::POSTS_HEADER)?;
    let mut trades_out = create_writer(&paths.trades())?;
    writeln!(trades_out, "{}", formats::TRADES_HEADER)?;
    let mut shares_out = create_writer(&paths.shares())?;
    writeln!(shares_out, "{}", formats::SHARES_HEADER)?;
    let mut fundamentals_out = create_writer(&paths.fundamentals())?;
    writeln!(fundamentals_out, "{}", formats::FUNDAMENTALS_HEADER)?;

    for stock in &stocks {
        writeln!(
            shares_out,
            "{}\t{}\t{}",
            stock.id, calendar[0], stock.shares
        )?;
    }

    // market-level controls per date
    let mut market: BTreeMap<NaiveDate, (f64, f64)> = BTreeMap::new();
    for date in &calendar {
        let mrp = 0.0003 + noise.sample(&mut rng) * 0.04;
        let mret = 0.0002 + noise.sample(&mut rng) * 0.2;
        market.insert(*date, (mrp, mret));
    }

    let thresholds = ClassifyThresholds {
        amount: config.amount_threshold,
        shares: config.share_threshold,
    };
    let mut author_seq: u64 = 0;

    for stock in &stocks {
        for date in &calendar {
            let (mrp, mret) = market[date];
            writeln!(
                fundamentals_out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                stock.id,
                date,
                stock.pb_base + 0.01 * noise.sample(&mut rng),
                mrp,
                mret,
                stock.float_cap
            )?;

            // posts first: the slot sentiment path drives the next slot's trades
            let date_str = date.to_string();
            let mut slot_sentiment = [0.0f64; 4];
            for (slot_idx, slot) in HourSlot::ALL.into_iter().enumerate() {
                let target = rng.random_range(-0.85..0.85);
                let start_minute = slot_start_minute(slot);
                let mut scores = Vec::with_capacity(synth.posts_per_slot as usize);
                for j in 0..synth.posts_per_slot {
                    let jitter = (noise.sample(&mut rng) * 3.0).clamp(-1.0, 1.0);
                    let text = build_post(&mut rng, (target + jitter).clamp(-1.0, 1.0));
                    let minute = start_minute + 1 + (j as i64 * 57) / synth.posts_per_slot as i64;
                    let second = rng.random_range(0..60);
                    author_seq += 1;
                    writeln!(
                        posts_out,
                        "{}\t{}T{:02}:{:02}:{:02}\tu{}\t{}",
                        stock.id,
                        date_str,
                        minute / 60,
                        minute % 60,
                        second,
                        author_seq % 9973,
                        formats::escape_text(&text)
                    )?;
                    // the same scoring path the pipeline applies
                    let tokens = segment(&text, &lexicon);
                    let score = score_post(&tokens, &lexicon)
                        .expect("synthetic posts always carry sentiment words");
                    scores.push(score.value);
                }
                slot_sentiment[slot_idx] =
                    aggregate_hour(&scores).expect("posts_per_slot >= 1").value;
            }

            // trades: slot turnover shaped against the previous slot's index
            for (slot_idx, slot) in HourSlot::ALL.into_iter().enumerate() {
                let signal = |beta: f64| -> f64 {
                    if slot_idx == 0 {
                        0.0
                    } else {
                        synth.alpha + beta * slot_sentiment[slot_idx - 1]
                    }
                };
                let z_inst = signal(synth.beta_inst) + noise.sample(&mut rng);
                let z_retail = signal(synth.beta_retail) + noise.sample(&mut rng);
                let target_inst =
                    (BASE_TURNOVER_INST * (1.0 + z_inst)).max(BASE_TURNOVER_INST * 0.02);
                let target_retail =
                    (BASE_TURNOVER_RETAIL * (1.0 + z_retail)).max(BASE_TURNOVER_RETAIL * 0.02);
                let start_minute = slot_start_minute(slot);

                let mut emit = |rng: &mut ChaCha8Rng,
                               count: u32,
                               target_value: f64,
                               class: InvestorClass,
                               minute_base: i64|
                 -> Result<()> {
                    // split the slot's value across trades with mild jitter;
                    // the narrow weight band keeps every retail trade under
                    // the institutional thresholds
                    let mut weights = Vec::with_capacity(count as usize);
                    for _ in 0..count {
                        weights.push(rng.random_range(0.9..1.1));
                    }
                    let total: f64 = weights.iter().sum();
                    for (k, w) in weights.iter().enumerate() {
                        let value = target_value * w / total;
                        let price =
                            ((stock.price * rng.random_range(0.98..1.02)) * 100.0).round() / 100.0;
                        let price = price.max(0.01);
                        let volume = (value / price).round().max(1.0) as u64;
                        // offsets stay well inside the hour for any trade count
                        let minute = start_minute + minute_base + (k as i64 * 7) % 25;
                        let second = rng.random_range(0..55);
                        if classify_trade(price, volume, &thresholds) != class {
                            bail!(
                                "synthetic trade failed to classify as {:?} \
                                 (price {price}, volume {volume})",
                                class
                            );
                        }
                        writeln!(
                            trades_out,
                            "{}\t{}T{:02}:{:02}:{:02}\t{}\t{}",
                            stock.id,
                            date_str,
                            minute / 60,
                            minute % 60,
                            second,
                            price,
                            volume
                        )?;
                    }
                    Ok(())
                };
                emit(
                    &mut rng,
                    synth.inst_trades_per_slot,
                    target_inst * stock.shares as f64,
                    InvestorClass::Institutional,
                    2,
                )?;
                emit(
                    &mut rng,
                    synth.retail_trades_per_slot,
                    target_retail * stock.shares as f64,
                    InvestorClass::Retail,
                    31,
                )?;
            }
        }
    }
    posts_out.flush()?;
    trades_out.flush()?;
    shares_out.flush()?;
    fundamentals_out.flush()?;

    // a ready-to-run pipeline config pointing at the generated files
    let mut run_config = config.clone();
    let p = |path: PathBuf| path.to_string_lossy().into_owned();
    run_config.posts = Some(p(paths.posts()));
    run_config.trades = Some(p(paths.trades()));
    run_config.shares = Some(p(paths.shares()));
    run_config.fundamentals = Some(p(paths.fundamentals()));
    run_config.calendar = Some(p(paths.calendar()));
    run_config.lexicon_dicts = vec![p(paths.dictionary())];
    run_config.negations = Some(p(paths.negations()));
    run_config.index_series = BTreeMap::from([
        ("6".to_string(), p(paths.index_sh())),
        ("0".to_string(), p(paths.index_sz())),
    ]);
    std::fs::write(paths.config(), run_config.to_config_string())
        .with_context(|| format!("writing {}", paths.config().display()))?;
    Ok(())
}

/// The effective config produced by [`run_synth`], for callers that chain a
/// pipeline run in-process.
pub fn synth_run_config(config: &PipelineConfig) -> Result<PipelineConfig> {
    let paths = SynthPaths::new(&config.out_dir);
    crate::config::PipelineConfig::from_file(&paths.config())
}
