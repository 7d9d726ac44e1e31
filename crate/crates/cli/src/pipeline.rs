//! The batch pipeline: ingest, sentiment, metrics, regimes, panel, regress,
//! and describe stages, each resumable from the on-disk artifacts of the
//! previous one.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::{NaiveDate, NaiveDateTime};
use rayon::prelude::*;

use overtrade_core::clean::{index_effect_survivors, sparse_survivors, suspension_survivors};
use overtrade_core::data::SharesSchedule;
use overtrade_core::lexicon::{segment, Lexicon, MergeConflict};
use overtrade_core::micro::{
    classify_trade, excess_series, ClassifyThresholds, InvestorClass, SlotTurnover,
    TurnoverVariant,
};
use overtrade_core::micro::BaselineConfig;
use overtrade_core::panel::{build_panel, EtRecord, PanelRow, StockSlotKey};
use overtrade_core::regimes::{date_regimes, label_date, RegimeConfig, RegimePhase, TierThresholds};
use overtrade_core::sentiment::{
    aggregate_hour, evaluate_accuracy, record_unmatched, score_post, SignClass,
};
use overtrade_core::stats::describe;
use overtrade_core::table::{
    stars, CellOutcome, RegressionReport, SlotScope, TableOptions,
};
use overtrade_core::time::{assign_slot, HourSlot, SlotKey};

use crate::config::PipelineConfig;
use crate::formats::{
    self, create_writer, parse_post_line, read_accuracy_fixture, read_calendar,
    read_constituent_events, read_dictionary, read_fundamentals, read_index_series, read_metrics,
    read_metrics_alt, read_negations, read_panel, read_phases, read_sentiment, read_shares, MetricsAltRow, MetricsRow, RejectReason, RowParse,
};
use crate::manifest::Manifest;

/// Paths of every artifact inside the output directory.
pub struct OutPaths {
    base: PathBuf,
}

macro_rules! out_path {
    ($name:ident, $file:expr) => {
        pub fn $name(&self) -> PathBuf {
            self.base.join($file)
        }
    };
}

impl OutPaths {
    pub fn new(dir: &str) -> OutPaths {
        OutPaths {
            base: PathBuf::from(dir),
        }
    }

    pub fn base(&self) -> &Path {
        &self.base
    }

    out_path!(clean_posts, "clean_posts.tsv");
    out_path!(clean_trades, "clean_trades.tsv");
    out_path!(rejects_posts, "rejects_posts.tsv");
    out_path!(rejects_trades, "rejects_trades.tsv");
    out_path!(survivors, "survivors.txt");
    out_path!(lexicon_conflicts, "lexicon_conflicts.tsv");
    out_path!(lexicon_rejects, "lexicon_rejects.tsv");
    out_path!(sentiment, "sentiment.tsv");
    out_path!(freq_report, "freq_report.tsv");
    out_path!(accuracy, "accuracy.tsv");
    out_path!(metrics, "metrics.tsv");
    out_path!(metrics_alt, "metrics_alt.tsv");
    out_path!(phases, "phases.tsv");
    out_path!(panel, "panel.tsv");
    out_path!(reports, "reports.tsv");
    out_path!(coefficients, "coefficients.tsv");
    out_path!(describe_stats, "descriptive_stats.tsv");
    out_path!(manifest, "manifest.tsv");
}

fn build_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .context("building thread pool")
}

fn baseline_config(config: &PipelineConfig) -> BaselineConfig {
    BaselineConfig {
        window: config.window,
        min_window: config.min_window,
    }
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

struct RejectLog {
    writer: std::io::BufWriter<std::fs::File>,
    count: u64,
}

impl RejectLog {
    fn create(path: &Path) -> Result<RejectLog> {
        let mut writer = create_writer(path)?;
        writeln!(writer, "{}", formats::REJECTS_HEADER)?;
        Ok(RejectLog { writer, count: 0 })
    }

    fn log(&mut self, stock_id: &str, line_no: u64, reason: &str) -> Result<()> {
        writeln!(self.writer, "{stock_id}\t{line_no}\t{reason}")?;
        self.count += 1;
        Ok(())
    }

    fn finish(mut self) -> Result<u64> {
        self.writer.flush()?;
        Ok(self.count)
    }
}

/// Interns stock ids so the per-line bookkeeping stays allocation free.
#[derive(Default)]
struct StockTable {
    ids: BTreeMap<String, u32>,
    names: Vec<String>,
}

impl StockTable {
    fn intern(&mut self, stock_id: &str) -> u32 {
        if let Some(idx) = self.ids.get(stock_id) {
            return *idx;
        }
        let idx = self.names.len() as u32;
        self.ids.insert(stock_id.to_string(), idx);
        self.names.push(stock_id.to_string());
        idx
    }

    fn name(&self, idx: u32) -> &str {
        &self.names[idx as usize]
    }
}

/// Per-line verdict recorded in the first parse pass; the write pass streams
/// the file again without re-parsing.
#[derive(Clone, Copy)]
enum RowVerdict {
    Accept { stock: u32 },
    Bot { stock: u32 },
    Reject { stock: u32, reason: RejectReason },
}

/// Validate and clean the raw posts and trades: row-level rejections, bot
/// removal, and the sparse/suspension/index-churn stock filters. Emits the
/// cleaned streams, the rejection logs, and the surviving stock list.
pub fn run_ingest(config: &PipelineConfig) -> Result<()> {
    config.require_inputs(&[
        ("input.posts", &config.posts),
        ("input.trades", &config.trades),
        ("input.calendar", &config.calendar),
    ])?;
    let posts_path = PathBuf::from(config.posts.as_ref().unwrap());
    let trades_path = PathBuf::from(config.trades.as_ref().unwrap());
    let calendar = read_calendar(Path::new(config.calendar.as_ref().unwrap()))?;
    let out = OutPaths::new(&config.out_dir);
    let bot_ids: BTreeSet<String> = config.bot_ids.iter().cloned().collect();

    // parse pass: verdicts plus presence statistics over accepted rows
    let mut stocks = StockTable::default();
    let mut post_verdicts: Vec<RowVerdict> = Vec::new();
    let mut slot_presence: Vec<BTreeSet<SlotKey>> = Vec::new();
    formats::for_each_record_line(&posts_path, formats::POSTS_HEADER, |_, line| {
        let verdict = match formats::check_post_line(line, &calendar) {
            Ok(fields) => {
                let stock = stocks.intern(fields.stock_id);
                if bot_ids.contains(fields.author_id) {
                    RowVerdict::Bot { stock }
                } else {
                    if slot_presence.len() <= stock as usize {
                        slot_presence.resize_with(stock as usize + 1, BTreeSet::new);
                    }
                    slot_presence[stock as usize]
                        .insert(SlotKey::new(fields.posted_at.date(), fields.slot));
                    RowVerdict::Accept { stock }
                }
            }
            Err((stock_id, reason)) => RowVerdict::Reject {
                stock: stocks.intern(stock_id),
                reason,
            },
        };
        post_verdicts.push(verdict);
        Ok(())
    })?;
    let posts_rows_in = post_verdicts.len() as u64;

    let mut trade_verdicts: Vec<RowVerdict> = Vec::new();
    let mut day_presence: Vec<BTreeSet<NaiveDate>> = Vec::new();
    formats::for_each_record_line(&trades_path, formats::TRADES_HEADER, |_, line| {
        let verdict = match formats::check_trade_line(line, &calendar) {
            Ok(fields) => {
                let stock = stocks.intern(fields.stock_id);
                if day_presence.len() <= stock as usize {
                    day_presence.resize_with(stock as usize + 1, BTreeSet::new);
                }
                day_presence[stock as usize].insert(fields.traded_at.date());
                RowVerdict::Accept { stock }
            }
            Err((stock_id, reason)) => RowVerdict::Reject {
                stock: stocks.intern(stock_id),
                reason,
            },
        };
        trade_verdicts.push(verdict);
        Ok(())
    })?;
    let trades_rows_in = trade_verdicts.len() as u64;

    // the stock universe spans both files so one-sided stocks are judged too;
    // rows that never parsed a stock id are excluded from stock-level stats
    let universe: BTreeSet<String> = stocks
        .names
        .iter()
        .filter(|name| !name.is_empty())
        .cloned()
        .collect();
    let nonbot_slots: BTreeMap<String, BTreeSet<SlotKey>> = universe
        .iter()
        .map(|name| {
            let idx = stocks.ids[name] as usize;
            let set = slot_presence.get(idx).cloned().unwrap_or_default();
            (name.clone(), set)
        })
        .collect();
    let active_days: BTreeMap<String, BTreeSet<NaiveDate>> = universe
        .iter()
        .map(|name| {
            let idx = stocks.ids[name] as usize;
            let set = day_presence.get(idx).cloned().unwrap_or_default();
            (name.clone(), set)
        })
        .collect();

    let mut survivors = universe.clone();
    let mut manifest_stocks: Vec<(&str, u64)> = Vec::new();
    if config.sparse_filter {
        let counts: BTreeMap<String, u64> = universe
            .iter()
            .map(|s| {
                (
                    s.clone(),
                    nonbot_slots.get(s).map_or(0, |set| set.len() as u64),
                )
            })
            .collect();
        let kept = sparse_survivors(&counts, calendar.total_slots())
            .map_err(|e| anyhow::anyhow!("sparse filter: {e}"))?;
        manifest_stocks.push(("stocks_removed_sparse", (survivors.len() - kept.len()) as u64));
        survivors = survivors.intersection(&kept).cloned().collect();
    }
    if config.suspension_filter {
        let days: BTreeMap<String, BTreeSet<NaiveDate>> = universe
            .iter()
            .map(|s| (s.clone(), active_days.get(s).cloned().unwrap_or_default()))
            .collect();
        let kept = suspension_survivors(&days, &calendar, config.max_suspension_days);
        let removed = survivors.iter().filter(|s| !kept.contains(*s)).count() as u64;
        manifest_stocks.push(("stocks_removed_suspension", removed));
        survivors = survivors.intersection(&kept).cloned().collect();
    }
    if config.index_effect_filter {
        let path = config
            .constituents
            .as_ref()
            .context("ingest.index_effect_filter requires input.constituents")?;
        let mut events = read_constituent_events(Path::new(path))?;
        for stock in &universe {
            events.entry(stock.clone()).or_insert(0);
        }
        let kept = index_effect_survivors(&events, config.max_index_events);
        let removed = survivors.iter().filter(|s| !kept.contains(*s)).count() as u64;
        manifest_stocks.push(("stocks_removed_index_effect", removed));
        survivors = survivors.intersection(&kept).cloned().collect();
    }

    // write pass: stream each file once more, re-emitting accepted lines
    // verbatim and logging everything else; no re-parsing
    let surviving_idx: Vec<bool> = stocks
        .names
        .iter()
        .map(|name| survivors.contains(name))
        .collect();
    let write_pass = |path: &Path,
                      header: &str,
                      verdicts: &[RowVerdict],
                      clean_path: &Path,
                      rejects_path: &Path|
     -> Result<(u64, u64)> {
        let mut clean = create_writer(clean_path)?;
        writeln!(clean, "{header}")?;
        let mut rejects = RejectLog::create(rejects_path)?;
        let mut accepted: u64 = 0;
        let mut row: usize = 0;
        formats::for_each_record_line(path, header, |line_no, line| {
            match verdicts[row] {
                RowVerdict::Accept { stock } => {
                    if surviving_idx[stock as usize] {
                        accepted += 1;
                        clean.write_all(line.as_bytes())?;
                        clean.write_all(b"\n")?;
                    } else {
                        rejects.log(stocks.name(stock), line_no, "filtered-stock")?;
                    }
                }
                RowVerdict::Bot { stock } => {
                    rejects.log(stocks.name(stock), line_no, RejectReason::BotAuthor.code())?;
                }
                RowVerdict::Reject { stock, reason } => {
                    rejects.log(stocks.name(stock), line_no, reason.code())?;
                }
            }
            row += 1;
            Ok(())
        })?;
        clean.flush()?;
        Ok((accepted, rejects.finish()?))
    };
    let (posts_accepted, posts_rejected) = write_pass(
        &posts_path,
        formats::POSTS_HEADER,
        &post_verdicts,
        &out.clean_posts(),
        &out.rejects_posts(),
    )?;
    let (trades_accepted, trades_rejected) = write_pass(
        &trades_path,
        formats::TRADES_HEADER,
        &trade_verdicts,
        &out.clean_trades(),
        &out.rejects_trades(),
    )?;

    let mut survivors_file = create_writer(&out.survivors())?;
    for stock in &survivors {
        writeln!(survivors_file, "{stock}")?;
    }
    survivors_file.flush()?;

    let mut manifest = Manifest::load_or_default(&out.manifest())?;
    manifest.clear_stage("ingest");
    manifest.set("ingest", "posts_rows_in", posts_rows_in);
    manifest.set("ingest", "posts_accepted", posts_accepted);
    manifest.set("ingest", "posts_rejected", posts_rejected);
    manifest.set("ingest", "trades_rows_in", trades_rows_in);
    manifest.set("ingest", "trades_accepted", trades_accepted);
    manifest.set("ingest", "trades_rejected", trades_rejected);
    manifest.set("ingest", "calendar_days", calendar.len() as u64);
    manifest.set("ingest", "stocks_universe", universe.len() as u64);
    manifest.set("ingest", "stocks_surviving", survivors.len() as u64);
    for (metric, value) in manifest_stocks {
        manifest.set("ingest", metric, value);
    }
    manifest.write(&out.manifest())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// sentiment
// ---------------------------------------------------------------------------

/// Load the configured dictionaries and negation list, logging merge
/// conflicts and malformed lines.
pub fn load_lexicon(config: &PipelineConfig, out: &OutPaths) -> Result<Lexicon> {
    if config.lexicon_dicts.is_empty() {
        bail!("no lexicon.dict configured");
    }
    let mut sources = Vec::new();
    let mut rejects = Vec::new();
    for dict in &config.lexicon_dicts {
        let (source, mut bad) = read_dictionary(Path::new(dict))?;
        sources.push(source);
        rejects.append(&mut bad);
    }
    if let Some(neg_path) = &config.negations {
        let negations = read_negations(Path::new(neg_path))?;
        sources.push(overtrade_core::lexicon::LexiconSource {
            name: neg_path.clone(),
            weighted: Vec::new(),
            negations,
        });
    }
    let (lexicon, conflicts) = Lexicon::merge(&sources, config.conflict_policy)
        .map_err(|e| anyhow::anyhow!("lexicon merge: {e}"))?;

    let mut reject_out = create_writer(&out.lexicon_rejects())?;
    writeln!(reject_out, "file\tline\treason")?;
    for r in &rejects {
        writeln!(reject_out, "{}\t{}\t{}", r.file, r.line, r.reason)?;
    }
    reject_out.flush()?;

    let mut conflict_out = create_writer(&out.lexicon_conflicts())?;
    writeln!(conflict_out, "{}", formats::CONFLICTS_HEADER)?;
    for c in &conflicts {
        match c {
            MergeConflict::Weight {
                word,
                kept,
                kept_source,
                dropped,
                dropped_source,
            } => writeln!(
                conflict_out,
                "{word}\t{kept}\t{kept_source}\t{dropped}\t{dropped_source}"
            )?,
            MergeConflict::NegationOverlap {
                word,
                dropped_weight,
                dropped_source,
            } => writeln!(
                conflict_out,
                "{word}\tnegation\t-\t{dropped_weight}\t{dropped_source}"
            )?,
        }
    }
    conflict_out.flush()?;

    let mut manifest = Manifest::load_or_default(&out.manifest())?;
    manifest.clear_stage("lexicon");
    let (pos, neg, zero) = lexicon.weight_counts();
    manifest.set("lexicon", "positive_entries", pos as u64);
    manifest.set("lexicon", "negative_entries", neg as u64);
    manifest.set("lexicon", "neutral_entries", zero as u64);
    manifest.set("lexicon", "negation_words", lexicon.negation_count() as u64);
    manifest.set("lexicon", "merge_conflicts", conflicts.len() as u64);
    manifest.set("lexicon", "rejected_lines", rejects.len() as u64);
    manifest.write(&out.manifest())?;
    Ok(lexicon)
}

struct StockSentiment {
    stock_id: String,
    slots: Vec<(SlotKey, f64, u32, f64)>, // key, mean, posts, sum
    unmatched: BTreeMap<String, u64>,
    posts_scored: u64,
    posts_no_signal: u64,
}

/// Score the cleaned posts and aggregate the hourly sentiment index.
pub fn run_sentiment(config: &PipelineConfig) -> Result<()> {
    config.require_inputs(&[("input.calendar", &config.calendar)])?;
    let calendar = read_calendar(Path::new(config.calendar.as_ref().unwrap()))?;
    let out = OutPaths::new(&config.out_dir);
    let lexicon = load_lexicon(config, &out)?;
    let pool = build_pool(config.threads)?;

    // group cleaned posts per stock; file order is the tie-break for equal
    // timestamps within a slot
    let mut by_stock: BTreeMap<String, BTreeMap<SlotKey, Vec<(NaiveDateTime, String)>>> =
        BTreeMap::new();
    formats::for_each_record_line(&out.clean_posts(), formats::POSTS_HEADER, |_, line| {
        match parse_post_line(line, &calendar) {
            RowParse::Ok(post) => {
                let slot = assign_slot(post.posted_at.time()).expect("validated");
                by_stock
                    .entry(post.stock_id.clone())
                    .or_default()
                    .entry(SlotKey::new(post.posted_at.date(), slot))
                    .or_default()
                    .push((post.posted_at, post.text));
            }
            RowParse::Reject { reason, .. } => {
                bail!("clean_posts.tsv contains a rejected row ({})", reason.code())
            }
        }
        Ok(())
    })?;

    let stocks: Vec<(String, BTreeMap<SlotKey, Vec<(NaiveDateTime, String)>>)> =
        by_stock.into_iter().collect();
    let results: Vec<StockSentiment> = pool.install(|| {
        stocks
            .into_par_iter()
            .map(|(stock_id, slots)| {
                let mut out_slots = Vec::new();
                let mut unmatched = BTreeMap::new();
                let mut posts_scored = 0u64;
                let mut posts_no_signal = 0u64;
                for (key, mut posts) in slots {
                    posts.sort_by_key(|(at, _)| *at);
                    let mut scores = Vec::with_capacity(posts.len());
                    for (_, text) in &posts {
                        let tokens = segment(text, &lexicon);
                        record_unmatched(&tokens, &lexicon, &mut unmatched);
                        match score_post(&tokens, &lexicon) {
                            Some(score) => {
                                posts_scored += 1;
                                scores.push(score.value);
                            }
                            None => posts_no_signal += 1,
                        }
                    }
                    if let Some(hour) = aggregate_hour(&scores) {
                        out_slots.push((key, hour.value, hour.post_count, hour.sum));
                    }
                }
                StockSentiment {
                    stock_id,
                    slots: out_slots,
                    unmatched,
                    posts_scored,
                    posts_no_signal,
                }
            })
            .collect()
    });

    let mut sentiment_out = create_writer(&out.sentiment())?;
    writeln!(sentiment_out, "{}", formats::SENTIMENT_HEADER)?;
    let mut slot_rows = 0u64;
    let mut posts_scored = 0u64;
    let mut posts_no_signal = 0u64;
    let mut unmatched: BTreeMap<String, u64> = BTreeMap::new();
    for stock in &results {
        for (key, value, count, sum) in &stock.slots {
            writeln!(
                sentiment_out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                stock.stock_id, key.date, key.slot, value, count, sum
            )?;
            slot_rows += 1;
        }
        posts_scored += stock.posts_scored;
        posts_no_signal += stock.posts_no_signal;
        for (token, count) in &stock.unmatched {
            *unmatched.entry(token.clone()).or_insert(0) += count;
        }
    }
    sentiment_out.flush()?;

    // unmatched-token report for human labeling, most frequent first
    let mut freq: Vec<(&String, &u64)> = unmatched
        .iter()
        .filter(|(_, c)| **c >= config.freq_threshold)
        .collect();
    freq.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
    let mut freq_out = create_writer(&out.freq_report())?;
    writeln!(freq_out, "{}", formats::FREQ_HEADER)?;
    for (token, count) in freq {
        writeln!(freq_out, "{}\t{}", formats::escape_text(token), count)?;
    }
    freq_out.flush()?;

    let mut manifest = Manifest::load_or_default(&out.manifest())?;
    manifest.clear_stage("sentiment");
    manifest.set("sentiment", "posts_scored", posts_scored);
    manifest.set("sentiment", "posts_no_signal", posts_no_signal);
    manifest.set("sentiment", "slot_rows", slot_rows);

    if let Some(fixture) = &config.accuracy_fixture {
        let rows = read_accuracy_fixture(Path::new(fixture))?;
        let labels: Vec<SignClass> = rows.iter().map(|(_, l)| *l).collect();
        let predicted: Vec<SignClass> = rows
            .iter()
            .map(|(text, _)| {
                let tokens = segment(text, &lexicon);
                SignClass::of(score_post(&tokens, &lexicon).map(|s| s.value))
            })
            .collect();
        let matches = predicted
            .iter()
            .zip(&labels)
            .filter(|(p, l)| p == l)
            .count() as u64;
        let accuracy = evaluate_accuracy(&predicted, &labels)
            .map_err(|e| anyhow::anyhow!("accuracy fixture: {e}"))?;
        let mut acc_out = create_writer(&out.accuracy())?;
        writeln!(acc_out, "posts\tmatches\taccuracy")?;
        writeln!(acc_out, "{}\t{}\t{}", labels.len(), matches, accuracy)?;
        acc_out.flush()?;
        manifest.set("sentiment", "fixture_posts", labels.len() as u64);
        manifest.set("sentiment", "fixture_matches", matches);
    }
    manifest.write(&out.manifest())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

#[derive(Default, Clone, Copy)]
struct ClassSums {
    // [inst, retail, inst_alt, retail_alt]
    value: [f64; 4],
    volume: [f64; 4],
}

/// Compute per-slot turnover and the rolling excess-turnover series under
/// both classification thresholds.
pub fn run_metrics(config: &PipelineConfig) -> Result<()> {
    config.require_inputs(&[
        ("input.shares", &config.shares),
        ("input.calendar", &config.calendar),
    ])?;
    let calendar = read_calendar(Path::new(config.calendar.as_ref().unwrap()))?;
    let out = OutPaths::new(&config.out_dir);
    let schedule = SharesSchedule::new(read_shares(Path::new(config.shares.as_ref().unwrap()))?)
        .map_err(|e| anyhow::anyhow!("shares: {e}"))?;
    let pool = build_pool(config.threads)?;

    let thresholds = ClassifyThresholds {
        amount: config.amount_threshold,
        shares: config.share_threshold,
    };
    let alt_thresholds = ClassifyThresholds {
        amount: config.alt_amount_threshold,
        shares: config.share_threshold,
    };

    struct StockFold {
        sums: BTreeMap<SlotKey, ClassSums>,
        first: NaiveDate,
        last: NaiveDate,
    }
    let mut folds: BTreeMap<String, StockFold> = BTreeMap::new();
    formats::for_each_record_line(&out.clean_trades(), formats::TRADES_HEADER, |_, line| {
        match formats::check_trade_line(line, &calendar) {
            Ok(tick) => {
                let date = tick.traded_at.date();
                // one allocation per stock, not per tick
                let fold = match folds.get_mut(tick.stock_id) {
                    Some(fold) => fold,
                    None => folds.entry(tick.stock_id.to_string()).or_insert(StockFold {
                        sums: BTreeMap::new(),
                        first: date,
                        last: date,
                    }),
                };
                fold.first = fold.first.min(date);
                fold.last = fold.last.max(date);
                let entry = fold
                    .sums
                    .entry(SlotKey::new(date, tick.slot))
                    .or_default();
                let value = tick.price * tick.volume as f64;
                let volume = tick.volume as f64;
                let idx = match classify_trade(tick.price, tick.volume, &thresholds) {
                    InvestorClass::Institutional => 0,
                    InvestorClass::Retail => 1,
                };
                entry.value[idx] += value;
                entry.volume[idx] += volume;
                let alt_idx = match classify_trade(tick.price, tick.volume, &alt_thresholds) {
                    InvestorClass::Institutional => 2,
                    InvestorClass::Retail => 3,
                };
                entry.value[alt_idx] += value;
                entry.volume[alt_idx] += volume;
            }
            Err((_, reason)) => {
                bail!("clean_trades.tsv contains a rejected row ({})", reason.code())
            }
        }
        Ok(())
    })?;

    // per stock: materialize the full slot grid over the listed span, apply
    // the turnover variant (and optional within-day accumulation), and roll
    // the excess-turnover baselines
    let folds: Vec<(String, StockFold)> = folds.into_iter().collect();
    let variant = config.turnover_variant;
    let cumulative = config.cumulative_turnover;
    let baseline = baseline_config(config);
    let mode = config.baseline_mode;

    type StockRows = Vec<(SlotKey, MetricsRow, MetricsAltRow)>;
    let per_stock: Vec<Result<(String, StockRows)>> = pool.install(|| {
        folds
            .par_iter()
            .map(|(stock_id, fold)| {
                let mut series: Vec<(SlotKey, SlotTurnover)> = Vec::new();
                let mut alt_series: Vec<(SlotKey, SlotTurnover)> = Vec::new();
                for date in calendar.days_between(fold.first, fold.last) {
                    let shares = schedule.shares_on(stock_id, *date).with_context(|| {
                        format!("metrics: missing shares for {stock_id} on {date}")
                    })?;
                    let shares_f = shares as f64;
                    let mut day_acc = [0.0f64; 4];
                    for slot in HourSlot::ALL {
                        let key = SlotKey::new(*date, slot);
                        let cell = fold.sums.get(&key).copied().unwrap_or_default();
                        let numer = match variant {
                            TurnoverVariant::ValueOverShares => cell.value,
                            TurnoverVariant::VolumeOverShares => cell.volume,
                        };
                        let effective = if cumulative {
                            for (acc, n) in day_acc.iter_mut().zip(numer.iter()) {
                                *acc += n;
                            }
                            day_acc
                        } else {
                            numer
                        };
                        let inst = effective[0] / shares_f;
                        let retail = effective[1] / shares_f;
                        let inst_alt = effective[2] / shares_f;
                        let retail_alt = effective[3] / shares_f;
                        series.push((
                            key,
                            SlotTurnover {
                                total: inst + retail,
                                institutional: inst,
                                retail,
                            },
                        ));
                        alt_series.push((
                            key,
                            SlotTurnover {
                                total: inst_alt + retail_alt,
                                institutional: inst_alt,
                                retail: retail_alt,
                            },
                        ));
                    }
                }
                let excess = excess_series(&series, mode, &baseline)
                    .map_err(|e| anyhow::anyhow!("metrics: {stock_id}: {e}"))?;
                let alt_excess = excess_series(&alt_series, mode, &baseline)
                    .map_err(|e| anyhow::anyhow!("metrics: {stock_id}: {e}"))?;
                let rows: StockRows = series
                    .iter()
                    .zip(&alt_series)
                    .zip(excess.iter().zip(&alt_excess))
                    .map(|(((key, t), (_, t_alt)), ((_, e), (_, e_alt)))| {
                        let window_used = e
                            .total
                            .map(|x| x.window_used)
                            .unwrap_or(0);
                        (
                            *key,
                            MetricsRow {
                                turnover_total: t.total,
                                turnover_inst: t.institutional,
                                turnover_retail: t.retail,
                                et_total: e.total.map(|x| x.value),
                                et_inst: e.institutional.map(|x| x.value),
                                et_retail: e.retail.map(|x| x.value),
                                window_used,
                            },
                            MetricsAltRow {
                                turnover_inst: t_alt.institutional,
                                turnover_retail: t_alt.retail,
                                et_inst: e_alt.institutional.map(|x| x.value),
                                et_retail: e_alt.retail.map(|x| x.value),
                                window_used,
                            },
                        )
                    })
                    .collect();
                Ok((stock_id.clone(), rows))
            })
            .collect()
    });

    let mut metrics_out = create_writer(&out.metrics())?;
    writeln!(metrics_out, "{}", formats::METRICS_HEADER)?;
    let mut alt_out = create_writer(&out.metrics_alt())?;
    writeln!(alt_out, "{}", formats::METRICS_ALT_HEADER)?;
    let mut slot_rows = 0u64;
    let mut et_rows = 0u64;
    for result in per_stock {
        let (stock_id, rows) = result?;
        for (key, row, alt) in rows {
            writeln!(
                metrics_out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                stock_id,
                key.date,
                key.slot,
                row.turnover_total,
                row.turnover_inst,
                row.turnover_retail,
                formats::fmt_opt(row.et_total),
                formats::fmt_opt(row.et_inst),
                formats::fmt_opt(row.et_retail),
                row.window_used
            )?;
            writeln!(
                alt_out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                stock_id,
                key.date,
                key.slot,
                alt.turnover_inst,
                alt.turnover_retail,
                formats::fmt_opt(alt.et_inst),
                formats::fmt_opt(alt.et_retail),
                alt.window_used
            )?;
            slot_rows += 1;
            if row.et_total.is_some() {
                et_rows += 1;
            }
        }
    }
    metrics_out.flush()?;
    alt_out.flush()?;

    let mut manifest = Manifest::load_or_default(&out.manifest())?;
    manifest.clear_stage("metrics");
    manifest.set("metrics", "slot_rows", slot_rows);
    manifest.set("metrics", "slots_with_baseline", et_rows);
    manifest.write(&out.manifest())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// regimes
// ---------------------------------------------------------------------------

/// Date bull/bear phases for every configured index series.
pub fn run_regimes(config: &PipelineConfig) -> Result<()> {
    if config.index_series.is_empty() {
        bail!("no input.index.<prefix> series configured");
    }
    let out = OutPaths::new(&config.out_dir);
    let regime_config = RegimeConfig {
        window: config.regime_window,
        min_phase: config.regime_min_phase,
    };
    let mut phases_out = create_writer(&out.phases())?;
    writeln!(phases_out, "{}", formats::PHASES_HEADER)?;
    let mut phase_rows = 0u64;
    for (index_id, path) in &config.index_series {
        let series = read_index_series(Path::new(path))?;
        let phases = date_regimes(&series, &regime_config)
            .map_err(|e| anyhow::anyhow!("regimes: {index_id}: {e}"))?;
        for phase in &phases {
            writeln!(
                phases_out,
                "{}\t{}\t{}\t{}",
                index_id, phase.kind, phase.start, phase.end
            )?;
            phase_rows += 1;
        }
    }
    phases_out.flush()?;

    let mut manifest = Manifest::load_or_default(&out.manifest())?;
    manifest.clear_stage("regimes");
    manifest.set("regimes", "indices", config.index_series.len() as u64);
    manifest.set("regimes", "phases", phase_rows);
    manifest.write(&out.manifest())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// panel
// ---------------------------------------------------------------------------

/// Resolve the phase list governing a stock: the longest configured prefix
/// that matches the stock id, falling back to `default`.
fn phases_for_stock<'a>(
    stock_id: &str,
    phases: &'a BTreeMap<String, Vec<RegimePhase>>,
) -> Option<&'a [RegimePhase]> {
    let mut best: Option<(&str, &Vec<RegimePhase>)> = None;
    for (prefix, list) in phases {
        if prefix != "default" && stock_id.starts_with(prefix.as_str()) {
            match best {
                Some((b, _)) if b.len() >= prefix.len() => {}
                _ => best = Some((prefix, list)),
            }
        }
    }
    best.map(|(_, list)| list.as_slice())
        .or_else(|| phases.get("default").map(|v| v.as_slice()))
}

/// Join sentiment, metrics, regimes, tiers, and controls into panel rows.
pub fn run_panel(config: &PipelineConfig) -> Result<()> {
    let out = OutPaths::new(&config.out_dir);
    let sentiment_raw = read_sentiment(&out.sentiment())?;
    let metrics = read_metrics(&out.metrics())?;
    let metrics_alt = read_metrics_alt(&out.metrics_alt())?;
    let phases = if out.phases().exists() {
        read_phases(&out.phases())?
    } else {
        BTreeMap::new()
    };
    let fundamentals = match &config.fundamentals {
        Some(path) => read_fundamentals(Path::new(path))?,
        None => BTreeMap::new(),
    };

    let sentiment: BTreeMap<StockSlotKey, f64> = sentiment_raw
        .into_iter()
        .map(|(key, (value, _, _))| (key, value))
        .collect();
    let et: BTreeMap<StockSlotKey, EtRecord> = metrics
        .iter()
        .map(|(key, row)| {
            let alt = metrics_alt.get(key);
            (
                key.clone(),
                EtRecord {
                    et_all: row.et_total,
                    et_inst: row.et_inst,
                    et_retail: row.et_retail,
                    et_inst_alt: alt.and_then(|a| a.et_inst),
                    et_retail_alt: alt.and_then(|a| a.et_retail),
                },
            )
        })
        .collect();

    let tier_thresholds = TierThresholds {
        large: config.tier_large,
        mid: config.tier_mid,
    };
    let rows = build_panel(&sentiment, &et, &fundamentals, &tier_thresholds, |stock, date| {
        phases_for_stock(stock, &phases)
            .and_then(|list| label_date(date, list).ok())
    })
    .map_err(|e| anyhow::anyhow!("panel: {e}"))?;

    let mut panel_out = create_writer(&out.panel())?;
    writeln!(panel_out, "{}", formats::PANEL_HEADER)?;
    for row in &rows {
        writeln!(
            panel_out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            row.stock_id,
            row.date,
            row.slot,
            formats::fmt_opt(row.et.et_all),
            formats::fmt_opt(row.et.et_inst),
            formats::fmt_opt(row.et.et_retail),
            formats::fmt_opt(row.et.et_inst_alt),
            formats::fmt_opt(row.et.et_retail_alt),
            row.s_lag1,
            formats::fmt_opt(row.s_lag2),
            formats::fmt_opt(row.s_lag3),
            formats::fmt_opt(row.pb),
            formats::fmt_opt(row.market_risk_premium),
            formats::fmt_opt(row.market_return),
            row.regime.map(|r| r.label()).unwrap_or(formats::NA),
            row.tier.map(|t| t.label()).unwrap_or(formats::NA),
        )?;
    }
    panel_out.flush()?;

    let mut manifest = Manifest::load_or_default(&out.manifest())?;
    manifest.clear_stage("panel");
    manifest.set("panel", "rows", rows.len() as u64);
    manifest.write(&out.manifest())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// regress
// ---------------------------------------------------------------------------

fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt6_opt(v: Option<f64>) -> String {
    v.map(fmt6).unwrap_or_else(|| formats::NA.to_string())
}

/// Fit the full report grid over the panel.
pub fn run_regress(config: &PipelineConfig) -> Result<()> {
    let out = OutPaths::new(&config.out_dir);
    let rows = read_panel(&out.panel())?;
    let options = TableOptions {
        toggles: config.toggles,
        lm_lags: config.lm_lags,
        robust_se: config.robust_se,
    };
    let pool = build_pool(config.threads)?;
    let reports: Vec<RegressionReport> = pool.install(|| {
        overtrade_core::table::cell_grid(&options.toggles)
            .into_par_iter()
            .map(|cell| RegressionReport {
                outcome: overtrade_core::table::fit_cell(&rows, &cell, &options),
                cell,
            })
            .collect()
    });

    let mut report_out = create_writer(&out.reports())?;
    writeln!(
        report_out,
        "cell\tfilter\tclass\tslot\tvariant\tstatus\tn\talpha\talpha_se\talpha_t\talpha_p\t\
         alpha_stars\tbeta\tbeta_se\tbeta_t\tbeta_p\tbeta_stars\tadj_r2\tf_stat\twald_chi2\t\
         white_stat\twhite_p\tlm_stat\tlm_p"
    )?;
    let mut coef_out = create_writer(&out.coefficients())?;
    writeln!(coef_out, "cell\tname\testimate\tse\tt\tp\tstars")?;
    let mut fitted = 0u64;
    let mut insufficient = 0u64;
    for report in &reports {
        let cell = &report.cell;
        let slot_label = match cell.scope {
            SlotScope::Slot(slot) => slot.label().to_string(),
            SlotScope::Pooled => "pooled".to_string(),
        };
        match &report.outcome {
            CellOutcome::Fit(fit) => {
                fitted += 1;
                let alpha = &fit.coefficients[0];
                let beta = &fit.coefficients[1];
                writeln!(
                    report_out,
                    "{}\t{}\t{}\t{}\t{}\tok\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    cell.code(),
                    cell.filter.label(),
                    cell.class.label(),
                    slot_label,
                    cell.variant.label(),
                    fit.n_obs,
                    fmt6(alpha.estimate),
                    fmt6(alpha.se),
                    fmt6(alpha.t_stat),
                    fmt6(alpha.p_value),
                    stars(alpha.p_value),
                    fmt6(beta.estimate),
                    fmt6(beta.se),
                    fmt6(beta.t_stat),
                    fmt6(beta.p_value),
                    stars(beta.p_value),
                    fmt6(fit.adj_r_squared),
                    fmt6(fit.f_statistic),
                    fmt6(fit.wald_chi2),
                    fmt6_opt(fit.white.map(|w| w.statistic)),
                    fmt6_opt(fit.white.map(|w| w.p_value)),
                    fmt6_opt(fit.lm.map(|l| l.statistic)),
                    fmt6_opt(fit.lm.map(|l| l.p_value)),
                )?;
                for coef in &fit.coefficients {
                    writeln!(
                        coef_out,
                        "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                        cell.code(),
                        coef.name,
                        fmt6(coef.estimate),
                        fmt6(coef.se),
                        fmt6(coef.t_stat),
                        fmt6(coef.p_value),
                        stars(coef.p_value)
                    )?;
                }
            }
            CellOutcome::Insufficient(reason) => {
                insufficient += 1;
                let na = formats::NA;
                writeln!(
                    report_out,
                    "{}\t{}\t{}\t{}\t{}\t{}\t0\t{na}\t{na}\t{na}\t{na}\t\t{na}\t{na}\t{na}\t{na}\t\t{na}\t{na}\t{na}\t{na}\t{na}\t{na}\t{na}",
                    cell.code(),
                    cell.filter.label(),
                    cell.class.label(),
                    slot_label,
                    cell.variant.label(),
                    reason.label(),
                )?;
            }
        }
    }
    report_out.flush()?;
    coef_out.flush()?;

    let mut manifest = Manifest::load_or_default(&out.manifest())?;
    manifest.clear_stage("regress");
    manifest.set("regress", "cells", reports.len() as u64);
    manifest.set("regress", "cells_fitted", fitted);
    manifest.set("regress", "cells_insufficient", insufficient);
    manifest.write(&out.manifest())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// describe
// ---------------------------------------------------------------------------

/// Descriptive statistics of the panel columns.
pub fn run_describe(config: &PipelineConfig) -> Result<()> {
    let out = OutPaths::new(&config.out_dir);
    let rows = read_panel(&out.panel())?;
    let columns: [(&str, Box<dyn Fn(&PanelRow) -> Option<f64>>); 9] = [
        ("sentiment_lag1", Box::new(|r: &PanelRow| Some(r.s_lag1))),
        ("et_all", Box::new(|r: &PanelRow| r.et.et_all)),
        ("et_inst", Box::new(|r: &PanelRow| r.et.et_inst)),
        ("et_retail", Box::new(|r: &PanelRow| r.et.et_retail)),
        ("et_inst_alt", Box::new(|r: &PanelRow| r.et.et_inst_alt)),
        ("et_retail_alt", Box::new(|r: &PanelRow| r.et.et_retail_alt)),
        ("pb", Box::new(|r: &PanelRow| r.pb)),
        ("mrp", Box::new(|r: &PanelRow| r.market_risk_premium)),
        ("mret", Box::new(|r: &PanelRow| r.market_return)),
    ];
    let mut describe_out = create_writer(&out.describe_stats())?;
    writeln!(describe_out, "{}", formats::DESCRIBE_HEADER)?;
    for (name, extract) in &columns {
        let values: Vec<f64> = rows.iter().filter_map(|r| extract(r)).collect();
        if values.is_empty() {
            let na = formats::NA;
            writeln!(describe_out, "{name}\t0\t{na}\t{na}\t{na}\t{na}")?;
            continue;
        }
        let stats = describe(&values).map_err(|e| anyhow::anyhow!("describe {name}: {e}"))?;
        writeln!(
            describe_out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            name,
            stats.n,
            fmt6(stats.mean),
            fmt6(stats.std),
            fmt6(stats.max),
            fmt6(stats.min)
        )?;
    }
    describe_out.flush()?;

    let mut manifest = Manifest::load_or_default(&out.manifest())?;
    manifest.clear_stage("describe");
    manifest.set("describe", "panel_rows", rows.len() as u64);
    manifest.write(&out.manifest())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

/// Run every stage in order. Errors carry the failing stage's name.
pub fn run_pipeline(config: &PipelineConfig) -> Result<()> {
    run_ingest(config).context("stage ingest")?;
    run_sentiment(config).context("stage sentiment")?;
    run_metrics(config).context("stage metrics")?;
    if !config.index_series.is_empty() {
        run_regimes(config).context("stage regimes")?;
    }
    run_panel(config).context("stage panel")?;
    run_regress(config).context("stage regress")?;
    run_describe(config).context("stage describe")?;
    Ok(())
}
