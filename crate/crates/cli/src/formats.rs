//! Tab-separated file formats: the input record layouts, every pipeline
//! artifact, and the escaping rules for free text.
//!
//! All record files carry a header line naming their columns; the calendar,
//! negation list, and survivor list are plain one-value-per-line files.
//! Free-text fields escape tab, newline, carriage return, and backslash as
//! `\t`, `\n`, `\r`, `\\`. Missing optional values are written as `NA`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use chrono::{NaiveDate, NaiveDateTime};

use overtrade_core::data::{DailyFundamentals, Post, SharesOutstanding, TradeTick};
use overtrade_core::lexicon::LexiconSource;
use overtrade_core::panel::{EtRecord, PanelRow};
use overtrade_core::regimes::{CapTier, IndexSeries, PhaseKind, RegimePhase};
use overtrade_core::sentiment::SignClass;
use overtrade_core::time::{assign_slot, HourSlot, TradingCalendar};

pub const POSTS_HEADER: &str = "stock_id\ttimestamp\tauthor_id\ttext";
pub const TRADES_HEADER: &str = "stock_id\ttimestamp\tprice\tvolume";
pub const SHARES_HEADER: &str = "stock_id\tdate\tshares";
pub const FUNDAMENTALS_HEADER: &str =
    "stock_id\tdate\tpb\tmarket_risk_premium\tmarket_return\tfloat_cap";
pub const INDEX_HEADER: &str = "date\tlevel";
pub const CONSTITUENTS_HEADER: &str = "stock_id\tdate\tevent";
pub const REJECTS_HEADER: &str = "stock_id\tline\treason";
pub const SENTIMENT_HEADER: &str = "stock_id\tdate\tslot\tvalue\tpost_count\tvalue_sum";
pub const METRICS_HEADER: &str = "stock_id\tdate\tslot\tturnover_total\tturnover_inst\t\
                                  turnover_retail\tet_total\tet_inst\tet_retail\twindow_used";
pub const METRICS_ALT_HEADER: &str =
    "stock_id\tdate\tslot\tturnover_inst\tturnover_retail\tet_inst\tet_retail\twindow_used";
pub const PHASES_HEADER: &str = "index_id\tkind\tstart\tend";
pub const PANEL_HEADER: &str = "stock_id\tdate\tslot\tet_all\tet_inst\tet_retail\tet_inst_alt\t\
                                et_retail_alt\ts_lag1\ts_lag2\ts_lag3\tpb\tmrp\tmret\tregime\ttier";
pub const FREQ_HEADER: &str = "token\tcount";
pub const CONFLICTS_HEADER: &str = "word\tkept\tkept_source\tdropped\tdropped_source";
pub const MANIFEST_HEADER: &str = "stage\tmetric\tvalue";
pub const DESCRIBE_HEADER: &str = "variable\tn\tmean\tstd\tmax\tmin";
pub const NA: &str = "NA";

/// Escape a free-text field for a single TSV cell.
pub fn escape_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            _ => out.push(ch),
        }
    }
    out
}

/// Inverse of [`escape_text`]. Unknown escapes keep the backslash literally.
pub fn unescape_text(field: &str) -> String {
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(ch) = chars.next() {
        if ch != '\\' {
            out.push(ch);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

/// Row-level rejection reasons recorded in the reject logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    MalformedRow,
    MissingTimestamp,
    BadTimestamp,
    NonTradingDay,
    OutsideTradingHours,
    EmptyText,
    BadPrice,
    BadVolume,
    BotAuthor,
}

impl RejectReason {
    pub fn code(self) -> &'static str {
        match self {
            RejectReason::MalformedRow => "malformed-row",
            RejectReason::MissingTimestamp => "missing-timestamp",
            RejectReason::BadTimestamp => "bad-timestamp",
            RejectReason::NonTradingDay => "non-trading-day",
            RejectReason::OutsideTradingHours => "outside-trading-hours",
            RejectReason::EmptyText => "empty-text",
            RejectReason::BadPrice => "bad-price",
            RejectReason::BadVolume => "bad-volume",
            RejectReason::BotAuthor => "bot-author",
        }
    }
}

/// Outcome of parsing one input row.
pub enum RowParse<T> {
    Ok(T),
    /// Reject with the stock id when the row carried one.
    Reject { stock_id: String, reason: RejectReason },
}

fn digits(bytes: &[u8], offset: usize, len: usize) -> Option<u32> {
    let mut value = 0u32;
    for b in &bytes[offset..offset + len] {
        let d = b.wrapping_sub(b'0');
        if d > 9 {
            return None;
        }
        value = value * 10 + d as u32;
    }
    Some(value)
}

/// Parse a zero-padded ISO-8601 timestamp, `YYYY-MM-DD[T ]HH:MM[:SS]`.
pub fn parse_timestamp(field: &str) -> Option<NaiveDateTime> {
    let b = field.as_bytes();
    if b.len() != 16 && b.len() != 19 {
        return None;
    }
    if b[4] != b'-' || b[7] != b'-' || (b[10] != b'T' && b[10] != b' ') || b[13] != b':' {
        return None;
    }
    let date = NaiveDate::from_ymd_opt(
        digits(b, 0, 4)? as i32,
        digits(b, 5, 2)?,
        digits(b, 8, 2)?,
    )?;
    let second = if b.len() == 19 {
        if b[16] != b':' {
            return None;
        }
        digits(b, 17, 2)?
    } else {
        0
    };
    let time = chrono::NaiveTime::from_hms_opt(digits(b, 11, 2)?, digits(b, 14, 2)?, second)?;
    Some(NaiveDateTime::new(date, time))
}

/// True when the escaped text field holds nothing but whitespace once
/// unescaped (so the row is an empty-text reject), without allocating.
pub fn escaped_text_is_blank(raw: &str) -> bool {
    let mut chars = raw.chars();
    while let Some(ch) = chars.next() {
        match ch {
            '\\' => match chars.next() {
                Some('t') | Some('n') | Some('r') => {}
                // a trailing or escaped backslash unescapes to content
                _ => return false,
            },
            c if c.is_whitespace() => {}
            _ => return false,
        }
    }
    true
}

fn timestamp_of(
    field: &str,
    calendar: &TradingCalendar,
) -> Result<(NaiveDateTime, HourSlot), RejectReason> {
    if field.trim().is_empty() {
        return Err(RejectReason::MissingTimestamp);
    }
    let at = parse_timestamp(field).ok_or(RejectReason::BadTimestamp)?;
    if !calendar.contains(at.date()) {
        return Err(RejectReason::NonTradingDay);
    }
    let slot = assign_slot(at.time()).ok_or(RejectReason::OutsideTradingHours)?;
    Ok((at, slot))
}

fn four_fields(line: &str) -> Option<(&str, &str, &str, &str)> {
    let mut it = line.split('\t');
    let a = it.next()?;
    let b = it.next()?;
    let c = it.next()?;
    let d = it.next()?;
    if it.next().is_some() {
        return None;
    }
    Some((a, b, c, d))
}

/// A validated post row borrowing from its line; `text_raw` is still escaped.
#[derive(Debug, Clone, Copy)]
pub struct PostFields<'a> {
    pub stock_id: &'a str,
    pub posted_at: NaiveDateTime,
    pub slot: HourSlot,
    pub author_id: &'a str,
    pub text_raw: &'a str,
}

/// Allocation-free row check used by the streaming passes.
pub fn check_post_line<'a>(
    line: &'a str,
    calendar: &TradingCalendar,
) -> Result<PostFields<'a>, (&'a str, RejectReason)> {
    let Some((stock_id, ts, author_id, text_raw)) = four_fields(line) else {
        let first = line.split('\t').next().unwrap_or("");
        return Err((first, RejectReason::MalformedRow));
    };
    if stock_id.is_empty() {
        return Err(("", RejectReason::MalformedRow));
    }
    let (posted_at, slot) =
        timestamp_of(ts, calendar).map_err(|reason| (stock_id, reason))?;
    if escaped_text_is_blank(text_raw) {
        return Err((stock_id, RejectReason::EmptyText));
    }
    Ok(PostFields {
        stock_id,
        posted_at,
        slot,
        author_id,
        text_raw,
    })
}

/// A validated trade row borrowing from its line.
#[derive(Debug, Clone, Copy)]
pub struct TradeFields<'a> {
    pub stock_id: &'a str,
    pub traded_at: NaiveDateTime,
    pub slot: HourSlot,
    pub price: f64,
    pub volume: u64,
}

pub fn check_trade_line<'a>(
    line: &'a str,
    calendar: &TradingCalendar,
) -> Result<TradeFields<'a>, (&'a str, RejectReason)> {
    let Some((stock_id, ts, price_s, volume_s)) = four_fields(line) else {
        let first = line.split('\t').next().unwrap_or("");
        return Err((first, RejectReason::MalformedRow));
    };
    if stock_id.is_empty() {
        return Err(("", RejectReason::MalformedRow));
    }
    let (traded_at, slot) =
        timestamp_of(ts, calendar).map_err(|reason| (stock_id, reason))?;
    let price = price_s
        .parse::<f64>()
        .ok()
        .filter(|p| p.is_finite() && *p > 0.0)
        .ok_or((stock_id, RejectReason::BadPrice))?;
    let volume = volume_s
        .parse::<u64>()
        .ok()
        .filter(|v| *v > 0)
        .ok_or((stock_id, RejectReason::BadVolume))?;
    Ok(TradeFields {
        stock_id,
        traded_at,
        slot,
        price,
        volume,
    })
}

/// Parse one post row into an owned record.
pub fn parse_post_line(line: &str, calendar: &TradingCalendar) -> RowParse<Post> {
    match check_post_line(line, calendar) {
        Ok(fields) => RowParse::Ok(Post {
            stock_id: fields.stock_id.to_string(),
            posted_at: fields.posted_at,
            author_id: fields.author_id.to_string(),
            text: unescape_text(fields.text_raw),
        }),
        Err((stock_id, reason)) => RowParse::Reject {
            stock_id: stock_id.to_string(),
            reason,
        },
    }
}

/// Parse one trade row into an owned record.
pub fn parse_trade_line(line: &str, calendar: &TradingCalendar) -> RowParse<TradeTick> {
    match check_trade_line(line, calendar) {
        Ok(fields) => RowParse::Ok(TradeTick {
            stock_id: fields.stock_id.to_string(),
            traded_at: fields.traded_at,
            price: fields.price,
            volume: fields.volume,
        }),
        Err((stock_id, reason)) => RowParse::Reject {
            stock_id: stock_id.to_string(),
            reason,
        },
    }
}

/// Stream the data lines of a headered record file. The callback receives the
/// 1-based physical line number (the header is line 1) and the raw line.
pub fn for_each_record_line(
    path: &Path,
    expected_header: &str,
    mut f: impl FnMut(u64, &str) -> Result<()>,
) -> Result<()> {
    let file =
        File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut reader = BufReader::new(file);
    let mut line = String::new();
    let mut line_no: u64 = 0;
    loop {
        line.clear();
        let read = reader
            .read_line(&mut line)
            .with_context(|| format!("reading {}", path.display()))?;
        if read == 0 {
            break;
        }
        line_no += 1;
        let trimmed = line.strip_suffix('\n').unwrap_or(&line);
        let trimmed = trimmed.strip_suffix('\r').unwrap_or(trimmed);
        if line_no == 1 {
            if trimmed != expected_header {
                bail!(
                    "{}: unexpected header {:?}, expected {:?}",
                    path.display(),
                    trimmed,
                    expected_header
                );
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        f(line_no, trimmed)?;
    }
    Ok(())
}

pub fn read_calendar(path: &Path) -> Result<TradingCalendar> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading calendar {}", path.display()))?;
    let mut days = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let date: NaiveDate = t
            .parse()
            .with_context(|| format!("calendar line {}: bad date {t:?}", i + 1))?;
        days.push(date);
    }
    TradingCalendar::new(days).context("calendar is empty")
}

pub fn read_shares(path: &Path) -> Result<Vec<SharesOutstanding>> {
    let mut rows = Vec::new();
    for_each_record_line(path, SHARES_HEADER, |line_no, line| {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            bail!("{}: line {line_no}: expected 3 fields", path.display());
        }
        rows.push(SharesOutstanding {
            stock_id: fields[0].to_string(),
            effective_date: fields[1]
                .parse()
                .with_context(|| format!("line {line_no}: bad date"))?,
            shares: fields[2]
                .parse()
                .with_context(|| format!("line {line_no}: bad share count"))?,
        });
        Ok(())
    })?;
    Ok(rows)
}

pub fn read_fundamentals(
    path: &Path,
) -> Result<BTreeMap<(String, NaiveDate), DailyFundamentals>> {
    let mut rows = BTreeMap::new();
    for_each_record_line(path, FUNDAMENTALS_HEADER, |line_no, line| {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            bail!("{}: line {line_no}: expected 6 fields", path.display());
        }
        let date: NaiveDate = fields[1]
            .parse()
            .with_context(|| format!("line {line_no}: bad date"))?;
        let num = |i: usize, name: &str| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .with_context(|| format!("line {line_no}: bad {name}"))
        };
        let row = DailyFundamentals {
            stock_id: fields[0].to_string(),
            date,
            pb: num(2, "pb")?,
            market_risk_premium: num(3, "market_risk_premium")?,
            market_return: num(4, "market_return")?,
            float_cap: num(5, "float_cap")?,
        };
        if rows
            .insert((row.stock_id.clone(), row.date), row)
            .is_some()
        {
            bail!(
                "{}: line {line_no}: duplicate (stock, date) key",
                path.display()
            );
        }
        Ok(())
    })?;
    Ok(rows)
}

pub fn read_index_series(path: &Path) -> Result<IndexSeries> {
    let mut points = Vec::new();
    for_each_record_line(path, INDEX_HEADER, |line_no, line| {
        let (date_s, level_s) = line
            .split_once('\t')
            .with_context(|| format!("line {line_no}: expected 2 fields"))?;
        points.push((
            date_s
                .parse::<NaiveDate>()
                .with_context(|| format!("line {line_no}: bad date"))?,
            level_s
                .parse::<f64>()
                .with_context(|| format!("line {line_no}: bad level"))?,
        ));
        Ok(())
    })?;
    IndexSeries::new(points).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

/// Count membership events (enter/leave) per stock.
pub fn read_constituent_events(path: &Path) -> Result<BTreeMap<String, u32>> {
    let mut events = BTreeMap::new();
    for_each_record_line(path, CONSTITUENTS_HEADER, |line_no, line| {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            bail!("{}: line {line_no}: expected 3 fields", path.display());
        }
        fields[1]
            .parse::<NaiveDate>()
            .with_context(|| format!("line {line_no}: bad date"))?;
        if !matches!(fields[2], "enter" | "leave") {
            bail!("{}: line {line_no}: event must be enter or leave", path.display());
        }
        *events.entry(fields[0].to_string()).or_insert(0) += 1;
        Ok(())
    })?;
    Ok(events)
}

/// A malformed lexicon line, logged rather than fatal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconReject {
    pub file: String,
    pub line: u64,
    pub reason: &'static str,
}

/// Read one dictionary file (`word<TAB>weight` per line, no header).
pub fn read_dictionary(path: &Path) -> Result<(LexiconSource, Vec<LexiconReject>)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading dictionary {}", path.display()))?;
    let name = path.display().to_string();
    let mut source = LexiconSource {
        name: name.clone(),
        weighted: Vec::new(),
        negations: Vec::new(),
    };
    let mut rejects = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i as u64 + 1;
        if line.trim().is_empty() {
            continue;
        }
        let Some((word, weight_s)) = line.split_once('\t') else {
            rejects.push(LexiconReject {
                file: name.clone(),
                line: line_no,
                reason: "malformed-line",
            });
            continue;
        };
        let word = word.trim();
        let Ok(weight) = weight_s.trim().parse::<i8>() else {
            rejects.push(LexiconReject {
                file: name.clone(),
                line: line_no,
                reason: "bad-weight",
            });
            continue;
        };
        if word.is_empty() || !(-1..=1).contains(&weight) {
            rejects.push(LexiconReject {
                file: name.clone(),
                line: line_no,
                reason: "bad-entry",
            });
            continue;
        }
        source.weighted.push((word.to_string(), weight));
    }
    Ok((source, rejects))
}

/// Read the negation list (one word per line, no header).
pub fn read_negations(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading negations {}", path.display()))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

/// Read the labeled accuracy fixture: `text<TAB>label` per line, no header.
pub fn read_accuracy_fixture(path: &Path) -> Result<Vec<(String, SignClass)>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading fixture {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (post, label) = line
            .split_once('\t')
            .with_context(|| format!("fixture line {}: expected 2 fields", i + 1))?;
        let label = SignClass::parse_label(label.trim())
            .with_context(|| format!("fixture line {}: unknown label", i + 1))?;
        rows.push((unescape_text(post), label));
    }
    Ok(rows)
}

/// Open a buffered writer, creating parent directories.
pub fn create_writer(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    let file =
        File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

pub fn fmt_opt(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v}"),
        None => NA.to_string(),
    }
}

pub fn parse_opt(field: &str) -> Result<Option<f64>> {
    if field == NA {
        Ok(None)
    } else {
        Ok(Some(field.parse::<f64>()?))
    }
}

/// Artifact readers used by resumable stages and tests. Duplicate keys are a
/// fatal data-integrity error.
pub fn read_sentiment(
    path: &Path,
) -> Result<BTreeMap<(String, NaiveDate, HourSlot), (f64, u32, f64)>> {
    let mut map = BTreeMap::new();
    for_each_record_line(path, SENTIMENT_HEADER, |line_no, line| {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            bail!("{}: line {line_no}: expected 6 fields", path.display());
        }
        let key = (
            fields[0].to_string(),
            fields[1].parse::<NaiveDate>()?,
            HourSlot::parse_label(fields[2])
                .with_context(|| format!("line {line_no}: bad slot"))?,
        );
        let value = (
            fields[3].parse::<f64>()?,
            fields[4].parse::<u32>()?,
            fields[5].parse::<f64>()?,
        );
        if map.insert(key, value).is_some() {
            bail!("{}: line {line_no}: duplicate key", path.display());
        }
        Ok(())
    })?;
    Ok(map)
}

/// One metrics row as stored on disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub turnover_total: f64,
    pub turnover_inst: f64,
    pub turnover_retail: f64,
    pub et_total: Option<f64>,
    pub et_inst: Option<f64>,
    pub et_retail: Option<f64>,
    pub window_used: u32,
}

pub fn read_metrics(
    path: &Path,
) -> Result<BTreeMap<(String, NaiveDate, HourSlot), MetricsRow>> {
    let mut map = BTreeMap::new();
    for_each_record_line(path, METRICS_HEADER, |line_no, line| {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 10 {
            bail!("{}: line {line_no}: expected 10 fields", path.display());
        }
        let key = (
            fields[0].to_string(),
            fields[1].parse::<NaiveDate>()?,
            HourSlot::parse_label(fields[2])
                .with_context(|| format!("line {line_no}: bad slot"))?,
        );
        let row = MetricsRow {
            turnover_total: fields[3].parse()?,
            turnover_inst: fields[4].parse()?,
            turnover_retail: fields[5].parse()?,
            et_total: parse_opt(fields[6])?,
            et_inst: parse_opt(fields[7])?,
            et_retail: parse_opt(fields[8])?,
            window_used: fields[9].parse()?,
        };
        if map.insert(key, row).is_some() {
            bail!("{}: line {line_no}: duplicate key", path.display());
        }
        Ok(())
    })?;
    Ok(map)
}

/// Alternative-threshold metrics row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsAltRow {
    pub turnover_inst: f64,
    pub turnover_retail: f64,
    pub et_inst: Option<f64>,
    pub et_retail: Option<f64>,
    pub window_used: u32,
}

pub fn read_metrics_alt(
    path: &Path,
) -> Result<BTreeMap<(String, NaiveDate, HourSlot), MetricsAltRow>> {
    let mut map = BTreeMap::new();
    for_each_record_line(path, METRICS_ALT_HEADER, |line_no, line| {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 8 {
            bail!("{}: line {line_no}: expected 8 fields", path.display());
        }
        let key = (
            fields[0].to_string(),
            fields[1].parse::<NaiveDate>()?,
            HourSlot::parse_label(fields[2])
                .with_context(|| format!("line {line_no}: bad slot"))?,
        );
        let row = MetricsAltRow {
            turnover_inst: fields[3].parse()?,
            turnover_retail: fields[4].parse()?,
            et_inst: parse_opt(fields[5])?,
            et_retail: parse_opt(fields[6])?,
            window_used: fields[7].parse()?,
        };
        if map.insert(key, row).is_some() {
            bail!("{}: line {line_no}: duplicate key", path.display());
        }
        Ok(())
    })?;
    Ok(map)
}

pub fn read_phases(path: &Path) -> Result<BTreeMap<String, Vec<RegimePhase>>> {
    let mut map: BTreeMap<String, Vec<RegimePhase>> = BTreeMap::new();
    for_each_record_line(path, PHASES_HEADER, |line_no, line| {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            bail!("{}: line {line_no}: expected 4 fields", path.display());
        }
        let kind = PhaseKind::parse_label(fields[1])
            .with_context(|| format!("line {line_no}: bad phase kind"))?;
        map.entry(fields[0].to_string())
            .or_default()
            .push(RegimePhase {
                kind,
                start: fields[2].parse()?,
                end: fields[3].parse()?,
            });
        Ok(())
    })?;
    Ok(map)
}

pub fn read_panel(path: &Path) -> Result<Vec<PanelRow>> {
    let mut rows = Vec::new();
    for_each_record_line(path, PANEL_HEADER, |line_no, line| {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 16 {
            bail!("{}: line {line_no}: expected 16 fields", path.display());
        }
        let regime = match fields[14] {
            NA => None,
            s => Some(
                PhaseKind::parse_label(s)
                    .with_context(|| format!("line {line_no}: bad regime"))?,
            ),
        };
        let tier = match fields[15] {
            NA => None,
            s => Some(
                CapTier::parse_label(s)
                    .with_context(|| format!("line {line_no}: bad tier"))?,
            ),
        };
        rows.push(PanelRow {
            stock_id: fields[0].to_string(),
            date: fields[1].parse()?,
            slot: HourSlot::parse_label(fields[2])
                .with_context(|| format!("line {line_no}: bad slot"))?,
            et: EtRecord {
                et_all: parse_opt(fields[3])?,
                et_inst: parse_opt(fields[4])?,
                et_retail: parse_opt(fields[5])?,
                et_inst_alt: parse_opt(fields[6])?,
                et_retail_alt: parse_opt(fields[7])?,
            },
            s_lag1: fields[8].parse()?,
            s_lag2: parse_opt(fields[9])?,
            s_lag3: parse_opt(fields[10])?,
            pb: parse_opt(fields[11])?,
            market_risk_premium: parse_opt(fields[12])?,
            market_return: parse_opt(fields[13])?,
            regime,
            tier,
        });
        Ok(())
    })?;
    Ok(rows)
}

pub fn write_post_line(out: &mut impl Write, post: &Post) -> Result<()> {
    writeln!(
        out,
        "{}\t{}\t{}\t{}",
        post.stock_id,
        post.posted_at.format("%Y-%m-%dT%H:%M:%S"),
        post.author_id,
        escape_text(&post.text)
    )?;
    Ok(())
}

pub fn write_trade_line(out: &mut impl Write, tick: &TradeTick) -> Result<()> {
    writeln!(
        out,
        "{}\t{}\t{}\t{}",
        tick.stock_id,
        tick.traded_at.format("%Y-%m-%dT%H:%M:%S"),
        tick.price,
        tick.volume
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cal() -> TradingCalendar {
        TradingCalendar::new(vec!["2020-03-02".parse().unwrap()]).unwrap()
    }

    #[test]
    fn escape_round_trip() {
        let text = "a\tb\nc\\d\re";
        assert_eq!(unescape_text(&escape_text(text)), text);
        assert_eq!(escape_text(text), "a\\tb\\nc\\\\d\\re");
    }

    #[test]
    fn post_parsing_accepts_and_rejects() {
        let calendar = cal();
        match parse_post_line("600000\t2020-03-02T09:45:00\tu1\thello", &calendar) {
            RowParse::Ok(post) => {
                assert_eq!(post.stock_id, "600000");
                assert_eq!(post.text, "hello");
            }
            RowParse::Reject { reason, .. } => panic!("rejected: {}", reason.code()),
        }
        let cases = [
            ("600000\t2020-03-02 12:15\tu1\thello", RejectReason::OutsideTradingHours),
            ("600000\t\tu1\thello", RejectReason::MissingTimestamp),
            ("600000\tnot-a-time\tu1\thello", RejectReason::BadTimestamp),
            ("600000\t2020-03-03T09:45:00\tu1\thello", RejectReason::NonTradingDay),
            ("600000\t2020-03-02T09:45:00\tu1\t \t", RejectReason::MalformedRow),
            ("600000\t2020-03-02T09:45:00\tu1\t", RejectReason::EmptyText),
            ("600000\t2020-03-02T09:45:00\tu1\t\\t", RejectReason::EmptyText),
        ];
        for (line, expected) in cases {
            match parse_post_line(line, &calendar) {
                RowParse::Reject { reason, .. } => assert_eq!(reason, expected, "{line:?}"),
                RowParse::Ok(_) => panic!("accepted {line:?}"),
            }
        }
    }

    #[test]
    fn trade_parsing_validates_fields() {
        let calendar = cal();
        match parse_trade_line("600000\t2020-03-02T10:00:00\t12.5\t300", &calendar) {
            RowParse::Ok(t) => {
                assert_eq!(t.price, 12.5);
                assert_eq!(t.volume, 300);
            }
            RowParse::Reject { reason, .. } => panic!("rejected: {}", reason.code()),
        }
        let cases = [
            ("600000\t2020-03-02T10:00:00\t-1\t300", RejectReason::BadPrice),
            ("600000\t2020-03-02T10:00:00\tx\t300", RejectReason::BadPrice),
            ("600000\t2020-03-02T10:00:00\t1.5\t0", RejectReason::BadVolume),
            ("600000\t2020-03-02T10:00:00\t1.5\t1.5", RejectReason::BadVolume),
            ("600000\t2020-03-02T09:25:00\t1.5\t10", RejectReason::OutsideTradingHours),
        ];
        for (line, expected) in cases {
            match parse_trade_line(line, &calendar) {
                RowParse::Reject { reason, .. } => assert_eq!(reason, expected, "{line:?}"),
                RowParse::Ok(_) => panic!("accepted {line:?}"),
            }
        }
    }

    #[test]
    fn timestamp_formats() {
        for s in [
            "2020-03-02T09:45:00",
            "2020-03-02 09:45:00",
            "2020-03-02T09:45",
            "2020-03-02 09:45",
        ] {
            assert!(parse_timestamp(s).is_some(), "{s}");
        }
        assert!(parse_timestamp("2020/03/02 09:45").is_none());
    }
}
