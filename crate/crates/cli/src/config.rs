//! Flat key-value configuration: parsing, CLI overrides, canonical
//! serialization, and validation.
//!
//! The format is one `key = value` per line; blank lines and lines starting
//! with `#` are ignored. List-valued keys (`lexicon.dict`, `ingest.bot_id`)
//! repeat the key on several lines; the first occurrence replaces any default
//! list. Index series files are configured per exchange prefix as
//! `input.index.<prefix> = path`, with `default` as the fallback prefix.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};

use overtrade_core::lexicon::ConflictPolicy;
use overtrade_core::micro::{BaselineMode, TurnoverVariant};
use overtrade_core::table::TableToggles;

/// Parameters of the synthetic dataset generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub stocks: u32,
    pub days: u32,
    pub beta_inst: f64,
    pub beta_retail: f64,
    pub alpha: f64,
    pub noise_sd: f64,
    pub posts_per_slot: u32,
    pub inst_trades_per_slot: u32,
    pub retail_trades_per_slot: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            stocks: 100,
            days: 250,
            beta_inst: 0.13,
            beta_retail: 0.13,
            alpha: 0.0,
            noise_sd: 0.05,
            posts_per_slot: 2,
            inst_trades_per_slot: 1,
            retail_trades_per_slot: 3,
        }
    }
}

/// The complete effective configuration of a pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub posts: Option<String>,
    pub trades: Option<String>,
    pub shares: Option<String>,
    pub fundamentals: Option<String>,
    pub calendar: Option<String>,
    pub constituents: Option<String>,
    /// Exchange prefix -> index series path; `default` catches the rest.
    pub index_series: BTreeMap<String, String>,

    pub lexicon_dicts: Vec<String>,
    pub negations: Option<String>,
    pub conflict_policy: ConflictPolicy,
    pub freq_threshold: u64,
    pub accuracy_fixture: Option<String>,

    pub bot_ids: Vec<String>,
    pub sparse_filter: bool,
    pub suspension_filter: bool,
    pub max_suspension_days: u32,
    pub index_effect_filter: bool,
    pub max_index_events: u32,

    pub amount_threshold: f64,
    pub share_threshold: u64,
    pub alt_amount_threshold: f64,
    pub turnover_variant: TurnoverVariant,
    pub cumulative_turnover: bool,
    pub baseline_mode: BaselineMode,
    pub window: u32,
    pub min_window: u32,

    pub regime_window: usize,
    pub regime_min_phase: usize,
    pub tier_large: f64,
    pub tier_mid: f64,

    pub lm_lags: usize,
    pub robust_se: bool,
    pub toggles: TableToggles,

    pub out_dir: String,
    pub threads: usize,
    pub seed: u64,
    pub synth: SynthConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            posts: None,
            trades: None,
            shares: None,
            fundamentals: None,
            calendar: None,
            constituents: None,
            index_series: BTreeMap::new(),
            lexicon_dicts: Vec::new(),
            negations: None,
            conflict_policy: ConflictPolicy::FirstWins,
            freq_threshold: 80,
            accuracy_fixture: None,
            bot_ids: vec!["Ask-Sectary Robot".to_string(), "AI Summary".to_string()],
            sparse_filter: true,
            suspension_filter: true,
            max_suspension_days: 30,
            index_effect_filter: false,
            max_index_events: 2,
            amount_threshold: 200_000.0,
            share_threshold: 100_000,
            alt_amount_threshold: 500_000.0,
            turnover_variant: TurnoverVariant::ValueOverShares,
            cumulative_turnover: false,
            baseline_mode: BaselineMode::SameSlot,
            window: 20,
            min_window: 10,
            regime_window: 105,
            regime_min_phase: 105,
            tier_large: 1e11,
            tier_mid: 1e10,
            lm_lags: 1,
            robust_se: false,
            toggles: TableToggles::default(),
            out_dir: "out".to_string(),
            threads: 1,
            seed: 42,
            synth: SynthConfig::default(),
        }
    }
}

/// Tracks which list keys have been explicitly set, so the first explicit
/// occurrence replaces the default list instead of appending to it.
pub struct ConfigBuilder {
    config: PipelineConfig,
    touched: BTreeSet<&'static str>,
    min_window_explicit: bool,
}

impl Default for ConfigBuilder {
    fn default() -> Self {
        ConfigBuilder {
            config: PipelineConfig::default(),
            touched: BTreeSet::new(),
            min_window_explicit: false,
        }
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => bail!("{key}: expected true or false, got {value:?}"),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| anyhow::anyhow!("{key}: {e} (got {value:?})"))
}

impl ConfigBuilder {
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let c = &mut self.config;
        match key {
            "input.posts" => c.posts = Some(value.to_string()),
            "input.trades" => c.trades = Some(value.to_string()),
            "input.shares" => c.shares = Some(value.to_string()),
            "input.fundamentals" => c.fundamentals = Some(value.to_string()),
            "input.calendar" => c.calendar = Some(value.to_string()),
            "input.constituents" => c.constituents = Some(value.to_string()),
            "lexicon.dict" => {
                if self.touched.insert("lexicon.dict") {
                    c.lexicon_dicts.clear();
                }
                c.lexicon_dicts.push(value.to_string());
            }
            "lexicon.negations" => c.negations = Some(value.to_string()),
            "lexicon.conflict_policy" => {
                c.conflict_policy = match value {
                    "first-wins" => ConflictPolicy::FirstWins,
                    "sum-sign" => ConflictPolicy::SumSign,
                    _ => bail!("lexicon.conflict_policy: unknown policy {value:?}"),
                }
            }
            "lexicon.freq_threshold" => c.freq_threshold = parse_num(key, value)?,
            "lexicon.accuracy_fixture" => c.accuracy_fixture = Some(value.to_string()),
            "ingest.bot_id" => {
                if self.touched.insert("ingest.bot_id") {
                    c.bot_ids.clear();
                }
                c.bot_ids.push(value.to_string());
            }
            "ingest.sparse_filter" => c.sparse_filter = parse_bool(key, value)?,
            "ingest.suspension_filter" => c.suspension_filter = parse_bool(key, value)?,
            "ingest.max_suspension_days" => c.max_suspension_days = parse_num(key, value)?,
            "ingest.index_effect_filter" => c.index_effect_filter = parse_bool(key, value)?,
            "ingest.max_index_events" => c.max_index_events = parse_num(key, value)?,
            "micro.amount_threshold" => c.amount_threshold = parse_num(key, value)?,
            "micro.share_threshold" => c.share_threshold = parse_num(key, value)?,
            "micro.alt_amount_threshold" => c.alt_amount_threshold = parse_num(key, value)?,
            "micro.turnover_variant" => {
                c.turnover_variant = match value {
                    "value" => TurnoverVariant::ValueOverShares,
                    "volume" => TurnoverVariant::VolumeOverShares,
                    _ => bail!("micro.turnover_variant: expected value or volume, got {value:?}"),
                }
            }
            "micro.cumulative" => c.cumulative_turnover = parse_bool(key, value)?,
            "micro.baseline_mode" => {
                c.baseline_mode = match value {
                    "same-slot" => BaselineMode::SameSlot,
                    "all-slots" => BaselineMode::AllSlots,
                    _ => bail!("micro.baseline_mode: expected same-slot or all-slots"),
                }
            }
            "micro.window" => {
                c.window = parse_num(key, value)?;
                if !self.min_window_explicit {
                    c.min_window = c.window.div_ceil(2);
                }
            }
            "micro.min_window" => {
                c.min_window = parse_num(key, value)?;
                self.min_window_explicit = true;
            }
            "regimes.window" => c.regime_window = parse_num(key, value)?,
            "regimes.min_phase" => c.regime_min_phase = parse_num(key, value)?,
            "tiers.large" => c.tier_large = parse_num(key, value)?,
            "tiers.mid" => c.tier_mid = parse_num(key, value)?,
            "regress.lm_lags" => c.lm_lags = parse_num(key, value)?,
            "regress.robust_se" => c.robust_se = parse_bool(key, value)?,
            "table.base" => c.toggles.base = parse_bool(key, value)?,
            "table.regimes" => c.toggles.regimes = parse_bool(key, value)?,
            "table.tiers" => c.toggles.tiers = parse_bool(key, value)?,
            "table.robust_lags" => c.toggles.robust_lags = parse_bool(key, value)?,
            "table.robust_controls" => c.toggles.robust_controls = parse_bool(key, value)?,
            "table.robust_threshold" => c.toggles.robust_threshold = parse_bool(key, value)?,
            "table.pooled_diagnostics" => c.toggles.pooled_diagnostics = parse_bool(key, value)?,
            "out.dir" => c.out_dir = value.to_string(),
            "threads" => c.threads = parse_num(key, value)?,
            "seed" => c.seed = parse_num(key, value)?,
            "synth.stocks" => c.synth.stocks = parse_num(key, value)?,
            "synth.days" => c.synth.days = parse_num(key, value)?,
            "synth.beta_inst" => c.synth.beta_inst = parse_num(key, value)?,
            "synth.beta_retail" => c.synth.beta_retail = parse_num(key, value)?,
            "synth.alpha" => c.synth.alpha = parse_num(key, value)?,
            "synth.noise_sd" => c.synth.noise_sd = parse_num(key, value)?,
            "synth.posts_per_slot" => c.synth.posts_per_slot = parse_num(key, value)?,
            "synth.inst_trades_per_slot" => c.synth.inst_trades_per_slot = parse_num(key, value)?,
            "synth.retail_trades_per_slot" => {
                c.synth.retail_trades_per_slot = parse_num(key, value)?
            }
            _ => {
                if let Some(prefix) = key.strip_prefix("input.index.") {
                    if prefix.is_empty() {
                        bail!("input.index.<prefix>: empty prefix");
                    }
                    c.index_series.insert(prefix.to_string(), value.to_string());
                } else {
                    bail!("unknown configuration key {key:?}");
                }
            }
        }
        Ok(())
    }

    pub fn apply_line(&mut self, line: &str, line_no: usize) -> Result<()> {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            return Ok(());
        }
        let (key, value) = trimmed
            .split_once('=')
            .with_context(|| format!("line {line_no}: expected key = value"))?;
        self.apply(key.trim(), value.trim())
            .with_context(|| format!("line {line_no}"))
    }

    pub fn finish(self) -> PipelineConfig {
        self.config
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<PipelineConfig> {
        let mut builder = ConfigBuilder::default();
        for (i, line) in text.lines().enumerate() {
            builder.apply_line(line, i + 1)?;
        }
        Ok(builder.finish())
    }

    pub fn from_file(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        PipelineConfig::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Apply `key=value` overrides (the CLI `--set` flag). Overriding
    /// `micro.window` re-derives `micro.min_window` unless the override list
    /// also sets it.
    pub fn apply_overrides(self, overrides: &[(String, String)]) -> Result<PipelineConfig> {
        let mut builder = ConfigBuilder {
            config: self,
            touched: BTreeSet::new(),
            min_window_explicit: false,
        };
        for (key, value) in overrides {
            builder.apply(key, value)?;
        }
        Ok(builder.finish())
    }

    /// Canonical serialization; parsing it back yields an equal config.
    pub fn to_config_string(&self) -> String {
        fn kv_line(s: &mut String, k: &str, v: &str) {
            let _ = writeln!(s, "{k} = {v}");
        }
        fn opt(s: &mut String, k: &str, v: &Option<String>) {
            if let Some(v) = v {
                kv_line(s, k, v);
            }
        }
        let mut s = String::new();
        opt(&mut s, "input.posts", &self.posts);
        opt(&mut s, "input.trades", &self.trades);
        opt(&mut s, "input.shares", &self.shares);
        opt(&mut s, "input.fundamentals", &self.fundamentals);
        opt(&mut s, "input.calendar", &self.calendar);
        opt(&mut s, "input.constituents", &self.constituents);
        for (prefix, path) in &self.index_series {
            kv_line(&mut s, &format!("input.index.{prefix}"), path);
        }
        for dict in &self.lexicon_dicts {
            kv_line(&mut s, "lexicon.dict", dict);
        }
        opt(&mut s, "lexicon.negations", &self.negations);
        kv_line(
            &mut s,
            "lexicon.conflict_policy",
            match self.conflict_policy {
                ConflictPolicy::FirstWins => "first-wins",
                ConflictPolicy::SumSign => "sum-sign",
            },
        );
        kv_line(&mut s, "lexicon.freq_threshold", &self.freq_threshold.to_string());
        opt(&mut s, "lexicon.accuracy_fixture", &self.accuracy_fixture);
        for bot in &self.bot_ids {
            kv_line(&mut s, "ingest.bot_id", bot);
        }
        kv_line(&mut s, "ingest.sparse_filter", &self.sparse_filter.to_string());
        kv_line(
            &mut s,
            "ingest.suspension_filter",
            &self.suspension_filter.to_string(),
        );
        kv_line(
            &mut s,
            "ingest.max_suspension_days",
            &self.max_suspension_days.to_string(),
        );
        kv_line(
            &mut s,
            "ingest.index_effect_filter",
            &self.index_effect_filter.to_string(),
        );
        kv_line(&mut s, "ingest.max_index_events", &self.max_index_events.to_string());
        kv_line(&mut s, "micro.amount_threshold", &self.amount_threshold.to_string());
        kv_line(&mut s, "micro.share_threshold", &self.share_threshold.to_string());
        kv_line(
            &mut s,
            "micro.alt_amount_threshold",
            &self.alt_amount_threshold.to_string(),
        );
        kv_line(
            &mut s,
            "micro.turnover_variant",
            match self.turnover_variant {
                TurnoverVariant::ValueOverShares => "value",
                TurnoverVariant::VolumeOverShares => "volume",
            },
        );
        kv_line(&mut s, "micro.cumulative", &self.cumulative_turnover.to_string());
        kv_line(
            &mut s,
            "micro.baseline_mode",
            match self.baseline_mode {
                BaselineMode::SameSlot => "same-slot",
                BaselineMode::AllSlots => "all-slots",
            },
        );
        kv_line(&mut s, "micro.window", &self.window.to_string());
        kv_line(&mut s, "micro.min_window", &self.min_window.to_string());
        kv_line(&mut s, "regimes.window", &self.regime_window.to_string());
        kv_line(&mut s, "regimes.min_phase", &self.regime_min_phase.to_string());
        kv_line(&mut s, "tiers.large", &self.tier_large.to_string());
        kv_line(&mut s, "tiers.mid", &self.tier_mid.to_string());
        kv_line(&mut s, "regress.lm_lags", &self.lm_lags.to_string());
        kv_line(&mut s, "regress.robust_se", &self.robust_se.to_string());
        kv_line(&mut s, "table.base", &self.toggles.base.to_string());
        kv_line(&mut s, "table.regimes", &self.toggles.regimes.to_string());
        kv_line(&mut s, "table.tiers", &self.toggles.tiers.to_string());
        kv_line(&mut s, "table.robust_lags", &self.toggles.robust_lags.to_string());
        kv_line(
            &mut s,
            "table.robust_controls",
            &self.toggles.robust_controls.to_string(),
        );
        kv_line(
            &mut s,
            "table.robust_threshold",
            &self.toggles.robust_threshold.to_string(),
        );
        kv_line(
            &mut s,
            "table.pooled_diagnostics",
            &self.toggles.pooled_diagnostics.to_string(),
        );
        kv_line(&mut s, "out.dir", &self.out_dir);
        kv_line(&mut s, "threads", &self.threads.to_string());
        kv_line(&mut s, "seed", &self.seed.to_string());
        kv_line(&mut s, "synth.stocks", &self.synth.stocks.to_string());
        kv_line(&mut s, "synth.days", &self.synth.days.to_string());
        kv_line(&mut s, "synth.beta_inst", &self.synth.beta_inst.to_string());
        kv_line(&mut s, "synth.beta_retail", &self.synth.beta_retail.to_string());
        kv_line(&mut s, "synth.alpha", &self.synth.alpha.to_string());
        kv_line(&mut s, "synth.noise_sd", &self.synth.noise_sd.to_string());
        kv_line(&mut s, "synth.posts_per_slot", &self.synth.posts_per_slot.to_string());
        kv_line(
            &mut s,
            "synth.inst_trades_per_slot",
            &self.synth.inst_trades_per_slot.to_string(),
        );
        kv_line(
            &mut s,
            "synth.retail_trades_per_slot",
            &self.synth.retail_trades_per_slot.to_string(),
        );
        s
    }

    /// Check that the named input paths exist; `label -> path option`.
    pub fn require_inputs(&self, needs: &[(&str, &Option<String>)]) -> Result<()> {
        for (label, path) in needs {
            match path {
                None => bail!("missing required input {label}"),
                Some(p) if !Path::new(p).exists() => {
                    bail!("{label} file not found: {p}")
                }
                _ => {}
            }
        }
        if self.window == 0 {
            bail!("micro.window must be at least 1");
        }
        if self.min_window == 0 || self.min_window > self.window {
            bail!("micro.min_window must be in 1..=micro.window");
        }
        if self.amount_threshold <= 0.0 || self.alt_amount_threshold <= 0.0 {
            bail!("classification thresholds must be positive");
        }
        if self.tier_mid <= 0.0 || self.tier_large <= self.tier_mid {
            bail!("tier thresholds must satisfy 0 < mid < large");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let config = PipelineConfig::default();
        let text = config.to_config_string();
        let parsed = PipelineConfig::parse(&text).unwrap();
        assert_eq!(parsed, config);
    }

    #[test]
    fn full_config_round_trips() {
        let mut b = ConfigBuilder::default();
        for (k, v) in [
            ("input.posts", "data/posts.tsv"),
            ("input.trades", "data/trades.tsv"),
            ("input.index.SH", "data/sse.tsv"),
            ("input.index.default", "data/all.tsv"),
            ("lexicon.dict", "lex/a.tsv"),
            ("lexicon.dict", "lex/b.tsv"),
            ("lexicon.conflict_policy", "sum-sign"),
            ("ingest.bot_id", "spammer"),
            ("micro.window", "8"),
            ("micro.turnover_variant", "volume"),
            ("table.tiers", "false"),
            ("synth.beta_inst", "0.25"),
            ("seed", "7"),
        ] {
            b.apply(k, v).unwrap();
        }
        let config = b.finish();
        // explicit bot list replaced the defaults
        assert_eq!(config.bot_ids, vec!["spammer".to_string()]);
        assert_eq!(config.lexicon_dicts.len(), 2);
        // min_window follows window when not explicit
        assert_eq!(config.min_window, 4);
        let reparsed = PipelineConfig::parse(&config.to_config_string()).unwrap();
        assert_eq!(reparsed, config);
    }

    #[test]
    fn unknown_key_is_an_error() {
        assert!(PipelineConfig::parse("nope = 1").is_err());
        assert!(PipelineConfig::parse("micro.window = x").is_err());
        assert!(PipelineConfig::parse("no equals sign").is_err());
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let config = PipelineConfig::parse("# comment\n\nseed = 9\n").unwrap();
        assert_eq!(config.seed, 9);
    }

    #[test]
    fn overrides_apply_last() {
        let base = PipelineConfig::parse("seed = 1\nthreads = 2\n").unwrap();
        let over = base
            .apply_overrides(&[("seed".to_string(), "5".to_string())])
            .unwrap();
        assert_eq!(over.seed, 5);
        assert_eq!(over.threads, 2);
    }
}
