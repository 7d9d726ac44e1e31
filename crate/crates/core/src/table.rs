//! The regression report grid: full-sample and per-class slot cells, regime
//! and cap-tier splits, and the robustness variants (longer sentiment lags,
//! added controls, alternative classification threshold).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::diagnostics::{lm_serial_test, white_test, TestResult};
use crate::ols::{fit_ols, OlsError, OlsOptions};
use crate::panel::PanelRow;
use crate::regimes::{CapTier, PhaseKind};
use crate::time::HourSlot;

/// Which dependent excess-turnover series a cell regresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PanelClass {
    All,
    Institutional,
    Retail,
}

impl PanelClass {
    pub const ALL: [PanelClass; 3] = [
        PanelClass::All,
        PanelClass::Institutional,
        PanelClass::Retail,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PanelClass::All => "all",
            PanelClass::Institutional => "inst",
            PanelClass::Retail => "retail",
        }
    }
}

/// Row filter applied before fitting a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PanelFilter {
    All,
    Regime(PhaseKind),
    Tier(CapTier),
}

impl PanelFilter {
    pub fn label(self) -> &'static str {
        match self {
            PanelFilter::All => "full",
            PanelFilter::Regime(PhaseKind::Bull) => "bull",
            PanelFilter::Regime(PhaseKind::Bear) => "bear",
            PanelFilter::Tier(CapTier::Large) => "large",
            PanelFilter::Tier(CapTier::Mid) => "mid",
            PanelFilter::Tier(CapTier::Small) => "small",
        }
    }
}

/// Slot coverage of a cell: a single slot (the table columns) or slots S2-S4
/// pooled (the within-day diagnostic fits).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotScope {
    Slot(HourSlot),
    Pooled,
}

impl SlotScope {
    pub fn label(self) -> String {
        match self {
            SlotScope::Slot(slot) => String::from(slot.label()),
            SlotScope::Pooled => String::from("pooled"),
        }
    }
}

/// Specification variant of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Base,
    Lag2,
    Lag3,
    Controls,
    AltThreshold,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Variant::Base => "base",
            Variant::Lag2 => "lag2",
            Variant::Lag3 => "lag3",
            Variant::Controls => "controls",
            Variant::AltThreshold => "alt_threshold",
        }
    }
}

/// Identity of one report cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellId {
    pub filter: PanelFilter,
    pub class: PanelClass,
    pub scope: SlotScope,
    pub variant: Variant,
}

impl CellId {
    /// Stable textual id, e.g. `full/inst/S3/base`.
    pub fn code(&self) -> String {
        format!(
            "{}/{}/{}/{}",
            self.filter.label(),
            self.class.label(),
            self.scope.label(),
            self.variant.label()
        )
    }
}

/// One estimated coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientReport {
    pub name: &'static str,
    pub estimate: f64,
    pub se: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

/// Everything reported for a successfully fitted cell.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub n_obs: usize,
    /// `[const, sentiment lag, controls...]`.
    pub coefficients: Vec<CoefficientReport>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub f_statistic: f64,
    /// Squared t statistic of the sentiment coefficient.
    pub wald_chi2: f64,
    pub white: Option<TestResult>,
    /// Absent for single-slot cells, where every within-day group holds one
    /// row and lagged residuals are undefined.
    pub lm: Option<TestResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsufficientReason {
    Empty,
    TooFewRows { n: usize, needed: usize },
    Collinear,
}

impl InsufficientReason {
    pub fn label(self) -> &'static str {
        match self {
            InsufficientReason::Empty => "insufficient-data:empty",
            InsufficientReason::TooFewRows { .. } => "insufficient-data:too-few-rows",
            InsufficientReason::Collinear => "insufficient-data:collinear",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome {
    Fit(FitSummary),
    Insufficient(InsufficientReason),
}

/// Report for one cell of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionReport {
    pub cell: CellId,
    pub outcome: CellOutcome,
}

/// Which parts of the grid to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableToggles {
    pub base: bool,
    pub regimes: bool,
    pub tiers: bool,
    pub robust_lags: bool,
    pub robust_controls: bool,
    pub robust_threshold: bool,
    pub pooled_diagnostics: bool,
}

impl Default for TableToggles {
    fn default() -> Self {
        TableToggles {
            base: true,
            regimes: true,
            tiers: true,
            robust_lags: true,
            robust_controls: true,
            robust_threshold: true,
            pooled_diagnostics: true,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TableOptions {
    pub toggles: TableToggles,
    pub lm_lags: usize,
    pub robust_se: bool,
}

impl Default for TableOptions {
    fn default() -> Self {
        TableOptions {
            toggles: TableToggles::default(),
            lm_lags: 1,
            robust_se: false,
        }
    }
}

/// Enumerate the full cell grid in its fixed reporting order.
pub fn cell_grid(toggles: &TableToggles) -> Vec<CellId> {
    let mut cells = Vec::new();
    let slots = [HourSlot::S2, HourSlot::S3, HourSlot::S4];
    let mut push = |filter, class, scope, variant| {
        cells.push(CellId {
            filter,
            class,
            scope,
            variant,
        });
    };

    if toggles.base {
        for class in PanelClass::ALL {
            for slot in slots {
                push(PanelFilter::All, class, SlotScope::Slot(slot), Variant::Base);
            }
        }
    }
    if toggles.regimes {
        for kind in [PhaseKind::Bull, PhaseKind::Bear] {
            for class in PanelClass::ALL {
                for slot in slots {
                    push(
                        PanelFilter::Regime(kind),
                        class,
                        SlotScope::Slot(slot),
                        Variant::Base,
                    );
                }
            }
        }
    }
    if toggles.tiers {
        for tier in CapTier::ALL {
            for class in PanelClass::ALL {
                for slot in slots {
                    push(
                        PanelFilter::Tier(tier),
                        class,
                        SlotScope::Slot(slot),
                        Variant::Base,
                    );
                }
            }
        }
    }
    if toggles.robust_lags {
        for class in PanelClass::ALL {
            for slot in [HourSlot::S3, HourSlot::S4] {
                push(PanelFilter::All, class, SlotScope::Slot(slot), Variant::Lag2);
            }
            push(
                PanelFilter::All,
                class,
                SlotScope::Slot(HourSlot::S4),
                Variant::Lag3,
            );
        }
    }
    if toggles.robust_controls {
        for class in PanelClass::ALL {
            for slot in slots {
                push(
                    PanelFilter::All,
                    class,
                    SlotScope::Slot(slot),
                    Variant::Controls,
                );
            }
        }
    }
    if toggles.robust_threshold {
        for class in [PanelClass::Institutional, PanelClass::Retail] {
            for slot in slots {
                push(
                    PanelFilter::All,
                    class,
                    SlotScope::Slot(slot),
                    Variant::AltThreshold,
                );
            }
        }
    }
    if toggles.pooled_diagnostics {
        for variant in [Variant::Base, Variant::Lag2, Variant::Lag3] {
            for class in PanelClass::ALL {
                push(PanelFilter::All, class, SlotScope::Pooled, variant);
            }
        }
    }
    cells
}

/// Fit every cell of the grid over the panel rows, which must be sorted by
/// (stock, date, slot).
pub fn run_table(rows: &[PanelRow], options: &TableOptions) -> Vec<RegressionReport> {
    cell_grid(&options.toggles)
        .into_iter()
        .map(|cell| RegressionReport {
            outcome: fit_cell(rows, &cell, options),
            cell,
        })
        .collect()
}

fn dependent_of(row: &PanelRow, cell: &CellId) -> Option<f64> {
    match (cell.variant, cell.class) {
        (Variant::AltThreshold, PanelClass::Institutional) => row.et.et_inst_alt,
        (Variant::AltThreshold, PanelClass::Retail) => row.et.et_retail_alt,
        (Variant::AltThreshold, PanelClass::All) => row.et.et_all,
        (_, PanelClass::All) => row.et.et_all,
        (_, PanelClass::Institutional) => row.et.et_inst,
        (_, PanelClass::Retail) => row.et.et_retail,
    }
}

fn sentiment_of(row: &PanelRow, cell: &CellId) -> Option<f64> {
    match cell.variant {
        Variant::Lag2 => row.s_lag2,
        Variant::Lag3 => row.s_lag3,
        _ => Some(row.s_lag1),
    }
}

fn sentiment_name(variant: Variant) -> &'static str {
    match variant {
        Variant::Lag2 => "s_lag2",
        Variant::Lag3 => "s_lag3",
        _ => "s_lag1",
    }
}

/// Fit one cell.
pub fn fit_cell(rows: &[PanelRow], cell: &CellId, options: &TableOptions) -> CellOutcome {
    let with_controls = cell.variant == Variant::Controls;
    let mut y = Vec::new();
    let mut sentiment = Vec::new();
    let mut pb = Vec::new();
    let mut mrp = Vec::new();
    let mut mret = Vec::new();
    let mut group_lengths: Vec<usize> = Vec::new();
    let mut last_group: Option<(&str, chrono::NaiveDate)> = None;

    for row in rows {
        let slot_ok = match cell.scope {
            SlotScope::Slot(slot) => row.slot == slot,
            SlotScope::Pooled => true,
        };
        if !slot_ok {
            continue;
        }
        let filter_ok = match cell.filter {
            PanelFilter::All => true,
            PanelFilter::Regime(kind) => row.regime == Some(kind),
            PanelFilter::Tier(tier) => row.tier == Some(tier),
        };
        if !filter_ok {
            continue;
        }
        let (Some(dep), Some(s)) = (dependent_of(row, cell), sentiment_of(row, cell)) else {
            continue;
        };
        if with_controls {
            let (Some(b), Some(r), Some(m)) =
                (row.pb, row.market_risk_premium, row.market_return)
            else {
                continue;
            };
            pb.push(b);
            mrp.push(r);
            mret.push(m);
        }
        y.push(dep);
        sentiment.push(s);
        let group = (row.stock_id.as_str(), row.date);
        if last_group == Some(group) {
            *group_lengths.last_mut().unwrap() += 1;
        } else {
            group_lengths.push(1);
            last_group = Some(group);
        }
    }

    if y.is_empty() {
        return CellOutcome::Insufficient(InsufficientReason::Empty);
    }
    let mut cols: Vec<&[f64]> = alloc::vec![sentiment.as_slice()];
    let mut names = alloc::vec![sentiment_name(cell.variant)];
    if with_controls {
        cols.push(pb.as_slice());
        cols.push(mrp.as_slice());
        cols.push(mret.as_slice());
        names.extend(["pb", "mrp", "mret"]);
    }
    let needed = cols.len() + 2;
    if y.len() < needed {
        return CellOutcome::Insufficient(InsufficientReason::TooFewRows {
            n: y.len(),
            needed,
        });
    }
    let fit = match fit_ols(
        &y,
        &cols,
        &OlsOptions {
            robust_se: options.robust_se,
        },
    ) {
        Ok(fit) => fit,
        Err(OlsError::Collinear { .. }) => {
            return CellOutcome::Insufficient(InsufficientReason::Collinear)
        }
        Err(OlsError::Underdetermined { n, needed }) => {
            return CellOutcome::Insufficient(InsufficientReason::TooFewRows { n, needed })
        }
        Err(_) => return CellOutcome::Insufficient(InsufficientReason::Empty),
    };

    let mut coefficients = Vec::with_capacity(fit.coef.len());
    for (j, name) in core::iter::once("const").chain(names).enumerate() {
        coefficients.push(CoefficientReport {
            name,
            estimate: fit.coef[j],
            se: fit.se[j],
            t_stat: fit.t_stat[j],
            p_value: fit.p_value[j],
        });
    }
    let wald_chi2 = fit.t_stat[1] * fit.t_stat[1];
    let white = white_test(&fit.residuals, &cols).ok();
    let lm = lm_serial_test(&fit.residuals, &cols, &group_lengths, options.lm_lags).ok();

    CellOutcome::Fit(FitSummary {
        n_obs: fit.n,
        coefficients,
        r_squared: fit.r_squared,
        adj_r_squared: fit.adj_r_squared,
        f_statistic: fit.f_statistic,
        wald_chi2,
        white,
        lm,
    })
}

/// Significance stars: `***` below 1%, `**` below 5%, `*` below 10%.
pub fn stars(p_value: f64) -> &'static str {
    if p_value < 0.01 {
        "***"
    } else if p_value < 0.05 {
        "**"
    } else if p_value < 0.10 {
        "*"
    } else {
        ""
    }
}
